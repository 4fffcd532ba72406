"""Bayesian record linkage with exclusive-variable regressions.

One-to-one bipartite matching between two files via a Fellegi-Sunter
mixture over ordinal field comparisons, sampled by MCMC, with optional
regression components tying file-exclusive variables to the linkage and
multiple-imputation combining of post-linkage analyses.
"""

__version__ = "0.1.0"

from .comparison import (
    ComparisonTable,
    FieldSpec,
    RecordFile,
    build_comparison_table,
    load_record_file,
)
from .errors import (
    BayeslinkError,
    ConfigError,
    DataError,
    DegeneratePosteriorError,
    InvariantViolation,
)

__all__ = [
    "BayeslinkError",
    "ComparisonTable",
    "ConfigError",
    "DataError",
    "DegeneratePosteriorError",
    "FieldSpec",
    "InvariantViolation",
    "RecordFile",
    "__version__",
    "build_comparison_table",
    "load_record_file",
]
