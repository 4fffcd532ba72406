"""Field comparison: ordinal agreement levels and the pairwise comparison table.

Comparing two files record by record produces, for each candidate pair
(i, j) and each linking field k, an ordinal agreement level in
{1, ..., L_k} with 1 = total disagreement and L_k = exact agreement.
Three field kinds are supported:

* ``exact-categorical``: agree (level 2) or disagree (level 1).
* ``digit-prefix``: a fixed-width digit string compared by the length of
  the shared prefix, giving D + 1 levels for D digits.
* ``date-ymd``: an ISO date compared hierarchically as year, then month,
  then day, giving 4 levels.

A missing value on either side is scored as total disagreement (level 1);
the table records how many comparisons were affected so callers can warn.

Pairs are materialized per block: records carrying the same block key are
comparable, records in blocks present in only one file are retained in the
file but produce no pairs. Without a block key the whole cross product is
one block. Each materialized pair stores a single mixed-radix pattern code
combining all K field levels; per-field levels are recovered through small
decode tables. This keeps the table at one integer per pair and makes
likelihood evaluation a table lookup.
"""

from __future__ import annotations

import csv
import datetime
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

# A comparison pattern is one cell of the K-way level product. Capping the
# product keeps the per-pattern lookup tables from dwarfing the pair data.
MAX_PATTERNS = 1 << 20

_FIELD_KINDS = ("exact-categorical", "digit-prefix", "date-ymd")


@dataclass(frozen=True)
class FieldSpec:
    """Declaration of one linking field.

    Parameters
    ----------
    name : str
        Column name in both record files.
    kind : str
        One of ``exact-categorical``, ``digit-prefix``, ``date-ymd``.
    digits : int, optional
        Width of the digit string; required for ``digit-prefix``.
    """

    name: str
    kind: str
    digits: int | None = None

    def __post_init__(self):
        if self.kind not in _FIELD_KINDS:
            raise ConfigError(
                f"field {self.name!r}: unknown kind {self.kind!r}; "
                f"expected one of {', '.join(_FIELD_KINDS)}"
            )
        if self.kind == "digit-prefix":
            if self.digits is None or self.digits < 1:
                raise ConfigError(
                    f"field {self.name!r}: digit-prefix needs digits >= 1"
                )
        elif self.digits is not None:
            raise ConfigError(
                f"field {self.name!r}: digits only applies to digit-prefix"
            )

    @property
    def levels(self) -> int:
        """Number of ordinal agreement levels L_k."""
        if self.kind == "exact-categorical":
            return 2
        if self.kind == "digit-prefix":
            return self.digits + 1
        return 4


def exact_agreement_level(a, b) -> int:
    """Level 2 if the two values are equal, else 1."""
    return 2 if a == b else 1


def digit_prefix_level(a: str, b: str, digits: int) -> int:
    """1 + length of the shared digit prefix of two D-digit strings."""
    a = str(a)
    b = str(b)
    for v in (a, b):
        if len(v) != digits or not v.isdigit():
            raise DataError(
                f"expected a {digits}-digit string, got {v!r}"
            )
    n = 0
    while n < digits and a[n] == b[n]:
        n += 1
    return n + 1


def date_ymd_level(a: str, b: str) -> int:
    """Hierarchical year/month/day agreement of two ISO dates.

    1 = years differ, 2 = year agrees, 3 = year and month agree,
    4 = full agreement.
    """
    ya, ma, da = _parse_date(a)
    yb, mb, db = _parse_date(b)
    if ya != yb:
        return 1
    if ma != mb:
        return 2
    if da != db:
        return 3
    return 4


def _parse_date(value: str) -> tuple[int, int, int]:
    try:
        d = datetime.date.fromisoformat(str(value))
    except ValueError as exc:
        raise DataError(f"expected an ISO date (YYYY-MM-DD), got {value!r}") from exc
    return d.year, d.month, d.day


@dataclass
class RecordFile:
    """One file of records with linking fields and optional exclusive columns.

    Attributes
    ----------
    ids : ndarray
        Record identifiers, unique within the file.
    fields : dict[str, ndarray]
        Linking field values keyed by field name (object or string dtype;
        missing values are empty strings).
    x : ndarray or None
        Exclusive numeric columns, shape (n, q). File A conventionally
        carries the scalar outcome (q = 1), file B the covariates.
    x_names : tuple[str, ...]
        Column names for ``x``.
    block : ndarray or None
        Block key per record; None means a single all-pairs block.
    name : str
        Label used in error messages.
    """

    ids: np.ndarray
    fields: dict[str, np.ndarray]
    x: np.ndarray | None = None
    x_names: tuple[str, ...] = ()
    block: np.ndarray | None = None
    name: str = "records"

    def __post_init__(self):
        self.ids = np.asarray(self.ids)
        if len(np.unique(self.ids)) != len(self.ids):
            raise DataError("record identifiers are not unique", file=self.name)
        n = len(self.ids)
        for fname, vals in self.fields.items():
            vals = np.asarray(vals)
            if len(vals) != n:
                raise DataError(
                    f"field {fname!r} has {len(vals)} values for {n} records",
                    file=self.name,
                )
            self.fields[fname] = vals
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=np.float64)
            if self.x.ndim == 1:
                self.x = self.x[:, None]
            if self.x.shape[0] != n:
                raise DataError(
                    f"exclusive columns have {self.x.shape[0]} rows for {n} records",
                    file=self.name,
                )
            if not self.x_names:
                self.x_names = tuple(f"x{i + 1}" for i in range(self.x.shape[1]))
        if self.block is not None:
            self.block = np.asarray(self.block)
            if len(self.block) != n:
                raise DataError("block column length mismatch", file=self.name)

    @property
    def n(self) -> int:
        return len(self.ids)

    def missing_mask(self, fname: str) -> np.ndarray:
        vals = self.fields[fname]
        return np.array([v is None or str(v) == "" for v in vals], dtype=bool)


def load_record_file(
    path: str,
    specs: list[FieldSpec],
    *,
    id_column: str = "id",
    x_columns: list[str] | None = None,
    block_column: str | None = None,
    name: str | None = None,
) -> RecordFile:
    """Read a delimited record file into a :class:`RecordFile`.

    The file must carry ``id_column`` plus one column per linking field.
    ``x_columns`` (numeric, no missing values) become the exclusive block
    of the file; ``block_column`` carries the block key.
    """
    name = name or path
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError("empty file", file=name)
        header = set(reader.fieldnames)
        needed = [id_column] + [s.name for s in specs]
        if x_columns:
            needed += list(x_columns)
        if block_column:
            needed.append(block_column)
        missing_cols = [c for c in needed if c not in header]
        if missing_cols:
            raise DataError(
                f"missing columns: {', '.join(missing_cols)}", file=name
            )
        rows = list(reader)
    if not rows:
        raise DataError("no records", file=name)

    ids = np.array([r[id_column] for r in rows], dtype=object)
    fields = {
        s.name: np.array([(r[s.name] or "").strip() for r in rows], dtype=object)
        for s in specs
    }
    x = None
    if x_columns:
        try:
            x = np.array(
                [[float(r[c]) for c in x_columns] for r in rows], dtype=np.float64
            )
        except ValueError as exc:
            raise DataError(f"non-numeric exclusive column value: {exc}", file=name)
        if not np.isfinite(x).all():
            raise DataError("non-finite exclusive column value", file=name)
    block = None
    if block_column:
        block = np.array([r[block_column] for r in rows], dtype=object)
    return RecordFile(
        ids=ids,
        fields=fields,
        x=x,
        x_names=tuple(x_columns or ()),
        block=block,
        name=name,
    )


def _encode_field(
    file_a: RecordFile, file_b: RecordFile, spec: FieldSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Encode one field of both files for vectorized comparison.

    Returns (codes_a, miss_a, codes_b, miss_b). For exact-categorical the
    codes are an int relabeling over the two files' pooled values, so equal
    codes mean equal strings across files; for digit-prefix an (n, D) digit
    matrix; for date-ymd an (n, 3) year/month/day matrix. Missing entries
    get a placeholder code and are True in the mask.
    """
    miss_a = file_a.missing_mask(spec.name)
    miss_b = file_b.missing_mask(spec.name)
    if spec.kind == "exact-categorical":
        vals_a = file_a.fields[spec.name].astype(str)
        vals_b = file_b.fields[spec.name].astype(str)
        _, codes = np.unique(np.concatenate([vals_a, vals_b]), return_inverse=True)
        codes = codes.astype(np.int64)
        return codes[: len(vals_a)], miss_a, codes[len(vals_a) :], miss_b
    return (
        _field_codes(file_a, spec, miss_a),
        miss_a,
        _field_codes(file_b, spec, miss_b),
        miss_b,
    )


def _field_codes(
    rec: RecordFile, spec: FieldSpec, missing: np.ndarray
) -> np.ndarray:
    """Digit or date matrix of one file's field, file-independent codes."""
    vals = rec.fields[spec.name]
    if spec.kind == "digit-prefix":
        d = spec.digits
        out = np.zeros((len(vals), d), dtype=np.int8)
        for i, v in enumerate(vals):
            if missing[i]:
                continue
            v = str(v)
            if len(v) != d or not v.isdigit():
                raise DataError(
                    f"field {spec.name!r}: expected a {d}-digit string, got {v!r}",
                    file=rec.name,
                    record=rec.ids[i],
                )
            out[i] = [int(c) for c in v]
        return out
    # date-ymd
    out = np.zeros((len(vals), 3), dtype=np.int32)
    for i, v in enumerate(vals):
        if missing[i]:
            continue
        try:
            out[i] = _parse_date(v)
        except DataError as exc:
            raise DataError(
                f"field {spec.name!r}: {exc}", file=rec.name, record=rec.ids[i]
            ) from None
    return out


def _pair_levels(
    spec: FieldSpec,
    codes_a: np.ndarray,
    codes_b: np.ndarray,
    miss_a: np.ndarray,
    miss_b: np.ndarray,
) -> np.ndarray:
    """Agreement levels for the full cross product of two code arrays."""
    if spec.kind == "exact-categorical":
        lvl = np.where(codes_a[:, None] == codes_b[None, :], 2, 1).astype(np.int8)
    elif spec.kind == "digit-prefix":
        eq = codes_a[:, None, :] == codes_b[None, :, :]
        # length of the leading run of equal digits
        lvl = (1 + np.cumprod(eq, axis=2).sum(axis=2)).astype(np.int8)
    else:
        ye = codes_a[:, None, 0] == codes_b[None, :, 0]
        me = codes_a[:, None, 1] == codes_b[None, :, 1]
        de = codes_a[:, None, 2] == codes_b[None, :, 2]
        lvl = (1 + ye * (1 + me * (1 + de))).astype(np.int8)
    if miss_a.any() or miss_b.any():
        lvl[miss_a, :] = 1
        lvl[:, miss_b] = 1
    return lvl


def _depth_keys(spec: FieldSpec, codes: np.ndarray, missing: np.ndarray) -> list[list]:
    """Nested agreement keys of one file's non-missing values, shallow first.

    Every field kind scores level 1 + (depth of the deepest agreeing key),
    so two records agree to depth >= t exactly when their depth-t keys are
    equal. exact-categorical has the single key chain [value]; digit-prefix
    has [first digit, ..., full string]; date-ymd has [y, ym, ymd].
    """
    live = codes[~missing]
    if spec.kind == "exact-categorical":
        return [live.tolist()]
    depth = spec.digits if spec.kind == "digit-prefix" else 3
    rows = live.tolist()
    return [[tuple(row[:t]) for row in rows] for t in range(1, depth + 1)]


def _cross_level_counts(
    spec: FieldSpec,
    codes_a: np.ndarray,
    miss_a: np.ndarray,
    codes_b: np.ndarray,
    miss_b: np.ndarray,
) -> np.ndarray:
    """Level counts of one field over the full n_a x n_b cross product.

    Computed from per-file key marginals in O(n_a + n_b), never touching
    pairs: the number of pairs agreeing to depth >= t is the dot product
    of the two files' depth-t key counts, and level counts follow by
    differencing. Pairs with a missing side land in level 1.
    """
    n_pairs = len(miss_a) * len(miss_b)
    agree = []
    for keys_a, keys_b in zip(
        _depth_keys(spec, codes_a, miss_a), _depth_keys(spec, codes_b, miss_b)
    ):
        count_b = Counter(keys_b)
        agree.append(sum(n * count_b[k] for k, n in Counter(keys_a).items()))
    counts = np.zeros(spec.levels, dtype=np.int64)
    counts[0] = n_pairs - agree[0]
    for t in range(1, len(agree)):
        counts[t] = agree[t - 1] - agree[t]
    counts[-1] = agree[-1]
    return counts


@dataclass
class Block:
    """Materialized pairs of one block: member indices and pattern codes."""

    key: object
    a_idx: np.ndarray  # global A indices, ascending
    b_idx: np.ndarray  # global B indices, ascending
    patterns: np.ndarray  # (len(a_idx), len(b_idx)) int32 pattern codes

    @property
    def n_pairs(self) -> int:
        return self.patterns.size

    def a_pos(self, i: int) -> int:
        pos = int(np.searchsorted(self.a_idx, i))
        assert pos < len(self.a_idx) and self.a_idx[pos] == i, "record not in block"
        return pos

    def b_pos(self, j: int) -> int:
        pos = int(np.searchsorted(self.b_idx, j))
        assert pos < len(self.b_idx) and self.b_idx[pos] == j, "record not in block"
        return pos


@dataclass
class ComparisonTable:
    """All materialized pairwise comparisons between two record files.

    Attributes
    ----------
    specs : list[FieldSpec]
        Field declarations, fixing the level counts L_k.
    n_a, n_b : int
        File sizes.
    blocks : list[Block]
        Pair-bearing blocks. Unblocked data is a single block.
    level_maps : list[ndarray]
        Per field k, an int8 array mapping pattern code -> level of field k.
    total_level_counts : list[ndarray]
        Per field k, counts of each level over all materialized pairs.
    background_level_counts : list[ndarray]
        Per field k, counts of each level over the pairs blocking rules
        out (the cross product minus the materialized pairs). All zeros
        when every pair is materialized. Blocking treats these pairs as
        known non-links, so their comparison levels carry information
        about the nonmatch class even though no sampler ever links them.
    block_of_a, block_of_b : ndarray
        Block list index per record, -1 for records in no pair-bearing block.
    missing_comparisons : int
        Number of (pair, field) comparisons scored as level 1 because a
        value was missing.
    """

    specs: list[FieldSpec]
    n_a: int
    n_b: int
    blocks: list[Block]
    level_maps: list[np.ndarray]
    total_level_counts: list[np.ndarray]
    background_level_counts: list[np.ndarray]
    block_of_a: np.ndarray
    block_of_b: np.ndarray
    missing_comparisons: int = 0

    @property
    def n_fields(self) -> int:
        return len(self.specs)

    @property
    def n_patterns(self) -> int:
        return len(self.level_maps[0])

    @property
    def n_pairs(self) -> int:
        return sum(b.n_pairs for b in self.blocks)

    @property
    def max_size(self) -> int:
        return max(self.n_a, self.n_b)

    @property
    def min_size(self) -> int:
        return min(self.n_a, self.n_b)

    def eligible(self, i: int, j: int) -> bool:
        """Whether pair (i, j) is materialized (same pair-bearing block)."""
        bi = self.block_of_a[i]
        return bi >= 0 and bi == self.block_of_b[j]

    def pattern_of(self, i: int, j: int) -> int:
        """Pattern code of a materialized pair (global indices)."""
        blk = self.blocks[self.block_of_a[i]]
        return int(blk.patterns[blk.a_pos(i), blk.b_pos(j)])

    def levels_of(self, i: int, j: int) -> np.ndarray:
        """Per-field agreement levels of a materialized pair."""
        code = self.pattern_of(i, j)
        return np.array([m[code] for m in self.level_maps], dtype=np.int8)


def build_comparison_table(
    file_a: RecordFile, file_b: RecordFile, specs: list[FieldSpec]
) -> ComparisonTable:
    """Compare two record files field by field over all eligible pairs.

    Eligible pairs are the within-block cross products when both files
    carry a block key, the full cross product otherwise. Each pair's K
    agreement levels are packed into one mixed-radix pattern code.
    """
    if not specs:
        raise ConfigError("at least one linking field is required")
    for spec in specs:
        for rec in (file_a, file_b):
            if spec.name not in rec.fields:
                raise DataError(f"field {spec.name!r} not present", file=rec.name)

    radices = [s.levels for s in specs]
    n_patterns = 1
    for r in radices:
        n_patterns *= r
    if n_patterns > MAX_PATTERNS:
        raise ConfigError(
            f"level product {n_patterns} exceeds the supported maximum "
            f"{MAX_PATTERNS}; reduce field resolution"
        )
    strides = np.ones(len(specs), dtype=np.int64)
    for k in range(len(specs) - 2, -1, -1):
        strides[k] = strides[k + 1] * radices[k + 1]

    # decode tables: pattern code -> per-field level
    level_maps = []
    for k, spec in enumerate(specs):
        codes = np.arange(n_patterns, dtype=np.int64)
        level_maps.append(((codes // strides[k]) % radices[k] + 1).astype(np.int8))

    codes_a, miss_a = {}, {}
    codes_b, miss_b = {}, {}
    for spec in specs:
        (
            codes_a[spec.name],
            miss_a[spec.name],
            codes_b[spec.name],
            miss_b[spec.name],
        ) = _encode_field(file_a, file_b, spec)

    if (file_a.block is None) != (file_b.block is None):
        raise DataError("block key must be present in both files or neither")
    if file_a.block is None:
        groups = [(None, np.arange(file_a.n), np.arange(file_b.n))]
    else:
        by_a: dict[object, list[int]] = {}
        for i, key in enumerate(file_a.block):
            by_a.setdefault(key, []).append(i)
        by_b: dict[object, list[int]] = {}
        for j, key in enumerate(file_b.block):
            by_b.setdefault(key, []).append(j)
        shared = sorted(set(by_a) & set(by_b), key=str)
        groups = [
            (key, np.array(by_a[key], dtype=np.int64), np.array(by_b[key], dtype=np.int64))
            for key in shared
        ]
        if not groups:
            raise DataError("no block key is shared by the two files")

    blocks = []
    block_of_a = np.full(file_a.n, -1, dtype=np.int64)
    block_of_b = np.full(file_b.n, -1, dtype=np.int64)
    total_counts = [np.zeros(s.levels, dtype=np.int64) for s in specs]
    missing_comparisons = 0
    for key, a_idx, b_idx in groups:
        patt = np.zeros((len(a_idx), len(b_idx)), dtype=np.int64)
        for k, spec in enumerate(specs):
            ma = miss_a[spec.name][a_idx]
            mb = miss_b[spec.name][b_idx]
            lvl = _pair_levels(
                spec, codes_a[spec.name][a_idx], codes_b[spec.name][b_idx], ma, mb
            )
            missing_comparisons += int(ma.sum()) * len(b_idx)
            missing_comparisons += int(mb.sum()) * (len(a_idx) - int(ma.sum()))
            total_counts[k] += np.bincount(
                lvl.ravel() - 1, minlength=spec.levels
            )
            patt += (lvl.astype(np.int64) - 1) * strides[k]
        blk = Block(
            key=key,
            a_idx=a_idx,
            b_idx=b_idx,
            patterns=patt.astype(np.int32),
        )
        block_of_a[a_idx] = len(blocks)
        block_of_b[b_idx] = len(blocks)
        blocks.append(blk)

    background_counts = []
    for k, spec in enumerate(specs):
        cross = _cross_level_counts(
            spec,
            codes_a[spec.name],
            miss_a[spec.name],
            codes_b[spec.name],
            miss_b[spec.name],
        )
        bg = cross - total_counts[k]
        assert (bg >= 0).all() and bg.sum() == file_a.n * file_b.n - sum(
            b.n_pairs for b in blocks
        ), "cross-product level counts disagree with the materialized pairs"
        background_counts.append(bg)

    return ComparisonTable(
        specs=list(specs),
        n_a=file_a.n,
        n_b=file_b.n,
        blocks=blocks,
        level_maps=level_maps,
        total_level_counts=total_counts,
        background_level_counts=background_counts,
        block_of_a=block_of_a,
        block_of_b=block_of_b,
        missing_comparisons=missing_comparisons,
    )
