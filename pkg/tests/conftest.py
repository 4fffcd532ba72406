"""Terminal summary for the acceptance suite.

Collects the per-criterion outcomes from test_acceptance.py and prints one
pass/fail line per criterion at the end of the run, so a full-suite run
ends with a readable scorecard instead of a wall of dots.
"""

import re

CRITERIA = {
    1: "tiny-instance stationarity: both kernels within TV 0.02 of the enumerated posterior",
    2: "matching prior sums to 1 over all bipartite configurations",
    3: "divergence closed form matches the reference grid and quadrature",
    4: "regression terms raise pair evidence on matches, lower it on nonmatches",
    5: "desk-scale factorial: reference windows and PPV ordering",
    6: "independence variant nearly coincides with BRLVOF unblocked",
    7: "blocked study: BRLVOF at least matches the independence variant",
    8: "conjugate regression draws match the normal-equations oracle",
    9: "pooling arithmetic: worked example exact, permutation invariant",
    10: "fixed-seed reruns produce byte-identical outputs",
}

_PATTERN = re.compile(r"test_acceptance\.py::.*criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            m = _PATTERN.search(report.nodeid)
            if m is None:
                continue
            num = int(m.group(1))
            outcomes.setdefault(num, []).append(status)
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(outcomes):
        ok = all(s == "passed" for s in outcomes[num])
        verdict = "PASS" if ok else "FAIL"
        text = CRITERIA.get(num, "")
        terminalreporter.write_line(f"criterion {num:02d}: {verdict} - {text}")
