"""Shared helpers for tests: brute-force enumeration oracles."""

import numpy as np

from bayeslink.model import LinkageState


def enumerate_matchings(n_a, n_b, eligible=None):
    """Yield every one-to-one partial matching as a LinkageState.

    eligible(i, j) restricts admissible pairs (defaults to all). Intended
    for tiny instances; the count grows like sum_k C(n_a,k) C(n_b,k) k!.
    """
    if eligible is None:
        eligible = lambda i, j: True

    def rec(i, a_to_b, used_b):
        if i == n_a:
            yield list(a_to_b)
            return
        a_to_b.append(-1)
        yield from rec(i + 1, a_to_b, used_b)
        a_to_b.pop()
        for j in range(n_b):
            if j not in used_b and eligible(i, j):
                a_to_b.append(j)
                used_b.add(j)
                yield from rec(i + 1, a_to_b, used_b)
                used_b.discard(j)
                a_to_b.pop()

    for assignment in rec(0, [], set()):
        a_to_b = np.array(assignment, dtype=np.int64)
        b_to_a = np.full(n_b, -1, dtype=np.int64)
        for i, j in enumerate(assignment):
            if j >= 0:
                b_to_a[j] = i
        yield LinkageState(a_to_b=a_to_b, b_to_a=b_to_a)


def matching_key(state):
    """Hashable identity of a matching."""
    return tuple(int(v) for v in state.a_to_b)
