"""Linkage prior, mixture densities, and full likelihood."""

import math

import numpy as np
import pytest

from bayeslink.comparison import FieldSpec, RecordFile, build_comparison_table
from bayeslink.errors import InvariantViolation
from bayeslink.model import (
    LinkageState,
    MixtureParams,
    PriorConfig,
    log_likelihood_full,
    log_prior_linkage,
    pair_log_density,
    pair_log_lr,
    pattern_log_densities,
)
from util import enumerate_matchings


def flat_prior(n_fields=2, levels=2, alpha_pi=1.0, beta_pi=1.0):
    return PriorConfig(
        alpha_m=[np.ones(levels)] * n_fields,
        alpha_u=[np.ones(levels)] * n_fields,
        alpha_pi=alpha_pi,
        beta_pi=beta_pi,
    )


class TestLinkagePrior:
    def test_single_pair_splits_evenly_under_uniform_pi(self):
        # one record per file, Beta(1, 1): empty and linked weigh 1/2 each
        prior = flat_prior()
        assert log_prior_linkage(0, 1, 1, prior) == pytest.approx(math.log(0.5))
        assert log_prior_linkage(1, 1, 1, prior) == pytest.approx(math.log(0.5))

    @pytest.mark.parametrize("n_a,n_b", [(1, 1), (2, 2), (3, 2), (2, 4), (4, 4)])
    @pytest.mark.parametrize("ab", [(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)])
    def test_normalizes_over_all_matchings(self, n_a, n_b, ab):
        prior = flat_prior(alpha_pi=ab[0], beta_pi=ab[1])
        total = sum(
            math.exp(log_prior_linkage(st.n_m, n_a, n_b, prior))
            for st in enumerate_matchings(n_a, n_b)
        )
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_out_of_range_size_rejected(self):
        prior = flat_prior()
        with pytest.raises(InvariantViolation):
            log_prior_linkage(3, 2, 5, prior)
        with pytest.raises(InvariantViolation):
            log_prior_linkage(-1, 2, 5, prior)

    def test_marginal_size_is_beta_binomial(self):
        # summing over matchings of one size must match the beta-binomial pmf
        from scipy.stats import betabinom

        n_a, n_b = 3, 4
        prior = flat_prior(alpha_pi=2.0, beta_pi=3.0)
        by_size = {}
        for st in enumerate_matchings(n_a, n_b):
            w = math.exp(log_prior_linkage(st.n_m, n_a, n_b, prior))
            by_size[st.n_m] = by_size.get(st.n_m, 0.0) + w
        for n_m, total in by_size.items():
            assert total == pytest.approx(
                betabinom.pmf(n_m, min(n_a, n_b), 2.0, 3.0), rel=1e-9
            )

    def test_uniform_variant_is_constant(self):
        prior = PriorConfig(
            alpha_m=[np.ones(2)], alpha_u=[np.ones(2)], link_prior="uniform"
        )
        assert log_prior_linkage(0, 5, 9, prior) == 0.0
        assert log_prior_linkage(5, 5, 9, prior) == 0.0
        with pytest.raises(InvariantViolation):
            log_prior_linkage(6, 5, 9, prior)

    def test_unknown_link_prior_rejected(self):
        from bayeslink.errors import ConfigError

        with pytest.raises(ConfigError):
            PriorConfig(
                alpha_m=[np.ones(2)], alpha_u=[np.ones(2)], link_prior="dirichlet"
            )


class TestBlockedPrior:
    def make_table(self, block_a=None, block_b=None):
        a = RecordFile(
            ids=np.array(["a1", "a2"]),
            fields={"g": np.array(["F", "M"], dtype=object)},
            block=block_a,
            name="A",
        )
        b = RecordFile(
            ids=np.array(["b1", "b2", "b3"]),
            fields={"g": np.array(["F", "M", "F"], dtype=object)},
            block=block_b,
            name="B",
        )
        return build_comparison_table(a, b, [FieldSpec("g", "exact-categorical")])

    def test_equals_flat_without_blocking(self):
        table = self.make_table()
        flat = PriorConfig.flat(table)
        blocked = PriorConfig.blocked(table)
        for left, right in zip(flat.alpha_u, blocked.alpha_u):
            assert np.array_equal(left, right)

    def test_ruled_out_pairs_feed_the_nonmatch_weights(self):
        table = self.make_table(
            block_a=np.array(["u", "v"]), block_b=np.array(["u", "u", "v"])
        )
        prior = PriorConfig.blocked(table)
        # ruled out: a1-b3 (F, F agree) and a2-b1/a2-b2 (M-F, M-M)
        assert np.array_equal(prior.alpha_m[0], np.ones(2))
        assert np.array_equal(prior.alpha_u[0], np.array([2.0, 3.0]))


class TestMixtureDensities:
    def test_pair_log_density_is_sum_of_level_logs(self):
        params = MixtureParams(
            theta_m=[np.array([0.1, 0.9]), np.array([0.2, 0.3, 0.5])],
            theta_u=[np.array([0.7, 0.3]), np.array([0.6, 0.3, 0.1])],
        )
        gamma = np.array([2, 3])
        assert pair_log_density(gamma, params, True) == pytest.approx(
            math.log(0.9) + math.log(0.5)
        )
        assert pair_log_density(gamma, params, False) == pytest.approx(
            math.log(0.3) + math.log(0.1)
        )
        assert pair_log_lr(gamma, params) == pytest.approx(
            math.log(0.9 / 0.3) + math.log(0.5 / 0.1)
        )

    def test_pattern_table_matches_pairwise_evaluation(self):
        a = RecordFile(
            ids=np.arange(3),
            fields={
                "g": np.array(["F", "M", "F"], dtype=object),
                "z": np.array(["12", "34", "56"], dtype=object),
            },
        )
        b = RecordFile(
            ids=np.arange(2),
            fields={
                "g": np.array(["F", "M"], dtype=object),
                "z": np.array(["12", "39"], dtype=object),
            },
        )
        specs = [FieldSpec("g", "exact-categorical"), FieldSpec("z", "digit-prefix", digits=2)]
        table = build_comparison_table(a, b, specs)
        params = MixtureParams(
            theta_m=[np.array([0.1, 0.9]), np.array([0.05, 0.15, 0.8])],
            theta_u=[np.array([0.5, 0.5]), np.array([0.8, 0.15, 0.05])],
        )
        log_m, log_u = pattern_log_densities(table, params)
        for i in range(3):
            for j in range(2):
                gamma = table.levels_of(i, j)
                code = table.pattern_of(i, j)
                assert log_m[code] == pytest.approx(pair_log_density(gamma, params, True))
                assert log_u[code] == pytest.approx(pair_log_density(gamma, params, False))


def tiny_problem():
    a = RecordFile(
        ids=np.arange(3),
        fields={"g": np.array(["F", "M", "F"], dtype=object)},
    )
    b = RecordFile(
        ids=np.arange(3),
        fields={"g": np.array(["F", "F", "M"], dtype=object)},
    )
    table = build_comparison_table(a, b, [FieldSpec("g", "exact-categorical")])
    params = MixtureParams(
        theta_m=[np.array([0.15, 0.85])], theta_u=[np.array([0.55, 0.45])]
    )
    return table, params


class TestFullLikelihood:
    def test_matches_brute_force_sum(self):
        table, params = tiny_problem()
        state = LinkageState.empty(3, 3)
        state.link(0, 1)
        state.link(2, 0)
        expected = 0.0
        for i in range(3):
            for j in range(3):
                gamma = table.levels_of(i, j)
                match = state.a_to_b[i] == j
                expected += pair_log_density(gamma, params, bool(match))
        assert log_likelihood_full(state, table, params) == pytest.approx(expected)

    def test_rejects_link_outside_blocks(self):
        a = RecordFile(
            ids=np.arange(2),
            fields={"g": np.array(["F", "M"], dtype=object)},
            block=np.array(["u", "v"], dtype=object),
        )
        b = RecordFile(
            ids=np.arange(2),
            fields={"g": np.array(["F", "M"], dtype=object)},
            block=np.array(["u", "v"], dtype=object),
        )
        table = build_comparison_table(a, b, [FieldSpec("g", "exact-categorical")])
        state = LinkageState.empty(2, 2)
        state.link(0, 1)
        params = MixtureParams(
            theta_m=[np.array([0.1, 0.9])], theta_u=[np.array([0.6, 0.4])]
        )
        with pytest.raises(InvariantViolation):
            log_likelihood_full(state, table, params)


class TestLinkageState:
    def test_link_unlink_bookkeeping(self):
        st = LinkageState.empty(3, 4)
        st.link(1, 2)
        assert st.n_m == 1
        assert st.b_to_a[2] == 1
        assert st.unlink(1) == 2
        assert st.n_m == 0
        st.validate()

    def test_double_link_rejected(self):
        st = LinkageState.empty(2, 2)
        st.link(0, 0)
        with pytest.raises(InvariantViolation):
            st.link(1, 0)
        with pytest.raises(InvariantViolation):
            st.link(0, 1)

    def test_pairs_listing(self):
        st = LinkageState.empty(4, 4)
        st.link(2, 0)
        st.link(0, 3)
        assert st.pairs().tolist() == [[0, 3], [2, 0]]

    def test_corrupt_state_detected(self):
        st = LinkageState.empty(2, 2)
        st.link(0, 0)
        st.b_to_a[0] = -1
        with pytest.raises(InvariantViolation):
            st.validate()
