"""Contract tests for the Dirichlet-process slice Gibbs sampler."""

import math

import numpy as np
import pytest

from helpers import BENIGN_HYPER, make_dp_state, rng_for
from pdmix.distributions import kernel_pdf
from pdmix.errors import ConfigError, InvariantViolation
from pdmix.experiments import gen_nested
from pdmix.rpddp import (
    build_slice_set,
    extend_sticks,
    gibbs_sweep,
    init_state,
    run_chain,
    update_alloc_block_dp,
    update_concentration,
    update_slice_u,
    update_sticks,
)


def weights_to_sticks(weights) -> np.ndarray:
    """Stick fractions that produce the given leading weights exactly."""
    v = []
    remaining = 1.0
    for w in weights:
        v.append(w / remaining)
        remaining -= w
    return np.array(v)


class TestExtendSticks:
    def test_noop_when_residual_already_below_threshold(self):
        state = make_dp_state(
            [[1.0]], [[1.0]], {(0, 0): np.array([0.99])}, rng_for("ext-noop"), sizes=[1]
        )
        state.u[0][:] = 0.5  # residual 0.01 < 0.5
        depth_before = state.stick_depth(0, 0)
        extend_sticks(state, (0, 0), rng_for("ext-noop2"))
        assert state.stick_depth(0, 0) == depth_before

    def test_mean_depth_matches_renewal_prediction(self):
        # growing from nothing at threshold u* the final depth behaves as
        # 1 + Poisson(c * (-log u*))
        rng = rng_for("ext-depth")
        c, u_star = 1.0, 0.5
        depths = np.empty(20000)
        for i in range(depths.size):
            state = make_dp_state(
                [[1.0]], [[c]], {(0, 0): np.empty(0)}, rng_for("ext-d2"), sizes=[1]
            )
            state.u[0][:] = u_star
            predicted = extend_sticks(state, (0, 0), rng)
            depths[i] = state.stick_depth(0, 0)
        expected = 1.0 + c * (-math.log(u_star))
        assert predicted == pytest.approx(expected, abs=1e-12)
        se = math.sqrt(expected - 1.0) / math.sqrt(depths.size)
        assert abs(depths.mean() - expected) < 4 * se

    def test_every_weight_above_threshold_is_instantiated(self):
        rng = rng_for("ext-cover")
        state = make_dp_state(
            [[1.0]], [[2.0]], {(0, 0): np.array([0.3])}, rng_for("ext-c2"), sizes=[1]
        )
        state.u[0][:] = 0.01
        extend_sticks(state, (0, 0), rng)
        assert state.residual(0, 0) < 0.01
        assert state.atoms.depth(0, 0) >= state.stick_depth(0, 0)


class TestBuildSliceSet:
    def test_direct_comparison(self):
        sticks = {(0, 0): weights_to_sticks([0.5, 0.3, 0.1])}
        state = make_dp_state([[1.0]], [[1.0]], sticks, rng_for("slice-dir"))
        out = build_slice_set(state, (0, 0), 0.25)
        assert out.members.tolist() == [1, 2]
        assert out.comparisons == 3

    def test_non_contiguous_membership(self):
        # unordered weights at threshold 0.05 select {1,2,3,5,7,8}
        weights = [0.2, 0.1, 0.06, 0.04, 0.08, 0.03, 0.07, 0.051, 0.02]
        sticks = {(0, 0): weights_to_sticks(weights)}
        state = make_dp_state([[1.0]], [[1.0]], sticks, rng_for("slice-fig"))
        out = build_slice_set(state, (0, 0), 0.05)
        assert out.members.tolist() == [1, 2, 3, 5, 7, 8]

    def test_threshold_limit(self):
        weights = [0.5, 0.25, 0.12]
        sticks = {(0, 0): weights_to_sticks(weights)}
        state = make_dp_state([[1.0]], [[1.0]], sticks, rng_for("slice-lim"))
        out = build_slice_set(state, (0, 0), 1e-12)
        assert out.members.tolist() == [1, 2, 3]

    def test_empty_set_is_invariant_violation(self):
        sticks = {(0, 0): weights_to_sticks([0.5, 0.25])}
        state = make_dp_state([[1.0]], [[1.0]], sticks, rng_for("slice-empty"))
        with pytest.raises(InvariantViolation):
            build_slice_set(state, (0, 0), 0.9)


class TestAllocBlock:
    def test_singleton_union_forced(self):
        state = make_dp_state(
            [[1.0]], [[1.0]], {(0, 0): np.array([0.9])}, rng_for("alloc-one"), sizes=[3]
        )
        state.u[0][:] = 0.5
        update_alloc_block_dp(state, [np.zeros(3)], rng_for("alloc-one2"))
        assert np.all(state.d[0] == 1)
        assert np.all(state.delta[0] == 0)

    def test_equal_kernels_uniform_over_union(self):
        rng = rng_for("alloc-eq")
        counts = {}
        n_rep = 20000
        for _ in range(n_rep):
            sticks = {
                (0, 0): weights_to_sticks([0.4, 0.3]),
                (0, 1): weights_to_sticks([0.5, 0.2]),
                (1, 1): weights_to_sticks([0.6]),
            }
            state = make_dp_state(
                np.full((2, 2), 0.5), np.ones((2, 2)), sticks, rng_for("alloc-eq2"),
                sizes=[1, 0],
            )
            for key in sticks:
                state.atoms.mu(*key)[:] = 0.0
                state.atoms.tau(*key)[:] = 1.0
            state.u[0][:] = 0.1  # all four weights exceed 0.1
            update_alloc_block_dp(state, [np.array([0.2]), np.empty(0)], rng)
            cell = (int(state.delta[0][0]), int(state.d[0][0]))
            counts[cell] = counts.get(cell, 0) + 1
        assert set(counts) == {(0, 1), (0, 2), (1, 1), (1, 2)}
        for cell, cnt in counts.items():
            assert abs(cnt / n_rep - 0.25) < 3 * math.sqrt(0.25 * 0.75 / n_rep)

    def test_masses_match_brute_force_enumeration(self):
        # two pairs, three weights each, fixed threshold: enumerate the
        # union by hand and compare against the sampled frequencies
        rng = rng_for("alloc-brute")
        sticks = {
            (0, 0): weights_to_sticks([0.5, 0.2, 0.1]),
            (0, 1): weights_to_sticks([0.3, 0.25, 0.15]),
            (1, 1): weights_to_sticks([0.9]),
        }
        proto = make_dp_state(
            np.array([[0.7, 0.3], [0.5, 0.5]]), np.ones((2, 2)), sticks,
            rng_for("alloc-b2"), sizes=[1, 0],
        )
        x, u = 0.4, 0.18
        expected = {}
        for l, key in ((0, (0, 0)), (1, (0, 1))):
            w = proto.weights(0, l)
            for k in range(1, w.size + 1):
                if w[k - 1] > u:
                    theta = proto.atoms.get(0, l, k)
                    expected[(l, k)] = proto.p[0, l] * kernel_pdf("normal", x, theta)
        total = sum(expected.values())
        expected = {cell: v / total for cell, v in expected.items()}
        assert set(expected) == {(0, 1), (0, 2), (1, 1), (1, 2)}
        counts = dict.fromkeys(expected, 0)
        n_rep = 30000
        for _ in range(n_rep):
            proto.u[0][:] = u
            update_alloc_block_dp(proto, [np.array([x]), np.empty(0)], rng)
            counts[(int(proto.delta[0][0]), int(proto.d[0][0]))] += 1
        for cell, prob in expected.items():
            se = math.sqrt(prob * (1 - prob) / n_rep)
            assert abs(counts[cell] / n_rep - prob) < 4 * se + 1e-4


class TestSliceU:
    def test_single_full_stick_uniform(self):
        rng = rng_for("u-uni")
        state = make_dp_state(
            [[1.0]], [[1.0]], {(0, 0): np.array([1.0 - 1e-12])}, rng_for("u-u2"),
            sizes=[50000],
        )
        update_slice_u(state, [np.zeros(50000)], rng)
        assert abs(state.u[0].mean() - 0.5) < 3 / math.sqrt(12 * 50000)

    def test_consistency_invariant(self):
        rng = rng_for("u-inv")
        sticks = {(0, 0): weights_to_sticks([0.4, 0.3, 0.1])}
        state = make_dp_state([[1.0]], [[1.0]], sticks, rng_for("u-i2"), sizes=[1000])
        state.d[0][:] = rng.integers(1, 4, size=1000)
        update_slice_u(state, [np.zeros(1000)], rng)
        w = state.weights(0, 0)
        assert np.all(state.u[0] < w[state.d[0] - 1])

    def test_mean_of_threshold_under_fixed_weight(self):
        rng = rng_for("u-mean")
        state = make_dp_state(
            [[1.0]], [[1.0]], {(0, 0): np.array([0.4])}, rng_for("u-m2"), sizes=[100000]
        )
        update_slice_u(state, [np.zeros(100000)], rng)
        assert abs(state.u[0].mean() - 0.2) < 3 * 0.4 / math.sqrt(12 * 100000)


class TestUpdateSticks:
    def test_prior_without_allocations(self):
        rng = rng_for("st-prior")
        c = 3.0
        draws = np.empty(20000)
        for i in range(draws.size):
            state = make_dp_state(
                [[1.0]], [[c]], {(0, 0): np.array([0.5])}, rng_for("st-p2"), sizes=[0]
            )
            update_sticks(state, [np.empty(0)], rng)
            draws[i] = state.sticks[(0, 0)][0]
        # Beta(1, c) has mean 1/(1+c)
        assert abs(draws.mean() - 0.25) < 0.01

    def test_count_bookkeeping(self):
        rng = rng_for("st-counts")
        v1 = np.empty(20000)
        v2 = np.empty(20000)
        for i in range(v1.size):
            state = make_dp_state(
                [[1.0]], [[1.0]], {(0, 0): weights_to_sticks([0.4, 0.3])},
                rng_for("st-c2"), sizes=[3],
            )
            state.d[0][:] = [1, 1, 2]
            update_sticks(state, [np.zeros(3)], rng)
            v1[i], v2[i] = state.sticks[(0, 0)]
        # v1 ~ Beta(3, 2), v2 ~ Beta(2, 1)
        assert abs(v1.mean() - 0.6) < 0.01
        assert abs(v2.mean() - 2.0 / 3.0) < 0.01

    def test_off_diagonal_pools_groups(self):
        rng = rng_for("st-pool")
        draws = np.empty(20000)
        for i in range(draws.size):
            sticks = {
                (0, 0): np.array([0.5]),
                (0, 1): np.array([0.5]),
                (1, 1): np.array([0.5]),
            }
            state = make_dp_state(
                np.full((2, 2), 0.5), np.ones((2, 2)), sticks, rng_for("st-pl2"),
                sizes=[2, 1],
            )
            state.delta[0][:] = 1
            state.delta[1][:] = 0
            update_sticks(state, [np.zeros(2), np.zeros(1)], rng)
            draws[i] = state.sticks[(0, 1)][0]
        # three pooled observations on stick 1: Beta(4, 1), mean 0.8
        assert abs(draws.mean() - 0.8) < 0.01

    def test_weights_positive_and_sum_below_one(self):
        rng = rng_for("st-sum")
        state = make_dp_state(
            [[1.0]], [[0.01]], {(0, 0): weights_to_sticks([0.5, 0.2, 0.1])},
            rng_for("st-s2"), sizes=[4],
        )
        state.d[0][:] = [1, 2, 3, 1]
        for _ in range(200):
            update_sticks(state, [np.zeros(4)], rng)
            w = state.weights(0, 0)
            assert np.all(w > 0)
            assert w.sum() < 1.0


class FakeRng:
    """Deterministic stand-in driving the concentration update."""

    def __init__(self, beta_val, uniform_val):
        self.beta_val = beta_val
        self.uniform_val = uniform_val
        self.gamma_calls = []

    def beta(self, a, b):
        return self.beta_val

    def random(self):
        return self.uniform_val

    def gamma(self, shape, scale):
        self.gamma_calls.append((shape, scale))
        return 1.0


class TestUpdateConcentration:
    def test_mixture_weight_threshold(self):
        # a=b=1.1, n=60, rho=5, beta=0.5: the first-component weight is
        # 5.1 / (5.1 + 60*(1.1 - log 0.5)) ~ 0.0453
        rate = 1.1 - math.log(0.5)
        pi = (5.1 / (60 * rate)) / (1.0 + 5.1 / (60 * rate))
        assert pi == pytest.approx(0.04526, abs=2e-5)
        for uniform, want_shape in ((pi - 0.01, 1.1 + 5), (pi + 0.01, 1.1 + 4)):
            state = make_dp_state(
                [[1.0]], [[1.0]], {(0, 0): weights_to_sticks([0.3] * 5)},
                rng_for("conc-thr"), sizes=[60],
            )
            state.d[0][:] = (np.arange(60) % 5) + 1  # rho = 5
            fake = FakeRng(beta_val=0.5, uniform_val=uniform)
            update_concentration(state, [np.zeros(60)], fake)
            shape, scale = fake.gamma_calls[0]
            assert shape == pytest.approx(want_shape, abs=1e-12)
            assert scale == pytest.approx(1.0 / rate, rel=1e-12)

    def test_zero_occupancy_admissible(self):
        # off-diagonal pair with no allocations: rho=0 and the lighter
        # mixture component has shape a-1 = 0.1 > 0
        rng = rng_for("conc-rho0")
        sticks = {
            (0, 0): np.array([0.5]), (0, 1): np.array([0.5]), (1, 1): np.array([0.5])
        }
        for _ in range(200):
            state = make_dp_state(
                np.full((2, 2), 0.5), np.ones((2, 2)), sticks, rng_for("conc-r2"),
                sizes=[2, 2],
            )
            update_concentration(state, [np.zeros(2), np.zeros(2)], rng)
            assert state.c[0, 1] > 0

    def test_no_data_prior_recovery(self):
        rng = rng_for("conc-prior")
        draws = np.empty(20000)
        for i in range(draws.size):
            state = make_dp_state(
                [[1.0]], [[1.0]], {(0, 0): np.array([0.5])}, rng_for("conc-p2"), sizes=[0]
            )
            update_concentration(state, [np.empty(0)], rng)
            draws[i] = state.c[0, 0]
        se = (math.sqrt(1.1) / 1.1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 1.0) < 3 * se

    def test_requires_a_above_one(self):
        state = make_dp_state(
            [[1.0]], [[1.0]], {(0, 0): np.array([0.5])}, rng_for("conc-bad"), sizes=[1]
        )
        state.conc_prior = (1.0, 1.1)
        with pytest.raises(ConfigError):
            update_concentration(state, [np.zeros(1)], rng_for("conc-b2"))


class TestChain:
    def test_zero_iterations(self):
        ds = gen_nested(2, seed=5)
        trace = run_chain(ds, iterations=0, seed=11)
        assert trace.iterations == 0
        assert trace.rate_name == "c"

    def test_same_seed_bit_identical(self):
        ds = gen_nested(2, seed=5)
        grid = np.linspace(-40, 5, 64)
        a = run_chain(ds, iterations=40, burn_in=10, thin=5, seed=9, grid=grid)
        b = run_chain(ds, iterations=40, burn_in=10, thin=5, seed=9, grid=grid)
        assert np.array_equal(a.p, b.p)
        assert np.array_equal(a.rates, b.rates)
        assert np.array_equal(a.density, b.density)
        assert np.array_equal(a.mean_slice_card, b.mean_slice_card)

    def test_invariants_hold_during_run(self):
        ds = gen_nested(2, seed=5)
        run_chain(ds, iterations=60, seed=3, check=True)

    def test_concentration_prior_validation(self):
        ds = gen_nested(2, seed=5)
        with pytest.raises(ConfigError):
            run_chain(ds, iterations=10, seed=1, conc_prior=(1.0, 1.1))

    def test_csv_has_concentration_and_cardinality_columns(self, tmp_path):
        ds = gen_nested(2, seed=5)
        trace = run_chain(ds, iterations=15, seed=3)
        path = tmp_path / "trace.csv"
        trace.to_csv(path, deterministic=True)
        header = path.read_text().splitlines()[0].split(",")
        assert "c_0_0" in header
        assert "mean_slice_cardinality" in header

    def test_comparisons_and_cardinality_recorded(self):
        ds = gen_nested(2, seed=5)
        trace = run_chain(ds, iterations=30, seed=3)
        assert np.all(trace.comparisons > 0)
        assert np.all(trace.mean_slice_card >= 1.0)
