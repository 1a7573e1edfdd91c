import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piecewise_fde.model import LotkaVolterraParams, equilibria, first_integral, vector_field
from piecewise_fde.solvers import (
    IntegrationDivergedError,
    PiecewiseSchedule,
    SegmentKind,
    SegmentSpec,
    Trajectory,
    ab3_step,
    abc_segment,
    bootstrap_steps,
    caputo_segment,
    cf_segment,
    classical_segment,
    solve_piecewise,
    solve_schedule,
    stochastic_segment,
)
from piecewise_fde.special_functions import FractionalOrder
from piecewise_fde.stochastic import generate_path
from piecewise_fde.validation import (
    analytic_abc_relaxation,
    analytic_caputo_relaxation,
    analytic_cf_relaxation,
    estimate_order,
)

CASE1 = LotkaVolterraParams(r=1.0, lambda1=2.0, lambda2=1.0, lambda3=1.5, lambda4=1.0)
FRACTIONAL = {
    SegmentKind.CAPUTO: caputo_segment,
    SegmentKind.ATANGANA_BALEANU: abc_segment,
    SegmentKind.CAPUTO_FABRIZIO: cf_segment,
}


def relax(t, q):
    return -q


def zero(t, q):
    return np.zeros_like(q)


def three_segments(middle, delta, step=0.01, p1=1.0, p2=2.0, horizon=3.0):
    return PiecewiseSchedule(
        (
            SegmentSpec(SegmentKind.CLASSICAL, 0.0, p1),
            SegmentSpec(middle, p1, p2, FractionalOrder(delta)),
            SegmentSpec(SegmentKind.STOCHASTIC, p2, horizon),
        ),
        step,
    )


class TestSchedule:
    def test_boundaries_and_counts(self):
        s = three_segments(SegmentKind.CAPUTO, 0.9)
        assert s.steps_per_segment == [100, 100, 100]
        assert s.n_steps == 300
        assert s.boundaries == (100, 200)

    def test_gap_rejected(self):
        with pytest.raises(ValueError, match="abut"):
            PiecewiseSchedule(
                (SegmentSpec(SegmentKind.CLASSICAL, 0.0, 1.0), SegmentSpec(SegmentKind.CLASSICAL, 1.1, 2.0)), 0.1
            )

    def test_non_multiple_rejected(self):
        with pytest.raises(ValueError, match="multiple"):
            PiecewiseSchedule((SegmentSpec(SegmentKind.CLASSICAL, 0.0, 1.05),), 0.1)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="at least 3"):
            PiecewiseSchedule((SegmentSpec(SegmentKind.CLASSICAL, 0.0, 0.2),), 0.1)

    def test_reversed_segment_rejected(self):
        with pytest.raises(ValueError):
            SegmentSpec(SegmentKind.CLASSICAL, 1.0, 0.5)

    def test_fractional_kinds(self):
        assert {k for k in SegmentKind if k.is_fractional} == set(FRACTIONAL)


class TestTrajectory:
    def test_labels_assign_breakpoint_to_next_segment(self):
        traj = Trajectory(np.arange(7.0), np.zeros((7, 2)), (2, 4))
        np.testing.assert_array_equal(traj.segment_labels(), [0, 0, 1, 1, 2, 2, 2])


class TestAB3:
    def test_zero_history(self):
        np.testing.assert_array_equal(ab3_step([np.zeros(2)] * 3, [1.0, 2.0], 0.1), [1.0, 2.0])

    def test_constant_drift(self):
        c = np.array([0.5, -2.0])
        np.testing.assert_allclose(ab3_step([c] * 3, [1.0, 2.0], 0.1), [1.05, 1.8], rtol=0, atol=1e-15)

    def test_third_order(self):
        def run(h):
            return classical_segment(relax, [1.0], h, round(1.0 / h))[-1, 0]

        est = estimate_order(run, math.exp(-1.0), [0.01, 0.005, 0.0025, 0.00125])
        assert run(0.01) == pytest.approx(math.exp(-1.0), rel=1e-5)
        assert est.observed_order == pytest.approx(3.0, abs=0.3)


class TestBootstrap:
    def test_zero_drift(self):
        q1, q2 = bootstrap_steps(zero, np.array([1.0, 2.0]), 0.1)
        np.testing.assert_array_equal(q1, [1.0, 2.0])
        np.testing.assert_array_equal(q2, [1.0, 2.0])

    def test_exponential(self):
        q1, _ = bootstrap_steps(relax, np.array([1.0]), 0.01)
        assert abs(q1[0] - math.exp(-0.01)) < 1e-10

    def test_constant_drift(self):
        q1, _ = bootstrap_steps(lambda t, q: np.full_like(q, 3.0), np.array([0.25]), 0.125)
        assert q1[0] == 0.25 + 3.0 * 0.125

    def test_rejects_step(self):
        with pytest.raises(ValueError):
            bootstrap_steps(relax, np.array([1.0]), 0.0)


class TestFractionalSegments:
    @pytest.mark.parametrize("kind", list(FRACTIONAL))
    def test_classical_limit(self, kind):
        f = vector_field(CASE1)
        ref = classical_segment(f, [1.0, 2.0], 1e-3, 2000, t0=0.5)
        got = FRACTIONAL[kind](f, [1.0, 2.0], 1.0, 1e-3, 2000, t0=0.5)
        assert np.max(np.abs(got - ref)) < 1e-8

    @pytest.mark.parametrize("kind", list(FRACTIONAL))
    @pytest.mark.parametrize("delta", [0.3, 0.9])
    def test_zero_drift_constant(self, kind, delta):
        Q = FRACTIONAL[kind](zero, [1.0, 2.0], delta, 0.01, 50)
        np.testing.assert_array_equal(Q, np.tile([1.0, 2.0], (51, 1)))

    @pytest.mark.parametrize(
        "kind, oracle",
        [
            (SegmentKind.CAPUTO, analytic_caputo_relaxation),
            (SegmentKind.ATANGANA_BALEANU, analytic_abc_relaxation),
            (SegmentKind.CAPUTO_FABRIZIO, analytic_cf_relaxation),
        ],
    )
    @pytest.mark.parametrize("delta", [0.5, 0.9])
    def test_linear_relaxation(self, kind, oracle, delta):
        Q = FRACTIONAL[kind](relax, [1.0], delta, 1e-3, 1000)
        exact = oracle(delta, 1.0, 1.0)
        assert abs(Q[-1, 0] - exact) / exact < 1e-3

    def test_caputo_against_frozen_value(self):
        # E_0.9(-1), mpmath 40 digits
        Q = caputo_segment(relax, [1.0], 0.9, 1e-3, 1000)
        assert Q[-1, 0] == pytest.approx(0.37606602142464188118, rel=1e-3)

    def test_memory_restarts_at_left_endpoint(self):
        # shifting the segment start must not change the result for an autonomous field
        a = caputo_segment(relax, [1.0], 0.7, 0.01, 100, t0=0.0)
        b = caputo_segment(relax, [1.0], 0.7, 0.01, 100, t0=5.0)
        np.testing.assert_array_equal(a, b)

    def test_caputo_order_recorded(self):
        exact = analytic_caputo_relaxation(0.9, 1.0, 1.0)

        def run(h):
            return caputo_segment(relax, [1.0], 0.9, h, round(1.0 / h))[-1, 0]

        est = estimate_order(run, exact, [0.02, 0.01, 0.005])
        assert est.observed_order >= 1.0

    def test_divergence_reports_step(self):
        blowup = lambda t, q: q**3
        with pytest.raises(IntegrationDivergedError) as info, np.errstate(over="ignore", invalid="ignore"):
            caputo_segment(blowup, [5.0], 0.9, 0.1, 200)
        assert info.value.step > 0


class TestStochasticSegment:
    def test_zero_noise_is_classical_bitwise(self):
        f = vector_field(CASE1)
        path = generate_path(7, 500, 0.01)
        got = stochastic_segment(f, [1.0, 2.0], 0.01, 500, [0.0, 0.0], path)
        ref = classical_segment(f, [1.0, 2.0], 0.01, 500)
        assert np.array_equal(got, ref)

    def test_deterministic(self):
        f = vector_field(CASE1)
        a = stochastic_segment(f, [1.0, 2.0], 0.01, 300, [0.1, 0.1], generate_path(3, 300, 0.01))
        b = stochastic_segment(f, [1.0, 2.0], 0.01, 300, [0.1, 0.1], generate_path(3, 300, 0.01))
        assert np.array_equal(a, b)

    def test_noise_length_checked(self):
        with pytest.raises(ValueError):
            stochastic_segment(zero, [1.0, 1.0], 0.01, 10, [0.1, 0.1], generate_path(0, 9, 0.01))

    def test_increment_moments(self):
        n_paths, h, sigma, q0 = 10_000, 0.01, 0.1, np.array([1.0, 2.0])
        inc = np.empty((n_paths, 2))
        for seed in range(n_paths):
            Q = stochastic_segment(zero, q0, h, 3, [sigma, sigma], generate_path(seed, 3, h))
            inc[seed] = Q[1] - Q[0]
        mean = inc.mean(axis=0)
        var = inc.var(axis=0, ddof=1)
        expected_var = sigma**2 * q0**2 * h
        assert np.all(np.abs(mean) < 3 * sigma * q0 * math.sqrt(h / n_paths))
        assert np.all(np.abs(var / expected_var - 1.0) < 0.05)


class TestSolvePiecewise:
    @pytest.mark.parametrize("middle", list(FRACTIONAL))
    def test_continuity_at_breakpoints(self, middle):
        s = three_segments(middle, 0.9)
        traj = solve_piecewise(CASE1.__class__(**{**CASE1.__dict__, "sigma1": 0.1, "sigma2": 0.1}), s, (1.0, 2.0), seed=4)
        f = vector_field(CASE1)
        b1, b2 = s.boundaries
        first = classical_segment(f, [1.0, 2.0], 0.01, 100)
        np.testing.assert_array_equal(traj.states[: b1 + 1], first)
        second = FRACTIONAL[middle](f, traj.states[b1], 0.9, 0.01, 100, t0=1.0)
        np.testing.assert_array_equal(traj.states[b1 : b2 + 1], second)
        assert np.all(np.isfinite(traj.states))

    def test_times_uniform(self):
        traj = solve_piecewise(CASE1, three_segments(SegmentKind.CAPUTO, 0.8), (1.0, 2.0))
        assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(3.0)
        np.testing.assert_allclose(np.diff(traj.times), 0.01, rtol=1e-9)
        assert len(traj.times) == len(traj.states) == 301

    def test_single_classical_segment(self):
        s = PiecewiseSchedule((SegmentSpec(SegmentKind.CLASSICAL, 0.0, 2.0),), 0.01)
        traj = solve_piecewise(CASE1, s, (1.0, 2.0))
        np.testing.assert_array_equal(traj.states, classical_segment(vector_field(CASE1), [1.0, 2.0], 0.01, 200))

    def test_classical_limit_end_to_end(self):
        s = PiecewiseSchedule(
            (
                SegmentSpec(SegmentKind.CLASSICAL, 0.0, 1.0),
                SegmentSpec(SegmentKind.CAPUTO, 1.0, 2.0, FractionalOrder(1.0)),
                SegmentSpec(SegmentKind.ATANGANA_BALEANU, 2.0, 3.0, FractionalOrder(1.0)),
                SegmentSpec(SegmentKind.CAPUTO_FABRIZIO, 3.0, 4.0, FractionalOrder(1.0)),
                SegmentSpec(SegmentKind.STOCHASTIC, 4.0, 5.0),
            ),
            1e-3,
        )
        traj = solve_piecewise(CASE1, s, (1.0, 2.0))
        ref = solve_piecewise(CASE1, PiecewiseSchedule((SegmentSpec(SegmentKind.CLASSICAL, 0.0, 5.0),), 1e-3), (1.0, 2.0))
        # each restart re-bootstraps, which differs from AB3 by O(h^4) per breakpoint
        assert np.max(np.abs(traj.states - ref.states)) < 1e-8

    def test_seed_reproducible(self):
        p = LotkaVolterraParams(r=1.0, lambda1=2.0, lambda2=1.0, lambda3=1.5, lambda4=1.0, sigma1=0.1, sigma2=0.1)
        s = three_segments(SegmentKind.CAPUTO, 0.9)
        a = solve_piecewise(p, s, (1.0, 2.0), seed=11).states
        b = solve_piecewise(p, s, (1.0, 2.0), seed=11).states
        c = solve_piecewise(p, s, (1.0, 2.0), seed=12).states
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_divergence_carries_segment(self):
        s = three_segments(SegmentKind.CAPUTO, 0.9, step=0.1, p1=5.0, p2=6.0, horizon=7.0)
        # Q' = Q^2 from Q(0) = 2 blows up at t = 0.5, inside the classical segment
        with pytest.raises(IntegrationDivergedError) as info, np.errstate(over="ignore", invalid="ignore"):
            solve_schedule(lambda t, q: q**2, s, (2.0,))
        assert info.value.segment == 0
        assert info.value.step >= 1

    @settings(max_examples=12, deadline=None)
    @given(
        st.sampled_from(list(SegmentKind)),
        st.floats(0.3, 1.0),
        st.sampled_from(["extinction", "prey-only", "coexistence"]),
    )
    def test_fixed_points(self, kind, delta, label):
        p = LotkaVolterraParams(r=1.0, lambda1=0.5, lambda2=1.0, lambda3=1.5, lambda4=1.0)
        point = next(r.point for r in equilibria(p) if r.label == label)
        s = PiecewiseSchedule((SegmentSpec(kind, 0.0, 2.0, FractionalOrder(delta)),), 0.01)
        traj = solve_piecewise(p, s, point)
        assert np.max(np.abs(traj.states - np.asarray(point))) < 1e-9


def test_first_integral_conserved():
    p = LotkaVolterraParams(r=1.0, lambda1=0.0, lambda2=1.0, lambda3=1.5, lambda4=1.0)
    Q = classical_segment(vector_field(p), [1.0, 2.0], 1e-3, 10_000)
    v0 = first_integral(p, Q[0])
    drift = max(abs(first_integral(p, q) - v0) for q in Q)
    assert drift / abs(v0) < 1e-4
