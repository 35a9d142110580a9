"""Tests for the log-damped Gronwall integrator."""

import math

import numpy as np
import pytest

from wlns.counterexample import DyadicSchedule, claim1_terms
from wlns.gronwall import (
    BoundProblem,
    bound_root,
    implicit_check,
    psi,
    psi_tail,
    read_signal_csv,
    solve_bound,
    write_bound_csv,
)

E = math.e


class TestPsi:
    def test_values(self):
        assert psi(0.0) == 0.0
        assert psi(1.0) == pytest.approx(E + math.log(E + 1.0), rel=1e-15)
        grid = np.linspace(0.0, 50.0, 200)
        assert np.all(np.diff(psi(grid)) > 0)

    def test_tail_at_one(self):
        assert psi_tail(1.0) == 0.0

    def test_tail_monotone_and_above_primitive(self):
        previous = 0.0
        for m in (2.0, 4.0, 16.0, 256.0, 1e6, 1e12):
            value = psi_tail(m)
            assert value > previous
            primitive = math.log(E + math.log(E + m)) - math.log(E + math.log(E + 1.0))
            assert value >= primitive
            assert psi_tail(2.0 * m) > value
            previous = value

    def test_tail_log_form_matches_direct(self):
        for m in (3.0, 50.0, 1e8):
            assert psi_tail(log_m=math.log(m)) == pytest.approx(psi_tail(m), rel=1e-12)

    def test_tail_probe_beyond_float_range(self):
        # M = e^(e^10): no float holds it, the log-substituted quadrature does
        value = psi_tail(log_m=math.exp(10.0))
        assert value >= 10.0 - math.log(2.0 * E + 1.0)
        assert value == pytest.approx(8.88921365631497, rel=1e-10)

    def test_tail_argument_validation(self):
        with pytest.raises(ValueError):
            psi_tail()
        with pytest.raises(ValueError):
            psi_tail(2.0, log_m=1.0)
        with pytest.raises(ValueError):
            psi_tail(0.5)


class TestBoundProblem:
    def test_sample_validation(self):
        with pytest.raises(ValueError):
            BoundProblem.from_samples([0.0, 0.0, 1.0], [1.0, 1.0, 1.0], c=1.0, h0=1.0)
        with pytest.raises(ValueError):
            BoundProblem.from_samples([0.0, 1.0], [-1.0, 0.0], c=1.0, h0=1.0)
        with pytest.raises(ValueError):
            BoundProblem.from_samples([0.0, 1.0], [math.inf, 0.0], c=1.0, h0=1.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            BoundProblem.from_samples([0.0, 1.0], [1.0, 1.0], c=0.0, h0=1.0)
        with pytest.raises(ValueError):
            BoundProblem.from_samples([0.0, 1.0], [1.0, 1.0], c=1.0, h0=-2.0)
        with pytest.raises(ValueError):
            BoundProblem.from_function(lambda t: -1.0, 0.0, 1.0, c=1.0, h0=1.0)

    def test_b_integral_and_cumulative(self):
        prob = BoundProblem.from_samples(
            [0.0, 1.0, 3.0, 4.0], [2.0, 0.5, 1.0, 0.0], c=1.0, h0=1.0
        )
        assert prob.b_integral == pytest.approx(2.0 + 1.0 + 1.0, rel=1e-15)
        cum = prob.b_cumulative(np.array([0.0, 0.5, 2.0, 4.0]))
        np.testing.assert_allclose(cum, [0.0, 1.0, 2.5, 4.0], rtol=1e-15)


class TestSolveBound:
    def test_zero_signal_keeps_h0(self):
        prob = BoundProblem.from_samples([0.0, 0.5, 1.0], [0.0, 0.0, 0.0], c=2.0, h0=3.0)
        for method in ("exact", "rk4"):
            sol = solve_bound(prob, 0.1, method=method)
            np.testing.assert_array_equal(sol.h, np.full(sol.times.size, 3.0))
            assert np.all(implicit_check(sol) == 0.0)

    def test_identity_mode_matches_exponential(self):
        prob = BoundProblem.from_function(
            lambda t: 1.0 + math.cos(t), 0.0, 1.0, c=0.7, h0=2.0
        )
        sol = solve_bound(prob, 1e-3, psi_mode="identity")
        exact = 2.0 * math.exp(0.7 * (1.0 + math.sin(1.0)))
        assert sol.h[-1] == pytest.approx(exact, rel=1e-8)

    def test_constant_signal_matches_implicit_root(self):
        prob = BoundProblem.from_function(lambda t: 1.0, 0.0, 1.0, c=1.0, h0=1.0)
        sol = solve_bound(prob, 1e-3)
        assert sol.h[-1] == pytest.approx(bound_root(prob), rel=1e-6)

    def test_nondecreasing(self):
        rng = np.random.default_rng(11)
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 2.0, 8)), [2.0]])
        values = np.concatenate([rng.uniform(0.0, 3.0, 9), [0.0]])
        prob = BoundProblem.from_samples(times, values, c=1.0, h0=1.0)
        for method, dt in (("exact", None), ("rk4", 1e-3)):
            sol = solve_bound(prob, dt, method=method)
            assert np.all(np.diff(sol.h) >= 0.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_comparison_property(self, seed):
        rng = np.random.default_rng(seed)
        times = np.linspace(0.0, 1.5, 12)
        b1 = rng.uniform(0.0, 2.0, 12)
        b2 = b1 + rng.uniform(0.0, 1.0, 12)
        h1 = solve_bound(BoundProblem.from_samples(times, b1, c=1.2, h0=0.8)).h
        h2 = solve_bound(BoundProblem.from_samples(times, b2, c=1.2, h0=0.8)).h
        assert np.all(h1 <= h2 * (1.0 + 1e-12))

    def test_exact_mode_dense_grid_consistent(self):
        prob = BoundProblem.from_samples(
            [0.0, 0.7, 1.0, 2.0], [1.5, 0.3, 0.9, 0.0], c=1.1, h0=1.0
        )
        coarse = solve_bound(prob)
        dense = solve_bound(prob, dt=0.01)
        assert dense.times.size > coarse.times.size
        assert dense.h[-1] == pytest.approx(coarse.h[-1], rel=1e-10)

    def test_overflow_is_flagged(self):
        prob = BoundProblem.from_function(lambda t: 1.0, 0.0, 1.0, c=10.0, h0=1.0)
        sol = solve_bound(prob, 1e-3)
        assert sol.overflowed
        assert "numeric overflow" in sol.note
        assert math.isinf(sol.h[-1])
        sampled = BoundProblem.from_samples([0.0, 1.0, 2.0], [10.0, 10.0, 0.0], c=1.0, h0=1.0)
        sol2 = solve_bound(sampled)
        assert sol2.overflowed and math.isinf(sol2.h[-1])
        with pytest.raises(OverflowError):
            bound_root(sampled)

    def test_argument_validation(self):
        prob = BoundProblem.from_function(lambda t: 1.0, 0.0, 1.0, c=1.0, h0=1.0)
        with pytest.raises(ValueError):
            solve_bound(prob)  # rk4 needs dt
        with pytest.raises(ValueError):
            solve_bound(prob, 1e-2, method="exact")  # callable B has no pieces
        with pytest.raises(ValueError):
            solve_bound(prob, 1e-2, psi_mode="cubic")


class TestImplicitCheck:
    def test_exact_mode_is_tight(self):
        rng = np.random.default_rng(3)
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 2.0, 6)), [2.0]])
        values = np.concatenate([rng.uniform(0.0, 2.0, 7), [0.0]])
        sol = solve_bound(BoundProblem.from_samples(times, values, c=1.3, h0=0.5))
        assert np.max(np.abs(implicit_check(sol))) <= 1e-10

    def test_smooth_rk4_small_deviation(self):
        prob = BoundProblem.from_function(
            lambda t: 1.0 + math.sin(3.0 * t), 0.0, 1.0, c=1.0, h0=1.0
        )
        sol = solve_bound(prob, 1e-3)
        assert np.max(np.abs(implicit_check(sol))) <= 1e-6

    def test_smooth_rk4_fourth_order(self):
        prob = BoundProblem.from_function(
            lambda t: 1.0 + math.sin(3.0 * t), 0.0, 1.0, c=1.0, h0=1.0
        )
        steps = (0.05, 0.025, 0.0125, 0.00625)
        devs = [
            np.max(np.abs(implicit_check(solve_bound(prob, dt)))) for dt in steps
        ]
        # halving dt at least quarters the deviation, and the fitted slope
        # sits at the scheme order
        assert all(a / b >= 4.0 for a, b in zip(devs, devs[1:]))
        slope = np.polyfit(np.log(steps), np.log(devs), 1)[0]
        assert slope >= 3.5

    def test_unaligned_jumps_drop_to_first_order(self):
        prob = BoundProblem.from_samples(
            [0.0, 0.335, 0.665, 1.0], [0.5, 2.0, 1.0, 0.0], c=1.0, h0=1.0
        )
        steps = (1 / 100, 1 / 200, 1 / 400, 1 / 800, 1 / 1600)
        devs = [
            np.max(np.abs(implicit_check(solve_bound(prob, dt, method="rk4"))))
            for dt in steps
        ]
        assert all(a > b for a, b in zip(devs, devs[1:]))
        slope = np.polyfit(np.log(steps), np.log(devs), 1)[0]
        assert 0.6 <= slope <= 2.2

    def test_overflowed_tail_is_nan(self):
        prob = BoundProblem.from_function(lambda t: 1.0, 0.0, 1.0, c=10.0, h0=1.0)
        deviations = implicit_check(solve_bound(prob, 1e-2))
        assert np.isnan(deviations[-1])
        assert np.isfinite(deviations[0])


class TestSingularProfileSignal:
    def test_h_stays_finite(self):
        # B carries the per-interval criterion mass of the dyadic schedule:
        # its time integral is finite, so the bound must stay finite even
        # though the amplitude blows up toward t_inf
        s = DyadicSchedule(q=6.0)
        report = claim1_terms(s, 3)
        times, values = [0.0], [0.0]
        for n in (1, 2, 3):
            lo, hi = s.interval(n)
            times.extend([lo, hi])
            values.extend([float(report.integrals[n - 1]) / (hi - lo), 0.0])
        times.append(0.999)
        values.append(0.0)
        prob = BoundProblem.from_samples(times, values, c=1.0, h0=1.0)
        assert prob.b_integral == pytest.approx(
            float(report.integral_partials[-1]), rel=1e-12
        )
        sol = solve_bound(prob)
        assert not sol.overflowed
        assert np.all(np.isfinite(sol.h))
        assert np.all(np.diff(sol.h) >= 0.0)
        assert sol.h[-1] == pytest.approx(bound_root(prob), rel=1e-9)
        assert np.max(np.abs(implicit_check(sol))) <= 1e-10


class TestCsv:
    def test_signal_roundtrip(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("t,B\n0.0,1.0\n0.5,2.0\n1.0,0.0\n")
        times, values = read_signal_csv(path)
        np.testing.assert_array_equal(times, [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(values, [1.0, 2.0, 0.0])

    def test_headerless(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("0.0,1.0\n1.0,0.0\n")
        times, values = read_signal_csv(path)
        assert times.size == 2

    def test_malformed_reports_line(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("t,B\n0.0,1.0\noops,2.0\n1.0,0.0\n")
        with pytest.raises(ValueError, match="line 3"):
            read_signal_csv(path)
        path.write_text("t,B\n0.0,1.0,9.0\n")
        with pytest.raises(ValueError, match="line 2"):
            read_signal_csv(path)

    def test_bound_csv_layout(self, tmp_path):
        prob = BoundProblem.from_samples([0.0, 0.5, 1.0], [1.0, 0.5, 0.0], c=1.0, h0=1.0)
        sol = solve_bound(prob)
        path = tmp_path / "h.csv"
        write_bound_csv(path, sol)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,H,deviation"
        assert len(lines) == sol.times.size + 1
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == 1.0
