import math

import numpy as np
import pytest

from wlns.field import Grid, ScalarField, VectorField, forward_transform, gradient, laplacian
from wlns.nse_solver import (
    BlowUpError,
    CutoffFunction,
    SolverConfig,
    SolverState,
    constant_one,
    cylinder_cutoff,
    energy_residual,
    gaussian_bump,
    kinetic_energy,
    leray_project,
    nonlinear_term,
    pressure_from_velocity,
    pressure_split,
    random_divfree,
    run,
    single_mode,
    smoothstep_down,
    smoothstep_down_d1,
    smoothstep_down_d2,
    spectral_divergence_defect,
    step,
    taylor_green,
    to_physical,
    to_spectral,
)


@pytest.fixture(scope="module")
def tg_run_32():
    """Taylor-Green benchmark trajectory shared across the module."""
    grid = Grid(n=32)
    config = SolverConfig(viscosity=1.0, dt=1e-3, t_end=0.1, snapshot_every=2)
    return run(taylor_green(grid), config, q=6.0)


class TestInitialConditions:
    def test_taylor_green_components(self):
        grid = Grid(n=16)
        u = taylor_green(grid, amplitude=2.0)
        x, y, _ = grid.coordinates
        assert np.allclose(u.u1.values, 2.0 * np.cos(x) * np.sin(y))
        assert np.allclose(u.u2.values, -2.0 * np.sin(x) * np.cos(y))
        assert np.all(u.u3.values == 0.0)

    def test_single_mode_requires_transversality(self):
        grid = Grid(n=16)
        with pytest.raises(ValueError, match="orthogonal"):
            single_mode(grid, mode=(0, 0, 1), direction=(0.0, 0.0, 1.0))

    def test_random_divfree_properties(self):
        grid = Grid(n=16)
        u = random_divfree(grid, seed=42, amplitude=0.7)
        assert u.max_abs() == pytest.approx(0.7, rel=1e-12)
        defect = spectral_divergence_defect(grid, to_spectral(u))
        assert defect < 1e-12

    def test_random_divfree_deterministic(self):
        grid = Grid(n=16)
        a = random_divfree(grid, seed=9)
        b = random_divfree(grid, seed=9)
        assert np.array_equal(a.as_array(), b.as_array())
        c = random_divfree(grid, seed=10)
        assert not np.array_equal(a.as_array(), c.as_array())


class TestLerayProjection:
    def test_divergence_free_field_unchanged(self):
        grid = Grid(n=16)
        u = single_mode(grid, mode=(0, 0, 2), direction=(0.0, 1.0, 0.0))
        modes = to_spectral(u)
        projected = leray_project(grid, modes)
        assert np.max(np.abs(projected - modes)) < 1e-12

    def test_gradient_annihilated(self):
        grid = Grid(n=16)
        x, y, z = grid.coordinates
        phi_modes = forward_transform(
            ScalarField(grid, np.sin(x) * np.cos(2 * y) + np.sin(z))
        )
        g = gradient(phi_modes)
        projected = leray_project(grid, to_spectral(g))
        assert np.max(np.abs(projected)) < 1e-12

    def test_idempotent(self):
        grid = Grid(n=12)
        rng = np.random.default_rng(4)
        modes = np.fft.fftn(rng.normal(size=(3, *grid.shape)), axes=(1, 2, 3))
        once = leray_project(grid, modes)
        twice = leray_project(grid, once)
        assert np.max(np.abs(twice - once)) <= 1e-12 * np.max(np.abs(once))

    def test_mean_mode_untouched(self):
        grid = Grid(n=8)
        modes = np.zeros((3, 8, 8, 8), dtype=np.complex128)
        modes[:, 0, 0, 0] = [1.0, 2.0, 3.0]
        out = leray_project(grid, modes)
        assert np.array_equal(out[:, 0, 0, 0], [1.0, 2.0, 3.0])


class TestNonlinearTerm:
    def test_constant_field_gives_zero(self):
        grid = Grid(n=8)
        u = VectorField.from_arrays(
            grid, np.full(grid.shape, 1.5), np.full(grid.shape, -0.5), np.zeros(grid.shape)
        )
        mask = grid.dealias_mask()
        out = nonlinear_term(grid, to_spectral(u), mask)
        assert np.max(np.abs(out)) < 1e-14

    def test_taylor_green_is_pure_gradient(self):
        grid = Grid(n=32)
        u = taylor_green(grid)
        mask = grid.dealias_mask()
        nl = nonlinear_term(grid, to_spectral(u) * mask, mask)
        projected = leray_project(grid, nl)
        assert np.max(np.abs(nl)) > 0.1  # the term itself is not trivial
        assert np.max(np.abs(projected)) < 1e-10

    def test_brute_force_convolution_oracle(self):
        # band-limited input (|m| <= 1 per axis) so the circular FFT
        # product has no aliased images and must equal the direct
        # convolution sum over integer modes
        grid = Grid(n=8)
        rng = np.random.default_rng(77)
        raw = np.fft.fftn(rng.normal(size=(3, 8, 8, 8)), axes=(1, 2, 3)) / 8**3
        m = grid.mode_numbers
        band = (
            (np.abs(m)[:, None, None] <= 1)
            & (np.abs(m)[None, :, None] <= 1)
            & (np.abs(m)[None, None, :] <= 1)
        )
        modes = leray_project(grid, raw * band)

        coeffs = {}
        for i in range(3):
            for a in range(8):
                for b in range(8):
                    for c in range(8):
                        if abs(modes[i, a, b, c]) > 0:
                            coeffs.setdefault(i, []).append(
                                ((int(m[a]), int(m[b]), int(m[c])), modes[i, a, b, c])
                            )

        two_pi_over_l = 2.0 * np.pi / grid.length
        oracle = np.zeros_like(modes)
        pos = {int(mm): idx for idx, mm in enumerate(m)}
        for i in range(3):
            for j in range(3):
                for (ma, ca) in coeffs.get(i, []):
                    for (mb, cb) in coeffs.get(j, []):
                        target = tuple(ma[ax] + mb[ax] for ax in range(3))
                        k_j = two_pi_over_l * target[j]
                        idx = tuple(pos[t] for t in target)
                        oracle[(i, *idx)] += 1j * k_j * ca * cb

        mask = grid.dealias_mask()
        out = nonlinear_term(grid, modes, mask)
        assert np.max(np.abs(out - oracle)) < 1e-13

    def test_overflow_aborts(self):
        grid = Grid(n=8)
        huge = np.full(grid.shape, 1e200)
        u = VectorField.from_arrays(grid, huge, huge, huge)
        with pytest.raises(BlowUpError, match="overflow"):
            nonlinear_term(grid, to_spectral(u), grid.dealias_mask())


class TestPressure:
    def test_constant_velocity_zero_pressure(self):
        grid = Grid(n=8)
        u = VectorField.from_arrays(
            grid, np.ones(grid.shape), np.ones(grid.shape), np.ones(grid.shape)
        )
        P = pressure_from_velocity(u)
        assert np.max(np.abs(P.values)) < 1e-14

    def test_taylor_green_pressure(self):
        grid = Grid(n=32)
        P = pressure_from_velocity(taylor_green(grid))
        x, y, _ = grid.coordinates
        exact = -(np.cos(2 * x) + np.cos(2 * y)) / 4.0
        assert np.max(np.abs(P.values - exact)) < 1e-10

    def test_poisson_residual_independent_paths(self):
        # P from the symbol solve; the defect Lap P + div div (u(x)u)
        # recomputed entirely through the field-module operators
        grid = Grid(n=16)
        for seed in range(5):
            u = random_divfree(grid, seed=seed, max_mode=grid.n // 4 - 1)
            P = pressure_from_velocity(u, dealias_fraction=1.0)
            lhs = laplacian(forward_transform(P)).values
            comps = [c.values for c in u.components]
            rhs = np.zeros(grid.shape)
            for i in range(3):
                row = VectorField.from_arrays(
                    grid, *(comps[i] * comps[j] for j in range(3))
                )
                from wlns.field import divergence

                rhs += gradient(forward_transform(divergence(row))).components[i].values
            defect = lhs + rhs
            scale = max(1.0, np.max(np.abs(rhs)))
            assert np.max(np.abs(defect)) / scale < 1e-10

    def test_split_all_low(self):
        grid = Grid(n=16)
        u = random_divfree(grid, seed=3, amplitude=0.5)
        p1, p2 = pressure_split(u)
        P = pressure_from_velocity(u)
        assert np.max(np.abs(p1.values)) < 1e-14
        assert np.max(np.abs(p2.values - P.values)) < 1e-12

    def test_split_all_high(self):
        grid = Grid(n=16)
        u = single_mode(grid, mode=(0, 0, 1), amplitude=3.0)
        shifted = VectorField.from_arrays(
            grid, u.u1.values + 5.0, u.u2.values, u.u3.values
        )
        p1, p2 = pressure_split(shifted)
        assert np.max(np.abs(p2.values)) < 1e-14

    def test_split_additivity_mixed(self):
        grid = Grid(n=16)
        u = random_divfree(grid, seed=8, amplitude=2.0)
        mag = u.magnitude().values
        assert mag.min() < 1.0 < mag.max()  # genuinely mixed
        p1, p2 = pressure_split(u)
        P = pressure_from_velocity(u)
        assert np.max(np.abs(p1.values + p2.values - P.values)) < 1e-10


class TestStepping:
    def test_zero_stays_zero(self):
        grid = Grid(n=8)
        u0 = VectorField.from_arrays(
            grid, np.zeros(grid.shape), np.zeros(grid.shape), np.zeros(grid.shape)
        )
        config = SolverConfig(dt=1e-2, t_end=0.1)
        result = run(u0, config)
        assert all(s.max_abs() == 0.0 for s in result.snapshots)

    def test_single_mode_heat_decay(self):
        grid = Grid(n=16)
        u0 = single_mode(grid, mode=(0, 0, 1), direction=(1.0, 0.0, 0.0))
        config = SolverConfig(viscosity=1.0, dt=1e-3, t_end=0.1, snapshot_every=100)
        result = run(u0, config)
        final = result.snapshots[-1]
        expected = math.exp(-0.1)
        err = np.max(np.abs(final.u1.values - expected * u0.u1.values))
        assert err < 1e-10

    def test_taylor_green_energy_law(self, tg_run_32):
        result = tg_run_32
        e0 = kinetic_energy(result.snapshots[0])
        for t, u in zip(result.times, result.snapshots):
            expected = e0 * math.exp(-4.0 * t)
            assert kinetic_energy(u) == pytest.approx(expected, rel=1e-6)

    def test_energy_nonincreasing(self):
        grid = Grid(n=16)
        u0 = random_divfree(grid, seed=12, amplitude=1.0)
        config = SolverConfig(viscosity=1.0, dt=2e-3, t_end=0.05, snapshot_every=1)
        result = run(u0, config)
        energies = [kinetic_energy(u) for u in result.snapshots]
        for a, b in zip(energies, energies[1:]):
            assert b <= a + 1e-12

    def test_mean_momentum_constant(self):
        grid = Grid(n=16)
        u0 = random_divfree(grid, seed=5, amplitude=1.0)
        shifted = VectorField.from_arrays(
            grid, u0.u1.values + 0.3, u0.u2.values - 0.1, u0.u3.values
        )
        config = SolverConfig(dt=2e-3, t_end=0.02)
        state = SolverState.from_velocity(shifted, config)
        start = state.modes[:, 0, 0, 0].copy()
        for _ in range(config.n_steps):
            state = step(state, config)
        assert np.max(np.abs(state.modes[:, 0, 0, 0] - start)) < 1e-12

    def test_divergence_and_hermitian_preserved(self, tg_run_32):
        from wlns.field import SpectralField

        final = tg_run_32.snapshots[-1]
        modes = to_spectral(final)
        assert spectral_divergence_defect(final.grid, modes) < 1e-10
        defect = SpectralField(final.grid, modes).hermitian_defect()
        assert defect < 1e-12

    def test_cfl_series_recorded(self, tg_run_32):
        result = tg_run_32
        assert len(result.cfl) == 100
        # dt * max|u| / h with max|u| ~ 1, dt = 1e-3, h = 2 pi / 32
        assert 0.001 < result.cfl[0] < 0.01
        assert np.all(np.diff(result.cfl) < 0)  # decaying flow

    def test_trace_collected(self, tg_run_32):
        trace = tg_run_32.trace
        assert trace is not None
        assert len(trace.t) == len(tg_run_32.times)
        cum = trace.accumulated()["C_lps"]
        assert np.all(np.diff(cum) > 0)

    def test_blowup_raises_with_partial_result(self):
        grid = Grid(n=16)
        u0 = random_divfree(grid, seed=2, amplitude=1.0)
        config = SolverConfig(dt=1e-3, t_end=0.05, blowup_threshold=0.5)
        with pytest.raises(BlowUpError) as excinfo:
            run(u0, config, q=6.0)
        err = excinfo.value
        assert err.last_time == 0.0
        assert err.result is not None
        assert len(err.result.snapshots) == 1
        assert err.result.trace is not None

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            SolverConfig(dt=-1e-3)
        with pytest.raises(ValueError):
            SolverConfig(viscosity=0.0)
        with pytest.raises(ValueError):
            SolverConfig(dt=3e-3, t_end=0.01).n_steps  # not an integer multiple

    def test_kinetic_energy_parseval(self):
        grid = Grid(n=16)
        u = random_divfree(grid, seed=30)
        direct = kinetic_energy(u)
        modes = to_spectral(u)
        from_modes = 0.5 * grid.volume * float(np.sum(np.abs(modes) ** 2))
        assert direct == pytest.approx(from_modes, rel=1e-12)


class TestScalingEquivariance:
    def test_zoom_commutes_with_evolution(self):
        """u -> eps u(eps^2 t, eps x) maps trajectories to trajectories.

        On the periodic box the zoomed initial data is the eps-fold tiling
        with amplitude eps; evolving it on the doubled grid with dt/eps^2
        must reproduce the tiling of the evolved coarse solution, because
        the scheme commutes with the scaling mode-for-mode (dealiasing
        bands correspond exactly when n is doubled).
        """
        eps = 2
        coarse_grid = Grid(n=24)
        u0 = random_divfree(coarse_grid, seed=21, max_mode=4, amplitude=1.0)
        dt, steps = 2e-3, 4
        coarse_cfg = SolverConfig(dt=dt, t_end=dt * steps, snapshot_every=steps)
        coarse = run(u0, coarse_cfg)

        fine_grid = Grid(n=eps * coarse_grid.n)
        tiled0 = VectorField.from_arrays(
            fine_grid, *(eps * np.tile(c.values, (eps, eps, eps)) for c in u0.components)
        )
        fine_cfg = SolverConfig(
            dt=dt / eps**2, t_end=dt * steps / eps**2, snapshot_every=steps * eps**2
        )
        fine = run(tiled0, fine_cfg)

        expected = np.stack(
            [eps * np.tile(c.values, (eps, eps, eps)) for c in coarse.snapshots[-1].components]
        )
        got = fine.snapshots[-1].as_array()
        scale = np.max(np.abs(expected))
        assert np.max(np.abs(got - expected)) / scale < 1e-6


class TestCutoffs:
    def test_smoothstep_join_values(self):
        s = np.array([0.0, 1.0])
        assert np.allclose(smoothstep_down(s), [1.0, 0.0])
        assert np.allclose(smoothstep_down_d1(s), [0.0, 0.0])
        assert np.allclose(smoothstep_down_d2(s), [0.0, 0.0])
        mid = np.array([0.5])
        assert smoothstep_down(mid)[0] == pytest.approx(0.5)

    def test_constant_one_derivatives_vanish(self):
        grid = Grid(n=8)
        c = constant_one()
        assert np.all(c.value(grid, 0.3) == 1.0)
        assert np.all(c.time_derivative(grid, 0.3) == 0.0)
        assert np.all(c.gradient(grid, 0.3) == 0.0)
        assert np.all(c.laplacian(grid, 0.3) == 0.0)

    def test_gaussian_derivatives_match_spectral(self):
        grid = Grid(n=32)
        center = (np.pi, np.pi, np.pi)
        bump = gaussian_bump(center, width=0.6)
        phi = ScalarField(grid, bump.value(grid, 0.0))
        spectral_grad = gradient(forward_transform(phi))
        closed_grad = bump.gradient(grid, 0.0)
        for i, part in enumerate(spectral_grad.components):
            assert np.max(np.abs(part.values - closed_grad[i])) < 1e-4
        spectral_lap = laplacian(forward_transform(phi)).values
        assert np.max(np.abs(spectral_lap - bump.laplacian(grid, 0.0))) < 1e-3

    def test_cylinder_plateau_and_support(self):
        grid = Grid(n=32)
        center = (np.pi, np.pi, np.pi)
        cut = cylinder_cutoff(center, r_inner=1.0, r_outer=2.0, t_zero=0.0, t_one=0.5)
        phi = cut.value(grid, 1.0)  # time factor saturated at 1
        d = np.sqrt(
            sum((grid.coordinates[i] - center[i]) ** 2 for i in range(3))
        )
        assert np.all(phi[d <= 1.0] == 1.0)
        assert np.all(phi[d >= 2.0] == 0.0)
        assert np.all((phi >= 0.0) & (phi <= 1.0))
        # before the ramp starts everything vanishes
        assert np.all(cut.value(grid, -0.1) == 0.0)

    def test_cylinder_time_derivative_richardson(self):
        grid = Grid(n=8, length=8.0)
        cut = cylinder_cutoff((4.0, 4.0, 4.0), 1.0, 2.0, t_zero=0.0, t_one=1.0)
        t = 0.37
        for h in (1e-3, 5e-4):
            fd = (cut.value(grid, t + h) - cut.value(grid, t - h)) / (2 * h)
            exact = cut.time_derivative(grid, t)
            assert np.max(np.abs(fd - exact)) < 40 * h**2

    def test_cylinder_gradient_matches_finite_differences(self):
        grid = Grid(n=64, length=8.0)
        cut = cylinder_cutoff((4.0, 4.0, 4.0), 1.0, 3.0, t_zero=-1.0, t_one=-0.5)
        phi = cut.value(grid, 0.0)
        fd = np.gradient(phi, grid.spacing, axis=0)
        exact = cut.gradient(grid, 0.0)[0]
        # second-order FD against the closed form; h^2 * |phi'''| ~ 2e-2
        assert np.max(np.abs(fd - exact)) < 2.5e-2
        assert np.max(np.abs(exact)) > 0.5  # the comparison is not vacuous


class TestEnergyResidual:
    def test_zero_velocity_zero_residual(self):
        grid = Grid(n=8)
        zeros = np.zeros(grid.shape)
        u0 = VectorField.from_arrays(grid, zeros, zeros, zeros)
        result = run(u0, SolverConfig(dt=1e-2, t_end=0.06, snapshot_every=1))
        report = energy_residual(result)
        assert report.max_abs == 0.0

    def test_global_balance_taylor_green(self, tg_run_32):
        report = energy_residual(tg_run_32, constant_one())
        assert report.max_abs < 1e-6

    def test_gaussian_bump_residual(self, tg_run_32):
        bump = gaussian_bump((np.pi, np.pi, np.pi), width=0.5)
        report = energy_residual(tg_run_32, bump)
        assert report.max_abs < 1e-4

    def test_requires_enough_snapshots(self):
        grid = Grid(n=8)
        u0 = taylor_green(grid, amplitude=0.1)
        result = run(u0, SolverConfig(dt=1e-2, t_end=0.03, snapshot_every=1))
        with pytest.raises(ValueError, match="snapshots"):
            energy_residual(result, time_order=4)
        # 4 snapshots suffice at second order
        energy_residual(result, time_order=2)

    def test_second_order_refinement(self):
        # halving the snapshot spacing must shrink the defect ~4x
        grid = Grid(n=16)
        maxima = []
        for dt in (2e-3, 1e-3):
            result = run(
                taylor_green(grid), SolverConfig(dt=dt, t_end=0.08, snapshot_every=2)
            )
            maxima.append(energy_residual(result, time_order=2).max_abs)
        order = math.log2(maxima[0] / maxima[1])
        assert order > 1.5
