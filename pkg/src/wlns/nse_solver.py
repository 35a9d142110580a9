"""Pseudo-spectral incompressible flow on the periodic box.

Velocity lives in Fourier space as a ``(3, n, n, n)`` complex array of
modes.  Time stepping is classical RK4 on the nonlinear term with the
viscous semigroup handled exactly by an integrating factor, so a pure
heat mode decays with machine-precision accuracy at any step size.
Quadratic products are formed in physical space and dealiased by the
2/3 rule.

The module also recovers the pressure by a spectral Poisson solve and
evaluates the localized energy-balance residual against a smooth
space-time cutoff; both feed the regularity diagnostics downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from wlns.criteria import CriterionTrace, TraceRow, evaluate_row
from wlns.field import Grid, ScalarField, VectorField, forward_transform, inverse_transform


class BlowUpError(RuntimeError):
    """Raised when the state leaves the resolvable regime.

    ``last_time`` is the last time with a valid state; ``result`` holds the
    partial trajectory collected so far (may be ``None`` for low-level
    calls that have no trajectory context).
    """

    def __init__(self, message: str, last_time: float, result=None):
        super().__init__(message)
        self.last_time = last_time
        self.result = result


@dataclass(frozen=True)
class SolverConfig:
    viscosity: float = 1.0
    dt: float = 1e-3
    t_end: float = 0.1
    dealias_fraction: float = 2.0 / 3.0
    snapshot_every: int = 1
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if not (self.viscosity > 0 and np.isfinite(self.viscosity)):
            raise ValueError("viscosity must be positive")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias fraction must lie in (0, 1]")

    @property
    def n_steps(self) -> int:
        steps = round(self.t_end / self.dt)
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError("t_end must be an integer number of steps")
        return int(steps)


# ---------------------------------------------------------------------------
# initial conditions


def taylor_green(grid: Grid, amplitude: float = 1.0) -> VectorField:
    """Planar vortex array embedded in the 3-D box.

    ``u = A (cos x sin y, -sin x cos y, 0)`` is an exact solution decaying
    as ``e^{-2 nu t}``; its self-advection is a pure gradient, so the
    projected nonlinearity vanishes identically.
    """
    x, y, _ = grid.coordinates
    return VectorField.from_arrays(
        grid,
        amplitude * np.cos(x) * np.sin(y),
        -amplitude * np.sin(x) * np.cos(y),
        np.zeros(grid.shape),
    )


def single_mode(
    grid: Grid,
    mode: Sequence[int] = (0, 0, 1),
    direction: Sequence[float] = (1.0, 0.0, 0.0),
    amplitude: float = 1.0,
) -> VectorField:
    """One transverse Fourier mode ``A d cos(k.x)`` with ``d`` unit, ``d.k = 0``.

    Because the advection term is proportional to ``d.k``, this is an exact
    Stokes eigenmode of the full nonlinear equations.
    """
    mode = np.asarray(mode, dtype=np.int64)
    direction = np.asarray(direction, dtype=np.float64)
    k = 2.0 * np.pi / grid.length * mode
    if abs(float(direction @ k)) > 1e-12 * (1.0 + np.linalg.norm(k)):
        raise ValueError("direction must be orthogonal to the wavevector")
    direction = direction / np.linalg.norm(direction)
    x, y, z = grid.coordinates
    phase = np.cos(k[0] * x + k[1] * y + k[2] * z)
    return VectorField.from_arrays(
        grid, *(amplitude * direction[i] * phase for i in range(3))
    )


def random_divfree(
    grid: Grid, seed: int, max_mode: int | None = None, amplitude: float = 1.0
) -> VectorField:
    """Band-limited solenoidal field with ``max|u| = amplitude``."""
    if max_mode is None:
        max_mode = grid.n // 4
    rng = np.random.default_rng(seed)
    modes = np.stack(
        [forward_transform(ScalarField(grid, rng.normal(size=grid.shape))).modes
         for _ in range(3)]
    )
    keep = np.abs(grid.mode_numbers) <= max_mode
    band = keep[:, None, None] & keep[None, :, None] & keep[None, None, :]
    modes *= band
    modes = leray_project(grid, modes)
    u = to_physical(grid, modes)
    peak = u.max_abs()
    if peak == 0.0:
        raise ValueError("degenerate random field")
    return VectorField.from_arrays(
        grid, *(c.values * (amplitude / peak) for c in u.components)
    )


# ---------------------------------------------------------------------------
# spectral operators


def to_spectral(u: VectorField) -> np.ndarray:
    return np.stack([forward_transform(c).modes for c in u.components])


def to_physical(grid: Grid, modes: np.ndarray) -> VectorField:
    from wlns.field import SpectralField

    return VectorField.from_arrays(
        grid, *(inverse_transform(SpectralField(grid, modes[i])).values for i in range(3))
    )


def _symbol_k2(grid: Grid) -> np.ndarray:
    """``|k|^2`` built from the first-derivative symbols, zeros mapped to 1.

    Using the same Nyquist-zeroed symbols as the derivative operators keeps
    the projection/pressure algebra Hermitian and exactly consistent with
    them; the substituted 1 only appears where every symbol vanishes, and
    there the numerators vanish too.
    """
    kx, ky, kz = grid.deriv_symbols
    k2 = kx**2 + ky**2 + kz**2
    return np.where(k2 > 0.0, k2, 1.0)


def leray_project(grid: Grid, modes: np.ndarray) -> np.ndarray:
    """Mode-wise ``(I - k k^T / |k|^2)``; the mean mode passes through."""
    kx, ky, kz = grid.deriv_symbols
    k2 = _symbol_k2(grid)
    compression = (kx * modes[0] + ky * modes[1] + kz * modes[2]) / k2
    out = modes.copy()
    out[0] -= kx * compression
    out[1] -= ky * compression
    out[2] -= kz * compression
    return out


def spectral_divergence_defect(grid: Grid, modes: np.ndarray) -> float:
    """``max_k |k . u(k)|`` relative to ``max_k |u(k)|``."""
    kx, ky, kz = grid.deriv_symbols
    div = np.abs(kx * modes[0] + ky * modes[1] + kz * modes[2])
    peak = np.abs(modes).max()
    if peak == 0.0:
        return 0.0
    return float(div.max() / peak)


def nonlinear_term(grid: Grid, modes: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Divergence-form advection ``(div(u (x) u))^`` with 2/3 dealiasing.

    The product is formed in physical space; output modes outside the
    retained band are zeroed.  Not projected -- callers compose with
    ``leray_project`` as the scheme requires.
    """
    u = [inverse_transform_raw(grid, modes[i]) for i in range(3)]
    out = np.empty_like(modes)
    symbols = grid.deriv_symbols
    n3 = grid.n**3
    # the tensor is symmetric: six transforms instead of nine
    products = {}
    for i in range(3):
        for j in range(i, 3):
            with np.errstate(over="ignore", invalid="ignore"):
                product = u[i] * u[j]
            if not np.all(np.isfinite(product)):
                raise BlowUpError(
                    "overflow in physical-space product", last_time=math.nan
                )
            products[i, j] = np.fft.fftn(product) / n3
    for i in range(3):
        acc = np.zeros(grid.shape, dtype=np.complex128)
        for j in range(3):
            acc += symbols[j] * products[min(i, j), max(i, j)]
        out[i] = 1j * acc * mask
    return out


def inverse_transform_raw(grid: Grid, modes: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(modes * grid.n**3).real


def pressure_from_velocity(
    u: VectorField, dealias_fraction: float = 2.0 / 3.0, weight: np.ndarray | None = None
) -> ScalarField:
    """Mean-zero spectral solve of ``-Lap P = div div (u (x) u)``.

    ``P^(k) = -(k_i k_j / |k|^2) (u_i u_j)^(k)``; an optional pointwise
    ``weight`` multiplies the tensor before the solve (used for the
    high/low pressure split).
    """
    grid = u.grid
    mask = grid.dealias_mask(dealias_fraction)
    k = grid.deriv_symbols
    k2 = _symbol_k2(grid)
    comps = [c.values for c in u.components]
    n3 = grid.n**3
    phat = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(3):
        for j in range(3):
            tensor = comps[i] * comps[j]
            if weight is not None:
                tensor = tensor * weight
            phat -= k[i] * k[j] * (np.fft.fftn(tensor) / n3) / k2
    phat *= mask
    phat[0, 0, 0] = 0.0
    return ScalarField(grid, np.fft.ifftn(phat * n3).real)


def pressure_split(
    u: VectorField, dealias_fraction: float = 2.0 / 3.0
) -> tuple[ScalarField, ScalarField]:
    """Pressure from the ``|u| >= 1`` part of the tensor, and the rest."""
    high = (u.magnitude().values >= 1.0).astype(np.float64)
    p1 = pressure_from_velocity(u, dealias_fraction, weight=high)
    p2 = pressure_from_velocity(u, dealias_fraction, weight=1.0 - high)
    return p1, p2


# ---------------------------------------------------------------------------
# time stepping


@dataclass(frozen=True)
class SolverState:
    grid: Grid
    time: float
    step_index: int
    modes: np.ndarray  # (3, n, n, n) complex

    @classmethod
    def from_velocity(cls, u: VectorField, config: SolverConfig) -> "SolverState":
        mask = u.grid.dealias_mask(config.dealias_fraction)
        modes = leray_project(u.grid, to_spectral(u) * mask)
        return cls(grid=u.grid, time=0.0, step_index=0, modes=modes)

    def velocity(self) -> VectorField:
        return to_physical(self.grid, self.modes)


def step(state: SolverState, config: SolverConfig) -> SolverState:
    """One RK4 step with the viscous factor applied exactly per substage."""
    grid = state.grid
    dt = config.dt
    mask = grid.dealias_mask(config.dealias_fraction)
    decay_half = np.exp(-config.viscosity * grid.k_squared * (dt / 2.0))
    decay_full = decay_half * decay_half

    def rhs(modes):
        return -leray_project(grid, nonlinear_term(grid, modes, mask))

    u0 = state.modes
    k1 = rhs(u0)
    k2 = rhs(decay_half * (u0 + 0.5 * dt * k1))
    k3 = rhs(decay_half * u0 + 0.5 * dt * k2)
    k4 = rhs(decay_full * u0 + dt * decay_half * k3)
    new = decay_full * u0 + (dt / 6.0) * (decay_full * k1 + 2.0 * decay_half * (k2 + k3) + k4)
    new = leray_project(grid, new)
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite modes after step", last_time=state.time)
    return replace(
        state,
        time=(state.step_index + 1) * dt,
        step_index=state.step_index + 1,
        modes=new,
    )


@dataclass
class SimulationResult:
    grid: Grid
    config: SolverConfig
    times: np.ndarray  # snapshot times
    snapshots: list[VectorField]
    cfl: np.ndarray  # dt * max|u| / spacing, one entry per completed step
    trace: CriterionTrace | None


def run(
    u0: VectorField,
    config: SolverConfig,
    q: float | None = None,
    callback: Callable[[SolverState], None] | None = None,
) -> SimulationResult:
    """March from ``t = 0`` to ``t_end``, recording snapshots and diagnostics.

    A criterion trace is collected at the snapshot cadence when ``q`` is
    given.  Blow-up (non-finite modes or ``max|u|`` past the threshold)
    raises :class:`BlowUpError` carrying the partial result.
    """
    grid = u0.grid
    state = SolverState.from_velocity(u0, config)
    times: list[float] = []
    snapshots: list[VectorField] = []
    rows: list[TraceRow] = []
    cfl: list[float] = []

    def record(state: SolverState, u: VectorField | None = None):
        u = state.velocity() if u is None else u
        times.append(state.time)
        snapshots.append(u)
        if q is not None:
            rows.append(evaluate_row(u, q, t=state.time))

    def partial() -> SimulationResult:
        trace = CriterionTrace.from_rows(q, rows) if q is not None and rows else None
        return SimulationResult(
            grid=grid,
            config=config,
            times=np.array(times),
            snapshots=snapshots,
            cfl=np.array(cfl),
            trace=trace,
        )

    record(state)
    n_steps = config.n_steps
    for i in range(n_steps):
        try:
            state = step(state, config)
        except BlowUpError as exc:
            raise BlowUpError(str(exc), last_time=i * config.dt, result=partial()) from None
        u = state.velocity()
        peak = u.max_abs()
        cfl.append(config.dt * peak / grid.spacing)
        if not math.isfinite(peak) or peak > config.blowup_threshold:
            raise BlowUpError(
                f"max|u| = {peak:.3e} exceeded threshold at t = {state.time:.6g}",
                last_time=(state.step_index - 1) * config.dt,
                result=partial(),
            )
        if state.step_index % config.snapshot_every == 0 or state.step_index == n_steps:
            record(state, u)
        if callback is not None:
            callback(state)
    return partial()


def kinetic_energy(u: VectorField) -> float:
    """``(1/2) integral |u|^2 dx`` by the exact periodic trapezoid rule."""
    total = sum(float(np.sum(c.values**2)) for c in u.components)
    return 0.5 * total * u.grid.cell_volume


# ---------------------------------------------------------------------------
# space-time cutoffs and the localized energy balance


@dataclass(frozen=True)
class CutoffFunction:
    """Closed-form C^2 space-time weight with its derivatives.

    Each callable maps ``(grid, t)`` to an array on the grid: ``value``,
    ``time_derivative``, ``laplacian`` scalar-shaped, ``gradient`` shaped
    ``(3, n, n, n)``.
    """

    value: Callable[[Grid, float], np.ndarray]
    time_derivative: Callable[[Grid, float], np.ndarray]
    gradient: Callable[[Grid, float], np.ndarray]
    laplacian: Callable[[Grid, float], np.ndarray]


def constant_one() -> CutoffFunction:
    return CutoffFunction(
        value=lambda grid, t: np.ones(grid.shape),
        time_derivative=lambda grid, t: np.zeros(grid.shape),
        gradient=lambda grid, t: np.zeros((3, *grid.shape)),
        laplacian=lambda grid, t: np.zeros(grid.shape),
    )


def _min_image(grid: Grid, center: Sequence[float]) -> np.ndarray:
    """Displacements from ``center`` folded to ``[-L/2, L/2)`` per axis."""
    half = grid.length / 2.0
    return np.stack(
        [
            (grid.coordinates[i] - center[i] + half) % grid.length - half
            for i in range(3)
        ]
    )


def gaussian_bump(center: Sequence[float], width: float) -> CutoffFunction:
    """Time-independent ``exp(-|x - c|^2 / (2 w^2))`` (min-image distance).

    Smooth on the torus up to a seam kink of size ``exp(-L^2/(8 w^2))``;
    widths around ``L/12`` keep that far below discretization error.
    """
    if width <= 0:
        raise ValueError("width must be positive")

    def displacement(grid):
        return _min_image(grid, center)

    def value(grid, t):
        d = displacement(grid)
        return np.exp(-np.sum(d**2, axis=0) / (2.0 * width**2))

    def gradient(grid, t):
        d = displacement(grid)
        return -d / width**2 * value(grid, t)

    def laplacian(grid, t):
        d = displacement(grid)
        rho2 = np.sum(d**2, axis=0)
        return np.exp(-rho2 / (2.0 * width**2)) * (rho2 / width**4 - 3.0 / width**2)

    return CutoffFunction(
        value=value,
        time_derivative=lambda grid, t: np.zeros(grid.shape),
        gradient=gradient,
        laplacian=laplacian,
    )


def smoothstep_down(s: np.ndarray) -> np.ndarray:
    """Quintic ramp: 1 for s <= 0, 0 for s >= 1, C^2 across the joins."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def smoothstep_down_d1(s: np.ndarray) -> np.ndarray:
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, -30.0 * s**2 * (1.0 - s) ** 2, 0.0)


def smoothstep_down_d2(s: np.ndarray) -> np.ndarray:
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s), 0.0)


def cylinder_cutoff(
    center: Sequence[float],
    r_inner: float,
    r_outer: float,
    t_zero: float,
    t_one: float,
) -> CutoffFunction:
    """Radial plateau falling to zero between ``r_inner`` and ``r_outer``,
    times a temporal ramp that is 0 for ``t <= t_zero`` and 1 for
    ``t >= t_one``.  All derivatives are closed-form."""
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    if not t_zero < t_one:
        raise ValueError("need t_zero < t_one")
    dr = r_outer - r_inner
    dt_ramp = t_one - t_zero

    def radial_parts(grid):
        d = _min_image(grid, center)
        rho = np.sqrt(np.sum(d**2, axis=0))
        s = (rho - r_inner) / dr
        R = smoothstep_down(s)
        R1 = smoothstep_down_d1(s) / dr
        R2 = smoothstep_down_d2(s) / dr**2
        return d, rho, R, R1, R2

    def time_factor(t: float) -> float:
        return float(1.0 - smoothstep_down(np.asarray((t - t_zero) / dt_ramp)))

    def time_factor_d1(t: float) -> float:
        return float(-smoothstep_down_d1(np.asarray((t - t_zero) / dt_ramp)) / dt_ramp)

    def value(grid, t):
        _, _, R, _, _ = radial_parts(grid)
        return R * time_factor(t)

    def time_derivative(grid, t):
        _, _, R, _, _ = radial_parts(grid)
        return R * time_factor_d1(t)

    def gradient(grid, t):
        d, rho, _, R1, _ = radial_parts(grid)
        safe = np.where(rho > 0.0, rho, 1.0)
        return time_factor(t) * R1 * d / safe

    def laplacian(grid, t):
        _, rho, _, R1, R2 = radial_parts(grid)
        safe = np.where(rho > 0.0, rho, 1.0)
        # radial laplacian R'' + 2 R'/rho; R' vanishes on the plateau so
        # the rho -> 0 limit is clean
        return time_factor(t) * (R2 + 2.0 * R1 / safe)

    return CutoffFunction(
        value=value,
        time_derivative=time_derivative,
        gradient=gradient,
        laplacian=laplacian,
    )


@dataclass(frozen=True)
class EnergyResidualReport:
    times: np.ndarray
    residual: np.ndarray
    max_abs: float
    terms: dict  # per-snapshot integral series keyed by name


def velocity_gradient_energy(u: VectorField, weight: np.ndarray | None = None) -> float:
    """``integral w |grad u|^2`` with all nine derivatives spectral."""
    from wlns.field import gradient as field_gradient

    total = np.zeros(u.grid.shape)
    for c in u.components:
        g = field_gradient(forward_transform(c))
        for part in g.components:
            total += part.values**2
    if weight is not None:
        total = total * weight
    return float(np.sum(total)) * u.grid.cell_volume


def energy_residual(
    result: SimulationResult,
    cutoff: CutoffFunction | None = None,
    time_order: int = 4,
    dealias_fraction: float | None = None,
) -> EnergyResidualReport:
    """Defect of the localized energy balance along a stored trajectory.

    For each interior snapshot time it evaluates ``d/dt int phi |u|^2/2
    + int phi |grad u|^2 - int (|u|^2/2)(phi_t + Lap phi) - int (u . grad
    phi)(|u|^2/2 + P)``; the time derivative uses centered differences of
    the stated order, so the report shrinks under refinement for smooth
    runs.
    """
    if cutoff is None:
        cutoff = constant_one()
    times = result.times
    needed = 5 if time_order == 4 else 3
    if time_order not in (2, 4):
        raise ValueError("time_order must be 2 or 4")
    if len(times) < needed:
        raise ValueError(f"need at least {needed} snapshots for order {time_order}")
    spacing = np.diff(times)
    h = float(spacing[0])
    if not np.allclose(spacing, h, rtol=1e-9, atol=1e-12):
        raise ValueError("energy residual requires uniformly spaced snapshots")

    grid = result.grid
    vol = grid.cell_volume
    fraction = (
        result.config.dealias_fraction if dealias_fraction is None else dealias_fraction
    )

    quadratic = np.empty(len(times))  # int phi |u|^2 / 2
    dissipation = np.empty(len(times))  # int phi |grad u|^2
    transport = np.empty(len(times))  # int (|u|^2/2)(phi_t + lap phi)
    flux = np.empty(len(times))  # int (u . grad phi)(|u|^2/2 + P)
    for idx, (t, u) in enumerate(zip(times, result.snapshots)):
        phi = cutoff.value(grid, t)
        u2_half = 0.5 * sum(c.values**2 for c in u.components)
        quadratic[idx] = np.sum(phi * u2_half) * vol
        dissipation[idx] = velocity_gradient_energy(u, weight=phi)
        transport[idx] = (
            np.sum(u2_half * (cutoff.time_derivative(grid, t) + cutoff.laplacian(grid, t)))
            * vol
        )
        grad_phi = cutoff.gradient(grid, t)
        advect = sum(c.values * grad_phi[i] for i, c in enumerate(u.components))
        pressure = pressure_from_velocity(u, fraction).values
        flux[idx] = np.sum(advect * (u2_half + pressure)) * vol

    if time_order == 2:
        lo, hi = 1, len(times) - 1
        ddt = (quadratic[2:] - quadratic[:-2]) / (2.0 * h)
    else:
        lo, hi = 2, len(times) - 2
        ddt = (
            -quadratic[4:] + 8.0 * quadratic[3:-1] - 8.0 * quadratic[1:-3] + quadratic[:-4]
        ) / (12.0 * h)
    residual = ddt + dissipation[lo:hi] - transport[lo:hi] - flux[lo:hi]
    return EnergyResidualReport(
        times=times[lo:hi],
        residual=residual,
        max_abs=float(np.max(np.abs(residual))) if len(residual) else 0.0,
        terms={
            "quadratic": quadratic,
            "dissipation": dissipation,
            "transport": transport,
            "flux": flux,
        },
    )
