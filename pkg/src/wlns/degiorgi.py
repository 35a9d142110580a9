"""Level-set truncation energies on shrinking parabolic cylinders.

The scheme truncates ``|u|`` at thresholds climbing to 1 while the
space-time cylinders shrink from ``(-1, 1] x B(1)`` to ``(-1/2, 1] x
B(1/2)``; the combined energies ``U_k`` obey a superlinear recursion
that forces them to zero when the starting energy is small.  This module
computes the truncations, the dissipation densities, the ``U_k`` table
for a stored trajectory (mapped into the box by the parabolic scaling),
the localized energy budget against a smooth cutoff, and the recursion
itself with its empirical convergence threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from wlns.field import (
    Grid,
    ScalarField,
    VectorField,
    ball_boundary_cells,
    ball_mask,
    forward_transform,
    gradient,
)
from wlns.nse_solver import (
    CutoffFunction,
    SimulationResult,
    cylinder_cutoff,
    pressure_from_velocity,
    velocity_gradient_energy,
)


def truncation_time(k: int) -> float:
    """Window start ``T_k = -(1/2)(1 + 2^{-k})``; ``T_{-1} = -3/2``."""
    return -0.5 * (1.0 + 2.0 ** (-k))


def cylinder_radius(k: int) -> float:
    """Ball radius ``(1/2)(1 + 2^{-3k})``; ``B_{-1}`` has radius 4.5."""
    return 0.5 * (1.0 + 2.0 ** (-3 * k))


def truncation_threshold(k: int) -> float:
    """Level ``1 - 2^{-k}`` climbing from 0 to 1."""
    return 1.0 - 2.0 ** (-k)


@dataclass(frozen=True)
class CylinderScheme:
    """The ``k = 0 .. k_max`` family of nested space-time cylinders."""

    k_max: int

    def __post_init__(self):
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")

    @property
    def levels(self) -> range:
        return range(self.k_max + 1)

    def window(self, k: int) -> tuple[float, float]:
        return (truncation_time(k), 1.0)


@dataclass(frozen=True)
class CylinderMap:
    """Embedding of the reference cylinders into a simulation box.

    Reference coordinates ``(tau, xi)`` map to ``t = t_end + scale^2 *
    (tau - 1)`` and ``x = center + scale * xi``, the parabolic scaling
    that carries solutions to solutions.  The map refuses geometry that
    does not fit in the box: the outermost ball ``B(-1)`` has reference
    radius 4.5 and wrapping it around the torus would silently change
    the localization.
    """

    center: tuple[float, float, float]
    scale: float
    t_end: float

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError("scale must be positive")

    def sim_time(self, tau: float) -> float:
        return self.t_end + self.scale**2 * (tau - 1.0)

    def reference_time(self, t: float) -> float:
        return 1.0 + (t - self.t_end) / self.scale**2

    def sim_radius(self, reference_radius: float) -> float:
        return self.scale * reference_radius

    def validate(self, grid: Grid, outer_k: int = -1) -> None:
        diameter = 2.0 * self.sim_radius(cylinder_radius(outer_k))
        if diameter > grid.length + 1e-12:
            raise ValueError(
                f"mapped B({outer_k}) has diameter {diameter:.4g} exceeding the "
                f"box length {grid.length:.4g}; shrink the scale"
            )


def truncate(u: VectorField | ScalarField, k: int) -> ScalarField:
    """Excess of ``|u|`` over the k-th threshold, ``(|u| - theta_k)_+``."""
    if k < 0:
        raise ValueError("truncation level must be >= 0")
    m = u.magnitude() if isinstance(u, VectorField) else u
    return ScalarField(m.grid, np.maximum(np.abs(m.values) - truncation_threshold(k), 0.0))


def _gradient_squares(u: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """``|grad u|^2`` and ``|grad |u||^2``, both spectral."""
    grad2 = np.zeros(u.grid.shape)
    for c in u.components:
        for part in gradient(forward_transform(c)).components:
            grad2 += part.values**2
    mag2 = np.zeros(u.grid.shape)
    for part in gradient(forward_transform(u.magnitude())).components:
        mag2 += part.values**2
    return grad2, mag2


def dissipation_density(u: VectorField, k: int) -> ScalarField:
    """Weighted gradient density ``d_k^2`` entering the dissipation term.

    ``d_k^2 = (v_k/|u|) |grad u|^2 + chi_{v_k>0} (theta_k/|u|) |grad|u||^2``
    with the conventions: zero wherever ``v_k = 0`` (for ``k >= 1``), and
    ``v_0/|u| -> 1`` at ``|u| -> 0``, so ``d_0^2 = |grad u|^2`` everywhere.
    """
    if k < 0:
        raise ValueError("level must be >= 0")
    grad2, mag_grad2 = _gradient_squares(u)
    if k == 0:
        return ScalarField(u.grid, grad2)
    m = u.magnitude().values
    v = np.maximum(m - truncation_threshold(k), 0.0)
    active = v > 0.0
    safe_m = np.where(active, m, 1.0)  # on the active set m >= theta_k > 0
    density = np.where(
        active, (v * grad2 + truncation_threshold(k) * mag_grad2) / safe_m, 0.0
    )
    return ScalarField(u.grid, density)


@dataclass(frozen=True)
class LevelSetEnergy:
    """Per-level energy table with geometric error brackets."""

    k: np.ndarray
    window_start: np.ndarray  # T_k
    radius: np.ndarray
    threshold: np.ndarray
    sup_term: np.ndarray
    diss_term: np.ndarray
    boundary_bracket: np.ndarray  # +- volume of sphere-straddling cells (ref units)

    @property
    def total(self) -> np.ndarray:
        return self.sup_term + self.diss_term

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("k,T_k,radius_k,threshold_k,sup_term,diss_term,U_k\n")
            for i in range(len(self.k)):
                row = [
                    str(int(self.k[i])),
                    repr(float(self.window_start[i])),
                    repr(float(self.radius[i])),
                    repr(float(self.threshold[i])),
                    repr(float(self.sup_term[i])),
                    repr(float(self.diss_term[i])),
                    repr(float(self.total[i])),
                ]
                fh.write(",".join(row) + "\n")


MIN_WINDOW_SAMPLES = 10


def level_energy(
    result: SimulationResult,
    scheme: CylinderScheme,
    cmap: CylinderMap,
) -> LevelSetEnergy:
    """The ``U_k = sup + dissipation`` table for a stored trajectory.

    All fields stay in simulation coordinates; the parabolic map
    contributes Jacobian factors instead of resampling.  With ``s`` the
    spatial scale, the reference field is ``s u``, reference gradients
    carry ``s^2``, volumes carry ``s^{-3}`` and the time element
    ``s^{-2}``, so::

        sup_term  = (1/2) s^{-3} max_t  int_{B(c, s r_k)} (s|u| - theta_k)_+^2
        diss_term =       s^{-5} int dt int_{B(c, s r_k)} [scaled density]

    where the scaled density is ``d_k^2`` evaluated on the reference
    field.  The sup over ``(T_k, 1]`` is a max over stored snapshots;
    at least ``MIN_WINDOW_SAMPLES`` snapshots must fall in every window.
    """
    grid = result.grid
    cmap.validate(grid)
    s = cmap.scale
    times = np.asarray(result.times)
    tau = np.array([cmap.reference_time(t) for t in times])
    if tau.max() < 1.0 - 1e-9:
        raise ValueError("trajectory ends before the mapped cylinder does")

    # per-snapshot reference-field ingredients (shared across k)
    magnitudes = []
    grads = []
    for u in result.snapshots:
        grad2, mag_grad2 = _gradient_squares(u)
        magnitudes.append(s * u.magnitude().values)
        grads.append((s**4 * grad2, s**4 * mag_grad2))

    ks, starts, radii, thresholds = [], [], [], []
    sups, disses, brackets = [], [], []
    for k in scheme.levels:
        t_k = truncation_time(k)
        in_window = (tau > t_k) & (tau <= 1.0 + 1e-12)
        count = int(np.count_nonzero(in_window))
        if count < MIN_WINDOW_SAMPLES:
            needed = (1.0 - t_k) / max(MIN_WINDOW_SAMPLES - 1, 1)
            raise ValueError(
                f"window (T_{k}, 1] holds {count} snapshots; need >= "
                f"{MIN_WINDOW_SAMPLES} (reference cadence <= {needed:.3g})"
            )
        radius_sim = cmap.sim_radius(cylinder_radius(k))
        mask = ball_mask(grid, cmap.center, radius_sim)
        theta = truncation_threshold(k)

        sup_val = 0.0
        diss_series = []
        window_tau = tau[in_window]
        window_idx = np.nonzero(in_window)[0]
        for idx in window_idx:
            v = np.maximum(magnitudes[idx] - theta, 0.0)
            sup_val = max(
                sup_val, 0.5 * s ** (-3) * float(np.sum(v[mask] ** 2)) * grid.cell_volume
            )
            if k == 0:
                density = grads[idx][0]
            else:
                active = v > 0.0
                safe = np.where(active, magnitudes[idx], 1.0)
                density = np.where(
                    active, (v * grads[idx][0] + theta * grads[idx][1]) / safe, 0.0
                )
            diss_series.append(float(np.sum(density[mask])) * grid.cell_volume)
        # density is already the reference one; the time integral runs in
        # tau, so only the volume element dxi = s^{-3} dx remains
        diss = float(np.trapezoid(diss_series, window_tau)) * s ** (-3)
        surface = ball_boundary_cells(grid, cmap.center, radius_sim)
        ks.append(k)
        starts.append(t_k)
        radii.append(cylinder_radius(k))
        thresholds.append(theta)
        sups.append(sup_val)
        disses.append(diss)
        brackets.append(surface * grid.cell_volume * s ** (-3))
    return LevelSetEnergy(
        k=np.array(ks),
        window_start=np.array(starts),
        radius=np.array(radii),
        threshold=np.array(thresholds),
        sup_term=np.array(sups),
        diss_term=np.array(disses),
        boundary_bracket=np.array(brackets),
    )


# ---------------------------------------------------------------------------
# the superlinear recursion W_{k+1} = C^k W_k^beta


LOG_FLOOR = -1e6


@dataclass(frozen=True)
class RecursionResult:
    values: np.ndarray  # W_k, underflowing to 0 gracefully
    log_values: np.ndarray  # ln W_k, clipped below at LOG_FLOOR
    converged: bool


def recursive_sequence(C: float, beta: float, w0: float, k_max: int) -> RecursionResult:
    """Iterate ``W_{k+1} = C^k W_k^beta`` in log space.

    Small starting values collapse doubly exponentially while large ones
    blow up; the returned flag reports which side this run landed on.
    Log-space arithmetic keeps the iteration meaningful far past where
    ``W_k`` itself underflows (the exponents grow like ``beta^k``).
    """
    if not (C > 1.0 and beta > 1.0 and w0 > 0.0):
        raise ValueError("need C > 1, beta > 1, w0 > 0")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ln_c = math.log(C)
    log_values = np.empty(k_max + 1)
    log_values[0] = math.log(w0)
    for k in range(k_max):
        nxt = k * ln_c + beta * log_values[k]
        if nxt > 1e6:
            # hopeless divergence; saturate the rest and stop
            log_values[k + 1 :] = np.inf
            break
        log_values[k + 1] = max(nxt, LOG_FLOOR)
    if np.isinf(log_values[-1]):
        converged = False
    elif log_values[-1] <= LOG_FLOOR or log_values[-1] < -1e5:
        converged = True
    else:
        tail = np.diff(log_values[-21:])
        converged = bool(np.all(tail < 0.0) and log_values[-1] < 0.0)
    with np.errstate(under="ignore", over="ignore"):
        values = np.exp(log_values)
    return RecursionResult(values=values, log_values=log_values, converged=converged)


@dataclass(frozen=True)
class ThresholdBracket:
    lower: float  # largest tested W0 that converged
    upper: float  # smallest tested W0 that diverged

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def threshold_scan(
    C: float, beta: float, k_max: int = 200, tol: float = 1e-12
) -> ThresholdBracket:
    """Bisect the convergence threshold of the equality recursion.

    For the closed recurrence the critical value is ``C^{-1/(beta-1)^2}``;
    the scan brackets it to ``tol`` without using that closed form, so the
    two can corroborate each other.
    """
    if not (C > 1.0 and beta > 1.0):
        raise ValueError("need C > 1 and beta > 1")

    def converged(w0: float) -> bool:
        return recursive_sequence(C, beta, w0, k_max).converged

    hi = 1.0
    while converged(hi):
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("no divergent starting value found")
    lo_log2 = -60.0
    while not converged(2.0**lo_log2):
        lo_log2 *= 2.0
        if lo_log2 < -980.0:
            raise RuntimeError("no convergent starting value found")
    lo = 2.0**lo_log2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break  # hit floating-point resolution
        if converged(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdBracket(lower=lo, upper=hi)


def critical_w0_closed_form(C: float, beta: float) -> float:
    """``C^{-1/(beta-1)^2}``, the fixed-family threshold of the recursion."""
    if not (C > 1.0 and beta > 1.0):
        raise ValueError("need C > 1 and beta > 1")
    return C ** (-1.0 / (beta - 1.0) ** 2)


# ---------------------------------------------------------------------------
# localized energy budget


@dataclass(frozen=True)
class EnergyBudgetReport:
    times: np.ndarray
    kinetic: np.ndarray  # int u^2 eta
    dissipation: np.ndarray  # int |grad u|^2 eta
    transport: np.ndarray  # int (u^2/2)(eta_t + lap eta)
    flux: np.ndarray  # int (grad eta . u)(u^2/2 + P)
    slack: np.ndarray  # accumulated inequality slack, one per snapshot
    residual_times: np.ndarray
    rate_residual: np.ndarray

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slack))

    @property
    def max_rate_residual(self) -> float:
        return float(np.max(np.abs(self.rate_residual))) if len(self.rate_residual) else 0.0


def budget_cutoff(cmap: CylinderMap) -> CutoffFunction:
    """Smooth weight equal to 1 on the mapped ``Q_0``, 0 outside ``Q_{-1}``.

    Radially it falls from the mapped ``B(0)`` (radius ``s``) to the mapped
    ``B(-1)`` (radius ``4.5 s``); in time it ramps up between the mapped
    ``T_{-1}`` and ``T_0``.
    """
    return cylinder_cutoff(
        cmap.center,
        r_inner=cmap.sim_radius(cylinder_radius(0)),
        r_outer=cmap.sim_radius(cylinder_radius(-1)),
        t_zero=cmap.sim_time(truncation_time(-1)),
        t_one=cmap.sim_time(truncation_time(0)),
    )


def _validate_support(result: SimulationResult, eta: CutoffFunction, cmap: CylinderMap):
    grid = result.grid
    cmap.validate(grid)
    inner = ball_mask(grid, cmap.center, cmap.sim_radius(cylinder_radius(0)))
    outer = ball_mask(grid, cmap.center, cmap.sim_radius(cylinder_radius(-1)))
    t_start = cmap.sim_time(truncation_time(-1))
    t_plateau = cmap.sim_time(truncation_time(0))
    for t in result.times:
        values = eta.value(grid, t)
        if t >= t_plateau - 1e-12:
            bad = int(np.count_nonzero(np.abs(values[inner] - 1.0) > 1e-12))
            if bad:
                raise ValueError(
                    f"cutoff is not 1 on the mapped Q_0 at t={t:.6g} ({bad} cells)"
                )
        bad = int(np.count_nonzero(np.abs(values[~outer]) > 1e-12))
        if bad:
            raise ValueError(
                f"cutoff does not vanish outside the mapped Q_(-1) at t={t:.6g} "
                f"({bad} cells)"
            )
        if t <= t_start + 1e-12 and np.any(np.abs(values) > 1e-12):
            raise ValueError(f"cutoff active before the mapped window opens (t={t:.6g})")


def energy_budget(
    result: SimulationResult,
    eta: CutoffFunction | None = None,
    cmap: CylinderMap | None = None,
    time_order: int = 4,
) -> EnergyBudgetReport:
    """Term-by-term localized energy inequality along a trajectory.

    With ``eta = None`` the weight is identically 1 and the budget
    degenerates to the global balance.  When a cylinder map is supplied
    the cutoff's support conditions (1 on the mapped ``Q_0``, 0 outside
    the mapped ``Q_{-1}``) are checked cell by cell first.

    The slack series is ``int_{t_0}^{t} (transport + flux - dissipation)
    - [kinetic(t) - kinetic(t_0)]/2``, which is nonnegative up to
    discretization for smooth solutions; the rate residual is its
    derivative counterpart on interior snapshots.
    """
    if eta is None:
        from wlns.nse_solver import constant_one

        eta = constant_one()
    elif cmap is not None:
        _validate_support(result, eta, cmap)

    grid = result.grid
    times = np.asarray(result.times)
    if len(times) < 3:
        raise ValueError("budget needs at least 3 snapshots")
    vol = grid.cell_volume
    n_t = len(times)
    kinetic = np.empty(n_t)
    dissipation = np.empty(n_t)
    transport = np.empty(n_t)
    flux = np.empty(n_t)
    for i, (t, u) in enumerate(zip(times, result.snapshots)):
        w = eta.value(grid, t)
        u2 = sum(c.values**2 for c in u.components)
        kinetic[i] = float(np.sum(u2 * w)) * vol
        dissipation[i] = velocity_gradient_energy(u, weight=w)
        transport[i] = (
            float(np.sum(0.5 * u2 * (eta.time_derivative(grid, t) + eta.laplacian(grid, t))))
            * vol
        )
        grad_eta = eta.gradient(grid, t)
        advect = sum(c.values * grad_eta[j] for j, c in enumerate(u.components))
        pressure = pressure_from_velocity(u, result.config.dealias_fraction).values
        flux[i] = float(np.sum(advect * (0.5 * u2 + pressure))) * vol

    gain = cumulative_trapezoid(transport + flux - dissipation, times, initial=0.0)
    slack = gain - 0.5 * (kinetic - kinetic[0])

    h = float(times[1] - times[0])
    if time_order == 4 and n_t >= 5:
        lo, hi = 2, n_t - 2
        ddt = (-kinetic[4:] + 8 * kinetic[3:-1] - 8 * kinetic[1:-3] + kinetic[:-4]) / (12 * h)
    else:
        lo, hi = 1, n_t - 1
        ddt = (kinetic[2:] - kinetic[:-2]) / (2 * h)
    rate = 0.5 * ddt + dissipation[lo:hi] - transport[lo:hi] - flux[lo:hi]
    return EnergyBudgetReport(
        times=times,
        kinetic=kinetic,
        dissipation=dissipation,
        transport=transport,
        flux=flux,
        slack=slack,
        residual_times=times[lo:hi],
        rate_residual=rate,
    )


# ---------------------------------------------------------------------------
# empirical recursion fit


@dataclass(frozen=True)
class BetaFit:
    trivially_regular: bool
    beta_hat: float | None
    c_hat: float | None
    r_squared: float | None
    n_pairs: int


def fit_beta(series: Sequence[np.ndarray] | np.ndarray) -> BetaFit:
    """Regress ``log U_k = k log C + beta log U_{k-1}`` across runs.

    Exploratory only: the constants of the underlying proposition are not
    constructive, so the fit is reported, never asserted against theory.
    Series that reach exact zero have already truncated to regularity and
    produce no fit; a short all-positive series is a usage error instead.
    """
    if isinstance(series, np.ndarray):
        series = [series]
    rows, targets = [], []
    any_zero = False
    for u in series:
        u = np.asarray(u, dtype=np.float64)
        if np.any(u < 0):
            raise ValueError("level energies must be nonnegative")
        any_zero = any_zero or bool(np.any(u == 0.0))
        for k in range(1, len(u)):
            if u[k] > 0.0 and u[k - 1] > 0.0:
                rows.append((float(k), math.log(u[k - 1])))
                targets.append(math.log(u[k]))
    if len(rows) < 5:
        if any_zero:
            return BetaFit(
                trivially_regular=True,
                beta_hat=None,
                c_hat=None,
                r_squared=None,
                n_pairs=0,
            )
        raise ValueError(
            f"need at least 5 consecutive positive levels, found {len(rows)} usable pairs"
        )
    design = np.array(rows)
    target = np.array(targets)
    coeffs, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    log_c, beta_hat = float(coeffs[0]), float(coeffs[1])
    predicted = design @ coeffs
    ss_res = float(np.sum((target - predicted) ** 2))
    ss_tot = float(np.sum((target - np.mean(target)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return BetaFit(
        trivially_regular=False,
        beta_hat=beta_hat,
        c_hat=math.exp(log_c),
        r_squared=r_squared,
        n_pairs=len(rows),
    )
