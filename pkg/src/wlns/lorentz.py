"""Weak Lebesgue and Lorentz norms, exact on grid data.

A sampled field is a simple function: constant on cells of equal measure.
Its distribution function is a right-continuous step function, so every
norm here is a finite maximum or a finite sum over the distinct data
levels -- no quadrature error enters.  The same machinery doubles for
time signals that are piecewise constant on intervals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from wlns.field import ScalarField


def _values_and_measure(f, region, cell_measure) -> tuple[np.ndarray, float]:
    if isinstance(f, ScalarField):
        values = f.values
        measure = f.grid.cell_volume
        if cell_measure is not None:
            raise ValueError("cell_measure is implied by the field's grid")
    else:
        values = np.asarray(f, dtype=np.float64)
        measure = 1.0 if cell_measure is None else float(cell_measure)
        if measure <= 0:
            raise ValueError("cell measure must be positive")
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if region.shape != values.shape:
            raise ValueError("region mask shape does not match the data")
        values = values[region]
    if not np.all(np.isfinite(values)):
        raise ValueError("norms are only defined for finite data")
    return np.abs(values.ravel()), measure


@dataclass(frozen=True)
class DistributionFunction:
    """Distribution function of ``|f|`` restricted to a region.

    ``thresholds`` holds the distinct data levels in increasing order;
    ``measure_geq[i]`` is the measure of ``{|f| >= thresholds[i]}`` (the
    left limit of the distribution function there) and ``measure_gt[i]``
    the measure of the strict super-level set.
    """

    thresholds: np.ndarray
    measure_geq: np.ndarray
    measure_gt: np.ndarray
    cell_measure: float
    total_measure: float

    @classmethod
    def from_data(cls, f, region=None, cell_measure=None) -> "DistributionFunction":
        absv, measure = _values_and_measure(f, region, cell_measure)
        levels, counts = np.unique(absv, return_counts=True)
        # cumulative count of cells at or above each level
        geq = np.cumsum(counts[::-1])[::-1].astype(np.float64) * measure
        gt = geq - counts * measure
        return cls(
            thresholds=levels,
            measure_geq=geq,
            measure_gt=gt,
            cell_measure=measure,
            total_measure=absv.size * measure,
        )

    def __call__(self, alpha: float) -> float:
        """Measure of the strict super-level set ``{|f| > alpha}``."""
        if alpha < 0:
            return self.total_measure
        idx = np.searchsorted(self.thresholds, alpha, side="right")
        if idx == len(self.thresholds):
            return 0.0
        return float(self.measure_geq[idx])


@dataclass(frozen=True)
class NormReport:
    """One computed norm with enough context to reproduce it."""

    kind: str
    p: float
    r: float | None
    value: float
    domain_measure: float

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "r": self.r,
            "value": self.value,
            "measure": self.domain_measure,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def distribution(f, alpha: float, region=None, cell_measure=None) -> float:
    """Measure of ``{|f| > alpha}``; an empty region simply measures 0."""
    absv, measure = _values_and_measure(f, region, cell_measure)
    return float(np.count_nonzero(absv > alpha)) * measure


def weak_norm(f, q: float, region=None, cell_measure=None) -> NormReport:
    """Weak-``L^q`` quasinorm ``sup_a a * measure{|f| > a}^(1/q)``.

    On a simple function the supremum is attained as a left limit at one
    of the data levels, so the value is the exact finite maximum of
    ``v_i * measure{|f| >= v_i}^(1/q)``.
    """
    if not q > 0:
        raise ValueError("weak norm exponent must be positive")
    dist = DistributionFunction.from_data(f, region, cell_measure)
    nz = dist.thresholds > 0
    if not np.any(nz):
        value = 0.0
    else:
        value = float(
            np.max(dist.thresholds[nz] * dist.measure_geq[nz] ** (1.0 / q))
        )
    return NormReport("weak", q, None, value, dist.total_measure)


def lebesgue_norm(f, p: float, region=None, cell_measure=None) -> NormReport:
    """Plain ``L^p`` norm by direct summation."""
    if not p > 0:
        raise ValueError("Lebesgue exponent must be positive")
    absv, measure = _values_and_measure(f, region, cell_measure)
    value = float((np.sum(absv**p) * measure) ** (1.0 / p)) if absv.size else 0.0
    return NormReport("lebesgue", p, None, value, absv.size * measure)


def layer_cake(f, p: float, region=None, cell_measure=None) -> NormReport:
    """``L^p`` norm through the layer-cake identity.

    ``int |f|^p = p * int_0^inf a^(p-1) measure{|f| > a} da`` integrates
    exactly over the step distribution function: each gap between
    consecutive levels contributes ``(v_i^p - v_{i-1}^p)`` times the
    measure of ``{|f| >= v_i}``.
    """
    if not p > 0:
        raise ValueError("Lebesgue exponent must be positive")
    dist = DistributionFunction.from_data(f, region, cell_measure)
    levels = dist.thresholds
    if levels.size == 0:
        return NormReport("lebesgue", p, None, 0.0, 0.0)
    powers = levels**p
    prev = np.concatenate(([0.0], powers[:-1]))
    integral = float(np.sum((powers - prev) * dist.measure_geq))
    return NormReport("lebesgue", p, None, integral ** (1.0 / p), dist.total_measure)


def lorentz_time_norm(
    signal,
    p: float,
    r: float,
    dt: float | None = None,
    lengths: Sequence[float] | None = None,
) -> NormReport:
    """Lorentz ``L^(p,r)`` norm of a piecewise-constant time signal.

    The signal is constant on cells: either uniform cells of width ``dt``
    or explicit ``lengths``.  With the conventional normalisation

        ``||g||^r = p * int_0^inf R^(r-1) * lambda(R)^(r/p) dR``

    the integral is exact for step distribution functions and reduces to
    the ordinary ``L^p`` norm when ``r == p``.  A constant signal ``c`` on
    total length ``T`` gives ``c * T^(1/p) * (p/r)^(1/r)``.  ``r = inf``
    falls back to the weak norm in time.
    """
    if not p > 0:
        raise ValueError("primary exponent must be positive")
    values = np.asarray(signal, dtype=np.float64).ravel()
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("time signal must be finite and nonnegative")
    if (dt is None) == (lengths is None):
        raise ValueError("provide exactly one of dt or lengths")
    if lengths is None:
        if not dt > 0:
            raise ValueError("dt must be positive")
        weights = np.full(values.shape, float(dt))
    else:
        weights = np.asarray(lengths, dtype=np.float64).ravel()
        if weights.shape != values.shape or np.any(weights <= 0):
            raise ValueError("lengths must match the signal and be positive")
    total = float(weights.sum())

    if np.isinf(r):
        levels = np.unique(values)
        nz = levels > 0
        if not np.any(nz):
            return NormReport("lorentz", p, float("inf"), 0.0, total)
        geq = np.array(
            [weights[values >= v].sum() for v in levels[nz]]
        )
        value = float(np.max(levels[nz] * geq ** (1.0 / p)))
        return NormReport("lorentz", p, float("inf"), value, total)

    if not r > 0:
        raise ValueError("secondary exponent must be positive")
    levels = np.unique(values)
    if levels[0] == 0.0 and levels.size == 1:
        return NormReport("lorentz", p, r, 0.0, total)
    pos = levels[levels > 0]
    geq = np.array([weights[values >= v].sum() for v in pos])
    powers = pos**r
    prev = np.concatenate(([0.0], powers[:-1]))
    integral = (p / r) * float(np.sum((powers - prev) * geq ** (r / p)))
    return NormReport("lorentz", p, r, integral ** (1.0 / r), total)


# ---------------------------------------------------------------------------
# Embedding and splitting inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingReport:
    """Both halves of the weak-to-strong embedding on a finite region."""

    p: float
    r: float
    eps: float
    lp_value: float
    lp_bound: float
    c_eps: float
    weak_p_value: float
    weak_p_bound: float
    c_region: float
    domain_measure: float

    @property
    def passed(self) -> bool:
        tol = 1e-12 * max(1.0, self.lp_bound, self.weak_p_bound)
        return (
            self.lp_value <= self.lp_bound + tol
            and self.weak_p_value <= self.weak_p_bound + tol
        )


def embedding_constant(p: float, r: float, eps: float) -> float:
    """Prefactor ``(p/(r-p))^(1/p) * eps^((p-r)/p)`` of the tail bound."""
    if not (0 < p < r):
        raise ValueError("embedding needs 0 < p < r")
    if not eps > 0:
        raise ValueError("the level split eps must be positive")
    return (p / (r - p)) ** (1.0 / p) * eps ** ((p - r) / p)


def compact_embedding_check(
    f, p: float, r: float, eps: float, region=None, cell_measure=None
) -> EmbeddingReport:
    """Evaluate both sides of the weak-norm embedding bounds.

    First the norm comparison ``||f||_{L^{p,w}} <= mu^(1/p-1/r) ||f||_{L^{r,w}}``,
    then the strong-norm tail split

        ``||f||_{L^p} <= C(eps) ||f||_{L^{r,w}}^{r/p} + eps * mu^{1/p}``

    with ``C(eps)`` from :func:`embedding_constant`.
    """
    c_eps = embedding_constant(p, r, eps)
    weak_r = weak_norm(f, r, region, cell_measure)
    weak_p = weak_norm(f, p, region, cell_measure)
    strong = lebesgue_norm(f, p, region, cell_measure)
    mu = weak_r.domain_measure
    c_region = mu ** (1.0 / p - 1.0 / r) if mu > 0 else 0.0
    return EmbeddingReport(
        p=p,
        r=r,
        eps=eps,
        lp_value=strong.value,
        lp_bound=c_eps * weak_r.value ** (r / p) + eps * mu ** (1.0 / p),
        c_eps=c_eps,
        weak_p_value=weak_p.value,
        weak_p_bound=c_region * weak_r.value,
        c_region=c_region,
        domain_measure=mu,
    )


def split_at_one(f):
    """Split ``f`` into the parts where ``|f| >= 1`` and ``|f| < 1``."""
    if isinstance(f, ScalarField):
        high = np.where(np.abs(f.values) >= 1.0, f.values, 0.0)
        low = np.where(np.abs(f.values) < 1.0, f.values, 0.0)
        return ScalarField(f.grid, high), ScalarField(f.grid, low)
    values = np.asarray(f, dtype=np.float64)
    return (
        np.where(np.abs(values) >= 1.0, values, 0.0),
        np.where(np.abs(values) < 1.0, values, 0.0),
    )


@dataclass(frozen=True)
class SplitReport:
    """Dyadic-layer bounds for the two halves of a unit-level split."""

    r: float
    r1: float
    r2: float
    high_power: float
    high_bound: float
    c_high: float
    low_power: float
    low_bound: float
    c_low: float
    weak_r: float
    base_measure: float

    @property
    def passed(self) -> bool:
        tol = 1e-12 * max(1.0, self.high_bound, self.low_bound)
        return (
            self.high_power <= self.high_bound + tol
            and self.low_power <= self.low_bound + tol
        )


def split_constants(r: float, r1: float, r2: float) -> tuple[float, float]:
    """Geometric dyadic-sum constants for the split inequalities."""
    if not (0 < r1 < r < r2):
        raise ValueError("split exponents must satisfy r1 < r < r2")
    ratio_high = 2.0 ** (r1 - r)
    c_high = (2.0**r1 - 1.0) * ratio_high / (1.0 - ratio_high)
    ratio_low = 2.0 ** (r - r2)
    c_low = (2.0**r2 - 1.0) * ratio_low / (1.0 - ratio_low)
    return c_high, c_low


def lemma_split_check(
    f, r: float, r1: float, r2: float, region=None, cell_measure=None
) -> SplitReport:
    """Check the dyadic bounds controlling a unit-level split by ``|f|``.

    The part above level one obeys

        ``int |f_high|^{r1} <= C(r, r1) ||f||^r_{r,w} + 2^{r1} * measure{|f| >= 1}``

    where the extra term is the base layer ``1 <= |f| < 2``; the part
    below level one needs no base layer:

        ``int |f_low|^{r2} <= C(r, r2) ||f||^r_{r,w}``.
    """
    c_high, c_low = split_constants(r, r1, r2)
    absv, measure = _values_and_measure(f, region, cell_measure)
    high = absv[absv >= 1.0]
    low = absv[absv < 1.0]
    high_power = float(np.sum(high**r1) * measure)
    low_power = float(np.sum(low**r2) * measure)
    wk = weak_norm(absv, r, cell_measure=measure)
    base = float(high.size) * measure
    return SplitReport(
        r=r,
        r1=r1,
        r2=r2,
        high_power=high_power,
        high_bound=c_high * wk.value**r + 2.0**r1 * base,
        c_high=c_high,
        low_power=low_power,
        low_bound=c_low * wk.value**r,
        c_low=c_low,
        weak_r=wk.value,
        base_measure=base,
    )
