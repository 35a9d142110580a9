"""Periodic-box Navier-Stokes with weak-norm regularity diagnostics.

The package bundles a small pseudo-spectral solver with the measure-theoretic
machinery (weak Lebesgue / Lorentz norms, level-set energies, log-damped
Gronwall bounds) needed to evaluate blow-up criteria along a simulated or
closed-form velocity history.
"""

from wlns.field import (
    Grid,
    ScalarField,
    SpectralField,
    VectorField,
    ball_mask,
    divergence,
    forward_transform,
    gradient,
    inverse_transform,
    laplacian,
    read_snapshot,
    rescale,
    write_snapshot,
)
from wlns.lorentz import (
    DistributionFunction,
    NormReport,
    compact_embedding_check,
    distribution,
    layer_cake,
    lebesgue_norm,
    lemma_split_check,
    lorentz_time_norm,
    split_at_one,
    weak_norm,
)
from wlns.criteria import (
    CriterionTrace,
    DerivedExponents,
    derive_exponents,
    evaluate_row,
    holder_check,
    prodi_serrin_p,
)
from wlns.nse_solver import (
    BlowUpError,
    SimulationResult,
    SolverConfig,
    energy_residual,
    kinetic_energy,
    pressure_from_velocity,
    random_divfree,
    run,
    single_mode,
    taylor_green,
)
from wlns.degiorgi import (
    CylinderMap,
    CylinderScheme,
    LevelSetEnergy,
    energy_budget,
    fit_beta,
    level_energy,
    recursive_sequence,
    threshold_scan,
)
from wlns.counterexample import (
    CounterexampleField,
    DyadicSchedule,
    claim1_terms,
    claim2_lower_bound,
    criterion_vs_lorentz,
)
from wlns.gronwall import (
    BoundProblem,
    implicit_check,
    psi_tail,
    solve_bound,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "SpectralField",
    "forward_transform",
    "inverse_transform",
    "gradient",
    "divergence",
    "laplacian",
    "rescale",
    "ball_mask",
    "write_snapshot",
    "read_snapshot",
    "DistributionFunction",
    "NormReport",
    "distribution",
    "weak_norm",
    "lebesgue_norm",
    "layer_cake",
    "lorentz_time_norm",
    "compact_embedding_check",
    "split_at_one",
    "lemma_split_check",
    "CriterionTrace",
    "DerivedExponents",
    "derive_exponents",
    "evaluate_row",
    "holder_check",
    "prodi_serrin_p",
    "BlowUpError",
    "SimulationResult",
    "SolverConfig",
    "energy_residual",
    "kinetic_energy",
    "pressure_from_velocity",
    "random_divfree",
    "run",
    "single_mode",
    "taylor_green",
    "CylinderMap",
    "CylinderScheme",
    "LevelSetEnergy",
    "energy_budget",
    "fit_beta",
    "level_energy",
    "recursive_sequence",
    "threshold_scan",
    "CounterexampleField",
    "DyadicSchedule",
    "claim1_terms",
    "claim2_lower_bound",
    "criterion_vs_lorentz",
    "BoundProblem",
    "implicit_check",
    "psi_tail",
    "solve_bound",
    "__version__",
]
