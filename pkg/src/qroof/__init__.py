"""Convex hulls, convex roofs and entanglement monotones of finite-dimensional quantum states."""

from .convexify import (
    BiconjugateResult,
    HullResult,
    OptimizerConfig,
    SandwichError,
    convex_hull,
    convex_roof,
    fenchel_biconjugate,
    fenchel_conjugate,
    jensen_check,
    monotone_limit_probe,
)
from .ensembles import Ensemble, barycenter, coarse_grain, mixed_decomposition, pure_decomposition
from .functionals import SpectralFunctional, eval_functional
from .locc import (
    Instrument,
    QuantumChannel,
    apply_channel,
    apply_instrument,
    lift_local,
    monotonicity_check,
    truncation_instrument,
)
from .monotones import (
    EnergyConstraint,
    MonotoneSpec,
    energy_continuity_probe,
    entanglement_monotone,
    eof_truncated,
    holevo_capacity_estimate,
    subadditivity_check,
    truncated_entropy,
)
from .states import BipartiteShape, as_state, partial_trace, sample_state

__all__ = [
    "BiconjugateResult",
    "BipartiteShape",
    "EnergyConstraint",
    "Ensemble",
    "HullResult",
    "Instrument",
    "MonotoneSpec",
    "OptimizerConfig",
    "QuantumChannel",
    "SandwichError",
    "SpectralFunctional",
    "apply_channel",
    "apply_instrument",
    "as_state",
    "barycenter",
    "coarse_grain",
    "convex_hull",
    "convex_roof",
    "energy_continuity_probe",
    "entanglement_monotone",
    "eof_truncated",
    "eval_functional",
    "fenchel_biconjugate",
    "fenchel_conjugate",
    "holevo_capacity_estimate",
    "jensen_check",
    "lift_local",
    "mixed_decomposition",
    "monotone_limit_probe",
    "monotonicity_check",
    "partial_trace",
    "pure_decomposition",
    "sample_state",
    "subadditivity_check",
    "truncated_entropy",
    "truncation_instrument",
]

__version__ = "0.1.0"
