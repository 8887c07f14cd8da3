"""Numerical counterparts of the regularity machinery: cutoffs, energies, scans."""

from .barriers import F1, F2, BarrierFamily, BarrierKind, barrier_eval, eta, phi, psi_L
from .energy import (
    EnergyGap,
    LevelEnergy,
    conjugacy_defects,
    default_delta,
    energy_decompose_gap,
    interpolation_exponent,
    level_set_measure,
    truncation_energy,
)
from .extension import backward_extension_problem, restrict_to_original
from .oscillation import (
    HolderFit,
    OscillationReport,
    QuotientReport,
    decay_exponent,
    difference_quotient_scan,
    holder_fit,
    oscillation_scan,
)
from .weakform import WeakResidual, weak_residual

__all__ = [
    "F1",
    "F2",
    "BarrierFamily",
    "BarrierKind",
    "EnergyGap",
    "HolderFit",
    "LevelEnergy",
    "OscillationReport",
    "QuotientReport",
    "WeakResidual",
    "backward_extension_problem",
    "barrier_eval",
    "conjugacy_defects",
    "decay_exponent",
    "default_delta",
    "difference_quotient_scan",
    "energy_decompose_gap",
    "eta",
    "holder_fit",
    "interpolation_exponent",
    "level_set_measure",
    "oscillation_scan",
    "phi",
    "psi_L",
    "restrict_to_original",
    "truncation_energy",
    "weak_residual",
]
