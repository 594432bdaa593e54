"""Polynomial LPV reduced-order models identified from snapshot data by parametric DMD."""

from .core import (PDMDConfig, PolyLPVModel, RankPolicy, ReducedModel, fit_full, fit_pdmd,
                   load_model, projection_basis, reduce, save_model, select_nz, singular_spectrum)
from .errors import DataError, NumericalError
from .lifting import LiftedData, ThetaScale, build_lifted, lift_vector, theta_powers
from .lpv import (FrequencyResponse, eigenvalues_at, eval_at, frequency_response, project_state,
                  simulate, simulate_feedback)
from .metrics import energy_retention, gap_surface, pointwise_gap, relative_rms_error
from .plants import (FlexChainConfig, FlexChainPlant, PolyLPVPlant, flexchain_instability_theta,
                     linearize_plant, make_random_polylpv)
from .snapshots import (ArcsinRule, Signal, SnapshotEnsemble, collect_from_plant, generate_chirp,
                        load_snapshots, save_snapshots)

__all__ = [
    "ArcsinRule",
    "DataError",
    "FlexChainConfig",
    "FlexChainPlant",
    "FrequencyResponse",
    "LiftedData",
    "NumericalError",
    "PDMDConfig",
    "PolyLPVModel",
    "PolyLPVPlant",
    "RankPolicy",
    "ReducedModel",
    "Signal",
    "SnapshotEnsemble",
    "ThetaScale",
    "build_lifted",
    "collect_from_plant",
    "eigenvalues_at",
    "energy_retention",
    "eval_at",
    "fit_full",
    "fit_pdmd",
    "flexchain_instability_theta",
    "frequency_response",
    "gap_surface",
    "generate_chirp",
    "lift_vector",
    "linearize_plant",
    "load_model",
    "load_snapshots",
    "make_random_polylpv",
    "pointwise_gap",
    "project_state",
    "projection_basis",
    "reduce",
    "relative_rms_error",
    "save_model",
    "save_snapshots",
    "select_nz",
    "simulate",
    "simulate_feedback",
    "singular_spectrum",
    "theta_powers",
]

__version__ = "0.1.0"
