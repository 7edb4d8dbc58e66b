"""Age-of-information moments and MGFs for energy-harvesting status-update queues."""

from .closed_form import (
    AuxFactors,
    Branch,
    ClosedFormResult,
    PoleViolation,
    UnsupportedB,
    compute_aux,
    discipline_gap,
    limits_beta_inf,
    mgf_closed,
    moments_closed,
    prop1_steady_state,
    prop2_steady_state,
)
from .model import Discipline, EhMode, RateKind, SHSModel, SystemParams, Transition, build_model, validate_model
from .sim import SimConfig, SimResult, replicate, simulate
from .solver import SingularSystem, aoi_moment, mgf, mgf_curve, moment_vectors, steady_state

__all__ = [
    "AuxFactors", "Branch", "ClosedFormResult", "PoleViolation", "UnsupportedB",
    "compute_aux", "discipline_gap", "limits_beta_inf", "mgf_closed", "moments_closed",
    "prop1_steady_state", "prop2_steady_state",
    "Discipline", "EhMode", "RateKind", "SHSModel", "SystemParams", "Transition", "build_model", "validate_model",
    "SimConfig", "SimResult", "replicate", "simulate",
    "SingularSystem", "aoi_moment", "mgf", "mgf_curve", "moment_vectors", "steady_state",
]
