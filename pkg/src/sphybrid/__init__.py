"""Dwell-time certificates for singularly perturbed linear hybrid systems."""

from ._backend import BACKEND
from .certify import (
    CaseLabel,
    DwellTimeCertificate,
    LyapunovData,
    build_M_tau,
    closed_form_certificate,
    lyapunov_data,
    min_dwell_bisection,
    reduced_order_certificate,
)
from .decouple import DecoupledSystem, build_decoupled, check_A22, reduced_order_model
from .model import (
    EventSchedule,
    HybridSystemSpec,
    Mode,
    Transition,
    augment,
    build_permutation,
    reorder,
    validate,
)
from .pipeline import analyze
from .simulate import LinearHybridSystem, Trajectory, Verdict, classify, witnesses

__version__ = "0.1.0"
