"""Photon scattering on a three-level atom in two crossed single-sided cavities.

Rates are in units of the cavity decay rate (kappa = 1).  Four solvers of
increasing fidelity are provided (closed forms, mean-field equations, the
one-excitation amplitude equations and a Fock-input hierarchy of master
equations), together with a time-bin collision model used as an oracle and
gate truth tables built on top of them.
"""

from .core import (
    CollectiveBasis,
    ConfigurationError,
    ConvergenceError,
    CrossQEDError,
    InitialState,
    InvalidParameterError,
    NumericalFailure,
    PulseShape,
    SystemParams,
    TimeGrid,
    TruncatedGridError,
    UnsupportedConfigurationError,
    from_dark_bright,
    to_dark_bright,
)
from .analytic import (
    biphoton_survival_probability,
    cross_failure_probability,
    dk_failure_probability,
    post_selected_fidelity,
    scattering_coefficients,
    swap_probability,
)
from .semiclassical import biphoton_product, integrate_semiclassical
from .single_excitation import integrate_single_excitation
from .hierarchy import biphoton_coincidence, integrate_hierarchy
from .timebin import convergence_report, simulate_timebin
from .gates import asymmetry_sweep, evaluate_cnot_atom_control, evaluate_cnot_light_control, evaluate_fredkin

__version__ = "0.1.0"

__all__ = [
    "CollectiveBasis",
    "ConfigurationError",
    "ConvergenceError",
    "CrossQEDError",
    "InitialState",
    "InvalidParameterError",
    "NumericalFailure",
    "PulseShape",
    "SystemParams",
    "TimeGrid",
    "TruncatedGridError",
    "UnsupportedConfigurationError",
    "asymmetry_sweep",
    "biphoton_product",
    "biphoton_coincidence",
    "biphoton_survival_probability",
    "convergence_report",
    "cross_failure_probability",
    "dk_failure_probability",
    "evaluate_cnot_atom_control",
    "evaluate_cnot_light_control",
    "evaluate_fredkin",
    "from_dark_bright",
    "integrate_hierarchy",
    "integrate_semiclassical",
    "integrate_single_excitation",
    "post_selected_fidelity",
    "scattering_coefficients",
    "simulate_timebin",
    "swap_probability",
    "to_dark_bright",
]
