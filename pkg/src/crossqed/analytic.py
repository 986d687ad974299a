"""Closed-form scattering response in the linearized (Holstein-Primakoff) regime.

Frequencies are detunings from the cavity resonance and fields carry
exp(-i omega t), so that ``a_out(omega) = r a_in(omega) + t b_in(omega)``.
Only the configuration g_a = -g_b, kappa_a = kappa_b has closed forms here;
anything else must go through the time-domain solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import SystemParams, UnsupportedConfigurationError, InvalidParameterError


@dataclass(frozen=True)
class ScatteringCoefficients:
    r: complex
    t: complex
    x_minus: complex
    x_plus: complex
    omega: float
    atom_level: str


def _require_closed_form(params: SystemParams) -> None:
    if not params.is_reference_convention:
        raise UnsupportedConfigurationError(
            "closed-form coefficients require g_b = -g_a and kappa_a = kappa_b; "
            "use the single_excitation or hierarchy solvers for asymmetric couplings"
        )


def scattering_coefficients(params: SystemParams, omega: float, atom_level: str) -> ScatteringCoefficients:
    """Reflection/transmission coefficients conditioned on the atomic ground state.

    The g2 branch is the decoupled atom (effective coupling zero).
    """
    _require_closed_form(params)
    if atom_level not in ("g1", "g2"):
        raise InvalidParameterError(f"atom_level must be 'g1' or 'g2', got {atom_level!r}")
    kappa = params.kappa_a
    gamma = params.gamma_total
    g2eff = abs(params.g_a) ** 2 if atom_level == "g1" else 0.0
    w = float(omega)
    x_plus = (kappa + 1j * w) / (kappa - 1j * w)
    num = (kappa + 1j * w) * (gamma - 1j * w) - 2.0 * g2eff
    den = (kappa - 1j * w) * (gamma - 1j * w) + 2.0 * g2eff
    if g2eff == 0.0 or den == 0:
        # uncoupled atom: the bright mode is an empty cavity (also covers 0/0)
        x_minus = x_plus
    else:
        x_minus = num / den
    return ScatteringCoefficients(
        r=(x_plus + x_minus) / 2.0,
        t=(x_plus - x_minus) / 2.0,
        x_minus=complex(x_minus),
        x_plus=complex(x_plus),
        omega=w,
        atom_level=atom_level,
    )


def _check_C(C: float) -> float:
    C = float(C)
    if not C >= 0.0:
        raise InvalidParameterError(f"cooperativity must be non-negative, got {C!r}")
    return C


def resonant_reflection(C: float) -> float:
    return 1.0 / (1.0 + 4.0 * _check_C(C))


def resonant_transmission(C: float) -> float:
    C = _check_C(C)
    if np.isinf(C):
        return 1.0
    return 4.0 * C / (1.0 + 4.0 * C)


def bright_phase_factor(C: float) -> float:
    """X_out^- / X_in^- on resonance with the atom in g1: (1 - 4C)/(1 + 4C)."""
    return resonant_reflection(C) - resonant_transmission(C)


def swap_probability(C: float) -> float:
    """[4C/(1+4C)]^2, probability that a photon leaves through the opposite port."""
    return resonant_transmission(C) ** 2


def cross_loss_probability(C: float) -> float:
    """1 - t^2 - r^2 = 8C/(1+4C)^2, single-photon loss on resonance (atom g1)."""
    C = _check_C(C)
    if np.isinf(C):
        return 0.0
    return 8.0 * C / (1.0 + 4.0 * C) ** 2


def biphoton_survival_probability(C: float) -> float:
    """[1 + (4C)^2]^2 / (1 + 4C)^4, one photon leaving each port for a |1,1> input."""
    r = resonant_reflection(C)
    t = resonant_transmission(C)
    return (t * t + r * r) ** 2


def post_selected_fidelity(C: float) -> float:
    """t^2 / (t^2 + r^2) = (4C)^2 / (1 + (4C)^2)."""
    r = resonant_reflection(C)
    t = resonant_transmission(C)
    return t * t / (t * t + r * r)


class FailureProbability(NamedTuple):
    probability: float
    pi_phase: bool  # False when C is below the pi-phase threshold


def dk_failure_probability(C: float) -> FailureProbability:
    """Single-cavity reference scheme: 1 - ((1-2C)/(1+2C))^2 = 8C/(1+2C)^2."""
    C = _check_C(C)
    if np.isinf(C):
        return FailureProbability(0.0, True)
    return FailureProbability(8.0 * C / (1.0 + 2.0 * C) ** 2, C > 0.5)


def cross_failure_probability(C: float) -> FailureProbability:
    """Crossed cavities: 1 - ((1-4C)/(1+4C))^2 = 16C/(1+4C)^2."""
    C = _check_C(C)
    if np.isinf(C):
        return FailureProbability(0.0, True)
    return FailureProbability(16.0 * C / (1.0 + 4.0 * C) ** 2, C > 0.25)
