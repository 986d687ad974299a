"""Mean-field (semiclassical) dynamics with coherent-amplitude drives.

Closed nonlinear set for <a>, <b>, <sigma_-^1>, <sigma_z>, <sigma_ee>, where
sigma_z = |e><e| - |g1><g1|.  Populations leave |e> at rate 2 Gamma; the
2 Gamma_1 share returns to |g1>, so sigma_z is damped by 2 (Gamma_1 + Gamma).

The mean-field equations cannot hold a coherent atomic superposition
entangled with the field.  A superposition (lambda_1, lambda_2) is therefore
handled as two runs, one with the atom in g1 and one with the atom
decoupled, mixed with weights |lambda_1|^2 and |lambda_2|^2.  This is only
meant for cross-method comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    Envelope,
    InvalidParameterError,
    NumericalFailure,
    SystemParams,
    TimeGrid,
    atom_amplitudes,
    envelope_function,
    scalar_envelope,
)

RTOL = 1e-9
ATOL = 1e-12
BOUND_TOLERANCE = 1e-6

SIGMA_Z_DAMPING = {
    # as derived for sigma_z = sigma_ee - sigma_g1g1
    "gamma1_plus_gamma": lambda p: 2.0 * (p.gamma_1 + p.gamma_total),
    # alternative reading, kept for comparison
    "gamma1_plus_gamma2": lambda p: 2.0 * (p.gamma_1 + p.gamma_2),
}


@dataclass(frozen=True, eq=False)
class SemiclassicalTrajectory:
    times: np.ndarray
    mean_a: np.ndarray
    mean_b: np.ndarray
    mean_sigma_minus: np.ndarray
    mean_sigma_z: np.ndarray
    mean_sigma_ee: np.ndarray
    a_in: np.ndarray
    b_in: np.ndarray
    a_out: np.ndarray
    b_out: np.ndarray
    output_energy_a: float
    output_energy_b: float
    input_energy_a: float
    input_energy_b: float


@dataclass(frozen=True, eq=False)
class SemiclassicalResult:
    """Population-weighted branches; a definite atomic state has one branch."""

    branches: tuple[tuple[float, SemiclassicalTrajectory], ...]

    @property
    def trajectory(self) -> SemiclassicalTrajectory:
        if len(self.branches) != 1:
            raise InvalidParameterError("superposition result has several branches; use .branches")
        return self.branches[0][1]

    @property
    def output_energy_a(self) -> float:
        return sum(w * tr.output_energy_a for w, tr in self.branches)

    @property
    def output_energy_b(self) -> float:
        return sum(w * tr.output_energy_b for w, tr in self.branches)

    @property
    def input_energy(self) -> float:
        return sum(w * (tr.input_energy_a + tr.input_energy_b) for w, tr in self.branches)


def _integrate_branch(params, drive_a, drive_b, amp_a, amp_b, grid, coupled, sz_damping, rtol, atol):
    ga = complex(params.g_a) if coupled else 0j
    gb = complex(params.g_b) if coupled else 0j
    gac, gbc = ga.conjugate(), gb.conjugate()
    ka, kb = params.kappa_a, params.kappa_b
    gamma = params.gamma_total
    dz = SIGMA_Z_DAMPING[sz_damping](params)
    sa, sb = float(np.sqrt(2 * ka)), float(np.sqrt(2 * kb))
    fa, fb = scalar_envelope(drive_a), scalar_envelope(drive_b)
    amp_a, amp_b = complex(amp_a), complex(amp_b)

    def rhs(t, y):
        a, b, s, sz, see = y[0], y[1], y[2], y[3].real, y[4].real
        ain = amp_a * fa(t)
        bin_ = amp_b * fb(t)
        field = ga * a + gb * b
        drive = field * s.conjugate()
        exch = 2.0 * drive.imag  # -i F s* + i F* s = 2 Im(F s*)
        oa = sa * a - ain
        ob = sb * b - bin_
        return np.array(
            [
                -1j * gac * s - ka * a + sa * ain,
                -1j * gbc * s - kb * b + sb * bin_,
                1j * field * sz - gamma * s,
                2.0 * exch - dz * see,
                exch - 2.0 * gamma * see,
                oa.real**2 + oa.imag**2,
                ob.real**2 + ob.imag**2,
            ],
            dtype=complex,
        )

    y0 = np.array([0, 0, 0, -1.0, 0, 0, 0], dtype=complex)
    times = grid.times
    sol = solve_ivp(rhs, (grid.t_start, grid.t_end), y0, method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalFailure(f"semiclassical integration failed near t = {sol.t[-1]:.6g}: {sol.message}")
    y = sol.y
    sz = y[3].real
    see = y[4].real
    bad = (np.abs(sz) > 1 + BOUND_TOLERANCE) | (see < -BOUND_TOLERANCE) | (see > 1 + BOUND_TOLERANCE)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NumericalFailure(
            f"mean-field populations left the physical range at t = {times[k]:.6g} "
            f"(sigma_z = {sz[k]:.6g}, sigma_ee = {see[k]:.6g})"
        )
    a_in = amp_a * np.asarray(envelope_function(drive_a)(times), dtype=complex)
    b_in = amp_b * np.asarray(envelope_function(drive_b)(times), dtype=complex)
    ea = float(np.trapezoid(np.abs(a_in) ** 2, times))
    eb = float(np.trapezoid(np.abs(b_in) ** 2, times))
    return SemiclassicalTrajectory(
        times=times,
        mean_a=y[0],
        mean_b=y[1],
        mean_sigma_minus=y[2],
        mean_sigma_z=sz,
        mean_sigma_ee=see,
        a_in=a_in,
        b_in=b_in,
        a_out=sa * y[0] - a_in,
        b_out=sb * y[1] - b_in,
        output_energy_a=float(y[5, -1].real),
        output_energy_b=float(y[6, -1].real),
        input_energy_a=ea,
        input_energy_b=eb,
    )


def integrate_semiclassical(
    params: SystemParams,
    drive_a: Envelope | None,
    drive_b: Envelope | None,
    atom_init="g1",
    grid: TimeGrid | None = None,
    *,
    amplitude_a: complex = 1.0,
    amplitude_b: complex = 1.0,
    sigma_z_damping: str = "gamma1_plus_gamma",
    rtol: float = RTOL,
    atol: float = ATOL,
) -> SemiclassicalResult:
    """Integrate the mean-field equations for coherent drives.

    The drives are <a_in> = amplitude_a * drive_a(t) and likewise for b.
    ``atom_init`` is 'g1', 'g2' or a normalized pair (lambda_1, lambda_2).
    """
    if sigma_z_damping not in SIGMA_Z_DAMPING:
        raise InvalidParameterError(f"sigma_z_damping must be one of {sorted(SIGMA_Z_DAMPING)}")
    if grid is None:
        pulse = drive_a if drive_a is not None else drive_b
        if pulse is None:
            raise InvalidParameterError("a time grid is required when both drives are absent")
        grid = TimeGrid.default(pulse)
    lam = atom_amplitudes(atom_init)
    weights = (abs(lam[0]) ** 2, abs(lam[1]) ** 2)
    branches = []
    for coupled, w in zip((True, False), weights):
        if w == 0.0:
            continue
        tr = _integrate_branch(
            params, drive_a, drive_b, amplitude_a, amplitude_b, grid, coupled, sigma_z_damping, rtol, atol
        )
        branches.append((float(w), tr))
    return SemiclassicalResult(tuple(branches))


def biphoton_product(params, pulse, grid, amplitude=1.0) -> float:
    """int |<a_out>|^2 dt * int |<b_out>|^2 dt for coherent drives in quadrature.

    With equal phases the drive is purely dark and never sees the atom; a
    relative phase pi/2 splits it equally between the dark and bright
    modes, which makes the weak-drive limit equal (r^2 + t^2)^2.
    """
    res = integrate_semiclassical(params, pulse, pulse, "g1", grid, amplitude_a=amplitude, amplitude_b=1j * amplitude)
    return res.output_energy_a * res.output_energy_b / amplitude**4
