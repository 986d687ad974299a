"""Parameters, pulses, initial states and basis helpers shared by every solver.

Units: the cavity field decay rate is the unit of frequency (kappa = 1), so
all rates are given in units of kappa and all times in units of 1/kappa.

Sign convention: ``g_b`` defaults to ``-g_a``.  With that choice the atom
couples to the antisymmetric port combination (a - b)/sqrt(2), which is
therefore the *bright* mode, while (a + b)/sqrt(2) is *dark*.  Flipping the
sign of ``g_b`` exchanges the roles of the two collective modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

SQRT2 = math.sqrt(2.0)
FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))

ATOM_LEVELS = ("g1", "g2")


class CrossQEDError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CrossQEDError, ValueError):
    pass


class UnsupportedConfigurationError(CrossQEDError, NotImplementedError):
    pass


class NumericalFailure(CrossQEDError, RuntimeError):
    pass


class TruncatedGridError(NumericalFailure):
    pass


class ConvergenceError(CrossQEDError, RuntimeError):
    pass


class ConfigurationError(CrossQEDError, ValueError):
    """Inconsistent run configuration (unknown fields, conflicting solver choices)."""


def _check_rate(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise InvalidParameterError(f"{name} must be a finite non-negative rate, got {value!r}")
    return value


@dataclass(frozen=True)
class SystemParams:
    """Physical rates of the crossed-cavity system, in units of kappa.

    ``g_b=None`` means ``g_b = -g_a``.
    """

    g_a: complex = 1.0
    g_b: complex | None = None
    kappa_a: float = 1.0
    kappa_b: float = 1.0
    gamma_1: float = 0.1
    gamma_2: float = 0.1

    def __post_init__(self) -> None:
        g_a = complex(self.g_a)
        g_b = -g_a if self.g_b is None else complex(self.g_b)
        for name, g in (("g_a", g_a), ("g_b", g_b)):
            if not (math.isfinite(g.real) and math.isfinite(g.imag)):
                raise InvalidParameterError(f"{name} must be finite")
        # keep real couplings real so that reprs and configs stay readable
        object.__setattr__(self, "g_a", g_a.real if g_a.imag == 0 else g_a)
        object.__setattr__(self, "g_b", g_b.real if g_b.imag == 0 else g_b)
        for name in ("kappa_a", "kappa_b", "gamma_1", "gamma_2"):
            object.__setattr__(self, name, _check_rate(name, getattr(self, name)))

    @classmethod
    def from_cooperativity(
        cls,
        C: float,
        gamma: float,
        kappa: float = 1.0,
        gamma_1_fraction: float = 0.5,
    ) -> "SystemParams":
        """Symmetric parameters (g_a = -g_b = g real) with g = sqrt(2 kappa gamma C)."""
        C = _check_rate("cooperativity", C)
        gamma = _check_rate("gamma", gamma)
        kappa = _check_rate("kappa", kappa)
        if not 0.0 <= gamma_1_fraction <= 1.0:
            raise InvalidParameterError("gamma_1_fraction must lie in [0, 1]")
        g = math.sqrt(2.0 * kappa * gamma * C)
        return cls(
            g_a=g,
            g_b=-g,
            kappa_a=kappa,
            kappa_b=kappa,
            gamma_1=gamma * gamma_1_fraction,
            gamma_2=gamma * (1.0 - gamma_1_fraction),
        )

    @property
    def gamma_total(self) -> float:
        return self.gamma_1 + self.gamma_2

    @property
    def is_symmetric(self) -> bool:
        """True when |g_a| = |g_b| and kappa_a = kappa_b."""
        return math.isclose(abs(self.g_a), abs(self.g_b), rel_tol=1e-12, abs_tol=1e-15) and math.isclose(
            self.kappa_a, self.kappa_b, rel_tol=1e-12, abs_tol=1e-15
        )

    @property
    def is_reference_convention(self) -> bool:
        """True for g_b = -g_a and kappa_a = kappa_b, the only case with closed forms."""
        return abs(complex(self.g_a) + complex(self.g_b)) <= 1e-12 * max(1.0, abs(self.g_a)) and math.isclose(
            self.kappa_a, self.kappa_b, rel_tol=1e-12, abs_tol=1e-15
        )

    @property
    def cooperativity(self) -> float:
        return cooperativity(self)

    def with_atom_decoupled(self) -> "SystemParams":
        return replace(self, g_a=0.0, g_b=0.0)

    def swapped_ports(self) -> "SystemParams":
        return replace(self, g_a=self.g_b, g_b=self.g_a, kappa_a=self.kappa_b, kappa_b=self.kappa_a)

    def as_dict(self) -> dict:
        def enc(z):
            z = complex(z)
            return z.real if z.imag == 0 else [z.real, z.imag]

        return {
            "g_a": enc(self.g_a),
            "g_b": enc(self.g_b),
            "kappa_a": self.kappa_a,
            "kappa_b": self.kappa_b,
            "gamma_1": self.gamma_1,
            "gamma_2": self.gamma_2,
        }


def cooperativity(params: SystemParams) -> float:
    """C = g^2 / (2 kappa Gamma) for the symmetric configuration."""
    if not params.is_symmetric:
        raise InvalidParameterError(
            "cooperativity is only defined for |g_a| = |g_b| and kappa_a = kappa_b; "
            "use the per-branch rates (g_a, g_b, kappa_a, kappa_b, gamma_total) instead"
        )
    gamma = params.gamma_total
    if gamma == 0.0:
        raise ZeroDivisionError("cooperativity diverges for gamma_total = 0")
    g = abs(params.g_a)
    return g * g / (2.0 * params.kappa_a * gamma)


# ---------------------------------------------------------------------------
# pulses


@dataclass(frozen=True)
class PulseShape:
    """Square-normalized Gaussian envelope centred at ``t0`` with width ``eta``."""

    t0: float
    eta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eta) and self.eta > 0.0):
            raise InvalidParameterError(f"eta must be positive, got {self.eta!r}")
        if not math.isfinite(self.t0):
            raise InvalidParameterError("t0 must be finite")

    @classmethod
    def from_duration(cls, tau_p: float, t0: float | None = None) -> "PulseShape":
        """Pulse with FWHM duration ``tau_p``; ``t0`` defaults to 5 eta."""
        if not (math.isfinite(tau_p) and tau_p > 0.0):
            raise InvalidParameterError(f"tau_p must be positive, got {tau_p!r}")
        eta = tau_p / FWHM_FACTOR
        return cls(t0=5.0 * eta if t0 is None else float(t0), eta=eta)

    @property
    def tau_p(self) -> float:
        return FWHM_FACTOR * self.eta

    @property
    def support(self) -> tuple[float, float]:
        return (self.t0 - 5.0 * self.eta, self.t0 + 5.0 * self.eta)

    def __call__(self, t):
        return gaussian_envelope(self, t)

    def scalar(self) -> Callable[[float], float]:
        """Fast float -> float evaluator for use inside ODE right-hand sides."""
        t0, eta = self.t0, self.eta
        peak = (eta * math.sqrt(math.pi)) ** -0.5
        exp = math.exp

        def f(t: float) -> float:
            x = (t - t0) / eta
            return peak * exp(-0.5 * x * x)

        return f


def gaussian_envelope(pulse: PulseShape, t):
    """(eta sqrt(pi))^(-1/2) exp(-(t - t0)^2 / (2 eta^2)), real and positive."""
    if not pulse.eta > 0.0:
        raise InvalidParameterError("eta must be positive")
    x = (np.asarray(t, dtype=float) - pulse.t0) / pulse.eta
    return (pulse.eta * math.sqrt(math.pi)) ** -0.5 * np.exp(-0.5 * x * x)


@dataclass(frozen=True, eq=False)
class SampledEnvelope:
    """User-supplied envelope sampled on ``times``, linearly interpolated.

    The samples are rescaled to unit norm (trapezoidal rule).  Zero outside
    the sampled window.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise InvalidParameterError("times and values must be equal-length 1-D arrays")
        if np.any(np.diff(times) <= 0):
            raise InvalidParameterError("times must be strictly increasing")
        norm = np.trapezoid(np.abs(values) ** 2, times)
        if not norm > 0:
            raise InvalidParameterError("envelope has zero norm")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values / math.sqrt(norm))

    @property
    def support(self) -> tuple[float, float]:
        return (float(self.times[0]), float(self.times[-1]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        re = np.interp(t, self.times, self.values.real, left=0.0, right=0.0)
        im = np.interp(t, self.times, self.values.imag, left=0.0, right=0.0)
        out = re + 1j * im
        return out if np.any(im) else re

    def scalar(self) -> Callable[[float], complex]:
        return lambda t: complex(self(t))


Envelope = Union[PulseShape, SampledEnvelope]


def envelope_function(pulse: Envelope | None) -> Callable:
    """Vectorized envelope; the zero function for an absent pulse."""
    if pulse is None:
        return lambda t: 0.0 * np.asarray(t, dtype=float)
    return pulse


def scalar_envelope(pulse: Envelope | None) -> Callable[[float], complex]:
    if pulse is None:
        return lambda t: 0.0
    return pulse.scalar()


# ---------------------------------------------------------------------------
# states and grids


@dataclass(frozen=True)
class InitialState:
    """Atom (lambda_1 |g1> + lambda_2 |g2>) times the reservoir state

    mu_a |1,0> + mu_b |0,1> + mu_c |1,1>.
    """

    lambda_1: complex = 1.0
    lambda_2: complex = 0.0
    mu_a: complex = 1.0
    mu_b: complex = 0.0
    mu_c: complex = 0.0
    _allow_vacuum: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        lam = abs(complex(self.lambda_1)) ** 2 + abs(complex(self.lambda_2)) ** 2
        if not math.isclose(lam, 1.0, rel_tol=0, abs_tol=1e-10):
            raise InvalidParameterError(f"|lambda_1|^2 + |lambda_2|^2 = {lam}, expected 1")
        mu = sum(abs(complex(m)) ** 2 for m in (self.mu_a, self.mu_b, self.mu_c))
        if self._allow_vacuum and mu == 0.0:
            return
        if not math.isclose(mu, 1.0, rel_tol=0, abs_tol=1e-10):
            raise InvalidParameterError(f"|mu_a|^2 + |mu_b|^2 + |mu_c|^2 = {mu}, expected 1")

    @classmethod
    def vacuum(cls, lambda_1: complex = 1.0, lambda_2: complex = 0.0) -> "InitialState":
        return cls(lambda_1, lambda_2, 0.0, 0.0, 0.0, _allow_vacuum=True)

    @classmethod
    def atom(cls, level: str, mu_a: complex = 1.0, mu_b: complex = 0.0, mu_c: complex = 0.0) -> "InitialState":
        lam = atom_amplitudes(level)
        return cls(lam[0], lam[1], mu_a, mu_b, mu_c)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([self.lambda_1, self.lambda_2], dtype=complex)

    @property
    def is_vacuum(self) -> bool:
        return self.mu_a == 0 and self.mu_b == 0 and self.mu_c == 0


def atom_amplitudes(level) -> np.ndarray:
    """Ground-state amplitudes (lambda_1, lambda_2) from a label or a pair."""
    if isinstance(level, str):
        if level == "g1":
            return np.array([1.0, 0.0], dtype=complex)
        if level == "g2":
            return np.array([0.0, 1.0], dtype=complex)
        raise InvalidParameterError(f"unknown atomic level {level!r}; expected 'g1' or 'g2'")
    lam = np.asarray(level, dtype=complex).reshape(-1)
    if lam.shape != (2,) or not math.isclose(float(np.vdot(lam, lam).real), 1.0, abs_tol=1e-10):
        raise InvalidParameterError("atomic amplitudes must be a normalized pair (lambda_1, lambda_2)")
    return lam


@dataclass(frozen=True)
class TimeGrid:
    """Uniform output sampling on [t_start, t_end] with ``n_steps`` intervals."""

    t_start: float
    t_end: float
    n_steps: int = 4000

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end) and self.t_end > self.t_start):
            raise InvalidParameterError("TimeGrid requires finite t_end > t_start")
        if int(self.n_steps) < 2:
            raise InvalidParameterError("n_steps must be >= 2")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def default(cls, pulse: PulseShape, n_steps: int = 4000, settle: float = 0.0) -> "TimeGrid":
        """[t0 - 5 eta, t0 + 5 eta] extended by ``settle`` after the pulse."""
        return cls(pulse.t0 - 5.0 * pulse.eta, pulse.t0 + 5.0 * pulse.eta + settle, n_steps)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    def covers(self, *pulses) -> bool:
        for p in pulses:
            if p is None:
                continue
            lo, hi = p.support
            if lo < self.t_start - 1e-12 or hi > self.t_end + 1e-12:
                return False
        return True

    def require_cover(self, *pulses) -> None:
        if not self.covers(*pulses):
            raise InvalidParameterError("time grid must cover [t0 - 5 eta, t0 + 5 eta] of every pulse")


def settle_time(params: SystemParams, n_decay: float = 25.0) -> float:
    """Time for the slowest single-excitation mode to decay by exp(-n_decay).

    Returned as an extension for :meth:`TimeGrid.default`; zero-rate modes
    (atom fully decoupled with Gamma = 0) are ignored.
    """
    drift = np.array(
        [
            [-params.gamma_total, -1j * params.g_a, -1j * params.g_b],
            [-1j * np.conj(params.g_a), -params.kappa_a, 0.0],
            [-1j * np.conj(params.g_b), 0.0, -params.kappa_b],
        ],
        dtype=complex,
    )
    rates = -np.linalg.eigvals(drift).real
    # amplitudes decay at `rate`, energies at twice that
    rates = rates[rates > 1e-9]
    if rates.size == 0:
        return 0.0
    return n_decay / (2.0 * float(rates.min()))


# ---------------------------------------------------------------------------
# collective modes


def to_dark_bright(amp_alpha: complex, amp_beta: complex) -> tuple[complex, complex]:
    """Port amplitudes -> (dark, bright) = ((a + b)/sqrt2, (a - b)/sqrt2)."""
    return ((amp_alpha + amp_beta) / SQRT2, (amp_alpha - amp_beta) / SQRT2)


def from_dark_bright(amp_dark: complex, amp_bright: complex) -> tuple[complex, complex]:
    # the transform is its own inverse
    return to_dark_bright(amp_dark, amp_bright)


@dataclass(frozen=True)
class CollectiveBasis:
    """Dark/bright single-photon modes for a given coupling configuration.

    The bright mode is the combination the atom couples to, proportional to
    (conj(g_a), conj(g_b)); the dark mode is orthogonal to it.  Phases are
    fixed so that both have a real non-negative amplitude on port a, which
    reproduces dark = (1, 1)/sqrt2 and bright = (1, -1)/sqrt2 for g_b = -g_a.
    """

    bright: tuple[complex, complex]
    dark: tuple[complex, complex]

    @classmethod
    def for_params(cls, params: SystemParams) -> "CollectiveBasis":
        ga, gb = complex(params.g_a), complex(params.g_b)
        norm = math.hypot(abs(ga), abs(gb))
        if norm == 0.0:
            return cls(bright=(1 / SQRT2, -1 / SQRT2), dark=(1 / SQRT2, 1 / SQRT2))
        bright = np.array([np.conj(ga), np.conj(gb)]) / norm
        dark = np.array([-gb, ga]) / norm
        bright = _fix_phase(bright)
        dark = _fix_phase(dark)
        return cls(bright=(complex(bright[0]), complex(bright[1])), dark=(complex(dark[0]), complex(dark[1])))

    @staticmethod
    def photon_label(kind: str, n: int) -> str:
        if kind not in ("D", "B") or n < 0:
            raise InvalidParameterError("kind must be 'D' or 'B' and n >= 0")
        return f"Psi_{kind}^{n}"


def _fix_phase(v: np.ndarray) -> np.ndarray:
    ref = v[0] if abs(v[0]) > 1e-14 else v[1]
    return v * (abs(ref) / ref)
