"""Brute-force time-bin (collision model) reference solver.

Each waveguide is cut into bins of width dt.  Per step the current input bin
of each port and one fresh bin per atomic decay channel interact with the
system through the exact unitary

    U = expm(-i H dt + sum_z sqrt(2 kappa_z dt)(z^dag d_z - z d_z^dag)
             + sum_l sqrt(2 Gamma_l dt)(sigma_+^l d_l - sigma_-^l d_l^dag))

restricted to at most two excitations (the generator conserves them).

A not-yet-arrived photon is tracked by a flag j: the unnormalized tail
T_n = sum_{k>=n} xi_k |1_k> splits as xi_n |1_n> + T_{n+1}, so each step
either consumes the photon into the current bin (amplitude xi_n) or keeps the
flag.  After interacting, the bins are never touched again and are traced
out by emission count.  The no-emission branch stays a pure vector; branches
with one emission are density matrices on the one-excitation subspace;
branches with two emissions are finished and only carry probability.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import (
    ConvergenceError,
    Envelope,
    InvalidParameterError,
    NumericalFailure,
    SystemParams,
    atom_amplitudes,
    envelope_function,
    settle_time,
)

DEFAULT_DT = 0.02
NORM_TOLERANCE = 1e-8

G1, G2, E = 0, 1, 2
CHANNELS = ("a", "b", "loss")

# per-step Kraus pieces: K(n) = A + xi B + zeta C + xi zeta D
_PIECES = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass(frozen=True, eq=False)
class _Model:
    """Basis, Kraus pieces and projectors for one parameter set and bin width."""

    basis: tuple  # (atom, n_a, n_b, j_a, j_b)
    outcomes: tuple  # (o_a, o_b, o_1, o_2)
    pieces: np.ndarray  # (4, n_outcomes, dim, dim)
    excitation: np.ndarray  # per basis state, including flags
    one_idx: np.ndarray  # basis indices with excitation <= 1
    zero_idx: np.ndarray  # basis indices with excitation 0
    ground_idx: dict  # level -> index of |g_l, 0, 0, 0, 0>
    sign: float


def _sys_basis():
    return [
        (lvl, na, nb)
        for lvl in (G1, G2, E)
        for na in range(3)
        for nb in range(3)
        if na + nb + (lvl == E) <= 2
    ]


def _build_model(params: SystemParams, dt: float) -> _Model:
    sys_states = _sys_basis()
    bins = [occ for occ in itertools.product(range(3), repeat=4) if sum(occ) <= 2]
    joint = [(s, o) for s in sys_states for o in bins if s[1] + s[2] + (s[0] == E) + sum(o) <= 2]
    where = {st: i for i, st in enumerate(joint)}
    dim = len(joint)

    def lower(kind, st):
        """Apply an annihilator; returns (coef, new state) or None."""
        (lvl, na, nb), o = st
        o = list(o)
        if kind == "a":
            return (math.sqrt(na), ((lvl, na - 1, nb), tuple(o))) if na else None
        if kind == "b":
            return (math.sqrt(nb), ((lvl, na, nb - 1), tuple(o))) if nb else None
        if kind in ("s1", "s2"):
            target = G1 if kind == "s1" else G2
            return (1.0, ((target, na, nb), tuple(o))) if lvl == E else None
        k = {"da": 0, "db": 1, "d1": 2, "d2": 3}[kind]
        if o[k] == 0:
            return None
        c = math.sqrt(o[k])
        o[k] -= 1
        return (c, ((lvl, na, nb), tuple(o)))

    def matrix(kind):
        m = np.zeros((dim, dim))
        for i, st in enumerate(joint):
            res = lower(kind, st)
            if res is not None and res[1] in where:
                m[where[res[1]], i] += res[0]
        return m

    a, b, s1, s2 = (matrix(k) for k in ("a", "b", "s1", "s2"))
    d = {k: matrix(k) for k in ("da", "db", "d1", "d2")}
    # exact within the bounded space: coupling products conserve excitations
    ga, gb = complex(params.g_a), complex(params.g_b)
    coupling = np.zeros((dim, dim), dtype=complex)
    for i, st in enumerate(joint):
        (lvl, na, nb), o = st
        if lvl != G1:
            continue
        for g, (ma, mb) in ((ga, (na - 1, nb)), (gb, (na, nb - 1))):
            occ = na if ma < na else nb
            if occ == 0:
                continue
            tgt = ((E, ma, mb), o)
            if tgt in where:
                coupling[where[tgt], i] += g * math.sqrt(occ)
    # coupling = (g_a a + g_b b) sigma_+ ; H = coupling + h.c.
    h = coupling + coupling.conj().T
    gen = -1j * h * dt
    # X = z^dag d lowers before raising, so it stays exact in the truncated
    # space; its adjoint is taken as a matrix, not as a truncated product
    for z, rate, dz in (
        (a, params.kappa_a, d["da"]),
        (b, params.kappa_b, d["db"]),
        (s1, params.gamma_1, d["d1"]),
        (s2, params.gamma_2, d["d2"]),
    ):
        x = z.T @ dz
        gen += math.sqrt(2 * rate * dt) * (x - x.T)
    U = expm(gen)

    basis = tuple((lvl, na, nb, ja, jb) for (lvl, na, nb) in sys_states for ja in (0, 1) for jb in (0, 1)
                  if na + nb + (lvl == E) + ja + jb <= 2)
    bidx = {st: i for i, st in enumerate(basis)}
    outcomes = tuple(o for o in bins)
    oidx = {o: i for i, o in enumerate(outcomes)}
    n = len(basis)
    pieces = np.zeros((4, len(outcomes), n, n), dtype=complex)
    for col, (lvl, na, nb, ja, jb) in enumerate(basis):
        for ia in ((0, ja),) if ja == 0 else ((1, 0), (0, 1)):
            for ib in ((0, jb),) if jb == 0 else ((1, 0), (0, 1)):
                in_a, ja2 = ia
                in_b, jb2 = ib
                src = ((lvl, na, nb), (in_a, in_b, 0, 0))
                if src not in where:
                    continue
                piece = _PIECES.index((in_a, in_b))
                column = U[:, where[src]]
                for row in np.nonzero(np.abs(column) > 0)[0]:
                    (l2, ma, mb), o = joint[row]
                    tgt = (l2, ma, mb, ja2, jb2)
                    if tgt not in bidx:
                        continue
                    pieces[piece, oidx[o], bidx[tgt], col] += column[row]
    exc = np.array([na + nb + (lvl == E) + ja + jb for (lvl, na, nb, ja, jb) in basis])

    # sign so that an empty cavity returns +xi for a slow pulse
    sign = -1.0 if params.kappa_a > 0 else 1.0
    return _Model(
        basis=basis,
        outcomes=outcomes,
        pieces=pieces,
        excitation=exc,
        one_idx=np.nonzero(exc <= 1)[0],
        zero_idx=np.nonzero(exc == 0)[0],
        ground_idx={l: bidx[(l, 0, 0, 0, 0)] for l in (G1, G2)},
        sign=sign,
    )


def _counts(o) -> tuple[int, int, int]:
    return (o[0], o[1], o[2] + o[3])


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """Joint output photon-number distribution.

    ``probabilities`` maps (n_a, n_b, n_lost) to probability for finished
    events; ``residual`` is whatever is still inside the system or the
    input tails at the horizon.
    """

    probabilities: dict
    residual: float
    photons: int
    times: np.ndarray  # bin midpoints
    flux_a: np.ndarray  # mean photon flux per unit time
    flux_b: np.ndarray
    envelopes: dict  # (level, port) -> complex amplitude, single-photon inputs only
    M: int
    dt: float
    max_norm_error: float

    def p(self, n_a: int, n_b: int, n_lost: int = 0) -> float:
        return self.probabilities.get((n_a, n_b, n_lost), 0.0)

    @property
    def total(self) -> float:
        return sum(self.probabilities.values()) + self.residual

    # two-photon outcome classes
    @property
    def both_a(self) -> float:
        return self.p(2, 0, 0)

    @property
    def one_each(self) -> float:
        return self.p(1, 1, 0)

    @property
    def both_b(self) -> float:
        return self.p(0, 2, 0)

    @property
    def one_lost(self) -> float:
        return self.p(1, 0, 1) + self.p(0, 1, 1)

    @property
    def both_lost(self) -> float:
        return self.p(0, 0, 2)

    # single-photon outcome classes
    @property
    def port_a(self) -> float:
        return self.p(1, 0, 0)

    @property
    def port_b(self) -> float:
        return self.p(0, 1, 0)

    @property
    def lost(self) -> float:
        return self.p(0, 0, 1)

    def summary(self) -> dict:
        if self.photons == 2:
            keys = ("both_a", "one_each", "both_b", "one_lost", "both_lost")
        elif self.photons == 1:
            keys = ("port_a", "port_b", "lost")
        else:
            keys = ()
        out = {k: getattr(self, k) for k in keys}
        out["residual"] = self.residual
        return out


def _bin_amplitudes(pulse: Envelope | None, t_start: float, dt: float, M: int) -> np.ndarray:
    if pulse is None:
        return np.zeros(M, dtype=complex)
    mids = t_start + dt * (np.arange(M) + 0.5)
    amp = np.asarray(envelope_function(pulse)(mids), dtype=complex) * math.sqrt(dt)
    norm = np.linalg.norm(amp)
    if norm == 0:
        raise InvalidParameterError("pulse has no weight on the time-bin horizon")
    return amp / norm


def default_horizon(params: SystemParams, pulse: Envelope) -> tuple[float, float]:
    """(t_start, T): the pulse support plus the system settle time."""
    lo, hi = pulse.support
    return lo, (hi - lo) + settle_time(params)


def simulate_timebin(
    params: SystemParams,
    pulse_a: Envelope | None,
    pulse_b: Envelope | None,
    atom_init="g1",
    M: int | None = None,
    T: float | None = None,
    *,
    dt: float = DEFAULT_DT,
    t_start: float | None = None,
) -> OutputDistribution:
    """Run the collision model over ``M`` bins spanning ``T``.

    With ``M`` omitted, M = ceil(T / dt).  The horizon defaults to the pulse
    support plus the settle time of the slowest system mode.
    """
    pulse = pulse_a if pulse_a is not None else pulse_b
    if T is None or t_start is None:
        if pulse is None:
            raise InvalidParameterError("a horizon (t_start, T) is required without input pulses")
        lo, span = default_horizon(params, pulse)
        t_start = lo if t_start is None else t_start
        T = span if T is None else T
    if not T > 0:
        raise InvalidParameterError("horizon T must be positive")
    if M is None:
        M = int(math.ceil(T / dt))
    if M < 1:
        raise InvalidParameterError("M must be >= 1")
    dt = T / M
    fastest = max(params.kappa_a, params.kappa_b, params.gamma_total, abs(params.g_a), abs(params.g_b))
    if fastest * dt > 1.0:
        raise ConvergenceError(
            f"bin width {dt:.3g} is too coarse for the fastest rate {fastest:.3g}; increase M"
        )
    lam = atom_amplitudes(atom_init)
    photons = int(pulse_a is not None) + int(pulse_b is not None)

    model = _build_model(params, dt)
    xi = _bin_amplitudes(pulse_a, t_start, dt, M)
    zeta = _bin_amplitudes(pulse_b, t_start, dt, M)
    # remaining tail weight sum_{k>=n}|xi_k|^2, for the physical norm
    tail_a = np.concatenate([np.cumsum((np.abs(xi) ** 2)[::-1])[::-1], [0.0]])
    tail_b = np.concatenate([np.cumsum((np.abs(zeta) ** 2)[::-1])[::-1], [0.0]])
    if pulse_a is None:
        tail_a[:] = 1.0
    if pulse_b is None:
        tail_b[:] = 1.0

    basis = model.basis
    ja = np.array([s[3] for s in basis])
    jb = np.array([s[4] for s in basis])
    psi = np.zeros(len(basis), dtype=complex)
    for l, amp in zip((G1, G2), lam):
        psi[_index(basis, (l, 0, 0, int(pulse_a is not None), int(pulse_b is not None)))] = amp

    one = model.one_idx
    pieces = model.pieces
    unit_outcomes = [i for i, o in enumerate(model.outcomes) if sum(o) == 1]
    zero_outcome = model.outcomes.index((0, 0, 0, 0))
    pieces_one = pieces[:, [zero_outcome] + unit_outcomes][:, :, one][:, :, :, one]
    unit_counts = [_counts(model.outcomes[i]) for i in unit_outcomes]
    rho1 = {c: np.zeros((one.size, one.size), dtype=complex) for c in set(unit_counts)}
    finished: dict[tuple[int, int, int], float] = {}
    out_a = np.array([o[0] for o in model.outcomes], dtype=float)
    out_b = np.array([o[1] for o in model.outcomes], dtype=float)
    flux_a = np.zeros(M)
    flux_b = np.zeros(M)
    env = {}
    if photons == 1:
        env = {(lvl, port): np.zeros(M, dtype=complex) for lvl in ("g1", "g2") for port in ("a", "b")}
    ground = {"g1": model.ground_idx[G1], "g2": model.ground_idx[G2]}
    o_a = model.outcomes.index((1, 0, 0, 0))
    o_b = model.outcomes.index((0, 1, 0, 0))
    ja1, jb1 = ja[one], jb[one]
    max_norm_err = 0.0

    for n in range(M):
        x, z = xi[n], zeta[n]
        K = pieces[0] + x * pieces[1] + z * pieces[2] + (x * z) * pieces[3]
        v = K @ psi  # (n_outcomes, dim)
        probs0 = _weighted_norms(v, ja, jb, tail_a[n + 1], tail_b[n + 1])
        flux_a[n] += probs0 @ out_a
        flux_b[n] += probs0 @ out_b
        if env:
            for lvl, idx in ground.items():
                env[(lvl, "a")][n] = model.sign * v[o_a, idx] / math.sqrt(dt)
                env[(lvl, "b")][n] = model.sign * v[o_b, idx] / math.sqrt(dt)
        new_rho1 = {c: np.zeros_like(r) for c, r in rho1.items()}
        for k, o in enumerate(model.outcomes):
            if k == zero_outcome:
                continue
            c = _counts(o)
            if sum(o) == 1:
                w = v[k, one]
                new_rho1[c] += np.outer(w, w.conj())
            else:
                finished[c] = finished.get(c, 0.0) + probs0[k]
        psi = v[zero_outcome]

        Kone = (
            pieces_one[0] + x * pieces_one[1] + z * pieces_one[2] + (x * z) * pieces_one[3]
        )  # (1 + n_unit, d1, d1)
        for c, r in rho1.items():
            if not r.any():
                continue
            prop = Kone @ r @ np.conj(np.swapaxes(Kone, -1, -2))
            new_rho1[c] += prop[0]
            diag = np.real(np.einsum("kii->ki", prop[1:]))
            wts = _flag_weights(ja1, jb1, tail_a[n + 1], tail_b[n + 1])
            p_unit = diag @ wts
            for j, cu in enumerate(unit_counts):
                key = tuple(ci + cj for ci, cj in zip(c, cu))
                finished[key] = finished.get(key, 0.0) + p_unit[j]
                flux_a[n] += p_unit[j] * cu[0]
                flux_b[n] += p_unit[j] * cu[1]
        rho1 = new_rho1

        total = float(_weighted_norms(psi[None, :], ja, jb, tail_a[n + 1], tail_b[n + 1])[0])
        wts1 = _flag_weights(ja1, jb1, tail_a[n + 1], tail_b[n + 1])
        total += sum(float(np.real(np.diag(r)) @ wts1) for r in rho1.values())
        total += sum(finished.values())
        err = abs(total - 1.0)
        max_norm_err = max(max_norm_err, err)
        if err > 100 * NORM_TOLERANCE:
            raise NumericalFailure(f"time-bin norm bookkeeping off by {err:.3g} at bin {n}")

    # events with every photon out are finished; the rest is residual
    zero_in_one = np.isin(one, model.zero_idx)
    probs = dict(finished)
    left = float(_weighted_norms(psi[None, :], ja, jb, tail_a[M], tail_b[M])[0])
    residual = left if photons else 0.0
    if photons == 0:
        probs[(0, 0, 0)] = left
    wts1 = _flag_weights(ja1, jb1, tail_a[M], tail_b[M])
    for c, r in rho1.items():
        d = np.real(np.diag(r)) * wts1
        if photons == 1:
            probs[c] = probs.get(c, 0.0) + float(d[zero_in_one].sum())
            residual += float(d[~zero_in_one].sum())
        else:
            residual += float(d.sum())
    probs = {k: float(v) for k, v in sorted(probs.items()) if sum(k) == photons}
    times = t_start + dt * (np.arange(M) + 0.5)
    return OutputDistribution(
        probabilities=probs,
        residual=residual,
        photons=photons,
        times=times,
        flux_a=flux_a / dt,
        flux_b=flux_b / dt,
        envelopes=env,
        M=M,
        dt=dt,
        max_norm_error=max_norm_err,
    )


def _index(basis, state):
    try:
        return basis.index(state)
    except ValueError:
        raise InvalidParameterError(f"state {state} is outside the two-excitation space") from None


def _flag_weights(ja, jb, wa, wb):
    return np.where(ja == 1, wa, 1.0) * np.where(jb == 1, wb, 1.0)


def _weighted_norms(v, ja, jb, wa, wb):
    return (np.abs(v) ** 2) @ _flag_weights(ja, jb, wa, wb)


# ---------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceReport:
    """Richardson analysis of an observable at M, 2M, 4M bins."""

    key: str
    values: tuple[float, float, float]
    order: float
    extrapolated: float
    error_estimate: float
    monotone: bool
    details: dict = field(default_factory=dict)


def _observable(result: OutputDistribution, key) -> float:
    if isinstance(key, tuple):
        return result.p(*key)
    return float(getattr(result, key))


def convergence_report(results, key=None) -> ConvergenceReport:
    """Observed order and extrapolated value from results at M, 2M, 4M.

    ``key`` is an outcome name ('port_a', 'one_each', ...) or a count tuple;
    by default the outcome with the largest probability at the finest
    resolution.  Non-monotone sequences raise a RuntimeWarning and return
    the finest value as the estimate.
    """
    results = list(results)
    if len(results) < 3:
        raise InvalidParameterError("convergence_report needs at least three resolutions")
    results = sorted(results, key=lambda r: r.M)[-3:]
    Ms = [r.M for r in results]
    if not (Ms[1] == 2 * Ms[0] and Ms[2] == 2 * Ms[1]):
        raise InvalidParameterError(f"resolutions must be M, 2M, 4M; got {Ms}")
    if key is None:
        finest = results[-1]
        key = max(finest.probabilities, key=finest.probabilities.get)
    p1, p2, p4 = (_observable(r, key) for r in results)
    d1, d2 = p1 - p2, p2 - p4
    label = key if isinstance(key, str) else str(key)
    if d2 == 0.0 and d1 == 0.0:
        return ConvergenceReport(label, (p1, p2, p4), float("inf"), p4, 0.0, True)
    monotone = d1 * d2 > 0 and abs(d2) < abs(d1)
    if not monotone:
        warnings.warn(
            f"non-monotone convergence for {label}: values {p1:.10g}, {p2:.10g}, {p4:.10g} at M = {Ms}",
            RuntimeWarning,
            stacklevel=2,
        )
        return ConvergenceReport(label, (p1, p2, p4), float("nan"), p4, abs(d2), False, {"M": Ms})
    order = math.log2(d1 / d2)
    extrap = p4 + (p4 - p2) / (2.0**order - 1.0)
    return ConvergenceReport(label, (p1, p2, p4), order, extrap, abs(extrap - p4), True, {"M": Ms})


def converged_timebin(params, pulse_a, pulse_b, atom_init="g1", M=None, T=None, *, tol=1e-3, **kwargs):
    """Run at M and 2M; raise ConvergenceError if any outcome moves by more than ``tol``."""
    coarse = simulate_timebin(params, pulse_a, pulse_b, atom_init, M, T, **kwargs)
    fine = simulate_timebin(params, pulse_a, pulse_b, atom_init, 2 * coarse.M, coarse.dt * coarse.M, **{
        k: v for k, v in kwargs.items() if k != "dt"
    })
    keys = set(coarse.probabilities) | set(fine.probabilities)
    worst = max((abs(coarse.p(*k) - fine.p(*k)) for k in keys), default=0.0)
    if worst > tol:
        raise ConvergenceError(
            f"time-bin outcomes change by {worst:.3g} between M = {coarse.M} and {fine.M}; refine the bins"
        )
    return fine
