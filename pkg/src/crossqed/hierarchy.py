"""Fock-state master-equation hierarchy for single-photon wavepacket inputs.

Each port carries at most one photon.  The hierarchy components are system
operators rho[m, n, p, q] with m, n <= Na (port a) and p, q <= Nb (port b) on
atom (g1, g2, e) x cavity a x cavity b; rho[Na, Na, Nb, Nb] is the physical
state.  With a photon in each port this is the full set of 16 components.  A
port without a photon keeps only index 0: its components would be equal
anyway, because an absent pulse is a zero envelope.

The system space holds cavity occupations up to ``n_max`` with total
excitation number at most ``n_max``.  The Hamiltonian conserves excitations
and every jump lowers them, so for inputs with at most ``n_max`` photons this
truncation is exact.

The generator is linear in the stacked components with time-dependent
coefficients 1, xi, xi*, |xi|^2 per port.  It is assembled once as sparse
matrices, one per coefficient.

Two-time coincidences use quantum regression in integrated form.  The
a-conditioned operator S_a(t') = int_0^t' E(t', t) J_a[rho(t)] dt obeys the
hierarchy equations with J_a[rho(t')] as a source, so the coincidence is
int dt' tr{J_b[S_a(t')] + J_a[S_b(t')]} on the physical component, i.e. the
normally ordered two-time correlation integrated over both time orderings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853

from .core import (
    Envelope,
    InvalidParameterError,
    NumericalFailure,
    SystemParams,
    TimeGrid,
    scalar_envelope,
)

RTOL = 1e-9
ATOL = 1e-14  # flux samples near zero need this to stay above -1e-10
TRACE_TOLERANCE = 1e-8
HERMITICITY_TOLERANCE = 1e-10

ATOM_LEVELS = ("g1", "g2", "e")
G1, G2, E = 0, 1, 2


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class SystemOperators:
    """Operators on the excitation-bounded atom x cavity x cavity space.

    Products are formed in the full Fock space before projecting, so
    ``coupling_a`` = P a sigma_1^dag P is exact on the subspace.
    """

    n_max: int
    basis: tuple[tuple[int, int, int], ...]  # (atom level, n_a, n_b)
    a: np.ndarray
    b: np.ndarray
    sigma_1: np.ndarray  # |g1><e|
    sigma_2: np.ndarray  # |g2><e|
    sigma_ee: np.ndarray
    coupling_a: np.ndarray  # a sigma_1^dag
    coupling_b: np.ndarray  # b sigma_1^dag

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, level: int, na: int, nb: int) -> int:
        return self.basis.index((level, na, nb))


@lru_cache(maxsize=8)
def system_operators(n_max: int = 2) -> SystemOperators:
    if n_max < 1:
        raise InvalidParameterError("n_max must be >= 1")
    nc = n_max + 1
    destroy = np.diag(np.sqrt(np.arange(1, nc)), 1)
    eye_c = np.eye(nc)

    def atom_op(i, j):
        m = np.zeros((3, 3))
        m[i, j] = 1.0
        return np.kron(np.kron(m, eye_c), eye_c)

    full = {
        "a": np.kron(np.kron(np.eye(3), destroy), eye_c),
        "b": np.kron(np.kron(np.eye(3), eye_c), destroy),
        "sigma_1": atom_op(G1, E),
        "sigma_2": atom_op(G2, E),
        "sigma_ee": atom_op(E, E),
    }
    full["coupling_a"] = full["a"] @ full["sigma_1"].T
    full["coupling_b"] = full["b"] @ full["sigma_1"].T
    labels = [(lvl, na, nb) for lvl in (G1, G2, E) for na in range(nc) for nb in range(nc)]
    keep = [i for i, (lvl, na, nb) in enumerate(labels) if na + nb + (lvl == E) <= n_max]
    proj = {}
    for name, m in full.items():
        pm = m[np.ix_(keep, keep)].astype(complex)
        pm.setflags(write=False)
        proj[name] = pm
    return SystemOperators(n_max=n_max, basis=tuple(labels[i] for i in keep), **proj)


@dataclass(frozen=True, eq=False)
class LindbladChannels:
    """H_sys and the jump operators L_a, L_b, L_1, L_2."""

    hamiltonian: np.ndarray
    l_a: np.ndarray
    l_b: np.ndarray
    l_1: np.ndarray
    l_2: np.ndarray

    @classmethod
    def build(cls, params: SystemParams, ops: SystemOperators) -> "LindbladChannels":
        ga, gb = complex(params.g_a), complex(params.g_b)
        coupling = ga * ops.coupling_a + gb * ops.coupling_b
        return cls(
            hamiltonian=coupling + coupling.conj().T,
            l_a=math.sqrt(2 * params.kappa_a) * ops.a,
            l_b=math.sqrt(2 * params.kappa_b) * ops.b,
            l_1=math.sqrt(2 * params.gamma_1) * ops.sigma_1,
            l_2=math.sqrt(2 * params.gamma_2) * ops.sigma_2,
        )

    @property
    def jumps(self) -> tuple[np.ndarray, ...]:
        return (self.l_a, self.l_b, self.l_1, self.l_2)

    @property
    def effective_hamiltonian(self) -> np.ndarray:
        return self.hamiltonian - 0.5j * sum(L.conj().T @ L for L in self.jumps)


def dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """D[L] rho = L rho L^dag - (L^dag L rho + rho L^dag L)/2."""
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def lindblad_rhs(channels: LindbladChannels, rho: np.ndarray) -> np.ndarray:
    """Undriven master-equation generator in dense form."""
    out = -1j * (channels.hamiltonian @ rho - rho @ channels.hamiltonian)
    for L in channels.jumps:
        out += dissipator(L, rho)
    return out


# ---------------------------------------------------------------------------
# hierarchy tensor


@dataclass(frozen=True, eq=False)
class HierarchyTensor:
    """Components rho[m, n, p, q] at one instant.

    ``photons`` records which ports carry a photon.  Indexing a port without
    a photon with 1 returns the index-0 component, which it equals.
    """

    rho: np.ndarray  # shape (Na+1, Na+1, Nb+1, Nb+1, D, D)
    photons: tuple[int, int]
    basis: tuple[tuple[int, int, int], ...]

    def component(self, m: int, n: int, p: int, q: int) -> np.ndarray:
        na, nb = self.photons
        for idx in (m, n, p, q):
            if idx not in (0, 1):
                raise InvalidParameterError("hierarchy indices are 0 or 1")
        return self.rho[min(m, na), min(n, na), min(p, nb), min(q, nb)]

    @property
    def physical(self) -> np.ndarray:
        return self.component(1, 1, 1, 1)

    def trace_error(self) -> float:
        return abs(complex(np.trace(self.physical)) - 1.0)

    def hermiticity_error(self) -> float:
        return _hermiticity_error(self.rho)

    def atom_populations(self) -> np.ndarray:
        """Diagonal of the reduced atomic state (g1, g2, e)."""
        diag = np.diag(self.physical).real
        pops = np.zeros(3)
        for (lvl, _, _), val in zip(self.basis, diag):
            pops[lvl] += val
        return pops


def _hermiticity_error(x: np.ndarray) -> float:
    # rho[m,n,p,q] = rho[n,m,q,p]^dag
    partner = np.conj(np.swapaxes(x.transpose(1, 0, 3, 2, 4, 5), -1, -2))
    return float(np.max(np.abs(x - partner)))


def _worst_component(x: np.ndarray) -> tuple[int, ...]:
    partner = np.conj(np.swapaxes(x.transpose(1, 0, 3, 2, 4, 5), -1, -2))
    err = np.max(np.abs(x - partner), axis=(-1, -2))
    return tuple(int(i) for i in np.unravel_index(np.argmax(err), err.shape))


def atom_density(atom_init) -> np.ndarray:
    """3x3 atomic density operator from 'g1'/'g2'/'e', amplitudes or a matrix."""
    if isinstance(atom_init, str):
        if atom_init not in ATOM_LEVELS:
            raise InvalidParameterError(f"unknown atomic state {atom_init!r}")
        rho = np.zeros((3, 3), dtype=complex)
        k = ATOM_LEVELS.index(atom_init)
        rho[k, k] = 1
        return rho
    arr = np.asarray(atom_init, dtype=complex)
    if arr.shape == (2,):
        arr = np.array([arr[0], arr[1], 0.0])
    if arr.shape == (3,):
        if not math.isclose(float(np.vdot(arr, arr).real), 1.0, abs_tol=1e-10):
            raise InvalidParameterError("atomic amplitudes must be normalized")
        arr = np.outer(arr, arr.conj())
    if arr.shape != (3, 3):
        raise InvalidParameterError("atomic state must be a label, 2 or 3 amplitudes, or a 3x3 density matrix")
    if abs(np.trace(arr) - 1) > 1e-10 or np.max(np.abs(arr - arr.conj().T)) > 1e-10:
        raise InvalidParameterError("atomic density matrix must be Hermitian with unit trace")
    if np.linalg.eigvalsh(arr).min() < -1e-10:
        raise InvalidParameterError("atomic density matrix must be positive semidefinite")
    return arr


def _system_state(rho_atom: np.ndarray, ops: SystemOperators) -> np.ndarray:
    rho = np.zeros((ops.dim, ops.dim), dtype=complex)
    vac = [ops.index(l, 0, 0) for l in (G1, G2, E)]
    for i in range(3):
        for j in range(3):
            rho[vac[i], vac[j]] = rho_atom[i, j]
    return rho


# ---------------------------------------------------------------------------
# sparse generator


def _left(A):
    return sp.kron(sp.csr_matrix(A), sp.identity(A.shape[0]), format="csr")


def _right(B):
    # vec(X B) for row-major vec
    return sp.kron(sp.identity(B.shape[0]), sp.csr_matrix(B.T), format="csr")


def _sandwich(A, B):
    return sp.kron(sp.csr_matrix(A), sp.csr_matrix(B.T), format="csr")


def _raise(size: int):
    m = np.zeros((size, size))
    if size > 1:
        m[1, 0] = 1.0
    return m


def _comp_op(shape, axis_ops):
    """Kronecker product over the four component axes; missing axes are identity."""
    out = sp.identity(1, format="csr")
    for ax, size in enumerate(shape):
        m = axis_ops.get(ax)
        out = sp.kron(out, sp.csr_matrix(m) if m is not None else sp.identity(size), format="csr")
    return out


COEFFS = ("1", "a", "a*", "|a|2", "b", "b*", "|b|2")


class _HierarchyGenerator:
    """Sparse pieces G_k with d/dt x = sum_k c_k(t) G_k x on one block."""

    def __init__(self, channels: LindbladChannels, shape: tuple[int, int, int, int]):
        D = channels.hamiltonian.shape[0]
        self.shape = shape
        self.dim = D
        n_comp = int(np.prod(shape))
        self.n_comp = n_comp
        heff = channels.effective_hamiltonian
        L0 = -1j * (_left(heff) - _right(heff.conj().T))
        for L in channels.jumps:
            if np.any(L):
                L0 = L0 + _sandwich(L, L.conj().T)
        I_comp = sp.identity(n_comp, format="csr")
        gen = {"1": sp.kron(I_comp, L0, format="csr")}
        jump_a = {}
        jump_b = {}
        for port, L, (ax_m, ax_n) in (("a", channels.l_a, (0, 1)), ("b", channels.l_b, (2, 3))):
            Ld = L.conj().T
            jumps = jump_a if port == "a" else jump_b
            jumps["1"] = sp.kron(I_comp, _sandwich(L, Ld), format="csr")
            if shape[ax_m] > 1:
                up_m = _comp_op(shape, {ax_m: _raise(shape[ax_m])})
                up_n = _comp_op(shape, {ax_n: _raise(shape[ax_n])})
                up_mn = _comp_op(shape, {ax_m: _raise(shape[ax_m]), ax_n: _raise(shape[ax_n])})
                # sqrt(m) xi [rho_{m-1,n}, L^dag] + sqrt(n) xi* [L, rho_{m,n-1}]
                gen[port] = sp.kron(up_m, _right(Ld) - _left(Ld), format="csr")
                gen[port + "*"] = sp.kron(up_n, _left(L) - _right(L), format="csr")
                # output sandwich z_out . z_out^dag with the input cross terms
                jumps[port] = sp.kron(up_m, _right(Ld), format="csr")
                jumps[port + "*"] = sp.kron(up_n, _left(L), format="csr")
                jumps[f"|{port}|2"] = sp.kron(up_mn, sp.identity(D * D), format="csr")
        self.gen = gen
        self.jump_a = jump_a
        self.jump_b = jump_b

    def functional(self, component: tuple[int, int, int, int], op: np.ndarray) -> np.ndarray:
        """Row vector r with r . x = tr(op @ x[component])."""
        e = np.zeros(self.shape)
        e[component] = 1.0
        return np.kron(e.reshape(-1), np.asarray(op).T.reshape(-1)).astype(complex)


def _coefficients(alpha, beta, t):
    a = complex(alpha(t))
    b = complex(beta(t))
    return {
        "1": 1.0,
        "a": a,
        "a*": a.conjugate(),
        "|a|2": abs(a) ** 2,
        "b": b,
        "b*": b.conjugate(),
        "|b|2": abs(b) ** 2,
    }


def _assemble(gen: _HierarchyGenerator, top, loss_row, flux_rows, coincidence: bool):
    """Full sparse system (blocks + 4 accumulators) per coefficient."""
    n_block = gen.n_comp * gen.dim**2
    n_blocks = 3 if coincidence else 1
    n_state = n_blocks * n_block
    mats = {}
    for k in COEFFS:
        g = gen.gen.get(k)
        blocks = [[None] * n_blocks for _ in range(n_blocks)]
        for i in range(n_blocks):
            blocks[i][i] = g if g is not None else sp.csr_matrix((n_block, n_block), dtype=complex)
        acc = np.zeros((4, n_state), dtype=complex)
        fa = flux_rows["a"].get(k)
        fb = flux_rows["b"].get(k)
        if fa is not None:
            acc[0, :n_block] = fa
        if fb is not None:
            acc[1, :n_block] = fb
        if k == "1":
            acc[2, :n_block] = loss_row
        if coincidence:
            if k in gen.jump_a:
                blocks[1][0] = gen.jump_a[k]
            if k in gen.jump_b:
                blocks[2][0] = gen.jump_b[k]
            # b detected after a, plus a detected after b
            if fb is not None:
                acc[3, n_block : 2 * n_block] = fb
            if fa is not None:
                acc[3, 2 * n_block :] = fa
        full = sp.bmat(
            [
                [sp.bmat(blocks, format="csr"), sp.csr_matrix((n_state, 4), dtype=complex)],
                [sp.csr_matrix(acc), sp.csr_matrix((4, 4), dtype=complex)],
            ],
            format="csr",
        )
        full.eliminate_zeros()
        if full.nnz:
            mats[k] = full
    return mats, n_state


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True, eq=False)
class HierarchyResult:
    """Observables sampled on the output grid.

    ``photons_a``, ``photons_b`` and ``photons_lost`` are integrated
    alongside the equations (flux and spontaneous-emission accumulators).
    ``snapshots`` maps requested times to HierarchyTensor values.
    """

    params: SystemParams
    n_max: int
    photons: tuple[int, int]
    times: np.ndarray
    flux_a: np.ndarray
    flux_b: np.ndarray
    loss_flux: np.ndarray
    sigma_ee: np.ndarray
    trace: np.ndarray
    hermiticity_error: np.ndarray
    photons_a: float
    photons_b: float
    photons_lost: float
    coincidence: float | None
    final: HierarchyTensor
    snapshots: dict = field(default_factory=dict)
    rho_physical: np.ndarray | None = None

    @property
    def max_trace_error(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))

    @property
    def total_photons(self) -> float:
        return self.photons_a + self.photons_b + self.photons_lost


def integrate_hierarchy(
    params: SystemParams,
    pulse_a: Envelope | None,
    pulse_b: Envelope | None,
    atom_init="g1",
    grid: TimeGrid | None = None,
    *,
    n_max: int = 2,
    coincidence: bool = False,
    store_rho: bool = False,
    snapshot_times=(),
    rtol: float = RTOL,
    atol: float = ATOL,
) -> HierarchyResult:
    """Propagate the hierarchy for single-photon envelopes ``pulse_a``, ``pulse_b``.

    None means vacuum in that port.  ``atom_init`` is a level label,
    amplitudes (lambda_1, lambda_2), or a 3x3 density matrix in (g1, g2, e).
    With ``coincidence=True`` the regression operators are propagated as
    well and ``result.coincidence`` is the probability of one photon in each
    output port.
    """
    if grid is None:
        pulse = pulse_a if pulse_a is not None else pulse_b
        if pulse is None:
            raise InvalidParameterError("a time grid is required for vacuum inputs")
        grid = TimeGrid.default(pulse)
    photons = (int(pulse_a is not None), int(pulse_b is not None))
    if n_max < sum(photons):
        raise InvalidParameterError("n_max must be at least the total input photon number")
    if coincidence and photons != (1, 1):
        raise InvalidParameterError("the coincidence needs one photon in each port")
    ops = system_operators(n_max)
    channels = LindbladChannels.build(params, ops)
    rho_sys = _system_state(atom_density(atom_init), ops)
    alpha, beta = scalar_envelope(pulse_a), scalar_envelope(pulse_b)

    na, nb = photons
    shape = (na + 1, na + 1, nb + 1, nb + 1)
    top = (na, na, nb, nb)
    gen = _HierarchyGenerator(channels, shape)
    D = ops.dim
    n_block = gen.n_comp * D * D

    trace_top = gen.functional(top, np.eye(D))
    flux_rows = {
        port: {k: np.asarray(M.T @ trace_top).ravel() for k, M in jumps.items()}
        for port, jumps in (("a", gen.jump_a), ("b", gen.jump_b))
    }
    loss_op = sum(L.conj().T @ L for L in (channels.l_1, channels.l_2))
    loss_row = gen.functional(top, loss_op)
    see_row = gen.functional(top, ops.sigma_ee)

    mats, n_state = _assemble(gen, top, loss_row, flux_rows, coincidence)
    const = mats.pop("1")
    keys = list(mats)
    stacked = sp.vstack([mats[k] for k in keys], format="csr") if keys else None
    n_y = n_state + 4

    def rhs(t, y):
        out = const @ y
        if stacked is not None:
            c = _coefficients(alpha, beta, t)
            parts = (stacked @ y).reshape(len(keys), n_y)
            out += np.array([c[k] for k in keys]) @ parts
        return out

    x0 = np.zeros(shape + (D, D), dtype=complex)
    for m in range(na + 1):
        for p in range(nb + 1):
            x0[m, m, p, p] = rho_sys
    y0 = np.zeros(n_state + 4, dtype=complex)
    y0[:n_block] = x0.reshape(-1)

    times = grid.times
    n_out = times.size
    flux_a = np.empty(n_out)
    flux_b = np.empty(n_out)
    loss_flux = np.empty(n_out)
    sigma_ee = np.empty(n_out)
    trace = np.empty(n_out)
    herm = np.empty(n_out)
    rho_store = np.empty((n_out, D, D), dtype=complex) if store_rho else None
    pending_snaps = sorted(float(s) for s in snapshot_times)
    snapshots = {}

    def block0(y):
        return y[:n_block].reshape(shape + (D, D))

    def record(k, t, y):
        x = y[:n_block]
        c = _coefficients(alpha, beta, t)
        flux_a[k] = sum((c[key] * (row @ x)).real for key, row in flux_rows["a"].items())
        flux_b[k] = sum((c[key] * (row @ x)).real for key, row in flux_rows["b"].items())
        loss_flux[k] = (loss_row @ x).real
        sigma_ee[k] = (see_row @ x).real
        tr = trace_top @ x
        trace[k] = tr.real
        comps = block0(y)
        herm[k] = _hermiticity_error(comps)
        if rho_store is not None:
            rho_store[k] = comps[top]
        if abs(tr - 1.0) > 10 * TRACE_TOLERANCE:
            raise NumericalFailure(
                f"hierarchy trace invariant violated at t = {t:.6g} (component {top}): "
                f"|tr - 1| = {abs(tr - 1):.3g}"
            )
        if herm[k] > 10 * HERMITICITY_TOLERANCE:
            raise NumericalFailure(
                f"hierarchy hermiticity invariant violated at t = {t:.6g} "
                f"(component {_worst_component(comps)}): error {herm[k]:.3g}"
            )

    solver = DOP853(rhs, grid.t_start, y0, grid.t_end, rtol=rtol, atol=atol)
    record(0, times[0], y0)
    k = 1
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise NumericalFailure(f"hierarchy integration failed near t = {solver.t:.6g}: {msg}")
        dense = None
        while k < n_out and times[k] <= solver.t:
            dense = dense or solver.dense_output()
            record(k, times[k], dense(times[k]))
            k += 1
        while pending_snaps and pending_snaps[0] <= solver.t:
            dense = dense or solver.dense_output()
            ts = pending_snaps.pop(0)
            snapshots[ts] = HierarchyTensor(block0(dense(ts)).copy(), photons, ops.basis)
    if k < n_out:
        record(n_out - 1, times[-1], solver.y)
    acc = solver.y[-4:].real
    return HierarchyResult(
        params=params,
        n_max=n_max,
        photons=photons,
        times=times,
        flux_a=flux_a,
        flux_b=flux_b,
        loss_flux=loss_flux,
        sigma_ee=sigma_ee,
        trace=trace,
        hermiticity_error=herm,
        photons_a=float(acc[0]),
        photons_b=float(acc[1]),
        photons_lost=float(acc[2]),
        coincidence=float(acc[3]) if coincidence else None,
        final=HierarchyTensor(block0(solver.y).copy(), photons, ops.basis),
        snapshots=snapshots,
        rho_physical=rho_store,
    )


def output_flux(result: HierarchyResult, port: str) -> np.ndarray:
    """Sampled mean photon flux <z_out^dag z_out>(t) for port 'a' or 'b'."""
    if port == "a":
        return result.flux_a
    if port == "b":
        return result.flux_b
    raise InvalidParameterError(f"port must be 'a' or 'b', got {port!r}")


def biphoton_coincidence(
    params: SystemParams,
    pulse_a: Envelope,
    pulse_b: Envelope,
    grid: TimeGrid | None = None,
    atom_init="g1",
    **kwargs,
) -> float:
    """Probability that exactly one photon leaves each port for a |1,1> input."""
    if pulse_a is None or pulse_b is None:
        raise InvalidParameterError("the coincidence needs one photon in each port")
    res = integrate_hierarchy(params, pulse_a, pulse_b, atom_init, grid, coincidence=True, **kwargs)
    return res.coincidence
