"""Gate truth tables assembled from the scattering solvers.

Encodings
---------
* atom control: |g1> is the control 1, |g2> the control 0;
* single-port photon target: photon in port a is 1, in port b is 0;
* Fredkin targets: photon present in port a / port b;
* light control: dark photon (a + b)/sqrt2 is 0, bright (a - b)/sqrt2 is 1, with
  atomic targets 0 = (|g2> + |g1>)/sqrt2 and 1 = (|g2> - |g1>)/sqrt2.

Rows are scored by outcome probabilities that ignore envelope distortion:
the ideal port occupation for basis-state rows, and the ideal atomic state
with the photon in the right collective mode for light-controlled rows.
Where the output is a single photon, ``fidelity`` also reports the
mode-matched overlap with the ideal output, using the empty-cavity
reflection as the reference envelope.
"""

from __future__ import annotations

import math
from functools import lru_cache
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (
    ConfigurationError,
    InitialState,
    InvalidParameterError,
    PulseShape,
    SystemParams,
    TimeGrid,
    settle_time,
)
from .single_excitation import (
    empty_cavity_output,
    integrate_single_excitation,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
BIPHOTON_BACKENDS = ("timebin", "hierarchy")

GATE_KINDS = ("cnot_atom_control", "cnot_light_control", "fredkin")

# atomic amplitudes (lambda_1, lambda_2) of the light-control targets
ATOM_TARGETS = {
    "0": (INV_SQRT2, INV_SQRT2),  # (|g2> + |g1>)/sqrt2
    "1": (-INV_SQRT2, INV_SQRT2),  # (|g2> - |g1>)/sqrt2
}
PHOTON_MODES = {
    "D": (INV_SQRT2, INV_SQRT2),
    "B": (INV_SQRT2, -INV_SQRT2),
}


@dataclass(frozen=True)
class GateSpec:
    kind: str
    rows: tuple[tuple[str, str], ...]  # (input label, ideal output label)

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise InvalidParameterError(f"unknown gate kind {self.kind!r}")
        inputs = [r[0] for r in self.rows]
        outputs = [r[1] for r in self.rows]
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise InvalidParameterError("gate encoding must be a bijection on its basis labels")

    @classmethod
    def for_kind(cls, kind: str) -> "GateSpec":
        if kind == "cnot_atom_control":
            rows = (("g2,0", "g2,0"), ("g2,1", "g2,1"), ("g1,0", "g1,1"), ("g1,1", "g1,0"))
        elif kind == "cnot_light_control":
            rows = (("D,0", "D,0"), ("D,1", "D,1"), ("B,0", "B,1"), ("B,1", "B,0"))
        elif kind == "fredkin":
            rows = tuple(
                (f"{c},{t}", f"{c},{t[::-1] if c == 'g1' else t}")
                for c in ("g2", "g1")
                for t in ("00", "01", "10", "11")
            )
        else:
            raise InvalidParameterError(f"unknown gate kind {kind!r}")
        return cls(kind, rows)


@dataclass(frozen=True)
class RowResult:
    input: str
    ideal: str
    success: float
    loss: float
    wrong_port: float
    fidelity: float | None = None
    method: str = ""
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TruthTableResult:
    spec: GateSpec
    rows: tuple[RowResult, ...]
    params: SystemParams

    @property
    def min_success(self) -> float:
        return min(r.success for r in self.rows)

    def row(self, label: str) -> RowResult:
        for r in self.rows:
            if r.input == label:
                return r
        raise KeyError(label)

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            d = asdict(r)
            d.pop("details")
            out.append(d)
        return out


def default_grid(params: SystemParams, pulse: PulseShape, n_steps: int = 4000) -> TimeGrid:
    """Pulse support plus enough time for the slowest system mode to empty."""
    return TimeGrid.default(pulse, n_steps=n_steps, settle=settle_time(params))


def _run(jobs, workers: int | None):
    """Evaluate (func, args) jobs, in order; processes when workers > 1."""
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [f(*a) for f, a in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(f, *a) for f, a in jobs]
        return [fu.result() for fu in futures]


@lru_cache(maxsize=32)
def _cached_reference(pulse, grid, kappa):
    out = empty_cavity_output(pulse, grid, kappa)
    out.setflags(write=False)
    return out


def _reference(pulse, grid, kappa) -> np.ndarray:
    """Empty-cavity reflection of ``pulse``, the ideal output envelope."""
    try:
        return _cached_reference(pulse, grid, kappa)
    except TypeError:  # unhashable envelope (sampled arrays)
        return empty_cavity_output(pulse, grid, kappa)


def _overlap(ref: np.ndarray, out: np.ndarray, times: np.ndarray) -> complex:
    return complex(np.trapezoid(np.conj(ref) * out, times))


# ---------------------------------------------------------------------------
# single-photon rows


def _port_row(params, pulse, grid, level: str, port_in: str, port_ideal: str, label: str, ideal: str) -> RowResult:
    lam = (1.0, 0.0) if level == "g1" else (0.0, 1.0)
    mu = (1.0, 0.0) if port_in == "a" else (0.0, 1.0)
    init = InitialState(lam[0], lam[1], mu[0], mu[1])
    res = integrate_single_excitation(params, init, pulse, pulse, grid)
    e_a = float(res.alpha_out_energy.sum())
    e_b = float(res.beta_out_energy.sum())
    good, bad = (e_a, e_b) if port_ideal == "a" else (e_b, e_a)
    l = 0 if level == "g1" else 1
    ref = _reference(pulse, grid, params.kappa_a if port_ideal == "a" else params.kappa_b)
    out = res.alpha_out[l] if port_ideal == "a" else res.beta_out[l]
    fid = abs(_overlap(ref, out, res.times)) ** 2
    return RowResult(label, ideal, good, 1.0 - e_a - e_b, bad, fid, "single_excitation")


def evaluate_cnot_atom_control(
    params: SystemParams, pulse: PulseShape, grid: TimeGrid | None = None, *, workers: int | None = None
) -> TruthTableResult:
    """Atom-controlled CNOT on the port qubit (1 = photon in a, 0 = in b)."""
    spec = GateSpec.for_kind("cnot_atom_control")
    grid = grid or default_grid(params, pulse)
    port = {"1": "a", "0": "b"}
    jobs = []
    for label, ideal in spec.rows:
        level, t_in = label.split(",")
        t_out = ideal.split(",")[1]
        jobs.append((_port_row, (params, pulse, grid, level, port[t_in], port[t_out], label, ideal)))
    return TruthTableResult(spec, tuple(_run(jobs, workers)), params)


def _light_row(params, pulse, grid, control: str, target: str, label: str, ideal: str) -> RowResult:
    lam = ATOM_TARGETS[target]
    mu = PHOTON_MODES[control]
    init = InitialState(lam[0], lam[1], mu[0], mu[1])
    res = integrate_single_excitation(params, init, pulse, pulse, grid)
    ideal_target = ideal.split(",")[1]
    lam_out = np.array(ATOM_TARGETS[ideal_target], dtype=complex)
    ref_a = _reference(pulse, grid, params.kappa_a)
    ref_b = _reference(pulse, grid, params.kappa_b)
    amp = 0j
    # ideal atomic state and collective mode, at every output time
    proj = np.zeros_like(res.alpha_out[0])
    for l in range(2):
        amp += np.conj(lam_out[l]) * (
            np.conj(mu[0]) * _overlap(ref_a, res.alpha_out[l], res.times)
            + np.conj(mu[1]) * _overlap(ref_b, res.beta_out[l], res.times)
        )
        proj += np.conj(lam_out[l]) * (np.conj(mu[0]) * res.alpha_out[l] + np.conj(mu[1]) * res.beta_out[l])
    fid = abs(amp) ** 2
    success = float(np.trapezoid(np.abs(proj) ** 2, res.times))
    energy = res.output_energy
    # photon leaving in the orthogonal collective mode
    other = PHOTON_MODES["B" if control == "D" else "D"]
    wrong = 0.0
    for l in range(2):
        c_a, c_b = res.alpha_out[l], res.beta_out[l]
        w = np.conj(other[0]) * c_a + np.conj(other[1]) * c_b
        wrong += float(np.trapezoid(np.abs(w) ** 2, res.times))
    return RowResult(label, ideal, success, 1.0 - energy, wrong, fid, "single_excitation")


def evaluate_cnot_light_control(
    params: SystemParams, pulse: PulseShape, grid: TimeGrid | None = None, *, workers: int | None = None
) -> TruthTableResult:
    """Light-controlled CNOT: dark/bright photon controls the atomic qubit.

    ``success`` is the probability of finding the atom in the ideal target
    state with the photon in the input's collective mode, whatever its
    envelope.  ``fidelity`` is the mode-matched version, |<ideal|out>|^2
    with the empty-cavity reflection of the input as the ideal envelope.
    ``wrong_port`` is the weight found in the orthogonal collective mode.
    """
    spec = GateSpec.for_kind("cnot_light_control")
    grid = grid or default_grid(params, pulse)
    jobs = []
    for label, ideal in spec.rows:
        control, target = label.split(",")
        jobs.append((_light_row, (params, pulse, grid, control, target, label, ideal)))
    return TruthTableResult(spec, tuple(_run(jobs, workers)), params)


# ---------------------------------------------------------------------------
# Fredkin


def _biphoton_row(params, pulse, grid, level, backend, label, ideal, cross_check):
    from .hierarchy import integrate_hierarchy
    from .timebin import simulate_timebin

    details = {}
    if backend == "timebin":
        dist = simulate_timebin(params, pulse, pulse, level)
        success = dist.one_each
        loss = dist.one_lost + dist.both_lost
        wrong = dist.both_a + dist.both_b
        details["residual"] = dist.residual
    else:
        # only mean photon numbers are available: loss is the mean lost
        # fraction, and the bunched share is whatever remains
        res = integrate_hierarchy(params, pulse, pulse, level, grid, coincidence=True)
        success = res.coincidence
        loss = res.photons_lost / 2.0
        wrong = max(0.0, 1.0 - success - loss)
    if cross_check:
        other = "hierarchy" if backend == "timebin" else "timebin"
        if other == "timebin":
            details["cross_check"] = simulate_timebin(params, pulse, pulse, level).one_each
        else:
            details["cross_check"] = integrate_hierarchy(params, pulse, pulse, level, grid, coincidence=True).coincidence
    return RowResult(label, ideal, float(success), float(loss), float(wrong), None, backend, details)


def evaluate_fredkin(
    params: SystemParams,
    pulse: PulseShape,
    grid: TimeGrid | None = None,
    *,
    biphoton_backend: str | None = "timebin",
    cross_check: bool = False,
    workers: int | None = None,
) -> TruthTableResult:
    """Atom-controlled swap of the photonic qubits in ports a and b.

    Targets are photon occupations (n_a n_b).  Two-photon rows use
    ``biphoton_backend`` ('timebin' or 'hierarchy').
    """
    if biphoton_backend not in BIPHOTON_BACKENDS:
        raise ConfigurationError(
            f"Fredkin two-photon rows need a biphoton backend in {BIPHOTON_BACKENDS}; got {biphoton_backend!r}"
        )
    spec = GateSpec.for_kind("fredkin")
    grid = grid or default_grid(params, pulse)
    jobs = []
    for label, ideal in spec.rows:
        level, t = label.split(",")
        t_out = ideal.split(",")[1]
        if t == "00":
            jobs.append((_vacuum_row, (label, ideal)))
        elif t == "11":
            jobs.append((_biphoton_row, (params, pulse, grid, level, biphoton_backend, label, ideal, cross_check)))
        else:
            port_in = "a" if t == "10" else "b"
            port_out = "a" if t_out == "10" else "b"
            jobs.append((_port_row, (params, pulse, grid, level, port_in, port_out, label, ideal)))
    return TruthTableResult(spec, tuple(_run(jobs, workers)), params)


def _vacuum_row(label, ideal) -> RowResult:
    # no photon, nothing scatters
    return RowResult(label, ideal, 1.0, 0.0, 0.0, 1.0, "trivial")


# ---------------------------------------------------------------------------
# coupling asymmetry


def asymmetric_params(params: SystemParams, ratio: float) -> SystemParams:
    """Couplings with |g_a|/|g_b| = ratio at fixed |g_a|^2 + |g_b|^2."""
    if not ratio > 0:
        raise InvalidParameterError("coupling ratio must be positive")
    total = math.sqrt(abs(params.g_a) ** 2 + abs(params.g_b) ** 2)
    norm = math.sqrt(1.0 + ratio * ratio)
    sa = complex(params.g_a) / abs(params.g_a) if params.g_a != 0 else 1.0
    sb = complex(params.g_b) / abs(params.g_b) if params.g_b != 0 else -1.0
    ga = total * ratio / norm * sa
    gb = total / norm * sb
    return replace(params, g_a=ga, g_b=gb)


@dataclass(frozen=True)
class AsymmetryPoint:
    ratio: float
    success: float
    g_a: complex
    g_b: complex


def _asymmetry_point(params, pulse, grid, ratio):
    p = asymmetric_params(params, ratio)
    table = evaluate_cnot_light_control(p, pulse, grid)
    bright = [r.success for r in table.rows if r.input.startswith("B")]
    return AsymmetryPoint(float(ratio), min(bright), p.g_a, p.g_b)


def asymmetry_sweep(
    params: SystemParams,
    ratios,
    pulse: PulseShape,
    grid: TimeGrid | None = None,
    *,
    workers: int | None = None,
) -> list[AsymmetryPoint]:
    """Bright-controlled success versus g_a/|g_b| at fixed total coupling.

    The success per ratio is the worse of the two bright-control rows.
    """
    ratios = [float(r) for r in ratios]
    if any(not r > 0 for r in ratios):
        raise InvalidParameterError("coupling ratios must be positive")
    grid = grid or default_grid(params, pulse)
    jobs = [(_asymmetry_point, (params, pulse, grid, r)) for r in ratios]
    return _run(jobs, workers)
