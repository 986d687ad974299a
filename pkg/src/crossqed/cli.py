"""Command-line front end: figure tables, truth tables and oracle runs.

    crossqed <response|fig2|fig3|fredkin|compare-dk|oracle> --config run.json
             [--out table.csv] [--json] [--workers N] [--set key=value ...]

The config is a flat JSON object; ``--set`` overrides single fields (values
are parsed as JSON, falling back to plain strings).  Rates are in units of
kappa.  CSV output starts with a ``# config:`` comment holding the fully
resolved config, and numbers are written with 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import analytic
from .core import (
    ConfigurationError,
    ConvergenceError,
    CrossQEDError,
    InitialState,
    InvalidParameterError,
    NumericalFailure,
    PulseShape,
    SystemParams,
    TimeGrid,
    UnsupportedConfigurationError,
    settle_time,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CONVERGENCE = 4

COMMANDS = ("response", "fig2", "fig3", "fredkin", "compare-dk", "oracle")

# sweep axis each command accepts, with its default range
SWEEP_DEFAULTS = {
    "response": ("omega", -5.0, 5.0, 201, "linear"),
    "fig2": ("g", 0.01, 10.0, 30, "log"),
    "fig3": ("C", 0.1, 100.0, 16, "log"),
    "compare-dk": ("C", 0.3, 100.0, 30, "log"),
}


@dataclass
class RunConfig:
    # system: give either cooperativity or g (g_a; g_b defaults to -g_a)
    cooperativity: float | None = None
    g_a: float | None = None
    g_b: float | None = None
    kappa: float = 1.0
    gamma: float = 0.2
    gamma_1: float | None = None
    gamma_2: float | None = None
    atom: str = "g1"
    # pulse
    tau_p: float | None = 40.0
    eta: float | None = None
    t0: float | None = None
    # grid
    n_steps: int = 4000
    # solvers
    biphoton_backend: str = "timebin"
    cross_check: bool = False
    timebin_dt: float = 0.02
    semiclassical_amplitude: float = 1.0
    panels: str = "ab"
    # sweep
    sweep_axis: str | None = None
    sweep_min: float | None = None
    sweep_max: float | None = None
    sweep_points: int | None = None
    sweep_scale: str | None = None
    # command specific lists
    gammas: list = field(default_factory=lambda: [0.02, 20.0])
    inset_cooperativity: float = 10.0
    inset_ratios: list = field(default_factory=lambda: [0.5, 0.7, 0.9, 1.0, 1.1, 1.4, 2.0])
    fredkin_cooperativities: list = field(default_factory=lambda: [5.0, 20.0])
    photons: str = "b"  # oracle input: 'a', 'b' or 'ab'
    oracle_M: int | None = None
    oracle_tol: float = 1e-3

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.cooperativity is not None and self.g_a is not None:
            raise ConfigurationError("give either 'cooperativity' or 'g_a', not both")
        if self.tau_p is not None and self.eta is not None:
            raise ConfigurationError("give either 'tau_p' or 'eta', not both")
        if self.tau_p is None and self.eta is None:
            raise ConfigurationError("a pulse width ('tau_p' or 'eta') is required")
        if self.biphoton_backend not in ("timebin", "hierarchy"):
            raise ConfigurationError("biphoton_backend must be 'timebin' or 'hierarchy'")
        if self.photons not in ("a", "b", "ab"):
            raise ConfigurationError("photons must be 'a', 'b' or 'ab'")
        if self.panels not in ("a", "b", "ab"):
            raise ConfigurationError("panels must be 'a', 'b' or 'ab'")
        if self.sweep_scale not in (None, "linear", "log"):
            raise ConfigurationError("sweep_scale must be 'linear' or 'log'")
        if self.n_steps < 10:
            raise ConfigurationError("n_steps must be at least 10")

    def params(self, **override) -> SystemParams:
        data = {
            "cooperativity": self.cooperativity,
            "g_a": self.g_a,
            "g_b": self.g_b,
            "gamma": self.gamma,
        }
        data.update(override)
        g1 = self.gamma_1 if self.gamma_1 is not None else data["gamma"] / 2
        g2 = self.gamma_2 if self.gamma_2 is not None else data["gamma"] - g1
        if data.get("cooperativity") is not None:
            if not (math.isfinite(data["cooperativity"]) and data["cooperativity"] >= 0):
                raise InvalidParameterError("cooperativity must be finite and non-negative")
            gtot = g1 + g2
            if gtot < 0:
                raise InvalidParameterError("atomic decay rates must be non-negative")
            g = math.sqrt(2.0 * self.kappa * gtot * data["cooperativity"])
            return SystemParams(g_a=g, g_b=-g, kappa_a=self.kappa, kappa_b=self.kappa, gamma_1=g1, gamma_2=g2)
        if data.get("g_a") is None:
            raise ConfigurationError("a coupling ('g_a') or 'cooperativity' is required for this command")
        return SystemParams(
            g_a=data["g_a"], g_b=data.get("g_b"), kappa_a=self.kappa, kappa_b=self.kappa, gamma_1=g1, gamma_2=g2
        )

    def pulse(self) -> PulseShape:
        if self.eta is not None:
            return PulseShape(t0=self.t0 if self.t0 is not None else 5.0 * self.eta, eta=self.eta)
        return PulseShape.from_duration(self.tau_p, t0=self.t0)

    def grid(self, params: SystemParams) -> TimeGrid:
        return TimeGrid.default(self.pulse(), n_steps=self.n_steps, settle=settle_time(params))

    def sweep(self, command: str) -> tuple[str, np.ndarray]:
        if command not in SWEEP_DEFAULTS:
            if self.sweep_axis is not None:
                raise ConfigurationError(f"'{command}' does not take a sweep axis")
            return "", np.array([])
        axis, lo, hi, n, scale = SWEEP_DEFAULTS[command]
        if self.sweep_axis is not None and self.sweep_axis != axis:
            raise ConfigurationError(f"'{command}' sweeps '{axis}', not '{self.sweep_axis}'")
        lo = self.sweep_min if self.sweep_min is not None else lo
        hi = self.sweep_max if self.sweep_max is not None else hi
        n = self.sweep_points if self.sweep_points is not None else n
        scale = self.sweep_scale or scale
        if n < 1:
            raise ConfigurationError("sweep_points must be >= 1")
        if scale == "log":
            if lo <= 0 or hi <= 0:
                raise ConfigurationError("log sweeps need positive bounds")
            values = np.geomspace(lo, hi, n)
        else:
            values = np.linspace(lo, hi, n)
        return axis, values

    def resolved(self, command: str) -> dict:
        out = asdict(self)
        axis, values = self.sweep(command)
        if axis:
            out.update(
                sweep_axis=axis,
                sweep_min=float(values[0]),
                sweep_max=float(values[-1]),
                sweep_points=int(values.size),
                sweep_scale=self.sweep_scale or SWEEP_DEFAULTS[command][4],
            )
        return out


# ---------------------------------------------------------------------------
# table points (module level so that worker processes can pickle them)


def _response_point(cfg: RunConfig, omega: float) -> list[dict]:
    params = cfg.params()
    rows = []
    for level in ("g1", "g2"):
        sc = analytic.scattering_coefficients(params, omega, level)
        rows.append(
            {
                "omega": omega,
                "atom": level,
                "r2": abs(sc.r) ** 2,
                "t2": abs(sc.t) ** 2,
                "arg_r": math.atan2(sc.r.imag, sc.r.real) if abs(sc.r) > 1e-12 else 0.0,
                "arg_t": math.atan2(sc.t.imag, sc.t.real) if abs(sc.t) > 1e-12 else 0.0,
            }
        )
    return rows


def _fig2_point(cfg: RunConfig, g: float) -> list[dict]:
    from .semiclassical import biphoton_product, integrate_semiclassical
    from .single_excitation import integrate_single_excitation

    params = cfg.params(g_a=g, g_b=None, cooperativity=None)
    C = params.cooperativity
    pulse = cfg.pulse()
    grid = cfg.grid(params)
    amp = cfg.semiclassical_amplitude
    row = {"g": g, "C": C}
    if "a" in cfg.panels:
        semi = integrate_semiclassical(params, None, pulse, "g1", grid, amplitude_b=amp)
        exact = integrate_single_excitation(params, InitialState(1.0, 0.0, 0.0, 1.0), pulse, pulse, grid)
        row["swap_analytic"] = analytic.swap_probability(C)
        row["swap_semiclassical"] = semi.output_energy_a / amp**2
        row["swap_exact"] = float(exact.alpha_out_energy[0])
    if "b" in cfg.panels:
        # drives in quadrature, see semiclassical.biphoton_product
        row["biphoton_analytic"] = analytic.biphoton_survival_probability(C)
        row["biphoton_semiclassical"] = biphoton_product(params, pulse, grid, amp)
        row["biphoton_exact"] = _biphoton(cfg, params, pulse, grid)
    return [row]


def _biphoton(cfg: RunConfig, params, pulse, grid) -> float:
    if cfg.biphoton_backend == "timebin":
        from .timebin import simulate_timebin

        return simulate_timebin(params, pulse, pulse, "g1", dt=cfg.timebin_dt).one_each
    from .hierarchy import biphoton_coincidence

    return biphoton_coincidence(params, pulse, pulse, grid)


def _fig3_point(cfg: RunConfig, gamma: float, C: float) -> list[dict]:
    from .gates import evaluate_cnot_atom_control, evaluate_cnot_light_control

    params = cfg.params(cooperativity=C, gamma=gamma)
    pulse = cfg.pulse()
    grid = cfg.grid(params)
    atom = evaluate_cnot_atom_control(params, pulse, grid).min_success
    light = evaluate_cnot_light_control(params, pulse, grid).min_success
    return [{"series": "main", "gamma": gamma, "C": C, "ratio": 1.0, "atom_control": atom, "light_control": light}]


def _fig3_inset_point(cfg: RunConfig, gamma: float, ratio: float) -> list[dict]:
    from .gates import asymmetry_sweep

    params = cfg.params(cooperativity=cfg.inset_cooperativity, gamma=gamma)
    pulse = cfg.pulse()
    (pt,) = asymmetry_sweep(params, [ratio], pulse, cfg.grid(params))
    return [
        {
            "series": "inset",
            "gamma": gamma,
            "C": cfg.inset_cooperativity,
            "ratio": ratio,
            "atom_control": float("nan"),
            "light_control": pt.success,
        }
    ]


def _fredkin_point(cfg: RunConfig, C: float) -> list[dict]:
    from .gates import evaluate_fredkin

    params = cfg.params(cooperativity=C)
    pulse = cfg.pulse()
    table = evaluate_fredkin(
        params, pulse, cfg.grid(params), biphoton_backend=cfg.biphoton_backend, cross_check=cfg.cross_check
    )
    rows = []
    for r in table.rows:
        rows.append(
            {
                "C": C,
                "input": r.input,
                "ideal": r.ideal,
                "success": r.success,
                "loss": r.loss,
                "wrong_port": r.wrong_port,
                "method": r.method,
                "cross_check": r.details.get("cross_check", float("nan")),
            }
        )
    return rows


def _dk_point(cfg: RunConfig, C: float) -> list[dict]:
    ours = analytic.cross_failure_probability(C)
    dk = analytic.dk_failure_probability(C)
    return [
        {
            "C": C,
            "P_F": ours.probability,
            "P_F_DK": dk.probability,
            "ratio": ours.probability / dk.probability if dk.probability > 0 else float("nan"),
            "pi_phase": int(ours.pi_phase),
            "pi_phase_DK": int(dk.pi_phase),
        }
    ]


def _oracle_rows(cfg: RunConfig) -> list[dict]:
    from .timebin import convergence_report, default_horizon, simulate_timebin

    params = cfg.params()
    pulse = cfg.pulse()
    pa = pulse if "a" in cfg.photons else None
    pb = pulse if "b" in cfg.photons else None
    t_start, T = default_horizon(params, pulse)
    M = cfg.oracle_M or int(math.ceil(T / cfg.timebin_dt))
    results = [simulate_timebin(params, pa, pb, cfg.atom, m, T, t_start=t_start) for m in (M, 2 * M, 4 * M)]
    keys = list(results[-1].summary())
    keys.remove("residual")
    rows = []
    for r in results:
        row = {"M": r.M, "dt": r.dt}
        row.update({k: getattr(r, k) for k in keys})
        row["residual"] = r.residual
        rows.append(row)
    extrap = {"M": float("inf"), "dt": 0.0}
    worst = 0.0
    for k in keys:
        rep = convergence_report(results, k)
        extrap[k] = rep.extrapolated
        if rep.monotone:
            worst = max(worst, rep.error_estimate)
        elif abs(rep.values[2] - rep.values[1]) > cfg.oracle_tol:
            raise ConvergenceError(f"time-bin outcome {k} does not converge: {rep.values}")
    extrap["residual"] = float("nan")
    rows.append(extrap)
    if worst > cfg.oracle_tol:
        raise ConvergenceError(
            f"time-bin discretization error {worst:.3g} exceeds oracle_tol = {cfg.oracle_tol:g}; lower timebin_dt"
        )
    return rows


# ---------------------------------------------------------------------------
# driver


def _map(func, arg_lists, workers: int) -> list:
    if workers <= 1 or len(arg_lists) <= 1:
        return [func(*a) for a in arg_lists]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, *zip(*arg_lists)))


def build_table(command: str, cfg: RunConfig, workers: int = 1) -> list[dict]:
    """Rows of the table for ``command``, in sweep order."""
    axis, values = cfg.sweep(command)
    if command == "response":
        chunks = _map(_response_point, [(cfg, float(w)) for w in values], workers)
    elif command == "fig2":
        chunks = _map(_fig2_point, [(cfg, float(g)) for g in values], workers)
    elif command == "fig3":
        jobs = [(cfg, float(gm), float(C)) for gm in cfg.gammas for C in values]
        chunks = _map(_fig3_point, jobs, workers)
        inset = [(cfg, float(gm), float(r)) for gm in cfg.gammas for r in cfg.inset_ratios]
        chunks += _map(_fig3_inset_point, inset, workers)
    elif command == "fredkin":
        chunks = _map(_fredkin_point, [(cfg, float(C)) for C in cfg.fredkin_cooperativities], workers)
    elif command == "compare-dk":
        chunks = _map(_dk_point, [(cfg, float(C)) for C in values], workers)
    elif command == "oracle":
        chunks = [_oracle_rows(cfg)]
    else:
        raise ConfigurationError(f"unknown command {command!r}")
    return [row for chunk in chunks for row in chunk]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12g" % float(value)
    return str(value)


def render_csv(rows: list[dict], resolved: dict) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(resolved, sort_keys=True) + "\n")
    if rows:
        cols = list(rows[0])
        for r in rows[1:]:
            cols += [k for k in r if k not in cols]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


def render_json(rows: list[dict]) -> str:
    def clean(v):
        if isinstance(v, (np.floating, float)):
            v = float(v)
            return v if math.isfinite(v) else None
        if isinstance(v, np.integer):
            return int(v)
        return v

    return json.dumps([{k: clean(v) for k, v in r.items()} for r in rows], indent=1) + "\n"


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
    data.update(overrides)
    try:
        return RunConfig.from_mapping(data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossqed",
        description="Photon scattering and gate tables for a crossed-cavity atom system (kappa = 1).",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat JSON run configuration")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--json", action="store_true", help="emit an array of JSON records instead of CSV")
    parser.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _parse_set(args.set))
        workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
        if workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        rows = build_table(args.command, cfg, workers)
        text = render_json(rows) if args.json else render_csv(rows, cfg.resolved(args.command))
    except ConvergenceError as exc:
        print(f"crossqed: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except NumericalFailure as exc:
        print(f"crossqed: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, InvalidParameterError, UnsupportedConfigurationError) as exc:
        print(f"crossqed: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CrossQEDError as exc:  # pragma: no cover - every subclass is handled above
        print(f"crossqed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
