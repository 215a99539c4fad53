"""Run configuration (TOML) and the CSV / JSON output formats."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .diagnostics import TIMESERIES_COLUMNS
from .entropy import ModelParams, RegularizationParams, rho_field
from .grid import Field, Grid
from .quasistatic import QsConfig
from .solver import InitialConditionSpec, SolverConfig, initial_condition

SIG_DIGITS = 15


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    record_every: float | None = None
    emit_snapshots: bool = True


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple = (1e-2, 3e-3, 1e-3)
    window: tuple | None = None
    fraction: float = 0.7
    max_workers: int | None = None


@dataclass(frozen=True)
class QuasistaticConfig:
    """Droplets default to the ones described by ``[initial]``."""

    t_end: float = 1.0
    dt_init: float = 1e-6
    dt_max: float = 1e-2
    merge_gap: float | None = None
    record_every: float | None = None
    max_rel_change: float = 0.004
    a: tuple | None = None
    b: tuple | None = None
    gammas: tuple | None = None
    total_mass: float | None = None

    def qs_config(self) -> QsConfig:
        return QsConfig(self.t_end, self.dt_init, self.dt_max, self.merge_gap, self.record_every,
                        self.max_rel_change)


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=lambda: ModelParams(1e-2, 2.0))
    grid: Grid = field(default_factory=lambda: Grid(0.0, 1.0, 512))
    solver: SolverConfig = None
    initial: InitialConditionSpec = field(
        default_factory=lambda: InitialConditionSpec("parabola", {"a": 0.4, "b": 0.6, "mass": 1.0}))
    outputs: OutputConfig = field(default_factory=OutputConfig)
    quasistatic: QuasistaticConfig = field(default_factory=QuasistaticConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.solver is None:
            object.__setattr__(self, "solver", SolverConfig(self.params, 1e-3))

    @property
    def output_dir(self) -> Path:
        return Path(self.outputs.directory)


# -- parsing --------------------------------------------------------------------------

_SOLVER_KEYS = ("t_end", "dt_init", "dt_min", "dt_max", "newton_tol", "newton_max_iter",
                "undershoot_tol", "delta")
_SECTIONS = ("model", "grid", "solver", "initial", "outputs", "quasistatic", "sweep")


def _check_keys(section: str, got: dict, allowed) -> None:
    extra = set(got) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")


def _num(section, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(value)
    return float(value)


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed TOML document; unknown sections or keys are rejected."""
    _check_keys("top level", doc, _SECTIONS)
    try:
        return _build_config(doc)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(str(err)) from err


def _build_config(doc: dict) -> RunConfig:
    model = doc.get("model", {})
    _check_keys("model", model, ("epsilon", "n"))
    params = ModelParams(_num("model", "epsilon", model.get("epsilon", 1e-2)),
                         _num("model", "n", model.get("n", 2.0)))

    g = doc.get("grid", {})
    _check_keys("grid", g, ("x_left", "x_right", "n_cells"))
    grid = Grid(_num("grid", "x_left", g.get("x_left", 0.0)),
                _num("grid", "x_right", g.get("x_right", 1.0)),
                _num("grid", "n_cells", g.get("n_cells", 512), int))

    out = doc.get("outputs", {})
    _check_keys("outputs", out, [f.name for f in fields(OutputConfig)])
    rec = out.get("record_every")
    emit = out.get("emit_snapshots", True)
    if not isinstance(emit, bool):
        raise ConfigError("[outputs] emit_snapshots must be true or false")
    outputs = OutputConfig(str(out.get("directory", "output")),
                           None if rec is None else _num("outputs", "record_every", rec), emit)

    s = doc.get("solver", {})
    _check_keys("solver", s, _SOLVER_KEYS)
    kw = {}
    for key in _SOLVER_KEYS:
        if key in s:
            kw[key] = _num("solver", key, s[key], int if key == "newton_max_iter" else float)
    delta = kw.pop("delta", None)
    t_end = kw.pop("t_end", 1e-3)
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    solver = SolverConfig(params, t_end, None if delta is None else RegularizationParams(delta),
                          record_every=outputs.record_every, **kw)

    ini = dict(doc.get("initial", {}))
    kind = ini.pop("kind", "parabola")
    floor = _num("initial", "precursor_floor", ini.pop("precursor_floor", 0.0))
    if kind == "parabola" and not ini:
        ini = {"a": 0.4, "b": 0.6, "mass": 1.0}
    if kind == "table" and "values" in ini:
        ini["values"] = [_num("initial", "values", v) for v in ini["values"]]
    else:
        ini = {k: (v if k == "wall" else _num("initial", k, v)) for k, v in ini.items()}
    initial = InitialConditionSpec(kind, ini, floor)
    initial_condition(initial, grid)

    q = doc.get("quasistatic", {})
    _check_keys("quasistatic", q, [f.name for f in fields(QuasistaticConfig)])
    qkw = {}
    for key, val in q.items():
        if key in ("a", "b", "gammas"):
            qkw[key] = tuple(_num("quasistatic", key, v) for v in val)
        else:
            qkw[key] = _num("quasistatic", key, val)
    quasi = QuasistaticConfig(**qkw)
    quasi.qs_config()

    sw = doc.get("sweep", {})
    _check_keys("sweep", sw, [f.name for f in fields(SweepConfig)])
    skw = {}
    if "epsilons" in sw:
        skw["epsilons"] = tuple(_num("sweep", "epsilons", e) for e in sw["epsilons"])
        for e in skw["epsilons"]:
            ModelParams(e, params.n)
    if "window" in sw:
        win = tuple(_num("sweep", "window", w) for w in sw["window"])
        if len(win) != 2 or not win[0] <= win[1]:
            raise ConfigError("[sweep] window must be [t_lo, t_hi] with t_lo <= t_hi")
        skw["window"] = win
    if "fraction" in sw:
        skw["fraction"] = _num("sweep", "fraction", sw["fraction"])
        if not 0 < skw["fraction"] <= 1:
            raise ConfigError("fraction must lie in (0,1]")
    if "max_workers" in sw:
        skw["max_workers"] = _num("sweep", "max_workers", sw["max_workers"], int)
    sweep = SweepConfig(**skw)

    return RunConfig(params, grid, solver, initial, outputs, quasi, sweep)


def parse_config(path) -> RunConfig:
    """Read and validate a TOML run configuration.

    Raises :class:`ConfigError` with the file name, and the line for syntax
    errors, or with the violated invariant.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror or err}") from err
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from err
    try:
        return config_from_dict(doc)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from err


def config_to_dict(cfg: RunConfig) -> dict:
    """Full document with every default spelled out (``None`` values omitted)."""
    s = cfg.solver
    solver = {"t_end": s.t_end, "dt_init": s.dt_init, "dt_min": s.dt_min, "dt_max": s.dt_max,
              "newton_tol": s.newton_tol, "newton_max_iter": s.newton_max_iter,
              "undershoot_tol": s.undershoot_tol}
    if s.reg is not None:
        solver["delta"] = s.reg.delta
    initial = {"kind": cfg.initial.kind, "precursor_floor": cfg.initial.precursor_floor}
    initial.update({k: (list(v) if isinstance(v, (list, tuple, np.ndarray)) else v)
                    for k, v in cfg.initial.params.items()})
    doc = {
        "model": {"epsilon": cfg.params.epsilon, "n": cfg.params.n},
        "grid": asdict(cfg.grid),
        "solver": solver,
        "initial": initial,
        "outputs": asdict(cfg.outputs),
        "quasistatic": asdict(cfg.quasistatic),
        "sweep": asdict(cfg.sweep),
    }
    for section in doc.values():
        for key in [k for k, v in section.items() if v is None]:
            del section[key]
        for key, v in section.items():
            if isinstance(v, tuple):
                section[key] = list(v)
    return doc


def write_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.write_bytes(tomli_w.dumps(config_to_dict(cfg)).encode())
    return path


# -- output files -----------------------------------------------------------------


def fmt(x) -> str:
    """15 significant digits; integers verbatim."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def _open(path, mode="w"):
    path = Path(path)
    try:
        return path.open(mode, newline="")
    except OSError as err:
        raise OSError(f"cannot open {path}: {err.strerror or err}") from err


def write_timeseries(records, path) -> Path:
    """One row per :class:`DiagnosticsRecord`, columns ``TIMESERIES_COLUMNS``."""
    with _open(path) as fh:
        fh.write(",".join(TIMESERIES_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join(fmt(v) for v in r.row()) + "\n")
    return Path(path)


def read_csv_columns(path) -> dict:
    """Numeric columns of a CSV with a header row (``#`` lines skipped)."""
    with _open(path, "r") as fh:
        rows = [row for row in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, data = rows[0], rows[1:]
    cols = {name: np.array([float(r[k]) for r in data]) for k, name in enumerate(header)}
    return cols


def write_snapshot(u: Field, t: float, params: ModelParams, path, undershoot_tol=1e-10) -> Path:
    """Header ``# t=... epsilon=... n=...`` then rows ``x,u,rho``."""
    rho = rho_field(u, params, undershoot_tol).values
    x = u.grid.centers
    with _open(path) as fh:
        fh.write(f"# t={fmt(t)} epsilon={fmt(params.epsilon)} n={fmt(params.n)}\n")
        fh.write("x,u,rho\n")
        for xi, ui, ri in zip(x, u.values, rho):
            fh.write(f"{fmt(xi)},{fmt(ui)},{fmt(ri)}\n")
    return Path(path)


def read_snapshot(path):
    """Returns ``(t, epsilon, n, x, u, rho)``."""
    with _open(path, "r") as fh:
        head = fh.readline()
    if not head.startswith("#"):
        raise ValueError(f"{path}: missing snapshot header")
    meta = dict(item.split("=", 1) for item in head[1:].split())
    cols = read_csv_columns(path)
    return (float(meta["t"]), float(meta["epsilon"]), float(meta["n"]), cols["x"], cols["u"],
            cols["rho"])


def write_qs_trajectory(traj, path) -> Path:
    """Columns ``t, a_1, b_1, gamma_1, ..., total_support``; intervals that no
    longer exist after a merge are written as ``nan``."""
    k = max((d.n_droplets for d in traj.states), default=0)
    cols = ["t"] + [f"{c}_{i}" for i in range(1, k + 1) for c in ("a", "b", "gamma")]
    cols.append("total_support")
    with _open(path) as fh:
        fh.write(f"# intervals={k}\n")
        fh.write(",".join(cols) + "\n")
        for t, d in traj:
            vals = [t]
            for i in range(k):
                if i < d.n_droplets:
                    vals += [d.a[i], d.b[i], d.gammas[i]]
                else:
                    vals += [np.nan] * 3
            vals.append(d.total_support)
            fh.write(",".join(fmt(v) for v in vals) + "\n")
    return Path(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(doc: dict, path) -> Path:
    with _open(path) as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Path(path)


def with_output_dir(cfg: RunConfig, directory) -> RunConfig:
    return replace(cfg, outputs=replace(cfg.outputs, directory=str(directory)))
