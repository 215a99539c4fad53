"""Studies that tie the PDE to its sharp-interface limit: power-law fits of
the apparent support, epsilon sweeps checked against the support lower
bounds of the limit model, and a PDE versus quasi-static comparison.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .entropy import ModelParams
from .grid import Grid
from .quasistatic import DropletSet, QsConfig, corollary_bounds, parabola_profile, qs_solve
from .solver import InitialConditionSpec, SolverAbort, SolverConfig, initial_condition, solve

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 8
DEFAULT_FIT_FRACTION = 0.7


@dataclass(frozen=True)
class PowerLaw:
    """Result of a log-log least-squares fit ``size ~ prefactor * t**exponent``."""

    exponent: float
    prefactor: float
    rms: float
    window: tuple
    n_samples: int

    def __call__(self, t):
        return self.prefactor * np.asarray(t, dtype=float) ** self.exponent


def default_window(times, fraction: float = DEFAULT_FIT_FRACTION) -> tuple:
    """The last ``fraction`` of the simulated time span."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0,1]")
    times = np.asarray(times, dtype=float)
    t0, t1 = float(times.min()), float(times.max())
    return (t1 - fraction * (t1 - t0), t1)


def power_law_fit(times, sizes, window=None) -> PowerLaw:
    """Ordinary least squares of ``ln(size)`` against ``ln(t)`` on ``window``.

    Parameters
    ----------
    times, sizes : array_like
        Samples of the same length.
    window : (t_lo, t_hi), optional
        Inclusive time window; defaults to the last 70% of the time span.

    Returns
    -------
    PowerLaw
        Exponent, prefactor and the rms of the log residuals.
    """
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if times.shape != sizes.shape or times.ndim != 1:
        raise ValueError("times and sizes must be 1D arrays of equal length")
    if window is None:
        window = default_window(times)
    t_lo, t_hi = (float(w) for w in window)
    if not t_lo <= t_hi:
        raise ValueError("window must satisfy t_lo <= t_hi")
    sel = (times >= t_lo) & (times <= t_hi)
    t, s = times[sel], sizes[sel]
    if t.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples in the window, got {t.size}")
    if np.any(t <= 0) or np.any(s <= 0):
        raise ValueError("times and sizes in the window must be positive")
    design = np.column_stack([np.log(t), np.ones(t.size)])
    coef, *_ = np.linalg.lstsq(design, np.log(s), rcond=None)
    resid = np.log(s) - design @ coef
    return PowerLaw(float(coef[0]), float(np.exp(coef[1])), float(np.sqrt(np.mean(resid**2))),
                    (t_lo, t_hi), int(t.size))


# -- epsilon sweeps ---------------------------------------------------------------


@dataclass
class SweepEntry:
    epsilon: float
    config: SolverConfig
    times: np.ndarray
    support: np.ndarray
    bound: np.ndarray
    exponent: float = np.nan
    prefactor: float = np.nan
    rms: float = np.nan
    min_margin: float = np.nan
    max_lipschitz_ratio: float = np.nan
    rebd_ok: bool = True
    mass_drift: float = np.nan
    aborted: bool = False
    message: str = ""

    def as_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "epsilon": self.epsilon,
            "config": cfg,
            "times": self.times.tolist(),
            "support": self.support.tolist(),
            "bound": self.bound.tolist(),
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "rms": self.rms,
            "min_margin": self.min_margin,
            "max_lipschitz_ratio": self.max_lipschitz_ratio,
            "rebd_ok": self.rebd_ok,
            "mass_drift": self.mass_drift,
            "aborted": self.aborted,
            "message": self.message,
        }


@dataclass
class SweepReport:
    grid: Grid
    n: float
    initial: InitialConditionSpec
    window: tuple | None
    fraction: float
    entries: list = field(default_factory=list)

    def entry(self, epsilon: float) -> SweepEntry:
        for e in self.entries:
            if e.epsilon == epsilon:
                return e
        raise KeyError(epsilon)

    def as_dict(self) -> dict:
        return {
            "grid": asdict(self.grid),
            "n": self.n,
            "initial": {"kind": self.initial.kind, "params": dict(self.initial.params),
                        "precursor_floor": self.initial.precursor_floor},
            "window": list(self.window) if self.window is not None else None,
            "fraction": self.fraction,
            "entries": [e.as_dict() for e in self.entries],
        }


def _run_entry(args) -> SweepEntry:
    cfg, grid, initial, window, fraction = args
    eps = cfg.params.epsilon
    u0 = initial_condition(initial, grid)
    try:
        traj = solve(u0, cfg)
    except (SolverAbort, ValueError) as err:
        return SweepEntry(eps, cfg, np.array([]), np.array([]), np.array([]), aborted=True,
                          message=str(err))
    recs = traj.records
    times = traj.times
    support = np.array([r.support_measure for r in recs])
    bound, _ = corollary_bounds(times, support[0], grid.length)
    entry = SweepEntry(
        eps, cfg, times, support, np.atleast_1d(bound),
        min_margin=float(np.min(support - bound)),
        max_lipschitz_ratio=float(max(r.lipschitz_ratio for r in recs)),
        rebd_ok=all(r.rebd_ok for r in recs),
        mass_drift=float(max(abs(r.mass - recs[0].mass) for r in recs) / recs[0].mass),
        aborted=traj.aborted,
        message=traj.message,
    )
    try:
        fit = power_law_fit(times, support, window or default_window(times, fraction))
        entry.exponent, entry.prefactor, entry.rms = fit.exponent, fit.prefactor, fit.rms
    except ValueError as err:
        entry.message = (entry.message + "; " if entry.message else "") + f"fit failed: {err}"
    return entry


def epsilon_sweep(base: SolverConfig, grid: Grid, initial: InitialConditionSpec, eps_list,
                  window=None, fraction: float = DEFAULT_FIT_FRACTION,
                  max_workers: int | None = None) -> SweepReport:
    """One solve per ``epsilon`` with ``n``, grid and initial data held fixed.

    The apparent support ``|{u > eps}|`` is fitted to a power law on
    ``window`` (default: the last ``fraction`` of the run) and compared with
    the general lower bound of :func:`corollary_bounds`, started from the
    initial apparent support.  A solver abort is recorded in its entry and
    does not stop the sweep.

    ``max_workers`` > 1 runs entries in separate processes; the default uses
    one process per CPU.
    """
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValueError("eps_list must not be empty")
    for e in eps:
        ModelParams(e, base.params.n)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    jobs = [(replace(base, params=ModelParams(e, base.params.n)), grid, initial, window, fraction)
            for e in eps]
    workers = max_workers if max_workers is not None else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        entries = [_run_entry(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_run_entry, jobs))
    for e in entries:
        if e.aborted:
            logger.warning("epsilon=%g aborted: %s", e.epsilon, e.message)
    return SweepReport(grid, base.params.n, initial, window, fraction, entries)


# -- PDE versus quasi-static ------------------------------------------------------


def support_edges(u: np.ndarray, x: np.ndarray, threshold: float, domain: tuple):
    """Outermost crossings of ``threshold``.

    The profile has a slope jump at a contact point, so each crossing is
    found by extending the line through the two outermost cells above the
    threshold, kept within the bracketing cell (plain linear interpolation
    across the kink is off by a fraction of a cell).  Cells above threshold
    at either end of the grid extend the support to the wall.  Returns
    ``None`` if ``u`` never exceeds the threshold.
    """
    above = np.flatnonzero(u > threshold)
    if above.size == 0:
        return None

    def crossing(out, inn, inn2):
        if 0 <= inn2 < u.size and u[inn2] > u[inn]:
            slope = (u[inn2] - u[inn]) / (x[inn2] - x[inn])
            xc = x[inn] - (u[inn] - threshold) / slope
        else:
            xc = x[out] + (threshold - u[out]) * (x[inn] - x[out]) / (u[inn] - u[out])
        lo, hi = sorted((x[out], x[inn]))
        return min(max(xc, lo), hi)

    lo, hi = above[0], above[-1]
    a = domain[0] if lo == 0 else crossing(lo - 1, lo, lo + 1)
    b = domain[1] if hi == u.size - 1 else crossing(hi + 1, hi, hi - 1)
    return float(a), float(b)


def initial_droplets(initial: InitialConditionSpec, grid: Grid) -> DropletSet:
    """Quasi-static droplet set matching a parabolic initial condition."""
    p = initial.params
    dom = (grid.x_left, grid.x_right)
    if initial.kind == "parabola":
        return DropletSet.single(p["a"], p["b"], p["mass"], dom)
    if initial.kind == "half_parabola":
        if p["wall"] == "left":
            return DropletSet.single(grid.x_left, p["edge"], p["mass"], dom)
        return DropletSet.single(p["edge"], grid.x_right, p["mass"], dom)
    if initial.kind == "two_parabolas":
        total = p["mass1"] + p["mass2"]
        return DropletSet((p["a1"], p["a2"]), (p["b1"], p["b2"]),
                          (p["mass1"] / total, p["mass2"] / total), total, dom)
    raise ValueError(f"no quasi-static counterpart for initial condition {initial.kind!r}")


@dataclass
class CompareReport:
    """Time series of the PDE / quasi-static discrepancy.

    ``profile_distance`` is ``max |u - w| / max u`` where ``w`` is the
    quasi-static profile on the PDE's own apparent support (shape
    comparison); ``support_pde - support_qs`` compares the support sizes.
    """

    epsilon: float
    config: SolverConfig
    times: np.ndarray
    profile_distance: np.ndarray
    peak: np.ndarray
    support_pde: np.ndarray
    support_qs: np.ndarray
    aborted: bool = False

    @property
    def support_diff(self) -> np.ndarray:
        return self.support_pde - self.support_qs

    def after_transient(self, fraction: float = 0.01) -> np.ndarray:
        return self.times >= fraction * self.times[-1]


def compare_pde_qs(base: SolverConfig, grid: Grid, initial: InitialConditionSpec,
                   qs_cfg: QsConfig | None = None) -> CompareReport:
    """Run both models from the same droplet and compare them at the PDE
    record times."""
    if initial.kind not in ("parabola", "half_parabola"):
        raise ValueError("compare_pde_qs needs a single-droplet initial condition")
    d0 = initial_droplets(initial, grid)
    eps = base.params.epsilon
    traj = solve(initial_condition(initial, grid), base)
    times = traj.times
    qs_cfg = qs_cfg or QsConfig(t_end=base.t_end)
    qs_cfg = replace(qs_cfg, t_end=float(times[-1]))
    dom = (grid.x_left, grid.x_right)
    x = grid.centers
    dist, peak, s_pde, s_qs = [], [], [], []
    d, t_prev = d0, 0.0
    for snap in traj.snapshots:
        if snap.t > t_prev:
            d = qs_solve(d, replace(qs_cfg, t_end=snap.t - t_prev, record_every=None)).states[-1]
            t_prev = snap.t
        u = snap.u.values
        top = float(np.max(u))
        edges = support_edges(u, x, eps, dom)
        if edges is None:
            dist.append(np.nan)
        else:
            mass = grid.h * float(np.sum(u))
            own = DropletSet.single(edges[0], edges[1], mass, dom)
            dist.append(float(np.max(np.abs(u - parabola_profile(own, x)))) / top)
        peak.append(top)
        s_pde.append(snap.record.support_measure)
        s_qs.append(d.total_support)
    return CompareReport(eps, base, times, np.array(dist), np.array(peak), np.array(s_pde),
                         np.array(s_qs), traj.aborted)
