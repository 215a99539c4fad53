"""Implicit conservative finite-difference integrator for the thin-film equation

    |ln eps|^{-1} u_t + (M(u) u_xxx)_x = 0,   M(u) = eps^(3-n) u^n + u^3,

with zero flux and ``u_x = 0`` on both walls.

Each step is backward Euler, solved by damped Newton iteration on the flux
form residual.  The face mobility is the delta-regularised ``M(|u|) + delta``
evaluated at the arithmetic mean of the two neighbouring cells, so the
Jacobian is pentadiagonal and is factorised with ``scipy.linalg.solve_banded``.
Steps whose iterate dips below ``-undershoot_tol * max(u_in)`` are rejected
and retried with half the time step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.linalg import solve_banded

from .entropy import (
    ModelParams,
    RegularizationParams,
    mobility_regularized,
    mobility_regularized_derivative,
)
from .grid import Field, Grid, face_third_derivative, with_ghosts

logger = logging.getLogger(__name__)

DEFAULT_DELTA_FACTOR = 1e-12
# residuals below this multiple of the rounding level count as converged
ROUNDOFF_FACTOR = 1.0


class SolverAbort(RuntimeError):
    """Raised when the time step underflows ``dt_min``.

    ``state`` holds the last accepted state for post-mortem diagnostics.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class SolverConfig:
    params: ModelParams
    t_end: float
    reg: RegularizationParams | None = None
    dt_init: float = 1e-10
    dt_min: float = 1e-18
    dt_max: float = 1e-5
    newton_tol: float = 1e-10
    newton_max_iter: int = 12
    record_every: float | None = None
    undershoot_tol: float = 1e-4

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("time steps must satisfy 0 < dt_min <= dt_init <= dt_max")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.record_every is not None and not self.record_every > 0:
            raise ValueError("record_every must be positive")
        if not self.undershoot_tol >= 0:
            raise ValueError("undershoot_tol must be non-negative")

    def regularization(self, u_in) -> RegularizationParams:
        """The configured regularisation, or ``delta = 1e-12 max(u_in)**3``."""
        if self.reg is not None:
            return self.reg
        scale = float(np.max(u_in)) if np.size(u_in) else 0.0
        return RegularizationParams(DEFAULT_DELTA_FACTOR * max(scale, 1e-300) ** 3)


@dataclass
class SolverState:
    t: float
    u: Field
    dt: float
    u_scale: float
    step_count: int = 0
    newton_iter_total: int = 0
    last_newton_iters: int = 0
    last_dt: float = 0.0
    u_prev: np.ndarray | None = None


# -- initial data ---------------------------------------------------------------

_IC_KEYS = {
    "parabola": {"a", "b", "mass"},
    "half_parabola": {"edge", "mass", "wall"},
    "two_parabolas": {"a1", "b1", "mass1", "a2", "b2", "mass2"},
    "table": {"values"},
}


@dataclass(frozen=True)
class InitialConditionSpec:
    """Initial profile description.

    ``kind`` is one of ``parabola`` (``a``, ``b``, ``mass``), ``half_parabola``
    (``edge``, ``mass``, ``wall`` in ``{"left", "right"}``; ``edge`` is the free
    contact point), ``two_parabolas`` (``a1``, ``b1``, ``mass1``, ``a2``, ``b2``,
    ``mass2``) and ``table`` (``values``).
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    precursor_floor: float = 0.0

    def __post_init__(self):
        if self.kind not in _IC_KEYS:
            raise ValueError(f"unknown initial condition kind {self.kind!r}")
        missing = _IC_KEYS[self.kind] - set(self.params)
        extra = set(self.params) - _IC_KEYS[self.kind]
        if missing or extra:
            raise ValueError(
                f"{self.kind} needs keys {sorted(_IC_KEYS[self.kind])}, got {sorted(self.params)}"
            )
        if self.precursor_floor < 0:
            raise ValueError("precursor_floor must be non-negative")
        p = self.params
        for key in ("mass", "mass1", "mass2"):
            if key in p and not p[key] > 0:
                raise ValueError("masses must be positive")
        if self.kind == "parabola" and not p["a"] < p["b"]:
            raise ValueError("parabola needs a < b")
        if self.kind == "two_parabolas" and not p["a1"] < p["b1"] <= p["a2"] < p["b2"]:
            raise ValueError("two_parabolas needs a1 < b1 <= a2 < b2")
        if self.kind == "half_parabola" and p["wall"] not in ("left", "right"):
            raise ValueError("wall must be 'left' or 'right'")
        if self.kind == "table" and np.any(np.asarray(p["values"], dtype=float) < 0):
            raise ValueError("table values must be non-negative")


def parabola_profile(x, a, b, mass):
    """``6 m (b-x)_+ (x-a)_+ / (b-a)^3``."""
    x = np.asarray(x, dtype=float)
    return 6.0 * mass * np.maximum(b - x, 0.0) * np.maximum(x - a, 0.0) / (b - a) ** 3


def wall_profile(x, wall, edge, mass):
    """Half parabola with zero slope at ``wall`` and a contact point at ``edge``."""
    x = np.asarray(x, dtype=float)
    length = abs(edge - wall)
    return 1.5 * mass * np.maximum(length**2 - (x - wall) ** 2, 0.0) / length**3


def initial_condition(spec: InitialConditionSpec, g: Grid) -> Field:
    x = g.centers
    p = spec.params

    def inside(*points):
        for pt in points:
            if not (g.x_left <= pt <= g.x_right):
                raise ValueError(f"point {pt} lies outside the domain [{g.x_left}, {g.x_right}]")

    if spec.kind == "parabola":
        inside(p["a"], p["b"])
        u = parabola_profile(x, p["a"], p["b"], p["mass"])
    elif spec.kind == "two_parabolas":
        inside(p["a1"], p["b1"], p["a2"], p["b2"])
        u = parabola_profile(x, p["a1"], p["b1"], p["mass1"]) + parabola_profile(
            x, p["a2"], p["b2"], p["mass2"]
        )
    elif spec.kind == "half_parabola":
        inside(p["edge"])
        wall = g.x_left if p["wall"] == "left" else g.x_right
        if p["edge"] == wall:
            raise ValueError("half_parabola needs a free edge away from the wall")
        u = wall_profile(x, wall, p["edge"], p["mass"])
    else:
        u = np.asarray(p["values"], dtype=float)
        if u.shape != (g.n_cells,):
            raise ValueError(f"table has {u.size} values, grid has {g.n_cells} cells")
        u = u.copy()
    return Field(g, u + spec.precursor_floor)


# -- residual and Jacobian ----------------------------------------------------------


def _fluxes(v, h, p, reg):
    d3 = face_third_derivative(v, h)
    ubar = 0.5 * (v[:-1] + v[1:])
    return ubar, d3, mobility_regularized(ubar, p, reg) * d3


def residual(v, u, dt, h, p: ModelParams, reg: RegularizationParams) -> np.ndarray:
    """Backward-Euler residual ``v - u + dt |ln eps| / h (q_{i+1/2} - q_{i-1/2})``."""
    return _residual_and_noise(v, u, dt, h, p, reg)[0]


def _residual_and_noise(v, u, dt, h, p, reg):
    """Residual plus the size of its rounding error.

    The third difference cancels four terms of size ``|v|``, so the flux
    carries an absolute error of about ``eps_mach * M * 8 |v| / h**3``.
    """
    ubar, _, q = _fluxes(v, h, p, reg)
    coef = dt * p.log_factor / h
    out = v - u
    out[:-1] += coef * q
    out[1:] -= coef * q
    g = np.abs(with_ghosts(v))
    spread = (g[3:] + 3.0 * g[2:-1] + 3.0 * g[1:-2] + g[:-3]) / h**3
    aq = coef * mobility_regularized(ubar, p, reg) * spread
    scale = np.abs(v) + np.abs(u)
    scale[:-1] += aq
    scale[1:] += aq
    return out, ROUNDOFF_FACTOR * np.finfo(float).eps * float(np.max(scale))


def jacobian_banded(v, dt, h, p: ModelParams, reg: RegularizationParams) -> np.ndarray:
    """Residual Jacobian in LAPACK banded layout ``(5, N)``, two bands each side."""
    n = v.size
    ubar, d3, _ = _fluxes(v, h, p, reg)
    mob = mobility_regularized(ubar, p, reg)
    dmob = 0.5 * mobility_regularized_derivative(ubar, p) * d3
    coef = dt * p.log_factor / h
    inv_h3 = 1.0 / h**3
    # third-difference weights on cells f-1, f, f+1, f+2 of face f, ghosts folded in
    w = np.empty((4, n - 1))
    w[0], w[1], w[2], w[3] = -1.0, 3.0, -3.0, 1.0
    w[1, 0] += w[0, 0]
    w[0, 0] = 0.0
    w[2, -1] += w[3, -1]
    w[3, -1] = 0.0
    dq = mob * w * inv_h3
    dq[1] += dmob
    dq[2] += dmob
    # diag[m + 2, i] holds J[i, i + m]
    diag = np.zeros((5, n))
    diag[2] = 1.0
    for k in range(4):
        off = k - 1
        diag[off + 2, :-1] += coef * dq[k]
        diag[off + 1, 1:] -= coef * dq[k]
    ab = np.zeros((5, n))
    for m in range(-2, 3):
        if m >= 0:
            ab[2 - m, m:] = diag[m + 2, : n - m]
        else:
            ab[2 - m, : n + m] = diag[m + 2, -m:]
    return ab


def _newton(u, dt, h, p, reg, cfg: SolverConfig, floor: float, guess=None):
    """Damped Newton solve of one backward-Euler step.

    Converged when the sup-norm residual is below
    ``newton_tol * max(1, max u)`` or below the rounding level of the flux
    difference, whichever is larger.  Returns ``(v, iterations, ok)``.
    """
    tol = cfg.newton_tol * max(1.0, float(np.max(u)))
    v = u.copy()
    res, noise = _residual_and_noise(v, u, dt, h, p, reg)
    rnorm = np.max(np.abs(res))
    if guess is not None:
        g_res, g_noise = _residual_and_noise(guess, u, dt, h, p, reg)
        g_norm = np.max(np.abs(g_res))
        if g_norm < rnorm:
            v, res, noise, rnorm = guess.copy(), g_res, g_noise, g_norm
    for it in range(1, cfg.newton_max_iter + 1):
        if not np.isfinite(rnorm):
            return v, it, False
        if rnorm <= max(tol, noise):
            return v, it, bool(v.min() >= floor)
        ab = jacobian_banded(v, dt, h, p, reg)
        try:
            step = solve_banded((2, 2), ab, -res, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            return v, it, False
        theta = 1.0
        for _ in range(4):
            trial = v + theta * step
            trial_res, trial_noise = _residual_and_noise(trial, u, dt, h, p, reg)
            trial_norm = np.max(np.abs(trial_res))
            if trial_norm < rnorm:
                break
            theta *= 0.5
        v, res, noise, rnorm = trial, trial_res, trial_noise, trial_norm
    return v, cfg.newton_max_iter, False


def step(state: SolverState, cfg: SolverConfig, reg: RegularizationParams | None = None,
         dt_cap: float | None = None) -> SolverState:
    """Advance by one accepted backward-Euler step.

    The attempted step is ``min(state.dt, dt_cap)``; it is halved until Newton
    converges without undershoot.  Raises :class:`SolverAbort` if the step
    falls below ``cfg.dt_min``.
    """
    p = cfg.params
    reg = reg if reg is not None else cfg.regularization(np.array([state.u_scale]))
    g = state.u.grid
    u = state.u.values
    floor = -cfg.undershoot_tol * state.u_scale
    dt = state.dt if dt_cap is None else min(state.dt, dt_cap)
    capped = dt_cap is not None and dt_cap < state.dt
    iters_total = 0
    while True:
        if dt < cfg.dt_min:
            raise SolverAbort(
                f"time step underflow at t={state.t:.6e} (dt={dt:.3e} < dt_min={cfg.dt_min:.3e})",
                state,
            )
        guess = None
        if state.u_prev is not None and state.last_dt > 0:
            guess = u + (dt / state.last_dt) * (u - state.u_prev)
        v, iters, ok = _newton(u, dt, g.h, p, reg, cfg, floor, guess)
        iters_total += iters
        if ok:
            break
        logger.debug("step rejected at t=%.6e dt=%.3e (iters=%d)", state.t, dt, iters)
        dt *= 0.5
        capped = False
    if capped:
        next_dt = state.dt
    else:
        next_dt = min(dt * 1.2, cfg.dt_max) if iters <= 4 else dt
    return SolverState(
        t=state.t + dt,
        u=Field(g, v),
        dt=next_dt,
        u_scale=state.u_scale,
        step_count=state.step_count + 1,
        newton_iter_total=state.newton_iter_total + iters_total,
        last_newton_iters=iters,
        last_dt=dt,
        u_prev=u,
    )


def initial_state(u_in: Field, cfg: SolverConfig) -> SolverState:
    if np.any(u_in.values < 0):
        raise ValueError("initial data must be non-negative")
    return SolverState(t=0.0, u=u_in.copy(), dt=cfg.dt_init, u_scale=float(np.max(u_in.values)))


@dataclass
class Snapshot:
    t: float
    u: Field
    record: "DiagnosticsRecord"  # noqa: F821


@dataclass
class Trajectory:
    snapshots: list
    config: SolverConfig
    reg: RegularizationParams
    aborted: bool = False
    message: str = ""
    step_count: int = 0
    newton_iter_total: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def records(self) -> list:
        return [s.record for s in self.snapshots]

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]


def _record_times(cfg: SolverConfig) -> np.ndarray:
    if cfg.t_end == 0:
        return np.array([])
    if cfg.record_every is None:
        return np.array([cfg.t_end])
    k = np.arange(1, int(np.floor(cfg.t_end / cfg.record_every * (1 + 1e-12))) + 1)
    times = k * cfg.record_every
    times = times[times < cfg.t_end * (1 - 1e-12)]
    return np.append(times, cfg.t_end)


def solve(u_in: Field, cfg: SolverConfig, raise_on_abort: bool = False) -> Trajectory:
    """Integrate to ``cfg.t_end``, recording diagnostics at multiples of
    ``record_every`` and at ``t_end``.

    Time-integrated dissipations are accumulated with the right-endpoint rule
    on every accepted step.  On dt underflow the trajectory is returned with
    ``aborted=True`` (or the abort re-raised).
    """
    from .diagnostics import Accumulator

    reg = cfg.regularization(u_in.values)
    state = initial_state(u_in, cfg)
    acc = Accumulator(cfg.params, tol=cfg.undershoot_tol, scale=state.u_scale)
    snaps = [Snapshot(0.0, state.u.copy(), acc.record(state.u, 0.0))]
    traj = Trajectory(snaps, cfg, reg)
    for t_rec in _record_times(cfg):
        while state.t < t_rec * (1 - 1e-13):
            try:
                state = step(state, cfg, reg, dt_cap=t_rec - state.t)
            except SolverAbort as err:
                if raise_on_abort:
                    raise
                logger.warning("%s", err)
                traj.aborted, traj.message = True, str(err)
                traj.step_count, traj.newton_iter_total = state.step_count, state.newton_iter_total
                return traj
            acc.advance(state.u, state.last_dt)
        state.t = t_rec if abs(state.t - t_rec) <= 1e-12 * t_rec else state.t
        snaps.append(
            Snapshot(state.t, state.u.copy(),
                     acc.record(state.u, state.t, dt=state.last_dt, newton_iters=state.last_newton_iters))
        )
    traj.step_count, traj.newton_iter_total = state.step_count, state.newton_iter_total
    return traj


def with_overrides(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, **kw)
