"""Quasi-static free-boundary model: parabolic droplets whose contact points
move with Tanner's velocity ``V = |w_x|^3 / 3``.

Each connected component ``(a_i, b_i)`` carries a fixed mass fraction
``gamma_i`` between merge events (no exchange of mass between droplets).  A
droplet away from the walls has the profile

    w = 6 gamma_i m (b_i - x)_+ (x - a_i)_+ / (b_i - a_i)^3,

and a droplet touching a wall at ``x_w`` keeps zero slope there:

    w = 3/2 gamma_i m ((b - a)^2 - (x - x_w)^2) / (b - a)^3.

Touching droplets merge instantaneously into a single parabola.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INTERIOR_SLOPE = 6.0
WALL_SLOPE = 3.0


@dataclass(frozen=True)
class DropletSet:
    """Ordered disjoint intervals with mass fractions and wall-contact flags."""

    a: tuple
    b: tuple
    gammas: tuple
    total_mass: float
    domain: tuple
    wall_a: tuple = None
    wall_b: tuple = None

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        gammas = tuple(float(x) for x in self.gammas)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        x_l, x_r = self.domain
        if not len(a) == len(b) == len(gammas) >= 1:
            raise ValueError("a, b and gammas must have the same positive length")
        if not x_l < x_r:
            raise ValueError("domain must be an interval")
        if not self.total_mass > 0:
            raise ValueError("total_mass must be positive")
        if any(g <= 0 for g in gammas):
            raise ValueError("mass fractions must be positive")
        if abs(sum(gammas) - 1.0) > 1e-12:
            raise ValueError("mass fractions must sum to one")
        for i in range(len(a)):
            if not (x_l <= a[i] < b[i] <= x_r):
                raise ValueError(f"interval {i} = ({a[i]}, {b[i]}) is not inside the domain")
            if i + 1 < len(a) and not b[i] <= a[i + 1]:
                raise ValueError("intervals must be disjoint and ordered")
        if self.wall_a is None:
            object.__setattr__(self, "wall_a", tuple(x == x_l for x in a))
        if self.wall_b is None:
            object.__setattr__(self, "wall_b", tuple(x == x_r for x in b))
        object.__setattr__(self, "wall_a", tuple(bool(w) for w in self.wall_a))
        object.__setattr__(self, "wall_b", tuple(bool(w) for w in self.wall_b))

    @classmethod
    def single(cls, a, b, total_mass=1.0, domain=(0.0, 1.0)) -> "DropletSet":
        return cls((a,), (b,), (1.0,), total_mass, domain)

    @property
    def n_droplets(self) -> int:
        return len(self.a)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.b) - np.asarray(self.a)

    @property
    def total_support(self) -> float:
        return float(np.sum(self.lengths))

    @property
    def filled(self) -> bool:
        return self.n_droplets == 1 and self.wall_a[0] and self.wall_b[0]

    def masses(self) -> np.ndarray:
        return self.total_mass * np.asarray(self.gammas)


def parabola_profile(d: DropletSet, x):
    """Height of the quasi-static profile at ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for a, b, m, wa, wb in zip(d.a, d.b, d.masses(), d.wall_a, d.wall_b):
        length = b - a
        if wa and wb:
            out = out + np.where((x >= a) & (x <= b), m / length, 0.0)
        elif wa or wb:
            wall = a if wa else b
            inside = (x >= a) & (x <= b)
            out = out + np.where(inside, 1.5 * m * (length**2 - (x - wall) ** 2) / length**3, 0.0)
        else:
            out = out + 6.0 * m * np.maximum(b - x, 0.0) * np.maximum(x - a, 0.0) / length**3
    return float(out) if out.ndim == 0 else out


def _slopes(d: DropletSet):
    """Slope magnitude at each left and right endpoint (``0`` on walls)."""
    lengths = d.lengths
    m = d.masses()
    wa = np.asarray(d.wall_a)
    wb = np.asarray(d.wall_b)
    coef = np.where(wa | wb, WALL_SLOPE, INTERIOR_SLOPE)
    slope = coef * m / lengths**2
    return np.where(wa, 0.0, slope), np.where(wb, 0.0, slope)


def endpoint_slopes(d: DropletSet) -> list:
    """``[(x, |w_x|), ...]`` for every free contact point, left to right."""
    sa, sb = _slopes(d)
    out = []
    for i in range(d.n_droplets):
        if not d.wall_a[i]:
            out.append((d.a[i], float(sa[i])))
        if not d.wall_b[i]:
            out.append((d.b[i], float(sb[i])))
    return out


def tanner_velocity(slope):
    """``|w_x|^3 / 3``."""
    slope = np.asarray(slope, dtype=float)
    if np.any(slope < 0):
        raise ValueError("slope magnitude must be non-negative")
    out = slope**3 / 3.0
    return float(out) if out.ndim == 0 else out


def endpoint_velocities(d: DropletSet):
    """``(da/dt, db/dt)`` arrays; left endpoints move left, right ones right."""
    sa, sb = _slopes(d)
    return -tanner_velocity(sa), tanner_velocity(sb)


def support_growth_rate(d: DropletSet) -> float:
    """Tanner functional ``1/3 sum |w_x|^3`` over the free contact points."""
    return float(sum(tanner_velocity(s) for _, s in endpoint_slopes(d)))


def _rhs(a, b, m, wa, wb):
    length = b - a
    coef = np.where(wa | wb, WALL_SLOPE, INTERIOR_SLOPE)
    v = (coef * m / length**2) ** 3 / 3.0
    return np.where(wa, 0.0, -v), np.where(wb, 0.0, v)


def _rk4(d: DropletSet, dt: float):
    """Unclamped RK4 update of all endpoints."""
    a = np.asarray(d.a)
    b = np.asarray(d.b)
    m = d.masses()
    wa = np.asarray(d.wall_a)
    wb = np.asarray(d.wall_b)
    k1a, k1b = _rhs(a, b, m, wa, wb)
    k2a, k2b = _rhs(a + 0.5 * dt * k1a, b + 0.5 * dt * k1b, m, wa, wb)
    k3a, k3b = _rhs(a + 0.5 * dt * k2a, b + 0.5 * dt * k2b, m, wa, wb)
    k4a, k4b = _rhs(a + dt * k3a, b + dt * k3b, m, wa, wb)
    a_new = a + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
    b_new = b + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
    return a_new, b_new


def qs_step(d: DropletSet, dt: float) -> DropletSet:
    """One classical RK4 step of the endpoint equations.

    Endpoints are clamped to the domain and become wall endpoints on contact.
    Overlaps between neighbours are left to :func:`detect_and_merge`.
    """
    if d.filled or dt == 0:
        return d
    a_new, b_new = _rk4(d, dt)
    x_l, x_r = d.domain
    wa = np.asarray(d.wall_a).copy()
    wb = np.asarray(d.wall_b).copy()
    wa[0] |= a_new[0] <= x_l
    wb[-1] |= b_new[-1] >= x_r
    return _build(d, a_new, b_new, d.gammas, wa, wb)


def _build(d, a, b, gammas, wa, wb, check=False):
    x_l, x_r = d.domain
    a = [x_l if w else float(x) for x, w in zip(a, wa)]
    b = [x_r if w else float(x) for x, w in zip(b, wb)]
    obj = object.__new__(DropletSet)
    for name, val in (("a", tuple(a)), ("b", tuple(b)), ("gammas", tuple(float(g) for g in gammas)),
                      ("total_mass", d.total_mass), ("domain", d.domain),
                      ("wall_a", tuple(bool(w) for w in wa)), ("wall_b", tuple(bool(w) for w in wb))):
        object.__setattr__(obj, name, val)
    if check:
        obj.__post_init__()
    return obj


def detect_and_merge(d: DropletSet, merge_gap: float) -> DropletSet:
    """Merge every adjacent pair whose gap is at most ``merge_gap``; repeat
    until no pair qualifies.  Mass fractions add up."""
    a, b, g = list(d.a), list(d.b), list(d.gammas)
    wa, wb = list(d.wall_a), list(d.wall_b)
    merged = True
    while merged:
        merged = False
        for i in range(len(a) - 1):
            if a[i + 1] - b[i] <= merge_gap:
                b[i] = b[i + 1]
                wb[i] = wb[i + 1]
                g[i] = g[i] + g[i + 1]
                del a[i + 1], b[i + 1], g[i + 1], wa[i + 1], wb[i + 1]
                merged = True
                break
    if len(a) == d.n_droplets:
        return d
    return _build(d, a, b, g, wa, wb)


def _snap_walls(d: DropletSet, gap: float) -> DropletSet:
    x_l, x_r = d.domain
    wa, wb = list(d.wall_a), list(d.wall_b)
    changed = False
    if not wa[0] and d.a[0] - x_l <= gap:
        wa[0] = changed = True
    if not wb[-1] and x_r - d.b[-1] <= gap:
        wb[-1] = changed = True
    return _build(d, d.a, d.b, d.gammas, wa, wb) if changed else d


@dataclass(frozen=True)
class QsConfig:
    t_end: float
    dt_init: float = 1e-6
    dt_max: float = 1e-2
    merge_gap: float | None = None
    record_every: float | None = None
    max_rel_change: float = 0.004

    def __post_init__(self):
        for name in ("dt_init", "dt_max", "max_rel_change"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.merge_gap is not None and not self.merge_gap > 0:
            raise ValueError("merge_gap must be positive")
        if self.record_every is not None and not self.record_every > 0:
            raise ValueError("record_every must be positive")

    def gap_for(self, d: DropletSet) -> float:
        if self.merge_gap is not None:
            return self.merge_gap
        return 1e-9 * (d.domain[1] - d.domain[0])


@dataclass
class QsTrajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def append(self, t, d):
        self.times.append(float(t))
        self.states.append(d)

    @property
    def total_support(self) -> np.ndarray:
        return np.array([d.total_support for d in self.states])

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def at(self, t: float) -> DropletSet:
        """Last recorded state at or before ``t``."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[max(k, 0)]


def _min_gap(d: DropletSet) -> float:
    """Smallest distance to the next contact event (neighbour or wall)."""
    x_l, x_r = d.domain
    gaps = [d.a[i + 1] - d.b[i] for i in range(d.n_droplets - 1)]
    if not d.wall_a[0]:
        gaps.append(d.a[0] - x_l)
    if not d.wall_b[-1]:
        gaps.append(x_r - d.b[-1])
    return min(gaps) if gaps else np.inf


def _natural_dt(d: DropletSet, cfg: QsConfig) -> float:
    va, vb = endpoint_velocities(d)
    speed = np.maximum(np.abs(va), np.abs(vb))
    rates = speed / d.lengths
    fastest = float(np.max(rates)) if rates.size else 0.0
    return cfg.dt_max if fastest == 0 else min(cfg.dt_max, cfg.max_rel_change / fastest)


def qs_solve(d0: DropletSet, cfg: QsConfig) -> QsTrajectory:
    """Event-accurate integration of the droplet set up to ``cfg.t_end``.

    Steps are sized so that no droplet length changes by more than
    ``max_rel_change`` per step.  A step that would close a gap is bisected
    until the gap lies in ``[0, merge_gap]``; the state is then recorded
    just before and just after the merge (or wall contact).
    """
    gap_tol = cfg.gap_for(d0)
    traj = QsTrajectory()
    d = _snap_walls(detect_and_merge(d0, gap_tol), gap_tol)
    t = 0.0
    traj.append(t, d)
    if cfg.record_every is None:
        marks = []
    else:
        marks = list(np.arange(1, int(cfg.t_end / cfg.record_every) + 1) * cfg.record_every)
    marks = [m for m in marks if m < cfg.t_end] + [cfg.t_end]
    dt = cfg.dt_init
    for mark in marks:
        while t < mark * (1 - 1e-14) and not d.filled:
            h = min(dt, _natural_dt(d, cfg), mark - t)
            trial = qs_step(d, h)
            if _min_gap(trial) < 0 or _contacts(d, trial):
                h, trial = _locate_event(d, h, gap_tol)
            t += h
            before = trial
            after = _snap_walls(detect_and_merge(trial, gap_tol), gap_tol)
            if after is not before:
                traj.append(t, before)
                traj.events.append((t, before.n_droplets, after.n_droplets))
            d = after
            traj.append(t, d)
            dt = min(cfg.dt_max, 2.0 * h)
        if d.filled and t < mark:
            t = mark
            traj.append(t, d)
    return traj


def _contacts(old: DropletSet, new: DropletSet) -> bool:
    return new.wall_a != old.wall_a or new.wall_b != old.wall_b


def _gap_state(d, h):
    """Signed distance to the nearest event after a step of ``h``.

    Wall penetration is measured on the unclamped update.
    """
    a_new, b_new = _rk4(d, h)
    x_l, x_r = d.domain
    gaps = list(a_new[1:] - b_new[:-1])
    if not d.wall_a[0]:
        gaps.append(a_new[0] - x_l)
    if not d.wall_b[-1]:
        gaps.append(x_r - b_new[-1])
    return min(gaps), qs_step(d, h)


def _locate_event(d: DropletSet, h: float, gap_tol: float):
    """Bisect the step length until the closing gap lies in ``[0, gap_tol]``."""
    lo, hi = 0.0, h
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gap, trial = _gap_state(d, mid)
        if gap < 0:
            hi = mid
        elif gap > gap_tol:
            lo = mid
        else:
            return mid, trial
    gap, trial = _gap_state(d, lo)
    return lo, trial


def corollary_bounds(t, s0: float, omega_len: float):
    """Lower bounds on the support size: ``(min((63 t + s0^7)^(1/7), |Omega|),
    (1008 t + s0^7)^(1/7))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or s0 < 0:
        raise ValueError("t and s0 must be non-negative")
    general = np.minimum((63.0 * t + s0**7) ** (1.0 / 7.0), omega_len)
    interior = (1008.0 * t + s0**7) ** (1.0 / 7.0)
    if general.ndim == 0:
        return float(general), float(interior)
    return general, interior
