"""Functionals of a film profile: mass, energy, dissipations, the support
entropy integral, apparent support, the weak contact-line distribution and
the theorem-level bounds checked at run time.

Conventions
-----------
* First-derivative quantities (energy, slope) use face differences
  ``(u_{i+1} - u_i) / h``; the energy is then exactly the functional the
  backward-Euler scheme dissipates.
* Second derivatives are centred cell differences with reflection ghosts.
* In ``u * u_xx**2`` the weight ``u_i`` is replaced by the geometric mean of
  ``u_{i-1}, u_i, u_{i+1}``.  This agrees with ``u_i`` to second order where
  ``u`` is smooth and positive, and removes the spurious O(1) contribution of
  the cell straddling a contact point, where the second difference carries
  the slope jump.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .entropy import (
    NEGATIVE_CLAMP_TOL,
    ModelParams,
    clamp_undershoot,
    contact_weight,
    mobility,
    rho_field,
    sup_constant,
)
from .grid import (
    Field,
    cell_first_and_second_derivative,
    face_first_derivative,
    face_third_derivative,
    integrate,
    with_ghosts,
)

TIMESERIES_COLUMNS = (
    "t",
    "mass",
    "energy",
    "dissipation_h",
    "cum_dissipation",
    "entropy_integral",
    "bulk_dissipation",
    "cum_bulk",
    "support_measure",
    "sup_slope_sq",
    "lipschitz_rhs",
    "weak_R_l1",
    "dt",
    "newton_iters",
)


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    dissipation_h: float
    cum_dissipation: float
    entropy_integral: float
    bulk_dissipation: float
    cum_bulk: float
    support_measure: float
    sup_slope_sq: float
    lipschitz_rhs: float
    weak_R_l1: float
    weak_R_bound: float = np.inf
    dt: float = 0.0
    newton_iters: int = 0

    @property
    def rebd_ok(self) -> bool:
        return bool(self.weak_R_l1 <= self.weak_R_bound * (1 + 1e-6))

    @property
    def lipschitz_ratio(self) -> float:
        return self.sup_slope_sq / self.lipschitz_rhs

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in TIMESERIES_COLUMNS)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Test function with caller-supplied first and second derivatives."""

    phi: Field
    dphi: Field
    d2phi: Field

    __test__ = False  # not a pytest class

    def __post_init__(self):
        n = self.phi.grid.n_cells
        if not (len(self.dphi) == len(self.d2phi) == n):
            raise ValueError("test function samples must match the grid")

    @classmethod
    def from_callables(cls, grid, phi, dphi, d2phi) -> "TestFunction":
        return cls(Field.from_function(grid, phi), Field.from_function(grid, dphi),
                   Field.from_function(grid, d2phi))

    @classmethod
    def constant(cls, grid, value=1.0) -> "TestFunction":
        n = grid.n_cells
        return cls(Field(grid, np.full(n, float(value))), Field(grid, np.zeros(n)),
                   Field(grid, np.zeros(n)))


def _clamped(u: Field, tol=NEGATIVE_CLAMP_TOL) -> np.ndarray:
    return clamp_undershoot(u.values, tol)


def mass(u: Field) -> float:
    return integrate(u)


def energy(u: Field) -> float:
    """``1/2 int u_x^2`` from face differences (boundary faces carry zero slope)."""
    return 0.5 * u.grid.h * float(np.sum(face_first_derivative(u) ** 2))


def dissipation_h(u: Field, p: ModelParams, tol=NEGATIVE_CLAMP_TOL) -> float:
    """``int M(u) u_xxx^2`` by face quadrature with the face-averaged mobility."""
    v = _clamped(u, tol)
    h = u.grid.h
    ubar = 0.5 * (v[:-1] + v[1:])
    return h * float(np.sum(mobility(ubar, p) * face_third_derivative(v, h) ** 2))


def entropy_integral(u: Field, p: ModelParams, tol=NEGATIVE_CLAMP_TOL) -> float:
    return integrate(rho_field(u, p, tol))


def _bulk_weight(v: np.ndarray) -> np.ndarray:
    g = with_ghosts(v)
    return np.cbrt(g[:-2] * g[1:-1] * g[2:])


def bulk_dissipation(u: Field, tol=NEGATIVE_CLAMP_TOL) -> float:
    """``int u u_xx^2``."""
    v = _clamped(u, tol)
    _, d2 = cell_first_and_second_derivative(v, u.grid.h)
    return u.grid.h * float(np.sum(_bulk_weight(v) * d2**2))


def apparent_support(u: Field, threshold: float) -> float:
    """Measure of ``{u > threshold}`` for the piecewise-linear interpolant.

    The half cells next to the walls use the constant (zero-slope) extension.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    v = u.values
    h = u.grid.h
    above = v > threshold
    total = 0.5 * h * (int(above[0]) + int(above[-1]))
    a, b = v[:-1], v[1:]
    both = above[:-1] & above[1:]
    total += h * np.count_nonzero(both)
    cross = above[:-1] ^ above[1:]
    hi = np.where(cross, np.maximum(a, b), 0.0)
    lo = np.where(cross, np.minimum(a, b), 0.0)
    span = np.where(cross, hi - lo, 1.0)
    total += h * float(np.sum(np.where(cross, (hi - threshold) / span, 0.0)))
    return float(total)


def weak_T(u: Field, phi: TestFunction, tol=NEGATIVE_CLAMP_TOL) -> float:
    """``<T, phi> = int u u_xx^2 phi - 5/6 int u_x^3 phi' - 1/2 int u u_x^2 phi''``."""
    v = _clamped(u, tol)
    h = u.grid.h
    d1, d2 = cell_first_and_second_derivative(v, h)
    bulk = np.sum(_bulk_weight(v) * d2**2 * phi.phi.values)
    slope = np.sum(d1**3 * phi.dphi.values)
    curv = np.sum(v * d1**2 * phi.d2phi.values)
    return float(h * (bulk - 5.0 / 6.0 * slope - 0.5 * curv))


def weak_R_l1(u: Field, p: ModelParams, tol=NEGATIVE_CLAMP_TOL):
    """L1 norm of the entropy flux ``R`` and its dissipation bound.

    Returns ``(lhs, rhs, ok)`` with ``lhs = int |R|`` and
    ``rhs = sqrt(C * m * h_eps)``, where ``C = sup_constant(n)``, ``h_eps`` is
    the dissipation and ``m`` the face-averaged mass.  Both sides use the same
    face quadrature, so Cauchy-Schwarz makes ``lhs <= rhs`` exact at the
    discrete level.
    """
    v = _clamped(u, tol)
    h = u.grid.h
    ubar = 0.5 * (v[:-1] + v[1:])
    d3 = face_third_derivative(v, h)
    eps = p.epsilon
    r_face = eps**2 * contact_weight(ubar / eps, p.n) * d3
    lhs = h * float(np.sum(np.abs(r_face)))
    diss = h * float(np.sum(mobility(ubar, p) * d3**2))
    m_face = h * float(np.sum(ubar))
    c_sup = sup_constant(p.n)
    rhs = np.inf if np.isinf(c_sup) else float(np.sqrt(c_sup * m_face * diss))
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-6))


def sup_slope_sq(u: Field) -> float:
    """``max |u_x|^2`` over face differences."""
    return float(np.max(np.abs(face_first_derivative(u))) ** 2)


def lipschitz_ratio(u: Field, p: ModelParams, tol=NEGATIVE_CLAMP_TOL):
    """``(max |u_x|^2, (1 + |ln eps| h_eps)^(1/2))``.

    The constant of the underlying inequality is not explicit, so only the
    two sides are reported.
    """
    lhs = sup_slope_sq(u)
    rhs_core = float(np.sqrt(1.0 + p.log_factor * dissipation_h(u, p, tol)))
    return lhs, rhs_core


def compute_record(u: Field, p: ModelParams, t: float = 0.0, cum_dissipation: float = 0.0,
                   cum_bulk: float = 0.0, dt: float = 0.0, newton_iters: int = 0,
                   tol=NEGATIVE_CLAMP_TOL) -> DiagnosticsRecord:
    lhs, rhs_core = lipschitz_ratio(u, p, tol)
    r_l1, r_bound, _ = weak_R_l1(u, p, tol)
    return DiagnosticsRecord(
        t=float(t),
        mass=mass(u),
        energy=energy(u),
        dissipation_h=dissipation_h(u, p, tol),
        cum_dissipation=float(cum_dissipation),
        entropy_integral=entropy_integral(u, p, tol),
        bulk_dissipation=bulk_dissipation(u, tol),
        cum_bulk=float(cum_bulk),
        support_measure=apparent_support(u, p.epsilon),
        sup_slope_sq=lhs,
        lipschitz_rhs=rhs_core,
        weak_R_l1=r_l1,
        weak_R_bound=r_bound,
        dt=float(dt),
        newton_iters=int(newton_iters),
    )


class Accumulator:
    """Time integrals of ``|ln eps| h_eps`` and ``int u u_xx^2`` along a run.

    ``tol`` is relative to ``scale`` (the solver measures undershoot against
    ``max(u_in)``), and is rescaled to the current maximum before clamping.
    """

    def __init__(self, p: ModelParams, tol=NEGATIVE_CLAMP_TOL, scale: float | None = None):
        self.params = p
        self.tol = tol
        self.scale = scale
        self.cum_dissipation = 0.0
        self.cum_bulk = 0.0

    def _tol(self, u: Field) -> float:
        if self.scale is None:
            return self.tol
        top = float(np.max(u.values))
        return self.tol * self.scale / top if top > 0 else np.inf

    def advance(self, u: Field, dt: float) -> None:
        tol = self._tol(u)
        self.cum_dissipation += dt * self.params.log_factor * dissipation_h(u, self.params, tol)
        self.cum_bulk += dt * bulk_dissipation(u, tol)

    def record(self, u: Field, t: float, dt: float = 0.0, newton_iters: int = 0) -> DiagnosticsRecord:
        return compute_record(u, self.params, t, self.cum_dissipation, self.cum_bulk, dt,
                              newton_iters, self._tol(u))
