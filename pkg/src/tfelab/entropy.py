"""Pointwise model functions: mobility, its delta-regularisation, the support
entropy ``B`` and its rescaled version ``B_eps``, and the entropies ``H_delta``
and ``H_0`` of the uniformly parabolic approximation.

Closed forms are used for the mobility exponents ``n = 1`` and ``n = 2``.
Other exponents fall back on one-dimensional quadrature of the
integrated-by-parts representation

    B(s) = s B'(s) + int_0^s dr / (r**(n-2) + r),

and :func:`B_quadrature` evaluates the defining double integral directly so
that it can serve as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

NEGATIVE_CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Slip parameter ``epsilon`` and mobility exponent ``n``."""

    epsilon: float
    n: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0,1)")
        if not (0.0 < self.n < 3.0):
            raise ValueError("n must lie in (0,3)")

    @property
    def log_factor(self) -> float:
        """``|ln epsilon|``."""
        return -np.log(self.epsilon)

    @property
    def slip_coefficient(self) -> float:
        """``epsilon**(3 - n)``, the coefficient of the slip term."""
        return self.epsilon ** (3.0 - self.n)


@dataclass(frozen=True)
class RegularizationParams:
    delta: float = 0.0

    def __post_init__(self):
        if not self.delta >= 0.0:
            raise ValueError("delta must be non-negative")


def _check_n(n: float) -> None:
    if not (0.0 < n < 3.0):
        raise ValueError("n must lie in (0,3)")


def mobility(u, p: ModelParams):
    """``eps**(3-n) u**n + u**3`` for non-negative ``u``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0):
        raise ValueError("mobility is defined for u >= 0; use mobility_regularized")
    out = p.slip_coefficient * u_arr**p.n + u_arr**3
    return float(out) if out.ndim == 0 else out


def mobility_regularized(u, p: ModelParams, r: RegularizationParams):
    """``mobility(|u|) + delta``, defined for every real ``u``."""
    a = np.abs(np.asarray(u, dtype=float))
    out = p.slip_coefficient * a**p.n + a**3 + r.delta
    return float(out) if out.ndim == 0 else out


def mobility_regularized_derivative(u, p: ModelParams):
    """Derivative of :func:`mobility_regularized` with respect to ``u``.

    The ``|u|`` kink is given zero slope below 1e-300.
    """
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    safe = a > 1e-300
    a_safe = np.where(safe, a, 1.0)
    dm = p.n * p.slip_coefficient * a_safe ** (p.n - 1.0) + 3.0 * a_safe**2
    return np.where(safe, np.sign(u) * dm, 0.0)


# -- B and its derivatives ---------------------------------------------------


def _b_kernel(v, n):
    return 1.0 / (v ** (n - 1.0) + v * v)


def _b_prime_quad(s: float, n: float) -> float:
    if s == 0.0 and n >= 2.0:
        return np.inf
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    if s >= 1.0:
        return integrate.quad(_b_kernel, s, np.inf, args=(n,), **opts)[0]
    # split at 1 so the algebraic tail is handled by the infinite-range rule
    tail = integrate.quad(_b_kernel, 1.0, np.inf, args=(n,), **opts)[0]
    if s == 0.0:
        return tail + integrate.quad(_b_kernel, 0.0, 1.0, args=(n,), **opts)[0]
    # v = exp(w) tames the v**(1-n) growth near 0
    head = integrate.quad(lambda w: np.exp((2.0 - n) * w) / (1.0 + np.exp((3.0 - n) * w)),
                          np.log(s), 0.0, **opts)[0]
    return head + tail


def _b_value_quad(s: float, n: float) -> float:
    if s == 0.0:
        return 0.0
    # int_0^s dr / (r**(n-2) + r) = log(1 + s**q) / q with q = 3 - n
    q = 3.0 - n
    return s * _b_prime_quad(s, n) + np.log1p(s**q) / q


def _as_nonnegative(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("B is defined for s >= 0")
    return s


def _log1p_inv(s):
    """``log(1 + 1/s)`` without overflow for subnormal ``s``; 0 is mapped to 1."""
    s = np.where(s > 0, s, 1.0)
    small = s < 1.0
    return np.where(small, np.log1p(s) - np.log(np.where(small, s, 1.0)), np.log1p(1.0 / np.where(small, 1.0, s)))


def B_value(s, n: float):
    """The support entropy ``B(s) = int_0^s int_r^inf dv / (v**(n-1) + v**2) dr``."""
    _check_n(n)
    s = _as_nonnegative(s)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        if n == 1.0:
            out = s * np.arctan2(1.0, s)
            out = out + 0.5 * np.log1p(s * s)
        elif n == 2.0:
            out = np.where(s > 0, s * _log1p_inv(s), 0.0) + np.log1p(s)
        else:
            out = np.vectorize(lambda x: _b_value_quad(float(x), n), otypes=[float])(s)
    return float(out) if out.ndim == 0 else out


def B_prime(s, n: float):
    """``B'(s) = int_s^inf dv / (v**(n-1) + v**2)``; infinite at 0 when ``n >= 2``."""
    _check_n(n)
    s = _as_nonnegative(s)
    with np.errstate(divide="ignore"):
        if n == 1.0:
            out = np.arctan2(1.0, s)
        elif n == 2.0:
            out = np.where(s > 0, _log1p_inv(s), np.inf)
        else:
            out = np.vectorize(lambda x: _b_prime_quad(float(x), n), otypes=[float])(s)
    return float(out) if out.ndim == 0 else out


def B_quadrature(s: float, n: float, tol: float = 1e-10) -> float:
    """Nested adaptive quadrature of the double integral defining ``B``.

    Independent of the closed forms; used to check them.
    """
    _check_n(n)
    if s < 0:
        raise ValueError("B is defined for s >= 0")
    if s == 0.0:
        return 0.0

    def head(w):
        # r = exp(w) resolves the singular behaviour of B' at 0
        r = np.exp(w)
        return r * _b_prime_quad(r, n) if r > 0 else 0.0

    opts = dict(epsabs=tol, epsrel=1e-12, limit=400)
    out, _ = integrate.quad(head, -np.inf, np.log(min(s, 1.0)), **opts)
    if s > 1.0:
        out += integrate.quad(_b_prime_quad, 1.0, s, args=(n,), **opts)[0]
    return out


def B_eps(s, p: ModelParams):
    """``B(s / eps) / |ln eps|``."""
    s = _as_nonnegative(s)
    return B_value(s / p.epsilon, p.n) / p.log_factor


def B_eps_prime(s, p: ModelParams):
    """Derivative of :func:`B_eps`: ``B'(s / eps) / (eps |ln eps|)``."""
    s = _as_nonnegative(s)
    return B_prime(s / p.epsilon, p.n) / (p.epsilon * p.log_factor)


def contact_weight(sigma, n: float):
    """``B'(sigma) * (sigma**n + sigma**3)``, finite at ``sigma = 0``.

    With ``sigma = u / eps`` the entropy flux reads
    ``R = -eps**2 * contact_weight(sigma) * u_xxx``.
    """
    sigma = _as_nonnegative(sigma)
    pos = sigma > 0
    s_safe = np.where(pos, sigma, 1.0)
    out = np.where(pos, B_prime(s_safe, n) * (s_safe**n + s_safe**3), 0.0)
    return float(out) if out.ndim == 0 else out


def clamp_undershoot(values: np.ndarray, tol: float = NEGATIVE_CLAMP_TOL) -> np.ndarray:
    """Zero out negative values of magnitude at most ``tol * max(values)``.

    Larger negative values are solver failures and raise.
    """
    values = np.asarray(values, dtype=float)
    vmin = values.min(initial=0.0)
    if vmin >= 0:
        return values
    scale = max(values.max(initial=0.0), 0.0)
    if -vmin > tol * scale:
        raise ValueError(f"negative value {vmin:.3e} exceeds the undershoot tolerance")
    return np.maximum(values, 0.0)


def rho_field(u, p: ModelParams, tol: float = NEGATIVE_CLAMP_TOL):
    """Entropy field ``rho = B_eps(u)``, applied after clamping solver undershoot."""
    from .grid import Field

    if isinstance(u, Field):
        return Field(u.grid, B_eps(clamp_undershoot(u.values, tol), p))
    return B_eps(clamp_undershoot(u, tol), p)


@lru_cache(maxsize=None)
def sup_constant(n: float) -> float:
    """``sup_s B'(s)**2 (s**(n-1) + s**2)``, the constant in the entropy-flux bound.

    Infinite for ``n < 1`` (the bracket blows up at ``s = 0``). Found by a
    log-grid scan followed by bounded refinement around the best node.
    """
    _check_n(n)
    if n < 1.0:
        return np.inf

    def bracket(s):
        return B_prime(s, n) ** 2 * (s ** (n - 1.0) + s * s)

    # limit of the bracket at s = 0
    at_zero = (np.pi / 2) ** 2 if n == 1.0 else 0.0
    grid = np.logspace(-8, 4, 241)
    vals = np.array([bracket(s) for s in grid])
    k = int(np.argmax(vals))
    best = vals[k]
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda s: -bracket(s), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12 * hi})
        best = max(best, -res.fun)
    # the bracket tends to 1 at infinity
    return float(max(best, at_zero, 1.0))


# -- entropies of the uniformly parabolic approximation ------------------------


def H0_value(s):
    """``H_0(s) = arctan(1/s) - s ln(1 + 1/s**2) / 2``, ``+inf`` for ``s < 0``.

    At ``s = 0`` the continuous extension ``pi/2`` is returned.
    """
    s = np.asarray(s, dtype=float)
    pos = s > 0
    s_safe = np.where(pos, s, 1.0)
    small = s_safe < 1.0
    s_lo = np.where(small, s_safe, 1.0)
    log_term = np.where(small, np.log1p(s_lo**2) - 2.0 * np.log(s_lo),
                        np.log1p(1.0 / np.where(small, 1.0, s_safe) ** 2))
    val = np.arctan2(1.0, s_safe) - 0.5 * s_safe * log_term
    out = np.where(pos, val, np.where(s == 0, np.pi / 2, np.inf))
    return float(out) if out.ndim == 0 else out


def _f_delta(u, delta):
    a = abs(u)
    return a * (1.0 + a * a) + delta


def H_delta_value(s: float, r: RegularizationParams) -> float:
    """``H_delta(s) = int_s^inf int_r^inf du dr / f_delta(u)`` with ``f(u) = |u|(1+u^2)``.

    Evaluated as the single integral ``int_s^inf (u - s) / f_delta(u) du``.
    """
    delta = r.delta
    if delta <= 0:
        raise ValueError("H_delta needs delta > 0; use H0_value for delta = 0")
    s = float(s)

    def kernel(u):
        return (u - s) / _f_delta(u, delta)

    opts = dict(epsabs=1e-11, epsrel=1e-11, limit=500)
    total = 0.0
    lo = s
    if s < 0:
        part, _ = integrate.quad(kernel, s, 0.0, points=[-delta], **opts)
        total += part
        lo = 0.0
    # resolve the delta-wide layer near u = 0 before the unbounded tail
    for edge in (delta, np.sqrt(delta), 1.0):
        if edge > lo:
            part, _ = integrate.quad(kernel, lo, edge, **opts)
            total += part
            lo = edge
    part, _ = integrate.quad(kernel, lo, np.inf, **opts)
    return total + part
