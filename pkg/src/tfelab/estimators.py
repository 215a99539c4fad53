"""scikit-learn style wrappers around the solvers and the power-law fit.

* :class:`ThinFilmSimulator` - ``fit`` validates the model and grid,
  ``transform`` integrates each row of ``X`` (an initial profile) to
  ``t_end`` and returns the final profiles.
* :class:`QuasiStaticModel` - ``fit`` takes the initial intervals,
  ``predict`` returns the total support at the requested times.
* :class:`PowerLawFit` - ``fit(times, sizes)``, ``predict(times)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .entropy import ModelParams, RegularizationParams
from .experiments import DEFAULT_FIT_FRACTION, default_window, power_law_fit
from .grid import Field, Grid
from .quasistatic import DropletSet, QsConfig, qs_solve
from .solver import SolverAbort, SolverConfig, solve


def check_profiles(X, n_cells: int | None = None) -> np.ndarray:
    """2D array of non-negative finite profiles, one per row."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if n_cells is not None and X.shape[1] != n_cells:
        raise ValueError(f"profiles have {X.shape[1]} values, grid has {n_cells} cells")
    if np.any(X < 0):
        raise ValueError("profiles must be non-negative")
    return X


def check_times(t) -> np.ndarray:
    """1D array of finite non-negative times (a column vector is accepted)."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 2 and t.shape[1] == 1:
        t = t[:, 0]
    t = check_array(t, ensure_2d=False, dtype=float)
    if t.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    return t


class ThinFilmSimulator(TransformerMixin, BaseEstimator):
    """Backward-Euler integration of the thin-film equation.

    Parameters mirror :class:`tfelab.solver.SolverConfig`; ``delta=None``
    selects the default regularisation.
    """

    def __init__(self, epsilon=1e-2, n=2.0, x_left=0.0, x_right=1.0, n_cells=512, t_end=1e-3,
                 record_every=None, dt_init=1e-10, dt_min=1e-18, dt_max=1e-5, newton_tol=1e-10,
                 newton_max_iter=12, undershoot_tol=1e-4, delta=None):
        self.epsilon = epsilon
        self.n = n
        self.x_left = x_left
        self.x_right = x_right
        self.n_cells = n_cells
        self.t_end = t_end
        self.record_every = record_every
        self.dt_init = dt_init
        self.dt_min = dt_min
        self.dt_max = dt_max
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.undershoot_tol = undershoot_tol
        self.delta = delta

    def _config(self) -> SolverConfig:
        reg = None if self.delta is None else RegularizationParams(self.delta)
        return SolverConfig(ModelParams(self.epsilon, self.n), self.t_end, reg, self.dt_init,
                            self.dt_min, self.dt_max, self.newton_tol, self.newton_max_iter,
                            self.record_every, self.undershoot_tol)

    def fit(self, X=None, y=None):
        self.grid_ = Grid(float(self.x_left), float(self.x_right), self.n_cells)
        self.config_ = self._config()
        if X is not None:
            check_profiles(X, self.grid_.n_cells)
        self.n_features_in_ = self.grid_.n_cells
        return self

    def transform(self, X):
        """Final profiles, one row per initial profile; trajectories are kept
        in ``trajectories_``.  Raises :class:`SolverAbort` on dt underflow."""
        check_is_fitted(self, "config_")
        X = check_profiles(X, self.grid_.n_cells)
        self.trajectories_ = []
        out = np.empty_like(X)
        for k, row in enumerate(X):
            traj = solve(Field(self.grid_, row), self.config_, raise_on_abort=True)
            self.trajectories_.append(traj)
            out[k] = traj.snapshots[-1].u.values
        return out


class QuasiStaticModel(BaseEstimator):
    """Tanner-law droplet dynamics; ``fit`` takes rows ``(a_i, b_i)``."""

    def __init__(self, gammas=None, total_mass=1.0, domain=(0.0, 1.0), merge_gap=None,
                 max_rel_change=0.004):
        self.gammas = gammas
        self.total_mass = total_mass
        self.domain = domain
        self.merge_gap = merge_gap
        self.max_rel_change = max_rel_change

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have rows (a, b)")
        k = X.shape[0]
        gammas = np.full(k, 1.0 / k) if self.gammas is None else np.asarray(self.gammas, float)
        self.droplets_ = DropletSet(tuple(X[:, 0]), tuple(X[:, 1]), tuple(gammas),
                                    float(self.total_mass), tuple(self.domain))
        self.n_features_in_ = 2
        return self

    def predict(self, t):
        """Total support at the times ``t`` (any order)."""
        check_is_fitted(self, "droplets_")
        t = check_times(t)
        order = np.argsort(t, kind="stable")
        out = np.empty_like(t)
        d, t_prev = self.droplets_, 0.0
        for i in order:
            if t[i] > t_prev:
                cfg = QsConfig(t_end=t[i] - t_prev, merge_gap=self.merge_gap,
                               max_rel_change=self.max_rel_change)
                d = qs_solve(d, cfg).states[-1]
                t_prev = t[i]
            out[i] = d.total_support
        return out


class PowerLawFit(RegressorMixin, BaseEstimator):
    """``size ~ prefactor * t**exponent`` by log-log least squares.

    ``X`` holds the times (1D or a single column), ``y`` the sizes.
    """

    def __init__(self, window=None, fraction=DEFAULT_FIT_FRACTION):
        self.window = window
        self.fraction = fraction

    def fit(self, X, y):
        t = check_times(X)
        y = check_array(y, ensure_2d=False, dtype=float)
        if y.shape != t.shape:
            raise ValueError("X and y must have the same number of samples")
        window = self.window if self.window is not None else default_window(t, self.fraction)
        fit = power_law_fit(t, y, window)
        self.exponent_, self.prefactor_, self.rms_ = fit.exponent, fit.prefactor, fit.rms
        self.window_ = fit.window
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        return self.prefactor_ * check_times(X) ** self.exponent_


__all__ = ["ThinFilmSimulator", "QuasiStaticModel", "PowerLawFit", "check_profiles",
           "check_times", "SolverAbort"]
