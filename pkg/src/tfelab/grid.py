"""Uniform cell-centred grids, fields and the finite-difference stencils.

Boundary handling follows one convention throughout the package: the
Neumann condition ``u_x = 0`` is carried by a single layer of reflection
ghosts (``f_0 = f_1``, ``f_{N+1} = f_N``), while the null-flux condition is
imposed directly on the boundary faces by the solver and never via ghosts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_CELLS = 8


@dataclass(frozen=True)
class Grid:
    """Uniform 1D cell layout on ``[x_left, x_right]``."""

    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.x_left) and np.isfinite(self.x_right)):
            raise ValueError("grid bounds must be finite")
        if not self.x_left < self.x_right:
            raise ValueError("x_left must be smaller than x_right")
        if int(self.n_cells) != self.n_cells or self.n_cells < MIN_CELLS:
            raise ValueError(f"n_cells must be an integer >= {MIN_CELLS}, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "x_left", float(self.x_left))
        object.__setattr__(self, "x_right", float(self.x_right))

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def centers(self) -> np.ndarray:
        return self.x_left + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        """Interior face positions (``n_cells - 1`` of them)."""
        return self.x_left + np.arange(1, self.n_cells) * self.h


@dataclass(frozen=True, eq=False)
class Field:
    """Cell-centred samples of a scalar function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.n_cells:
            raise ValueError(
                f"field has {values.size} values, grid has {self.grid.n_cells} cells"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, np.asarray(func(grid.centers), dtype=float) * np.ones(grid.n_cells))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __len__(self):
        return self.grid.n_cells


def make_uniform_grid(x_left: float, x_right: float, n_cells: int) -> Grid:
    return Grid(x_left, x_right, n_cells)


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


def _spacing(f, h: float | None) -> float:
    if isinstance(f, Field):
        return f.grid.h
    if h is None:
        raise TypeError("grid spacing h is required for raw arrays")
    return h


def with_ghosts(values: np.ndarray) -> np.ndarray:
    """Pad with one reflection ghost on each side."""
    return np.concatenate(([values[0]], values, [values[-1]]))


def integrate(f, h: float | None = None) -> float:
    """Midpoint rule ``h * sum(f_i)``."""
    return float(_spacing(f, h) * np.sum(_values(f)))


def face_third_derivative(f, h: float | None = None) -> np.ndarray:
    """Third difference at the ``n_cells - 1`` interior faces.

    The value at face ``i+1/2`` is ``(f_{i+2} - 3 f_{i+1} + 3 f_i - f_{i-1}) / h**3``
    with reflection ghosts substituted at the two extreme faces.
    """
    h = _spacing(f, h)
    g = with_ghosts(_values(f))
    # g[k] holds f_{k}; interior faces i+1/2 for i = 1..N-1
    # grouped as differences so that constants give exactly zero
    return ((g[3:] - g[:-3]) - 3.0 * (g[2:-1] - g[1:-2])) / h**3


def face_first_derivative(f, h: float | None = None) -> np.ndarray:
    """``(f_{i+1} - f_i) / h`` at the interior faces."""
    h = _spacing(f, h)
    return np.diff(_values(f)) / h


def cell_first_and_second_derivative(f, h: float | None = None):
    """Centred first and second differences at cell centres, ghosts by reflection.

    Returns Fields when given a Field, arrays otherwise.
    """
    h = _spacing(f, h)
    g = with_ghosts(_values(f))
    d1 = (g[2:] - g[:-2]) / (2.0 * h)
    d2 = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / h**2
    if isinstance(f, Field):
        return Field(f.grid, d1), Field(f.grid, d2)
    return d1, d2
