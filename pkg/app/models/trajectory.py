"""
Uniform time grids and matrix-valued trajectories sampled on them
"""

from dataclasses import dataclass

import numpy as np

from app.utils.errors import DimensionError


@dataclass(frozen=True)
class TimeGrid:
    """t_i = i * T_tot / (t_f - 1) for i = 0 .. t_f - 1, starting at t_0 = 0."""
    t_f: int
    T_tot: float

    def __post_init__(self):
        if self.t_f < 1:
            raise DimensionError("A time grid needs at least one point")
        if not self.T_tot > 0:
            raise DimensionError("T_tot must be positive")

    @property
    def times(self) -> np.ndarray:
        if self.t_f == 1:
            return np.zeros(1)
        return np.arange(self.t_f) * (self.T_tot / (self.t_f - 1))

    @property
    def spacing(self) -> float:
        return self.T_tot / (self.t_f - 1) if self.t_f > 1 else 0.0

    @property
    def intervals(self) -> int:
        return self.t_f - 1

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.intervals * factor + 1, self.T_tot)

    def refinement_factor(self, finer: "TimeGrid") -> int:
        """How many intervals of `finer` make up one interval of this grid."""
        if abs(finer.T_tot - self.T_tot) > 1e-12 * self.T_tot:
            raise DimensionError(f"Grids end at different times ({self.T_tot} vs {finer.T_tot})")
        if self.intervals == 0:
            return 1
        if finer.intervals % self.intervals:
            raise DimensionError(
                f"A {finer.t_f}-point grid does not refine a {self.t_f}-point grid")
        return finer.intervals // self.intervals


@dataclass(frozen=True)
class Trajectory:
    """One d x d complex matrix per grid point, stored as an (t_f, d, d) array."""
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[0] != self.grid.t_f:
            raise DimensionError(
                f"Trajectory of shape {self.values.shape} does not match a {self.grid.t_f}-point grid")

    def __len__(self) -> int:
        return self.grid.t_f

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    def entry(self, row: int, col: int) -> np.ndarray:
        return self.values[:, row, col]

    def check_same_grid(self, other: "Trajectory") -> None:
        if self.grid != other.grid or self.values.shape != other.values.shape:
            raise DimensionError("Trajectories live on different grids or have different shapes")
