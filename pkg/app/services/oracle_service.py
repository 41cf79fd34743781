"""
Classical RK4 reference integration of the coupled (O, Q, rho) system
"""

import logging
from typing import Callable, Sequence, Tuple

import numpy as np

from app.models.quantum import SystemSpec, check_density_matrix, rhs_O, rhs_Q, rhs_rho
from app.models.trajectory import TimeGrid, Trajectory
from app.utils.errors import DimensionError, IntegrationError
from app.utils.linalg import hermitian_eigendecompose
from config.settings import config

logger = logging.getLogger(__name__)

State = Tuple[np.ndarray, ...]
Derivative = Callable[[float, State], State]


class CatmullRomInterpolator:
    """Cubic interpolation of a trajectory on its uniform grid; ends use linear ghost points."""

    def __init__(self, trajectory: Trajectory):
        self.values = trajectory.values
        self.h = trajectory.grid.spacing
        self.n = trajectory.grid.t_f

    def __call__(self, t: float) -> np.ndarray:
        v = self.values
        if self.n == 1:
            return v[0]
        s = t / self.h
        i = min(max(int(np.floor(s)), 0), self.n - 2)
        u = s - i
        p1, p2 = v[i], v[i + 1]
        p0 = v[i - 1] if i > 0 else 2.0 * p1 - p2
        p3 = v[i + 2] if i + 2 < self.n else 2.0 * p2 - p1
        return 0.5 * (2.0 * p1
                      + (p2 - p0) * u
                      + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
                      + (3.0 * p1 - p0 - 3.0 * p2 + p3) * u * u * u)


class OracleService:
    """Service class for reference integrations."""

    @staticmethod
    def rk4_step(state: Sequence[np.ndarray], dt: float, rhs: Derivative, t: float = 0.0) -> State:
        """One classical RK4 step applied componentwise to a stacked state."""
        if not dt > 0:
            raise DimensionError("RK4 step size must be positive")
        state = tuple(state)

        def stage(time, y):
            k = tuple(rhs(time, y))
            if not all(np.isfinite(c).all() for c in k):
                raise IntegrationError("Non-finite derivative", time)
            return k

        k1 = stage(t, state)
        k2 = stage(t + dt / 2, tuple(y + (dt / 2) * k for y, k in zip(state, k1)))
        k3 = stage(t + dt / 2, tuple(y + (dt / 2) * k for y, k in zip(state, k2)))
        k4 = stage(t + dt, tuple(y + dt * k for y, k in zip(state, k3)))
        return tuple(y + (dt / 6) * (a + 2 * b + 2 * c + d)
                     for y, a, b, c, d in zip(state, k1, k2, k3, k4))

    @staticmethod
    def _march(state: State, grid: TimeGrid, substeps: int, rhs: Derivative,
               on_sample: Callable[[int, State], None]) -> None:
        if substeps < 1:
            raise DimensionError("substeps must be at least 1")
        on_sample(0, state)
        if grid.t_f == 1:
            return
        times = grid.times
        dt = grid.spacing / substeps
        for i in range(grid.intervals):
            for k in range(substeps):
                state = OracleService.rk4_step(state, dt, rhs, t=times[i] + k * dt)
            on_sample(i + 1, state)

    @staticmethod
    def integrate_system(spec: SystemSpec, rho0: np.ndarray, grid: TimeGrid,
                         substeps: int = config.ORACLE_SUBSTEPS) -> Tuple[Trajectory, Trajectory, Trajectory]:
        """Integrate O, Q and rho jointly from O(0) = Q(0) = 0."""
        rho0 = np.asarray(rho0, dtype=np.complex128)
        check_density_matrix(rho0)
        d = spec.dim
        zero = np.zeros((d, d), dtype=np.complex128)
        out = np.zeros((3, grid.t_f, d, d), dtype=np.complex128)
        monitor = _PsdMonitor(spec.name)

        def rhs(t, y):
            O, Q, rho = y
            return rhs_O(O, Q, spec), rhs_Q(O, Q, spec), rhs_rho(rho, O, Q, spec, check=False)

        def on_sample(i, y):
            for c in range(3):
                out[c, i] = y[c]
            monitor.observe(grid.times[i], y[2])

        OracleService._march((zero, zero.copy(), rho0.copy()), grid, substeps, rhs, on_sample)
        monitor.report()
        return Trajectory(grid, out[0]), Trajectory(grid, out[1]), Trajectory(grid, out[2])

    @staticmethod
    def integrate_rho_with_priors(spec: SystemSpec, rho0: np.ndarray, oprior: Trajectory,
                                  qprior: Trajectory, grid: TimeGrid,
                                  substeps: int = config.ORACLE_SUBSTEPS) -> Trajectory:
        """Integrate the master equation alone, reading O and Q from interpolated priors."""
        rho0 = np.asarray(rho0, dtype=np.complex128)
        check_density_matrix(rho0)
        oprior.check_same_grid(qprior)
        grid.refinement_factor(oprior.grid)
        o_at = CatmullRomInterpolator(oprior)
        q_at = CatmullRomInterpolator(qprior)
        out = np.zeros((grid.t_f, spec.dim, spec.dim), dtype=np.complex128)
        monitor = _PsdMonitor(spec.name)

        def rhs(t, y):
            return (rhs_rho(y[0], o_at(t), q_at(t), spec, check=False),)

        def on_sample(i, y):
            out[i] = y[0]
            monitor.observe(grid.times[i], y[0])

        OracleService._march((rho0.copy(),), grid, substeps, rhs, on_sample)
        monitor.report()
        return Trajectory(grid, out)


class _PsdMonitor:
    """Collects PSD-floor violations of rho along a trajectory and warns once."""

    def __init__(self, label: str, floor: float = config.PSD_WARN_FLOOR):
        self.label = label
        self.floor = floor
        self.violations = 0
        self.first_time = None
        self.worst = 0.0

    def observe(self, t: float, rho: np.ndarray) -> None:
        smallest = float(hermitian_eigendecompose(0.5 * (rho + rho.conj().T)).eigenvalues[-1])
        if smallest < self.floor:
            self.violations += 1
            self.worst = min(self.worst, smallest)
            if self.first_time is None:
                self.first_time = t

    def report(self) -> None:
        if self.violations:
            logger.warning("%s: rho left the PSD cone at %d grid points (first t=%.4g, min eigenvalue %.3e)",
                           self.label, self.violations, self.first_time, self.worst)
