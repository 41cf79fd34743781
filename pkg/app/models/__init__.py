"""
Quantum systems, trajectories, networks and run records
"""

from app.models.network import Network, ParamStore
from app.models.quantum import SystemSpec, build_system
from app.models.run_record import LossBreakdown, RunRecord
from app.models.trajectory import TimeGrid, Trajectory

__all__ = ['LossBreakdown', 'Network', 'ParamStore', 'RunRecord', 'SystemSpec', 'TimeGrid',
           'Trajectory', 'build_system']
