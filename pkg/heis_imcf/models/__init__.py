"""
Models Package
Value types shared by the geometry, solver and verification services
"""
from heis_imcf.models.geometry_models import GeometryParams, GroupPoint, FrameVector
from heis_imcf.models.grid_models import Box, NodeLabel, DomainMask, ScalarField, FrameField
from heis_imcf.models.barrier_models import PowerBarrier, FlowLaw
from heis_imcf.models.solver_models import (
    OuterBC, InitialGuess, Scheme, LevelStatus, SolverConfig, PotentialSolution, LevelRadii,
)
from heis_imcf.models.report_models import CheckKind, CheckReport, WeakNormParams

__all__ = [
    'GeometryParams', 'GroupPoint', 'FrameVector',
    'Box', 'NodeLabel', 'DomainMask', 'ScalarField', 'FrameField',
    'PowerBarrier', 'FlowLaw',
    'OuterBC', 'InitialGuess', 'Scheme', 'LevelStatus', 'SolverConfig', 'PotentialSolution', 'LevelRadii',
    'CheckKind', 'CheckReport', 'WeakNormParams',
]
