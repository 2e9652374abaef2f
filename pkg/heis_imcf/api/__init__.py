"""
API Package
Error types and exit codes shared by the library and the command line
"""
from heis_imcf.api.errors import (
    HeisError, ConfigError, InvalidParameterError, DimensionMismatchError,
    SingularPointError, QuadratureError, EmptyObstacleError, NonConvergedError,
    MaxPrincipleViolationError, NonPositivePotentialError, EmptyEvaluationSetError,
    TruncatedLevelDataError, VerificationError,
    EXIT_OK, EXIT_CONFIG, EXIT_NON_CONVERGENCE, EXIT_VERIFICATION,
)

__all__ = [
    'HeisError', 'ConfigError', 'InvalidParameterError', 'DimensionMismatchError',
    'SingularPointError', 'QuadratureError', 'EmptyObstacleError', 'NonConvergedError',
    'MaxPrincipleViolationError', 'NonPositivePotentialError', 'EmptyEvaluationSetError',
    'TruncatedLevelDataError', 'VerificationError',
    'EXIT_OK', 'EXIT_CONFIG', 'EXIT_NON_CONVERGENCE', 'EXIT_VERIFICATION',
]
