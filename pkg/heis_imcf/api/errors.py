"""
Error Hierarchy & Exit Codes
============================
Standardized errors raised by the library and mapped to CLI exit codes.

Features:
1. One base error carrying a machine code, message, details and field
2. Exit-code mapping used by the command line (0 ok, 2 config, 3 solver, 4 verify)
3. Serializable error payloads for structured logs and diagnostics files
"""

from datetime import datetime, timezone
import logging

logger = logging.getLogger(__name__)


# =============================================================================
# EXIT CODES
# =============================================================================

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NON_CONVERGENCE = 3
EXIT_VERIFICATION = 4


# =============================================================================
# STANDARDIZED ERROR SCHEMA
# =============================================================================

class HeisError(Exception):
    """Base error with standardized payload format"""

    def __init__(self, message: str, code: str = None, exit_code: int = EXIT_CONFIG,
                 details: dict = None, field: str = None):
        self.message = message
        self.code = code or 'BAD_INPUT'
        self.exit_code = exit_code
        self.details = details or {}
        self.field = field
        super().__init__(self.message)

    def to_dict(self):
        error_dict = {
            'error': {
                'code': self.code,
                'message': self.message,
                'exit_code': self.exit_code,
                'timestamp': datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z'),
            }
        }
        if self.field:
            error_dict['error']['field'] = self.field
        if self.details:
            error_dict['error']['details'] = self.details
        return error_dict


class ConfigError(HeisError):
    """Run configuration failed schema or semantic validation"""
    def __init__(self, message: str, field: str = None, details: dict = None):
        super().__init__(
            message=message,
            code='CONFIG_ERROR',
            exit_code=EXIT_CONFIG,
            field=field,
            details=details
        )


class InvalidParameterError(HeisError):
    """Numeric parameter outside its admissible range"""
    def __init__(self, name: str, value, expected: str):
        super().__init__(
            message=f"{name}={value!r} is invalid: expected {expected}",
            code='INVALID_PARAMETER',
            exit_code=EXIT_CONFIG,
            field=name,
            details={'value': repr(value), 'expected': expected}
        )


class DimensionMismatchError(HeisError):
    """Operands live in groups of different dimension"""
    def __init__(self, left: int, right: int):
        super().__init__(
            message=f"Dimension mismatch: n={left} vs n={right}",
            code='DIMENSION_MISMATCH',
            exit_code=EXIT_CONFIG,
            details={'left': left, 'right': right}
        )


class SingularPointError(HeisError):
    """Barrier evaluated at (or too close to) its centre"""
    def __init__(self, distance: float, threshold: float):
        super().__init__(
            message=f"Point at gauge distance {distance:.3e} from the centre (threshold {threshold:.3e})",
            code='SINGULAR_POINT',
            exit_code=EXIT_CONFIG,
            details={'distance': distance, 'threshold': threshold}
        )


class QuadratureError(HeisError):
    """Surface quadrature produced a non-finite value"""
    def __init__(self, message: str = "Quadrature produced a non-finite value", details: dict = None):
        super().__init__(
            message=message,
            code='QUADRATURE_FAILURE',
            exit_code=EXIT_VERIFICATION,
            details=details
        )


class EmptyObstacleError(HeisError):
    """Obstacle voxelizes to no node or touches the box faces"""
    def __init__(self, message: str = "Obstacle contains no grid node", details: dict = None):
        super().__init__(
            message=message,
            code='EMPTY_OBSTACLE',
            exit_code=EXIT_CONFIG,
            details=details
        )


class NonConvergedError(HeisError):
    """Picard budget exhausted; the best iterate is attached"""
    def __init__(self, message: str, solution=None, details: dict = None):
        super().__init__(
            message=message,
            code='NON_CONVERGED',
            exit_code=EXIT_NON_CONVERGENCE,
            details=details
        )
        self.solution = solution


class MaxPrincipleViolationError(HeisError):
    """Potential leaves [0, 1] by more than the configured tolerance"""
    def __init__(self, violation: float, tolerance: float, where: str):
        super().__init__(
            message=f"Maximum principle violated by {violation:.3e} on {where} (tolerance {tolerance:.1e})",
            code='MAX_PRINCIPLE_VIOLATION',
            exit_code=EXIT_NON_CONVERGENCE,
            details={'violation': violation, 'tolerance': tolerance, 'where': where}
        )


class NonPositivePotentialError(HeisError):
    """Logarithmic substitution requested on a nonpositive potential"""
    def __init__(self, count: int, minimum: float):
        super().__init__(
            message=f"{count} node(s) with nonpositive potential (min {minimum:.3e})",
            code='NONPOSITIVE_POTENTIAL',
            exit_code=EXIT_NON_CONVERGENCE,
            details={'count': count, 'minimum': minimum}
        )


class EmptyEvaluationSetError(HeisError):
    """No node survives the stencil and gradient-floor exclusions"""
    def __init__(self, check: str):
        super().__init__(
            message=f"Check '{check}' has an empty evaluation set",
            code='EMPTY_EVALUATION_SET',
            exit_code=EXIT_VERIFICATION,
            field=check
        )


class TruncatedLevelDataError(HeisError):
    """Level data reaches the box faces or is missing"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(
            message=message,
            code='TRUNCATED',
            exit_code=EXIT_VERIFICATION,
            details=details
        )


class VerificationError(HeisError):
    """One or more checks failed"""
    def __init__(self, failed: list):
        super().__init__(
            message=f"{len(failed)} check(s) failed: {', '.join(failed)}",
            code='VERIFICATION_FAILED',
            exit_code=EXIT_VERIFICATION,
            details={'failed': list(failed)}
        )
