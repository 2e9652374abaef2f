"""
Run Configuration Validation
Schema and semantic validation of run configurations
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import jsonschema

from heis_imcf.api.errors import ConfigError
from heis_imcf.models.grid_models import MIN_NODES
from heis_imcf.validation.schemas import COMMAND_REQUIREMENTS, REPORT_SCHEMA, RUN_CONFIG_SCHEMA

logger = logging.getLogger(__name__)


class RunConfigValidator:
    """Validator for run configurations"""

    # Validation rules
    MIN_P = 1.0
    MAX_P = 2.0
    MIN_NODES = MIN_NODES

    @staticmethod
    def validate_schema(data: Dict[str, Any]) -> Tuple[bool, List[str]]:
        """
        Validate against the run-config JSON schema

        Returns:
            tuple: (is_valid, errors)
        """
        validator = jsonschema.Draft7Validator(RUN_CONFIG_SCHEMA)
        errors = []
        for error in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
            where = '/'.join(str(part) for part in error.absolute_path) or '<root>'
            errors.append(f"{where}: {error.message}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_box(box: Dict[str, Any]) -> Tuple[bool, List[str]]:
        errors = []
        m = box.get('m')
        counts = [m] * 3 if isinstance(m, int) else list(m or [])
        if len(counts) != 3:
            errors.append("Box m must be an integer or three integers")
        elif min(counts) < RunConfigValidator.MIN_NODES:
            errors.append(f"Box needs at least {RunConfigValidator.MIN_NODES} nodes per axis, got {counts}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_exponents(values: List[float], name: str, decreasing: bool = True) -> Tuple[bool, List[str]]:
        """Exponents in (1, 2], strictly decreasing when `decreasing`"""
        errors = []
        for p in values:
            if not RunConfigValidator.MIN_P < p <= RunConfigValidator.MAX_P:
                errors.append(f"{name} value {p} must lie in (1, 2]")
        if decreasing and any(b >= a for a, b in zip(values, values[1:])):
            errors.append(f"{name} must be strictly decreasing")
        return len(errors) == 0, errors

    @staticmethod
    def validate_solver(solver: Dict[str, Any]) -> Tuple[bool, List[str]]:
        errors = []
        schedule = solver.get('sigma_schedule')
        if schedule is not None and any(b >= a for a, b in zip(schedule, schedule[1:])):
            errors.append("solver.sigma_schedule must be strictly decreasing")
        if 'p_continuation' in solver:
            _, p_errors = RunConfigValidator.validate_exponents(solver['p_continuation'], 'solver.p_continuation')
            errors.extend(p_errors)
        return len(errors) == 0, errors

    @staticmethod
    def validate_obstacle(obstacle: Dict[str, Any], box: Dict[str, Any]) -> Tuple[bool, List[str]]:
        """
        Every gauge ball strictly inside the box.

        A ball of radius r about c reaches |x - cx| <= r and
        |t - ct| <= r^2/4 + r|z_c|/2.
        """
        errors = []
        balls = RunConfigValidator._balls(obstacle)
        Lxy, Lt = box['Lxy'], box['Lt']
        for center, r in balls:
            cx, cy, ct = center
            zc = (cx * cx + cy * cy) ** 0.5
            if abs(cx) + r >= Lxy or abs(cy) + r >= Lxy:
                errors.append(f"Gauge ball at {list(center)} with radius {r} reaches the x/y faces")
            if abs(ct) + r * r / 4.0 + r * zc / 2.0 >= Lt:
                errors.append(f"Gauge ball at {list(center)} with radius {r} reaches the t faces")
        return len(errors) == 0, errors

    @staticmethod
    def validate_run_config(data: Dict[str, Any], command: str = None) -> Tuple[bool, List[str]]:
        """
        Validate a run configuration for a command

        Args:
            data (dict): Parsed run configuration
            command (str): CLI command; defaults to data['command']

        Returns:
            tuple: (is_valid, errors)
        """
        valid, errors = RunConfigValidator.validate_schema(data)
        if not valid:
            return False, errors

        command = command or data.get('command')
        if command not in COMMAND_REQUIREMENTS:
            return False, [f"Unknown command: {command}"]
        if data.get('command') not in (None, command):
            errors.append(f"Config is for '{data['command']}', not '{command}'")
        missing = [key for key in COMMAND_REQUIREMENTS[command] if key not in data]
        if missing:
            errors.append(f"Missing required key(s) for {command}: {', '.join(missing)}")

        if 'box' in data:
            errors.extend(RunConfigValidator.validate_box(data['box'])[1])
            if 'obstacle' in data:
                errors.extend(RunConfigValidator.validate_obstacle(data['obstacle'], data['box'])[1])
        if 'solver' in data:
            errors.extend(RunConfigValidator.validate_solver(data['solver'])[1])
        if 'p' in data:
            errors.extend(RunConfigValidator.validate_exponents(data['p'], 'p', decreasing=False)[1])
        if 's_values' in data and any(b <= a for a, b in zip(data['s_values'], data['s_values'][1:])):
            errors.append("s_values must be strictly increasing")

        return len(errors) == 0, errors

    @staticmethod
    def _balls(obstacle: Dict[str, Any]) -> List[Tuple[tuple, float]]:
        if 'gauge_ball' in obstacle:
            ball = obstacle['gauge_ball']
            return [(tuple(ball.get('center', (0.0, 0.0, 0.0))), float(ball['radius']))]
        balls = []
        for item in obstacle.get('union', []):
            balls.extend(RunConfigValidator._balls(item))
        return balls


def load_run_config(path, command: str) -> Dict[str, Any]:
    """Read and validate a run configuration; ConfigError on any problem"""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}", field='config')
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file is not valid JSON: {e}", field='config')

    valid, errors = RunConfigValidator.validate_run_config(data, command)
    if not valid:
        logger.error("Run configuration rejected", extra={'extra_data': {'path': str(path), 'errors': errors}})
        raise ConfigError(f"Invalid run configuration {path}: {errors[0]}", field='config',
                          details={'errors': errors})
    return data


def validate_report(report: Dict[str, Any]) -> None:
    """Raise ConfigError when a verify report does not match its schema"""
    try:
        jsonschema.validate(instance=report, schema=REPORT_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"Report does not match schema: {e.message}", field='report')
