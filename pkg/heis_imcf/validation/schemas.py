"""
JSON Schemas
============
Draft 7 schemas for run configurations and verification reports.
"""

from heis_imcf.models.solver_models import InitialGuess, OuterBC, Scheme

_NUMBER_LIST = {'type': 'array', 'items': {'type': 'number'}, 'minItems': 1}

_POINT = {'type': 'array', 'items': {'type': 'number'}, 'minItems': 3, 'maxItems': 3}

_BOX = {
    'type': 'object',
    'required': ['Lxy', 'Lt', 'm'],
    'additionalProperties': False,
    'properties': {
        'Lxy': {'type': 'number', 'exclusiveMinimum': 0},
        'Lt': {'type': 'number', 'exclusiveMinimum': 0},
        'm': {
            'oneOf': [
                {'type': 'integer', 'minimum': 16},
                {'type': 'array', 'items': {'type': 'integer', 'minimum': 16}, 'minItems': 3, 'maxItems': 3},
            ],
        },
    },
}

_GAUGE_BALL = {
    'type': 'object',
    'required': ['radius'],
    'additionalProperties': False,
    'properties': {
        'center': _POINT,
        'radius': {'type': 'number', 'exclusiveMinimum': 0},
    },
}

_OBSTACLE = {
    'type': 'object',
    'minProperties': 1,
    'maxProperties': 1,
    'properties': {
        'gauge_ball': _GAUGE_BALL,
        'union': {'type': 'array', 'minItems': 1, 'items': {'$ref': '#/definitions/obstacle'}},
    },
    'additionalProperties': False,
}

_SOLVER = {
    'type': 'object',
    'additionalProperties': False,
    'properties': {
        'sigma_schedule': {'type': 'array', 'items': {'type': 'number', 'minimum': 0}, 'minItems': 1},
        'picard_tol': {'type': 'number', 'exclusiveMinimum': 0},
        'cg_tol': {'type': 'number', 'exclusiveMinimum': 0},
        'max_picard': {'type': 'integer', 'minimum': 1},
        'max_cg_iter': {'type': ['integer', 'null'], 'minimum': 1},
        'outer_bc': {'enum': list(OuterBC.ALL)},
        'initial_guess': {'enum': list(InitialGuess.ALL)},
        'p_continuation': _NUMBER_LIST,
        'max_principle_tol': {'type': 'number', 'exclusiveMinimum': 0},
        'clamp_tol': {'type': 'number', 'exclusiveMinimum': 0},
        'scheme': {'enum': list(Scheme.ALL)},
        'cg_forcing': {'type': 'number', 'minimum': 0, 'exclusiveMaximum': 1},
        'ghost_damping': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
    },
}

_VERIFY = {
    'type': 'object',
    'properties': {
        'checks': {'type': 'array', 'items': {'type': 'string'}},
        'p_check': {'type': 'number'},
        'refine': {'type': 'boolean'},
        'tol': {'type': 'number', 'exclusiveMinimum': 0},
        'pass_fraction': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
        'oracle_tol': {'type': 'number', 'exclusiveMinimum': 0},
        'annulus': {'type': 'array', 'items': {'type': 'number', 'exclusiveMinimum': 0},
                    'minItems': 2, 'maxItems': 2},
        'bumps': {'type': 'integer', 'minimum': 1},
        'bump_radius': {'type': 'number', 'exclusiveMinimum': 0},
        'bump_amplitude': {'type': 'number', 'exclusiveMinimum': 0},
        'perturbation': {'type': 'number', 'exclusiveMinimum': 0},
        'weak_norm_factor': {'type': 'number', 'minimum': 1},
        'harnack_centers': {'type': 'array', 'items': _POINT},
        'harnack_radius': {'type': 'number', 'exclusiveMinimum': 0},
    },
    'additionalProperties': False,
}

RUN_CONFIG_SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    '$id': 'heis-imcf/run-config',
    'title': 'heis-imcf run configuration',
    'type': 'object',
    'definitions': {'obstacle': _OBSTACLE},
    'properties': {
        'command': {'enum': ['selftest', 'barrier', 'solve', 'flow', 'verify']},
        'seed': {'type': 'integer', 'minimum': 0},
        'out_dir': {'type': 'string'},
        'box': _BOX,
        'obstacle': {'$ref': '#/definitions/obstacle'},
        'solver': _SOLVER,
        'p': _NUMBER_LIST,
        'eps': {'type': 'array', 'items': {'type': 'number', 'minimum': 0, 'maximum': 1}, 'minItems': 1},
        'R0': {'type': 'number', 'exclusiveMinimum': 0},
        'k_rule': {'enum': ['quartic', 'quadratic']},
        'samples': {'type': 'integer', 'minimum': 1},
        'r_max': {'type': 'number', 'exclusiveMinimum': 0},
        'fd_samples': {'type': 'integer', 'minimum': 0},
        'sphere_samples': {'type': 'integer', 'minimum': 1},
        's_values': _NUMBER_LIST,
        'mode': {'enum': ['exact', 'numeric']},
        'verify': _VERIFY,
        'selftest': {
            'type': 'object',
            'properties': {'checks': {'type': 'array', 'items': {'type': 'string'}}},
            'additionalProperties': False,
        },
    },
    'additionalProperties': False,
}

# Which top-level keys each command needs
COMMAND_REQUIREMENTS = {
    'selftest': [],
    'barrier': ['p', 'eps'],
    'solve': ['box', 'obstacle', 'eps'],
    'flow': ['box', 'obstacle', 'eps'],
    'verify': ['box', 'obstacle', 'eps'],
}

_CHECK_REPORT = {
    'type': 'object',
    'required': ['name', 'kind', 'evaluated', 'excluded', 'worst', 'tolerance', 'order', 'passed', 'details'],
    'properties': {
        'name': {'type': 'string'},
        'kind': {'enum': ['equality', 'inequality', 'informational']},
        'evaluated': {'type': 'integer', 'minimum': 0},
        'excluded': {'type': 'integer', 'minimum': 0},
        'worst': {'type': ['number', 'string']},
        'tolerance': {'type': ['number', 'string']},
        'order': {'type': ['number', 'string', 'null']},
        'passed': {'type': 'boolean'},
        'details': {'type': 'object'},
    },
}

REPORT_SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    '$id': 'heis-imcf/verify-report',
    'title': 'heis-imcf verification report',
    'type': 'object',
    'required': ['meta', 'checks', 'failed', 'passed'],
    'properties': {
        'meta': {
            'type': 'object',
            'required': ['config_hash', 'seed', 'eps', 'Lxy', 'Lt', 'm'],
        },
        'checks': {'type': 'array', 'items': _CHECK_REPORT},
        'failed': {'type': 'array', 'items': {'type': 'string'}},
        'passed': {'type': 'boolean'},
        'solver': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['p', 'max_principle_violation', 'clamped_nodes'],
                'properties': {
                    'p': {'type': 'number'},
                    'max_principle_violation': {'type': 'number', 'minimum': 0},
                    'clamped_nodes': {'type': 'integer', 'minimum': 0},
                },
            },
        },
    },
}

SCHEMAS = {
    'run_config': RUN_CONFIG_SCHEMA,
    'verify_report': REPORT_SCHEMA,
}
