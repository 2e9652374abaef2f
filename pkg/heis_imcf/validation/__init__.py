"""
Validation Package
Run configuration and report validation
"""
from heis_imcf.validation.config_validation import RunConfigValidator, load_run_config, validate_report
from heis_imcf.validation.schemas import REPORT_SCHEMA, RUN_CONFIG_SCHEMA, SCHEMAS

__all__ = ['RunConfigValidator', 'load_run_config', 'validate_report',
           'REPORT_SCHEMA', 'RUN_CONFIG_SCHEMA', 'SCHEMAS']
