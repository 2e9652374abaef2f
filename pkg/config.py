import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    # Parallel job bound; --jobs is clamped to it
    THREADS = int(os.getenv('HEIS_IMCF_THREADS', str(os.cpu_count() or 1)))

    LOG_LEVEL = os.getenv('HEIS_IMCF_LOG_LEVEL', 'INFO')
    LOG_FORMAT = os.getenv('HEIS_IMCF_LOG_FORMAT', 'json')

    OUTPUT_DIR = os.getenv('HEIS_IMCF_OUT', 'results')
    DEFAULT_SEED = int(os.getenv('HEIS_IMCF_SEED', '20240917'))

    # Numeric defaults shared by every module
    EXACT_TOL = 1e-10
    GRADIENT_FLOOR = 1e-8
    STENCIL_MARGIN = 3
    SINGULAR_RADIUS = 1e-8


class TestingConfig(Config):
    LOG_LEVEL = 'WARNING'
    LOG_FORMAT = 'text'
    THREADS = 1
    OUTPUT_DIR = os.getenv('HEIS_IMCF_TEST_OUT', 'test-results')
