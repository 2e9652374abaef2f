"""
Job Service
===========
Handler registry and a process pool for independent (p, eps) sweep jobs.

This service provides:
1. Handler registration by job type
2. Job execution with error capture into a result record
3. Parallel execution with results in submission order
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence
import logging
import traceback

from config import Config
from heis_imcf.api.errors import ConfigError, HeisError, EXIT_OK
from heis_imcf.services.observability import metrics

logger = logging.getLogger(__name__)


class JobStatus:
    """Job status constants"""
    COMPLETED = 'completed'
    FAILED = 'failed'


@dataclass(frozen=True)
class Job:
    job_type: str
    payload: dict
    job_id: str


@dataclass
class JobResult:
    job_id: str
    job_type: str
    status: str
    result: dict = field(default_factory=dict)
    error: Optional[dict] = None
    exit_code: int = EXIT_OK
    metrics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == JobStatus.COMPLETED


class JobService:
    """
    Registry and runner for sweep jobs.
    """

    # Registry of job handlers
    _handlers: Dict[str, Callable[[dict], dict]] = {}

    @classmethod
    def register_handler(cls, job_type: str, handler: Callable[[dict], dict]):
        """
        Register a handler function for a job type.

        Args:
            job_type: The job type name, e.g. 'solve.continuation'
            handler: A callable taking the payload dict and returning a result dict
        """
        cls._handlers[job_type] = handler
        logger.debug(f"Registered handler for job type: {job_type}")

    @classmethod
    def get_handler(cls, job_type: str) -> Optional[Callable[[dict], dict]]:
        """Get the registered handler for a job type"""
        return cls._handlers.get(job_type)

    @staticmethod
    def execute_job(job: Job) -> JobResult:
        """
        Execute a job using its registered handler.

        Library errors are captured with their exit code; anything else is
        re-raised after logging.
        """
        handler = JobService.get_handler(job.job_type)
        if handler is None:
            raise ConfigError(f"No handler registered for job type: {job.job_type}", field='job_type')

        try:
            result = handler(job.payload)
            metrics.increment('jobs_total', labels={'status': JobStatus.COMPLETED})
            logger.info(f"Job {job.job_id} completed")
            return JobResult(job.job_id, job.job_type, JobStatus.COMPLETED, result or {})

        except HeisError as e:
            metrics.increment('jobs_total', labels={'status': JobStatus.FAILED})
            logger.error(f"Job {job.job_id} failed: {e.message}", extra={'extra_data': e.to_dict()})
            return JobResult(job.job_id, job.job_type, JobStatus.FAILED,
                             result=getattr(e, 'partial', {}) or {},
                             error=e.to_dict(), exit_code=e.exit_code)

        except Exception:
            logger.error(f"Job {job.job_id} crashed:\n{traceback.format_exc()}")
            raise

    @staticmethod
    def run_jobs(jobs: Sequence[Job], max_workers: int = 1) -> List[JobResult]:
        """
        Run jobs and return their results in submission order.

        max_workers is clamped to Config.THREADS; one worker runs inline.
        """
        workers = max(1, min(int(max_workers), Config.THREADS, len(jobs) or 1))
        if workers == 1:
            return [JobService.execute_job(job) for job in jobs]

        logger.info(f"Running {len(jobs)} jobs on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_execute_in_worker, job) for job in jobs]
            results = [future.result() for future in futures]
        for result in results:
            metrics.merge(result.metrics)
        return results


def _execute_in_worker(job: Job) -> JobResult:
    """Process-pool entry point; the worker registers handlers on import"""
    from heis_imcf.services import job_handlers  # noqa: F401

    metrics.reset()
    result = JobService.execute_job(job)
    result.metrics = metrics.get_metrics()
    return result


def register_handler(job_type: str, handler: Callable[[dict], dict]):
    JobService.register_handler(job_type, handler)


def get_handler(job_type: str) -> Optional[Callable[[dict], dict]]:
    return JobService.get_handler(job_type)


def run_jobs(jobs: Sequence[Job], max_workers: int = 1) -> List[JobResult]:
    return JobService.run_jobs(jobs, max_workers)
