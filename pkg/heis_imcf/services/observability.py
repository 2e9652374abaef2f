"""
Metrics and structured logging for solver runs and verification jobs.

Worker processes start from a reset collector and hand their snapshot back
with the job result; the parent folds it in with `metrics.merge`. Only the
`*_duration_seconds` histograms are wall-clock dependent, and those go to
timings.json alone.
"""

from datetime import datetime, timezone
from functools import wraps
import json
import logging
import threading
import time
from typing import Dict, Optional

import numpy as np

DURATION_SUFFIX = '_duration_seconds'


def _empty_histogram() -> Dict:
    return {'count': 0, 'sum': 0.0, 'min': float('inf'), 'max': float('-inf')}


def _fold(hist: Dict, count: int, total: float, low: float, high: float):
    hist['count'] += count
    hist['sum'] += total
    hist['min'] = min(hist['min'], low)
    hist['max'] = max(hist['max'], high)


class MetricsCollector:
    """
    Process-wide counters, gauges and histograms.

    Keys carry their labels, e.g. `checks_total{status=pass}` or
    `cg_iterations{p=1.5}`.
    """

    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._store = cls._empty_store()
        return cls._instance

    @staticmethod
    def _empty_store() -> Dict:
        return {'counters': {}, 'gauges': {}, 'histograms': {}}

    @staticmethod
    def key(name: str, labels: Optional[Dict] = None) -> str:
        if not labels:
            return name
        inner = ','.join(f"{k}={v}" for k, v in sorted(labels.items()))
        return f"{name}{{{inner}}}"

    def increment(self, name: str, value: int = 1, labels: Optional[Dict] = None):
        key = self.key(name, labels)
        with self._lock:
            counters = self._store['counters']
            counters[key] = counters.get(key, 0) + value

    def gauge(self, name: str, value: float, labels: Optional[Dict] = None):
        with self._lock:
            self._store['gauges'][self.key(name, labels)] = float(value)

    def histogram(self, name: str, value: float, labels: Optional[Dict] = None):
        value = float(value)
        with self._lock:
            hist = self._store['histograms'].setdefault(self.key(name, labels), _empty_histogram())
            _fold(hist, 1, value, value, value)

    def get_metrics(self) -> Dict:
        with self._lock:
            return {
                'counters': dict(self._store['counters']),
                'gauges': dict(self._store['gauges']),
                'histograms': {k: dict(v) for k, v in self._store['histograms'].items()},
            }

    def merge(self, snapshot: Dict):
        """Fold in a snapshot returned by a worker process"""
        with self._lock:
            counters = self._store['counters']
            for key, value in snapshot.get('counters', {}).items():
                counters[key] = counters.get(key, 0) + value
            self._store['gauges'].update(snapshot.get('gauges', {}))
            for key, other in snapshot.get('histograms', {}).items():
                hist = self._store['histograms'].setdefault(key, _empty_histogram())
                _fold(hist, other['count'], other['sum'], other['min'], other['max'])

    def reset(self):
        with self._lock:
            self._store = self._empty_store()


metrics = MetricsCollector()


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class StructuredLogFormatter(logging.Formatter):
    """One JSON object per record; `extra={'extra_data': {...}}` lands under `data`"""

    def format(self, record):
        entry = {
            'timestamp': datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z'),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
        }
        data = getattr(record, 'extra_data', None)
        if data is not None:
            entry['data'] = data
        if record.exc_info:
            entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(entry, default=_json_default)


def configure_structured_logging(app):
    """Root logger from app.config LOG_LEVEL and LOG_FORMAT ('json' or 'text')"""
    level = getattr(logging, str(app.config.get('LOG_LEVEL', 'INFO')).upper(), logging.INFO)
    handler = logging.StreamHandler()
    if app.config.get('LOG_FORMAT', 'json') == 'json':
        handler.setFormatter(StructuredLogFormatter())
    else:
        handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    handler.setLevel(level)

    logging.root.handlers = [handler]
    logging.root.setLevel(level)


def track_performance(metric_name: Optional[str] = None, labels: Optional[Dict] = None):
    """Record `<name>_duration_seconds` and `<name>_total{status=success|error}`"""
    def decorator(f):
        name = metric_name or f"{f.__module__}.{f.__name__}"

        @wraps(f)
        def timed(*args, **kwargs):
            status = 'error'
            start = time.perf_counter()
            try:
                result = f(*args, **kwargs)
                status = 'success'
                return result
            finally:
                metrics.histogram(name + DURATION_SUFFIX, time.perf_counter() - start, labels)
                metrics.increment(f"{name}_total", labels={**(labels or {}), 'status': status})

        return timed
    return decorator


def timings_snapshot() -> Dict:
    """Duration histograms only, for timings.json"""
    histograms = metrics.get_metrics()['histograms']
    return {k: v for k, v in histograms.items() if DURATION_SUFFIX in k}
