"""
Result envelopes and writers shared by every experiment.

EstimatorReport is the one object every Monte Carlo routine returns. The CSV
and JSON writers embed the fully resolved run configuration so that a file can
be traced back to the invocation that produced it.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.stats import norm

from experiments.exceptions import InvariantViolation, ParameterError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorReport:
    """Sample count, mean and standard error of one Monte Carlo estimate."""

    shots: int
    mean: float
    std_error: float
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shots < 0:
            raise InvariantViolation(f'negative shot count {self.shots}')
        if not (self.std_error >= 0.0 or math.isnan(self.std_error)):
            raise InvariantViolation(f'negative standard error {self.std_error}')

    @classmethod
    def from_samples(cls, samples, seed=None, **extra):
        values = np.asarray(samples, dtype=float)
        shots = int(values.size)
        if shots == 0:
            return cls(shots=0, mean=float('nan'), std_error=float('nan'), seed=seed, extra=extra)
        mean = float(values.mean())
        std_error = float(values.std(ddof=1) / math.sqrt(shots)) if shots > 1 else 0.0
        return cls(shots=shots, mean=mean, std_error=std_error, seed=seed, extra=extra)

    @property
    def ci(self):
        """Normal-approximation 95% interval."""
        return (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)

    def within(self, target, bands=3.0):
        return abs(self.mean - target) <= bands * self.std_error + 1e-12

    def as_dict(self):
        lo, hi = self.ci
        row = {
            'shots': self.shots,
            'mean': self.mean,
            'std_error': self.std_error,
            'ci_lo': lo,
            'ci_hi': hi,
            'seed': self.seed,
        }
        row.update(self.extra)
        return row


def wilson_interval(successes, trials, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ParameterError('trials must be positive for a Wilson interval')
    if not 0 <= successes <= trials:
        raise ParameterError(f'successes={successes} outside [0, {trials}]')
    z = float(norm.ppf(0.5 + confidence / 2.0))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, EstimatorReport):
        return value.as_dict()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def write_csv(path, rows, config, columns=None):
    """
    Write rows as CSV. The resolved config is echoed in '#'-prefixed lines
    above the header, sorted, so reruns with the same seed are byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [dict(r) for r in rows]
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    with path.open('w', newline='', encoding='utf-8') as handle:
        for key in sorted(config):
            handle.write(f'# {key}={json.dumps(config[key], default=_jsonable, sort_keys=True)}\n')
        writer = csv.DictWriter(handle, fieldnames=columns, extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(row.get(k)) for k in columns})
    logger.info('Wrote CSV output. path=%s rows=%s', path, len(rows))
    return path


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def write_json(path, payload, config):
    """
    Write a JSON document with a header (timestamp), the resolved config and
    the payload. The timestamp lives only in the header.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        'header': {'generated_at': datetime.now(timezone.utc).isoformat()},
        'config': config,
        'results': payload,
    }
    with path.open('w', encoding='utf-8') as handle:
        json.dump(document, handle, indent=2, sort_keys=True, default=_jsonable)
        handle.write('\n')
    logger.info('Wrote JSON output. path=%s', path)
    return path
