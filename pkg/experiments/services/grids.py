"""
Parsing of parameter grids given on the command line.

A grid is either a comma list ("5,7,9") or a geometric range "lo:hi[:steps]"
(steps defaults to 5, both endpoints included).
"""

import numpy as np

from experiments.exceptions import ParameterError


DEFAULT_RANGE_STEPS = 5


def parse_grid(raw, cast=float):
    if raw is None:
        return []
    if isinstance(raw, (int, float)):
        return [cast(raw)]
    if isinstance(raw, (list, tuple)):
        return [cast(v) for v in raw]

    text = str(raw).strip()
    if not text:
        raise ParameterError('empty grid')
    try:
        if ':' in text:
            parts = text.split(':')
            if len(parts) not in (2, 3):
                raise ParameterError(f'range grid must be lo:hi[:steps], got {text!r}')
            lo, hi = float(parts[0]), float(parts[1])
            steps = int(parts[2]) if len(parts) == 3 else DEFAULT_RANGE_STEPS
            if lo <= 0 or hi <= 0 or steps < 1:
                raise ParameterError(f'geometric range needs positive bounds and steps, got {text!r}')
            values = np.geomspace(lo, hi, steps) if steps > 1 else np.array([lo])
            return [cast(v) for v in values]
        return [cast(part) for part in text.split(',') if part.strip()]
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f'could not parse grid {text!r}: {exc}')
