"""
Weight-enumerator upper bound for the single-sector growth gadget.

W(F, x) <= v_in x + T d2^2 eta^d2 / (1 - eta)
           + eta^d1 / (1 - eta)^2 [d1^2 + (2 d1 - 1) eta / (1 - eta) + 2 eta / (1 - eta)^2]
           + W(B, (2De)^2 sqrt(x)) / (1 - eta)

with eta = 2De x^(1/4). The residual family B collects clusters of size
m >= d2 carrying at least c m faults; its enumerator is summed term by term.
"""

import logging
import math
from dataclasses import dataclass

from experiments.exceptions import DivergenceError, ParameterError


logger = logging.getLogger(__name__)

CHI = 4
RESIDUAL_FRACTION = 1 / 5
SERIES_TOLERANCE = 1e-18
MAX_SERIES_TERMS = 100_000


@dataclass(frozen=True)
class EnumeratorBound:
    x: float
    eta: float
    input_term: float
    growth_term: float
    floor_term: float
    residual_term: float

    @property
    def total(self):
        return self.input_term + self.growth_term + self.floor_term + self.residual_term

    def as_dict(self):
        return {
            'x': self.x, 'eta': self.eta, 'input': self.input_term, 'growth': self.growth_term,
            'floor': self.floor_term, 'residual': self.residual_term, 'total': self.total,
        }


def default_input_volume(d1):
    return 3 * d1 * d1


def eta_x(x, D):
    return 2.0 * D * math.e * x ** (1.0 / CHI)


def _binary_entropy_bits(c):
    return -(c * math.log2(c) + (1 - c) * math.log2(1 - c))


def cluster_enumerator(start, y, D, volume, fraction=RESIDUAL_FRACTION):
    """
    sum_{m >= start} volume * C(m, t-1) (De)^(m-1) y^t with t = fraction m,
    the binomial taken through lgamma. Summed in blocks of 1/fraction terms
    until a block falls below SERIES_TOLERANCE.
    """
    if y == 0:
        return 0.0
    growth = D * math.e * y ** fraction * 2 ** _binary_entropy_bits(fraction)
    if growth >= 1:
        raise DivergenceError(f'residual cluster series diverges (asymptotic ratio {growth:.3g} >= 1)')
    log_base, log_y, log_volume = math.log(D * math.e), math.log(y), math.log(volume)
    period = max(1, round(1 / fraction))
    total = 0.0
    block = 0.0
    for m in range(start, start + MAX_SERIES_TERMS):
        t = fraction * m
        log_term = (
            log_volume + math.lgamma(m + 1) - math.lgamma(t) - math.lgamma(m - t + 2)
            + (m - 1) * log_base + t * log_y
        )
        term = math.exp(log_term)
        total += term
        block += term
        if (m - start + 1) % period == 0:
            if block < SERIES_TOLERANCE:
                return total
            block = 0.0
    raise DivergenceError(f'residual cluster series did not converge in {MAX_SERIES_TERMS} terms')


def weight_enumerator_bound(d1, d2, T, x, D, v_in=None):
    """
    Term-by-term evaluation of the growth-gadget enumerator bound.

    Args:
        d1, d2, T: Gadget distances and rounds
        x: Fault weight (physical rate)
        D: Degree of the fault adjacency graph
        v_in: Input fault volume (default 3 d1^2)

    Returns:
        EnumeratorBound
    """
    if not 0 <= x < 1:
        raise ParameterError(f'x must lie in [0, 1), got {x}')
    if D < 1:
        raise ParameterError(f'degree must be positive, got {D}')
    v_in = default_input_volume(d1) if v_in is None else v_in
    if x == 0:
        return EnumeratorBound(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    eta = eta_x(x, D)
    if eta >= 1:
        raise DivergenceError(f'eta_x = 2De x^(1/4) = {eta:.3g} >= 1')
    one = 1.0 - eta
    growth = T * d2 * d2 * eta ** d2 / one
    floor = eta ** d1 / one ** 2 * (d1 * d1 + (2 * d1 - 1) * eta / one + 2 * eta / one ** 2)
    residual = cluster_enumerator(d2, (2 * D * math.e) ** 2 * math.sqrt(x), D, d2 * d2) / one
    return EnumeratorBound(x, eta, v_in * x, growth, floor, residual)


def compare_bound_vs_montecarlo(rows, D, v_in=None):
    """
    Check each sweep row's worst single-sector failure rate against the bound.

    Rows need d1, d2, T, p and sector_rate. Points outside the convergent
    range are reported as skipped.
    """
    report = []
    for row in rows:
        entry = {'d1': row['d1'], 'd2': row['d2'], 'p': row['p'], 'sector_rate': row['sector_rate'], 'D': D}
        try:
            bound = weight_enumerator_bound(row['d1'], row['d2'], row['T'], row['p'], D, v_in).total
        except DivergenceError as exc:
            logger.info('Bound comparison skipped. d2=%s p=%s reason=%s', row['d2'], row['p'], exc)
            entry.update({'bound': None, 'status': 'skipped', 'ratio': None})
            report.append(entry)
            continue
        status = 'ok' if row['sector_rate'] <= bound else 'violation'
        if status == 'violation':
            logger.warning(
                'Monte Carlo rate exceeds the enumerator bound. d1=%s d2=%s p=%s rate=%s bound=%s',
                row['d1'], row['d2'], row['p'], row['sector_rate'], bound,
            )
        ratio = bound / row['sector_rate'] if row['sector_rate'] > 0 else math.inf
        entry.update({'bound': bound, 'status': status, 'ratio': ratio})
        report.append(entry)
    return report
