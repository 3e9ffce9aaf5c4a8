"""
Bound formulas for noisy shallow shadows and the injection threshold.
Sample counts are exponent-level: the unspecified poly(k) factor is omitted.
"""

import math
from dataclasses import dataclass

from experiments.exceptions import ParameterError, require_probability
from shadows.services.weights import depth_scan, scan_max_depth


LOG3_QUARTER = math.log(3) / 4


def noisy_weight_upper_bound(k, lam, omega_star):
    """max{3^{-k}, e^{-lambda floor((k-1)/2)} * omega_star}."""
    lam = require_probability('lambda', lam)
    return max(3.0 ** (-k), math.exp(-lam * ((k - 1) // 2)) * omega_star)


def raw_sample_count(k, lam, epsilon, omega_star):
    """Lower bound on raw-learner samples: 1 / (epsilon^2 * weight bound)."""
    _check_epsilon(epsilon)
    return 1.0 / (epsilon ** 2 * noisy_weight_upper_bound(k, lam, omega_star))


def separation_exponent(lam, lambda_prime):
    """Per-k log growth of N_raw / N_inj; positive means an exponential speedup."""
    lam = require_probability('lambda', lam, open_upper=True)
    lambda_prime = require_probability('lambda_prime', lambda_prime, open_upper=True)
    return 2.0 * math.log((1.0 - lambda_prime) / (1.0 - lam)) + min(LOG3_QUARTER, lam / 2.0)


def separation_threshold(lam):
    """lambda' at which separation_exponent vanishes: 1 - (1-lambda) exp(-min(ln3/4, lambda/2) / 2)."""
    lam = require_probability('lambda', lam, open_upper=True)
    return 1.0 - (1.0 - lam) * math.exp(-min(LOG3_QUARTER, lam / 2.0) / 2.0)


def _check_epsilon(epsilon):
    if not 0 < epsilon < 1:
        raise ParameterError(f'epsilon must lie in (0, 1), got {epsilon}')


@dataclass(frozen=True)
class InjectionSampleCount:
    count: float
    d_star: int
    omega_star: float
    scan: tuple

    @property
    def method(self):
        return self.scan[-1]['method']


def noiseless_supremum(k, max_depth=None, trials=20000, seed=0):
    """
    Sup over the depth scan of the noiseless weight, with its argmax. Exact
    while the chain fits SHADOW_EXACT_MAX_SITES, sampled above it.
    """
    if k < 1:
        raise ParameterError(f'k must be >= 1, got {k}')
    rows, d_star = depth_scan(k, 0.0, scan_max_depth(k) if max_depth is None else max_depth, trials=trials, seed=seed)
    return rows[d_star]['omega'], d_star, rows


def injection_sample_count(k, eta, epsilon, trials=20000, seed=0):
    """1 / ((1-eta)^{2k} epsilon^2 omega*) with omega* from the noiseless depth scan."""
    if k < 1:
        raise ParameterError(f'k must be >= 1, got {k}')
    eta = require_probability('eta', eta, open_upper=True)
    _check_epsilon(epsilon)
    omega_star, d_star, rows = noiseless_supremum(k, trials=trials, seed=seed)
    count = 1.0 / ((1.0 - eta) ** (2 * k) * epsilon ** 2 * omega_star)
    return InjectionSampleCount(count=count, d_star=d_star, omega_star=omega_star, scan=tuple(rows))
