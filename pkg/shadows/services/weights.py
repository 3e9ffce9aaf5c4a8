"""
Noisy shadow weight omega_{lambda,d}(P_k) = E[3^{-l_d} exp(-lambda * sum_i l_i)].

shadow_weight samples support trajectories in chunks; shadow_weight_exact
propagates the full distribution over support patterns (transfer matrix)
and serves as the oracle for the Monte Carlo.
"""

import logging
import math

import numpy as np

from experiments.exceptions import CapacityError, InvariantViolation, ParameterError, require_probability
from experiments.reports import EstimatorReport
from experiments.services.config import get_config
from experiments.services.workers import run_chunked
from shadows.services.brickwork import BOTH, FIRST_ONLY, SECOND_ONLY, BrickworkSpec, default_chain_length, resample_pairs


logger = logging.getLogger(__name__)

# Pattern index 2 * bit_a + bit_b; T[new, old].
PAIR_TRANSFER = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, SECOND_ONLY, SECOND_ONLY, SECOND_ONLY],
    [0.0, FIRST_ONLY, FIRST_ONLY, FIRST_ONLY],
    [0.0, BOTH, BOTH, BOTH],
])


def _check_lambda(lam):
    return require_probability('lambda', lam)


def _trajectory_chunk(spec, lam, size, rng):
    occupied = np.tile(spec.initial_support(), (size, 1))
    weight_sum = np.zeros(size)
    floor = (spec.k - 1) // 2
    weights = occupied.sum(axis=1)
    for layer in range(spec.depth):
        pairs = spec.layer(layer)
        resample_pairs(occupied, pairs, rng.random((size, len(pairs))))
        weights = occupied.sum(axis=1)
        if weights.min(initial=1) < 1:
            raise InvariantViolation('support vanished during a brickwork trajectory')
        if layer == 0 and weights.min(initial=floor) < floor:
            raise InvariantViolation(f'first-layer weight fell below floor((k-1)/2) = {floor}')
        weight_sum += weights
    return 3.0 ** (-weights) * np.exp(-lam * weight_sum)


def shadow_weight(spec, k=None, lam=0.0, trials=10000, seed=0, threads=None):
    """
    Monte Carlo estimate of omega_{lambda,d}(P_k) on spec. k, when given,
    must match spec.k. Depth 0 returns 3^{-k} without sampling.
    """
    if k is not None and k != spec.k:
        raise ParameterError(f'k={k} does not match the brickwork observable size {spec.k}')
    lam = _check_lambda(lam)
    if spec.depth == 0:
        return EstimatorReport(shots=0, mean=3.0 ** (-spec.k), std_error=0.0, seed=seed, extra={'exact': True})
    if trials < 1:
        raise ParameterError(f'trials must be positive, got {trials}')
    chunks = run_chunked(lambda size, rng: _trajectory_chunk(spec, lam, size, rng), trials, seed, threads)
    report = EstimatorReport.from_samples(np.concatenate(chunks), seed=seed, exact=False)
    logger.debug(
        'Shadow weight sampled. n=%s k=%s d=%s lambda=%s mean=%.6g se=%.2g',
        spec.n, spec.k, spec.depth, lam, report.mean, report.std_error,
    )
    return report


def _apply_pair(tensor, a, b):
    moved = np.moveaxis(tensor, (a, b), (0, 1))
    shape = moved.shape
    updated = (PAIR_TRANSFER @ moved.reshape(4, -1)).reshape(shape)
    return np.moveaxis(updated, (0, 1), (a, b))


def shadow_weight_exact(spec, k=None, lam=0.0):
    """Exact omega by propagating the distribution over all 2^n support patterns."""
    if k is not None and k != spec.k:
        raise ParameterError(f'k={k} does not match the brickwork observable size {spec.k}')
    lam = _check_lambda(lam)
    if spec.depth == 0:
        return 3.0 ** (-spec.k)
    cap = get_config()['SHADOW_EXACT_MAX_SITES']
    if spec.n > cap:
        raise CapacityError(f'exact shadow weight is limited to n <= {cap} sites, got {spec.n}')

    popcount = np.indices((2,) * spec.n).sum(axis=0)
    damping = np.exp(-lam * popcount)
    tensor = np.zeros((2,) * spec.n)
    tensor[tuple(int(b) for b in spec.initial_support())] = 1.0
    for layer in range(spec.depth):
        for a, b in spec.layer(layer):
            tensor = _apply_pair(tensor, a, b)
        tensor = tensor * damping
    return float(np.sum(tensor * 3.0 ** (-popcount)))


def noiseless_plateau(n):
    """Large-depth noiseless weight on an n-site chain: 1 / (2^n + 1)."""
    return 1.0 / (2 ** n + 1)


def depth_scan(k, lam, max_depth, n=None, trials=20000, seed=0, threads=None, start=None):
    """
    omega versus depth for d = 0..max_depth on one fixed chain.

    Uses the exact transfer matrix when the chain fits the exact cap and the
    Monte Carlo otherwise.

    Returns:
        (rows, best_depth) where rows carry depth, omega, std_error, method
    """
    cap = get_config()['SHADOW_EXACT_MAX_SITES']
    if n is None:
        n = default_chain_length(k, max_depth, cap) if k + 2 <= cap else k + 2 * max_depth + 2
    exact = n <= cap
    rows = []
    for depth in range(max_depth + 1):
        spec = BrickworkSpec(n=n, depth=depth, k=k, start=start)
        if exact:
            rows.append({'depth': depth, 'omega': shadow_weight_exact(spec, lam=lam), 'std_error': 0.0, 'method': 'exact'})
        else:
            report = shadow_weight(spec, lam=lam, trials=trials, seed=seed + depth, threads=threads)
            rows.append({'depth': depth, 'omega': report.mean, 'std_error': report.std_error, 'method': 'montecarlo'})
    best = max(rows, key=lambda row: row['omega'])
    logger.info('Depth scan finished. k=%s n=%s lambda=%s best_depth=%s method=%s', k, n, lam, best['depth'], rows[-1]['method'])
    return rows, best['depth']


def scan_max_depth(k):
    """4 * ceil(log2 k) + 4."""
    return 4 * math.ceil(math.log2(k)) + 4 if k > 1 else 4
