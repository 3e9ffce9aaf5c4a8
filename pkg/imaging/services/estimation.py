"""
Three-quantity estimator of the planet position and its decision statistics.

Per repetition the pipeline draws one postselected copy of each labeled
branch for the diagonal terms and one pair for the block-encoded overlap
test. Copy accounting charges every filter attempt its full program cost:
a repetition uses 2 (1/p0 + 1/p1) attempts of (1 + degree * rounds) copies.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from experiments.exceptions import DegenerateInstanceError, ParameterError
from experiments.reports import EstimatorReport
from experiments.services.workers import run_chunked
from imaging.services.filter import eigen_filter


logger = logging.getLogger(__name__)

QUANTITIES = ('diag_v1', 'diag_v2', 'cross')
TARGET_SUCCESS = 0.9


@dataclass(frozen=True, eq=False)
class PipelineMoments:
    """Exact per-sample means and variances of the three quantities."""

    means: tuple
    variances: tuple
    weights: tuple
    truth: float
    probabilities: tuple
    copies_per_shot: int
    outcome_values: np.ndarray
    outcome_probabilities: tuple
    cross_scale: float

    @property
    def mean(self):
        return float(sum(w * m for w, m in zip(self.weights, self.means)))

    @property
    def variance(self):
        return float(sum(w * w * v for w, v in zip(self.weights, self.variances)))

    @property
    def bias(self):
        return self.mean - self.truth

    @property
    def signed_mean(self):
        """Composite mean oriented so that positive means the right decision."""
        return self.mean if self.truth >= 0 else -self.mean

    @property
    def attempts_per_repetition(self):
        p0, p1 = self.probabilities
        return 2.0 * (1.0 / p0 + 1.0 / p1)

    @property
    def copies_per_repetition(self):
        return self.attempts_per_repetition * self.copies_per_shot

    def variance_per_copy(self, quantity):
        """Per-sample variance times the copies one postselected sample costs."""
        index = QUANTITIES.index(quantity)
        p0, p1 = self.probabilities
        cost = {0: 1.0 / p0, 1: 1.0 / p1, 2: 1.0 / p0 + 1.0 / p1}[index] * self.copies_per_shot
        return self.variances[index] * cost

    @property
    def efficiency(self):
        """Signed mean over the per-copy standard deviation; larger decides with fewer copies."""
        spread = math.sqrt(self.variance * self.copies_per_repetition)
        if spread == 0:
            return math.inf if self.signed_mean > 0 else 0.0
        return self.signed_mean / spread


def _branch_statistics(state, values, vectors):
    probabilities = np.clip(np.real(np.einsum('ki,kl,li->i', vectors.conj(), state, vectors)), 0.0, None)
    probabilities = probabilities / probabilities.sum()
    mean = float(probabilities @ values)
    return probabilities, mean, max(float(probabilities @ values ** 2) - mean * mean, 0.0)


def _principal(state, reference):
    """Dominant eigenpair of a branch state, phase-aligned to its ideal eigenvector."""
    eigenvalues, vectors = np.linalg.eigh(state)
    vector = vectors[:, -1]
    overlap = np.vdot(reference, vector)
    if abs(overlap) > 0:
        vector = vector * (np.conj(overlap) / abs(overlap))
    return float(eigenvalues[-1]), vector


def pipeline_moments(model, noise, config, result=None):
    """
    Means and variances of the diagonal and overlap-test samples for one
    filter configuration.
    """
    result = eigen_filter(model, noise, config, warn=False) if result is None else result
    values, vectors = np.linalg.eigh(model.observable)
    p_v1, mean_v1, var_v1 = _branch_statistics(result.states[0], values, vectors)
    p_v2, mean_v2, var_v2 = _branch_statistics(result.states[1], values, vectors)

    purity_1, v1 = _principal(result.states[0], model.V1)
    purity_2, v2 = _principal(result.states[1], model.V2)
    coherence = np.conj(model.c1) * model.c2 * np.vdot(v1, model.observable @ v2)
    cross = math.sqrt(max(purity_1 * purity_2, 0.0)) * float(np.real(coherence))
    scale = abs(model.c1 * model.c2) * float(np.max(np.abs(values)))
    cross_var = max(scale * scale - cross * cross, 0.0)

    return PipelineMoments(
        means=(mean_v1, mean_v2, cross),
        variances=(var_v1, var_v2, cross_var),
        weights=(abs(model.c1) ** 2, abs(model.c2) ** 2, 2.0),
        truth=model.truth,
        probabilities=result.probabilities,
        copies_per_shot=result.copies_per_shot,
        outcome_values=values,
        outcome_probabilities=(p_v1, p_v2),
        cross_scale=scale,
    )


def success_probability(mean, variance, repetitions):
    """
    Probability that a Gaussian estimate with this signed mean lands on the
    correct side of zero after `repetitions` samples.
    """
    if repetitions <= 0:
        return 0.5
    if variance <= 0:
        return 1.0 if mean > 0 else (0.5 if mean == 0 else 0.0)
    return float(norm.cdf(mean * math.sqrt(repetitions / variance)))


def repetitions_to_target(mean, variance, target=TARGET_SUCCESS):
    """Repetitions for success_probability to reach target; inf when the bias flips the sign."""
    if not 0.5 < target < 1:
        raise ParameterError(f'target success must lie in (0.5, 1), got {target}')
    if mean <= 0:
        return math.inf
    z = float(norm.ppf(target))
    return variance * (z / mean) ** 2


def copies_to_target(moments, target=TARGET_SUCCESS):
    return repetitions_to_target(moments.signed_mean, moments.variance, target) * moments.copies_per_repetition


def success_at_budget(moments, budget):
    """Success probability when `budget` copies are spent on repetitions."""
    return success_probability(moments.signed_mean, moments.variance, budget / moments.copies_per_repetition)


def _sample_chunk(moments, size, rng):
    p0, p1 = moments.probabilities
    diag_v1 = rng.choice(moments.outcome_values, size=size, p=moments.outcome_probabilities[0])
    diag_v2 = rng.choice(moments.outcome_values, size=size, p=moments.outcome_probabilities[1])
    scale = moments.cross_scale
    if scale > 0:
        plus = rng.random(size) < 0.5 * (1.0 + moments.means[2] / scale)
        cross = np.where(plus, scale, -scale)
    else:
        cross = np.zeros(size)
    attempts = (
        2 * size
        + int(rng.negative_binomial(size, p0)) + int(rng.negative_binomial(size, p1))
        + 2 * size
        + int(rng.negative_binomial(size, p0)) + int(rng.negative_binomial(size, p1))
    )
    return diag_v1, diag_v2, cross, attempts


def estimate_quantities(model, noise, config, shots, seed=0, threads=None):
    """
    Monte Carlo estimates of the three quantities and their combination.

    Returns:
        dict with EstimatorReports keyed diag_v1, diag_v2, cross and composite.
        Zero shots gives degenerate reports with NaN means.
    """
    if shots < 0:
        raise ParameterError(f'shots must be non-negative, got {shots}')
    moments = pipeline_moments(model, noise, config)
    if min(moments.probabilities) <= 0:
        raise DegenerateInstanceError('a filter branch is never postselected')
    if shots == 0:
        empty = {name: EstimatorReport(0, float('nan'), float('nan'), seed) for name in QUANTITIES}
        empty['composite'] = EstimatorReport(0, float('nan'), float('nan'), seed, {'truth': moments.truth})
        return empty

    chunks = run_chunked(lambda size, rng: _sample_chunk(moments, size, rng), shots, seed, threads)
    attempts = sum(chunk[3] for chunk in chunks)
    copies = attempts * moments.copies_per_shot
    reports = {
        name: EstimatorReport.from_samples(np.concatenate([chunk[i] for chunk in chunks]), seed=seed, quantity=name)
        for i, name in enumerate(QUANTITIES)
    }
    mean = sum(w * reports[name].mean for w, name in zip(moments.weights, QUANTITIES))
    std_error = math.sqrt(sum((w * reports[name].std_error) ** 2 for w, name in zip(moments.weights, QUANTITIES)))
    reports['composite'] = EstimatorReport(
        shots=shots, mean=float(mean), std_error=std_error, seed=seed,
        extra={'quantity': 'composite', 'truth': moments.truth, 'attempts': attempts, 'copies': copies},
    )
    logger.info(
        'Imaging estimate finished. mode=%s rate=%s shots=%s mean=%.5g truth=%.5g copies=%s',
        noise.mode, noise.rate, shots, mean, moments.truth, copies,
    )
    return reports
