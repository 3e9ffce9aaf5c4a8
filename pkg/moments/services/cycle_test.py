"""
Three-copy cycle test.

Three noisy copies (D_lambda' rho)^{(x)3} are measured site by site in the
eigenbasis {Pi_1, Pi_omega, Pi_omega^2} of the single-site cyclic shift. The
corrected estimator reports X = Re prod_j alpha_{s_j} (unbiased for
tr(rho^3)); the uncorrected one reports Y = Re prod_j omega_{s_j}.
"""

import itertools
import logging
from functools import lru_cache, reduce

import numpy as np

from experiments.exceptions import CapacityError, InvariantViolation, ParameterError, require_probability
from experiments.reports import EstimatorReport
from experiments.services.workers import run_chunked
from moments.services.ensembles import sample_state
from pauli.services.channels import depolarize_dense
from replicas.services.cycle import EIGENVALUES, cycle_projectors, cycle_spectral_data, site_major_to_copy_major


logger = logging.getLogger(__name__)

CYCLE_TEST_MAX_QUBITS = 3


class CycleTest:
    """
    Exact outcome distribution of the site-wise cycle measurement.

    Args:
        n: Qubits per copy
        lambda_prime: Depolarizing strength on each uploaded copy
        corrected: Report alpha products (True) or raw eigenvalue products
    """

    def __init__(self, n, lambda_prime=0.0, corrected=True):
        if not 1 <= n <= CYCLE_TEST_MAX_QUBITS:
            raise CapacityError(f'cycle test simulation supports 1 <= n <= {CYCLE_TEST_MAX_QUBITS}, got {n}')
        self.n = n
        self.lambda_prime = require_probability('lambda_prime', lambda_prime)
        self.corrected = corrected

        if corrected:
            # Raises SingularChannelError at lambda_prime = 1.
            spectral = cycle_spectral_data(self.lambda_prime)
            site_values = spectral.alphas
            self.bound = abs(spectral.alpha_omega) ** n
        else:
            site_values = EIGENVALUES
            self.bound = 1.0

        self.outcomes = list(itertools.product(range(3), repeat=n))
        self.values = np.array([np.prod([site_values[s] for s in outcome]).real for outcome in self.outcomes])
        site_projectors = cycle_projectors()
        self._projectors = np.stack([
            site_major_to_copy_major(reduce(np.kron, [site_projectors[s] for s in outcome]), n)
            for outcome in self.outcomes
        ])

    def noisy_copies(self, rho):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (2 ** self.n, 2 ** self.n):
            raise ParameterError(f'expected a {2 ** self.n}x{2 ** self.n} density matrix, got {rho.shape}')
        noisy = depolarize_dense(rho, self.lambda_prime) if self.lambda_prime else rho
        return np.kron(np.kron(noisy, noisy), noisy)

    def outcome_probabilities(self, rho):
        copies = self.noisy_copies(rho)
        probs = np.einsum('kij,ji->k', self._projectors, copies).real
        if probs.min() < -1e-10 or abs(probs.sum() - 1.0) > 1e-8:
            raise InvariantViolation(f'cycle outcome distribution invalid: min={probs.min()} sum={probs.sum()}')
        probs = np.clip(probs, 0.0, None)
        return probs / probs.sum()

    def exact_mean(self, rho):
        return float(self.outcome_probabilities(rho) @ self.values)

    def sample(self, rho, shots, rng):
        probs = self.outcome_probabilities(rho)
        values = self.values[rng.choice(len(self.outcomes), size=shots, p=probs)]
        if np.abs(values).max(initial=0.0) > self.bound + 1e-12:
            raise InvariantViolation('cycle-test shot outside the |alpha_omega|^n range')
        return values

    def estimate(self, rho, shots, seed, threads=None):
        chunks = run_chunked(lambda size, rng: self.sample(rho, size, rng), shots, seed, threads)
        values = np.concatenate(chunks) if chunks else np.array([])
        return EstimatorReport.from_samples(values, seed=seed, bound=self.bound, corrected=self.corrected)


@lru_cache(maxsize=64)
def cached_cycle_test(n, lambda_prime, corrected):
    """Shared CycleTest per (n, lambda_prime, corrected); the outcome table is read-only."""
    return CycleTest(n, lambda_prime, corrected)


def cycle_test_shot(rho, noise, corrected, rng):
    """One shot of the cycle test on three copies uploaded with noise.lambda_inj."""
    n = int(round(np.log2(np.asarray(rho).shape[0])))
    test = cached_cycle_test(n, float(noise.lambda_inj), bool(corrected))
    return float(test.sample(rho, 1, rng)[0])


def ensemble_cycle_estimate(spec, lambda_prime, draws, seed, corrected=False, threads=None):
    """
    Average of one cycle-test shot per freshly drawn ensemble state.
    """
    test = CycleTest(spec.n, lambda_prime, corrected)

    def _chunk(size, rng):
        out = np.empty(size)
        for i in range(size):
            rho = sample_state(spec, rng)
            out[i] = test.sample(rho, 1, rng)[0]
        return out

    chunks = run_chunked(_chunk, draws, seed, threads)
    values = np.concatenate(chunks) if chunks else np.array([])
    report = EstimatorReport.from_samples(values, seed=seed, kind=spec.kind, mixed_weight=spec.mixed_weight)
    logger.info(
        'Ensemble cycle estimate finished. kind=%s n=%s draws=%s mean=%.6f se=%.6f',
        spec.kind, spec.n, draws, report.mean, report.std_error,
    )
    return report
