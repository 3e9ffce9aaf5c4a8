"""
Hard-instance ensembles for third-moment testing.

A state is rho = w * 1/D + sum_j v_j |psi_j><psi_j| with Haar-random pure
states psi_j and v = (1 - w) * base. The two kinds share their first and
second power sums of v and differ only in the third.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from experiments.exceptions import CapacityError, ParameterError, require_probability
from experiments.services.config import get_config
from pauli.services.channels import depolarize_dense
from replicas.services.permutations import cycle_operator, permutation_sparse


ENSEMBLE_BASES = {
    'P': (0.5, 0.5, 0.0),
    'Q': (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
}


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    kind: str
    mixed_weight: float = 0.5

    def __post_init__(self):
        if self.kind not in ENSEMBLE_BASES:
            raise ParameterError(f'ensemble kind must be P or Q, got {self.kind!r}')
        if self.n < 1:
            raise ParameterError(f'n must be >= 1, got {self.n}')
        require_probability('mixed_weight', self.mixed_weight)
        cap = get_config()['MAX_REPLICA_QUBITS']
        if self.n > cap:
            raise CapacityError(f'ensemble states are limited to n <= {cap}')

    @property
    def v(self):
        return tuple((1.0 - self.mixed_weight) * b for b in ENSEMBLE_BASES[self.kind])

    @property
    def dimension(self):
        return 2 ** self.n


def haar_state(dim, rng):
    """Haar-random pure state vector from a normalized complex Gaussian."""
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def _as_generator(rng_seed):
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def sample_state(spec, rng_seed):
    """Draw one rho from the ensemble; psi_1..psi_3 use independent child streams."""
    rng = _as_generator(rng_seed)
    dim = spec.dimension
    rho = spec.mixed_weight * np.eye(dim, dtype=complex) / dim
    for weight, child in zip(spec.v, rng.spawn(3)):
        psi = haar_state(dim, child)
        if weight:
            rho = rho + weight * np.outer(psi, psi.conj())
    return rho


def maximally_mixed(n):
    return np.eye(2 ** n, dtype=complex) / 2 ** n


def _grouped_symmetrizer(assignment, n):
    """
    Average of rho_{k_1} x rho_{k_2} x rho_{k_3} over Haar states where slot
    value 0 is the maximally mixed state and equal nonzero values share one
    pure state.
    """
    dim = 2 ** n
    groups = {}
    for copy, label in enumerate(assignment):
        if label:
            groups.setdefault(label, []).append(copy)
    member_perms = [list(itertools.permutations(members)) for members in groups.values()]
    total = sparse.csr_matrix((dim ** 3, dim ** 3))
    for choice in itertools.product(*member_perms):
        perm = list(range(3))
        for members, image in zip(groups.values(), choice):
            for src, dst in zip(members, image):
                perm[src] = dst
        total = total + permutation_sparse(perm, dim, 3)
    norm = 1.0
    for members in groups.values():
        norm *= math.prod(dim + j for j in range(len(members)))
    floor = sum(1 for label in assignment if not label)
    return total / (norm * dim ** floor)


def third_moment_state(spec):
    """Exact sigma = E[rho^{(x)3}] over the ensemble, as a dense matrix."""
    coefficients = (spec.mixed_weight,) + spec.v
    sigma = sparse.csr_matrix((spec.dimension ** 3, spec.dimension ** 3))
    for assignment in itertools.product(range(4), repeat=3):
        weight = math.prod(coefficients[k] for k in assignment)
        if weight:
            sigma = sigma + weight * _grouped_symmetrizer(assignment, spec.n)
    return sigma.toarray()


def expected_cycle_value(spec, lambda_prime=0.0):
    """E[tr((D rho)^3)] over the ensemble, from the exact three-copy state."""
    lam = require_probability('lambda_prime', lambda_prime)
    sigma = third_moment_state(spec)
    if lam:
        sigma = depolarize_dense(sigma, lam)
    return float(np.trace(cycle_operator(spec.n) @ sigma).real)
