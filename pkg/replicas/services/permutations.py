"""
Permutation operators on k copies of a d-dimensional system.

Basis states are copy-major: |i_0, ..., i_{k-1}> has index
sum_j i_j * d**(k-1-j). Operators are assembled as sparse permutation
matrices and densified only when a caller asks for a dense matrix.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from experiments.exceptions import CapacityError, ParameterError
from experiments.services.config import get_config


CYCLE = (1, 2, 0)
CYCLE_INVERSE = (2, 0, 1)


@dataclass(frozen=True)
class ReplicaOperator:
    n: int
    copies: int
    matrix: np.ndarray
    label: str

    @property
    def dimension(self):
        return self.matrix.shape[0]


def check_replica_capacity(n, copies):
    cfg = get_config()
    if n < 1:
        raise ParameterError(f'n must be >= 1, got {n}')
    if copies == 3 and n > cfg['MAX_REPLICA_QUBITS']:
        raise CapacityError(f'three-copy operators on n={n} exceed the {cfg["MAX_REPLICA_QUBITS"]}-qubit cap')
    if n * copies > cfg['MAX_DENSE_QUBITS']:
        raise CapacityError(f'{copies} copies of {n} qubits exceed the {cfg["MAX_DENSE_QUBITS"]}-qubit dense cap')


def permutation_sparse(perm, local_dim, copies):
    """
    Sparse operator sending input copy perm[j] to output copy j.
    """
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(copies)):
        raise ParameterError(f'{perm} is not a permutation of {copies} copies')
    shape = (local_dim,) * copies
    size = local_dim ** copies
    digits = np.indices(shape).reshape(copies, -1)
    rows = np.ravel_multi_index(digits[list(perm)], shape)
    cols = np.arange(size)
    return sparse.coo_matrix((np.ones(size), (rows, cols)), shape=(size, size)).tocsr()


def permutation_operator(perm, local_dim, copies):
    return permutation_sparse(perm, local_dim, copies).toarray()


def _copy_permutations(indices, copies):
    """Every permutation of the copies that only moves copies in indices."""
    indices = sorted(indices)
    for image in itertools.permutations(indices):
        perm = list(range(copies))
        for src, dst in zip(indices, image):
            perm[src] = dst
        yield tuple(perm)


def symmetrizer_sparse(indices, n, copies):
    """
    S_x on the copies in indices, tensored with the maximally mixed state on
    the remaining copies. Unit trace.
    """
    indices = sorted(set(int(i) for i in indices))
    if not indices or indices[-1] >= copies or indices[0] < 0:
        raise ParameterError(f'copy indices {indices} invalid for {copies} copies')
    if len(indices) > 3:
        raise ParameterError('symmetrizers are defined for at most three copies')
    dim = 2 ** n
    size = dim ** copies
    total = sparse.csr_matrix((size, size))
    for perm in _copy_permutations(indices, copies):
        total = total + permutation_sparse(perm, dim, copies)
    norm = math.prod(dim + j for j in range(len(indices)))
    return total / (norm * dim ** (copies - len(indices)))


def build_symmetrizer(indices, n):
    """
    Normalized symmetrizer S_x on |x| copies of n qubits: the sum of all
    permutations of the copies divided by D(D+1)...(D+|x|-1).
    """
    copies = len(set(indices))
    check_replica_capacity(n, copies)
    matrix = symmetrizer_sparse(range(copies), n, copies).toarray()
    label = 'S_' + ''.join(str(int(i) + 1) for i in sorted(set(indices)))
    return ReplicaOperator(n=n, copies=copies, matrix=matrix, label=label)


def swap_operator(i, j, n, copies=2):
    perm = list(range(copies))
    perm[i], perm[j] = perm[j], perm[i]
    return permutation_operator(perm, 2 ** n, copies)


def cycle_operator(n, inverse=False):
    """pi_123 on three copies of n qubits."""
    return permutation_operator(CYCLE_INVERSE if inverse else CYCLE, 2 ** n, 3)
