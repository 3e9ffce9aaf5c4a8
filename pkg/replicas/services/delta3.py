"""
The three-copy operator Delta_3 and the closed-form trace polynomials.

Delta_3 = S_123 - (S_12 S_3 + S_13 S_2 + S_23 S_1) + 2 S_1 S_2 S_3 is
assembled from symmetrizers and cross-checked against its permutation form
[D^2 (pi + pi^-1) - 2D sum SWAP_ij + 4 * 1] / (D^3 (D+1) (D+2)).
"""

import logging

import numpy as np
from scipy import sparse

from experiments.exceptions import CapacityError, InvariantViolation, require_probability
from pauli.services.channels import pauli_coefficients
from replicas.services.permutations import (
    CYCLE,
    CYCLE_INVERSE,
    ReplicaOperator,
    check_replica_capacity,
    permutation_sparse,
    symmetrizer_sparse,
)


logger = logging.getLogger(__name__)

FORM_TOLERANCE = 1e-10
DENSE_ORACLE_MAX_QUBITS = 3


def delta3_sparse(n):
    s123 = symmetrizer_sparse((0, 1, 2), n, 3)
    pairs = sum(symmetrizer_sparse(pair, n, 3) for pair in ((0, 1), (0, 2), (1, 2)))
    singles = symmetrizer_sparse((0,), n, 3)
    return s123 - pairs + 2 * singles


def delta3_permutation_form(n):
    dim = 2 ** n
    size = dim ** 3
    cycles = permutation_sparse(CYCLE, dim, 3) + permutation_sparse(CYCLE_INVERSE, dim, 3)
    swaps = sum(permutation_sparse(perm, dim, 3) for perm in ((1, 0, 2), (2, 1, 0), (0, 2, 1)))
    numerator = dim ** 2 * cycles - 2 * dim * swaps + 4 * sparse.identity(size, format='csr')
    return numerator / (dim ** 3 * (dim + 1) * (dim + 2))


def build_delta3(n):
    """Delta_3 on three copies of n qubits, verified against both forms."""
    check_replica_capacity(n, 3)
    s_form = delta3_sparse(n)
    p_form = delta3_permutation_form(n)
    difference = float(abs(s_form - p_form).max())
    if difference > FORM_TOLERANCE:
        raise InvariantViolation(f'Delta_3 forms disagree for n={n}: max difference {difference}')
    logger.debug('Built Delta_3. n=%s nnz=%s form_difference=%s', n, s_form.nnz, difference)
    return ReplicaOperator(n=n, copies=3, matrix=s_form.toarray(), label='Delta3')


def r_poly(n, eta):
    return (
        2 * (1 + 9 * eta ** 6 + 6 * eta ** 10) ** n
        + 2 * (1 + 9 * eta ** 6 - 6 * eta ** 10) ** n
        - 12 * (1 + 3 * eta ** 6) ** n
        + 8
    )


def g_poly(n, a):
    return (
        (1 + 9 * a ** 2 + 6 * a ** 3) ** n
        + (1 + 9 * a ** 2 - 6 * a ** 3) ** n
        - 6 * (1 + 3 * a ** 2) ** n
        + 4
    )


def trace_N_delta3_squared(n, lam):
    """tr(N(Delta_3)^2) = R_n(1-lambda) / (2^{3n} (2^n+1)^2 (2^n+2)^2)."""
    lam = require_probability('lambda', lam)
    dim = 2 ** n
    return r_poly(n, 1.0 - lam) / (dim ** 3 * (dim + 1) ** 2 * (dim + 2) ** 2)


def trace_N_delta3_squared_dense(n, lam):
    """
    Brute-force tr(N(Delta_3)^2): N acts on the three qubits of each site
    (one from every copy) and scales a Pauli of block weight w by
    (1-lambda)**(w + ceil(w/2)).
    """
    lam = require_probability('lambda', lam)
    if n > DENSE_ORACLE_MAX_QUBITS:
        raise CapacityError(f'dense N(Delta_3) oracle is limited to n <= {DENSE_ORACLE_MAX_QUBITS}')
    coefficients = pauli_coefficients(build_delta3(n).matrix)
    index = np.indices((4,) * (3 * n)) != 0
    exponent = np.zeros(coefficients.shape)
    for site in range(n):
        w = index[site].astype(int) + index[n + site] + index[2 * n + site]
        exponent = exponent + w + np.ceil(w / 2.0)
    scaled = coefficients * (1.0 - lam) ** exponent
    return float(2 ** (3 * n) * np.sum(np.abs(scaled) ** 2))


def trace_pi_delta3(n):
    dim = 2 ** n
    return (dim - 1) * (dim - 2) / dim ** 2


def kappa(lam):
    a = 1.0 - require_probability('lambda', lam)
    return 1 + 0.75 * a ** 2 + (3 / 16) * a ** 6 + (1 / 64) * a ** 8

