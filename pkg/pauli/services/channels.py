"""
Pauli-diagonal channels: depolarizing D_lambda, the composite channel N and
the inverse channel I_lambda.

All three act on a Pauli string by a scalar that depends only on its weight.
Dense operators are handled through their Pauli-basis coefficients.
"""

import math
from dataclasses import dataclass

import numpy as np

from experiments.exceptions import CapacityError, ParameterError, SingularChannelError, require_probability
from experiments.services.config import get_config
from pauli.services.strings import BASIS_ORDER, SINGLE_SITE, PauliString


@dataclass(frozen=True)
class NoiseParams:
    """Raw-layer strength lambda_raw and injection-stage strength lambda_inj."""

    lambda_raw: float = 0.0
    lambda_inj: float = 0.0

    def __post_init__(self):
        require_probability('lambda_raw', self.lambda_raw)
        require_probability('lambda_inj', self.lambda_inj)

    @property
    def eta(self):
        return 1.0 - self.lambda_raw

    @property
    def a(self):
        return 1.0 - self.lambda_inj


def _weight_of(p):
    return p.weight if isinstance(p, PauliString) else int(p)


def depolarize_coefficient(p, lam):
    """Eigenvalue (1-lambda)**w of D_lambda on p (p may also be a weight)."""
    lam = require_probability('lambda', lam)
    return (1.0 - lam) ** _weight_of(p)


def channel_N_coefficient(p, lam):
    lam = require_probability('lambda', lam)
    w = _weight_of(p)
    return (1.0 - lam) ** (w + math.ceil(w / 2))


def inverse_channel_coefficient(p, lam):
    """Eigenvalue (1-lambda)**-w of the inverse depolarizing channel."""
    lam = require_probability('lambda', lam)
    if lam == 1.0:
        raise SingularChannelError('the fully depolarizing channel has no inverse')
    return (1.0 - lam) ** (-_weight_of(p))


# Forward transform per site: c_k = sum_{r,c} P_k[c, r] M[r, c] / 2.
_FORWARD = np.array([[SINGLE_SITE[b][c, r] / 2.0 for r in range(2) for c in range(2)] for b in BASIS_ORDER])
# Inverse per site: M[r, c] = sum_k c_k P_k[r, c].
_INVERSE = np.array([[SINGLE_SITE[b][r, c] for b in BASIS_ORDER] for r in range(2) for c in range(2)])


def _qubits_of(matrix):
    dim = matrix.shape[0]
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if matrix.ndim != 2 or matrix.shape[1] != dim or 2 ** n != dim:
        raise ParameterError(f'expected a square 2**n matrix, got shape {matrix.shape}')
    cap = get_config()['MAX_DENSE_QUBITS']
    if n > cap:
        raise CapacityError(f'{n}-qubit operator exceeds the {cap}-qubit dense cap')
    return n


def _apply_per_site(tensor, site_matrix, n):
    for q in range(n):
        tensor = np.moveaxis(np.tensordot(site_matrix, tensor, axes=([1], [q])), 0, q)
    return tensor


def pauli_coefficients(matrix):
    """
    Coefficients c with matrix = sum_k c[k] P_k, as an array of shape (4,)*n.
    Axis q indexes the Pauli on site q in the order I, X, Y, Z.
    """
    matrix = np.asarray(matrix, dtype=complex)
    n = _qubits_of(matrix)
    if n == 0:
        return matrix.reshape(())
    tensor = matrix.reshape((2,) * (2 * n))
    interleave = [axis for q in range(n) for axis in (q, n + q)]
    tensor = tensor.transpose(interleave).reshape((4,) * n)
    return _apply_per_site(tensor, _FORWARD, n)


def from_pauli_coefficients(coefficients):
    coefficients = np.asarray(coefficients, dtype=complex)
    n = coefficients.ndim
    if n == 0:
        return coefficients.reshape(1, 1)
    tensor = _apply_per_site(coefficients, _INVERSE, n)
    tensor = tensor.reshape((2,) * (2 * n))
    rows_then_cols = [2 * q for q in range(n)] + [2 * q + 1 for q in range(n)]
    return tensor.transpose(rows_then_cols).reshape(2 ** n, 2 ** n)


def pauli_weights(n):
    """Weight of every basis Pauli, shape (4,)*n."""
    if n == 0:
        return np.zeros((), dtype=int)
    return (np.indices((4,) * n) != 0).sum(axis=0)


def apply_diagonal_channel(matrix, factor_of_weight):
    """Scale every Pauli component of matrix by factor_of_weight(weights)."""
    coefficients = pauli_coefficients(matrix)
    factors = factor_of_weight(pauli_weights(coefficients.ndim))
    return from_pauli_coefficients(coefficients * factors)


def depolarize_dense(matrix, lam):
    lam = require_probability('lambda', lam)
    return apply_diagonal_channel(matrix, lambda w: (1.0 - lam) ** w)


def invert_depolarizing_dense(matrix, lam):
    lam = require_probability('lambda', lam)
    if lam == 1.0:
        raise SingularChannelError('the fully depolarizing channel has no inverse')
    return apply_diagonal_channel(matrix, lambda w: (1.0 - lam) ** (-w.astype(float)))
