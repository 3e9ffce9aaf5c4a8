"""
The cyclic-shift observable and its noise-corrected spectral form.

On one site (three qubits, one per copy) the cyclic shift c has eigenvalues
1, omega, omega^2 with omega = exp(2 pi i / 3). The deconvolved operator
h = I_lambda'^{(x)3}(c) commutes with c and acts as the scalar alpha_s on
each eigenspace s.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from experiments.exceptions import SingularChannelError, require_probability
from pauli.services.channels import invert_depolarizing_dense
from replicas.services.permutations import CYCLE, check_replica_capacity, cycle_operator, permutation_operator


OMEGA = np.exp(2j * np.pi / 3)
EIGENVALUES = (1.0 + 0j, OMEGA, OMEGA ** 2)


@dataclass(frozen=True)
class CycleSpectralData:
    a: float
    alpha_1: float
    alpha_omega: complex
    projectors: tuple

    @property
    def alphas(self):
        """Eigenvalue of h on each outcome: (alpha_1, alpha_omega, conj(alpha_omega))."""
        return (complex(self.alpha_1), self.alpha_omega, np.conj(self.alpha_omega))

    @property
    def ranks(self):
        return tuple(int(round(np.trace(p).real)) for p in self.projectors)


def single_site_cycle():
    return permutation_operator(CYCLE, 2, 3).astype(complex)


def cycle_projectors():
    c = single_site_cycle()
    c2 = c @ c
    identity = np.eye(8, dtype=complex)
    return tuple((identity + np.conj(mu) * c + np.conj(mu) ** 2 * c2) / 3.0 for mu in EIGENVALUES)


def cycle_spectral_data(lambda_prime):
    lam = require_probability('lambda_prime', lambda_prime)
    if lam == 1.0:
        raise SingularChannelError('cycle deconvolution needs lambda_prime < 1')
    projectors = cycle_projectors()
    h = invert_depolarizing_dense(single_site_cycle(), lam)
    alphas = [np.trace(p @ h) / np.trace(p).real for p in projectors]
    return CycleSpectralData(a=1.0 - lam, alpha_1=float(alphas[0].real), alpha_omega=complex(alphas[1]), projectors=projectors)


def alpha_closed_form(lambda_prime):
    """(alpha_1, alpha_omega) as closed-form functions of a = 1 - lambda_prime."""
    a = 1.0 - require_probability('lambda_prime', lambda_prime)
    if a == 0.0:
        raise SingularChannelError('cycle deconvolution needs lambda_prime < 1')
    alpha_1 = (1 + 3 * a ** -2) / 4
    alpha_omega = complex((1 - 3 * a ** -2) / 4, np.sqrt(3) / 2 * a ** -3)
    return alpha_1, alpha_omega


def alpha_omega_modulus_sq(a):
    return (1 - 6 * a ** -2 + 9 * a ** -4 + 12 * a ** -6) / 16


def site_major_to_copy_major(matrix, n):
    """
    Reorder a 3n-qubit operator from site-major qubit order (site, copy) to
    copy-major order (copy, site).
    """
    qubits = 3 * n
    axes = [(q % n) * 3 + q // n for q in range(qubits)]
    tensor = matrix.reshape((2,) * (2 * qubits))
    return tensor.transpose(axes + [qubits + a for a in axes]).reshape(matrix.shape)


def copy_major_to_site_major(matrix, n):
    qubits = 3 * n
    axes = [(s % 3) * n + s // 3 for s in range(qubits)]
    tensor = matrix.reshape((2,) * (2 * qubits))
    return tensor.transpose(axes + [qubits + a for a in axes]).reshape(matrix.shape)


def cycle_observable(n):
    """H = (pi + pi^-1) / 2, whose expectation on rho^{(x)3} is tr(rho^3)."""
    check_replica_capacity(n, 3)
    return (cycle_operator(n) + cycle_operator(n, inverse=True)) / 2.0


def corrected_cycle_observable(n, lambda_prime):
    """Hermitian part of h^{(x)n} in copy-major order."""
    check_replica_capacity(n, 3)
    lam = require_probability('lambda_prime', lambda_prime)
    if lam == 1.0:
        raise SingularChannelError('cycle deconvolution needs lambda_prime < 1')
    h = invert_depolarizing_dense(single_site_cycle(), lam)
    site_major = reduce(np.kron, [h] * n)
    full = site_major_to_copy_major(site_major, n)
    return (full + full.conj().T) / 2.0
