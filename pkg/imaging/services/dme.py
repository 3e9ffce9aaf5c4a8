"""
Density-matrix exponentiation and channel checks.

One DME round with program rho and target sigma is

    sigma -> Tr_program[exp(-i S dt) (rho x sigma) exp(+i S dt)]
           = cos^2(dt) sigma + sin^2(dt) tr(sigma) rho - i sin(dt) cos(dt) [rho, sigma]

Superoperators act on row-major vec(sigma), so vec(A sigma B) = (A kron B^T) vec(sigma).
"""

import logging
import math

import numpy as np
from scipy.linalg import expm

from experiments.exceptions import InvariantViolation, ParameterError, require_probability
from replicas.services.permutations import permutation_operator


logger = logging.getLogger(__name__)

CHANNEL_TOLERANCE = 1e-10


def swap_operator(d):
    return permutation_operator((1, 0), d, 2)


def partial_trace_first(matrix, d):
    return np.einsum('ijik->jk', matrix.reshape(d, d, d, d))


def dme_round(rho, sigma, dt):
    """One partial-swap interaction traced over the program copy."""
    d = rho.shape[0]
    U = expm(-1j * dt * swap_operator(d))
    joint = U @ np.kron(rho, sigma) @ U.conj().T
    return partial_trace_first(joint, d)


def dme_transfer(rho, dt):
    """Per-round mixing transfer matrix acting on vec(sigma)."""
    d = rho.shape[0]
    c, s = math.cos(dt), math.sin(dt)
    identity = np.eye(d)
    return (
        c * c * np.eye(d * d, dtype=complex)
        + s * s * np.outer(rho.reshape(-1), identity.reshape(-1))
        - 1j * s * c * (np.kron(rho, identity) - np.kron(identity, rho.T))
    )


def depolarizing_transfer(d, rate):
    rate = require_probability('depolarizing rate', rate)
    identity = np.eye(d)
    return (1.0 - rate) * np.eye(d * d, dtype=complex) + rate * np.outer(identity.reshape(-1) / d, identity.reshape(-1))


def dme_channel_transfer(rho_program, x, M, noise_rate=0.0):
    """Transfer matrix of M rounds at step x/M, depolarizing the target after each round."""
    if M < 1:
        raise ParameterError(f'DME needs at least one round, got M={M}')
    d = rho_program.shape[0]
    step = dme_transfer(rho_program, x / M)
    if noise_rate:
        step = depolarizing_transfer(d, noise_rate) @ step
    return np.linalg.matrix_power(step, M)


def dme_channel(rho_program, sigma_target, x, M, noise_rate=0.0):
    """Approximates exp(-i x rho) sigma exp(+i x rho) with M program copies."""
    d = sigma_target.shape[0]
    transfer = dme_channel_transfer(rho_program, x, M, noise_rate)
    return (transfer @ sigma_target.reshape(-1)).reshape(d, d)


def exact_evolution(rho, sigma, x):
    U = expm(-1j * x * rho)
    return U @ sigma @ U.conj().T


def exact_query_transfer(rho, x):
    """Transfer matrix of sigma -> exp(-i x rho) sigma exp(+i x rho)."""
    U = expm(-1j * x * rho)
    return np.kron(U, U.conj())


def dme_query_spectral(eigenvalues, x, M, noise_rate=0.0):
    """
    One noisy M-round DME query followed by the inverse exact query, in the
    eigenbasis of the program state.

    Off-diagonal elements sigma_ij only pick up a factor; the diagonal mixes
    through a d x d matrix. Together they reproduce
    exact_query_transfer(rho, -x) @ dme_channel_transfer(rho, x, M, noise_rate).

    Returns:
        (coherence, diagonal): coherence[i, j] multiplies sigma_ij for i != j
        (ones on its diagonal), diagonal acts on the vector of sigma_ii
    """
    if M < 1:
        raise ParameterError(f'DME needs at least one round, got M={M}')
    rate = require_probability('depolarizing rate', noise_rate)
    mu = np.asarray(eigenvalues, dtype=float)
    d = mu.size
    dt = x / M
    c, s = math.cos(dt), math.sin(dt)
    gaps = mu[:, None] - mu[None, :]

    per_round = (1.0 - rate) * (c * c - 1j * s * c * gaps)
    coherence = per_round ** M * np.exp(1j * x * gaps)
    np.fill_diagonal(coherence, 1.0)

    swap_in = c * c * np.eye(d) + s * s * np.outer(mu, np.ones(d))
    depolarize = (1.0 - rate) * np.eye(d) + rate * np.ones((d, d)) / d
    diagonal = np.linalg.matrix_power(depolarize @ swap_in, M)
    return coherence, diagonal


def trace_norm(matrix):
    return float(np.sum(np.linalg.svd(matrix, compute_uv=False)))


def dme_convergence(rho, sigma, x, rounds):
    """
    Trace-norm error of DME against exact evolution for each M in rounds,
    with the fitted log-log slope of error against 1/M.
    """
    target = exact_evolution(rho, sigma, x)
    errors = [trace_norm(dme_channel(rho, sigma, x, M) - target) for M in rounds]
    slope = float(np.polyfit(np.log(1.0 / np.asarray(rounds, dtype=float)), np.log(errors), 1)[0])
    return errors, slope


def controlled_round_factor(eigenvalues, dt):
    """
    Multiplier of the ancilla coherence per controlled DME round, per
    eigenvalue: Tr_program[exp(-i S dt)(rho x X)] = (cos dt - i sin dt rho) X.
    """
    return math.cos(dt) - 1j * math.sin(dt) * np.asarray(eigenvalues, dtype=float)


def controlled_query_factor(eigenvalues, x, M, noise_rate=0.0):
    """
    Coherence multiplier of one controlled exp(-i x rho) query built from M
    rounds. Depolarizing the target after a round scales the coherence block
    by (1 - noise_rate).
    """
    return ((1.0 - noise_rate) * controlled_round_factor(eigenvalues, x / M)) ** M


def choi_matrix(transfer, d_in, d_out=None):
    """Choi matrix sum_ij |i><j| x E(|i><j|) of a transfer matrix."""
    d_out = d_in if d_out is None else d_out
    blocks = transfer.reshape(d_out, d_out, d_in, d_in)
    return blocks.transpose(2, 0, 3, 1).reshape(d_in * d_out, d_in * d_out)


def check_channel(transfers, d_in, d_out=None, tol=CHANNEL_TOLERANCE):
    """
    Trace preservation and complete positivity of a channel given as one
    transfer matrix or a list of branch transfer matrices whose sum is the
    channel.

    Returns:
        dict with tp_error and min_choi_eigenvalue

    Raises:
        InvariantViolation: either check fails beyond tol
    """
    d_out = d_in if d_out is None else d_out
    if not isinstance(transfers, (list, tuple)):
        transfers = [transfers]
    chois = [choi_matrix(t, d_in, d_out) for t in transfers]
    reduced = sum(np.einsum('ikjk->ij', J.reshape(d_in, d_out, d_in, d_out)) for J in chois)
    tp_error = float(np.max(np.abs(reduced - np.eye(d_in))))
    min_eig = min(float(np.linalg.eigvalsh((J + J.conj().T) / 2.0).min()) for J in chois)
    hermitian_error = max(float(np.max(np.abs(J - J.conj().T))) for J in chois)
    if tp_error > tol:
        raise InvariantViolation(f'channel is not trace preserving (error {tp_error:.3g})')
    if min_eig < -tol or hermitian_error > tol:
        raise InvariantViolation(f'channel is not completely positive (min Choi eigenvalue {min_eig:.3g})')
    return {'tp_error': tp_error, 'min_choi_eigenvalue': min_eig}
