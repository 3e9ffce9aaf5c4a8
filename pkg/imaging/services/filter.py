"""
Channel-level eigenvalue filter composed with the DME oracle.

The QSP sequence is replaced by its polynomial: an erf step between x(1-r)
and x r, interpolated on Chebyshev nodes, evaluated on the spectrum of the
program state. Each of the `degree` controlled queries is built from
`rounds` DME interactions, with raw noise depolarizing the target after
every interaction. The modulus of the resulting ancilla coherence
multiplier damps the filter contrast per eigenvalue, and the target itself
passes through Q = (inverse exact query) o (noisy DME query) once per query,
which drifts it toward the program state and, under raw noise, toward I/d.
The branch map is

    sigma -> |0><0| x K0 Q^degree(sigma) K0^dag + |1><1| x K1 Q^degree(sigma) K1^dag

with K0 = sqrt(P0(rho)) and K1 = sqrt(1 - P0(rho)), which is CPTP for any
P0 with values in [0, 1].
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.chebyshev import chebfit, chebval
from scipy.special import erf

from experiments.exceptions import (
    DegenerateInstanceError,
    InvariantViolation,
    ParameterError,
    require_positive_int,
    require_probability,
)
from imaging.services.dme import (
    check_channel,
    controlled_query_factor,
    dme_channel_transfer,
    dme_query_spectral,
    exact_query_transfer,
)


logger = logging.getLogger(__name__)

MODES = ('raw', 'uploaded')
DEFAULT_NOISE_FACTOR = 3.0
STEEPNESS_PER_DEGREE = 1 / 8
LEAKAGE_WARN = 1e-2
FIT_GRID = 2001
COMPOSITION_TOLERANCE = 1e-8


@dataclass(frozen=True)
class PipelineNoise:
    """
    raw: depolarizing on the target after every DME interaction.
    uploaded: depolarizing once on every state loaded into the register.
    """

    mode: str = 'uploaded'
    rate: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f'noise mode must be one of {MODES}, got {self.mode!r}')
        require_probability('noise rate', self.rate)


def joint_noise(rate, factor=DEFAULT_NOISE_FACTOR):
    """(raw, uploaded) pair with the uploaded rate factor times the raw one."""
    if factor <= 0:
        raise ParameterError(f'noise factor must be positive, got {factor}')
    return PipelineNoise('raw', rate), PipelineNoise('uploaded', factor * rate)


@dataclass(frozen=True)
class FilterConfig:
    x: float = 1.0
    degree: int = 24
    rounds: int = 64

    def __post_init__(self):
        if not 0 < self.x <= 1:
            raise ParameterError(f'x must lie in (0, 1], got {self.x}')
        require_positive_int('degree', self.degree, minimum=2)
        require_positive_int('rounds', self.rounds)

    @property
    def program_copies(self):
        return self.degree * self.rounds

    @property
    def copies_per_shot(self):
        """Program copies consumed by the filter plus the target photon."""
        return 1 + self.program_copies

    def as_dict(self):
        return {'x': self.x, 'degree': self.degree, 'rounds': self.rounds}


@dataclass(frozen=True, eq=False)
class HeavisideApproximant:
    """Chebyshev interpolant of an erf step on y in [0, 1] (t = 2y - 1)."""

    x: float
    degree: int
    steepness: float
    coefficients: np.ndarray
    fit_error: float

    @property
    def threshold(self):
        return self.x / 2.0

    def target(self, y):
        t = 2.0 * np.asarray(y, dtype=float) - 1.0
        return 0.5 * (1.0 + erf(self.steepness * (t - (self.x - 1.0))))

    def __call__(self, y):
        t = 2.0 * np.asarray(y, dtype=float) - 1.0
        return np.clip(chebval(t, self.coefficients), 0.0, 1.0)


@lru_cache(maxsize=256)
def heaviside_approximant(x, degree):
    """Step between x(1-r) and x r at y = x/2, interpolated at degree + 1 Chebyshev nodes."""
    steepness = STEEPNESS_PER_DEGREE * degree
    nodes = np.cos(np.pi * (2 * np.arange(degree + 1) + 1) / (2 * (degree + 1)))
    values = 0.5 * (1.0 + erf(steepness * (nodes - (x - 1.0))))
    coefficients = chebfit(nodes, values, degree)
    grid = np.linspace(-1.0, 1.0, FIT_GRID)
    fit_error = float(np.max(np.abs(chebval(grid, coefficients) - 0.5 * (1.0 + erf(steepness * (grid - (x - 1.0)))))))
    return HeavisideApproximant(x=x, degree=degree, steepness=steepness, coefficients=coefficients, fit_error=fit_error)


@dataclass(eq=False)
class BranchResult:
    config: FilterConfig
    noise: PipelineNoise
    program: np.ndarray
    target: np.ndarray
    states: tuple
    probabilities: tuple
    kraus: tuple
    leakage: float
    fidelities: tuple
    fit_error: float
    channel_check: dict = field(default_factory=dict)

    @property
    def copies_per_shot(self):
        return self.config.copies_per_shot

    @property
    def oracle_rate(self):
        return oracle_rate(self.noise)


def loaded_states(model, noise):
    """(program state, target state) as seen by the filter."""
    rho = model.rho
    if noise.mode == 'uploaded' and noise.rate > 0:
        d = model.m
        loaded = (1.0 - noise.rate) * rho + noise.rate * np.eye(d) / d
        return loaded, loaded
    return rho, rho


def oracle_rate(noise):
    """Depolarizing rate after every DME interaction; only raw access has one."""
    return noise.rate if noise.mode == 'raw' else 0.0


def branch_probabilities(eigenvalues, config, rate=0.0):
    """P0 per eigenvalue: 1/2 + (f(x lambda) - 1/2) |query factor|^degree."""
    f = heaviside_approximant(config.x, config.degree)(config.x * np.clip(eigenvalues, 0.0, 1.0))
    contrast = np.abs(controlled_query_factor(eigenvalues, config.x, config.rounds, rate)) ** config.degree
    return np.clip(0.5 + (f - 0.5) * contrast, 0.0, 1.0)


def filter_branches(program, target, config, rate=0.0):
    """
    Unnormalized branch states K_b Q^degree(target) K_b^dag and the Kraus
    pair, with Q one noisy DME query followed by the inverse exact query.

    Everything is diagonal or elementwise in the program eigenbasis.
    """
    eigenvalues, vectors = np.linalg.eigh(program)
    p0 = branch_probabilities(eigenvalues, config, rate)
    gains = (np.sqrt(p0), np.sqrt(1.0 - p0))
    coherence, diagonal = dme_query_spectral(eigenvalues, config.x, config.rounds, rate)

    sigma = vectors.conj().T @ target @ vectors
    drifted = sigma * coherence ** config.degree
    np.fill_diagonal(drifted, np.linalg.matrix_power(diagonal, config.degree) @ np.diag(sigma))

    outputs = tuple(vectors @ (np.outer(g, g) * drifted) @ vectors.conj().T for g in gains)
    kraus = tuple((vectors * g) @ vectors.conj().T for g in gains)
    return outputs, kraus


def composed_branch_transfers(program, config, rate, kraus):
    """Dense branch transfer matrices built from dme_channel_transfer, one per Kraus operator."""
    query = exact_query_transfer(program, -config.x) @ dme_channel_transfer(program, config.x, config.rounds, rate)
    drift = np.linalg.matrix_power(query, config.degree)
    return [np.kron(K, K.conj()) @ drift for K in kraus]


def eigen_filter(model, noise, config, check=False, warn=True):
    """
    Sort the target into labeled eigenvector branches.

    Returns:
        BranchResult with normalized branch states, branch probabilities,
        wrong-branch leakage and fidelities to V1, V2

    Raises:
        DegenerateInstanceError: no spectral gap or an empty branch
    """
    if model.gap <= 0:
        raise DegenerateInstanceError('program state has no spectral gap between its two sources')
    program, target = loaded_states(model, noise)
    rate = oracle_rate(noise)
    outputs, kraus = filter_branches(program, target, config, rate)
    probabilities = tuple(float(np.real(np.trace(w))) for w in outputs)
    if min(probabilities) <= 0:
        raise DegenerateInstanceError(f'filter branch is empty (probabilities {probabilities})')
    states = tuple(w / p for w, p in zip(outputs, probabilities))

    model_p0 = branch_probabilities(np.array([model.r, 1.0 - model.r]), config, rate)
    leakage = float(model.r * (1.0 - model_p0[0]) + (1.0 - model.r) * model_p0[1])
    if warn and leakage > LEAKAGE_WARN:
        logger.warning(
            'Eigenvalue filter cannot resolve the spectral gap. gap=%.4g x=%s degree=%s rounds=%s leakage=%.3g',
            model.gap, config.x, config.degree, config.rounds, leakage,
        )
    fidelities = (
        float(np.real(np.vdot(model.V1, states[0] @ model.V1))),
        float(np.real(np.vdot(model.V2, states[1] @ model.V2))),
    )
    approximant = heaviside_approximant(config.x, config.degree)
    result = BranchResult(
        config=config, noise=noise, program=program, target=target, states=states, probabilities=probabilities,
        kraus=kraus, leakage=leakage, fidelities=fidelities, fit_error=approximant.fit_error,
    )
    if check:
        result.channel_check = check_filter_channel(result)
    return result


def check_filter_channel(result, tol=COMPOSITION_TOLERANCE):
    """
    Choi checks of the two-branch map composed from dense DME transfers, and
    agreement of that map with the spectral branch states.
    """
    d = result.program.shape[0]
    branches = composed_branch_transfers(result.program, result.config, result.oracle_rate, result.kraus)
    checks = check_channel(branches, d)
    vec = result.target.reshape(-1)
    error = max(
        float(np.max(np.abs((branch @ vec).reshape(d, d) - p * state)))
        for branch, p, state in zip(branches, result.probabilities, result.states)
    )
    if error > tol:
        raise InvariantViolation(f'spectral filter disagrees with the composed DME channel (error {error:.3g})')
    return {**checks, 'composition_error': error}


def trace_distance_to_eigenvectors(result, model):
    """Largest trace distance between a branch state and its ideal eigenvector."""
    distances = []
    for state, vector in zip(result.states, (model.V1, model.V2)):
        diff = state - np.outer(vector, vector.conj())
        distances.append(0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2.0)))))
    return max(distances)


def default_candidates(xs=(0.25, 0.5, 0.75, 1.0), degrees=(8, 16, 24, 32, 48), rounds=tuple(2 ** k for k in range(9))):
    """Grid of filter configurations searched for x, degree and DME rounds."""
    return [FilterConfig(x, degree, M) for x in xs for degree in degrees for M in rounds]


def query_error(config):
    """n x^2 / M, the accumulated DME contrast loss scale."""
    return config.degree * config.x ** 2 / config.rounds


def describe(result):
    return {
        **result.config.as_dict(),
        'mode': result.noise.mode, 'rate': result.noise.rate,
        'p0': result.probabilities[0], 'p1': result.probabilities[1],
        'fidelity_v1': result.fidelities[0], 'fidelity_v2': result.fidelities[1],
        'leakage': result.leakage, 'oracle_rate': result.oracle_rate, 'fit_error': result.fit_error,
        'query_error': query_error(result.config), 'log10_copies': math.log10(result.copies_per_shot),
    }
