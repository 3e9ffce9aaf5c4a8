"""
Two-source photon state for the left/right exoplanet hypothesis test.

rho = b |psi_star><psi_star| + (1-b) |psi_planet><psi_planet| on m aperture
modes. The planet position is recovered from the eigenvectors of rho through

    <psi_p|O|psi_p> = |c1|^2 <V1|O|V1> + |c2|^2 <V2|O|V2> + 2 Re(c1* c2 <V1|O|V2>)

with c_i = <V_i|psi_p>.
"""

import logging
from dataclasses import dataclass

import numpy as np

from experiments.exceptions import CapacityError, DegenerateInstanceError, InvariantViolation, ParameterError


logger = logging.getLogger(__name__)

MAX_MODES = 16
RANK_TOLERANCE = 1e-12
OVERLAP_CEILING = 1.0 - 1e-12


def mode_positions(m):
    """Aperture grid u_k = k - (m-1)/2, symmetric about zero."""
    return np.arange(m, dtype=float) - (m - 1) / 2.0


def aperture_mode(m, center, width):
    """Gaussian aperture mode centred at `center`, normalized on the m-point grid."""
    amplitude = np.exp(-((mode_positions(m) - center) ** 2) / (4.0 * width ** 2)).astype(complex)
    norm = np.linalg.norm(amplitude)
    if norm == 0:
        raise ParameterError(f'mode centred at {center} has no support on an {m}-point grid')
    return amplitude / norm


def position_observable(m):
    """Horizontal position operator, diagonal in the mode basis."""
    return np.diag(mode_positions(m)).astype(complex)


def _fix_phase(vector):
    pivot = vector[np.argmax(np.abs(vector))]
    return vector * (abs(pivot) / pivot)


@dataclass(frozen=True, eq=False)
class ImagingModel:
    b: float
    psi_star: np.ndarray
    psi_planet: np.ndarray
    observable: np.ndarray
    rho: np.ndarray
    r: float
    V1: np.ndarray
    V2: np.ndarray
    c1: complex
    c2: complex
    eigenvalues: np.ndarray
    delta_x: float | None = None
    width: float | None = None

    @property
    def m(self):
        return self.rho.shape[0]

    @property
    def gap(self):
        return 2.0 * self.r - 1.0

    @property
    def truth(self):
        """<psi_planet|O|psi_planet>; positive when the planet sits to the right."""
        return float(np.real(np.vdot(self.psi_planet, self.observable @ self.psi_planet)))

    def terms(self, observable=None):
        """Diagonal, diagonal and off-diagonal terms of the reconstruction."""
        O = self.observable if observable is None else observable
        o11 = np.real(np.vdot(self.V1, O @ self.V1))
        o22 = np.real(np.vdot(self.V2, O @ self.V2))
        o12 = np.vdot(self.V1, O @ self.V2)
        return float(o11), float(o22), float(np.real(np.conj(self.c1) * self.c2 * o12))

    def reconstruct(self, observable=None):
        o11, o22, cross = self.terms(observable)
        return abs(self.c1) ** 2 * o11 + abs(self.c2) ** 2 * o22 + 2.0 * cross

    def reconstruction_residual(self, observable=None):
        O = self.observable if observable is None else observable
        direct = float(np.real(np.vdot(self.psi_planet, O @ self.psi_planet)))
        return abs(self.reconstruct(O) - direct)


def model_from_states(psi_star, psi_planet, b, observable=None, delta_x=None, width=None):
    """
    Build the model from explicit source states.

    Raises:
        ParameterError: b outside (0.5, 1) or mismatched dimensions
        DegenerateInstanceError: the two sources coincide up to phase
    """
    if not 0.5 < b < 1.0:
        raise ParameterError(f'brightness b must lie in (0.5, 1), got {b}')
    psi_star = np.asarray(psi_star, dtype=complex)
    psi_planet = np.asarray(psi_planet, dtype=complex)
    if psi_star.shape != psi_planet.shape or psi_star.ndim != 1:
        raise ParameterError('source states must be vectors of equal length')
    m = psi_star.size
    if m > MAX_MODES:
        raise CapacityError(f'mode dimension is limited to {MAX_MODES}, got {m}')
    psi_star = psi_star / np.linalg.norm(psi_star)
    psi_planet = psi_planet / np.linalg.norm(psi_planet)
    overlap = abs(np.vdot(psi_star, psi_planet))
    if overlap >= OVERLAP_CEILING:
        raise DegenerateInstanceError(f'star and planet modes are indistinguishable (|overlap| = {overlap:.12f})')
    O = position_observable(m) if observable is None else np.asarray(observable, dtype=complex)

    rho = b * np.outer(psi_star, psi_star.conj()) + (1.0 - b) * np.outer(psi_planet, psi_planet.conj())
    eigenvalues, vectors = np.linalg.eigh(rho)
    eigenvalues, vectors = eigenvalues[::-1], vectors[:, ::-1]
    if m > 2 and eigenvalues[2] > RANK_TOLERANCE:
        raise InvariantViolation(f'two-source state has rank above 2 (third eigenvalue {eigenvalues[2]:.3g})')
    V1, V2 = _fix_phase(vectors[:, 0]), _fix_phase(vectors[:, 1])
    model = ImagingModel(
        b=b, psi_star=psi_star, psi_planet=psi_planet, observable=O, rho=rho,
        r=float(eigenvalues[0]), V1=V1, V2=V2,
        c1=complex(np.vdot(V1, psi_planet)), c2=complex(np.vdot(V2, psi_planet)),
        eigenvalues=eigenvalues, delta_x=delta_x, width=width,
    )
    logger.debug('Imaging model built. m=%s b=%s r=%.6f overlap=%.4g', m, b, model.r, overlap)
    return model


def build_model(m=16, b=0.999, delta_x=4.0, aperture_width=1.0):
    """
    Star at -delta_x/2 and planet at +delta_x/2 on an m-mode aperture.

    The sign of delta_x is the hypothesis: positive puts the planet to the
    right of the star, negative is the mirrored instance.
    """
    if m < 2:
        raise ParameterError(f'need at least two modes, got {m}')
    if m > MAX_MODES:
        raise CapacityError(f'mode dimension is limited to {MAX_MODES}, got {m}')
    if aperture_width <= 0:
        raise ParameterError(f'aperture width must be positive, got {aperture_width}')
    psi_star = aperture_mode(m, -delta_x / 2.0, aperture_width)
    psi_planet = aperture_mode(m, delta_x / 2.0, aperture_width)
    return model_from_states(psi_star, psi_planet, b, delta_x=delta_x, width=aperture_width)


def mirrored_pair(m=16, b=0.999, delta_x=4.0, aperture_width=1.0):
    """(right, left) instances with the same separation."""
    if delta_x == 0:
        raise DegenerateInstanceError('zero separation leaves nothing to decide')
    separation = abs(delta_x)
    return build_model(m, b, separation, aperture_width), build_model(m, b, -separation, aperture_width)
