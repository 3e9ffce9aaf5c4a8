"""
n-site Pauli strings in symplectic form.

A PauliString stores one x bit and one z bit per site and a phase i**phase.
Site basis: I=(0,0), X=(1,0), Y=(1,1), Z=(0,1); Y is the Hermitian Pauli Y,
so a string with phase 0 is Hermitian.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from experiments.exceptions import CapacityError, ParameterError
from experiments.services.config import get_config


LABEL_TO_BITS = {'I': (0, 0), 'X': (1, 0), 'Y': (1, 1), 'Z': (0, 1)}
BITS_TO_LABEL = {bits: label for label, bits in LABEL_TO_BITS.items()}

SINGLE_SITE = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
}

# Ordering used by the dense Pauli-basis transforms: index 0..3 = I, X, Y, Z.
BASIS_ORDER = ((0, 0), (1, 0), (1, 1), (0, 1))


def _site_phase(x1, z1, x2, z2):
    """Quarter turns g with P1 P2 = i**g P3 on one site."""
    if x1 and z1:
        return z2 - x2
    if x1:
        return z2 * (2 * x2 - 1)
    if z1:
        return x2 * (1 - 2 * z2)
    return 0


@dataclass(frozen=True)
class PauliString:
    x_bits: tuple
    z_bits: tuple
    phase: int = 0

    def __post_init__(self):
        if len(self.x_bits) != len(self.z_bits):
            raise ParameterError('x_bits and z_bits must have the same length')
        object.__setattr__(self, 'x_bits', tuple(int(b) & 1 for b in self.x_bits))
        object.__setattr__(self, 'z_bits', tuple(int(b) & 1 for b in self.z_bits))
        object.__setattr__(self, 'phase', int(self.phase) % 4)

    @classmethod
    def from_label(cls, label, phase=0):
        try:
            bits = [LABEL_TO_BITS[ch] for ch in label.upper()]
        except KeyError:
            raise ParameterError(f'invalid Pauli label {label!r}')
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @classmethod
    def identity(cls, n):
        return cls((0,) * n, (0,) * n)

    @property
    def n(self):
        return len(self.x_bits)

    @property
    def label(self):
        return ''.join(BITS_TO_LABEL[(x, z)] for x, z in zip(self.x_bits, self.z_bits))

    @property
    def weight(self):
        return sum(1 for x, z in zip(self.x_bits, self.z_bits) if x or z)

    def __mul__(self, other):
        if self.n != other.n:
            raise ParameterError(f'cannot multiply Pauli strings on {self.n} and {other.n} sites')
        phase = self.phase + other.phase
        for x1, z1, x2, z2 in zip(self.x_bits, self.z_bits, other.x_bits, other.z_bits):
            phase += _site_phase(x1, z1, x2, z2)
        x_bits = tuple(a ^ b for a, b in zip(self.x_bits, other.x_bits))
        z_bits = tuple(a ^ b for a, b in zip(self.z_bits, other.z_bits))
        return PauliString(x_bits, z_bits, phase)

    def commutes(self, other):
        """Symplectic inner product is zero."""
        form = sum(x1 * z2 + z1 * x2 for x1, z1, x2, z2 in zip(self.x_bits, self.z_bits, other.x_bits, other.z_bits))
        return form % 2 == 0

    def __str__(self):
        prefix = ('+', '+i', '-', '-i')[self.phase]
        return f'{prefix}{self.label}'


def weight(p: PauliString) -> int:
    return p.weight


def dense(p: PauliString) -> np.ndarray:
    """2**n x 2**n matrix of p, site 0 as the most significant tensor factor."""
    cap = get_config()['MAX_DENSE_QUBITS']
    if p.n > cap:
        raise CapacityError(f'dense Pauli on {p.n} sites exceeds the {cap}-qubit cap')
    if p.n == 0:
        return np.array([[1j ** p.phase]], dtype=complex)
    factors = [SINGLE_SITE[(x, z)] for x, z in zip(p.x_bits, p.z_bits)]
    return (1j ** p.phase) * reduce(np.kron, factors)


def all_paulis(n):
    """Every phase-free Pauli string on n sites, in BASIS_ORDER lexicographic order."""
    for index in np.ndindex(*((4,) * n)):
        bits = [BASIS_ORDER[k] for k in index]
        yield PauliString(tuple(b[0] for b in bits), tuple(b[1] for b in bits))
