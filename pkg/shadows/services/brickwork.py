"""
Pauli-support dynamics under brickwork circuits of random two-qubit
Clifford gates on an open chain.

A gate whose pair carries any non-identity support maps it to a uniformly
random non-identity two-site Pauli, so the pair pattern becomes (1,1) with
probability 9/15 and (1,0) or (0,1) with probability 3/15 each.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from experiments.exceptions import InvariantViolation, ParameterError


BOTH = 9 / 15
FIRST_ONLY = 3 / 15
SECOND_ONLY = 3 / 15
TRANSITIONS = (BOTH, FIRST_ONLY, SECOND_ONLY)


@dataclass(frozen=True)
class BrickworkSpec:
    """
    Open chain of n sites, depth layers, observable on k contiguous sites
    starting at start. Layer i pairs (2j + (offset + i) % 2, 2j + 1 + ...).
    """

    n: int
    depth: int
    k: int
    start: int | None = None
    offset: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.depth < 0:
            raise ParameterError(f'need n >= 1, k >= 1, depth >= 0; got n={self.n} k={self.k} depth={self.depth}')
        if self.start is None:
            object.__setattr__(self, 'start', default_start(self.n, self.k))
        if self.start < 0 or self.start + self.k > self.n:
            raise ParameterError(f'observable [{self.start}, {self.start + self.k}) does not fit a chain of {self.n}')

    def layer(self, index):
        return layer_pairs(self.n, index, self.offset)

    def initial_support(self):
        occupied = np.zeros(self.n, dtype=bool)
        occupied[self.start:self.start + self.k] = True
        return occupied


def default_start(n, k):
    """Centered start rounded down to an even site."""
    start = max(0, (n - k) // 2)
    return start - start % 2


def default_chain_length(k, depth, cap):
    """Long enough that the light cone does not reach the chain ends, within cap."""
    return min(cap, k + 2 * depth + 2)


def layer_pairs(n, index, offset=0):
    off = (offset + index) % 2
    return [(2 * j + off, 2 * j + 1 + off) for j in range((n - off) // 2)]


@dataclass(frozen=True)
class SupportState:
    n: int
    occupied: tuple
    layer_weights: tuple = ()

    @property
    def weight(self):
        return sum(self.occupied)


def resample_pairs(occupied, pairs, uniforms):
    """
    Apply one layer to a batch of support patterns in place.

    occupied has shape (trials, n); uniforms has shape (trials, len(pairs)).
    """
    for column, (a, b) in enumerate(pairs):
        u = uniforms[:, column]
        active = occupied[:, a] | occupied[:, b]
        first = u < BOTH + FIRST_ONLY
        second = (u < BOTH) | (u >= BOTH + FIRST_ONLY)
        occupied[:, a] = np.where(active, first, occupied[:, a])
        occupied[:, b] = np.where(active, second, occupied[:, b])
    return occupied


def step_layer(state, pairs, rng):
    occupied = np.array(state.occupied, dtype=bool).reshape(1, -1)
    resample_pairs(occupied, pairs, rng.random((1, len(pairs))))
    occupied = occupied[0]
    weight = int(occupied.sum())
    if state.weight and not weight:
        raise InvariantViolation('support vanished under a Clifford layer')
    return SupportState(state.n, tuple(bool(v) for v in occupied), state.layer_weights + (weight,))


def _clifford_generators():
    """H, S and CNOT as 4x4 symplectic matrices on (x1, z1, x2, z2)."""
    def rowop(target, source):
        m = np.eye(4, dtype=np.uint8)
        m[target, source] = 1
        return m

    h1 = np.eye(4, dtype=np.uint8)[[1, 0, 2, 3]]
    h2 = np.eye(4, dtype=np.uint8)[[0, 1, 3, 2]]
    s1 = rowop(1, 0)
    s2 = rowop(3, 2)
    cnot = (rowop(2, 0) @ rowop(1, 3)) % 2
    return [h1, h2, s1, s2, cnot]


@lru_cache(maxsize=1)
def two_qubit_symplectic_group():
    """All elements of Sp(4, 2) reachable from the generators."""
    generators = _clifford_generators()
    identity = np.eye(4, dtype=np.uint8)
    seen = {identity.tobytes(): identity}
    frontier = [identity]
    while frontier:
        next_frontier = []
        for element in frontier:
            for g in generators:
                product = (g @ element) % 2
                key = product.astype(np.uint8).tobytes()
                if key not in seen:
                    seen[key] = product.astype(np.uint8)
                    next_frontier.append(seen[key])
        frontier = next_frontier
    return list(seen.values())


def clifford_support_transitions():
    """
    Average the support pattern of C P C^dagger over the two-qubit Clifford
    group for every non-identity P.

    Returns:
        Dict input pattern -> (p_both, p_first_only, p_second_only)
    """
    group = two_qubit_symplectic_group()
    table = {}
    for bits in range(1, 16):
        v = np.array([(bits >> s) & 1 for s in range(4)], dtype=np.uint8)
        counts = np.zeros(3)
        for element in group:
            image = (element @ v) % 2
            first, second = bool(image[0] | image[1]), bool(image[2] | image[3])
            if first and second:
                counts[0] += 1
            elif first:
                counts[1] += 1
            elif second:
                counts[2] += 1
            else:
                raise InvariantViolation('symplectic image of a non-identity Pauli is the identity')
        table[tuple(int(b) for b in v)] = tuple(counts / len(group))
    return table
