"""
Rotated surface-code patch on a d x d grid of data sites (x, y).

Plaquettes sit on faces (i, j) with corners (i..i+1, j..j+1). A face is
X-type when i + j is even. Weight-2 faces on the top and bottom edges are
kept only when X-type, those on the left and right edges only when Z-type,
so logical X runs along a column and logical Z along a row.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from experiments.exceptions import InvariantViolation, ParameterError


SECTORS = ('X', 'Z')
MIN_DISTANCE = 3
MAX_DISTANCE = 25


@dataclass(frozen=True)
class Stabilizer:
    kind: str
    face: tuple
    sites: frozenset

    @property
    def weight(self):
        return len(self.sites)


def face_kind(i, j):
    return 'X' if (i + j) % 2 == 0 else 'Z'


def face_sites(i, j, d):
    return frozenset(
        (x, y) for x in (i, i + 1) for y in (j, j + 1) if 0 <= x < d and 0 <= y < d
    )


def _faces(d):
    for i in range(-1, d):
        for j in range(-1, d):
            kind = face_kind(i, j)
            horizontal_edge = j in (-1, d - 1)
            vertical_edge = i in (-1, d - 1)
            if horizontal_edge and vertical_edge:
                continue
            if horizontal_edge and kind != 'X':
                continue
            if vertical_edge and kind != 'Z':
                continue
            yield kind, (i, j)


@dataclass(frozen=True)
class CodePatch:
    d: int
    x_stabilizers: tuple
    z_stabilizers: tuple
    logical_x: frozenset
    logical_z: frozenset

    @property
    def sites(self):
        return [(x, y) for y in range(self.d) for x in range(self.d)]

    def stabilizers(self, kind):
        return self.x_stabilizers if kind == 'X' else self.z_stabilizers

    def logical(self, kind):
        return self.logical_x if kind == 'X' else self.logical_z

    def index(self, site):
        x, y = site
        return x + self.d * y

    def vector(self, sites):
        v = np.zeros(self.d * self.d, dtype=np.uint8)
        for site in sites:
            v[self.index(site)] = 1
        return v

    def check_matrix(self, kind):
        return np.array([self.vector(s.sites) for s in self.stabilizers(kind)], dtype=np.uint8)

    @cached_property
    def site_stabilizers(self):
        """site -> {kind: [stabilizer positions containing the site]}"""
        table = {site: {'X': [], 'Z': []} for site in self.sites}
        for kind in SECTORS:
            for position, stabilizer in enumerate(self.stabilizers(kind)):
                for site in stabilizer.sites:
                    table[site][kind].append(position)
        return table

    def verify(self):
        """Check counts, pairwise commutation and the logical algebra."""
        n_stabilizers = len(self.x_stabilizers) + len(self.z_stabilizers)
        if n_stabilizers != self.d * self.d - 1:
            raise InvariantViolation(f'd={self.d} patch has {n_stabilizers} stabilizers, expected {self.d ** 2 - 1}')
        hx, hz = self.check_matrix('X'), self.check_matrix('Z')
        if np.any((hx.astype(int) @ hz.T.astype(int)) % 2):
            raise InvariantViolation(f'd={self.d} patch has anticommuting stabilizers')
        lx, lz = self.vector(self.logical_x), self.vector(self.logical_z)
        if np.any(hz.astype(int) @ lx % 2) or np.any(hx.astype(int) @ lz % 2):
            raise InvariantViolation(f'd={self.d} logical does not commute with the stabilizers')
        if int(lx.astype(int) @ lz) % 2 != 1:
            raise InvariantViolation(f'd={self.d} logical X and Z do not anticommute')
        return True


def build_patch(d):
    """
    Rotated [[d^2, 1, d]] patch with canonical logicals on column x=0 (X)
    and row y=0 (Z).
    """
    if not isinstance(d, int) or d % 2 == 0 or not MIN_DISTANCE <= d <= MAX_DISTANCE:
        raise ParameterError(f'distance must be odd and in [{MIN_DISTANCE}, {MAX_DISTANCE}], got {d}')
    stabilizers = {'X': [], 'Z': []}
    for kind, (i, j) in _faces(d):
        stabilizers[kind].append(Stabilizer(kind, (i, j), face_sites(i, j, d)))
    return CodePatch(
        d=d,
        x_stabilizers=tuple(stabilizers['X']),
        z_stabilizers=tuple(stabilizers['Z']),
        logical_x=frozenset((0, y) for y in range(d)),
        logical_z=frozenset((x, 0) for x in range(d)),
    )
