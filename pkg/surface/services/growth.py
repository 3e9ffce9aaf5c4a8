"""
Growth of SC(d1) in the lower-left corner to SC(d2).

New sites are prepared in |+> when y > x and in |0> otherwise, so the
column logical X extends through |+> sites and the row logical Z through
|0> sites. Stabilizers whose t=0 value is not fixed by that preparation are
gauge data.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from experiments.exceptions import InvariantViolation, ParameterError
from surface.services.gf2 import in_rowspace, solve
from surface.services.patch import SECTORS, build_patch


logger = logging.getLogger(__name__)

MIN_GROWTH_DISTANCE = 4


@dataclass(frozen=True)
class GrowthLayout:
    d1: int
    d2: int
    old: object
    new: object
    init_basis: dict

    @property
    def new_sites(self):
        return sorted(self.init_basis, key=lambda site: (site[1], site[0]))

    def is_old(self, site):
        x, y = site
        return x < self.d1 and y < self.d1

    def prepared_sites(self, kind):
        """New sites whose single-site `kind` Pauli stabilizes the preparation."""
        return [site for site in self.new_sites if self.init_basis[site] == kind]

    def initialization_generators(self, kind):
        """Old-patch stabilizers plus single-site stabilizers of the preparation, as SC(d2) vectors."""
        rows = [self.new.vector(s.sites) for s in self.old.stabilizers(kind)]
        rows.extend(self.new.vector([site]) for site in self.prepared_sites(kind))
        return np.array(rows, dtype=np.uint8).reshape(len(rows), self.d2 * self.d2)

    @cached_property
    def deterministic(self):
        return deterministic_initial_measurements(self)

    def gauge(self, kind):
        """Positions of SC(d2) stabilizers of `kind` with a random t=0 outcome."""
        fixed = self.deterministic[kind]
        return [k for k in range(len(self.new.stabilizers(kind))) if k not in fixed]

    @cached_property
    def frame_strings(self):
        """
        kind -> {gauge position: opposite-type string flipping only that stabilizer}

        Each string commutes with both canonical logicals.
        """
        return {kind: _frame_strings(self, kind) for kind in SECTORS}


def build_growth_layout(d1, d2, permissive=False):
    """
    Args:
        d1: Distance of the input patch
        d2: Distance after growth
        permissive: Allow d1=3 growth (demonstrations only)

    Equal distances give the memory experiment and skip the d1 >= 4 check.
    """
    if d1 > d2:
        raise ParameterError(f'need d1 <= d2, got d1={d1} d2={d2}')
    if d1 < d2 and d1 < MIN_GROWTH_DISTANCE:
        if not permissive:
            raise ParameterError(f'growth needs d1 >= {MIN_GROWTH_DISTANCE}, got d1={d1}')
        logger.warning('Growth below the bound regime. d1=%s d2=%s', d1, d2)
    old, new = build_patch(d1), build_patch(d2)
    init_basis = {}
    for y in range(d2):
        for x in range(d2):
            if x >= d1 or y >= d1:
                init_basis[(x, y)] = 'X' if y > x else 'Z'
    return GrowthLayout(d1=d1, d2=d2, old=old, new=new, init_basis=init_basis)


def deterministic_initial_measurements(layout):
    """
    kind -> set of SC(d2) stabilizer positions whose first measurement is fixed.

    A stabilizer is deterministic iff it lies in the GF(2) span of the
    old-patch stabilizers and the single-site stabilizers of the preparation.
    """
    result = {}
    for kind in SECTORS:
        generators = layout.initialization_generators(kind)
        result[kind] = {
            position for position, stabilizer in enumerate(layout.new.stabilizers(kind))
            if in_rowspace(generators, layout.new.vector(stabilizer.sites))
        }
    return result


def logical_extension_holds(layout, kind):
    """SC(d2) logical times the SC(d1) logical lies in the initialization group."""
    difference = layout.new.vector(layout.new.logical(kind)) ^ layout.new.vector(layout.old.logical(kind))
    return in_rowspace(layout.initialization_generators(kind), difference)


def _frame_strings(layout, kind):
    # Strings are of the type the `kind` checks detect; they must commute with
    # the same-kind logical representative.
    checks = layout.new.check_matrix(kind)
    logical = layout.new.vector(layout.new.logical(kind))
    system = np.vstack([checks, logical])
    strings = {}
    for position in layout.gauge(kind):
        target = np.zeros(system.shape[0], dtype=np.uint8)
        target[position] = 1
        solution = solve(system, target)
        if solution is None:
            raise InvariantViolation(f'no frame string for {kind} gauge stabilizer {position}')
        strings[position] = solution
    return strings


def spacetime_distance(x, y, t, d1, d2):
    """Length of the shortest logical error string through (x, y, t)."""
    if not (0 <= x < d2 and 0 <= y < d2) or t < 0:
        raise ParameterError(f'({x}, {y}, {t}) is outside the d2={d2} spacetime')
    if y <= d1 and x <= d1:
        return min(d1 + t, d2)
    if y <= d1:
        return min(x + t, d2)
    if x > y:
        return min(x + t, d2)
    return min(y + t, d2)


def layout_dump(layout):
    """JSON-ready description of the layout for inspection."""
    def stabilizer_rows(kind):
        gauge = set(layout.gauge(kind))
        return [
            {'face': list(s.face), 'sites': sorted(list(site) for site in s.sites), 'gauge': k in gauge}
            for k, s in enumerate(layout.new.stabilizers(kind))
        ]

    return {
        'd1': layout.d1,
        'd2': layout.d2,
        'sites': [list(site) for site in layout.new.sites],
        'init_basis': [{'site': list(site), 'basis': layout.init_basis[site]} for site in layout.new_sites],
        'x_stabilizers': stabilizer_rows('X'),
        'z_stabilizers': stabilizer_rows('Z'),
        'logical_x': sorted(list(site) for site in layout.new.logical_x),
        'logical_z': sorted(list(site) for site in layout.new.logical_z),
    }
