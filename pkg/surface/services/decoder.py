"""
Spacetime decoding of the growth experiment under phenomenological noise.

One sector is the set of checks of one type together with the faults they
detect: data flips of the opposite Pauli type before each round and flips of
the recorded outcome. Rounds 0..T-1 are noisy and round T is a perfect
closing round. Detectors compare consecutive rounds; at t=0 only stabilizers
with a deterministic first outcome carry a detector.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from experiments.exceptions import InvariantViolation, ParameterError, require_probability
from surface.services.patch import SECTORS


logger = logging.getLogger(__name__)

DATA = 'data'
MEASURE = 'measure'


def opposite(kind):
    return 'X' if kind == 'Z' else 'Z'


@dataclass(frozen=True)
class Fault:
    kind: str
    location: tuple
    round: int
    detectors: tuple
    crossing: bool


class DecodingGraph:
    """
    Detector graph of one sector. Detector ids run 0..n_detectors-1 and the
    boundary vertex is n_detectors.
    """

    def __init__(self, layout, rounds, sector, detectors, faults):
        self.layout = layout
        self.rounds = rounds
        self.sector = sector
        self.detectors = detectors
        self.faults = faults
        self.boundary = len(detectors)

        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(self.boundary + 1))
        for position, fault in enumerate(faults):
            ends = fault.detectors if len(fault.detectors) == 2 else (fault.detectors[0], self.boundary)
            u, v = sorted(ends)
            if self.graph.has_edge(u, v):
                self.graph[u][v]['faults'].append(position)
            else:
                self.graph.add_edge(u, v, faults=[position])

        rows = [d for fault in faults for d in fault.detectors]
        cols = [f for f, fault in enumerate(faults) for _ in fault.detectors]
        self.incidence = csr_matrix(
            (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(len(detectors), len(faults)),
        )
        self.crossing = np.array([fault.crossing for fault in faults], dtype=bool)
        n_sites = layout.d2 * layout.d2
        self.fault_site = np.array(
            [layout.new.index(f.location) if f.kind == DATA else -1 for f in faults], dtype=np.int64,
        )
        self.fault_round = np.array([f.round for f in faults], dtype=np.int64)
        self.n_sites = n_sites

    @property
    def vertex_count(self):
        return self.boundary + 1

    @property
    def edge_count(self):
        return len(self.faults)

    @cached_property
    def _paths(self):
        adjacency = nx.to_scipy_sparse_array(self.graph, nodelist=list(range(self.vertex_count)), weight=None, format='csr')
        return shortest_path(adjacency, directed=False, unweighted=True, return_predecessors=True)

    @property
    def distances(self):
        return self._paths[0]

    def path(self, source, target):
        predecessors = self._paths[1]
        nodes = [target]
        while nodes[-1] != source:
            previous = predecessors[source, nodes[-1]]
            if previous < 0:
                raise InvariantViolation(f'detector {target} is unreachable from {source}')
            nodes.append(int(previous))
        return nodes[::-1]

    def edge_fault(self, u, v):
        # Parallel faults flip the same detectors; the lowest index is taken.
        return self.graph[u][v]['faults'][0]

    def syndrome(self, faults):
        return (self.incidence @ faults.astype(np.int64)) % 2 == 1

    def site_vector(self, faults, max_round=None):
        """Net data flips of a fault mask as a site vector."""
        mask = faults & (self.fault_site >= 0)
        if max_round is not None:
            mask &= self.fault_round <= max_round
        return (np.bincount(self.fault_site[mask], minlength=self.n_sites) % 2).astype(np.uint8)

    def measurement_flip(self, faults, position, round_index):
        return bool(faults[self._measure_index[(position, round_index)]])

    @cached_property
    def _measure_index(self):
        return {
            (f.location, f.round): i for i, f in enumerate(self.faults) if f.kind == MEASURE
        }

    def line_graph_degree(self):
        """Largest number of faults sharing a detector with one fault."""
        shared = (self.incidence.T @ self.incidence).tocsr()
        shared.setdiag(0)
        shared.eliminate_zeros()
        return int(np.diff(shared.indptr).max()) if shared.shape[0] else 0


def build_decoding_graph(layout, T, sector):
    """
    Args:
        layout: GrowthLayout
        T: Noisy rounds after growth, at least d2
        sector: 'X' or 'Z', the type of the checks

    Returns:
        DecodingGraph
    """
    if sector not in SECTORS:
        raise ParameterError(f'sector must be X or Z, got {sector!r}')
    if T < layout.d2:
        raise ParameterError(f'need T >= d2, got T={T} d2={layout.d2}')

    patch = layout.new
    stabilizers = patch.stabilizers(sector)
    deterministic = layout.deterministic[sector]
    detectors = []
    index = {}
    for t in range(T + 1):
        for position in range(len(stabilizers)):
            if t == 0 and position not in deterministic:
                continue
            index[(position, t)] = len(detectors)
            detectors.append((position, t))

    # a flip chain is logical iff it crosses the same-type logical an odd number of times
    logical_support = patch.logical(sector)
    faults = []
    for t in range(T):
        for site in patch.sites:
            ends = tuple(index[(k, t)] for k in patch.site_stabilizers[site][sector] if (k, t) in index)
            crossing = site in logical_support
            if not ends:
                if crossing:
                    raise InvariantViolation(f'undetectable data fault at {site} flips the logical')
                continue
            faults.append(Fault(DATA, site, t, ends, crossing))
        for position in range(len(stabilizers)):
            ends = tuple(index[key] for key in ((position, t), (position, t + 1)) if key in index)
            faults.append(Fault(MEASURE, position, t, ends, False))

    graph = DecodingGraph(layout, T, sector, detectors, faults)
    logger.debug(
        'Decoding graph built. d1=%s d2=%s T=%s sector=%s vertices=%s edges=%s',
        layout.d1, layout.d2, T, sector, graph.vertex_count, graph.edge_count,
    )
    return graph


def sample_faults(graph, p, rng):
    """Each fault location independently with probability p."""
    p = require_probability('p', p, open_upper=True)
    return rng.random(graph.edge_count) < p


def decode(graph, syndrome):
    """
    Minimum-weight correction for a detector syndrome.

    Flagged detectors are matched on hop-count distances, each with a private
    boundary copy; boundary copies pair freely among themselves.
    """
    correction = np.zeros(graph.edge_count, dtype=bool)
    flagged = [int(v) for v in np.flatnonzero(syndrome)]
    if not flagged:
        return correction

    distances = graph.distances
    boundary = graph.boundary
    finite = distances[np.isfinite(distances)]
    scale = int(finite.max()) + 1 if finite.size else 1

    matching_graph = nx.Graph()
    for a, u in enumerate(flagged):
        to_boundary = distances[u, boundary]
        if np.isfinite(to_boundary):
            matching_graph.add_edge(('d', u), ('b', u), weight=scale - int(to_boundary))
        for v in flagged[a + 1:]:
            between = distances[u, v]
            if not np.isfinite(between):
                continue
            if between > to_boundary + distances[v, boundary]:
                continue
            matching_graph.add_edge(('d', u), ('d', v), weight=scale - int(between))

    for a, u in enumerate(flagged):
        for v in flagged[a + 1:]:
            matching_graph.add_edge(('b', u), ('b', v), weight=scale)

    matching = nx.max_weight_matching(matching_graph, maxcardinality=True)
    matched = {node for pair in matching for node in pair}
    if any(('d', u) not in matched for u in flagged):
        raise InvariantViolation(f'syndrome with {len(flagged)} detectors has no perfect matching')

    for a, b in matching:
        if a[0] == 'b' and b[0] == 'b':
            continue
        if a[0] == 'd' and b[0] == 'd':
            nodes = graph.path(a[1], b[1])
        else:
            source = a[1] if a[0] == 'd' else b[1]
            nodes = graph.path(source, boundary)
        for u, v in zip(nodes, nodes[1:]):
            correction[graph.edge_fault(u, v)] ^= True
    return correction


@dataclass
class GrowthTrialRecord:
    sector: str
    faults: np.ndarray
    syndrome: np.ndarray
    correction: np.ndarray
    gauge_preparation: np.ndarray
    gauge_values: dict = field(default_factory=dict)
    frame: np.ndarray | None = None
    flip: bool = False

    @property
    def residual(self):
        return self.faults ^ self.correction

    def as_trace(self):
        return {
            'sector': self.sector,
            'faults': np.flatnonzero(self.faults).tolist(),
            'syndrome': np.flatnonzero(self.syndrome).tolist(),
            'correction': np.flatnonzero(self.correction).tolist(),
            'gauge_values': {str(k): int(v) for k, v in self.gauge_values.items()},
            'frame': [] if self.frame is None else np.flatnonzero(self.frame).tolist(),
            'flip': bool(self.flip),
        }


def classify_logical(record, graph):
    """True when the residual flips the sector's logical."""
    return bool(np.count_nonzero(record.residual & graph.crossing) % 2)


def gauge_fix(record, graph):
    """
    Infer each gauge stabilizer's t=0 value net of decoded errors and apply
    its frame string when the value is 1. Checks that the net operator is
    syndrome-free and the frame commutes with the canonical logicals.
    """
    layout, kind = graph.layout, graph.sector
    checks = layout.new.check_matrix(kind).astype(np.int64)
    round0 = record.gauge_preparation ^ graph.site_vector(record.faults, max_round=0)
    corrected0 = graph.site_vector(record.correction, max_round=0)

    frame = np.zeros(graph.n_sites, dtype=np.uint8)
    values = {}
    for position, string in layout.frame_strings[kind].items():
        raw = int(checks[position] @ round0 % 2) ^ graph.measurement_flip(record.faults, position, 0)
        inferred = int(checks[position] @ corrected0 % 2) ^ graph.measurement_flip(record.correction, position, 0)
        values[position] = raw ^ inferred
        if values[position]:
            frame ^= string

    net = record.gauge_preparation ^ graph.site_vector(record.faults) ^ graph.site_vector(record.correction) ^ frame
    if np.any(checks @ net % 2):
        raise InvariantViolation(f'{kind} sector keeps a syndrome after gauge fixing')
    if int(layout.new.vector(layout.new.logical(kind)) @ frame) % 2:
        raise InvariantViolation(f'{kind} gauge frame anticommutes with the {kind} logical')
    record.gauge_values = values
    record.frame = frame
    return frame


def sample_gauge_preparation(graph, rng):
    """Random element of the preparation group the sector's checks cannot see at t=0."""
    layout = graph.layout
    prepared = np.zeros(graph.n_sites, dtype=np.uint8)
    sites = layout.prepared_sites(opposite(graph.sector))
    draws = rng.random(len(sites)) < 0.5
    for site, chosen in zip(sites, draws):
        if chosen:
            prepared[layout.new.index(site)] = 1
    return prepared


def run_shot(graph, p, rng):
    """Sample, decode, gauge-fix and classify one shot of one sector."""
    preparation = sample_gauge_preparation(graph, rng)
    faults = sample_faults(graph, p, rng)
    syndrome = graph.syndrome(faults)
    correction = decode(graph, syndrome)
    if np.any(graph.syndrome(faults ^ correction)):
        raise InvariantViolation('decoder correction does not close the syndrome')
    record = GrowthTrialRecord(graph.sector, faults, syndrome, correction, preparation)
    gauge_fix(record, graph)
    record.flip = classify_logical(record, graph)
    return record
