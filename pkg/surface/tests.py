import json
from itertools import combinations

import numpy as np
from django.test import SimpleTestCase

from experiments.exceptions import ParameterError
from .services.decoder import (
    DATA,
    GrowthTrialRecord,
    build_decoding_graph,
    classify_logical,
    decode,
    gauge_fix,
    run_shot,
    sample_faults,
)
from .services.gf2 import in_rowspace, rank, row_reduce, solve
from .services.growth import (
    build_growth_layout,
    deterministic_initial_measurements,
    layout_dump,
    logical_extension_holds,
    spacetime_distance,
)
from .services.patch import build_patch


def face_position(patch, kind, face):
    return next(k for k, s in enumerate(patch.stabilizers(kind)) if s.face == face)


def fault_mask(graph, *picks):
    mask = np.zeros(graph.edge_count, dtype=bool)
    for kind, location, round_index in picks:
        mask[next(
            i for i, f in enumerate(graph.faults)
            if f.kind == kind and f.location == location and f.round == round_index
        )] = True
    return mask


class GF2Test(SimpleTestCase):
    """Test GF(2) elimination"""

    def test_rank_and_rref(self):
        """Dependent rows drop out of the echelon form"""
        matrix = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
        rref, pivots = row_reduce(matrix)
        self.assertEqual(rank(matrix), 2)
        self.assertEqual(pivots, [0, 1])
        self.assertEqual(rref.shape, (2, 3))

    def test_solve(self):
        """solve returns a solution or None"""
        a = np.array([[1, 1, 0], [0, 1, 1]])
        x = solve(a, [1, 0])
        np.testing.assert_array_equal(a @ x % 2, [1, 0])
        self.assertIsNone(solve([[1, 1], [1, 1]], [1, 0]))

    def test_rowspace(self):
        """Membership in the span of rows"""
        rows = [[1, 1, 0, 0], [0, 0, 1, 1]]
        self.assertTrue(in_rowspace(rows, [1, 1, 1, 1]))
        self.assertFalse(in_rowspace(rows, [1, 0, 0, 0]))


class CodePatchTest(SimpleTestCase):
    """Test the rotated surface code"""

    def test_counts(self):
        """d^2 sites and d^2 - 1 stabilizers split evenly"""
        patch = build_patch(3)
        self.assertEqual(len(patch.sites), 9)
        self.assertEqual((len(patch.x_stabilizers), len(patch.z_stabilizers)), (4, 4))
        patch = build_patch(5)
        self.assertEqual(len(patch.sites), 25)
        self.assertEqual(len(patch.x_stabilizers) + len(patch.z_stabilizers), 24)
        weights = sorted({s.weight for s in patch.x_stabilizers + patch.z_stabilizers})
        self.assertEqual(weights, [2, 4])

    def test_commutation(self):
        """Stabilizers commute and the logicals anticommute once"""
        for d in (3, 5, 7):
            self.assertTrue(build_patch(d).verify())
            self.assertEqual(len(build_patch(d).logical_x), d)

    def test_invalid_distance(self):
        """Even or out-of-range distances are rejected"""
        for d in (1, 4, 27):
            with self.assertRaises(ParameterError):
                build_patch(d)


class GrowthLayoutTest(SimpleTestCase):
    """Test the growth layout"""

    def test_memory_layout(self):
        """Equal distances add nothing and keep every outcome deterministic"""
        layout = build_growth_layout(5, 5)
        self.assertEqual(layout.new_sites, [])
        self.assertEqual(len(layout.deterministic['Z']), 12)
        self.assertEqual(layout.gauge('X'), [])

    def test_small_growth_rejected(self):
        """d1 below 4 needs the permissive flag"""
        with self.assertRaises(ParameterError):
            build_growth_layout(3, 7)
        with self.assertRaises(ParameterError):
            build_growth_layout(7, 5)
        self.assertEqual(build_growth_layout(3, 7, permissive=True).d1, 3)

    def test_diagonal_split(self):
        """Sites above the diagonal get |+>, the rest |0>"""
        layout = build_growth_layout(5, 9)
        self.assertEqual(len(layout.new_sites), 81 - 25)
        self.assertEqual(layout.init_basis[(2, 6)], 'X')
        self.assertEqual(layout.init_basis[(7, 2)], 'Z')
        self.assertEqual(layout.init_basis[(6, 6)], 'Z')
        new_column = layout.new.logical_x - layout.old.logical_x
        self.assertTrue(new_column)
        self.assertTrue(all(layout.init_basis[site] == 'X' for site in new_column))
        new_row = layout.new.logical_z - layout.old.logical_z
        self.assertTrue(all(layout.init_basis[site] == 'Z' for site in new_row))

    def test_logical_extension(self):
        """Grown logicals equal the old ones up to the initialization group"""
        for d2 in (5, 7, 9):
            layout = build_growth_layout(5, d2)
            for kind in ('X', 'Z'):
                self.assertTrue(logical_extension_holds(layout, kind), msg=f'd2={d2} {kind}')

    def test_deterministic_and_gauge(self):
        """Plaquettes inside |0> are fixed; seam plaquettes are gauge"""
        layout = build_growth_layout(5, 9)
        inside = face_position(layout.new, 'Z', (6, 1))
        self.assertIn(inside, deterministic_initial_measurements(layout)['Z'])
        layout = build_growth_layout(5, 7)
        seam = face_position(layout.new, 'Z', (1, 4))
        self.assertIn(seam, layout.gauge('Z'))
        self.assertTrue(layout.gauge('X'))

    def test_frame_strings(self):
        """Each frame string flips one gauge stabilizer and commutes with the logicals"""
        layout = build_growth_layout(5, 7)
        for kind in ('X', 'Z'):
            checks = layout.new.check_matrix(kind).astype(int)
            logical = layout.new.vector(layout.new.logical(kind)).astype(int)
            for position, string in layout.frame_strings[kind].items():
                syndrome = checks @ string % 2
                self.assertEqual(int(syndrome.sum()), 1)
                self.assertEqual(int(syndrome[position]), 1)
                self.assertEqual(int(logical @ string) % 2, 0)

    def test_spacetime_distance(self):
        """Four-case distance formula"""
        self.assertEqual(spacetime_distance(0, 0, 0, 5, 9), 5)
        self.assertEqual(spacetime_distance(7, 2, 1, 5, 9), 8)
        self.assertEqual(spacetime_distance(2, 6, 0, 5, 9), 6)
        self.assertEqual(spacetime_distance(8, 6, 0, 5, 9), 8)
        for x in range(9):
            for y in range(9):
                self.assertEqual(spacetime_distance(x, y, 9, 5, 9), 9)
        with self.assertRaises(ParameterError):
            spacetime_distance(9, 0, 0, 5, 9)

    def test_layout_dump(self):
        """The dump is JSON-serializable and complete"""
        document = json.loads(json.dumps(layout_dump(build_growth_layout(5, 7))))
        self.assertEqual(len(document['sites']), 49)
        self.assertEqual(len(document['x_stabilizers']) + len(document['z_stabilizers']), 48)
        self.assertTrue(any(row['gauge'] for row in document['z_stabilizers']))


class DecodingGraphTest(SimpleTestCase):
    """Test detector graph construction"""

    def test_memory_counts(self):
        """Memory graph has one detector per stabilizer and layer plus the boundary"""
        graph = build_decoding_graph(build_growth_layout(5, 5), 5, 'Z')
        self.assertEqual(graph.vertex_count, 12 * 6 + 1)
        self.assertEqual(graph.edge_count, 25 * 5 + 12 * 5)

    def test_rounds_and_sector_validated(self):
        """T below d2 and unknown sectors are rejected"""
        layout = build_growth_layout(5, 7)
        with self.assertRaises(ParameterError):
            build_decoding_graph(layout, 6, 'Z')
        with self.assertRaises(ParameterError):
            build_decoding_graph(layout, 7, 'Y')

    def test_gauge_has_no_first_detector(self):
        """Gauge stabilizers get detectors from t=1 only"""
        layout = build_growth_layout(5, 7)
        graph = build_decoding_graph(layout, 7, 'Z')
        first = [position for position, t in graph.detectors if t == 0]
        self.assertEqual(set(first), layout.deterministic['Z'])
        self.assertLess(len(first), len(layout.new.z_stabilizers))

    def test_parallel_faults_are_interchangeable(self):
        """Faults sharing an edge flip the same detectors and edge_fault takes the lowest index"""
        graph = build_decoding_graph(build_growth_layout(5, 7), 7, 'Z')
        parallel = [(u, v, data['faults']) for u, v, data in graph.graph.edges(data=True) if len(data['faults']) > 1]
        self.assertTrue(parallel)
        for u, v, faults in parallel:
            self.assertEqual(graph.edge_fault(u, v), min(faults))
            self.assertEqual(len({frozenset(graph.faults[f].detectors) for f in faults}), 1)
            data = [f for f in faults if graph.faults[f].kind == DATA]
            self.assertLessEqual(len({graph.faults[f].crossing for f in data}), 1)

    def test_bulk_fault_degree(self):
        """Bulk data faults touch two detectors, the decoding graph has bounded degree"""
        graph = build_decoding_graph(build_growth_layout(5, 5), 5, 'Z')
        bulk = [f for f in graph.faults if f.kind == DATA and f.location == (2, 2) and f.round == 2]
        self.assertEqual(len(bulk[0].detectors), 2)
        self.assertTrue(all(1 <= len(f.detectors) <= 2 for f in graph.faults))
        self.assertGreater(graph.line_graph_degree(), 2)

    def test_sample_faults(self):
        """Fault counts follow the binomial mean"""
        graph = build_decoding_graph(build_growth_layout(3, 3), 3, 'Z')
        rng = np.random.default_rng(5)
        self.assertFalse(sample_faults(graph, 0.0, rng).any())
        p = 0.1
        counts = np.array([sample_faults(graph, p, rng).sum() for _ in range(4000)])
        expected = p * graph.edge_count
        se = np.sqrt(graph.edge_count * p * (1 - p) / counts.size)
        self.assertLessEqual(abs(counts.mean() - expected), 3 * se)
        with self.assertRaises(ParameterError):
            sample_faults(graph, 1.0, rng)


class DecoderTest(SimpleTestCase):
    """Test matching decoding and logical classification"""

    def setUp(self):
        self.layout = build_growth_layout(3, 3)
        self.graph = build_decoding_graph(self.layout, 3, 'Z')

    def _record(self, faults):
        syndrome = self.graph.syndrome(faults)
        correction = decode(self.graph, syndrome)
        record = GrowthTrialRecord('Z', faults, syndrome, correction, np.zeros(9, dtype=np.uint8))
        gauge_fix(record, self.graph)
        record.flip = classify_logical(record, self.graph)
        return record

    def test_empty_syndrome(self):
        """No detections, no correction"""
        record = self._record(np.zeros(self.graph.edge_count, dtype=bool))
        self.assertFalse(record.correction.any())
        self.assertFalse(record.flip)

    def test_single_fault(self):
        """A single bulk fault is undone"""
        record = self._record(fault_mask(self.graph, (DATA, (1, 1), 1)))
        self.assertEqual(int(record.correction.sum()), 1)
        self.assertFalse(record.flip)
        self.assertFalse(self.graph.syndrome(record.residual).any())

    def test_logical_chain(self):
        """A full logical X column at one round flips the outcome"""
        faults = fault_mask(self.graph, *[(DATA, (0, y), 1) for y in range(3)])
        record = self._record(faults)
        self.assertFalse(record.syndrome.any())
        self.assertTrue(record.flip)

    def test_boundary_pair_fails(self):
        """Two column faults at a boundary are completed into a logical"""
        record = self._record(fault_mask(self.graph, (DATA, (0, 0), 1), (DATA, (0, 1), 1)))
        self.assertEqual(int(record.correction.sum()), 1)
        self.assertTrue(record.flip)

    def test_exhaustive_small_memory(self):
        """Matching is minimum weight and logically consistent on every small fault set"""
        for sector in ('Z', 'X'):
            graph = build_decoding_graph(self.layout, 3, sector)
            masks = [sum(1 << d for d in fault.detectors) for fault in graph.faults]
            best = {}
            for weight in range(4):
                for combo in combinations(range(graph.edge_count), weight):
                    syndrome = 0
                    parity = 0
                    for i in combo:
                        syndrome ^= masks[i]
                        parity ^= int(graph.crossing[i])
                    if syndrome not in best:
                        best[syndrome] = (weight, {parity})
                    elif best[syndrome][0] == weight:
                        best[syndrome][1].add(parity)
            n = len(graph.detectors)
            for syndrome, (weight, parities) in best.items():
                flagged = np.array([(syndrome >> d) & 1 for d in range(n)], dtype=bool)
                correction = decode(graph, flagged)
                np.testing.assert_array_equal(graph.syndrome(correction), flagged)
                self.assertEqual(int(correction.sum()), weight)
                self.assertIn(int(np.count_nonzero(correction & graph.crossing) % 2), parities)

    def test_noiseless_growth(self):
        """Without faults growth is the logical identity whatever the gauge outcomes"""
        layout = build_growth_layout(5, 7)
        rng = np.random.default_rng(9)
        for sector in ('X', 'Z'):
            graph = build_decoding_graph(layout, 7, sector)
            frames = 0
            for _ in range(20):
                record = run_shot(graph, 0.0, rng)
                self.assertFalse(record.flip)
                frames += int(record.frame.any())
            self.assertGreater(frames, 0)

    def test_gauge_frame_empty_without_gauge_flips(self):
        """All-zero gauge values give an empty frame"""
        layout = build_growth_layout(5, 7)
        graph = build_decoding_graph(layout, 7, 'Z')
        faults = np.zeros(graph.edge_count, dtype=bool)
        record = GrowthTrialRecord('Z', faults, graph.syndrome(faults), faults.copy(), np.zeros(49, dtype=np.uint8))
        frame = gauge_fix(record, graph)
        self.assertFalse(frame.any())
        self.assertTrue(all(value == 0 for value in record.gauge_values.values()))

    def test_noisy_growth_closes(self):
        """Noisy shots close their syndrome and keep a syndrome-free net operator"""
        layout = build_growth_layout(5, 7)
        rng = np.random.default_rng(2)
        for sector in ('X', 'Z'):
            graph = build_decoding_graph(layout, 7, sector)
            for _ in range(10):
                record = run_shot(graph, 0.02, rng)
                self.assertFalse(graph.syndrome(record.residual).any())
                trace = record.as_trace()
                self.assertEqual(trace['sector'], sector)
