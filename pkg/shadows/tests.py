import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from experiments.exceptions import CapacityError, ParameterError
from .services.bounds import (
    injection_sample_count,
    noisy_weight_upper_bound,
    raw_sample_count,
    separation_exponent,
    separation_threshold,
)
from .services.brickwork import (
    BOTH,
    BrickworkSpec,
    SupportState,
    clifford_support_transitions,
    layer_pairs,
    step_layer,
    two_qubit_symplectic_group,
)
from .services.weights import depth_scan, noiseless_plateau, scan_max_depth, shadow_weight, shadow_weight_exact


class BrickworkTest(SimpleTestCase):
    """Test the support random walk"""

    def test_clifford_oracle(self):
        """Averaging over Sp(4,2) gives 9/15, 3/15, 3/15 for every input"""
        self.assertEqual(len(two_qubit_symplectic_group()), 720)
        table = clifford_support_transitions()
        self.assertEqual(len(table), 15)
        for probabilities in table.values():
            np.testing.assert_allclose(probabilities, (9 / 15, 3 / 15, 3 / 15), atol=1e-12)

    def test_layers_alternate(self):
        """Even layers start at site 0, odd layers at site 1"""
        self.assertEqual(layer_pairs(6, 0), [(0, 1), (2, 3), (4, 5)])
        self.assertEqual(layer_pairs(6, 1), [(1, 2), (3, 4)])
        self.assertEqual(BrickworkSpec(n=6, depth=2, k=2, offset=1).layer(0), [(1, 2), (3, 4)])

    def test_spec_validation(self):
        """Observables must fit on the chain"""
        self.assertEqual(BrickworkSpec(n=8, depth=1, k=2).start, 2)
        with self.assertRaises(ParameterError):
            BrickworkSpec(n=4, depth=1, k=5)
        with self.assertRaises(ParameterError):
            BrickworkSpec(n=4, depth=1, k=2, start=3)

    def test_step_keeps_support(self):
        """A layer never empties a non-empty support"""
        rng = np.random.default_rng(3)
        state = SupportState(6, (False, False, True, False, False, False))
        for index in range(20):
            state = step_layer(state, layer_pairs(6, index), rng)
            self.assertGreaterEqual(state.weight, 1)
        self.assertEqual(len(state.layer_weights), 20)


class ShadowWeightTest(SimpleTestCase):
    """Test the shadow weight estimators"""

    def test_depth_zero(self):
        """Depth 0 is exactly 3^-k"""
        for k in (1, 2, 4):
            spec = BrickworkSpec(n=8, depth=0, k=k)
            self.assertEqual(shadow_weight_exact(spec), 3.0 ** (-k))
            report = shadow_weight(spec, lam=0.3)
            self.assertEqual(report.mean, 3.0 ** (-k))
            self.assertEqual(report.shots, 0)

    def test_small_exact_values(self):
        """One gate on the support gives 1/5; two layers on k=2 give 13/125"""
        self.assertAlmostEqual(shadow_weight_exact(BrickworkSpec(n=4, depth=1, k=1)), 0.2)
        self.assertAlmostEqual(shadow_weight_exact(BrickworkSpec(n=6, depth=1, k=2)), 0.2)
        self.assertAlmostEqual(shadow_weight_exact(BrickworkSpec(n=6, depth=2, k=2)), 13 / 125)
        damped = shadow_weight_exact(BrickworkSpec(n=4, depth=1, k=1), lam=0.1)
        self.assertAlmostEqual(damped, BOTH * math.exp(-0.2) / 9 + (1 - BOTH) * math.exp(-0.1) / 3)

    def test_noiseless_plateau(self):
        """Deep noiseless circuits converge to 1/(2^n + 1)"""
        value = shadow_weight_exact(BrickworkSpec(n=4, depth=80, k=1))
        self.assertAlmostEqual(value, noiseless_plateau(4), delta=1e-6)

    def test_monte_carlo_matches_exact(self):
        """Sampled weights agree with the transfer matrix"""
        for k in (1, 2, 4):
            for depth in (1, 2, 4):
                for lam in (0.0, 0.1):
                    spec = BrickworkSpec(n=8, depth=depth, k=k)
                    report = shadow_weight(spec, k=k, lam=lam, trials=20000, seed=17 + depth)
                    self.assertTrue(
                        report.within(shadow_weight_exact(spec, lam=lam)),
                        msg=f'k={k} d={depth} lambda={lam}',
                    )

    def test_nonincreasing_in_lambda(self):
        """With shared randomness the estimate decreases with noise"""
        spec = BrickworkSpec(n=10, depth=3, k=2)
        means = [shadow_weight(spec, lam=lam, trials=5000, seed=4).mean for lam in (0.0, 0.05, 0.2)]
        self.assertGreaterEqual(means[0], means[1])
        self.assertGreaterEqual(means[1], means[2])

    def test_validation(self):
        """Mismatched k, bad noise and oversized chains are rejected"""
        spec = BrickworkSpec(n=6, depth=1, k=2)
        with self.assertRaises(ParameterError):
            shadow_weight(spec, k=3)
        with self.assertRaises(ParameterError):
            shadow_weight_exact(spec, lam=1.5)
        with self.assertRaises(CapacityError):
            shadow_weight_exact(BrickworkSpec(n=20, depth=1, k=2))

    def test_depth_scan(self):
        """k=2 peaks after one layer"""
        rows, best = depth_scan(2, 0.0, 4)
        self.assertEqual([row['depth'] for row in rows], [0, 1, 2, 3, 4])
        self.assertEqual(best, 1)
        self.assertTrue(all(row['method'] == 'exact' for row in rows))
        self.assertEqual(scan_max_depth(1), 4)
        self.assertEqual(scan_max_depth(8), 16)


class ShadowBoundTest(SimpleTestCase):
    """Test the bound formulas"""

    def test_weight_bound_holds_on_grid(self):
        """Exact weights never exceed the noisy upper bound"""
        for k in range(1, 7):
            rows, _best = depth_scan(k, 0.0, 8, n=14)
            omega_star = max(row['omega'] for row in rows)
            for lam in (0.0, 0.05, 0.1, 0.2):
                bound = noisy_weight_upper_bound(k, lam, omega_star)
                for depth in range(9):
                    value = shadow_weight_exact(BrickworkSpec(n=14, depth=depth, k=k), lam=lam)
                    self.assertLessEqual(value, bound + 1e-12, msg=f'k={k} d={depth} lambda={lam}')

    def test_separation_exponent(self):
        """Exponent is positive below the threshold and vanishes on it"""
        self.assertAlmostEqual(separation_exponent(0.05, 0.06), 0.0038358, places=6)
        for lam in (0.01, 0.1):
            threshold = separation_threshold(lam)
            self.assertAlmostEqual(threshold, 1 - (1 - lam) * math.exp(-lam / 4), places=14)
            self.assertLessEqual(abs(separation_exponent(lam, threshold)), 1e-12)
        self.assertAlmostEqual(separation_threshold(1e-4) / 1e-4, 1.25, delta=1e-3)
        with self.assertRaises(ParameterError):
            separation_exponent(1.0, 0.1)

    def test_injection_sample_count(self):
        """k=1 without noise needs 3 / epsilon^2 samples"""
        result = injection_sample_count(1, 0.0, 0.1)
        self.assertAlmostEqual(result.count, 300.0)
        self.assertEqual(result.d_star, 0)
        self.assertEqual(injection_sample_count(2, 0.0, 0.1).d_star, 1)
        self.assertGreater(injection_sample_count(2, 0.1, 0.1).count, injection_sample_count(2, 0.0, 0.1).count)
        self.assertEqual(result.method, 'exact')
        with self.assertRaises(ParameterError):
            injection_sample_count(2, 0.0, 1.5)

    def test_sample_count_above_exact_cap(self):
        """k=16 scans a sampled chain instead of failing on the exact cap"""
        result = injection_sample_count(16, 0.0, 0.1, trials=2000, seed=3)
        self.assertEqual(result.method, 'montecarlo')
        self.assertEqual(len(result.scan), scan_max_depth(16) + 1)
        self.assertEqual(result.omega_star, max(row['omega'] for row in result.scan))
        self.assertGreater(result.omega_star, 0.0)
        self.assertAlmostEqual(result.count, 1.0 / (0.01 * result.omega_star))

    def test_raw_count_grows_with_noise(self):
        """Noisier raw access needs more samples"""
        low = raw_sample_count(6, 0.05, 0.1, 0.1)
        high = raw_sample_count(6, 0.2, 0.1, 0.1)
        self.assertGreater(high, low)


class ShadowsCommandTest(SimpleTestCase):
    """Test the shadows management command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _run(self, *args):
        out = StringIO()
        call_command('shadows', *args, stdout=out)
        return out.getvalue()

    def test_weight_depth_zero(self):
        """weight at d=0 reports 1/9 for k=2"""
        path = Path(self.tmp.name) / 'weight.json'
        self._run('weight', '--n', '8', '--k', '2', '--d', '0', '--lambda', '0.3', '--seed', '1', '--format', 'json', '--output', str(path))
        summary = json.loads(path.read_text())['results']['summary']
        self.assertAlmostEqual(summary['omega'], 1 / 9)

    def test_weight_with_exact(self):
        """--exact adds the transfer-matrix value"""
        path = Path(self.tmp.name) / 'weight.json'
        self._run('weight', '--k', '1', '--d', '1', '--trials', '4000', '--exact', '--seed', '2', '--format', 'json', '--output', str(path))
        summary = json.loads(path.read_text())['results']['summary']
        self.assertAlmostEqual(summary['omega_exact'], 0.2)

    def test_separation(self):
        """separation reports a positive exponent"""
        path = Path(self.tmp.name) / 'separation.json'
        output = self._run('separation', '--lambda', '0.05', '--lambda-inj', '0.06', '--k', '2', '--seed', '1', '--format', 'json', '--output', str(path))
        self.assertIn('exponent', output)
        summary = json.loads(path.read_text())['results']['summary']
        self.assertGreater(summary['exponent'], 0)
        self.assertEqual(summary['omega_method'], 'exact')

    def test_separation_large_k(self):
        """separation at k=16 runs on the sampled depth scan"""
        path = Path(self.tmp.name) / 'separation16.json'
        self._run('separation', '--k', '16', '--trials', '1000', '--seed', '1', '--format', 'json', '--output', str(path))
        summary = json.loads(path.read_text())['results']['summary']
        self.assertEqual(summary['omega_method'], 'montecarlo')
        self.assertGreater(summary['n_inj'], 0)

    def test_scan(self):
        """scan writes one row per depth"""
        path = Path(self.tmp.name) / 'scan.csv'
        self._run('scan', '--k', '2', '--max-depth', '3', '--seed', '1', '--output', str(path))
        rows = [line for line in path.read_text().splitlines() if not line.startswith('#')]
        self.assertEqual(rows[0].split(',')[:2], ['depth', 'omega'])
        self.assertEqual(len(rows), 5)

    def test_bad_lambda_exit_code(self):
        """Invalid noise fails with the config exit code"""
        with self.assertRaises(CommandError) as ctx:
            self._run('separation', '--lambda', '1.2', '--k', '1', '--seed', '1', '--output', str(Path(self.tmp.name) / 'x.csv'))
        self.assertEqual(ctx.exception.returncode, 2)
