import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from experiments.exceptions import CapacityError, DegenerateInstanceError, ParameterError, SingularChannelError
from pauli.services.channels import NoiseParams, depolarize_dense
from replicas.services.delta3 import g_poly, r_poly
from .services.bounds import (
    HeisenbergBoundInput,
    aggregated_depth,
    injection_upper_bound,
    le_cam_success_bound,
    learning_tree_bounds,
    martingale_tv_bound,
    martingale_tv_bound_pinsker,
    moment_gap,
    raw_lower_bound,
    speedup_ratio,
    speedup_threshold_third_moment,
    third_moment_heisenberg_input,
    third_moment_separation_exponent,
    tv_aggregation_penalty,
)
from .services.cycle_test import CycleTest, cached_cycle_test, cycle_test_shot, ensemble_cycle_estimate
from .services.ensembles import EnsembleSpec, expected_cycle_value, maximally_mixed, sample_state, third_moment_state


def third_moment(rho):
    return float(np.trace(rho @ rho @ rho).real)


def random_density(n, rng):
    g = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


class EnsembleTest(SimpleTestCase):
    """Test the hard-instance ensembles"""

    def test_coefficients(self):
        """Default floor weight reproduces the tabulated coefficients"""
        np.testing.assert_allclose(EnsembleSpec(2, 'P').v, (0.25, 0.25, 0.0))
        np.testing.assert_allclose(EnsembleSpec(2, 'Q').v, (1 / 3, 1 / 12, 1 / 12))
        for kind in 'PQ':
            spec = EnsembleSpec(2, kind)
            self.assertAlmostEqual(spec.mixed_weight + sum(spec.v), 1.0)
        with self.assertRaises(ParameterError):
            EnsembleSpec(2, 'R')
        with self.assertRaises(CapacityError):
            EnsembleSpec(5, 'P')

    def test_sampled_states_are_valid(self):
        """Sampled states are unit-trace, PSD and above the mixed floor"""
        rng = np.random.default_rng(11)
        for kind in 'PQ':
            spec = EnsembleSpec(2, kind)
            for _ in range(10):
                rho = sample_state(spec, rng)
                self.assertAlmostEqual(np.trace(rho).real, 1.0, places=12)
                eigenvalues = np.linalg.eigvalsh(rho)
                self.assertGreaterEqual(eigenvalues.min(), 2 ** -3 - 1e-12)
                if kind == 'P':
                    above_floor = np.linalg.matrix_rank(rho - np.eye(4) / 8, tol=1e-10)
                    self.assertLessEqual(above_floor, 2)

    def test_seeded_sampling_is_reproducible(self):
        """The same seed draws the same state"""
        spec = EnsembleSpec(2, 'Q')
        np.testing.assert_array_equal(sample_state(spec, 5), sample_state(spec, 5))

    def test_exact_third_moment_state(self):
        """The exact three-copy state has unit trace and matches sampled moments"""
        spec = EnsembleSpec(2, 'Q')
        sigma = third_moment_state(spec)
        self.assertAlmostEqual(np.trace(sigma).real, 1.0, places=12)
        rng = np.random.default_rng(12)
        values = [third_moment(sample_state(spec, rng)) for _ in range(3000)]
        mean = np.mean(values)
        se = np.std(values, ddof=1) / math.sqrt(len(values))
        self.assertLessEqual(abs(mean - expected_cycle_value(spec)), 3 * se + 1e-12)

    def test_gap_matches_closed_form(self):
        """E_q - E_p equals the G-polynomial gap"""
        for a, weight in ((1.0, 0.0), (0.8, 0.0), (1.0, 0.5)):
            lam = 1.0 - a
            gap = expected_cycle_value(EnsembleSpec(2, 'Q', weight), lam) - expected_cycle_value(EnsembleSpec(2, 'P', weight), lam)
            self.assertAlmostEqual(gap, moment_gap(2, a, weight), places=12)
        self.assertAlmostEqual(moment_gap(2, 1.0), 180 / 8640, places=15)
        self.assertAlmostEqual(moment_gap(2, 1.0, 0.5), 1 / 384, places=15)
        self.assertAlmostEqual(18 * 16 * 5 * 6 * moment_gap(2, 0.7), g_poly(2, 0.7), places=10)


class CycleTestEstimatorTest(SimpleTestCase):
    """Test the three-copy cycle-test estimator"""

    def setUp(self):
        rng = np.random.default_rng(21)
        self.states = [random_density(n, rng) for n in (1, 2)]

    def test_maximally_mixed(self):
        """tr((1/2)^3) = 1/4 within 3 SE"""
        report = CycleTest(1, 0.0, corrected=True).estimate(maximally_mixed(1), 100000, seed=3)
        self.assertTrue(report.within(0.25))

    def test_pure_state(self):
        """Pure states give X = 1 on every shot"""
        psi = np.array([1.0, 1.0j]) / math.sqrt(2)
        rho = np.outer(psi, psi.conj())
        test = CycleTest(1, 0.0, corrected=True)
        self.assertAlmostEqual(test.exact_mean(rho), 1.0, places=12)
        values = test.sample(rho, 500, np.random.default_rng(0))
        np.testing.assert_allclose(values, 1.0, atol=1e-12)

    def test_corrected_is_unbiased(self):
        """Corrected mean equals tr(rho^3) on 20 random instances, 10^5 shots each, within 3 SE"""
        rng = np.random.default_rng(23)
        instances = [(random_density(n, rng), lam) for n in (1, 2) for _ in range(5) for lam in (0.0, 0.2)]
        self.assertEqual(len(instances), 20)
        for index, (rho, lam) in enumerate(instances):
            n = int(math.log2(rho.shape[0]))
            test = CycleTest(n, lam, corrected=True)
            self.assertAlmostEqual(test.exact_mean(rho), third_moment(rho), places=10)
            # sample() raises InvariantViolation on any shot outside |alpha_omega|^n
            report = test.estimate(rho, 100000, seed=31 + index)
            self.assertTrue(report.within(third_moment(rho)), msg=f'instance {index} n={n} lambda={lam}')

    def test_uncorrected_sees_noisy_state(self):
        """Uncorrected mean equals tr((D rho)^3)"""
        for rho in self.states:
            n = int(math.log2(rho.shape[0]))
            noisy = depolarize_dense(rho, 0.3)
            self.assertAlmostEqual(CycleTest(n, 0.3, corrected=False).exact_mean(rho), third_moment(noisy), places=10)

    def test_range_and_singular(self):
        """Every shot lies within |alpha_omega|^n and full noise cannot be corrected"""
        test = CycleTest(2, 0.3, corrected=True)
        values = test.sample(self.states[1], 5000, np.random.default_rng(1))
        self.assertLessEqual(np.abs(values).max(), test.bound + 1e-12)
        with self.assertRaises(SingularChannelError):
            CycleTest(1, 1.0, corrected=True)
        with self.assertRaises(CapacityError):
            CycleTest(4, 0.0)

    def test_single_shot(self):
        """cycle_test_shot returns one outcome value from a shared CycleTest"""
        cached_cycle_test.cache_clear()
        noise = NoiseParams(lambda_inj=0.1)
        value = cycle_test_shot(self.states[0], noise, True, np.random.default_rng(2))
        self.assertIn(round(value, 10), {round(v, 10) for v in CycleTest(1, 0.1).values})
        for seed in range(5):
            cycle_test_shot(self.states[0], noise, True, np.random.default_rng(seed))
        info = cached_cycle_test.cache_info()
        self.assertEqual((info.misses, info.hits), (1, 5))

    def test_threads_do_not_change_estimate(self):
        """Chunk streams make the estimate independent of thread count"""
        test = CycleTest(1, 0.1)
        one = test.estimate(self.states[0], 9000, seed=8, threads=1)
        three = test.estimate(self.states[0], 9000, seed=8, threads=3)
        self.assertEqual(one.mean, three.mean)

    def test_ensemble_estimate(self):
        """Per-draw ensemble estimate agrees with the exact ensemble expectation"""
        spec = EnsembleSpec(2, 'P')
        report = ensemble_cycle_estimate(spec, 0.0, 4000, seed=13)
        self.assertTrue(report.within(expected_cycle_value(spec)))

    def test_ensemble_gap_reproduced(self):
        """E_q[Y] - E_p[Y] from 10^5 draws each matches 180/8640 within 3 SE at n=2, a=1"""
        reports = {kind: ensemble_cycle_estimate(EnsembleSpec(2, kind, 0.0), 0.0, 100000, seed=41) for kind in 'PQ'}
        difference = reports['Q'].mean - reports['P'].mean
        se = math.hypot(reports['P'].std_error, reports['Q'].std_error)
        self.assertLessEqual(abs(difference - 180 / 8640), 3 * se + 1e-12)
        self.assertAlmostEqual(moment_gap(2, 1.0), 180 / 8640, places=15)


class BoundTest(SimpleTestCase):
    """Test closed-form bounds and threshold solvers"""

    def test_raw_lower_bound(self):
        """Raw bound branches"""
        self.assertEqual(raw_lower_bound(2, 0.0), 2.0)
        self.assertEqual(raw_lower_bound(6, 1.0), 8.0)
        with self.assertRaises(DegenerateInstanceError):
            raw_lower_bound(1, 0.1)
        dim = 2 ** 8
        branch = [(dim + 1) ** 2 * (dim + 2) ** 2 / r_poly(8, eta) for eta in np.linspace(0.3, 1, 8)]
        self.assertTrue(all(x >= y for x, y in zip(branch, branch[1:])))

    def test_injection_upper_bound(self):
        """Generic count scales as 1/epsilon^2 without noise and grows with noise"""
        counts = injection_upper_bound(2, 0.0, 0.1, 0.05)
        self.assertAlmostEqual(counts['generic'], math.log(20) / 0.01)
        self.assertAlmostEqual(counts['promise'], math.log(20))
        self.assertAlmostEqual(counts['gap'], 180 / 8640)
        previous = None
        for lam in (0.0, 0.1, 0.2, 0.4):
            current = injection_upper_bound(4, lam, 0.1, 0.05)
            if previous:
                self.assertGreater(current['generic'], previous['generic'])
                self.assertGreater(current['promise'], previous['promise'])
            previous = current
        with self.assertRaises(ParameterError):
            injection_upper_bound(2, 1.0, 0.1, 0.05)

    def test_threshold(self):
        """lambda'_max / lambda tends to 19/12 and exceeds lambda"""
        ratio = speedup_threshold_third_moment(1e-4) / 1e-4
        self.assertLessEqual(abs(ratio - 19 / 12) / (19 / 12), 1e-3)
        for lam in np.linspace(0.01, 0.29, 8):
            threshold = speedup_threshold_third_moment(lam)
            self.assertGreater(threshold, lam)
            self.assertGreater(third_moment_separation_exponent(lam, lam), 0.0)
            self.assertAlmostEqual(third_moment_separation_exponent(lam, threshold), 0.0, places=9)
        with self.assertRaises(ParameterError):
            speedup_threshold_third_moment(0.0)

    def test_speedup_ratio_grows(self):
        """N_raw / N_inj grows exponentially in n at lambda=0.1, lambda'=0.12"""
        ns = np.arange(4, 13)
        ratios = np.array([speedup_ratio(int(n), 0.1, 0.12) for n in ns])
        self.assertTrue(np.all(ratios > 1.0))
        self.assertGreater(ratios[-1], ratios[0])
        slope = np.polyfit(ns, np.log(ratios), 1)[0]
        self.assertGreater(slope, 0.0)

    def test_learning_tree_bounds(self):
        """Inverted martingale bound"""
        delta, depth = learning_tree_bounds(HeisenbergBoundInput(mu=1.0, delta_sq_trace=0.01), 1 / 6)
        self.assertAlmostEqual(delta, 0.01)
        self.assertAlmostEqual(depth, math.log(4 / 3) / 0.01)
        self.assertAlmostEqual(depth, 28.768, places=3)
        self.assertEqual(learning_tree_bounds(HeisenbergBoundInput(1.0, 0.01), 0.0)[1], 0.0)
        self.assertEqual(learning_tree_bounds(HeisenbergBoundInput(1.0, 0.0), 0.2)[1], math.inf)
        with self.assertRaises(ParameterError):
            HeisenbergBoundInput(mu=0.0, delta_sq_trace=1.0)

    def test_third_moment_instance(self):
        """Heisenberg input for the third-moment problem"""
        bound_input = third_moment_heisenberg_input(2, 0.0)
        self.assertAlmostEqual(bound_input.mu, 1 / 512)
        self.assertAlmostEqual(bound_input.delta_sq_trace, 360 / 57600 / 324)

    def test_penalty_and_helpers(self):
        """Aggregation penalty, Le Cam and martingale helpers"""
        self.assertAlmostEqual(tv_aggregation_penalty(1, 10), 2 * (2.25 + 1.5) / 1024)
        growth = tv_aggregation_penalty(200, 10) / tv_aggregation_penalty(100, 10)
        self.assertTrue(3.9 < growth < 4.0)
        self.assertEqual(le_cam_success_bound(0.5), 0.75)
        self.assertEqual(martingale_tv_bound(0.3, 0), 0.0)
        self.assertEqual(martingale_tv_bound_pinsker(0.3, 0), 0.0)
        with self.assertRaises(ParameterError):
            tv_aggregation_penalty(0, 4)

    def test_aggregated_depth(self):
        """Aggregated depth is below each single-term depth and meets the target"""
        target = 0.2
        depth = aggregated_depth(6, 0.1, target)
        bound_input = third_moment_heisenberg_input(6, 0.1)
        delta, martingale_depth = learning_tree_bounds(bound_input, target)
        self.assertLessEqual(depth, martingale_depth)
        u = 1.5 * depth
        self.assertAlmostEqual(martingale_tv_bound(delta, depth) + 2 * (u * u + u) / 64, target, places=8)
        self.assertEqual(aggregated_depth(6, 0.1, 0.0), 0.0)

class MomentsCommandTest(SimpleTestCase):
    """Test the moments management command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _run(self, *args):
        out = StringIO()
        call_command('moments', *args, stdout=out)
        return out.getvalue()

    def test_estimate_maximally_mixed(self):
        """estimate --mixed reproduces tr((1/2)^3) = 1/4"""
        path = Path(self.tmp.name) / 'estimate.json'
        self._run('estimate', '--n', '1', '--mixed', '--shots', '100000', '--seed', '7', '--format', 'json', '--output', str(path))
        document = json.loads(path.read_text())
        summary = document['results']['summary']
        self.assertLessEqual(abs(summary['mean'] - 0.25), 3 * summary['std_error'])
        self.assertEqual(document['config']['params']['n'], 1)

    def test_threshold(self):
        """threshold writes the solved injection strength"""
        path = Path(self.tmp.name) / 'threshold.csv'
        output = self._run('threshold', '--lambda', '0.1', '--seed', '1', '--output', str(path))
        self.assertIn('lambda_inj_max', output)
        rows = [line for line in path.read_text().splitlines() if not line.startswith('#')]
        self.assertEqual(len(rows), 2)
        self.assertGreater(float(rows[1].split(',')[1]), 0.1)

    def test_bounds_grid(self):
        """bounds writes one row per n"""
        path = Path(self.tmp.name) / 'bounds.csv'
        self._run('bounds', '--n', '4,6,8', '--lambda', '0.1', '--lambda-inj', '0.12', '--seed', '1', '--output', str(path))
        rows = [line for line in path.read_text().splitlines() if not line.startswith('#')]
        self.assertEqual(len(rows), 4)

    def test_same_seed_same_file(self):
        """Identical invocations give byte-identical CSV"""
        paths = [Path(self.tmp.name) / f'run{i}.csv' for i in range(2)]
        for path in paths:
            self._run('estimate', '--n', '1', '--kind', 'Q', '--shots', '300', '--seed', '5', '--output', str(path))
        self.assertEqual(paths[0].read_bytes(), paths[1].read_bytes())

    def test_degenerate_exit_code(self):
        """n=1 bounds fail with the runtime exit code"""
        with self.assertRaises(CommandError) as ctx:
            self._run('bounds', '--n', '1', '--seed', '1', '--output', str(Path(self.tmp.name) / 'x.csv'))
        self.assertEqual(ctx.exception.returncode, 3)

    def test_parameter_exit_code(self):
        """Out-of-range parameters fail with the config exit code"""
        with self.assertRaises(CommandError) as ctx:
            self._run('threshold', '--lambda', '1.5', '--seed', '1', '--output', str(Path(self.tmp.name) / 'x.csv'))
        self.assertEqual(ctx.exception.returncode, 2)
