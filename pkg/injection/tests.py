import json
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from experiments.exceptions import DivergenceError, ParameterError
from experiments.models import SimulationRun
from .services.enumerator import (
    cluster_enumerator,
    compare_bound_vs_montecarlo,
    default_input_volume,
    eta_x,
    weight_enumerator_bound,
)
from .services.harness import (
    OUTCOMES,
    GrowthConfig,
    InjectionCounts,
    channel_from_counts,
    estimate_input_channel,
    fit_c_in,
    point_seed,
    run_injection_sweep,
    run_trials,
    twirled_strength,
)
from .tasks import run_sweep_point


class GrowthConfigTest(SimpleTestCase):
    """Test gadget configuration validation"""

    def test_defaults(self):
        """T defaults to d2"""
        config = GrowthConfig(d1=5, d2=7)
        self.assertEqual(config.T, 7)
        self.assertEqual(config.as_dict()['T'], 7)

    def test_validation(self):
        """Short schedules and bad rates are rejected"""
        with self.assertRaises(ParameterError):
            GrowthConfig(d1=5, d2=7, T=6)
        with self.assertRaises(ParameterError):
            GrowthConfig(d1=5, d2=7, trials=0)
        with self.assertRaises(ParameterError):
            GrowthConfig(d1=5, d2=7, p=1.0)
        with self.assertRaises(ParameterError):
            GrowthConfig(d1=5, d2=7, input_error_rate=-0.1)

    def test_high_noise_warns(self):
        """Rates past the threshold region are logged"""
        with self.assertLogs('injection.services.harness', level='WARNING'):
            GrowthConfig(d1=3, d2=3, p=0.08)


class HarnessTest(SimpleTestCase):
    """Test the Monte Carlo harness"""

    def test_noiseless_growth_never_fails(self):
        """p=0 gives no logical failures"""
        for d2 in (5, 7):
            result = run_trials(GrowthConfig(d1=5, d2=d2, p=0.0, trials=60, seed=3))
            self.assertEqual(result.trials, 60)
            self.assertEqual(result.failures, 0)
            self.assertEqual(result.counts['I'], 60)

    def test_reproducible_and_thread_invariant(self):
        """Counts depend on the seed only"""
        config = GrowthConfig(d1=3, d2=3, p=0.03, trials=450, seed=17)
        first = run_trials(config, threads=1)
        again = run_trials(config, threads=1)
        threaded = run_trials(config, threads=2)
        self.assertEqual(first.counts, again.counts)
        self.assertEqual(first.counts, threaded.counts)

    def test_input_errors_always_fail(self):
        """A certain input error with p=0 flips every shot"""
        result = run_trials(GrowthConfig(d1=3, d2=3, p=0.0, trials=600, seed=5, input_error_rate=1.0))
        self.assertEqual(result.failures, 600)
        for outcome in ('X', 'Y', 'Z'):
            self.assertGreater(result.counts[outcome], 120)

    def test_sector_streams_are_independent_of_input_draws(self):
        """Sector traces do not change with the input error rate"""
        with tempfile.TemporaryDirectory() as tmp:
            paths = [Path(tmp) / 'a.jsonl', Path(tmp) / 'b.jsonl']
            for rate, path in zip((0.0, 0.5), paths):
                run_trials(GrowthConfig(d1=3, d2=3, p=0.02, trials=80, seed=9, input_error_rate=rate), trace_path=str(path))
            plain, noisy = ([json.loads(line) for line in path.read_text().splitlines()] for path in paths)
        self.assertEqual(len(plain), 80)
        for a, b in zip(plain, noisy):
            self.assertEqual(a['Z'], b['Z'])
            self.assertEqual(a['X'], b['X'])

    def test_larger_memory_distance_fails_less(self):
        """d=5 memory beats d=3 at p=0.01"""
        small = run_trials(GrowthConfig(d1=3, d2=3, p=0.01, trials=2000, seed=21))
        large = run_trials(GrowthConfig(d1=5, d2=5, p=0.01, trials=2000, seed=22))
        self.assertGreater(small.q_hat, large.q_hat)

    def test_counts_accessors(self):
        """Sector rates and intervals follow the tallies"""
        counts = InjectionCounts(GrowthConfig(d1=3, d2=3), {'I': 90, 'X': 4, 'Z': 4, 'Y': 2})
        self.assertEqual(counts.trials, 100)
        self.assertAlmostEqual(counts.q_hat, 0.1)
        self.assertAlmostEqual(counts.sector_rate('Z'), 0.06)
        self.assertAlmostEqual(counts.sector_rate('X'), 0.06)
        lo, hi = counts.interval()
        self.assertLess(lo, 0.1)
        self.assertGreater(hi, 0.1)


class InputChannelTest(SimpleTestCase):
    """Test the effective input channel"""

    def test_twirled_strength(self):
        """lambda* = 4q/3"""
        self.assertAlmostEqual(twirled_strength(0.03), 0.04)

    def test_channel_from_counts(self):
        """Pauli split, lambda and c_in come from the counts"""
        counts = InjectionCounts(GrowthConfig(d1=3, d2=3, p=0.01), {'I': 970, 'X': 10, 'Y': 5, 'Z': 15})
        channel = channel_from_counts(counts)
        self.assertAlmostEqual(channel.q, 0.03)
        self.assertEqual(channel.pauli_rates, (0.01, 0.005, 0.015))
        self.assertAlmostEqual(channel.lambda_star, 0.04)
        self.assertAlmostEqual(channel.c_in, 3.0)
        self.assertLess(channel.lambda_interval[0], channel.lambda_star)
        self.assertEqual(set(channel.as_dict()), {'q', 'pX', 'pY', 'pZ', 'lambda_star', 'q_lo', 'q_hi', 'lambda_lo', 'lambda_hi', 'c_in', 'trials'})

    def test_minimum_trials(self):
        """Channel estimation refuses small runs"""
        with self.assertRaises(ParameterError):
            estimate_input_channel(GrowthConfig(d1=3, d2=3, trials=100))

    def test_noiseless_channel(self):
        """p=0 growth from d1=5 to d2=7 acts as the logical identity on 10^4 of 10^4 shots"""
        channel = estimate_input_channel(GrowthConfig(d1=5, d2=7, p=0.0, trials=10000, seed=4))
        self.assertEqual(channel.trials, 10000)
        self.assertEqual(channel.q, 0.0)
        self.assertEqual(channel.pauli_rates, (0.0, 0.0, 0.0))
        self.assertEqual(channel.lambda_star, 0.0)
        self.assertIsNone(channel.c_in)


class SweepTest(SimpleTestCase):
    """Test sweeps and the c_in fit"""

    def test_point_seeds_differ(self):
        """Each grid point gets its own seed"""
        self.assertNotEqual(point_seed(1, 0), point_seed(1, 1))
        self.assertEqual(point_seed(1, 0), point_seed(1, 0))
        self.assertGreaterEqual(point_seed(1, 0), 0)

    def test_sweep_rows(self):
        """One row per (d2, p)"""
        rows = run_injection_sweep(3, [3], [0.0, 0.01], trials=50, seed=2)
        self.assertEqual([row['p'] for row in rows], [0.0, 0.01])
        self.assertEqual(rows[0]['q_hat'], 0.0)
        self.assertEqual(rows[0]['T'], 3)

    def test_fit_c_in(self):
        """Slope through the origin"""
        rows = [{'p': 0.001, 'q_hat': 0.002}, {'p': 0.002, 'q_hat': 0.004}]
        self.assertAlmostEqual(fit_c_in(rows), 2.0)
        self.assertIsNone(fit_c_in([{'p': 0.0, 'q_hat': 0.0}]))


class EnumeratorBoundTest(SimpleTestCase):
    """Test the weight-enumerator bound"""

    def test_zero_weight(self):
        """x=0 gives a zero bound"""
        self.assertEqual(weight_enumerator_bound(5, 7, 7, 0.0, 4).total, 0.0)

    def test_divergence(self):
        """eta_x >= 1 is reported as divergence"""
        self.assertGreaterEqual(eta_x(1e-3, 4), 1)
        with self.assertRaises(DivergenceError):
            weight_enumerator_bound(5, 7, 7, 1e-3, 4)
        with self.assertRaises(DivergenceError):
            cluster_enumerator(5, 0.5, 4, 25)

    def test_decreasing_in_d2(self):
        """At tiny x the bound shrinks as the patch grows"""
        totals = [weight_enumerator_bound(5, d2, d2, 1e-20, 4).total for d2 in (5, 7, 9, 11)]
        for a, b in zip(totals, totals[1:]):
            self.assertGreater(a, b)
        bound = weight_enumerator_bound(5, 11, 11, 1e-20, 4)
        self.assertGreater(bound.total, bound.floor_term + bound.input_term)

    def test_input_term_linear(self):
        """The input term is v_in x"""
        self.assertEqual(default_input_volume(5), 75)
        first = weight_enumerator_bound(5, 7, 7, 1e-20, 4)
        second = weight_enumerator_bound(5, 7, 7, 2e-20, 4)
        self.assertAlmostEqual(second.input_term / first.input_term, 2.0)
        self.assertAlmostEqual(first.input_term, 75e-20)

    def test_compare_statuses(self):
        """Realistic rates are skipped, tiny ones compared"""
        rows = [
            {'d1': 5, 'd2': 7, 'T': 7, 'p': 0.002, 'sector_rate': 0.01},
            {'d1': 5, 'd2': 7, 'T': 7, 'p': 1e-20, 'sector_rate': 0.0},
            {'d1': 5, 'd2': 7, 'T': 7, 'p': 1e-20, 'sector_rate': 0.9},
        ]
        report = compare_bound_vs_montecarlo(rows, 4)
        self.assertEqual([entry['status'] for entry in report], ['skipped', 'ok', 'violation'])
        self.assertIsNone(report[0]['ratio'])
        self.assertEqual(report[1]['ratio'], math.inf)


class SweepPointTaskTest(TestCase):
    """Test the background sweep-point task"""

    def test_missing_run(self):
        """Unknown run ids are reported, not raised"""
        self.assertEqual(run_sweep_point.apply(args=(999999,)).get(), {'ok': False, 'error': 'run_not_found'})

    def test_completes_run(self):
        """The task stores the channel on the run"""
        run = SimulationRun.objects.create(
            kind='inject', subcommand='point', seed=7,
            config={'params': {'d1': 3, 'd2': 3, 'T': 3, 'p': 0.0, 'trials': 40, 'input_error_rate': 0.0}},
        )
        outcome = run_sweep_point.apply(args=(run.id,)).get()
        self.assertTrue(outcome['ok'])
        run.refresh_from_db()
        self.assertEqual(run.status, SimulationRun.STATUS_COMPLETED)
        self.assertEqual(run.results['q'], 0.0)
        self.assertEqual(run.results['trials'], 40)

    def test_failure_marks_run(self):
        """Invalid parameters fail the run"""
        run = SimulationRun.objects.create(
            kind='inject', subcommand='point', seed=7,
            config={'params': {'d1': 3, 'd2': 5, 'T': 2, 'p': 0.0, 'trials': 10}},
        )
        with self.assertRaises(ParameterError):
            run_sweep_point.apply(args=(run.id,), throw=True).get()
        run.refresh_from_db()
        self.assertEqual(run.status, SimulationRun.STATUS_FAILED)
        self.assertIn('T >= d2', run.error_message)


class InjectCommandTest(TestCase):
    """Test the inject management command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _run(self, *args):
        out = StringIO()
        call_command('inject', *args, stdout=out)
        return out.getvalue()

    def _csv_rows(self, path):
        return [line for line in path.read_text().splitlines() if not line.startswith('#')]

    def test_sweep_csv(self):
        """sweep writes one row per point with the documented header"""
        path = Path(self.tmp.name) / 'sweep.csv'
        self._run('sweep', '--d1', '3', '--d2', '3', '--p', '0,0.01', '--trials', '40', '--seed', '1', '--output', str(path))
        rows = self._csv_rows(path)
        self.assertEqual(rows[0].split(','), ['d1', 'd2', 'T', 'p', 'trials', 'q_hat', 'ci_lo', 'ci_hi', 'pX', 'pY', 'pZ', 'lambda_star', 'seed'])
        self.assertEqual(len(rows), 3)

    def test_channel_json(self):
        """channel reports lambda_star"""
        path = Path(self.tmp.name) / 'channel.json'
        output = self._run(
            'channel', '--d1', '3', '--d2', '3', '--p', '0', '--trials', '10000', '--seed', '2',
            '--format', 'json', '--output', str(path),
        )
        self.assertIn('lambda_star', output)
        summary = json.loads(path.read_text())['results']['summary']
        self.assertEqual(summary['q'], 0.0)

    def test_channel_too_few_trials(self):
        """Small channel runs exit with the config code"""
        with self.assertRaises(CommandError) as ctx:
            self._run('channel', '--d1', '3', '--d2', '3', '--trials', '10', '--seed', '1', '--output', str(Path(self.tmp.name) / 'c.csv'))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_bound(self):
        """bound evaluates the enumerator with a fixed degree"""
        path = Path(self.tmp.name) / 'bound.json'
        self._run('bound', '--d1', '5', '--d2', '5,7', '--x', '1e-20', '--D', '4', '--seed', '1', '--format', 'json', '--output', str(path))
        rows = json.loads(path.read_text())['results']['rows']
        self.assertEqual(len(rows), 2)
        self.assertTrue(all(row['status'] == 'ok' for row in rows))
        self.assertGreater(rows[0]['total'], rows[1]['total'])

    def test_queue_creates_runs(self):
        """--queue records one pending run per point and dispatches it"""
        path = Path(self.tmp.name) / 'queued.json'
        with mock.patch('injection.management.commands.inject.run_sweep_point') as task:
            task.delay.side_effect = lambda run_id: run_sweep_point.apply(args=(run_id,))
            self._run('sweep', '--d1', '3', '--d2', '3', '--p', '0', '--trials', '20', '--queue', '--seed', '3', '--format', 'json', '--output', str(path))
        summary = json.loads(path.read_text())['results']['summary']
        self.assertEqual(summary['queued'], 1)
        point = SimulationRun.objects.get(subcommand='point')
        self.assertEqual(point.status, SimulationRun.STATUS_COMPLETED)
        self.assertEqual(point.results['q'], 0.0)

    def test_outcome_labels(self):
        """Outcome codes map bit 0 to X and bit 1 to Z"""
        self.assertEqual(OUTCOMES, ('I', 'X', 'Z', 'Y'))
