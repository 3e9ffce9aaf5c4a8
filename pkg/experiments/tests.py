import json
import tempfile
from pathlib import Path
from unittest import mock

from django.contrib.admin.sites import AdminSite
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, TestCase, override_settings

from .admin import SimulationRunAdmin
from .exceptions import ParameterError, SingularChannelError, UploadLabError, require_probability
from .models import SimulationRun
from .reports import EstimatorReport, wilson_interval, write_csv, write_json
from .services.config import get_config
from .services.grids import parse_grid
from .services.run_config import resolve
from .services.workers import chunk_sizes, map_ordered, run_chunked


class ExceptionHierarchyTest(SimpleTestCase):
    """Test the domain exception hierarchy"""

    def test_parameter_error_is_value_error(self):
        """ParameterError is both an UploadLabError and a ValueError"""
        self.assertTrue(issubclass(ParameterError, ValueError))
        self.assertTrue(issubclass(ParameterError, UploadLabError))
        self.assertTrue(issubclass(SingularChannelError, ParameterError))

    def test_require_probability(self):
        """Probabilities outside [0, 1] are rejected"""
        self.assertEqual(require_probability('p', 0.3), 0.3)
        with self.assertRaises(ParameterError):
            require_probability('p', 1.2)
        with self.assertRaises(ParameterError):
            require_probability('p', 1.0, open_upper=True)


class ReportTest(SimpleTestCase):
    """Test EstimatorReport and the writers"""

    def test_from_samples(self):
        """Mean and standard error of a fixed sample"""
        report = EstimatorReport.from_samples([1.0, 2.0, 3.0, 4.0], seed=5)
        self.assertEqual(report.shots, 4)
        self.assertAlmostEqual(report.mean, 2.5)
        self.assertAlmostEqual(report.std_error, (5.0 / 3.0) ** 0.5 / 2.0)
        self.assertEqual(report.seed, 5)
        lo, hi = report.ci
        self.assertLess(lo, 2.5)
        self.assertGreater(hi, 2.5)

    def test_within_uses_three_standard_errors(self):
        """within() accepts up to 3 SE by default and no further"""
        report = EstimatorReport(shots=100, mean=1.0, std_error=0.1)
        self.assertTrue(report.within(1.29))
        self.assertTrue(report.within(0.71))
        self.assertFalse(report.within(1.35))
        self.assertTrue(report.within(1.35, bands=4.0))

    def test_wilson_interval_contains_estimate(self):
        """Wilson interval brackets the point estimate and stays in [0, 1]"""
        lo, hi = wilson_interval(3, 100)
        self.assertLess(lo, 0.03)
        self.assertGreater(hi, 0.03)
        lo, hi = wilson_interval(0, 50)
        self.assertEqual(lo, 0.0)
        self.assertGreater(hi, 0.0)
        with self.assertRaises(ParameterError):
            wilson_interval(5, 0)

    def test_csv_is_reproducible(self):
        """Same rows and config give byte-identical CSV files"""
        with tempfile.TemporaryDirectory() as tmp:
            rows = [{'d2': 5, 'q_hat': 0.01}, {'d2': 7, 'q_hat': 0.005}]
            config = {'seed': 7, 'params': {'d1': 5}}
            first = write_csv(Path(tmp) / 'a.csv', rows, config).read_bytes()
            second = write_csv(Path(tmp) / 'b.csv', rows, config).read_bytes()
            self.assertEqual(first, second)
            self.assertIn(b'# seed=7', first)

    def test_json_embeds_config(self):
        """JSON output carries the config and a header timestamp"""
        with tempfile.TemporaryDirectory() as tmp:
            path = write_json(Path(tmp) / 'out.json', {'value': 1.5}, {'seed': 3})
            document = json.loads(path.read_text())
            self.assertEqual(document['config'], {'seed': 3})
            self.assertEqual(document['results'], {'value': 1.5})
            self.assertIn('generated_at', document['header'])


class ConfigTest(SimpleTestCase):
    """Test settings access and run configuration"""

    def test_defaults(self):
        """The settings block resolves to typed values"""
        cfg = get_config()
        self.assertEqual(cfg['MAX_DENSE_QUBITS'], 12)
        self.assertGreaterEqual(cfg['CHUNK_SIZE'], 1)

    @override_settings(UPLOADLAB={'OUTPUT_DIR': '/tmp/x', 'DEFAULT_THREADS': 'many'})
    def test_bad_threads(self):
        """Non-integer thread counts are a configuration error"""
        with self.assertRaises(ImproperlyConfigured):
            get_config()

    def test_resolve_precedence(self):
        """Flags override the config file, which overrides defaults"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'cfg.json'
            path.write_text(json.dumps({'p': 0.02, 'trials': 50, 'seed': 11}))
            run = resolve('inject', 'sweep', {'config': str(path), 'p': 0.03}, {'p': 0.01, 'trials': 10})
            self.assertEqual(run['p'], 0.03)
            self.assertEqual(run['trials'], 50)
            self.assertEqual(run.seed, 11)
            self.assertTrue(str(run.output).endswith('inject-sweep-11.csv'))

    def test_unknown_key_rejected(self):
        """Unknown config keys raise ParameterError"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'cfg.json'
            path.write_text(json.dumps({'bogus': 1}))
            with self.assertRaises(ParameterError):
                resolve('inject', 'sweep', {'config': str(path)}, {'p': 0.01})

    def test_random_seed_drawn(self):
        """A seed is drawn when none is given"""
        run = resolve('moments', 'gap', {}, {'n': 2})
        self.assertGreaterEqual(run.seed, 0)


class GridTest(SimpleTestCase):
    """Test grid parsing"""

    def test_comma_list(self):
        """Comma lists keep their order"""
        self.assertEqual(parse_grid('5,7,9', int), [5, 7, 9])

    def test_geometric_range(self):
        """lo:hi:steps gives a geometric progression including endpoints"""
        values = parse_grid('1e-4:1e-2:3')
        self.assertEqual(len(values), 3)
        self.assertAlmostEqual(values[0], 1e-4)
        self.assertAlmostEqual(values[1], 1e-3)
        self.assertAlmostEqual(values[2], 1e-2)

    def test_invalid(self):
        """Malformed grids raise ParameterError"""
        with self.assertRaises(ParameterError):
            parse_grid('a,b')
        with self.assertRaises(ParameterError):
            parse_grid('0:1')


class WorkerTest(SimpleTestCase):
    """Test the ordered worker pool"""

    def test_order_preserved(self):
        """Results come back in input order with several threads"""
        self.assertEqual(map_ordered(lambda v: v * v, range(20), threads=4), [v * v for v in range(20)])

    def test_chunks(self):
        """Chunk sizes cover the total"""
        self.assertEqual(chunk_sizes(4500, 2000), [2000, 2000, 500])

    def test_thread_count_does_not_change_result(self):
        """Chunk RNG streams depend on the seed only"""
        draw = lambda size, rng: rng.random(size).sum()
        one = run_chunked(draw, 5000, seed=9, threads=1, chunk_size=1000)
        four = run_chunked(draw, 5000, seed=9, threads=4, chunk_size=1000)
        self.assertEqual(one, four)


class SimulationRunModelTest(TestCase):
    """Test the SimulationRun record lifecycle"""

    def test_lifecycle(self):
        """A run moves from processing to completed"""
        run_config = resolve('moments', 'gap', {'seed': 4}, {'n': 2})
        run = SimulationRun.start(run_config)
        self.assertEqual(run.status, SimulationRun.STATUS_PROCESSING)
        self.assertEqual(run.config['params'], {'n': 2})
        run.complete({'gap': 0.1}, output_path='/tmp/out.csv')
        run.refresh_from_db()
        self.assertEqual(run.status, SimulationRun.STATUS_COMPLETED)
        self.assertEqual(run.results['gap'], 0.1)
        self.assertIn('moments', str(run))

    def test_mark_pending_redispatches_sweep_points(self):
        """The admin reset re-queues injection sweep points only"""
        point = SimulationRun.objects.create(kind='inject', subcommand='point', status=SimulationRun.STATUS_FAILED, error_message='boom')
        other = SimulationRun.objects.create(kind='moments', subcommand='estimate', status=SimulationRun.STATUS_FAILED)
        model_admin = SimulationRunAdmin(SimulationRun, AdminSite())
        with mock.patch('experiments.admin.run_sweep_point') as task, mock.patch.object(model_admin, 'message_user'):
            model_admin.mark_pending(None, SimulationRun.objects.filter(pk__in=[point.pk, other.pk]))
        task.delay.assert_called_once_with(point.pk)
        point.refresh_from_db()
        other.refresh_from_db()
        self.assertEqual((point.status, point.error_message), (SimulationRun.STATUS_PENDING, ''))
        self.assertEqual(other.status, SimulationRun.STATUS_PENDING)

    def test_fail(self):
        """Failures store the message"""
        run = SimulationRun.objects.create(kind='inject', subcommand='sweep')
        run.fail(ParameterError('bad grid'))
        run.refresh_from_db()
        self.assertEqual(run.status, SimulationRun.STATUS_FAILED)
        self.assertEqual(run.error_message, 'bad grid')
