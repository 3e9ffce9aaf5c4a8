import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from scipy.linalg import expm
from scipy.stats import norm

from experiments.exceptions import CapacityError, DegenerateInstanceError, InvariantViolation, ParameterError
from .services.dme import (
    check_channel,
    controlled_round_factor,
    dme_channel,
    dme_channel_transfer,
    dme_convergence,
    dme_query_spectral,
    dme_round,
    dme_transfer,
    exact_query_transfer,
    partial_trace_first,
    swap_operator,
    trace_norm,
)
from .services.estimation import (
    estimate_quantities,
    pipeline_moments,
    repetitions_to_target,
    success_probability,
)
from .services.filter import (
    FilterConfig,
    PipelineNoise,
    branch_probabilities,
    eigen_filter,
    filter_branches,
    heaviside_approximant,
    joint_noise,
    trace_distance_to_eigenvectors,
)
from .services.model import build_model, mirrored_pair, model_from_states
from .services.sweep import SWEEP_COLUMNS, hypothesis_test_sweep


CONVERGED = FilterConfig(x=1.0, degree=48, rounds=100000)


def random_density(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def basis(m, k):
    vector = np.zeros(m, dtype=complex)
    vector[k] = 1.0
    return vector


class ModelTest(SimpleTestCase):
    """Test the two-source state and its eigen-decomposition"""

    def test_orthogonal_sources(self):
        """Orthogonal sources are their own eigenvectors"""
        model = model_from_states(basis(4, 0), basis(4, 1), 0.75)
        np.testing.assert_allclose(model.eigenvalues[:2], (0.75, 0.25), atol=1e-12)
        self.assertAlmostEqual(abs(np.vdot(model.V1, basis(4, 0))), 1.0)
        self.assertAlmostEqual(abs(model.c2), 1.0)
        self.assertAlmostEqual(model.truth, -0.5)

    def test_swapping_sources_swaps_roles(self):
        """The brighter source always owns V1"""
        model = model_from_states(basis(4, 1), basis(4, 0), 0.75)
        self.assertAlmostEqual(abs(np.vdot(model.V1, basis(4, 1))), 1.0)
        self.assertAlmostEqual(abs(model.c2), 1.0)

    def test_reconstruction_any_observable(self):
        """The three-term formula reproduces <psi_p|O|psi_p> for a random Hermitian O"""
        model = build_model(m=8, b=0.9, delta_x=2.0)
        rng = np.random.default_rng(5)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        observable = (a + a.conj().T) / 2.0
        self.assertLessEqual(model.reconstruction_residual(observable), 1e-10)
        self.assertLessEqual(model.reconstruction_residual(), 1e-10)

    def test_validation(self):
        """Bad brightness, too many modes and coincident sources are rejected"""
        with self.assertRaises(ParameterError):
            build_model(m=8, b=0.4)
        with self.assertRaises(CapacityError):
            build_model(m=20)
        with self.assertRaises(DegenerateInstanceError):
            mirrored_pair(m=8, delta_x=0.0)
        with self.assertRaises(DegenerateInstanceError):
            model_from_states(basis(4, 2), basis(4, 2), 0.9)

    def test_mirrored_truth(self):
        """The mirrored instance flips the sign of the planet position"""
        right, left = mirrored_pair(m=16, b=0.99, delta_x=4.0)
        self.assertGreater(right.truth, 0)
        self.assertAlmostEqual(right.truth, -left.truth)


class DmeTest(SimpleTestCase):
    """Test density-matrix exponentiation"""

    def setUp(self):
        self.rho = random_density(3, 1)
        self.sigma = random_density(3, 2)

    def test_zero_time_is_identity(self):
        """x = 0 leaves the target untouched"""
        np.testing.assert_allclose(dme_channel(self.rho, self.sigma, 0.0, 4), self.sigma, atol=1e-14)

    def test_transfer_matches_partial_swap(self):
        """The closed-form round equals the traced partial swap"""
        direct = dme_round(self.rho, self.sigma, 0.1)
        closed = (dme_transfer(self.rho, 0.1) @ self.sigma.reshape(-1)).reshape(3, 3)
        np.testing.assert_allclose(closed, direct, atol=1e-12)

    def test_first_order_convergence(self):
        """Trace-norm error falls as 1/M"""
        errors, slope = dme_convergence(self.rho, self.sigma, 1.0, [16, 32, 64, 128])
        self.assertGreaterEqual(slope, 0.8)
        self.assertLessEqual(slope, 1.2)
        ratio = errors[-2] / errors[-1]
        self.assertGreaterEqual(ratio, 1.6)
        self.assertLessEqual(ratio, 2.4)

    def test_noisy_channel(self):
        """Depolarized DME stays trace preserving and completely positive"""
        out = dme_channel(self.rho, self.sigma, 0.5, 8, noise_rate=0.01)
        self.assertAlmostEqual(float(np.real(np.trace(out))), 1.0)
        check = check_channel(dme_channel_transfer(self.rho, 0.5, 8, noise_rate=0.01), 3)
        self.assertLessEqual(check['tp_error'], 1e-10)
        with self.assertRaises(InvariantViolation):
            check_channel(2.0 * np.eye(9), 3)
        with self.assertRaises(ParameterError):
            dme_channel(self.rho, self.sigma, 0.5, 0)

    def test_spectral_query_matches_dense(self):
        """The eigenbasis form of one noisy query reproduces the dense transfer matrices"""
        eigenvalues, vectors = np.linalg.eigh(self.rho)
        for rate in (0.0, 0.05):
            coherence, diagonal = dme_query_spectral(eigenvalues, 0.7, 5, rate)
            local = vectors.conj().T @ self.sigma @ vectors
            out = local * coherence
            np.fill_diagonal(out, diagonal @ np.diag(local))
            spectral = vectors @ out @ vectors.conj().T
            dense = exact_query_transfer(self.rho, -0.7) @ dme_channel_transfer(self.rho, 0.7, 5, rate)
            np.testing.assert_allclose(spectral, (dense @ self.sigma.reshape(-1)).reshape(3, 3), atol=1e-10)

    def test_controlled_round_factor(self):
        """The coherence multiplier matches the traced partial swap on an eigenvector"""
        eigenvalues, vectors = np.linalg.eigh(self.rho)
        dt = 0.2
        U = expm(-1j * dt * swap_operator(3))
        for value, vector in zip(eigenvalues, vectors.T):
            block = partial_trace_first(U @ np.kron(self.rho, np.outer(vector, vector.conj())), 3)
            expected = controlled_round_factor([value], dt)[0]
            self.assertAlmostEqual(complex(np.vdot(vector, block @ vector)), complex(expected))


class FilterTest(SimpleTestCase):
    """Test the eigenvalue filter"""

    def test_step_approximant(self):
        """The Chebyshev step is accurate and saturates away from x/2"""
        step = heaviside_approximant(1.0, 48)
        self.assertLess(step.fit_error, 1e-3)
        self.assertGreater(float(step(0.95)), 0.99)
        self.assertLess(float(step(0.05)), 0.01)

    def test_converged_filter(self):
        """Noiseless, converged filtering returns the eigenvectors with probabilities (r, 1-r)"""
        model = model_from_states(basis(4, 0), basis(4, 1), 0.75)
        result = eigen_filter(model, PipelineNoise('raw', 0.0), CONVERGED)
        self.assertGreaterEqual(min(result.fidelities), 0.999)
        self.assertAlmostEqual(result.probabilities[0], 0.75, delta=1e-3)
        self.assertAlmostEqual(result.probabilities[1], 0.25, delta=1e-3)
        self.assertLess(trace_distance_to_eigenvectors(result, model), 0.05)

    def test_zero_noise_matches_exact_evolution(self):
        """Without noise and with many rounds the DME-built filter equals the exact-query filter"""
        program, target = random_density(4, 5), random_density(4, 6)
        outputs, kraus = filter_branches(program, target, FilterConfig(1.0, 8, 100000), 0.0)
        for output, K in zip(outputs, kraus):
            np.testing.assert_allclose(output, K @ target @ K.conj().T, atol=1e-3)
        self.assertAlmostEqual(sum(float(np.real(np.trace(w))) for w in outputs), 1.0, places=12)

    def test_noisy_filter_matches_composed_channel(self):
        """With raw noise the branch states equal the Kraus maps after degree composed noisy DME queries"""
        program, target = random_density(4, 7), random_density(4, 8)
        config, rate = FilterConfig(0.8, 6, 7), 0.02
        outputs, kraus = filter_branches(program, target, config, rate)
        query = exact_query_transfer(program, -0.8) @ dme_channel_transfer(program, 0.8, 7, rate)
        drifted = (np.linalg.matrix_power(query, 6) @ target.reshape(-1)).reshape(4, 4)
        for output, K in zip(outputs, kraus):
            np.testing.assert_allclose(output, K @ drifted @ K.conj().T, atol=1e-10)

    def test_noisy_dme_pulls_toward_program(self):
        """Raw noise leaves the target closer to the program state than plain depolarization would"""
        program = random_density(4, 9)
        config, rate = FilterConfig(1.0, 8, 4), 0.01
        outputs, _kraus = filter_branches(program, program, config, rate)
        junk = 1.0 - (1.0 - rate) ** config.program_copies
        depolarized = (1.0 - junk) * program + junk * np.eye(4) / 4
        self.assertLess(trace_norm(sum(outputs) - program), 0.6 * trace_norm(depolarized - program))

    def test_raw_noise_damps_contrast(self):
        """Depolarizing the coherence block pushes both branches toward 1/2"""
        eigenvalues = np.array([0.95, 0.05])
        config = FilterConfig(1.0, 16, 64)
        clean = branch_probabilities(eigenvalues, config)
        noisy = branch_probabilities(eigenvalues, config, 0.01)
        self.assertTrue(np.all(np.abs(noisy - 0.5) < np.abs(clean - 0.5)))

    def test_leakage_grows_as_x_shrinks(self):
        """A shorter evolution resolves the gap worse and is reported"""
        model = build_model(m=8, b=0.9, delta_x=4.0)
        noise = PipelineNoise('raw', 0.0)
        wide = eigen_filter(model, noise, FilterConfig(1.0, 8, 64), warn=False)
        with self.assertLogs('imaging.services.filter', level='WARNING'):
            narrow = eigen_filter(model, noise, FilterConfig(0.25, 8, 64))
        self.assertGreater(narrow.leakage, wide.leakage)

    def test_channel_check(self):
        """The two-branch map composed from dense noisy DME passes the Choi checks"""
        model = build_model(m=8, b=0.9, delta_x=4.0)
        result = eigen_filter(model, PipelineNoise('raw', 1e-3), FilterConfig(1.0, 8, 4), check=True, warn=False)
        self.assertLessEqual(result.channel_check['tp_error'], 1e-10)
        self.assertGreaterEqual(result.channel_check['min_choi_eigenvalue'], -1e-10)
        self.assertLessEqual(result.channel_check['composition_error'], 1e-8)

    def test_config_validation(self):
        """Filter settings outside their ranges are rejected"""
        with self.assertRaises(ParameterError):
            FilterConfig(x=1.5)
        with self.assertRaises(ParameterError):
            FilterConfig(degree=1)
        with self.assertRaises(ParameterError):
            PipelineNoise('photonic', 0.1)
        with self.assertRaises(ParameterError):
            joint_noise(0.01, factor=0.0)


class EstimationTest(SimpleTestCase):
    """Test the three-quantity estimator"""

    def setUp(self):
        self.model = build_model(m=8, b=0.9, delta_x=4.0)

    def test_noiseless_estimate(self):
        """Sampled estimates agree with the exact pipeline mean, which sits near the truth"""
        noise = PipelineNoise('uploaded', 0.0)
        moments = pipeline_moments(self.model, noise, CONVERGED)
        self.assertLess(abs(moments.bias), 0.05)
        reports = estimate_quantities(self.model, noise, CONVERGED, 20000, seed=3)
        self.assertTrue(reports['composite'].within(moments.mean))
        for index, name in enumerate(('diag_v1', 'diag_v2', 'cross')):
            self.assertTrue(reports[name].within(moments.means[index]))
        self.assertGreater(reports['composite'].extra['copies'], 0)

    def test_reproducible_across_threads(self):
        """Same seed gives the same estimate for any thread count"""
        noise = PipelineNoise('uploaded', 0.0)
        one = estimate_quantities(self.model, noise, CONVERGED, 5000, seed=4, threads=1)
        two = estimate_quantities(self.model, noise, CONVERGED, 5000, seed=4, threads=2)
        self.assertEqual(one['composite'].mean, two['composite'].mean)

    def test_dim_planet_costs_more_copies(self):
        """The V2 branch gets rarer, and dearer per copy, as the star brightens"""
        noise = PipelineNoise('uploaded', 0.0)
        bright = pipeline_moments(build_model(m=8, b=0.99, delta_x=4.0), noise, CONVERGED)
        dim = pipeline_moments(self.model, noise, CONVERGED)
        self.assertGreater(bright.variance_per_copy('diag_v2'), dim.variance_per_copy('diag_v2'))

    def test_uploaded_bias_smaller(self):
        """Noise once per loaded state biases far less than noise per interaction"""
        raw_noise, uploaded_noise = joint_noise(1e-3, 3.0)
        config = FilterConfig(1.0, 48, 2048)
        raw = pipeline_moments(self.model, raw_noise, config)
        uploaded = pipeline_moments(self.model, uploaded_noise, config)
        self.assertLess(abs(uploaded.bias), 0.25 * abs(raw.bias))

    def test_zero_shots(self):
        """No shots gives NaN reports"""
        reports = estimate_quantities(self.model, PipelineNoise(), CONVERGED, 0)
        self.assertEqual(reports['composite'].shots, 0)
        self.assertTrue(math.isnan(reports['composite'].mean))
        with self.assertRaises(ParameterError):
            estimate_quantities(self.model, PipelineNoise(), CONVERGED, -1)

    def test_decision_helpers(self):
        """Gaussian success and repetitions to the target"""
        self.assertEqual(success_probability(0.0, 1.0, 100), 0.5)
        self.assertEqual(success_probability(1.0, 1.0, 0), 0.5)
        self.assertEqual(repetitions_to_target(-0.1, 1.0), math.inf)
        repetitions = repetitions_to_target(1.0, 1.0, 0.9)
        self.assertAlmostEqual(repetitions, norm.ppf(0.9) ** 2)
        self.assertAlmostEqual(success_probability(1.0, 1.0, repetitions), 0.9)
        with self.assertRaises(ParameterError):
            repetitions_to_target(1.0, 1.0, 0.4)


class ImagingSweepTest(SimpleTestCase):
    """Test the raw vs uploaded hypothesis test"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.pair = mirrored_pair(m=16, b=0.999, delta_x=4.0)
        cls.rows = hypothesis_test_sweep(cls.pair, [0.0, 1e-3, 1e-2], factor=3.0, budget=1e9)

    def _rows(self, mode):
        return [row for row in self.rows if row['mode'] == mode]

    def test_row_layout(self):
        """Two rows per rate, raw first"""
        self.assertEqual(len(self.rows), 6)
        self.assertEqual([row['mode'] for row in self.rows[:2]], ['raw', 'uploaded'])
        self.assertTrue(set(self.rows[0]) <= set(SWEEP_COLUMNS))

    def test_noiseless_point(self):
        """Without noise both learners pick the same filter and decide"""
        raw, uploaded = self.rows[0], self.rows[1]
        self.assertAlmostEqual(raw['ratio'], 1.0)
        self.assertGreaterEqual(raw['success'], 0.99)
        self.assertGreaterEqual(uploaded['success'], 0.99)

    def test_uploaded_advantage(self):
        """The raw learner needs far more copies at 1e-3 and loses at 1e-2"""
        self.assertGreaterEqual(self.rows[2]['ratio'], 100)
        self.assertGreater(self.rows[5]['success'], self.rows[4]['success'])

    def test_raw_success_nonincreasing(self):
        """More noise never helps the raw learner"""
        successes = [row['success'] for row in self._rows('raw')]
        for before, after in zip(successes, successes[1:]):
            self.assertLessEqual(after, before + 1e-9)

    def test_mirrored_means(self):
        """The pipeline is odd under reflection"""
        right, left = self.pair
        noise = PipelineNoise('uploaded', 3e-3)
        config = FilterConfig(1.0, 24, 64)
        self.assertAlmostEqual(pipeline_moments(right, noise, config).mean, -pipeline_moments(left, noise, config).mean, places=8)

    def test_needs_pair(self):
        """The sweep rejects a single instance and a non-positive budget"""
        with self.assertRaises(ParameterError):
            hypothesis_test_sweep(self.pair[:1], [0.0])
        with self.assertRaises(ParameterError):
            hypothesis_test_sweep(self.pair, [0.0], budget=0)


class ImagingCommandTest(SimpleTestCase):
    """Test the imaging management command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _run(self, *args):
        out = StringIO()
        call_command('imaging', *args, stdout=out)
        return out.getvalue()

    def test_run_decides_right(self):
        """run with a bright star and no noise decides right"""
        path = Path(self.tmp.name) / 'run.json'
        output = self._run('run', '--b', '0.999', '--noise', '0', '--shots', '10000', '--seed', '1', '--format', 'json', '--output', str(path))
        self.assertIn('imaging run finished.', output)
        results = json.loads(path.read_text())['results']
        self.assertGreaterEqual(results['summary']['success'], 0.99)
        self.assertEqual(results['summary']['decision'], 'right')
        self.assertEqual(len(results['rows']), 4)

    def test_run_with_given_filter(self):
        """Explicit filter settings are used as given"""
        path = Path(self.tmp.name) / 'run.json'
        self._run('run', '--m', '8', '--b', '0.9', '--x', '1.0', '--degree', '16', '--rounds', '256', '--shots', '500', '--seed', '2', '--format', 'json', '--output', str(path))
        summary = json.loads(path.read_text())['results']['summary']
        self.assertEqual(summary['config_source'], 'given')
        self.assertEqual(summary['degree'], 16)

    def test_sweep_csv(self):
        """sweep writes two rows per rate with the sweep columns"""
        path = Path(self.tmp.name) / 'sweep.csv'
        self._run('sweep', '--noise-grid', '0,1e-3', '--seed', '1', '--output', str(path))
        rows = [line for line in path.read_text().splitlines() if not line.startswith('#')]
        self.assertEqual(rows[0].split(','), SWEEP_COLUMNS)
        self.assertEqual(len(rows), 5)

    def test_bad_brightness_exit_code(self):
        """b below one half fails with the config exit code"""
        with self.assertRaises(CommandError) as ctx:
            self._run('run', '--b', '0.4', '--seed', '1', '--output', str(Path(self.tmp.name) / 'x.csv'))
        self.assertEqual(ctx.exception.returncode, 2)
