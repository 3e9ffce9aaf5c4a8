from experiments.services.commands import SimulationCommand
from experiments.services.grids import parse_grid
from imaging.services.estimation import copies_to_target, estimate_quantities, pipeline_moments, success_probability
from imaging.services.filter import FilterConfig, PipelineNoise, describe, eigen_filter, joint_noise, trace_distance_to_eigenvectors
from imaging.services.model import build_model, mirrored_pair
from imaging.services.sweep import SWEEP_COLUMNS, choose_config, hypothesis_test_sweep


FILTER_DEFAULTS = FilterConfig()


class Command(SimulationCommand):
    help = 'Exoplanet imaging: eigenvector filter, position estimate, raw vs uploaded hypothesis test'
    command_name = 'imaging'
    subcommands = {
        'run': ('Estimate the planet position with one learner', {
            'm': 16, 'b': 0.999, 'delta_x': 4.0, 'width': 1.0,
            'noise': 0.0, 'mode': 'uploaded', 'factor': 3.0, 'shots': 10000,
            'x': None, 'degree': None, 'rounds': None, 'check': True,
        }),
        'sweep': ('Raw vs uploaded success and shot ratio over a noise grid', {
            'm': 16, 'b': 0.999, 'delta_x': 4.0, 'width': 1.0,
            'noise_grid': '1e-4:1e-2:5', 'factor': 3.0, 'budget': 1e9, 'check': True,
        }),
    }

    def _add_instance_arguments(self, parser):
        parser.add_argument('--m', type=int, help='Aperture modes')
        parser.add_argument('--b', type=float, help='Star brightness fraction, in (0.5, 1)')
        parser.add_argument('--delta-x', dest='delta_x', type=float, help='Planet minus star position')
        parser.add_argument('--width', type=float, help='Aperture mode width')
        parser.add_argument('--factor', type=float, help='Uploaded-to-raw noise multiplier')
        parser.add_argument('--no-check', dest='check', action='store_false', default=None, help='Skip the Choi checks')

    def add_run_arguments(self, parser):
        self._add_instance_arguments(parser)
        parser.add_argument('--noise', type=float, help='Raw per-interaction depolarizing rate')
        parser.add_argument('--mode', type=str, choices=('raw', 'uploaded'))
        parser.add_argument('--shots', type=int, help='Repetitions of the three-quantity estimator')
        parser.add_argument('--x', type=float, help='Filter evolution time (default: searched)')
        parser.add_argument('--degree', type=int, help='Filter polynomial degree (default: searched)')
        parser.add_argument('--rounds', type=int, help='DME rounds per query (default: searched)')

    def add_sweep_arguments(self, parser):
        self._add_instance_arguments(parser)
        parser.add_argument('--noise-grid', dest='noise_grid', type=str, help='Raw rates, comma list or lo:hi[:steps]')
        parser.add_argument('--budget', type=float, help='Copies available to each learner')

    def _instances(self, run):
        m, b, width = int(run['m']), float(run['b']), float(run['width'])
        return m, b, float(run['delta_x']), width

    def _filter_config(self, run, pair, noise):
        given = {key: run[key] for key in ('x', 'degree', 'rounds') if run[key] is not None}
        if not given:
            search_noise = PipelineNoise('uploaded', 0.0) if noise.mode == 'uploaded' else noise
            config, _ = choose_config(pair, search_noise)
            return config, 'searched'
        merged = {**FILTER_DEFAULTS.as_dict(), **given}
        return FilterConfig(float(merged['x']), int(merged['degree']), int(merged['rounds'])), 'given'

    def run_run(self, run):
        m, b, delta_x, width = self._instances(run)
        model = build_model(m, b, delta_x, width)
        pair = mirrored_pair(m, b, delta_x, width)
        raw_noise, uploaded_noise = joint_noise(float(run['noise']), float(run['factor']))
        noise = uploaded_noise if run['mode'] == 'uploaded' else raw_noise
        config, source = self._filter_config(run, pair, noise)

        result = eigen_filter(model, noise, config, check=bool(run['check']))
        moments = pipeline_moments(model, noise, config, result=result)
        shots = int(run['shots'])
        reports = estimate_quantities(model, noise, config, shots, seed=run.seed, threads=run.threads)
        composite = reports['composite']

        rows = [{'quantity': name, **report.as_dict()} for name, report in reports.items()]
        summary = {
            'truth': moments.truth,
            'mean': composite.mean,
            'std_error': composite.std_error,
            'decision': 'right' if composite.mean > 0 else 'left',
            'success': success_probability(moments.signed_mean, moments.variance, shots),
            'copies_to_90': copies_to_target(moments),
            'copies_used': composite.extra.get('copies'),
            'config_source': source,
            'trace_distance': trace_distance_to_eigenvectors(result, model),
            **describe(result),
            **result.channel_check,
        }
        return {'rows': rows, 'summary': summary}

    def run_sweep(self, run):
        m, b, delta_x, width = self._instances(run)
        pair = mirrored_pair(m, b, delta_x, width)
        rates = parse_grid(run['noise_grid'])
        rows = hypothesis_test_sweep(
            pair, rates, factor=float(run['factor']), budget=float(run['budget']), check=bool(run['check']),
        )
        last_raw, last_uploaded = rows[-2], rows[-1]
        return {
            'rows': rows,
            'columns': SWEEP_COLUMNS,
            'summary': {
                'points': len(rates),
                'uploaded_config': f"x={last_uploaded['x']} degree={last_uploaded['degree']} rounds={last_uploaded['rounds']}",
                'raw_success': last_raw['success'],
                'uploaded_success': last_uploaded['success'],
                'ratio': last_raw['ratio'],
            },
        }
