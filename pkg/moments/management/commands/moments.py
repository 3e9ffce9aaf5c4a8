from experiments.exceptions import ParameterError
from experiments.services.commands import SimulationCommand
from experiments.services.grids import parse_grid
from moments.services.bounds import (
    aggregated_depth,
    injection_upper_bound,
    learning_tree_bounds,
    moment_gap,
    raw_lower_bound,
    speedup_ratio,
    speedup_threshold_third_moment,
    third_moment_heisenberg_input,
)
from moments.services.cycle_test import CycleTest, ensemble_cycle_estimate
from moments.services.ensembles import EnsembleSpec, expected_cycle_value, maximally_mixed


ORACLE_MAX_QUBITS = 3


class Command(SimulationCommand):
    help = 'Third-moment estimation: cycle-test Monte Carlo, ensemble gap, sample-complexity bounds, injection threshold'
    command_name = 'moments'
    subcommands = {
        'estimate': ('Monte Carlo cycle test', {
            'n': 1, 'lam_inj': 0.0, 'shots': 10000, 'mixed': False, 'kind': 'P', 'mixed_weight': 0.5, 'corrected': True,
        }),
        'gap': ('Ensemble third-moment gap', {'n': 2, 'lam_inj': 0.0, 'mixed_weight': 0.0}),
        'bounds': ('Raw vs injected sample complexities', {
            'n': '8', 'lam': 0.1, 'lam_inj': 0.12, 'epsilon': 0.1, 'delta': 0.05, 'target_tv': 1 / 6,
        }),
        'threshold': ('Largest injection noise keeping the speedup', {'lam': '0.1'}),
    }

    def add_estimate_arguments(self, parser):
        parser.add_argument('--n', type=int, help='Qubits per copy (<= 3)')
        parser.add_argument('--lambda-inj', dest='lam_inj', type=float, help="Injection depolarizing strength lambda'")
        parser.add_argument('--shots', type=int, help='Shots (or ensemble draws)')
        parser.add_argument('--mixed', action='store_true', default=None, help='Use the maximally mixed state')
        parser.add_argument('--kind', choices=('P', 'Q'), help='Ensemble to draw states from')
        parser.add_argument('--mixed-weight', dest='mixed_weight', type=float, help='Ensemble floor weight')
        parser.add_argument('--uncorrected', dest='corrected', action='store_false', default=None, help='Report raw eigenvalue products')

    def add_gap_arguments(self, parser):
        parser.add_argument('--n', type=int)
        parser.add_argument('--lambda-inj', dest='lam_inj', type=float)
        parser.add_argument('--mixed-weight', dest='mixed_weight', type=float)

    def add_bounds_arguments(self, parser):
        parser.add_argument('--n', type=str, help='Qubit count or grid, e.g. 4,6,8')
        parser.add_argument('--lambda', dest='lam', type=float, help='Raw depolarizing strength')
        parser.add_argument('--lambda-inj', dest='lam_inj', type=float)
        parser.add_argument('--epsilon', type=float)
        parser.add_argument('--delta', type=float)
        parser.add_argument('--target-tv', dest='target_tv', type=float)

    def add_threshold_arguments(self, parser):
        parser.add_argument('--lambda', dest='lam', type=str, help='Raw strength or grid')

    def run_estimate(self, run):
        n, lam_inj, shots = int(run['n']), float(run['lam_inj']), int(run['shots'])
        if shots < 1:
            raise ParameterError(f'shots must be positive, got {shots}')
        if run['mixed']:
            rho = maximally_mixed(n)
            test = CycleTest(n, lam_inj, corrected=bool(run['corrected']))
            report = test.estimate(rho, shots, run.seed, run.threads)
            exact = test.exact_mean(rho)
            source = 'maximally_mixed'
        else:
            spec = EnsembleSpec(n, run['kind'], float(run['mixed_weight']))
            report = ensemble_cycle_estimate(spec, lam_inj, shots, run.seed, bool(run['corrected']), run.threads)
            exact = expected_cycle_value(spec, 0.0 if run['corrected'] else lam_inj)
            source = f'ensemble_{spec.kind}'
        row = {'source': source, 'n': n, 'lambda_inj': lam_inj, 'exact': exact, **report.as_dict()}
        return {
            'rows': [row],
            'summary': {'mean': report.mean, 'std_error': report.std_error, 'exact': exact, 'shots': report.shots},
        }

    def run_gap(self, run):
        n, lam_inj, weight = int(run['n']), float(run['lam_inj']), float(run['mixed_weight'])
        closed = moment_gap(n, 1.0 - lam_inj, weight)
        row = {'n': n, 'lambda_inj': lam_inj, 'mixed_weight': weight, 'gap_closed_form': closed, 'gap_oracle': ''}
        if n <= ORACLE_MAX_QUBITS:
            row['gap_oracle'] = (
                expected_cycle_value(EnsembleSpec(n, 'Q', weight), lam_inj)
                - expected_cycle_value(EnsembleSpec(n, 'P', weight), lam_inj)
            )
        return {'rows': [row], 'summary': {'gap': closed, 'oracle': row['gap_oracle']}}

    def run_bounds(self, run):
        lam, lam_inj = float(run['lam']), float(run['lam_inj'])
        rows = []
        for n in parse_grid(run['n'], int):
            counts = injection_upper_bound(n, lam_inj, float(run['epsilon']), float(run['delta']))
            bound_input = third_moment_heisenberg_input(n, lam)
            delta, depth = learning_tree_bounds(bound_input, float(run['target_tv']))
            rows.append({
                'n': n,
                'lambda': lam,
                'lambda_inj': lam_inj,
                'n_raw': raw_lower_bound(n, lam),
                'n_inj': counts['promise'],
                'n_inj_generic': counts['generic'],
                'ratio': speedup_ratio(n, lam, lam_inj),
                'tree_delta': delta,
                'tree_min_depth': depth,
                'aggregated_depth': aggregated_depth(n, lam, float(run['target_tv'])),
            })
        last = rows[-1]
        return {
            'rows': rows,
            'summary': {
                'n_raw': last['n_raw'],
                'n_inj': last['n_inj'],
                'ratio': last['ratio'],
                'note': 'bounds up to absolute constants',
            },
        }

    def run_threshold(self, run):
        rows = []
        for lam in parse_grid(run['lam']):
            lambda_max = speedup_threshold_third_moment(lam)
            rows.append({'lambda': lam, 'lambda_inj_max': lambda_max, 'ratio_to_lambda': lambda_max / lam})
        return {
            'rows': rows,
            'summary': {'lambda_inj_max': rows[-1]['lambda_inj_max'], 'small_noise_limit': 19 / 12},
        }
