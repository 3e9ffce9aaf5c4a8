from experiments.services.commands import SimulationCommand
from experiments.services.config import get_config
from experiments.services.grids import parse_grid
from shadows.services.bounds import (
    injection_sample_count,
    noisy_weight_upper_bound,
    raw_sample_count,
    separation_exponent,
    separation_threshold,
)
from shadows.services.brickwork import BrickworkSpec, default_chain_length
from shadows.services.weights import depth_scan, scan_max_depth, shadow_weight, shadow_weight_exact


class Command(SimulationCommand):
    help = 'Noisy shallow shadows: shadow weight, raw vs injected separation, depth scans'
    command_name = 'shadows'
    subcommands = {
        'weight': ('Shadow weight of a k-site observable', {
            'n': None, 'k': 1, 'd': 1, 'lam': 0.0, 'trials': 20000, 'exact': False,
        }),
        'separation': ('Separation exponent and sample counts', {
            'lam': '0.05', 'lam_inj': 0.06, 'k': 4, 'epsilon': 0.1, 'trials': 20000,
        }),
        'scan': ('Shadow weight versus depth', {'k': 4, 'lam': 0.0, 'max_depth': None, 'n': None, 'trials': 20000}),
    }

    def add_weight_arguments(self, parser):
        parser.add_argument('--n', type=int, help='Chain length (default: k + 2d + 2)')
        parser.add_argument('--k', type=int, help='Observable size')
        parser.add_argument('--d', type=int, help='Brickwork depth')
        parser.add_argument('--lambda', dest='lam', type=float, help='Per-layer depolarizing strength')
        parser.add_argument('--trials', type=int, help='Monte Carlo trajectories')
        parser.add_argument('--exact', action='store_true', default=None, help='Also evaluate the transfer-matrix value')

    def add_separation_arguments(self, parser):
        parser.add_argument('--lambda', dest='lam', type=str, help='Raw strength or grid')
        parser.add_argument('--lambda-inj', dest='lam_inj', type=float, help="Injection strength lambda'")
        parser.add_argument(
            '--k', type=int,
            help='Observable size for the sample counts; above SHADOW_EXACT_MAX_SITES - 2 the depth scan is sampled',
        )
        parser.add_argument('--epsilon', type=float)
        parser.add_argument('--trials', type=int, help='Trajectories per depth when the scan is sampled')

    def add_scan_arguments(self, parser):
        parser.add_argument('--k', type=int)
        parser.add_argument('--lambda', dest='lam', type=float)
        parser.add_argument('--max-depth', dest='max_depth', type=int, help='Deepest layer (default: 4 ceil(log2 k) + 4)')
        parser.add_argument('--n', type=int)
        parser.add_argument('--trials', type=int)

    def run_weight(self, run):
        k, depth, lam = int(run['k']), int(run['d']), float(run['lam'])
        n = run['n'] if run['n'] is not None else k + 2 * depth + 2
        spec = BrickworkSpec(n=int(n), depth=depth, k=k)
        report = shadow_weight(spec, lam=lam, trials=int(run['trials']), seed=run.seed, threads=run.threads)
        row = {'n': spec.n, 'k': k, 'depth': depth, 'lambda': lam, **report.as_dict()}
        summary = {'omega': report.mean, 'std_error': report.std_error}
        if run['exact'] and spec.n <= get_config()['SHADOW_EXACT_MAX_SITES']:
            row['omega_exact'] = shadow_weight_exact(spec, lam=lam)
            summary['omega_exact'] = row['omega_exact']
        return {'rows': [row], 'summary': summary}

    def run_separation(self, run):
        lam_inj, k, epsilon = float(run['lam_inj']), int(run['k']), float(run['epsilon'])
        injected = injection_sample_count(k, lam_inj, epsilon, trials=int(run['trials']), seed=run.seed)
        rows = []
        for lam in parse_grid(run['lam']):
            rows.append({
                'lambda': lam,
                'lambda_inj': lam_inj,
                'k': k,
                'exponent': separation_exponent(lam, lam_inj),
                'lambda_inj_threshold': separation_threshold(lam),
                'weight_bound': noisy_weight_upper_bound(k, lam, injected.omega_star),
                'n_raw': raw_sample_count(k, lam, epsilon, injected.omega_star),
                'n_inj': injected.count,
                'd_star': injected.d_star,
            })
        last = rows[-1]
        return {
            'rows': rows,
            'summary': {
                'exponent': last['exponent'],
                'threshold': last['lambda_inj_threshold'],
                'n_raw': last['n_raw'],
                'n_inj': last['n_inj'],
                'omega_method': injected.method,
                'note': 'exponent-level counts, poly(k) omitted',
            },
        }

    def run_scan(self, run):
        k, lam = int(run['k']), float(run['lam'])
        max_depth = int(run['max_depth']) if run['max_depth'] is not None else scan_max_depth(k)
        n = int(run['n']) if run['n'] is not None else None
        rows, best = depth_scan(k, lam, max_depth, n=n, trials=int(run['trials']), seed=run.seed, threads=run.threads)
        cap = get_config()['SHADOW_EXACT_MAX_SITES']
        chain = n if n is not None else (default_chain_length(k, max_depth, cap) if k + 2 <= cap else k + 2 * max_depth + 2)
        for row in rows:
            row.update({'k': k, 'n': chain, 'lambda': lam})
        return {
            'rows': rows,
            'columns': ['depth', 'omega', 'std_error', 'method', 'k', 'n', 'lambda'],
            'summary': {'best_depth': best, 'omega_max': rows[best]['omega'], 'method': rows[-1]['method']},
        }
