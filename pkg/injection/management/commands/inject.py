from experiments.exceptions import DivergenceError
from experiments.models import SimulationRun
from experiments.services.commands import SimulationCommand
from experiments.services.grids import parse_grid
from injection.services.enumerator import compare_bound_vs_montecarlo, default_input_volume, weight_enumerator_bound
from injection.services.harness import (
    GrowthConfig,
    channel_from_counts,
    estimate_input_channel,
    fit_c_in,
    point_seed,
    run_injection_sweep,
    run_trials,
    sector_graphs,
)
from injection.tasks import run_sweep_point


SWEEP_COLUMNS = ['d1', 'd2', 'T', 'p', 'trials', 'q_hat', 'ci_lo', 'ci_hi', 'pX', 'pY', 'pZ', 'lambda_star', 'seed']


class Command(SimulationCommand):
    help = 'Surface-code growth gadget: failure-rate sweeps, effective input channel, enumerator bound'
    command_name = 'inject'
    subcommands = {
        'sweep': ('Logical failure rate over d2 and p', {
            'd1': 5, 'd2': '5,7,9', 'p': '0.01', 'T': None, 'trials': 1000, 'input_error_rate': 0.0,
            'permissive': False, 'queue': False,
        }),
        'channel': ('Effective one-time input channel', {
            'd1': 5, 'd2': 7, 'p': 0.005, 'T': None, 'trials': 10000, 'input_error_rate': 0.0,
            'permissive': False, 'trace': None,
        }),
        'bound': ('Weight-enumerator bound, optionally against Monte Carlo', {
            'd1': 5, 'd2': '5,7,9', 'x': '1e-20', 'T': None, 'D': None, 'v_in': None, 'trials': 0,
        }),
    }

    def _add_geometry(self, parser):
        parser.add_argument('--d1', type=int, help='Input patch distance (odd, >= 5 for growth)')
        parser.add_argument('--T', type=int, help='Rounds after growth (default d2)')
        parser.add_argument('--permissive', action='store_true', default=None, help='Allow d1=3 growth')
        parser.add_argument('--input-error-rate', dest='input_error_rate', type=float, help='Logical error rate on the input')
        parser.add_argument('--trials', type=int)

    def add_sweep_arguments(self, parser):
        self._add_geometry(parser)
        parser.add_argument('--d2', type=str, help='Target distances, e.g. 5,7,9')
        parser.add_argument('--p', type=str, help='Physical fault rates, e.g. 0.002,0.005 or 0.001:0.01:4')
        parser.add_argument('--queue', action='store_true', default=None, help='Dispatch each point as a background task')

    def add_channel_arguments(self, parser):
        self._add_geometry(parser)
        parser.add_argument('--d2', type=int)
        parser.add_argument('--p', type=float)
        parser.add_argument('--trace', type=str, help='Write per-shot JSON lines here')

    def add_bound_arguments(self, parser):
        parser.add_argument('--d1', type=int)
        parser.add_argument('--d2', type=str)
        parser.add_argument('--x', type=str, help='Fault weights')
        parser.add_argument('--T', type=int)
        parser.add_argument('--D', type=int, help='Fault adjacency degree (default: measured)')
        parser.add_argument('--v-in', dest='v_in', type=float, help='Input fault volume (default 3 d1^2)')
        parser.add_argument('--trials', type=int, help='Monte Carlo shots per point for the comparison (0: none)')

    def run_sweep(self, run):
        d1 = int(run['d1'])
        d2_values = parse_grid(run['d2'], int)
        p_values = parse_grid(run['p'])
        if run['queue']:
            return self._queue_sweep(run, d1, d2_values, p_values)
        rows = run_injection_sweep(
            d1, d2_values, p_values, int(run['trials']), run.seed,
            T=run['T'], input_error_rate=float(run['input_error_rate']), threads=run.threads,
            permissive=bool(run['permissive']),
        )
        return {
            'rows': rows,
            'columns': SWEEP_COLUMNS,
            'summary': {'points': len(rows), 'q_hat_last': rows[-1]['q_hat'], 'c_in_fit': fit_c_in(rows)},
        }

    def _queue_sweep(self, run, d1, d2_values, p_values):
        rows = []
        index = 0
        for d2 in d2_values:
            for p in p_values:
                config = GrowthConfig(
                    d1=d1, d2=d2, T=run['T'] if run['T'] is not None else d2, p=p, trials=int(run['trials']),
                    seed=point_seed(run.seed, index), input_error_rate=float(run['input_error_rate']),
                )
                record = SimulationRun.objects.create(
                    kind='inject', subcommand='point', config={'params': config.as_dict()},
                    seed=config.seed, status=SimulationRun.STATUS_PENDING,
                )
                result = run_sweep_point.delay(record.id)
                rows.append({'run_id': record.id, 'd2': d2, 'p': p, 'task_id': result.id})
                index += 1
        return {'rows': rows, 'summary': {'queued': len(rows)}}

    def run_channel(self, run):
        d2 = int(run['d2'])
        config = GrowthConfig(
            d1=int(run['d1']), d2=d2, T=run['T'] if run['T'] is not None else d2, p=float(run['p']),
            trials=int(run['trials']), seed=run.seed, input_error_rate=float(run['input_error_rate']),
            permissive=bool(run['permissive']),
        )
        channel = estimate_input_channel(config, run.threads, trace_path=run['trace'])
        row = {**config.as_dict(), **channel.as_dict()}
        return {
            'rows': [row],
            'summary': {
                'q': channel.q, 'pX': channel.pauli_rates[0], 'pY': channel.pauli_rates[1],
                'pZ': channel.pauli_rates[2], 'lambda_star': channel.lambda_star, 'c_in': channel.c_in,
            },
        }

    def run_bound(self, run):
        d1 = int(run['d1'])
        v_in = run['v_in'] if run['v_in'] is not None else default_input_volume(d1)
        rows = []
        comparisons = []
        for d2 in parse_grid(run['d2'], int):
            T = run['T'] if run['T'] is not None else d2
            graphs = sector_graphs(d1, d2, T)
            D = run['D'] if run['D'] is not None else max(g.line_graph_degree() for g in graphs.values())
            for x in parse_grid(run['x']):
                row = {'d1': d1, 'd2': d2, 'T': T, 'x': x, 'D': D, 'v_in': v_in}
                try:
                    row.update(weight_enumerator_bound(d1, d2, T, x, D, v_in).as_dict())
                    row['status'] = 'ok'
                except DivergenceError as exc:
                    row.update({'total': None, 'status': f'diverges: {exc}'})
                rows.append(row)
                if int(run['trials']) > 0:
                    config = GrowthConfig(d1=d1, d2=d2, T=T, p=x, trials=int(run['trials']), seed=run.seed)
                    counts = run_trials(config, run.threads)
                    channel = channel_from_counts(counts)
                    point = {
                        'd1': d1, 'd2': d2, 'T': T, 'p': x, 'q_hat': channel.q,
                        'sector_rate': max(counts.sector_rate('X'), counts.sector_rate('Z')),
                    }
                    comparisons.extend(compare_bound_vs_montecarlo([point], D, v_in))
        summary = {'points': len(rows), 'total_last': rows[-1].get('total')}
        if comparisons:
            for row, entry in zip(rows, comparisons):
                row.update({'sector_rate': entry['sector_rate'], 'comparison': entry['status'], 'ratio': entry['ratio']})
            summary['violations'] = sum(entry['status'] == 'violation' for entry in comparisons)
            summary['skipped'] = sum(entry['status'] == 'skipped' for entry in comparisons)
        return {'rows': rows, 'summary': summary}
