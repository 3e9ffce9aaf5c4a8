"""
Shared plumbing for the experiment management commands.

Every experiment family is one management command with subcommands. A
subclass declares, per subcommand, its parameter defaults and implements
add_<sub>_arguments(parser) and run_<sub>(run_config). run_<sub> returns a
dict with 'rows' (table for CSV output) and 'summary' (key facts printed to
stdout and stored in the JSON output).
"""

import logging
import math
import time

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand, CommandError

from experiments.exceptions import ParameterError, UploadLabError
from experiments.models import SimulationRun
from experiments.reports import write_csv, write_json
from experiments.services.run_config import OUTPUT_FORMATS, resolve


logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def add_run_options(parser):
    parser.add_argument('--config', type=str, default=None, help='JSON file with parameter values (flags override it)')
    parser.add_argument('--seed', type=int, default=None, help='RNG seed (random and logged when omitted)')
    parser.add_argument('--output', type=str, default=None, help='Output file (default: OUTPUT_DIR/<command>-<sub>-<seed>.<format>)')
    parser.add_argument('--format', type=str, default=None, choices=OUTPUT_FORMATS, help='Output format (default: csv)')
    parser.add_argument('--threads', type=int, default=None, help='Worker threads for Monte Carlo chunks')
    parser.add_argument('--record', action='store_true', help='Persist a SimulationRun record')


class SimulationCommand(BaseCommand):
    command_name = ''
    # subcommand -> (help text, parameter defaults)
    subcommands: dict = {}

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='subcommand', required=True)
        for name, (help_text, _defaults) in self.subcommands.items():
            sub = subparsers.add_parser(name, help=help_text)
            add_run_options(sub)
            getattr(self, f'add_{name}_arguments')(sub)

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        _help, defaults = self.subcommands[subcommand]
        record = None

        try:
            run_config = resolve(self.command_name, subcommand, options, defaults)
            if options.get('record'):
                record = SimulationRun.start(run_config)

            started = time.perf_counter()
            outcome = getattr(self, f'run_{subcommand}')(run_config)
            logger.info(
                'Experiment finished. command=%s subcommand=%s seed=%s elapsed=%.2fs',
                self.command_name, subcommand, run_config.seed, time.perf_counter() - started,
            )
            path = self._write(run_config, outcome)
        except (ParameterError, ImproperlyConfigured) as exc:
            if record is not None:
                record.fail(exc)
            raise CommandError(str(exc), returncode=EXIT_CONFIG_ERROR)
        except UploadLabError as exc:
            logger.exception('Experiment failed. command=%s subcommand=%s err=%s', self.command_name, subcommand, exc)
            if record is not None:
                record.fail(exc)
            raise CommandError(f'{type(exc).__name__}: {exc}', returncode=EXIT_RUNTIME_ERROR)

        summary = outcome.get('summary', {})
        if record is not None:
            record.complete(_plain(summary), output_path=path)

        self.stdout.write(self.style.SUCCESS(f'{self.command_name} {subcommand} finished.'))
        for key, value in summary.items():
            self.stdout.write(f'{key}: {value}')
        self.stdout.write(f'Output: {path}')

    def _write(self, run_config, outcome):
        config = run_config.as_dict()
        if run_config.format == 'csv':
            return write_csv(run_config.output, outcome.get('rows', []), config, columns=outcome.get('columns'))
        payload = {'summary': outcome.get('summary', {}), 'rows': outcome.get('rows', [])}
        return write_json(run_config.output, payload, config)


def _plain(summary):
    out = {}
    for key, value in summary.items():
        if isinstance(value, float) and not math.isfinite(value):
            out[key] = str(value)
        elif isinstance(value, (int, float, str, bool)) or value is None:
            out[key] = value
        else:
            out[key] = str(value)
    return out
