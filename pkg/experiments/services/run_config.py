"""
Resolution of a command invocation into a RunConfig.

Precedence is: subcommand defaults, then the --config JSON file, then flags
given explicitly on the command line. Unknown keys in the file are rejected.
"""

import json
import logging
import secrets
from dataclasses import dataclass, field
from pathlib import Path

from experiments.exceptions import ParameterError
from experiments.services.config import get_config


logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ('csv', 'json')
RUN_KEYS = ('seed', 'output', 'format', 'threads')


@dataclass
class RunConfig:
    command: str
    subcommand: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: Path | None = None
    format: str = 'csv'
    threads: int = 1

    def as_dict(self):
        """Fully resolved config, echoed into every output file."""
        return {
            'command': self.command,
            'subcommand': self.subcommand,
            'params': dict(self.params),
            'seed': self.seed,
            'format': self.format,
            'threads': self.threads,
        }

    def __getitem__(self, key):
        return self.params[key]


def _load_config_file(path):
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ParameterError(f'cannot read config file {path}: {exc}')
    except json.JSONDecodeError as exc:
        raise ParameterError(f'config file {path} is not valid JSON: {exc}')
    if not isinstance(data, dict):
        raise ParameterError(f'config file {path} must hold a JSON object')
    return data


def resolve(command, subcommand, options, defaults):
    """
    Build the RunConfig for one invocation.

    Args:
        command: Management command name (e.g. 'inject')
        subcommand: Subcommand name (e.g. 'sweep')
        options: Parsed command options; None means "flag not given"
        defaults: Parameter defaults of the subcommand; its keys are the only
            parameters accepted

    Returns:
        RunConfig
    """
    cfg = get_config()
    params = dict(defaults)
    run = {'seed': None, 'output': None, 'format': 'csv', 'threads': cfg['DEFAULT_THREADS']}

    config_path = options.get('config')
    if config_path:
        file_values = _load_config_file(config_path)
        unknown = sorted(set(file_values) - set(defaults) - set(RUN_KEYS))
        if unknown:
            raise ParameterError(f'unknown config keys for {command} {subcommand}: {", ".join(unknown)}')
        for key, value in file_values.items():
            if key in RUN_KEYS:
                run[key] = value
            else:
                params[key] = value

    for key in defaults:
        if options.get(key) is not None:
            params[key] = options[key]
    for key in RUN_KEYS:
        if options.get(key) is not None:
            run[key] = options[key]

    if run['format'] not in OUTPUT_FORMATS:
        raise ParameterError(f'format must be one of {OUTPUT_FORMATS}, got {run["format"]!r}')

    if run['seed'] is None:
        run['seed'] = secrets.randbits(63)
        logger.info('No seed given; drew a random seed. command=%s subcommand=%s seed=%s', command, subcommand, run['seed'])
    try:
        seed = int(run['seed'])
        threads = int(run['threads'])
    except (TypeError, ValueError):
        raise ParameterError(f'seed and threads must be integers, got seed={run["seed"]!r} threads={run["threads"]!r}')
    if seed < 0 or threads < 1:
        raise ParameterError(f'seed must be >= 0 and threads >= 1, got seed={seed} threads={threads}')

    output = run['output']
    if output:
        output = Path(output)
    else:
        output = cfg['OUTPUT_DIR'] / f'{command}-{subcommand}-{seed}.{run["format"]}'

    return RunConfig(
        command=command,
        subcommand=subcommand,
        params=params,
        seed=seed,
        output=output,
        format=run['format'],
        threads=threads,
    )
