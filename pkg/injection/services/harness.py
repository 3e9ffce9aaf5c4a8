"""
Monte Carlo harness for the one-step growth gadget INJECT(d1 -> d2).

Each shot runs both sectors on independent RNG streams and combines their
logical flips into one of I, X, Z, Y. A flip of the Z-check sector is a
logical X error and a flip of the X-check sector a logical Z error.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from experiments.exceptions import ParameterError, require_positive_int, require_probability
from experiments.reports import wilson_interval
from experiments.services.workers import run_chunked
from surface.services.decoder import build_decoding_graph, run_shot
from surface.services.growth import build_growth_layout


logger = logging.getLogger(__name__)

OUTCOMES = ('I', 'X', 'Z', 'Y')
# bit 0: Z-check sector flip (logical X), bit 1: X-check sector flip (logical Z)
SECTOR_BITS = {'Z': 1, 'X': 2}
NOISE_WARN_BAND = 0.05
SHOT_CHUNK = 200
MIN_CHANNEL_TRIALS = 10_000


@dataclass(frozen=True)
class GrowthConfig:
    d1: int
    d2: int
    T: int | None = None
    p: float = 0.0
    trials: int = 1000
    seed: int = 0
    input_error_rate: float = 0.0
    permissive: bool = False

    def __post_init__(self):
        if self.T is None:
            object.__setattr__(self, 'T', self.d2)
        if self.T < self.d2:
            raise ParameterError(f'need T >= d2, got T={self.T} d2={self.d2}')
        require_positive_int('trials', self.trials)
        require_probability('p', self.p, open_upper=True)
        require_probability('input_error_rate', self.input_error_rate)
        if self.p > NOISE_WARN_BAND:
            logger.warning('Physical fault rate above the phenomenological threshold region. p=%s', self.p)

    def as_dict(self):
        return {
            'd1': self.d1, 'd2': self.d2, 'T': self.T, 'p': self.p, 'trials': self.trials,
            'seed': self.seed, 'input_error_rate': self.input_error_rate,
        }


@lru_cache(maxsize=32)
def sector_graphs(d1, d2, T, permissive=False):
    """Decoding graphs of both sectors with their lazy tables filled in."""
    layout = build_growth_layout(d1, d2, permissive=permissive)
    graphs = {sector: build_decoding_graph(layout, T, sector) for sector in SECTOR_BITS}
    for graph in graphs.values():
        graph.distances
    layout.frame_strings
    return graphs


@dataclass
class InjectionCounts:
    config: GrowthConfig
    counts: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def trials(self):
        return sum(self.counts.values())

    def rate(self, outcome):
        return self.counts.get(outcome, 0) / self.trials

    @property
    def failures(self):
        return self.trials - self.counts.get('I', 0)

    @property
    def q_hat(self):
        return self.failures / self.trials

    def interval(self, confidence=0.95):
        return wilson_interval(self.failures, self.trials, confidence)

    def sector_rate(self, sector):
        """Flip rate of one sector alone."""
        bit = SECTOR_BITS[sector]
        return sum(self.counts.get(o, 0) for code, o in enumerate(OUTCOMES) if code & bit) / self.trials


def _shot_chunk(config, graphs, size, rng, trace):
    streams = rng.spawn(3)
    outcomes = np.zeros(size, dtype=np.int64)
    traces = []
    sectors = {'Z': streams[0], 'X': streams[1]}
    input_draws = streams[2].random((size, 2))
    for shot in range(size):
        code = 0
        shot_trace = {}
        for sector, stream in sectors.items():
            record = run_shot(graphs[sector], config.p, stream)
            if record.flip:
                code |= SECTOR_BITS[sector]
            if trace:
                shot_trace[sector] = record.as_trace()
        if input_draws[shot, 0] < config.input_error_rate:
            code ^= 1 + int(input_draws[shot, 1] * 3)
        outcomes[shot] = code
        if trace:
            traces.append({'outcome': OUTCOMES[code], **shot_trace})
    return outcomes, traces


def run_trials(config, threads=None, trace_path=None):
    """
    Run config.trials shots.

    Returns:
        InjectionCounts with per-outcome counts
    """
    graphs = sector_graphs(config.d1, config.d2, config.T, config.permissive)
    started = time.perf_counter()
    chunks = run_chunked(
        lambda size, rng: _shot_chunk(config, graphs, size, rng, trace_path is not None),
        config.trials, config.seed, threads, chunk_size=SHOT_CHUNK,
    )
    outcomes = np.concatenate([chunk[0] for chunk in chunks])
    tallies = np.bincount(outcomes, minlength=len(OUTCOMES))
    result = InjectionCounts(config, {o: int(n) for o, n in zip(OUTCOMES, tallies)}, time.perf_counter() - started)

    if trace_path is not None:
        with open(trace_path, 'w', encoding='utf-8') as handle:
            for chunk in chunks:
                for line in chunk[1]:
                    handle.write(json.dumps(line) + '\n')

    logger.info(
        'Injection point finished. d1=%s d2=%s T=%s p=%s trials=%s failures=%s elapsed=%.2fs',
        config.d1, config.d2, config.T, config.p, config.trials, result.failures, result.elapsed,
    )
    return result


@dataclass(frozen=True)
class EffectiveInputChannel:
    q: float
    pauli_rates: tuple
    lambda_star: float
    q_interval: tuple
    lambda_interval: tuple
    c_in: float | None
    trials: int

    def as_dict(self):
        p_x, p_y, p_z = self.pauli_rates
        return {
            'q': self.q, 'pX': p_x, 'pY': p_y, 'pZ': p_z, 'lambda_star': self.lambda_star,
            'q_lo': self.q_interval[0], 'q_hi': self.q_interval[1],
            'lambda_lo': self.lambda_interval[0], 'lambda_hi': self.lambda_interval[1],
            'c_in': self.c_in, 'trials': self.trials,
        }


def twirled_strength(q):
    """
    Depolarizing strength of the Clifford-twirled Pauli channel.

    The twirl maps any Pauli channel with failure mass q to
    (1 - q) rho + (q/3) sum_P P rho P, which is (1 - lam) rho + lam I/2 with
    lam = 4q/3.
    """
    return 4.0 * q / 3.0


def channel_from_counts(result):
    q = result.q_hat
    lo, hi = result.interval()
    p = result.config.p
    return EffectiveInputChannel(
        q=q,
        pauli_rates=(result.rate('X'), result.rate('Y'), result.rate('Z')),
        lambda_star=twirled_strength(q),
        q_interval=(lo, hi),
        lambda_interval=(twirled_strength(lo), twirled_strength(hi)),
        c_in=q / p if p > 0 else None,
        trials=result.trials,
    )


def estimate_input_channel(config, threads=None, min_trials=MIN_CHANNEL_TRIALS, trace_path=None):
    """Effective one-time logical channel of the gadget with its twirled rate."""
    if config.trials < min_trials:
        raise ParameterError(f'channel estimation needs at least {min_trials} trials, got {config.trials}')
    return channel_from_counts(run_trials(config, threads, trace_path))


def point_seed(seed, index):
    """Per-point seed derived from the run seed."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0] >> 1)


def run_injection_sweep(d1, d2_values, p_values, trials, seed, T=None, input_error_rate=0.0, threads=None, permissive=False):
    """
    One row per (d2, p) with the failure rate, its Wilson interval and the
    Pauli split.
    """
    require_positive_int('trials', trials)
    rows = []
    index = 0
    for d2 in d2_values:
        for p in p_values:
            config = GrowthConfig(
                d1=d1, d2=d2, T=T if T is not None else d2, p=p, trials=trials,
                seed=point_seed(seed, index), input_error_rate=input_error_rate, permissive=permissive,
            )
            channel = channel_from_counts(run_trials(config, threads))
            rows.append({
                'd1': d1, 'd2': d2, 'T': config.T, 'p': p, 'trials': trials,
                'q_hat': channel.q, 'ci_lo': channel.q_interval[0], 'ci_hi': channel.q_interval[1],
                'pX': channel.pauli_rates[0], 'pY': channel.pauli_rates[1], 'pZ': channel.pauli_rates[2],
                'lambda_star': channel.lambda_star, 'seed': config.seed,
            })
            index += 1
    return rows


def fit_c_in(rows):
    """Least-squares slope of q_hat against p through the origin."""
    p = np.array([row['p'] for row in rows], dtype=float)
    q = np.array([row['q_hat'] for row in rows], dtype=float)
    if not np.any(p > 0):
        return None
    return float(p @ q / (p @ p))
