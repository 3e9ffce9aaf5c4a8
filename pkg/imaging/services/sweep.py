"""
Raw versus uploaded hypothesis-test sweeps.

The raw learner re-tunes the filter (x, degree, rounds) at every noise point
with full knowledge of its bias. The uploaded learner tunes once on the
noiseless pipeline and keeps that configuration at every noise point, where
it suffers `factor` times the raw rate once per loaded state.
"""

import logging
import math

from experiments.exceptions import DegenerateInstanceError, ParameterError
from imaging.services.estimation import (
    TARGET_SUCCESS,
    copies_to_target,
    pipeline_moments,
    success_at_budget,
)
from imaging.services.filter import PipelineNoise, default_candidates, eigen_filter, joint_noise


logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    'noise', 'mode', 'rate', 'x', 'degree', 'rounds', 'mean', 'bias', 'variance',
    'copies_per_repetition', 'shots_90', 'success', 'ratio',
]


def evaluate(models, noise, config):
    return [pipeline_moments(model, noise, config) for model in models]


def choose_config(models, noise, candidates=None):
    """
    Configuration with the largest mean decision efficiency over the
    mirrored instances.

    Returns:
        (FilterConfig, [PipelineMoments per model])
    """
    candidates = default_candidates() if candidates is None else candidates
    best = None
    for config in candidates:
        try:
            moments = evaluate(models, noise, config)
        except DegenerateInstanceError:
            continue
        score = sum(m.efficiency for m in moments) / len(moments)
        if best is None or score > best[0]:
            best = (score, config, moments)
    if best is None:
        raise DegenerateInstanceError(f'no filter configuration separates the branches at {noise}')
    logger.debug('Filter configuration chosen. mode=%s rate=%s config=%s score=%.4g', noise.mode, noise.rate, best[1], best[0])
    return best[1], best[2]


def _mode_row(rate, noise, config, moments, budget, target):
    shots = max(copies_to_target(m, target) for m in moments)
    return {
        'noise': rate, 'mode': noise.mode, 'rate': noise.rate, **config.as_dict(),
        'mean': moments[0].mean, 'bias': moments[0].bias, 'variance': moments[0].variance,
        'copies_per_repetition': moments[0].copies_per_repetition,
        'shots_90': shots,
        'success': sum(success_at_budget(m, budget) for m in moments) / len(moments),
    }


def shot_ratio(raw_shots, uploaded_shots):
    """N_raw / N_inj; None when the uploaded learner cannot decide, inf when only raw fails."""
    if math.isinf(uploaded_shots):
        return None
    if math.isinf(raw_shots):
        return math.inf
    return raw_shots / uploaded_shots


def hypothesis_test_sweep(models, rates, factor=3.0, budget=1e9, candidates=None, target=TARGET_SUCCESS, check=True):
    """
    Success probability at a fixed copy budget and copies to the target
    success for both learners at every raw noise rate.

    Args:
        models: (right, left) mirrored ImagingModels
        rates: Raw per-interaction depolarizing rates
        factor: Uploaded-to-raw noise multiplier
        budget: Copies available to each learner

    Returns:
        rows with SWEEP_COLUMNS, two per rate (raw then uploaded)
    """
    if len(models) != 2:
        raise ParameterError('the hypothesis test needs the mirrored (right, left) pair')
    if budget <= 0:
        raise ParameterError(f'budget must be positive, got {budget}')
    candidates = default_candidates() if candidates is None else candidates
    uploaded_config, _ = choose_config(models, PipelineNoise('uploaded', 0.0), candidates)
    logger.info('Uploaded configuration fixed. config=%s', uploaded_config)

    rows = []
    for rate in rates:
        raw_noise, uploaded_noise = joint_noise(rate, factor)
        raw_config, raw_moments = choose_config(models, raw_noise, candidates)
        uploaded_moments = evaluate(models, uploaded_noise, uploaded_config)
        if check:
            for noise, config in ((raw_noise, raw_config), (uploaded_noise, uploaded_config)):
                eigen_filter(models[0], noise, config, check=True, warn=False)
        raw_row = _mode_row(rate, raw_noise, raw_config, raw_moments, budget, target)
        uploaded_row = _mode_row(rate, uploaded_noise, uploaded_config, uploaded_moments, budget, target)
        ratio = shot_ratio(raw_row['shots_90'], uploaded_row['shots_90'])
        raw_row['ratio'] = uploaded_row['ratio'] = ratio
        rows.extend([raw_row, uploaded_row])
        logger.info(
            'Imaging sweep point finished. noise=%s raw_success=%.4f uploaded_success=%.4f ratio=%s',
            rate, raw_row['success'], uploaded_row['success'], ratio,
        )
    return rows
