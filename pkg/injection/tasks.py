import logging

from celery import shared_task

from experiments.models import SimulationRun
from injection.services.harness import GrowthConfig, channel_from_counts, run_trials


logger = logging.getLogger(__name__)

POINT_KEYS = ('d1', 'd2', 'T', 'p', 'trials', 'input_error_rate')


@shared_task(bind=True)
def run_sweep_point(self, run_id):
    try:
        run = SimulationRun.objects.get(pk=run_id)
    except SimulationRun.DoesNotExist:
        return {'ok': False, 'error': 'run_not_found'}

    run.status = SimulationRun.STATUS_PROCESSING
    run.save(update_fields=['status', 'updated_at'])

    try:
        params = run.config.get('params', {})
        config = GrowthConfig(seed=run.seed or 0, **{key: params[key] for key in POINT_KEYS if key in params})
        channel = channel_from_counts(run_trials(config, threads=1))
        results = {**config.as_dict(), **channel.as_dict()}
        run.complete(results)
        return {'ok': True, 'run_id': run.id, 'q_hat': channel.q, 'trials': channel.trials}

    except Exception as exc:
        logger.exception('Sweep point task failed. run_id=%s err=%s', run_id, exc)
        run.fail(exc)
        raise
