"""
Background tasks for sweep jobs
"""

import logging
from typing import Any, Dict, List, Sequence, Tuple

from celery import Task

from linucb_lab.config import settings
from linucb_lab.services import bench
from linucb_lab.tasks.celery_app import SWEEP_QUEUE, celery_app

logger = logging.getLogger(__name__)


class CallbackTask(Task):
    """Base task logging the lifecycle of a job"""

    def on_success(self, retval, task_id, args, kwargs):
        seed = args[1] if len(args) > 1 else kwargs.get('seed')
        logger.info(f"Task {self.name} [{task_id}] succeeded for seed {seed}")

    def on_failure(self, exc, task_id, args, kwargs, einfo):
        logger.error(f"Task {self.name} [{task_id}] failed: {exc}")

    def on_retry(self, exc, task_id, args, kwargs, einfo):
        logger.warning(f"Task {self.name} [{task_id}] retrying: {exc}")


@celery_app.task(bind=True, base=CallbackTask, name='linucb_lab.tasks.sweep_tasks.run_seed_job')
def run_seed_job(self, config: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """
    Run one (config, seed) job

    Args:
        config: Experiment config as a plain dictionary
        seed: Run seed

    Returns:
        Serialized records and run metadata (see bench.result_to_payload)
    """
    logger.info(f"Seed job {self.request.id}: seed {seed}")
    return bench.run_seed_job(config, seed)


def dispatch_sweep(config: Dict[str, Any], seeds: Sequence[int]) -> Tuple[Dict[int, Dict], Dict[int, str]]:
    """
    Submit one task per seed and wait for all of them

    Returns:
        (payloads by job index, error messages by job index)
    """
    pending: List[Tuple[int, Any]] = []
    for idx, seed in enumerate(seeds):
        pending.append((idx, run_seed_job.apply_async(args=[config, int(seed)], queue=SWEEP_QUEUE)))
    logger.info(f"Dispatched {len(pending)} seed jobs to queue '{SWEEP_QUEUE}'")

    payloads: Dict[int, Dict] = {}
    failures: Dict[int, str] = {}
    for idx, result in pending:
        try:
            payloads[idx] = result.get(timeout=settings.SWEEP_JOB_TIMEOUT)
        except Exception as e:
            failures[idx] = f"{type(e).__name__}: {e}"
            logger.error(f"Seed job {idx} (seed {seeds[idx]}) failed: {e}")
    return payloads, failures
