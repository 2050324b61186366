"""
Celery application for distributed sweeps
Seed jobs run on workers fed from a Redis broker
"""

import re
import logging

from celery import Celery
from kombu import Queue

from linucb_lab.config import settings
from linucb_lab.core.logging import build_logging_config

logger = logging.getLogger(__name__)

SWEEP_QUEUE = 'sweeps'


def create_celery_app() -> Celery:
    """Create and configure the Celery application"""

    celery_app = Celery('linucb_lab')

    celery_app.conf.update(
        broker_url=settings.CELERY_BROKER_URL,
        result_backend=settings.CELERY_RESULT_BACKEND,

        # Task serialization
        task_serializer='json',
        accept_content=['json'],
        result_serializer='json',
        timezone=settings.CELERY_TIMEZONE,
        enable_utc=True,

        # Task routing and queues
        task_routes={
            'linucb_lab.tasks.sweep_tasks.run_seed_job': {'queue': SWEEP_QUEUE},
        },
        task_default_queue='default',
        task_queues=(
            Queue('default', routing_key='default'),
            Queue(SWEEP_QUEUE, routing_key=SWEEP_QUEUE),
        ),

        # One seed job is long and CPU-bound
        worker_prefetch_multiplier=1,
        task_acks_late=True,
        task_reject_on_worker_lost=True,
        task_soft_time_limit=settings.SWEEP_JOB_TIMEOUT,
        task_time_limit=settings.SWEEP_JOB_TIMEOUT + 60,

        # Result settings
        result_expires=24 * 3600,
        task_ignore_result=False,

        # Inline execution for tests and single-machine debugging
        task_always_eager=settings.CELERY_TASK_ALWAYS_EAGER,

        broker_connection_retry_on_startup=True,
    )

    _configure_celery_logging(celery_app)
    celery_app.autodiscover_tasks(['linucb_lab.tasks'], related_name='sweep_tasks')

    logger.info(f"Celery app configured with broker: {_mask_credentials(settings.CELERY_BROKER_URL)}")
    return celery_app


def _configure_celery_logging(celery_app: Celery):
    """Route worker logging through the structured config"""
    from celery.signals import setup_logging

    @setup_logging.connect(weak=False)
    def config_loggers(*args, **kwargs):
        from logging.config import dictConfig

        dictConfig(build_logging_config())


def _mask_credentials(url: str) -> str:
    """Mask credentials in URL for logging"""
    return re.sub(r'://([^:]+):([^@]+)@', '://***:***@', url)


# Create global Celery instance
celery_app = create_celery_app()
