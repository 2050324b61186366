"""
Tasks module initialization
Exports the Celery app and the sweep tasks
"""

from linucb_lab.tasks.celery_app import celery_app
from linucb_lab.tasks.sweep_tasks import dispatch_sweep, run_seed_job

__all__ = [
    'celery_app',
    'dispatch_sweep',
    'run_seed_job',
]

# Task registry for easy access
TASK_REGISTRY = {
    'sweep.run_seed': 'linucb_lab.tasks.sweep_tasks.run_seed_job',
}


def get_task_by_name(task_name: str):
    """Get task function by registry name"""
    if task_name in TASK_REGISTRY:
        return celery_app.tasks[TASK_REGISTRY[task_name]]
    return None
