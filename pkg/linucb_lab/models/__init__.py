from linucb_lab.models.linear_mdp import (
    LinearMdp,
    Step,
    Trajectory,
    ValidationReport,
    ValueTables,
    Violation,
)
from linucb_lab.models.records import CheckSummary, EpisodeRecord, RunResult, TrialOutcome

__all__ = [
    'LinearMdp',
    'Step',
    'Trajectory',
    'ValidationReport',
    'ValueTables',
    'Violation',
    'CheckSummary',
    'EpisodeRecord',
    'RunResult',
    'TrialOutcome',
]
