from linucb_lab.schemas.experiment import (
    AgentSpec,
    ExperimentConfig,
    HardEnvSpec,
    RandomEnvSpec,
    TabularEnvSpec,
)

__all__ = [
    'AgentSpec',
    'ExperimentConfig',
    'HardEnvSpec',
    'RandomEnvSpec',
    'TabularEnvSpec',
]
