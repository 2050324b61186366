"""
Agents exposing start_episode / act / end_episode / policy_table
"""

from typing import Type

from linucb_lab.core.exceptions import InvalidArgumentError
from linucb_lab.services.agents.base import Agent
from linucb_lab.services.agents.baselines import OracleAgent, RandomAgent
from linucb_lab.services.agents.lsvi_plus import LsviPlusAgent, PlusAgentState
from linucb_lab.services.agents.lsvi_ucb import LsviUcbAgent

__all__ = [
    'AGENT_REGISTRY',
    'Agent',
    'LsviPlusAgent',
    'LsviUcbAgent',
    'OracleAgent',
    'PlusAgentState',
    'RandomAgent',
    'get_agent_by_name',
]

AGENT_REGISTRY = {
    LsviPlusAgent.name: LsviPlusAgent,
    LsviUcbAgent.name: LsviUcbAgent,
    RandomAgent.name: RandomAgent,
    OracleAgent.name: OracleAgent,
}


def get_agent_by_name(name: str) -> Type[Agent]:
    """Agent class registered under a config name"""
    if name not in AGENT_REGISTRY:
        raise InvalidArgumentError(f"Unknown agent: {name}")
    return AGENT_REGISTRY[name]
