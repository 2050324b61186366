"""
Experiment configuration schema (versioned JSON)
"""

from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

CONFIG_VERSION = 1


class HardEnvSpec(BaseModel):
    """Hard-to-learn instance; d counts the sign coordinates plus one"""
    kind: Literal["hard"] = "hard"
    d: int = Field(..., ge=2)
    H: int = Field(..., ge=1)
    mu_mode: Literal["random", "all_plus"] = "random"
    env_seed: Optional[int] = None


class RandomEnvSpec(BaseModel):
    """Random anchor-feature linear MDP"""
    kind: Literal["random"] = "random"
    d: int = Field(..., ge=1)
    H: int = Field(..., ge=1)
    num_states: int = Field(..., ge=1)
    num_actions: int = Field(..., ge=1)
    env_seed: Optional[int] = None

    @model_validator(mode="after")
    def check_rank(self):
        if self.d > self.num_states * self.num_actions:
            raise ValueError("d must not exceed num_states * num_actions")
        return self


class TabularEnvSpec(BaseModel):
    """Model read from a serialized model document"""
    kind: Literal["tabular"] = "tabular"
    path: str

    @field_validator("path")
    @classmethod
    def path_exists(cls, value: str) -> str:
        if not Path(value).is_file():
            raise ValueError(f"model file not found: {value}")
        return value


EnvSpec = Annotated[Union[HardEnvSpec, RandomEnvSpec, TabularEnvSpec], Field(discriminator="kind")]


class AgentSpec(BaseModel):
    name: Literal["plus", "ucb", "random", "oracle"]
    bonus_scale: float = Field(1.0, gt=0)
    delta: float = Field(0.01, gt=0, lt=1)
    lam: Optional[float] = Field(None, gt=0)
    scale_variance_radii: bool = False


class ExperimentConfig(BaseModel):
    """One experiment: an environment, an agent, K episodes per seed"""
    version: Literal[1] = CONFIG_VERSION
    env: EnvSpec
    agent: AgentSpec
    K: int = Field(..., ge=1)
    seeds: List[int] = Field(..., min_length=1)
    parallelism: int = Field(1, ge=1)
    out_dir: Optional[str] = None
    record_wallclock: bool = False
