"""
Result records written by the benchmark and the concentration lab
"""

from dataclasses import dataclass, field
from typing import List, Optional

from linucb_lab.models.base import RecordMixin

EPISODE_CSV_COLUMNS = [
    "run_id", "seed", "k", "ret", "v_star", "v_pi", "regret_inc",
    "cum_regret", "switched", "mean_sigma_hat", "wall_us",
]

AGGREGATE_CSV_COLUMNS = ["k", "mean_cum_regret", "median", "q25", "q75", "n_seeds"]

TRIAL_CSV_COLUMNS = ["trial_id", "violated", "tightness", "argmax_t"]


@dataclass
class EpisodeRecord(RecordMixin):
    """Telemetry of one episode"""
    run_id: str
    seed: int
    k: int
    ret: float
    v_star: float
    v_pi: float
    regret_inc: float
    cum_regret: float
    switched: bool
    mean_sigma_hat: float
    wall_us: int
    init_state: int = 0
    value_variance: float = 0.0

    def csv_row(self) -> list:
        return [getattr(self, name) for name in EPISODE_CSV_COLUMNS]


@dataclass
class RunResult(RecordMixin):
    """Records and metadata of one (config, seed) job"""
    seed: int
    records: List[EpisodeRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    aborted: Optional[str] = None

    @property
    def final_regret(self) -> float:
        return self.records[-1].cum_regret if self.records else 0.0


@dataclass
class TrialOutcome(RecordMixin):
    """One self-normalized trial: per-step norms against the radius"""
    trial_id: int
    norms: List[float]
    radii: List[float]
    violated: bool
    tightness: float
    argmax_t: int
    max_scaled_noise: float = 0.0


@dataclass
class CheckSummary(RecordMixin):
    """Aggregate of a Monte Carlo check"""
    check: str
    n_trials: int
    violations: int
    rate: float
    delta: float
    mean_tightness: float
    max_tightness: float
    extra: dict = field(default_factory=dict)

    @property
    def rate_within_delta(self) -> bool:
        return self.rate <= self.delta

    def summary_line(self) -> str:
        relation = "<=" if self.rate_within_delta else ">"
        return (f"check={self.check} trials={self.n_trials} violations={self.violations} "
                f"rate={self.rate:.4f} {relation} delta={self.delta:g} "
                f"mean_tightness={self.mean_tightness:.4f} max_tightness={self.max_tightness:.4f}")
