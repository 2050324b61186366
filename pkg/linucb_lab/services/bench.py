"""
Benchmark orchestration: seeded runs with exact per-episode regret,
multi-seed sweeps, aggregation and regret-exponent fitting
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from linucb_lab import __version__
from linucb_lab.config import settings
from linucb_lab.core.exceptions import (
    InvalidArgumentError,
    LemmaViolationError,
    ModelInvalidError,
    NumericFailureError,
)
from linucb_lab.models.base import RecordMixin
from linucb_lab.models.linear_mdp import LinearMdp, Trajectory, ValueTables
from linucb_lab.models.records import AGGREGATE_CSV_COLUMNS, EpisodeRecord, RunResult
from linucb_lab.schemas.experiment import AgentSpec, ExperimentConfig
from linucb_lab.services import results_writer
from linucb_lab.services.agents import Agent, get_agent_by_name
from linucb_lab.services.linmdp import (
    conditional_variance,
    evaluate_policy,
    load_model,
    make_hard_instance,
    make_random_linear_mdp,
    model_to_document,
    optimal_values,
    rollout,
    sample_initial_state,
    validate,
)
from linucb_lab.services.radii import switch_count_bound
from linucb_lab.utils.hash_generator import generate_config_hash, generate_model_hash, generate_run_id, seed_stream
from linucb_lab.utils.helpers import ensure_dir, version_string

logger = logging.getLogger(__name__)

# Substreams derived from the run seed
ENV_STREAM = 0
SAMPLING_STREAM = 1
AGENT_STREAM = 2

REGRET_SLACK = 1e-9
MIN_FIT_POINTS = 20

Observer = Callable[[int, Agent, Trajectory], None]


# === BUILDERS ===

def build_environment(env_spec, K: int, seed: int) -> LinearMdp:
    """Environment of a run; generated models use env_seed when given, else the run seed"""
    if env_spec.kind == "tabular":
        return load_model(env_spec.path)

    rng = seed_stream(env_spec.env_seed if env_spec.env_seed is not None else seed, ENV_STREAM)
    if env_spec.kind == "hard":
        return make_hard_instance(env_spec.d - 1, env_spec.H, K, rng, mu_mode=env_spec.mu_mode)
    if env_spec.kind == "random":
        return make_random_linear_mdp(env_spec.d, env_spec.H, env_spec.num_states, env_spec.num_actions, rng)
    raise InvalidArgumentError(f"Unknown environment kind: {env_spec.kind}")


def build_agent(spec: AgentSpec, mdp: LinearMdp, K: int, seed: int,
                optimal: Optional[ValueTables] = None) -> Agent:
    """Instantiate the agent named in the agent config"""
    agent_cls = get_agent_by_name(spec.name)
    return agent_cls.from_spec(spec, mdp, K, seed_stream(seed, AGENT_STREAM), optimal)


# === SINGLE RUN ===

def _episode_value_variance(mdp: LinearMdp, values: ValueTables, trajectory: Trajectory) -> float:
    total = 0.0
    for h, step in enumerate(trajectory):
        total += float(conditional_variance(mdp, h, values.v[h + 1])[step.state, step.action])
    return total


def run_experiment(cfg: ExperimentConfig, seed: int, observer: Optional[Observer] = None,
                   record_wallclock: Optional[bool] = None) -> RunResult:
    """
    Run K episodes of one agent on one environment

    Args:
        cfg: Experiment config
        seed: Run seed; all randomness derives from it
        observer: Optional callback (k, agent, trajectory) after every episode
        record_wallclock: Fill wall_us; defaults to cfg.record_wallclock or settings.RECORD_WALLCLOCK

    Returns:
        RunResult with one EpisodeRecord per episode; `aborted` holds the error
        message when the agent hit a numeric failure (records up to that point are kept)
    """
    if record_wallclock is None:
        record_wallclock = cfg.record_wallclock or settings.RECORD_WALLCLOCK
    started = time.perf_counter()

    mdp = build_environment(cfg.env, cfg.K, seed)
    report = validate(mdp)
    if not report.ok:
        raise ModelInvalidError(f"Environment failed validation: {', '.join(report.names())}", report)

    optimal = optimal_values(mdp)
    agent = build_agent(cfg.agent, mdp, cfg.K, seed, optimal)
    env_rng = seed_stream(seed, SAMPLING_STREAM)
    config_dict = cfg.model_dump(mode="json")
    run_id = generate_run_id(config_dict, seed)

    records: List[EpisodeRecord] = []
    cum_regret = 0.0
    aborted = None
    logger.info(f"Run {run_id}: agent={cfg.agent.name}, env={cfg.env.kind}, K={cfg.K}, seed={seed}")

    try:
        for k in range(1, cfg.K + 1):
            tick = time.perf_counter_ns()
            agent.start_episode()
            s1 = sample_initial_state(mdp, env_rng)
            values_pi = evaluate_policy(mdp, agent.policy_table())
            v_star = float(optimal.v[0, s1])
            v_pi = float(values_pi.v[0, s1])

            trajectory = rollout(mdp, agent.act, env_rng, initial_state=s1)
            agent.end_episode(trajectory)

            regret_inc = v_star - v_pi
            if regret_inc < -REGRET_SLACK:
                logger.warning(f"Run {run_id} episode {k}: policy value exceeds V* by {-regret_inc:.3e}")
            cum_regret += regret_inc
            info = agent.episode_info()
            wall_us = (time.perf_counter_ns() - tick) // 1000 if record_wallclock else 0

            records.append(EpisodeRecord(
                run_id=run_id,
                seed=int(seed),
                k=k,
                ret=trajectory.episode_return,
                v_star=v_star,
                v_pi=v_pi,
                regret_inc=regret_inc,
                cum_regret=cum_regret,
                switched=bool(info["switched"]),
                mean_sigma_hat=info["mean_sigma_hat"],
                wall_us=int(wall_us),
                init_state=int(s1),
                value_variance=_episode_value_variance(mdp, values_pi, trajectory),
            ))
            if observer is not None:
                observer(k, agent, trajectory)
    except NumericFailureError as e:
        aborted = str(e)
        logger.error(f"Run {run_id} aborted at episode {len(records) + 1}: {e}")

    switch_count = sum(1 for r in records if r.switched)
    switch_bound = switch_count_bound(mdp.dim, mdp.horizon, cfg.K)
    if cfg.agent.name == "plus" and switch_count > switch_bound:
        raise LemmaViolationError(
            f"Run {run_id}: {switch_count} policy switches exceed the bound dH·log(1+K) = {switch_bound:.2f}"
        )

    metadata = {
        "run_id": run_id,
        "seed": int(seed),
        "config": config_dict,
        "version": version_string(),
        "package_version": __version__,
        "model_hash": generate_model_hash(model_to_document(mdp)),
        "model": {"H": mdp.horizon, "S": mdp.num_states, "A": mdp.num_actions, "d": mdp.dim,
                  "W": mdp.w_bound, "meta": mdp.meta},
        "agent": agent.metadata(),
        "episodes": len(records),
        "final_cum_regret": cum_regret,
        "switch_count": switch_count,
        "switch_bound": switch_bound,
        "switch_bound_ok": switch_count <= switch_bound,
        "elapsed_seconds": time.perf_counter() - started,
        "aborted": aborted,
    }
    logger.info(f"Run {run_id} finished: {len(records)} episodes, regret {cum_regret:.4f}, switches {switch_count}")
    return RunResult(seed=int(seed), records=records, metadata=metadata, aborted=aborted)


def result_to_payload(result: RunResult) -> Dict[str, Any]:
    """Plain-dict form of a RunResult, safe for process and task transport"""
    return {
        "seed": result.seed,
        "records": [r.to_dict() for r in result.records],
        "metadata": result.metadata,
        "aborted": result.aborted,
    }


def result_from_payload(payload: Dict[str, Any]) -> RunResult:
    records = [EpisodeRecord(**r) for r in payload.get("records", [])]
    return RunResult(seed=int(payload["seed"]), records=records,
                     metadata=payload.get("metadata", {}), aborted=payload.get("aborted"))


def run_seed_job(config: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """Worker entry point: validate the config dict and run one seed"""
    cfg = results_writer.parse_config(config)
    return result_to_payload(run_experiment(cfg, seed))


# === SWEEPS ===

@dataclass
class SweepResult:
    """Outcome of a multi-seed sweep; job indices follow cfg.seeds"""
    seeds: List[int]
    results: Dict[int, RunResult] = field(default_factory=dict)
    failures: Dict[int, str] = field(default_factory=dict)
    aggregate: pd.DataFrame = None

    def completed(self) -> List[RunResult]:
        return [self.results[i] for i in sorted(self.results) if self.results[i].aborted is None]


def _run_local(config: Dict[str, Any], seeds: Sequence[int], workers: int) -> Tuple[Dict[int, Dict], Dict[int, str]]:
    payloads: Dict[int, Dict] = {}
    failures: Dict[int, str] = {}
    if workers <= 1:
        for idx, seed in enumerate(seeds):
            try:
                payloads[idx] = run_seed_job(config, seed)
            except Exception as e:
                failures[idx] = f"{type(e).__name__}: {e}"
                logger.error(f"Sweep job {idx} (seed {seed}) failed: {e}")
        return payloads, failures

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run_seed_job, config, seed): idx for idx, seed in enumerate(seeds)}
        for future in as_completed(futures):
            idx = futures[future]
            try:
                payloads[idx] = future.result()
            except Exception as e:
                failures[idx] = f"{type(e).__name__}: {e}"
                logger.error(f"Sweep job {idx} (seed {seeds[idx]}) failed: {e}")
    return payloads, failures


def sweep(cfg: ExperimentConfig, parallelism: Optional[int] = None, backend: Optional[str] = None) -> SweepResult:
    """
    Run every seed of the config and aggregate cumulative regret

    Args:
        cfg: Experiment config
        parallelism: Worker count; LINUCB_LAB_THREADS overrides it
        backend: "local" (process pool) or "celery"; defaults to settings.SWEEP_BACKEND

    Returns:
        SweepResult; failed jobs are listed in `failures` and left out of the aggregate
    """
    seeds = list(cfg.seeds)
    workers = settings.resolve_parallelism(parallelism or cfg.parallelism)
    backend = backend or settings.SWEEP_BACKEND
    config = cfg.model_dump(mode="json")
    logger.info(f"Sweep {generate_config_hash(config)}: {len(seeds)} seeds, backend={backend}, workers={workers}")

    if backend == "celery":
        from linucb_lab.tasks.sweep_tasks import dispatch_sweep
        payloads, failures = dispatch_sweep(config, seeds)
    elif backend == "local":
        payloads, failures = _run_local(config, seeds, workers)
    else:
        raise InvalidArgumentError(f"Unknown sweep backend: {backend}")

    result = SweepResult(seeds=seeds, failures=dict(failures))
    for idx, payload in payloads.items():
        run = result_from_payload(payload)
        result.results[idx] = run
        if run.aborted is not None:
            result.failures[idx] = f"aborted: {run.aborted}"
    result.aggregate = aggregate_runs(result.completed())
    logger.info(f"Sweep finished: {len(result.completed())} completed, {len(result.failures)} failed")
    return result


def aggregate_runs(runs: Sequence[RunResult]) -> pd.DataFrame:
    """
    Per-episode statistics of cumulative regret across runs

    Values are sorted across runs before reducing, so the result does not
    depend on the order of the runs.
    """
    runs = [r for r in runs if r.records]
    if not runs:
        return pd.DataFrame(columns=AGGREGATE_CSV_COLUMNS)

    frame = pd.concat(
        [pd.Series([rec.cum_regret for rec in r.records], index=[rec.k for rec in r.records]) for r in runs],
        axis=1,
    ).sort_index()
    values = np.sort(frame.to_numpy(dtype=np.float64), axis=1)
    n_seeds = np.sum(~np.isnan(values), axis=1)
    return pd.DataFrame({
        "k": frame.index.astype(int),
        "mean_cum_regret": np.nanmean(values, axis=1),
        "median": np.nanmedian(values, axis=1),
        "q25": np.nanquantile(values, 0.25, axis=1),
        "q75": np.nanquantile(values, 0.75, axis=1),
        "n_seeds": n_seeds.astype(int),
    }, columns=AGGREGATE_CSV_COLUMNS)


# === DIAGNOSTICS ===

@dataclass
class RegretFit(RecordMixin):
    """cum_regret(k) ≈ a · k^b over the second half of the series"""
    a: float
    b: float
    fitted: bool
    n_points: int
    reason: str = ""


def fit_regret_exponent(series: Sequence[float]) -> RegretFit:
    """
    Least-squares fit of log cum_regret against log k

    Args:
        series: Cumulative regret for k = 1 .. n (n ≥ 20)

    Returns:
        RegretFit; `fitted` is False when the fitted half has nonpositive values
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1 or y.size < MIN_FIT_POINTS:
        raise InvalidArgumentError(f"Need at least {MIN_FIT_POINTS} points to fit a regret exponent")
    k = np.arange(1, y.size + 1, dtype=np.float64)
    start = y.size // 2
    k_half, y_half = k[start:], y[start:]
    if np.any(y_half <= 0) or not np.all(np.isfinite(y_half)):
        logger.info("Regret exponent fit skipped: nonpositive values in the fitted range")
        return RegretFit(a=math.nan, b=math.nan, fitted=False, n_points=int(y_half.size),
                         reason="nonpositive values")
    b, log_a = np.polyfit(np.log(k_half), np.log(y_half), 1)
    return RegretFit(a=float(np.exp(log_a)), b=float(b), fitted=True, n_points=int(y_half.size))


# === OUTPUTS ===

def write_run_outputs(result: RunResult, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out = ensure_dir(out_dir)
    paths = {
        "episodes": results_writer.write_csv(result.records, out / "episodes.csv"),
        "jsonl": results_writer.write_jsonl(result.records, out / "episodes.jsonl"),
        "metadata": results_writer.write_metadata(result.metadata, out / "metadata.json"),
    }
    return paths


def write_sweep_outputs(result: SweepResult, cfg: ExperimentConfig, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out = ensure_dir(out_dir)
    paths: Dict[str, Path] = {}
    per_seed = []
    for idx in sorted(result.results):
        run = result.results[idx]
        name = f"episodes_{idx:03d}_seed{run.seed}.csv"
        paths[name] = results_writer.write_csv(run.records, out / name)
        fit = fit_regret_exponent([r.cum_regret for r in run.records]) if len(run.records) >= MIN_FIT_POINTS else None
        per_seed.append({
            "job": idx,
            "seed": run.seed,
            "run_id": run.metadata.get("run_id"),
            "episodes": len(run.records),
            "final_cum_regret": run.final_regret,
            "switch_count": run.metadata.get("switch_count"),
            "switch_bound_ok": run.metadata.get("switch_bound_ok"),
            "regret_fit": fit.to_dict() if fit else None,
            "aborted": run.aborted,
        })
    paths["aggregate"] = results_writer.write_aggregate_csv(result.aggregate, out / "aggregate.csv")
    if result.failures:
        paths["failures"] = results_writer.write_metadata(
            {str(idx): msg for idx, msg in sorted(result.failures.items())}, out / "failures.json")

    metadata = {
        "config": cfg.model_dump(mode="json"),
        "config_hash": generate_config_hash(cfg.model_dump(mode="json")),
        "seeds": result.seeds,
        "version": version_string(),
        "package_version": __version__,
        "per_seed": per_seed,
        "failures": {str(idx): msg for idx, msg in sorted(result.failures.items())},
    }
    paths["metadata"] = results_writer.write_metadata(metadata, out / "metadata.json")
    return paths
