"""
Command-line entry point

Subcommands: run, sweep, conclab, validate, gen, plotdata
Exit codes: 0 ok, 1 usage, 2 model validation failure, 3 runtime failure
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from linucb_lab import __version__
from linucb_lab.config import settings
from linucb_lab.core.exceptions import (
    InvalidArgumentError,
    LabError,
    ModelInvalidError,
    SchemaError,
)
from linucb_lab.core.logging import configure_logging
from linucb_lab.schemas.experiment import ExperimentConfig
from linucb_lab.services import bench, conclab, linmdp, results_writer
from linucb_lab.utils.hash_generator import seed_stream
from linucb_lab.utils.helpers import ensure_dir, version_string

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

INLINE_FLAGS = ("env", "d", "H", "K", "agent", "bonus_scale", "delta", "lam",
                "states", "actions", "model", "mu_mode", "env_seed")


class UsageError(Exception):
    """Inconsistent command-line flags"""


class LabArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (UsageError, SchemaError, InvalidArgumentError)):
        return EXIT_USAGE
    if isinstance(exc, ModelInvalidError):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


# === EXPERIMENT CONFIGS ===

def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='Experiment config JSON (excludes the inline flags)')
    parser.add_argument('--env', choices=['hard', 'random', 'tabular'], help='Environment kind')
    parser.add_argument('--d', type=int, help='Feature dimension (hard: sign coordinates plus one)')
    parser.add_argument('--H', type=int, help='Horizon')
    parser.add_argument('--K', type=int, help='Number of episodes')
    parser.add_argument('--states', type=int, help='Random model: number of states')
    parser.add_argument('--actions', type=int, help='Random model: number of actions')
    parser.add_argument('--model', help='Tabular model document')
    parser.add_argument('--mu-mode', choices=['random', 'all_plus'], help='Hard instance μ̄ signs')
    parser.add_argument('--env-seed', type=int, help='Seed of the generated environment')
    parser.add_argument('--agent', choices=['plus', 'ucb', 'random', 'oracle'], help='Agent')
    parser.add_argument('--bonus-scale', type=float, help='Multiplier on the exploration bonus')
    parser.add_argument('--delta', type=float, help='Confidence level δ')
    parser.add_argument('--lambda', dest='lam', type=float, help='Regularizer λ')
    parser.add_argument('--scale-variance-radii', action='store_true',
                        help='Apply --bonus-scale to the variance-estimation radii too')
    parser.add_argument('--wallclock', action='store_true', help='Record per-episode wallclock')


def _inline_config(args: argparse.Namespace, seeds: List[int]) -> dict:
    env_kind = args.env or "hard"
    required = {"hard": ("d", "H"), "random": ("d", "H", "states", "actions"), "tabular": ("model",)}[env_kind]
    missing = [name for name in ("K",) + required if getattr(args, name) is None]
    if missing:
        raise UsageError(f"missing required flags without --config: {', '.join('--' + m for m in missing)}")

    if env_kind == "hard":
        env = {"kind": "hard", "d": args.d, "H": args.H, "mu_mode": args.mu_mode or "random",
               "env_seed": args.env_seed}
    elif env_kind == "random":
        env = {"kind": "random", "d": args.d, "H": args.H, "num_states": args.states,
               "num_actions": args.actions, "env_seed": args.env_seed}
    else:
        env = {"kind": "tabular", "path": args.model}

    agent = {"name": args.agent or "plus", "scale_variance_radii": args.scale_variance_radii}
    for key, value in (("bonus_scale", args.bonus_scale), ("delta", args.delta), ("lam", args.lam)):
        if value is not None:
            agent[key] = value

    return {
        "version": 1,
        "env": env,
        "agent": agent,
        "K": args.K,
        "seeds": seeds,
        "parallelism": getattr(args, "parallelism", None) or 1,
        "out_dir": args.out,
        "record_wallclock": args.wallclock,
    }


def _load_experiment(args: argparse.Namespace, seeds: Optional[List[int]]) -> ExperimentConfig:
    if args.config:
        given = [name for name in INLINE_FLAGS if getattr(args, name) is not None]
        if args.scale_variance_radii:
            given.append("scale_variance_radii")
        if given:
            raise UsageError(f"--config cannot be combined with inline flags: {', '.join(given)}")
        cfg = results_writer.read_config(args.config)
        update = {}
        if seeds:
            update["seeds"] = seeds
        if args.wallclock:
            update["record_wallclock"] = True
        if getattr(args, "parallelism", None):
            update["parallelism"] = args.parallelism
        return cfg.model_copy(update=update) if update else cfg
    return results_writer.parse_config(_inline_config(args, seeds or [args.seed]))


def _out_dir(args: argparse.Namespace, default: str) -> Path:
    return Path(args.out) if args.out else Path(settings.OUTPUT_DIR) / default


# === SUBCOMMANDS ===

def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_experiment(args, None)
    seed = args.seed if args.config is None or args.seed_given else cfg.seeds[0]
    result = bench.run_experiment(cfg, seed)
    out = _out_dir(args, "run")
    bench.write_run_outputs(result, out)
    print(f"run_id={result.metadata['run_id']} episodes={len(result.records)} "
          f"final_cum_regret={result.final_regret:.6f} switches={result.metadata['switch_count']} out={out}")
    if result.aborted:
        print(f"aborted: {result.aborted}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    seeds = args.seeds or ([args.seed + i for i in range(args.num_seeds)] if args.num_seeds else None)
    cfg = _load_experiment(args, seeds)

    mdp = bench.build_environment(cfg.env, cfg.K, cfg.seeds[0])
    report = linmdp.validate(mdp)
    if not report.ok:
        raise ModelInvalidError(f"Environment failed validation: {', '.join(report.names())}", report)

    result = bench.sweep(cfg, parallelism=args.parallelism, backend=args.backend)
    out = _out_dir(args, "sweep")
    bench.write_sweep_outputs(result, cfg, out)
    completed = result.completed()
    print(f"seeds={len(cfg.seeds)} completed={len(completed)} failed={len(result.failures)} out={out}")
    if not result.aggregate.empty:
        last = result.aggregate.iloc[-1]
        print(f"k={int(last['k'])} mean_cum_regret={last['mean_cum_regret']:.6f} "
              f"median={last['median']:.6f} n_seeds={int(last['n_seeds'])}")
    return EXIT_RUNTIME if result.failures else EXIT_OK


def cmd_conclab(args: argparse.Namespace) -> int:
    workers = settings.resolve_parallelism(args.workers)
    check = args.check
    if check in conclab.BOUNDS:
        spec = conclab.MartingaleSpec(
            d=args.d, T=args.T, lam=args.lam, l2_cap=args.l2_cap, sigma=args.sigma, r_cap=args.r_cap,
            noise_model=args.noise, feature_model=args.features,
        )
        summary, outcomes = conclab.violation_rate(spec, args.delta, args.trials, seed=args.seed, bound=check,
                                                   workers=workers)
    elif check == "elliptical":
        summary, outcomes = conclab.elliptical_sweep(
            args.d, args.T, args.l2_cap, args.lam, args.c, args.features, args.trials, seed=args.seed,
            workers=workers, raise_on_violation=False,
        )
    else:
        runner = {"azuma": conclab.azuma_check, "freedman": conclab.freedman_check,
                  "uniform_bernstein": conclab.uniform_bernstein_check}[check]
        summary, outcomes = runner(args.T, args.c, args.delta, args.trials, seed=args.seed,
                                   step_model=args.step_model, p=args.p, workers=workers)

    out = _out_dir(args, f"conclab_{check}")
    ensure_dir(out)
    results_writer.write_trials_csv(outcomes, out / "trials.csv")
    results_writer.write_metadata({
        "summary": summary.to_dict(),
        "args": {k: v for k, v in vars(args).items() if k != "handler"},
        "version": version_string(),
    }, out / "summary.json")
    print(summary.summary_line())

    if check == "elliptical" and summary.violations:
        print("pathwise elliptical potential bound violated", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    mdp = linmdp.load_model(args.model)
    report = linmdp.validate(mdp)
    if args.out:
        results_writer.write_metadata({"model": str(args.model), "ok": report.ok, **report.to_dict()}, args.out)
    if report.ok:
        print(f"model {args.model}: ok")
        return EXIT_OK
    print(f"model {args.model}: invalid")
    print(report.summary())
    return EXIT_VALIDATION


def cmd_gen(args: argparse.Namespace) -> int:
    rng = seed_stream(args.seed, bench.ENV_STREAM)
    if args.env == "hard":
        if args.d is None or args.H is None or args.K is None:
            raise UsageError("gen --env hard needs --d, --H and --K")
        mdp = linmdp.make_hard_instance(args.d - 1, args.H, args.K, rng, mu_mode=args.mu_mode)
    else:
        if None in (args.d, args.H, args.states, args.actions):
            raise UsageError("gen --env random needs --d, --H, --states and --actions")
        mdp = linmdp.make_random_linear_mdp(args.d, args.H, args.states, args.actions, rng)
    path = linmdp.save_model(mdp, args.out)
    print(f"wrote {mdp!r} to {path}")
    return EXIT_OK


def cmd_plotdata(args: argparse.Namespace) -> int:
    table = results_writer.plot_table(args.inputs, args.labels or ())
    out = Path(args.out) if args.out else Path(settings.OUTPUT_DIR) / "plotdata.csv"
    results_writer.write_plot_table(table, out)
    print(f"wrote {len(table)} rows to {out}")
    return EXIT_OK


# === PARSER ===

class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def build_parser() -> LabArgumentParser:
    parser = LabArgumentParser(prog='linucb-lab', description='Linear MDP regret and concentration lab')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default=None, help='Log level (default from LOG_LEVEL)')
    parser.add_argument('--log-format', choices=['console', 'json'], default=None, help='Log format')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=LabArgumentParser)

    def common(sub: argparse.ArgumentParser, out_help: str) -> None:
        sub.add_argument('--seed', type=int, default=0, action=_SeedAction, help='Random seed')
        sub.add_argument('--out', help=out_help)
        sub.set_defaults(seed_given=False)

    run = subparsers.add_parser('run', help='Run one agent on one environment')
    _add_experiment_flags(run)
    common(run, 'Output directory')
    run.set_defaults(handler=cmd_run)

    sweep = subparsers.add_parser('sweep', help='Run a config over many seeds')
    _add_experiment_flags(sweep)
    sweep.add_argument('--seeds', type=int, nargs='+', help='Explicit seed list')
    sweep.add_argument('--num-seeds', type=int, help='Use seeds --seed .. --seed + N - 1')
    sweep.add_argument('--parallelism', type=int, help='Worker count (LINUCB_LAB_THREADS overrides)')
    sweep.add_argument('--backend', choices=['local', 'celery'], help='Sweep backend')
    common(sweep, 'Output directory')
    sweep.set_defaults(handler=cmd_sweep)

    lab = subparsers.add_parser('conclab', help='Monte Carlo check of a concentration inequality')
    lab.add_argument('--check', required=True,
                     choices=['bernstein', 'hoeffding', 'elliptical', 'azuma', 'freedman', 'uniform_bernstein'])
    lab.add_argument('--d', type=int, default=2, help='Dimension')
    lab.add_argument('--T', type=int, default=200, help='Path length')
    lab.add_argument('--trials', type=int, default=1000, help='Number of trials')
    lab.add_argument('--delta', type=float, default=0.05, help='Confidence level δ')
    lab.add_argument('--lambda', dest='lam', type=float, default=1.0, help='Regularizer λ')
    lab.add_argument('--l2-cap', type=float, default=1.0, help='Feature norm L')
    lab.add_argument('--sigma', type=float, default=1.0, help='Noise second-moment cap σ')
    lab.add_argument('--r-cap', type=float, default=1.0, help='Cap R on the scaled noise')
    lab.add_argument('--noise', choices=list(conclab.NOISE_MODELS), default='uniform')
    lab.add_argument('--features', choices=list(conclab.FEATURE_MODELS), default='iid_sphere')
    lab.add_argument('--c', type=float, default=1.0, help='Potential threshold or increment cap')
    lab.add_argument('--step-model', choices=list(conclab.STEP_MODELS), default='rademacher')
    lab.add_argument('--p', type=float, default=0.01, help='Hit probability of variance-starved steps')
    lab.add_argument('--workers', type=int, default=1, help='Worker processes')
    common(lab, 'Output directory')
    lab.set_defaults(handler=cmd_conclab)

    val = subparsers.add_parser('validate', help='Check a model document against the assumptions')
    val.add_argument('--model', required=True, help='Model document')
    common(val, 'Write the report as JSON to this path')
    val.set_defaults(handler=cmd_validate)

    gen = subparsers.add_parser('gen', help='Generate a model document')
    gen.add_argument('--env', choices=['hard', 'random'], required=True)
    gen.add_argument('--d', type=int, help='Feature dimension (hard: sign coordinates plus one)')
    gen.add_argument('--H', type=int, help='Horizon')
    gen.add_argument('--K', type=int, help='Hard instance: episodes it is tuned for')
    gen.add_argument('--states', type=int, help='Random model: number of states')
    gen.add_argument('--actions', type=int, help='Random model: number of actions')
    gen.add_argument('--mu-mode', choices=['random', 'all_plus'], default='random')
    gen.add_argument('--seed', type=int, default=0, help='Random seed')
    gen.add_argument('--out', required=True, help='Model document path')
    gen.set_defaults(handler=cmd_gen)

    plot = subparsers.add_parser('plotdata', help='Reshape aggregate CSVs into a long table')
    plot.add_argument('--in', dest='inputs', nargs='+', required=True, help='Aggregate CSV files')
    plot.add_argument('--labels', nargs='+', help='Series names, one per input')
    common(plot, 'Output CSV path')
    plot.set_defaults(handler=cmd_plotdata)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and map errors onto exit codes"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.log_level, args.log_format)
    try:
        return args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"linucb-lab {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ModelInvalidError as e:
        print(f"validation failed: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except LabError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)
    except OSError as e:
        logger.error(f"{args.command} failed on I/O: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
