"""
Command line entry point.

Every subcommand works inside one run directory ``<out>/<run-id>/`` holding the config
snapshot, ``data/``, ``checkpoints/`` and ``reports/``. Subcommands read the artifacts of
their upstream stages and write new files only.
"""
import argparse
import sys
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd

from .baselines.bc import load_bc, save_bc, train_bc
from .baselines.sl import load_sl, save_sl, train_sl1, train_sl2
from .bench.pipeline import eval_seed, log_data, world_params
from .bench.suite import EXPERIMENT_NAMES, SuiteInputs, run_suite
from .config import (
    RunConfig,
    build_config,
    get_settings,
    parse_overrides,
    read_config_file,
    write_snapshot,
)
from .core.logging_config import LogCategory, LogLevel, bind_run, configure_logging, get_logger
from .error_handling import ConfigMismatchError, StandardErrorResponse, VtlabError
from .gansd.model import GansdSampler
from .gansd.train import load_gansd, save_gansd, train_gansd
from .mail.train import build_virtual_env, load_mail, save_mail, train_mail
from .market.dataset import load_dataset, save_dataset
from .market.metrics import compute_metrics, write_metrics_csv
from .oracle.market import action_norm_report, evaluate_in_oracle, logging_policy
from .oracle.params import load_params, save_params
from .policy_opt.train import load_engine_policy, save_engine_policy, train_engine_policy

logger = get_logger(__name__, LogCategory.CLI)

SNAPSHOT = "config.snapshot"
EVAL_POLICIES = ("rl", "sl1", "sl2", "logging")


@dataclass
class RunContext:
    """Resolved configuration and artifact paths of one run directory."""
    cfg: RunConfig
    root: Path

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    @property
    def dataset_path(self) -> Path:
        return self.data / "log.jsonl"

    @property
    def params_path(self) -> Path:
        return self.data / "oracle_params.json"

    def checkpoint(self, name: str) -> Path:
        return self.checkpoints / f"{name}.vtl"


def flag_overrides(args: argparse.Namespace) -> Dict[str, object]:
    flat: Dict[str, object] = {}
    for flag, key in (("seed", "seed"), ("sessions", "sessions"), ("drift_level", "drift_level"),
                      ("threads", "threads")):
        value = getattr(args, flag, None)
        if value is not None:
            flat[key] = value
    flat.update(parse_overrides(getattr(args, "set", None) or []))
    return flat


def resolve_run(args: argparse.Namespace) -> RunContext:
    """
    Effective configuration = defaults, then the run's existing snapshot, then the config
    file, then flags. A run directory keeps one configuration for all of its subcommands.
    """
    overrides = flag_overrides(args)
    out = Path(args.out or get_settings().out)
    run_id = args.run_id or f"{datetime.now():%Y%m%d-%H%M%S}-seed{overrides.get('seed', 0)}"
    root = out / run_id
    snapshot_path = root / SNAPSHOT

    layers = []
    existing: Optional[RunConfig] = None
    if snapshot_path.exists():
        snapshot = read_config_file(snapshot_path)
        existing = build_config(snapshot)
        layers.append(snapshot)
    if args.config:
        layers.append(read_config_file(args.config))
    layers.append(overrides)
    cfg = build_config(*layers)

    if existing is not None and existing.config_hash() != cfg.config_hash():
        raise ConfigMismatchError(
            f"run '{run_id}' was started with a different configuration",
            details={"run_hash": existing.config_hash(), "requested_hash": cfg.config_hash()},
            suggestions=["use a new --run-id", "drop the conflicting flags"],
        )
    if existing is None:
        write_snapshot(cfg, snapshot_path)
        if build_config(read_config_file(snapshot_path)).config_hash() != cfg.config_hash():
            raise ConfigMismatchError("config snapshot does not reload to the effective configuration")
    bind_run(run_id, cfg.seed)
    logger.info(f"run directory {root} (config {cfg.config_hash()[:12]})")
    return RunContext(cfg, root)


# subcommands

def cmd_gen_data(ctx: RunContext, args: argparse.Namespace) -> None:
    cfg = ctx.cfg
    params = world_params(cfg)
    dataset = log_data(params, cfg, cfg.seed, drift_level=cfg.drift_level)
    save_params(params, ctx.params_path)
    save_dataset(dataset, ctx.dataset_path)
    write_metrics_csv(compute_metrics(dataset), ctx.data / "log_metrics.csv")
    action_norm_report(dataset, cfg.anc.mu).to_csv(ctx.data / "action_norms.csv", index=False)


def cmd_fit_gansd(ctx: RunContext, args: argparse.Namespace) -> None:
    dataset = load_dataset(ctx.dataset_path)
    result = train_gansd(dataset, ctx.cfg.gansd, ctx.cfg.seed)
    save_gansd(result.model, ctx.checkpoint("gansd"))
    _write_curve(result.curve, ctx.reports / "gansd_curve.csv")


def cmd_fit_mail(ctx: RunContext, args: argparse.Namespace) -> None:
    cfg = ctx.cfg
    dataset = load_dataset(ctx.dataset_path)
    gansd = load_gansd(ctx.checkpoint("gansd"))
    result = train_mail(dataset, GansdSampler(gansd), cfg.mail, cfg.trpo, cfg.seed, threads=cfg.threads)
    save_mail(result, ctx.checkpoint("mail"))
    _write_curve(result.curve, ctx.reports / "mail_curve.csv")


def cmd_fit_bc(ctx: RunContext, args: argparse.Namespace) -> None:
    dataset = load_dataset(ctx.dataset_path)
    result = train_bc(dataset, ctx.cfg.bc, ctx.cfg.seed)
    save_bc(result.policy, ctx.checkpoint("bc"))
    _write_curve(result.curve, ctx.reports / "bc_curve.csv")


def _mail_env(ctx: RunContext):
    gansd = load_gansd(ctx.checkpoint("gansd"))
    mail = load_mail(ctx.checkpoint("mail"))
    return build_virtual_env(GansdSampler(gansd), mail.customer_policy, mail.customer_policy.max_index, name="mail")


def cmd_train_rl(ctx: RunContext, args: argparse.Namespace) -> None:
    cfg = ctx.cfg
    params = load_params(ctx.params_path)
    env = _mail_env(ctx)
    anc = cfg.anc if cfg.anc.enabled else None
    result = train_engine_policy(env, cfg.trpo, anc, seed=cfg.seed, threads=cfg.threads,
                                 engine_dim=params.engine_dim)
    save_engine_policy(result.gaussian, ctx.checkpoint("engine"))
    _write_curve(result.curve, ctx.reports / "rl_curve.csv")


def cmd_train_sl(ctx: RunContext, args: argparse.Namespace) -> None:
    cfg = ctx.cfg
    dataset = load_dataset(ctx.dataset_path)
    for name, result in (("sl1", train_sl1(dataset, cfg.sl, cfg.seed)), ("sl2", train_sl2(dataset, cfg.sl, cfg.seed))):
        save_sl(result.policy, ctx.checkpoint(name))
        _write_curve(result.curve, ctx.reports / f"{name}_curve.csv")


def _engine_policy(ctx: RunContext, name: str, params):
    if name == "rl":
        return load_engine_policy(ctx.checkpoint("engine")).deterministic()
    if name in ("sl1", "sl2"):
        return load_sl(ctx.checkpoint(name))
    return logging_policy(params, ctx.cfg.oracle.logging_low, ctx.cfg.oracle.logging_high)


def cmd_eval(ctx: RunContext, args: argparse.Namespace) -> None:
    """Oracle metrics (R2P/TT/TV) and virtual R2P of engine policies on the evaluation stream."""
    cfg = ctx.cfg
    params = load_params(ctx.params_path)
    env = _mail_env(ctx)
    seed = eval_seed(cfg.seed)
    for name in getattr(args, "policy", None) or EVAL_POLICIES:
        policy = _engine_policy(ctx, name, params)
        oracle = evaluate_in_oracle(params, policy, cfg.bench.eval_sessions, seed, threads=cfg.threads)
        write_metrics_csv(oracle, ctx.reports / f"eval_{name}_oracle.csv")
        virtual = env.run_sessions(policy, cfg.bench.eval_sessions, seed, threads=cfg.threads)
        frame = pd.DataFrame({"metric": ["r2p", "n_sessions", "n_records"],
                              "value": [compute_metrics(virtual).r2p, virtual.n_sessions, virtual.n_records]})
        frame.to_csv(ctx.reports / f"eval_{name}_virtual.csv", index=False)
        logger.info(f"{name}: oracle r2p={oracle.r2p:.4f} tt={oracle.tt:.2f} tv={oracle.tv}")


def cmd_report(ctx: RunContext, args: argparse.Namespace) -> None:
    bc_path = ctx.checkpoint("bc")
    inputs = SuiteInputs(
        cfg=ctx.cfg,
        params=load_params(ctx.params_path),
        dataset=load_dataset(ctx.dataset_path),
        gansd=load_gansd(ctx.checkpoint("gansd")),
        mail_customer=load_mail(ctx.checkpoint("mail")).customer_policy,
        bc_customer=load_bc(bc_path) if bc_path.exists() else None,
    )
    reports = run_suite(inputs, ctx.reports, names=getattr(args, "experiments", None))
    failed = [r.experiment for r in reports if not r.passed]
    logger.info(f"{len(reports)} experiments, {len(reports) - len(failed)} passed"
                + (f"; failing: {', '.join(failed)}" if failed else ""))


RUN_ALL_ORDER = ("gen-data", "fit-gansd", "fit-mail", "fit-bc", "train-rl", "train-sl", "eval", "report")


def cmd_run_all(ctx: RunContext, args: argparse.Namespace) -> None:
    for name in RUN_ALL_ORDER:
        logger.info(f"stage {name}")
        COMMANDS[name](ctx, args)


COMMANDS: Dict[str, Callable[[RunContext, argparse.Namespace], None]] = {
    "gen-data": cmd_gen_data,
    "fit-gansd": cmd_fit_gansd,
    "fit-mail": cmd_fit_mail,
    "fit-bc": cmd_fit_bc,
    "train-rl": cmd_train_rl,
    "train-sl": cmd_train_sl,
    "eval": cmd_eval,
    "report": cmd_report,
    "run-all": cmd_run_all,
}

HELP = {
    "gen-data": "log sessions of the logging policy in the ground-truth market",
    "fit-gansd": "train the customer generator on the logged profiles",
    "fit-mail": "learn the customer behavior model by joint adversarial imitation",
    "fit-bc": "behavior-clone the customer policy (baseline)",
    "train-rl": "train the engine policy with TRPO in the learned market",
    "train-sl": "fit the supervised engine policies SL1 and SL2",
    "eval": "evaluate engine policies in the ground-truth and learned markets",
    "report": "run the experiment suite and write reports",
    "run-all": "run every stage in dependency order",
}


def _write_curve(curve: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(path, index=False, float_format="%.10g")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file of dotted key = value lines")
    common.add_argument("--run-id", help="run directory name (default: timestamp and seed)")
    common.add_argument("--out", help="output root (default: $VTLAB_OUT or ./runs)")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--sessions", type=int, help="logged sessions for gen-data")
    common.add_argument("--drift-level", type=float, help="drift level of the ground-truth market in [0, 1]")
    common.add_argument("--threads", type=int, help="worker threads for sharded rollouts")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (repeatable)")
    common.add_argument("--log-level", choices=[level.value for level in LogLevel], help="logging level")

    parser = argparse.ArgumentParser(prog="vtlab", description="Learned marketplace simulation and policy training")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
        if name in ("eval", "run-all"):
            command.add_argument("--policy", action="append", choices=EVAL_POLICIES,
                                 help="engine policy to evaluate (repeatable, default all)")
        if name in ("report", "run-all"):
            command.add_argument("--experiments", nargs="+", choices=EXPERIMENT_NAMES,
                                 help="experiments to run (default all)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(
        LogLevel(args.log_level or settings.log_level.upper()),
        enable_structured_logging=settings.structured_logs,
        log_file=settings.log_file,
    )
    try:
        ctx = resolve_run(args)
        COMMANDS[args.command](ctx, args)
    except VtlabError as exc:
        logger.error(f"{args.command} failed: {exc.message}")
        print(StandardErrorResponse.from_exception(exc).to_json_line(), file=sys.stderr)
        return 1
    except Exception as exc:
        logger.error(f"{args.command} failed unexpectedly: {exc}", exception=exc)
        print(StandardErrorResponse.from_exception(exc).to_json_line(), file=sys.stderr)
        return 1
    return 0


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))


if __name__ == "__main__":
    run()
