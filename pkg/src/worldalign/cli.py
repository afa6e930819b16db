"""Command-line harness: simulate, ablate-limit, coverage-curve, inspect,
prune.

Every run writes a self-describing output directory (manifest with the spec
echo, per-trial artifacts, aggregate summary) whose files the `inspect`
subcommand can all render back.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .agent import EpisodeInterrupted, run_episode, score
from .artifacts import SchemaError, inspect_path, write_json, write_text
from .core import DEFAULT_TOOL_TIERS, Outcome, Transition
from .env.config import (
    ACHIEVEMENTS,
    CONFIG_IDS,
    TARGET_CHAIN_ACHIEVEMENT,
    UnsolvableConfig,
    load_config,
)
from .experiments import (
    coverage_curve,
    episode_seed,
    mean_std,
    run_ablation,
    standard_components,
)
from .graphs import KnowledgeGraph
from .learner import (
    LearnerState,
    RuleSet,
    build_matrix,
    prune_trace,
)
from .proposers import NoisyOracleProposer, OracleProposer
from .world_model import BackendUnavailable

log = logging.getLogger(__name__)


@dataclass
class ExperimentSpec:
    config_id: str = "default"
    seed: int = 1
    trials: int = 1
    iterations: int = 1
    out: str = "runs/out"
    rule_limit: int = 6
    replan_limit: int = 3
    cadence: str = "episode"
    proposer: str = "oracle"  # oracle | noisy | backend | none
    predictor: str = "naive"  # naive | backend
    planner: str = "scripted"  # scripted | backend
    noise: float = 0.3
    target: str | None = TARGET_CHAIN_ACHIEVEMENT
    workers: int = 1

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.rule_limit < 1:
            raise ValueError("rule limit must be >= 1")
        if self.config_id not in CONFIG_IDS and not Path(self.config_id).exists():
            raise ValueError(
                f"unknown config {self.config_id!r}; ids: {', '.join(CONFIG_IDS)}"
            )
        load_config(self.config_id)  # raises UnsolvableConfig early

    def to_json(self) -> dict:
        return asdict(self)


def _target_product(target: str | None) -> str:
    if target and target.startswith("make_"):
        return target[len("make_"):]
    return "iron_pickaxe"


def _run_one_trial(spec_json: dict, trial_index: int) -> dict:
    """Top-level worker: runs one trial and writes its artifacts."""
    spec = ExperimentSpec(**spec_json)
    config = load_config(spec.config_id)
    trial_seed = spec.seed + trial_index
    build = standard_components(
        rule_proposer_kind=spec.proposer,
        predictor_kind=spec.predictor,
        planner_kind=spec.planner,
        noise=spec.noise,
        limit=spec.rule_limit,
        replan_limit=spec.replan_limit,
        cadence=spec.cadence,
        target_product=_target_product(spec.target),
        proposer_seed=trial_seed,
    )
    trial_dir = Path(spec.out) / f"trial_{trial_index:02d}"
    rows = []
    state: LearnerState | None = None
    for iteration in range(spec.iterations):
        episode_config = config.with_seed(episode_seed(trial_seed, iteration))
        components = build(episode_config)
        if state is None:
            state = LearnerState(rules=RuleSet((), components.learner_config.limit))
        iter_dir = trial_dir / f"iter_{iteration:02d}"
        try:
            result = run_episode(episode_config, state, components, target=spec.target)
        except EpisodeInterrupted as exc:
            write_json(iter_dir / "checkpoint.json", exc.checkpoint.to_json())
            raise
        write_text(iter_dir / "trajectory.ndjson", result.real.to_ndjson())
        write_text(iter_dir / "predicted.ndjson", result.predicted.to_ndjson())
        write_json(iter_dir / "metrics.json", result.metrics)
        write_json(iter_dir / "rules.json", state.rules.to_json())
        write_json(iter_dir / "kg.json", state.kg.to_json())
        write_json(iter_dir / "sg.json", state.sg.to_json())
        matrix = build_matrix(
            state.rules.entries, state.mispredictions, state.kg, state.sg,
            tool_tiers=episode_config.effective().tool_tiers,
        )
        coverage_doc = matrix.to_json()
        coverage_doc["selection"] = [
            {"rule_id": s.rule_id, "gain": s.gain} for s in state.last_trace
        ]
        coverage_doc["limit"] = spec.rule_limit
        write_json(iter_dir / "coverage.json", coverage_doc)
        rows.append({"trial": trial_index, "iteration": iteration, **result.metrics})
    return {"trial": trial_index, "rows": rows}


def cmd_simulate(spec: ExperimentSpec) -> int:
    spec.validate()
    out = Path(spec.out)
    write_json(out / "manifest.json", {"version": __version__, "spec": spec.to_json()})
    spec_json = spec.to_json()
    results: list[dict] = []
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [
                pool.submit(_run_one_trial, spec_json, t) for t in range(spec.trials)
            ]
            results = [f.result() for f in futures]
    else:
        for t in range(spec.trials):
            results.append(_run_one_trial(spec_json, t))

    rows = [row for result in sorted(results, key=lambda r: r["trial"]) for row in result["rows"]]
    write_json(out / "rows.json", rows)
    summary = {}
    for key in ("reward", "score", "cover_rate", "steps"):
        mean, std = mean_std([row[key] for row in rows])
        summary[key] = {"mean": round(mean, 6), "std": round(std, 6)}
    rates = {
        name: sum(1 for row in rows if name in row["achievements"]) / len(rows)
        for name in ACHIEVEMENTS
    }
    summary["aggregate_score"] = {
        "mean": round(score(rates).percent, 6),
        "std": 0.0,
    }
    write_json(out / "summary.json", {"rows": summary})

    print(f"{'trial':>5} {'iter':>4} {'reward':>8} {'score':>8} {'cover':>7} {'steps':>6} done")
    for row in rows:
        print(
            f"{row['trial']:>5} {row['iteration']:>4} {row['reward']:>8.2f} "
            f"{row['score']:>8.2f} {row['cover_rate']:>7.3f} {row['steps']:>6} "
            f"{'yes' if row['task_complete'] else 'no'}"
        )
    for key in ("reward", "score"):
        cell = summary[key]
        print(f"{key}: {cell['mean']:.3f} +- {cell['std']:.3f} over {len(rows)} episodes")
    return 0


def cmd_ablate_limit(spec: ExperimentSpec, limits: list[int]) -> int:
    spec.validate()
    if not limits:
        raise ValueError("provide at least one rule limit")
    if any(l < 1 for l in limits):
        raise ValueError("rule limits must be >= 1")
    config = load_config(spec.config_id)
    seeds = [spec.seed + t for t in range(spec.trials)]
    table = run_ablation(
        config, limits, seeds, spec.iterations,
        noise=spec.noise, replan_limit=spec.replan_limit,
    )
    out = Path(spec.out)
    write_json(out / "manifest.json", {
        "version": __version__,
        "spec": {**spec.to_json(), "limits": limits},
    })
    write_json(out / "ablation.json", {"arms": table})
    print(f"{'arm':<14}{'reward':>18}{'score':>18}")
    for name, row in table.items():
        print(
            f"{name:<14}{row['reward_mean']:>10.2f} +-{row['reward_std']:<5.2f}"
            f"{row['score_mean']:>10.2f} +-{row['score_std']:<5.2f}"
        )
    return 0


def cmd_coverage_curve(spec: ExperimentSpec) -> int:
    spec.validate()
    config = load_config(spec.config_id, seed=spec.seed)
    if spec.proposer == "noisy":
        proposer = NoisyOracleProposer(config, corruption=spec.noise, seed=spec.seed)
    else:
        proposer = OracleProposer(config)
    curve = coverage_curve(config, proposer, spec.iterations)
    doc = {
        "series": list(curve.series),
        "defined": curve.defined,
        "misprediction_count": curve.misprediction_count,
        "final_rules": list(curve.final_rule_ids),
    }
    out = Path(spec.out)
    write_json(out / "manifest.json", {"version": __version__, "spec": spec.to_json()})
    write_json(out / "curve.json", doc)
    for i, value in enumerate(curve.series):
        flag = "" if curve.defined else "  (no mispredictions: flagged zero)"
        print(f"iteration {i}: cover rate {value:.3f}{flag}")
    return 0


def cmd_inspect(path: str) -> int:
    print(inspect_path(path))
    return 0


def cmd_prune(
    rules_path: str, transitions_path: str, limit: int, out: str, kg_path: str | None
) -> int:
    rules = RuleSet.from_json(json.loads(Path(rules_path).read_text()), limit)
    kg = KnowledgeGraph.empty()
    if kg_path:
        kg = KnowledgeGraph.from_json(json.loads(Path(kg_path).read_text()))
    from .graphs import SceneGraph

    mispredictions: list[tuple[Transition, Outcome]] = []
    for i, line in enumerate(Path(transitions_path).read_text().splitlines()):
        if not line.strip():
            continue
        record = json.loads(line)
        if "meta" in record:
            continue
        if "predicted" not in record:
            raise SchemaError(transitions_path, f"line {i + 1}: missing field 'predicted'")
        transition = Transition.from_json(record)
        predicted = Outcome.from_json(record["predicted"])
        if predicted.success != transition.outcome.success:
            mispredictions.append((transition, predicted))
    matrix = build_matrix(
        rules.entries, mispredictions, kg, SceneGraph(), tool_tiers=DEFAULT_TOOL_TIERS
    )
    trace = prune_trace(matrix, limit)
    selected_ids = [s.rule_id for s in trace]
    survivors = [e for e in rules.entries if e.id in selected_ids]
    out_dir = Path(out)
    doc = matrix.to_json()
    doc["selection"] = [{"rule_id": s.rule_id, "gain": s.gain} for s in trace]
    doc["limit"] = limit
    write_json(out_dir / "coverage.json", doc)
    write_json(out_dir / "rules.json", RuleSet(tuple(survivors), limit).to_json())
    covered = sum(s.gain for s in trace)
    print(f"{len(mispredictions)} mispredictions, {len(rules)} candidate rules")
    for s in trace:
        print(f"  pick {s.rule_id:<28} gain {s.gain}")
    print(f"selected {len(trace)} rules covering {covered}/{len(mispredictions)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="worldalign",
        description="Rule-learning world-model alignment experiments",
    )
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default="default", help="config id or JSON path")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--iterations", type=int, default=1)
        p.add_argument("--rule-limit", type=int, default=6)
        p.add_argument("--replan-limit", type=int, default=3)
        p.add_argument("--cadence", choices=("episode", "step"), default="episode")
        p.add_argument("--proposer", choices=("oracle", "noisy", "backend", "none"),
                       default="oracle")
        p.add_argument("--predictor", choices=("naive", "backend"), default="naive")
        p.add_argument("--planner", choices=("scripted", "backend"), default="scripted")
        p.add_argument("--noise", type=float, default=0.3)
        p.add_argument("--target", default=TARGET_CHAIN_ACHIEVEMENT,
                       help="achievement ending the episode ('none' to run the full budget)")
        p.add_argument("--workers", type=int, default=1)

    p_sim = sub.add_parser("simulate", help="run learning episodes and write artifacts")
    add_common(p_sim)

    p_abl = sub.add_parser("ablate-limit", help="compare rule-limit arms plus no-pruning")
    add_common(p_abl)
    p_abl.add_argument("--limits", default="6,5,3,1",
                       help="comma-separated rule limits")

    p_curve = sub.add_parser("coverage-curve", help="cover rate over learning iterations")
    add_common(p_curve)

    p_inspect = sub.add_parser("inspect", help="pretty-print any artifact file")
    p_inspect.add_argument("path")

    p_prune = sub.add_parser("prune", help="offline pruning of a rules file")
    p_prune.add_argument("--rules", required=True)
    p_prune.add_argument("--transitions", required=True,
                         help="ndjson of transitions with a 'predicted' outcome field")
    p_prune.add_argument("--limit", type=int, default=6)
    p_prune.add_argument("--kg", default=None)
    p_prune.add_argument("--out", default="runs/prune")
    return parser


def _spec_from_args(args: argparse.Namespace, default_out: str) -> ExperimentSpec:
    target = None if args.target in ("none", "") else args.target
    return ExperimentSpec(
        config_id=args.config,
        seed=args.seed,
        trials=args.trials,
        iterations=args.iterations,
        out=args.out or default_out,
        rule_limit=args.rule_limit,
        replan_limit=args.replan_limit,
        cadence=args.cadence,
        proposer=args.proposer,
        predictor=args.predictor,
        planner=args.planner,
        noise=args.noise,
        target=target,
        workers=args.workers,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "simulate":
            return cmd_simulate(_spec_from_args(args, "runs/simulate"))
        if args.command == "ablate-limit":
            limits = [int(x) for x in str(args.limits).split(",") if x.strip()]
            return cmd_ablate_limit(_spec_from_args(args, "runs/ablation"), limits)
        if args.command == "coverage-curve":
            return cmd_coverage_curve(_spec_from_args(args, "runs/curve"))
        if args.command == "inspect":
            return cmd_inspect(args.path)
        if args.command == "prune":
            return cmd_prune(args.rules, args.transitions, args.limit, args.out, args.kg)
    except (ValueError, UnsolvableConfig, SchemaError, EpisodeInterrupted,
            BackendUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
