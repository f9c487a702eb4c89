"""Command-line interface.

Every report-producing subcommand writes its delimited/binary output plus a
rendered figure next to it: train emits the trace curve, eval the metric
bars, heatmap and plan the map renderings.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import em, evaluation, service, store
from .affordance import ModelParameters
from .errors import (
    DanglingReference,
    EmptyTrainingSet,
    NoActivities,
    NoComparablePairs,
    NoPathFound,
    PlanitError,
    ResolutionTooCoarse,
    SchemaError,
)
from .planner import PlanRequest, plan as plan_path, rasterize
from .store import default_data_dir, ingest, load_model, save_dataset, save_model

VALIDATION_ERRORS = (
    SchemaError,
    DanglingReference,
    EmptyTrainingSet,
    NoActivities,
    NoComparablePairs,
    ResolutionTooCoarse,
    ValueError,
)


def _parse_point(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected x,y  got {text!r}")
    return float(parts[0]), float(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planit",
        description="Learn activity-preference cost maps from labeled "
        "trajectory segments, evaluate them against heuristics, and plan with them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate and index a dataset directory")
    p_ingest.add_argument("directory")

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p_synth.add_argument("--envs", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--trajectories-per-env", type=int, default=14)
    p_synth.add_argument("--label-noise", type=float, default=0.1)

    p_train = sub.add_parser("train", help="fit model parameters from bad-labeled segments")
    p_train.add_argument("--data", default=None)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--max-iters", type=int, default=200)
    p_train.add_argument("--tol", type=float, default=1e-6)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--restarts", type=int, default=5)
    p_train.add_argument("--trim", type=float, default=0.2,
                         help="fraction of lowest-likelihood waypoints dropped per "
                              "M-step (label-noise robustness; 0 disables)")

    p_eval = sub.add_parser("eval", help="score algorithms against ground-truth labels")
    p_eval.add_argument("--data", default=None)
    p_eval.add_argument("--model", default=None)
    p_eval.add_argument("--baselines", default="all",
                        help="'all' or comma-separated subset of "
                             f"{','.join(evaluation.BASELINES)}")
    p_eval.add_argument("--out", required=True, help="CSV output path")
    p_eval.add_argument("--seed", type=int, default=0)

    p_plan = sub.add_parser("plan", help="plan a trajectory on the learned cost map")
    p_plan.add_argument("--data", default=None)
    p_plan.add_argument("--env", required=True)
    p_plan.add_argument("--model", required=True)
    p_plan.add_argument("--start", type=_parse_point, required=True)
    p_plan.add_argument("--goal", type=_parse_point, required=True)
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.add_argument("--res", type=float, default=0.1)
    p_plan.add_argument("--step-size", type=float, default=0.15)
    p_plan.add_argument("--max-samples", type=int, default=20_000)
    p_plan.add_argument("--cost-weight", type=float, default=5.0)
    p_plan.add_argument("--out", default=None, help="trajectory JSON output path")

    p_heat = sub.add_parser("heatmap", help="rasterize the cost map to a grid file + PNG")
    p_heat.add_argument("--data", default=None)
    p_heat.add_argument("--env", required=True)
    p_heat.add_argument("--model", required=True)
    p_heat.add_argument("--res", type=float, default=0.05)
    p_heat.add_argument("--out", required=True, help="binary grid output path")

    p_serve = sub.add_parser("serve", help="serve the labeling/retraining HTTP API")
    p_serve.add_argument("--data", default=None)
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--model", default=None)
    p_serve.add_argument("--host", default="127.0.0.1")

    return parser


def cmd_ingest(args) -> int:
    _, counts = ingest(args.directory)
    print(f"environments: {counts[0]}")
    print(f"trajectories: {counts[1]}")
    print(f"labels:       {counts[2]}")
    return 0


def cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    true_params = evaluation.default_true_model()
    config = evaluation.SynthConfig(
        trajectories_per_env=args.trajectories_per_env, label_noise=args.label_noise
    )
    environments, trajectories, labels = [], [], []
    for i in range(args.envs):
        env = evaluation.make_environment(f"env-{i:04d}", rng)
        environments.append(env)
        trajs, segs = evaluation.synthesize_feedback(env, true_params, config, rng)
        trajectories.extend(trajs)
        labels.extend(segs)
    out = Path(args.out)
    save_dataset(out, environments, trajectories, labels)
    save_model(true_params, out / "true_model.json")
    print(
        f"wrote {len(environments)} environments, {len(trajectories)} trajectories, "
        f"{len(labels)} labels to {out}"
    )
    return 0


def cmd_train(args) -> int:
    data_dir = default_data_dir(args.data)
    data_store, _ = ingest(data_dir)
    training = em.build_training_set(
        list(data_store.environments.values()),
        list(data_store.trajectories.values()),
        list(data_store.labels.records),
    )
    config = em.EMConfig(
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        restarts=args.restarts,
        trim_fraction=args.trim,
    )
    params, trace = em.fit(training, config)
    params = ModelParameters(
        params.registry,
        version=params.version,
        trained_at=store.trained_at_timestamp(),
        iteration_count=params.iteration_count,
    )
    out = Path(args.out)
    save_model(params, out)
    trace_path = out.with_suffix(".trace.json")
    trace_path.write_text(store.canonical_json(trace.to_dict()), encoding="utf-8")
    from . import viz

    viz.save_trace_plot(trace.to_dict(), out.with_suffix(".trace.png"))
    best = trace.restart_entries(trace.best_restart)
    print(
        f"trained on {training.n_waypoints} waypoints from "
        f"{len(training.environments)} environments; "
        f"avg LL {best[0].avg_log_likelihood:.4f} -> {best[-1].avg_log_likelihood:.4f} "
        f"({len(best) - 1} iterations, best restart {trace.best_restart})"
    )
    print(f"model -> {out}")
    return 0


def cmd_eval(args) -> int:
    data_dir = default_data_dir(args.data)
    data_store, _ = ingest(data_dir)
    model = load_model(args.model) if args.model else None
    if args.baselines == "all":
        algorithms = list(evaluation.BASELINES)
    else:
        algorithms = [b.strip() for b in args.baselines.split(",") if b.strip()]
        unknown = set(algorithms) - set(evaluation.BASELINES)
        if unknown:
            raise ValueError(f"unknown baselines: {sorted(unknown)}")
    if model is not None:
        algorithms.append("learned")
    rows = evaluation.evaluate_algorithms(
        list(data_store.environments.values()),
        list(data_store.trajectories.values()),
        list(data_store.labels.records),
        model=model,
        algorithms=algorithms,
        seed=args.seed,
    )
    out = Path(args.out)
    out.write_text(evaluation.rows_to_csv(rows), encoding="utf-8")
    from . import viz

    viz.save_eval_charts(rows, out.with_suffix(".png"))
    for row in rows:
        print(
            f"{row.algorithm:>10s}  misclassification {row.misclassification:.3f} "
            f"(se {row.stderr:.3f})  ndcg@5 {row.ndcg_at.get(5, float('nan')):.3f}"
        )
    print(f"results -> {out}")
    return 0


def cmd_plan(args) -> int:
    data_dir = default_data_dir(args.data)
    data_store, _ = ingest(data_dir)
    env = data_store.environments.get(args.env)
    if env is None:
        raise ValueError(f"unknown environment {args.env!r}")
    model = load_model(args.model)
    grid = rasterize(env, model, resolution=args.res)
    req = PlanRequest(
        start=args.start,
        goal=args.goal,
        seed=args.seed,
        step_size=args.step_size,
        max_samples=args.max_samples,
        cost_weight=args.cost_weight,
    )
    traj = plan_path(env, grid, req)
    length = float(np.linalg.norm(np.diff(traj.waypoints, axis=0), axis=1).sum())
    print(f"planned {len(traj.waypoints)} waypoints, length {length:.2f} m")
    if args.out:
        out = Path(args.out)
        out.write_text(store.canonical_json(traj.to_dict()), encoding="utf-8")
        from . import viz

        viz.save_plan_figure(grid, traj.waypoints, out.with_suffix(".png"), env=env)
        print(f"trajectory -> {out}")
    return 0


def cmd_heatmap(args) -> int:
    data_dir = default_data_dir(args.data)
    data_store, _ = ingest(data_dir)
    env = data_store.environments.get(args.env)
    if env is None:
        raise ValueError(f"unknown environment {args.env!r}")
    model = load_model(args.model)
    grid = rasterize(env, model, resolution=args.res)
    out = Path(args.out)
    grid.save(out)
    from . import viz

    viz.save_heatmap(grid, out.with_suffix(".png"), env=env, title=env.id)
    print(f"{grid.width}x{grid.height} grid at {args.res} m -> {out}")
    return 0


def cmd_serve(args) -> int:
    data_dir = default_data_dir(args.data)
    service.serve(data_dir, port=args.port, model_path=args.model, host=args.host)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "plan": cmd_plan,
    "heatmap": cmd_heatmap,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NoPathFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PlanitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
