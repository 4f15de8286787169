"""Command-line entry point wiring data, simulation, experiments and reports.

Plot-ready data is emitted as CSV for external tooling; there is no
interactive mode. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .data import (
    SchemaError,
    SyntheticCommunityConfig,
    load_community_bundle,
    rate_series,
    synthetic_community,
    write_community,
)
from .env import DistrictEnv
from .experiments import (
    ExperimentConfig,
    default_hyper_grid,
    default_reward_grid,
    hyperparameter_grid_search,
    make_reward_evaluator,
    make_sac_trainer,
    reward_grid_search,
    run_experiment,
)
from .kpi import build_report, normalize, report_rows, write_report
from .rbc import rbc_action, strategy as rbc_strategy
from .sac import DETERMINISTIC, load_policy, select_action

logger = logging.getLogger(__name__)


def _resolve_out(out: str | None, default_name: str) -> Path:
    root = Path(os.environ.get("GRIDTWIN_OUT", "."))
    path = Path(out) if out else Path(default_name)
    return path if path.is_absolute() else root / path


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
    parser.add_argument("--scale", type=float, help="shrink horizon/buildings/net width")
    parser.add_argument("--jobs", type=int, help="parallel worker processes")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridtwin",
        description="District energy-flexibility workbench: simulate PV+battery "
        "communities, train battery control policies, and score flexibility KPIs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic community")
    _add_common(p)
    p.add_argument("--buildings", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--noise", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate community CSVs against the schema")
    p.add_argument("manifest", help="community manifest.json")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="run one episode under a fixed controller")
    _add_common(p)
    p.add_argument("manifest", help="community manifest.json")
    p.add_argument(
        "--controller",
        default="none",
        help="none | rbc:<variant> | policy:<file-or-dir>",
    )
    p.add_argument("--trace", action="store_true", help="emit per-step trace CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="run a deployment-strategy experiment")
    _add_common(p)
    p.add_argument("--strategy", choices=("ds1", "ds2", "ds3"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="hyperparameter or reward grid search")
    _add_common(p)
    p.add_argument("kind", choices=("hyper", "reward"))
    p.add_argument("--grid", default="default", help="grid spec: 'default' or a JSON file")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--dry-run", action="store_true", help="echo the axes and exit")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("kpi", help="score a simulate run directory")
    p.add_argument("run_dir", help="directory written by `simulate`")
    p.add_argument("--normalize", help="'self' or a baseline run directory")
    p.set_defaults(func=cmd_kpi)

    p = sub.add_parser("report", help="summarize an experiment output directory")
    p.add_argument("results_dir")
    p.set_defaults(func=cmd_report)
    return parser


def _synthetic_config(args) -> SyntheticCommunityConfig:
    if args.config:
        cfg = SyntheticCommunityConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        cfg = SyntheticCommunityConfig()
    overrides = {}
    if args.buildings is not None:
        overrides["building_count"] = args.buildings
    if args.days is not None:
        overrides["hours"] = args.days * 24
    if args.noise is not None:
        overrides["noise_level"] = args.noise
    if args.seed:
        overrides["seed"] = args.seed[0]
    if overrides:
        cfg = SyntheticCommunityConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def cmd_synth(args) -> int:
    cfg = _synthetic_config(args)
    out = _resolve_out(args.out, "community")
    manifest = write_community(synthetic_community(cfg), out)
    print(f"wrote {cfg.building_count} buildings x {cfg.hours} h to {manifest}")
    return 0


def cmd_ingest(args) -> int:
    community = load_community_bundle(args.manifest)
    print(
        f"ok: {len(community.buildings)} buildings, {community.hours} hourly rows, "
        f"start {community.start.isoformat()}"
    )
    return 0


def _policy_actions(controller: str, community, env: DistrictEnv):
    """Per-building deterministic agents from a policy file or directory."""
    path = Path(controller.split(":", 1)[1])
    agents = {}
    for i, bid in enumerate(community.building_ids()):
        if path.is_dir():
            matches = sorted(path.glob(f"*{bid}.json"))
            if not matches:
                raise FileNotFoundError(f"no policy for building {bid} under {path}")
            agent, bounds, _ = load_policy(matches[0])
        else:
            agent, bounds, _ = load_policy(path)
        if bounds is not None:
            env.set_observation_bounds(i, bounds)
        agents[bid] = agent
    return agents


def cmd_simulate(args) -> int:
    community = load_community_bundle(args.manifest)
    controller = args.controller
    env = DistrictEnv(community, trace=args.trace)
    observations = env.reset()
    if controller == "none":
        def act(obs):
            return np.zeros(env.n_buildings)
    elif controller.startswith("rbc:"):
        strat = rbc_strategy(controller.split(":", 1)[1])

        def act(obs):
            actions = []
            for i in range(env.n_buildings):
                ctx = env.rbc_context(i)
                actions.append(rbc_action(strat, ctx.hour, ctx.net_export_kwh, ctx.battery))
            return actions
    elif controller.startswith("policy:"):
        agents = _policy_actions(controller, community, env)
        observations = env.reset()
        ids = community.building_ids()

        def act(obs):
            return [
                select_action(agents[bid], obs[i], DETERMINISTIC)
                for i, bid in enumerate(ids)
            ]
    else:
        raise ValueError(f"unknown controller {controller!r}")

    while not env.done:
        result = env.step(act(observations))
        observations = result.observations
    out = _resolve_out(args.out, "simulate_run")
    out.mkdir(parents=True, exist_ok=True)
    net = env.episode_net()
    frame = pd.DataFrame(net, columns=community.building_ids())
    frame.insert(0, "h", np.arange(len(frame)))
    frame.to_csv(out / "net.csv", index=False)
    if args.trace:
        env.write_trace(out / "trace.csv")
    run_meta = {
        "community": str(Path(args.manifest).resolve()),
        "controller": controller,
        "buildings": community.building_ids(),
        "hours": community.hours,
    }
    (out / "run.json").write_text(json.dumps(run_meta, indent=2))
    print(f"simulated {community.hours} h under {controller}; run dir: {out}")
    return 0


def _load_run_report(run_dir: Path):
    meta = json.loads((run_dir / "run.json").read_text())
    community = load_community_bundle(meta["community"])
    net = pd.read_csv(run_dir / "net.csv").drop(columns=["h"]).to_numpy()
    rates = rate_series(community.tariff, community.start, community.hours)
    return build_report(net, rates, community.carbon.values, meta["buildings"])


def cmd_kpi(args) -> int:
    run_dir = Path(args.run_dir)
    report = _load_run_report(run_dir)
    normalized = None
    if args.normalize == "self":
        normalized = normalize(report, report)
    elif args.normalize:
        normalized = normalize(report, _load_run_report(Path(args.normalize)))
    write_report(report, normalized, run_dir / "kpi")
    with pd.option_context("display.width", 200, "display.max_columns", 50):
        print(report_rows(report, normalized).to_string(index=False))
    return 0


def cmd_train(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json_file(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.strategy:
        overrides["strategy"] = args.strategy
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.scale is not None:
        overrides["scale"] = args.scale
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    out = _resolve_out(args.out, f"train_{args.strategy or cfg.strategy}")
    overrides["out_dir"] = str(out)
    cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    result = run_experiment(cfg)
    print(f"{cfg.strategy} complete: seeds {list(cfg.seeds)}, results in {out}")
    if result.per_seed and result.per_seed[0].sac is not None:
        district = result.per_seed[0].sac.normalized.district
        print(
            f"seed {result.per_seed[0].seed} normalized district KPIs: "
            f"price {district.price:.3f}, emissions {district.emissions:.3f}, "
            f"ramping {district.ramping:.3f}"
        )
    return 0


def cmd_grid_search(args) -> int:
    if args.grid == "default":
        spec = default_hyper_grid(args.repetitions) if args.kind == "hyper" else default_reward_grid(args.repetitions)
    else:
        spec_dict = json.loads(Path(args.grid).read_text())
        from .experiments import GridSearchSpec

        spec = GridSearchSpec(
            axes={k: tuple(v) for k, v in spec_dict["axes"].items()},
            repetitions=spec_dict.get("repetitions", args.repetitions),
        )
    print(f"{args.kind} grid axes:")
    for axis, values in spec.axes.items():
        print(f"  {axis}: {list(values)}")
    if args.dry_run:
        return 0
    cfg = ExperimentConfig.from_json_file(args.config) if args.config else ExperimentConfig()
    if args.scale is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "scale": args.scale})
    out = _resolve_out(args.out, f"grid_{args.kind}")
    out.mkdir(parents=True, exist_ok=True)
    community_ids = None
    if args.kind == "hyper":
        from .experiments import load_experiment_community

        community = load_experiment_community(cfg)
        community_ids = community.building_ids()[: cfg.grid_buildings]
        best, table = hyperparameter_grid_search(
            spec, make_sac_trainer(cfg), community_ids, base=cfg.hyperparams
        )
        print(
            f"selected: tau={best.tau} gamma={best.gamma} "
            f"alpha={best.learning_rate} T={best.temperature}"
        )
        (out / "selected.json").write_text(json.dumps(best.to_dict(), indent=2))
    else:
        best, table = reward_grid_search(spec, make_reward_evaluator(cfg))
        print(f"selected: e1={best.e1} e2={best.e2} w1={best.w1} w2={best.w2}")
        (out / "selected.json").write_text(json.dumps(best.to_dict(), indent=2))
    table.to_csv(out / "grid_results.csv", index=False)
    print(f"grid table: {out / 'grid_results.csv'}")
    return 0


def cmd_report(args) -> int:
    results = Path(args.results_dir)
    kpi_dir = results / "kpis"
    if not kpi_dir.exists():
        raise FileNotFoundError(f"{kpi_dir} not found; is this a train output directory?")
    frames = []
    for csv in sorted(kpi_dir.glob("*.csv")):
        if csv.name.startswith(("baseline", "rbc", "sac")):
            frame = pd.read_csv(csv)
            frame.insert(0, "arm", csv.stem)
            frames.append(frame)
    if frames:
        summary = pd.concat(frames, ignore_index=True)
        summary.to_csv(results / "summary.csv", index=False)
        print(summary.to_string(index=False))
    heatmap = kpi_dir / "heatmap.csv"
    if heatmap.exists():
        print(f"transfer heatmap data: {heatmap}")
    print(f"summary written to {results / 'summary.csv'}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (SchemaError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
