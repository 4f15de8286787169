"""Deployment-strategy experiments, grid searches and report emission.

Three protocols cover decreasing data availability: ds1 trains one agent per
building on the full horizon and evaluates a frozen deterministic episode;
ds2 trains each building as a source and transfers its policy to every
building (itself included) for one learning-enabled deployment episode; ds3
repeats the transfer study with training limited to the first five-twelfths
of the horizon and deployment on the unseen remainder.

Every lane (building x seed, or source x target x seed) is an independent
job owning its own environment and agent, so the runner can fan lanes out to
worker processes and gather results by value.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .data import (
    Community,
    SyntheticCommunityConfig,
    load_community_bundle,
    rate_series,
    synthetic_community,
)
from .env import DistrictEnv, ObservationBounds, RewardParams, write_trace_csv
from .kpi import (
    DISTRICT_KPI_NAMES,
    KpiReport,
    NormalizedKpiReport,
    build_report,
    normalize,
    write_report,
)
from .rbc import RbcStrategy, rbc_action, reference_rbc
from .sac import SacAgent, SacHyperparams, save_policy, train, transfer_policy

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
STRATEGIES = ("ds1", "ds2", "ds3")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run bit for bit."""

    community_path: str | None = None
    synthetic: SyntheticCommunityConfig | None = field(
        default_factory=SyntheticCommunityConfig
    )
    strategy: str = "ds1"
    seeds: tuple[int, ...] = (0,)
    hyperparams: SacHyperparams = field(default_factory=SacHyperparams)
    reward: RewardParams = field(default_factory=RewardParams)
    training_window: tuple[int, int] | None = None
    transfer_window: tuple[int, int] | None = None
    out_dir: str | None = None
    scale: float = 1.0
    jobs: int = 1
    trace: bool = False
    grid_buildings: int = 6

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.community_path is None and self.synthetic is None:
            raise ValueError("need a community path or a synthetic config")
        if not 0 < self.scale <= 1.0:
            raise ValueError(f"scale must be in (0, 1], got {self.scale}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")

    def to_dict(self) -> dict:
        return {
            "community_path": self.community_path,
            "synthetic": self.synthetic.to_dict() if self.synthetic else None,
            "strategy": self.strategy,
            "seeds": list(self.seeds),
            "hyperparams": self.hyperparams.to_dict(),
            "reward": self.reward.to_dict(),
            "training_window": list(self.training_window) if self.training_window else None,
            "transfer_window": list(self.transfer_window) if self.transfer_window else None,
            "out_dir": self.out_dir,
            "scale": self.scale,
            "jobs": self.jobs,
            "trace": self.trace,
            "grid_buildings": self.grid_buildings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if d.get("synthetic"):
            d["synthetic"] = SyntheticCommunityConfig.from_dict(d["synthetic"])
        if d.get("hyperparams"):
            d["hyperparams"] = SacHyperparams.from_dict(d["hyperparams"])
        if d.get("reward"):
            d["reward"] = RewardParams.from_dict(d["reward"])
        for key in ("seeds", "training_window", "transfer_window"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


def scaled_hyperparams(cfg: ExperimentConfig) -> SacHyperparams:
    """Shrink network width by the scale factor (CI knob); everything the
    learning dynamics depend on (tau/gamma/alpha/T, batch) stays put."""
    if cfg.scale >= 1.0:
        return cfg.hyperparams
    hidden = max(8, int(round(cfg.hyperparams.hidden_units * cfg.scale)))
    return replace(cfg.hyperparams, hidden_units=hidden)


def load_experiment_community(cfg: ExperimentConfig) -> Community:
    """Materialize the community and apply the scale knob to horizon and
    building count (whole days, at least one building)."""
    if cfg.community_path is not None:
        community = load_community_bundle(cfg.community_path)
    else:
        community = synthetic_community(cfg.synthetic)
    if cfg.scale < 1.0:
        days = max(1, int(community.hours * cfg.scale) // HOURS_PER_DAY)
        community = community.window(0, days * HOURS_PER_DAY)
        keep = max(1, int(round(len(community.buildings) * cfg.scale)))
        if keep < len(community.buildings):
            community = community.subset(keep)
    return community


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _lane(community: Community, index: int) -> Community:
    return replace(community, buildings=(community.buildings[index],))


def lane_bounds(
    community: Community, index: int, reward: RewardParams,
    window: tuple[int, int] | None = None,
) -> ObservationBounds:
    """The frozen normalization bounds a building's agent trains with."""
    lane = _lane(community, index)
    if window is not None:
        lane = lane.window(*window)
    return DistrictEnv(lane, reward).observation_bounds(0)


# ---------------------------------------------------------------------------
# Controller arms
# ---------------------------------------------------------------------------


@dataclass
class ArmResult:
    name: str
    net: np.ndarray
    report: KpiReport
    normalized: NormalizedKpiReport | None = None
    trace: list | None = None


def _score(community: Community, net: np.ndarray) -> KpiReport:
    rates = rate_series(community.tariff, community.start, community.hours)
    return build_report(net, rates, community.carbon.values, community.building_ids())


def run_baseline_arm(
    community: Community, reward: RewardParams, trace: bool = False
) -> ArmResult:
    env = DistrictEnv(community, reward, trace=trace)
    env.reset()
    zeros = np.zeros(env.n_buildings)
    for _ in range(env.horizon):
        env.step(zeros)
    net = env.episode_net()
    report = _score(community, net)
    return ArmResult(
        "baseline", net, report, normalize(report, report),
        trace=env.trace_rows if trace else None,
    )


def run_rbc_arm(
    community: Community, strategy: RbcStrategy, reward: RewardParams,
    baseline: KpiReport | None = None, trace: bool = False,
) -> ArmResult:
    env = DistrictEnv(community, reward, trace=trace)
    env.reset()
    for _ in range(env.horizon):
        actions = []
        for i in range(env.n_buildings):
            ctx = env.rbc_context(i)
            actions.append(rbc_action(strategy, ctx.hour, ctx.net_export_kwh, ctx.battery))
        env.step(actions)
    net = env.episode_net()
    report = _score(community, net)
    normalized = normalize(report, baseline) if baseline is not None else None
    return ArmResult(
        f"rbc:{strategy.variant}", net, report, normalized,
        trace=env.trace_rows if trace else None,
    )


def run_policy_arm(
    community: Community,
    agents: dict[str, SacAgent],
    bounds: dict[str, ObservationBounds],
    reward: RewardParams,
    baseline: KpiReport | None = None,
    name: str = "sac",
) -> ArmResult:
    """Deterministic frozen episode of per-building policies."""
    nets = []
    for i, bid in enumerate(community.building_ids()):
        env = DistrictEnv(_lane(community, i), reward)
        if bid in bounds:
            env.set_observation_bounds(0, bounds[bid])
        train(agents[bid], env, 0, episodes=1, learn=False)
        nets.append(env.episode_net()[:, 0])
    net = np.stack(nets, axis=1)
    report = _score(community, net)
    normalized = normalize(report, baseline) if baseline is not None else None
    return ArmResult(name, net, report, normalized)


# ---------------------------------------------------------------------------
# Deployment strategies
# ---------------------------------------------------------------------------


@dataclass
class TransferCell:
    source: str
    target: str
    reward_sum: float
    raw: dict[str, float]
    normalized: dict[str, float]


@dataclass
class SeedOutcome:
    seed: int
    episode_rewards: dict[str, list[float]]
    sac: ArmResult | None = None
    cells: list[TransferCell] = field(default_factory=list)
    own_deployment: list[TransferCell] = field(default_factory=list)
    agents: dict[str, SacAgent] = field(default_factory=dict)
    bounds: dict[str, ObservationBounds] = field(default_factory=dict)


@dataclass
class RunResult:
    strategy: str
    config: ExperimentConfig
    community: Community
    baseline: ArmResult
    rbc: ArmResult | None
    per_seed: list[SeedOutcome]
    # hour of day at which the scored (evaluation) window begins; differs
    # from the community start for ds3's tail-window deployment
    eval_start_hour: int = 0


def _train_building_agent(
    community: Community,
    index: int,
    seed: int,
    hp: SacHyperparams,
    reward: RewardParams,
    window: tuple[int, int] | None = None,
) -> tuple[SacAgent, list[float], DistrictEnv]:
    lane = _lane(community, index)
    if window is not None:
        lane = lane.window(*window)
    env = DistrictEnv(lane, reward)
    agent = SacAgent(
        hyperparams=hp,
        seed=_derive_seed(seed, index),
        exploration_policy=reference_rbc(),
    )
    rewards = train(agent, env, 0, episodes=hp.episodes, learn=True)
    return agent, rewards, env


def _ds1_lane(args: tuple) -> tuple[str, list[float], np.ndarray, SacAgent, list]:
    cfg_dict, seed, index = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    community = load_experiment_community(cfg)
    hp = scaled_hyperparams(cfg)
    agent, rewards, env = _train_building_agent(community, index, seed, hp, cfg.reward)
    env.trace_enabled = cfg.trace
    train(agent, env, 0, episodes=1, learn=False)
    det_net = env.episode_net()[:, 0]
    return community.building_ids()[index], rewards, det_net, agent, env.trace_rows


def _run_lanes(cfg: ExperimentConfig, worker, args_list: list[tuple]):
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(worker, args_list))
    return [worker(a) for a in args_list]


def run_ds1(cfg: ExperimentConfig) -> RunResult:
    """Per-building training on the full horizon, deterministic deployment,
    scored against the no-battery baseline and the reference RBC."""
    if cfg.strategy != "ds1":
        cfg = replace(cfg, strategy="ds1")
    community = load_experiment_community(cfg)
    baseline = run_baseline_arm(community, cfg.reward, trace=cfg.trace)
    rbc_result = run_rbc_arm(
        community, reference_rbc(), cfg.reward, baseline.report, trace=cfg.trace
    )
    per_seed = []
    for seed in cfg.seeds:
        outcomes = _run_lanes(
            cfg,
            _ds1_lane,
            [(cfg.to_dict(), seed, i) for i in range(len(community.buildings))],
        )
        nets = {}
        episode_rewards = {}
        agents = {}
        bounds = {}
        sac_trace = []
        for i, (bid, rewards, det_net, agent, rows) in enumerate(outcomes):
            nets[bid] = det_net
            episode_rewards[bid] = rewards
            agents[bid] = agent
            bounds[bid] = lane_bounds(community, i, cfg.reward)
            sac_trace.extend(rows)
        net = np.stack([nets[b] for b in community.building_ids()], axis=1)
        report = _score(community, net)
        sac_arm = ArmResult(
            "sac", net, report, normalize(report, baseline.report),
            trace=sac_trace if cfg.trace else None,
        )
        per_seed.append(
            SeedOutcome(
                seed=seed,
                episode_rewards=episode_rewards,
                sac=sac_arm,
                agents=agents,
                bounds=bounds,
            )
        )
    result = RunResult(
        "ds1", cfg, community, baseline, rbc_result, per_seed,
        eval_start_hour=community.start.hour,
    )
    if cfg.out_dir:
        emit_report(result, cfg.out_dir)
    return result


def _district_of_one(community: Community, index: int, net: np.ndarray) -> KpiReport:
    lane = _lane(community, index)
    return _score(lane, net.reshape(-1, 1))


def _transfer_cell(
    community: Community,
    src: str,
    tgt_index: int,
    agent_for_target: SacAgent,
    source_bounds: ObservationBounds,
    reward: RewardParams,
    baseline_report: KpiReport,
    window: tuple[int, int] | None,
) -> TransferCell:
    lane = _lane(community, tgt_index)
    if window is not None:
        lane = lane.window(*window)
    env = DistrictEnv(lane, reward)
    env.set_observation_bounds(0, source_bounds)
    rewards = train(agent_for_target, env, 0, episodes=1, learn=True)
    net = env.episode_net()[:, 0]
    eval_community = lane
    report = _score(eval_community, net.reshape(-1, 1))
    normalized = normalize(report, baseline_report)
    tgt = community.building_ids()[tgt_index]
    return TransferCell(
        source=src,
        target=tgt,
        reward_sum=float(rewards[0]),
        raw={k: getattr(report.district, k) for k in DISTRICT_KPI_NAMES},
        normalized={k: getattr(normalized.district, k) for k in DISTRICT_KPI_NAMES},
    )


def _ds2_cells_for_source(
    community: Community,
    cfg: ExperimentConfig,
    seed: int,
    src_index: int,
    src_agent: SacAgent,
) -> list[TransferCell]:
    ids = community.building_ids()
    src_bounds = lane_bounds(community, src_index, cfg.reward)
    cells = []
    for tgt_index, b in enumerate(community.buildings):
        baseline_report = _district_of_one(
            community, tgt_index, b.non_shiftable.values - b.pv_generation.values
        )
        target_agent = SacAgent(
            hyperparams=src_agent.hyperparams,
            seed=_derive_seed(seed, src_index, tgt_index, 7),
            exploration_policy=reference_rbc(),
        )
        transfer_policy(src_agent, target_agent)
        cells.append(
            _transfer_cell(
                community, ids[src_index], tgt_index, target_agent, src_bounds,
                cfg.reward, baseline_report, None,
            )
        )
    return cells


def _ds2_source_row(args: tuple) -> tuple[str, list[float], list[TransferCell], SacAgent]:
    cfg_dict, seed, src_index = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    community = load_experiment_community(cfg)
    hp = scaled_hyperparams(cfg)
    ids = community.building_ids()
    src_agent, rewards, _ = _train_building_agent(community, src_index, seed, hp, cfg.reward)
    cells = _ds2_cells_for_source(community, cfg, seed, src_index, src_agent)
    return ids[src_index], rewards, cells, src_agent


def run_ds2(
    cfg: ExperimentConfig,
    source_agents: dict[int, dict[str, SacAgent]] | None = None,
) -> RunResult:
    """Every building as source: train on the full horizon, transfer to every
    target (including itself) and deploy for one learning-enabled episode.

    ``source_agents`` (seed -> building id -> trained agent) skips source
    training when the identical agents are already available, e.g. from a
    ds1 run with the same config and seeds; only honoured for jobs == 1.
    """
    if cfg.strategy != "ds2":
        cfg = replace(cfg, strategy="ds2")
    community = load_experiment_community(cfg)
    ids = community.building_ids()
    if len(ids) < 2:
        raise ValueError("ds2 needs at least 2 buildings")
    baseline = run_baseline_arm(community, cfg.reward)
    per_seed = []
    for seed in cfg.seeds:
        if source_agents is not None and cfg.jobs == 1:
            agents = source_agents[seed]
            cells = []
            for src_index, src in enumerate(ids):
                cells.extend(
                    _ds2_cells_for_source(community, cfg, seed, src_index, agents[src])
                )
            per_seed.append(SeedOutcome(seed=seed, episode_rewards={}, cells=cells))
            continue
        rows = _run_lanes(
            cfg, _ds2_source_row, [(cfg.to_dict(), seed, i) for i in range(len(ids))]
        )
        episode_rewards = {}
        cells = []
        agents = {}
        for bid, rewards, row_cells, agent in rows:
            episode_rewards[bid] = rewards
            cells.extend(row_cells)
            agents[bid] = agent
        per_seed.append(
            SeedOutcome(
                seed=seed, episode_rewards=episode_rewards, cells=cells, agents=agents
            )
        )
    result = RunResult(
        "ds2", cfg, community, baseline, None, per_seed,
        eval_start_hour=community.start.hour,
    )
    if cfg.out_dir:
        emit_report(result, cfg.out_dir)
    return result


def ds3_windows(cfg: ExperimentConfig, horizon: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Training window defaults to the first 5/12 of the horizon; deployment
    covers the remainder."""
    training = cfg.training_window or (0, int(horizon * 5 / 12))
    transfer = cfg.transfer_window or (training[1], horizon)
    if not 0 <= training[0] < training[1] <= horizon:
        raise ValueError(f"training window {training} outside horizon {horizon}")
    if not training[1] <= transfer[0] < transfer[1] <= horizon:
        raise ValueError(f"transfer window {transfer} invalid for horizon {horizon}")
    return training, transfer


def _ds3_source_row(args: tuple) -> tuple[str, list[float], list[TransferCell], list[TransferCell]]:
    cfg_dict, seed, src_index = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    community = load_experiment_community(cfg)
    hp = scaled_hyperparams(cfg)
    ids = community.building_ids()
    training, transfer = ds3_windows(cfg, community.hours)
    src_agent, rewards, _ = _train_building_agent(
        community, src_index, seed, hp, cfg.reward, window=training
    )
    src_bounds = lane_bounds(community, src_index, cfg.reward, window=training)

    def eval_baseline(tgt_index: int) -> KpiReport:
        b = community.buildings[tgt_index]
        base = (b.non_shiftable.values - b.pv_generation.values)[transfer[0] : transfer[1]]
        lane = _lane(community, tgt_index).window(*transfer)
        return _score(lane, base.reshape(-1, 1))

    cells = []
    for tgt_index in range(len(ids)):
        target_agent = SacAgent(
            hyperparams=hp,
            seed=_derive_seed(seed, src_index, tgt_index, 13),
            exploration_policy=reference_rbc(),
        )
        transfer_policy(src_agent, target_agent)
        cells.append(
            _transfer_cell(
                community, ids[src_index], tgt_index, target_agent, src_bounds,
                cfg.reward, eval_baseline(tgt_index), transfer,
            )
        )
    # no-transfer arm: the source's own agent continues on its building's
    # unseen months, replay buffer and step counters intact
    own_cell = _transfer_cell(
        community, ids[src_index], src_index, src_agent, src_bounds,
        cfg.reward, eval_baseline(src_index), transfer,
    )
    return ids[src_index], rewards, cells, [own_cell]


def run_ds3(cfg: ExperimentConfig) -> RunResult:
    """Transfer study with five months of training data: sources train on the
    first window, deploy (with and without transfer) on the unseen remainder."""
    if cfg.strategy != "ds3":
        cfg = replace(cfg, strategy="ds3")
    community = load_experiment_community(cfg)
    ids = community.building_ids()
    training, transfer = ds3_windows(cfg, community.hours)
    hp = scaled_hyperparams(cfg)
    window_hours = training[1] - training[0]
    if window_hours * hp.episodes < hp.exploration_steps:
        raise ValueError(
            f"training window of {window_hours} h x {hp.episodes} episodes cannot "
            f"cover {hp.exploration_steps} exploration steps"
        )
    eval_community = community.window(*transfer)
    baseline = run_baseline_arm(eval_community, cfg.reward)
    per_seed = []
    for seed in cfg.seeds:
        rows = _run_lanes(
            cfg, _ds3_source_row, [(cfg.to_dict(), seed, i) for i in range(len(ids))]
        )
        episode_rewards = {}
        cells = []
        own = []
        for bid, rewards, row_cells, own_cells in rows:
            episode_rewards[bid] = rewards
            cells.extend(row_cells)
            own.extend(own_cells)
        per_seed.append(
            SeedOutcome(
                seed=seed, episode_rewards=episode_rewards, cells=cells,
                own_deployment=own,
            )
        )
    result = RunResult(
        "ds3", cfg, community, baseline, None, per_seed,
        eval_start_hour=(community.start.hour + transfer[0]) % 24,
    )
    if cfg.out_dir:
        emit_report(result, cfg.out_dir)
    return result


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    return {"ds1": run_ds1, "ds2": run_ds2, "ds3": run_ds3}[cfg.strategy](cfg)


# ---------------------------------------------------------------------------
# Grid searches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSearchSpec:
    axes: dict[str, tuple]
    repetitions: int = 3

    def __post_init__(self) -> None:
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ValueError("grid axes must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def cells(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in product(*self.axes.values())]


HYPER_AXES = {
    "tau": (0.0005, 0.005, 0.05),
    "gamma": (0.90, 0.95, 0.99),
    "learning_rate": (0.00005, 0.0005, 0.005),
    "temperature": (0.2, 0.5, 0.8),
}

REWARD_AXES = {
    "e1": (1, 2),
    "e2": (1, 2),
    "w1": (0.0, 0.25, 0.5, 0.75, 1.0),
}


def default_hyper_grid(repetitions: int = 3) -> GridSearchSpec:
    return GridSearchSpec(axes=dict(HYPER_AXES), repetitions=repetitions)


def default_reward_grid(repetitions: int = 3) -> GridSearchSpec:
    return GridSearchSpec(axes=dict(REWARD_AXES), repetitions=repetitions)


def _mode(values: list, candidates: tuple) -> object:
    counts = {c: 0 for c in candidates}
    for v in values:
        counts[v] += 1
    best = max(counts.values())
    for c in candidates:
        if counts[c] == best:
            return c


def hyperparameter_grid_search(
    spec: GridSearchSpec,
    trainer,
    buildings: list[str],
    base: SacHyperparams | None = None,
) -> tuple[SacHyperparams, pd.DataFrame]:
    """Grid search over agent hyperparameters.

    ``trainer(building_id, hyperparams, repetition)`` returns the final
    training episode's cumulative reward. Per building the cell maximizing
    the mean reward over repetitions wins; the community-level selection is
    the per-axis mode of the winners.
    """
    unknown = set(spec.axes) - set(HYPER_AXES)
    if unknown:
        raise ValueError(f"unknown hyperparameter axes {sorted(unknown)}")
    base = base or SacHyperparams()
    rows = []
    winners: dict[str, dict] = {}
    for bid in buildings:
        best_cell, best_score = None, -np.inf
        for cell in spec.cells():
            hp = replace(base, **cell)
            scores = [trainer(bid, hp, rep) for rep in range(spec.repetitions)]
            mean = float(np.mean(scores))
            rows.append({"building": bid, **cell, "mean_reward": mean, "rewards": scores})
            if mean > best_score:
                best_cell, best_score = cell, mean
        winners[bid] = best_cell
    selected = {
        axis: _mode([winners[b][axis] for b in buildings], tuple(values))
        for axis, values in spec.axes.items()
    }
    for bid in buildings:
        rows.append(
            {"building": f"{bid} (winner)", **winners[bid], "mean_reward": np.nan, "rewards": []}
        )
    rows.append({"building": "mode", **selected, "mean_reward": np.nan, "rewards": []})
    return replace(base, **selected), pd.DataFrame(rows)


def reward_grid_search(
    spec: GridSearchSpec, evaluator
) -> tuple[RewardParams, pd.DataFrame]:
    """Grid search over reward parameters (w2 is tied to 1 - w1).

    ``evaluator(params, repetition)`` returns the normalized district
    (price, emissions) pair; the cell minimizing their average wins, with
    emissions as tie-breaker.
    """
    unknown = set(spec.axes) - set(REWARD_AXES)
    if unknown:
        raise ValueError(f"unknown reward axes {sorted(unknown)}")
    rows = []
    best = None
    best_key = (np.inf, np.inf)
    for cell in spec.cells():
        params = RewardParams(
            w1=cell.get("w1", 1.0),
            w2=1.0 - cell.get("w1", 1.0),
            e1=int(cell.get("e1", 1)),
            e2=int(cell.get("e2", 1)),
        )
        outcomes = [evaluator(params, rep) for rep in range(spec.repetitions)]
        price = float(np.mean([o[0] for o in outcomes]))
        emissions = float(np.mean([o[1] for o in outcomes]))
        combined = (price + emissions) / 2.0
        rows.append(
            {
                **cell,
                "w2": params.w2,
                "price": price,
                "emissions": emissions,
                "combined": combined,
            }
        )
        key = (combined, emissions)
        if key < best_key:
            best_key, best = key, params
    return best, pd.DataFrame(rows)


def make_sac_trainer(cfg: ExperimentConfig):
    """Real trainer for the hyperparameter grid: trains one agent per call on
    the named building's lane and reports the final episode reward sum."""
    community = load_experiment_community(cfg)
    ids = community.building_ids()

    def trainer(bid: str, hp: SacHyperparams, rep: int) -> float:
        index = ids.index(bid)
        agent, rewards, _ = _train_building_agent(
            community, index, _derive_seed(cfg.seeds[0], rep), hp, cfg.reward
        )
        return rewards[-1]

    return trainer


def make_reward_evaluator(cfg: ExperimentConfig):
    """Real evaluator for the reward grid: trains the grid-search building
    subset with the candidate reward, then scores the deterministic episode's
    normalized district price and emissions."""
    community = load_experiment_community(cfg)
    subset = community.subset(min(cfg.grid_buildings, len(community.buildings)))
    hp = scaled_hyperparams(cfg)
    baseline = run_baseline_arm(subset, RewardParams())

    def evaluator(params: RewardParams, rep: int) -> tuple[float, float]:
        agents = {}
        bounds = {}
        for i, bid in enumerate(subset.building_ids()):
            agent, _, _ = _train_building_agent(
                subset, i, _derive_seed(cfg.seeds[0], rep), hp, params
            )
            agents[bid] = agent
            bounds[bid] = lane_bounds(subset, i, params)
        arm = run_policy_arm(subset, agents, bounds, params, baseline.report)
        return arm.normalized.district.price, arm.normalized.district.emissions

    return evaluator


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _daily_profile(net: np.ndarray, start_hour: int) -> np.ndarray:
    """(24, buildings) mean net consumption by hour of day."""
    hours = net.shape[0]
    hod = (start_hour + np.arange(hours)) % 24
    out = np.zeros((24, net.shape[1]))
    for h in range(24):
        mask = hod == h
        if mask.any():
            out[h] = net[mask].mean(axis=0)
    return out


def emit_report(result: RunResult, out_dir: str | Path) -> Path:
    """Write KPI tables, transfer heatmap data, daily profiles, policies and
    the reproduction manifest under ``out_dir``."""
    out = Path(out_dir)
    (out / "kpis").mkdir(parents=True, exist_ok=True)
    (out / "policies").mkdir(exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)

    write_report(result.baseline.report, result.baseline.normalized, out / "kpis" / "baseline")

    def dump_trace(arm: ArmResult, name: str) -> None:
        if arm is not None and arm.trace:
            write_trace_csv(arm.trace, out / "traces" / f"{name}.csv")

    dump_trace(result.baseline, "baseline")
    dump_trace(result.rbc, "rbc")
    profiles = []

    def add_profile(arm_name: str, net: np.ndarray, ids: list[str], start_hour: int):
        prof = _daily_profile(net, start_hour)
        for i, bid in enumerate(ids):
            for h in range(24):
                profiles.append(
                    {"arm": arm_name, "building": bid, "hour": h, "mean_net_kwh": prof[h, i]}
                )

    ids = result.community.building_ids()
    start_hour = result.eval_start_hour
    eval_ids = list(result.baseline.report.buildings)
    add_profile("baseline", result.baseline.net, eval_ids, start_hour)
    if result.rbc is not None:
        write_report(result.rbc.report, result.rbc.normalized, out / "kpis" / "rbc")
        add_profile(result.rbc.name, result.rbc.net, eval_ids, start_hour)
    heatmap_rows = []
    for outcome in result.per_seed:
        tag = f"seed{outcome.seed}"
        if outcome.sac is not None:
            write_report(outcome.sac.report, outcome.sac.normalized, out / "kpis" / f"sac_{tag}")
            add_profile(f"sac_{tag}", outcome.sac.net, ids, start_hour)
            dump_trace(outcome.sac, f"sac_{tag}")
        for kind, cells in (("transfer", outcome.cells), ("own", outcome.own_deployment)):
            for cell in cells:
                row = {
                    "seed": outcome.seed,
                    "arm": kind,
                    "source": cell.source,
                    "target": cell.target,
                    "reward_sum": cell.reward_sum,
                }
                row.update({f"norm_{k}": v for k, v in cell.normalized.items()})
                row.update({f"raw_{k}": v for k, v in cell.raw.items()})
                heatmap_rows.append(row)
        if outcome.episode_rewards:
            pd.DataFrame(
                [
                    {"building": bid, "episode": ep, "reward_sum": r}
                    for bid, rewards in outcome.episode_rewards.items()
                    for ep, r in enumerate(rewards)
                ]
            ).to_csv(out / "kpis" / f"episode_rewards_{tag}.csv", index=False)
        for bid, agent in outcome.agents.items():
            save_policy(
                agent,
                out / "policies" / f"{tag}_{bid}.json",
                provenance={
                    "source_building": bid,
                    "seed": outcome.seed,
                    "strategy": result.strategy,
                    "config_digest": result.config.digest(),
                },
                bounds=outcome.bounds.get(bid),
            )
    if heatmap_rows:
        pd.DataFrame(heatmap_rows).to_csv(out / "kpis" / "heatmap.csv", index=False)
    pd.DataFrame(profiles).to_csv(out / "profiles.csv", index=False)
    manifest = {
        "version": __version__,
        "strategy": result.strategy,
        "seeds": list(result.config.seeds),
        "config": result.config.to_dict(),
        "config_digest": result.config.digest(),
        "buildings": ids,
        "horizon_hours": result.community.hours,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out
