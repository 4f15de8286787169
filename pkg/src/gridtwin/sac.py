"""Soft actor-critic battery controller with expert-guided exploration.

Twin critics with min-backup targets, a tanh-squashed Gaussian actor, uniform
replay, fixed entropy temperature, and a warm-up phase in which the reference
rule-based policy supplies actions instead of random exploration. One agent
controls one building; agents share nothing and can run in parallel lanes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import ObservationBounds, OBSERVATION_DIM
from .nn import AdamState, DenseNet, optimizer_step, soft_update
from .rbc import RbcStrategy, rbc_action, reference_rbc, strategy as rbc_strategy

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))
_SQUASH_EPS = 1e-6

RBC_GUIDED = "rbc_guided"
STOCHASTIC = "stochastic"
DETERMINISTIC = "deterministic"
_MODES = (RBC_GUIDED, STOCHASTIC, DETERMINISTIC)


@dataclass(frozen=True)
class SacHyperparams:
    tau: float = 0.05
    gamma: float = 0.9
    learning_rate: float = 0.005
    temperature: float = 0.2
    batch_size: int = 256
    buffer_capacity: int = 100_000
    exploration_steps: int = 3671
    episodes: int = 10
    hidden_units: int = 256
    hidden_layers: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be in [0, 1], got {self.temperature}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("batch_size", "buffer_capacity", "episodes", "hidden_units", "hidden_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.exploration_steps < 0:
            raise ValueError("exploration_steps must be >= 0")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "gamma": self.gamma,
            "learning_rate": self.learning_rate,
            "temperature": self.temperature,
            "batch_size": self.batch_size,
            "buffer_capacity": self.buffer_capacity,
            "exploration_steps": self.exploration_steps,
            "episodes": self.episodes,
            "hidden_units": self.hidden_units,
            "hidden_layers": self.hidden_layers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SacHyperparams":
        return cls(**d)


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: float
    reward: float
    next_obs: np.ndarray
    done: bool


class ReplayBuffer:
    """Preallocated FIFO buffer with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, 1))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, t: Transition) -> None:
        i = self._next
        self.obs[i] = t.obs
        self.actions[i, 0] = t.action
        self.rewards[i] = t.reward
        self.next_obs[i] = t.next_obs
        self.dones[i] = float(t.done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.dones[idx],
        )

    def clear(self) -> None:
        self._next = 0
        self._size = 0


@dataclass
class UpdateSummary:
    critic_loss: float
    actor_loss: float
    mean_q: float


class SacAgent:
    def __init__(
        self,
        obs_dim: int = OBSERVATION_DIM,
        action_dim: int = 1,
        hyperparams: SacHyperparams | None = None,
        seed: int = 0,
        exploration_policy: RbcStrategy | None = None,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.hyperparams = hyperparams or SacHyperparams()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.exploration_policy = exploration_policy or reference_rbc()

        hp = self.hyperparams
        hidden = [hp.hidden_units] * hp.hidden_layers
        self.actor = DenseNet([obs_dim, *hidden, 2 * action_dim], rng=self.rng)
        self.critics = [
            DenseNet([obs_dim + action_dim, *hidden, 1], rng=self.rng) for _ in range(2)
        ]
        self.targets = [c.clone() for c in self.critics]
        self.actor_opt = AdamState(hp.learning_rate)
        self.critic_opts = [AdamState(hp.learning_rate) for _ in range(2)]
        self.buffer = ReplayBuffer(hp.buffer_capacity, obs_dim)
        self.total_steps = 0
        self.episodes_done = 0

    # -- policy ------------------------------------------------------------

    def _heads(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = self.actor.forward(np.atleast_2d(obs))
        mu = out[:, : self.action_dim]
        log_std = np.clip(out[:, self.action_dim :], LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def deterministic_action(self, obs: np.ndarray) -> np.ndarray:
        mu, _ = self._heads(obs)
        return np.tanh(mu[0])

    def _sample(
        self, obs: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Reparameterized batch sample: (action, log_prob, eps, mu, log_std)."""
        mu, log_std = self._heads(obs)
        sigma = np.exp(log_std)
        eps = self.rng.standard_normal(mu.shape)
        u = mu + sigma * eps
        action = np.tanh(u)
        log_prob = (
            -0.5 * eps**2 - log_std - 0.5 * _LOG_2PI - np.log(1.0 - action**2 + _SQUASH_EPS)
        ).sum(axis=1)
        return action, log_prob, eps, mu, log_std


def select_action(agent: SacAgent, obs: np.ndarray, mode: str, rbc_context=None) -> float:
    """One action fraction in [-1, 1].

    rbc_guided replays the reference expert policy (used during the warm-up
    exploration phase), stochastic samples the tanh-Gaussian, deterministic
    takes tanh of the mean.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (agent.obs_dim,):
        raise ValueError(f"observation shape {obs.shape} != ({agent.obs_dim},)")
    if mode == RBC_GUIDED:
        if rbc_context is None:
            raise ValueError("rbc_guided mode needs an rbc_context")
        return float(
            rbc_action(
                agent.exploration_policy,
                rbc_context.hour,
                rbc_context.net_export_kwh,
                rbc_context.battery,
            )
        )
    if mode == DETERMINISTIC:
        return float(agent.deterministic_action(obs)[0])
    action, _, _, _, _ = agent._sample(obs.reshape(1, -1))
    return float(action[0, 0])


def store(agent: SacAgent, transition: Transition) -> None:
    obs = np.asarray(transition.obs, dtype=np.float64)
    nxt = np.asarray(transition.next_obs, dtype=np.float64)
    if obs.shape != (agent.obs_dim,) or nxt.shape != (agent.obs_dim,):
        raise ValueError(f"transition observation dims must be ({agent.obs_dim},)")
    agent.buffer.append(transition)


def critic_targets(
    agent: SacAgent, rewards: np.ndarray, next_obs: np.ndarray, dones: np.ndarray
) -> np.ndarray:
    """Soft Bellman backup: r + gamma * (1 - done) * (min target Q - T log pi)
    at a freshly sampled next-state action. No gradients flow through this."""
    hp = agent.hyperparams
    next_action, next_logp, _, _, _ = agent._sample(next_obs)
    q_next = np.minimum(
        agent.targets[0].forward(np.hstack([next_obs, next_action]))[:, 0],
        agent.targets[1].forward(np.hstack([next_obs, next_action]))[:, 0],
    )
    return rewards + hp.gamma * (1.0 - dones) * (q_next - hp.temperature * next_logp)


def actor_loss_grads(
    agent: SacAgent, obs: np.ndarray, eps: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Loss mean(T log pi - min Q) at the reparameterized action tanh(mu +
    sigma * eps), and its exact gradients w.r.t. the actor parameters.

    ``eps`` is the frozen standard-normal draw, so for a fixed eps this is a
    deterministic, finite-difference-checkable function of the actor weights.
    """
    hp = agent.hyperparams
    batch = obs.shape[0]
    out_a, cache_a = agent.actor.forward_cache(obs)
    mu = out_a[:, : agent.action_dim]
    raw_log_std = out_a[:, agent.action_dim :]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    sigma = np.exp(log_std)
    action = np.tanh(mu + sigma * eps)
    logp = (
        -0.5 * eps**2 - log_std - 0.5 * _LOG_2PI - np.log(1.0 - action**2 + _SQUASH_EPS)
    ).sum(axis=1)
    xa = np.hstack([obs, action])
    q0, cache0 = agent.critics[0].forward_cache(xa)
    q1, cache1 = agent.critics[1].forward_cache(xa)
    use0 = (q0 <= q1).astype(np.float64)
    loss = float(np.mean(hp.temperature * logp - np.minimum(q0, q1)[:, 0]))

    # dL/da through whichever critic is the pointwise min
    _, gin0 = agent.critics[0].backward(
        cache0, -use0 / batch, param_grads=False, input_grad=True
    )
    _, gin1 = agent.critics[1].backward(
        cache1, -(1.0 - use0) / batch, param_grads=False, input_grad=True
    )
    dl_da = (gin0 + gin1)[:, agent.obs_dim :]

    one_minus_a2 = 1.0 - action**2
    # log-prob pieces: d logp/du via the squash correction; the direct
    # d logp/dlog_std term is -1 (the -0.5 eps^2 term is constant under
    # reparameterization)
    dlogp_du = 2.0 * action * one_minus_a2 / (one_minus_a2 + _SQUASH_EPS)
    dl_du = (hp.temperature / batch) * dlogp_du + dl_da * one_minus_a2
    dl_dmu = dl_du
    dl_dlogstd = dl_du * sigma * eps - hp.temperature / batch
    # clamped log-std entries pass no gradient
    in_range = ((raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)).astype(np.float64)
    dl_dlogstd = dl_dlogstd * in_range

    grad_heads = np.hstack([dl_dmu, dl_dlogstd])
    grads_a, _ = agent.actor.backward(cache_a, grad_heads)
    return loss, grads_a


def update(agent: SacAgent) -> UpdateSummary | None:
    """One gradient step on both critics and the actor plus a target blend.

    Returns None (no-op) while the buffer holds fewer than batch_size
    transitions.
    """
    hp = agent.hyperparams
    if len(agent.buffer) < hp.batch_size:
        return None
    obs, actions, rewards, next_obs, dones = agent.buffer.sample(hp.batch_size, agent.rng)
    batch = hp.batch_size

    y = critic_targets(agent, rewards, next_obs, dones)
    x = np.hstack([obs, actions])
    critic_losses = []
    q_means = []
    for critic, opt in zip(agent.critics, agent.critic_opts):
        q, cache = critic.forward_cache(x)
        err = q[:, 0] - y
        critic_losses.append(float(np.mean(err**2)))
        q_means.append(float(q.mean()))
        grad_out = (2.0 / batch) * err.reshape(-1, 1)
        grads, _ = critic.backward(cache, grad_out)
        optimizer_step(opt, critic.parameters(), grads)

    eps = agent.rng.standard_normal((batch, agent.action_dim))
    actor_loss, grads_a = actor_loss_grads(agent, obs, eps)
    optimizer_step(agent.actor_opt, agent.actor.parameters(), grads_a)

    for target, critic in zip(agent.targets, agent.critics):
        soft_update(target, critic, hp.tau)

    return UpdateSummary(
        critic_loss=float(np.mean(critic_losses)),
        actor_loss=actor_loss,
        mean_q=float(np.mean(q_means)),
    )


def transfer_policy(source: SacAgent, target: SacAgent) -> None:
    """Copy networks and optimizer state onto the target agent.

    The target's replay buffer is cleared and its step counters are moved
    past the exploration phase, so the transferred policy acts from its own
    knowledge immediately (no expert warm-up on arrival).
    """
    if source.obs_dim != target.obs_dim or source.action_dim != target.action_dim:
        raise ValueError("agents have different observation/action dimensions")
    target.actor.copy_from(source.actor)
    for mine, theirs in zip(target.critics, source.critics):
        mine.copy_from(theirs)
    for mine, theirs in zip(target.targets, source.targets):
        mine.copy_from(theirs)
    target.actor_opt = source.actor_opt.clone()
    target.critic_opts = [o.clone() for o in source.critic_opts]
    target.buffer.clear()
    target.total_steps = max(target.hyperparams.exploration_steps, source.total_steps)
    target.episodes_done = max(1, source.episodes_done)


def train(
    agent: SacAgent,
    env,
    building_index: int = 0,
    episodes: int | None = None,
    learn: bool = True,
) -> list[float]:
    """Run episodes on one building's lane; returns per-episode reward sums.

    While learning, actions come from the expert policy during the first
    episode's exploration window and from the stochastic policy afterwards,
    with one gradient update per environment step once the buffer can fill a
    batch. With learn=False the agent acts deterministically and is left
    bit-identical.
    """
    hp = agent.hyperparams
    if episodes is None:
        episodes = hp.episodes
    n_b = env.n_buildings
    sums = []
    for _ in range(episodes):
        observations = env.reset()
        obs = observations[building_index]
        total = 0.0
        for _ in range(env.horizon):
            if not learn:
                mode, ctx = DETERMINISTIC, None
            elif agent.episodes_done == 0 and agent.total_steps < hp.exploration_steps:
                mode, ctx = RBC_GUIDED, env.rbc_context(building_index)
            else:
                mode, ctx = STOCHASTIC, None
            action = select_action(agent, obs, mode, ctx)
            actions = np.zeros(n_b)
            actions[building_index] = action
            result = env.step(actions)
            reward = float(result.rewards[building_index])
            next_obs = result.observations[building_index]
            if learn:
                store(agent, Transition(obs, action, reward, next_obs, result.done))
                agent.total_steps += 1
                update(agent)
            total += reward
            obs = next_obs
        if learn:
            agent.episodes_done += 1
        sums.append(total)
    return sums


# ---------------------------------------------------------------------------
# Policy files
# ---------------------------------------------------------------------------

POLICY_FORMAT = "gridtwin-policy-v1"


def save_policy(
    agent: SacAgent,
    path: str | Path,
    provenance: dict | None = None,
    bounds: ObservationBounds | None = None,
) -> None:
    """Serialize networks, optimizer state, hyperparameters and provenance."""
    payload = {
        "format": POLICY_FORMAT,
        "obs_dim": agent.obs_dim,
        "action_dim": agent.action_dim,
        "seed": agent.seed,
        "hyperparams": agent.hyperparams.to_dict(),
        "exploration_policy": agent.exploration_policy.variant,
        "provenance": provenance or {},
        "observation_bounds": bounds.to_dict() if bounds is not None else None,
        "total_steps": agent.total_steps,
        "episodes_done": agent.episodes_done,
        "actor": agent.actor.to_dict(),
        "critics": [c.to_dict() for c in agent.critics],
        "targets": [t.to_dict() for t in agent.targets],
        "actor_opt": agent.actor_opt.to_dict(),
        "critic_opts": [o.to_dict() for o in agent.critic_opts],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload))


def load_policy(path: str | Path) -> tuple[SacAgent, ObservationBounds | None, dict]:
    """Rebuild an agent from a policy file; returns (agent, bounds, provenance)."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != POLICY_FORMAT:
        raise ValueError(f"{path}: not a {POLICY_FORMAT} file")
    agent = SacAgent(
        obs_dim=payload["obs_dim"],
        action_dim=payload["action_dim"],
        hyperparams=SacHyperparams.from_dict(payload["hyperparams"]),
        seed=payload["seed"],
        exploration_policy=rbc_strategy(payload["exploration_policy"]),
    )
    agent.actor = DenseNet.from_dict(payload["actor"])
    agent.critics = [DenseNet.from_dict(d) for d in payload["critics"]]
    agent.targets = [DenseNet.from_dict(d) for d in payload["targets"]]
    agent.actor_opt = AdamState.from_dict(payload["actor_opt"])
    agent.critic_opts = [AdamState.from_dict(d) for d in payload["critic_opts"]]
    agent.total_steps = payload["total_steps"]
    agent.episodes_done = payload["episodes_done"]
    bounds = payload.get("observation_bounds")
    return (
        agent,
        ObservationBounds.from_dict(bounds) if bounds is not None else None,
        payload.get("provenance", {}),
    )
