"""Maskable actor-critic PPO written directly on numpy arrays.

Both networks are two-hidden-layer tanh perceptrons in double precision.
Every gradient is derived by hand, which keeps the trainer free of any
autograd dependency and makes the finite-difference checks in the test
suite meaningful: the analytic gradients here are the thing under test,
not a framework's.

Masking happens at the logit level: illegal entries are pinned to -1e9
before the softmax, which underflows their probabilities to exactly 0,
so a masked action can never be sampled and contributes nothing to any
gradient.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .environment import EnvConfig, Environment
from .instances import Instance
from .policies import EpisodeResult

MASK_FILL = -1e9

_LAYER_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")
CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Unreadable or incompatible checkpoint file."""


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 100_000
    rollout_steps: int = 2048
    epochs: int = 10
    minibatch_size: int = 64
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    learning_rate: float = 3e-4
    hidden_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 1 or self.rollout_steps < 1:
            raise ValueError("step counts must be positive")
        if self.minibatch_size < 1 or self.minibatch_size > self.rollout_steps:
            raise ValueError("minibatch size must lie in [1, rollout_steps]")
        if not 0 < self.clip_ratio < 1:
            raise ValueError(f"clip ratio must lie in (0, 1), got {self.clip_ratio}")


# -- networks -----------------------------------------------------------


@dataclass
class MlpParams:
    """Two hidden tanh layers and a linear head; arrays are (in, out)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def layers(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.layers()))


@dataclass
class AgentParams:
    actor: MlpParams
    critic: MlpParams
    obs_dim: int
    num_actions: int
    hidden: int


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols], dtype=np.float64)


def _init_mlp(rng: np.random.Generator, in_dim: int, hidden: int, out_dim: int, head_gain: float) -> MlpParams:
    return MlpParams(
        w1=_orthogonal(rng, in_dim, hidden, math.sqrt(2.0)),
        b1=np.zeros(hidden),
        w2=_orthogonal(rng, hidden, hidden, math.sqrt(2.0)),
        b2=np.zeros(hidden),
        w3=_orthogonal(rng, hidden, out_dim, head_gain),
        b3=np.zeros(out_dim),
    )


def init_params(obs_dim: int, num_actions: int, hidden: int, rng: np.random.Generator) -> AgentParams:
    """Orthogonal initialization; small actor head so the start policy is near uniform."""
    actor = _init_mlp(rng, obs_dim, hidden, num_actions, head_gain=0.01)
    critic = _init_mlp(rng, obs_dim, hidden, 1, head_gain=1.0)
    return AgentParams(actor=actor, critic=critic, obs_dim=obs_dim, num_actions=num_actions, hidden=hidden)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Batch forward pass; returns the output and the cache backward needs."""
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    out = h2 @ params.w3 + params.b3
    return out, (x, h1, h2)


def mlp_backward(params: MlpParams, cache: tuple, dout: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Gradients of a scalar loss given d(loss)/d(out); also returns d(loss)/d(x)."""
    x, h1, h2 = cache
    dw3 = h2.T @ dout
    db3 = dout.sum(axis=0)
    dh2 = dout @ params.w3.T
    dz2 = dh2 * (1.0 - h2 * h2)
    dw2 = h1.T @ dz2
    db2 = dz2.sum(axis=0)
    dh1 = dz2 @ params.w2.T
    dz1 = dh1 * (1.0 - h1 * h1)
    dw1 = x.T @ dz1
    db1 = dz1.sum(axis=0)
    dx = dz1 @ params.w1.T
    return MlpParams(w1=dw1, b1=db1, w2=dw2, b2=db2, w3=dw3, b3=db3), dx


def value_input_gradient(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    """d(value)/d(observation) for a single observation vector."""
    _, cache = mlp_forward(params, obs[None, :])
    _, dx = mlp_backward(params, cache, np.ones((1, 1)))
    return dx[0]


# -- masked categorical --------------------------------------------------


def masked_distribution(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax with illegal logits pinned to -1e9; masked entries come out 0.0.

    The fill is so far below any reachable logit that exp underflows to an
    exact zero after max subtraction, so the distribution's support is the
    set of enabled actions and nothing else.
    """
    z = np.where(mask, logits, MASK_FILL)
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    e = np.where(mask, e, 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def masked_log_prob(logits: np.ndarray, mask: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """log pi(a) over a batch; actions must be enabled in their masks."""
    z = np.where(mask, logits, MASK_FILL)
    zmax = z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z - zmax), 0.0)
    lse = np.log(e.sum(axis=-1)) + zmax[..., 0]
    rows = np.arange(z.shape[0])
    return z[rows, actions] - lse


def sample_masked(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; zero-probability entries are unreachable."""
    c = np.cumsum(probs)
    r = rng.random() * c[-1]
    return int(min(np.searchsorted(c, r, side="right"), len(probs) - 1))


# -- advantage estimation -------------------------------------------------


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially weighted TD-error advantages and value targets.

    dones[t] marks that step t ended an episode, so nothing bootstraps
    across it; last_value bootstraps the final step when the rollout was
    truncated mid-episode.
    """
    steps = len(rewards)
    advantages = np.zeros(steps)
    gae = 0.0
    for t in range(steps - 1, -1, -1):
        next_value = last_value if t == steps - 1 else values[t + 1]
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        advantages[t] = gae
    return advantages, advantages + values


# -- loss ------------------------------------------------------------------


@dataclass(frozen=True)
class Batch:
    observations: np.ndarray
    actions: np.ndarray
    masks: np.ndarray
    log_probs_old: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def take(self, idx: np.ndarray) -> "Batch":
        return Batch(
            observations=self.observations[idx],
            actions=self.actions[idx],
            masks=self.masks[idx],
            log_probs_old=self.log_probs_old[idx],
            advantages=self.advantages[idx],
            returns=self.returns[idx],
        )


@dataclass(frozen=True)
class LossStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    kl: float
    clip_fraction: float


def loss_and_grads(
    actor: MlpParams, critic: MlpParams, batch: Batch, config: TrainConfig
) -> tuple[LossStats, MlpParams, MlpParams]:
    """Total PPO loss with hand-derived parameter gradients.

    Minimized objective: -clipped surrogate + value_coef * value error
    - entropy_coef * entropy.  The min() in the surrogate zeroes the
    policy gradient wherever the clipped branch is active, exactly like
    the usual autograd formulation.
    """
    n = batch.observations.shape[0]
    eps = config.clip_ratio

    logits, actor_cache = mlp_forward(actor, batch.observations)
    z = np.where(batch.masks, logits, MASK_FILL)
    zmax = z.max(axis=1, keepdims=True)
    e = np.where(batch.masks, np.exp(z - zmax), 0.0)
    sums = e.sum(axis=1)
    probs = e / sums[:, None]
    rows = np.arange(n)
    log_probs = z[rows, batch.actions] - (np.log(sums) + zmax[:, 0])

    ratio = np.exp(log_probs - batch.log_probs_old)
    surr_raw = ratio * batch.advantages
    surr_clip = np.clip(ratio, 1.0 - eps, 1.0 + eps) * batch.advantages
    use_raw = surr_raw <= surr_clip
    policy_loss = -np.where(use_raw, surr_raw, surr_clip).mean()

    safe_log = np.where(probs > 0.0, np.log(np.where(probs > 0.0, probs, 1.0)), 0.0)
    entropies = -(probs * safe_log).sum(axis=1)
    entropy_mean = entropies.mean()

    values, critic_cache = mlp_forward(critic, batch.observations)
    values = values[:, 0]
    errors = values - batch.returns
    value_loss = np.mean(errors * errors)

    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy_mean

    # gradient wrt actor logits
    dlogp = np.where(use_raw, -batch.advantages * ratio, 0.0) / n
    one_hot = np.zeros_like(probs)
    one_hot[rows, batch.actions] = 1.0
    dlogits = dlogp[:, None] * (one_hot - probs)
    dlogits += (config.entropy_coef / n) * probs * (safe_log + entropies[:, None])
    actor_grads, _ = mlp_backward(actor, actor_cache, dlogits)

    dvalues = (2.0 * config.value_coef / n) * errors
    critic_grads, _ = mlp_backward(critic, critic_cache, dvalues[:, None])

    with np.errstate(divide="ignore"):
        kl = float(np.mean((ratio - 1.0) - np.log(ratio)))
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > eps))
    stats = LossStats(
        loss=float(loss),
        policy_loss=float(policy_loss),
        value_loss=float(value_loss),
        entropy=float(entropy_mean),
        kl=kl,
        clip_fraction=clip_fraction,
    )
    return stats, actor_grads, critic_grads


def total_loss(actor: MlpParams, critic: MlpParams, batch: Batch, config: TrainConfig) -> float:
    """Forward-only loss value, used by the finite-difference checks."""
    stats, _, _ = loss_and_grads(actor, critic, batch, config)
    return stats.loss


def flatten_params(params: MlpParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.layers()])


def unflatten_params(flat: np.ndarray, template: MlpParams) -> MlpParams:
    arrays = []
    at = 0
    for a in template.layers():
        arrays.append(flat[at : at + a.size].reshape(a.shape).copy())
        at += a.size
    if at != flat.size:
        raise ValueError(f"parameter vector has {flat.size} entries, expected {at}")
    return MlpParams(*arrays)


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators with bias correction."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.layers()],
            v=[np.zeros_like(a) for a in params.layers()],
        )


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, lr: float) -> None:
    state.t += 1
    correct1 = 1.0 - state.beta1**state.t
    correct2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params.layers(), grads.layers(), state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / correct1) / (np.sqrt(v / correct2) + state.eps)


# -- update and training loop -------------------------------------------------


@dataclass(frozen=True)
class UpdateStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    kl: float
    clip_fraction: float


def ppo_update(
    params: AgentParams,
    actor_opt: AdamState,
    critic_opt: AdamState,
    batch: Batch,
    config: TrainConfig,
    rng: np.random.Generator,
) -> UpdateStats:
    """Several epochs of shuffled minibatch steps over one rollout."""
    n = batch.observations.shape[0]
    collected: list[LossStats] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for at in range(0, n, config.minibatch_size):
            idx = order[at : at + config.minibatch_size]
            stats, actor_grads, critic_grads = loss_and_grads(
                params.actor, params.critic, batch.take(idx), config
            )
            adam_step(params.actor, actor_grads, actor_opt, config.learning_rate)
            adam_step(params.critic, critic_grads, critic_opt, config.learning_rate)
            collected.append(stats)
    return UpdateStats(
        loss=float(np.mean([s.loss for s in collected])),
        policy_loss=float(np.mean([s.policy_loss for s in collected])),
        value_loss=float(np.mean([s.value_loss for s in collected])),
        entropy=float(np.mean([s.entropy for s in collected])),
        kl=float(np.mean([s.kl for s in collected])),
        clip_fraction=float(np.mean([s.clip_fraction for s in collected])),
    )


@dataclass(frozen=True)
class MetricsRow:
    step: int
    ep_len: float
    ep_rew: float
    kl: float
    entropy: float
    vf_loss: float
    loss: float


METRICS_COLUMNS = ("step", "ep_len", "ep_rew", "kl", "entropy", "vf_loss", "loss")


def write_metrics(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.step, row.ep_len, row.ep_rew, row.kl, row.entropy, row.vf_loss, row.loss]
            )


def read_metrics(path) -> list[MetricsRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            rows.append(
                MetricsRow(
                    step=int(record["step"]),
                    ep_len=float(record["ep_len"]),
                    ep_rew=float(record["ep_rew"]),
                    kl=float(record["kl"]),
                    entropy=float(record["entropy"]),
                    vf_loss=float(record["vf_loss"]),
                    loss=float(record["loss"]),
                )
            )
    return rows


@dataclass
class TrainResult:
    params: AgentParams
    rows: list[MetricsRow]
    episode_lengths: list[int]
    episode_rewards: list[float]


def _as_instances(instances) -> list[Instance]:
    if isinstance(instances, Instance):
        return [instances]
    out = list(instances)
    if not out:
        raise ValueError("need at least one instance to train on")
    return out


def train(
    instances,
    env_config: EnvConfig | None = None,
    config: TrainConfig | None = None,
    metrics_path=None,
) -> TrainResult:
    """Run maskable PPO for config.total_steps decision steps.

    ``instances`` may be a single instance or a family; a fresh episode
    samples one uniformly.  A family must share machine count and
    capacity so observations keep one shape.  Training is deterministic
    for a fixed config and seed.
    """
    pool = _as_instances(instances)
    env_config = env_config if env_config is not None else EnvConfig()
    config = config if config is not None else TrainConfig()
    rng = np.random.default_rng(config.seed)

    def fresh_env() -> Environment:
        inst = pool[0] if len(pool) == 1 else pool[int(rng.integers(len(pool)))]
        return Environment(inst, env_config)

    env = fresh_env()
    obs_dim = env.observation_size
    num_actions = env.num_actions
    for inst in pool[1:]:
        probe = Environment(inst, env_config)
        if (probe.observation_size, probe.num_actions) != (obs_dim, num_actions):
            raise ValueError("instances in a family must share observation and action shapes")

    params = init_params(obs_dim, num_actions, config.hidden_size, rng)
    actor_opt = AdamState.for_params(params.actor)
    critic_opt = AdamState.for_params(params.critic)

    rows: list[MetricsRow] = []
    episode_lengths: list[int] = []
    episode_rewards: list[float] = []
    last_ep_len = 0.0
    last_ep_rew = 0.0

    obs, mask = env.reset()
    ep_len = 0
    ep_rew = 0.0
    steps_done = 0
    while steps_done < config.total_steps:
        horizon = min(config.rollout_steps, config.total_steps - steps_done)
        observations = np.empty((horizon, obs_dim))
        masks = np.empty((horizon, num_actions), dtype=bool)
        actions = np.empty(horizon, dtype=np.int64)
        rewards = np.empty(horizon)
        dones = np.empty(horizon)
        values = np.empty(horizon)
        log_probs = np.empty(horizon)
        finished_lens: list[int] = []
        finished_rews: list[float] = []

        for t in range(horizon):
            logits, _ = mlp_forward(params.actor, obs[None, :])
            probs = masked_distribution(logits[0], mask)
            action = sample_masked(probs, rng)
            value, _ = mlp_forward(params.critic, obs[None, :])

            observations[t] = obs
            masks[t] = mask
            actions[t] = action
            values[t] = value[0, 0]
            log_probs[t] = np.log(probs[action])

            result = env.step(action)
            rewards[t] = result.reward
            dones[t] = 1.0 if result.terminated else 0.0
            ep_len += 1
            ep_rew += result.reward
            if result.terminated:
                finished_lens.append(ep_len)
                finished_rews.append(ep_rew)
                ep_len = 0
                ep_rew = 0.0
                env = fresh_env()
                obs, mask = env.reset()
            else:
                obs, mask = result.observation, result.mask

        if dones[horizon - 1]:
            last_value = 0.0
        else:
            value, _ = mlp_forward(params.critic, obs[None, :])
            last_value = float(value[0, 0])
        advantages, returns = compute_gae(
            rewards, values, dones, last_value, config.gamma, config.gae_lambda
        )
        spread = advantages.std()
        advantages = (advantages - advantages.mean()) / (spread + 1e-8)

        batch = Batch(
            observations=observations,
            actions=actions,
            masks=masks,
            log_probs_old=log_probs,
            advantages=advantages,
            returns=returns,
        )
        stats = ppo_update(params, actor_opt, critic_opt, batch, config, rng)

        steps_done += horizon
        episode_lengths.extend(finished_lens)
        episode_rewards.extend(finished_rews)
        if finished_lens:
            last_ep_len = float(np.mean(finished_lens))
            last_ep_rew = float(np.mean(finished_rews))
        rows.append(
            MetricsRow(
                step=steps_done,
                ep_len=last_ep_len,
                ep_rew=last_ep_rew,
                kl=stats.kl,
                entropy=stats.entropy,
                vf_loss=stats.value_loss,
                loss=stats.loss,
            )
        )

    if metrics_path is not None:
        write_metrics(rows, metrics_path)
    return TrainResult(
        params=params,
        rows=rows,
        episode_lengths=episode_lengths,
        episode_rewards=episode_rewards,
    )


def greedy_action(params: AgentParams, obs: np.ndarray, mask: np.ndarray) -> int:
    logits, _ = mlp_forward(params.actor, obs[None, :])
    z = np.where(mask, logits[0], MASK_FILL)
    return int(np.argmax(z))


def evaluate(
    params: AgentParams,
    instance: Instance,
    env_config: EnvConfig | None = None,
    max_steps: int | None = None,
) -> EpisodeResult:
    """Greedy rollout of a trained policy; ties go to the lowest action index."""
    env = Environment(instance, env_config)
    if (env.observation_size, env.num_actions) != (params.obs_dim, params.num_actions):
        raise ValueError(
            f"agent expects obs {params.obs_dim}/actions {params.num_actions}, "
            f"environment provides {env.observation_size}/{env.num_actions}"
        )
    if max_steps is None:
        max_steps = max(10_000, 50 * instance.total_operations + 1_000)
    obs, mask = env.reset()
    rewards = []
    steps = 0
    while not env.terminated:
        if steps >= max_steps:
            raise RuntimeError(f"greedy evaluation exceeded {max_steps} steps without terminating")
        action = greedy_action(params, obs, mask)
        result = env.step(action)
        rewards.append(result.reward)
        obs, mask = result.observation, result.mask
        steps += 1
    return EpisodeResult(
        schedule=env.extract_schedule(),
        decision_steps=env.decision_steps,
        clock_ticks=env.clock_ticks,
        rewards=tuple(rewards),
    )


# -- checkpoints -----------------------------------------------------------


def save_checkpoint(
    path,
    params: AgentParams,
    env_config: EnvConfig | None = None,
    train_config: TrainConfig | None = None,
) -> None:
    """Write the agent as versioned JSON: shapes plus row-major weight lists."""
    from . import __version__

    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "core_version": __version__,
        "kind": "maskable-ppo-agent",
        "obs_dim": params.obs_dim,
        "num_actions": params.num_actions,
        "hidden": params.hidden,
        "layout": "per-network layers in order w1,b1,w2,b2,w3,b3; matrices are (in, out), row-major",
        "actor": {name: arr.tolist() for name, arr in zip(_LAYER_NAMES, params.actor.layers())},
        "critic": {name: arr.tolist() for name, arr in zip(_LAYER_NAMES, params.critic.layers())},
    }
    if env_config is not None:
        doc["env_config"] = asdict(env_config)
    if train_config is not None:
        doc["train_config"] = asdict(train_config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _mlp_from_doc(doc: dict, expect: dict[str, tuple[int, ...]]) -> MlpParams:
    arrays = {}
    for name in _LAYER_NAMES:
        if name not in doc:
            raise CheckpointError(f"missing layer {name!r}")
        arr = np.asarray(doc[name], dtype=np.float64)
        if arr.shape != expect[name]:
            raise CheckpointError(f"layer {name!r} has shape {arr.shape}, expected {expect[name]}")
        arrays[name] = arr
    return MlpParams(**arrays)


def load_checkpoint(path) -> tuple[AgentParams, dict]:
    """Read a checkpoint; returns the params and the remaining metadata."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {version!r}")
    try:
        obs_dim = int(doc["obs_dim"])
        num_actions = int(doc["num_actions"])
        hidden = int(doc["hidden"])
    except KeyError as missing:
        raise CheckpointError(f"missing checkpoint field {missing}") from None
    actor_shapes = {
        "w1": (obs_dim, hidden),
        "b1": (hidden,),
        "w2": (hidden, hidden),
        "b2": (hidden,),
        "w3": (hidden, num_actions),
        "b3": (num_actions,),
    }
    critic_shapes = dict(actor_shapes)
    critic_shapes["w3"] = (hidden, 1)
    critic_shapes["b3"] = (1,)
    params = AgentParams(
        actor=_mlp_from_doc(doc.get("actor", {}), actor_shapes),
        critic=_mlp_from_doc(doc.get("critic", {}), critic_shapes),
        obs_dim=obs_dim,
        num_actions=num_actions,
        hidden=hidden,
    )
    meta = {k: v for k, v in doc.items() if k not in ("actor", "critic")}
    return params, meta
