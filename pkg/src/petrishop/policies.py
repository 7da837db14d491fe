"""Dispatching policies: six priority rules, a random-legal baseline, AGENT hook.

The rules rank the job slots that the current mask allows and never pick
standby; ties go to the lowest slot index so every rule is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .environment import EnvConfig, Environment, Schedule


class PolicyKind(Enum):
    SPT = "spt"  # shortest head operation
    LPT = "lpt"  # longest head operation
    SPS = "sps"  # fewest remaining operations
    LPS = "lps"  # most remaining operations
    SSO = "sso"  # shortest subsequent operation
    LSO = "lso"  # longest subsequent operation
    RANDOM = "random"
    AGENT = "agent"

    @classmethod
    def from_name(cls, name: str) -> "PolicyKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown policy {name!r}") from None


HEURISTICS = (
    PolicyKind.SPT,
    PolicyKind.LPT,
    PolicyKind.SPS,
    PolicyKind.LPS,
    PolicyKind.SSO,
    PolicyKind.LSO,
)


@dataclass(frozen=True)
class JobView:
    """What a priority rule sees of one job slot."""

    job: int
    head_duration: int
    remaining_ops: int
    next_duration: int  # 0 when the head is the job's last operation


def views_from_env(env: Environment) -> list[JobView | None]:
    """Per-slot rule inputs; None for slots with nothing left to run."""
    net = env.net
    views: list[JobView | None] = []
    for i in range(env.capacity):
        queue = net.job_places[i]
        ready = net.ready_places[i]
        if ready is not None:
            head = ready
            remaining = 1 + len(queue)
            nxt = queue[0].duration if queue else 0
        elif queue:
            head = queue[0]
            remaining = len(queue)
            nxt = queue[1].duration if len(queue) > 1 else 0
        else:
            views.append(None)
            continue
        views.append(
            JobView(
                job=i,
                head_duration=head.duration,
                remaining_ops=remaining,
                next_duration=nxt,
            )
        )
    return views


_RULE_KEYS = {
    PolicyKind.SPT: (lambda v: v.head_duration, False),
    PolicyKind.LPT: (lambda v: v.head_duration, True),
    PolicyKind.SPS: (lambda v: v.remaining_ops, False),
    PolicyKind.LPS: (lambda v: v.remaining_ops, True),
    PolicyKind.SSO: (lambda v: v.next_duration, False),
    PolicyKind.LSO: (lambda v: v.next_duration, True),
}


def decide(
    policy: PolicyKind,
    views: list[JobView | None],
    mask: np.ndarray,
    rng: np.random.Generator | None = None,
) -> int:
    """Pick an allocation action for the current decision point."""
    if policy == PolicyKind.AGENT:
        raise ValueError("agent actions come from a trained policy, not from decide()")
    candidates = [v for v in views if v is not None and mask[v.job]]
    if not candidates:
        raise ValueError("no job slot is enabled; nothing for a dispatching rule to rank")
    if policy == PolicyKind.RANDOM:
        if rng is None:
            raise ValueError("the random policy needs an rng")
        return int(candidates[rng.integers(len(candidates))].job)
    key, largest = _RULE_KEYS[policy]
    if largest:
        best = max(candidates, key=lambda v: (key(v), -v.job))
    else:
        best = min(candidates, key=lambda v: (key(v), v.job))
    return best.job


@dataclass(frozen=True)
class EpisodeResult:
    schedule: Schedule
    decision_steps: int
    clock_ticks: int
    rewards: tuple[float, ...]

    @property
    def makespan(self) -> int:
        return self.schedule.makespan


def run_episode(
    policy: PolicyKind,
    instance,
    config: EnvConfig | None = None,
    seed: int = 0,
) -> EpisodeResult:
    """Play one full episode under a dispatching rule and collect its schedule."""
    env = Environment(instance, config)
    rng = np.random.default_rng(seed)
    rewards: list[float] = []
    _, mask = env.reset()
    while not env.terminated:
        action = decide(policy, views_from_env(env), mask, rng)
        result = env.step(action)
        rewards.append(result.reward)
        mask = result.mask
    return EpisodeResult(
        schedule=env.extract_schedule(),
        decision_steps=env.decision_steps,
        clock_ticks=env.clock_ticks,
        rewards=tuple(rewards),
    )
