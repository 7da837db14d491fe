"""Event-driven decision environment over the shop-floor net.

An action is an integer in [0, capacity]: index i < capacity selects and
allocates the next operation of job slot i in one shot, index capacity
is standby, which hands control to the clock until the next delivery.
Between agent decisions the environment advances time on its own while
no allocation is possible, so in the default configuration the agent is
only consulted when its choice can actually change something.

Observations are flat float64 vectors sized
``machines + capacity * depth * 2 + 1``; every entry lies in [-1, 1]
with -1 marking absent operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import petrinet
from .instances import Instance
from .petrinet import ALLOCATION, SELECTION, FiringEvent, PlaceVisit, Token, Transition

REWARD_INSTANTANEOUS = "instantaneous"
REWARD_FIXED_NEGATIVE = "fixed_negative"
REWARD_MODES = (REWARD_INSTANTANEOUS, REWARD_FIXED_NEGATIVE)


class EnvError(ValueError):
    """Base class for environment misuse."""


class MaskedActionError(EnvError):
    """A masked action was stepped while masking is on."""


class EpisodeOverError(EnvError):
    """step() or append_operation() after termination."""


class BadJobIndexError(EnvError):
    """append_operation() aimed at a slot that does not exist."""


@dataclass(frozen=True)
class EnvConfig:
    capacity: int | None = None
    observation_depth: int = 1
    standby_penalty: float = 0.1
    reward_mode: str = REWARD_INSTANTANEOUS
    event_based: bool = True
    masking: bool = True

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 1:
            raise ValueError(f"capacity must be positive, got {self.capacity}")
        if self.observation_depth < 1:
            raise ValueError(f"observation depth must be at least 1, got {self.observation_depth}")
        if self.standby_penalty < 0:
            raise ValueError(f"standby penalty must be non-negative, got {self.standby_penalty}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")


@dataclass(frozen=True)
class ScheduleEntry:
    job: int
    op: int
    machine: int
    start: int
    end: int


@dataclass(frozen=True)
class Schedule:
    entries: tuple[ScheduleEntry, ...]
    makespan: int


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    mask: np.ndarray
    reward: float
    terminated: bool
    info: dict


class Environment:
    """Drives the net from composite agent actions to episode termination."""

    def __init__(self, instance: Instance, config: EnvConfig | None = None):
        self.instance = instance
        self.config = config if config is not None else EnvConfig()
        cap = self.config.capacity
        self.capacity = instance.num_jobs if cap is None else cap
        self._net: petrinet.PetriNet | None = None
        self.reset()

    # -- lifecycle ----------------------------------------------------

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        """Rebuild the net from the instance; returns (observation, mask)."""
        self._net = petrinet.build_net(self.instance, self.capacity)
        self._max_duration = float(self.instance.max_duration)
        self._total_ops = self.instance.total_operations
        self._ops_per_slot = [len(ops) for ops in self.instance.jobs]
        self._ops_per_slot += [0] * (self.capacity - len(self._ops_per_slot))
        self._decision_steps = 0
        self._clock_ticks = 0
        self._terminated = petrinet.is_terminal(self._net)
        return self.observe(), self.action_mask()

    @property
    def net(self) -> petrinet.PetriNet:
        return self._net

    @property
    def terminated(self) -> bool:
        return self._terminated

    @property
    def decision_steps(self) -> int:
        return self._decision_steps

    @property
    def clock_ticks(self) -> int:
        return self._clock_ticks

    @property
    def num_actions(self) -> int:
        return self.capacity + 1

    @property
    def observation_size(self) -> int:
        return self._net.num_machines + self.capacity * self.config.observation_depth * 2 + 1

    # -- observation and mask -----------------------------------------

    def observe(self) -> np.ndarray:
        net = self._net
        machines = net.num_machines
        depth = self.config.observation_depth
        obs = np.empty(self.observation_size, dtype=np.float64)
        maxd = self._max_duration
        for m in range(machines):
            token = net.machine_places[m]
            obs[m] = 0.0 if token is None else (token.duration - token.elapsed) / maxd
        base = machines
        for i in range(self.capacity):
            upcoming: list[Token] = []
            ready = net.ready_places[i]
            if ready is not None:
                upcoming.append(ready)
            for token in net.job_places[i]:
                if len(upcoming) >= depth:
                    break
                upcoming.append(token)
            for d in range(depth):
                at = base + (i * depth + d) * 2
                if d < len(upcoming):
                    obs[at] = upcoming[d].color / machines
                    obs[at + 1] = upcoming[d].duration / maxd
                else:
                    obs[at] = -1.0
                    obs[at + 1] = -1.0
        obs[-1] = 1.0 if self._total_ops == 0 else net.delivered_count / self._total_ops
        return obs

    def _slot_token(self, index: int) -> Token | None:
        """The token a composite action on this slot would allocate next."""
        ready = self._net.ready_places[index]
        if ready is not None:
            return ready
        if self._net.job_in_flight[index]:
            return None
        queue = self._net.job_places[index]
        return queue[0] if queue else None

    def _allocation_legal(self, index: int) -> bool:
        token = self._slot_token(index)
        return token is not None and self._net.idle_places[token.color] == 1

    def _any_allocation_legal(self) -> bool:
        return any(self._allocation_legal(i) for i in range(self.capacity))

    def _any_machine_busy(self) -> bool:
        return any(t is not None for t in self._net.machine_places)

    def _standby_legal(self) -> bool:
        if self.config.event_based:
            return self._any_allocation_legal() and self._any_machine_busy()
        return self._any_machine_busy()

    def action_mask(self) -> np.ndarray:
        """Binary legality vector over [0, capacity]; all ones when masking is off."""
        mask = np.zeros(self.num_actions, dtype=bool)
        if self._terminated:
            return mask
        if not self.config.masking:
            mask[:] = True
            return mask
        for i in range(self.capacity):
            mask[i] = self._allocation_legal(i)
        mask[self.capacity] = self._standby_legal()
        return mask

    # -- stepping -------------------------------------------------------

    def step(self, action: int) -> StepResult:
        if self._terminated:
            raise EpisodeOverError("episode already terminated")
        action = int(action)
        if not 0 <= action <= self.capacity:
            raise BadJobIndexError(f"action {action} outside [0, {self.capacity}]")
        standby = action == self.capacity
        legal = self._standby_legal() if standby else self._allocation_legal(action)
        if self.config.masking and not legal:
            raise MaskedActionError(f"action {action} is masked at clock {self._net.clock}")

        self._decision_steps += 1
        events: list[FiringEvent] = []
        if legal:
            if standby:
                events += self._advance_standby()
            else:
                if self._net.ready_places[action] is None:
                    events.append(petrinet.fire(self._net, Transition(SELECTION, action)))
                events.append(petrinet.fire(self._net, Transition(ALLOCATION, action)))
            reward = self._reward(standby)
        else:
            # masking is off and the choice was illegal: the step is spent,
            # nothing moves
            reward = -1.0 if self.config.reward_mode == REWARD_FIXED_NEGATIVE else 0.0

        if self.config.event_based:
            while not petrinet.is_terminal(self._net) and not self._any_allocation_legal():
                self._clock_ticks += 1
                events += petrinet.advance_clock(self._net)

        self._terminated = petrinet.is_terminal(self._net)
        info = {
            "clock": self._net.clock,
            "decision_step_count": self._decision_steps,
            "clock_tick_count": self._clock_ticks,
            "last_events": events,
        }
        return StepResult(
            observation=self.observe(),
            mask=self.action_mask(),
            reward=reward,
            terminated=self._terminated,
            info=info,
        )

    def _advance_standby(self) -> list[FiringEvent]:
        if self.config.event_based:
            while True:
                self._clock_ticks += 1
                fired = petrinet.advance_clock(self._net)
                if fired:
                    return fired
        self._clock_ticks += 1
        return petrinet.advance_clock(self._net)

    def _reward(self, standby: bool) -> float:
        """Utilization reward, read right after the action takes effect."""
        if self.config.reward_mode == REWARD_FIXED_NEGATIVE:
            return -1.0
        idle = sum(self._net.idle_places)
        reward = 1.0 - idle / self._net.num_machines
        if standby:
            reward -= self.config.standby_penalty
        return reward

    # -- dynamic operations ---------------------------------------------

    def append_operation(self, job: int, machine: int, duration: int) -> None:
        """Queue one more operation onto a job slot mid-episode."""
        if self._terminated:
            raise EpisodeOverError("cannot append once the episode has terminated")
        if not 0 <= job < self.capacity:
            raise BadJobIndexError(f"job slot {job} outside [0, {self.capacity - 1}]")
        if not 0 <= machine < self._net.num_machines:
            raise EnvError(f"machine {machine} outside [0, {self._net.num_machines - 1}]")
        if duration <= 0:
            raise EnvError(f"duration must be positive, got {duration}")
        token = Token(job=job, seq=self._ops_per_slot[job], color=machine, duration=duration)
        token.history.append(PlaceVisit(place=f"job[{job}]", enter=self._net.clock))
        self._net.job_places[job].append(token)
        self._ops_per_slot[job] += 1
        self._total_ops += 1
        if duration > self._max_duration:
            self._max_duration = float(duration)

    # -- results ----------------------------------------------------------

    def extract_schedule(self) -> Schedule:
        """Assemble the delivered operations' processing intervals."""
        entries = []
        for machine, tokens in enumerate(self._net.delivery_places):
            for token in tokens:
                visit = next(v for v in token.history if v.place == f"machine[{machine}]")
                entries.append(
                    ScheduleEntry(
                        job=token.job,
                        op=token.seq,
                        machine=machine,
                        start=visit.enter,
                        end=visit.leave,
                    )
                )
        entries.sort(key=lambda e: (e.start, e.machine, e.job, e.op))
        makespan = max((e.end for e in entries), default=0)
        return Schedule(entries=tuple(entries), makespan=makespan)


def expected_operations(instance: Instance) -> dict[tuple[int, int], tuple[int, int]]:
    """Map (job, op index) -> (machine, duration) for schedule validation."""
    table = {}
    for i, ops in enumerate(instance.jobs):
        for k, op in enumerate(ops):
            table[(i, k)] = (op.machine, op.duration)
    return table


def validate_schedule(
    schedule: Schedule, operations: dict[tuple[int, int], tuple[int, int]]
) -> list[str]:
    """Check a schedule against an operation table; returns violations.

    Verifies coverage (every operation exactly once), machine assignment,
    interval length, per-machine non-overlap, per-job precedence, and the
    recorded makespan.  An empty list means the schedule is valid.
    """
    problems = []
    seen: dict[tuple[int, int], ScheduleEntry] = {}
    for e in schedule.entries:
        key = (e.job, e.op)
        if key in seen:
            problems.append(f"operation {key} scheduled twice")
            continue
        seen[key] = e
        if key not in operations:
            problems.append(f"operation {key} not part of the problem")
            continue
        machine, duration = operations[key]
        if e.machine != machine:
            problems.append(f"operation {key} ran on machine {e.machine}, expected {machine}")
        if e.start < 0:
            problems.append(f"operation {key} starts at negative time {e.start}")
        if e.end - e.start != duration:
            problems.append(
                f"operation {key} ran for {e.end - e.start} ticks, expected {duration}"
            )
    for key in operations:
        if key not in seen:
            problems.append(f"operation {key} missing from the schedule")

    by_machine: dict[int, list[ScheduleEntry]] = {}
    for e in schedule.entries:
        by_machine.setdefault(e.machine, []).append(e)
    for machine, entries in sorted(by_machine.items()):
        entries.sort(key=lambda e: (e.start, e.end))
        for prev, cur in zip(entries, entries[1:]):
            if cur.start < prev.end:
                problems.append(
                    f"machine {machine}: ({prev.job},{prev.op}) and ({cur.job},{cur.op}) overlap"
                )

    by_job: dict[int, list[ScheduleEntry]] = {}
    for e in schedule.entries:
        by_job.setdefault(e.job, []).append(e)
    for job, entries in sorted(by_job.items()):
        entries.sort(key=lambda e: e.op)
        for prev, cur in zip(entries, entries[1:]):
            if cur.op != prev.op + 1:
                problems.append(f"job {job}: op sequence jumps from {prev.op} to {cur.op}")
            if cur.start < prev.end:
                problems.append(f"job {job}: op {cur.op} starts before op {prev.op} ends")

    true_makespan = max((e.end for e in schedule.entries), default=0)
    if schedule.makespan != true_makespan:
        problems.append(f"recorded makespan {schedule.makespan} != max end {true_makespan}")
    return problems
