"""Colored timed Petri net modelling a job shop floor.

Places come in five groups: per-slot job queues (FIFO), per-slot ready
slots (at most one token), per-machine processing places (at most one
token, timed), per-machine idle flags, and per-machine delivery sinks.
Tokens are colored by the machine they need.  Three transition families
move them along:

* ``selection``  job queue head -> ready slot (agent controlled)
* ``allocation`` ready slot -> processing place of the token's color,
  consuming the idle flag (agent controlled)
* ``delivery``   processing place -> delivery sink, restoring the idle
  flag; fires autonomously once the token's elapsed time reaches its
  duration

The clock is a plain integer.  ``advance_clock`` moves it one tick and
fires whatever deliveries become enabled at the new time.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .instances import Instance

SELECTION = "selection"
ALLOCATION = "allocation"
DELIVERY = "delivery"


class Transition(NamedTuple):
    kind: str
    index: int


class PetriNetError(Exception):
    """Base class for net construction and firing failures."""


class UnknownTransitionError(PetriNetError):
    """Transition kind or index that does not exist in this net."""


class GuardViolationError(PetriNetError):
    """fire() called while the transition's guard is false."""


class CapacityError(PetriNetError):
    """More jobs than job-queue slots."""


@dataclass
class PlaceVisit:
    """One residency interval of a token in a place; leave is None while inside."""

    place: str
    enter: int
    leave: int | None = None


@dataclass
class Token:
    """One operation flowing through the net, colored by its target machine."""

    job: int
    seq: int
    color: int
    duration: int
    elapsed: int = 0
    history: list[PlaceVisit] = field(default_factory=list)


@dataclass(frozen=True)
class FiringEvent:
    transition: Transition
    clock: int
    job: int
    machine: int
    seq: int

    def as_record(self) -> dict:
        """Wire form used by the JSON-lines event log."""
        return {
            "clock": self.clock,
            "transition": self.transition.kind,
            "job": self.job,
            "machine": self.machine,
            "seq": self.seq,
        }


@dataclass
class PetriNet:
    num_machines: int
    capacity: int
    job_places: list[deque[Token]]
    ready_places: list[Token | None]
    machine_places: list[Token | None]
    idle_places: list[int]
    delivery_places: list[list[Token]]
    # job_in_flight[i] is True while a token of slot i occupies a machine
    # place; selection of the slot's next operation is blocked until the
    # delivery fires, which is what makes same-job operations sequential.
    job_in_flight: list[bool] = field(default_factory=list)
    clock: int = 0
    event_log: list[FiringEvent] = field(default_factory=list)

    @property
    def delivered_count(self) -> int:
        return sum(len(place) for place in self.delivery_places)

    @property
    def token_count(self) -> int:
        return (
            sum(len(q) for q in self.job_places)
            + sum(t is not None for t in self.ready_places)
            + sum(t is not None for t in self.machine_places)
            + self.delivered_count
        )


def build_net(instance: Instance, capacity: int | None = None) -> PetriNet:
    """Lay out the net for an instance; extra slots beyond its jobs stay empty."""
    jobs = instance.num_jobs
    if capacity is None:
        capacity = jobs
    if capacity < jobs:
        raise CapacityError(f"capacity {capacity} cannot hold {jobs} jobs")
    net = PetriNet(
        num_machines=instance.num_machines,
        capacity=capacity,
        job_places=[deque() for _ in range(capacity)],
        ready_places=[None] * capacity,
        machine_places=[None] * instance.num_machines,
        idle_places=[1] * instance.num_machines,
        delivery_places=[[] for _ in range(instance.num_machines)],
        job_in_flight=[False] * capacity,
    )
    for i, ops in enumerate(instance.jobs):
        for k, op in enumerate(ops):
            token = Token(job=i, seq=k, color=op.machine, duration=op.duration)
            token.history.append(PlaceVisit(place=f"job[{i}]", enter=0))
            net.job_places[i].append(token)
    return net


def _check_transition(net: PetriNet, transition: Transition) -> None:
    kind, index = transition
    if kind in (SELECTION, ALLOCATION):
        bound = net.capacity
    elif kind == DELIVERY:
        bound = net.num_machines
    else:
        raise UnknownTransitionError(f"unknown transition kind {kind!r}")
    if not 0 <= index < bound:
        raise UnknownTransitionError(f"{kind} index {index} outside [0, {bound - 1}]")


def guard(net: PetriNet, transition: Transition) -> bool:
    """Evaluate the enabling condition, assuming control is asserted.

    Selection requires the slot's ready place to be free and the slot to
    have nothing in flight: a job is one physical part, so its next
    operation only becomes eligible once the previous one has delivered.
    Both conditions keep the one-token places at one token and make
    same-job operations strictly sequential.
    """
    _check_transition(net, transition)
    kind, index = transition
    if kind == SELECTION:
        return (
            bool(net.job_places[index])
            and net.ready_places[index] is None
            and not net.job_in_flight[index]
        )
    if kind == ALLOCATION:
        token = net.ready_places[index]
        return token is not None and net.idle_places[token.color] == 1
    token = net.machine_places[index]
    return token is not None and token.elapsed >= token.duration


def _move(token: Token, place: str, clock: int) -> None:
    token.history[-1].leave = clock
    token.history.append(PlaceVisit(place=place, enter=clock))


def fire(net: PetriNet, transition: Transition) -> FiringEvent:
    """Consume upstream, produce downstream; only legal when the guard holds."""
    if not guard(net, transition):
        raise GuardViolationError(f"guard is false for {transition} at clock {net.clock}")
    kind, index = transition
    clock = net.clock
    if kind == SELECTION:
        token = net.job_places[index].popleft()
        _move(token, f"ready[{index}]", clock)
        net.ready_places[index] = token
    elif kind == ALLOCATION:
        token = net.ready_places[index]
        net.ready_places[index] = None
        net.idle_places[token.color] = 0
        net.job_in_flight[token.job] = True
        token.elapsed = 0
        _move(token, f"machine[{token.color}]", clock)
        net.machine_places[token.color] = token
    else:
        token = net.machine_places[index]
        net.machine_places[index] = None
        net.idle_places[index] = 1
        net.job_in_flight[token.job] = False
        _move(token, f"delivery[{index}]", clock)
        net.delivery_places[index].append(token)
    event = FiringEvent(
        transition=transition, clock=clock, job=token.job, machine=token.color, seq=token.seq
    )
    net.event_log.append(event)
    return event


def advance_clock(net: PetriNet, ticks: int = 1) -> list[FiringEvent]:
    """Advance the clock tick by tick, firing deliveries as they enable.

    Returns every delivery fired along the way.  After the call no
    delivery guard is true: tokens reach elapsed == duration and leave in
    the same tick.
    """
    if ticks < 0:
        raise ValueError(f"ticks must be non-negative, got {ticks}")
    fired: list[FiringEvent] = []
    for _ in range(ticks):
        net.clock += 1
        for m in range(net.num_machines):
            token = net.machine_places[m]
            if token is not None:
                token.elapsed += 1
                if token.elapsed >= token.duration:
                    fired.append(fire(net, Transition(DELIVERY, m)))
    return fired


def is_terminal(net: PetriNet) -> bool:
    """True once every token sits in a delivery sink."""
    return (
        all(not q for q in net.job_places)
        and all(t is None for t in net.ready_places)
        and all(t is None for t in net.machine_places)
    )


def write_event_log(events, fh) -> None:
    """Dump firing events as JSON lines, one record per event."""
    import json

    for event in events:
        fh.write(json.dumps(event.as_record()) + "\n")
