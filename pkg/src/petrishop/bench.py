"""Benchmark harness: episode timing, optimality gaps, exhaustive search,
ablation presets and gantt export.

Two exhaustive solvers live here on purpose.  ``env_minimum_makespan``
branches over the environment itself, so it exercises the net dynamics;
``exhaustive_optimum`` is a plain recursive scheduler that never touches
the net.  Agreement between the two on small instances is the strongest
correctness evidence the test suite has.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .environment import EnvConfig, Environment, Schedule, ScheduleEntry, expected_operations, validate_schedule
from .instances import Instance
from .mppo import AgentParams, TrainConfig, TrainResult, evaluate, train
from .policies import HEURISTICS, PolicyKind, decide, run_episode, views_from_env

ABLATION_MODES = ("reference", "no_mask", "fixed_reward", "no_event")


def optimality_gap(makespan: float, baseline: float) -> float:
    """Signed relative gap against a reference makespan.

    Positive means better than the reference (shorter schedule), negative
    worse, matching how improvement percentages are usually quoted.
    """
    if baseline <= 0:
        raise ValueError(f"baseline makespan must be positive, got {baseline}")
    return -(makespan - baseline) / baseline


# -- bench runs -----------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    instance: str
    size: str
    policy: str
    makespan: int
    valid: bool
    gap: float | None
    seconds: float
    decision_steps: int
    clock_ticks: int
    error: str | None = None


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    @property
    def all_valid(self) -> bool:
        return all(row.valid for row in self.rows)


def _policy_episode(
    policy: str,
    instance: Instance,
    config: EnvConfig,
    seed: int,
    agent: AgentParams | None,
):
    kind = PolicyKind.from_name(policy)
    if kind is PolicyKind.AGENT:
        if agent is None:
            raise ValueError("policy 'agent' needs a checkpoint")
        return evaluate(agent, instance, config)
    return run_episode(kind, instance, config, seed=seed)


def run_bench(
    instances: dict[str, Instance],
    policies,
    env_config: EnvConfig | None = None,
    baselines: dict[str, float] | None = None,
    agent: AgentParams | None = None,
    seed: int = 0,
) -> BenchReport:
    """One row per (instance, policy): makespan, validity, gap, wall time.

    Wall time is informational; validity comes from replaying the
    extracted schedule through the independent checker.
    """
    env_config = env_config if env_config is not None else EnvConfig()
    baselines = baselines or {}
    report = BenchReport()
    for name, instance in sorted(instances.items()):
        operations = expected_operations(instance)
        size = f"{instance.num_jobs}x{instance.num_machines}"
        for policy in policies:
            start = time.perf_counter()
            try:
                episode = _policy_episode(policy, instance, env_config, seed, agent)
            except Exception as failure:
                report.rows.append(
                    BenchRow(
                        instance=name,
                        size=size,
                        policy=policy,
                        makespan=0,
                        valid=False,
                        gap=None,
                        seconds=time.perf_counter() - start,
                        decision_steps=0,
                        clock_ticks=0,
                        error=str(failure),
                    )
                )
                continue
            seconds = time.perf_counter() - start
            violations = validate_schedule(episode.schedule, operations)
            gap = None
            if name in baselines:
                gap = optimality_gap(episode.schedule.makespan, baselines[name])
            report.rows.append(
                BenchRow(
                    instance=name,
                    size=size,
                    policy=policy,
                    makespan=episode.schedule.makespan,
                    valid=not violations,
                    gap=gap,
                    seconds=seconds,
                    decision_steps=episode.decision_steps,
                    clock_ticks=episode.clock_ticks,
                )
            )
    return report


BENCH_COLUMNS = (
    "instance",
    "size",
    "policy",
    "makespan",
    "valid",
    "gap",
    "seconds",
    "decision_steps",
    "clock_ticks",
    "error",
)


def report_csv(report: BenchReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for row in report.rows:
            writer.writerow(
                [
                    row.instance,
                    row.size,
                    row.policy,
                    row.makespan,
                    int(row.valid),
                    "" if row.gap is None else f"{row.gap:.6f}",
                    f"{row.seconds:.6f}",
                    row.decision_steps,
                    row.clock_ticks,
                    row.error or "",
                ]
            )


def report_text(report: BenchReport) -> str:
    """Fixed-width table of the report, one line per row."""
    header = ["instance", "size", "policy", "makespan", "valid", "gap%", "seconds"]
    lines = [header]
    for row in report.rows:
        gap = "-" if row.gap is None else f"{100 * row.gap:+.1f}"
        status = "yes" if row.valid else (row.error or "NO")
        lines.append(
            [row.instance, row.size, row.policy, str(row.makespan), status, gap, f"{row.seconds:.3f}"]
        )
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = io.StringIO()
    for line in lines:
        out.write("  ".join(cell.rjust(w) for cell, w in zip(line, widths)).rstrip() + "\n")
    return out.getvalue()


# -- schedule serialization and gantt export ---------------------------------


def schedule_to_json(schedule: Schedule) -> dict:
    return {
        "makespan": schedule.makespan,
        "operations": [
            {"job": e.job, "op": e.op, "machine": e.machine, "start": e.start, "end": e.end}
            for e in schedule.entries
        ],
    }


def schedule_from_json(doc: dict) -> Schedule:
    try:
        entries = tuple(
            ScheduleEntry(
                job=int(op["job"]),
                op=int(op["op"]),
                machine=int(op["machine"]),
                start=int(op["start"]),
                end=int(op["end"]),
            )
            for op in doc["operations"]
        )
        makespan = int(doc["makespan"])
    except (KeyError, TypeError) as bad:
        raise ValueError(f"malformed schedule document: {bad}") from None
    return Schedule(entries=entries, makespan=makespan)


_SVG_PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)


def _gantt_svg(schedule: Schedule) -> str:
    """Hand-rolled SVG: exactly one rect per operation, machines as rows."""
    if schedule.entries:
        machines = 1 + max(e.machine for e in schedule.entries)
        span = max(schedule.makespan, 1)
    else:
        machines, span = 1, 1
    row_h, gap, left, top = 28, 6, 70, 30
    scale = 900.0 / span
    width = left + 900 + 20
    height = top + machines * (row_h + gap) + 40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">'
    ]
    for m in range(machines):
        y = top + m * (row_h + gap) + row_h // 2 + 4
        parts.append(f'<text x="8" y="{y}">machine {m}</text>')
    for e in schedule.entries:
        x = left + e.start * scale
        w = max((e.end - e.start) * scale, 1.0)
        y = top + e.machine * (row_h + gap)
        color = _SVG_PALETTE[e.job % len(_SVG_PALETTE)]
        parts.append(
            f'<rect class="op" x="{x:.2f}" y="{y}" width="{w:.2f}" height="{row_h}" '
            f'fill="{color}"><title>job {e.job} op {e.op}: {e.start}-{e.end}</title></rect>'
        )
    parts.append(
        f'<text x="{left}" y="{height - 12}">makespan {schedule.makespan}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def export_gantt(schedule: Schedule, path, fmt: str) -> None:
    """Write a schedule as machine-lane data: json, csv or svg."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(schedule_to_json(schedule), fh, indent=2)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["job", "op", "machine", "start", "end"])
            for e in schedule.entries:
                writer.writerow([e.job, e.op, e.machine, e.start, e.end])
    elif fmt == "svg":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_gantt_svg(schedule))
            fh.write("\n")
    else:
        raise ValueError(f"unknown gantt format {fmt!r}, expected json, csv or svg")


# -- structure measurements ---------------------------------------------------


@dataclass(frozen=True)
class FractionStats:
    enabled_fraction: float
    decision_tick_ratio: float
    episodes: int


def measure_enabled_fraction(
    instance: Instance,
    policy: PolicyKind = PolicyKind.RANDOM,
    env_config: EnvConfig | None = None,
    episodes: int = 5,
    seed: int = 0,
) -> FractionStats:
    """How sparse the action space is under a given policy.

    enabled_fraction averages, over decision points, the share of job
    slots whose allocation is currently legal; the standby bit does not
    count and the denominator is the slot capacity.  decision_tick_ratio
    is decision steps over clock ticks, one value per episode.
    """
    env_config = env_config if env_config is not None else EnvConfig()
    rng = np.random.default_rng(seed)
    fractions = []
    ratios = []
    for _ in range(episodes):
        env = Environment(instance, env_config)
        obs, mask = env.reset()
        capacity = mask.size - 1
        while not env.terminated:
            fractions.append(mask[:capacity].sum() / capacity)
            action = decide(policy, views_from_env(env), mask, rng=rng)
            result = env.step(action)
            mask = result.mask
        ratios.append(env.decision_steps / max(env.clock_ticks, 1))
    return FractionStats(
        enabled_fraction=float(np.mean(fractions)),
        decision_tick_ratio=float(np.mean(ratios)),
        episodes=episodes,
    )


# -- exhaustive search ---------------------------------------------------------


def _remaining_by_job_and_machine(env: Environment) -> tuple[dict[int, int], dict[int, int], int]:
    """Work still owed per job and per machine, plus the busy floor per machine."""
    net = env.net
    per_job: dict[int, int] = {}
    per_machine: dict[int, int] = {}
    for queue in net.job_places:
        for tok in queue:
            per_job[tok.job] = per_job.get(tok.job, 0) + tok.duration
            per_machine[tok.color] = per_machine.get(tok.color, 0) + tok.duration
    for tok in net.ready_places:
        if tok is not None:
            per_job[tok.job] = per_job.get(tok.job, 0) + tok.duration
            per_machine[tok.color] = per_machine.get(tok.color, 0) + tok.duration
    busy = 0
    for m, tok in enumerate(net.machine_places):
        if tok is not None:
            left = tok.duration - tok.elapsed
            per_job[tok.job] = per_job.get(tok.job, 0) + left
            per_machine[m] = per_machine.get(m, 0) + left
            busy = max(busy, left)
    return per_job, per_machine, busy


def _completion_lower_bound(env: Environment) -> int:
    per_job, per_machine, _ = _remaining_by_job_and_machine(env)
    clock = env.net.clock
    loads = list(per_job.values()) + list(per_machine.values())
    return clock + (max(loads) if loads else 0)


def _state_signature(env: Environment):
    net = env.net
    slots = tuple(
        (
            len(queue),
            queue[0].job if queue else -1,
            (ready.job, ready.seq) if ready is not None else None,
            flight,
        )
        for queue, ready, flight in zip(net.job_places, net.ready_places, net.job_in_flight)
    )
    machines = tuple(
        (tok.job, tok.seq, tok.duration - tok.elapsed) if tok is not None else None
        for tok in net.machine_places
    )
    return slots, machines


def env_minimum_makespan(instance: Instance, env_config: EnvConfig | None = None) -> int:
    """Exact optimum by branching over every legal action of the environment.

    Depth-first search over copies of the environment with two sound
    prunes: an admissible completion bound (max residual machine or job
    load) and signature dominance (the same net shape reached at a later
    clock can never finish sooner).  Only practical for small instances.
    """
    env_config = env_config if env_config is not None else EnvConfig()
    root = Environment(instance, env_config)
    root.reset()
    best = sum(op.duration for job in instance.jobs for op in job)  # any serial schedule
    seen: dict = {}

    stack = [root]
    while stack:
        env = stack.pop()
        if env.terminated:
            best = min(best, env.extract_schedule().makespan)
            continue
        if _completion_lower_bound(env) >= best:
            continue
        sig = _state_signature(env)
        clock = env.net.clock
        prior = seen.get(sig)
        if prior is not None and prior <= clock:
            continue
        seen[sig] = clock
        mask = env.action_mask()
        for action in np.flatnonzero(mask):
            child = copy.deepcopy(env)
            child.step(int(action))
            stack.append(child)
    return best


def exhaustive_optimum(instance: Instance) -> int:
    """Exact optimum from a plain recursive scheduler, independent of the net.

    Places one ready operation at a time at the earliest append position,
    max(job ready time, machine free time), enumerating every placement
    order.  Every optimal schedule is reachable this way.
    """
    jobs = instance.jobs
    n = len(jobs)
    job_ready = [0] * n
    machine_free = [0] * instance.num_machines
    next_op = [0] * n
    remaining_job = [sum(op.duration for op in job) for job in jobs]
    remaining_machine = [0] * instance.num_machines
    for job in jobs:
        for op in job:
            remaining_machine[op.machine] += op.duration
    best = sum(remaining_job)

    def bound() -> int:
        worst = 0
        for j in range(n):
            if remaining_job[j]:
                worst = max(worst, job_ready[j] + remaining_job[j])
        for m in range(instance.num_machines):
            if remaining_machine[m]:
                worst = max(worst, machine_free[m] + remaining_machine[m])
        return worst

    def recurse(placed: int, current_max: int) -> None:
        nonlocal best
        if placed == instance.total_operations:
            best = min(best, current_max)
            return
        if max(bound(), current_max) >= best:
            return
        for j in range(n):
            k = next_op[j]
            if k >= len(jobs[j]):
                continue
            op = jobs[j][k]
            start = max(job_ready[j], machine_free[op.machine])
            end = start + op.duration
            saved = (job_ready[j], machine_free[op.machine])
            next_op[j] += 1
            job_ready[j] = end
            machine_free[op.machine] = end
            remaining_job[j] -= op.duration
            remaining_machine[op.machine] -= op.duration
            recurse(placed + 1, max(current_max, end))
            next_op[j] -= 1
            job_ready[j], machine_free[op.machine] = saved
            remaining_job[j] += op.duration
            remaining_machine[op.machine] += op.duration

    recurse(0, 0)
    return best


# -- ablations ------------------------------------------------------------------


def ablation_env_config(mode: str, base: EnvConfig | None = None) -> EnvConfig:
    """Environment settings for one ablation arm.

    reference keeps everything on; no_mask disables action masking;
    fixed_reward switches to the constant -1 per step; no_event turns off
    event-driven time jumps so the agent acts every tick.
    """
    base = base if base is not None else EnvConfig()
    if mode == "reference":
        return base
    if mode == "no_mask":
        return EnvConfig(
            capacity=base.capacity,
            observation_depth=base.observation_depth,
            standby_penalty=base.standby_penalty,
            reward_mode=base.reward_mode,
            event_based=base.event_based,
            masking=False,
        )
    if mode == "fixed_reward":
        return EnvConfig(
            capacity=base.capacity,
            observation_depth=base.observation_depth,
            standby_penalty=base.standby_penalty,
            reward_mode="fixed_negative",
            event_based=base.event_based,
            masking=base.masking,
        )
    if mode == "no_event":
        return EnvConfig(
            capacity=base.capacity,
            observation_depth=base.observation_depth,
            standby_penalty=base.standby_penalty,
            reward_mode=base.reward_mode,
            event_based=False,
            masking=base.masking,
        )
    raise ValueError(f"unknown ablation mode {mode!r}, expected one of {ABLATION_MODES}")


def run_ablation(
    instance: Instance,
    mode: str,
    train_config: TrainConfig | None = None,
    base_env_config: EnvConfig | None = None,
    metrics_path=None,
) -> TrainResult:
    """Train one ablation arm under an equal decision-step budget."""
    env_config = ablation_env_config(mode, base_env_config)
    return train(instance, env_config, train_config, metrics_path=metrics_path)
