"""Job-shop scheduling on a colored timed Petri net.

The package splits into a problem-instance layer (seeded generation and
text I/O), the timed net itself, an event-driven decision environment on
top of it, dispatching policies, a self-contained maskable PPO trainer,
and a benchmark/report front end with a ``bench`` command line.
"""

__version__ = "0.1.0"

from .instances import (
    Instance,
    Operation,
    generate_random,
    lcg_next,
    parse_instance,
    serialize_instance,
    uniform_int,
)
from .environment import EnvConfig, Environment, Schedule, ScheduleEntry, validate_schedule
from .policies import PolicyKind, run_episode
from .mppo import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train
from .bench import optimality_gap, run_ablation, run_bench

__all__ = [
    "__version__",
    "Instance",
    "Operation",
    "generate_random",
    "lcg_next",
    "parse_instance",
    "serialize_instance",
    "uniform_int",
    "EnvConfig",
    "Environment",
    "Schedule",
    "ScheduleEntry",
    "validate_schedule",
    "PolicyKind",
    "run_episode",
    "TrainConfig",
    "train",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
    "optimality_gap",
    "run_bench",
    "run_ablation",
]
