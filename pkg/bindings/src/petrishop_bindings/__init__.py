"""Foreign-interface style wrapper around the scheduling environment.

The host side holds an opaque ``EnvHandle`` and exchanges plain
buffers: observations and masks cross the boundary as fresh contiguous
double-precision copies (masks as 0.0/1.0 flags), rewards as floats,
schedules as plain dictionaries.  One handle owns exactly one
environment; every operation on a closed handle raises
``ClosedHandleError``, double close included.  Instance sources use
the canonical one-line-per-job text layout.

The wrapper adds no semantics of its own: action legality, rewards,
termination and error messages are the native environment's, so a
trajectory driven through a handle is numerically identical to one
driven natively with the same actions.
"""

import dataclasses
import os

import numpy as np

import petrishop
from petrishop.bench import schedule_to_json
from petrishop.environment import EnvConfig, Environment
from petrishop.instances import parse_instance

__version__ = "0.1.0"

__all__ = [
    "ClosedHandleError",
    "EnvHandle",
    "VersionMismatchError",
    "__version__",
    "action_mask",
    "append_operation",
    "close",
    "extract_schedule",
    "make",
    "reset",
    "step",
]


class VersionMismatchError(RuntimeError):
    """The bindings were built against a different core release."""


class ClosedHandleError(RuntimeError):
    """Operation on a handle whose environment was already released."""


class EnvHandle:
    """Opaque owner of one native environment; not shareable across threads."""

    __slots__ = ("_env",)

    def __init__(self, env: Environment):
        self._env = env


def make(source, config: dict | None = None) -> EnvHandle:
    """Build an environment from instance text or an instance file path.

    ``source`` is taken as a filesystem path when it is an
    ``os.PathLike`` or a single-line string, and as instance text
    otherwise.  ``config`` keys mirror the native ``EnvConfig`` fields
    (``capacity``, ``observation_depth``, ``standby_penalty``,
    ``reward_mode``, ``event_based``, ``masking``); unknown keys are
    rejected by name.  Parse, config and capacity errors surface the
    native exceptions and messages unchanged.
    """
    if petrishop.__version__ != __version__:
        raise VersionMismatchError(
            f"bindings {__version__} cannot drive core {petrishop.__version__}"
        )
    instance = parse_instance(_read_source(source), "orlib")
    return EnvHandle(Environment(instance, _env_config(config)))


def reset(handle: EnvHandle) -> tuple[np.ndarray, np.ndarray]:
    """Restart the episode; returns fresh observation and mask buffers."""
    obs, mask = _native(handle).reset()
    return _buffer(obs), _buffer(mask)


def step(handle: EnvHandle, action: int) -> tuple[np.ndarray, np.ndarray, float, bool, dict]:
    """Apply one composite action.

    Returns ``(observation, mask, reward, terminated, info)`` where the
    info mapping carries the native ``clock``, ``decision_step_count``
    and ``clock_tick_count`` counters.  Masked actions and steps after
    termination raise the native errors.
    """
    result = _native(handle).step(int(action))
    info = {key: result.info[key] for key in ("clock", "decision_step_count", "clock_tick_count")}
    return (
        _buffer(result.observation),
        _buffer(result.mask),
        float(result.reward),
        bool(result.terminated),
        info,
    )


def action_mask(handle: EnvHandle) -> np.ndarray:
    """Legality of every composite action right now, as 0.0/1.0 flags."""
    return _buffer(_native(handle).action_mask())


def append_operation(handle: EnvHandle, job: int, machine: int, duration: int) -> None:
    """Extend a job's routing while the episode is running."""
    _native(handle).append_operation(int(job), int(machine), int(duration))


def extract_schedule(handle: EnvHandle) -> dict:
    """Everything delivered so far as a plain schedule document."""
    return schedule_to_json(_native(handle).extract_schedule())


def close(handle: EnvHandle) -> None:
    """Release the environment; any later use of the handle raises."""
    _native(handle)
    handle._env = None


def _native(handle: EnvHandle) -> Environment:
    env = handle._env
    if env is None:
        raise ClosedHandleError("environment handle is closed")
    return env


def _read_source(source) -> str:
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source):
        with open(source, "r", encoding="utf-8") as fh:
            return fh.read()
    return source


def _env_config(config: dict | None) -> EnvConfig:
    mapping = dict(config or {})
    known = {field.name for field in dataclasses.fields(EnvConfig)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ValueError(f"unknown config keys {unknown}, expected a subset of {sorted(known)}")
    return EnvConfig(**mapping)


def _buffer(values: np.ndarray) -> np.ndarray:
    return np.array(values, dtype=np.float64, order="C", copy=True)
