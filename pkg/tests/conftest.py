import numpy as np
import pytest

from petrishop.instances import Instance, Operation, generate_random

# Seeds published for the first 15x15 benchmark instance; the generator
# reproduces that exact instance from them.
TA01_TIME_SEED = 840_612_802
TA01_MACHINE_SEED = 398_197_754


@pytest.fixture(scope="session")
def ta01() -> Instance:
    return generate_random(15, 15, TA01_TIME_SEED, TA01_MACHINE_SEED)


@pytest.fixture(scope="session")
def six_by_six() -> Instance:
    return generate_random(6, 6, 12345, 6789)


@pytest.fixture(scope="session")
def tiny() -> Instance:
    """2 jobs x 2 machines, small durations, handy for stepping by hand.

    job 0: machine 0 for 3, then machine 1 for 2
    job 1: machine 1 for 4, then machine 0 for 1
    """
    return Instance(
        jobs=(
            (Operation(0, 3), Operation(1, 2)),
            (Operation(1, 4), Operation(0, 1)),
        ),
        num_machines=2,
    )


def random_small_instance(rng: np.random.Generator, jobs: int, machines: int, max_duration: int = 9) -> Instance:
    """Random instance with one operation per machine per job, small durations."""
    rows = []
    for _ in range(jobs):
        perm = rng.permutation(machines)
        rows.append(tuple(Operation(int(m), int(rng.integers(1, max_duration + 1))) for m in perm))
    return Instance(jobs=tuple(rows), num_machines=machines)
