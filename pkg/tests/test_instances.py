import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrishop.instances import (
    DimensionMismatchError,
    Instance,
    InvalidSeedError,
    LCG_MODULUS,
    MachineIndexError,
    Operation,
    ParseError,
    generate_random,
    lcg_next,
    parse_instance,
    serialize_instance,
    uniform_int,
)

from conftest import TA01_MACHINE_SEED, TA01_TIME_SEED


# -- generator stream ---------------------------------------------------------


def test_lcg_first_step_from_one():
    state, u = lcg_next(1)
    assert state == 16807
    assert u == 16807 / LCG_MODULUS


def test_lcg_first_step_from_published_seed():
    state, _ = lcg_next(TA01_TIME_SEED)
    assert state == 2_031_933_248


def test_lcg_classic_ten_thousandth_value():
    # Park-Miller's own check: starting from 1, the 10,000th draw.
    state = 1
    for _ in range(10_000):
        state, _ = lcg_next(state)
    assert state == 1_043_618_065


def test_lcg_matches_wide_integer_arithmetic():
    # The implementation uses Schrage factorization; plain big-int modular
    # multiplication is an independent formulation of the same stream.
    state = 987_654_321
    shadow = state
    for _ in range(5_000):
        state, u = lcg_next(state)
        shadow = (16807 * shadow) % LCG_MODULUS
        assert state == shadow
        assert 0.0 < u < 1.0


def test_lcg_rejects_bad_state():
    for bad in (0, -1, LCG_MODULUS, LCG_MODULUS + 5):
        with pytest.raises(InvalidSeedError):
            lcg_next(bad)


def test_uniform_int_endpoints():
    # u close to 0 gives lo; u close to 1 gives hi.
    state, lo = uniform_int(1, 1, 99)
    assert 1 <= lo <= 99
    seen = set()
    state = 7
    for _ in range(2_000):
        state, v = uniform_int(state, 1, 99)
        assert 1 <= v <= 99
        seen.add(v)
    assert seen == set(range(1, 100))


@given(st.integers(min_value=1, max_value=LCG_MODULUS - 1), st.integers(min_value=-5, max_value=5), st.integers(min_value=0, max_value=20))
def test_uniform_int_always_in_range(seed, lo, width):
    _, v = uniform_int(seed, lo, lo + width)
    assert lo <= v <= lo + width


# -- random instance generation -----------------------------------------------


def test_generate_small_instance_from_published_seeds():
    # First rows of the duration/machine streams for a 3x3 cut, frozen
    # against big-int reference arithmetic.
    inst = generate_random(3, 3, TA01_TIME_SEED, TA01_MACHINE_SEED)
    durations = [[op.duration for op in job] for job in inst.jobs]
    machines = [[op.machine for op in job] for job in inst.jobs]
    assert durations == [[94, 66, 10], [53, 26, 15], [65, 82, 10]]
    assert machines == [[1, 2, 0], [1, 0, 2], [1, 2, 0]]


def test_generate_benchmark_instance_is_stable(ta01):
    text = serialize_instance(ta01, "orlib")
    digest = hashlib.sha256(text.encode()).hexdigest()
    assert digest == "0de6b527c2fc37bda105201a7a829d64f80d9cd5c7c612cc9f4c4cb766007eff"
    # the first duration row of the known 15x15 benchmark instance
    assert [op.duration for op in ta01.jobs[0]] == [94, 66, 10, 53, 26, 15, 65, 82, 10, 27, 93, 92, 96, 70, 83]


def test_generate_machine_rows_are_permutations():
    inst = generate_random(8, 11, 555, 777)
    for job in inst.jobs:
        assert sorted(op.machine for op in job) == list(range(11))


def test_generate_rejects_bad_seeds():
    with pytest.raises(InvalidSeedError):
        generate_random(3, 3, 0, 777)
    with pytest.raises(InvalidSeedError):
        generate_random(3, 3, 777, LCG_MODULUS)


def test_generate_rejects_bad_shape():
    with pytest.raises(ValueError):
        generate_random(0, 3, 5, 7)


# -- instance validation -------------------------------------------------------


def test_instance_rejects_machine_out_of_range():
    with pytest.raises(MachineIndexError):
        Instance(jobs=((Operation(2, 5),),), num_machines=2)


def test_instance_rejects_nonpositive_duration():
    with pytest.raises(ValueError):
        Instance(jobs=((Operation(0, 0),),), num_machines=1)


def test_instance_counts(tiny):
    assert tiny.num_jobs == 2
    assert tiny.num_machines == 2
    assert tiny.total_operations == 4
    assert tiny.max_duration == 4


# -- parsing and serialization ---------------------------------------------------


ORLIB_SAMPLE = """\
2 2
0 3 1 2
1 4 0 1
"""

TAILLARD_SAMPLE = """\
2 2
3 2
4 1
1 2
2 1
"""


def test_parse_orlib_sample(tiny):
    assert parse_instance(ORLIB_SAMPLE, "orlib") == tiny


def test_parse_taillard_sample(tiny):
    # taillard files carry 1-indexed machine matrices
    assert parse_instance(TAILLARD_SAMPLE, "taillard") == tiny


def test_parse_skips_commentary_lines():
    noisy = "instance tiny\n" + ORLIB_SAMPLE + "\n\n"
    assert parse_instance(noisy, "orlib") == parse_instance(ORLIB_SAMPLE, "orlib")


def test_serialize_orlib_round_trip(tiny):
    assert parse_instance(serialize_instance(tiny, "orlib"), "orlib") == tiny


def test_serialize_taillard_round_trip(tiny):
    assert parse_instance(serialize_instance(tiny, "taillard"), "taillard") == tiny


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        parse_instance("2 2\n0 3 1 x\n1 4 0 1\n", "orlib")
    assert err.value.line == 2
    assert err.value.column == 7


def test_parse_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        parse_instance("3 2\n0 3 1 2\n1 4 0 1\n", "orlib")


def test_parse_machine_out_of_range():
    with pytest.raises(MachineIndexError):
        parse_instance("1 2\n0 3 5 2\n", "orlib")


@st.composite
def instances(draw):
    machines = draw(st.integers(min_value=1, max_value=5))
    jobs = draw(
        st.lists(
            st.lists(
                st.tuples(
                    st.integers(min_value=0, max_value=machines - 1),
                    st.integers(min_value=1, max_value=99),
                ),
                min_size=1,
                max_size=6,
            ),
            min_size=1,
            max_size=5,
        )
    )
    return Instance(
        jobs=tuple(tuple(Operation(m, d) for m, d in job) for job in jobs),
        num_machines=machines,
    )


@given(instances())
@settings(max_examples=60)
def test_orlib_round_trip_any_instance(inst):
    assert parse_instance(serialize_instance(inst, "orlib"), "orlib") == inst


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=10_000), st.integers(min_value=1, max_value=10_000))
@settings(max_examples=40)
def test_taillard_round_trip_generated(jobs, machines, tseed, mseed):
    inst = generate_random(jobs, machines, tseed, mseed)
    assert parse_instance(serialize_instance(inst, "taillard"), "taillard") == inst
