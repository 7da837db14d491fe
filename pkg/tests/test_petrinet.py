import numpy as np
import pytest

from petrishop.instances import Instance, Operation, generate_random
from petrishop.petrinet import (
    ALLOCATION,
    CapacityError,
    DELIVERY,
    GuardViolationError,
    SELECTION,
    Transition,
    advance_clock,
    build_net,
    fire,
    guard,
    is_terminal,
)

from conftest import random_small_instance


def test_build_shapes(tiny):
    net = build_net(tiny)
    assert len(net.job_places) == 2
    assert len(net.ready_places) == 2
    assert len(net.machine_places) == 2
    assert len(net.delivery_places) == 2
    assert net.idle_places == [1, 1]
    assert net.token_count == 4
    assert net.clock == 0


def test_capacity_must_cover_jobs(tiny):
    with pytest.raises(CapacityError):
        build_net(tiny, capacity=1)
    net = build_net(tiny, capacity=5)
    assert len(net.job_places) == 5
    assert [len(q) for q in net.job_places] == [2, 2, 0, 0, 0]


def test_selection_then_allocation_then_delivery(tiny):
    net = build_net(tiny)
    sel = Transition(SELECTION, 0)
    alloc = Transition(ALLOCATION, 0)
    assert guard(net, sel)
    fire(net, sel)
    assert net.ready_places[0] is not None
    assert not guard(net, sel)  # slot occupied
    assert guard(net, alloc)
    fire(net, alloc)
    token = net.machine_places[0]
    assert token is not None and token.job == 0 and token.elapsed == 0
    assert net.idle_places[0] == 0
    # clock must reach the duration before delivery enables
    assert not guard(net, Transition(DELIVERY, 0))
    fired = advance_clock(net, 3)
    assert net.clock == 3
    assert [e.machine for e in fired] == [0]
    assert net.machine_places[0] is None
    assert net.idle_places[0] == 1
    assert len(net.delivery_places[0]) == 1


def test_selection_blocked_while_previous_operation_runs(tiny):
    # job 0's second operation must not become selectable until the first
    # operation leaves its machine
    net = build_net(tiny)
    fire(net, Transition(SELECTION, 0))
    fire(net, Transition(ALLOCATION, 0))
    assert net.job_in_flight[0]
    assert not guard(net, Transition(SELECTION, 0))
    advance_clock(net, 3)
    assert not net.job_in_flight[0]
    assert guard(net, Transition(SELECTION, 0))


def test_allocation_requires_idle_machine(tiny):
    net = build_net(tiny)
    fire(net, Transition(SELECTION, 0))
    fire(net, Transition(ALLOCATION, 0))
    # job 1 head wants machine 1, which is idle, so it can run in parallel
    fire(net, Transition(SELECTION, 1))
    assert guard(net, Transition(ALLOCATION, 1))
    fire(net, Transition(ALLOCATION, 1))
    # machine 0 now busy: selecting job 1's next op is impossible anyway,
    # but a third job wanting machine 0 would be blocked; emulate by
    # checking the guard refuses a second allocation onto machine 0
    with pytest.raises(GuardViolationError):
        fire(net, Transition(ALLOCATION, 0))


def test_firing_disabled_transition_raises(tiny):
    net = build_net(tiny)
    with pytest.raises(GuardViolationError):
        fire(net, Transition(ALLOCATION, 0))  # nothing selected yet
    with pytest.raises(GuardViolationError):
        fire(net, Transition(DELIVERY, 0))


def test_event_log_records_firings(tiny):
    net = build_net(tiny)
    fire(net, Transition(SELECTION, 0))
    fire(net, Transition(ALLOCATION, 0))
    advance_clock(net, 3)
    kinds = [e.transition.kind for e in net.event_log]
    assert kinds == [SELECTION, ALLOCATION, DELIVERY]
    record = net.event_log[-1].as_record()
    assert record == {"clock": 3, "transition": DELIVERY, "job": 0, "machine": 0, "seq": 0}


def test_deliveries_fire_in_machine_order():
    # two machines completing on the same tick deliver in ascending index
    inst = Instance(
        jobs=((Operation(1, 2),), (Operation(0, 2),)),
        num_machines=2,
    )
    net = build_net(inst)
    for i in (0, 1):
        fire(net, Transition(SELECTION, i))
        fire(net, Transition(ALLOCATION, i))
    fired = advance_clock(net, 2)
    assert [e.machine for e in fired] == [0, 1]


def _drive_random(net, rng, standby_prob=0.3, on_move=None):
    """Random legal play directly against the net until it drains."""
    while not is_terminal(net):
        if on_move is not None:
            on_move(net)
        openable = []
        for i in range(len(net.job_places)):
            if guard(net, Transition(SELECTION, i)):
                openable.append(("sel", i))
            elif net.ready_places[i] is not None and guard(net, Transition(ALLOCATION, i)):
                openable.append(("alloc", i))
        busy = any(tok is not None for tok in net.machine_places)
        if openable and (not busy or rng.random() > standby_prob):
            kind, i = openable[int(rng.integers(len(openable)))]
            if kind == "sel":
                fire(net, Transition(SELECTION, i))
                if guard(net, Transition(ALLOCATION, i)):
                    fire(net, Transition(ALLOCATION, i))
            else:
                fire(net, Transition(ALLOCATION, i))
        else:
            advance_clock(net, 1)


def test_token_conservation_under_random_play():
    rng = np.random.default_rng(11)
    for _ in range(25):
        inst = random_small_instance(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        net = build_net(inst)
        total = inst.total_operations
        _drive_random(net, rng, on_move=lambda n: None if n.token_count == total else pytest.fail("token leaked"))
        assert is_terminal(net)
        assert net.delivered_count == total
        assert net.token_count == total


def test_histories_are_contiguous_and_closed():
    rng = np.random.default_rng(23)
    inst = random_small_instance(rng, 4, 3)
    net = build_net(inst)
    _drive_random(net, rng)
    for sink in net.delivery_places:
        for token in sink:
            visits = token.history
            assert visits[0].enter == 0
            assert visits[-1].leave is None  # still in the sink
            for earlier, later in zip(visits, visits[1:]):
                assert earlier.leave == later.enter
            machine_visits = [v for v in visits if v.place.startswith("machine")]
            assert len(machine_visits) == 1
            stay = machine_visits[0]
            assert stay.leave - stay.enter == token.duration


def test_unknown_transition_kind(tiny):
    net = build_net(tiny)
    from petrishop.petrinet import UnknownTransitionError

    with pytest.raises(UnknownTransitionError):
        guard(net, Transition("teleport", 0))
    with pytest.raises(UnknownTransitionError):
        guard(net, Transition(SELECTION, 99))
