import pytest
from hypothesis import given, settings, strategies as st

from conftest import Injector, actions, solo

from xchain.adversary import Crash
from xchain.anta import Output, customer, escrow
from xchain.engine import ConfigurationError, Network, run
from xchain.messages import Money, Receipt
from xchain.network import ParticipantClock, PartiallySynchronous, Synchronous
from xchain.rational import Q
from xchain.timebounded import build_escrow, build_network, compute_params


def test_n1_happy_path_terminates():
    p = compute_params(1, 1, 10, 1)
    tr = run(build_network(1, p), Synchronous(10), seed=4)
    assert not tr.truncated
    assert all(done for _, done in tr.final_states.values())
    assert ("c1", "recv", "e0", "Money") in actions(tr, "recv")
    # the action sequence of the n=1 successful run, setup excluded
    active = [a for a in actions(tr, "send", "recv") if a[3] != "Guarantee"]
    assert active[:6] == [
        ("c0", "send", "e0", "Money"), ("e0", "recv", "c0", "Money"),
        ("e0", "send", "c1", "Promise"), ("c1", "recv", "e0", "Promise"),
        ("c1", "send", "e0", "Receipt"), ("e0", "recv", "c1", "Receipt"),
    ]
    assert sorted(active[6:8]) == [("e0", "send", "c0", "Receipt"), ("e0", "send", "c1", "Money")]


def test_empty_network():
    tr = run(Network({}), Synchronous(10))
    assert tr.events == [] and not tr.truncated


def test_crashed_alice_leaves_the_rest_waiting():
    p = compute_params(2, 1, 10, 1)
    net = build_network(2, p, behaviors={customer(0): Crash(0)})
    tr = run(net, Synchronous(10), horizon=5000, seed=1)
    assert tr.truncated
    assert not any(e.msg and e.msg.kind == "Money" for e in tr.events)
    for name, (state, done) in tr.final_states.items():
        if name != "c0":
            assert not done
            assert state in ("await_money", "await_p")


def test_invalid_automaton_rejected():
    bad = build_escrow(0, compute_params(1, 1, 1, 1)).replace(initial="nowhere")
    with pytest.raises(ConfigurationError):
        run(Network({bad.id: bad}), Synchronous(1))


def test_bad_clocks_rejected():
    p = compute_params(1, 1, 10, 1)
    clocks = {customer(0): ParticipantClock(3)}
    with pytest.raises(ValueError):
        run(build_network(1, p), Synchronous(10, 2), clocks)


def test_identical_inputs_identical_bytes(happy2):
    a = run(happy2, Synchronous(10), seed=11).to_jsonl()
    b = run(happy2, Synchronous(10), seed=11).to_jsonl()
    c = run(happy2, Synchronous(10), seed=12).to_jsonl()
    assert a == b and a != c


def test_trace_times_non_decreasing(happy2):
    tr = run(happy2, Synchronous(10), seed=2)
    times = [e.time for e in tr.events]
    assert times == sorted(times)


def test_output_emissions_inside_window():
    p = compute_params(1, 1, 10, 1)
    esc = build_escrow(0, p, "PreArrangedSetup")
    inj = Injector(customer(0), [(3, escrow(0), Money())])
    for policy in ("immediate", "uniform", "latest"):
        tr, _ = solo(esc, [inj, Injector(customer(1))], policy=policy)
        entered = [e for e in tr.events if e.kind == "enter" and e.state == "promise"][0]
        (send,) = [e for e in tr.events if e.kind == "send" and e.actor == "e0"][:1]
        assert entered.local < send.local < entered.local + p.eps


def test_arrival_during_output_state_is_buffered():
    # Receipt lands while the escrow is still emitting its promise.
    p = compute_params(1, 1, 10, 1)
    esc = build_escrow(0, p, "PreArrangedSetup")
    up = Injector(customer(0), [(1, escrow(0), Money())])
    down = Injector(customer(1), [(Q(1) + Q(1, 10**7), escrow(0), Receipt(customer(1)))])
    tr, _ = solo(esc, [up, down], model=Synchronous(Q(1, 10**8)), policy="latest")
    assert tr.final_state(escrow(0)) == "paid"


def _bounds_hold(tr, bound):
    sent = {}
    for e in tr.events:
        if e.kind == "send":
            sent[e.mid] = e.time
        elif e.kind == "deliver":
            assert 0 < e.time - e.sent <= bound
            assert e.sent == sent[e.mid]
    return sent


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["immediate", "uniform", "latest"]))
def test_sync_delivery_bound_and_exactly_once(seed, policy):
    p = compute_params(2, 1, 10, 1)
    tr = run(build_network(2, p), Synchronous(10), seed=seed, policy=policy)
    sent = _bounds_hold(tr, 10)
    delivered = [e.mid for e in tr.events if e.kind == "deliver"]
    assert sorted(delivered) == sorted(sent)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_psync_post_gst_bound(seed):
    p = compute_params(2, 1, 10, 1)
    tr = run(build_network(2, p), PartiallySynchronous(30, 10), seed=seed)
    for e in tr.events:
        if e.kind == "deliver" and e.sent >= 30:
            assert e.time - e.sent <= 10


def test_black_state_is_the_only_infinite_one(params2):
    net = build_network(2, params2)
    inf = [(pid, s) for pid, a in net.automata.items() for s, k in a.states.items()
           if isinstance(k, Output) and k.timeout == float("inf")]
    assert inf == [(customer(0), "pay")]


def test_pending_messages_dropped_on_termination():
    p = compute_params(1, 1, 10, 1)
    esc = build_escrow(0, p, "PreArrangedSetup")
    up = Injector(customer(0), [(1, escrow(0), Money()), (2, escrow(0), Money())])
    down = Injector(customer(1), [(3, escrow(0), Receipt(customer(1)))])
    tr, _ = solo(esc, [up, down])
    assert tr.final_state(escrow(0)) == "paid"
    drops = tr.of(escrow(0), "drop")
    assert [e.msg.kind for e in drops] == ["Money"]
