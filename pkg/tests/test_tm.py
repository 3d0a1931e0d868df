import random

import pytest
from hypothesis import given, settings, strategies as st

from xchain.adversary import ByzantineValidator, Crash
from xchain.anta import customer, validator
from xchain.engine import run
from xchain.eventual import PatienceSchedule, build_eventual_network
from xchain.messages import Certificate
from xchain.network import PartiallySynchronous, Synchronous
from xchain.tm import (
    ABORT,
    COMMIT,
    TMConfig,
    TMState,
    bbc_decide,
    reliable_broadcast,
    sign,
    tm_handle_proposal,
    verify_certificate,
    verify_signature,
)
from xchain.verifier import check_all

V = [validator(k) for k in range(4)]
CUSTOMERS = [customer(i) for i in range(3)]
BOB = customer(2)


def cert(decision, signers, value=None, instance="pay-0"):
    v = decision if value is None else value
    return Certificate(decision, frozenset(sign(s, v, instance) for s in signers))


def test_signature_roundtrip():
    s = sign(V[0], 1, "pay-0")
    assert verify_signature(s)
    forged = type(s)(V[1], 1, "pay-0", s.tag)
    assert not verify_signature(forged)


@pytest.mark.parametrize("signers,f,ok", [
    (V[:2], 1, True),
    (V[:1], 1, False),
    (V[:1], 0, True),
    (V[:3], 1, True),
    ([], 0, False),
])
def test_verify_certificate_quorum(signers, f, ok):
    assert verify_certificate(cert(COMMIT, signers), f) is ok


def test_verify_certificate_mixed_values_rejected():
    mixed = Certificate(COMMIT, frozenset({sign(V[0], 1, "pay-0"), sign(V[1], 0, "pay-0")}))
    assert not verify_certificate(mixed, 0)


def test_verify_certificate_wrong_instance():
    c = cert(ABORT, V[:2], instance="pay-9")
    assert verify_certificate(c, 1)
    assert not verify_certificate(c, 1, "pay-0")


def test_duplicate_signer_counts_once():
    c = Certificate(COMMIT, frozenset({sign(V[0], 1, "pay-0")}))
    assert not verify_certificate(c, 1)


@pytest.mark.parametrize("props,choice,out", [
    ({0: 1, 1: 1, 2: 1}, 0, 1),
    ({0: 0, 1: 0}, 1, 0),
    ({0: 0, 1: 1}, 1, 1),
    ({0: 0, 1: 1}, 0, 0),
])
def test_bbc(props, choice, out):
    assert bbc_decide(props, choice) == out


def test_rb_honest_sender_reaches_all():
    assert reliable_broadcast("s", "m", V) == {v: "m" for v in V}


def test_rb_faulty_sender_is_uniform_or_silent():
    seen = set()
    for seed in range(40):
        plan = reliable_broadcast("s", {V[0]: "a", V[1]: "b"}, V, True, random.Random(seed))
        assert len(set(plan.values())) == 1
        seen.add(plan[V[0]])
    assert seen == {"a", "b", None}


def test_rb_empty_recipients():
    with pytest.raises(ValueError):
        reliable_broadcast("s", "m", [])


@pytest.mark.parametrize("m,f", [(3, 1), (4, 2), (6, 2)])
def test_tmconfig_requires_f_below_third(m, f):
    with pytest.raises(ValueError):
        TMConfig("bft", m, f)


def test_tmconfig_centralized_forces_single():
    c = TMConfig("centralized", m=7, f=2)
    assert (c.m, c.f, c.validators) == (1, 0, [])
    assert TMConfig("bft", 4, 1).validators == V


def test_tm_first_proposal_decides():
    cfg = TMConfig()
    s, out = tm_handle_proposal(TMState(), BOB, COMMIT, cfg, CUSTOMERS, BOB)
    assert s.certificate.decision == COMMIT
    assert [c for c, _ in out] == CUSTOMERS
    assert verify_certificate(s.certificate, 0, "pay-0")
    s2, out2 = tm_handle_proposal(s, customer(0), ABORT, cfg, CUSTOMERS, BOB)
    assert s2 == s and out2 == [(customer(0), s.certificate)]


def test_tm_commit_from_non_bob_is_ignored():
    s, out = tm_handle_proposal(TMState(), customer(1), COMMIT, TMConfig(), CUSTOMERS, BOB)
    assert s.certificate is None and out == []
    assert s.byzantine_inputs == (("c1", COMMIT),)
    s, out = tm_handle_proposal(s, customer(1), ABORT, TMConfig(), CUSTOMERS, BOB)
    assert s.certificate.decision == ABORT


def test_oracle_tm_signs_with_honest_quorum():
    cfg = TMConfig("oracle", 4, 1)
    s, _ = tm_handle_proposal(TMState(), customer(0), ABORT, cfg, CUSTOMERS, BOB)
    assert len(s.certificate.signers()) == 3
    assert verify_certificate(s.certificate, 1)


# -- BFT-TM in the full protocol ------------------------------------------------


BFT = TMConfig("bft", 4, 1)


def bft_run(behaviors=None, seed=0, T=400, model=None, n=2):
    net = build_eventual_network(n, PatienceSchedule.uniform(n, T), BFT, behaviors=behaviors,
                                 patience_safe=True)
    tr = run(net, model or Synchronous(5), seed=seed, horizon=10**5)
    return net, tr


def customer_certs(tr):
    return [e.msg for e in tr.events
            if e.kind == "recv" and e.actor.startswith("c") and e.msg.kind in ("CommitCert", "AbortCert")]


def test_bft_all_honest_commits():
    net, tr = bft_run()
    rep = check_all(tr, net.automata)
    assert rep.ok, rep.dumps()
    assert tr.final_state(customer(2)) == "11"
    assert all(len(m.cert.signers()) >= 2 for m in customer_certs(tr))


@pytest.mark.parametrize("strategy", ["wrong_value", "silent", "equivocate"])
def test_bft_one_byzantine_validator(strategy):
    for seed in range(10):
        net, tr = bft_run({V[3]: ByzantineValidator(strategy)}, seed)
        rep = check_all(tr, net.automata)
        assert rep.ok, (seed, rep.dumps())
        assert tr.final_state(customer(2)) == "11"


def test_bft_crashed_validator_still_certifies():
    net, tr = bft_run({V[0]: Crash(0)})
    assert check_all(tr, net.automata).ok
    assert tr.final_state(customer(0)) == "6"


def test_late_abort_gets_existing_certificate():
    # Alice gives up at once; whichever proposal wins, every customer sees one decision.
    net = build_eventual_network(2, PatienceSchedule({0: 0, 1: 400, 2: 400}), BFT)
    tr = run(net, Synchronous(5), seed=3, horizon=10**5)
    rep = check_all(tr, net.automata)
    assert rep.ok, rep.dumps()
    decisions = {m.cert.decision for m in customer_certs(tr)}
    assert len(decisions) == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([None, "wrong_value", "silent", "equivocate"]))
def test_bft_psync_agreement(seed, strategy):
    beh = {V[1]: ByzantineValidator(strategy)} if strategy else {}
    net, tr = bft_run(beh, seed, model=PartiallySynchronous(50, 5))
    rep = check_all(tr, net.automata)
    for name in ("TM-Consistency", "TM-Commit-Validity", "TM-Abort-Validity", "CS1'", "CS2'", "CS3'", "ES"):
        assert rep.verdicts[name].status != "Violated", (name, rep.dumps())
