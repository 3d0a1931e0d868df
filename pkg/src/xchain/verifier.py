"""Trace checkers for the payment-protocol properties.

Every checker is a pure function of a finished ``Trace`` (plus, for the
structural consistency check, the automata).  Who abides is taken from the
behaviour assignment stored in the trace metadata, never inferred.

"Upon termination" is read as: the customer reached a termination state, or
the run went quiescent (nothing left that could ever happen).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

from .anta import Bound, Receive, SendSet, customer, escrow
from .messages import AbortCert, CommitCert, Money
from .network import Synchronous, model_to_json
from .rational import fmt_q
from .tm import verify_certificate

HOLDS, VIOLATED, NA = "Holds", "Violated", "NotApplicable"
CERT_KINDS = {"Receipt", "CommitCert", "AbortCert"}


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: tuple = ()
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status != VIOLATED

    def to_json(self) -> dict:
        doc = {"verdict": self.status}
        if self.witness:
            doc["witness"] = list(self.witness)
        if self.reason:
            doc["reason"] = self.reason
        return doc


def holds(reason=""):
    return Verdict(HOLDS, (), reason)


def violated(witness, reason):
    return Verdict(VIOLATED, tuple(sorted(set(witness))), reason)


def not_applicable(reason):
    return Verdict(NA, (), reason)


def merge(verdicts) -> Verdict:
    """First violation wins; all-NA stays NA; otherwise Holds."""
    verdicts = list(verdicts)
    for v in verdicts:
        if v.status == VIOLATED:
            return v
    if verdicts and all(v.status == NA for v in verdicts):
        return not_applicable("; ".join(v.reason for v in verdicts if v.reason))
    return holds()


@dataclass
class PropertyReport:
    verdicts: dict = field(default_factory=dict)
    fingerprint: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts.values())

    def violations(self) -> dict:
        return {k: v for k, v in self.verdicts.items() if not v.ok}

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "fingerprint": self.fingerprint,
            "verdicts": {k: v.to_json() for k, v in self.verdicts.items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


# -- trace views ---------------------------------------------------------------


class View:
    """Per-actor indexes over one trace, built once and shared by the checks."""

    def __init__(self, trace):
        self.trace = trace
        self.meta = trace.meta
        self.n = trace.meta.get("n", 0)
        self.by_actor = defaultdict(list)
        for e in trace.events:
            if e.kind in ("send", "recv", "timeout"):
                self.by_actor[e.actor].append(e)
        behaviors = trace.meta.get("behaviors", {})
        self.deviators = {str(p) for p, b in behaviors.items() if not b.abides}
        clocks = trace.meta.get("clocks", {})
        self.clocks = {str(p): c for p, c in clocks.items()}

    def abides(self, *pids) -> bool:
        return not any(str(p) in self.deviators for p in pids)

    def actions(self, pid, kind=None, peer=None, msg=None):
        out = self.by_actor.get(str(pid), ())
        return [
            e for e in out
            if (kind is None or e.kind == kind)
            and (peer is None or e.peer == str(peer))
            and (msg is None or e.msg is not None and e.msg.kind == msg)
        ]

    def settled(self, pid) -> bool:
        return self.trace.terminated(pid) or self.trace.quiescent

    def end_local(self, pid):
        c = self.clocks.get(str(pid))
        t = self.trace.end_time
        return t if c is None else c.local(t)

    def customers(self):
        return [customer(i) for i in range(self.n + 1)]

    def escrows(self):
        return [escrow(i) for i in range(self.n)]


def _view(trace_or_view) -> View:
    return trace_or_view if isinstance(trace_or_view, View) else View(trace_or_view)


# -- ledger --------------------------------------------------------------------


def recompute_ledger(trace) -> tuple[dict, int]:
    """Balances and tokens in flight, replayed from send/deliver events."""
    bal = dict(trace.endowments)
    in_flight = 0
    for e in trace.events:
        if e.msg is None or e.msg.kind != "Money":
            continue
        if e.kind == "send":
            bal[e.actor] = bal.get(e.actor, 0) - 1
            in_flight += 1
        elif e.kind == "deliver":
            bal[e.actor] = bal.get(e.actor, 0) + 1
            in_flight -= 1
    return bal, in_flight


def check_conservation(trace) -> Verdict:
    bal, in_flight = recompute_ledger(trace)
    total = sum(trace.endowments.values())
    if sum(bal.values()) + in_flight != total:
        return violated((), f"token count {sum(bal.values())}+{in_flight} != {total}")
    if {k: v for k, v in bal.items() if v} != {k: v for k, v in trace.ledger.items() if v}:
        return violated((), "replayed ledger differs from the engine's")
    if in_flight != trace.in_flight_money or in_flight < 0:
        return violated((), f"in-flight mismatch {in_flight} vs {trace.in_flight_money}")
    return holds()


# -- structural consistency ------------------------------------------------------


def _sends(t):
    return t.label.sends if isinstance(t.label, SendSet) else ()


def check_consistency(automata: dict, endowments: dict, issuers=None) -> Verdict:
    """Every prescribed send is always possible.

    Certificates may only be forwarded after being received, except by their
    issuer; money may only be spent when held.  Explores (state, certificates
    held, balance) over each automaton's graph.
    """
    issuers = issuers or {}
    problems = []
    for pid, a in sorted(automata.items()):
        start_bal = min(int(endowments.get(pid, 0)), 2)
        seen = set()
        stack = [(a.initial, frozenset(), start_bal)]
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            state, held, bal = node
            for t in a.outgoing.get(state, ()):
                nheld, nbal = held, bal
                if isinstance(t.label, Receive):
                    if t.label.pattern is Money:
                        nbal = min(bal + 1, 2)
                    elif t.label.pattern.__name__ in CERT_KINDS:
                        nheld = held | {t.label.pattern.__name__}
                for to, msg in _sends(t):
                    if isinstance(msg, Bound):
                        if msg.pattern.__name__ not in held:
                            problems.append(f"{pid}:{state} forwards unheld {msg.pattern.__name__}")
                    elif msg.kind in CERT_KINDS and issuers.get(msg.kind) != pid:
                        problems.append(f"{pid}:{state} mints {msg.kind}")
                    elif isinstance(msg, Money):
                        if nbal <= 0:
                            problems.append(f"{pid}:{state} spends money it does not hold")
                        nbal -= 1
                stack.append((t.target, nheld, max(nbal, 0)))
    if problems:
        return violated((), "; ".join(sorted(set(problems))))
    return holds()


# -- escrow security -------------------------------------------------------------


def check_escrow_security(trace) -> Verdict:
    v = _view(trace)
    results = []
    bal, _ = recompute_ledger(v.trace)
    for e in v.escrows():
        if not v.abides(e):
            results.append(not_applicable(f"{e} deviates"))
            continue
        received = 0
        for ev in v.actions(e):
            if ev.msg is None or ev.msg.kind != "Money":
                continue
            if ev.kind == "recv":
                received += 1
            elif ev.kind == "send":
                if received == 0:
                    return violated((ev.index,), f"{e} sent money before receiving any")
                received -= 1
        if bal.get(str(e), 0) < v.trace.endowments.get(str(e), 0):
            return violated(tuple(x.index for x in v.actions(e, "send", msg="Money")),
                            f"{e} ends below its endowment")
        results.append(holds())
    return merge(results) if results else holds()


# -- customer security -----------------------------------------------------------


def _alice_security(v: View, good_kinds, label) -> Verdict:
    alice, e0 = customer(0), escrow(0)
    if not v.abides(alice, e0):
        return not_applicable("Alice or the first escrow deviates")
    if not v.settled(alice):
        return not_applicable("Alice has not terminated")
    pay = v.actions(alice, "send", e0, "Money")
    if not pay:
        return holds("Alice never paid")
    got = [e for e in v.actions(alice, "recv") if e.msg.kind == "Money" or e.msg.kind in good_kinds]
    if got:
        return holds()
    return violated((pay[0].index,), f"Alice paid but holds neither a refund nor {label}")


def _bob_security(v: View, issued_violation: bool) -> Verdict:
    bob, last = customer(v.n), escrow(v.n - 1)
    if not v.abides(bob, last):
        return not_applicable("Bob or the last escrow deviates")
    if not v.settled(bob):
        return not_applicable("Bob has not terminated")
    if v.actions(bob, "recv", last, "Money"):
        return holds()
    if issued_violation:
        issued = v.actions(bob, "send", last, "Receipt")
        if issued:
            return violated((issued[0].index,), "Bob issued the receipt but was not paid")
        return holds()
    if v.actions(bob, "recv", msg="AbortCert"):
        return holds()
    return violated(tuple(e.index for e in v.actions(bob)[-1:]),
                    "Bob holds neither the money nor an abort certificate")


def _connector_security(v: View) -> Verdict:
    results = []
    bal, _ = recompute_ledger(v.trace)
    for i in range(1, v.n):
        c = customer(i)
        if not v.abides(c, escrow(i - 1), escrow(i)):
            results.append(not_applicable(f"{c} or an adjacent escrow deviates"))
            continue
        if not v.settled(c):
            results.append(not_applicable(f"{c} has not terminated"))
            continue
        if bal.get(str(c), 0) < v.trace.endowments.get(str(c), 0):
            pays = v.actions(c, "send", msg="Money")
            return violated(tuple(e.index for e in pays), f"{c} lost its money")
        results.append(holds())
    return merge(results) if results else holds("no connectors")


def check_customer_security_timebounded(trace, params=None) -> dict:
    v = _view(trace)
    return {
        "CS1": _alice_security(v, {"Receipt"}, "the receipt"),
        "CS2": _bob_security(v, issued_violation=True),
        "CS3": _connector_security(v),
    }


def check_customer_security_eventual(trace) -> dict:
    v = _view(trace)
    return {
        "CS1'": _alice_security(v, {"CommitCert"}, "a commit certificate"),
        "CS2'": _bob_security(v, issued_violation=False),
        "CS3'": _connector_security(v),
    }


# -- time bounds -------------------------------------------------------------------


def _deadline_check(v: View, pid, start_ev, bound, resolved, what) -> Verdict:
    if resolved:
        r = resolved[0]
        if r.local <= bound:
            return holds()
        return violated((start_ev.index, r.index),
                        f"{pid} {what} at local {fmt_q(r.local)} > bound {fmt_q(bound)}")
    if not v.trace.quiescent and v.end_local(pid) <= bound:
        return not_applicable(f"{pid}: run ended before the bound")
    return violated((start_ev.index,), f"{pid} never {what} (bound {fmt_q(bound)})")


def time_bounds(params) -> dict:
    """Local-time budgets measured from each customer's triggering action."""
    phi, eps, delta = params.phi, params.eps, params.delta
    out = {"alice": phi * params.d[0] + 2 * delta, "bob": phi * eps + 2 * delta}
    for i in range(1, params.n):
        out[i] = phi * params.d[i] + 4 * delta + eps + phi * eps
    return out


def check_time_bounds(trace, params) -> Verdict:
    v = _view(trace)
    if not isinstance(v.meta.get("model"), Synchronous):
        return not_applicable("bounds only apply under synchrony")
    n = params.n
    budgets = time_bounds(params)
    results = []
    alice, e0 = customer(0), escrow(0)
    if v.abides(alice, e0):
        pay = v.actions(alice, "send", e0, "Money")
        if pay:
            res = [e for e in v.actions(alice, "recv", e0) if e.msg.kind in ("Money", "Receipt")]
            results.append(_deadline_check(v, alice, pay[0], pay[0].local + budgets["alice"], res,
                                           "resolved the payment"))
    bob, last = customer(n), escrow(n - 1)
    if v.abides(bob, last):
        issue = v.actions(bob, "send", last, "Receipt")
        if issue:
            res = v.actions(bob, "recv", last, "Money")
            results.append(_deadline_check(v, bob, issue[0], issue[0].local + budgets["bob"], res,
                                           "was paid"))
    for i in range(1, n):
        c = customer(i)
        if not v.abides(c, escrow(i - 1), escrow(i)):
            continue
        pay = v.actions(c, "send", escrow(i), "Money")
        if pay:
            res = [e for e in v.actions(c, "recv", msg="Money")
                   if e.peer in (str(escrow(i)), str(escrow(i - 1)))]
            results.append(_deadline_check(v, c, pay[0], pay[0].local + budgets[i], res,
                                           "got money back"))
    return merge(results) if results else not_applicable("no customer paid or issued")


# -- honesty ---------------------------------------------------------------------


def check_honesty(trace, params) -> Verdict:
    """Escrows keep both their promises, on their own clocks."""
    v = _view(trace)
    results = []
    for i in range(params.n):
        e = escrow(i)
        if not v.abides(e):
            continue
        up, down = str(customer(i)), str(customer(i + 1))
        acts = v.actions(e)
        promise = [x for x in acts if x.kind == "send" and x.msg.kind == "Promise"]
        for r in acts:
            if r.kind != "recv":
                continue
            if r.msg.kind == "Receipt" and r.peer == down and promise:
                u = promise[0].local
                if r.local < u + params.a[i]:
                    ok = [x for x in acts if x.kind == "send" and x.peer == down
                          and x.msg.kind == "Money" and x.local < r.local + params.eps]
                    if not ok and (v.trace.quiescent or v.end_local(e) >= r.local + params.eps):
                        return violated((promise[0].index, r.index),
                                        f"{e} did not pay downstream within eps of the receipt")
            if r.msg.kind == "Money" and r.peer == up:
                limit = r.local + params.d[i]
                ok = [x for x in acts if x.kind == "send" and x.peer == up
                      and x.msg.kind in ("Money", "Receipt") and x.local < limit]
                if not ok and (v.trace.quiescent or v.end_local(e) >= limit):
                    return violated((r.index,), f"{e} broke its guarantee to {up}")
        results.append(holds())
    return merge(results) if results else not_applicable("no abiding escrow")


# -- liveness --------------------------------------------------------------------


def check_liveness(trace, kind="Strong") -> Verdict:
    v = _view(trace)
    n = v.n
    parties = v.customers() + v.escrows()
    paid = v.actions(customer(n), "recv", escrow(n - 1), "Money")
    if not v.abides(*parties):
        return not_applicable("some participant deviates")
    if kind == "Weak" and not v.meta.get("patience_safe"):
        return not_applicable("patience below the safe bound")
    if paid:
        return holds()
    if kind == "Weak" and not v.trace.quiescent:
        return not_applicable("horizon reached before Bob was paid")
    last = v.trace.events[-1].index if v.trace.events else 0
    return violated((last,), "Bob was never paid")


# -- happy path ------------------------------------------------------------------


def happy_path_table(n: int) -> list:
    """Rows of the unique successful run, as (actor, kind, peer, message) groups.

    A group with several entries may happen in any order.
    """
    rows = []
    for i in range(n):
        c, e, nxt = customer(i), escrow(i), customer(i + 1)
        rows += [
            [(c, "send", e, "Money")], [(e, "recv", c, "Money")],
            [(e, "send", nxt, "Promise")], [(nxt, "recv", e, "Promise")],
        ]
    for i in range(n - 1, -1, -1):
        c, e, nxt = customer(i), escrow(i), customer(i + 1)
        rows += [
            [(nxt, "send", e, "Receipt")], [(e, "recv", nxt, "Receipt")],
            [(e, "send", nxt, "Money"), (e, "send", c, "Receipt")],
            [(nxt, "recv", e, "Money"), (c, "recv", e, "Receipt")],
        ]
    return rows


SETUP_KINDS = {"Guarantee", "Ready"}


def check_happy_path_order(trace, n=None) -> Verdict:
    """Same actions as the table; each participant sees them in table order; receives follow sends."""
    v = _view(trace)
    n = v.n if n is None else n
    if any(e.kind == "timeout" for e in v.trace.events):
        return not_applicable("a time-out transition was taken")
    if v.deviators:
        return not_applicable("some participant deviates")
    table = happy_path_table(n)
    expected = defaultdict(list)
    for row in table:
        per = defaultdict(list)
        for actor, kind, peer, msg in row:
            per[str(actor)].append((kind, str(peer), msg))
        for actor, group in per.items():
            expected[actor].append(sorted(group))
    for actor in sorted(set(expected) | set(v.by_actor)):
        acts = [(e.kind, e.peer, e.msg.kind, e.index) for e in v.by_actor.get(actor, ())
                if e.kind in ("send", "recv") and e.msg.kind not in SETUP_KINDS]
        pos = 0
        for group in expected.get(actor, []):
            chunk = acts[pos:pos + len(group)]
            if sorted(x[:3] for x in chunk) != group:
                wit = tuple(x[3] for x in chunk) or tuple(x[3] for x in acts[-1:])
                return violated(wit, f"{actor}: expected {group}, found {[x[:3] for x in chunk]}")
            pos += len(group)
        if pos != len(acts):
            return violated(tuple(x[3] for x in acts[pos:]), f"{actor}: unexpected extra actions")
    sent = set()
    for e in v.trace.events:
        if e.kind == "send" and e.msg.kind not in SETUP_KINDS:
            sent.add((e.actor, e.peer, e.msg.kind))
        elif e.kind == "recv" and e.msg.kind not in SETUP_KINDS:
            if (e.peer, e.actor, e.msg.kind) not in sent:
                return violated((e.index,), "receive precedes the matching send")
    return holds()


# -- eventual protocol -------------------------------------------------------------


def _tm_actor(name: str) -> bool:
    return name == "tm" or name.startswith("v")


def _verifying(msg, f, instance) -> bool:
    return isinstance(msg, (CommitCert, AbortCert)) and verify_certificate(msg.cert, f, instance)


def _tm_cfg(v: View):
    tm = v.meta.get("tm")
    return (tm.f, tm.instance) if tm is not None else (0, None)


def check_certificate_consistency(trace) -> Verdict:
    v = _view(trace)
    f, inst = _tm_cfg(v)
    first = {}
    for e in v.trace.events:
        if e.kind == "send" and _verifying(e.msg, f, inst):
            first.setdefault(e.msg.cert.decision, e.index)
    if len(first) > 1:
        return violated(tuple(first.values()), "both a commit and an abort certificate exist")
    return holds()


def check_eventual_termination(trace) -> Verdict:
    v = _view(trace)
    results = []
    for i in range(v.n + 1):
        c = customer(i)
        mine = [escrow(j) for j in (i - 1, i) if 0 <= j < v.n]
        if not v.abides(c, *mine):
            continue
        if v.trace.terminated(c):
            results.append(holds())
            continue
        state = v.trace.final_state(c)
        where = "quiescent" if v.trace.quiescent else "horizon reached"
        last = v.actions(c)[-1:]
        return violated(tuple(e.index for e in last), f"{c} stuck in state {state} ({where})")
    return merge(results) if results else not_applicable("no abiding customer with abiding escrows")


def check_terminal_states(trace) -> Verdict:
    """Abiding participants end only in the terminal states their security allows."""
    from .eventual import TERMINALS, role

    v = _view(trace)
    ready = v.meta.get("init_variant") == "ReadyChain"
    for pid in v.customers() + v.escrows():
        if not v.abides(pid) or not v.trace.terminated(pid):
            continue
        r = role(pid, v.n)
        allowed = set(TERMINALS[r])
        if ready and r == "alice":
            allowed.add("3")
        state = v.trace.final_state(pid)
        if state not in allowed:
            return violated(tuple(e.index for e in v.actions(pid)[-1:]),
                            f"{pid} terminated in {state}, allowed {sorted(allowed)}")
    return holds()


def _proposals(v: View):
    """Proposal sends that reached at least one TM process, by message id."""
    reached = {e.mid for e in v.trace.events if e.kind == "deliver" and _tm_actor(e.actor)}
    return [e for e in v.trace.events
            if e.kind == "send" and e.peer == "tm" and e.mid in reached]


def check_tm(trace) -> dict:
    v = _view(trace)
    f, inst = _tm_cfg(v)
    bob = str(customer(v.n))
    issued = [e for e in v.trace.events
              if e.kind == "send" and _tm_actor(e.actor) and _verifying(e.msg, f, inst)]
    decisions = {}
    for e in issued:
        decisions.setdefault(e.msg.cert.decision, e.index)
    out = {}
    out["TM-Consistency"] = (violated(tuple(decisions.values()), "two different certificates issued")
                             if len(decisions) > 1 else holds())
    props = _proposals(v)
    commit_props = [e for e in props if e.msg.kind == "ProposeCommit" and e.actor == bob]
    abort_props = [e for e in props if e.msg.kind == "ProposeAbort"]
    if 1 in decisions:
        first = decisions[1]
        out["TM-Commit-Validity"] = (holds() if any(e.index < first for e in commit_props)
                                     else violated((first,), "commit certificate without Bob's commit"))
    else:
        out["TM-Commit-Validity"] = holds("no commit certificate")
    if 0 in decisions:
        first = decisions[0]
        out["TM-Abort-Validity"] = (holds() if any(e.index < first for e in abort_props)
                                    else violated((first,), "abort certificate without any abort"))
    else:
        out["TM-Abort-Validity"] = holds("no abort certificate")
    out["TM-Termination"] = _tm_termination(v, commit_props + abort_props, f, inst)
    bad = [e.index for e in v.trace.events
           if e.kind == "send" and _tm_actor(e.actor) and e.actor not in v.deviators
           and isinstance(e.msg, (CommitCert, AbortCert)) and not verify_certificate(e.msg.cert, f, inst)]
    bad += [e.index for e in v.trace.events
            if e.kind == "recv" and isinstance(e.msg, (CommitCert, AbortCert))
            and not verify_certificate(e.msg.cert, f, inst)]
    out["Certificates"] = violated(bad, "a non-verifying certificate was emitted or accepted") if bad else holds()
    return out


def _tm_termination(v: View, proposals, f, inst) -> Verdict:
    if not proposals:
        return not_applicable("nobody proposed")
    model = v.meta.get("model")
    if type(model).__name__ == "Asynchronous":
        return not_applicable("termination is only promised with eventual synchrony")
    got = defaultdict(list)
    for e in v.trace.events:
        if e.kind == "deliver" and _tm_actor(e.peer or "") and _verifying(e.msg, f, inst):
            got[e.actor].append(e.time)
    for c in v.customers():
        times = got.get(str(c))
        if not times:
            return (violated((proposals[0].index,), f"{c} never received a certificate")
                    if v.trace.quiescent else
                    violated((proposals[0].index,), f"{c} had no certificate by the horizon"))
    for p in proposals:
        if not any(t >= p.time for t in got.get(p.actor, ())):
            return violated((p.index,), f"{p.actor} proposed but got no certificate afterwards")
    return holds()


# -- aggregation -----------------------------------------------------------------


def fingerprint(trace) -> dict:
    meta = trace.meta
    model = meta.get("model")
    behaviors = meta.get("behaviors", {})
    doc = {
        "protocol": meta.get("protocol"),
        "n": meta.get("n"),
        "seed": meta.get("seed"),
        "policy": meta.get("policy"),
        "init_variant": meta.get("init_variant"),
        "model": model_to_json(model) if model is not None else None,
        "behaviors": {str(p): b.to_json() for p, b in sorted(behaviors.items())},
    }
    if meta.get("params") is not None:
        doc["params"] = meta["params"].to_json()
    if meta.get("tm") is not None:
        tm = meta["tm"]
        doc["tm"] = {"kind": tm.kind, "m": tm.m, "f": tm.f}
    if meta.get("scenario") is not None:
        doc["scenario"] = meta["scenario"]
    return doc


def issuers_for(meta) -> dict:
    return {"Receipt": customer(meta["n"])} if meta.get("protocol") == "timebounded" else {}


def check_timebounded(trace, automata=None, params=None) -> PropertyReport:
    v = View(trace)
    params = params or v.meta["params"]
    verdicts = {}
    if automata is not None:
        verdicts["C"] = check_consistency(automata, _endow(trace), issuers_for(v.meta))
    verdicts["T"] = check_time_bounds(v, params)
    verdicts["ES"] = check_escrow_security(v)
    verdicts.update(check_customer_security_timebounded(v, params))
    verdicts["L"] = check_liveness(v, "Strong")
    verdicts["H"] = check_honesty(v, params)
    verdicts["HappyPath"] = check_happy_path_order(v)
    verdicts["Conservation"] = check_conservation(trace)
    return PropertyReport(verdicts, fingerprint(trace))


def check_eventual(trace, automata=None) -> PropertyReport:
    v = View(trace)
    verdicts = {}
    if automata is not None:
        verdicts["C"] = check_consistency(automata, _endow(trace), issuers_for(v.meta))
    verdicts["CC"] = check_certificate_consistency(v)
    verdicts["T'"] = check_eventual_termination(v)
    verdicts["ES"] = check_escrow_security(v)
    verdicts.update(check_customer_security_eventual(v))
    verdicts["L'"] = check_liveness(v, "Weak")
    verdicts["Terminals"] = check_terminal_states(v)
    verdicts.update(check_tm(v))
    verdicts["Conservation"] = check_conservation(trace)
    return PropertyReport(verdicts, fingerprint(trace))


def _endow(trace):
    from .anta import parse_pid

    return {parse_pid(k): v for k, v in trace.endowments.items()}


def check_all(trace, automata=None) -> PropertyReport:
    if trace.meta.get("protocol") == "eventual":
        return check_eventual(trace, automata)
    return check_timebounded(trace, automata)

