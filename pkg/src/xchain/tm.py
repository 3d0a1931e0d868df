"""Transaction managers: one trusted process, or a validator committee (oracle-backed or BFT).

Signatures are idealised: a tag is a digest over (validator, value, instance)
and only a validator's own process mints it.  Certificates are sets of
signatures; one verifies iff more than ``f`` distinct validators signed the
certificate's decision for the expected payment instance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

from .adversary import ByzantineValidator, Honest
from .anta import BBC, TM, ParticipantId, customer, validator
from .messages import (
    BbcDecide,
    BbcPropose,
    Certificate,
    ProposeAbort,
    ProposeCommit,
    Signed,
    SignedValue,
    cert_message,
)
from .rational import GRID, Q, to_q

ABORT, COMMIT = 0, 1
KINDS = ("centralized", "oracle", "bft")


def _tag(signer, value, instance) -> str:
    return hashlib.sha256(f"sig|{signer}|{value}|{instance}".encode()).hexdigest()[:16]


def sign(signer: ParticipantId, value: int, instance: str) -> SignedValue:
    return SignedValue(signer, value, instance, _tag(signer, value, instance))


def verify_signature(sig: SignedValue) -> bool:
    return sig.tag == _tag(sig.validator, sig.value, sig.instance)


def verify_certificate(cert: Certificate, f: int, instance: Optional[str] = None) -> bool:
    """More than ``f`` distinct signers, every signature on ``cert.decision``."""
    if cert.decision not in (ABORT, COMMIT):
        return False
    signers = set()
    for sig in cert.signatures:
        if sig.value != cert.decision or not verify_signature(sig):
            return False
        if instance is not None and sig.instance != instance:
            return False
        signers.add(sig.validator)
    return len(signers) >= f + 1


def bbc_decide(proposals: dict, adversary_choice: int) -> int:
    """Binary consensus oracle: unanimous honest input wins, otherwise the adversary picks."""
    values = set(proposals.values())
    if len(values) == 1:
        return values.pop()
    return adversary_choice


def reliable_broadcast(sender, msg, recipients, sender_faulty=False, adversary=None) -> dict:
    """Per-recipient delivery plan (recipient -> message or None).

    An honest sender reaches everyone.  A faulty sender passes ``msg`` either
    as one message or as a dict of per-recipient attempts; the adversary then
    picks uniform delivery of one attempted value or no delivery at all.
    """
    recipients = list(recipients)
    if not recipients:
        raise ValueError("reliable broadcast needs at least one recipient")
    if not sender_faulty:
        return {r: msg for r in recipients}
    attempts = msg if isinstance(msg, dict) else {r: msg for r in recipients}
    options = sorted({m for m in attempts.values() if m is not None}, key=repr)
    options.append(None)
    pick = options[adversary.randrange(len(options))] if adversary is not None else None
    return {r: pick for r in recipients}


@dataclass(frozen=True)
class TMConfig:
    kind: str = "centralized"
    m: int = 1
    f: int = 0
    instance: str = "pay-0"
    reaction: object = Q(1)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown TM kind {self.kind!r}")
        object.__setattr__(self, "reaction", to_q(self.reaction))
        if self.kind == "centralized":
            object.__setattr__(self, "m", 1)
            object.__setattr__(self, "f", 0)
        elif not 3 * self.f < self.m:
            raise ValueError(f"need f < m/3, got m={self.m}, f={self.f}")
        if self.f < 0:
            raise ValueError("f must be non-negative")

    @property
    def validators(self) -> list:
        return [validator(k) for k in range(self.m)] if self.kind == "bft" else []


def proposal_value(msg) -> Optional[int]:
    if isinstance(msg, ProposeAbort):
        return ABORT
    if isinstance(msg, ProposeCommit):
        return COMMIT
    return None


def effective(proposal: int, sender: ParticipantId, bob: ParticipantId) -> bool:
    """Aborts count from any customer; a commit only from Bob."""
    return proposal == ABORT or sender == bob


# -- single-process managers -------------------------------------------------


@dataclass(frozen=True)
class TMState:
    certificate: Optional[Certificate] = None
    byzantine_inputs: tuple = ()


def tm_handle_proposal(state: TMState, sender, proposal: int, config: TMConfig, customers,
                       bob, adversary_choice: int = ABORT):
    """Process one proposal; returns ``(state, [(recipient, certificate), ...])``."""
    if state.certificate is not None:
        return state, [(sender, state.certificate)]
    if not effective(proposal, sender, bob):
        return TMState(None, state.byzantine_inputs + ((str(sender), proposal),)), []
    if config.kind == "oracle":
        honest = {k: proposal for k in range(config.m - config.f)}
        decision = bbc_decide(honest, adversary_choice)
        signers = [validator(k) for k in range(config.m - config.f)]
    else:
        decision = proposal
        signers = [TM]
    cert = Certificate(decision, frozenset(sign(s, decision, config.instance) for s in signers))
    return TMState(cert, state.byzantine_inputs), [(c, cert) for c in customers]


class Service:
    """Non-automaton participant reacting within ``reaction`` of its local clock."""

    def __init__(self, pid, behavior, reaction):
        self.pid = pid
        self.behavior = behavior
        self.reaction = reaction
        self.crash_at = behavior.crash_at()

    def start(self, sim):
        pass

    def dead(self, sim) -> bool:
        if self.crash_at is None:
            return False
        clock = sim.clock(self.pid)
        return sim.local(self.pid) >= clock.offset + self.crash_at

    def later(self, sim, to, msg, raw=False):
        k = sim.rng(self.pid, "emit").randint(1, GRID - 1)
        clock = sim.clock(self.pid)
        at = clock.to_global(sim.local(self.pid) + self.reaction * Q(k, GRID))
        sim.schedule(at, self._fire, sim, to, msg, raw)

    def _fire(self, sim, to, msg, raw):
        if self.dead(sim):
            return
        if raw:
            for recipient, m in msg.items():
                if m is not None:
                    sim.send(self.pid, recipient, m)
        else:
            sim.send(self.pid, to, msg)


class CentralizedTM(Service):
    def __init__(self, config: TMConfig, customers, bob, behavior=None):
        super().__init__(TM, behavior or Honest(), config.reaction)
        self.config = config
        self.customers = list(customers)
        self.bob = bob
        self.state = TMState()

    def on_deliver(self, sim, sender, msg, mid):
        value = proposal_value(msg)
        if value is None or self.dead(sim):
            sim.record(self.pid, "drop", sender, msg, mid=mid)
            return
        before = self.state
        choice = sim.rng(self.pid, "adv").randint(0, 1)
        self.state, out = tm_handle_proposal(self.state, sender, value, self.config,
                                             self.customers, self.bob, choice)
        if before.certificate is None and self.state.certificate is not None:
            sim.record(self.pid, "note", sender, cert_message(self.state.certificate), state="decided")
        if not out and self.state.byzantine_inputs != before.byzantine_inputs:
            sim.record(self.pid, "note", sender, msg, state="ignored")
        for to, cert in out:
            self.later(sim, to, cert_message(cert))


class TMRouter:
    """Maps a customer's ``s(TM, proposal)`` onto deliveries."""

    def __init__(self, config: TMConfig):
        self.config = config

    def route(self, sim, sender, msg, equivocate):
        flipped = ProposeCommit() if isinstance(msg, ProposeAbort) else ProposeAbort()
        if self.config.kind != "bft":
            if equivocate and proposal_value(msg) is not None:
                pair = [(TM, msg), (TM, flipped)]
                if sim.rng(sender, "adv").randint(0, 1):
                    pair.reverse()
                return pair
            return [(TM, msg)]
        recipients = self.config.validators
        if equivocate and proposal_value(msg) is not None:
            attempts = {r: (msg if i % 2 == 0 else flipped) for i, r in enumerate(recipients)}
            plan = reliable_broadcast(sender, attempts, recipients, True, sim.rng(sender, "adv"))
        else:
            plan = reliable_broadcast(sender, msg, recipients)
        return [(r, plan[r]) for r in recipients]


# -- BFT-TM ------------------------------------------------------------------


class BbcOracle(Service):
    """Binary consensus black box over the honest validators' proposals."""

    def __init__(self, config: TMConfig, honest, reaction=None):
        super().__init__(BBC, Honest(), config.reaction if reaction is None else reaction)
        self.config = config
        self.honest = set(honest)
        self.proposals: dict = {}
        self.decided: Optional[int] = None

    def on_deliver(self, sim, sender, msg, mid):
        if not isinstance(msg, BbcPropose) or sender not in self.honest:
            sim.record(self.pid, "note", sender, msg, state="ignored")
            return
        self.proposals.setdefault(sender, msg.value)
        if self.decided is None and set(self.proposals) == self.honest:
            choice = sim.rng(self.pid, "adv").randint(0, 1)
            self.decided = bbc_decide(self.proposals, choice)
            sim.record(self.pid, "note", state=f"decide:{self.decided}")
            for k in range(self.config.m):
                self.later(sim, validator(k), BbcDecide(self.decided))


class Validator(Service):
    """One BFT-TM validator; Byzantine strategies deviate from the honest script."""

    def __init__(self, k: int, config: TMConfig, customers, bob, behavior=None):
        super().__init__(validator(k), behavior or Honest(), config.reaction)
        self.k = k
        self.config = config
        self.customers = list(customers)
        self.bob = bob
        self.peers = config.validators
        self.proposed = False
        self.decided: Optional[int] = None
        self.sigs = {ABORT: {}, COMMIT: {}}
        self.cert: Optional[Certificate] = None
        self.waiting: list = []
        self.strategy = behavior.strategy if isinstance(behavior, ByzantineValidator) else None

    def on_deliver(self, sim, sender, msg, mid):
        if self.dead(sim) or self.strategy == "silent":
            sim.record(self.pid, "drop", sender, msg, mid=mid)
            return
        value = proposal_value(msg)
        if value is not None:
            self._on_proposal(sim, sender, value)
        elif isinstance(msg, BbcDecide) and sender == BBC:
            self._on_decide(sim, msg.value)
        elif isinstance(msg, Signed) and sender.kind == "validator":
            sig = msg.sig
            if sig.validator == sender and sig.instance == self.config.instance and verify_signature(sig):
                self.sigs[sig.value].setdefault(sender, sig)
                self._check_quorum(sim)
        else:
            sim.record(self.pid, "drop", sender, msg, mid=mid)

    def _on_proposal(self, sim, sender, value):
        if self.decided is None:
            if self.proposed:
                return
            if not effective(value, sender, self.bob):
                sim.record(self.pid, "note", sender, ProposeCommit(), state="ignored")
                return
            self.proposed = True
            if self.strategy == "wrong_value":
                value = 1 - value
            self.later(sim, BBC, BbcPropose(value))
            return
        if self.cert is not None:
            self.later(sim, sender, self._cert_for(sender))
        else:
            self.waiting.append(sender)

    def _on_decide(self, sim, v):
        if self.decided is not None:
            return
        self.decided = v
        if self.strategy == "wrong_value":
            sig = sign(self.pid, 1 - v, self.config.instance)
            plan = {p: Signed(sig) for p in self.peers if p != self.pid}
        elif self.strategy == "equivocate":
            attempts = {}
            for i, p in enumerate(q for q in self.peers if q != self.pid):
                attempts[p] = Signed(sign(self.pid, i % 2, self.config.instance))
            plan = reliable_broadcast(self.pid, attempts, list(attempts), True,
                                      sim.rng(self.pid, "adv"))
        else:
            sig = sign(self.pid, v, self.config.instance)
            self.sigs[v][self.pid] = sig
            plan = reliable_broadcast(self.pid, Signed(sig), [p for p in self.peers if p != self.pid])
        self.later(sim, None, plan, raw=True)
        if self.strategy == "wrong_value":
            bogus = Certificate(1 - v, frozenset({sign(self.pid, 1 - v, self.config.instance)}))
            self.cert = bogus
            for c in self.customers:
                self.later(sim, c, cert_message(bogus))
            return
        self._check_quorum(sim)

    def _check_quorum(self, sim):
        v = self.decided
        if v is None or self.cert is not None or len(self.sigs[v]) <= self.config.f:
            return
        self.cert = Certificate(v, frozenset(self.sigs[v].values()))
        sim.record(self.pid, "note", msg=cert_message(self.cert), state="certified")
        for c in self.customers:
            self.later(sim, c, self._cert_for(c))
        for c in self.waiting:
            self.later(sim, c, self._cert_for(c))
        self.waiting.clear()

    def _cert_for(self, recipient):
        if self.strategy == "equivocate" and recipient.index % 2:
            v = 1 - self.cert.decision
            return cert_message(Certificate(v, frozenset({sign(self.pid, v, self.config.instance)})))
        return cert_message(self.cert)


def tm_services(config: TMConfig, n: int):
    """Service factory and router for a network with customers c_0..c_n."""
    customers = [customer(i) for i in range(n + 1)]
    bob = customer(n)

    def factory(behaviors):
        if config.kind != "bft":
            return [CentralizedTM(config, customers, bob, behaviors.get(TM))]
        vals = []
        honest = []
        for k in range(config.m):
            beh = behaviors.get(validator(k), Honest())
            vals.append(Validator(k, config, customers, bob, beh))
            if beh.abides:
                honest.append(validator(k))
        return vals + [BbcOracle(config, honest)]

    return factory, TMRouter(config)
