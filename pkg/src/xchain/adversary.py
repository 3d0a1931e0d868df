"""Deviation catalogue and the two runs of the strong-liveness impossibility argument.

A behaviour is attached to one participant per run.  The engine consults the
hook methods below; ``Honest`` leaves the automaton's semantics untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .messages import CommitCert, Money, Receipt
from .rational import Q, to_q

SEND, SKIP, HALT = "send", "skip", "halt"


class Behavior:
    abides = False
    equivocates = False

    def crash_at(self):
        """Local time (elapsed since start) from which nothing fires, or None."""
        return None

    def on_send(self, msg) -> str:
        return SEND

    def delays(self, msg) -> bool:
        return False

    def extra_delay(self):
        return Q(0)

    def to_json(self):
        return {"behavior": type(self).__name__}


@dataclass(frozen=True)
class Honest(Behavior):
    abides = True


@dataclass(frozen=True)
class Crash(Behavior):
    """Stops at local ``start + at``: nothing fires from then on."""

    at: object = Q(0)

    def __post_init__(self):
        object.__setattr__(self, "at", to_q(self.at))

    def crash_at(self):
        return self.at

    def to_json(self):
        return {"behavior": "Crash", "at": str(self.at)}


@dataclass(frozen=True)
class WithholdCertificate(Behavior):
    """Holds on to the receipt / commit certificate and goes silent."""

    def on_send(self, msg) -> str:
        return HALT if isinstance(msg, (Receipt, CommitCert)) else SEND


@dataclass(frozen=True)
class WithholdMoney(Behavior):
    def on_send(self, msg) -> str:
        return SKIP if isinstance(msg, Money) else SEND


@dataclass(frozen=True)
class KeepMoneyAndCertificate(Behavior):
    """Pockets any money and never lets go of a certificate."""

    def on_send(self, msg) -> str:
        if isinstance(msg, (Receipt, CommitCert)):
            return HALT
        return SKIP if isinstance(msg, Money) else SEND


@dataclass(frozen=True)
class DelayOutgoing(Behavior):
    """Extra network delay on outgoing messages of the listed kinds.

    With ``sticky`` every message after the first match is delayed as well.
    The engine clamps the total delay to the model's bound where one exists,
    so this only bites under asynchrony or before GST.  Following the
    protocol otherwise, the participant still counts as abiding.
    """

    kinds: tuple = ("Receipt",)
    extra: object = Q(1000)
    sticky: bool = True
    abides = True

    def __post_init__(self):
        object.__setattr__(self, "extra", to_q(self.extra))
        object.__setattr__(self, "kinds", tuple(self.kinds))

    def delays(self, msg) -> bool:
        return type(msg).__name__ in self.kinds

    def extra_delay(self):
        return self.extra

    def to_json(self):
        return {"behavior": "DelayOutgoing", "kinds": list(self.kinds), "extra": str(self.extra),
                "sticky": self.sticky}


@dataclass(frozen=True)
class EquivocateProposal(Behavior):
    """Sends conflicting proposals to different validators."""

    equivocates = True


VALIDATOR_STRATEGIES = ("wrong_value", "silent", "equivocate")


@dataclass(frozen=True)
class ByzantineValidator(Behavior):
    strategy: str = "wrong_value"

    def __post_init__(self):
        if self.strategy not in VALIDATOR_STRATEGIES:
            raise ValueError(f"unknown validator strategy {self.strategy!r}")

    def to_json(self):
        return {"behavior": "ByzantineValidator", "strategy": self.strategy}


CUSTOMER_DEVIATIONS = (Crash, WithholdCertificate, WithholdMoney, DelayOutgoing,
                       EquivocateProposal, KeepMoneyAndCertificate)


def behavior_from_json(doc: dict) -> Behavior:
    name = doc.get("behavior", "Honest")
    if name == "Honest":
        return Honest()
    if name == "Crash":
        return Crash(doc.get("at", 0))
    if name == "DelayOutgoing":
        return DelayOutgoing(tuple(doc.get("kinds", ("Receipt",))), doc.get("extra", 1000),
                             bool(doc.get("sticky", True)))
    if name == "ByzantineValidator":
        return ByzantineValidator(doc.get("strategy", "wrong_value"))
    simple = {c.__name__: c for c in (WithholdCertificate, WithholdMoney, EquivocateProposal,
                                      KeepMoneyAndCertificate)}
    if name in simple:
        return simple[name]()
    raise ValueError(f"unknown behavior {name!r}")


def wrap(behavior: Behavior, automaton, clock=None, **engine_opts):
    """Engine participant running ``automaton`` under ``behavior``."""
    from .anta import validate_automaton
    from .engine import AutomatonProcess, ConfigurationError
    from .network import ParticipantClock

    problems = validate_automaton(automaton)
    if problems:
        raise ConfigurationError(f"{automaton.id}: {problems}")
    return AutomatonProcess(automaton, behavior, clock or ParticipantClock(), **engine_opts)


# -- impossibility runs --------------------------------------------------------


@dataclass(frozen=True)
class ImpossibilityScenario:
    run: str
    holder: int
    n: int
    behaviors: dict = field(default_factory=dict)
    divergence: object = Q(0)


def impossibility_scenario(run: str, holder: int, n: int, divergence) -> ImpossibilityScenario:
    """Behaviour assignment for run r1 (holder withholds) or r2 (holder's messages stall).

    ``holder`` is the customer index that last holds the receipt before it
    travels upstream: ``n`` for Bob, 1..n-1 for a connector.  In r2 every
    message from the holder starting with the receipt is delayed past
    ``divergence``, so up to that instant both runs look the same to
    everyone else.
    """
    from .anta import customer

    if run not in ("r1", "r2"):
        raise ValueError(f"unknown run {run!r}")
    if not 1 <= holder <= n:
        raise ValueError(f"holder index {holder} out of range 1..{n}")
    divergence = to_q(divergence)
    pid = customer(holder)
    if run == "r1":
        beh = WithholdCertificate()
    else:
        beh = DelayOutgoing(("Receipt",), divergence, sticky=True)
    return ImpossibilityScenario(run, holder, n, {pid: beh}, divergence)


def project(trace, exclude, until) -> list:
    """Actions and deliveries of everyone but ``exclude`` strictly before ``until``."""
    excl = str(exclude)
    return [
        (e.time, e.local, e.actor, e.kind, e.peer, e.msg_key())
        for e in trace.events
        if e.actor != excl and e.time < until
    ]


def indistinguishable(trace_a, trace_b, exclude, until) -> bool:
    return project(trace_a, exclude, until) == project(trace_b, exclude, until)


__all__ = [
    "Behavior", "Honest", "Crash", "WithholdCertificate", "WithholdMoney", "DelayOutgoing",
    "EquivocateProposal", "KeepMoneyAndCertificate", "ByzantineValidator", "wrap",
    "impossibility_scenario", "ImpossibilityScenario", "project", "indistinguishable",
    "behavior_from_json", "SEND", "SKIP", "HALT",
]
