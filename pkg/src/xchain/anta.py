"""Asynchronous networks of timed automata: syntax and single-automaton semantics.

An automaton has input, output and termination states.  Output states carry a
strictly positive time-out (or infinity) and exactly one outgoing ``SendSet``
transition; input states wait on ``Receive`` and ``TimeoutGuard`` transitions.
Transitions may record the firing instant in clock variables (``x := now``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional

from .rational import INF, Q, to_q


class AntaError(Exception):
    pass


class NotInputStateError(AntaError):
    """Enabled-transition queries only make sense in input states."""


class MonotonicityError(AntaError):
    """A transition was fired at a local time earlier than the automaton's clock."""


# -- participants --------------------------------------------------------------

_PREFIX = {"escrow": "e", "customer": "c", "validator": "v"}


@dataclass(frozen=True, order=True)
class ParticipantId:
    kind: str
    index: int = 0

    def __str__(self) -> str:
        if self.kind in _PREFIX:
            return f"{_PREFIX[self.kind]}{self.index}"
        return self.kind

    @property
    def name(self) -> str:
        return str(self)

    def accepts_from(self, sender: "ParticipantId") -> bool:
        """Whether a ``Receive`` naming ``self`` matches a message from ``sender``.

        A distributed transaction manager speaks through its validators, so
        ``r(TM, .)`` matches any validator.
        """
        if self == sender:
            return True
        return self.kind == "tm" and sender.kind == "validator"


def escrow(i: int) -> ParticipantId:
    return ParticipantId("escrow", i)


def customer(i: int) -> ParticipantId:
    return ParticipantId("customer", i)


def validator(k: int) -> ParticipantId:
    return ParticipantId("validator", k)


TM = ParticipantId("tm")
BBC = ParticipantId("bbc")


def parse_pid(text: str) -> ParticipantId:
    text = text.strip()
    if text in ("tm", "bbc"):
        return ParticipantId(text)
    for kind, prefix in _PREFIX.items():
        if text.startswith(prefix) and text[len(prefix):].isdigit():
            return ParticipantId(kind, int(text[len(prefix):]))
    raise ValueError(f"unknown participant {text!r}")


def check_participant_bounds(pid: ParticipantId, n: int, m: int = 0) -> None:
    """Raise ``ValueError`` when an index falls outside the declared network."""
    limits = {"escrow": n - 1, "customer": n, "validator": m - 1}
    if pid.kind in limits and not 0 <= pid.index <= limits[pid.kind]:
        raise ValueError(f"{pid} outside network bounds (n={n}, m={m})")


# -- states --------------------------------------------------------------------


@dataclass(frozen=True)
class Input:
    pass


@dataclass(frozen=True)
class Output:
    timeout: object  # positive rational or INF


@dataclass(frozen=True)
class Termination:
    pass


StateKind = Input | Output | Termination


# -- transition labels ---------------------------------------------------------


@dataclass(frozen=True)
class Receive:
    """``r(sender, pattern)``; matches on constructor and sender only.

    ``accept`` is an optional validity check (used for threshold certificates,
    which a third party must be able to verify before acting on them).
    """

    sender: ParticipantId
    pattern: type
    accept: Optional[Callable[[object], bool]] = field(default=None, compare=False)

    def matches(self, sender: ParticipantId, msg) -> bool:
        if type(msg) is not self.pattern or not self.sender.accepts_from(sender):
            return False
        return self.accept is None or self.accept(msg)


@dataclass(frozen=True)
class Bound:
    """Placeholder in a send: the message of this class received earlier."""

    pattern: type


@dataclass(frozen=True)
class SendSet:
    sends: tuple  # of (recipient, message-or-Bound)


@dataclass(frozen=True)
class TimeoutGuard:
    """``now >= var + offset`` (or ``now >= offset`` when ``var`` is None)."""

    offset: object
    var: Optional[str] = None

    def threshold(self, store) -> Q:
        if self.var is None:
            return self.offset
        return store[self.var] + self.offset

    def holds(self, now, store) -> bool:
        return now >= self.threshold(store)


Label = Receive | SendSet | TimeoutGuard


@dataclass(frozen=True)
class Transition:
    source: str
    label: Label
    target: str
    assign: tuple = ()


# -- automata ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimedAutomaton:
    id: ParticipantId
    states: dict
    initial: str
    transitions: tuple
    outgoing: dict = field(init=False, repr=False)

    def __post_init__(self):
        out: dict[str, list] = {s: [] for s in self.states}
        for t in self.transitions:
            out.setdefault(t.source, []).append(t)
        object.__setattr__(self, "outgoing", {s: tuple(ts) for s, ts in out.items()})

    def kind_of(self, state: str):
        return self.states[state]

    def variables(self) -> set[str]:
        return {v for t in self.transitions for v in t.assign}

    def replace(self, **changes) -> "TimedAutomaton":
        base = dict(id=self.id, states=self.states, initial=self.initial, transitions=self.transitions)
        base.update(changes)
        return TimedAutomaton(**base)


@dataclass(frozen=True)
class AutomatonConfiguration:
    state: str
    store: dict = field(default_factory=dict)
    now: object = Q(0)
    bindings: dict = field(default_factory=dict)


class Violation(NamedTuple):
    state: str
    reason: str


def validate_automaton(a: TimedAutomaton) -> list[Violation]:
    """Every broken structural invariant, one entry per offending state."""
    report: list[Violation] = []
    if a.initial not in a.states:
        report.append(Violation(a.initial, "initial state not declared"))
    for t in a.transitions:
        for end in (t.source, t.target):
            if end not in a.states:
                report.append(Violation(end, "transition endpoint not declared"))
    declared = a.variables()
    for name, kind in a.states.items():
        outs = a.outgoing.get(name, ())
        if isinstance(kind, Termination):
            if outs:
                report.append(Violation(name, "termination state has outgoing transitions"))
        elif isinstance(kind, Output):
            to = kind.timeout
            if not (to == INF or to > 0):
                report.append(Violation(name, "output time-out must be positive or infinite"))
            if len(outs) != 1:
                report.append(Violation(name, f"output state has {len(outs)} outgoing transitions"))
            elif not isinstance(outs[0].label, SendSet):
                report.append(Violation(name, "output state's transition is not a send"))
        elif isinstance(kind, Input):
            for t in outs:
                if isinstance(t.label, SendSet):
                    report.append(Violation(name, "input state has an outgoing send"))
        else:
            report.append(Violation(name, f"unknown state kind {kind!r}"))
        for t in outs:
            lab = t.label
            if isinstance(lab, SendSet) and not lab.sends:
                report.append(Violation(name, "empty send set"))
            if isinstance(lab, TimeoutGuard) and lab.var is not None and lab.var not in declared:
                report.append(Violation(name, f"guard reads undeclared variable {lab.var!r}"))
    return report


def enabled_transitions(
    a: TimedAutomaton, cfg: AutomatonConfiguration, pending: Iterable
) -> list[Transition]:
    """Receives matching some pending ``(sender, msg)`` plus guards true at ``cfg.now``.

    Returned in declaration order.
    """
    if not isinstance(a.states.get(cfg.state), Input):
        raise NotInputStateError(f"{a.id} is in non-input state {cfg.state!r}")
    pending = list(pending)
    out = []
    for t in a.outgoing[cfg.state]:
        lab = t.label
        if isinstance(lab, TimeoutGuard):
            if lab.holds(cfg.now, cfg.store):
                out.append(t)
        elif any(lab.matches(s, m) for s, m in pending):
            out.append(t)
    return out


def apply_transition(
    cfg: AutomatonConfiguration, t: Transition, fire_time, received=None
) -> AutomatonConfiguration:
    """Take ``t`` at local ``fire_time``; assignments record the firing instant."""
    fire_time = to_q(fire_time)
    if fire_time < cfg.now:
        raise MonotonicityError(f"fire time {fire_time} precedes local now {cfg.now}")
    store = cfg.store
    if t.assign:
        store = dict(store)
        for var in t.assign:
            store[var] = fire_time
    bindings = cfg.bindings
    if received is not None:
        bindings = {**bindings, type(received).__name__: received}
    return AutomatonConfiguration(t.target, store, fire_time, bindings)


def resolve(msg, bindings: dict):
    """Concrete message for a send element, substituting ``Bound`` placeholders."""
    if isinstance(msg, Bound):
        try:
            return bindings[msg.pattern.__name__]
        except KeyError:
            raise AntaError(f"nothing bound for {msg.pattern.__name__}") from None
    return msg
