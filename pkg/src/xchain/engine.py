"""Global discrete-event scheduler over skewed local clocks.

One ``run`` owns its whole world: processes, clocks, random streams and the
event queue.  Every random draw comes from a stream keyed by (seed,
participant, purpose), so one participant's extra activity never perturbs the
draws of another.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .adversary import HALT, SKIP, Behavior, Honest
from .anta import (
    TM,
    AutomatonConfiguration,
    Input,
    Output,
    ParticipantId,
    Receive,
    Termination,
    TimedAutomaton,
    TimeoutGuard,
    apply_transition,
    resolve,
    validate_automaton,
)
from .messages import Message, Money
from .network import (
    ParticipantClock,
    PartiallySynchronous,
    Synchronous,
    check_clocks,
    delivery_bound,
    sample_delivery,
)
from .rational import GRID, INF, Q, fmt_q, to_q

POLICIES = ("immediate", "uniform", "latest")


class ConfigurationError(ValueError):
    pass


class TraceEvent:
    """One trace record.

    kinds: ``send`` (action s(peer,msg)@actor), ``recv`` (action r(peer,msg)@actor),
    ``timeout`` (guard transition), ``enter`` (actor now in ``state``),
    ``deliver`` (network hands msg from peer to actor), ``drop`` (delivered
    message that enabled nothing), ``note`` (service-side bookkeeping).
    """

    __slots__ = ("index", "time", "local", "actor", "kind", "peer", "msg", "state", "mid", "sent")

    def __init__(self, index, time, local, actor, kind, peer=None, msg=None, state=None,
                 mid=None, sent=None):
        self.index = index
        self.time = time
        self.local = local
        self.actor = actor
        self.kind = kind
        self.peer = peer
        self.msg = msg
        self.state = state
        self.mid = mid
        self.sent = sent

    def msg_key(self):
        return None if self.msg is None else json.dumps(self.msg.to_json(), sort_keys=True)

    def to_json(self) -> dict:
        doc = {
            "i": self.index,
            "t": fmt_q(self.time),
            "local": fmt_q(self.local),
            "actor": self.actor,
            "kind": self.kind,
        }
        if self.peer is not None:
            doc["peer"] = self.peer
        if self.msg is not None:
            doc["msg"] = self.msg.to_json()
        if self.state is not None:
            doc["state"] = self.state
        if self.mid is not None:
            doc["mid"] = self.mid
        if self.sent is not None:
            doc["sent"] = fmt_q(self.sent)
        return doc

    def __repr__(self):
        return f"TraceEvent({json.dumps(self.to_json(), sort_keys=True)})"


@dataclass
class Trace:
    events: list = field(default_factory=list)
    final_states: dict = field(default_factory=dict)
    ledger: dict = field(default_factory=dict)
    endowments: dict = field(default_factory=dict)
    in_flight_money: int = 0
    truncated: bool = False
    quiescent: bool = True
    end_time: object = Q(0)
    meta: dict = field(default_factory=dict)

    def of(self, actor, *kinds):
        actor = str(actor)
        return [e for e in self.events if e.actor == actor and (not kinds or e.kind in kinds)]

    def terminated(self, actor) -> bool:
        return self.final_states.get(str(actor), (None, False))[1]

    def final_state(self, actor):
        return self.final_states.get(str(actor), (None, False))[0]

    def to_jsonl(self) -> str:
        lines = [json.dumps(e.to_json(), sort_keys=True, separators=(",", ":")) for e in self.events]
        summary = {
            "kind": "end",
            "t": fmt_q(self.end_time),
            "truncated": self.truncated,
            "quiescent": self.quiescent,
            "final_states": {k: v[0] for k, v in sorted(self.final_states.items())},
            "ledger": dict(sorted(self.ledger.items())),
            "in_flight_money": self.in_flight_money,
        }
        lines.append(json.dumps(summary, sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Network:
    """Immutable description of a world; ``run`` instantiates it afresh.

    ``services`` are factories ``(behaviors) -> list of processes`` for
    non-automaton participants (transaction managers, validators, oracles).
    ``tm_router`` expands a customer's send to the TM into concrete deliveries.
    """

    automata: dict
    behaviors: dict = field(default_factory=dict)
    endowments: dict = field(default_factory=dict)
    services: tuple = ()
    tm_router: Optional[object] = None
    black_wait: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def behavior(self, pid) -> Behavior:
        return self.behaviors.get(pid, HONEST)

    def participants(self) -> list:
        return sorted(self.automata)


HONEST = Honest()


class Sim:
    """Mutable world of one run."""

    def __init__(self, network: Network, model, clocks: dict, horizon, seed: int,
                 policy: str = "uniform", black_window=Q(1)):
        if policy not in POLICIES:
            raise ConfigurationError(f"unknown emission policy {policy!r}")
        self.network = network
        self.model = model
        self.horizon = to_q(horizon)
        self.seed = seed
        self.policy = policy
        self.black_window = to_q(black_window)
        self.clocks = clocks
        self.max_rate = max((c.rate for c in clocks.values()), default=Q(1))
        self.now = Q(0)
        self.queue: list = []
        self.seq = 0
        self.events: list = []
        self.mid = 0
        self.ledger = {str(p): int(v) for p, v in network.endowments.items()}
        self.in_flight = 0
        self.processes: dict = {}
        self._rngs: dict = {}

    # -- infrastructure ----------------------------------------------------

    def rng(self, pid, purpose: str) -> random.Random:
        key = (str(pid), purpose)
        r = self._rngs.get(key)
        if r is None:
            r = self._rngs[key] = random.Random(f"{self.seed}:{key[0]}:{purpose}")
        return r

    def clock(self, pid) -> ParticipantClock:
        c = self.clocks.get(pid)
        if c is None:
            c = self.clocks[pid] = ParticipantClock()
        return c

    def local(self, pid, t=None):
        return self.clock(pid).local(self.now if t is None else t)

    def schedule(self, t, fn: Callable, *args):
        if t < self.now:
            raise ConfigurationError(f"scheduling into the past: {t} < {self.now}")
        self.seq += 1
        heapq.heappush(self.queue, (t, self.seq, fn, args))

    def record(self, actor, kind, peer=None, msg=None, state=None, mid=None, sent=None,
               local=None):
        ev = TraceEvent(len(self.events), self.now,
                        self.local(actor) if local is None else local, str(actor), kind,
                        None if peer is None else str(peer), msg, state, mid, sent)
        self.events.append(ev)
        return ev

    # -- messaging ---------------------------------------------------------

    def send(self, sender: ParticipantId, to: ParticipantId, msg: Message, extra=Q(0),
             equivocate=False, record=True):
        """Emit ``msg`` now; the TM address fans out through the router."""
        self.mid += 1
        mid = self.mid
        if record:
            self.record(sender, "send", to, msg, mid=mid)
        if isinstance(msg, Money):
            self.ledger[str(sender)] = self.ledger.get(str(sender), 0) - 1
            self.in_flight += 1
        if to == TM and self.network.tm_router is not None:
            plan = self.network.tm_router.route(self, sender, msg, equivocate)
        else:
            plan = [(to, msg)]
        for recipient, m in plan:
            if m is None:
                continue
            self._transmit(sender, recipient, m, extra, mid)

    def _transmit(self, sender, to, msg, extra, mid):
        rng = self.rng(sender, "net")
        t = sample_delivery(self.model, self.now, rng, self.max_rate)
        if extra:
            t = t + extra
            bound = delivery_bound(self.model, self.now, self.max_rate)
            if bound is not None and isinstance(self.model, (Synchronous, PartiallySynchronous)):
                t = min(t, bound)
        self.schedule(t, self._deliver, sender, to, msg, mid, self.now)

    def _deliver(self, sender, to, msg, mid, sent):
        self.record(to, "deliver", sender, msg, mid=mid, sent=sent)
        if isinstance(msg, Money):
            self.in_flight -= 1
            self.ledger[str(to)] = self.ledger.get(str(to), 0) + 1
        proc = self.processes.get(to)
        if proc is None:
            self.record(to, "drop", sender, msg, mid=mid)
            return
        proc.on_deliver(self, sender, msg, mid)

    # -- main loop -----------------------------------------------------------

    def run(self) -> Trace:
        for proc in self.processes.values():
            proc.start(self)
        quiescent = True
        while self.queue:
            t, _, fn, args = self.queue[0]
            if t > self.horizon:
                quiescent = False
                break
            heapq.heappop(self.queue)
            self.now = t
            fn(*args)
        finals = {}
        for pid, proc in sorted(self.processes.items()):
            if isinstance(proc, AutomatonProcess):
                finals[str(pid)] = (proc.cfg.state, proc.terminated)
        truncated = any(not done for _, done in finals.values())
        return Trace(
            events=self.events,
            final_states=finals,
            ledger=dict(self.ledger),
            endowments={str(p): int(v) for p, v in self.network.endowments.items()},
            in_flight_money=self.in_flight,
            truncated=truncated,
            quiescent=quiescent,
            end_time=self.now if quiescent else self.horizon,
            meta={**self.network.meta, "behaviors": dict(self.network.behaviors),
                  "model": self.model, "clocks": dict(self.clocks), "seed": self.seed,
                  "policy": self.policy, "horizon": self.horizon},
        )


class AutomatonProcess:
    """Runs one automaton under a behaviour, following the ANTA semantics.

    Delivered messages join a pending set.  On entering an input state, and on
    every delivery while in one, a transition enabled by a pending message (or
    an expired guard) fires; unmatched messages stay pending.  They are
    dropped only when the automaton terminates or has crashed.
    """

    def __init__(self, automaton: TimedAutomaton, behavior: Behavior, clock: ParticipantClock,
                 black_wait=Q(0)):
        self.a = automaton
        self.pid = automaton.id
        self.behavior = behavior
        self.clock = clock
        self.black_wait = to_q(black_wait)
        self.cfg = AutomatonConfiguration(automaton.initial)
        self.visit = 0
        self.pending: list = []
        self.remaining = 0
        self.halted = False
        self.delay_armed = False
        self.start_local = clock.offset
        crash = behavior.crash_at()
        self.crash_local = None if crash is None else clock.offset + crash

    @property
    def terminated(self) -> bool:
        return isinstance(self.a.states[self.cfg.state], Termination)

    def _dead(self, local) -> bool:
        if self.halted:
            return True
        if self.crash_local is not None and local >= self.crash_local:
            self.halted = True
            return True
        return False

    def start(self, sim: Sim):
        local = sim.local(self.pid)
        self.cfg = AutomatonConfiguration(self.a.initial, {}, local, {})
        if self._dead(local):
            return
        self._enter(sim)

    def _enter(self, sim: Sim):
        self.visit += 1
        state = self.cfg.state
        kind = self.a.states[state]
        sim.record(self.pid, "enter", state=state, local=self.cfg.now)
        if isinstance(kind, Termination):
            for sender, msg, mid in self.pending:
                sim.record(self.pid, "drop", sender, msg, mid=mid)
            self.pending.clear()
            return
        if isinstance(kind, Output):
            self._schedule_emissions(sim, kind.timeout)
            return
        self._enter_input(sim)

    # -- output states -----------------------------------------------------

    def _schedule_emissions(self, sim: Sim, timeout):
        (t,) = self.a.outgoing[self.cfg.state]
        sends = t.label.sends
        ell = self.cfg.now
        if timeout == INF:
            base = max(ell, self.start_local + self.black_wait)
            width = sim.black_window
        else:
            base, width = ell, timeout
        rng = sim.rng(self.pid, "emit")
        times = []
        for _ in sends:
            if sim.policy == "immediate":
                k = 1
            elif sim.policy == "latest":
                k = GRID - 1
            else:
                k = rng.randint(1, GRID - 1)
            times.append(base + width * Q(k, GRID))
        self.remaining = len(sends)
        self.pending_times = times
        visit = self.visit
        for idx, local in enumerate(times):
            sim.schedule(self.clock.to_global(local), self._emit, sim, visit, t, idx)

    def _emit(self, sim: Sim, visit, t, idx):
        if visit != self.visit:
            return
        local = sim.local(self.pid)
        if self._dead(local):
            return
        to, template = t.label.sends[idx]
        msg = resolve(template, self.cfg.bindings)
        verdict = self.behavior.on_send(msg)
        if verdict == HALT:
            self.halted = True
            return
        if verdict != SKIP:
            extra = Q(0)
            if self.delay_armed or self.behavior.delays(msg):
                self.delay_armed = getattr(self.behavior, "sticky", False)
                extra = self.behavior.extra_delay()
            sim.send(self.pid, to, msg, extra=extra, equivocate=self.behavior.equivocates)
        self.remaining -= 1
        if self.remaining == 0:
            self.cfg = apply_transition(self.cfg, t, local)
            self._enter(sim)

    # -- input states --------------------------------------------------------

    def _enter_input(self, sim: Sim):
        if not self._step(sim, self.cfg.now):
            visit = self.visit
            for t in self.a.outgoing[self.cfg.state]:
                if isinstance(t.label, TimeoutGuard):
                    at = self.clock.to_global(t.label.threshold(self.cfg.store))
                    sim.schedule(max(at, sim.now), self._timeout, sim, visit, t)

    def _step(self, sim: Sim, now) -> bool:
        """Fire one enabled transition of the current input state, if any."""
        enabled = []
        for t in self.a.outgoing[self.cfg.state]:
            lab = t.label
            if isinstance(lab, TimeoutGuard):
                if lab.holds(now, self.cfg.store):
                    enabled.append((t, None))
            else:
                for j, (sender, msg, mid) in enumerate(self.pending):
                    if lab.matches(sender, msg):
                        enabled.append((t, j))
                        break
        if not enabled:
            return False
        t, j = self._choose(sim, enabled)
        if j is None:
            self._fire(sim, t, None, None, now)
        else:
            sender, msg, mid = self.pending.pop(j)
            self._fire(sim, t, sender, msg, now)
        return True

    def _choose(self, sim: Sim, options):
        if len(options) == 1:
            return options[0]
        return options[sim.rng(self.pid, "choice").randrange(len(options))]

    def _fire(self, sim: Sim, t, sender, msg, local):
        if isinstance(t.label, Receive):
            sim.record(self.pid, "recv", sender, msg, state=t.target, local=local)
        else:
            sim.record(self.pid, "timeout", state=t.target, local=local)
        self.cfg = apply_transition(self.cfg, t, local, received=msg)
        self._enter(sim)

    def _timeout(self, sim: Sim, visit, t):
        if visit != self.visit:
            return
        local = sim.local(self.pid)
        if self._dead(local):
            return
        if t.label.holds(local, self.cfg.store):
            self._fire(sim, t, None, None, local)

    def on_deliver(self, sim: Sim, sender, msg, mid):
        local = sim.local(self.pid)
        if self._dead(local) or self.terminated:
            sim.record(self.pid, "drop", sender, msg, mid=mid)
            return
        self.pending.append((sender, msg, mid))
        if isinstance(self.a.states[self.cfg.state], Input):
            self._step(sim, local)


def run(network: Network, model, clocks: Optional[dict] = None, horizon=Q(10**6), seed: int = 0,
        policy: str = "uniform", black_window=Q(1)) -> Trace:
    """Execute ``network`` until every automaton stops or ``horizon`` passes."""
    clocks = dict(clocks or {})
    for pid, a in network.automata.items():
        problems = validate_automaton(a)
        if problems:
            raise ConfigurationError(f"{pid}: {problems}")
        clocks.setdefault(pid, ParticipantClock())
    check_clocks(model, {p: c for p, c in clocks.items() if p in network.automata})
    sim = Sim(network, model, clocks, horizon, seed, policy, black_window)
    for pid in network.participants():
        a = network.automata[pid]
        sim.processes[pid] = AutomatonProcess(
            a, network.behavior(pid), sim.clock(pid), network.black_wait.get(pid, Q(0))
        )
    for factory in network.services:
        for proc in factory(network.behaviors):
            sim.processes[proc.pid] = proc
    return sim.run()
