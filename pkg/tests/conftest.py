import pytest

from xchain.anta import customer
from xchain.engine import Network, run
from xchain.network import Synchronous
from xchain.rational import Q
from xchain.timebounded import build_network, compute_params


class Injector:
    """Test-side participant: sends scripted messages at fixed global times."""

    def __init__(self, pid, script=()):
        self.pid = pid
        self.script = list(script)  # (time, to, msg)
        self.inbox = []

    def start(self, sim):
        for t, to, msg in self.script:
            sim.schedule(Q(t), sim.send, self.pid, to, msg)

    def on_deliver(self, sim, sender, msg, mid):
        self.inbox.append((sim.now, sender, msg))


def solo(automaton, injectors, model=None, horizon=1000, seed=0, endowments=None, **kw):
    """Run one automaton against scripted neighbours; returns (trace, injectors)."""
    injectors = list(injectors)
    net = Network(
        automata={automaton.id: automaton},
        endowments=endowments or {i.pid: 1 for i in injectors},
        services=(lambda behaviors: injectors,),
    )
    trace = run(net, model or Synchronous(1), horizon=horizon, seed=seed, **kw)
    return trace, injectors


@pytest.fixture
def params2():
    return compute_params(2, 1, 10, 1)


@pytest.fixture
def happy2(params2):
    return build_network(2, params2)


def actions(trace, *kinds):
    return [(e.actor, e.kind, e.peer, e.msg.kind if e.msg else None)
            for e in trace.events if e.kind in kinds]


ALICE = customer(0)
