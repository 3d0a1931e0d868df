"""The time-bounded interledger payment protocol: parameters and automata.

Escrow ``e_i`` sits between customers ``c_i`` (upstream, paying) and
``c_{i+1}`` (downstream, paid).  ``c_0`` is Alice, ``c_n`` is Bob, the
customers in between are connectors.
"""

from __future__ import annotations

from dataclasses import dataclass

from .anta import (
    Bound,
    Input,
    Output,
    Receive,
    SendSet,
    Termination,
    TimedAutomaton,
    TimeoutGuard,
    Transition,
    customer,
    escrow,
)
from .engine import Network
from .messages import Guarantee, Money, Promise, Ready, Receipt
from .network import ParameterError
from .rational import INF, Q, to_q

VARIANTS = ("StartDelay", "PreArrangedSetup", "ReadyChain")
DEFAULT_VARIANT = "ReadyChain"
INSTANCE = "pay-0"


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    eps: object
    delta: object
    phi: object
    a: tuple
    d: tuple
    slack: object = Q(1)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "eps": str(self.eps),
            "delta": str(self.delta),
            "phi": str(self.phi),
            "a": [str(x) for x in self.a],
            "d": [str(x) for x in self.d],
            "slack": str(self.slack),
        }


def _check_domain(n, eps, delta, phi):
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if phi < 1:
        raise ParameterError("phi must be at least 1")


def compute_params(n: int, eps, delta, phi, slack=1) -> ProtocolParams:
    """Backward recurrence with every inequality taken as an equality.

    ``slack`` scales each ``a_i`` after the recurrence (``d_i`` follows as
    ``a_i + 2 eps``).  Values below 1 deliberately break the timing argument.
    """
    eps, delta, phi, slack = to_q(eps), to_q(delta), to_q(phi), to_q(slack)
    _check_domain(n, eps, delta, phi)
    if slack <= 0:
        raise ParameterError("slack must be positive")
    a = [Q(0)] * n
    d = [Q(0)] * n
    a[n - 1] = phi * eps + 2 * delta
    d[n - 1] = a[n - 1] + 2 * eps
    for i in range(n - 1, 0, -1):
        a[i - 1] = 2 * phi * eps + phi * d[i] + 4 * delta
        d[i - 1] = a[i - 1] + 2 * eps
    if slack != 1:
        a = [x * slack for x in a]
        d = [x + 2 * eps for x in a]
    return ProtocolParams(n, eps, delta, phi, tuple(a), tuple(d), slack)


def closed_form_a(i: int, n: int, eps, delta, phi) -> Q:
    eps, delta, phi = to_q(eps), to_q(delta), to_q(phi)
    _check_domain(n, eps, delta, phi)
    if not 0 <= i <= n - 1:
        raise IndexError(f"index {i} outside 0..{n - 1}")
    total = phi ** (n - 1 - i) * (phi * eps + 2 * delta)
    for j in range(i + 1, n):
        total += 4 * phi ** (j - i - 1) * (phi * eps + delta)
    return total


# -- automata ----------------------------------------------------------------


class _Builder:
    def __init__(self, pid):
        self.pid = pid
        self.states: dict = {}
        self.transitions: list = []

    def input(self, *names):
        for name in names:
            self.states[name] = Input()

    def output(self, name, timeout, target, *sends, assign=()):
        self.states[name] = Output(timeout)
        self.transitions.append(Transition(name, SendSet(tuple(sends)), target, tuple(assign)))

    def term(self, *names):
        for name in names:
            self.states[name] = Termination()

    def on(self, source, sender, pattern, target, accept=None):
        self.transitions.append(Transition(source, Receive(sender, pattern, accept), target))

    def after(self, source, offset, target, var=None):
        self.transitions.append(Transition(source, TimeoutGuard(offset, var), target))

    def build(self, initial) -> TimedAutomaton:
        return TimedAutomaton(self.pid, dict(self.states), initial, tuple(self.transitions))


def receipt_check(n: int):
    bob = customer(n)
    return lambda msg: msg.issuer == bob and msg.instance == INSTANCE


def _variant(v):
    if v not in VARIANTS:
        raise ValueError(f"unknown initialization variant {v!r}")
    return v


def build_escrow(i: int, params: ProtocolParams, variant: str = DEFAULT_VARIANT) -> TimedAutomaton:
    n, eps = params.n, params.eps
    if not 0 <= i < n:
        raise IndexError(f"escrow index {i} outside 0..{n - 1}")
    up, down = customer(i), customer(i + 1)
    ok = receipt_check(n)
    b = _Builder(escrow(i))
    b.input("await_money", "await_cert")
    b.term("paid", "refunded")
    if _variant(variant) == "PreArrangedSetup":
        initial = "await_money"
    elif variant == "ReadyChain" and i <= n - 2:
        initial = "setup"
        b.output("setup", eps, "await_ready", (up, Guarantee(params.d[i])))
        b.input("await_ready")
        b.on("await_ready", down, Ready, "ready_fwd")
        b.output("ready_fwd", eps, "await_money", (up, Ready()))
    else:
        initial = "setup"
        b.output("setup", eps, "await_money", (up, Guarantee(params.d[i])))
    b.on("await_money", up, Money, "promise")
    b.output("promise", eps, "await_cert", (down, Promise(params.a[i])), assign=("u",))
    b.on("await_cert", down, Receipt, "payout", accept=ok)
    b.after("await_cert", params.a[i], "refund", var="u")
    b.output("payout", eps, "paid", (up, Bound(Receipt)), (down, Money()))
    b.output("refund", eps, "refunded", (up, Money()))
    return b.build(initial)


def _await_setup(b, src, e, with_ready, target):
    """Wait for G and, when ``with_ready``, Ready from ``e`` in either order."""
    if not with_ready:
        b.on(src, e, Guarantee, target)
        return
    b.input("got_g", "got_ready")
    b.on(src, e, Guarantee, "got_g")
    b.on(src, e, Ready, "got_ready")
    b.on("got_g", e, Ready, target)
    b.on("got_ready", e, Guarantee, target)


def build_connector(i: int, params: ProtocolParams, variant: str = DEFAULT_VARIANT) -> TimedAutomaton:
    n, eps = params.n, params.eps
    if not 1 <= i <= n - 1:
        raise IndexError(f"connector index {i} outside 1..{n - 1}")
    mine, prev = escrow(i), escrow(i - 1)
    ok = receipt_check(n)
    b = _Builder(customer(i))
    b.input("await_p", "await_outcome", "await_payment")
    b.term("paid", "refunded")
    if _variant(variant) == "PreArrangedSetup":
        initial = "await_p"
    elif variant == "ReadyChain":
        initial = "await_g"
        b.input("await_g")
        _await_setup(b, "await_g", mine, i < n - 1, "ready_fwd")
        b.output("ready_fwd", eps, "await_p", (prev, Ready()))
    else:
        initial = "await_g"
        b.input("await_g")
        b.on("await_g", mine, Guarantee, "await_p")
    b.on("await_p", prev, Promise, "pay")
    b.output("pay", eps, "await_outcome", (mine, Money()))
    b.on("await_outcome", mine, Money, "refunded")
    b.on("await_outcome", mine, Receipt, "forward", accept=ok)
    b.output("forward", eps, "await_payment", (prev, Bound(Receipt)))
    b.on("await_payment", prev, Money, "paid")
    return b.build(initial)


def build_alice(params: ProtocolParams, variant: str = DEFAULT_VARIANT) -> TimedAutomaton:
    n = params.n
    e0 = escrow(0)
    b = _Builder(customer(0))
    b.input("await_outcome")
    b.term("refunded", "certified")
    if _variant(variant) == "PreArrangedSetup":
        initial = "pay"
    else:
        initial = "await_g"
        b.input("await_g")
        _await_setup(b, "await_g", e0, variant == "ReadyChain" and n >= 2, "pay")
    b.output("pay", INF, "await_outcome", (e0, Money()))
    b.on("await_outcome", e0, Money, "refunded")
    b.on("await_outcome", e0, Receipt, "certified", accept=receipt_check(n))
    return b.build(initial)


def build_bob(params: ProtocolParams, variant: str = DEFAULT_VARIANT) -> TimedAutomaton:
    n = params.n
    _variant(variant)
    last = escrow(n - 1)
    bob = customer(n)
    b = _Builder(bob)
    b.input("await_p", "await_payment")
    b.term("paid")
    b.on("await_p", last, Promise, "issue")
    b.output("issue", params.eps, "await_payment", (last, Receipt(bob, INSTANCE)))
    b.on("await_payment", last, Money, "paid")
    return b.build("await_p")


def endowments(n: int) -> dict:
    out = {customer(i): 1 for i in range(n)}
    out[customer(n)] = 0
    out.update({escrow(i): 0 for i in range(n)})
    return out


def build_network(n: int, params: ProtocolParams, init_variant: str = DEFAULT_VARIANT,
                  behaviors=None, alice_start_delay=None) -> Network:
    """The 2n+1 participants of one payment.

    ``alice_start_delay`` is the local time Alice spends in the black state
    past the start; it defaults to ``phi*eps + delta`` under StartDelay and to
    0 otherwise.
    """
    if params.n != n:
        raise ValueError(f"parameters computed for n={params.n}, network has n={n}")
    _variant(init_variant)
    automata = {escrow(i): build_escrow(i, params, init_variant) for i in range(n)}
    for i in range(1, n):
        automata[customer(i)] = build_connector(i, params, init_variant)
    automata[customer(0)] = build_alice(params, init_variant)
    automata[customer(n)] = build_bob(params, init_variant)
    if alice_start_delay is None:
        wait = params.phi * params.eps + params.delta if init_variant == "StartDelay" else Q(0)
    else:
        wait = to_q(alice_start_delay)
    meta = {
        "protocol": "timebounded",
        "n": n,
        "params": params,
        "init_variant": init_variant,
    }
    return Network(
        automata=automata,
        behaviors=dict(behaviors or {}),
        endowments=endowments(n),
        black_wait={customer(0): wait},
        meta=meta,
    )
