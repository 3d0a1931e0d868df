"""The eventually-terminating payment protocol with a transaction manager.

States carry the numbers used in the protocol's state diagrams ("1".."13"),
so traces and checks can refer to them directly.  Escrows never time out;
customers give up at their patience deadline ``T_i`` (absolute local time)
and ask the TM to abort.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .anta import TM, Bound, customer, escrow
from .engine import Network
from .messages import AbortCert, CommitCert, GTag, Money, ProposeAbort, ProposeCommit, PTag, Ready
from .network import Asynchronous, Synchronous
from .rational import INF, Q, to_q
from .timebounded import _Builder, endowments
from .tm import TMConfig, tm_services, verify_certificate

VARIANTS = ("StartDelay", "PreArrangedSetup", "ReadyChain")
DEFAULT_VARIANT = "PreArrangedSetup"

TERMINALS = {
    "escrow": {"7", "8"},
    "alice": {"6", "13"},
    "connector": {"3", "11", "13"},
    "bob": {"7", "11"},
}
# Under ReadyChain a customer may also give up before paying (state "3").


@dataclass(frozen=True)
class PatienceSchedule:
    """Absolute local deadlines, keyed by customer index."""

    T: dict = field(default_factory=dict)

    def __post_init__(self):
        conv = {int(k): to_q(v) for k, v in self.T.items()}
        for k, v in conv.items():
            if v < 0:
                raise ValueError(f"T_{k} must be non-negative")
        object.__setattr__(self, "T", conv)

    def __getitem__(self, i):
        try:
            return self.T[i]
        except KeyError:
            raise KeyError(f"no patience deadline for customer {i}") from None

    @classmethod
    def uniform(cls, n: int, value) -> "PatienceSchedule":
        return cls({i: value for i in range(n + 1)})


def cert_checks(config: TMConfig):
    f, inst = config.f, config.instance
    return lambda m: verify_certificate(m.cert, f, inst)


def _check_variant(v):
    if v not in VARIANTS:
        raise ValueError(f"unknown initialization variant {v!r}")
    return v


def build_eventual_escrow(i: int, n: int, eps=Q(1), config: TMConfig = TMConfig(),
                          variant: str = DEFAULT_VARIANT):
    if not 0 <= i < n:
        raise IndexError(f"escrow index {i} outside 0..{n - 1}")
    eps = to_q(eps)
    up, down = customer(i), customer(i + 1)
    ok = cert_checks(config)
    b = _Builder(escrow(i))
    b.input("2", "4")
    b.term("7", "8")
    if _check_variant(variant) == "PreArrangedSetup":
        initial = "2"
    elif variant == "ReadyChain" and i <= n - 2:
        initial = "1"
        b.output("1", eps, "1w", (up, GTag()))
        b.input("1w")
        b.on("1w", down, Ready, "1f")
        b.output("1f", eps, "2", (up, Ready()))
    else:
        initial = "1"
        b.output("1", eps, "2", (up, GTag()))
    b.on("2", up, Money, "3")
    b.output("3", eps, "4", (down, PTag()))
    b.on("4", down, CommitCert, "5", accept=ok)
    b.on("4", up, AbortCert, "6", accept=ok)
    b.output("5", eps, "7", (down, Money()))
    b.output("6", eps, "8", (up, Money()))
    return b.build(initial)


def _setup_states(b, e, T, with_ready, with_g, target, quit_to="3"):
    """Initial waiting on G (and Ready), with patience exits when Ready is involved."""
    if not with_g:
        return target
    b.input("1")
    if not with_ready:
        b.on("1", e, GTag, target)
        return "1"
    b.input("1g", "1r")
    b.term(quit_to)
    b.on("1", e, GTag, "1g")
    b.on("1", e, Ready, "1r")
    b.on("1g", e, Ready, target)
    b.on("1r", e, GTag, target)
    for s in ("1", "1g", "1r"):
        b.after(s, T, quit_to)
    return "1"


def build_eventual_connector(i: int, n: int, T: PatienceSchedule, eps=Q(1),
                             config: TMConfig = TMConfig(), variant: str = DEFAULT_VARIANT):
    if not 1 <= i <= n - 1:
        raise IndexError(f"connector index {i} outside 1..{n - 1}")
    eps = to_q(eps)
    mine, prev = escrow(i), escrow(i - 1)
    Ti = T[i]
    ok = cert_checks(config)
    b = _Builder(customer(i))
    b.input("2", "5", "9", "10", "12")
    b.term("3", "11", "13")
    _check_variant(variant)
    ready = variant == "ReadyChain"
    if ready:
        b.output("R", eps, "2", (prev, Ready()))
        if i < n - 1:
            initial = _setup_states(b, mine, Ti, True, True, "R")
        else:
            b.input("1")
            b.on("1", mine, GTag, "R")
            b.after("1", Ti, "3")
            initial = "1"
    else:
        initial = _setup_states(b, mine, Ti, False, variant != "PreArrangedSetup", "2")
    b.on("2", prev, PTag, "4")
    b.after("2", Ti, "3")
    b.output("4", eps, "5", (mine, Money()))
    for s in ("5", "9"):
        b.on(s, TM, CommitCert, "6", accept=ok)
        b.on(s, TM, AbortCert, "7", accept=ok)
    b.after("5", Ti, "8")
    b.output("8", eps, "9", (TM, ProposeAbort()))
    b.output("6", eps, "10", (prev, Bound(CommitCert)))
    b.on("10", prev, Money, "11")
    b.output("7", eps, "12", (mine, Bound(AbortCert)))
    b.on("12", mine, Money, "13")
    return b.build(initial)


def build_eventual_alice(n: int, T: PatienceSchedule, eps=Q(1), config: TMConfig = TMConfig(),
                         variant: str = DEFAULT_VARIANT):
    eps = to_q(eps)
    e0 = escrow(0)
    T0 = T[0]
    ok = cert_checks(config)
    b = _Builder(customer(0))
    b.input("5", "9", "12")
    b.term("6", "13")
    _check_variant(variant)
    initial = _setup_states(b, e0, T0, variant == "ReadyChain" and n >= 2,
                            variant != "PreArrangedSetup", "4")
    b.output("4", INF, "5", (e0, Money()))
    for s in ("5", "9"):
        b.on(s, TM, CommitCert, "6", accept=ok)
        b.on(s, TM, AbortCert, "7", accept=ok)
    b.after("5", T0, "8")
    b.output("8", eps, "9", (TM, ProposeAbort()))
    b.output("7", eps, "12", (e0, Bound(AbortCert)))
    b.on("12", e0, Money, "13")
    return b.build(initial)


def build_eventual_bob(n: int, T: PatienceSchedule, eps=Q(1), config: TMConfig = TMConfig(),
                       variant: str = DEFAULT_VARIANT):
    eps = to_q(eps)
    _check_variant(variant)
    last = escrow(n - 1)
    ok = cert_checks(config)
    b = _Builder(customer(n))
    b.input("1", "4", "5", "10")
    b.term("7", "11")
    b.on("1", last, PTag, "3")
    b.after("1", T[n], "2")
    b.output("3", eps, "5", (TM, ProposeCommit()))
    b.output("2", eps, "4", (TM, ProposeAbort()))
    b.on("4", TM, AbortCert, "7", accept=ok)
    b.on("5", TM, CommitCert, "6", accept=ok)
    b.on("5", TM, AbortCert, "7", accept=ok)
    b.output("6", eps, "10", (last, Bound(CommitCert)))
    b.on("10", last, Money, "11")
    return b.build("1")


def role(pid, n: int) -> str:
    if pid.kind == "escrow":
        return "escrow"
    if pid.index == 0:
        return "alice"
    return "bob" if pid.index == n else "connector"


def safe_patience(n: int, model, eps=Q(1), config: TMConfig = TMConfig(), black_wait=Q(0),
                  black_window=Q(1), min_rate=Q(1), max_rate=Q(1), variant=DEFAULT_VARIANT):
    """Relative local patience that outlasts the happy path, or None if no bound exists.

    Counts the hops until Bob's commit proposal reaches every TM process,
    each hop costing one reaction (at most ``eps`` local) plus one delivery.
    Before GST the first delivery may take until ``GST + pre_gst_max_delay``.
    The result is doubled for margin and scaled to the fastest clock.
    """
    if isinstance(model, Asynchronous):
        return None
    eps, min_rate, max_rate = to_q(eps), to_q(min_rate), to_q(max_rate)
    hops = 2 * n + 1
    if variant != "PreArrangedSetup":
        hops += 2 * n + 1
    if config.kind == "bft":
        hops += 4
    wait = (to_q(black_wait) + to_q(black_window) + eps) / min_rate
    if isinstance(model, Synchronous):
        stall = Q(0)
    else:
        stall = model.gst + model.pre_gst_max_delay
    hop = model.delta + max(eps, config.reaction) / min_rate
    total = wait + stall + hops * hop
    return 2 * max_rate * total


def build_eventual_network(n: int, T: PatienceSchedule, tm_config: TMConfig = TMConfig(), eps=Q(1),
                           init_variant: str = DEFAULT_VARIANT, behaviors=None,
                           alice_start_delay=Q(0), patience_safe=None) -> Network:
    if n < 1:
        raise ValueError("n must be at least 1")
    missing = [i for i in range(n + 1) if i not in T.T]
    if missing:
        raise KeyError(f"no patience deadline for customers {missing}")
    _check_variant(init_variant)
    eps = to_q(eps)
    automata = {escrow(i): build_eventual_escrow(i, n, eps, tm_config, init_variant) for i in range(n)}
    for i in range(1, n):
        automata[customer(i)] = build_eventual_connector(i, n, T, eps, tm_config, init_variant)
    automata[customer(0)] = build_eventual_alice(n, T, eps, tm_config, init_variant)
    automata[customer(n)] = build_eventual_bob(n, T, eps, tm_config, init_variant)
    factory, router = tm_services(tm_config, n)
    meta = {
        "protocol": "eventual",
        "n": n,
        "T": T,
        "eps": eps,
        "tm": tm_config,
        "init_variant": init_variant,
        "patience_safe": patience_safe,
    }
    return Network(
        automata=automata,
        behaviors=dict(behaviors or {}),
        endowments=endowments(n),
        services=(factory,),
        tm_router=router,
        black_wait={customer(0): to_q(alice_start_delay)},
        meta=meta,
    )

