"""Scenario files: one TOML document describing a run, plus seed-driven randomisation.

All rationals are written as strings (``"3/2"``) or integers.  A minimal
time-bounded scenario::

    protocol = "timebounded"
    n = 2
    [params]
    eps = "1"
    delta = "10"
    phi = "1"
    [model]
    kind = "Synchronous"
"""

from __future__ import annotations

import copy
import random
from pathlib import Path
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import adversary as adv
from .anta import check_participant_bounds, customer, escrow, parse_pid, validator
from .engine import run
from .eventual import PatienceSchedule, build_eventual_network, safe_patience
from .network import Asynchronous, ParticipantClock, PartiallySynchronous, Synchronous
from .rational import GRID, Q, to_q
from .timebounded import build_network, compute_params
from .tm import TMConfig
from .verifier import check_all

PROTOCOLS = ("timebounded", "eventual")


class ScenarioError(ValueError):
    """A scenario that does not parse or validate; message names the field."""


def _q(doc, key, default=None, where=""):
    if key not in doc:
        if default is None:
            raise ScenarioError(f"{where}{key}: required")
        return to_q(default)
    try:
        return to_q(doc[key])
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}{key}: {exc}") from None


def parse_override(text: str):
    if "=" not in text:
        raise ScenarioError(f"override {text!r}: expected key=value")
    key, raw = text.split("=", 1)
    key, raw = key.strip(), raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        path, value = parse_override(item) if isinstance(item, str) else item
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"override {'.'.join(path)}: {part} is not a table")
        node[path[-1]] = value
    return doc


def random_clocks(pids, phi, rng: random.Random, max_offset=Q(0)) -> dict:
    """Rates in [1, phi] with the extremes attained whenever there are two clocks."""
    phi = to_q(phi)
    pids = list(pids)
    rates = {p: 1 + (phi - 1) * Q(rng.randint(0, 64), 64) for p in pids}
    if len(pids) >= 2 and phi > 1:
        lo, hi = rng.sample(pids, 2)
        rates[lo], rates[hi] = Q(1), phi
    out = {}
    for p in pids:
        off = to_q(max_offset) * Q(rng.randint(0, GRID), GRID)
        out[p] = ParticipantClock(rates[p], off)
    return out


def _random_behavior(pid, rng: random.Random, protocol: str):
    if pid.kind == "validator":
        options = [adv.ByzantineValidator(s) for s in adv.VALIDATOR_STRATEGIES]
        options.append(adv.Crash(Q(rng.randint(0, 40))))
        return rng.choice(options)
    options = [
        adv.Crash(Q(rng.randint(0, 80))),
        adv.WithholdCertificate(),
        adv.WithholdMoney(),
        adv.KeepMoneyAndCertificate(),
        adv.DelayOutgoing(("Money", "Receipt", "CommitCert", "AbortCert"), Q(rng.randint(1, 200))),
    ]
    if protocol == "eventual" and pid.kind == "customer":
        options.append(adv.EquivocateProposal())
    return rng.choice(options)


def random_single_deviation(n: int, rng: random.Random, protocol: str, validators=0,
                            include_escrows=True) -> dict:
    """At most one deviating participant; an all-honest run is one of the outcomes."""
    pool = [customer(i) for i in range(n + 1)]
    if include_escrows:
        pool += [escrow(i) for i in range(n)]
    pool += [validator(k) for k in range(validators)]
    pick = rng.randrange(len(pool) + 1)
    if pick == len(pool):
        return {}
    pid = pool[pick]
    return {pid: _random_behavior(pid, rng, protocol)}


@dataclass
class Scenario:
    doc: dict
    name: str = "scenario"
    protocol: str = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        doc = self.doc
        self.protocol = doc.get("protocol", "timebounded")
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(f"protocol: expected one of {PROTOCOLS}, got {self.protocol!r}")
        n = doc.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ScenarioError(f"n: expected a positive integer, got {n!r}")
        self.n = n
        self.policy = doc.get("policy", "uniform")
        if self.policy not in ("immediate", "uniform", "latest"):
            raise ScenarioError(f"policy: unknown emission policy {self.policy!r}")
        self.horizon = _q(doc, "horizon", 10**6)
        self.black_window = _q(doc, "black_window", 1)
        self.seed = doc.get("seed", 0)
        self.model = self._model(doc.get("model", {}))
        self._validate_behaviors()
        if self.protocol == "timebounded":
            p = doc.get("params", {})
            try:
                self.params = compute_params(n, _q(p, "eps", where="params."),
                                             _q(p, "delta", where="params."),
                                             _q(p, "phi", 1, "params."), _q(p, "slack", 1, "params."))
            except ScenarioError:
                raise
            except ValueError as exc:
                raise ScenarioError(f"params: {exc}") from None
            self.variant = doc.get("init_variant", "ReadyChain")
        else:
            e = doc.get("eventual", {})
            self.eps = _q(e, "eps", 1, "eventual.")
            self.variant = doc.get("init_variant", "PreArrangedSetup")
            t = doc.get("tm", {})
            try:
                self.tm = TMConfig(t.get("kind", "centralized"), t.get("m", 1), t.get("f", 0),
                                   reaction=_q(t, "reaction", 1, "tm."))
            except ScenarioError:
                raise
            except ValueError as exc:
                raise ScenarioError(f"tm: {exc}") from None
            self.patience = e.get("patience", "safe")
        from .timebounded import VARIANTS

        if self.variant not in VARIANTS:
            raise ScenarioError(f"init_variant: unknown variant {self.variant!r}")

    def _model(self, m):
        kind = m.get("kind", "Synchronous")
        try:
            if kind == "Synchronous":
                return Synchronous(_q(m, "delta", where="model."), _q(m, "phi", 1, "model."))
            if kind == "PartiallySynchronous":
                pre = m.get("pre_gst_max_delay")
                return PartiallySynchronous(_q(m, "gst", where="model."), _q(m, "delta", where="model."),
                                            _q(m, "phi", 1, "model."),
                                            None if pre is None else _q(m, "pre_gst_max_delay"))
            if kind == "Asynchronous":
                return Asynchronous(_q(m, "max_delay", where="model."))
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(f"model: {exc}") from None
        raise ScenarioError(f"model.kind: unknown network model {kind!r}")

    def _validate_behaviors(self):
        m = self.doc.get("tm", {}).get("m", 0) if self.protocol == "eventual" else 0
        for key, section in self.doc.get("behaviors", {}).items():
            if key == "random":
                continue
            try:
                pid = parse_pid(key)
                check_participant_bounds(pid, self.n, m)
                adv.behavior_from_json(section if isinstance(section, dict) else {"behavior": section})
            except ValueError as exc:
                raise ScenarioError(f"behaviors.{key}: {exc}") from None
        imp = self.doc.get("impossibility")
        if imp is not None:
            if imp.get("run") not in ("r1", "r2"):
                raise ScenarioError("impossibility.run: expected 'r1' or 'r2'")
            holder = imp.get("holder", self.n)
            if not isinstance(holder, int) or not 1 <= holder <= self.n:
                raise ScenarioError(f"impossibility.holder: {holder!r} outside 1..{self.n}")

    # -- per-seed construction --------------------------------------------------

    def _rng(self, seed, purpose):
        return random.Random(f"scenario:{seed}:{purpose}")

    def participants(self):
        pids = [customer(i) for i in range(self.n + 1)] + [escrow(i) for i in range(self.n)]
        return sorted(pids)

    def clocks(self, seed) -> dict:
        section = self.doc.get("clocks", {})
        phi = getattr(self.model, "phi", Q(1))
        if section.get("randomize", False):
            out = random_clocks(self.participants(), phi, self._rng(seed, "clocks"),
                                _q(section, "max_offset", 0, "clocks."))
        else:
            out = {}
        for key, c in section.items():
            if key in ("randomize", "max_offset"):
                continue
            pid = parse_pid(key)
            out[pid] = ParticipantClock(_q(c, "rate", 1, f"clocks.{key}."),
                                        _q(c, "offset", 0, f"clocks.{key}."))
        return out

    def behaviors(self, seed) -> dict:
        section = self.doc.get("behaviors", {})
        out = {}
        mode = section.get("random")
        if mode == "single":
            vals = self.tm.m if self.protocol == "eventual" and self.tm.kind == "bft" else 0
            escrows = self.doc.get("behaviors_include_escrows", True)
            out.update(random_single_deviation(self.n, self._rng(seed, "behaviors"), self.protocol,
                                               vals, escrows))
        elif mode is not None:
            raise ScenarioError(f"behaviors.random: unknown mode {mode!r}")
        for key, b in section.items():
            if key == "random":
                continue
            out[parse_pid(key)] = adv.behavior_from_json(b if isinstance(b, dict) else {"behavior": b})
        imp = self.doc.get("impossibility")
        if imp is not None:
            sc = adv.impossibility_scenario(imp["run"], imp.get("holder", self.n), self.n,
                                            _q(imp, "divergence", 1000, "impossibility."))
            out.update(sc.behaviors)
        return out

    def build(self, seed):
        """``(network, model, clocks)`` for one seed."""
        clocks = self.clocks(seed)
        behaviors = self.behaviors(seed)
        if self.protocol == "timebounded":
            delay = self.doc.get("alice_start_delay")
            net = build_network(self.n, self.params, self.variant, behaviors,
                                None if delay is None else to_q(delay))
        else:
            net = self._eventual_network(clocks, behaviors)
        net.meta["scenario"] = self.name
        return net, self.model, clocks

    def _eventual_network(self, clocks, behaviors):
        rates = [c.rate for c in clocks.values()] or [Q(1)]
        delay = _q(self.doc, "alice_start_delay", 0)
        safe = safe_patience(self.n, self.model, self.eps, self.tm, delay, self.black_window,
                             min(rates), max(rates), self.variant)
        pat = self.patience
        if pat == "safe":
            if safe is None:
                rel = {i: self.horizon for i in range(self.n + 1)}
                is_safe = False
            else:
                rel = {i: safe for i in range(self.n + 1)}
                is_safe = True
        else:
            table = pat if isinstance(pat, dict) else {str(i): pat for i in range(self.n + 1)}
            try:
                rel = {int(k): to_q(v) for k, v in table.items()}
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"eventual.patience: {exc}") from None
            is_safe = safe is not None and all(rel.get(i, Q(0)) >= safe for i in range(self.n + 1))
        T = PatienceSchedule({i: v + (clocks[customer(i)].offset if customer(i) in clocks else 0)
                              for i, v in rel.items()})
        return build_eventual_network(self.n, T, self.tm, self.eps, self.variant, behaviors,
                                      delay, patience_safe=is_safe)

    def run(self, seed=None):
        seed = self.seed if seed is None else seed
        net, model, clocks = self.build(seed)
        trace = run(net, model, clocks, self.horizon, seed, self.policy, self.black_window)
        return net, trace

    def check(self, seed=None):
        net, trace = self.run(seed)
        return trace, check_all(trace, net.automata)


def loads(text: str, name="scenario", overrides=()) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"parse error: {exc}") from None
    return Scenario(apply_overrides(doc, overrides), name)


def load(path, overrides=()) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads(text, Path(path).name, overrides)
