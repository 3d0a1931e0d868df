"""Message vocabulary for both payment protocols and the transaction manager."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

from .rational import fmt_q


class Message:
    """Base class; every concrete message is a frozen dataclass."""

    __slots__ = ()

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"type": self.kind}
        for f in fields(self):  # type: ignore[arg-type]
            out[f.name] = _render(getattr(self, f.name))
        return out


def _render(value):
    if isinstance(value, Message) or hasattr(value, "to_json"):
        return value.to_json()
    if isinstance(value, (frozenset, set, tuple, list)):
        return [_render(v) for v in sorted(value, key=repr)]
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    try:
        return fmt_q(value)
    except (TypeError, ValueError):
        return str(value)


# -- time-bounded protocol ---------------------------------------------------


@dataclass(frozen=True)
class Guarantee(Message):
    """G(d): money received at local w is answered with $ or the receipt by w + d."""

    d: Any


@dataclass(frozen=True)
class Promise(Message):
    """P(a): a receipt arriving before issue-time + a is answered with $ within eps."""

    a: Any


@dataclass(frozen=True)
class Money(Message):
    pass


@dataclass(frozen=True)
class Receipt(Message):
    """Bob's signed statement that Alice's obligation has been met."""

    issuer: Any
    instance: str = "pay-0"


@dataclass(frozen=True)
class Ready(Message):
    pass


# -- eventual protocol -------------------------------------------------------


@dataclass(frozen=True)
class GTag(Message):
    pass


@dataclass(frozen=True)
class PTag(Message):
    pass


@dataclass(frozen=True)
class SignedValue:
    validator: Any
    value: int
    instance: str
    tag: str

    def to_json(self):
        return {"validator": str(self.validator), "value": self.value, "instance": self.instance}


@dataclass(frozen=True)
class Certificate:
    decision: int
    signatures: frozenset

    def signers(self) -> set:
        return {s.validator for s in self.signatures}

    def to_json(self):
        return {
            "decision": self.decision,
            "signers": sorted(str(s.validator) for s in self.signatures),
            "values": sorted({s.value for s in self.signatures}),
        }


@dataclass(frozen=True)
class CommitCert(Message):
    cert: Certificate


@dataclass(frozen=True)
class AbortCert(Message):
    cert: Certificate


@dataclass(frozen=True)
class ProposeCommit(Message):
    pass


@dataclass(frozen=True)
class ProposeAbort(Message):
    pass


# -- transaction-manager internals -------------------------------------------


@dataclass(frozen=True)
class BbcPropose(Message):
    value: int


@dataclass(frozen=True)
class BbcDecide(Message):
    value: int


@dataclass(frozen=True)
class Signed(Message):
    sig: SignedValue


CERTIFICATES = (Receipt, CommitCert, AbortCert)
PROPOSALS = (ProposeCommit, ProposeAbort)


def cert_message(cert: Certificate) -> Message:
    return CommitCert(cert) if cert.decision == 1 else AbortCert(cert)
