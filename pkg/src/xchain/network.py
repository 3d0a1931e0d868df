"""Synchrony regimes, skewed clocks and message-delay sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .rational import GRID, Q, to_q


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ParticipantClock:
    """Linear clock: local = rate * global + offset."""

    rate: object = Q(1)
    offset: object = Q(0)

    def __post_init__(self):
        object.__setattr__(self, "rate", to_q(self.rate))
        object.__setattr__(self, "offset", to_q(self.offset))
        if self.rate <= 0:
            raise ParameterError("clock rate must be positive")

    def local(self, t):
        return self.rate * t + self.offset

    def to_global(self, local):
        return (local - self.offset) / self.rate


def local_time(clock: ParticipantClock, t) -> Q:
    t = to_q(t)
    if t < 0:
        raise ParameterError("global time must be non-negative")
    return clock.local(t)


@dataclass(frozen=True)
class Synchronous:
    delta: object
    phi: object = Q(1)

    def __post_init__(self):
        _set_q(self, "delta", "phi")
        _check_delta_phi(self.delta, self.phi)


@dataclass(frozen=True)
class PartiallySynchronous:
    gst: object
    delta: object
    phi: object = Q(1)
    pre_gst_max_delay: object = None

    def __post_init__(self):
        if self.pre_gst_max_delay is None:
            object.__setattr__(self, "pre_gst_max_delay", self.delta)
        _set_q(self, "gst", "delta", "phi", "pre_gst_max_delay")
        _check_delta_phi(self.delta, self.phi)
        if self.gst < 0:
            raise ParameterError("GST must be non-negative")
        if self.pre_gst_max_delay <= 0:
            raise ParameterError("pre-GST delay bound must be positive")


@dataclass(frozen=True)
class Asynchronous:
    """Unbounded delays, realised as delays up to ``max_delay``.

    ``delay_fn(send_time, rng) -> delay`` lets an adversary pick delays; it must
    return a value in ``(0, max_delay]``.
    """

    max_delay: object
    delay_fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        _set_q(self, "max_delay")
        if self.max_delay <= 0:
            raise ParameterError("max_delay must be positive")


NetworkModel = Synchronous | PartiallySynchronous | Asynchronous


def _set_q(obj, *names):
    for name in names:
        object.__setattr__(obj, name, to_q(getattr(obj, name)))


def _check_delta_phi(delta, phi):
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if phi < 1:
        raise ParameterError("phi must be at least 1")


def model_phi(model) -> Optional[Q]:
    return getattr(model, "phi", None)


def check_clocks(model, clocks: dict) -> None:
    """Reject clock maps whose pairwise rate ratio exceeds the model's phi."""
    phi = model_phi(model)
    if phi is None or not clocks:
        return
    rates = [c.rate for c in clocks.values()]
    if max(rates) / min(rates) > phi:
        raise ParameterError(
            f"clock rate ratio {max(rates) / min(rates)} exceeds phi={phi}"
        )


def bounded_width(delta, max_rate) -> Q:
    """Global-time delay bound such that no participant's clock measures more than delta."""
    return delta if max_rate <= 1 else delta / max_rate


def delivery_bound(model, send, max_rate=Q(1)):
    """Latest admissible delivery time for a message sent at ``send``; None if unbounded."""
    if isinstance(model, Synchronous):
        return send + bounded_width(model.delta, max_rate)
    if isinstance(model, PartiallySynchronous):
        if send < model.gst:
            return model.gst + model.pre_gst_max_delay
        return send + bounded_width(model.delta, max_rate)
    return None


def sample_delivery(model, send, rng, max_rate=Q(1)) -> Q:
    """Delivery time strictly after ``send``; see the per-regime bounds above.

    ``rng`` needs only ``randint``; a stub returning its upper argument forces
    the latest admissible instant.
    """
    send = to_q(send)
    if send < 0:
        raise ParameterError("send time must be non-negative")
    if isinstance(model, Asynchronous):
        if model.delay_fn is not None:
            delay = to_q(model.delay_fn(send, rng))
            if not 0 < delay <= model.max_delay:
                raise ParameterError(f"adversarial delay {delay} outside (0, max_delay]")
            return send + delay
        width = model.max_delay
    else:
        width = delivery_bound(model, send, max_rate) - send
    return send + width * Q(rng.randint(1, GRID), GRID)


def model_to_json(model) -> dict:
    if isinstance(model, Synchronous):
        return {"kind": "Synchronous", "delta": str(model.delta), "phi": str(model.phi)}
    if isinstance(model, PartiallySynchronous):
        return {"kind": "PartiallySynchronous", "gst": str(model.gst), "delta": str(model.delta),
                "phi": str(model.phi), "pre_gst_max_delay": str(model.pre_gst_max_delay)}
    doc = {"kind": "Asynchronous", "max_delay": str(model.max_delay)}
    if model.delay_fn is not None:
        doc["delay_fn"] = getattr(model.delay_fn, "__name__", "custom")
    return doc
