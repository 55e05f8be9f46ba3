"""Packet error probability as a function of packet length (in slots)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError


class Violation(NamedTuple):
    l: int
    reason: str


@dataclass(frozen=True)
class ChannelModel:
    """Either ``g(l) = p0 * r**(l-1)`` or an explicit table ``g(1..L)``.

    Construction does not validate; call :meth:`validate` (the config loader
    does) to get the list of violated invariants.
    """

    kind: str
    p0: float = 0.0
    r: float = 0.0
    table: tuple[float, ...] = ()

    @classmethod
    def exponential(cls, p0: float, r: float) -> "ChannelModel":
        return cls(kind="exponential", p0=float(p0), r=float(r))

    @classmethod
    def from_table(cls, values) -> "ChannelModel":
        return cls(kind="table", table=tuple(float(v) for v in values))

    @property
    def max_length(self) -> int | None:
        """Largest supported packet length; ``None`` when unbounded."""
        return len(self.table) if self.kind == "table" else None

    def error_prob(self, l: int) -> float:
        if int(l) != l or l < 1:
            raise DomainError(f"packet length must be a positive integer, got {l!r}")
        l = int(l)
        if self.kind == "exponential":
            return self.p0 * self.r ** (l - 1)
        if self.kind == "table":
            if l > len(self.table):
                raise DomainError(f"packet length {l} outside table range 1..{len(self.table)}")
            return self.table[l - 1]
        raise DomainError(f"unknown channel kind {self.kind!r}")

    def validate(self) -> list[Violation]:
        """Every point where ``g`` leaves (0, 1) or fails to strictly decrease.

        For the exponential kind the parameter ranges are checked directly; a
        geometric sequence with ``p0, r`` in (0, 1) satisfies both invariants.
        """
        out: list[Violation] = []
        if self.kind == "exponential":
            if not 0.0 < self.p0 < 1.0:
                out.append(Violation(1, f"p0={self.p0} outside (0, 1)"))
            if not 0.0 < self.r < 1.0:
                out.append(Violation(2, f"ratio r={self.r} outside (0, 1)"))
            return out
        if self.kind != "table":
            return [Violation(0, f"unknown channel kind {self.kind!r}")]
        if not self.table:
            return [Violation(1, "empty table")]
        prev = None
        for l, g in enumerate(self.table, start=1):
            if not 0.0 < g < 1.0:
                out.append(Violation(l, f"g({l})={g} outside (0, 1)"))
            if prev is not None and not g < prev:
                out.append(Violation(l, f"g({l})={g} not below g({l - 1})={prev}"))
            prev = g
        return out

    def is_valid(self) -> bool:
        return not self.validate()


def error_prob(ch: ChannelModel, l: int) -> float:
    return ch.error_prob(l)


def validate(ch: ChannelModel) -> list[Violation]:
    return ch.validate()
