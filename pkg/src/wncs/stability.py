"""Closed-form stability verdicts on the products ``g(l) * rho(A)**(2l)``.

A fixed length ``l`` keeps the average cost bounded iff its product is below
one; some stationary variable-length policy does iff the smallest product over
all lengths is.  For the exponential channel the products form a geometric
sequence with ratio ``r * rho**2``, so the minimum over every length is known
exactly; table channels are searched over the table.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import NamedTuple

from .channel import ChannelModel
from .errors import DomainError, PreconditionError
from .lti import SystemModel, check_controllable_observable

BOUNDARY_TOL = 1e-15


class BoundaryWarning(UserWarning):
    """A product lies within floating-point noise of 1; classified unstable."""


class FixedVerdict(NamedTuple):
    stable: bool
    product: float


class VariableVerdict(NamedTuple):
    stable: bool
    argmin: int
    min_product: float
    stable_within: bool
    exact: bool


@dataclass(frozen=True)
class LengthRecord:
    l: int
    g: float
    rho2l: float
    product: float
    stable: bool


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    records: tuple[LengthRecord, ...]
    variable_length_stable: bool
    best_l: int
    exact: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "g", "rho2l", "product", "stable"])
        for r in self.records:
            w.writerow([r.l, f"{r.g:.12g}", f"{r.rho2l:.12g}", f"{r.product:.12g}", str(r.stable).lower()])
        return buf.getvalue()

    def verdict_line(self) -> str:
        scope = "over all packet lengths" if self.exact else f"over lengths 1..{len(self.records)}"
        state = "stabilizable" if self.variable_length_stable else "NOT stabilizable"
        return (
            f"rho(A)={self.rho:.6g}: variable-length policy {state} ({scope}); "
            f"smallest product at l={self.best_l}"
        )


def _require_hypotheses(system: SystemModel) -> None:
    flags = check_controllable_observable(system)
    if not flags.controllable:
        raise PreconditionError("(A, sqrt(R)) is not controllable; the stability conditions do not apply")
    if not flags.observable:
        raise PreconditionError("(A, sqrt(Q)) is not observable; the stability conditions do not apply")


def _verdict(product: float) -> bool:
    if abs(product - 1.0) <= BOUNDARY_TOL:
        warnings.warn(f"product {product!r} is at the stability boundary; reported unstable", BoundaryWarning,
                      stacklevel=3)
    return product < 1.0


def _product(system: SystemModel, channel: ChannelModel, l: int) -> float:
    return channel.error_prob(l) * system.rho ** (2 * l)


def fixed_length_stable(system: SystemModel, channel: ChannelModel, l: int) -> FixedVerdict:
    if int(l) != l or l < 1:
        raise DomainError(f"packet length must be a positive integer, got {l!r}")
    _require_hypotheses(system)
    p = _product(system, channel, int(l))
    return FixedVerdict(_verdict(p), p)


def variable_length_stable(system: SystemModel, channel: ChannelModel, l_max: int) -> VariableVerdict:
    """Smallest product over ``1..l_max`` plus the verdict over all lengths where known.

    ``stable_within`` answers for ``l <= l_max`` only; ``stable`` uses the
    geometric-ratio rule for the exponential channel and the whole table
    otherwise (``exact`` tells which).
    """
    if int(l_max) != l_max or l_max < 1:
        raise DomainError(f"l_max must be a positive integer, got {l_max!r}")
    _require_hypotheses(system)
    L = channel.max_length
    top = int(l_max) if L is None else min(int(l_max), L)
    products = [_product(system, channel, l) for l in range(1, top + 1)]
    best = min(range(top), key=lambda i: (products[i], i))
    within = _verdict(products[best])
    if channel.kind == "exponential":
        ratio = channel.r * system.rho ** 2
        # ratio < 1: products decay to 0 so some length is stable
        stable = True if ratio < 1.0 else _verdict(products[0])
        exact = True
    else:
        full = [_product(system, channel, l) for l in range(1, L + 1)]
        stable = _verdict(min(full))
        exact = False
    return VariableVerdict(stable, best + 1, products[best], within, exact)


def stability_report(system: SystemModel, channel: ChannelModel, M: int) -> StabilityReport:
    _require_hypotheses(system)
    records = []
    for l in range(1, M + 1):
        g = channel.error_prob(l)
        r2 = system.rho ** (2 * l)
        p = g * r2
        records.append(LengthRecord(l, g, r2, p, _verdict(p)))
    var = variable_length_stable(system, channel, M)
    return StabilityReport(system.rho, tuple(records), var.stable, var.argmin, var.exact)
