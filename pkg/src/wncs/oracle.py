"""Analytic average cost of fixed-length policies.

Under ``pi(d) = l0`` the packet-start AoI only visits ``i * l0`` and follows a
geometric law ``(1 - g) g**(i-1)``.  For scalar plants the per-slot cost has
the closed form ``q r (rho**(2j) - 1) / (rho**2 - 1)``, so the average cost is
a geometric-type series summed here until a rigorous tail bound drops below
``tol``.  Nothing in this module touches the covariance recursion or the
semi-MDP code paths it is used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import ChannelModel
from .errors import DivergenceError, DomainError
from .lti import SystemModel

MAX_TERMS = 100_000


@dataclass(frozen=True)
class FixedLengthCost:
    l0: int
    J: float
    terms_used: int
    truncation_error_bound: float
    method: str = "analytic"


def aoi_stationary_pmf(channel: ChannelModel, l0: int, i_max: int) -> tuple[list[float], float]:
    """``phi(i * l0)`` for ``i = 1..i_max`` and the remaining tail mass ``g**i_max``."""
    g = channel.error_prob(l0)
    pmf = [(1.0 - g) * g ** (i - 1) for i in range(1, i_max + 1)]
    return pmf, g ** i_max


def _scalar_params(system: SystemModel) -> tuple[float, float]:
    a = float(system.A[0, 0])
    qr = float(system.Q[0, 0]) * float(system.R[0, 0])
    return a * a, qr


def _slot_closed_form(rho2: float, qr: float, j: int) -> float:
    if rho2 == 1.0:
        return qr * j
    return qr * (rho2 ** j - 1.0) / (rho2 - 1.0)


def _tail_bound(rho2: float, qr: float, g: float, l0: int, n: int) -> float:
    """Upper bound on the sum of series terms ``i > n`` (each divided by ``l0``)."""
    if g == 0.0:
        return 0.0
    if rho2 > 1.0:
        q = g * rho2 ** l0
        S = sum(rho2 ** k for k in range(l0))
        C = (1.0 - g) * qr * S / (g * l0 * (rho2 - 1.0))
        return C * q ** (n + 1) / (1.0 - q)
    if rho2 < 1.0:
        return qr / (1.0 - rho2) * g ** n
    return qr * l0 * g ** n * ((n + 2) + g / (1.0 - g))


def analytic_fixed_cost(
    system: SystemModel,
    channel: ChannelModel,
    l0: int,
    tol: float = 1e-12,
    allow_fallback: bool = True,
) -> FixedLengthCost:
    """Average cost per slot of the fixed-length policy ``l0``.

    Matrix plants have no geometric closed form for ``Tr(Q H(j))``; with
    ``allow_fallback`` they are scored by the stationary formula on a large
    truncation and flagged ``method="semi-analytic"``.
    """
    if int(l0) != l0 or l0 < 1:
        raise DomainError(f"packet length must be a positive integer, got {l0!r}")
    l0 = int(l0)
    g = channel.error_prob(l0)
    product = g * system.rho ** (2 * l0)
    if not product < 1.0:
        raise DivergenceError(f"fixed length {l0} is unstable: g*rho^(2l)={product:.6g} >= 1")
    if not system.is_scalar:
        if not allow_fallback:
            raise DomainError("closed-form oracle needs a scalar plant")
        return _semi_analytic(system, channel, l0, product)

    rho2, qr = _scalar_params(system)
    total = 0.0
    bound = math.inf
    n = 0
    while n < MAX_TERMS:
        n += 1
        i = n
        weight = (1.0 - g) * g ** (i - 1)
        c = 0.0
        for j in range(i * l0, i * l0 + l0):
            c += _slot_closed_form(rho2, qr, j)
        total += weight * c / l0
        bound = _tail_bound(rho2, qr, g, l0, n)
        if bound < tol:
            break
    return FixedLengthCost(l0, total, n, bound)


def _semi_analytic(system, channel, l0, product) -> FixedLengthCost:
    from .smdp import Policy, SmdpSpec, evaluate_policy

    # states i*l0 carry mass g**(i-1); pick N so the clamped tail is below 1e-12 of the sum
    q = max(product, channel.error_prob(l0))
    N = max(l0 * int(math.ceil(math.log(1e-14) / math.log(q))) + l0, 2 * l0)
    spec = SmdpSpec(system, channel, N, l0)
    J = evaluate_policy(spec, Policy.fixed(N, l0))
    return FixedLengthCost(l0, J, N // l0, math.nan, method="semi-analytic")


def cost_bounds(system: SystemModel, channel: ChannelModel, l0: int, terms: int = 2000) -> tuple[float, float]:
    """Lower/upper average-cost bounds from ``Tr(QH(d)) <= c(d,l) <= l Tr(QH(d+l))``.

    Both are evaluated term by term on the geometric stationary law.
    """
    if not system.is_scalar:
        raise DomainError("cost bounds are evaluated for scalar plants")
    g = channel.error_prob(l0)
    if not g * system.rho ** (2 * l0) < 1.0:
        raise DivergenceError(f"fixed length {l0} is unstable")
    rho2, qr = _scalar_params(system)
    lo = hi = 0.0
    for i in range(1, terms + 1):
        w = (1.0 - g) * g ** (i - 1)
        if w == 0.0:
            break
        d = i * l0
        lo += w * _slot_closed_form(rho2, qr, d)
        term = w * l0 * _slot_closed_form(rho2, qr, d + l0)
        hi += term
        if term < 1e-17 * hi:
            break
    return lo / l0, hi / l0
