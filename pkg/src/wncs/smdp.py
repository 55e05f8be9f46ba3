"""AoI-indexed semi-MDP over packet lengths, its unit-step transformation and RVI.

States are the AoI ``d`` at the start of a packet (``1..N``), actions the
packet length ``l`` (``1..M``).  A failed packet moves the state to
``min(d + l, N)``; a delivered one to ``l``.  The truncation boundary ``N``
therefore self-loops on failure.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from pathlib import Path

import numpy as np

from . import kernels
from .channel import ChannelModel
from .errors import ConvergenceError, DomainError, StructureError
from .lti import SystemModel

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SmdpSpec:
    system: SystemModel
    channel: ChannelModel
    N: int
    M: int
    _slot: np.ndarray = field(init=False, repr=False)
    _g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and isinstance(self.M, (int, np.integer))):
            raise DomainError("N and M must be integers")
        if not self.N >= self.M >= 1:
            raise DomainError(f"need N >= M >= 1, got N={self.N}, M={self.M}")
        L = self.channel.max_length
        if L is not None and self.M > L:
            raise DomainError(f"M={self.M} exceeds the channel table length {L}")
        slot = self.system.slot_costs(self.N + self.M - 1)
        g = np.array([self.channel.error_prob(l) for l in range(1, self.M + 1)])
        slot.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "_slot", slot)
        object.__setattr__(self, "_g", g)

    def with_size(self, N: int | None = None, M: int | None = None) -> "SmdpSpec":
        return SmdpSpec(self.system, self.channel, self.N if N is None else N, self.M if M is None else M)

    def _check(self, d, l):
        if not (1 <= d <= self.N and int(d) == d):
            raise DomainError(f"state d={d!r} outside 1..{self.N}")
        if not (1 <= l <= self.M and int(l) == l):
            raise DomainError(f"action l={l!r} outside 1..{self.M}")
        return int(d), int(l)

    def stage_costs(self) -> np.ndarray:
        """``c(d, l)`` for every state and action, shape (N, M)."""
        out = np.empty((self.N, self.M))
        acc = np.zeros(self.N)
        with np.errstate(over="ignore", invalid="ignore"):
            for l in range(self.M):
                acc = acc + self._slot[l : l + self.N]
                out[:, l] = acc
        return out

    def error_probs(self) -> np.ndarray:
        return self._g


def one_stage_cost(spec: SmdpSpec, d: int, l: int) -> float:
    """Cost summed over the ``l`` slots of a packet started at AoI ``d``."""
    d, l = spec._check(d, l)
    acc = 0.0
    for v in spec._slot[d - 1 : d + l - 1]:
        acc = acc + float(v)
    return acc


def transition(spec: SmdpSpec, d: int, l: int) -> dict[int, float]:
    d, l = spec._check(d, l)
    g = float(spec._g[l - 1])
    out: dict[int, float] = {}
    out[min(d + l, spec.N)] = g
    out[l] = out.get(l, 0.0) + (1.0 - g)
    return out


def duration(spec: SmdpSpec, d: int, l: int) -> int:
    d, l = spec._check(d, l)
    return l


@dataclass(frozen=True)
class Policy:
    """Stationary deterministic policy; ``lengths[d-1]`` is the packet length at AoI ``d``."""

    lengths: tuple[int, ...]
    gain: float | None = None

    def __post_init__(self):
        lengths = tuple(int(v) for v in self.lengths)
        if not lengths or min(lengths) < 1:
            raise DomainError("policy needs one positive length per state")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def fixed(cls, N: int, l0: int) -> "Policy":
        return cls((l0,) * N)

    @property
    def N(self) -> int:
        return len(self.lengths)

    def action(self, d: int) -> int:
        """Packet length at AoI ``d``; states beyond ``N`` reuse the last action."""
        if d < 1:
            raise DomainError(f"AoI must be >= 1, got {d}")
        return self.lengths[min(d, self.N) - 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.lengths, dtype=np.int64)

    def with_gain(self, gain: float) -> "Policy":
        return Policy(self.lengths, gain)

    def check(self, spec: SmdpSpec) -> None:
        if self.N != spec.N:
            raise DomainError(f"policy covers {self.N} states, spec has N={spec.N}")
        if max(self.lengths) > spec.M:
            raise DomainError(f"policy uses length {max(self.lengths)} > M={spec.M}")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", "l"])
        for d, l in enumerate(self.lengths, start=1):
            w.writerow([d, l])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "Policy":
        is_text = isinstance(source, str) and "\n" in source
        text = source if is_text else Path(source).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"d", "l"}:
            raise StructureError("policy CSV needs header 'd,l'")
        pairs = sorted((int(r["d"]), int(r["l"])) for r in rows)
        if [d for d, _ in pairs] != list(range(1, len(pairs) + 1)):
            raise StructureError("policy CSV must list every state 1..N exactly once")
        return cls(tuple(l for _, l in pairs))


@dataclass(frozen=True, eq=False)
class TransformedMdp:
    """Unit-step MDP equivalent to the semi-MDP.

    Transitions are stored sparsely: ``succ[d-1, l-1, k]`` is a 0-based state
    index (``-1`` for unused slots) with probability ``prob[d-1, l-1, k]``.
    """

    cost: np.ndarray
    succ: np.ndarray
    prob: np.ndarray
    tau: float

    @property
    def N(self) -> int:
        return self.cost.shape[0]

    @property
    def M(self) -> int:
        return self.cost.shape[1]

    def dense(self) -> np.ndarray:
        """Transition tensor of shape (M, N, N)."""
        P = np.zeros((self.M, self.N, self.N))
        for k in range(self.succ.shape[2]):
            d, l = np.nonzero(self.succ[:, :, k] >= 0)
            np.add.at(P, (l, d, self.succ[d, l, k]), self.prob[d, l, k])
        return P

    def row(self, d: int, l: int) -> dict[int, float]:
        out = {}
        for j, p in zip(self.succ[d - 1, l - 1], self.prob[d - 1, l - 1]):
            if j >= 0:
                out[int(j) + 1] = float(p)
        return out


def transform(spec: SmdpSpec, tau: float = 1.0) -> TransformedMdp:
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"transformation step tau must lie in (0, 1], got {tau}")
    N, M = spec.N, spec.M
    c = spec.stage_costs()
    cost = c / np.arange(1, M + 1)[None, :]
    succ = np.full((N, M, 3), -1, dtype=np.int64)
    prob = np.zeros((N, M, 3))
    for d in range(1, N + 1):
        for l in range(1, M + 1):
            g = float(spec._g[l - 1])
            r = tau / l
            row: dict[int, float] = {}
            row[min(d + l, N)] = r * g
            row[l] = row.get(l, 0.0) + r * (1.0 - g)
            if r < 1.0:
                row[d] = row.get(d, 0.0) + (1.0 - r)
            for k, (j, p) in enumerate(row.items()):
                succ[d - 1, l - 1, k] = j - 1
                prob[d - 1, l - 1, k] = p
    return TransformedMdp(cost=cost, succ=succ, prob=prob, tau=float(tau))


@dataclass(frozen=True, eq=False)
class RviResult:
    policy: Policy
    gain: float
    iterations: int
    span: float
    lower: float
    upper: float
    bias: np.ndarray
    bias_lo: np.ndarray
    backend: str

    def __iter__(self):
        return iter((self.policy, self.gain, self.iterations))


def solve_rvi(
    mdp: TransformedMdp,
    epsilon: float = 1e-9,
    max_iters: int = 1_000_000,
    stall_window: int = 10_000,
    backend: str | None = None,
) -> RviResult:
    """Relative value iteration with reference state ``d = 1``.

    Sweeps run in extended precision (binary128 in the compiled kernel, 34
    digit decimal otherwise): near the truncation boundary the bias reaches
    ``~rho^(2N)`` and double precision cannot resolve a span of ``epsilon``.
    ``stall_window`` sweeps without a new smallest span abort early, which is
    what an unbounded instance looks like once the bias outgrows even that.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if not np.all(np.isfinite(mdp.cost)):
        raise ConvergenceError("stage costs overflow; the truncated instance is numerically unbounded")
    out = kernels.rvi(
        np.ascontiguousarray(mdp.cost, dtype=np.float64),
        np.ascontiguousarray(mdp.succ, dtype=np.int64),
        np.ascontiguousarray(mdp.prob, dtype=np.float64),
        float(epsilon), int(max_iters), int(stall_window), TIE_TOL, 0,
        backend=backend,
    )
    if not out["converged"]:
        why = "stalled" if out["iterations"] < max_iters else "max_iters exceeded"
        raise ConvergenceError(
            f"relative value iteration did not converge ({why}): span {out['span']:.3g} "
            f"after {out['iterations']} sweeps, epsilon {epsilon:g}",
            span=out["span"], iterations=out["iterations"],
        )
    gain = out["gain"]
    return RviResult(
        policy=Policy(tuple(out["policy"]), gain),
        gain=gain,
        iterations=int(out["iterations"]),
        span=out["span"],
        lower=out["lower"],
        upper=out["upper"],
        bias=out["bias"],
        bias_lo=out["bias_lo"],
        backend=backend or kernels.BACKEND,
    )


def bellman_residual(mdp: TransformedMdp, result: RviResult) -> np.ndarray:
    """``min_l[c~ + P~ h] - h(d) - gain`` per state, evaluated at 34 digits."""
    with localcontext() as ctx:
        ctx.prec = 34
        h = [Decimal(float(a)) + Decimal(float(b)) for a, b in zip(result.bias, result.bias_lo)]
        g = Decimal(result.gain)
        res = []
        for d in range(mdp.N):
            best = None
            for l in range(mdp.M):
                entries = [(int(j), Decimal(float(p))) for j, p in zip(mdp.succ[d, l], mdp.prob[d, l]) if j >= 0]
                # close the row exactly as the kernels do
                close = next((i for i, (j, _) in enumerate(entries) if j == d), None)
                if close is None:
                    close = max(range(len(entries)), key=lambda i: entries[i][1])
                rest = sum((p for i, (_, p) in enumerate(entries) if i != close), Decimal(0))
                entries[close] = (entries[close][0], 1 - rest)
                v = Decimal(float(mdp.cost[d, l])) + sum(p * h[j] for j, p in entries)
                best = v if best is None or v < best else best
            res.append(float(best - h[d] - g))
    return np.array(res)


def _closed_class(succ: list[list[int]], start: int) -> list[int]:
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in succ[i]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return sorted(seen)


def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix by GTH state reduction.

    Subtraction-free, so tiny probabilities keep full relative accuracy.
    """
    P = np.array(P, dtype=float)
    n = P.shape[0]
    for k in range(n - 1, 0, -1):
        s = P[k, :k].sum()
        if s <= 0.0:
            raise StructureError("chain is not irreducible on the given states")
        P[:k, k] /= s
        P[:k, :k] += np.outer(P[:k, k], P[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ P[:k, k]
    return pi / pi.sum()


def _recurrent_class(succ: list[list[int]]) -> list[int]:
    """The unique closed communicating class, or StructureError if there are several.

    With every ``g(l) > 0`` all states lead to the self-looping boundary ``N``
    and the class is simply what ``N`` reaches; a perfect length (``g = 0``)
    can pin the chain elsewhere, hence the general check.
    """
    reach = [set(_closed_class(succ, i)) for i in range(len(succ))]
    classes = {frozenset(r) for i, r in enumerate(reach) if all(i in reach[j] for j in r)}
    if len(classes) != 1:
        raise StructureError("policy chain has no unique stationary distribution")
    return sorted(next(iter(classes)))


def stationary_distribution(spec: SmdpSpec, pol: Policy) -> dict[int, float]:
    """Stationary law of the embedded (packet-start) chain over its recurrent class."""
    pol.check(spec)
    N = spec.N
    succ = [[j - 1 for j, p in transition(spec, d, pol.lengths[d - 1]).items() if p > 0]
            for d in range(1, N + 1)]
    cls = _recurrent_class(succ)
    index = {s: i for i, s in enumerate(cls)}
    P = np.zeros((len(cls), len(cls)))
    for s in cls:
        for j, p in transition(spec, s + 1, pol.lengths[s]).items():
            if p > 0:
                P[index[s], index[j - 1]] += p
    pi = gth_stationary(P)
    return {s + 1: float(p) for s, p in zip(cls, pi)}


def evaluate_policy(spec: SmdpSpec, pol: Policy) -> float:
    """Long-run cost per slot: ``sum c(d, pi(d)) phi(d) / sum pi(d) phi(d)``."""
    phi = stationary_distribution(spec, pol)
    num = 0.0
    den = 0.0
    for d, p in phi.items():
        if p == 0.0:
            continue
        l = pol.lengths[d - 1]
        num += one_stage_cost(spec, d, l) * p
        den += l * p
    if not np.isfinite(num):
        raise StructureError("policy cost overflows on this truncation")
    return num / den


def transformed_average_cost(mdp: TransformedMdp, pol: Policy) -> float:
    """Per-step average of ``c~`` under ``pol`` in the transformed chain."""
    P = mdp.dense()
    rows = np.array([P[pol.lengths[d] - 1, d] for d in range(mdp.N)])
    cls = _recurrent_class([list(np.nonzero(rows[i] > 0)[0]) for i in range(mdp.N)])
    pi = gth_stationary(rows[np.ix_(cls, cls)])
    c = np.array([mdp.cost[s, pol.lengths[s] - 1] for s in cls])
    return float(pi @ c)
