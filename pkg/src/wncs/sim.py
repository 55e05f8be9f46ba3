"""Monte Carlo closed loop: plant, predictive controller, erasure channel, zero-hold actuator.

Timing: a packet of length ``l`` decided at slot ``t`` carries ``K A^(l-1) x_t``
and resolves at slot ``t + l - 1``; on success the command is applied in that
slot and the AoI becomes ``l``, otherwise the input stays zero and the AoI
keeps counting.  The next packet starts in the following slot.  Episodes
start from ``x = 0`` with AoI 1.

Each seed owns two independent PCG64 streams spawned from
``SeedSequence(seed)``: one for the disturbance, one for packet outcomes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelModel
from .errors import DimensionError, DomainError
from .lti import SystemModel, matrix_sqrt
from .smdp import Policy


def step_plant(x, u, w, system: SystemModel) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if x.shape != (system.n,) or u.shape != (system.m,) or w.shape != (system.n,):
        raise DimensionError(
            f"expected x:{system.n}, u:{system.m}, w:{system.n}; got {x.shape}, {u.shape}, {w.shape}"
        )
    return system.A @ x + system.B @ u + w


def control_command(x, l: int, system: SystemModel) -> np.ndarray:
    """``K A^(l-1) x``: the gain applied to the state predicted at delivery."""
    if int(l) != l or l < 1:
        raise DomainError(f"packet length must be a positive integer, got {l!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (system.n,):
        raise DimensionError(f"expected a state of length {system.n}, got {x.shape}")
    return system.K @ np.linalg.matrix_power(system.A, int(l) - 1) @ x


@dataclass(frozen=True)
class SimConfig:
    system: SystemModel
    channel: ChannelModel
    policy: Policy | int
    horizon: int = 50_000
    seeds: tuple[int, ...] = tuple(range(30))
    warmup: int = 1000
    hist_max: int = 256
    d_track: int = 16
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError("horizon T must be >= 1")
        if not 0 <= self.warmup < self.horizon:
            raise DomainError(f"warmup must lie in [0, T), got {self.warmup} with T={self.horizon}")
        if not self.seeds:
            raise DomainError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        pol = self.policy
        if not isinstance(pol, Policy):
            pol = Policy.fixed(1, int(pol))
        object.__setattr__(self, "policy", pol)
        L = self.channel.max_length
        if L is not None and max(pol.lengths) > L:
            raise DomainError(f"policy uses length {max(pol.lengths)} beyond the channel table")

    @property
    def max_length(self) -> int:
        return max(self.policy.lengths)


@dataclass(frozen=True, eq=False)
class EpisodeRecord:
    seed: int
    mean_cost: float
    slots: int
    divergence_slot: int | None
    aoi_hist: np.ndarray
    attempts: np.ndarray
    successes: np.ndarray
    moments: np.ndarray
    moment_counts: np.ndarray

    @property
    def diverged(self) -> bool:
        return self.divergence_slot is not None


def _kernel_inputs(cfg: SimConfig):
    s = cfg.system
    L = cfg.max_length
    G = np.stack([s.K @ np.linalg.matrix_power(s.A, l - 1) for l in range(1, L + 1)])
    g = np.array([cfg.channel.error_prob(l) for l in range(1, L + 1)])
    sqrtR = matrix_sqrt(s.R, "R")
    return (
        np.ascontiguousarray(s.A),
        np.ascontiguousarray(s.B),
        np.ascontiguousarray(G),
        np.ascontiguousarray(s.Q),
        cfg.policy.as_array(),
        g,
        sqrtR,
    )


def draw_streams(seed: int, horizon: int, sqrtR: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Disturbance rows ``w_t = sqrt(R) z_t`` and one uniform per slot for packet outcomes."""
    noise_ss, chan_ss = np.random.SeedSequence(seed).spawn(2)
    z = np.random.Generator(np.random.PCG64(noise_ss)).standard_normal((horizon, sqrtR.shape[0]))
    u = np.random.Generator(np.random.PCG64(chan_ss)).random(horizon)
    return np.ascontiguousarray(z @ sqrtR.T), u


def _run(cfg: SimConfig, seed: int, inputs, backend) -> EpisodeRecord:
    A, B, G, Q, pol, g, sqrtR = inputs
    W, U = draw_streams(seed, cfg.horizon, sqrtR)
    out = kernels.episode(A, B, G, Q, pol, g, W, U, cfg.warmup, cfg.hist_max, cfg.d_track, backend=backend)
    div = int(out["divergence_slot"])
    counted = int(out["counted"])
    if div >= 0:
        mean = math.inf
    elif counted:
        mean = out["cost_sum"] / counted
    else:
        mean = math.nan
    return EpisodeRecord(
        seed=seed,
        mean_cost=mean,
        slots=counted,
        divergence_slot=div if div >= 0 else None,
        aoi_hist=out["hist"],
        attempts=out["attempts"],
        successes=out["successes"],
        moments=out["moments"],
        moment_counts=out["moment_counts"],
    )


def run_episode(cfg: SimConfig, seed: int, backend: str | None = None) -> EpisodeRecord:
    """Simulate ``cfg.horizon`` slots for one seed; deterministic given the seed."""
    return _run(cfg, int(seed), _kernel_inputs(cfg), backend)


@dataclass(frozen=True, eq=False)
class SimReport:
    records: tuple[EpisodeRecord, ...]
    hist_max: int
    pooled_mean: float = field(init=False)
    stderr: float = field(init=False)

    def __post_init__(self):
        means = np.array([r.mean_cost for r in self.records])
        if self.diverged:
            pooled, se = math.inf, math.nan
        else:
            pooled = float(means.mean())
            se = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else math.nan
        object.__setattr__(self, "pooled_mean", pooled)
        object.__setattr__(self, "stderr", se)

    @property
    def diverged(self) -> bool:
        return any(r.diverged for r in self.records)

    @property
    def per_seed(self) -> list[float]:
        return [r.mean_cost for r in self.records]

    def aoi_histogram(self) -> dict[int, int]:
        """Packet-start AoI counts pooled over seeds (``hist_max + 1`` collects the overflow)."""
        total = np.sum([r.aoi_hist for r in self.records], axis=0)
        return {d: int(c) for d, c in enumerate(total) if c and d >= 1}

    def success_rates(self) -> dict[int, tuple[int, int, float]]:
        att = np.sum([r.attempts for r in self.records], axis=0)
        suc = np.sum([r.successes for r in self.records], axis=0)
        return {l + 1: (int(a), int(s), s / a) for l, (a, s) in enumerate(zip(att, suc)) if a}

    def second_moment(self, d: int) -> tuple[np.ndarray, int]:
        """Pooled ``E[x x^T]`` over packet starts at AoI ``d`` and the sample count."""
        if d < 1 or d > self.records[0].moments.shape[0]:
            raise DomainError(f"AoI {d} is not tracked")
        s = np.sum([r.moments[d - 1] for r in self.records], axis=0)
        n = int(np.sum([r.moment_counts[d - 1] for r in self.records]))
        return (s / n if n else s * math.nan), n

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "mean_cost", "slots", "diverged", "divergence_slot"])
        for r in self.records:
            w.writerow([r.seed, f"{r.mean_cost:.12g}", r.slots, str(r.diverged).lower(),
                        "" if r.divergence_slot is None else r.divergence_slot])
        return buf.getvalue()

    def aoi_csv(self) -> str:
        lines = ["d,count"] + [f"{d},{c}" for d, c in sorted(self.aoi_histogram().items())]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "pooled_mean": _num(self.pooled_mean),
            "stderr": _num(self.stderr),
            "seeds": len(self.records),
            "diverged": self.diverged,
            "diverged_seeds": [r.seed for r in self.records if r.diverged],
            "success_rates": {str(l): round(v[2], 12) for l, v in self.success_rates().items()},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _num(x: float):
    return x if math.isfinite(x) else str(x)


def estimate_cost(cfg: SimConfig, backend: str | None = None) -> SimReport:
    inputs = _kernel_inputs(cfg)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            recs = list(pool.map(lambda s: _run(cfg, s, inputs, backend), cfg.seeds))
    else:
        recs = [_run(cfg, s, inputs, backend) for s in cfg.seeds]
    return SimReport(tuple(recs), cfg.hist_max)


def total_variation(empirical: dict[int, int], reference: dict[int, float]) -> float:
    """TV distance between a count histogram and a reference pmf (missing mass included)."""
    n = sum(empirical.values())
    keys = set(empirical) | set(reference)
    tv = sum(abs(empirical.get(k, 0) / n - reference.get(k, 0.0)) for k in keys)
    tv += max(0.0, 1.0 - sum(reference.values()))
    return tv / 2
