"""Experiment configuration: one YAML file with system/channel/solver/sim blocks.

Scalars are accepted wherever a 1x1 matrix is expected.  Parsing reports the
first offending field by its dotted path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelModel
from .errors import ConfigError, WncsError
from .lti import SystemModel
from .sim import SimConfig
from .smdp import Policy, SmdpSpec

Matrix = list[list[float]]


@dataclass
class SystemBlock:
    A: Matrix
    B: Matrix
    K: Matrix
    R: Matrix
    Q: Matrix


@dataclass
class ChannelBlock:
    kind: str
    p0: float | None = None
    ratio: float | None = None
    table: list[float] | None = None


@dataclass
class SolverBlock:
    N: int = 70
    M: int = 5
    epsilon: float = 1e-9
    max_iters: int = 1_000_000
    tau: float = 1.0
    N_values: list[int] = field(default_factory=lambda: [30, 50, 70])
    eval_N: int = 200


@dataclass
class SimBlock:
    T: int = 50_000
    warmup: int = 1000
    seeds: list[int] = field(default_factory=lambda: list(range(30)))
    workers: int = 1


@dataclass
class ExperimentConfig:
    system: SystemBlock
    channel: ChannelBlock
    solver: SolverBlock = field(default_factory=SolverBlock)
    sim: SimBlock = field(default_factory=SimBlock)
    output: str = "out"

    def system_model(self) -> SystemModel:
        s = self.system
        try:
            return SystemModel(A=s.A, B=s.B, K=s.K, R=s.R, Q=s.Q, d_max=max(128, self.solver.N + self.solver.M))
        except WncsError as exc:
            raise ConfigError("system", str(exc)) from exc

    def channel_model(self) -> ChannelModel:
        c = self.channel
        if c.kind == "exponential":
            return ChannelModel.exponential(c.p0, c.ratio)
        return ChannelModel.from_table(c.table)

    def smdp_spec(self, N: int | None = None, M: int | None = None) -> SmdpSpec:
        try:
            return SmdpSpec(self.system_model(), self.channel_model(),
                            self.solver.N if N is None else N, self.solver.M if M is None else M)
        except ConfigError:
            raise
        except WncsError as exc:
            raise ConfigError("solver", str(exc)) from exc

    def sim_config(self, policy: Policy | int) -> SimConfig:
        return SimConfig(
            system=self.system_model(),
            channel=self.channel_model(),
            policy=policy,
            horizon=self.sim.T,
            seeds=tuple(self.sim.seeds),
            warmup=self.sim.warmup,
            workers=self.sim.workers,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel"] = {k: v for k, v in d["channel"].items() if v is not None}
        return d

    def dump(self, path=None) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)
        if path is not None:
            Path(path).write_text(text)
        return text


def reference_defaults() -> ExperimentConfig:
    """Scalar plant A=1.2, B=R=Q=1, K=-1.2 with g(l) = 0.8 * 0.5**(l-1), N=70, M=5."""
    return ExperimentConfig(
        system=SystemBlock(A=[[1.2]], B=[[1.0]], K=[[-1.2]], R=[[1.0]], Q=[[1.0]]),
        channel=ChannelBlock(kind="exponential", p0=0.8, ratio=0.5),
    )


def _matrix(value, path: str) -> Matrix:
    if isinstance(value, bool) or value is None:
        raise ConfigError(path, "expected a number or a matrix")
    if isinstance(value, (int, float)):
        value = [[value]]
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a number or a non-empty list of rows")
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        value = [value]
    rows = []
    width = None
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise ConfigError(f"{path}[{i}]", "expected a row list")
        if width is None:
            width = len(row)
        if len(row) != width or width == 0:
            raise ConfigError(f"{path}[{i}]", "rows must be non-empty and equally long")
        out = []
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{path}[{i}][{j}]", f"expected a finite number, got {v!r}")
            out.append(float(v))
        rows.append(out)
    return rows


def _number(block: dict, key: str, path: str, kind=float, default=None, required=False):
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}", "missing")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", "must be finite")
    return float(v)


def _int_list(value, path: str) -> list[int]:
    if isinstance(value, str):
        lo, sep, hi = value.partition("-")
        try:
            return list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
        except ValueError:
            raise ConfigError(path, f"cannot read {value!r} as 'a-b'") from None
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of integers")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}[{i}]", f"expected an integer, got {v!r}")
        out.append(v)
    return out


def _block(raw: dict, name: str, required: bool) -> dict:
    if name not in raw or raw[name] is None:
        if required:
            raise ConfigError(name, "missing block")
        return {}
    if not isinstance(raw[name], dict):
        raise ConfigError(name, "expected a mapping")
    return raw[name]


def _unknown(block: dict, allowed: set[str], path: str) -> None:
    extra = sorted(set(block) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", "unknown field")


def parse_config(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a mapping with system/channel/solver/sim blocks")
    _unknown(raw, {"system", "channel", "solver", "sim", "output"}, "config")

    s = _block(raw, "system", True)
    _unknown(s, {"A", "B", "K", "R", "Q"}, "system")
    mats = {}
    for key in ("A", "B", "R", "Q"):
        if key not in s:
            raise ConfigError(f"system.{key}", "missing")
        mats[key] = _matrix(s[key], f"system.{key}")
    if "K" in s:
        mats["K"] = _matrix(s["K"], "system.K")
    else:
        # deadbeat gain K = -B^+ A; the model still checks A + B K = 0
        K = -np.linalg.pinv(np.array(mats["B"])) @ np.array(mats["A"])
        mats["K"] = K.tolist()
    system = SystemBlock(**mats)

    c = _block(raw, "channel", True)
    kind = c.get("kind")
    if kind == "exponential":
        _unknown(c, {"kind", "p0", "ratio"}, "channel")
        channel = ChannelBlock(kind=kind, p0=_number(c, "p0", "channel", required=True),
                               ratio=_number(c, "ratio", "channel", required=True))
    elif kind == "table":
        _unknown(c, {"kind", "table"}, "channel")
        if "table" not in c:
            raise ConfigError("channel.table", "missing")
        channel = ChannelBlock(kind=kind, table=_matrix(c["table"], "channel.table")[0])
    else:
        raise ConfigError("channel.kind", f"expected 'exponential' or 'table', got {kind!r}")
    bad = ChannelModel.exponential(channel.p0, channel.ratio).validate() if kind == "exponential" \
        else ChannelModel.from_table(channel.table).validate()
    if bad:
        raise ConfigError("channel", "; ".join(v.reason for v in bad))

    v = _block(raw, "solver", False)
    _unknown(v, {"N", "M", "epsilon", "max_iters", "tau", "N_values", "eval_N"}, "solver")
    d = SolverBlock()
    solver = SolverBlock(
        N=_number(v, "N", "solver", int, d.N),
        M=_number(v, "M", "solver", int, d.M),
        epsilon=_number(v, "epsilon", "solver", float, d.epsilon),
        max_iters=_number(v, "max_iters", "solver", int, d.max_iters),
        tau=_number(v, "tau", "solver", float, d.tau),
        N_values=_int_list(v["N_values"], "solver.N_values") if "N_values" in v else d.N_values,
        eval_N=_number(v, "eval_N", "solver", int, d.eval_N),
    )
    if not solver.N >= solver.M >= 1:
        raise ConfigError("solver.N", f"need N >= M >= 1, got N={solver.N}, M={solver.M}")
    if not solver.epsilon > 0:
        raise ConfigError("solver.epsilon", "must be positive")
    if not 0 < solver.tau <= 1:
        raise ConfigError("solver.tau", "must lie in (0, 1]")
    if kind == "table" and solver.M > len(channel.table):
        raise ConfigError("solver.M", f"exceeds the channel table length {len(channel.table)}")

    m = _block(raw, "sim", False)
    _unknown(m, {"T", "warmup", "seeds", "workers"}, "sim")
    ds = SimBlock()
    sim = SimBlock(
        T=_number(m, "T", "sim", int, ds.T),
        warmup=_number(m, "warmup", "sim", int, ds.warmup),
        seeds=_int_list(m["seeds"], "sim.seeds") if "seeds" in m else ds.seeds,
        workers=_number(m, "workers", "sim", int, ds.workers),
    )
    if sim.T < 1:
        raise ConfigError("sim.T", "must be >= 1")
    if not 0 <= sim.warmup < sim.T:
        raise ConfigError("sim.warmup", "must lie in [0, T)")

    output = raw.get("output", "out")
    if not isinstance(output, str):
        raise ConfigError("output", "expected a directory path")

    cfg = ExperimentConfig(system=system, channel=channel, solver=solver, sim=sim, output=output)
    cfg.system_model()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from exc
    return parse_config(raw)
