"""Small dense linear algebra for the plant, and the AoI covariance kernel.

Matrices are plain 2-D float64 ``numpy`` arrays.  :class:`SystemModel` holds
the one-step-controllable plant ``x' = A x + B u + w`` together with an
eagerly built cache of ``H(d) = sum_{i<d} A^i R (A^i)^T`` and of the per-slot
cost ``Tr(Q H(d))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DefinitenessError, DimensionError, DomainError, NumericError, PreconditionError

GAIN_TOL = 1e-9
RANK_TOL = 1e-10
SYM_TOL = 1e-12


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce a scalar, nested list or array into a finite 2-D float array."""
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # a flat list is read as a column only when it cannot be a row of a 1xN
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a matrix, got {arr.ndim}-D data")
    if arr.size == 0:
        raise DimensionError(f"{name}: empty matrix")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name}: entries must be finite")
    return arr


def spectral_radius(A) -> float:
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got shape {A.shape}")
    if A.shape == (1, 1):
        return abs(float(A[0, 0]))
    try:
        # LAPACK geev: Hessenberg reduction followed by shifted QR
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue iteration did not converge: {exc}") from exc
    return float(np.max(np.abs(eig)))


def _sym_sqrt(M: np.ndarray, name: str, strict: bool) -> np.ndarray:
    if not np.allclose(M, M.T, rtol=0.0, atol=SYM_TOL * max(1.0, np.abs(M).max())):
        raise DefinitenessError(f"{name} must be symmetric")
    w, V = np.linalg.eigh((M + M.T) / 2)
    scale = max(1.0, float(np.abs(w).max()))
    if strict and w.min() <= SYM_TOL * scale:
        raise DefinitenessError(f"{name} must be positive definite (min eigenvalue {w.min():.3g})")
    if not strict and w.min() < -SYM_TOL * scale:
        raise DefinitenessError(f"{name} must be positive semidefinite (min eigenvalue {w.min():.3g})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def matrix_sqrt(M, name: str = "matrix", strict: bool = True) -> np.ndarray:
    """Symmetric square root via eigendecomposition."""
    return _sym_sqrt(as_matrix(M, name), name, strict)


def _rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


class ControlFlags(NamedTuple):
    controllable: bool
    observable: bool


@dataclass(frozen=True, eq=False)
class SystemModel:
    """LTI plant with a predictive one-step deadbeat gain (A + B K = 0).

    ``d_max`` bounds the eagerly built ``H(d)`` cache; larger ``d`` are
    computed on demand by continuing the recursion without touching the cache.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    d_max: int = 128
    rho: float = field(init=False)
    _H: np.ndarray = field(init=False, repr=False)
    _slot: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got shape {A.shape}")
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            B = B.T if B.shape[1] == n and B.shape[0] == 1 else B
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got shape {B.shape}")
        m = B.shape[1]
        K = as_matrix(self.K, "K")
        if K.shape != (m, n):
            raise DimensionError(f"K must be {m}x{n}, got shape {K.shape}")
        R = as_matrix(self.R, "R")
        Q = as_matrix(self.Q, "Q")
        for name, M in (("R", R), ("Q", Q)):
            if M.shape != (n, n):
                raise DimensionError(f"{name} must be {n}x{n}, got shape {M.shape}")
        _sym_sqrt(R, "R", strict=True)
        _sym_sqrt(Q, "Q", strict=False)
        resid = np.abs(A + B @ K).max()
        if resid > GAIN_TOL:
            raise PreconditionError(f"A + B K must vanish (max entry {resid:.3g} > {GAIN_TOL:g})")
        if self.d_max < 1:
            raise DomainError("d_max must be >= 1")
        for name, M in (("A", A), ("B", B), ("K", K), ("R", R), ("Q", Q)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        object.__setattr__(self, "rho", spectral_radius(A))

        H = np.empty((self.d_max, n, n))
        H[0] = R
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(1, self.d_max):
                H[k] = A @ H[k - 1] @ A.T + R
            slot = np.einsum("ij,dji->d", Q, H)
        H.setflags(write=False)
        slot.setflags(write=False)
        object.__setattr__(self, "_H", H)
        object.__setattr__(self, "_slot", slot)

    @classmethod
    def scalar(cls, a: float, b: float = 1.0, r: float = 1.0, q: float = 1.0, **kw) -> "SystemModel":
        return cls(A=[[a]], B=[[b]], K=[[-a / b]], R=[[r]], Q=[[q]], **kw)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def is_scalar(self) -> bool:
        return self.n == 1

    def h_matrix(self, d: int) -> np.ndarray:
        d = _check_age(d)
        if d <= self.d_max:
            return self._H[d - 1]
        H = self._H[-1].copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(d - self.d_max):
                H = self.A @ H @ self.A.T + self.R
        return H

    def slot_cost(self, d: int) -> float:
        d = _check_age(d)
        if d <= self.d_max:
            return float(self._slot[d - 1])
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.trace(self.Q @ self.h_matrix(d)))

    def slot_costs(self, d_hi: int) -> np.ndarray:
        """``Tr(Q H(d))`` for ``d = 1..d_hi`` as one array."""
        if d_hi <= self.d_max:
            return np.array(self._slot[:d_hi])
        out = np.empty(d_hi)
        out[: self.d_max] = self._slot
        H = self._H[-1].copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(self.d_max, d_hi):
                H = self.A @ H @ self.A.T + self.R
                out[k] = np.trace(self.Q @ H)
        return out

    def controllability(self) -> ControlFlags:
        return check_controllable_observable(self)


def _check_age(d) -> int:
    if int(d) != d or d < 1:
        raise DomainError(f"AoI must be a positive integer, got {d!r}")
    return int(d)


def check_controllable_observable(m: SystemModel) -> ControlFlags:
    """Rank tests on ``[sqrtR, A sqrtR, ..., A^n sqrtR]`` and its Q analogue."""
    n = m.n
    sR = matrix_sqrt(m.R, "R", strict=True)
    sQ = matrix_sqrt(m.Q, "Q", strict=False)
    ctrl, obs = [], []
    P = np.eye(n)
    for _ in range(n + 1):
        ctrl.append(P @ sR)
        obs.append(P.T @ sQ.T)
        P = m.A @ P
    return ControlFlags(_rank(np.hstack(ctrl)) == n, _rank(np.hstack(obs)) == n)


def h_matrix(m: SystemModel, d: int) -> np.ndarray:
    return m.h_matrix(d)


def slot_cost(m: SystemModel, d: int) -> float:
    return m.slot_cost(d)
