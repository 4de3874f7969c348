"""Semidiscrete damped wave systems ``M u'' + B u' + gamma(t) M u' + A u = L(t, u)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .sparse import DimensionError, SparseMatrix

POWER_LAW = "power-law"
ZERO = "constant-zero"
TABLE = "custom-table"


class DampingDomainError(ValueError):
    pass


@dataclass(frozen=True)
class DampingCoefficient:
    """Time-varying damping ``gamma(t)``.

    ``power-law`` evaluates ``r1 * (r2 + t)**eta``; ``custom-table`` linearly
    interpolates ``table = (times, values)``; ``constant-zero`` is exactly 0.
    """

    r1: float = 0.0
    r2: float = 1.0
    eta: float = 0.0
    kind: str = ZERO
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in (POWER_LAW, ZERO, TABLE):
            raise ValueError(f"unknown damping kind {self.kind!r}")
        if self.kind == TABLE:
            if self.table is None:
                raise ValueError("custom-table damping needs a (times, values) table")
            ts, vs = (np.asarray(a, dtype=float) for a in self.table)
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 1 or np.any(np.diff(ts) <= 0):
                raise ValueError("table times must be strictly increasing and match values")
            object.__setattr__(self, "table", (tuple(ts), tuple(vs)))

    @classmethod
    def power_law(cls, r1, r2, eta):
        return cls(float(r1), float(r2), float(eta), POWER_LAW)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def from_table(cls, times, values):
        return cls(kind=TABLE, table=(times, values))

    @property
    def is_constant(self):
        if self.kind == ZERO:
            return True
        if self.kind == POWER_LAW:
            return self.eta == 0.0 or self.r1 == 0.0
        return len(set(self.table[1])) == 1

    def __call__(self, t):
        return gamma_eval(self, t)

    def describe(self):
        if self.kind == ZERO:
            return "0"
        if self.kind == POWER_LAW:
            return f"{self.r1:g}*({self.r2:g}+t)^{self.eta:g}"
        return f"table[{len(self.table[0])}]"


def gamma_eval(gamma, t):
    if t < 0:
        raise DampingDomainError(f"damping evaluated at negative time {t}")
    if gamma.kind == ZERO:
        return 0.0
    if gamma.kind == TABLE:
        ts, vs = gamma.table
        return float(np.interp(t, ts, vs))
    base = gamma.r2 + t
    if base <= 0:
        raise DampingDomainError(f"r2 + t = {base} must be positive")
    value = gamma.r1 * base**gamma.eta
    if not math.isfinite(value):
        raise DampingDomainError(f"gamma({t}) = {value} is not finite")
    return value


@dataclass(frozen=True)
class StepSizeConstants:
    alpha_hat: float = 0.0
    beta_hat: float = 0.0
    c_em_hat: float = 0.0
    c_delta_hat: float = 0.0
    c_gamma: float = 0.0

    def __post_init__(self):
        for name in ("alpha_hat", "beta_hat", "c_em_hat", "c_delta_hat", "c_gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class StepSizeCheck:
    max_term: float
    admissible: bool
    terms: tuple


def check_step_size(tau, c):
    """Evaluate the four step-size bounds of the vanilla IMEX error estimate.

    Constants are user supplied; the result is a diagnostic, not a guarantee.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    terms = (
        0.5 * tau * (c.alpha_hat * c.c_em_hat / 2 + c.beta_hat),
        0.5 * tau**2 * c.alpha_hat + tau * c.beta_hat,
        tau * ((1 + math.sqrt(3)) * c.c_delta_hat + c.c_gamma + 0.75 * math.sqrt(2) * c.c_delta_hat * c.c_gamma),
        tau,
    )
    m = max(terms)
    return StepSizeCheck(m, m < 1, terms)


def zero_load(t, u):
    return np.zeros_like(u)


@dataclass(frozen=True)
class SemidiscreteSystem:
    """Matrices, damping and load of one spatially discretized problem.

    ``load(t, u)`` returns an assembled (dual) vector, i.e. already tested
    against the basis; schemes never form ``M^{-1} L`` explicitly except where
    a mass solve is part of the update.
    """

    M: SparseMatrix
    A: SparseMatrix
    B: SparseMatrix = None
    gamma: DampingCoefficient = field(default_factory=DampingCoefficient.zero)
    load: Callable = zero_load

    def __post_init__(self):
        n = self.M.n_rows
        if self.B is None:
            object.__setattr__(self, "B", SparseMatrix.zeros(n))
        for name in ("M", "A", "B"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise DimensionError(f"{name} has shape {m.shape}, expected {(n, n)}")
        if not self.M.symmetric:
            raise ValueError("mass matrix must be flagged symmetric")
        if not self.A.symmetric:
            raise ValueError("stiffness matrix must be flagged symmetric")

    @property
    def dim(self):
        return self.M.n_rows

    def validate(self, dense_limit=2000):
        """Eigenvalue checks of the SPD/PSD invariants; dense, so small systems only."""
        if self.dim > dense_limit:
            raise ValueError(f"dense validation refused for dim {self.dim} > {dense_limit}")
        m_min = np.linalg.eigvalsh(self.M.to_dense()).min()
        a_min = np.linalg.eigvalsh(self.A.to_dense()).min()
        a_scale = max(1.0, abs(self.A.to_dense()).max())
        if m_min <= 0:
            raise ValueError(f"mass matrix not positive definite (min eigenvalue {m_min:.3e})")
        if a_min < -1e-12 * a_scale:
            raise ValueError(f"stiffness matrix not semidefinite (min eigenvalue {a_min:.3e})")
        return m_min, a_min

    def with_gamma(self, gamma):
        return SemidiscreteSystem(self.M, self.A, self.B, gamma, self.load)


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise DimensionError(f"u {self.u.shape} and v {self.v.shape} must be equal-length vectors")

    def copy(self):
        return State(self.t, self.u.copy(), self.v.copy())

    def norm(self):
        return math.sqrt(float(self.u @ self.u + self.v @ self.v))


def residual(system, t, u, v, a):
    """``M a + B v + gamma(t) M v + A u - L(t, u)``."""
    n = system.dim
    for name, x in (("u", u), ("v", v), ("a", a)):
        if np.shape(x) != (n,):
            raise DimensionError(f"{name} has shape {np.shape(x)}, system dim is {n}")
    g = gamma_eval(system.gamma, t)
    return system.M @ a + system.B @ v + g * (system.M @ v) + system.A @ u - system.load(t, u)
