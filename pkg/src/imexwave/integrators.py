"""Time steppers for ``M u'' + B u' + gamma(t) M u' + A u = L(t, u)``.

All updates are written in mass-weighted form.  With ``g`` a damping sample the
implicit operator is ``Q(g) = (1 + tau*g/2) M + tau^2/4 A + tau/2 B``.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .sparse import DEFAULT_TOL, ShiftedOperator, combine, solve
from .system import State, gamma_eval


class Scheme(str, enum.Enum):
    CN = "crank-nicolson"
    IMEX = "vanilla-imex"
    RIMEX = "revised-imex"
    RK4 = "rk4"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        aliases = {"cn": cls.CN, "imex": cls.IMEX, "vimex": cls.IMEX, "rimex": cls.RIMEX, "rk4": cls.RK4, "rk": cls.RK4}
        key = str(name).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def short(self):
        return {Scheme.CN: "cn", Scheme.IMEX: "imex", Scheme.RIMEX: "rimex", Scheme.RK4: "rk4"}[self]


@dataclass(frozen=True)
class SchemeKind:
    tag: Scheme
    max_iters: int = 50
    tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "tag", Scheme.parse(self.tag))
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("fixed-point tol must be positive")


@dataclass
class StepReport:
    linear_solves: int = 0
    fixed_point_iters: int = 0
    wall_time: float = 0.0
    steps: int = 0
    operator_builds: int = 0

    def __add__(self, other):
        return StepReport(
            self.linear_solves + other.linear_solves,
            self.fixed_point_iters + other.fixed_point_iters,
            self.wall_time + other.wall_time,
            self.steps + other.steps,
            self.operator_builds + other.operator_builds,
        )


class FixedPointError(RuntimeError):
    def __init__(self, message, last_state, contraction):
        super().__init__(message)
        self.last_state = last_state
        self.contraction = contraction


class BlowUpError(RuntimeError):
    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


class IntegrationError(RuntimeError):
    """A step failed; carries the last good state and how far we got."""

    def __init__(self, message, step_index, state, report, cause):
        super().__init__(message)
        self.step_index = step_index
        self.state = state
        self.report = report
        self.cause = cause


class OperatorCache:
    """Holds the most recent ``Q(g)`` and the mass operator for one system.

    ``Q`` is rebuilt only when ``tau`` or the damping sample changes, so a
    constant damping builds it once per step size.
    """

    def __init__(self, system):
        self.system = system
        self._key = None
        self._op = None
        self._mass = None
        self.builds = 0

    def shifted(self, tau, g):
        key = (tau, g)
        if key != self._key:
            s = self.system
            self._op = combine(s.M, s.A, s.B, 1.0 + 0.5 * tau * g, 0.25 * tau * tau, 0.5 * tau).prepare()
            self._key = key
            self.builds += 1
        return self._op

    @property
    def mass(self):
        if self._mass is None:
            self._mass = ShiftedOperator.from_matrix(self.system.M).prepare()
        return self._mass


def _imex_step(system, state, tau, cache, tol, revised):
    start = time.perf_counter()
    cache = cache or OperatorCache(system)
    builds = cache.builds
    M, A = system.M, system.A
    t0, u, v = state.t, state.u, state.v
    t1 = t0 + tau
    g0 = gamma_eval(system.gamma, t0)
    g1 = gamma_eval(system.gamma, t1)
    g = gamma_eval(system.gamma, t0 + 0.5 * tau) if revised else g1

    Mv = M @ v
    l0 = system.load(t0, u)
    rhs = Mv - (0.5 * tau) * (A @ u) + (0.5 * tau) * l0
    if not revised:
        rhs += (0.25 * tau * (g1 - g0)) * Mv
    vh = solve(cache.shifted(tau, g), rhs, tol, x0=v)
    solves = 1

    u1 = u + tau * vh
    dl = system.load(t1, u1) - l0
    v1 = 2.0 * vh - v
    # second half shares the first half's linear part; only the load moves
    if np.any(dl):
        v1 += solve(cache.mass, (0.5 * tau) * dl, tol)
        solves += 1
    report = StepReport(solves, 0, time.perf_counter() - start, 1, cache.builds - builds)
    return State(t1, u1, v1), report


def step_vanilla_imex(system, state, tau, cache=None, tol=DEFAULT_TOL):
    """One step of the Crank-Nicolson/leapfrog IMEX scheme with endpoint damping.

    The damping uses ``gamma(t_{n+1})`` inside ``Q`` plus the correction
    ``tau/4 (gamma^{n+1} - gamma^n) M v^n`` in both halves.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    return _imex_step(system, state, tau, cache, tol, revised=False)


def step_revised_imex(system, state, tau, cache=None, tol=DEFAULT_TOL):
    """Like :func:`step_vanilla_imex` with midpoint damping ``gamma(t_n + tau/2)``
    and no correction term."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return _imex_step(system, state, tau, cache, tol, revised=True)


def step_cn(system, state, tau, cache=None, tol=DEFAULT_TOL, max_iters=50, fp_tol=1e-12):
    """Crank-Nicolson in half-full-half form, closed by fixed-point iteration on the load.

    Starts from ``L^{n+1} = L^n`` and re-evaluates the load at each candidate
    ``u^{n+1}`` until the candidate moves by at most ``fp_tol`` (Euclidean).
    A re-evaluated load that is bitwise unchanged ends the iteration without
    another solve.  ``fixed_point_iters`` counts correction solves.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    start = time.perf_counter()
    cache = cache or OperatorCache(system)
    builds = cache.builds
    M, A = system.M, system.A
    t0, u, v = state.t, state.u, state.v
    t1 = t0 + tau
    g0 = gamma_eval(system.gamma, t0)
    g1 = gamma_eval(system.gamma, t1)
    op = cache.shifted(tau, g1)

    Mv = M @ v
    rhs_lin = Mv - (0.5 * tau) * (A @ u) + (0.25 * tau * (g1 - g0)) * Mv
    l0 = system.load(t0, u)
    l1 = l0
    vh = solve(op, rhs_lin + (0.25 * tau) * (l0 + l1), tol, x0=v)
    u1 = u + tau * vh
    solves, iters = 1, 0
    last_change, contraction = None, float("nan")
    for _ in range(max_iters):
        l1_new = system.load(t1, u1)
        if np.array_equal(l1_new, l1):
            break
        l1 = l1_new
        vh = solve(op, rhs_lin + (0.25 * tau) * (l0 + l1), tol, x0=vh)
        solves += 1
        iters += 1
        u_new = u + tau * vh
        change = float(np.linalg.norm(u_new - u1))
        u1 = u_new
        if last_change:
            contraction = change / last_change
        last_change = change
        if change <= fp_tol:
            break
    else:
        raise FixedPointError(
            f"fixed-point iteration did not converge in {max_iters} passes "
            f"(last change {last_change:.3e}, contraction {contraction:.3g})",
            State(t1, u1, 2.0 * vh - v),
            contraction,
        )
    report = StepReport(solves, iters, time.perf_counter() - start, 1, cache.builds - builds)
    return State(t1, u1, 2.0 * vh - v), report


def step_rk4(system, state, tau, cache=None, tol=DEFAULT_TOL):
    """Classical four-stage Runge-Kutta on ``u' = v, v' = M^{-1}(L - A u - B v) - gamma v``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    start = time.perf_counter()
    cache = cache or OperatorCache(system)
    mass = cache.mass
    A, B = system.A, system.B

    def accel(t, u, v):
        rhs = system.load(t, u) - A @ u - B @ v
        if not np.all(np.isfinite(rhs)):
            raise BlowUpError(f"non-finite stage in step to t={state.t + tau:g}", state)
        return solve(mass, rhs, tol) - gamma_eval(system.gamma, t) * v

    t, u, v = state.t, state.u, state.v
    h = 0.5 * tau
    with np.errstate(over="ignore", invalid="ignore"):
        k1u, k1v = v, accel(t, u, v)
        k2u, k2v = v + h * k1v, accel(t + h, u + h * k1u, v + h * k1v)
        k3u, k3v = v + h * k2v, accel(t + h, u + h * k2u, v + h * k2v)
        k4u, k4v = v + tau * k3v, accel(t + tau, u + tau * k3u, v + tau * k3v)
        u1 = u + tau * ((k1u + k4u) + 2.0 * (k2u + k3u)) / 6.0
        v1 = v + tau * ((k1v + k4v) + 2.0 * (k2v + k3v)) / 6.0
    new = State(t + tau, u1, v1)
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(v1))):
        raise BlowUpError(f"non-finite state after step to t={t + tau:g}", new)
    return new, StepReport(4, 0, time.perf_counter() - start, 1, 0)


def step_vanilla_imex_one_step_form(system, state, tau, cache=None, tol=DEFAULT_TOL):
    """Vanilla IMEX through its one-step block form, for cross-checking the half-step path.

    Solves ``P+ x^{n+1} = P- x^n + tau/2 (g^n + g^{n+1}) + tau^2/4 [d; -(B + gamma^{n+1}) d]``
    with ``d = f^n - f^{n+1}``, eliminating ``u^{n+1}`` through ``Q(gamma^{n+1})``.
    The implicit load ``f^{n+1}`` is taken at the half-step path's ``u^{n+1}``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    cache = cache or OperatorCache(system)
    half, _ = step_vanilla_imex(system, state, tau, cache, tol)
    M, A, B = system.M, system.A, system.B
    t0, u, v = state.t, state.u, state.v
    t1 = t0 + tau
    g0 = gamma_eval(system.gamma, t0)
    g1 = gamma_eval(system.gamma, t1)
    l0 = system.load(t0, u)
    l1 = system.load(t1, half.u)
    d = solve(cache.mass, l0 - l1, tol)

    r_u = u + 0.5 * tau * v + 0.25 * tau**2 * d
    r_v = (
        M @ v
        - 0.5 * tau * (A @ u + B @ v + g0 * (M @ v))
        + 0.5 * tau * (l0 + l1)
        - 0.25 * tau**2 * (B @ d + g1 * (M @ d))
    )
    q = combine(M, A, B, 1.0 + 0.5 * tau * g1, 0.25 * tau**2, 0.5 * tau)
    v1 = solve(q, r_v - 0.5 * tau * (A @ r_u), tol)
    u1 = r_u + 0.5 * tau * v1
    return State(t1, u1, v1)


_STEPPERS = {
    Scheme.CN: step_cn,
    Scheme.IMEX: step_vanilla_imex,
    Scheme.RIMEX: step_revised_imex,
    Scheme.RK4: step_rk4,
}


def make_stepper(system, scheme, tol=DEFAULT_TOL):
    """Bind a scheme to a system with a shared operator cache; returns ``step(state, tau)``."""
    scheme = scheme if isinstance(scheme, SchemeKind) else SchemeKind(scheme)
    cache = OperatorCache(system)
    fn = _STEPPERS[scheme.tag]
    if scheme.tag is Scheme.CN:
        return lambda state, tau: fn(system, state, tau, cache, tol, scheme.max_iters, scheme.tol)
    return lambda state, tau: fn(system, state, tau, cache, tol)


def step_count(t0, t_end, tau, rel=1e-9):
    """Number of full steps and the length of a truncated final step (0 if none)."""
    ratio = (t_end - t0) / tau
    n = round(ratio)
    if abs(ratio - n) <= rel * max(1.0, abs(ratio)):
        return int(n), 0.0
    n = math.floor(ratio)
    return int(n), (t_end - t0) - n * tau


def integrate(system, scheme, state0, tau, t_end, observer: Optional[Callable] = None, tol=DEFAULT_TOL):
    """Advance ``state0`` to ``t_end`` with fixed steps of size ``tau``.

    When ``(t_end - t0)/tau`` is not an integer (to 1e-9 relative) a shorter
    final step lands on ``t_end``.  ``observer(state, report)`` is called after
    every step.  Returns the final state and the summed :class:`StepReport`.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if t_end < state0.t:
        raise ValueError("t_end precedes the initial time")
    step = make_stepper(system, scheme, tol)
    n, last = step_count(state0.t, t_end, tau)
    taus = [tau] * n + ([last] if last > 0 else [])
    state = state0
    total = StepReport()
    for k, h in enumerate(taus):
        try:
            state, rep = step(state, h)
        except (RuntimeError, ValueError, ArithmeticError) as exc:
            raise IntegrationError(f"step {k} from t={state.t:g} failed: {exc}", k, state, total, exc) from exc
        total = total + rep
        if observer is not None:
            observer(state, rep)
    return state, total


def discrete_energy(system, state):
    """``(v'Mv + u'Au) / 2``."""
    return 0.5 * float(state.v @ (system.M @ state.v) + state.u @ (system.A @ state.u))
