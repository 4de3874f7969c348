"""Test problems: the manufactured solution ``sin(2 pi t) x1 x2`` and the bump.

Each problem splits its right-hand side into a nonlinearity ``n(u)`` plus a
``source(t, x)`` that does not depend on ``u``.  Loads are assembled by nodal
evaluation followed by mass weighting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import FEMatrices, KineticCoefficients, interpolate
from .system import DampingCoefficient, State, gamma_eval

TWO_PI = 2.0 * np.pi
FOUR_PI2 = 4.0 * np.pi**2


def abs_square(u):
    return np.abs(u) * u


def cube(u):
    return u**3


def no_nonlinearity(u):
    return np.zeros_like(u)


def _x1x2(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] * x[..., 1]


def example1_exact(t, x):
    return np.sin(TWO_PI * t) * _x1x2(x)


def example1_velocity(t, x):
    return TWO_PI * np.cos(TWO_PI * t) * _x1x2(x)


def example1_acceleration(t, x):
    return -FOUR_PI2 * np.sin(TWO_PI * t) * _x1x2(x)


def _require_circle(x):
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(np.abs(r - 1.0) > 1e-12):
        raise ValueError("boundary forcing requested off the unit circle")


def example1_forcing_derived(gamma, t, x, location="bulk", coeffs=KineticCoefficients(), n1=abs_square, n2=cube):
    """Source part of the manufactured right-hand side (the full load is ``n(u) + source``).

    Bulk: ``u'' + gamma u' - c_omega lap u - n1(u)`` at the exact solution, where
    ``x1 x2`` is harmonic.  Boundary: ``u'' + gamma u' + (-c_surf lap_s u + c_omega d_nu u)/mu - n2(u)``
    with ``lap_s(x1 x2) = -4 x1 x2`` and ``d_nu(x1 x2) = 2 x1 x2`` on the unit circle.
    """
    g = gamma_eval(gamma, t)
    p = _x1x2(x)
    s, c = np.sin(TWO_PI * t), np.cos(TWO_PI * t)
    u = s * p
    inertia_damping = -FOUR_PI2 * s * p + TWO_PI * g * c * p
    if location == "bulk":
        return inertia_damping - n1(u)
    if location == "boundary":
        _require_circle(x)
        elastic = (4.0 * coeffs.c_gamma_surf + 2.0 * coeffs.c_omega) * u / coeffs.mu
        return inertia_damping + elastic - n2(u)
    raise ValueError(f"unknown location {location!r}")


def example1_forcing_printed(gamma, t, x, location="bulk"):
    """The right-hand sides exactly as printed for the first example, minus their ``|u|u`` / ``u^3`` parts.

    The boundary formula carries ``sin`` in the damping term and no surface or
    normal-derivative contribution, so it does not reproduce the exact solution.
    """
    g = gamma_eval(gamma, t)
    p = _x1x2(x)
    s, c = np.sin(TWO_PI * t), np.cos(TWO_PI * t)
    if location == "bulk":
        return -(FOUR_PI2 + np.abs(s * p)) * s * p + TWO_PI * g * c * p
    if location == "boundary":
        return -FOUR_PI2 * s * p + TWO_PI * g * s * p - (s * p) ** 3
    raise ValueError(f"unknown location {location!r}")


@dataclass(frozen=True)
class ManufacturedProblem:
    """Example 1 on the disc with kinetic boundary condition."""

    gamma: DampingCoefficient = field(default_factory=DampingCoefficient.zero)
    forcing: str = "derived"
    coeffs: KineticCoefficients = field(default_factory=KineticCoefficients)
    n1: object = abs_square
    n2: object = cube

    def __post_init__(self):
        if self.forcing not in ("derived", "printed"):
            raise ValueError("forcing must be 'derived' or 'printed'")

    exact = staticmethod(example1_exact)
    velocity = staticmethod(example1_velocity)
    acceleration = staticmethod(example1_acceleration)

    def bulk_source(self, t, x):
        if self.forcing == "printed":
            return example1_forcing_printed(self.gamma, t, x, "bulk")
        return example1_forcing_derived(self.gamma, t, x, "bulk", self.coeffs, self.n1, self.n2)

    def surface_source(self, t, x):
        if self.forcing == "printed":
            return example1_forcing_printed(self.gamma, t, x, "boundary")
        return example1_forcing_derived(self.gamma, t, x, "boundary", self.coeffs, self.n1, self.n2)

    def initial_state(self, fe, t0=0.0):
        return State(t0, interpolate(fe.coords, self.exact, t0), interpolate(fe.coords, self.velocity, t0))

    def exact_state(self, fe, t):
        return State(t, interpolate(fe.coords, self.exact, t), interpolate(fe.coords, self.velocity, t))


@dataclass(frozen=True)
class IntervalManufacturedProblem:
    """1D Dirichlet analogue: ``u = sin(2 pi t) sin(pi x)`` with ``n1 = |u|u``."""

    gamma: DampingCoefficient = field(default_factory=DampingCoefficient.zero)
    c_omega: float = 1.0
    n1: object = abs_square
    n2 = None

    @staticmethod
    def exact(t, x):
        return np.sin(TWO_PI * t) * np.sin(np.pi * np.asarray(x)[..., 0])

    @staticmethod
    def velocity(t, x):
        return TWO_PI * np.cos(TWO_PI * t) * np.sin(np.pi * np.asarray(x)[..., 0])

    @staticmethod
    def acceleration(t, x):
        return -FOUR_PI2 * np.sin(TWO_PI * t) * np.sin(np.pi * np.asarray(x)[..., 0])

    def bulk_source(self, t, x):
        g = gamma_eval(self.gamma, t)
        phi = np.sin(np.pi * np.asarray(x)[..., 0])
        s, c = np.sin(TWO_PI * t), np.cos(TWO_PI * t)
        u = s * phi
        return (-FOUR_PI2 + self.c_omega * np.pi**2) * u + TWO_PI * g * c * phi - self.n1(u)

    surface_source = None

    initial_state = ManufacturedProblem.initial_state
    exact_state = ManufacturedProblem.exact_state


def assemble_load(problem, fe: FEMatrices):
    """Return ``L(t, u) = M_bulk [n1(u) + f1] + mu M_surf [n2(u) + f2]`` with nodal ``f``.

    The surface source is only evaluated at boundary vertices.
    """
    coords = fe.coords
    n = fe.n
    has_surface = fe.mass_surf is not None and getattr(problem, "surface_source", None) is not None
    if has_surface:
        bidx = np.flatnonzero(fe.mesh.on_boundary)
        bcoords = coords[bidx]
    n1 = problem.n1 or no_nonlinearity
    n2 = getattr(problem, "n2", None) or no_nonlinearity

    def load(t, u):
        if u.shape != (n,):
            raise ValueError(f"load called with u of shape {u.shape}, expected {(n,)}")
        bulk = n1(u)
        if problem.bulk_source is not None:
            bulk = bulk + problem.bulk_source(t, coords)
        out = fe.mass_bulk @ bulk
        if fe.mass_surf is not None:
            surf = n2(u)
            if has_surface:
                surf = surf.copy()
                surf[bidx] += problem.surface_source(t, bcoords)
            out += fe.mu * (fe.mass_surf @ surf)
        return out

    return load


def bump(t, x):
    """``cos^2(pi |x|)`` inside ``|x| <= 0.5``, zero outside."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return np.where(r <= 0.5, np.cos(np.pi * r) ** 2, 0.0)


@dataclass(frozen=True)
class BumpProblem:
    """Example 2: bump initial displacement at rest, loads ``|u|u`` in the bulk, ``u^3`` on the boundary."""

    gamma: DampingCoefficient = field(default_factory=DampingCoefficient.zero)
    n1: object = abs_square
    n2: object = cube
    bulk_source = None
    surface_source = None
    center: tuple = (0.0, 0.0)

    def initial_state(self, fe, t0=0.0):
        c = np.asarray(self.center)[: fe.coords.shape[1]]
        u0 = interpolate(fe.coords, lambda t, x: bump(t, x - c), t0)
        return State(t0, u0, np.zeros_like(u0))


def example2_setup(fe, gamma=None, center=(0.0, 0.0)):
    problem = BumpProblem(gamma or DampingCoefficient.zero(), center=center)
    return problem.initial_state(fe), assemble_load(problem, fe)
