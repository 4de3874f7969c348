import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from imexwave.sparse import DimensionError, SparseMatrix, solve, ShiftedOperator
from imexwave.system import (
    DampingCoefficient,
    DampingDomainError,
    SemidiscreteSystem,
    State,
    StepSizeConstants,
    check_step_size,
    gamma_eval,
    residual,
)

from conftest import small_system


@pytest.mark.parametrize(
    "r1, r2, eta, t, expected",
    [(1, 1, -2, 0, 1.0), (1, 1, -1, 1, 0.5), (1, 1, 2, 2, 9.0)],
)
def test_power_law_values(r1, r2, eta, t, expected):
    assert gamma_eval(DampingCoefficient.power_law(r1, r2, eta), t) == expected


@given(st.floats(0, 1e6, allow_nan=False))
def test_zero_damping_is_bitwise_zero(t):
    g = gamma_eval(DampingCoefficient.zero(), t)
    assert g == 0.0 and math.copysign(1.0, g) == 1.0


def test_table_interpolates_linearly():
    g = DampingCoefficient.from_table([0.0, 1.0, 3.0], [2.0, 4.0, 0.0])
    assert g(0.5) == 3.0
    assert g(2.0) == 2.0


def test_domain_errors():
    with pytest.raises(DampingDomainError):
        gamma_eval(DampingCoefficient.power_law(1, 1, -2), -0.1)
    with pytest.raises(DampingDomainError):
        gamma_eval(DampingCoefficient.power_law(1, -2, -1), 1.0)


def test_step_size_bare_tau():
    c = check_step_size(0.5, StepSizeConstants())
    assert c.max_term == 0.5 and c.admissible
    assert not check_step_size(2.0, StepSizeConstants(1, 1, 1, 1, 1)).admissible


def test_step_size_hand_evaluated():
    tau = 0.1
    terms = [
        tau / 2 * (1 / 2 + 1),  # 0.075
        tau**2 / 2 + tau,  # 0.105
        tau * ((1 + math.sqrt(3)) + 1 + 3 * math.sqrt(2) / 4),  # 0.47927...
        tau,
    ]
    c = check_step_size(tau, StepSizeConstants(1, 1, 1, 1, 1))
    assert c.max_term == pytest.approx(max(terms), rel=1e-15)
    assert c.max_term == pytest.approx(0.47927109793486984, rel=1e-15)
    assert c.admissible


def test_step_size_rejects_negative_constants():
    with pytest.raises(ValueError):
        StepSizeConstants(alpha_hat=-1)


consts = st.builds(
    StepSizeConstants, *[st.floats(0, 10, allow_nan=False) for _ in range(5)]
)


@given(consts, st.floats(1e-6, 5), st.floats(0.01, 1))
def test_step_size_monotone(c, tau, frac):
    if check_step_size(tau, c).admissible:
        assert check_step_size(tau * frac, c).admissible


def test_residual_zero_state():
    sys, _ = small_system(n=4)
    z = np.zeros(4)
    assert np.array_equal(residual(sys, 0.0, z, z, z), z)


def test_residual_roundtrip_through_solver():
    sys, st0 = small_system(n=10, gamma=DampingCoefficient.power_law(1, 1, -1), with_b=True)
    t = 0.3
    u, v = st0.u, st0.v
    rhs = sys.load(t, u) - sys.B @ v - sys.gamma(t) * (sys.M @ v) - sys.A @ u
    a = solve(ShiftedOperator.from_matrix(sys.M), rhs, tol=1e-13)
    assert np.linalg.norm(residual(sys, t, u, v, a)) <= 1e-12 * np.linalg.norm(rhs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_residual_superposition_against_dense(seed, a1, a2):
    rng = np.random.default_rng(seed)
    n = 5
    L = rng.standard_normal((n, n))
    sys, _ = small_system(seed, n=n, gamma=DampingCoefficient.power_law(1, 1, -2), load=lambda t, u: L @ u, with_b=True)
    x1, x2 = rng.standard_normal((2, 3, n))
    t = 0.7
    r = lambda x: residual(sys, t, *x)  # noqa: E731
    combo = a1 * x1 + a2 * x2
    assert np.allclose(r(combo), a1 * r(x1) + a2 * r(x2), atol=1e-11)
    Md, Bd, Ad = sys.M.to_dense(), sys.B.to_dense(), sys.A.to_dense()
    g = sys.gamma(t)
    dense = Md @ x1[2] + Bd @ x1[1] + g * Md @ x1[1] + Ad @ x1[0] - L @ x1[0]
    assert np.allclose(r(x1), dense, atol=1e-12)


def test_residual_dimension_check():
    sys, _ = small_system(n=4)
    with pytest.raises(DimensionError):
        residual(sys, 0.0, np.zeros(3), np.zeros(4), np.zeros(4))


def test_system_rejects_unflagged_mass():
    m = SparseMatrix.from_dense(np.eye(2))
    with pytest.raises(ValueError):
        SemidiscreteSystem(m, SparseMatrix.identity(2))


def test_system_validate_catches_indefinite_mass():
    bad = SparseMatrix.from_dense([[1.0, 2.0], [2.0, 1.0]], symmetric=True)
    with pytest.raises(ValueError):
        SemidiscreteSystem(bad, SparseMatrix.identity(2)).validate()


def test_state_shape_check():
    with pytest.raises(DimensionError):
        State(0.0, np.zeros(3), np.zeros(2))
