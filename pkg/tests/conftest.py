import numpy as np
import pytest

from imexwave.sparse import SparseMatrix
from imexwave.system import DampingCoefficient, SemidiscreteSystem, State


def random_spd(rng, n, shift=1.0):
    q = rng.standard_normal((n, n))
    return q @ q.T / n + shift * np.eye(n)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    q = rng.standard_normal((n, rank))
    return q @ q.T / n


def small_system(seed=0, n=10, gamma=None, load=None, with_b=False):
    rng = np.random.default_rng(seed)
    M = SparseMatrix.from_dense(random_spd(rng, n), symmetric=True)
    A = SparseMatrix.from_dense(random_psd(rng, n), symmetric=True)
    B = None
    if with_b:
        B = SparseMatrix.from_dense(0.1 * rng.standard_normal((n, n)))
    kw = {}
    if gamma is not None:
        kw["gamma"] = gamma
    if load is not None:
        kw["load"] = load
    sys = SemidiscreteSystem(M, A, B, **kw)
    state = State(0.0, rng.standard_normal(n), rng.standard_normal(n))
    return sys, state


def scalar_system(m=1.0, a=0.0, gamma=None, load=None):
    kw = {"gamma": gamma or DampingCoefficient.zero()}
    if load is not None:
        kw["load"] = load
    return SemidiscreteSystem(SparseMatrix.from_dense([[m]], True), SparseMatrix.from_dense([[a]], True), **kw)


def linear_gamma():
    # gamma(t) = t as a power law 1*(0+t)^1; r2 = 0 is fine for t > 0 only, so use a table
    return DampingCoefficient.from_table([0.0, 100.0], [0.0, 100.0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """``criterion(number, title, ok, detail)`` records one acceptance line and asserts it."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" -- {detail}" if detail else "")
        request.config.stash[ACCEPTANCE_KEY].append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0].split("(")[0])):
            terminalreporter.write_line(line)
