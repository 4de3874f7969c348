"""Convergence studies, runtime comparisons, stability probes and their output files."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .fem import (
    assemble_dirichlet_1d,
    assemble_kinetic_bc,
    build_disc_mesh,
    build_interval_mesh,
    h_norm,
    load_system_file,
    v_norm,
    write_vtk,
)
from .integrators import BlowUpError, IntegrationError, Scheme, SchemeKind, integrate, step_count
from .problems import (
    BumpProblem,
    IntervalManufacturedProblem,
    ManufacturedProblem,
    assemble_load,
)
from .system import DampingCoefficient, State


@dataclass
class RunConfig:
    problem: str = "example1"
    disc: str = "disc:3"
    scheme: str = "rimex"
    tau: float = 0.1
    tau_list: Optional[list] = None
    t_end: float = 0.8
    gamma: Optional[tuple] = None  # (r1, r2, eta); None means gamma == 0
    forcing: str = "derived"
    reference: str = "refined:16"
    out: str = "out"
    solver_tol: float = 1e-10
    cn_max_iters: int = 50
    cn_tol: float = 1e-12

    def __post_init__(self):
        if self.gamma is not None:
            self.gamma = tuple(float(x) for x in self.gamma)
            if len(self.gamma) != 3:
                raise ValueError("gamma takes three numbers r1, r2, eta")
        if self.tau_list is not None:
            self.tau_list = [float(x) for x in self.tau_list]
        self.reference_mode()
        self.discretization()

    @classmethod
    def from_json(cls, path):
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **kw):
        data = asdict(self)
        data.update(kw)
        return RunConfig(**data)

    @property
    def damping(self):
        if self.gamma is None:
            return DampingCoefficient.zero()
        return DampingCoefficient.power_law(*self.gamma)

    @property
    def scheme_kind(self):
        return SchemeKind(Scheme.parse(self.scheme), self.cn_max_iters, self.cn_tol)

    def reference_mode(self):
        """``("exact", None)`` or ``("refined", factor)``."""
        if self.reference == "exact":
            return "exact", None
        kind, _, arg = self.reference.partition(":")
        if kind != "refined":
            raise ValueError(f"reference must be 'exact' or 'refined:<factor>', got {self.reference!r}")
        factor = int(arg) if arg else 16
        if factor < 8 or factor & (factor - 1):
            raise ValueError("refinement factor must be a power of two and at least 8")
        return "refined", factor

    def discretization(self):
        kind, _, arg = self.disc.partition(":")
        if kind not in ("interval", "disc") or not arg:
            raise ValueError(f"disc must be 'interval:<n>' or 'disc:<level>', got {self.disc!r}")
        return kind, int(arg)


@dataclass
class Setup:
    system: object
    state0: State
    norms: object
    exact: Optional[object] = None  # t -> State
    mesh: object = None
    description: dict = field(default_factory=dict)


def build_setup(config):
    """Assemble the system, initial state and (if available) exact solution for ``config``."""
    gamma = config.damping
    if config.problem.startswith("matrix:"):
        loaded = load_system_file(config.problem.split(":", 1)[1])
        system = loaded.system
        n = system.dim
        u0 = loaded.u0 if loaded.u0 is not None else np.zeros(n)
        v0 = loaded.v0 if loaded.v0 is not None else np.zeros(n)
        if config.gamma is not None:
            system = system.with_gamma(gamma)
        desc = {"problem": config.problem, "dofs": n, "gamma": system.gamma.describe()}
        return Setup(system, State(0.0, u0, v0), system, None, None, desc)

    kind, size = config.discretization()
    if kind == "disc":
        mesh = build_disc_mesh(size)
        fe = assemble_kinetic_bc(mesh)
    else:
        mesh = build_interval_mesh(size)
        fe = assemble_dirichlet_1d(mesh)

    if config.problem == "example1":
        if kind == "disc":
            problem = ManufacturedProblem(gamma, config.forcing)
        else:
            problem = IntervalManufacturedProblem(gamma)
        exact = lambda t: problem.exact_state(fe, t)  # noqa: E731
    elif config.problem == "example2":
        center = (0.0, 0.0) if kind == "disc" else (0.5,)
        problem = BumpProblem(gamma, center=center)
        exact = None
    else:
        raise ValueError(f"unknown problem {config.problem!r}")
    system = fe.system(gamma, assemble_load(problem, fe))
    desc = {
        "problem": config.problem,
        "disc": config.disc,
        "h": mesh.h,
        "dofs": fe.n,
        "gamma": gamma.describe(),
        "forcing": config.forcing if config.problem == "example1" else "none",
    }
    return Setup(system, problem.initial_state(fe), fe, exact, mesh, desc)


def compute_error(norms, state, reference):
    """``||u - u_ref||_V + ||v - v_ref||_H``."""
    if state.u.shape != reference.u.shape:
        raise ValueError(f"state of size {state.u.size} against reference of size {reference.u.size}")
    return v_norm(norms, state.u - reference.u) + h_norm(norms, state.v - reference.v)


# -- convergence ----------------------------------------------------------------------


@dataclass
class StudyRow:
    tau: float
    error: float
    observed_order: Optional[float]
    wall_time: float
    linear_solves: int
    status: str = "ok"


CSV_FIELDS = ["tau", "error", "observed_order", "wall_time", "linear_solves", "status"]


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def taus(self):
        return np.array([r.tau for r in self.rows])

    @property
    def errors(self):
        return np.array([r.error for r in self.rows])

    @property
    def orders(self):
        return [r.observed_order for r in self.rows]


def observed_orders(errors):
    """``log2(e_{k-1} / e_k)`` for each row after the first; ``None`` where undefined."""
    out = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev > 0 and cur > 0 and math.isfinite(prev) and math.isfinite(cur):
            out.append(math.log2(prev / cur))
        else:
            out.append(None)
    return out[: len(errors)]


def default_tau_list(config, n=5):
    if config.tau_list:
        return list(config.tau_list)
    return [config.tau * 2.0**-k for k in range(n)]


def _check_tau_list(taus, t0, t_end):
    if not taus:
        raise ValueError("empty tau list")
    for a, b in zip(taus[:-1], taus[1:]):
        if abs(b / a - 0.5) > 1e-12:
            raise ValueError(f"tau list must halve at every entry ({a} -> {b})")
    for tau in taus:
        if step_count(t0, t_end, tau)[1] != 0.0:
            raise ValueError(f"tau={tau} does not divide the interval [{t0}, {t_end}]")


def reference_state(setup, config, tau_min):
    mode, factor = config.reference_mode()
    if mode == "exact":
        if setup.exact is None:
            raise ValueError(f"problem {config.problem!r} has no exact solution; use a refined reference")
        return setup.exact(config.t_end)
    ref, _ = integrate(
        setup.system, config.scheme_kind, setup.state0, tau_min / factor, config.t_end, tol=config.solver_tol
    )
    return ref


def convergence_study(config, tau_list=None, setup=None):
    """Run one integration per step size and tabulate the error at ``t_end``.

    A failing row is marked and the study continues with the remaining sizes.
    """
    setup = setup or build_setup(config)
    taus = list(tau_list) if tau_list is not None else default_tau_list(config)
    _check_tau_list(taus, setup.state0.t, config.t_end)
    ref = reference_state(setup, config, min(taus))
    rows = []
    for tau in taus:
        start = time.perf_counter()
        try:
            state, rep = integrate(
                setup.system, config.scheme_kind, setup.state0, tau, config.t_end, tol=config.solver_tol
            )
        except IntegrationError as exc:
            rows.append(StudyRow(tau, math.nan, None, time.perf_counter() - start, exc.report.linear_solves,
                                 f"failed at step {exc.step_index}: {type(exc.cause).__name__}"))
            continue
        wall = time.perf_counter() - start
        rows.append(StudyRow(tau, compute_error(setup.norms, state, ref), None, wall, rep.linear_solves))
    for row, order in zip(rows, observed_orders([r.error for r in rows])):
        row.observed_order = order
    meta = dict(setup.description)
    meta.update(
        scheme=config.scheme_kind.tag.value,
        reference=config.reference,
        t_end=config.t_end,
        solver_tol=config.solver_tol,
        alpha_hat=1.0,
    )
    return ConvergenceReport(rows, meta)


# -- runtime --------------------------------------------------------------------------


@dataclass
class RuntimeRow:
    scheme: str
    tau: Optional[float]
    error: float
    wall_time: float
    linear_solves: int
    fixed_point_iters: int
    steps: int
    status: str
    unstable_taus: list = field(default_factory=list)

    @property
    def solves_per_step(self):
        return self.linear_solves / self.steps if self.steps else math.nan


def runtime_compare(config, schemes, target_error, max_halvings=6, repeats=1, setup=None):
    """For each scheme, halve ``tau`` from ``config.tau`` until the error at ``t_end`` reaches ``target_error``.

    Cost is the wall time of the integration that first meets the target (the
    fastest of ``repeats`` runs).  With a refined reference, one revised-IMEX
    run at ``tau / 2**max_halvings / factor`` serves every scheme.  An explicit
    blow-up is recorded in ``unstable_taus`` and the search continues.
    """
    setup = setup or build_setup(config)
    taus = [config.tau * 2.0**-k for k in range(max_halvings + 1)]
    _check_tau_list(taus, setup.state0.t, config.t_end)
    mode, _ = config.reference_mode()
    if math.isinf(target_error) and setup.exact is None and mode == "exact":
        raise ValueError("exact reference requested for a problem without one")
    ref = reference_state(setup, config.replace(scheme="rimex"), taus[-1])

    table = []
    for name in schemes:
        kind = SchemeKind(Scheme.parse(name), config.cn_max_iters, config.cn_tol)
        row = RuntimeRow(kind.tag.short, None, math.nan, math.nan, 0, 0, 0, "target not reached")
        for tau in taus:
            best = None
            try:
                for _ in range(max(1, repeats)):
                    start = time.perf_counter()
                    state, rep = integrate(setup.system, kind, setup.state0, tau, config.t_end, tol=config.solver_tol)
                    wall = time.perf_counter() - start
                    best = wall if best is None else min(best, wall)
            except IntegrationError as exc:
                if isinstance(exc.cause, BlowUpError):
                    row.unstable_taus.append(tau)
                    continue
                row.status = f"failed at tau={tau:g}: {exc.cause}"
                break
            err = compute_error(setup.norms, state, ref)
            if not math.isfinite(err) or err > 1e6:
                row.unstable_taus.append(tau)
                continue
            row.tau, row.error, row.wall_time = tau, err, best
            row.linear_solves, row.fixed_point_iters, row.steps = rep.linear_solves, rep.fixed_point_iters, rep.steps
            if err <= target_error:
                row.status = "ok"
                break
        table.append(row)
    return table


# -- stability ------------------------------------------------------------------------


@dataclass
class StabilityRow:
    tau: float
    stable: bool
    blowup_step: Optional[int]
    max_norm: float


class _Diverged(RuntimeError):
    pass


def probe_rk4_stability(config, tau_list, blowup_norm=1e6, setup=None):
    """Run RK4 at each ``tau``; a run is unstable once the state norm exceeds ``blowup_norm``."""
    setup = setup or build_setup(config)
    out = []
    for tau in tau_list:
        peak = [setup.state0.norm()]
        count = [0]

        def watch(state, _rep):
            count[0] += 1
            nrm = state.norm()
            peak[0] = max(peak[0], nrm) if math.isfinite(nrm) else math.inf
            if not math.isfinite(nrm) or nrm > blowup_norm:
                raise _Diverged()

        try:
            integrate(setup.system, SchemeKind(Scheme.RK4), setup.state0, tau, config.t_end, watch, config.solver_tol)
            out.append(StabilityRow(tau, True, None, peak[0]))
        except IntegrationError as exc:
            out.append(StabilityRow(tau, False, exc.step_index, math.inf))
        except _Diverged:
            out.append(StabilityRow(tau, False, count[0] - 1, peak[0]))
    return out


def max_generalized_eigenvalue(system):
    """Largest ``lambda`` with ``A x = lambda M x``; sets the explicit step-size limit."""
    if system.A.is_zero():
        return 0.0
    if system.dim <= 400:
        import scipy.linalg

        return float(scipy.linalg.eigh(system.A.to_dense(), system.M.to_dense(), eigvals_only=True)[-1])
    vals = spla.eigsh(system.A.csr.tocsc(), k=1, M=system.M.csr.tocsc(), which="LM", return_eigenvectors=False)
    return float(vals[0])


# -- output ---------------------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def emit_csv(report, path):
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_FIELDS)
            for r in report.rows:
                w.writerow([_fmt(getattr(r, k)) for k in CSV_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def read_csv(path):
    with Path(path).open(encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_metadata(report, path):
    Path(path).write_text(json.dumps(report.metadata, indent=2, sort_keys=True) + "\n")
    return path


def emit_runtime_csv(table, path):
    cols = ["scheme", "tau", "error", "wall_time", "linear_solves", "fixed_point_iters", "steps", "status"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ["unstable_taus"])
        for r in table:
            w.writerow([_fmt(getattr(r, c)) for c in cols] + [" ".join(repr(t) for t in r.unstable_taus)])
    return path


SVG_W, SVG_H, PAD = 480, 360, 50


def _log_axes(taus, errors):
    lx, ly = np.log10(taus), np.log10(errors)
    x0, x1 = lx.min() - 0.1, lx.max() + 0.1
    y0, y1 = ly.min() - 0.3, ly.max() + 0.3
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1, y1 + 1

    def to_px(tau, err):
        px = PAD + (math.log10(tau) - x0) / (x1 - x0) * (SVG_W - 2 * PAD)
        py = SVG_H - PAD - (math.log10(err) - y0) / (y1 - y0) * (SVG_H - 2 * PAD)
        return px, py

    return to_px


def emit_svg_loglog(report, path, title=None):
    """Log-log error chart with slope-1 and slope-2 guides through the first point."""
    ok = [r for r in report.rows if r.error > 0 and math.isfinite(r.error)]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_W}" height="{SVG_H}">',
        f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD}" width="{SVG_W - 2 * PAD}" height="{SVG_H - 2 * PAD}" fill="none" stroke="black"/>',
    ]
    label = title or f"{report.metadata.get('scheme', '')} gamma={report.metadata.get('gamma', '')}"
    out.append(f'<text x="{SVG_W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{label}</text>')
    out.append(f'<text x="{SVG_W / 2}" y="{SVG_H - 10}" text-anchor="middle" font-size="12">tau</text>')
    out.append(f'<text x="12" y="{SVG_H / 2}" font-size="12" transform="rotate(-90 12 {SVG_H / 2})">error</text>')
    if ok:
        taus = np.array([r.tau for r in ok])
        errs = np.array([r.error for r in ok])
        to_px = _log_axes(taus, errs)
        t_a, t_b = taus.max(), taus.min()
        e_a = errs[np.argmax(taus)]
        for slope, dash in ((1, "6 3"), (2, "2 3")):
            xa, ya = to_px(t_a, e_a)
            xb, yb = to_px(t_b, e_a * (t_b / t_a) ** slope)
            out.append(
                f'<line class="guide-slope{slope}" x1="{xa:.6f}" y1="{ya:.6f}" x2="{xb:.6f}" y2="{yb:.6f}" '
                f'stroke="gray" stroke-dasharray="{dash}"/>'
            )
            out.append(f'<text x="{xb + 4:.2f}" y="{yb:.2f}" font-size="10" fill="gray">order {slope}</text>')
        pts = [to_px(t, e) for t, e in zip(taus, errs)]
        out.append(
            '<polyline class="data" fill="none" stroke="navy" points="'
            + " ".join(f"{x:.6f},{y:.6f}" for x, y in pts)
            + '"/>'
        )
        for (x, y), t, e in zip(pts, taus, errs):
            out.append(f'<circle class="point" cx="{x:.6f}" cy="{y:.6f}" r="3" fill="navy" data-tau="{float(t)!r}" data-error="{float(e)!r}"/>')
        for t in taus:
            x, _ = to_px(t, errs.min())
            out.append(f'<text x="{x:.2f}" y="{SVG_H - PAD + 14}" text-anchor="middle" font-size="9">{t:.3g}</text>')
    out.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc
    return path


def emit_vtk_snapshots(states, mesh, prefix):
    """One legacy-VTK file per state, named ``<prefix>_<k>.vtk``, holding ``u`` and ``v``."""
    paths = []
    for k, st in enumerate(states):
        path = Path(f"{prefix}_{k:03d}.vtk")
        u, v = _full_field(mesh, st.u), _full_field(mesh, st.v)
        paths.append(write_vtk(mesh, {"u": u, "v": v}, path, title=f"t={float(st.t)!r}"))
    return paths


def _full_field(mesh, vals):
    # Dirichlet unknowns live on interior nodes; pad the boundary zeros back in
    if hasattr(mesh, "nodes") and len(vals) == len(mesh.nodes) - 2:
        return np.concatenate([[0.0], vals, [0.0]])
    return vals


def run_snapshots(config, times, setup=None):
    """Integrate once, keeping the states at each requested time (must be step multiples)."""
    setup = setup or build_setup(config)
    times = sorted(times)
    states = []
    state = setup.state0
    if times and times[0] == state.t:
        states.append(state.copy())
        times = times[1:]
    for t in times:
        state, _ = integrate(setup.system, config.scheme_kind, state, config.tau, t, tol=config.solver_tol)
        states.append(state)
    return setup, states
