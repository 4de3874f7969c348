"""P1 finite elements: the 1D Dirichlet problem and the bulk-surface disc problem.

The kinetic-boundary space identifies the surface trace with the bulk values
at boundary vertices, so each vertex carries one unknown and boundary vertices
collect both bulk and surface contributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .sparse import DimensionError, SparseMatrix, read_matrix_market, write_matrix_market
from .system import DampingCoefficient, SemidiscreteSystem


class MeshError(ValueError):
    pass


# -- meshes ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mesh1D:
    nodes: np.ndarray
    n_elements: int

    @property
    def h(self):
        return float(np.max(np.diff(self.nodes)))

    @property
    def interior(self):
        return np.arange(1, self.n_elements)


def build_interval_mesh(n_elements):
    if n_elements < 2:
        raise MeshError("need at least 2 elements")
    return Mesh1D(np.linspace(0.0, 1.0, n_elements + 1), int(n_elements))


@dataclass(frozen=True)
class DiscMesh:
    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    boundary_edges: np.ndarray  # (E_b, 2), counterclockwise polyline
    on_boundary: np.ndarray  # (V,) bool
    level: int = 0

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def edges(self):
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @property
    def h(self):
        e = self.edges
        return float(np.max(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self):
        return float(self.signed_areas().sum())

    def perimeter(self):
        b = self.boundary_edges
        return float(np.linalg.norm(self.vertices[b[:, 1]] - self.vertices[b[:, 0]], axis=1).sum())

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges) + len(self.triangles)

    def validate(self):
        if np.any(self.signed_areas() <= 0):
            raise MeshError("triangle with non-positive signed area")
        r = np.linalg.norm(self.vertices[self.on_boundary], axis=1)
        if np.any(np.abs(r - 1.0) > 1e-14):
            raise MeshError("boundary vertex off the unit circle")
        if self.euler_characteristic() != 1:
            raise MeshError("triangulation is not a disc (V - E + T != 1)")
        return self


def _ring(k, n_rings):
    n = 6 * k
    theta = 2.0 * np.pi * np.arange(n) / n
    if k == n_rings:
        return np.column_stack([np.cos(theta), np.sin(theta)])
    r = k / n_rings
    return r * np.column_stack([np.cos(theta), np.sin(theta)])


def build_disc_mesh(level):
    """Concentric-ring triangulation of the unit disc.

    Level ``l`` has ``R = 2**(l+1)`` rings; ring ``k`` holds ``6k`` equally
    spaced vertices at radius ``k/R``, the last ring sitting on the circle.
    Neighbouring rings are stitched by merging their angular orderings.
    """
    if level < 0:
        raise MeshError("level must be nonnegative")
    n_rings = 2 ** (level + 1)
    verts = [np.zeros((1, 2))]
    starts = [0]
    offset = 1
    for k in range(1, n_rings + 1):
        starts.append(offset)
        verts.append(_ring(k, n_rings))
        offset += 6 * k
    vertices = np.vstack(verts)

    tris = []
    outer0 = starts[1]
    for j in range(6):
        tris.append((0, outer0 + j, outer0 + (j + 1) % 6))
    for k in range(2, n_rings + 1):
        ni, no = 6 * (k - 1), 6 * k
        si, so = starts[k - 1], starts[k]
        i = j = 0
        while i < ni or j < no:
            # angle of the next vertex on each ring, in units of a full turn
            ai = (i + 1) / ni
            ao = (j + 1) / no
            if j < no and (i == ni or ao <= ai):
                tris.append((si + i % ni, so + j, so + (j + 1) % no))
                j += 1
            else:
                tris.append((si + i, so + j % no, si + (i + 1) % ni))
                i += 1
    triangles = np.array(tris, dtype=np.int64)

    nb = 6 * n_rings
    sb = starts[n_rings]
    boundary_edges = np.column_stack([sb + np.arange(nb), sb + (np.arange(nb) + 1) % nb])
    on_boundary = np.zeros(len(vertices), dtype=bool)
    on_boundary[sb:] = True
    return DiscMesh(vertices, triangles, boundary_edges, on_boundary, level).validate()


# -- element kernels ------------------------------------------------------------------


def _triangle_data(vertices, triangles):
    p = vertices[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    # gradients of the three barycentric hats, shape (T, 3, 2)
    grads = np.empty((len(triangles), 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        e = p[:, c] - p[:, b]
        grads[:, a, 0] = -e[:, 1] / (2 * area)
        grads[:, a, 1] = e[:, 0] / (2 * area)
    return area, grads


def _scatter(elements, local, n):
    k = elements.shape[1]
    rows = np.repeat(elements, k, axis=1).ravel()
    cols = np.tile(elements, (1, k)).ravel()
    return rows, cols, local.ravel(), (n, n)


def bulk_matrices(vertices, triangles, beta=(0.0, 0.0)):
    """P1 mass, stiffness and advection ``int (beta . grad phi_j) phi_i`` on triangles."""
    n = len(vertices)
    area, grads = _triangle_data(vertices, triangles)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass = area[:, None, None] * ref
    stiff = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    bdotg = grads @ np.asarray(beta, dtype=float)  # (T, 3)
    adv = (area / 3.0)[:, None, None] * np.broadcast_to(bdotg[:, None, :], (len(triangles), 3, 3))
    M = SparseMatrix.from_coo(*_scatter(triangles, mass, n), symmetric=True)
    K = SparseMatrix.from_coo(*_scatter(triangles, stiff, n), symmetric=True)
    C = SparseMatrix.from_coo(*_scatter(triangles, adv, n), symmetric=not np.any(beta))
    return M, K, C


def polyline_matrices(points, edges, n):
    """P1 mass, stiffness and arc-derivative matrices along a polyline.

    Arc lengths are chord lengths.  Edges are oriented, and the derivative
    matrix is ``int phi_i d/ds phi_j`` along that orientation.
    """
    edges = np.asarray(edges)
    ell = np.linalg.norm(points[edges[:, 1]] - points[edges[:, 0]], axis=1)
    mass = ell[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)
    stiff = (1.0 / ell)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    deriv = np.broadcast_to(np.array([[-0.5, 0.5], [-0.5, 0.5]]), (len(edges), 2, 2))
    M = SparseMatrix.from_coo(*_scatter(edges, mass, n), symmetric=True)
    K = SparseMatrix.from_coo(*_scatter(edges, stiff, n), symmetric=True)
    D = SparseMatrix.from_coo(*_scatter(edges, deriv, n))
    return M, K, D


def regular_polygon(n):
    """Closed regular ``n``-gon inscribed in the unit circle, as (points, edges)."""
    theta = 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    edges = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return pts, edges


# -- assembled problems ---------------------------------------------------------------


@dataclass(frozen=True)
class KineticCoefficients:
    alpha_omega: float = 0.0
    beta_omega: tuple = (0.0, 0.0)
    c_omega: float = 1.0
    mu: float = 1.0
    alpha_gamma: float = 0.0
    beta_gamma: float = 0.0
    c_gamma_surf: float = 1.0

    def __post_init__(self):
        if self.c_omega <= 0:
            raise ValueError("c_omega must be positive")
        if self.c_gamma_surf < 0:
            raise ValueError("c_gamma_surf must be nonnegative")
        if self.mu <= 0:
            raise ValueError("mu must be positive")


@dataclass(frozen=True)
class FEMatrices:
    """Assembled operators plus the pieces needed for loads and norms.

    ``mass_surf`` is the unweighted boundary mass; ``M`` already contains
    ``mu * mass_surf``.
    """

    M: SparseMatrix
    A: SparseMatrix
    B: SparseMatrix
    mass_bulk: SparseMatrix
    mass_surf: Optional[SparseMatrix]
    coords: np.ndarray
    mu: float = 1.0
    mesh: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.M.n_rows

    def system(self, gamma=None, load=None):
        kw = {}
        if gamma is not None:
            kw["gamma"] = gamma
        if load is not None:
            kw["load"] = load
        return SemidiscreteSystem(self.M, self.A, self.B, **kw)


def assemble_dirichlet_1d(mesh, c_omega=1.0):
    """Interior-node P1 mass and ``c_omega``-scaled stiffness on [0, 1]; ``B = 0``."""
    n = len(mesh.nodes)
    elems = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    pts = np.column_stack([mesh.nodes, np.zeros(n)])
    M, K, _ = polyline_matrices(pts, elems, n)
    keep = mesh.interior
    Mi = SparseMatrix(M.csr[keep][:, keep], symmetric=True)
    Ai = SparseMatrix(c_omega * K.csr[keep][:, keep], symmetric=True)
    return FEMatrices(Mi, Ai, SparseMatrix.zeros(len(keep)), Mi, None, mesh.nodes[keep][:, None], 1.0, mesh)


def assemble_kinetic_bc(mesh, coeffs=KineticCoefficients()):
    """Bulk-surface P1 matrices for the wave equation with kinetic boundary condition."""
    n = mesh.n_vertices
    Mb, Kb, Cb = bulk_matrices(mesh.vertices, mesh.triangles, coeffs.beta_omega)
    Ms, Ks, Ds = polyline_matrices(mesh.vertices, mesh.boundary_edges, n)
    M = SparseMatrix(Mb.csr + coeffs.mu * Ms.csr, symmetric=True)
    A = SparseMatrix(coeffs.c_omega * Kb.csr + coeffs.c_gamma_surf * Ks.csr, symmetric=True)
    b_csr = (
        coeffs.alpha_omega * Mb.csr
        + Cb.csr
        + coeffs.alpha_gamma * Ms.csr
        + coeffs.beta_gamma * Ds.csr
    )
    has_b = coeffs.alpha_omega or coeffs.alpha_gamma or coeffs.beta_gamma or any(coeffs.beta_omega)
    if has_b:
        B = SparseMatrix(b_csr, symmetric=not (coeffs.beta_gamma or any(coeffs.beta_omega)))
    else:
        B = SparseMatrix.zeros(n)
    return FEMatrices(M, A, B, Mb, Ms, mesh.vertices, coeffs.mu, mesh)


# -- nodal fields and norms -----------------------------------------------------------


def interpolate(coords, fn, t):
    """Nodal values ``fn(t, x)`` with ``x`` the (n, d) coordinate array."""
    coords = getattr(coords, "coords", coords)
    try:
        vals = np.asarray(fn(t, coords), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != (len(coords),):
        vals = np.array([fn(t, x) for x in coords], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated function is not finite at every node")
    return vals


def _quad(m, e):
    if e.shape != (m.n_cols,):
        raise DimensionError(f"vector of shape {e.shape} against matrix {m.shape}")
    return float(e @ (m @ e))


def h_norm(matrices, e):
    q = _quad(matrices.M, np.asarray(e, dtype=float))
    if q < -1e-14:
        raise ValueError(f"negative mass quadratic form {q:.3e}")
    return float(np.sqrt(max(q, 0.0)))


def v_norm(matrices, e, alpha_hat=1.0):
    """``sqrt(e'(A + alpha_hat M)e)``."""
    e = np.asarray(e, dtype=float)
    q = _quad(matrices.A, e) + alpha_hat * _quad(matrices.M, e)
    if q < -1e-14:
        raise ValueError(f"negative energy quadratic form {q:.3e}")
    return float(np.sqrt(max(q, 0.0)))


# -- files ----------------------------------------------------------------------------


def _damping_from_json(block):
    if block is None:
        return DampingCoefficient.zero()
    kind = block.get("kind", "power-law")
    if kind == "constant-zero":
        return DampingCoefficient.zero()
    if kind == "power-law":
        return DampingCoefficient.power_law(block["r1"], block["r2"], block["eta"])
    if kind == "custom-table":
        return DampingCoefficient.from_table(block["times"], block["values"])
    raise ValueError(f"unknown damping kind {kind!r}")


def damping_to_json(gamma):
    if gamma.kind == "constant-zero":
        return {"kind": "constant-zero"}
    if gamma.kind == "power-law":
        return {"kind": "power-law", "r1": gamma.r1, "r2": gamma.r2, "eta": gamma.eta}
    return {"kind": "custom-table", "times": list(gamma.table[0]), "values": list(gamma.table[1])}


@dataclass(frozen=True)
class LoadedSystem:
    system: SemidiscreteSystem
    u0: Optional[np.ndarray]
    v0: Optional[np.ndarray]


def load_system_file(path, check_spd=True):
    """Load a matrix-defined system from a directory holding ``system.json``.

    The manifest names Matrix Market files ``M``, ``A`` and optionally ``B``,
    a ``gamma`` block, and optional ``load``, ``u0``, ``v0`` vectors as JSON lists.
    A constant ``load`` vector is applied independent of ``t`` and ``u``.
    """
    path = Path(path)
    manifest_path = path / "system.json" if path.is_dir() else path
    base = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{manifest_path}:{exc.lineno}: {exc.msg}") from exc

    M = read_matrix_market(base / manifest["M"], symmetric=True)
    A = read_matrix_market(base / manifest["A"], symmetric=True)
    B = read_matrix_market(base / manifest["B"]) if manifest.get("B") else None
    gamma = _damping_from_json(manifest.get("gamma"))

    n = M.n_rows
    vectors = {}
    for key in ("load", "u0", "v0"):
        if manifest.get(key) is not None:
            vec = np.asarray(manifest[key], dtype=float)
            if vec.shape != (n,):
                raise DimensionError(f"{key} has length {vec.size}, expected {n}")
            vectors[key] = vec
    if "load" in vectors:
        fixed = vectors["load"]
        load = lambda t, u: fixed.copy()  # noqa: E731
        system = SemidiscreteSystem(M, A, B, gamma, load)
    else:
        system = SemidiscreteSystem(M, A, B, gamma)
    if check_spd:
        if n <= 2000:
            system.validate()
        elif np.any(M.diagonal() <= 0):
            raise ValueError("mass matrix has a non-positive diagonal entry")
    return LoadedSystem(system, vectors.get("u0"), vectors.get("v0"))


def save_system_dir(directory, M, A, B=None, gamma=None, load=None, u0=None, v0=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_market(M, directory / "M.mtx")
    write_matrix_market(A, directory / "A.mtx")
    manifest = {"M": "M.mtx", "A": "A.mtx"}
    if B is not None:
        write_matrix_market(B, directory / "B.mtx")
        manifest["B"] = "B.mtx"
    manifest["gamma"] = damping_to_json(gamma or DampingCoefficient.zero())
    for key, vec in (("load", load), ("u0", u0), ("v0", v0)):
        if vec is not None:
            manifest[key] = [float(x) for x in vec]
    (directory / "system.json").write_text(json.dumps(manifest, indent=2))
    return directory


def write_mesh_text(mesh, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"boundary_edges {len(mesh.boundary_edges)}\n")
        for a, b in mesh.boundary_edges:
            fh.write(f"{a} {b}\n")
    return path


def write_vtk(mesh, fields, path, title="imexwave snapshot"):
    """Legacy ASCII VTK unstructured grid with nodal scalar ``fields`` (name -> array)."""
    path = Path(path)
    if isinstance(mesh, Mesh1D):
        pts = np.column_stack([mesh.nodes, np.zeros((len(mesh.nodes), 2))])
        cells = np.column_stack([np.arange(mesh.n_elements), np.arange(1, mesh.n_elements + 1)])
        cell_type = 3
    else:
        pts = np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)])
        cells = mesh.triangles
        cell_type = 5
    npts = len(pts)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {npts} double"]
    lines += [f"{float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in pts]
    k = cells.shape[1]
    lines.append(f"CELLS {len(cells)} {len(cells) * (k + 1)}")
    lines += [" ".join([str(k)] + [str(int(i)) for i in c]) for c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(cell_type)] * len(cells)
    lines.append(f"POINT_DATA {npts}")
    for name, vals in fields.items():
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (npts,):
            raise DimensionError(f"field {name!r} has shape {vals.shape}, mesh has {npts} points")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(x)) for x in vals]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_point_data(path):
    """Parse the POINT_DATA scalars of a file written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out = {}
    i = 0
    npts = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINT_DATA"):
            npts = int(line.split()[1])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            start = i + 2
            out[name] = np.array([float(x) for x in tokens[start:start + npts]])
            i = start + npts
            continue
        i += 1
    return out
