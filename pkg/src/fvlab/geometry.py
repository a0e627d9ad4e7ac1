"""Primal meshes (1D intervals, 2D Cartesian and perturbed quadrangles),
RT and MAC dual meshes, time grids and regularity parameters.

Meshes are immutable after construction (arrays are marked read-only) and
deterministic for a fixed seed.  Cell face lists follow a fixed local order:
``[left, right]`` in 1D and ``[bottom, right, top, left]`` for quadrangles
(edges of the counter-clockwise vertex loop), so opposite faces sit at local
positions (0, 2) and (1, 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PrimalMesh", "TimeGrid", "DualMeshRT", "DualMeshMAC", "MeshRegularity",
    "build_intervals", "build_cartesian", "build_perturbed_quads",
    "build_tensor", "subdivide_nodes", "build_dual_rt", "build_dual_mac",
    "build_time_grid", "regularity", "check_mesh_identities",
    "MeshConstructionError",
]

# local-face index pairs for quadrangles
QUAD_ADJACENT_PAIRS = ((0, 1), (1, 2), (2, 3), (3, 0))
# opposite pairs with the fixed two-hop via-face used to split their jump
QUAD_OPPOSITE_PAIRS = ((0, 2, 1), (1, 3, 2))


class MeshConstructionError(ValueError):
    pass


class PrimalMesh:
    """Polygonal mesh: cells, deduplicated faces, adjacency and metrics.

    Parameters
    ----------
    vertices : (NV, dim) array
    cell_vertices : (NC, 2) or (NC, 4) int array
        Vertex loops; counter-clockwise in 2D.
    domain : sequence of per-axis (lo, hi) bounds of the meshed box.
    """

    def __init__(self, vertices, cell_vertices, domain, face_normals=None,
                 face_cells=None, face_vertices=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cell_vertices = np.ascontiguousarray(cell_vertices, dtype=np.int64)
        self.dim = self.vertices.shape[1]
        self.domain = tuple((float(a), float(b)) for a, b in domain)
        if self.dim not in (1, 2):
            raise MeshConstructionError(f"dimension must be 1 or 2, got {self.dim}")
        self._build_cells()
        if face_vertices is None:
            self._build_faces()
        else:
            self._adopt_faces(face_vertices, face_cells, face_normals)
        self._finalize()

    # ------------------------------------------------------------------
    def _build_cells(self):
        verts = self.vertices[self.cell_vertices]          # (NC, nv, dim)
        if self.dim == 1:
            a = verts[:, 0, 0]
            b = verts[:, 1, 0]
            if np.any(b <= a):
                raise MeshConstructionError("degenerate 1D cell (b <= a)")
            self.cell_volumes = b - a
            self.cell_diameters = b - a
            self.cell_centroids = (0.5 * (a + b))[:, None]
        else:
            x = verts[:, :, 0]
            y = verts[:, :, 1]
            xn = np.roll(x, -1, axis=1)
            yn = np.roll(y, -1, axis=1)
            cross = x * yn - xn * y
            area2 = cross.sum(axis=1)
            if np.any(area2 <= 0):
                bad = int(np.argmax(area2 <= 0))
                raise MeshConstructionError(
                    f"cell {bad} is not counter-clockwise or degenerate")
            self.cell_volumes = 0.5 * area2
            cx = ((x + xn) * cross).sum(axis=1) / (6.0 * self.cell_volumes)
            cy = ((y + yn) * cross).sum(axis=1) / (6.0 * self.cell_volumes)
            self.cell_centroids = np.stack([cx, cy], axis=1)
            # diameter = largest pairwise vertex distance
            diff = verts[:, :, None, :] - verts[:, None, :, :]
            self.cell_diameters = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))

    def _build_faces(self):
        nv_per_cell = self.cell_vertices.shape[1]
        face_of = {}
        face_vertices = []
        face_cells = []
        n_local = 2 if self.dim == 1 else nv_per_cell
        cell_faces = np.empty((self.n_cells, n_local), dtype=np.int64)
        for c in range(self.n_cells):
            loop = self.cell_vertices[c]
            if self.dim == 1:
                local = [(loop[0],), (loop[1],)]
            else:
                local = [(loop[k], loop[(k + 1) % nv_per_cell]) for k in range(nv_per_cell)]
            for k, fv in enumerate(local):
                key = tuple(sorted(fv))
                fid = face_of.get(key)
                if fid is None:
                    fid = len(face_vertices)
                    face_of[key] = fid
                    face_vertices.append(fv)
                    face_cells.append([c, -1])
                else:
                    if face_cells[fid][1] != -1:
                        raise MeshConstructionError(f"face {fid} shared by >2 cells")
                    face_cells[fid][1] = c
                cell_faces[c, k] = fid
        self.face_vertices = np.asarray(face_vertices, dtype=np.int64)
        self.face_cells = np.asarray(face_cells, dtype=np.int64)
        self.cell_faces = cell_faces
        self._derive_face_geometry()

    def _adopt_faces(self, face_vertices, face_cells, face_normals):
        """Adopt an explicit face table (mesh import); normals kept as given."""
        self.face_vertices = np.ascontiguousarray(face_vertices, dtype=np.int64)
        self.face_cells = np.ascontiguousarray(face_cells, dtype=np.int64)
        nv_per_cell = self.cell_vertices.shape[1]
        n_local = 2 if self.dim == 1 else nv_per_cell
        face_of = {tuple(sorted(fv)): i for i, fv in enumerate(self.face_vertices)}
        cell_faces = np.empty((self.n_cells, n_local), dtype=np.int64)
        for c in range(self.n_cells):
            loop = self.cell_vertices[c]
            if self.dim == 1:
                local = [(loop[0],), (loop[1],)]
            else:
                local = [(loop[k], loop[(k + 1) % nv_per_cell]) for k in range(nv_per_cell)]
            for k, fv in enumerate(local):
                try:
                    cell_faces[c, k] = face_of[tuple(sorted(fv))]
                except KeyError:
                    raise MeshConstructionError(
                        f"cell {c} references missing face {fv}") from None
        self.cell_faces = cell_faces
        self._derive_face_geometry(stored_normals=face_normals)

    def _derive_face_geometry(self, stored_normals=None):
        if self.dim == 1:
            self.face_midpoints = self.vertices[self.face_vertices[:, 0]]
            self.face_measures = np.ones(self.n_faces)
        else:
            va = self.vertices[self.face_vertices[:, 0]]
            vb = self.vertices[self.face_vertices[:, 1]]
            self.face_midpoints = 0.5 * (va + vb)
            self.face_measures = np.sqrt(((vb - va) ** 2).sum(-1))
            if np.any(self.face_measures <= 0):
                raise MeshConstructionError("zero-length face")
        # outward normals per (cell, local face), from the cell's own loop
        n_local = self.cell_faces.shape[1]
        normals = np.empty((self.n_cells, n_local, self.dim))
        if self.dim == 1:
            normals[:, 0, 0] = -1.0
            normals[:, 1, 0] = 1.0
        else:
            loop = self.vertices[self.cell_vertices]       # (NC, 4, 2)
            nxt = np.roll(loop, -1, axis=1)
            edge = nxt - loop                              # CCW edge vectors
            length = np.sqrt((edge ** 2).sum(-1))
            normals[:, :, 0] = edge[:, :, 1] / length
            normals[:, :, 1] = -edge[:, :, 0] / length
        self.cell_face_normals = normals
        if stored_normals is not None:
            # import path: the file's per-face normal (as seen from its first
            # cell) replaces the derived one, so corruption stays observable
            stored = np.ascontiguousarray(stored_normals, dtype=float)
            for f in range(self.n_faces):
                p, q = self.face_cells[f]
                kp = int(np.where(self.cell_faces[p] == f)[0][0])
                normals[p, kp] = stored[f]
                if q >= 0:
                    kq = int(np.where(self.cell_faces[q] == f)[0][0])
                    normals[q, kq] = -stored[f]

    def _finalize(self):
        self.boundary_face_mask = self.face_cells[:, 1] < 0
        self.interior_face_mask = ~self.boundary_face_mask
        has_boundary = np.zeros(self.n_cells, dtype=bool)
        for f in np.nonzero(self.boundary_face_mask)[0]:
            has_boundary[self.face_cells[f, 0]] = True
        self.interior_cell_mask = ~has_boundary
        # canonical per-face normal: the one seen from the first adjacent cell
        normals = np.empty((self.n_faces, self.dim))
        cells = np.arange(self.n_cells)
        for k in range(self.cell_faces.shape[1]):
            fids = self.cell_faces[:, k]
            owner = self.face_cells[fids, 0] == cells
            normals[fids[owner]] = self.cell_face_normals[owner, k]
        self.face_normals = normals
        # local index of each face within its first cell's face list
        loc = np.empty(self.n_faces, dtype=np.int64)
        for k in range(self.cell_faces.shape[1]):
            fids = self.cell_faces[:, k]
            owner = self.face_cells[fids, 0] == cells
            loc[fids[owner]] = k
        self.face_local_in_first = loc
        for arr in (self.vertices, self.cell_vertices, self.cell_volumes,
                    self.cell_diameters, self.cell_centroids, self.face_vertices,
                    self.face_cells, self.cell_faces, self.face_midpoints,
                    self.face_measures, self.cell_face_normals, self.face_normals,
                    self.face_local_in_first, self.boundary_face_mask,
                    self.interior_face_mask, self.interior_cell_mask):
            arr.setflags(write=False)

    # ------------------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.cell_vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_vertices.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def max_faces_per_cell(self) -> int:
        return self.cell_faces.shape[1]

    def delta(self) -> float:
        """Space step: the largest cell diameter."""
        return float(self.cell_diameters.max())

    def domain_measure(self) -> float:
        out = 1.0
        for a, b in self.domain:
            out *= (b - a)
        return out

    def interior_cells(self):
        return np.nonzero(self.interior_cell_mask)[0]

    def local_face_index(self, cell: int, face: int) -> int:
        k = np.where(self.cell_faces[cell] == face)[0]
        if k.size == 0:
            raise KeyError(f"face {face} is not a face of cell {cell}")
        return int(k[0])

    def outward_normal(self, cell: int, face: int):
        return self.cell_face_normals[cell, self.local_face_index(cell, face)]

    def is_rectangular(self) -> bool:
        """True when every cell is an axis-aligned rectangle (exact test)."""
        if self.dim == 1:
            return True
        loop = self.vertices[self.cell_vertices]
        edge = np.roll(loop, -1, axis=1) - loop
        horiz = edge[:, [0, 2], 1] == 0.0
        vert = edge[:, [1, 3], 0] == 0.0
        return bool(horiz.all() and vert.all())


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = t_0 < ... < t_N = T with its regularity ratio theta3."""

    knots: np.ndarray

    def __post_init__(self):
        knots = np.ascontiguousarray(self.knots, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("time grid needs at least two knots")
        if knots[0] != 0.0:
            raise ValueError("time grid must start at t = 0")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("time knots must be strictly increasing")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def n_steps(self) -> int:
        return self.knots.size - 1

    @property
    def steps(self):
        return np.diff(self.knots)

    @property
    def final_time(self) -> float:
        return float(self.knots[-1])

    @property
    def dt_max(self) -> float:
        return float(self.steps.max())

    @property
    def theta3(self) -> float:
        steps = self.steps
        if steps.size < 2:
            return 1.0  # empty max over consecutive pairs: neutral value
        r = steps[1:] / steps[:-1]
        return float(np.max(np.maximum(r, 1.0 / r)))


@dataclass
class DualMeshRT:
    """Diamond duals for the RT layout: measures and connectivity only.

    Half-dual measures are |P|/4 by convention; the dual-cell geometry is
    never constructed.  ``dual_edges`` lists, per cell, the four adjacent
    local-face pairs whose half-diamonds share a dual edge; ``opposite_pairs``
    carries the fixed two-hop via-face used to split opposite-face jumps.
    """

    mesh: PrimalMesh
    half_measures: np.ndarray           # (NC, 4) = |P|/4
    dual_measures: np.ndarray           # (NF,)
    dual_edges_local: tuple = QUAD_ADJACENT_PAIRS
    opposite_pairs_local: tuple = QUAD_OPPOSITE_PAIRS
    jump_multiplicity: np.ndarray = field(default=None)
    jump_weight_constant: int = 3

    def dual_edge_faces(self):
        """Global face-id pairs of all dual edges, shape (NC, 4, 2)."""
        cf = self.mesh.cell_faces
        pairs = np.array(self.dual_edges_local, dtype=np.int64)
        return np.stack([cf[:, pairs[:, 0]], cf[:, pairs[:, 1]]], axis=-1)


@dataclass
class DualMeshMAC:
    """MAC duals: one half-rectangle dual family per coordinate direction."""

    mesh: PrimalMesh
    face_family: np.ndarray             # (NF,) 0 -> normal along e1, 1 -> e2
    dual_measures: np.ndarray           # (NF,) = sum of |P|/2 contributions
    cell_face_delta: np.ndarray         # (NC, 4) sign n_{P,zeta}.e^(i)
    face_delta_first: np.ndarray = None  # (NF,) sign seen from the first cell
    direction_pairs_local: tuple = ((3, 1), (0, 2))   # (left,right), (bottom,top)
    theta: float = np.nan               # quasi-uniformity max(hbar1/h2, hbar2/h1)

    def opposite_face(self, cell: int, face: int) -> int:
        k = self.mesh.local_face_index(cell, face)
        for a, b in self.direction_pairs_local:
            if k == a:
                return int(self.mesh.cell_faces[cell, b])
            if k == b:
                return int(self.mesh.cell_faces[cell, a])
        raise KeyError(f"face {face} has no opposite in cell {cell}")


@dataclass(frozen=True)
class MeshRegularity:
    theta1: float
    theta2: float
    theta3: float
    theta_mac: float = np.nan


# ----------------------------------------------------------------------
# builders

def _graded_nodes(a: float, b: float, n: int, ratio: float):
    """n+1 nodes on [a, b]; consecutive step ratio = `ratio` (1 -> uniform)."""
    if ratio <= 0:
        raise MeshConstructionError(f"grading ratio must be > 0, got {ratio}")
    if ratio == 1.0:
        return np.linspace(a, b, n + 1)
    steps = ratio ** np.arange(n)
    nodes = np.concatenate([[0.0], np.cumsum(steps)])
    nodes *= (b - a) / nodes[-1]
    nodes += a
    nodes[0] = a
    nodes[-1] = b
    return nodes


def build_intervals(n: int, domain=(0.0, 1.0), grading: float = 1.0) -> PrimalMesh:
    """1D mesh of n interval cells on [a, b]."""
    if n < 1:
        raise MeshConstructionError(f"need n >= 1 cells, got {n}")
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise MeshConstructionError("degenerate 1D domain")
    nodes = _graded_nodes(a, b, n, grading)
    cells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return PrimalMesh(nodes[:, None], cells, domain=[(a, b)])


def _cartesian_vertices(nx, ny, domain, grading):
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise MeshConstructionError("degenerate domain box")
    gx, gy = (grading, grading) if np.isscalar(grading) else grading
    xs = _graded_nodes(x0, x1, nx, gx)
    ys = _graded_nodes(y0, y1, ny, gy)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return verts, xs, ys


def _cartesian_cells(nx, ny):
    nid = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i = i.ravel()
    j = j.ravel()
    return np.stack([nid[i, j], nid[i + 1, j], nid[i + 1, j + 1], nid[i, j + 1]],
                    axis=1)


def build_cartesian(nx: int, ny: int, domain=((0.0, 1.0), (0.0, 1.0)),
                    grading=1.0) -> PrimalMesh:
    """Tensor-product quadrangle mesh of nx x ny cells (rectangles)."""
    if nx < 1 or ny < 1:
        raise MeshConstructionError(f"need nx, ny >= 1, got ({nx}, {ny})")
    verts, xs, ys = _cartesian_vertices(nx, ny, domain, grading)
    mesh = PrimalMesh(verts, _cartesian_cells(nx, ny), domain=domain)
    mesh.structured_shape = (nx, ny)
    return mesh


def subdivide_nodes(nodes, factor: int):
    """Split every interval of a 1D node array into `factor` equal parts."""
    nodes = np.asarray(nodes, dtype=float)
    if factor == 1:
        return nodes.copy()
    left = nodes[:-1]
    steps = np.diff(nodes)
    sub = left[:, None] + steps[:, None] * (np.arange(factor) / factor)[None, :]
    return np.concatenate([sub.ravel(), nodes[-1:]])


def build_tensor(xs, ys, domain=None) -> PrimalMesh:
    """Rectangular mesh from explicit per-axis node arrays."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if domain is None:
        domain = ((xs[0], xs[-1]), (ys[0], ys[-1]))
    nx, ny = xs.size - 1, ys.size - 1
    if nx < 1 or ny < 1:
        raise MeshConstructionError("need at least one cell per axis")
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    mesh = PrimalMesh(verts, _cartesian_cells(nx, ny), domain=domain)
    mesh.structured_shape = (nx, ny)
    return mesh


def build_perturbed_quads(nx: int, ny: int, domain=((0.0, 1.0), (0.0, 1.0)),
                          amplitude: float = 0.2, seed: int = 0) -> PrimalMesh:
    """Cartesian mesh with interior vertices shifted by up to amplitude*h.

    amplitude must lie in [0, 0.25) so the quadrangles stay convex; the
    perturbation is deterministic for a fixed seed, and amplitude 0
    reproduces ``build_cartesian`` bitwise.
    """
    if not 0.0 <= amplitude < 0.25:
        raise MeshConstructionError(
            f"amplitude must be in [0, 0.25), got {amplitude}")
    if nx < 1 or ny < 1:
        raise MeshConstructionError(f"need nx, ny >= 1, got ({nx}, {ny})")
    verts, xs, ys = _cartesian_vertices(nx, ny, domain, 1.0)
    if amplitude > 0.0:
        hx = np.min(np.diff(xs))
        hy = np.min(np.diff(ys))
        rng = np.random.default_rng(seed)
        shift = rng.uniform(-1.0, 1.0, size=(nx + 1, ny + 1, 2))
        shift[0, :, :] = 0.0
        shift[-1, :, :] = 0.0
        shift[:, 0, :] = 0.0
        shift[:, -1, :] = 0.0
        verts = verts + amplitude * (shift.reshape(-1, 2) * np.array([hx, hy]))
    cells = _cartesian_cells(nx, ny)
    mesh = PrimalMesh(verts, cells, domain=domain)
    _check_convex_quads(mesh)
    mesh.structured_shape = (nx, ny)
    return mesh


def _check_convex_quads(mesh):
    loop = mesh.vertices[mesh.cell_vertices]
    edge = np.roll(loop, -1, axis=1) - loop
    nxt = np.roll(edge, -1, axis=1)
    cross = edge[:, :, 0] * nxt[:, :, 1] - edge[:, :, 1] * nxt[:, :, 0]
    bad = np.nonzero(~(cross > 0).all(axis=1))[0]
    if bad.size:
        raise MeshConstructionError(f"cell {int(bad[0])} is not strictly convex")


def build_dual_rt(mesh: PrimalMesh) -> DualMeshRT:
    """Diamond dual data for a quadrangle mesh: |D_{P,zeta}| = |P|/4."""
    if mesh.dim != 2 or mesh.cell_vertices.shape[1] != 4:
        raise MeshConstructionError("RT duals need a 2D quadrangle mesh")
    half = 0.25 * mesh.cell_volumes[:, None] * np.ones((1, 4))
    dual = np.zeros(mesh.n_faces)
    for k in range(4):
        np.add.at(dual, mesh.cell_faces[:, k], half[:, k])
    # leg multiplicities of the fixed opposite-pair splitting (per local pair)
    mult = np.ones(4, dtype=np.int64)
    pair_index = {p: i for i, p in enumerate(QUAD_ADJACENT_PAIRS)}
    for a, b, via in QUAD_OPPOSITE_PAIRS:
        for leg in ((a, via), (via, b)):
            key = leg if leg in pair_index else (leg[1], leg[0])
            mult[pair_index[key]] += 1
    half.setflags(write=False)
    dual.setflags(write=False)
    return DualMeshRT(mesh=mesh, half_measures=half, dual_measures=dual,
                      jump_multiplicity=mult,
                      jump_weight_constant=int(mult.max()))


def build_dual_mac(mesh: PrimalMesh) -> DualMeshMAC:
    """MAC dual data; requires an axis-aligned rectangular mesh."""
    if mesh.dim != 2 or not mesh.is_rectangular():
        raise MeshConstructionError("MAC duals need a rectangular tensor mesh")
    normals = mesh.cell_face_normals
    # family from the first adjacent cell's normal: 0 along e1, 1 along e2
    family = np.empty(mesh.n_faces, dtype=np.int64)
    for f in range(mesh.n_faces):
        p = mesh.face_cells[f, 0]
        k = mesh.local_face_index(p, f)
        family[f] = 0 if abs(normals[p, k, 0]) == 1.0 else 1
    dual = np.zeros(mesh.n_faces)
    for k in range(4):
        np.add.at(dual, mesh.cell_faces[:, k], 0.5 * mesh.cell_volumes)
    fam_axis = family[mesh.cell_faces]                      # (NC, 4)
    delta = np.take_along_axis(
        normals, fam_axis[:, :, None], axis=2)[:, :, 0]
    delta_first = np.take_along_axis(
        mesh.face_normals, family[:, None], axis=1)[:, 0]
    hbar = [mesh.face_measures[family == i].max() for i in (0, 1)]
    hlow = [mesh.face_measures[family == i].min() for i in (0, 1)]
    theta = max(hbar[0] / hlow[1], hbar[1] / hlow[0])
    for arr in (family, dual, delta, delta_first):
        arr.setflags(write=False)
    return DualMeshMAC(mesh=mesh, face_family=family, dual_measures=dual,
                       cell_face_delta=delta, face_delta_first=delta_first,
                       theta=float(theta))


def build_time_grid(T: float, N: int, pattern: str = "uniform",
                    ratio: float = 1.0) -> TimeGrid:
    """Time grid on [0, T]: uniform, or steps alternating 1 : ratio."""
    if N < 1:
        raise ValueError(f"need N >= 1 steps, got {N}")
    if T <= 0:
        raise ValueError(f"need T > 0, got {T}")
    if pattern == "uniform":
        knots = np.linspace(0.0, T, N + 1)
    elif pattern == "alternating":
        if ratio <= 0:
            raise ValueError(f"ratio must be > 0, got {ratio}")
        steps = np.where(np.arange(N) % 2 == 0, 1.0, ratio)
        knots = np.concatenate([[0.0], np.cumsum(steps)])
        knots *= T / knots[-1]
        knots[-1] = T
    else:
        raise ValueError(f"unknown time pattern {pattern!r}")
    return TimeGrid(knots)


def regularity(mesh: PrimalMesh, grid: TimeGrid,
               mac: DualMeshMAC | None = None) -> MeshRegularity:
    """theta1 = max diam^2/|P|, theta2 = max adjacent area ratio, theta3."""
    theta1 = float(np.max(mesh.cell_diameters ** 2 / mesh.cell_volumes))
    interior = np.nonzero(mesh.interior_face_mask)[0]
    if interior.size:
        vol_p = mesh.cell_volumes[mesh.face_cells[interior, 0]]
        vol_q = mesh.cell_volumes[mesh.face_cells[interior, 1]]
        theta2 = float(np.max(np.maximum(vol_p / vol_q, vol_q / vol_p)))
    else:
        theta2 = 1.0
    theta_mac = mac.theta if mac is not None else np.nan
    return MeshRegularity(theta1=theta1, theta2=theta2, theta3=grid.theta3,
                          theta_mac=theta_mac)


# ----------------------------------------------------------------------
# invariant checks (also driven by the check-identities command)

def check_mesh_identities(mesh: PrimalMesh, mac: DualMeshMAC | None = None,
                          rt: DualMeshRT | None = None):
    """Return a list of human-readable violations (empty when all hold)."""
    bad = []
    # per-cell closure sum |zeta| n_{P,zeta} = 0
    areas = mesh.face_measures[mesh.cell_faces]             # (NC, nf)
    closure = np.einsum("cf,cfd->cd", areas, mesh.cell_face_normals)
    norm = np.sqrt((closure ** 2).sum(-1))
    tol = 1e-12 * areas.sum(axis=1)
    for c in np.nonzero(norm > tol)[0]:
        bad.append(f"cell {c}: face closure sum violated (|sum|={norm[c]:.3e})")
    # antisymmetric normals across interior faces
    for f in np.nonzero(mesh.interior_face_mask)[0]:
        p, q = mesh.face_cells[f]
        np_ = mesh.outward_normal(p, f)
        nq = mesh.outward_normal(q, f)
        if np.sqrt(((np_ + nq) ** 2).sum()) > 1e-14:
            bad.append(f"face {f}: normals not antisymmetric")
    # stored normals consistent with geometry (catches corrupted imports)
    if mesh.dim == 2:
        loop = mesh.vertices[mesh.cell_vertices]
        edge = np.roll(loop, -1, axis=1) - loop
        length = np.sqrt((edge ** 2).sum(-1))
        geom = np.stack([edge[:, :, 1] / length, -edge[:, :, 0] / length], axis=-1)
        err = np.sqrt(((geom - mesh.cell_face_normals) ** 2).sum(-1))
        for c, k in zip(*np.nonzero(err > 1e-12)):
            bad.append(f"face {mesh.cell_faces[c, k]}: stored normal differs "
                       f"from geometry (cell {c})")
    # measures positive, domain covered
    if np.any(mesh.cell_volumes <= 0):
        bad.append("non-positive cell measure")
    total = mesh.cell_volumes.sum()
    if abs(total - mesh.domain_measure()) > 1e-12 * mesh.domain_measure():
        bad.append(f"cell measures sum to {total!r}, expected "
                   f"{mesh.domain_measure()!r}")
    if rt is not None:
        half_sum = rt.half_measures.sum(axis=1)
        for c in np.nonzero(half_sum != mesh.cell_volumes)[0]:
            bad.append(f"cell {c}: RT half-dual measures do not sum to |P|")
    if mac is not None:
        omega = mesh.domain_measure()
        for i in (0, 1):
            tot = mac.dual_measures[mac.face_family == i].sum()
            if abs(tot - omega) > 1e-12 * omega:
                bad.append(f"MAC duals of direction {i + 1} sum to {tot!r}, "
                           f"expected {omega!r}")
    return bad
