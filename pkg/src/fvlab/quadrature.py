"""Gauss-Legendre quadrature on mesh cells, faces, time slabs and boxes.

Cell rules map a tensor Gauss-Legendre rule through the bilinear quadrangle
map (affine for rectangles and intervals), face rules are 1D Gauss-Legendre
along each edge, and ``BoxQuadrature`` provides a mesh-independent panelised
rule for smooth space-time integrals (the "oracle" side of dual-route
checks).

Cell means use a shifted weighted average, ``f0 + sum(w * (f - f0))``, so a
constant integrand reproduces the constant bitwise.
"""

from __future__ import annotations

import numpy as np

DEFAULT_ORDER = 4
ORACLE_ORDER = 8


def gauss_legendre(order: int):
    """Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1]."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    return np.polynomial.legendre.leggauss(order)


def composite_gauss_legendre(order: int, panels: int = 1):
    """Composite rule on [-1, 1]: `panels` equal sub-intervals, an
    `order`-point Gauss-Legendre rule on each.  Needed to resolve bump test
    functions, whose derivatives are huge near the support edge."""
    if panels < 1:
        raise ValueError(f"panels must be >= 1, got {panels}")
    nodes, weights = gauss_legendre(order)
    if panels == 1:
        return nodes, weights
    edges = np.linspace(-1.0, 1.0, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halfs = 0.5 * np.diff(edges)
    all_nodes = (mids[:, None] + halfs[:, None] * nodes[None, :]).ravel()
    all_weights = (halfs[:, None] * weights[None, :]).ravel()
    return all_nodes, all_weights


def _eval(f, x, t):
    """Evaluate f on points x (n, dim); f may take (x) or (x, t)."""
    if t is None:
        return np.asarray(f(x), dtype=float)
    try:
        return np.asarray(f(x, t), dtype=float)
    except TypeError:
        return np.asarray(f(x), dtype=float)


class CellQuadrature:
    """Per-cell tensor Gauss-Legendre rule of a given order.

    Precomputes physical node coordinates and weights for every cell of the
    mesh; the same rule is reused across time levels.  Weights include the
    Jacobian of the bilinear map, so ``weights[c].sum()`` approximates the
    cell measure.
    """

    def __init__(self, mesh, order: int = DEFAULT_ORDER, panels: int = 1):
        self.mesh = mesh
        self.order = order
        self.panels = panels
        nodes1d, w1d = composite_gauss_legendre(order, panels)
        verts = mesh.vertices[mesh.cell_vertices]  # (NC, nv, dim)
        if mesh.dim == 1:
            a = verts[:, 0, 0][:, None]
            b = verts[:, 1, 0][:, None]
            half = 0.5 * (b - a)
            pts = 0.5 * (a + b) + half * nodes1d[None, :]
            self.points = pts[:, :, None]  # (NC, k, 1)
            self.weights = np.broadcast_to(w1d[None, :], pts.shape) * half
            self.weights = np.ascontiguousarray(self.weights)
        else:
            xi, eta = np.meshgrid(nodes1d, nodes1d, indexing="ij")
            xi = xi.ravel()
            eta = eta.ravel()
            wt = np.outer(w1d, w1d).ravel()
            # bilinear shape functions on [-1,1]^2, vertex order CCW
            n0 = 0.25 * (1 - xi) * (1 - eta)
            n1 = 0.25 * (1 + xi) * (1 - eta)
            n2 = 0.25 * (1 + xi) * (1 + eta)
            n3 = 0.25 * (1 - xi) * (1 + eta)
            shape = np.stack([n0, n1, n2, n3], axis=0)          # (4, k)
            dxi = 0.25 * np.stack([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)], axis=0)
            deta = 0.25 * np.stack([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)], axis=0)
            self.points = np.einsum("vk,cvd->ckd", shape, verts)
            jx = np.einsum("vk,cvd->ckd", dxi, verts)           # d x / d xi
            je = np.einsum("vk,cvd->ckd", deta, verts)          # d x / d eta
            jac = jx[:, :, 0] * je[:, :, 1] - jx[:, :, 1] * je[:, :, 0]
            self.weights = wt[None, :] * jac
        self._wsum = self.weights.sum(axis=1)
        self._wnorm = self.weights / self._wsum[:, None]
        for arr in (self.points, self.weights, self._wsum, self._wnorm):
            arr.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.points.shape[1]

    def flat_points(self):
        return self.points.reshape(-1, self.mesh.dim)

    def values(self, f, t=None):
        """f evaluated at all nodes, shaped (NC, k)."""
        vals = _eval(f, self.flat_points(), t)
        return vals.reshape(self.points.shape[0], -1)

    def cell_means(self, f, t=None):
        """Cell averages of f(., t); constants are reproduced bitwise."""
        vals = self.values(f, t)
        f0 = vals[:, 0]
        return f0 + np.einsum("ck,ck->c", self._wnorm, vals - f0[:, None])

    def cell_integrals(self, f, t=None):
        vals = self.values(f, t)
        return np.einsum("ck,ck->c", self.weights, vals)

    def cell_vector_means(self, f, t=None):
        """Cell averages of a vector-valued f, shaped (NC, dim_out)."""
        vals = np.asarray(f(self.flat_points(), t) if t is not None else f(self.flat_points()))
        vals = vals.reshape(self.points.shape[0], self.n_points, -1)
        f0 = vals[:, 0, :]
        return f0 + np.einsum("ck,ckd->cd", self._wnorm, vals - f0[:, None, :])


class FaceQuadrature:
    """Per-face Gauss-Legendre rule along each edge (a point in 1D)."""

    def __init__(self, mesh, order: int = DEFAULT_ORDER, panels: int = 1):
        self.mesh = mesh
        self.order = order
        self.panels = panels
        if mesh.dim == 1:
            self.points = mesh.face_midpoints[:, None, :]      # (NF, 1, 1)
            self.weights = np.ones((mesh.n_faces, 1))
        else:
            nodes1d, w1d = composite_gauss_legendre(order, panels)
            va = mesh.vertices[mesh.face_vertices[:, 0]]
            vb = mesh.vertices[mesh.face_vertices[:, 1]]
            mid = 0.5 * (va + vb)
            half = 0.5 * (vb - va)
            self.points = mid[:, None, :] + nodes1d[None, :, None] * half[:, None, :]
            self.weights = np.broadcast_to(
                0.5 * w1d[None, :], (mesh.n_faces, nodes1d.size)).copy()
        self._wnorm = self.weights / self.weights.sum(axis=1)[:, None]
        for arr in (self.points, self.weights, self._wnorm):
            arr.setflags(write=False)

    def face_means(self, f, t=None):
        """Mean of f over each face; constants reproduced bitwise."""
        vals = _eval(f, self.points.reshape(-1, self.mesh.dim), t)
        vals = vals.reshape(self.points.shape[0], -1)
        f0 = vals[:, 0]
        return f0 + np.einsum("fk,fk->f", self._wnorm, vals - f0[:, None])


class SlabQuadrature:
    """Tensor (cell x time-slab) rule for integrals over P x (t_n, t_{n+1})."""

    def __init__(self, mesh, grid, space_order: int = DEFAULT_ORDER,
                 time_order: int = DEFAULT_ORDER, panels: int = 1):
        self.cell = CellQuadrature(mesh, space_order, panels)
        self.grid = grid
        self.tnodes1d, self.tweights1d = gauss_legendre(time_order)

    def slab_cell_integrals(self, f, n: int):
        """Integrals of f over P x (t_n, t_{n+1}) for every cell, shape (NC,)."""
        t0 = self.grid.knots[n]
        t1 = self.grid.knots[n + 1]
        half = 0.5 * (t1 - t0)
        out = np.zeros(self.cell.points.shape[0])
        pts = self.cell.flat_points()
        for tn, tw in zip(0.5 * (t0 + t1) + half * self.tnodes1d, half * self.tweights1d):
            vals = _eval(f, pts, tn).reshape(out.shape[0], -1)
            out += tw * np.einsum("ck,ck->c", self.cell.weights, vals)
        return out


class BoxQuadrature:
    """Panelised tensor Gauss-Legendre rule over an axis-aligned box.

    Used for mesh-independent space(-time) integrals of smooth integrands;
    the box is split into `panels` per axis and an `order`-point rule is
    applied per panel per axis.
    """

    def __init__(self, bounds, panels, order: int = ORACLE_ORDER):
        bounds = [tuple(map(float, b)) for b in bounds]
        if np.isscalar(panels):
            panels = [int(panels)] * len(bounds)
        nodes1d, w1d = gauss_legendre(order)
        axes_nodes = []
        axes_weights = []
        for (a, b), m in zip(bounds, panels):
            edges = np.linspace(a, b, m + 1)
            mids = 0.5 * (edges[:-1] + edges[1:])
            halfs = 0.5 * np.diff(edges)
            pts = (mids[:, None] + halfs[:, None] * nodes1d[None, :]).ravel()
            wts = (halfs[:, None] * w1d[None, :]).ravel()
            axes_nodes.append(pts)
            axes_weights.append(wts)
        grids = np.meshgrid(*axes_nodes, indexing="ij")
        self.points = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*axes_weights, indexing="ij")
        self.weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
        self.bounds = bounds

    def integrate(self, f) -> float:
        """Integral of f(points) over the box; f maps (n, naxes) -> (n,)."""
        return float(np.dot(self.weights, np.asarray(f(self.points), dtype=float)))
