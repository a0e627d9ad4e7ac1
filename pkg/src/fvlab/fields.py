"""Discrete fields, smooth compactly supported test functions, their
interpolates, L^p distances and the translate functionals.

Discrete values live on the primal cells (scalars) or on faces (RT vectors,
MAC normal components); the associated space-time function is piecewise
constant, taking the level-n value on the slab [t_n, t_{n+1}).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .quadrature import (DEFAULT_ORDER, CellQuadrature, FaceQuadrature,
                         SlabQuadrature)

__all__ = [
    "CellScalarField", "FaceVectorFieldRT", "FaceScalarFieldMAC",
    "TestFunction", "InterpolatedTest", "TranslateWeights",
    "sample_cell_means", "interpolate_test", "lp_distance",
    "translate_functional", "translate_functional_general",
    "default_translate_weights", "SupportError",
]


class SupportError(ValueError):
    """Raised when a test function's support violates C_c(Omega x [0,T))."""


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


class CellScalarField:
    """Cell-centred scalar unknown q_P^n, levels n = 0..N."""

    def __init__(self, mesh, grid, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (grid.n_steps + 1, mesh.n_cells):
            raise ValueError(f"expected shape {(grid.n_steps + 1, mesh.n_cells)}, "
                             f"got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite field values")
        self.mesh = mesh
        self.grid = grid
        self.values = values
        _freeze(values)

    def sup_norm(self) -> float:
        """Max |q_P^n| over the slab levels 0..N-1 (the space-time function)."""
        return float(np.abs(self.values[:-1]).max())


class FaceVectorFieldRT:
    """Full velocity vector per face (RT layout), levels 0..N."""

    def __init__(self, mesh, grid, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (grid.n_steps + 1, mesh.n_faces, 2):
            raise ValueError(f"expected shape {(grid.n_steps + 1, mesh.n_faces, 2)}, "
                             f"got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite field values")
        self.mesh = mesh
        self.grid = grid
        self.values = values
        _freeze(values)

    def sup_norm(self) -> float:
        return float(np.sqrt((self.values[:-1] ** 2).sum(-1)).max())


class FaceScalarFieldMAC:
    """Normal velocity component per face (MAC layout), levels 0..N."""

    def __init__(self, mesh, grid, dual, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (grid.n_steps + 1, mesh.n_faces):
            raise ValueError(f"expected shape {(grid.n_steps + 1, mesh.n_faces)}, "
                             f"got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite field values")
        self.mesh = mesh
        self.grid = grid
        self.dual = dual
        self.values = values
        _freeze(values)

    def sup_norm(self) -> float:
        return float(np.abs(self.values[:-1]).max())


# ----------------------------------------------------------------------
# test functions

def _bump(s, a, b):
    """exp(-1/(1-u^2)) rescaled to (a, b), extended by zero outside."""
    s = np.asarray(s, dtype=float)
    u = (2.0 * s - (a + b)) / (b - a)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def _bump_deriv(s, a, b):
    s = np.asarray(s, dtype=float)
    u = (2.0 * s - (a + b)) / (b - a)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    one = 1.0 - ui * ui
    out[inside] = np.exp(-1.0 / one) * (-2.0 * ui / one ** 2) * (2.0 / (b - a))
    return out


class TestFunction:
    """Smooth compactly supported phi(x, t) with closed-form derivatives.

    The spatial part is a product of exponential bumps over the support box.
    Two time profiles are available:

    * ``"initial"`` (default): an even bump in t restricted to [0, t_max), so
      phi(., 0) != 0 and the initialization terms of the weak form are
      exercised;
    * ``"interior"``: the bump rescaled to (0, t_max), vanishing at t = 0.

    The support must lie strictly inside the domain box and t_max < T.
    """

    def __init__(self, support, t_max, time_profile="initial"):
        self.support = tuple((float(a), float(b)) for a, b in support)
        self.t_max = float(t_max)
        if time_profile not in ("initial", "interior"):
            raise ValueError(f"unknown time profile {time_profile!r}")
        self.time_profile = time_profile
        self.dim = len(self.support)
        for a, b in self.support:
            if not b > a:
                raise ValueError("empty support box")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")

    def validate_against(self, mesh, grid):
        for (a, b), (lo, hi) in zip(self.support, mesh.domain):
            if not (a > lo and b < hi):
                raise SupportError(
                    f"support [{a}, {b}] not strictly inside ({lo}, {hi})")
        if not self.t_max < grid.final_time:
            raise SupportError(
                f"t_max={self.t_max} must be < T={grid.final_time}")

    # -- time factor ----------------------------------------------------
    def _tf(self, t):
        t = np.asarray(t, dtype=float)
        if self.time_profile == "interior":
            return _bump(t, 0.0, self.t_max)
        out = _bump(t, -self.t_max, self.t_max)
        return np.where(t >= 0.0, out, 0.0)

    def _dtf(self, t):
        t = np.asarray(t, dtype=float)
        if self.time_profile == "interior":
            return _bump_deriv(t, 0.0, self.t_max)
        out = _bump_deriv(t, -self.t_max, self.t_max)
        return np.where(t >= 0.0, out, 0.0)

    # -- evaluation ------------------------------------------------------
    def value(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self._tf(np.broadcast_to(t, x.shape[0]).astype(float))
        for d, (a, b) in enumerate(self.support):
            out = out * _bump(x[:, d], a, b)
        return out

    def dt(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self._dtf(np.broadcast_to(t, x.shape[0]).astype(float))
        for d, (a, b) in enumerate(self.support):
            out = out * _bump(x[:, d], a, b)
        return out

    def grad(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tf = self._tf(np.broadcast_to(t, x.shape[0]).astype(float))
        bumps = [_bump(x[:, d], a, b) for d, (a, b) in enumerate(self.support)]
        out = np.empty((x.shape[0], self.dim))
        for d, (a, b) in enumerate(self.support):
            g = _bump_deriv(x[:, d], a, b) * tf
            for e, be in enumerate(bumps):
                if e != d:
                    g = g * be
            out[:, d] = g
        return out

    def sup_norm(self) -> float:
        """Analytic sup of |phi|: each bump factor peaks at exp(-1)."""
        return float(np.exp(-(self.dim + 1)))

    def sup_norm_initial(self) -> float:
        """Analytic sup of |phi(., 0)| over the domain."""
        if self.time_profile == "interior":
            return 0.0
        return float(np.exp(-(self.dim + 1)))


def default_test_function(mesh, grid, margin=0.2, t_fraction=0.8,
                          time_profile="initial") -> TestFunction:
    """Bump supported on the central (1-2*margin) part of the domain box."""
    support = []
    for lo, hi in mesh.domain:
        w = hi - lo
        support.append((lo + margin * w, hi - margin * w))
    return TestFunction(support, t_fraction * grid.final_time, time_profile)


# ----------------------------------------------------------------------
# sampling and interpolates

def sample_cell_means(f, mesh, grid, order: int = DEFAULT_ORDER,
                      check: bool = True) -> CellScalarField:
    """Cell means of f(x) or f(x, t_n) at every knot (initialization rule
    generalized to all levels).

    With ``check=True`` the means are recomputed at order+2 and a warning is
    emitted when the two disagree beyond 1e-8 (reported, not fatal).
    """
    quad = CellQuadrature(mesh, order)
    knots = grid.knots
    values = np.empty((knots.size, mesh.n_cells))
    for n, t in enumerate(knots):
        values[n] = quad.cell_means(f, t)
    if check:
        quad2 = CellQuadrature(mesh, order + 2)
        worst = 0.0
        for n, t in enumerate(knots):
            worst = max(worst, float(np.abs(quad2.cell_means(f, t) - values[n]).max()))
        scale = 1.0 + float(np.abs(values).max())
        if worst > 1e-8 * scale:
            warnings.warn(
                f"cell-mean quadrature disagreement {worst:.3e} between orders "
                f"{order} and {order + 2}", stacklevel=2)
    return CellScalarField(mesh, grid, values)


@dataclass
class InterpolatedTest:
    """Discrete interpolates of a test function on a mesh/time grid.

    phi_cell[n, P] are cell means of phi(., t_n) (or t_{n+1} for the
    ``at_tn_plus_1`` variant), phi_face the face means, dt_phi the discrete
    time derivative on slabs, and grad_phi the face-mean gradient
    (1/|P|) sum |zeta| phi_zeta n_{P,zeta}.
    """

    phi: TestFunction
    mesh: object
    grid: object
    variant: str
    phi_cell: np.ndarray        # (N+1, NC)
    phi_face: np.ndarray        # (N+1, NF)
    dt_phi: np.ndarray          # (N, NC)
    grad_phi: np.ndarray        # (N+1, NC, dim)
    order: int = DEFAULT_ORDER
    panels: int = 4

    def interior_support_clear(self) -> bool:
        """True when phi_P^n and phi_zeta^n vanish on all non-interior cells."""
        outside = ~self.mesh.interior_cell_mask
        if np.any(self.phi_cell[:, outside] != 0.0):
            return False
        faces = np.unique(self.mesh.cell_faces[outside])
        return not np.any(self.phi_face[:, faces] != 0.0)


def interpolate_test(phi: TestFunction, mesh, grid, variant: str = "at_tn",
                     order: int = DEFAULT_ORDER, panels: int = 4) -> InterpolatedTest:
    """Build phi_P^n, phi_zeta^n, the slab time derivative and the
    face-mean gradient.

    The cell/face rules are panelised (4 panels of the base order per axis
    by default): bump test functions have steep support edges and the
    face-mean gradient amplifies edge-quadrature error by 1/h.
    """
    if variant not in ("at_tn", "at_tn_plus_1"):
        raise ValueError(f"unknown interpolate variant {variant!r}")
    phi.validate_against(mesh, grid)
    cq = CellQuadrature(mesh, order, panels)
    fq = FaceQuadrature(mesh, order, panels)
    n_lev = grid.n_steps + 1
    phi_cell = np.empty((n_lev, mesh.n_cells))
    phi_face = np.empty((n_lev, mesh.n_faces))
    for n in range(n_lev):
        t = grid.knots[min(n + 1, grid.n_steps)] if variant == "at_tn_plus_1" \
            else grid.knots[n]
        phi_cell[n] = cq.cell_means(phi.value, t)
        phi_face[n] = fq.face_means(phi.value, t)
    dt_phi = np.diff(phi_cell, axis=0) / grid.steps[:, None]
    areas = mesh.face_measures[mesh.cell_faces]             # (NC, nf)
    weights = areas[:, :, None] * mesh.cell_face_normals    # (NC, nf, dim)
    face_vals = phi_face[:, mesh.cell_faces]                # (N+1, NC, nf)
    # pair opposite faces first so constants cancel exactly on rectangles
    nf = weights.shape[1]
    if nf == 4:
        gsum = ((face_vals[:, :, 0, None] * weights[None, :, 0]
                 + face_vals[:, :, 2, None] * weights[None, :, 2])
                + (face_vals[:, :, 1, None] * weights[None, :, 1]
                   + face_vals[:, :, 3, None] * weights[None, :, 3]))
    else:
        gsum = np.einsum("ncf,cfd->ncd", face_vals, weights)
    grad_phi = gsum / mesh.cell_volumes[None, :, None]
    return InterpolatedTest(phi=phi, mesh=mesh, grid=grid, variant=variant,
                            phi_cell=phi_cell, phi_face=phi_face,
                            dt_phi=dt_phi, grad_phi=grad_phi, order=order,
                            panels=panels)


# ----------------------------------------------------------------------
# Lp distances

class LpDistance(NamedTuple):
    distance: float
    sup_field: float            # measured sup-norm of the discrete field


def lp_distance(field: CellScalarField, ref: Callable, p=1,
                order: int = DEFAULT_ORDER, time_order: int = 4) -> LpDistance:
    """L1 or Linf distance between a cell field and a continuous function.

    L1 uses per-cell / per-slab quadrature of |q_P^n - ref(x, t)| (the kink
    where the two cross limits accuracy to a few percent, which is enough for
    convergence diagnostics); Linf is the max over quadrature nodes, exact
    for piecewise-constant fields up to the sampling of ref.
    """
    mesh, grid = field.mesh, field.grid
    if p == 1:
        slab = SlabQuadrature(mesh, grid, order, time_order)
        total = 0.0
        for n in range(grid.n_steps):
            qn = field.values[n]
            total += slab.slab_cell_integrals(
                lambda x, t, qn=qn: np.abs(
                    np.repeat(qn, slab.cell.n_points)
                    - np.asarray(ref(x, t), dtype=float)), n).sum()
        return LpDistance(float(total), field.sup_norm())
    if p in (np.inf, "inf"):
        quad = CellQuadrature(mesh, order)
        worst = 0.0
        for n in range(grid.n_steps):
            for t in (grid.knots[n], 0.5 * (grid.knots[n] + grid.knots[n + 1])):
                vals = quad.values(ref, t)
                worst = max(worst, float(
                    np.abs(field.values[n][:, None] - vals).max()))
        return LpDistance(worst, field.sup_norm())
    raise ValueError(f"p must be 1 or inf, got {p!r}")


# ----------------------------------------------------------------------
# translate functionals (discrete compactness quantities)

@dataclass
class TranslateWeights:
    """Weights of the translate functional.

    Face/step form: ``omega_face[j]`` for the j-th interior face and
    ``delta_half[n]`` for the knot between slabs n and n+1 (n = 0..N-2).
    Generalized form: explicit cell pairs / slab-level pairs with weights.
    All weights must be nonnegative.
    """

    mesh: object
    grid: object
    omega_face: np.ndarray | None = None        # (n_interior_faces,)
    delta_half: np.ndarray | None = None        # (N-1,)
    pairs_x: np.ndarray | None = None           # (M, 2) cell ids
    omega_x: np.ndarray | None = None           # (M,)
    pairs_t: np.ndarray | None = None           # (K, 2) slab levels
    delta_t: np.ndarray | None = None           # (K,)

    def __post_init__(self):
        for w in (self.omega_face, self.delta_half, self.omega_x, self.delta_t):
            if w is not None and np.any(np.asarray(w) < 0):
                raise ValueError("translate weights must be nonnegative")

    @property
    def is_general(self) -> bool:
        return self.pairs_x is not None

    # regularity parameters of the weights
    def theta_m(self) -> float:
        mesh = self.mesh
        if not self.is_general:
            faces = np.nonzero(mesh.interior_face_mask)[0]
            vols = mesh.cell_volumes
            p = mesh.face_cells[faces, 0]
            q = mesh.face_cells[faces, 1]
            ratios = np.maximum(self.omega_face / vols[p],
                                self.omega_face / vols[q])
            return float(ratios.max()) if ratios.size else 0.0
        tot = np.zeros(mesh.n_cells)
        np.add.at(tot, self.pairs_x[:, 0], self.omega_x)
        np.add.at(tot, self.pairs_x[:, 1], self.omega_x)
        return float((tot / mesh.cell_volumes).max())

    def theta_t(self) -> float:
        steps = self.grid.steps
        if not self.is_general:
            if self.delta_half is None or self.delta_half.size == 0:
                return 0.0
            d = self.delta_half
            return float(np.max(np.maximum(d / steps[:-1], d / steps[1:])))
        tot = np.zeros(steps.size)
        np.add.at(tot, self.pairs_t[:, 0], self.delta_t)
        np.add.at(tot, self.pairs_t[:, 1], self.delta_t)
        return float((tot / steps).max())

    # gap metrics of the generalized pair sets
    def gap_x(self) -> float:
        verts = self.mesh.vertices[self.mesh.cell_vertices]  # (NC, nv, dim)
        out = 0.0
        for k, l in self.pairs_x:
            diff = verts[k][:, None, :] - verts[l][None, :, :]
            out = max(out, float(np.sqrt((diff ** 2).sum(-1)).max()))
        return out

    def gap_t(self) -> float:
        knots = self.grid.knots
        out = 0.0
        for p, q in self.pairs_t:
            lo, hi = (p, q) if q > p else (q, p)
            out = max(out, float(knots[hi + 1] - knots[lo]))
        return out


def default_translate_weights(mesh, grid, theta: float = 1.0) -> TranslateWeights:
    """omega_sigma = theta*min(|K|, |L|), delta_{n+1/2} = min adjacent steps."""
    faces = np.nonzero(mesh.interior_face_mask)[0]
    vols = mesh.cell_volumes
    omega = theta * np.minimum(vols[mesh.face_cells[faces, 0]],
                               vols[mesh.face_cells[faces, 1]])
    steps = grid.steps
    delta = np.minimum(steps[:-1], steps[1:]) if steps.size > 1 else np.zeros(0)
    return TranslateWeights(mesh=mesh, grid=grid, omega_face=omega,
                            delta_half=delta)


def _space_jump_table(u: CellScalarField, pairs):
    """|u_K^n - u_L^n| for slab levels n = 0..N-1, shape (N, n_pairs)."""
    vals = u.values[:-1]
    return np.abs(vals[:, pairs[:, 0]] - vals[:, pairs[:, 1]])


def translate_functional(u: CellScalarField, weights: TranslateWeights) -> float:
    """T_{M,T} u: time-step-weighted space jumps across interior faces plus
    measure-weighted jumps between consecutive slab values."""
    if weights.is_general:
        raise ValueError("got generalized weights; use translate_functional_general")
    mesh, grid = u.mesh, u.grid
    faces = np.nonzero(mesh.interior_face_mask)[0]
    pairs = mesh.face_cells[faces]
    jumps = _space_jump_table(u, pairs)
    space = float(np.dot(grid.steps, jumps @ weights.omega_face))
    vals = u.values[:-1]
    if weights.delta_half is not None and weights.delta_half.size:
        tj = np.abs(np.diff(vals, axis=0)) @ mesh.cell_volumes
        time = float(np.dot(weights.delta_half, tj))
    else:
        time = 0.0
    return space + time


class GeneralTranslateResult(NamedTuple):
    value: float
    theta_m: float
    theta_t: float
    gap_x: float
    gap_t: float


def translate_functional_general(u: CellScalarField,
                                 weights: TranslateWeights) -> GeneralTranslateResult:
    """Generalized translate functional over explicit cell/level pair sets.

    Reduces exactly to ``translate_functional`` when the pairs are the
    interior faces and the consecutive slab levels.
    """
    if not weights.is_general:
        raise ValueError("expected generalized weights")
    mesh, grid = u.mesh, u.grid
    jumps = _space_jump_table(u, weights.pairs_x)
    space = float(np.dot(grid.steps, jumps @ weights.omega_x))
    vals = u.values[:-1]
    tj = np.abs(vals[weights.pairs_t[:, 0]] - vals[weights.pairs_t[:, 1]])
    time = float(np.dot(weights.delta_t, tj @ mesh.cell_volumes))
    return GeneralTranslateResult(space + time, weights.theta_m(),
                                  weights.theta_t(), weights.gap_x(),
                                  weights.gap_t())


def generalize_weights(weights: TranslateWeights) -> TranslateWeights:
    """Rewrite face/step weights as explicit pair sets (S_x, S_t)."""
    mesh, grid = weights.mesh, weights.grid
    faces = np.nonzero(mesh.interior_face_mask)[0]
    pairs_x = mesh.face_cells[faces].copy()
    n_half = weights.delta_half.size if weights.delta_half is not None else 0
    pairs_t = np.stack([np.arange(n_half), np.arange(1, n_half + 1)], axis=1) \
        if n_half else np.zeros((0, 2), dtype=np.int64)
    delta_t = weights.delta_half if n_half else np.zeros(0)
    return TranslateWeights(mesh=mesh, grid=grid, pairs_x=pairs_x,
                            omega_x=weights.omega_face, pairs_t=pairs_t,
                            delta_t=delta_t)
