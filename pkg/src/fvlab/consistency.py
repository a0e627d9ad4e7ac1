"""Consistency quantities of the weak Lax-Wendroff machinery: the X1/X2
decomposition of the operator/test-function pairing, the initialization,
time and flux residuals, the staggered jump sums R1/R2, and the weak-form
limit gap.

Flux residuals are evaluated exactly: the integrands are piecewise constant
on half-duals (four diamond pieces per cell for RT, two half-rectangles per
direction for MAC, one piece for colocated 1D), so every integral reduces to
a finite weighted sum.  Term tables keep a documented (step, cell, face,
piece) layout so a brute-force enumeration with the same summation order
reproduces the results bit for bit.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from .fields import InterpolatedTest, SupportError
from .operators import BetaFamily, FluxFamily, dt_beta, flux_divergence, flux_dot_n
from .quadrature import (DEFAULT_ORDER, ORACLE_ORDER, BoxQuadrature,
                         CellQuadrature, SlabQuadrature)

__all__ = [
    "compute_X1", "compute_X2", "residual_init", "residual_time",
    "residual_flux", "residual_flux_terms", "jump_sums", "weak_lhs",
    "weak_rhs", "weak_form_gap", "measured_constant", "RouteMismatchError",
    "LOCAL_OPPOSITE",
]

LOCAL_OPPOSITE = (2, 3, 0, 1)   # quadrangle local faces: bottom/right/top/left


class RouteMismatchError(AssertionError):
    """Two algebraically equal evaluation routes disagreed numerically."""


# ----------------------------------------------------------------------
# X1: time-derivative pairing

class X1Result(NamedTuple):
    value: float                # direct sum
    by_parts: float             # discrete summation-by-parts route


def compute_X1(betas: BetaFamily, interp: InterpolatedTest, mesh, grid,
               rtol: float = 1e-12) -> X1Result:
    """X1 = sum_n dt_n sum_P |P| (d_t beta)_P^n phi_P^n, plus the
    summation-by-parts route; the two must agree to `rtol`.

    Note the |P| weight: the pairing is the integral of the piecewise
    constant (d_t beta) against the interpolate, so each cell enters with
    its measure.
    """
    vols = mesh.cell_volumes
    steps = grid.steps
    dtb = dt_beta(betas, grid)
    phi_c = interp.phi_cell
    direct = float(np.einsum("n,nc,c->", steps, dtb * phi_c[:-1], vols))
    # by parts: -sum |P| beta^0 phi^0 - sum_{n>=1} |P| beta^n (phi^n - phi^{n-1})
    bnd = float(np.einsum("c,c->", vols, betas.values[0] * phi_c[0]))
    dphi = np.diff(phi_c, axis=0)
    series = float(np.einsum("nc,c->", betas.values[1:] * dphi, vols))
    by_parts = -bnd - series
    # relative scale includes both routes' absolute term masses, so exact
    # zeros on one route compare against the other's cancellation scale
    scale = max(abs(direct), abs(by_parts),
                float(np.einsum("n,nc,c->", steps, np.abs(dtb * phi_c[:-1]), vols)),
                float(np.einsum("c,c->", vols, np.abs(betas.values[0] * phi_c[0])))
                + float(np.einsum("nc,c->", np.abs(betas.values[1:] * dphi), vols)))
    if abs(direct - by_parts) > rtol * max(scale, 1e-300):
        raise RouteMismatchError(
            f"X1 routes disagree: {direct!r} vs {by_parts!r}")
    return X1Result(direct, by_parts)


# ----------------------------------------------------------------------
# piecewise-constant flux function f(U)

def _flux_pieces(layout: str, q, v, pair, mesh, dual, n_steps: int):
    """Piece table of f(U).n_{P,zeta}: measures (NC, nf, np) and values
    (N, NC, nf, np), one entry per constancy region of f(U) inside P."""
    cf = mesh.cell_faces
    qv = q.values[:n_steps]
    if layout == "rt":
        vcf = v.values[:n_steps][:, cf]                        # (N, NC, 4, 2)
        dots = np.einsum("ncpd,ckd->nckp", vcf, mesh.cell_face_normals)
        piece = pair.g(qv)[:, :, None, None] * dots
        meas = np.broadcast_to((0.25 * mesh.cell_volumes)[:, None, None],
                               (mesh.n_cells, 4, 4))
        return meas, piece
    if layout == "mac":
        vcf = v.values[:n_steps][:, cf]                        # (N, NC, 4)
        vopp = vcf[:, :, LOCAL_OPPOSITE]
        delta = dual.cell_face_delta[None, :, :]
        own = vcf * delta
        opp = vopp * delta
        piece = pair.g(qv)[:, :, None, None] * np.stack([own, opp], axis=-1)
        meas = np.broadcast_to((0.5 * mesh.cell_volumes)[:, None, None],
                               (mesh.n_cells, 4, 2))
        return meas, piece
    if layout == "colocated1d":
        fq = pair.f(qv) if pair.f is not None else pair.g(qv)
        piece = fq[:, :, None, None] * mesh.cell_face_normals[None, :, :, 0:1]
        meas = np.broadcast_to(mesh.cell_volumes[:, None, None],
                               (mesh.n_cells, 2, 1))
        return meas, piece
    raise ValueError(f"unknown layout {layout!r}")


def _flux_cell_means(layout: str, q, v, pair, mesh, n_steps: int):
    """Mean of the vector f(U) over each cell per step, shape (N, NC, d)."""
    cf = mesh.cell_faces
    qv = q.values[:n_steps]
    if layout == "rt":
        vcf = v.values[:n_steps][:, cf]
        mean_v = 0.25 * ((vcf[:, :, 0] + vcf[:, :, 2]) + (vcf[:, :, 1] + vcf[:, :, 3]))
        return pair.g(qv)[:, :, None] * mean_v
    if layout == "mac":
        vcf = v.values[:n_steps][:, cf]
        mean1 = 0.5 * (vcf[:, :, 3] + vcf[:, :, 1])   # left/right pair
        mean2 = 0.5 * (vcf[:, :, 0] + vcf[:, :, 2])   # bottom/top pair
        return pair.g(qv)[:, :, None] * np.stack([mean1, mean2], axis=-1)
    if layout == "colocated1d":
        fq = pair.f(qv) if pair.f is not None else pair.g(qv)
        return fq[:, :, None]
    raise ValueError(f"unknown layout {layout!r}")


# ----------------------------------------------------------------------
# X2: flux pairing, direct and gradient/remainder routes

class X2Result(NamedTuple):
    value: float                # direct face sum
    gradient_route: float       # -int f(U).grad_phi + remainder
    gradient_term: float
    remainder: float


def compute_X2(flux: FluxFamily, interp: InterpolatedTest, mesh, grid,
               q=None, v=None, pair=None, dual=None, rtol: float = 1e-10):
    """X2 = sum_n dt_n sum_P sum_zeta |zeta| F_zeta^n.n_{P,zeta} phi_P^n.

    When the discrete fields are supplied the gradient/remainder route is
    evaluated as well and the two must agree to `rtol` (relative to the
    absolute term mass).  Requires phi to vanish on all non-interior cells
    and their faces at the current resolution.
    """
    if not interp.interior_support_clear():
        raise SupportError(
            "test-function support reaches non-interior cells at this resolution")
    steps = grid.steps
    div = flux_divergence(flux)
    phi_c = interp.phi_cell[:-1]
    direct = float(np.einsum("n,nc->", steps, div * phi_c))
    if q is None:
        return X2Result(direct, np.nan, np.nan, np.nan)
    n_steps = grid.n_steps
    interior = mesh.interior_cell_mask
    mean_f = _flux_cell_means(flux.layout, q, v, pair, mesh, n_steps)
    grad = interp.grad_phi[:-1]
    vols = mesh.cell_volumes
    gdots = np.einsum("ncd,ncd->nc", mean_f[:, interior], grad[:, interior])
    grad_term = -float(np.einsum("n,nc,c->", steps, gdots, vols[interior]))
    meas, piece = _flux_pieces(flux.layout, q, v, pair, mesh, dual, n_steps)
    dotn = flux_dot_n(flux)                                    # (N, NC, nf)
    areas = mesh.face_measures[mesh.cell_faces]                # (NC, nf)
    dphi = phi_c[:, :, None] - interp.phi_face[:-1][:, mesh.cell_faces]
    inner = (dotn[:, :, :, None] - piece) * dphi[:, :, :, None]
    weighted = (meas / vols[:, None, None])[None] * areas[None, :, :, None] * inner
    remainder = float(np.einsum("n,nckp->", steps, weighted[:, interior]))
    gradient_route = grad_term + remainder
    scale = max(abs(direct), abs(gradient_route),
                float(np.einsum("n,nc->", steps, np.abs(div * phi_c))),
                float(np.einsum("n,nc,c->", steps, np.abs(gdots), vols[interior]))
                + float(np.einsum("n,nckp->", steps, np.abs(weighted[:, interior]))))
    if abs(direct - gradient_route) > rtol * max(scale, 1e-300):
        raise RouteMismatchError(
            f"X2 routes disagree: {direct!r} vs {gradient_route!r} "
            f"(scale {scale!r})")
    return X2Result(direct, gradient_route, grad_term, remainder)


# ----------------------------------------------------------------------
# hypothesis residuals

class InitResidual(NamedTuple):
    signed: float               # sum_P int (beta_P^0 - beta(q0)) phi(.,0)
    cellwise: float             # sum_P |int ...| : per-cell absolute majorant
    l1_majorant: float          # C_beta ||phi(.,0)||_inf sum int |q0 - q_P^0|


def residual_init(betas: BetaFamily, q0, phi, mesh, pair,
                  order: int = ORACLE_ORDER) -> InitResidual:
    """Initialization-consistency residual over interior cells.

    Returns the signed sum, the per-cell absolute sum (a sharper majorant of
    the same quantity) and the Lipschitz L1 majorant.
    """
    quad = CellQuadrature(mesh, order)
    phi0 = quad.cell_integrals(lambda x: phi.value(x, 0.0))
    bq0 = quad.cell_integrals(lambda x: pair.beta(q0(x)) * phi.value(x, 0.0))
    per_cell = betas.values[0] * phi0 - bq0
    interior = mesh.interior_cell_mask
    signed = float(per_cell[interior].sum())
    cellwise = float(np.abs(per_cell[interior]).sum())
    q_sample = quad.cell_means(q0)
    devs = quad.cell_integrals(
        lambda x: np.abs(q0(x) - np.repeat(q_sample, quad.n_points)))
    qmin = float(min(q_sample.min(), quad.values(q0).min()))
    qmax = float(max(q_sample.max(), quad.values(q0).max()))
    c_beta, _ = pair.lipschitz(qmin, qmax)
    l1 = c_beta * phi.sup_norm_initial() * float(devs[interior].sum())
    return InitResidual(signed, cellwise, l1)


class TimeResidual(NamedTuple):
    signed: float
    majorant: float             # C_beta ||phi||_inf sum dt sum |P| |q jumps|
    c_beta: float


def residual_time(betas: BetaFamily, q, phi, pair, mesh, grid,
                  space_order: int = DEFAULT_ORDER,
                  time_order: int = DEFAULT_ORDER) -> TimeResidual:
    """Time-consistency residual for the explicit convention (the discrete
    function takes the level n-1 value on [t_{n-1}, t_n)).

    The integrand is piecewise constant per (cell, slab); only phi needs
    quadrature.  The majorant carries the cell measure so that it is the
    time part of the translate functional.
    """
    slab = SlabQuadrature(mesh, grid, space_order, time_order)
    interior = mesh.interior_cell_mask
    signed = 0.0
    for m in range(grid.n_steps):
        phi_int = slab.slab_cell_integrals(phi.value, m)
        diff = betas.values[m + 1] - betas.values[m]
        signed += float((diff * phi_int)[interior].sum())
    jumps = np.abs(np.diff(q.values, axis=0))[:, interior]
    weighted = jumps @ mesh.cell_volumes[interior]
    qmin = float(q.values.min())
    qmax = float(q.values.max())
    c_beta, _ = pair.lipschitz(qmin, qmax)
    majorant = c_beta * phi.sup_norm() * float(np.dot(grid.steps, weighted))
    return TimeResidual(signed, majorant, c_beta)


def residual_flux_terms(flux: FluxFamily, q, v, pair, mesh, grid,
                        layout: str, dual=None) -> np.ndarray:
    """Exact term table of the flux-consistency residual.

    terms[n, i, k, p] = dt_n * (diam/|P|)_i * |zeta|_{i,k} * |D_piece|
                        * |(F_zeta^n - f(U)|_piece) . n_{P,zeta}|
    over interior cells i (ascending cell id), local faces k and constancy
    pieces p.  ``residual_flux`` is the plain np.sum of this table, so a
    scalar enumeration in the same layout reproduces it bit for bit.
    """
    dual = dual if dual is not None else flux.dual
    n_steps = grid.n_steps
    meas, piece = _flux_pieces(layout, q, v, pair, mesh, dual, n_steps)
    dotn = flux_dot_n(flux)
    interior = mesh.interior_cell_mask
    coef = mesh.cell_diameters / mesh.cell_volumes
    areas = mesh.face_measures[mesh.cell_faces]
    absdiff = np.abs(dotn[:, :, :, None] - piece)
    terms = (grid.steps[:, None, None, None]
             * coef[None, :, None, None]
             * areas[None, :, :, None]
             * meas[None, :, :, :]
             * absdiff)
    # keep the documented (step, cell, face, piece) C-order layout: boolean
    # indexing transposes memory, which would change the pairwise sum order
    return np.ascontiguousarray(terms[:, interior])


def residual_flux(flux: FluxFamily, q, v, pair, mesh, grid,
                  layout: str, dual=None) -> float:
    """Flux-consistency residual (exact finite sum over constancy pieces)."""
    return float(np.sum(residual_flux_terms(flux, q, v, pair, mesh, grid,
                                            layout, dual)))


# ----------------------------------------------------------------------
# jump sums R1 / R2

class JumpSums(NamedTuple):
    r1: float
    r1_reordered: float
    r2: float
    rt_constant: int | None


def jump_sums(q, v, mesh, dual, grid, layout: str,
              rtol: float = 1e-12) -> JumpSums:
    """Scalar jumps R1 (cell-sum and reordered face-sum forms, asserted
    equal) and staggered velocity jumps R2 across dual edges.

    RT dual-edge weights are C*diam(P)^2 with the realized splitting
    constant C (adjacent pairs counted once directly plus at most twice via
    the fixed two-hop opposite-pair splits); MAC weights are
    diam(P)(|zeta| + |zeta'|).
    """
    n_steps = grid.n_steps
    steps = grid.steps
    qv = q.values[:n_steps]
    fc = mesh.face_cells
    diam = mesh.cell_diameters
    cf = mesh.cell_faces
    # cell-sum form: every cell sees each of its interior faces once
    cells = np.arange(mesh.n_cells)[:, None]
    first = fc[cf][:, :, 0]
    second = fc[cf][:, :, 1]
    other = np.where(first == cells, second, first)
    neighbor_mask = other >= 0
    jump_ck = np.abs(qv[:, :, None] - qv[:, np.maximum(other, 0)]) \
        * neighbor_mask[None, :, :]
    w_ck = diam[:, None] * mesh.face_measures[cf]
    r1 = float(np.dot(steps, np.einsum("nck,ck->n", jump_ck, w_ck)))
    # reordered face form with omega = (diam P + diam Q)|zeta|
    ifaces = np.nonzero(mesh.interior_face_mask)[0]
    jump_f = np.abs(qv[:, fc[ifaces, 0]] - qv[:, fc[ifaces, 1]])
    omega = (diam[fc[ifaces, 0]] + diam[fc[ifaces, 1]]) * mesh.face_measures[ifaces]
    r1_face = float(np.dot(steps, jump_f @ omega))
    scale = max(abs(r1), abs(r1_face), 1e-300)
    if abs(r1 - r1_face) > rtol * scale:
        raise RouteMismatchError(f"R1 forms disagree: {r1!r} vs {r1_face!r}")
    if layout == "colocated1d":
        return JumpSums(r1, r1_face, 0.0, None)
    if layout == "rt":
        vcf = v.values[:n_steps][:, cf]                      # (N, NC, 4, 2)
        const = dual.jump_weight_constant
        per_cell = np.zeros((n_steps, mesh.n_cells))
        for a, b in dual.dual_edges_local:
            per_cell += np.sqrt(((vcf[:, :, a] - vcf[:, :, b]) ** 2).sum(-1))
        r2 = float(np.dot(steps, per_cell @ (const * diam ** 2)))
        return JumpSums(r1, r1_face, r2, const)
    if layout == "mac":
        vcf = v.values[:n_steps][:, cf]                      # (N, NC, 4)
        areas = mesh.face_measures[cf]
        r2 = 0.0
        for a, b in dual.direction_pairs_local:
            jump = np.abs(vcf[:, :, a] - vcf[:, :, b])
            w = diam * (areas[:, a] + areas[:, b])
            r2 += float(np.dot(steps, jump @ w))
        return JumpSums(r1, r1_face, r2, None)
    raise ValueError(f"unknown layout {layout!r}")


def measured_constant(q, v, pair, layout: str) -> float:
    """Measured product constant dominating R <= C (R1 + R2): the larger of
    C_g * sup|v| and sup|g(q)| over the discrete data."""
    qmin = float(q.values.min())
    qmax = float(q.values.max())
    _, c_g = pair.lipschitz(qmin, qmax)
    sup_v = 1.0 if v is None else v.sup_norm()
    sup_g = float(np.abs(pair.g(q.values)).max())
    return max(c_g * sup_v, sup_g)


# ----------------------------------------------------------------------
# weak-form gap

class WeakRhs(NamedTuple):
    total: float
    init_term: float
    volume_term: float
    volume_time: float = np.nan     # -int int beta(q) d_t phi
    volume_space: float = np.nan    # -int int g(q) v . grad phi

    def time_limit(self) -> float:
        """Limit of the X1 pairing: -int beta(q0) phi(.,0) - int int beta d_t phi."""
        return self.init_term + self.volume_time

    def space_limit(self) -> float:
        """Limit of the X2 pairing: -int int f(q, v) . grad phi."""
        return self.volume_space


def weak_rhs(pair, q_exact, v_exact, q0, phi,
             order: int = ORACLE_ORDER, panels: int = 12,
             check: bool = True) -> WeakRhs:
    """Right-hand side of the weak form for a closed-form limit:
    -int beta(q0) phi(.,0) - int int (beta(q) d_t phi + g(q) v . grad phi).

    Both terms use mesh-independent panelised rules over the support box of
    phi (the limit object does not depend on the discretisation level; the
    integrands vanish outside the support).
    """
    dim = len(phi.support)
    space_box = BoxQuadrature(list(phi.support), panels, order)
    init = -space_box.integrate(
        lambda x: pair.beta(q0(x)) * phi.value(x, 0.0))
    bounds = list(phi.support) + [(0.0, phi.t_max)]

    def time_part(pts):
        x = pts[:, :dim]
        t = pts[:, dim]
        return pair.beta(np.asarray(q_exact(x, t), dtype=float)) * phi.dt(x, t)

    def space_part(pts):
        x = pts[:, :dim]
        t = pts[:, dim]
        qb = np.asarray(q_exact(x, t), dtype=float)
        if v_exact is None:
            return (pair.f(qb) if pair.f is not None else pair.g(qb)) \
                * phi.grad(x, t)[:, 0]
        vv = np.asarray(v_exact(x, t), dtype=float)
        return pair.g(qb) * np.einsum("nd,nd->n", vv, phi.grad(x, t))

    box = BoxQuadrature(bounds, panels, order)
    vol_time = -box.integrate(time_part)
    vol_space = -box.integrate(space_part)
    volume = vol_time + vol_space
    if check:
        finer = BoxQuadrature(bounds, panels, order + 2)
        vol2 = -(finer.integrate(time_part) + finer.integrate(space_part))
        if abs(volume - vol2) > 1e-7 * (1.0 + abs(volume)):
            warnings.warn(f"weak-form volume quadrature disagreement "
                          f"{abs(volume - vol2):.3e}", stacklevel=2)
    return WeakRhs(init + volume, init, volume, vol_time, vol_space)


def weak_lhs(c_values: np.ndarray, interp: InterpolatedTest, mesh, grid) -> float:
    """Exact pairing int int C(U) I(phi) of the piecewise constants."""
    return float(np.einsum("n,nc,c->", grid.steps,
                           c_values * interp.phi_cell[:-1], mesh.cell_volumes))


class WeakGap(NamedTuple):
    gap: float
    lhs: float
    rhs: float
    rhs_init: float
    rhs_volume: float


def weak_form_gap(c_values, interp, exact, pair, mesh, grid,
                  order: int = ORACLE_ORDER, panels: int = 12,
                  rhs: WeakRhs | None = None) -> WeakGap:
    """|LHS - RHS| of the weak-consistency statement.

    ``exact = (q_exact, v_exact, q0)`` gives the closed-form limit fields
    (v_exact None for the colocated 1D operator).  A precomputed ``rhs`` may
    be passed to avoid re-integrating the level-independent right-hand side.
    """
    q_exact, v_exact, q0 = exact
    if rhs is None:
        rhs = weak_rhs(pair, q_exact, v_exact, q0, interp.phi,
                       order=order, panels=panels)
    lhs = weak_lhs(c_values, interp, mesh, grid)
    return WeakGap(abs(lhs - rhs.total), lhs, rhs.total, rhs.init_term,
                   rhs.volume_term)
