"""Discrete convection operator: time derivative of the beta family,
face values, numerical fluxes (staggered RT/MAC and colocated 1D upwind)
and the conservative assembly C(U)_P^n.

Per-cell flux sums pair opposite faces first, so constant states cancel
bitwise on rectangular meshes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NonlinearityPair", "get_pair", "BetaFamily", "FluxFamily",
    "dt_beta", "face_value", "flux_staggered", "flux_colocated_upwind_1d",
    "assemble_convection", "flux_divergence", "flux_dot_n",
    "telescoping_defect", "BOUNDARY_POLICIES",
]

BOUNDARY_POLICIES = ("upwind_zero", "zero_flux", "periodic")


@dataclass(frozen=True)
class NonlinearityPair:
    """Locally Lipschitz beta and g (and optional colocated flux f)."""

    name: str
    beta: Callable
    g: Callable
    f: Callable | None = None

    def lipschitz(self, lo: float, hi: float, samples: int = 4001):
        """Diagnostic Lipschitz moduli (C_beta, C_g) on [lo, hi] by dense
        sampling of difference quotients; never used in the schemes."""
        if hi <= lo:
            hi = lo + 1.0
        s = np.linspace(lo, hi, samples)
        def modulus(fn):
            v = np.asarray(fn(s), dtype=float)
            return float(np.abs(np.diff(v) / np.diff(s)).max())
        return modulus(self.beta), modulus(self.g)


def _slogs(s):
    # s*log(s) for s >= smin, extended linearly below (clipped entropy)
    smin = 1e-6
    s = np.asarray(s, dtype=float)
    safe = np.maximum(s, smin)
    out = safe * np.log(safe)
    slope = np.log(smin) + 1.0
    return np.where(s >= smin, out, smin * np.log(smin) + slope * (s - smin))


_PAIRS = {
    "id": NonlinearityPair("id", lambda s: np.asarray(s, dtype=float),
                           lambda s: np.asarray(s, dtype=float),
                           f=lambda s: np.asarray(s, dtype=float)),
    "square": NonlinearityPair("square", lambda s: np.square(s),
                               lambda s: np.square(s),
                               f=lambda s: np.square(s)),
    "slogs": NonlinearityPair("slogs", _slogs, _slogs, f=_slogs),
}


def get_pair(beta_name: str, g_name: str | None = None) -> NonlinearityPair:
    """Look up beta/g from the registry (id, square, slogs)."""
    if beta_name not in _PAIRS:
        raise KeyError(f"unknown nonlinearity {beta_name!r}; "
                       f"choose from {sorted(_PAIRS)}")
    if g_name is None or g_name == beta_name:
        return _PAIRS[beta_name]
    if g_name not in _PAIRS:
        raise KeyError(f"unknown nonlinearity {g_name!r}; "
                       f"choose from {sorted(_PAIRS)}")
    b, g = _PAIRS[beta_name], _PAIRS[g_name]
    return NonlinearityPair(f"{beta_name}/{g_name}", b.beta, g.g, f=g.f)


class BetaFamily:
    """beta_P^n = beta(q_P^n), levels 0..N."""

    def __init__(self, mesh, grid, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (grid.n_steps + 1, mesh.n_cells):
            raise ValueError(f"expected shape {(grid.n_steps + 1, mesh.n_cells)}, "
                             f"got {values.shape}")
        self.mesh = mesh
        self.grid = grid
        self.values = values
        values.setflags(write=False)

    @classmethod
    def from_field(cls, q, pair: NonlinearityPair):
        return cls(q.mesh, q.grid, pair.beta(q.values))


@dataclass
class FluxFamily:
    """One flux per face and time step (n = 0..N-1), single-valued, hence
    conservative by construction.

    values: RT ``(N, NF, 2)`` vectors; MAC ``(N, NF)`` components along the
    face family axis; colocated 1D ``(N, NF)`` x-components.  Boundary faces
    are filled by the named policy and flagged via the mesh's boundary mask.
    """

    layout: str
    mesh: object
    grid: object
    values: np.ndarray
    boundary_policy: str
    dual: object = None

    def __post_init__(self):
        if self.layout not in ("rt", "mac", "colocated1d"):
            raise ValueError(f"unknown layout {self.layout!r}")
        self.values = np.ascontiguousarray(self.values, dtype=float)


def dt_beta(betas: BetaFamily, grid) -> np.ndarray:
    """(beta_P^{n+1} - beta_P^n)/(t_{n+1} - t_n), shape (N, NC)."""
    return np.diff(betas.values, axis=0) / grid.steps[:, None]


def face_value(q, face: int, n: int, scheme: str = "centered",
               lam: float = 0.5, signal: float = 0.0) -> float:
    """Convex face value q_zeta^n of one interior face.

    ``signal`` is v_zeta^n . n_{P,zeta} seen from the first adjacent cell;
    upwinding picks the upstream side and falls back to the centered value
    when the signal vanishes.
    """
    mesh = q.mesh
    p, qq = mesh.face_cells[face]
    if qq < 0:
        raise ValueError(f"face {face} is a boundary face; apply a boundary policy")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    qp = q.values[n, p]
    qn = q.values[n, qq]
    if scheme == "centered":
        return float(lam * qp + (1.0 - lam) * qn)
    if scheme == "upwind":
        if signal > 0.0:
            return float(qp)
        if signal < 0.0:
            return float(qn)
        return float(0.5 * qp + 0.5 * qn)
    raise ValueError(f"unknown face scheme {scheme!r}")


def _interior_face_values(q, scheme, lam, signal):
    """Vectorized q_zeta^n for all interior faces, shape (N, n_int)."""
    mesh = q.mesh
    faces = np.nonzero(mesh.interior_face_mask)[0]
    qp = q.values[:-1][:, mesh.face_cells[faces, 0]]
    qq = q.values[:-1][:, mesh.face_cells[faces, 1]]
    centered = 0.5 * qp + 0.5 * qq
    if scheme == "centered":
        return faces, lam * qp + (1.0 - lam) * qq
    if scheme == "upwind":
        return faces, np.where(signal > 0.0, qp, np.where(signal < 0.0, qq, centered))
    raise ValueError(f"unknown face scheme {scheme!r}")


def flux_staggered(q, v, pair: NonlinearityPair, scheme: str = "upwind",
                   lam: float = 0.5, policy: str = "upwind_zero") -> FluxFamily:
    """F_zeta^n = g(q_zeta^n) v_zeta^n for the RT or MAC layout.

    q and v must share the primal mesh.  Boundary faces take the policy:
    ``upwind_zero`` (exterior value 0), ``zero_flux``, or (1D only)
    ``periodic``.
    """
    mesh = q.mesh
    if v.mesh is not mesh:
        raise ValueError("q and v live on different meshes")
    if policy not in ("upwind_zero", "zero_flux"):
        raise ValueError(f"policy {policy!r} not supported for staggered layouts")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    n_steps = q.grid.n_steps
    is_mac = hasattr(v, "dual") and v.values.ndim == 2
    vface = v.values[:n_steps]
    ifaces = np.nonzero(mesh.interior_face_mask)[0]
    if is_mac:
        signal = vface[:, ifaces] * v.dual.face_delta_first[None, ifaces]
    else:
        signal = np.einsum("nfd,fd->nf", vface[:, ifaces], mesh.face_normals[ifaces])
    _, qf = _interior_face_values(q, scheme, lam, signal)
    if is_mac:
        values = np.zeros((n_steps, mesh.n_faces))
        values[:, ifaces] = pair.g(qf) * vface[:, ifaces]
    else:
        values = np.zeros((n_steps, mesh.n_faces, 2))
        values[:, ifaces] = pair.g(qf)[:, :, None] * vface[:, ifaces]
    # boundary faces: exterior state 0 (upwind) or hard zero flux
    bfaces = np.nonzero(mesh.boundary_face_mask)[0]
    if policy == "upwind_zero" and bfaces.size:
        if is_mac:
            sig_b = vface[:, bfaces] * v.dual.face_delta_first[None, bfaces]
        else:
            sig_b = np.einsum("nfd,fd->nf", vface[:, bfaces],
                              mesh.face_normals[bfaces])
        qp = q.values[:-1][:, mesh.face_cells[bfaces, 0]]
        qb = np.where(sig_b > 0.0, qp, np.where(sig_b < 0.0, 0.0, 0.5 * qp))
        if is_mac:
            values[:, bfaces] = pair.g(qb) * vface[:, bfaces]
        else:
            values[:, bfaces] = pair.g(qb)[:, :, None] * vface[:, bfaces]
    layout = "mac" if is_mac else "rt"
    return FluxFamily(layout=layout, mesh=mesh, grid=q.grid, values=values,
                      boundary_policy=policy, dual=v.dual if is_mac else None)


def flux_colocated_upwind_1d(u, speed: float = 1.0,
                             policy: str = "upwind_zero") -> FluxFamily:
    """First-order upwind flux for C(u) = d_t u + d_x u on a 1D mesh.

    The flux at the face between P^- (left) and P is u of the upstream cell;
    only speed +1 is supported.
    """
    mesh = u.mesh
    if mesh.dim != 1:
        raise ValueError("colocated upwind flux needs a 1D mesh")
    if speed != 1.0:
        raise ValueError("only speed +1 is supported")
    if policy not in BOUNDARY_POLICIES:
        raise ValueError(f"unknown boundary policy {policy!r}")
    n_steps = u.grid.n_steps
    vals = u.values[:n_steps]
    values = np.zeros((n_steps, mesh.n_faces))
    left_of = -np.ones(mesh.n_faces, dtype=np.int64)
    # upstream cell of each face: the cell whose right face it is
    for c in range(mesh.n_cells):
        left_of[mesh.cell_faces[c, 1]] = c
    inflow = np.nonzero(left_of < 0)[0]
    filled = left_of >= 0
    values[:, filled] = vals[:, left_of[filled]] * speed
    if policy == "periodic":
        rightmost = int(np.argmax(mesh.cell_centroids[:, 0]))
        values[:, inflow] = vals[:, [rightmost]] * speed
    elif policy == "zero_flux":
        outflow = mesh.boundary_face_mask & filled
        values[:, inflow] = 0.0
        values[:, outflow] = 0.0
    else:  # upwind_zero: exterior value 0 feeds the inflow face
        values[:, inflow] = 0.0
    return FluxFamily(layout="colocated1d", mesh=mesh, grid=u.grid,
                      values=values, boundary_policy=policy)


def flux_dot_n(flux: FluxFamily) -> np.ndarray:
    """F_zeta^n . n_{P,zeta} per (step, cell, local face), shape (N, NC, nf)."""
    mesh = flux.mesh
    cf = mesh.cell_faces
    if flux.layout == "rt":
        vals = flux.values[:, cf]                     # (N, NC, nf, 2)
        return np.einsum("ncfd,cfd->ncf", vals, mesh.cell_face_normals)
    if flux.layout == "mac":
        return flux.values[:, cf] * flux.dual.cell_face_delta[None, :, :]
    return flux.values[:, cf] * mesh.cell_face_normals[None, :, :, 0]


def flux_divergence(flux: FluxFamily) -> np.ndarray:
    """sum_zeta |zeta| F . n per (step, cell); opposite faces paired first."""
    mesh = flux.mesh
    dots = flux_dot_n(flux)
    terms = mesh.face_measures[mesh.cell_faces][None, :, :] * dots
    if terms.shape[2] == 4:
        return (terms[:, :, 0] + terms[:, :, 2]) + (terms[:, :, 1] + terms[:, :, 3])
    return terms[:, :, 0] + terms[:, :, 1]


def assemble_convection(betas: BetaFamily, flux: FluxFamily, mesh, grid) -> np.ndarray:
    """C(U)_P^n = (d_t beta)_P^n + (1/|P|) sum |zeta| F_zeta^n . n_{P,zeta}."""
    if np.any(~np.isfinite(flux.values)):
        idx = np.argwhere(~np.isfinite(flux.values.reshape(flux.values.shape[0], mesh.n_faces, -1)))
        raise ValueError(f"missing flux on face {int(idx[0][1])} at step {int(idx[0][0])}")
    return dt_beta(betas, grid) + flux_divergence(flux) / mesh.cell_volumes[None, :]


def telescoping_defect(flux: FluxFamily):
    """Interior-face conservativity check per step.

    Returns (defect, scale): |sum_P sum_zeta |zeta| F.n - boundary-only sum|
    and the absolute flux mass sum_faces |zeta| ||F||, both shape (N,).
    """
    mesh = flux.mesh
    total = flux_divergence(flux).sum(axis=1)
    bfaces = np.nonzero(mesh.boundary_face_mask)[0]
    if flux.layout == "rt":
        bnd = np.einsum("nfd,fd->nf", flux.values[:, bfaces],
                        mesh.face_normals[bfaces])
        mags = np.sqrt((flux.values ** 2).sum(-1))
    elif flux.layout == "mac":
        bnd = flux.values[:, bfaces] * flux.dual.face_delta_first[None, bfaces]
        mags = np.abs(flux.values)
    else:
        bnd = flux.values[:, bfaces] * mesh.face_normals[bfaces, 0][None, :]
        mags = np.abs(flux.values)
    boundary_sum = (mesh.face_measures[bfaces][None, :] * bnd).sum(axis=1)
    scale = (mesh.face_measures[None, :] * mags).sum(axis=1)
    return np.abs(total - boundary_sum), scale
