"""Independent brute-force oracles shared by the unit and acceptance tests."""

import numpy as np

from fvlab.consistency import LOCAL_OPPOSITE


def brute_force_flux_residual(flux, q, v, pair, mesh, grid, layout, dual):
    """Enumerate the flux-residual term table with scalar arithmetic.

    Follows the documented (step, interior cell, local face, piece) layout
    and the same per-term operation order as ``residual_flux_terms``, so the
    two tables agree bit for bit.
    """
    n_steps = grid.n_steps
    interior = np.nonzero(mesh.interior_cell_mask)[0]
    nf = mesh.cell_faces.shape[1]
    npieces = {"rt": 4, "mac": 2, "colocated1d": 1}[layout]
    terms = np.empty((n_steps, interior.size, nf, npieces))
    for ni in range(n_steps):
        dt = grid.steps[ni]
        for ii, c in enumerate(interior):
            coef = mesh.cell_diameters[c] / mesh.cell_volumes[c]
            for k in range(nf):
                f = mesh.cell_faces[c, k]
                area = mesh.face_measures[f]
                if layout == "rt":
                    fdot = (flux.values[ni, f, 0] * mesh.cell_face_normals[c, k, 0]
                            + flux.values[ni, f, 1] * mesh.cell_face_normals[c, k, 1])
                elif layout == "mac":
                    fdot = flux.values[ni, f] * dual.cell_face_delta[c, k]
                else:
                    fdot = flux.values[ni, f] * mesh.cell_face_normals[c, k, 0]
                for p in range(npieces):
                    if layout == "rt":
                        fp = mesh.cell_faces[c, p]
                        gq = pair.g(q.values[ni, c])
                        piece = gq * (v.values[ni, fp, 0]
                                      * mesh.cell_face_normals[c, k, 0]
                                      + v.values[ni, fp, 1]
                                      * mesh.cell_face_normals[c, k, 1])
                        meas = 0.25 * mesh.cell_volumes[c]
                    elif layout == "mac":
                        kk = k if p == 0 else LOCAL_OPPOSITE[k]
                        fp = mesh.cell_faces[c, kk]
                        gq = pair.g(q.values[ni, c])
                        piece = gq * (v.values[ni, fp] * dual.cell_face_delta[c, k])
                        meas = 0.5 * mesh.cell_volumes[c]
                    else:
                        fq = pair.f(q.values[ni, c])
                        piece = fq * mesh.cell_face_normals[c, k, 0]
                        meas = mesh.cell_volumes[c]
                    t = dt * coef
                    t = t * area
                    t = t * meas
                    t = t * abs(fdot - piece)
                    terms[ni, ii, k, p] = t
    return terms
