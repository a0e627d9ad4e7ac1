import numpy as np
import pytest

from fvlab.geometry import build_cartesian, build_intervals, build_perturbed_quads
from fvlab.quadrature import (BoxQuadrature, CellQuadrature, FaceQuadrature,
                              composite_gauss_legendre, gauss_legendre)


def test_gauss_legendre_basics():
    nodes, weights = gauss_legendre(4)
    assert abs(weights.sum() - 2.0) < 1e-14
    # exact for degree 7
    for k in range(8):
        exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
        assert abs(np.dot(weights, nodes ** k) - exact) < 1e-14


def test_composite_rule_covers_interval():
    nodes, weights = composite_gauss_legendre(3, 5)
    assert nodes.size == 15
    assert abs(weights.sum() - 2.0) < 1e-14
    assert abs(np.dot(weights, nodes ** 4) - 2.0 / 5) < 1e-14


def test_bad_order_rejected():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        composite_gauss_legendre(2, 0)


def test_cell_means_constant_bitwise():
    mesh = build_perturbed_quads(5, 4, amplitude=0.2, seed=3)
    quad = CellQuadrature(mesh, 4)
    means = quad.cell_means(lambda x: np.full(x.shape[0], 3.0))
    assert np.all(means == 3.0)


def test_cell_means_affine_hits_centroid():
    mesh = build_perturbed_quads(6, 6, amplitude=0.15, seed=11)
    quad = CellQuadrature(mesh, 4)
    means = quad.cell_means(lambda x: 2.0 * x[:, 0] - 0.5 * x[:, 1] + 1.0)
    expect = 2.0 * mesh.cell_centroids[:, 0] - 0.5 * mesh.cell_centroids[:, 1] + 1.0
    assert np.abs(means - expect).max() < 1e-14


def test_cell_means_polynomial_exact_to_1e12():
    # sampling exactness contract: polynomials up to the rule's degree
    mesh = build_cartesian(4, 4)
    quad = CellQuadrature(mesh, 4)

    def poly(x):
        return (x[:, 0] ** 3) * (x[:, 1] ** 2) - 2.0 * x[:, 1] ** 3 + x[:, 0]

    oracle = CellQuadrature(mesh, 8)
    assert np.abs(quad.cell_means(poly) - oracle.cell_means(poly)).max() < 1e-12


def test_cell_integrals_sum_to_domain_integral():
    mesh = build_perturbed_quads(8, 8, amplitude=0.2, seed=7)
    quad = CellQuadrature(mesh, 6)
    total = quad.cell_integrals(lambda x: np.sin(np.pi * x[:, 0])
                                * np.sin(np.pi * x[:, 1])).sum()
    assert abs(total - 4.0 / np.pi ** 2) < 1e-10


def test_face_means_linear_exact():
    mesh = build_cartesian(3, 3)
    fq = FaceQuadrature(mesh, 2)
    means = fq.face_means(lambda x: x[:, 0] + 2.0 * x[:, 1])
    expect = mesh.face_midpoints[:, 0] + 2.0 * mesh.face_midpoints[:, 1]
    assert np.abs(means - expect).max() < 1e-14


def test_1d_cell_rule():
    mesh = build_intervals(8)
    quad = CellQuadrature(mesh, 4)
    means = quad.cell_means(lambda x: x[:, 0] ** 2)
    # mean of s^2 over [a,b] = (a^2+ab+b^2)/3
    edges = np.linspace(0, 1, 9)
    a, b = edges[:-1], edges[1:]
    assert np.abs(means - (a * a + a * b + b * b) / 3.0).max() < 1e-14


def test_box_quadrature_matches_closed_form():
    box = BoxQuadrature([(0.0, 1.0), (0.0, 2.0)], panels=3, order=6)
    val = box.integrate(lambda p: np.sin(p[:, 0]) * p[:, 1])
    assert abs(val - (1 - np.cos(1.0)) * 2.0) < 1e-12
