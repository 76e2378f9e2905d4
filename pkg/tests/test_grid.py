import numpy as np
import pytest
import scipy.sparse as sp

from rdlab.errors import GridError
from rdlab.grid import (
    apply_diffusion, as_field, build_grid, constant_field, field_norm, gradient_sq, integrate_nodes,
    principal_eigenvalue, sine_field,
)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_weights_integrate_one_to_measure(bc):
    g = build_grid([2.5], [40], bc)
    assert integrate_nodes(g, np.ones(g.n_nodes)) == pytest.approx(2.5, rel=1e-14)
    g2 = build_grid([1.0, 3.0], [10, 12], bc)
    assert integrate_nodes(g2, np.ones(g2.n_nodes)) == pytest.approx(3.0, rel=1e-14)


def test_dirichlet_nodes_are_interior():
    g = build_grid([1.0], [9], "dirichlet")
    np.testing.assert_allclose(g.nodes[0], np.arange(1, 10) / 10)


def test_neumann_nodes_are_cell_centres():
    g = build_grid([1.0], [4], "neumann")
    np.testing.assert_allclose(g.nodes[0], [0.125, 0.375, 0.625, 0.875])


def test_dirichlet_sine_is_discrete_eigenvector():
    n = 50
    g = build_grid([1.0], [n], "dirichlet")
    h = g.spacing[0]
    u = np.sin(np.pi * g.nodes[0])
    lam_h = (2.0 - 2.0 * np.cos(np.pi * h)) / h**2
    np.testing.assert_allclose(-(g.laplacian @ u), lam_h * u, atol=1e-10)
    assert lam_h == pytest.approx(np.pi**2, rel=1e-3)


def test_neumann_constants_in_kernel():
    g = build_grid([1.0, 2.0], [7, 5], "neumann")
    np.testing.assert_allclose(g.laplacian @ np.ones(g.n_nodes), 0.0, atol=1e-12)


def test_2d_product_sine_eigenvalue():
    g = build_grid([1.0, 1.0], [30, 30], "dirichlet")
    u = sine_field(g, [1.0])[0]
    ratio = -(g.laplacian @ u) / u
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
    assert ratio[0] == pytest.approx(2 * np.pi**2, rel=2e-3)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_implicit_matrix_is_m_matrix(bc):
    g = build_grid([1.0], [20], bc)
    A = (sp.identity(g.n_nodes) - 0.1 * g.laplacian).toarray()
    off = A - np.diag(np.diag(A))
    assert np.all(np.diag(A) > 0) and np.all(off <= 0)
    assert np.all(np.linalg.inv(A) >= -1e-14)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_summation_by_parts(bc):
    # uniform h weights; the Dirichlet end correction is a quadrature choice only
    g = build_grid([1.0], [25], bc)
    rng = np.random.default_rng(3)
    u = rng.normal(size=g.n_nodes)
    h = g.spacing[0]
    assert -h * u @ (g.laplacian @ u) == pytest.approx(gradient_sq(g, u), rel=1e-12)


def test_sine_norms_match_continuum():
    g = build_grid([1.0], [400], "dirichlet")
    u = sine_field(g, [1.0])
    assert field_norm(g, u) ** 2 == pytest.approx(0.5, rel=1e-4)
    assert gradient_sq(g, u) == pytest.approx(np.pi**2 / 2, rel=1e-4)
    assert field_norm(g, u, "Linf") == pytest.approx(1.0, abs=1e-4)
    assert field_norm(g, u, "H1") == pytest.approx(np.pi / np.sqrt(2), rel=1e-4)


def test_lp_integrals_per_component():
    g = build_grid([2.0], [10], "neumann")
    u = constant_field(g, [1.0, 2.0])
    np.testing.assert_allclose(field_norm(g, u, "Lp", p=[2, 3]), [2.0, 16.0])
    with pytest.raises(GridError):
        field_norm(g, u, "Lp")
    with pytest.raises(GridError):
        field_norm(g, u, "Lp", p=0.5)
    with pytest.raises(GridError):
        field_norm(g, u, "W2")


def test_principal_eigenvalue_closed_form():
    assert principal_eigenvalue(build_grid([1.0], [10], "dirichlet")) == pytest.approx(np.pi**2)
    assert principal_eigenvalue(build_grid([1.0, 2.0], [10, 10], "dirichlet")) == pytest.approx(
        np.pi**2 * 1.25)
    assert principal_eigenvalue(build_grid([1.0], [10], "neumann")) == 0.0


def test_apply_diffusion_scales():
    g = build_grid([1.0], [10], "neumann")
    u = np.linspace(0, 1, 10) ** 2
    np.testing.assert_allclose(apply_diffusion(g, u, 3.0), 3.0 * (g.laplacian @ u))
    with pytest.raises(GridError):
        apply_diffusion(g, u, 0.0)
    with pytest.raises(GridError):
        apply_diffusion(g, u[:5], 1.0)


@pytest.mark.parametrize("args", [
    ([1.0, 1.0, 1.0], [4, 4, 4], "dirichlet"),
    ([1.0], [2], "dirichlet"),
    ([-1.0], [10], "neumann"),
    ([1.0], [10, 10], "neumann"),
    ([1.0], [10], "periodic"),
])
def test_build_grid_rejects(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_as_field_shape_checks():
    g = build_grid([1.0], [5], "neumann")
    assert as_field(g, np.zeros(5)).shape == (1, 5)
    with pytest.raises(GridError):
        as_field(g, np.zeros(4))
    with pytest.raises(GridError):
        as_field(g, np.zeros((2, 5)), d=3)


def test_nodes_read_only():
    g = build_grid([1.0], [5], "neumann")
    with pytest.raises(ValueError):
        g.nodes[0, 0] = 1.0
