import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from ivr_rom.assembly import (
    assemble_full_matrices,
    assemble_interface_coupling,
    assemble_load,
    assemble_operators,
    build_beta,
    constant_boundary,
    element_matrices,
    outflow_boundary_matrix,
)
from ivr_rom.errors import InvalidArgumentError, UnsupportedConfigurationError
from ivr_rom.mesh import VelocityField, build_coupled_mesh, build_global_mesh, rotating_velocity

from conftest import make_coupled


def _bilinear(x0, y0, hx, hy):
    """Shape functions of one element, counterclockwise from (x0, y0), and their gradients."""

    def phi(x, y):
        s, t = (x - x0) / hx, (y - y0) / hy
        return np.array([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t])

    def grad(x, y):
        s, t = (x - x0) / hx, (y - y0) / hy
        gx = np.array([-(1 - t), 1 - t, t, -t]) / hx
        gy = np.array([-(1 - s), -s, s, 1 - s]) / hy
        return gx, gy

    return phi, grad


def _oracle_element(x0, y0, hx, hy, velocity, kappa, order=8):
    """Tensor Gauss-Legendre quadrature of high order on one element."""
    p, w = leggauss(order)
    s, ws = 0.5 * (p + 1), 0.5 * w
    phi, grad = _bilinear(x0, y0, hx, hy)
    M = np.zeros((4, 4))
    D = np.zeros((4, 4))
    A = np.zeros((4, 4))
    for a, wa in zip(s, ws):
        for b, wb in zip(s, ws):
            x, y = x0 + a * hx, y0 + b * hy
            wt = wa * wb * hx * hy
            N = phi(x, y)
            gx, gy = grad(x, y)
            ux, uy = velocity(np.array(x), np.array(y))
            M += wt * np.outer(N, N)
            D += wt * kappa * (np.outer(gx, gx) + np.outer(gy, gy))
            A -= wt * np.outer(ux * gx + uy * gy, N)
    return M, D, A


def test_single_element_mass():
    mesh = build_global_mesh(1, 1)
    h = mesh.h
    M, _, _ = assemble_full_matrices(mesh, 0.0, None)
    expected = h**2 / 36 * np.array([[4, 2, 1, 2], [2, 4, 2, 1], [1, 2, 4, 2], [2, 1, 2, 4]])
    # node order of a 1x1 grid: (0,0), (1,0), (0,1), (1,1); element is CCW
    elem = mesh.elements[0]
    np.testing.assert_allclose(M.toarray()[np.ix_(elem, elem)], expected, rtol=1e-14)


def test_zero_diffusion():
    mesh = build_global_mesh(4, 4)
    _, D, _ = assemble_full_matrices(mesh, 0.0, rotating_velocity())
    assert D.nnz == 0 or np.abs(D).max() == 0


def test_negative_kappa():
    mesh = build_global_mesh(2, 2)
    with pytest.raises(InvalidArgumentError):
        assemble_operators(mesh, -1.0, None)


@pytest.mark.parametrize("velocity", [VelocityField.constant(0.7, 0.0), rotating_velocity()])
def test_element_matrices_match_quadrature_oracle(velocity):
    mesh = build_global_mesh(3, 2)
    Me, De, Ae = element_matrices(mesh, 0.3, velocity)
    for e, elem in enumerate(mesh.elements):
        x0, y0 = mesh.node_coords[elem[0]]
        M, D, A = _oracle_element(x0, y0, mesh.hx, mesh.hy, velocity, 0.3)
        np.testing.assert_allclose(Me, M, atol=1e-15)
        np.testing.assert_allclose(De, D, atol=1e-14)
        np.testing.assert_allclose(Ae[e], A, atol=1e-15)


def test_constant_velocity_column_sums():
    # sum_i A_ij = -(u nu_j, grad 1) = 0 for every trial function
    mesh = build_global_mesh(1, 1)
    _, _, A = assemble_full_matrices(mesh, 0.0, VelocityField.constant(2.0, 0.0))
    np.testing.assert_allclose(A.toarray().sum(axis=0), 0.0, atol=1e-15)
    # row sums: -(u, grad nu_i) = -c * int d(nu_i)/dx
    h = mesh.h
    xy = mesh.node_coords
    expected = -2.0 * np.where(xy[:, 0] > 0.5, 1.0, -1.0) * h / 2
    np.testing.assert_allclose(A.toarray().sum(axis=1), expected, atol=1e-15)


def test_operator_symmetries():
    _, ops1, _ = make_coupled(4, kappa=1e-2)
    for mat in (ops1.M, ops1.D):
        dense = mat.toarray()
        assert np.abs(dense - dense.T).max() <= 1e-12 * np.abs(dense).max()
    assert np.linalg.eigvalsh(ops1.M.toarray()).min() > 0
    assert np.linalg.eigvalsh(ops1.D.toarray()).min() > -1e-14


def test_interface_block_ny2():
    cm = build_coupled_mesh(2, 2, 0.5)
    expected = np.array([[2, 1, 0], [1, 4, 1], [0, 1, 2]]) / 12
    blocks = []
    for side in (cm.left, cm.right):
        ops = assemble_operators(side, 0.0, None)
        G = ops.G.toarray()
        pos = ops.indexing.interface_dof_positions
        np.testing.assert_allclose(G[:, pos], expected, rtol=1e-14)
        others = np.setdiff1d(np.arange(ops.n_free), pos)
        assert np.all(G[:, others] == 0.0)
        blocks.append(G[:, pos])
    np.testing.assert_array_equal(blocks[0], blocks[1])


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(1, 9))
def test_interface_row_sums(nx, ny):
    cm = build_coupled_mesh(nx, ny, 0.5)
    ops = assemble_operators(cm.left, 0.0, None)
    # int over gamma of the hat function mu_i: h for interior nodes, h/2 at the ends
    h = 1.0 / ny
    expected = np.full(ny + 1, h)
    expected[[0, -1]] = h / 2
    np.testing.assert_allclose(np.asarray(ops.G.sum(axis=1)).ravel(), expected, rtol=1e-13)


def test_interface_multiplier_mismatch():
    cm = build_coupled_mesh(2, 2, 0.5)
    wrong = cm.left.interface_coords + [0.0, 0.01]
    with pytest.raises(UnsupportedConfigurationError):
        assemble_interface_coupling(cm.left, wrong)
    with pytest.raises(UnsupportedConfigurationError):
        assemble_interface_coupling(cm.left, cm.left.interface_coords[:2])


def test_multiplier_choice_immaterial():
    cm = build_coupled_mesh(3, 4, 0.5)
    G_own = assemble_interface_coupling(cm.left)
    G_other = assemble_interface_coupling(cm.left, cm.right.interface_coords)
    np.testing.assert_array_equal(G_own.toarray(), G_other.toarray())


def test_beta():
    cm = build_coupled_mesh(3, 3, 0.5)
    mesh = cm.left
    assert np.all(build_beta(mesh, constant_boundary(0.0)) == 0.0)
    beta = build_beta(mesh, constant_boundary(1.0))
    assert np.all(beta[mesh.dirichlet_nodes] == 1.0)
    assert np.all(beta[mesh.free_nodes] == 0.0)
    assert np.array_equal(beta, build_beta(mesh, constant_boundary(1.0), t=3.0))


def test_dirichlet_correction_matches_definition():
    g = lambda x, y, t=0.0: 1.0 + x * y  # noqa: E731
    cm = build_coupled_mesh(3, 3, 0.5)
    u = rotating_velocity()
    ops = assemble_operators(cm.left, 0.1, u, None, g)
    M, D, A = assemble_full_matrices(cm.left, 0.1, u)
    free = ops.indexing.free_dof_order
    np.testing.assert_allclose(ops.dirichlet_correction, -((D + A) @ ops.beta)[free], atol=1e-15)


def test_assembly_linearity_two_elements():
    mesh = build_global_mesh(2, 1)
    u = rotating_velocity()
    Me, De, Ae = element_matrices(mesh, 0.5, u)
    M, D, A = assemble_full_matrices(mesh, 0.5, u)
    n = mesh.n_nodes
    Ms, Ds, As = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    for e, elem in enumerate(mesh.elements):
        idx = np.ix_(elem, elem)
        Ms[idx] += Me
        Ds[idx] += De
        As[idx] += Ae[e]
    np.testing.assert_allclose(M.toarray(), Ms, atol=1e-16)
    np.testing.assert_allclose(D.toarray(), Ds, atol=1e-16)
    np.testing.assert_allclose(A.toarray(), As, atol=1e-16)


def test_load_vector_against_exact_integral():
    mesh = build_global_mesh(4, 4)
    f = assemble_load(mesh, lambda x, y: np.ones_like(x))
    assert f.sum() == pytest.approx(1.0, rel=1e-14)
    f = assemble_load(mesh, lambda x, y: x)
    assert f.sum() == pytest.approx(0.5, rel=1e-14)


def _boundary_flux_oracle(mesh, velocity, phi, outflow_only):
    """0.5 * int (u.n) phi^2 (or its outflow part) over the outer boundary, fine Gauss rule."""
    p, w = leggauss(6)
    s, ws = 0.5 * (p + 1), 0.5 * w
    total = 0.0
    xy = mesh.node_coords
    for nodes, normal in mesh.boundary_normals():
        for a, b in zip(nodes[:-1], nodes[1:]):
            pa, pb = xy[a], xy[b]
            L = np.linalg.norm(pb - pa)
            for si, wi in zip(s, ws):
                x, y = pa + si * (pb - pa)
                ux, uy = velocity(np.array(x), np.array(y))
                un = ux * normal[0] + uy * normal[1]
                if outflow_only:
                    un = max(un, 0.0)
                val = (1 - si) * phi[a] + si * phi[b]
                total += wi * L * un * val**2
    return total


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_advection_energy_identity(seed):
    # phi^T A phi = -(u phi, grad phi) = -0.5 * int (u.n) phi^2 for divergence-free u
    rng = np.random.default_rng(seed)
    # even grid: u.n changes sign only at nodes, so both rules integrate exactly
    mesh = build_global_mesh(4, 4)
    u = rotating_velocity()
    phi = rng.standard_normal(mesh.n_nodes)
    _, _, A = assemble_full_matrices(mesh, 0.0, u)
    assert phi @ A @ phi == pytest.approx(-0.5 * _boundary_flux_oracle(mesh, u, phi, False), abs=1e-12)
    B = outflow_boundary_matrix(mesh, u)
    assert phi @ B @ phi == pytest.approx(_boundary_flux_oracle(mesh, u, phi, True), abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([("all_dirichlet", 1e-5), ("inflow_only", 0.0), ("inflow_only", 1e-3)]))
def test_transport_operator_is_dissipative(seed, case):
    mode, kappa = case
    u = rotating_velocity()
    mesh = build_global_mesh(6, 6, mode, u)
    ops = assemble_operators(mesh, kappa, u)
    phi = np.random.default_rng(seed).standard_normal(ops.n_free)
    sym = ops.D + 0.5 * (ops.A + ops.A.T)
    assert phi @ sym @ phi >= -1e-10


def test_to_full_restrict_roundtrip():
    _, ops, _ = make_coupled(3, g=constant_boundary(2.0))
    vals = np.arange(ops.n_free, dtype=float)
    full = ops.to_full(vals)
    assert np.array_equal(ops.restrict(full), vals)
    assert np.all(full[ops.mesh.dirichlet_nodes] == 2.0)
    assert sp.issparse(ops.M) and ops.G.shape == (ops.n_interface, ops.n_free)
