"""Finite element operators for the advection-diffusion subdomain problems.

Every matrix is assembled on the full node set with 2x2 Gauss quadrature and
then restricted to the free degrees of freedom (interior plus interface
nodes). Couplings to Dirichlet nodes are moved to the right-hand side through
``dirichlet_correction = -(D + A) beta``.

The advection matrix follows the weak form with the flux integrated by
parts, ``A_ij = -(u nu_j, grad nu_i)``, so the semi-discrete right-hand side
is ``f - (D + A) Phi``. When some outer boundary nodes are free (inflow-only
Dirichlet data) the outflow term ``int (u.n)^+ nu_j nu_i`` is added to ``A``
and the inflow data enter the load through ``int (u.n)^- g nu_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, UnsupportedConfigurationError
from .mesh import SubdomainMesh, VelocityField

__all__ = [
    "BoundaryData",
    "SubdomainIndexing",
    "OperatorSet",
    "element_matrices",
    "assemble_full_matrices",
    "outflow_boundary_matrix",
    "inflow_boundary_load",
    "assemble_load",
    "assemble_interface_coupling",
    "build_beta",
    "assemble_operators",
    "constant_boundary",
]

BoundaryData = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

_GAUSS_1D = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
_GAUSS_W_1D = np.array([0.5, 0.5])


def constant_boundary(value: float) -> BoundaryData:
    """Time-independent boundary data equal to ``value`` everywhere."""
    return lambda x, y, t=0.0: np.full(np.shape(x), float(value))


def _q1_reference():
    """Shape values and reference gradients at the 2x2 Gauss points on [0, 1]^2.

    Returns ``N (4q, 4)``, ``dN_dxi (4q, 4)``, ``dN_deta (4q, 4)``, point
    coordinates ``(4q, 2)`` and weights ``(4q,)``.
    """
    xi, eta = np.meshgrid(_GAUSS_1D, _GAUSS_1D, indexing="ij")
    xi, eta = xi.ravel(), eta.ravel()
    w = np.outer(_GAUSS_W_1D, _GAUSS_W_1D).ravel()
    N = np.column_stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dxi = np.column_stack([-(1 - eta), (1 - eta), eta, -eta])
    deta = np.column_stack([-(1 - xi), -xi, xi, (1 - xi)])
    return N, dxi, deta, np.column_stack([xi, eta]), w


def element_matrices(mesh: SubdomainMesh, kappa: float, velocity: VelocityField | None):
    """Per-element mass, diffusion and advection matrices.

    Mass and diffusion are identical on every element of a uniform grid and
    are returned as single ``(4, 4)`` arrays; advection depends on the
    velocity at the quadrature points and has shape ``(n_elements, 4, 4)``.
    """
    hx, hy = mesh.hx, mesh.hy
    N, dxi, deta, pts, w = _q1_reference()
    detJ = hx * hy
    dNdx, dNdy = dxi / hx, deta / hy

    Me = np.einsum("q,qi,qj->ij", w * detJ, N, N)
    De = kappa * np.einsum("q,qi,qj->ij", w * detJ, dNdx, dNdx) + kappa * np.einsum(
        "q,qi,qj->ij", w * detJ, dNdy, dNdy
    )

    coords = mesh.node_coords
    elems = mesh.elements
    if velocity is None:
        Ae = np.zeros((len(elems), 4, 4))
    else:
        origin = coords[elems[:, 0]]
        xq = origin[:, 0:1] + pts[None, :, 0] * hx
        yq = origin[:, 1:2] + pts[None, :, 1] * hy
        ux, uy = velocity(xq, yq)
        # u . grad(test_i) at each point, times trial_j
        adv = ux[:, :, None] * dNdx[None] + uy[:, :, None] * dNdy[None]
        Ae = -np.einsum("q,eqi,qj->eij", w * detJ, adv, N)
    return Me, De, Ae


def _scatter(elems, Ke, n):
    if Ke.ndim == 2:
        Ke = np.broadcast_to(Ke, (len(elems), 4, 4))
    rows = np.broadcast_to(elems[:, :, None], Ke.shape).ravel()
    cols = np.broadcast_to(elems[:, None, :], Ke.shape).ravel()
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _boundary_quadrature(mesh: SubdomainMesh, velocity: VelocityField):
    """Per outer-boundary edge: end nodes, P1 shape values, weights and ``u.n`` at 3 Gauss points."""
    gp, gw = np.polynomial.legendre.leggauss(3)
    s, w = 0.5 * (gp + 1.0), 0.5 * gw
    shape = np.column_stack([1.0 - s, s])
    coords = mesh.node_coords
    for nodes, normal in mesh.boundary_normals():
        a, b = nodes[:-1], nodes[1:]
        pa, pb = coords[a], coords[b]
        length = np.linalg.norm(pb - pa, axis=1)
        xq = pa[:, None, 0] + s[None, :] * (pb - pa)[:, None, 0]
        yq = pa[:, None, 1] + s[None, :] * (pb - pa)[:, None, 1]
        ux, uy = velocity(xq, yq)
        un = ux * normal[0] + uy * normal[1]
        yield np.column_stack([a, b]), shape, w[None, :] * length[:, None], un, (xq, yq)


def outflow_boundary_matrix(mesh: SubdomainMesh, velocity: VelocityField) -> sp.csr_matrix:
    """``B_ij = int (u.n)^+ nu_j nu_i`` over the outer (non-interface) boundary.

    Adding ``B`` to the advection matrix lets the advective flux leave through
    free outflow nodes instead of imposing zero total flux there.
    """
    rows, cols, vals = [], [], []
    for seg, shape, wq, un, _ in _boundary_quadrature(mesh, velocity):
        Be = np.einsum("eq,qi,qj->eij", np.maximum(un, 0.0) * wq, shape, shape)
        rows.append(np.broadcast_to(seg[:, :, None], Be.shape).ravel())
        cols.append(np.broadcast_to(seg[:, None, :], Be.shape).ravel())
        vals.append(Be.ravel())
    n = mesh.n_nodes
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def inflow_boundary_load(mesh: SubdomainMesh, velocity: VelocityField, g: BoundaryData | None, t: float = 0.0):
    """``int (u.n)^- g nu_i`` over the outer boundary, with ``(u.n)^- = max(-u.n, 0)``.

    Companion of :func:`outflow_boundary_matrix`: free nodes whose support
    touches an inflow stretch receive the inflow data weakly, so constants
    are transported exactly.
    """
    out = np.zeros(mesh.n_nodes)
    if g is None:
        return out
    for seg, shape, wq, un, (xq, yq) in _boundary_quadrature(mesh, velocity):
        gq = np.broadcast_to(np.asarray(g(xq, yq, t), dtype=float), xq.shape)
        fe = np.einsum("eq,qi->ei", np.maximum(-un, 0.0) * wq * gq, shape)
        out += np.bincount(seg.ravel(), weights=fe.ravel(), minlength=mesh.n_nodes)
    return out


def assemble_full_matrices(
    mesh: SubdomainMesh,
    kappa: float,
    velocity: VelocityField | None,
    outflow: bool = False,
):
    """Mass, diffusion and advection matrices on all nodes (CSR).

    With ``outflow=True`` the advection matrix also carries the outflow
    boundary term from :func:`outflow_boundary_matrix`.
    """
    if kappa < 0:
        raise InvalidArgumentError(f"diffusivity must be non-negative, got {kappa!r}")
    Me, De, Ae = element_matrices(mesh, kappa, velocity)
    elems, n = mesh.elements, mesh.n_nodes
    M = _scatter(elems, Me, n)
    D = _scatter(elems, De, n) if kappa > 0 else sp.csr_matrix((n, n))
    A = _scatter(elems, Ae, n)
    if outflow and velocity is not None:
        A = (A + outflow_boundary_matrix(mesh, velocity)).tocsr()
    return M, D, A


def assemble_load(mesh: SubdomainMesh, source: Callable | None) -> np.ndarray:
    """Load vector ``(f, nu_i)`` on all nodes."""
    n = mesh.n_nodes
    if source is None:
        return np.zeros(n)
    N, _, _, pts, w = _q1_reference()
    elems = mesh.elements
    origin = mesh.node_coords[elems[:, 0]]
    xq = origin[:, 0:1] + pts[None, :, 0] * mesh.hx
    yq = origin[:, 1:2] + pts[None, :, 1] * mesh.hy
    fq = np.broadcast_to(np.asarray(source(xq, yq), dtype=float), xq.shape)
    fe = np.einsum("q,eq,qi->ei", w * mesh.hx * mesh.hy, fq, N)
    return np.bincount(elems.ravel(), weights=fe.ravel(), minlength=n)


@dataclass(frozen=True, eq=False)
class SubdomainIndexing:
    """Map between free-DOF positions and mesh node indices."""

    free_dof_order: np.ndarray
    interface_dof_positions: np.ndarray
    n_nodes: int

    @classmethod
    def from_mesh(cls, mesh: SubdomainMesh) -> "SubdomainIndexing":
        free = mesh.free_nodes
        pos = np.full(mesh.n_nodes, -1, dtype=np.int64)
        pos[free] = np.arange(len(free))
        return cls(free, pos[mesh.interface_order], mesh.n_nodes)

    @property
    def n_free(self) -> int:
        return len(self.free_dof_order)


def assemble_interface_coupling(mesh: SubdomainMesh, multiplier_coords: np.ndarray | None = None):
    """Interface matrix ``G_ij = (nu_j, mu_i)_gamma`` of shape ``(N_gamma, N_free)``.

    The multiplier basis is the piecewise linear trace space on the given
    interface nodes. Only matching multiplier and trace meshes are supported.
    """
    indexing = SubdomainIndexing.from_mesh(mesh)
    if mesh.interface_side is None:
        return sp.csr_matrix((0, indexing.n_free))
    trace_coords = mesh.interface_coords
    if multiplier_coords is None:
        multiplier_coords = trace_coords
    multiplier_coords = np.asarray(multiplier_coords, dtype=float)
    if multiplier_coords.shape != trace_coords.shape or not np.allclose(
        multiplier_coords, trace_coords, rtol=0.0, atol=1e-14
    ):
        raise UnsupportedConfigurationError("multiplier nodes must coincide with the interface nodes")

    y = trace_coords[:, 1]
    lengths = np.diff(y)
    n_gamma = len(y)
    # 1D P1 mass matrix on the interface
    diag = np.zeros(n_gamma)
    diag[:-1] += lengths / 3.0
    diag[1:] += lengths / 3.0
    off = lengths / 6.0
    mass1d = sp.diags([off, diag, off], [-1, 0, 1], shape=(n_gamma, n_gamma), format="coo")
    cols = indexing.interface_dof_positions[mass1d.col]
    return sp.coo_matrix((mass1d.data, (mass1d.row, cols)), shape=(n_gamma, indexing.n_free)).tocsr()


def build_beta(mesh: SubdomainMesh, g: BoundaryData | None, t: float = 0.0) -> np.ndarray:
    """Full-length lift vector: ``g`` at Dirichlet nodes, zero elsewhere."""
    beta = np.zeros(mesh.n_nodes)
    if g is None:
        return beta
    nodes = mesh.dirichlet_nodes
    xy = mesh.node_coords[nodes]
    beta[nodes] = g(xy[:, 0], xy[:, 1], t)
    return beta


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Free-DOF operators of one subdomain.

    ``M``, ``D``, ``A`` are ``(N_free, N_free)`` CSR matrices, ``G`` is
    ``(N_gamma, N_free)``. ``beta`` has full (all-node) length while ``f``
    and ``dirichlet_correction`` live on the free DOFs.
    """

    mesh: SubdomainMesh
    indexing: SubdomainIndexing
    M: sp.csr_matrix
    D: sp.csr_matrix
    A: sp.csr_matrix
    G: sp.csr_matrix
    f: np.ndarray
    beta: np.ndarray
    dirichlet_correction: np.ndarray
    kappa: float

    @property
    def n_free(self) -> int:
        return self.indexing.n_free

    @property
    def n_interface(self) -> int:
        return self.G.shape[0]

    @property
    def K(self) -> sp.csr_matrix:
        """Combined transport operator ``D + A``."""
        return (self.D + self.A).tocsr()

    @property
    def constant_force(self) -> np.ndarray:
        """State-independent part of the right-hand side, ``f - (D + A) beta`` on free rows."""
        return self.f + self.dirichlet_correction

    def to_full(self, free_values: np.ndarray) -> np.ndarray:
        """Insert free-DOF values into a copy of ``beta``."""
        full = self.beta.copy()
        full[self.indexing.free_dof_order] = free_values
        return full

    def restrict(self, full_values: np.ndarray) -> np.ndarray:
        return np.asarray(full_values)[self.indexing.free_dof_order]


def assemble_operators(
    mesh: SubdomainMesh,
    kappa: float,
    velocity: VelocityField | None,
    source: Callable | None = None,
    g: BoundaryData | None = None,
    multiplier_coords: np.ndarray | None = None,
) -> OperatorSet:
    """Assemble every operator the semi-discrete subdomain problem needs."""
    if kappa < 0:
        raise InvalidArgumentError(f"diffusivity must be non-negative, got {kappa!r}")
    if not mesh.node_sets:
        raise InvalidArgumentError("mesh must be classified before assembly")
    indexing = SubdomainIndexing.from_mesh(mesh)
    free = indexing.free_dof_order
    weak_inflow = mesh.bc_mode == "inflow_only" and velocity is not None
    M, D, A = assemble_full_matrices(mesh, kappa, velocity, outflow=weak_inflow)
    load = assemble_load(mesh, source)
    if weak_inflow:
        load = load + inflow_boundary_load(mesh, velocity, g)
    beta = build_beta(mesh, g, 0.0)
    correction = -((D + A) @ beta)[free]
    G = assemble_interface_coupling(mesh, multiplier_coords)
    sub = lambda mat: mat[free][:, free].tocsr()  # noqa: E731
    return OperatorSet(
        mesh=mesh,
        indexing=indexing,
        M=sub(M),
        D=sub(D),
        A=sub(A),
        G=G,
        f=load[free],
        beta=beta,
        dirichlet_correction=correction,
        kappa=float(kappa),
    )
