"""Structured Q1 meshes of the unit square split at a vertical interface.

Node numbering is row-major with x running fastest: the node in column ``i``
and row ``j`` of an ``(nx+1) x (ny+1)`` grid has index ``j*(nx+1) + i``.
Elements are listed counterclockwise starting at their lower-left corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "VelocityField",
    "rotating_velocity",
    "SubdomainMesh",
    "CoupledMesh",
    "build_coupled_mesh",
    "build_global_mesh",
    "classify_boundary",
    "BC_MODES",
]

BC_MODES = ("all_dirichlet", "inflow_only")
_GEOM_TOL = 1e-14


@dataclass(frozen=True)
class VelocityField:
    """Wraps a vectorized ``(x, y) -> (ux, uy)`` evaluator."""

    evaluator: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ux, uy = self.evaluator(x, y)
        return np.broadcast_to(ux, x.shape).astype(float), np.broadcast_to(uy, x.shape).astype(float)

    @classmethod
    def constant(cls, cx: float, cy: float) -> "VelocityField":
        return cls(lambda x, y: (np.full_like(x, cx), np.full_like(y, cy)))


def rotating_velocity() -> VelocityField:
    """Solid body rotation about (0.5, 0.5) with period 2*pi."""
    return VelocityField(lambda x, y: (0.5 - y, x - 0.5))


@dataclass(frozen=True, eq=False)
class SubdomainMesh:
    """Tensor-product grid of bilinear quadrilaterals on ``[x0, x1] x [0, 1]``.

    ``interface_side`` is ``"right"`` when the interface is the line ``x = x1``
    (left subdomain), ``"left"`` when it is ``x = x0`` (right subdomain) and
    ``None`` for a mesh covering the whole domain.
    """

    nx: int
    ny: int
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    interface_side: str | None
    node_sets: Mapping[str, np.ndarray] = field(default_factory=dict)
    bc_mode: str | None = None

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def node_coords(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x_nodes, self.y_nodes)
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def elements(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        n0 = (j * (self.nx + 1) + i).ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @property
    def hx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def hy(self) -> float:
        return float(self.y_nodes[1] - self.y_nodes[0])

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def x0(self) -> float:
        return float(self.x_nodes[0])

    @property
    def x1(self) -> float:
        return float(self.x_nodes[-1])

    @property
    def interface_x(self) -> float | None:
        if self.interface_side == "right":
            return self.x1
        if self.interface_side == "left":
            return self.x0
        return None

    @property
    def interface_order(self) -> np.ndarray:
        """Interface node indices sorted by increasing y."""
        if self.interface_side is None:
            return np.empty(0, dtype=np.int64)
        col = self.nx if self.interface_side == "right" else 0
        return np.arange(self.ny + 1) * (self.nx + 1) + col

    @property
    def interface_coords(self) -> np.ndarray:
        return self.node_coords[self.interface_order]

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return self.node_sets["dirichlet"]

    @property
    def free_nodes(self) -> np.ndarray:
        """Interior and interface nodes in ascending index order."""
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.node_sets["dirichlet"]] = False
        return np.flatnonzero(mask)

    def boundary_normals(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Outer (non-interface) boundary edges as ``(node_indices, outward_normal)``."""
        nx, ny = self.nx, self.ny
        row = nx + 1
        edges = [
            (np.arange(nx + 1), np.array([0.0, -1.0])),
            (ny * row + np.arange(nx + 1), np.array([0.0, 1.0])),
        ]
        if self.interface_side != "left":
            edges.append((np.arange(ny + 1) * row, np.array([-1.0, 0.0])))
        if self.interface_side != "right":
            edges.append((np.arange(ny + 1) * row + nx, np.array([1.0, 0.0])))
        return edges


@dataclass(frozen=True, eq=False)
class CoupledMesh:
    left: SubdomainMesh
    right: SubdomainMesh
    split_x: float

    @property
    def n_interface(self) -> int:
        return self.left.ny + 1

    @property
    def interface_map(self) -> dict[int, int]:
        """Left interface node index -> right interface node index."""
        return dict(zip(self.left.interface_order.tolist(), self.right.interface_order.tolist()))

    def global_mesh(self) -> SubdomainMesh:
        """The single-domain mesh whose restriction gives ``left`` and ``right``."""
        x = np.concatenate([self.left.x_nodes, self.right.x_nodes[1:]])
        mesh = SubdomainMesh(
            nx=self.left.nx + self.right.nx,
            ny=self.left.ny,
            x_nodes=x,
            y_nodes=self.left.y_nodes,
            interface_side=None,
        )
        return mesh

    def restriction_indices(self, side: str) -> np.ndarray:
        """Global node index of every node of the ``side`` subdomain."""
        sub = self.left if side == "left" else self.right
        offset = 0 if side == "left" else self.left.nx
        n_global_row = self.left.nx + self.right.nx + 1
        i, j = np.meshgrid(np.arange(sub.nx + 1), np.arange(sub.ny + 1))
        return (j * n_global_row + i + offset).ravel()

    def to_global(self, left_full: np.ndarray, right_full: np.ndarray) -> np.ndarray:
        """Merge full nodal vectors onto the global grid; the interface trace comes from the left side."""
        out = np.empty((self.left.ny + 1) * (self.left.nx + self.right.nx + 1))
        out[self.restriction_indices("right")] = right_full
        out[self.restriction_indices("left")] = left_full
        return out


def _check_dims(nx, ny):
    for name, val in (("nx", nx), ("ny", ny)):
        if int(val) != val or val < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {val!r}")


def build_coupled_mesh(
    nx_per_subdomain: int,
    ny: int,
    split_x: float = 0.5,
    bc_mode: str = "all_dirichlet",
    velocity: VelocityField | None = None,
) -> CoupledMesh:
    """Split the unit square at ``x = split_x`` into two matching structured meshes.

    Both subdomains get ``nx_per_subdomain`` elements across and ``ny`` elements
    vertically, so their interface nodes coincide.
    """
    _check_dims(nx_per_subdomain, ny)
    if not 0.0 < split_x < 1.0:
        raise InvalidArgumentError(f"split_x must lie in (0, 1), got {split_x!r}")
    nx = int(nx_per_subdomain)
    y = np.linspace(0.0, 1.0, int(ny) + 1)
    xl = np.linspace(0.0, split_x, nx + 1)
    xr = np.linspace(split_x, 1.0, nx + 1)
    xl[-1] = xr[0] = split_x
    left = SubdomainMesh(nx, int(ny), xl, y, "right")
    right = SubdomainMesh(nx, int(ny), xr, y, "left")
    left = classify_boundary(left, bc_mode, velocity)
    right = classify_boundary(right, bc_mode, velocity)
    return CoupledMesh(left, right, float(split_x))


def build_global_mesh(
    nx: int,
    ny: int,
    bc_mode: str = "all_dirichlet",
    velocity: VelocityField | None = None,
) -> SubdomainMesh:
    """Single-domain mesh of the unit square with ``nx x ny`` elements."""
    _check_dims(nx, ny)
    mesh = SubdomainMesh(int(nx), int(ny), np.linspace(0.0, 1.0, nx + 1), np.linspace(0.0, 1.0, ny + 1), None)
    return classify_boundary(mesh, bc_mode, velocity)


def classify_boundary(
    mesh: SubdomainMesh,
    bc_mode: str = "all_dirichlet",
    velocity: VelocityField | None = None,
) -> SubdomainMesh:
    """Return a copy of ``mesh`` with its nodes split into interior, Dirichlet and interface sets.

    Interface nodes, including the two interface end points, are never
    Dirichlet. In ``inflow_only`` mode an outer boundary node is Dirichlet when
    ``u . n < 0`` on any outer edge it belongs to; remaining boundary nodes are
    free and are placed in the interior set.
    """
    if bc_mode not in BC_MODES:
        raise InvalidArgumentError(f"unknown bc_mode {bc_mode!r}; expected one of {BC_MODES}")
    if bc_mode == "inflow_only" and velocity is None:
        raise InvalidArgumentError("inflow_only classification needs a velocity field")

    n = mesh.n_nodes
    is_interface = np.zeros(n, dtype=bool)
    is_interface[mesh.interface_order] = True
    is_dirichlet = np.zeros(n, dtype=bool)
    coords = mesh.node_coords
    for nodes, normal in mesh.boundary_normals():
        if bc_mode == "all_dirichlet":
            is_dirichlet[nodes] = True
        else:
            ux, uy = velocity(coords[nodes, 0], coords[nodes, 1])
            is_dirichlet[nodes[ux * normal[0] + uy * normal[1] < 0.0]] = True
    is_dirichlet &= ~is_interface

    node_sets = {
        "interior": np.flatnonzero(~is_interface & ~is_dirichlet),
        "dirichlet": np.flatnonzero(is_dirichlet),
        "interface": mesh.interface_order.copy(),
    }
    return replace(mesh, node_sets=node_sets, bc_mode=bc_mode)
