import numpy as np
import pytest

from ivr_rom.assembly import assemble_operators, constant_boundary
from ivr_rom.bench.cases import initial_condition
from ivr_rom.ivr import CoupledFemState
from ivr_rom.mesh import build_coupled_mesh, rotating_velocity


def make_coupled(n=4, ny=None, kappa=1e-5, bc_mode="all_dirichlet", g=None, velocity=None):
    """Coupled mesh with assembled operators on both sides."""
    velocity = velocity or rotating_velocity()
    ny = n if ny is None else ny
    cm = build_coupled_mesh(n, ny, 0.5, bc_mode, velocity)
    g = g or constant_boundary(0.0)
    ops1 = assemble_operators(cm.left, kappa, velocity, None, g)
    ops2 = assemble_operators(cm.right, kappa, velocity, None, g)
    return cm, ops1, ops2


def bench_state(ops1, ops2):
    """Benchmark initial condition restricted to the free DOFs of both sides."""
    phis = []
    for ops in (ops1, ops2):
        xy = ops.mesh.node_coords
        phis.append(ops.restrict(initial_condition(xy[:, 0], xy[:, 1])))
    return CoupledFemState(*phis)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def coupled_8():
    return make_coupled(8)
