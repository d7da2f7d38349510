"""Implicit value recovery (IVR) coupling of two subdomain models.

The interface multiplier is eliminated through the dual Schur complement
``S = G1 M1^-1 G1^T + G2 M2^-1 G2^T``. Each right-hand side evaluation

1. forms the modified forces ``ft_i = f_i - (D_i + A_i) Phi_i`` (plus the
   Dirichlet lift contribution),
2. solves ``S lam = G1 M1^-1 ft_1 - G2 M2^-1 ft_2``,
3. returns ``M1^-1 (ft_1 - G1^T lam)`` and ``M2^-1 (ft_2 + G2^T lam)``.

The engine only needs each side to expose ``force``, ``solve_mass``, ``G``
and ``coupling_response``; :class:`FemSubdomain` implements it here and the
reduced model in :mod:`ivr_rom.hybrid` implements the same surface.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import OperatorSet, assemble_operators
from .errors import ConfigurationError, InvalidArgumentError, SingularSchurError
from .integrators import TimeIntegrator, integrate
from .mesh import SubdomainMesh, VelocityField

__all__ = [
    "FemSubdomain",
    "SchurOperator",
    "CoupledFemState",
    "IVRCoupler",
    "build_schur",
    "solve_lambda",
    "coupled_rhs",
    "ivr_advance",
    "monolithic_dae_step",
    "UncoupledSolver",
    "GlobalTrajectory",
    "global_fem_solve",
]

logger = logging.getLogger(__name__)


class FemSubdomain:
    """Full-order side: sparse operators plus a one-time mass factorization."""

    kind = "fem"

    def __init__(self, ops: OperatorSet):
        self.ops = ops
        self.K = ops.K
        self.G = ops.G
        self.c = ops.constant_force
        self._mass = spla.splu(ops.M.tocsc())
        self._response = None

    @property
    def n_state(self) -> int:
        return self.ops.n_free

    def force(self, state: np.ndarray) -> np.ndarray:
        return self.c - self.K @ state

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        return self._mass.solve(rhs)

    @property
    def coupling_response(self) -> np.ndarray:
        """Dense ``M^-1 G^T`` of shape ``(n_state, N_gamma)``."""
        if self._response is None:
            self._response = self._mass.solve(self.G.T.toarray())
        return self._response

    def lift(self, state: np.ndarray) -> np.ndarray:
        return self.ops.to_full(state)

    def initial_state(self, full_values: np.ndarray) -> np.ndarray:
        return self.ops.restrict(full_values).copy()


class SchurOperator:
    """Factorized interface Schur complement built from two sides.

    Cholesky is attempted first. When it fails (or the matrix is not
    symmetric to ``symmetry_tol``) and ``allow_lu_fallback`` is set, a pivoted
    LU factorization is used instead; a numerically singular matrix is then
    handled with a symmetric pseudo-inverse, which is exact here because the
    right-hand side always lies in the range of ``S``. Without the fallback
    any failure raises :class:`SingularSchurError`.
    """

    def __init__(
        self,
        left,
        right,
        *,
        allow_lu_fallback: bool = False,
        symmetry_tol: float = 1e-12,
        singular_rtol: float = 1e-13,
    ):
        if left.G.shape[0] != right.G.shape[0]:
            raise ConfigurationError(
                f"interface sizes differ: {left.G.shape[0]} vs {right.G.shape[0]}"
            )
        self.left = left
        self.right = right
        self.S = np.asarray(left.G @ left.coupling_response + right.G @ right.coupling_response)
        scale = max(np.abs(self.S).max(), np.finfo(float).tiny)
        self.asymmetry = float(np.abs(self.S - self.S.T).max() / scale)
        self.is_symmetric = self.asymmetry <= symmetry_tol
        eigs = la.eigvalsh(0.5 * (self.S + self.S.T))
        self.condition = float(eigs[-1] / eigs[0]) if eigs[0] > 0 else np.inf
        singular = not eigs[0] > singular_rtol * eigs[-1]
        self.method = "cholesky"
        try:
            if not self.is_symmetric:
                raise la.LinAlgError(f"Schur complement is not symmetric (asymmetry {self.asymmetry:.2e})")
            if singular:
                raise la.LinAlgError("Schur complement is numerically singular")
            self._factor = la.cho_factor(self.S)
        except la.LinAlgError as exc:
            if not allow_lu_fallback:
                raise SingularSchurError(f"Schur complement factorization failed: {exc}") from exc
            if singular:
                self.method = "pinv"
                self._factor = la.pinvh(0.5 * (self.S + self.S.T), rtol=singular_rtol)
            else:
                self.method = "lu"
                self._factor = la.lu_factor(self.S)
            warnings.warn(
                f"Cholesky of the Schur complement failed ({exc}); using {self.method}",
                RuntimeWarning,
                stacklevel=2,
            )
        logger.debug("Schur complement: size %d, method %s, cond %.3e", self.size, self.method, self.condition)

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.method == "cholesky":
            return la.cho_solve(self._factor, rhs, check_finite=False)
        if self.method == "lu":
            return la.lu_solve(self._factor, rhs, check_finite=False)
        return self._factor @ rhs


def build_schur(ops1: OperatorSet, ops2: OperatorSet) -> SchurOperator:
    """Assemble and Cholesky-factorize the FEM-FEM Schur complement."""
    return SchurOperator(FemSubdomain(ops1), FemSubdomain(ops2))


def solve_lambda(schur: SchurOperator, force1: np.ndarray, force2: np.ndarray) -> np.ndarray:
    """Interface flux from the two modified forces."""
    left, right = schur.left, schur.right
    rhs = left.G @ left.solve_mass(force1) - right.G @ right.solve_mass(force2)
    return schur.solve(rhs)


@dataclass
class CoupledFemState:
    phi1: np.ndarray
    phi2: np.ndarray
    t: float = 0.0


class IVRCoupler:
    """Right-hand side and time stepping for two coupled sides sharing a Schur operator."""

    def __init__(self, schur: SchurOperator):
        self.schur = schur
        self.left = schur.left
        self.right = schur.right
        self.n_left = self.left.n_state
        self.last_multiplier = None

    def evaluate(self, y1: np.ndarray, y2: np.ndarray):
        """Return ``(dy1/dt, dy2/dt, lam)`` for the current states."""
        left, right = self.left, self.right
        w1 = left.solve_mass(left.force(y1))
        w2 = right.solve_mass(right.force(y2))
        lam = self.schur.solve(left.G @ w1 - right.G @ w2)
        return w1 - left.coupling_response @ lam, w2 + right.coupling_response @ lam, lam

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        d1, d2, lam = self.evaluate(y[: self.n_left], y[self.n_left :])
        self.last_multiplier = lam
        return np.concatenate([d1, d2])

    def pack(self, y1, y2) -> np.ndarray:
        y1, y2 = np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)
        if len(y1) != self.n_left or len(y2) != self.right.n_state:
            raise InvalidArgumentError("state lengths do not match the subdomain models")
        return np.concatenate([y1, y2])

    def split(self, y: np.ndarray):
        return y[: self.n_left].copy(), y[self.n_left :].copy()

    def advance(
        self,
        y1,
        y2,
        integrator: TimeIntegrator,
        *,
        n_steps: int | None = None,
        final_time: float | None = None,
        t0: float = 0.0,
        callback: Callable | None = None,
        stride: int = 1,
    ):
        """Integrate both sides; ``callback(n, t, y1, y2)`` receives split states."""
        cb = None
        if callback is not None:
            cb = lambda n, t, y: callback(n, t, y[: self.n_left], y[self.n_left :])  # noqa: E731
        t, y = integrate(
            self.rhs,
            self.pack(y1, y2),
            integrator,
            n_steps=n_steps,
            final_time=final_time,
            t0=t0,
            callback=cb,
            stride=stride,
        )
        y1, y2 = self.split(y)
        return t, y1, y2


def _check_state(state: CoupledFemState, ops1: OperatorSet, ops2: OperatorSet):
    if len(state.phi1) != ops1.n_free or len(state.phi2) != ops2.n_free:
        raise InvalidArgumentError("state lengths do not match the operator sets")


def coupled_rhs(state: CoupledFemState, ops1: OperatorSet, ops2: OperatorSet, schur: SchurOperator):
    """Time derivatives of both FEM states with the multiplier recovered on the fly."""
    _check_state(state, ops1, ops2)
    d1, d2, _ = IVRCoupler(schur).evaluate(state.phi1, state.phi2)
    return d1, d2


def ivr_advance(
    state: CoupledFemState,
    integrator: TimeIntegrator,
    ops1: OperatorSet,
    ops2: OperatorSet,
    schur: SchurOperator,
    n_steps: int,
    callback: Callable | None = None,
    stride: int = 1,
) -> CoupledFemState:
    _check_state(state, ops1, ops2)
    t, y1, y2 = IVRCoupler(schur).advance(
        state.phi1, state.phi2, integrator, n_steps=n_steps, t0=state.t, callback=callback, stride=stride
    )
    return CoupledFemState(y1, y2, t)


def monolithic_dae_step(
    state: CoupledFemState,
    dt: float,
    ops1: OperatorSet,
    ops2: OperatorSet,
    *,
    return_multiplier: bool = False,
):
    """One forward Euler step through the full saddle-point system.

    Solves

        [ M1   0    G1^T ] [dPhi1]   [fbar1]
        [ 0    M2  -G2^T ] [dPhi2] = [fbar2]
        [ G1  -G2    0   ] [ lam ]   [  0  ]

    directly, without any Schur elimination. Used as a verification oracle.
    """
    _check_state(state, ops1, ops2)
    n1, n2, ng = ops1.n_free, ops2.n_free, ops1.n_interface
    K = sp.bmat(
        [
            [ops1.M, None, ops1.G.T],
            [None, ops2.M, -ops2.G.T],
            [ops1.G, -ops2.G, sp.csr_matrix((ng, ng)) if ng else None],
        ],
        format="csc",
    ) if ng else sp.block_diag([ops1.M, ops2.M], format="csc")
    fbar1 = ops1.constant_force - ops1.K @ state.phi1
    fbar2 = ops2.constant_force - ops2.K @ state.phi2
    rhs = np.concatenate([fbar1, fbar2, np.zeros(ng)])
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise ConfigurationError(f"saddle-point system is singular: {exc}") from exc
    sol = lu.solve(rhs)
    d1, d2, lam = sol[:n1], sol[n1 : n1 + n2], sol[n1 + n2 :]
    new = CoupledFemState(state.phi1 + dt * d1, state.phi2 + dt * d2, state.t + dt)
    if return_multiplier:
        return new, lam
    return new


class UncoupledSolver:
    """Method-of-lines integration of a single side without an interface."""

    def __init__(self, side):
        self.side = side

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.side.solve_mass(self.side.force(y))

    def advance(self, y0, integrator: TimeIntegrator, **kwargs):
        return integrate(self.rhs, y0, integrator, **kwargs)


@dataclass
class GlobalTrajectory:
    """Full nodal vectors of a single-domain run at the sampled times."""

    times: np.ndarray
    states: np.ndarray  # (n_samples, n_nodes)
    ops: OperatorSet

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]


def global_fem_solve(
    mesh: SubdomainMesh,
    kappa: float,
    velocity: VelocityField | None,
    source: Callable | None,
    g,
    integrator: TimeIntegrator,
    final_time: float,
    initial_condition: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    stride: int = 1,
    ops: OperatorSet | None = None,
) -> GlobalTrajectory:
    """Single-domain FEM run sampled every ``stride`` steps (plus the final time).

    ``initial_condition`` is interpolated at the nodes; Dirichlet entries are
    taken from the boundary data.
    """
    if mesh.interface_side is not None:
        raise InvalidArgumentError("global_fem_solve expects a mesh without an interface")
    if ops is None:
        ops = assemble_operators(mesh, kappa, velocity, source, g)
    side = FemSubdomain(ops)
    coords = mesh.node_coords
    y0 = side.initial_state(initial_condition(coords[:, 0], coords[:, 1]))

    times, states = [], []

    def record(n, t, y):
        times.append(t)
        states.append(ops.to_full(y))

    UncoupledSolver(side).advance(y0, integrator, final_time=final_time, callback=record, stride=stride)
    logger.debug("global FEM run: %d samples up to t=%g", len(times), times[-1])
    return GlobalTrajectory(np.array(times), np.array(states), ops)
