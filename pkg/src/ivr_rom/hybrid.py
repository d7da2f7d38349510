"""Online ROM-FEM and ROM-ROM coupling.

A reduced side exposes the same surface as :class:`~ivr_rom.ivr.FemSubdomain`
(``force``, ``solve_mass``, ``G``, ``coupling_response``), so both coupling
flavours run through the same :class:`~ivr_rom.ivr.IVRCoupler`. Reduced
states stay in modal coordinates while stepping and are lifted with
``Phi = U phi + beta`` only for output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as la

from .assembly import OperatorSet
from .errors import ConfigurationError, InvalidArgumentError
from .integrators import TimeIntegrator
from .ivr import FemSubdomain, IVRCoupler, SchurOperator, UncoupledSolver
from .pod import ReducedOperatorSet

__all__ = [
    "RomSubdomain",
    "HybridSide",
    "HybridSchur",
    "HybridResult",
    "hybrid_rhs",
    "hybrid_advance",
    "lift",
    "advance_uncoupled",
]


class RomSubdomain:
    """Galerkin ROM side built from projected operators."""

    kind = "rom"

    def __init__(self, reduced: ReducedOperatorSet):
        self.reduced = reduced
        self.basis = reduced.basis
        self.K = reduced.K
        self.G = reduced.G
        self.c = reduced.constant_force
        self._factor = reduced.mass_factor or la.cho_factor(reduced.M)
        self._response = None

    @property
    def n_state(self) -> int:
        return self.reduced.n_modes

    def force(self, state: np.ndarray) -> np.ndarray:
        return self.c - self.K @ state

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        return la.cho_solve(self._factor, rhs, check_finite=False)

    @property
    def coupling_response(self) -> np.ndarray:
        if self._response is None:
            self._response = la.cho_solve(self._factor, self.G.T)
        return self._response

    def lift(self, state: np.ndarray) -> np.ndarray:
        return self.basis.U @ state + self.basis.beta

    def initial_state(self, full_values: np.ndarray) -> np.ndarray:
        """Orthogonal projection ``U^T (x - beta)`` of a full nodal vector."""
        return self.basis.U.T @ (np.asarray(full_values) - self.basis.beta)


@dataclass(eq=False)
class HybridSide:
    """One subdomain of a hybrid coupling: its model and current state."""

    kind: str
    state: np.ndarray
    model: FemSubdomain | RomSubdomain = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("fem", "rom"):
            raise InvalidArgumentError(f"unknown side kind {self.kind!r}")
        self.state = np.asarray(self.state, dtype=float)
        if self.state.shape != (self.model.n_state,):
            raise InvalidArgumentError(
                f"{self.kind} state has length {self.state.size}, expected {self.model.n_state}"
            )

    @classmethod
    def fem(cls, ops: OperatorSet | FemSubdomain, state=None, full_state=None) -> "HybridSide":
        model = ops if isinstance(ops, FemSubdomain) else FemSubdomain(ops)
        return cls("fem", _initial(model, state, full_state), model)

    @classmethod
    def rom(cls, reduced: ReducedOperatorSet | RomSubdomain, state=None, full_state=None) -> "HybridSide":
        model = reduced if isinstance(reduced, RomSubdomain) else RomSubdomain(reduced)
        return cls("rom", _initial(model, state, full_state), model)

    @property
    def ops(self):
        return self.model.ops if self.kind == "fem" else self.model.reduced

    @property
    def basis(self):
        return self.model.basis if self.kind == "rom" else None

    def with_state(self, state: np.ndarray) -> "HybridSide":
        return replace(self, state=np.asarray(state, dtype=float))


def _initial(model, state, full_state):
    if state is not None:
        return state
    if full_state is not None:
        return model.initial_state(full_state)
    return np.zeros(model.n_state)


def HybridSchur(left: HybridSide, right: HybridSide) -> SchurOperator:
    """Schur complement of a hybrid pair.

    Symmetry is measured and reported (``asymmetry``) but not required;
    factorization falls back from Cholesky to LU or a pseudo-inverse.
    """
    if left.model.G.shape[0] != right.model.G.shape[0]:
        raise ConfigurationError(
            f"interface sizes differ: {left.model.G.shape[0]} vs {right.model.G.shape[0]}"
        )
    return SchurOperator(left.model, right.model, allow_lu_fallback=True, symmetry_tol=1e-10)


def hybrid_rhs(left: HybridSide, right: HybridSide, schur: SchurOperator, t: float = 0.0):
    """Time derivatives of both side states; the multiplier is recovered from the current states."""
    if schur.left is not left.model or schur.right is not right.model:
        raise ConfigurationError("Schur operator was built from different sides")
    d1, d2, _ = IVRCoupler(schur).evaluate(left.state, right.state)
    return d1, d2


@dataclass
class HybridResult:
    left: HybridSide
    right: HybridSide
    t: float
    times: list = field(default_factory=list)
    left_samples: list = field(default_factory=list)
    right_samples: list = field(default_factory=list)


def hybrid_advance(
    left: HybridSide,
    right: HybridSide,
    integrator: TimeIntegrator,
    *,
    n_steps: int | None = None,
    final_time: float | None = None,
    t0: float = 0.0,
    schur: SchurOperator | None = None,
    sample_stride: int | None = None,
    on_lifted: Callable[[int, float, np.ndarray, np.ndarray], None] | None = None,
    lift_stride: int = 1,
) -> HybridResult:
    """Advance a coupled pair with a shared explicit integrator.

    Lifted full-order states are stored every ``sample_stride`` steps (and at
    the start and end). ``on_lifted(n, t, left_full, right_full)`` is called
    every ``lift_stride`` steps with freshly lifted states.
    """
    if schur is None:
        schur = HybridSchur(left, right)
    coupler = IVRCoupler(schur)
    result = HybridResult(left, right, t0)
    if n_steps is not None:
        n_total = int(n_steps)
    elif final_time is not None:
        n_total = len(integrator.step_sizes(final_time, t0))
    else:
        raise InvalidArgumentError("give n_steps or final_time")

    def callback(n, t, y1, y2):
        store = n == 0 or n == n_total or bool(sample_stride and n % sample_stride == 0)
        hook = on_lifted is not None and (n % lift_stride == 0 or n == n_total)
        if not (store or hook):
            return
        full1, full2 = left.model.lift(y1), right.model.lift(y2)
        if hook:
            on_lifted(n, t, full1, full2)
        if store:
            result.times.append(t)
            result.left_samples.append(full1)
            result.right_samples.append(full2)

    t, y1, y2 = coupler.advance(
        left.state, right.state, integrator,
        n_steps=n_steps, final_time=final_time, t0=t0, callback=callback,
    )
    result.left, result.right, result.t = left.with_state(y1), right.with_state(y2), t
    return result


def lift(side: HybridSide) -> np.ndarray:
    """Full-order nodal vector of a side (Dirichlet entries from ``beta``)."""
    return side.model.lift(side.state)


def advance_uncoupled(side: HybridSide, integrator: TimeIntegrator, **kwargs):
    """Integrate a single side with no interface (global FEM or global ROM)."""
    t, y = UncoupledSolver(side.model).advance(side.state, integrator, **kwargs)
    return t, side.with_state(y)
