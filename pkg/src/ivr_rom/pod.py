"""Offline stage: snapshots, Dirichlet-adjusted POD bases and Galerkin projection."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as la
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .assembly import OperatorSet
from .errors import EmptyBasisError, InvalidArgumentError
from .ivr import GlobalTrajectory

__all__ = [
    "TruncationPolicy",
    "SnapshotMatrix",
    "ReducedBasis",
    "ReducedOperatorSet",
    "PODBasis",
    "collect_snapshots",
    "adjust_snapshots",
    "compute_pod_basis",
    "energy_fraction",
    "modes_for_energy",
    "numerical_rank",
    "project_operators",
    "save_basis",
    "load_basis",
]

# singular values below this fraction of the largest span a near null space
NULL_SPACE_RTOL = np.sqrt(np.finfo(float).eps)
BASIS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TruncationPolicy:
    """How many left singular vectors to keep.

    ``kind`` is one of

    * ``"threshold"``: keep ``sigma_i >= value * sigma_1``;
    * ``"energy"``: smallest ``N_R`` whose cumulative energy reaches ``value``;
    * ``"fixed"``: exactly ``int(value)`` modes.
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("threshold", "energy", "fixed"):
            raise InvalidArgumentError(f"unknown truncation kind {self.kind!r}")
        if self.kind == "energy" and not 0.0 < self.value <= 1.0:
            raise InvalidArgumentError("energy fraction must lie in (0, 1]")
        if self.kind == "fixed" and (int(self.value) != self.value or self.value < 1):
            raise InvalidArgumentError("fixed mode count must be a positive integer")
        if self.kind == "threshold" and self.value < 0:
            raise InvalidArgumentError("threshold must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "TruncationPolicy":
        """Parse ``"energy:0.99999"``, ``"threshold:1e-6"`` or ``"fixed:80"``."""
        try:
            kind, value = text.split(":")
            return cls(kind.strip(), float(value))
        except ValueError as exc:
            raise InvalidArgumentError(f"cannot parse truncation policy {text!r}") from exc

    def __str__(self):
        value = int(self.value) if self.kind == "fixed" else repr(float(self.value))
        return f"{self.kind}:{value}"


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    """Columns are restricted solution vectors at ``t_k = k * sample_dt``."""

    X: np.ndarray
    sample_dt: float
    subdomain_id: str
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] < 1:
            raise InvalidArgumentError("snapshot matrix needs at least one column")

    @property
    def n_snapshots(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    U: np.ndarray
    singular_values: np.ndarray
    n_modes: int
    beta: np.ndarray
    policy: TruncationPolicy | None = None
    subdomain_id: str = ""
    n_snapshots: int = 0
    sample_dt: float = 0.0

    @property
    def n_dofs(self) -> int:
        return self.U.shape[0]

    def lift(self, coeffs: np.ndarray) -> np.ndarray:
        """Full-order vector ``U coeffs + beta``."""
        return self.U @ coeffs + self.beta

    def select(self, policy: TruncationPolicy | str) -> "ReducedBasis":
        """Truncate according to ``policy`` using the stored singular values."""
        if isinstance(policy, str):
            policy = TruncationPolicy.parse(policy)
        n = min(_select_modes(self.singular_values, policy), self.U.shape[1])
        out = self.truncated(n)
        return replace(out, policy=policy)

    def truncated(self, n_modes: int) -> "ReducedBasis":
        if not 1 <= n_modes <= self.U.shape[1]:
            raise InvalidArgumentError(f"cannot truncate {self.U.shape[1]} modes to {n_modes}")
        return ReducedBasis(
            self.U[:, :n_modes].copy(), self.singular_values, n_modes, self.beta,
            TruncationPolicy("fixed", n_modes), self.subdomain_id, self.n_snapshots, self.sample_dt,
        )


def collect_snapshots(
    trajectory: GlobalTrajectory,
    node_indices: np.ndarray | None,
    sample_dt: float,
    final_time: float | None = None,
    subdomain_id: str = "global",
) -> SnapshotMatrix:
    """Restrict the global run to a subdomain and sample it at ``k * sample_dt``, ``k = 1..m``."""
    if sample_dt <= 0:
        raise InvalidArgumentError("sampling step must be positive")
    T = trajectory.times[-1] if final_time is None else final_time
    m = int(np.floor(T / sample_dt * (1 + 1e-9)))
    if m < 1:
        raise InvalidArgumentError("sampling step exceeds the final time")
    targets = sample_dt * np.arange(1, m + 1)
    idx = np.searchsorted(trajectory.times, targets - 1e-9 * sample_dt)
    idx = np.minimum(idx, len(trajectory.times) - 1)
    if np.any(np.abs(trajectory.times[idx] - targets) > 1e-6 * sample_dt):
        raise InvalidArgumentError("trajectory is not sampled at the requested snapshot times")
    states = trajectory.states[idx]
    if node_indices is not None:
        states = states[:, node_indices]
    return SnapshotMatrix(np.ascontiguousarray(states.T), float(sample_dt), subdomain_id, trajectory.times[idx])


def adjust_snapshots(
    X: SnapshotMatrix | np.ndarray,
    betas: np.ndarray,
    dirichlet_rows: np.ndarray | None = None,
) -> np.ndarray:
    """Subtract the lift vector(s) column by column.

    ``betas`` is either one full-length vector (time-independent data) or an
    ``(N, m)`` array with one lift per snapshot. If ``dirichlet_rows`` is
    given those rows are set to exactly zero afterwards.
    """
    data = X.X if isinstance(X, SnapshotMatrix) else np.asarray(X, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if betas.ndim == 1:
        betas = betas[:, None]
    if betas.shape[0] != data.shape[0] or betas.shape[1] not in (1, data.shape[1]):
        raise InvalidArgumentError("lift vectors do not match the snapshot matrix")
    X0 = data - betas
    if dirichlet_rows is not None:
        X0[np.asarray(dirichlet_rows, dtype=np.int64)] = 0.0
    return X0


def energy_fraction(singular_values: np.ndarray, n_modes: int) -> float:
    s2 = np.asarray(singular_values, dtype=float) ** 2
    return float(s2[:n_modes].sum() / s2.sum())


def modes_for_energy(singular_values: np.ndarray, fraction: float) -> int:
    """Smallest mode count whose cumulative energy reaches ``fraction``."""
    s2 = np.asarray(singular_values, dtype=float) ** 2
    cumulative = np.cumsum(s2) / s2.sum()
    return int(np.searchsorted(cumulative, fraction * (1 - 1e-14)) + 1)


def numerical_rank(singular_values: np.ndarray) -> int:
    s = np.asarray(singular_values)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s >= NULL_SPACE_RTOL * s[0]))


def _select_modes(s: np.ndarray, policy: TruncationPolicy) -> int:
    rank = numerical_rank(s)
    if policy.kind == "fixed":
        n = int(policy.value)
    elif policy.kind == "threshold":
        n = int(np.count_nonzero(s >= policy.value * s[0]))
    else:
        n = modes_for_energy(s, policy.value)
    if n > rank:
        if policy.kind == "fixed":
            warnings.warn(
                f"requested {n} modes but only {rank} lie above the near-null-space cutoff; keeping {rank}",
                RuntimeWarning,
                stacklevel=3,
            )
        n = rank
    return max(n, 1)


def _fix_signs(U: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive."""
    pivots = np.abs(U).argmax(axis=0)
    signs = np.sign(U[pivots, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def compute_pod_basis(
    X0: np.ndarray,
    truncation: TruncationPolicy | str = TruncationPolicy("energy", 0.99999),
    beta: np.ndarray | None = None,
    **meta,
) -> ReducedBasis:
    """Thin SVD of the adjusted snapshots followed by truncation.

    Rows of ``X0`` that are identically zero (the Dirichlet rows) are kept
    exactly zero in every mode.
    """
    if isinstance(truncation, str):
        truncation = TruncationPolicy.parse(truncation)
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim != 2:
        raise InvalidArgumentError("snapshot matrix must be two-dimensional")
    if not np.any(X0):
        raise EmptyBasisError("adjusted snapshot matrix is zero; no basis can be formed")
    U, s, _ = la.svd(X0, full_matrices=False, lapack_driver="gesdd")
    n = _select_modes(s, truncation)
    U = _fix_signs(U[:, :n])
    U[~np.any(X0, axis=1)] = 0.0
    if beta is None:
        beta = np.zeros(X0.shape[0])
    return ReducedBasis(
        np.ascontiguousarray(U), s, n, np.asarray(beta, dtype=float), truncation,
        n_snapshots=X0.shape[1], **meta,
    )


class PODBasis(TransformerMixin, BaseEstimator):
    """POD basis as a scikit-learn transformer.

    Rows of the input are snapshots (``(n_snapshots, n_dofs)``), following
    the estimator convention. ``transform`` maps full-order states to reduced
    coordinates ``U^T (x - beta)``; ``inverse_transform`` lifts them back as
    ``U c + beta``.

    Parameters
    ----------
    truncation : {"energy", "threshold", "fixed"}
    energy : float
        Target cumulative energy for ``truncation="energy"``.
    threshold : float
        Relative singular value cutoff for ``truncation="threshold"``.
    n_modes : int
        Mode count for ``truncation="fixed"``.
    lift : ndarray, optional
        Dirichlet lift vector subtracted from every snapshot before the SVD.
    """

    def __init__(self, truncation="energy", energy=0.99999, threshold=1e-6, n_modes=None, lift=None):
        self.truncation = truncation
        self.energy = energy
        self.threshold = threshold
        self.n_modes = n_modes
        self.lift = lift

    def _policy(self) -> TruncationPolicy:
        if self.truncation == "energy":
            return TruncationPolicy("energy", self.energy)
        if self.truncation == "threshold":
            return TruncationPolicy("threshold", self.threshold)
        if self.truncation == "fixed":
            if self.n_modes is None:
                raise InvalidArgumentError("n_modes is required for fixed truncation")
            return TruncationPolicy("fixed", self.n_modes)
        raise InvalidArgumentError(f"unknown truncation {self.truncation!r}")

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        lift = np.zeros(X.shape[1]) if self.lift is None else np.asarray(self.lift, dtype=float)
        if lift.shape != (X.shape[1],):
            raise InvalidArgumentError("lift vector length does not match the snapshots")
        X0 = adjust_snapshots(X.T, lift)
        self.basis_ = compute_pod_basis(X0, self._policy(), lift)
        self.components_ = self.basis_.U.T
        self.singular_values_ = self.basis_.singular_values
        self.n_components_ = self.basis_.n_modes
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError("state length does not match the fitted basis")
        return (X - self.basis_.beta) @ self.basis_.U

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=float)
        return X @ self.basis_.U.T + self.basis_.beta

    def energy_captured(self, n_modes=None) -> float:
        check_is_fitted(self, "basis_")
        return energy_fraction(self.singular_values_, n_modes or self.n_components_)


@dataclass(frozen=True, eq=False)
class ReducedOperatorSet:
    """Galerkin-projected operators of one subdomain (all dense)."""

    basis: ReducedBasis
    ops: OperatorSet
    M: np.ndarray
    D: np.ndarray
    A: np.ndarray
    G: np.ndarray
    f: np.ndarray
    lift_correction: np.ndarray
    mass_factor: tuple = field(repr=False, default=None)

    @property
    def n_modes(self) -> int:
        return self.M.shape[0]

    @property
    def K(self) -> np.ndarray:
        return self.D + self.A

    @property
    def constant_force(self) -> np.ndarray:
        return self.f + self.lift_correction


def project_operators(basis: ReducedBasis, ops: OperatorSet) -> ReducedOperatorSet:
    """``U^T M U``, ``U^T D U``, ``U^T A U``, ``G U`` and the reduced force terms.

    The basis lives on the subdomain's full node set; its Dirichlet rows are
    zero, so the projection only needs the rows of the free DOFs.
    """
    if basis.n_dofs != ops.indexing.n_nodes:
        raise InvalidArgumentError(
            f"basis has {basis.n_dofs} rows but the subdomain has {ops.indexing.n_nodes} nodes"
        )
    Uf = np.ascontiguousarray(basis.U[ops.indexing.free_dof_order])
    Mr = Uf.T @ (ops.M @ Uf)
    Mr = 0.5 * (Mr + Mr.T)
    try:
        factor = la.cho_factor(Mr)
    except la.LinAlgError as exc:
        raise InvalidArgumentError(f"reduced mass matrix is not positive definite: {exc}") from exc
    return ReducedOperatorSet(
        basis=basis,
        ops=ops,
        M=Mr,
        D=Uf.T @ (ops.D @ Uf),
        A=Uf.T @ (ops.A @ Uf),
        G=np.asarray(ops.G @ Uf),
        f=Uf.T @ ops.f,
        lift_correction=Uf.T @ ops.dirichlet_correction,
        mass_factor=factor,
    )


def save_basis(path, basis: ReducedBasis) -> Path:
    """Write a basis to a ``.npz`` archive (lossless, float64)."""
    path = Path(path)
    policy = basis.policy or TruncationPolicy("fixed", basis.n_modes)
    np.savez(
        path,
        format_version=np.int64(BASIS_FORMAT_VERSION),
        subdomain_id=np.str_(basis.subdomain_id),
        n_dofs=np.int64(basis.n_dofs),
        n_modes=np.int64(basis.n_modes),
        n_snapshots=np.int64(basis.n_snapshots),
        sample_dt=np.float64(basis.sample_dt),
        policy=np.str_(str(policy)),
        singular_values=basis.singular_values,
        U=np.asfortranarray(basis.U),
        beta=basis.beta,
    )
    return path if path.suffix == ".npz" else path.with_name(path.name + ".npz")


def load_basis(path) -> ReducedBasis:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != BASIS_FORMAT_VERSION:
            raise InvalidArgumentError(f"unsupported basis format version {version}")
        return ReducedBasis(
            U=np.ascontiguousarray(data["U"]),
            singular_values=data["singular_values"].copy(),
            n_modes=int(data["n_modes"]),
            beta=data["beta"].copy(),
            policy=TruncationPolicy.parse(str(data["policy"])),
            subdomain_id=str(data["subdomain_id"]),
            n_snapshots=int(data["n_snapshots"]),
            sample_dt=float(data["sample_dt"]),
        )
