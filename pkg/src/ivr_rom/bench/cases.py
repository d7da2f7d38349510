"""Solid body rotation benchmark: problem setup, offline stage and case runs."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..assembly import assemble_operators
from ..errors import ConfigurationError, InvalidArgumentError, MissingBasisError
from ..hybrid import HybridSide, advance_uncoupled, hybrid_advance
from ..integrators import TimeIntegrator, aligned_time_step
from ..ivr import FemSubdomain, GlobalTrajectory, global_fem_solve
from ..mesh import build_coupled_mesh, classify_boundary, rotating_velocity
from ..pod import (
    ReducedBasis,
    TruncationPolicy,
    adjust_snapshots,
    collect_snapshots,
    compute_pod_basis,
    load_basis,
    project_operators,
    save_basis,
)

__all__ = [
    "VARIANTS",
    "COUPLINGS",
    "initial_condition",
    "CaseConfig",
    "ErrorReport",
    "BenchmarkProblem",
    "OfflineData",
    "compute_errors",
    "run_reference",
    "build_basis",
    "prepare_offline",
    "load_offline_bases",
    "save_offline_bases",
    "run_case",
]

logger = logging.getLogger(__name__)

# variant -> (diffusivity, boundary mode, default snapshot spacing)
VARIANTS = {
    "pure_advection": (0.0, "inflow_only", 1.35e-2),
    "high_peclet": (1e-5, "all_dirichlet", 6.73e-3),
}
COUPLINGS = ("global_fem", "global_rom", "fem_fem", "rom_fem", "rom_rom")
ROM_DOMAINS = {"global_rom": ("global",), "rom_fem": ("left",), "rom_rom": ("left", "right")}

BODY_RADIUS = 0.15


def initial_condition(x, y):
    """Smooth hump, cone and slotted cylinder on a zero background."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)

    r = np.hypot(x - 0.25, y - 0.5) / BODY_RADIUS
    out += np.where(r <= 1.0, 0.25 * (1.0 + np.cos(np.pi * np.minimum(r, 1.0))), 0.0)

    r = np.hypot(x - 0.5, y - 0.25) / BODY_RADIUS
    out += np.where(r <= 1.0, 1.0 - r, 0.0)

    r = np.hypot(x - 0.5, y - 0.75) / BODY_RADIUS
    slot = (np.abs(x - 0.5) < 0.025) & (y < 0.85)
    out += np.where((r <= 1.0) & ~slot, 1.0, 0.0)
    return out


def _zero_boundary(x, y, t=0.0):
    return np.zeros(np.shape(x))


@dataclass(frozen=True)
class CaseConfig:
    """One benchmark run. ``nx``/``ny`` count elements over the whole square."""

    variant: str = "high_peclet"
    coupling: str = "rom_fem"
    nx: int = 64
    ny: int = 64
    dt: float = 3.37e-3
    final_time: float = 2 * math.pi
    sample_dt: float | None = None
    integrator: str = "rk4"
    truncation_left: TruncationPolicy = TruncationPolicy("energy", 0.99999)
    truncation_right: TruncationPolicy = TruncationPolicy("energy", 0.99999)
    truncation_global: TruncationPolicy = TruncationPolicy("energy", 0.99999)
    output_dir: str | None = None
    basis_dir: str | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {tuple(VARIANTS)}")
        if self.coupling not in COUPLINGS:
            raise ConfigurationError(f"unknown coupling {self.coupling!r}; expected one of {COUPLINGS}")
        if self.nx < 2 or self.nx % 2:
            raise ConfigurationError("nx must be an even number of elements (>= 2)")
        if self.ny < 1:
            raise ConfigurationError("ny must be positive")
        if not self.dt > 0 or not self.final_time > 0:
            raise ConfigurationError("dt and final_time must be positive")
        for name in ("truncation_left", "truncation_right", "truncation_global"):
            val = getattr(self, name)
            if isinstance(val, str):
                object.__setattr__(self, name, TruncationPolicy.parse(val))

    @property
    def kappa(self) -> float:
        return VARIANTS[self.variant][0]

    @property
    def bc_mode(self) -> str:
        return VARIANTS[self.variant][1]

    @property
    def snapshot_dt(self) -> float:
        return self.sample_dt if self.sample_dt is not None else VARIANTS[self.variant][2]

    @property
    def step(self) -> tuple[float, int]:
        """Effective time step (``<= dt``, dividing the snapshot spacing) and its stride."""
        return aligned_time_step(self.dt, self.snapshot_dt)

    def with_(self, **changes) -> "CaseConfig":
        return replace(self, **changes)


@dataclass
class ErrorReport:
    coupling: str
    variant: str
    eps: float
    eps0: float | None
    n_modes_left: int | None = None
    n_modes_right: int | None = None
    offline_cpu_seconds: float = 0.0
    online_cpu_seconds: float = 0.0
    interface_mismatch: float | None = None
    dt: float = 0.0

    @property
    def avg_n_modes(self) -> float | None:
        sizes = [n for n in (self.n_modes_left, self.n_modes_right) if n is not None]
        return float(np.mean(sizes)) if sizes else None


def compute_errors(candidate_final, reference_final, initial=None):
    """Relative error against the reference and, if ``initial`` is given, the rotation error.

    ``eps = |X_T - F_T| / |F_T|`` and ``eps0 = |X_0 - X_T| / |X_T|``.
    """
    candidate_final = np.asarray(candidate_final, dtype=float)
    reference_final = np.asarray(reference_final, dtype=float)
    if candidate_final.shape != reference_final.shape:
        raise InvalidArgumentError("states must share the global node ordering")
    eps = float(np.linalg.norm(candidate_final - reference_final) / np.linalg.norm(reference_final))
    eps0 = None
    if initial is not None:
        eps0 = float(np.linalg.norm(np.asarray(initial) - candidate_final) / np.linalg.norm(candidate_final))
    return eps, eps0


class BenchmarkProblem:
    """Meshes, operators and initial data for one (variant, resolution)."""

    def __init__(self, config: CaseConfig):
        self.config = config
        self.velocity = rotating_velocity()
        self.coupled = build_coupled_mesh(config.nx // 2, config.ny, 0.5, config.bc_mode, self.velocity)
        self.global_mesh = classify_boundary(self.coupled.global_mesh(), config.bc_mode, self.velocity)
        self.dt, self.stride = config.step
        self.integrator = TimeIntegrator(config.integrator, self.dt)
        self._ops = {}

    def mesh(self, domain: str):
        return {"left": self.coupled.left, "right": self.coupled.right, "global": self.global_mesh}[domain]

    def operators(self, domain: str):
        if domain not in self._ops:
            self._ops[domain] = self.assemble(domain)
        return self._ops[domain]

    def assemble(self, domain: str):
        return assemble_operators(self.mesh(domain), self.config.kappa, self.velocity, None, _zero_boundary)

    def initial_full(self, domain: str) -> np.ndarray:
        coords = self.mesh(domain).node_coords
        values = initial_condition(coords[:, 0], coords[:, 1])
        mesh = self.mesh(domain)
        values[mesh.dirichlet_nodes] = 0.0
        return values

    def restriction(self, domain: str) -> np.ndarray | None:
        return None if domain == "global" else self.coupled.restriction_indices(domain)

    def to_global(self, left_full, right_full) -> np.ndarray:
        return self.coupled.to_global(left_full, right_full)


@dataclass
class OfflineData:
    """Global reference run plus the (rank-limited) POD bases built from it."""

    trajectory: GlobalTrajectory
    snapshot_seconds: float
    bases: dict = field(default_factory=dict)
    basis_seconds: dict = field(default_factory=dict)

    @property
    def reference_final(self) -> np.ndarray:
        return self.trajectory.final

    @property
    def reference_initial(self) -> np.ndarray:
        return self.trajectory.initial


def run_reference(problem: BenchmarkProblem) -> OfflineData:
    """Global FEM run sampled at the snapshot spacing."""
    cfg = problem.config
    start = time.perf_counter()
    traj = global_fem_solve(
        problem.global_mesh, cfg.kappa, problem.velocity, None, _zero_boundary,
        problem.integrator, cfg.final_time, initial_condition,
        stride=problem.stride, ops=problem.operators("global"),
    )
    return OfflineData(traj, time.perf_counter() - start)


def build_basis(problem: BenchmarkProblem, offline: OfflineData, domain: str) -> ReducedBasis:
    """Rank-limited POD basis of ``domain`` (truncation happens per run)."""
    if domain in offline.bases:
        return offline.bases[domain]
    start = time.perf_counter()
    mesh = problem.mesh(domain)
    snaps = collect_snapshots(
        offline.trajectory, problem.restriction(domain), problem.config.snapshot_dt,
        problem.config.final_time, domain,
    )
    ops = problem.operators(domain)
    X0 = adjust_snapshots(snaps, ops.beta, mesh.dirichlet_nodes)
    basis = compute_pod_basis(
        X0, TruncationPolicy("threshold", 0.0), ops.beta,
        subdomain_id=domain, sample_dt=snaps.sample_dt,
    )
    offline.bases[domain] = basis
    offline.basis_seconds[domain] = time.perf_counter() - start
    return basis


def prepare_offline(problem: BenchmarkProblem, domains=("left", "right", "global"), offline=None) -> OfflineData:
    offline = offline or run_reference(problem)
    for domain in domains:
        build_basis(problem, offline, domain)
    return offline


def load_offline_bases(basis_dir, domains) -> dict:
    bases = {}
    for domain in domains:
        path = Path(basis_dir) / f"basis_{domain}.npz"
        if not path.exists():
            raise MissingBasisError(
                f"basis file {path} not found; run the 'snapshots' subcommand first or drop --basis-dir"
            )
        bases[domain] = load_basis(path)
    return bases


def save_offline_bases(offline: OfflineData, basis_dir) -> list[Path]:
    Path(basis_dir).mkdir(parents=True, exist_ok=True)
    return [save_basis(Path(basis_dir) / f"basis_{d}.npz", b) for d, b in offline.bases.items()]


def _policy_for(config: CaseConfig, domain: str) -> TruncationPolicy:
    return {"left": config.truncation_left, "right": config.truncation_right, "global": config.truncation_global}[domain]


def _reduced_side(config, problem, offline, domain):
    """Truncated basis, projected operators and projection time for one domain."""
    start = time.perf_counter()
    basis = offline.bases[domain].select(_policy_for(config, domain))
    reduced = project_operators(basis, problem.operators(domain))
    return reduced, time.perf_counter() - start


def run_case(
    config: CaseConfig,
    problem: BenchmarkProblem | None = None,
    offline: OfflineData | None = None,
    *,
    on_lifted=None,
) -> tuple[ErrorReport, dict]:
    """Run one coupling configuration and measure it against the global FEM run.

    Returns the report and a dict of global field vectors at ``t=0`` and at
    the final time (``"initial"``, ``"final"``). Field dumps are written when
    ``config.output_dir`` is set.
    """
    problem = problem or BenchmarkProblem(config)
    cfg = config
    rom_domains = ROM_DOMAINS.get(cfg.coupling, ())
    if offline is None:
        offline = run_reference(problem)
        if cfg.basis_dir and rom_domains:
            offline.bases.update(load_offline_bases(cfg.basis_dir, rom_domains))
    for domain in rom_domains:
        build_basis(problem, offline, domain)

    integ = problem.integrator
    offline_seconds = 0.0
    n_left = n_right = None
    mismatch = None

    if cfg.coupling == "global_fem":
        start = time.perf_counter()
        ops = problem.assemble("global")
        side = HybridSide.fem(FemSubdomain(ops), full_state=problem.initial_full("global"))
        x0 = side.model.lift(side.state)
        _, side = advance_uncoupled(side, integ, final_time=cfg.final_time)
        final = side.model.lift(side.state)
        online = time.perf_counter() - start

    elif cfg.coupling == "global_rom":
        reduced, proj_seconds = _reduced_side(cfg, problem, offline, "global")
        offline_seconds = offline.snapshot_seconds + offline.basis_seconds.get("global", 0.0) + proj_seconds
        n_left = reduced.n_modes
        start = time.perf_counter()
        side = HybridSide.rom(reduced, full_state=problem.initial_full("global"))
        x0 = side.model.lift(side.state)
        last = {}

        def lift_each(n, t, y):
            last["x"] = side.model.lift(y)
            if on_lifted is not None:
                on_lifted(n, t, last["x"], None)

        _, side = advance_uncoupled(side, integ, final_time=cfg.final_time, callback=lift_each)
        final = last["x"]
        online = time.perf_counter() - start

    else:
        kinds = {"fem_fem": ("fem", "fem"), "rom_fem": ("rom", "fem"), "rom_rom": ("rom", "rom")}[cfg.coupling]
        reduced = {}
        for domain in rom_domains:
            reduced[domain], proj_seconds = _reduced_side(cfg, problem, offline, domain)
            offline_seconds += offline.basis_seconds.get(domain, 0.0) + proj_seconds
        if rom_domains:
            offline_seconds += offline.snapshot_seconds

        start = time.perf_counter()
        sides = []
        for domain, kind in zip(("left", "right"), kinds):
            full0 = problem.initial_full(domain)
            if kind == "fem":
                sides.append(HybridSide.fem(problem.assemble(domain), full_state=full0))
            else:
                sides.append(HybridSide.rom(reduced[domain], full_state=full0))
        left, right = sides
        result = hybrid_advance(left, right, integ, final_time=cfg.final_time, on_lifted=on_lifted or _noop)
        online = time.perf_counter() - start

        x0 = problem.to_global(result.left_samples[0], result.right_samples[0])
        final = problem.to_global(result.left_samples[-1], result.right_samples[-1])
        trace_l = result.left_samples[-1][problem.coupled.left.interface_order]
        trace_r = result.right_samples[-1][problem.coupled.right.interface_order]
        mismatch = float(np.linalg.norm(trace_l - trace_r) / max(np.linalg.norm(trace_r), 1e-300))
        n_left = left.model.n_state if left.kind == "rom" else None
        n_right = right.model.n_state if right.kind == "rom" else None

    initial_for_eps0 = x0 if cfg.variant == "pure_advection" else None
    eps, eps0 = compute_errors(final, offline.reference_final, initial_for_eps0)
    report = ErrorReport(
        coupling=cfg.coupling,
        variant=cfg.variant,
        eps=eps,
        eps0=eps0,
        n_modes_left=n_left,
        n_modes_right=n_right,
        offline_cpu_seconds=offline_seconds,
        online_cpu_seconds=online,
        interface_mismatch=mismatch,
        dt=problem.dt,
    )
    fields = {"initial": x0, "final": final}
    if cfg.output_dir:
        from .io import write_field_dump

        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_field_dump(out / f"{cfg.coupling}_t0.txt", x0, cfg.nx, cfg.ny, 0.0, cfg.variant)
        write_field_dump(out / f"{cfg.coupling}_tfinal.txt", final, cfg.nx, cfg.ny, cfg.final_time, cfg.variant)
        write_field_dump(out / "reference_tfinal.txt", offline.reference_final, cfg.nx, cfg.ny, cfg.final_time, cfg.variant)
    logger.info("%s/%s: eps=%.3e online=%.2fs", cfg.variant, cfg.coupling, eps, online)
    return report, fields


def _noop(*args):
    pass
