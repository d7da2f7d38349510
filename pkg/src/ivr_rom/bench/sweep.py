"""Basis-size sweeps over a benchmark case."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..pod import TruncationPolicy
from .cases import (
    ROM_DOMAINS, BenchmarkProblem, CaseConfig, ErrorReport, OfflineData,
    load_offline_bases, prepare_offline, run_case, run_reference,
)

__all__ = ["SweepResult", "convergence_slope", "sweep_basis"]


@dataclass
class SweepResult:
    reports: list[ErrorReport]
    slope: float | None
    window: tuple[float, float] | None = None

    @property
    def n_modes(self) -> np.ndarray:
        return np.array([r.avg_n_modes for r in self.reports], dtype=float)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.eps for r in self.reports])


def convergence_slope(n_modes, errors, window=None) -> float | None:
    """Least-squares slope of ``log eps`` against ``log N``.

    Points outside ``window = (n_min, n_max)`` and points with ``eps <= 0``
    are ignored. Returns ``None`` when fewer than two points remain.
    """
    n = np.asarray(n_modes, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = (e > 0) & np.isfinite(e) & (n > 0)
    if window is not None:
        keep &= (n >= window[0]) & (n <= window[1])
    if np.count_nonzero(keep) < 2 or np.unique(n[keep]).size < 2:
        return None
    slope, _ = np.polyfit(np.log(n[keep]), np.log(e[keep]), 1)
    return float(slope)


def _with_modes(config: CaseConfig, n: int) -> CaseConfig:
    policy = TruncationPolicy("fixed", int(n))
    changes = {
        "rom_fem": {"truncation_left": policy},
        "rom_rom": {"truncation_left": policy, "truncation_right": policy},
        "global_rom": {"truncation_global": policy},
    }.get(config.coupling, {})
    return config.with_(**changes)


def sweep_basis(
    config: CaseConfig,
    n_modes_list,
    *,
    window=None,
    problem: BenchmarkProblem | None = None,
    offline: OfflineData | None = None,
) -> SweepResult:
    """Run ``config`` once per requested basis size, sharing the offline stage.

    For ``rom_rom`` both sides use the same size. FEM-only couplings are
    accepted and produce one identical row per entry.
    """
    sizes = [int(n) for n in n_modes_list]
    if not sizes:
        raise ConfigurationError("basis size list is empty")
    if any(n < 1 for n in sizes):
        raise ConfigurationError("basis sizes must be positive")
    problem = problem or BenchmarkProblem(config)
    domains = ROM_DOMAINS.get(config.coupling, ())
    if offline is None and config.basis_dir and domains:
        offline = run_reference(problem)
        offline.bases.update(load_offline_bases(config.basis_dir, domains))
    offline = prepare_offline(problem, domains, offline)
    reports = [run_case(_with_modes(config, n), problem, offline)[0] for n in sizes]
    n_used = [r.avg_n_modes if r.avg_n_modes is not None else n for r, n in zip(reports, sizes)]
    slope = convergence_slope(n_used, [r.eps for r in reports], window)
    return SweepResult(reports, slope, window)
