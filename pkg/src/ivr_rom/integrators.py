"""Explicit one-step integrators for ``y' = rhs(t, y)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, InvalidArgumentError

__all__ = ["TimeIntegrator", "integrate", "aligned_time_step"]

RHS = Callable[[float, np.ndarray], np.ndarray]
StepCallback = Callable[[int, float, np.ndarray], None]

_KINDS = ("forward_euler", "rk4")


@dataclass(frozen=True)
class TimeIntegrator:
    """Fixed-step explicit scheme.

    Parameters
    ----------
    kind : {"forward_euler", "rk4"}
    dt : float
        Nominal step size. When integrating to a final time the last step is
        shortened so the run ends exactly on it.
    """

    kind: str
    dt: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidArgumentError(f"unknown integrator {self.kind!r}; expected one of {_KINDS}")
        if not self.dt > 0:
            raise InvalidArgumentError(f"time step must be positive, got {self.dt!r}")

    def step(self, rhs: RHS, t: float, y: np.ndarray, dt: float | None = None) -> np.ndarray:
        h = self.dt if dt is None else dt
        if self.kind == "forward_euler":
            return y + h * rhs(t, y)
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step_sizes(self, final_time: float, t0: float = 0.0) -> np.ndarray:
        """Step sizes that reach ``final_time`` with a clipped last step."""
        span = final_time - t0
        if span < 0:
            raise InvalidArgumentError("final time precedes start time")
        n_full = math.floor(span / self.dt * (1 + 1e-12))
        sizes = np.full(n_full, self.dt)
        remainder = span - n_full * self.dt
        if remainder > 1e-12 * max(span, 1.0):
            sizes = np.append(sizes, remainder)
        return sizes


def aligned_time_step(dt: float, sample_dt: float) -> tuple[float, int]:
    """Largest step ``<= dt`` that divides ``sample_dt``; returns ``(step, stride)``."""
    if dt <= 0 or sample_dt <= 0:
        raise InvalidArgumentError("time steps must be positive")
    stride = max(1, math.ceil(sample_dt / dt * (1 - 1e-12)))
    return sample_dt / stride, stride


def integrate(
    rhs: RHS,
    y0: np.ndarray,
    integrator: TimeIntegrator,
    *,
    n_steps: int | None = None,
    final_time: float | None = None,
    t0: float = 0.0,
    callback: StepCallback | None = None,
    stride: int = 1,
) -> tuple[float, np.ndarray]:
    """Advance ``y0`` by ``n_steps`` steps or up to ``final_time``.

    ``callback(n, t, y)`` is invoked at step 0, every ``stride`` steps and
    after the last step. Raises :class:`DivergenceError` as soon as the state
    contains a non-finite entry.
    """
    if (n_steps is None) == (final_time is None):
        raise InvalidArgumentError("give exactly one of n_steps or final_time")
    if n_steps is not None:
        if n_steps < 0:
            raise InvalidArgumentError("n_steps must be non-negative")
        sizes = np.full(int(n_steps), integrator.dt)
    else:
        sizes = integrator.step_sizes(final_time, t0)

    times = t0 + np.cumsum(sizes)
    if final_time is not None and len(times):
        times[-1] = final_time

    y = np.asarray(y0, dtype=float).copy()
    t = t0
    if callback is not None:
        callback(0, t, y)
    last = len(sizes)
    for n, h in enumerate(sizes, start=1):
        with np.errstate(over="ignore", invalid="ignore"):
            y = integrator.step(rhs, t, y, h)
        t = float(times[n - 1])
        if not np.all(np.isfinite(y)):
            raise DivergenceError(n)
        if callback is not None and (n % stride == 0 or n == last):
            callback(n, t, y)
    return t, y
