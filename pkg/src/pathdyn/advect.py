"""Pathline integration and seed-grid generation.

Pathlines solve dx/dt = v(x, t) with an adaptive Dormand-Prince (RK45)
scheme and are reported at equidistant sample instants t0 + i*sign(tau)*dt;
backward integration uses negative time steps without negating the field.
On domain exit the remaining samples freeze at the exit position and
``valid_count`` marks how many samples were still inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .field import GridSpec, VectorField2D


@dataclass(frozen=True)
class IntegrationParams:
    """Start time, signed integration time, sample distance and RK tolerance."""

    t0: float
    tau: float
    dt_sample: float
    rk_tol: float = 1e-6

    def __post_init__(self):
        if self.dt_sample <= 0:
            raise ValueError(f"dt_sample must be positive, got {self.dt_sample}")
        if self.tau == 0:
            raise ValueError("tau must be nonzero (sign selects the direction)")
        if abs(self.tau) / self.dt_sample < 1:
            raise ValueError(f"|tau|/dt_sample must be >= 1, got {abs(self.tau) / self.dt_sample}")
        if self.rk_tol <= 0:
            raise ValueError(f"rk_tol must be positive, got {self.rk_tol}")

    @property
    def n_steps(self) -> int:
        """Number of sample intervals N = round(|tau| / dt_sample)."""
        return int(round(abs(self.tau) / self.dt_sample))

    @property
    def direction(self) -> int:
        return 1 if self.tau > 0 else -1

    @property
    def dt_signed(self) -> float:
        return math.copysign(self.dt_sample, self.tau)

    @property
    def elapsed(self) -> float:
        """Actual integrated time span N * dt_sample (== |tau| when divisible)."""
        return self.n_steps * self.dt_sample

    def sample_times(self) -> np.ndarray:
        return self.t0 + self.dt_signed * np.arange(self.n_steps + 1)

    def validate_for(self, spec: GridSpec) -> None:
        t_final = self.t0 + self.dt_signed * self.n_steps
        for t in (self.t0, t_final):
            if not (spec.t_min <= t <= spec.t_max):
                raise ValueError(
                    f"integration window [{self.t0}, {t_final}] leaves the field's "
                    f"time bounds [{spec.t_min}, {spec.t_max}]")


@dataclass
class PathlineSamples:
    """Equidistant-in-time trajectory samples for one seed."""

    seed: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    valid_count: int

    @property
    def exited(self) -> bool:
        return self.valid_count < len(self.times)


def integrate_pathline(field: VectorField2D, seed, params: IntegrationParams) -> PathlineSamples:
    """Trace one pathline; see module docstring for the truncation contract."""
    params.validate_for(field.spec)
    sp = field.spec
    n = params.n_steps
    pos = np.empty((n + 1, 2))
    valid, nev = _kernels.integrate_seed(
        field.frames, sp.origin[0], sp.origin[1], sp.spacing[0], sp.spacing[1],
        sp.t_min, sp.t_step, sp.origin[0], sp.x_max, sp.origin[1], sp.y_max,
        float(seed[0]), float(seed[1]), params.t0, params.dt_signed, n, params.rk_tol, pos)
    field.samples_taken += int(nev)
    return PathlineSamples(
        seed=np.asarray(seed, dtype=float),
        times=params.sample_times(),
        positions=pos,
        valid_count=int(valid),
    )


def seed_grid(spec: GridSpec, stride: int = 1) -> np.ndarray:
    """Row-major seeds at every stride-th grid node, shape (M, 2).

    Ordering matches the field frame layout: y-major, x-minor.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    xs = spec.x_nodes()[::stride]
    ys = spec.y_nodes()[::stride]
    xg, yg = np.meshgrid(xs, ys)
    return np.column_stack([xg.ravel(), yg.ravel()])


def seed_subgrid_spec(spec: GridSpec, stride: int = 1) -> GridSpec:
    """GridSpec describing the layout produced by seed_grid(spec, stride)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    nx = (spec.nx - 1) // stride + 1
    ny = (spec.ny - 1) // stride + 1
    return GridSpec(
        origin=spec.origin,
        spacing=(spec.spacing[0] * stride, spec.spacing[1] * stride),
        nx=nx, ny=ny,
        t_min=spec.t_min, t_max=spec.t_max, nt=spec.nt,
    )
