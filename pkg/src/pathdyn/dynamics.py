"""Strain/rotation invariants along pathlines and FTLE estimators.

For a velocity gradient G sampled at a pathline position, the infinitesimal
strain and rotation tensors over a sample distance dt are

    eps   = (dt/2) (G + G^T)        alpha = det(eps)
    omega = (dt/2) (G - G^T)        beta  = det(omega)

The per-step invariants form the strain/rotation progression of a pathline.
Three finite-time Lyapunov exponent estimators are provided for validation:

* flow_map:   deformation gradient from finite differences of advected seed
              neighborhoods (the reference construction).
* localized:  per-pathline product of matrix exponentials of G*dt, applied
              latest-factor-leftmost (order matters; see deformation_product).
* strain_sum: per-pathline accumulation of the strain progression, read as a
              logarithmic strain rate: value = sum_i lambda_max(eps_i) / |tau|,
              the time-averaged per-step principal strain.  On steady fields
              this equals lambda_max(sum eps_i) / |tau| (all steps share one
              tensor) and matches the other estimators exactly whenever the
              gradient is symmetric; on unsteady fields it degrades with the
              sample distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._threads import worker_count
from .advect import IntegrationParams, PathlineSamples, seed_grid, seed_subgrid_spec
from .field import GridSpec, VectorField2D


@dataclass
class StrainRotationStep:
    """One step of the progression: tensors plus their determinant invariants."""

    eps: np.ndarray
    omega: np.ndarray
    alpha: float
    beta: float


@dataclass
class DynamicsRecord:
    """Per-seed alpha/beta progressions (entries past valid_count are padding).

    ``eps_steps`` holds the per-step strain tensors as (e00, e01, e11) rows
    and is only populated when the record is built for strain-sum
    reconstruction.
    """

    seed: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    valid_count: int
    eps_steps: np.ndarray | None = None


@dataclass
class FtleField:
    """Per-seed scalar exponents on a regular seed layout."""

    spec: GridSpec
    values: np.ndarray  # (ny, nx), NaN where undefined
    method: str


def strain_rotation_step(grad, dt: float) -> StrainRotationStep:
    """Split dt*grad into symmetric/antisymmetric parts and take determinants."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = np.asarray(grad, dtype=float)
    eps = 0.5 * dt * (g + g.T)
    omega = 0.5 * dt * (g - g.T)
    alpha = eps[0, 0] * eps[1, 1] - eps[0, 1] * eps[1, 0]
    beta = omega[0, 1] * omega[1, 0] * -1.0
    return StrainRotationStep(eps=eps, omega=omega, alpha=float(alpha), beta=float(beta))


def expm2x2(m) -> np.ndarray:
    """Closed-form matrix exponential of a 2x2 matrix."""
    m = np.asarray(m, dtype=float)
    a, b, c, d = _kernels._expm2(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    return np.array([[a, b], [c, d]])


def deformation_product(grads, dt_signed: float) -> np.ndarray:
    """Accumulated neighborhood map: product of exp(G_i * dt), latest factor left.

    grads is a sequence of 2x2 velocity gradients in chronological order; the
    result is exp(G_{K-1} dt) @ ... @ exp(G_0 dt).
    """
    psi = np.eye(2)
    for g in grads:
        psi = expm2x2(np.asarray(g, dtype=float) * dt_signed) @ psi
    return psi


def _lambda_max_sym(a: float, b: float, d: float) -> float:
    """Largest eigenvalue of the symmetric 2x2 matrix [[a, b], [b, d]]."""
    half_tr = 0.5 * (a + d)
    disc = half_tr * half_tr - (a * d - b * b)
    return half_tr + np.sqrt(max(disc, 0.0))


def compute_dynamics(field: VectorField2D, pathline: PathlineSamples,
                     params: IntegrationParams, keep_strain: bool = False) -> DynamicsRecord:
    """Evaluate the strain/rotation progression along an integrated pathline.

    The gradient is sampled at the first N sample instants; truncated
    pathlines yield fewer valid steps and NaN padding.
    """
    n = params.n_steps
    steps = min(pathline.valid_count, n)
    alphas = np.full(n, np.nan)
    betas = np.full(n, np.nan)
    eps_steps = np.zeros((n, 3)) if keep_strain else None
    dt = params.dt_sample
    for i in range(steps):
        x, y = pathline.positions[i]
        s = field.sample(float(x), float(y), float(pathline.times[i]))
        step = strain_rotation_step(s.gradient, dt)
        alphas[i] = step.alpha
        betas[i] = step.beta
        if eps_steps is not None:
            eps_steps[i] = (step.eps[0, 0], step.eps[0, 1], step.eps[1, 1])
    return DynamicsRecord(seed=pathline.seed, alphas=alphas, betas=betas,
                          valid_count=steps, eps_steps=eps_steps)


# -- batched tracing --------------------------------------------------------

def _grid_args(field: VectorField2D):
    sp = field.spec
    return (sp.origin[0], sp.origin[1], sp.spacing[0], sp.spacing[1],
            sp.t_min, sp.t_step, sp.origin[0], sp.x_max, sp.origin[1], sp.y_max)


def trace_seeds(field: VectorField2D, params: IntegrationParams, seeds: np.ndarray,
                want_dyn: bool = False, want_strain: bool = False, want_psi: bool = False,
                workers: int | None = None):
    """Integrate + accumulate over many seeds with the compiled driver.

    Returns a dict with 'endpoints' (M,2), 'valid' (M,) sample counts, and,
    per the flags, 'alphas'/'betas' (M,N float32, NaN padded), 'stretch'
    (M,) accumulated per-step principal strains, and 'psi' (M,4).
    """
    params.validate_for(field.spec)
    seeds = np.ascontiguousarray(seeds, dtype=float)
    m = seeds.shape[0]
    n = params.n_steps
    alphas = np.empty((m, n), dtype=np.float32) if want_dyn else np.empty((1, 1), dtype=np.float32)
    betas = np.empty_like(alphas)
    stretch = np.zeros(m) if want_strain else np.zeros(1)
    psi = np.zeros((m, 4)) if want_psi else np.zeros((1, 4))
    endpoints = np.empty((m, 2))
    valid = np.empty(m, dtype=np.int64)
    nevals = np.empty(m, dtype=np.int64)
    if want_dyn or want_strain or want_psi:
        grads = field.node_gradients()
    else:
        grads = np.zeros((1, 2, 2, 4), dtype=np.float32)
    with worker_count(workers):
        _kernels.trace_batch(field.frames, grads, *_grid_args(field),
                             seeds, params.t0, params.dt_signed,
                             n, params.rk_tol, want_dyn, want_strain, want_psi,
                             alphas, betas, stretch, psi, endpoints, valid, nevals)
    field.samples_taken += int(nevals.sum())
    out = {"endpoints": endpoints, "valid": valid}
    if want_dyn:
        out["alphas"] = alphas
        out["betas"] = betas
    if want_strain:
        out["stretch"] = stretch
    if want_psi:
        out["psi"] = psi
    return out


# -- FTLE estimators --------------------------------------------------------

def ftle_flow_map(field: VectorField2D, params: IntegrationParams,
                  seed_spec: GridSpec | None = None, stride: int = 1,
                  workers: int | None = None) -> FtleField:
    """FTLE from central differences of the flow map over seed neighbors.

    Boundary seeds and seeds whose own or neighboring pathline left the
    domain are NaN.
    """
    if seed_spec is None:
        seed_spec = seed_subgrid_spec(field.spec, stride)
    seeds = seed_grid_from_spec(seed_spec)
    res = trace_seeds(field, params, seeds, workers=workers)
    ny, nx = seed_spec.ny, seed_spec.nx
    end = res["endpoints"].reshape(ny, nx, 2)
    ok = (res["valid"] == params.n_steps + 1).reshape(ny, nx)

    values = np.full((ny, nx), np.nan)
    hx, hy = seed_spec.spacing
    if nx >= 3 and ny >= 3:
        f11 = (end[1:-1, 2:, 0] - end[1:-1, :-2, 0]) / (2.0 * hx)
        f12 = (end[2:, 1:-1, 0] - end[:-2, 1:-1, 0]) / (2.0 * hy)
        f21 = (end[1:-1, 2:, 1] - end[1:-1, :-2, 1]) / (2.0 * hx)
        f22 = (end[2:, 1:-1, 1] - end[:-2, 1:-1, 1]) / (2.0 * hy)
        c11 = f11 * f11 + f21 * f21
        c12 = f11 * f12 + f21 * f22
        c22 = f12 * f12 + f22 * f22
        half_tr = 0.5 * (c11 + c22)
        disc = np.maximum(half_tr * half_tr - (c11 * c22 - c12 * c12), 0.0)
        lam = half_tr + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            interior = np.log(np.maximum(lam, 0.0)) / (2.0 * params.elapsed)
        usable = (ok[1:-1, 1:-1] & ok[1:-1, 2:] & ok[1:-1, :-2]
                  & ok[2:, 1:-1] & ok[:-2, 1:-1])
        values[1:-1, 1:-1] = np.where(usable, interior, np.nan)
    return FtleField(spec=seed_spec, values=values, method="flow_map")


def seed_grid_from_spec(seed_spec: GridSpec) -> np.ndarray:
    return seed_grid(seed_spec, 1)


def ftle_localized(field: VectorField2D, pathline: PathlineSamples,
                   params: IntegrationParams) -> float:
    """FTLE from the accumulated product of per-step matrix exponentials."""
    n = params.n_steps
    steps = min(pathline.valid_count, n)
    grads = []
    for i in range(steps):
        x, y = pathline.positions[i]
        s = field.sample(float(x), float(y), float(pathline.times[i]))
        grads.append(s.gradient)
    psi = deformation_product(grads, params.dt_signed)
    c = psi.T @ psi
    lam = _lambda_max_sym(c[0, 0], c[0, 1], c[1, 1])
    if lam <= 0:
        return float("nan")
    return float(np.log(lam) / (2.0 * params.elapsed))


def ftle_localized_field(field: VectorField2D, params: IntegrationParams,
                         seed_spec: GridSpec | None = None, stride: int = 1,
                         workers: int | None = None) -> FtleField:
    """Per-seed localized FTLE; truncated pathlines are NaN."""
    if seed_spec is None:
        seed_spec = seed_subgrid_spec(field.spec, stride)
    seeds = seed_grid_from_spec(seed_spec)
    res = trace_seeds(field, params, seeds, want_psi=True, workers=workers)
    p = res["psi"]
    c11 = p[:, 0] * p[:, 0] + p[:, 2] * p[:, 2]
    c12 = p[:, 0] * p[:, 1] + p[:, 2] * p[:, 3]
    c22 = p[:, 1] * p[:, 1] + p[:, 3] * p[:, 3]
    half_tr = 0.5 * (c11 + c22)
    disc = np.maximum(half_tr * half_tr - (c11 * c22 - c12 * c12), 0.0)
    lam = half_tr + np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.log(np.maximum(lam, 0.0)) / (2.0 * params.elapsed)
    vals = np.where(res["valid"] == params.n_steps + 1, vals, np.nan)
    return FtleField(spec=seed_spec, values=vals.reshape(seed_spec.ny, seed_spec.nx),
                     method="localized")


def ftle_strain_sum(record: DynamicsRecord, params: IntegrationParams) -> float:
    """FTLE-like value from the strain progression of one record.

    Accumulates the principal strain of every valid step and divides by the
    integration time.  Requires the record to have been built with
    keep_strain=True.
    """
    if record.eps_steps is None:
        raise ValueError("record lacks per-step strain tensors; "
                         "rebuild with keep_strain=True for reconstruction")
    e = record.eps_steps[:record.valid_count]
    total = 0.0
    for e00, e01, e11 in e:
        total += _lambda_max_sym(e00, e01, e11)
    if not np.isfinite(total):
        return float("nan")
    return float(total / params.elapsed)


def ftle_strain_sum_field(field: VectorField2D, params: IntegrationParams,
                          seed_spec: GridSpec | None = None, stride: int = 1,
                          workers: int | None = None) -> FtleField:
    """Per-seed strain-progression reconstruction; seeds with no valid step are NaN."""
    if seed_spec is None:
        seed_spec = seed_subgrid_spec(field.spec, stride)
    seeds = seed_grid_from_spec(seed_spec)
    res = trace_seeds(field, params, seeds, want_strain=True, workers=workers)
    vals = res["stretch"] / params.elapsed
    vals = np.where(res["valid"] > 0, vals, np.nan)
    return FtleField(spec=seed_spec, values=vals.reshape(seed_spec.ny, seed_spec.nx),
                     method="strain_sum")
