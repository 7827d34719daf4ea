"""Persistence of the expensive dynamics computation.

A dynamics cache holds the per-seed alpha/beta progressions as float32
(accumulation upstream is float64), so any number of region queries can run
without re-integration.  Padding entries past a seed's valid step count are
NaN; the valid counts are recovered from the padding on load.

Cache file format ("DYNC", version 1, little-endian):

    magic 4 bytes b"DYNC", u32 version = 1,
    32 bytes   source-field SHA-256 fingerprint
    f64        t0, tau, dt_sample
    i32        direction (+1 forward, -1 backward)
    f64        seed origin[2], spacing[2], t_min, t_max
    u32        seed nx, ny, nt
    u32        N (steps per seed), M (seed count)
    payload    alpha (M*N float32, seed-major), beta (same layout)
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .advect import IntegrationParams, seed_grid, seed_subgrid_spec
from .dynamics import trace_seeds
from .field import GridSpec, VectorField2D

_MAGIC = b"DYNC"
_VERSION = 1
_HEADER = struct.Struct("<4sI32s3di6d3I2I")

HEADER_BYTES = _HEADER.size


class CacheError(ValueError):
    """Base class for cache load/save failures."""


class CacheVersionError(CacheError):
    """Magic or version is not supported."""


class CacheFingerprintError(CacheError):
    """Cache was built from a different source field."""


class CacheTruncatedError(CacheError):
    """Payload shorter than the header declares."""


@dataclass
class DynamicsCache:
    """Persisted per-seed strain/rotation invariant progressions."""

    fingerprint: bytes
    t0: float
    tau: float
    dt_sample: float
    direction: int
    seed_spec: GridSpec
    n_steps: int
    alphas: np.ndarray  # (M, N) float32, NaN padded
    betas: np.ndarray
    valid_steps: np.ndarray  # (M,) int64
    build_seconds: float | None = None
    _seed_points: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def m_seeds(self) -> int:
        return self.alphas.shape[0]

    @property
    def byte_size(self) -> int:
        """Exact serialized size: header plus the two float32 payloads."""
        return HEADER_BYTES + 2 * self.m_seeds * self.n_steps * 4

    @property
    def seed_points(self) -> np.ndarray:
        if self._seed_points is None:
            self._seed_points = seed_grid(self.seed_spec, 1)
        return self._seed_points

    @property
    def params(self) -> IntegrationParams:
        return IntegrationParams(t0=self.t0, tau=self.tau, dt_sample=self.dt_sample)

    def record(self, index: int):
        """Single-seed view as a DynamicsRecord (float64 copies)."""
        from .dynamics import DynamicsRecord

        return DynamicsRecord(
            seed=self.seed_points[index].copy(),
            alphas=self.alphas[index].astype(float),
            betas=self.betas[index].astype(float),
            valid_count=int(self.valid_steps[index]),
        )


def build_cache(field: VectorField2D, params: IntegrationParams,
                seed_spec: GridSpec | None = None, stride: int = 1,
                workers: int | None = None) -> DynamicsCache:
    """Integrate every seed and accumulate its invariant progressions.

    The most expensive step of the pipeline; wall time is recorded on the
    returned cache.
    """
    if seed_spec is None:
        seed_spec = seed_subgrid_spec(field.spec, stride)
    seeds = seed_grid(seed_spec, 1)
    started = time.perf_counter()
    res = trace_seeds(field, params, seeds, want_dyn=True, workers=workers)
    elapsed = time.perf_counter() - started
    valid = np.minimum(res["valid"], params.n_steps).astype(np.int64)
    return DynamicsCache(
        fingerprint=field.fingerprint(),
        t0=params.t0, tau=params.tau, dt_sample=params.dt_sample,
        direction=params.direction,
        seed_spec=seed_spec, n_steps=params.n_steps,
        alphas=res["alphas"], betas=res["betas"], valid_steps=valid,
        build_seconds=elapsed,
        _seed_points=seeds,
    )


def save_cache(cache: DynamicsCache, path) -> None:
    sp = cache.seed_spec
    header = _HEADER.pack(
        _MAGIC, _VERSION, cache.fingerprint,
        cache.t0, cache.tau, cache.dt_sample, cache.direction,
        sp.origin[0], sp.origin[1], sp.spacing[0], sp.spacing[1], sp.t_min, sp.t_max,
        sp.nx, sp.ny, sp.nt,
        cache.n_steps, cache.m_seeds,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(cache.alphas, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(cache.betas, dtype="<f4").tobytes())


def _derive_valid(alphas: np.ndarray) -> np.ndarray:
    """Valid step count per row = length of the finite prefix (NaN = padding)."""
    nan = np.isnan(alphas)
    has_nan = nan.any(axis=1)
    first_nan = np.argmax(nan, axis=1)
    return np.where(has_nan, first_nan, alphas.shape[1]).astype(np.int64)


def load_cache(path, field: VectorField2D | None = None,
               fingerprint: bytes | None = None) -> DynamicsCache:
    """Read a cache; optionally validate it against a source field."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_BYTES)
        if len(head) < HEADER_BYTES:
            raise CacheTruncatedError(f"file too short for header: {len(head)} bytes")
        (magic, version, fp, t0, tau, dt_sample, direction,
         ox, oy, sx, sy, t_min, t_max, nx, ny, nt, n, m) = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise CacheVersionError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        if version != _VERSION:
            raise CacheVersionError(f"unsupported cache version {version}")
        expected = m * n * 4
        a_raw = fh.read(expected)
        b_raw = fh.read(expected)
        if len(a_raw) != expected or len(b_raw) != expected:
            raise CacheTruncatedError(
                f"payload truncated: got {len(a_raw) + len(b_raw)} of {2 * expected} bytes")
        if fh.read(1):
            raise CacheTruncatedError("trailing data after declared payload")
    want = None
    if field is not None:
        want = field.fingerprint()
    elif fingerprint is not None:
        want = fingerprint
    if want is not None and want != fp:
        raise CacheFingerprintError("cache was built from a different field "
                                    f"({fp.hex()[:12]}... != {want.hex()[:12]}...)")
    alphas = np.frombuffer(a_raw, dtype="<f4").reshape(m, n).copy()
    betas = np.frombuffer(b_raw, dtype="<f4").reshape(m, n).copy()
    seed_spec = GridSpec((ox, oy), (sx, sy), nx, ny, t_min, t_max, nt)
    return DynamicsCache(
        fingerprint=fp, t0=t0, tau=tau, dt_sample=dt_sample, direction=direction,
        seed_spec=seed_spec, n_steps=n, alphas=alphas, betas=betas,
        valid_steps=_derive_valid(alphas),
    )
