"""End-to-end similarity fields, color-mapped rendering, and field export.

The similarity field evaluates JSD(xi_p, xi_R) / ln 2 for every seed against
the reference distribution of a user region, yielding values in [0, 1]
(0 = same distribution).  Seeds whose pathline never produced a valid sample
are masked as NaN; partially valid pathlines keep their (still normalized)
histograms and get a value.

Scalar-field file format ("SF2D", version 1, little-endian):

    magic 4 bytes b"SF2D", u32 version = 1, u32 nx, ny,
    payload ny*nx float32 row-major (y-major, x-minor), NaN = masked

plus a JSON sidecar at <path>.json carrying the full query provenance.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .distribution import (BinningPolicy, DynHistogram, LN2, Region, counts_matrix,
                           fit_binning, jsd_rows, reference_from_counts, select_seeds)
from .field import GridSpec

_SF_MAGIC = b"SF2D"
_SF_VERSION = 1
_SF_HEADER = struct.Struct("<4sIII")

MASK_COLOR = (255, 0, 255)  # magenta marks seeds without a defined value


@dataclass
class QueryProvenance:
    """Everything needed to re-run an identical similarity query."""

    region: dict
    t0: float
    tau: float
    dt_sample: float
    n_steps: int
    policy: dict
    fingerprint: str
    rk_tol: float | None = None

    def to_dict(self) -> dict:
        return {
            "region": self.region, "t0": self.t0, "tau": self.tau,
            "dt_sample": self.dt_sample, "n_steps": self.n_steps,
            "policy": self.policy, "fingerprint": self.fingerprint,
            "rk_tol": self.rk_tol,
        }


@dataclass
class DivergenceField:
    """Normalized JSD per seed plus the query that produced it."""

    spec: GridSpec
    values: np.ndarray  # (ny, nx) float64 in [0, 1], NaN = masked
    query: QueryProvenance


def similarity_field(cache, region: Region, policy: BinningPolicy,
                     counts: np.ndarray | None = None,
                     workers: int | None = None) -> DivergenceField:
    """Normalized divergence of every seed's histogram against the region's.

    ``cache`` is a built dynamics cache; no velocity data is touched.
    """
    if counts is None:
        counts = counts_matrix(cache, policy, workers=workers)
    member = select_seeds(region, cache.seed_points)
    ref = reference_from_counts(counts, member, policy)
    values = _divergence_values(cache, counts, ref.bins)
    spec = cache.seed_spec
    return DivergenceField(
        spec=spec,
        values=values.reshape(spec.ny, spec.nx),
        query=QueryProvenance(
            region=region.to_dict(), t0=cache.t0, tau=cache.tau,
            dt_sample=cache.dt_sample, n_steps=cache.n_steps,
            policy=policy.to_dict(), fingerprint=cache.fingerprint.hex(),
        ),
    )


def _divergence_values(cache, counts: np.ndarray, ref_bins: np.ndarray) -> np.ndarray:
    valid = cache.valid_steps
    rows = np.zeros_like(counts)
    ok = valid > 0
    denom = (2.0 * valid[ok].astype(float))[:, None]
    rows[ok] = counts[ok] / denom
    vals = jsd_rows(rows, ref_bins) / LN2
    vals[~ok] = np.nan
    return vals


class SimilarityEngine:
    """Caches binning ranges and per-seed histograms for interactive queries.

    One engine wraps one immutable dynamics cache; repeated queries with the
    same bin count reuse the histogram matrix, so only the reference
    aggregation and the per-seed divergences run per query.
    """

    def __init__(self, cache, workers: int | None = None):
        self.cache = cache
        self.workers = workers
        self._base_policy: BinningPolicy | None = None
        self._counts: dict[int, np.ndarray] = {}

    @property
    def auto_bins(self) -> int:
        return max(2, int(round(np.sqrt(self.cache.n_steps))))

    def policy(self, n: int | str = "auto") -> BinningPolicy:
        if self._base_policy is None:
            self._base_policy = fit_binning(self.cache, "auto")
        base = self._base_policy
        n_bins = self.auto_bins if n == "auto" else int(n)
        if n_bins == base.n:
            return base
        return BinningPolicy(n=n_bins, alpha_range=base.alpha_range,
                             beta_range=base.beta_range,
                             clamp_percentiles=base.clamp_percentiles)

    def counts(self, policy: BinningPolicy) -> np.ndarray:
        key = policy.n
        if key not in self._counts:
            self._counts[key] = counts_matrix(self.cache, policy, workers=self.workers)
        return self._counts[key]

    def prepare(self, n: int | str = "auto") -> BinningPolicy:
        policy = self.policy(n)
        self.counts(policy)
        return policy

    def query(self, region: Region, n: int | str = "auto"):
        """Run one region query; returns (DivergenceField, reference, timing dict)."""
        policy = self.policy(n)
        counts = self.counts(policy)
        t0 = time.perf_counter()
        member = select_seeds(region, self.cache.seed_points)
        ref = reference_from_counts(counts, member, policy)
        t1 = time.perf_counter()
        values = _divergence_values(self.cache, counts, ref.bins)
        t2 = time.perf_counter()
        spec = self.cache.seed_spec
        fld = DivergenceField(
            spec=spec, values=values.reshape(spec.ny, spec.nx),
            query=QueryProvenance(
                region=region.to_dict(), t0=self.cache.t0, tau=self.cache.tau,
                dt_sample=self.cache.dt_sample, n_steps=self.cache.n_steps,
                policy=policy.to_dict(), fingerprint=self.cache.fingerprint.hex(),
            ),
        )
        timing = {"reference_ms": (t1 - t0) * 1e3, "field_ms": (t2 - t1) * 1e3}
        return fld, ref, timing

    def seed_histogram(self, index: int, n: int | str = "auto") -> DynHistogram:
        policy = self.policy(n)
        counts = self.counts(policy)[index]
        v = int(self.cache.valid_steps[index])
        if v == 0:
            raise EmptyRecordErrorForSeed(index)
        return DynHistogram(policy=policy, bins=counts / (2.0 * v), sample_count=v)


class EmptyRecordErrorForSeed(ValueError):
    def __init__(self, index: int):
        super().__init__(f"seed {index} has no valid samples")
        self.index = index


# -- rendering ---------------------------------------------------------------

def _colormap_lut(name: str) -> np.ndarray:
    """256x3 uint8 lookup table for the supported colormaps."""
    if name == "grayscale":
        ramp = np.arange(256, dtype=np.uint8)
        return np.stack([ramp, ramp, ramp], axis=1)
    if name in ("viridis", "diverging"):
        import matplotlib

        cmap = matplotlib.colormaps["viridis" if name == "viridis" else "coolwarm"]
        return (cmap(np.linspace(0.0, 1.0, 256))[:, :3] * 255.0).round().astype(np.uint8)
    raise ValueError(f"unknown colormap {name!r}; choose viridis, grayscale or diverging")


def render_array(values: np.ndarray, colormap: str, out,
                 mask_color: tuple[int, int, int] = MASK_COLOR) -> None:
    """Write values in [0, 1] as a lossless PNG; NaN pixels get mask_color.

    Image rows run top-down, so row 0 of the PNG is the highest y row of the
    field.
    """
    lut = _colormap_lut(colormap)
    vals = np.asarray(values, dtype=float)
    finite = np.isfinite(vals)
    idx = np.zeros(vals.shape, dtype=np.uint8)
    idx[finite] = np.rint(np.clip(vals[finite], 0.0, 1.0) * 255.0).astype(np.uint8)
    rgb = lut[idx]
    rgb[~finite] = mask_color
    Image.fromarray(np.flipud(rgb), mode="RGB").save(out, format="PNG")


def render(field: DivergenceField | object, colormap: str, out,
           mask_color: tuple[int, int, int] = MASK_COLOR) -> None:
    """Render a divergence (or other unit-scaled) field to PNG."""
    render_array(field.values, colormap, out, mask_color=mask_color)


def normalized(values: np.ndarray) -> np.ndarray:
    """Linear min-max rescale of the finite values to [0, 1] (for FTLE images)."""
    vals = np.asarray(values, dtype=float)
    finite = np.isfinite(vals)
    if not finite.any():
        return vals
    lo, hi = vals[finite].min(), vals[finite].max()
    if hi <= lo:
        out = np.where(finite, 0.0, np.nan)
        return out
    return (vals - lo) / (hi - lo)


# -- scalar-field export ------------------------------------------------------

def export_field(field: DivergenceField, path) -> None:
    """Write the raw scalar grid plus a JSON provenance sidecar at <path>.json."""
    values = np.ascontiguousarray(field.values, dtype=np.float32)
    ny, nx = values.shape
    with open(path, "wb") as fh:
        fh.write(_SF_HEADER.pack(_SF_MAGIC, _SF_VERSION, nx, ny))
        fh.write(values.tobytes())
    sidecar = {
        "format": "SF2D",
        "version": _SF_VERSION,
        "nx": nx,
        "ny": ny,
        "origin": list(field.spec.origin),
        "spacing": list(field.spec.spacing),
        "query": field.query.to_dict(),
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_field(path) -> tuple[np.ndarray, dict]:
    """Read an exported scalar grid and its sidecar (empty dict if missing)."""
    with open(path, "rb") as fh:
        head = fh.read(_SF_HEADER.size)
        if len(head) < _SF_HEADER.size:
            raise ValueError("scalar field file too short for header")
        magic, version, nx, ny = _SF_HEADER.unpack(head)
        if magic != _SF_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_SF_MAGIC!r}")
        if version != _SF_VERSION:
            raise ValueError(f"unsupported scalar field version {version}")
        payload = fh.read(nx * ny * 4)
        if len(payload) != nx * ny * 4:
            raise ValueError("scalar field payload truncated")
    values = np.frombuffer(payload, dtype="<f4").reshape(ny, nx).copy()
    meta = {}
    try:
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return values, meta
