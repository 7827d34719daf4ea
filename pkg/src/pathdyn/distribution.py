"""Dynamics histograms, reference regions, and divergence measures.

Every pathline's alpha and beta progressions are binned separately on one
shared binning and concatenated into a single 2n-bin histogram (a joint 2D
histogram would wrongly treat the invariants as independent).  Each half is
normalized to mass 1/2, so the whole histogram sums to one and both
invariants carry equal weight even for truncated pathlines.

A reference distribution aggregates the raw bin counts of all pathlines
seeded inside a user region and renormalizes, which weights member pathlines
by their valid sample counts.

Divergences use the natural logarithm; the Jensen-Shannon divergence is
therefore bounded by ln 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._threads import worker_count
from .dynamics import DynamicsRecord

LN2 = math.log(2.0)


class EmptyRecordError(ValueError):
    """Histogram requested for a record with no valid samples."""


class EmptyRegionError(ValueError):
    """Region selects no seeds."""


class PolicyMismatchError(ValueError):
    """Histograms built on different binnings cannot be compared."""


class AbsoluteContinuityError(ValueError):
    """KL(p|q) undefined: q vanishes on part of p's support."""


# -- regions ----------------------------------------------------------------

MAX_POLYGON_VERTICES = 256


class Region:
    """Geometric seed selector; boundary points count as inside."""

    kind: str

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "Region":
        kind = d.get("kind")
        if kind == "circle":
            return Circle(tuple(d["center"]), float(d["radius"]))
        if kind == "ellipse":
            return Ellipse(tuple(d["center"]), tuple(d["radii"]))
        if kind == "polygon":
            return Polygon([tuple(v) for v in d["vertices"]])
        raise ValueError(f"unknown region kind {kind!r}")


@dataclass(frozen=True)
class Circle(Region):
    center: tuple[float, float]
    radius: float
    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        d2 = (p[:, 0] - self.center[0]) ** 2 + (p[:, 1] - self.center[1]) ** 2
        return d2 <= self.radius ** 2

    def to_dict(self) -> dict:
        return {"kind": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(Region):
    center: tuple[float, float]
    radii: tuple[float, float]
    kind = "ellipse"

    def __post_init__(self):
        if not (self.radii[0] > 0 and self.radii[1] > 0):
            raise ValueError(f"ellipse radii must be positive, got {self.radii}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        u = (p[:, 0] - self.center[0]) / self.radii[0]
        v = (p[:, 1] - self.center[1]) / self.radii[1]
        return u * u + v * v <= 1.0

    def to_dict(self) -> dict:
        return {"kind": "ellipse", "center": list(self.center), "radii": list(self.radii)}


@dataclass(frozen=True)
class Polygon(Region):
    vertices: tuple
    kind = "polygon"

    def __init__(self, vertices):
        verts = tuple((float(x), float(y)) for x, y in vertices)
        if len(verts) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(verts)}")
        if len(verts) > MAX_POLYGON_VERTICES:
            raise ValueError(f"polygon capped at {MAX_POLYGON_VERTICES} vertices")
        area2 = 0.0
        for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
            area2 += x0 * y1 - x1 * y0
        if abs(area2) <= 0.0:
            raise ValueError("polygon is degenerate (zero area)")
        object.__setattr__(self, "vertices", verts)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        x, y = p[:, 0], p[:, 1]
        inside = np.zeros(len(p), dtype=bool)
        verts = np.asarray(self.vertices)
        n = len(verts)
        for a in range(n):
            b = (a + 1) % n
            x0, y0 = verts[a]
            x1, y1 = verts[b]
            crosses = (y0 <= y) != (y1 <= y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (x <= xi)
        return inside

    def to_dict(self) -> dict:
        return {"kind": "polygon", "vertices": [list(v) for v in self.vertices]}


def parse_region_text(text: str) -> Region:
    """Parse "circle:cx,cy,r", "ellipse:cx,cy,rx,ry" or "polygon:x1,y1,...". """
    kind, _, rest = text.partition(":")
    try:
        nums = [float(v) for v in rest.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"bad region parameters in {text!r}") from exc
    if kind == "circle" and len(nums) == 3:
        return Circle((nums[0], nums[1]), nums[2])
    if kind == "ellipse" and len(nums) == 4:
        return Ellipse((nums[0], nums[1]), (nums[2], nums[3]))
    if kind == "polygon" and len(nums) >= 6 and len(nums) % 2 == 0:
        return Polygon(list(zip(nums[0::2], nums[1::2])))
    raise ValueError(f"cannot parse region {text!r}")


# -- binning ----------------------------------------------------------------

@dataclass(frozen=True)
class BinningPolicy:
    """Shared binning: n bins per invariant over fixed value ranges.

    All histograms that are ever compared must come from the same policy; the
    ranges define the common probability space.
    """

    n: int
    alpha_range: tuple[float, float]
    beta_range: tuple[float, float]
    clamp_percentiles: tuple[float, float] = (0.5, 99.5)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 bins per invariant, got {self.n}")
        for lo, hi in (self.alpha_range, self.beta_range):
            if not lo < hi:
                raise ValueError(f"empty bin range [{lo}, {hi}]")

    def compatible(self, other: "BinningPolicy") -> bool:
        return (self.n == other.n and self.alpha_range == other.alpha_range
                and self.beta_range == other.beta_range)

    def to_dict(self) -> dict:
        return {"n": self.n, "alpha_range": list(self.alpha_range),
                "beta_range": list(self.beta_range),
                "clamp_percentiles": list(self.clamp_percentiles)}


@dataclass
class DynHistogram:
    """Normalized 2n-bin concatenated alpha/beta histogram."""

    policy: BinningPolicy
    bins: np.ndarray
    sample_count: int  # contributing values per invariant


def _valid_values(records) -> tuple[np.ndarray, np.ndarray, int]:
    """Pool valid alpha/beta values from an iterable of DynamicsRecords."""
    alphas, betas = [], []
    n = 0
    for r in records:
        n = max(n, len(r.alphas))
        if r.valid_count > 0:
            alphas.append(np.asarray(r.alphas[:r.valid_count], dtype=float))
            betas.append(np.asarray(r.betas[:r.valid_count], dtype=float))
    if not alphas:
        return np.empty(0), np.empty(0), n
    return np.concatenate(alphas), np.concatenate(betas), n


def _percentile_pair(values: np.ndarray, percentiles) -> tuple[float, float]:
    """Order-statistic percentiles with linear interpolation.

    Matches the textbook sorted-array rule (rank = q/100 * (size-1)) but uses
    an in-place partial sort, which matters for pooled caches with 1e8+
    values.  ``values`` is reordered.
    """
    size = values.size
    out = []
    kth = []
    ranks = []
    for q in percentiles:
        rank = q / 100.0 * (size - 1)
        lo = int(np.floor(rank))
        hi = min(lo + 1, size - 1)
        ranks.append((rank, lo, hi))
        kth.extend([lo, hi])
    values.partition(sorted(set(kth)))
    for rank, lo, hi in ranks:
        vlo = float(values[lo])
        vhi = float(values[hi])
        out.append(vlo + (rank - lo) * (vhi - vlo))
    return out[0], out[1]


def _percentile_range(values: np.ndarray, percentiles) -> tuple[float, float]:
    lo, hi = _percentile_pair(values, percentiles)
    if not lo < hi:
        c = float(lo)
        delta = max(abs(c), 1.0) * 1e-9
        lo, hi = c - delta, c + delta
    return float(lo), float(hi)


def fit_binning(records, n: int | str = "auto",
                clamp_percentiles: tuple[float, float] = (0.5, 99.5)) -> BinningPolicy:
    """Choose bin count and shared value ranges from all records.

    n="auto" applies the square-root rule of thumb on the per-record sample
    count N.  Ranges are percentile-clamped over the pooled valid values;
    values outside them land in the edge bins.  Degenerate constant pools
    widen to [c - delta, c + delta] with delta = max(|c|, 1) * 1e-9.
    """
    if hasattr(records, "alphas") and getattr(records, "alphas").ndim == 2:
        # Cache path: pool one invariant at a time to bound peak memory.
        n_steps = records.alphas.shape[1]
        mask = np.arange(n_steps)[None, :] < records.valid_steps[:, None]
        if not mask.any():
            raise EmptyRecordError("no record has any valid sample")
        pooled = records.alphas[mask]
        alpha_range = _percentile_range(pooled, clamp_percentiles)
        pooled = records.betas[mask]
        beta_range = _percentile_range(pooled, clamp_percentiles)
        del pooled, mask
    else:
        alphas, betas, n_steps = _valid_values(records)
        if alphas.size == 0:
            raise EmptyRecordError("no record has any valid sample")
        alpha_range = _percentile_range(alphas, clamp_percentiles)
        beta_range = _percentile_range(betas, clamp_percentiles)
    if n == "auto":
        n_bins = max(2, int(round(math.sqrt(n_steps))))
    else:
        n_bins = int(n)
    return BinningPolicy(
        n=n_bins,
        alpha_range=alpha_range,
        beta_range=beta_range,
        clamp_percentiles=tuple(clamp_percentiles),
    )


def _bin_indices(values: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    idx = np.floor((np.asarray(values, dtype=float) - lo) * (n / (hi - lo))).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def histogram_counts(record: DynamicsRecord, policy: BinningPolicy) -> np.ndarray:
    """Raw 2n-bin counts of one record (no normalization)."""
    v = record.valid_count
    counts = np.zeros(2 * policy.n)
    if v == 0:
        return counts
    ia = _bin_indices(record.alphas[:v], *policy.alpha_range, policy.n)
    ib = _bin_indices(record.betas[:v], *policy.beta_range, policy.n)
    np.add.at(counts, ia, 1.0)
    np.add.at(counts, policy.n + ib, 1.0)
    return counts


def histogram(record: DynamicsRecord, policy: BinningPolicy) -> DynHistogram:
    """Normalized per-pathline histogram; each half carries mass 1/2."""
    if record.valid_count < 1:
        raise EmptyRecordError("record has no valid samples")
    counts = histogram_counts(record, policy)
    n = policy.n
    bins = np.empty(2 * n)
    bins[:n] = counts[:n] / (2.0 * record.valid_count)
    bins[n:] = counts[n:] / (2.0 * record.valid_count)
    return DynHistogram(policy=policy, bins=bins, sample_count=record.valid_count)


def counts_matrix(cache, policy: BinningPolicy, workers: int | None = None) -> np.ndarray:
    """Raw per-seed count rows (M, 2n) for a dynamics cache."""
    m = cache.alphas.shape[0]
    counts = np.zeros((m, 2 * policy.n))
    with worker_count(workers):
        _kernels.hist_counts(cache.alphas, cache.betas,
                             cache.valid_steps.astype(np.int64), policy.n,
                             policy.alpha_range[0], policy.alpha_range[1],
                             policy.beta_range[0], policy.beta_range[1], counts)
    return counts


def select_seeds(region: Region, seed_points: np.ndarray) -> np.ndarray:
    member = region.contains(seed_points)
    if not member.any():
        raise EmptyRegionError("region selects no seeds")
    return member


def reference_from_counts(counts: np.ndarray, member: np.ndarray,
                          policy: BinningPolicy) -> DynHistogram:
    """Sum member rows in seed order, then normalize the total to one."""
    total = counts[member].sum(axis=0)
    mass = total.sum()
    if mass <= 0:
        raise EmptyRegionError("selected seeds have no valid samples")
    return DynHistogram(policy=policy, bins=total / mass,
                        sample_count=int(round(mass / 2.0)))


def reference_distribution(records, region: Region, policy: BinningPolicy,
                           seed_points: np.ndarray | None = None) -> DynHistogram:
    """Aggregate the raw bin counts of all pathlines seeded inside the region.

    ``records`` is either a cache-like object (2D alphas/betas plus
    seed_points) or an iterable of DynamicsRecords (seeds taken from the
    records unless given explicitly).
    """
    if hasattr(records, "alphas") and getattr(records, "alphas").ndim == 2:
        pts = records.seed_points if seed_points is None else seed_points
        member = select_seeds(region, pts)
        return reference_from_counts(counts_matrix(records, policy), member, policy)
    records = list(records)
    if seed_points is None:
        seed_points = np.array([r.seed for r in records])
    member = select_seeds(region, seed_points)
    total = np.zeros(2 * policy.n)
    for r, inside in zip(records, member):
        if inside:
            total += histogram_counts(r, policy)
    mass = total.sum()
    if mass <= 0:
        raise EmptyRegionError("selected seeds have no valid samples")
    return DynHistogram(policy=policy, bins=total / mass, sample_count=int(round(mass / 2.0)))


# -- divergences ------------------------------------------------------------

def _as_bins(h) -> np.ndarray:
    return h.bins if isinstance(h, DynHistogram) else np.asarray(h, dtype=float)


def _check_policies(p, q) -> None:
    if isinstance(p, DynHistogram) and isinstance(q, DynHistogram):
        if not p.policy.compatible(q.policy):
            raise PolicyMismatchError("histograms use different binning policies")


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence KL(p|q) with natural log.

    Requires absolute continuity: any bin with q = 0 must have p = 0.
    """
    _check_policies(p, q)
    pb, qb = _as_bins(p), _as_bins(q)
    if pb.shape != qb.shape:
        raise PolicyMismatchError(f"bin count mismatch: {pb.shape} vs {qb.shape}")
    violation = (qb == 0.0) & (pb > 0.0)
    if violation.any():
        raise AbsoluteContinuityError(
            f"q vanishes on {int(violation.sum())} bins where p has mass")
    total = 0.0
    for i in range(len(pb)):
        if pb[i] > 0.0:
            total += pb[i] * math.log(pb[i] / qb[i])
    return total


def _kl_vs_mixture(pb: np.ndarray, mb: np.ndarray) -> float:
    total = 0.0
    for i in range(len(pb)):
        if pb[i] > 0.0:
            total += pb[i] * math.log(pb[i] / mb[i])
    return total


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, clamped to [0, ln 2].

    Symmetric and defined for any pair on the same binning; the mixture
    m = (p + q)/2 guarantees absolute continuity of both terms.
    """
    _check_policies(p, q)
    pb, qb = _as_bins(p), _as_bins(q)
    if pb.shape != qb.shape:
        raise PolicyMismatchError(f"bin count mismatch: {pb.shape} vs {qb.shape}")
    mb = 0.5 * (pb + qb)
    value = 0.5 * _kl_vs_mixture(pb, mb) + 0.5 * _kl_vs_mixture(qb, mb)
    return min(max(value, 0.0), LN2)


def jsd_rows(rows: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Vectorized jsd(row_i, ref) over a matrix of distributions."""
    r = ref[None, :]
    m = 0.5 * (rows + r)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(rows > 0.0, rows * np.log(rows / m), 0.0)
        tq = np.where(r > 0.0, r * np.log(r / m), 0.0)
    vals = 0.5 * tp.sum(axis=1) + 0.5 * tq.sum(axis=1)
    return np.clip(vals, 0.0, LN2)
