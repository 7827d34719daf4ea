import math

import numpy as np
import pytest

from pathdyn import (AbsoluteContinuityError, BinningPolicy, Circle, DynamicsRecord,
                     Ellipse, EmptyRecordError, EmptyRegionError, Polygon, Region,
                     fit_binning, histogram, jsd, kl_divergence, parse_region_text,
                     reference_distribution)
from pathdyn.distribution import (LN2, PolicyMismatchError, histogram_counts, jsd_rows,
                                  _percentile_pair)

LN = math.log


def record(alphas, betas, seed=(0.0, 0.0), valid=None):
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    return DynamicsRecord(seed=np.asarray(seed, dtype=float), alphas=alphas, betas=betas,
                          valid_count=len(alphas) if valid is None else valid)


# -- regions -----------------------------------------------------------------

def test_region_geometry():
    c = Circle((0.0, 0.0), 1.0)
    np.testing.assert_array_equal(
        c.contains(np.array([[0, 0], [1, 0], [1.001, 0]])), [True, True, False])
    e = Ellipse((0.0, 0.0), (2.0, 1.0))
    np.testing.assert_array_equal(
        e.contains(np.array([[2, 0], [0, 1], [2, 1]])), [True, True, False])
    p = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    np.testing.assert_array_equal(
        p.contains(np.array([[0.5, 0.5], [1.5, 0.5]])), [True, False])


def test_region_validation():
    with pytest.raises(ValueError):
        Circle((0, 0), 0.0)
    with pytest.raises(ValueError):
        Ellipse((0, 0), (1.0, -1.0))
    with pytest.raises(ValueError):
        Polygon([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        Polygon([(0, 0), (1, 1), (2, 2)])  # collinear, zero area


def test_region_round_trip():
    for r in (Circle((1, 2), 0.5), Ellipse((0, 0), (1, 2)), Polygon([(0, 0), (1, 0), (0, 1)])):
        back = Region.from_dict(r.to_dict())
        assert back == r


def test_parse_region_text():
    assert parse_region_text("circle:1,2,0.5") == Circle((1.0, 2.0), 0.5)
    assert parse_region_text("ellipse:0,0,1,2") == Ellipse((0.0, 0.0), (1.0, 2.0))
    assert parse_region_text("polygon:0,0,1,0,0,1") == Polygon([(0, 0), (1, 0), (0, 1)])
    with pytest.raises(ValueError):
        parse_region_text("circle:1,2")
    with pytest.raises(ValueError):
        parse_region_text("disk:1,2,3")


# -- binning -----------------------------------------------------------------

def test_policy_validation():
    with pytest.raises(ValueError):
        BinningPolicy(1, (0, 1), (0, 1))
    with pytest.raises(ValueError):
        BinningPolicy(4, (1, 1), (0, 1))


def test_auto_bin_count_square_root_rule():
    n_samples = 1444
    rec = record(np.linspace(0, 1, n_samples), np.zeros(n_samples))
    policy = fit_binning([rec], "auto")
    assert policy.n == 38


def test_degenerate_range_widening():
    rec = record([5.0, 5.0, 5.0], [0.0, 0.0, 0.0])
    policy = fit_binning([rec], 4)
    lo, hi = policy.alpha_range
    delta = 5.0 * 1e-9
    assert lo == pytest.approx(5.0 - delta, abs=1e-18)
    assert hi == pytest.approx(5.0 + delta, abs=1e-18)
    blo, bhi = policy.beta_range
    assert (blo, bhi) == (-1e-9, 1e-9)  # |c| < 1 widens by the absolute floor


def test_percentiles_match_sorted_brute_force(rng):
    def brute(values, q):
        v = np.sort(np.asarray(values))
        rank = q / 100.0 * (len(v) - 1)
        lo = int(math.floor(rank))
        hi = min(lo + 1, len(v) - 1)
        return float(v[lo]) + (rank - lo) * (float(v[hi]) - float(v[lo]))

    for size in (3, 10, 101, 1234):
        values = rng.normal(size=size).astype(np.float32)
        got = _percentile_pair(values.copy(), (0.5, 99.5))
        assert got[0] == pytest.approx(brute(values, 0.5), abs=1e-15)
        assert got[1] == pytest.approx(brute(values, 99.5), abs=1e-15)


def test_outlier_clamps_into_edge_bin(rng):
    alphas = np.concatenate([rng.uniform(0, 1, 999), [1e6]])
    rec = record(alphas, np.zeros(1000))
    policy = fit_binning([rec], 10)
    assert policy.alpha_range[1] < 2.0  # the outlier is outside the range
    h = histogram(rec, policy)
    assert h.bins[:10].sum() == pytest.approx(0.5, abs=1e-12)
    assert h.bins[9] > 0  # outlier mass landed in the top edge bin


def test_fit_binning_empty():
    rec = record([], [], valid=0)
    with pytest.raises(EmptyRecordError):
        fit_binning([rec], 4)


# -- histograms ----------------------------------------------------------------

def test_histogram_hand_binned_example():
    rec = record([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])
    policy = BinningPolicy(2, (1.0, 4.0), (-1.0, 1.0))
    h = histogram(rec, policy)
    np.testing.assert_allclose(h.bins, [0.25, 0.25, 0.0, 0.5], atol=1e-15)
    assert h.sample_count == 4


def test_histogram_constant_values_two_spikes():
    rec = record([2.0] * 7, [3.0] * 7)
    policy = BinningPolicy(5, (0.0, 4.0), (0.0, 4.0))
    h = histogram(rec, policy)
    assert (h.bins > 0).sum() == 2
    assert sorted(h.bins[h.bins > 0]) == [0.5, 0.5]


def test_histogram_mass_and_halves(rng):
    rec = record(rng.normal(size=200), rng.normal(size=200) ** 2)
    policy = fit_binning([rec], 14)
    h = histogram(rec, policy)
    assert h.bins.sum() == pytest.approx(1.0, abs=1e-12)
    assert h.bins[:14].sum() == pytest.approx(0.5, abs=1e-12)
    assert (h.bins >= 0).all()


def test_histogram_permutation_invariance(rng):
    alphas = rng.normal(size=100)
    betas = rng.normal(size=100) ** 2
    rec1 = record(alphas, betas)
    perm = rng.permutation(100)
    rec2 = record(alphas[perm], betas[perm])
    policy = fit_binning([rec1], 10)
    np.testing.assert_array_equal(histogram(rec1, policy).bins, histogram(rec2, policy).bins)


def test_histogram_empty_record():
    rec = record([], [], valid=0)
    policy = BinningPolicy(2, (0, 1), (0, 1))
    with pytest.raises(EmptyRecordError):
        histogram(rec, policy)


def test_truncated_record_uses_valid_prefix():
    rec = record([0.1, 0.2, np.nan, np.nan], [0.0, 0.1, np.nan, np.nan], valid=2)
    policy = BinningPolicy(2, (0.0, 0.4), (0.0, 0.4))
    h = histogram(rec, policy)
    assert h.bins.sum() == pytest.approx(1.0, abs=1e-12)
    assert h.sample_count == 2


# -- reference aggregation -------------------------------------------------------

def test_reference_single_seed_bitwise():
    rec = record([0.1, 0.5, 0.9], [0.2, 0.2, 0.8], seed=(0.5, 0.5))
    far = record([10.0] * 3, [10.0] * 3, seed=(5.0, 5.0))
    policy = BinningPolicy(4, (0.0, 1.0), (0.0, 1.0))
    ref = reference_distribution([rec, far], Circle((0.5, 0.5), 0.1), policy)
    np.testing.assert_array_equal(ref.bins, histogram(rec, policy).bins)


def test_reference_two_identical_seeds():
    r1 = record([0.1, 0.9], [0.5, 0.5], seed=(0.0, 0.0))
    r2 = record([0.1, 0.9], [0.5, 0.5], seed=(0.1, 0.0))
    policy = BinningPolicy(2, (0.0, 1.0), (0.0, 1.0))
    ref = reference_distribution([r1, r2], Circle((0.05, 0.0), 0.2), policy)
    np.testing.assert_allclose(ref.bins, histogram(r1, policy).bins, atol=1e-15)


def test_reference_disjoint_single_bin_seeds():
    # each member occupies one alpha bin and one beta bin; the aggregate
    # splits each half's mass across the two members
    r1 = record([0.1] * 4, [0.1] * 4, seed=(0.0, 0.0))
    r2 = record([0.9] * 4, [0.9] * 4, seed=(0.1, 0.0))
    policy = BinningPolicy(2, (0.0, 1.0), (0.0, 1.0))
    ref = reference_distribution([r1, r2], Circle((0.05, 0.0), 0.2), policy)
    np.testing.assert_allclose(ref.bins, [0.25, 0.25, 0.25, 0.25], atol=1e-15)


def test_reference_empty_region():
    rec = record([0.1], [0.1], seed=(0.0, 0.0))
    policy = BinningPolicy(2, (0.0, 1.0), (0.0, 1.0))
    with pytest.raises(EmptyRegionError):
        reference_distribution([rec], Circle((9.0, 9.0), 0.1), policy)


def test_reference_union_is_count_weighted_mixture(rng):
    records = []
    for i in range(6):
        n = int(rng.integers(3, 30))
        records.append(record(rng.normal(size=n), rng.normal(size=n) ** 2,
                              seed=(float(i), 0.0)))
    policy = fit_binning(records, 6)
    left = Polygon([(-0.5, -1), (2.5, -1), (2.5, 1), (-0.5, 1)])    # seeds 0..2
    right = Polygon([(2.5, -1), (5.5, -1), (5.5, 1), (2.5, 1)])     # seeds 3..5
    union = Polygon([(-0.5, -1), (5.5, -1), (5.5, 1), (-0.5, 1)])
    ref_l = reference_distribution(records, left, policy)
    ref_r = reference_distribution(records, right, policy)
    ref_u = reference_distribution(records, union, policy)
    mass_l = 2.0 * sum(r.valid_count for r in records[:3])
    mass_r = 2.0 * sum(r.valid_count for r in records[3:])
    mixture = (mass_l * ref_l.bins + mass_r * ref_r.bins) / (mass_l + mass_r)
    np.testing.assert_allclose(ref_u.bins, mixture, atol=1e-14)


# -- divergences -------------------------------------------------------------------

def test_kl_identical_is_zero():
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0


def test_kl_absolute_continuity_error():
    with pytest.raises(AbsoluteContinuityError):
        kl_divergence([1.0, 0.0], [0.0, 1.0])


def test_kl_hand_value():
    got = kl_divergence([0.5, 0.5], [0.75, 0.25])
    want = 0.5 * LN(0.5 / 0.75) + 0.5 * LN(0.5 / 0.25)  # = 0.14384103622589042
    assert got == pytest.approx(0.14384103622589042, abs=1e-15)
    assert got == pytest.approx(want, abs=1e-16)


def test_jsd_identical_is_zero():
    assert jsd([0.25, 0.25, 0.5], [0.25, 0.25, 0.5]) == 0.0


def test_jsd_disjoint_saturates_exactly():
    assert jsd([1.0, 0.0], [0.0, 1.0]) == LN2


def test_jsd_hand_value():
    got = jsd([0.5, 0.5], [1.0, 0.0])
    assert got == pytest.approx(0.21576155433883565, abs=1e-15)


def test_jsd_symmetry_and_bounds(rng):
    for _ in range(500):
        size = int(rng.integers(2, 20))
        p = rng.dirichlet(np.full(size, 0.4))
        q = rng.dirichlet(np.full(size, 0.4))
        if rng.random() < 0.3:
            q[rng.integers(size)] = 0.0
            q = q / q.sum()
        d = jsd(p, q)
        assert d == jsd(q, p)                      # bitwise symmetric
        assert 0.0 <= d <= LN2 + 1e-12
        if not np.allclose(p, q, atol=1e-12):
            assert d > 0.0


def test_jsd_policy_mismatch():
    p1 = BinningPolicy(2, (0, 1), (0, 1))
    p2 = BinningPolicy(2, (0, 2), (0, 1))
    rec = record([0.5, 0.5], [0.5, 0.5])
    with pytest.raises(PolicyMismatchError):
        jsd(histogram(rec, p1), histogram(rec, p2))


def test_jsd_rows_matches_scalar(rng):
    ref = rng.dirichlet(np.full(8, 0.5))
    rows = rng.dirichlet(np.full(8, 0.5), size=20)
    batch = jsd_rows(rows, ref)
    for i in range(20):
        assert batch[i] == pytest.approx(jsd(rows[i], ref), abs=1e-14)


def test_histogram_counts_vs_kernel(rng, two_population_field):
    # the per-record binning and the batched kernel must agree bin-for-bin
    from pathdyn import IntegrationParams, build_cache
    from pathdyn.distribution import counts_matrix

    params = IntegrationParams(t0=0.0, tau=1.0, dt_sample=0.05)
    cache = build_cache(two_population_field, params, stride=16)
    policy = fit_binning(cache, 7)
    counts = counts_matrix(cache, policy)
    for idx in rng.integers(0, cache.m_seeds, size=12):
        rec = cache.record(int(idx))
        if rec.valid_count == 0:
            continue
        np.testing.assert_array_equal(counts[idx], histogram_counts(rec, policy))
