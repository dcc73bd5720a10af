"""dist_core: threshold queries, normal-cdf accuracy, persistence.

The normal cdf/quantile pair is checked against an independent high-precision
oracle (mpmath at 30 significant digits) rather than against itself.
"""

import io
import math
import random

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import dist_core as dc

mpmath.mp.dps = 30


def oracle_cdf(x: float) -> mpmath.mpf:
    return mpmath.ncdf(x)


def oracle_quantile(p: float) -> float:
    # Bisection on the 30-digit cdf; independent of the implementation under
    # test.
    f = lambda t: mpmath.ncdf(t) - mpmath.mpf(p)
    return float(mpmath.findroot(f, (mpmath.mpf(-40), mpmath.mpf(40)), solver="bisect"))


# -----------------------------------------------------------------------------
# Normal cdf / quantile accuracy
# -----------------------------------------------------------------------------


def test_cdf_matches_reference_to_1e_12_on_pm8():
    xs = [i * 0.25 for i in range(-32, 33)]
    worst = 0.0
    for x in xs:
        err = abs(dc.normal_cdf(x) - float(oracle_cdf(x)))
        worst = max(worst, err)
    assert worst <= 1e-12


def test_cdf_tail_relative_accuracy():
    for x in (-8.0, -7.0, -6.0, -5.0, 5.0, 6.0, 7.0, 8.0):
        ref = float(oracle_cdf(x))
        got = dc.normal_cdf(x)
        assert got == pytest.approx(ref, rel=1e-12)


def test_cdf_basic_identities():
    assert dc.normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
    for x in (0.3, 1.7, 4.2, 7.5):
        assert dc.normal_cdf(-x) == pytest.approx(1.0 - dc.normal_cdf(x), abs=1e-12)


def test_quantile_round_trip_1e_9():
    ps = [1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 0.02, 0.3, 0.5, 0.7, 0.98]
    ps += [1.0 - p for p in ps if p < 0.5]
    for p in ps:
        x = dc.normal_quantile(p)
        if p <= 0.5:
            back = dc.normal_cdf(x)
        else:
            back = 1.0 - dc.normal_sf(x)
        assert abs(back - p) <= 1e-9
        assert abs(back - p) <= 1e-9 * max(p, 1e-12) + 1e-15  # relative too


def test_quantile_against_reference_values():
    # p = 1e-8 -> about -5.612 (tail quantile used for target-ratio setup)
    ref = oracle_quantile(1e-8)
    assert ref == pytest.approx(-5.612, abs=1e-3)
    assert dc.normal_quantile(1e-8) == pytest.approx(ref, abs=1e-9)
    assert dc.normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)
    assert dc.normal_quantile(0.0) == -math.inf
    assert dc.normal_quantile(1.0) == math.inf


def test_quantile_rejects_bad_p():
    with pytest.raises(dc.ValidationError):
        dc.normal_quantile(-0.1)
    with pytest.raises(dc.ValidationError):
        dc.normal_quantile(1.1)
    with pytest.raises(dc.ValidationError):
        dc.normal_quantile(float("nan"))


@given(st.floats(min_value=-8.0, max_value=8.0, allow_nan=False))
def test_cdf_symmetry_property(x):
    assert abs(dc.normal_cdf(-x) - (1.0 - dc.normal_cdf(x))) <= 1e-12


@given(st.floats(min_value=1e-12, max_value=1.0 - 1e-12))
@settings(max_examples=200)
def test_quantile_round_trip_property(p):
    x = dc.normal_quantile(p)
    assert abs(dc.normal_cdf(x) - p) <= 1e-9


# -----------------------------------------------------------------------------
# Marked ratio and quantile on finite distributions
# -----------------------------------------------------------------------------


def test_marked_ratio_examples():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 3.0, 4.0])
    assert dc.marked_ratio(d, dc.MarkingSpec(2.5)) == 0.5
    assert dc.marked_ratio(dc.NormalDistribution(), dc.MarkingSpec(0.0)) == 0.5
    # ratio at the 10% quantile of the standard normal
    got = dc.marked_ratio(dc.NormalDistribution(), dc.MarkingSpec(-1.2816))
    assert got == pytest.approx(0.1000, abs=1e-4)
    assert got == pytest.approx(float(oracle_cdf(-1.2816)), abs=1e-14)


def test_marked_ratio_out_of_range_clamps():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 3.0])
    assert dc.marked_ratio(d, dc.MarkingSpec(0.0)) == 0.0
    assert dc.marked_ratio(d, dc.MarkingSpec(99.0)) == 1.0


def test_strict_inequality_at_threshold():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 2.0, 3.0])
    # ties at the threshold are unmarked
    assert d.count_below(2.0) == 1
    assert dc.marked_ratio(d, dc.MarkingSpec(2.0)) == 0.25


def test_max_sense_marks_strictly_above():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 2.0, 3.0])
    assert dc.marked_ratio(d, dc.MarkingSpec(2.0, sense="max")) == 0.25
    assert dc.marked_ratio(dc.NormalDistribution(), dc.MarkingSpec(0.0, sense="max")) == 0.5


def test_finite_quantile_marks_expected_count():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 3.0, 4.0])
    t = dc.quantile(d, 0.25)
    assert d.count_below(t) == 1
    assert dc.quantile(d, 0.0) == 1.0  # marks zero solutions
    assert d.count_below(dc.quantile(d, 0.0)) == 0
    assert dc.quantile(d, 1.0) == math.inf


def test_bad_marking_sense_rejected():
    with pytest.raises(dc.ValidationError):
        dc.MarkingSpec(1.0, sense="sideways")


finite_dists = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    min_size=1,
    max_size=60,
).map(dc.FiniteDistribution.from_values)


@given(finite_dists, st.floats(min_value=-1e6, max_value=1e6), st.floats(min_value=-1e6, max_value=1e6))
def test_marked_ratio_monotone_in_threshold(d, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    assert d.count_below(lo) <= d.count_below(hi)
    assert 0 <= d.count_below(lo) and d.count_below(hi) <= d.n_total


@given(finite_dists, st.floats(min_value=0.0, max_value=1.0))
def test_quantile_picks_nearest_achievable_marked_count(d, p):
    t = d.quantile(p)
    marked = d.count_below(t)
    achievable = [0] + list(d.cum)
    assert marked in achievable
    best = min(abs(b - p * d.n_total) for b in achievable)
    assert abs(marked - p * d.n_total) == pytest.approx(best)


@given(
    st.sets(st.integers(min_value=-10**6, max_value=10**6), min_size=1, max_size=60),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_quantile_within_one_solution_when_values_distinct(raw, p):
    d = dc.FiniteDistribution.from_values([float(v) for v in raw])
    marked = d.count_below(d.quantile(p))
    assert abs(marked - p * d.n_total) <= 0.5 + 1e-9


# -----------------------------------------------------------------------------
# Sampling
# -----------------------------------------------------------------------------


def test_sample_uniform_singleton():
    d = dc.FiniteDistribution.from_values([5.0])
    for seed in range(5):
        q, rank = dc.sample_uniform(d, random.Random(seed))
        assert q == 5.0 and rank == 0


def test_sample_uniform_frequencies():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 3.0, 4.0])
    rng = random.Random(1234)
    hits = [0, 0, 0, 0]
    n = 10**6
    for _ in range(n):
        _, rank = d.draw_uniform(rng)
        hits[rank] += 1
    for h in hits:
        assert abs(h / n - 0.25) <= 0.002


def test_normal_sampling_moments():
    nd = dc.NormalDistribution()
    rng = random.Random(99)
    n = 10**6
    s = 0.0
    s2 = 0.0
    for _ in range(n):
        q, rank = nd.draw_uniform(rng)
        assert rank is None
        s += q
        s2 += q * q
    mean = s / n
    var = s2 / n - mean * mean
    assert abs(mean) <= 0.005
    assert abs(math.sqrt(var) - 1.0) <= 0.005


def test_conditional_draws_respect_threshold():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 2.0, 3.0, 7.0])
    rng = random.Random(7)
    for _ in range(200):
        q, rank = d.draw_below(rng, 3.0)
        assert q < 3.0 and rank < 3
        q, rank = d.draw_not_below(rng, 3.0)
        assert q >= 3.0 and rank >= 3
    nd = dc.NormalDistribution()
    for _ in range(200):
        q, _ = nd.draw_below(rng, -4.0)
        assert q < -4.0
        q, _ = nd.draw_not_below(rng, -4.0)
        assert q >= -4.0


def test_truncated_normal_draw_depth():
    # Inverse-cdf subinterval sampling reaches 6-sigma thresholds exactly.
    nd = dc.NormalDistribution()
    rng = random.Random(3)
    t = nd.quantile(1e-9)
    qs = [nd.draw_below(rng, t)[0] for _ in range(100)]
    assert all(q < t for q in qs)


def test_empty_side_draws_raise():
    d = dc.FiniteDistribution.from_values([1.0, 2.0])
    rng = random.Random(0)
    with pytest.raises(dc.ValidationError):
        d.draw_below(rng, 1.0)
    with pytest.raises(dc.ValidationError):
        d.draw_not_below(rng, 99.0)


# -----------------------------------------------------------------------------
# Construction and conditional means
# -----------------------------------------------------------------------------


def test_construction_validation():
    with pytest.raises(dc.ValidationError):
        dc.FiniteDistribution([], [])
    with pytest.raises(dc.ValidationError):
        dc.FiniteDistribution([1.0, 1.0], [1, 1])
    with pytest.raises(dc.ValidationError):
        dc.FiniteDistribution([2.0, 1.0], [1, 1])
    with pytest.raises(dc.ValidationError):
        dc.FiniteDistribution([1.0], [0])
    with pytest.raises(dc.ValidationError):
        dc.FiniteDistribution([float("nan")], [1])


def test_from_values_compresses_runs():
    d = dc.FiniteDistribution.from_values([3.0, 1.0, 3.0, 1.0, 1.0])
    assert d.values == [1.0, 3.0]
    assert d.counts == [3, 2]
    assert d.n_total == 5
    assert d.quality_of_rank(0) == 1.0
    assert d.quality_of_rank(2) == 1.0
    assert d.quality_of_rank(3) == 3.0


def test_conditional_means_finite():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 3.0, 4.0])
    below, above = d.conditional_means(3.0)
    assert below == pytest.approx(1.5)
    assert above == pytest.approx(3.5)
    below, above = d.conditional_means(0.0)
    assert below is None and above == pytest.approx(2.5)


def test_conditional_means_normal_vs_oracle():
    nd = dc.NormalDistribution()
    for t in (-3.0, -1.0, 0.0, 2.0):
        below, above = nd.conditional_means(t)
        phi = float(mpmath.npdf(t))
        lo = float(oracle_cdf(t))
        assert below == pytest.approx(-phi / lo, rel=1e-10)
        assert above == pytest.approx(phi / (1.0 - lo), rel=1e-10)


# -----------------------------------------------------------------------------
# Persistence
# -----------------------------------------------------------------------------


def test_save_load_round_trip_file(tmp_path):
    d = dc.FiniteDistribution.from_values([1.5, 2.5])
    path = str(tmp_path / "d.qdist")
    dc.save(d, path)
    back = dc.load(path)
    assert back == d


@given(
    st.lists(
        st.floats(allow_nan=False, allow_infinity=False, width=64),
        min_size=1,
        max_size=50,
    )
)
def test_save_load_bit_exact_property(raw):
    d = dc.FiniteDistribution.from_values(raw)
    buf = io.BytesIO()
    dc.save(d, buf)
    buf.seek(0)
    back = dc.load(buf)
    assert back.values == d.values and back.counts == d.counts


def test_load_rejects_magic_mismatch():
    buf = io.BytesIO(b"NOTADIST" + bytes(16))
    with pytest.raises(dc.FormatError):
        dc.load(buf)


def test_load_rejects_truncation():
    d = dc.FiniteDistribution.from_values([1.0, 2.0, 3.0])
    buf = io.BytesIO()
    dc.save(d, buf)
    data = buf.getvalue()
    with pytest.raises(dc.FormatError):
        dc.load(io.BytesIO(data[:-5]))
    with pytest.raises(dc.FormatError):
        dc.load(io.BytesIO(data[:4]))


def test_load_rejects_unsorted_payload():
    buf = io.BytesIO()
    buf.write(dc._HEADER.pack(dc.MAGIC, dc.FORMAT_VERSION, 2))
    buf.write(dc._RUN.pack(2.0, 1))
    buf.write(dc._RUN.pack(1.0, 1))
    buf.seek(0)
    with pytest.raises(dc.FormatError):
        dc.load(buf)


def test_load_rejects_bad_version():
    buf = io.BytesIO()
    buf.write(dc._HEADER.pack(dc.MAGIC, 9, 0))
    buf.seek(0)
    with pytest.raises(dc.FormatError):
        dc.load(buf)


def test_csv_export(tmp_path):
    d = dc.FiniteDistribution.from_values([1.0, 1.0, 2.5])
    path = str(tmp_path / "d.csv")
    dc.export_csv(d, path)
    lines = open(path).read().splitlines()
    assert lines[0] == "value,multiplicity"
    assert lines[1] == "1,2"
    assert lines[2] == "2.5,1"
