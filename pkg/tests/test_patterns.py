import math
import random
from fractions import Fraction

import pytest

from apd.exactnum import ExactScalar, ExactVector, vec1, vec2
from apd.generators import (
    fibonacci_rule,
    generate_substitution_sample,
    integer_lattice,
    product_pattern,
)
from apd.patterns import (
    PatternSample,
    WindowError,
    classify_patches,
    extract_patch,
    exact_sqrt,
    find_recurrences,
    offset_separation,
    offset_separation_sq,
    patch_distance,
    patch_distance_translated,
    safe_anchors,
    voronoi_cells,
    window1d,
)

TAU = ExactScalar(Fraction(1, 2), Fraction(1, 2), 5)
D = 5


def sc(q) -> ExactScalar:
    return ExactScalar(Fraction(q), 0, D)


@pytest.fixture(scope="module")
def fib():
    return generate_substitution_sample(fibonacci_rule(), "a", 12)


@pytest.fixture(scope="module")
def fib_small():
    return generate_substitution_sample(fibonacci_rule(), "a", 9)


@pytest.fixture(scope="module")
def zline():
    return integer_lattice(0, 10)


def test_safe_anchors_integer_lattice(zline):
    got = [p.coords[0] for p in safe_anchors(zline, 2)]
    assert got == [sc(n) for n in range(2, 9)]


def test_safe_anchors_empty_when_radius_too_big(zline):
    assert safe_anchors(zline, 6) == []


def test_safe_anchors_fibonacci_margin(fib):
    lo, hi = fib.window.lo[0], fib.window.hi[0]
    r = sc(3)
    expect = [
        p
        for p in fib.points
        if (p.coords[0] - lo - r).sign() >= 0 and (hi - p.coords[0] - r).sign() >= 0
    ]
    assert safe_anchors(fib, 3) == expect


def test_extract_patch_lattice(zline):
    p = extract_patch(zline, vec1(sc(5)), Fraction(3, 2))
    assert [o.coords[0] for o in p.offsets] == [sc(-1), sc(0), sc(1)]
    assert p.anchored


def test_extract_patch_offcenter(zline):
    p = extract_patch(zline, vec1(sc(Fraction(11, 2))), 1)
    assert [o.coords[0] for o in p.offsets] == [sc(Fraction(-1, 2)), sc(Fraction(1, 2))]
    assert not p.anchored


def test_extract_patch_window_violation(zline):
    with pytest.raises(WindowError):
        extract_patch(zline, vec1(sc(1)), 4)


def test_patch_before_wide_gap_fibonacci(fib):
    # an anchor whose right gap is tau sees no right neighbour at r = 1.2
    gaps = fib.gaps()
    idx = next(
        i for i in range(1, len(gaps)) if gaps[i] == TAU and gaps[i - 1] == 1
        and fib.window.contains_ball(fib.points[i], sc(Fraction(6, 5)))
    )
    p = extract_patch(fib, fib.points[idx], Fraction(6, 5))
    offs = [o.coords[0] for o in p.offsets]
    assert offs == [sc(-1), sc(0)]
    assert float(TAU) > 1.2


def test_classify_lattice_single_class(zline):
    table = classify_patches(zline, Fraction(3, 2))
    assert table.class_count() == 1


def test_classify_fibonacci_small_radius_against_brute_force(fib):
    # at r = 1.2 a patch sees the distance-1 neighbours on both sides but not
    # the tau ones, so classes are the adjacent letter contexts aa, ab, ba
    table = classify_patches(fib, Fraction(6, 5))
    # brute-force oracle: group safe anchors by exact offset tuples
    r = sc(Fraction(6, 5))
    seen = {}
    for a in safe_anchors(fib, r):
        key = tuple(o.key() for o in extract_patch(fib, a, r).offsets)
        seen.setdefault(key, 0)
        seen[key] += 1
    assert table.class_count() == len(seen) == 3


def test_classify_counts_nondecreasing(fib):
    counts = [classify_patches(fib, r).class_count() for r in (Fraction(6, 5), Fraction(5, 2), 4)]
    assert counts == sorted(counts)


def test_classify_is_partition(fib):
    r = Fraction(5, 2)
    table = classify_patches(fib, r)
    anchors = safe_anchors(fib, r)
    assert sorted(i for idx in table.anchor_indices for i in idx) == sorted(
        fib.points.index(a) for a in anchors
    )
    for a in anchors:
        ci = table.class_of(a)
        patch = extract_patch(fib, a, r)
        assert patch.key() == table.classes[ci].key()


def test_classify_equivalence_same_class_iff_equal_patch(fib):
    r = Fraction(5, 2)
    table = classify_patches(fib, r)
    anchors = safe_anchors(fib, r)
    rng = random.Random(11)
    for _ in range(60):
        a, b = rng.choice(anchors), rng.choice(anchors)
        same = table.class_of(a) == table.class_of(b)
        equal = extract_patch(fib, a, r).key() == extract_patch(fib, b, r).key()
        assert same == equal


def test_hierarchical_class_consistency(fib):
    # same (R + r)-class anchors transport their r-neighbourhood pointwise
    R, r = sc(3), sc(2)
    table = classify_patches(fib, R + r)
    for members in table.anchor_indices:
        if len(members) < 2:
            continue
        p, q = fib.points[members[0]], fib.points[members[1]]
        for j in fib.neighborhood_indices(p, r):
            h = fib.points[j] - p
            assert fib.contains(q + h)
            pa = extract_patch(fib, p + h, r)
            pb = extract_patch(fib, q + h, r)
            assert pa.key() == pb.key()


def test_metric_d0_self_is_below_resolution(fib):
    centered = fib.translate(vec1(-fib.points[len(fib) // 2].coords[0]))
    m = patch_distance(centered, centered, 5)
    assert m.below_resolution
    assert m.value <= 1 / 5 + 1e-12


def test_metric_d0_lattice_vs_shifted():
    a = integer_lattice(-10, 10)
    b = a.translate(vec1(sc(Fraction(-1, 2))))
    m = patch_distance(a, b, 2)
    # B_0.4 patches already differ ({0} vs empty), so distance >= 1/0.4
    assert m.value >= 1 / 0.4


def test_metric_d0_fibonacci_first_return(fib):
    table = classify_patches(fib, 6)
    members = next(m for m in table.anchor_indices if len(m) >= 2)
    x1, x2 = fib.points[members[0]], fib.points[members[1]]
    a = fib.translate(-x1)
    b = fib.translate(-x2)
    m = patch_distance(a, b, 6)
    assert m.value <= 1 / 6 + 1e-12


def test_metric_dt_self_zero(fib):
    centered = fib.translate(vec1(-fib.points[len(fib) // 2].coords[0]))
    m = patch_distance_translated(centered, centered, 4)
    assert m.below_resolution


def test_metric_dt_small_translation_bound(fib):
    # D_t(P, P - h) <= |h| via the split-translation candidate; the testing
    # cap must exceed the constraint radius 1/(2 |h|/2) = 1/|h|
    centered = fib.translate(vec1(-fib.points[len(fib) // 2].coords[0]))
    h = Fraction(1, 10)
    shifted = centered.translate(vec1(sc(-h)))
    m = patch_distance_translated(centered, shifted, 12)
    assert m.value <= float(h) + 1e-12


def test_metric_dt_below_d0(fib):
    rng = random.Random(5)
    anchors = [p for p in fib.points if fib.window.margin(p).sign() > 0]
    for _ in range(100):
        x1, x2 = rng.choice(anchors), rng.choice(anchors)
        a, b = fib.translate(-x1), fib.translate(-x2)
        cap = min(
            float(s.window.margin(vec1(sc(0)))) for s in (a, b)
        )
        r = Fraction(min(3, max(1, int(cap))))
        if float(r) > cap:
            continue
        d0 = patch_distance(a, b, r)
        dt = patch_distance_translated(a, b, r)
        assert dt.value <= d0.value + 1e-12


def test_offset_separation_lattice(zline):
    for r in (Fraction(3, 2), 2, Fraction(5, 2)):
        assert offset_separation(zline, r) == 1


def test_offset_separation_fibonacci_regimes(fib):
    # below tau only the distance-1 neighbours are visible: separation 1;
    # once r exceeds tau the offsets are {0, +-1, +-tau} and the minimal
    # gap drops to tau - 1
    assert offset_separation(fib, Fraction(11, 10)) == 1
    got = offset_separation(fib, Fraction(17, 10))
    assert got == TAU - 1


def test_offset_separation_monotone(fib):
    radii = [Fraction(11, 10), 2, 3, 4, 5]
    vals = [offset_separation(fib, r) for r in radii]
    for u, v in zip(vals, vals[1:]):
        assert (u - v).sign() >= 0


def test_offset_separation_at_most_rmin(fib, zline):
    for s in (fib, zline):
        a = offset_separation(s, 2)
        assert (s.r_min - a).sign() >= 0


def test_offset_separation_positive(fib):
    assert offset_separation(fib, 4).sign() > 0


def test_offset_separation_needs_two_offsets():
    pts = [vec1(sc(0)), vec1(sc(10))]
    sample = PatternSample(pts, window1d(-1, 11, D))
    with pytest.raises(ValueError):
        offset_separation_sq(sample, Fraction(1, 2))


def test_recurrences_lattice_all_censored():
    z = integer_lattice(0, 12)
    recs = find_recurrences(z, 2, 4)
    assert recs
    assert all(r.censored for r in recs)


def test_recurrences_symmetry(fib_small):
    recs = find_recurrences(fib_small, 2, 5)
    pairs = {(r.x1.key(), r.x2.key()) for r in recs}
    assert pairs
    for r in recs:
        assert (r.x2.key(), r.x1.key()) in pairs


def test_recurrences_sizes_exact(fib_small):
    recs = [r for r in find_recurrences(fib_small, 2, 5) if not r.censored]
    assert recs
    for r in recs[:30]:
        # maximality: the witness offset distinguishes the two patches
        assert r.witness is not None
        assert abs(r.witness.coords[0]) == r.size
        w1 = r.x1 + r.witness
        w2 = r.x2 + r.witness
        assert fib_small.contains(w1) != fib_small.contains(w2)
        # agreement below the size: equal patches at the size radius itself
        p1 = extract_patch(fib_small, r.x1, r.size)
        p2 = extract_patch(fib_small, r.x2, r.size)
        assert p1.key() == p2.key()


def test_recurrences_context_length_three(fib_small):
    # identical letter context of combinatorial length 3 gives size >= 3
    recs = find_recurrences(fib_small, 3, 8)
    assert any((r.size - 3).sign() >= 0 for r in recs)


def test_voronoi_lattice(zline):
    cells = voronoi_cells(zline)
    for point, lo, hi in cells:
        x = point.coords[0]
        assert lo == x - Fraction(1, 2)
        assert hi == x + Fraction(1, 2)


def test_voronoi_fibonacci_mixed_gaps(fib):
    gaps = fib.gaps()
    idx = next(i for i in range(1, len(gaps)) if gaps[i - 1] == 1 and gaps[i] == TAU)
    cells = voronoi_cells(fib)
    point, lo, hi = cells[idx - 1]
    assert point == fib.points[idx]
    assert lo == point.coords[0] - Fraction(1, 2)
    assert hi == point.coords[0] + TAU * Fraction(1, 2)


def test_voronoi_cover_and_overlap(fib):
    cells = voronoi_cells(fib)
    for (p1, lo1, hi1), (p2, lo2, hi2) in zip(cells, cells[1:]):
        assert hi1 == lo2  # touch exactly at midpoints
        assert (hi1 - lo1).sign() > 0


def test_voronoi_rejects_2d():
    z = integer_lattice(0, 3)
    prod = product_pattern(z, z)
    with pytest.raises(WindowError):
        voronoi_cells(prod)


def test_exact_sqrt_roundtrip():
    vals = [
        TAU,
        sc(Fraction(9, 4)),
        ExactScalar(0, 2, 5),
        ExactScalar(3, 1, 5),
    ]
    for v in vals:
        got = exact_sqrt(v * v)
        assert got is not None
        assert got == abs(v)
    assert exact_sqrt(sc(-1)) is None
    assert exact_sqrt(sc(2)) is None  # sqrt(2) not in Q(sqrt(5))


def test_sample_validations():
    with pytest.raises(ValueError):
        PatternSample([], window1d(0, 1, D))
    with pytest.raises(ValueError):
        PatternSample([vec1(sc(0)), vec1(sc(0))], window1d(0, 1, D))
    with pytest.raises(ValueError):
        PatternSample([vec1(sc(2))], window1d(0, 1, D))


def test_sample_rmin_and_gaps(fib):
    assert fib.r_min == 1
    assert {g.key() for g in fib.gaps()} == {sc(1).key(), TAU.key()}
    assert fib.max_gap() == TAU


def test_2d_product_classify():
    z = integer_lattice(0, 6)
    prod = product_pattern(z, z)
    table = classify_patches(prod, Fraction(3, 2))
    assert table.class_count() == 1
    patch = table.classes[0]
    # square-lattice offsets within radius 1.5: full 3x3 block (diagonals at
    # sqrt(2) < 1.5 included)
    assert len(patch.offsets) == 9


def test_2d_offset_separation():
    z = integer_lattice(0, 6)
    prod = product_pattern(z, z)
    assert offset_separation(prod, Fraction(3, 2)) == 1
