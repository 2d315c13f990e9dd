import math
import random
from fractions import Fraction

import pytest

from apd.apcomplex import Cochain1, build_ap_graph, scalar_cochain, tile_length_cochain
from apd.deform import (
    InadmissibleCocycle,
    LinearMap,
    apply_deformation,
    collapse_cocycle,
    deformed_offsets_preimage,
    derive_back_check,
    hull_map_linear,
    hull_map_transversal,
    invert_check,
    invertibility_bound,
    perturbed_length_cocycle,
    product_rectangle_closure,
)
from apd.equivariance import SiteFunction
from apd.exactnum import ExactScalar, vec1
from apd.generators import (
    fibonacci_rule,
    generate_substitution_sample,
    integer_lattice,
)
from apd.patterns import classify_patches, extract_patch

TAU = ExactScalar(Fraction(1, 2), Fraction(1, 2), 5)


def sc(q):
    return ExactScalar(Fraction(q), 0, 5)


@pytest.fixture(scope="module")
def fib():
    return generate_substitution_sample(fibonacci_rule(), "a", 11)


@pytest.fixture(scope="module")
def g0(fib):
    return build_ap_graph(fib, 0)


def test_identity_cocycle_is_identity(fib, g0):
    f = tile_length_cochain(g0)
    d = apply_deformation(fib, f)
    lo, hi = d.point_range
    assert d.distortion.is_zero()
    for i in range(lo, hi + 1):
        assert d.image_of_index(i) == fib.points[i]


def test_identity_invert_at_test_radius(fib, g0):
    f = tile_length_cochain(g0)
    d = apply_deformation(fib, f)
    # grid step = r makes the grid {r, 2r, ...}: smallest passing is r itself
    res = invert_check(d, 2, 8, step=Fraction(2))
    assert res.succeeded and res.r_prime == 2


def test_collapse_to_periodic(fib, g0):
    f = collapse_cocycle(g0, 1)
    d = apply_deformation(fib, f)
    gaps = {g.key() for g in d.deformed.gaps()}
    assert gaps == {sc(1).key()}
    # distortion = (tau - 1)/tau = 1 - 1/tau = 2 - tau, exact
    assert d.distortion == 2 - TAU


def test_collapse_not_invertible(fib, g0):
    f = collapse_cocycle(g0, 1)
    d = apply_deformation(fib, f)
    res = invert_check(d, 2, 20, step=Fraction(1, 2))
    assert not res.succeeded
    back = derive_back_check(d, [2, 5, 10, 20])
    assert back.passing_radius is None


def test_small_perturbation_distortion(fib, g0):
    vals = {"a": TAU + Fraction(1, 100), "b": sc(1)}
    f = scalar_cochain(g0, vals)
    d = apply_deformation(fib, f)
    # |f(a) - tau| / tau = (1/100)/tau = (tau - 1)/100
    assert d.distortion == (TAU - 1) * Fraction(1, 100)
    assert len({g.key() for g in d.deformed.gaps()}) == 2


def test_inadmissible_cocycle_rejected(fib, g0):
    f = scalar_cochain(g0, {"a": sc(1), "b": sc(-1)})
    with pytest.raises(InadmissibleCocycle):
        apply_deformation(fib, f)
    f0 = scalar_cochain(g0, {"a": sc(0), "b": sc(1)})
    with pytest.raises(InadmissibleCocycle):
        apply_deformation(fib, f0)


def test_epsilon_bound_integer_lattice_matches_root():
    z = integer_lattice(-30, 30)
    got = invertibility_bound(z, 2)
    assert not got.censored

    # independent oracle: bisection of 2 t r = (1 - t)^2 with A = 1, r = 2
    def f(t):
        return 2 * t * 2 - (1 - t) ** 2

    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    assert abs(got.as_float - lo) < 1e-4
    assert abs(lo - (3 - 2 * math.sqrt(2))) < 1e-9


def test_epsilon_bound_monotone_in_radius():
    z = integer_lattice(-40, 40)
    e2 = invertibility_bound(z, 2)
    e3 = invertibility_bound(z, 3)
    assert e2.value >= e3.value


def test_epsilon_bound_fibonacci_positive(fib):
    centered = fib
    eps = invertibility_bound(centered, 2 * TAU)
    assert eps.value > 0


def test_random_small_cocycles_invert(fib, g0):
    r = 2 * TAU
    eps = invertibility_bound(fib, r)
    lam = 1.0 / (1.0 - eps.as_float)
    bound = float(r) * lam
    step = Fraction(1, 4)
    ceil_bound = Fraction(math.ceil(bound / float(step))) * step
    rng = random.Random(4711)
    for _ in range(20):
        f = perturbed_length_cocycle(g0, rng, eps.as_float * 0.95)
        d = apply_deformation(fib, f)
        assert (d.distortion - ExactScalar(eps.value, 0, 5)).sign() < 0
        res = invert_check(d, r, 3 * float(r), step=step)
        assert res.succeeded
        assert res.r_prime <= ceil_bound


def test_invert_check_midpoint_scope(fib, g0):
    rng = random.Random(7)
    eps = invertibility_bound(fib, 2 * TAU)
    f = perturbed_length_cocycle(g0, rng, eps.as_float * 0.9)
    d = apply_deformation(fib, f)
    res = invert_check(d, 2 * TAU, 12, step=Fraction(1, 2), scope="midpoints")
    assert res.succeeded


def test_lemma_back_inclusions(fib, g0):
    rng = random.Random(99)
    r = sc(2)
    eps = invertibility_bound(fib, r)
    f = perturbed_length_cocycle(g0, rng, eps.as_float * 0.9)
    d = apply_deformation(fib, f)
    one = sc(1)
    eps_s = ExactScalar(eps.value, 0, 5)
    lo, hi = d.point_range
    for rp in (sc(2), sc(3), sc(4)):
        inner_r = (one - eps_s) * rp
        outer_r = rp / (one - eps_s)
        for i in range(lo, hi + 1, 5):
            x = fib.points[i]
            margin = fib.window.margin(x)
            if (margin - outer_r - 1).sign() < 0:
                continue
            if not d.deformed.window.contains_ball(d.image_of_index(i), rp):
                continue
            s_set = {h.key() for h in deformed_offsets_preimage(d, x, rp)}
            inner = {
                (fib.points[j] - x).key()
                for j in fib.neighborhood_indices(x, inner_r)
            }
            outer = {
                (fib.points[j] - x).key()
                for j in fib.neighborhood_indices(x, outer_r)
            }
            assert inner <= s_set <= outer


def test_positions_strictly_increasing_iff_admissible(fib, g0):
    rng = random.Random(13)
    f = perturbed_length_cocycle(g0, rng, 0.3)
    d = apply_deformation(fib, f)
    pts = d.deformed.points
    for u, v in zip(pts, pts[1:]):
        assert (v.coords[0] - u.coords[0]).sign() > 0


def test_distortion_invariant_under_base_change(fib, g0):
    rng = random.Random(3)
    f = perturbed_length_cocycle(g0, rng, 0.2)
    lo, hi = build_ap_graph(fib, 0).collared_tile_range()
    d1 = apply_deformation(fib, f, base=fib.points[lo])
    d2 = apply_deformation(fib, f, base=fib.points[lo + 4])
    assert d1.distortion == d2.distortion
    gaps1 = sorted(g.key() for g in d1.deformed.gaps())
    gaps2 = sorted(g.key() for g in d2.deformed.gaps())
    assert gaps1 == gaps2


def test_hull_map_transversal_membership(fib, g0):
    rng = random.Random(21)
    f = perturbed_length_cocycle(g0, rng, 0.05)
    d = apply_deformation(fib, f)
    lo, hi = d.point_range
    zero_key = vec1(sc(0)).key()
    half = Fraction(1, 2)
    for i in range(lo + 20, hi - 20, 9):
        x = fib.points[i]
        patch = hull_map_transversal(d, x, 3)
        assert zero_key in {o.key() for o in patch.offsets}
        # a non-pattern center never maps onto the deformed transversal
        m = vec1((fib.points[i].coords[0] + fib.points[i + 1].coords[0]) * half)
        patch_m = hull_map_transversal(d, m, 3)
        assert zero_key not in {o.key() for o in patch_m.offsets}


def test_hull_map_transversal_identity_deformation(fib, g0):
    f = tile_length_cochain(g0)
    d = apply_deformation(fib, f)
    lo, hi = d.point_range
    x = fib.points[(lo + hi) // 2]
    patch = hull_map_transversal(d, x, 4)
    direct = extract_patch(fib, x, 4)
    assert patch.key() == direct.key()


def test_hull_map_equal_source_patches_map_equal(fib, g0):
    # anchors congruent out to collar + r*lambda have equal deformed patches
    rng = random.Random(2)
    f = perturbed_length_cocycle(g0, rng, 0.05)
    d = apply_deformation(fib, f)
    r = sc(2)
    lam = d.stretch_factor()
    extent = build_ap_graph(fib, 0).max_collared_extent()
    big = extent + r * lam + 1
    table = classify_patches(fib, big)
    lo, hi = d.point_range
    checked = 0
    for members in table.anchor_indices:
        inside = [i for i in members if lo <= i <= hi]
        for i, j in zip(inside, inside[1:]):
            try:
                pa = hull_map_transversal(d, fib.points[i], r)
                pb = hull_map_transversal(d, fib.points[j], r)
            except Exception:
                continue
            assert pa.key() == pb.key()
            checked += 1
    assert checked > 3


def test_hull_map_linear_translation_equivariance(fib):
    rng = random.Random(17)
    g = LinearMap.scaling(sc(1))
    eta = SiteFunction(fib, {p: vec1(sc(Fraction(1, 10))) for p in fib.points})
    R = sc(3)
    mid = len(fib.points) // 2
    for _ in range(40):
        i = rng.randrange(mid - 30, mid + 30)
        x = fib.points[i]
        v = vec1(sc(Fraction(rng.randint(-20, 20), 7)))
        xv = vec1(x.coords[0] + v.coords[0])
        out_direct = hull_map_linear(fib, g, eta, xv, R)
        big = hull_map_linear(fib, g, eta, x, R + abs(v.coords[0]))
        gv = g.apply(v)
        shifted = {
            (o - gv).key()
            for o in big.offsets
            if ((R * R) - (o - gv).norm_sq()).sign() > 0
        }
        assert shifted == {o.key() for o in out_direct.offsets}


def test_hull_map_linear_doubling_on_lattice():
    z = integer_lattice(-40, 40)
    two = ExactScalar(2, 0, 5)
    g = LinearMap.scaling(two)
    x = vec1(sc(0))
    out0 = hull_map_linear(z, g, None, x, 5)
    # doubled lattice: offsets are even integers within the ball
    assert {o.coords[0].key() for o in out0.offsets} == {
        sc(k).key() for k in (-4, -2, 0, 2, 4)
    }
    v = vec1(sc(3))
    out_v = hull_map_linear(z, g, None, v, 5)
    gv = g.apply(v)
    big = hull_map_linear(z, g, None, x, 5 + abs(gv.coords[0]))
    shifted = {
        (o - gv).key()
        for o in big.offsets
        if ((sc(5) * sc(5)) - (o - gv).norm_sq()).sign() > 0
    }
    assert shifted == {o.key() for o in out_v.offsets}


def test_two_hull_maps_differ_on_eigen_deformation(fib):
    g1 = build_ap_graph(fib, 1)
    c = Fraction(1, 10)
    f = scalar_cochain(
        g1, {"a": TAU + c, "b": ExactScalar(1, 0, 5) - TAU * c}
    )
    d = apply_deformation(fib, f)
    eta = SiteFunction(
        fib,
        {
            p: vec1(d.apply(p).coords[0] - p.coords[0])
            for p in d.source_points()
        },
    )
    lo, hi = d.point_range
    gmap = LinearMap.scaling(sc(1))
    witness = None
    for i in range(lo + 10, hi - 10, 3):
        x = fib.points[i]
        try:
            p_phi = hull_map_transversal(d, x, 2)
            p_id = hull_map_linear(fib, gmap, eta, x, 2)
        except Exception:
            continue
        if p_phi.key() != p_id.key():
            witness = x
            break
    assert witness is not None


def test_product_cocycle_closure(fib):
    g0a = build_ap_graph(fib, 0)
    z = integer_lattice(0, 20)
    g0b = build_ap_graph(z, 0)
    fh = tile_length_cochain(g0a)
    fv = tile_length_cochain(g0b)
    assert product_rectangle_closure(fh, fv, n_rectangles=500)
