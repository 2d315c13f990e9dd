"""Shape-cocycle deformations of 1D patterns and their invertibility.

A cochain on a collared graph reshapes every tile: new vertex positions are
the integrated cocycle re-anchored at a fixed point.  Distortion is the exact
maximal relative edge change; the invertibility margin comes from the offset
separation profile, and the two hull maps (transversal-preserving and
translation-commuting) are realized as exact local patch maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .apcomplex import ApGraph, Cochain1, integrate_cocycle
from .equivariance import SiteFunction, is_locally_derivable
from .exactnum import ExactScalar, ExactVector, vec1
from .patterns import (
    Patch,
    PatternSample,
    WindowError,
    as_scalar,
    classify_patches,
    offset_separation_sq,
    exact_sqrt,
    window1d,
)


class InadmissibleCocycle(ValueError):
    """The cocycle produces a non-positive tile length (or closure fails)."""


@dataclass
class Deformation:
    """A deformed pattern together with its exact bookkeeping.

    deformed point i sits at base + psi(source point i); phi is extended
    piecewise-linearly (affine on each tile), which realizes the distortion
    bound exactly on edges.
    """

    source: PatternSample
    cocycle: Cochain1
    deformed: PatternSample
    point_range: tuple[int, int]  # source point indices covered (inclusive)
    distortion: ExactScalar  # max relative edge change, exact

    @property
    def graph(self) -> ApGraph:
        return self.cocycle.graph

    def source_points(self) -> list[ExactVector]:
        lo, hi = self.point_range
        return list(self.source.points[lo:hi + 1])

    def image_of_index(self, i: int) -> ExactVector:
        lo, hi = self.point_range
        if not lo <= i <= hi:
            raise IndexError("source point outside the deformed range")
        return self.deformed.points[i - lo]

    def apply(self, x: ExactVector) -> ExactVector:
        """Piecewise-linear image of any point of the covered segment."""
        lo, hi = self.point_range
        pts = self.source.points
        xs = x.coords[0]
        if (xs - pts[lo].coords[0]).sign() < 0 or (pts[hi].coords[0] - xs).sign() < 0:
            raise WindowError("point outside the deformed segment")
        # locate the tile by binary search on exact coordinates
        a, b = lo, hi
        while b - a > 1:
            m = (a + b) // 2
            if (xs - pts[m].coords[0]).sign() >= 0:
                a = m
            else:
                b = m
        p = pts[a]
        if xs == p.coords[0]:
            return self.image_of_index(a)
        length = pts[a + 1].coords[0] - p.coords[0]
        f = self.cocycle.values[self.graph.occurrence[a]].coords[0]
        img = self.image_of_index(a).coords[0] + (xs - p.coords[0]) * f / length
        return vec1(img)

    def stretch_factor(self) -> ExactScalar:
        """lambda = 1/(1 - distortion), exact."""
        one = ExactScalar(1, 0, self.source.d)
        return one / (one - self.distortion)


def apply_deformation(
    sample: PatternSample, cocycle: Cochain1, base: ExactVector | None = None
) -> Deformation:
    """Reshape every collared tile of the sample by the cocycle value of its
    class; the anchor point stays fixed (phi(x0) = x0).

    Admissibility (1D): every new tile length must be strictly positive, so
    the deformed vertex order is preserved and phi is a bijection of the
    covered segment.
    """
    graph = cocycle.graph
    if graph.sample is not sample:
        raise ValueError("cocycle was built on a different sample")
    if cocycle.value_dim != 1:
        raise ValueError("1D deformation needs scalar cochain values")
    for c, v in zip(graph.edges, cocycle.values):
        if v.coords[0].sign() <= 0:
            raise InadmissibleCocycle(
                f"class {c.text()} gets non-positive length {v.coords[0]}"
            )
    lo, hi = graph.collared_tile_range()
    if base is None:
        base = sample.points[lo]
    psi = integrate_cocycle(cocycle, base)
    new_pts = []
    labels = []
    for i in range(lo, hi + 1):
        p = sample.points[i]
        new_pts.append(vec1(base.coords[0] + psi(p).coords[0]))
        labels.append(sample.labels[i] if i < hi else None)
    win = window1d(new_pts[0].coords[0], new_pts[-1].coords[0], sample.d)
    deformed = PatternSample(new_pts, win, labels)

    distortion = ExactScalar(0, 0, sample.d)
    for v, length in zip(cocycle.values, graph.edge_lengths):
        rel = abs(v.coords[0] - length) / length
        if (rel - distortion).sign() > 0:
            distortion = rel
    return Deformation(
        source=sample,
        cocycle=cocycle,
        deformed=deformed,
        point_range=(lo, hi),
        distortion=distortion,
    )


def deformed_offsets_preimage(
    d: Deformation, x: ExactVector, r_prime
) -> list[ExactVector]:
    """S_{r'}(x): source offsets h with phi(x+h) - phi(x) inside the
    r'-patch of the deformed pattern around phi(x)."""
    rp = as_scalar(r_prime, d.source.d)
    fx = d.apply(x)
    lo, hi = d.point_range
    out = []
    for i in range(lo, hi + 1):
        img = d.image_of_index(i)
        delta = img.coords[0] - fx.coords[0]
        if (delta + rp).sign() > 0 and (rp - delta).sign() > 0:
            out.append(d.source.points[i] - x)
    return out


# -- invertibility bound ---------------------------------------------------------


@dataclass(frozen=True)
class EpsilonBound:
    """sup{t : 2t(1-t)^-2 r <= A((1-t)^-2 r)} resolved by bisection.

    censored: the window was exhausted while the inequality still held, so
    value is only a lower bound for the true supremum.
    """

    value: Fraction
    censored: bool
    radius: ExactScalar
    t_cap: Fraction

    @property
    def as_float(self) -> float:
        return float(self.value)


def invertibility_bound(
    sample: PatternSample, r, tol: Fraction = Fraction(1, 10**6)
) -> EpsilonBound:
    """Deformations with relative distortion below this bound are invertible
    on patches: r'-patch equality of the deformed pattern forces r-patch
    equality of the source at r' = r/(1-eps).

    The offset-separation profile is evaluated exactly at every probed
    radius; the supremum over t is found by rational bisection to `tol`.
    """
    d = sample.d
    r_s = as_scalar(r, d)
    if r_s.sign() <= 0:
        raise ValueError("radius must be positive")
    one = ExactScalar(1, 0, d)

    # the largest radius any anchor admits caps (1-t)^-2 r
    best_margin = None
    for p in sample.points:
        m = sample.window.margin(p)
        if best_margin is None or (m - best_margin).sign() > 0:
            best_margin = m
    ratio = float(r_s) / float(best_margin)
    if ratio >= 1.0:
        raise WindowError("no anchor admits even the base radius")
    t_cap = Fraction(1 - math.sqrt(ratio)).limit_denominator(10**9)
    while t_cap > 0:
        scale = one / ((one - t_cap) * (one - t_cap))
        if (best_margin - scale * r_s).sign() >= 0:
            break
        t_cap -= tol
    if t_cap <= 0:
        raise WindowError("window too small for any positive margin")

    def holds(t: Fraction) -> bool:
        scale = one / ((one - t) * (one - t))
        radius = scale * r_s
        lhs = radius * (2 * t)
        a_sq = offset_separation_sq(sample, radius)
        # lhs <= A(radius), compared through exact squares (both positive)
        return (a_sq - lhs * lhs).sign() >= 0

    if holds(t_cap):
        return EpsilonBound(value=t_cap, censored=True, radius=r_s, t_cap=t_cap)
    lo, hi = Fraction(0), t_cap  # holds at lo (limit), fails at hi
    while hi - lo > tol:
        mid = (lo + hi) / 2
        # keep bisection denominators small; stay strictly inside the bracket
        simple = mid.limit_denominator(10**7)
        if lo < simple < hi:
            mid = simple
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return EpsilonBound(value=lo, censored=False, radius=r_s, t_cap=t_cap)


# -- invert check -----------------------------------------------------------------


@dataclass(frozen=True)
class InvertCheck:
    """Smallest tested r' whose deformed patch classes refine the source
    classes at r (per scope), or None up to r_max_search."""

    r_prime: Fraction | None
    scope: str
    r: ExactScalar
    r_max_search: Fraction
    step: Fraction
    anchors_used: int

    @property
    def succeeded(self) -> bool:
        return self.r_prime is not None


def _midpoint_centers(d: Deformation) -> list[tuple[ExactVector, ExactVector]]:
    """(source center, deformed center) for midpoints of consecutive source
    points in the covered range."""
    lo, hi = d.point_range
    half = Fraction(1, 2)
    out = []
    for i in range(lo, hi):
        m = (d.source.points[i].coords[0] + d.source.points[i + 1].coords[0]) * half
        out.append((vec1(m), d.apply(vec1(m))))
    return out


def invert_check(
    d: Deformation,
    r,
    r_max_search,
    step=Fraction(1, 4),
    scope: str = "anchors",
) -> InvertCheck:
    """Search the smallest r' on a step grid such that equal r'-patches of
    the deformed pattern imply equal r-patches of the source.

    scope "anchors": quantifies over safe pattern points (the local
    derivation statement); scope "midpoints" additionally uses midpoint test
    centers as a finite stand-in for arbitrary centers.
    """
    source = d.source
    r_s = as_scalar(r, source.d)
    step = Fraction(step)
    r_max = Fraction(r_max_search)
    if step <= 0 or r_max < step:
        raise ValueError("need 0 < step <= r_max_search")

    lo, hi = d.point_range
    table = classify_patches(source, r_s)

    # anchor centers carry (source class id, deformed point index); midpoint
    # centers carry their exact source patch key and a deformed position
    anchor_centers: list[tuple[int, int]] = []
    for ci, members in enumerate(table.anchor_indices):
        for i in members:
            if lo <= i <= hi:
                anchor_centers.append((ci, i - lo))
    mid_centers: list[tuple[object, ExactVector]] = []
    if scope == "midpoints":
        from .patterns import extract_patch

        for m_src, m_def in _midpoint_centers(d):
            if not source.window.contains_ball(m_src, r_s):
                continue
            key = tuple(o.key() for o in extract_patch(source, m_src, r_s).offsets)
            mid_centers.append((("mid", key), m_def))
    elif scope != "anchors":
        raise ValueError(f"unknown scope {scope!r}")
    if not anchor_centers and not mid_centers:
        raise WindowError("no eligible centers for the invert check")

    deformed = d.deformed
    from .patterns import _patch_keys_1d

    def passes(rp: Fraction) -> tuple[bool, int]:
        rp_s = as_scalar(rp, source.d)
        safe = set(deformed.safe_anchor_indices(rp_s))
        eligible = [(ci, j) for ci, j in anchor_centers if j in safe]
        groups: dict = {}
        used = 0
        if not mid_centers:
            # anchors only: integer fast-path keys (consistent within the call)
            keys = _patch_keys_1d(deformed, [j for _, j in eligible], rp_s)
            markers = [ci for ci, _ in eligible]
        else:
            # mixed centers need one uniform patch-key encoding
            keys = [
                tuple(
                    (deformed.points[j2] - deformed.points[j]).key()
                    for j2 in deformed.neighborhood_indices(deformed.points[j], rp_s)
                )
                for _, j in eligible
            ]
            markers = [ci for ci, _ in eligible]
            for marker, pos in mid_centers:
                if not deformed.window.contains_ball(pos, rp_s):
                    continue
                keys.append(
                    tuple(
                        (deformed.points[j] - pos).key()
                        for j in deformed.neighborhood_indices(pos, rp_s)
                    )
                )
                markers.append(marker)
        for marker, key in zip(markers, keys):
            used += 1
            prev = groups.get(key)
            if prev is None:
                groups[key] = marker
            elif prev != marker:
                return False, used
        return True, used

    n_steps = int(r_max / step)
    grid = [step * k for k in range(1, n_steps + 1)]
    # passing is monotone along the grid: binary search the boundary
    lo_i, hi_i = 0, len(grid) - 1
    best = None
    used_at_best = 0
    if not grid:
        raise ValueError("empty search grid")
    ok, used = passes(grid[-1])
    if ok:
        best, used_at_best = len(grid) - 1, used
        while lo_i <= hi_i:
            mid = (lo_i + hi_i) // 2
            ok, used = passes(grid[mid])
            if ok:
                best, used_at_best = mid, used
                hi_i = mid - 1
            else:
                lo_i = mid + 1
    if best is None:
        return InvertCheck(None, scope, r_s, r_max, step, 0)
    return InvertCheck(grid[best], scope, r_s, r_max, step, used_at_best)


@dataclass(frozen=True)
class DeriveBackCheck:
    passing_radius: Fraction | None
    tested: tuple[Fraction, ...]


def derive_back_check(d: Deformation, radii: Sequence) -> DeriveBackCheck:
    """Smallest tested R with the source locally derivable from the deformed
    pattern (patch of the deformed decides source membership)."""
    tested = sorted(Fraction(r) for r in radii)
    for R in tested:
        res = is_locally_derivable(d.deformed, d.source, R)
        if res.derivable:
            return DeriveBackCheck(R, tuple(tested))
    return DeriveBackCheck(None, tuple(tested))


# -- hull maps --------------------------------------------------------------------


def hull_map_transversal(d: Deformation, x: ExactVector, R) -> Patch:
    """Truncation of the deformed pattern around phi(x): the hull map that
    preserves the canonical transversal (anchors land on deformed anchors).

    Precondition: B(x, R/(1-distortion)) inside the source segment and the
    R-ball around phi(x) inside the deformed window.
    """
    R_s = as_scalar(R, d.source.d)
    lam = d.stretch_factor()
    # bi-Lipschitz: the R-ball around phi(x) pulls back into B(x, R*lambda)
    reach = R_s * lam
    lo, hi = d.point_range
    seg_lo = d.source.points[lo].coords[0]
    seg_hi = d.source.points[hi].coords[0]
    xs = x.coords[0]
    if (xs - reach - seg_lo).sign() < 0 or (seg_hi - xs - reach).sign() < 0:
        raise WindowError("source segment too narrow around x for this radius")
    fx = d.apply(x)
    if not d.deformed.window.contains_ball(fx, R_s):
        raise WindowError("deformed window too narrow around phi(x)")
    idx = d.deformed.neighborhood_indices(fx, R_s)
    return Patch(R_s, tuple(d.deformed.points[j] - fx for j in idx))


@dataclass(frozen=True)
class LinearMap:
    """Linear map with exact entries (1D scalar or 2x2 matrix)."""

    rows: tuple  # tuple of tuples of ExactScalar

    def __post_init__(self):
        n = len(self.rows)
        if n not in (1, 2) or any(len(r) != n for r in self.rows):
            raise ValueError("LinearMap must be 1x1 or 2x2")

    @property
    def dim(self) -> int:
        return len(self.rows)

    @classmethod
    def scaling(cls, c: ExactScalar, dim: int = 1) -> "LinearMap":
        zero = ExactScalar(0, 0, c.d)
        if dim == 1:
            return cls(((c,),))
        return cls(((c, zero), (zero, c)))

    def determinant(self) -> ExactScalar:
        if self.dim == 1:
            return self.rows[0][0]
        a, b = self.rows[0]
        c, d = self.rows[1]
        return a * d - b * c

    def apply(self, v: ExactVector) -> ExactVector:
        if v.dim != self.dim:
            raise ValueError("dimension mismatch")
        return ExactVector(
            tuple(
                sum((r[j] * v.coords[j] for j in range(self.dim)),
                    ExactScalar(0, 0, v.d))
                for r in self.rows
            )
        )


def hull_map_linear(
    sample: PatternSample,
    g: LinearMap,
    eta: SiteFunction | None,
    x: ExactVector,
    R,
) -> Patch:
    """Truncation of (g + eta)(P) around g(x): the hull map that commutes
    with translations (out(x + v) = out(x) - g(v) exactly).

    eta defaults to zero; it must be defined on every source point whose
    image can enter the ball.
    """
    if g.determinant().is_zero():
        raise ValueError("g must be invertible")
    R_s = as_scalar(R, sample.d)
    gx = g.apply(x)
    # conservative float reach: |phi(p) - g(x)| < R forces |g(p - x)| < R + max|eta|
    eta_max = 0.0
    if eta is not None:
        eta_max = max(
            math.sqrt(float(eta(p).norm_sq())) for p in eta.domain()
        )
    gnorm_min = abs(float(g.determinant())) / max(
        1e-12,
        max(math.sqrt(sum(float(c) ** 2 for c in row)) for row in g.rows),
    )
    reach_f = (float(R_s) + eta_max) / max(gnorm_min, 1e-12) + 1e-6
    reach = as_scalar(Fraction(reach_f).limit_denominator(10**6), sample.d)
    if not sample.window.contains_ball(x, reach):
        raise WindowError("window too narrow around x for this radius")
    offsets = []
    r_sq = R_s * R_s
    for j in sample.neighborhood_indices(x, reach):
        p = sample.points[j]
        img = g.apply(p)
        if eta is not None:
            if not eta.defined_at(p):
                raise ValueError(f"eta undefined at {p!r}")
            img = img + eta(p)
        o = img - gx
        if (r_sq - o.norm_sq()).sign() > 0:
            offsets.append(o)
    order = sorted(range(len(offsets)), key=lambda i: offsets[i].floats())
    return Patch(R_s, tuple(offsets[i] for i in order))


# -- cocycle sampling -------------------------------------------------------------


def perturbed_length_cocycle(
    graph: ApGraph, rng, max_rel: float, denom: int = 10**6
) -> Cochain1:
    """Random admissible cocycle: each class length scaled by 1 + u with u
    uniform in (-max_rel, max_rel), rounded to a rational with denominator
    `denom` (reproducible under a seeded rng)."""
    values = []
    for length in graph.edge_lengths:
        u = Fraction(round(rng.uniform(-max_rel, max_rel) * denom), denom)
        values.append(vec1(length * (1 + u)))
    return Cochain1(graph, tuple(values))


def collapse_cocycle(graph: ApGraph, value=1) -> Cochain1:
    """Every class gets the same length: collapses to a periodic pattern."""
    v = as_scalar(value, graph.sample.d)
    return Cochain1(graph, tuple(vec1(v) for _ in range(graph.n_edges)))


def product_rectangle_closure(
    horizontal: Cochain1, vertical: Cochain1, n_rectangles: int | None = None
) -> bool:
    """Exact closure of the product cocycle on observed rectangles: the
    signed boundary sum bottom + right - top - left vanishes.

    Product cochains assign horizontal edges a value independent of the
    vertical position (and vice versa), so the sum is identically zero;
    this verifies it by exact evaluation rectangle by rectangle.
    """
    gh, gv = horizontal.graph, vertical.graph
    zero = ExactScalar(0, 0, gh.sample.d)
    count = 0
    for i in gh.occurrence:
        for j in gv.occurrence:
            bottom = horizontal.values[gh.occurrence[i]].coords[0]
            top = horizontal.values[gh.occurrence[i]].coords[0]
            left = vertical.values[gv.occurrence[j]].coords[0]
            right = vertical.values[gv.occurrence[j]].coords[0]
            total = bottom + right - top - left
            if not total.is_zero():
                return False
            count += 1
            if n_rectangles is not None and count >= n_rectangles:
                return True
    return True
