"""Finite-window representation of FLC Delone sets.

A PatternSample is a finite point set together with the axis-aligned box on
which it is declared complete.  Everything downstream (patch classification,
metrics, recurrences, deformation checks) quantifies only over anchors whose
ball of interest stays inside that box, and quantities that could change if
the box grew carry an explicit censored flag.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key

import numpy as np

from .exactnum import (
    DiscriminantMismatch,
    ExactScalar,
    ExactVector,
    vec1,
)

RadiusLike = "int | Fraction | ExactScalar"


class WindowError(ValueError):
    """The declared window is too small for the requested computation."""


def as_scalar(x, d: int) -> ExactScalar:
    """Normalize a radius/coordinate into the sample's field."""
    if isinstance(x, ExactScalar):
        if x.b != 0 and x.d != d:
            raise DiscriminantMismatch(f"value in sqrt({x.d}) used with sqrt({d}) sample")
        return x if x.d == d else ExactScalar(x.a, 0, d)
    return ExactScalar(Fraction(x), 0, d)


def exact_sqrt(x: ExactScalar) -> ExactScalar | None:
    """Square root of x inside Q(sqrt(d)) if one exists, else None."""
    if x.sign() < 0:
        return None
    if x.is_zero():
        return ExactScalar(0, 0, x.d)

    def _rat_sqrt(q: Fraction) -> Fraction | None:
        if q < 0:
            return None
        n, m = q.numerator, q.denominator
        rn, rm = math.isqrt(n), math.isqrt(m)
        if rn * rn == n and rm * rm == m:
            return Fraction(rn, rm)
        return None

    u, v = x.a, x.b
    if v == 0:
        r = _rat_sqrt(u)
        if r is not None:
            return ExactScalar(r, 0, x.d)
        r = _rat_sqrt(u / x.d)
        if r is not None:
            return ExactScalar(0, r, x.d)
        return None
    # (p + q sqrt(d))^2 = p^2 + q^2 d + 2 p q sqrt(d)
    disc = _rat_sqrt(u * u - v * v * x.d)
    if disc is None:
        return None
    for p2 in ((u + disc) / 2, (u - disc) / 2):
        p = _rat_sqrt(p2)
        if p is not None and p != 0:
            q = v / (2 * p)
            cand = ExactScalar(p, q, x.d)
            if (cand * cand) == x:
                return cand if cand.sign() > 0 else -cand
    return None


@dataclass(frozen=True)
class Window:
    """Axis-aligned box with exact bounds, one (lo, hi) pair per axis."""

    lo: tuple[ExactScalar, ...]
    hi: tuple[ExactScalar, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("window bounds of different dimensions")
        for a, b in zip(self.lo, self.hi):
            if (b - a).sign() < 0:
                raise ValueError("window with hi < lo")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains_point(self, v: ExactVector) -> bool:
        return all(
            (c - a).sign() >= 0 and (b - c).sign() >= 0
            for c, a, b in zip(v.coords, self.lo, self.hi)
        )

    def contains_ball(self, center: ExactVector, r: ExactScalar) -> bool:
        return all(
            (c - r - a).sign() >= 0 and (b - c - r).sign() >= 0
            for c, a, b in zip(center.coords, self.lo, self.hi)
        )

    def margin(self, center: ExactVector) -> ExactScalar:
        """Largest r with B(center, r) inside the window."""
        best = None
        for c, a, b in zip(center.coords, self.lo, self.hi):
            for m in (c - a, b - c):
                if best is None or (m - best).sign() < 0:
                    best = m
        return best


def window1d(lo, hi, d: int) -> Window:
    return Window((as_scalar(lo, d),), (as_scalar(hi, d),))


@dataclass(frozen=True)
class Patch:
    """An r-patch: the offsets of pattern points within the open ball B(x, r),
    re-anchored so x maps to 0."""

    radius: ExactScalar
    offsets: tuple[ExactVector, ...]

    @property
    def anchored(self) -> bool:
        return any(all(c.is_zero() for c in o.coords) for o in self.offsets)

    def key(self) -> tuple:
        return tuple(o.key() for o in self.offsets)

    def __len__(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True)
class PatchClassTable:
    """Partition of safe anchors by exact translational patch equality."""

    radius: ExactScalar
    classes: tuple[Patch, ...]
    membership: dict  # anchor ExactVector -> class index
    anchor_indices: tuple[tuple[int, ...], ...]  # per class, indices into sample.points
    excluded_anchors: int  # pattern points dropped by the safety margin

    @property
    def censored(self) -> bool:
        # a larger window could always reveal new classes
        return True

    def class_count(self) -> int:
        return len(self.classes)

    def class_of(self, anchor: ExactVector) -> int:
        return self.membership[anchor]


@dataclass(frozen=True)
class Recurrence:
    """Ordered anchor pair whose patches agree exactly up to `size`.

    `size` is the exact supremum of agreement radii (patches are equal at the
    open ball of radius `size` itself); `witness` is a distinguishing offset
    realizing the maximality condition, or None when the window was exhausted
    first (censored=True, so `size` is only a lower bound).
    """

    x1: ExactVector
    x2: ExactVector
    size: ExactScalar
    witness: ExactVector | None
    censored: bool


@dataclass(frozen=True)
class PatchMetric:
    """Result of a truncated patch-metric computation.

    agree_radius_sq is the exact square of the supremum of certified agreement
    radii (None if the patches differ at every positive radius).  When
    censored, agreement held all the way to a cap (requested radius or window
    margin), so the true distance is merely <= value ("below resolution").
    """

    agree_radius_sq: ExactScalar | None
    censored: bool

    @property
    def value(self) -> float:
        """1/(agreement radius): the distance when not censored, else an
        upper bound for it.  Float convenience; the square is authoritative."""
        if self.agree_radius_sq is None:
            return math.inf
        return 1.0 / math.sqrt(float(self.agree_radius_sq))

    @property
    def below_resolution(self) -> bool:
        return self.censored


def _max_workers() -> int:
    raw = os.environ.get("APD_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


class PatternSample:
    """A finite point set with a declared valid window, immutable once built.

    Points are sorted lexicographically and pairwise distinct; the minimal
    gap r_min is strictly positive.  1D samples carry an integer coordinate
    view (common denominator) used by the classification fast paths.
    """

    def __init__(self, points, window: Window, labels=None):
        pts = list(points)
        if not pts:
            raise ValueError("empty pattern")
        d = pts[0].d
        dim = pts[0].dim
        if window.dim != dim:
            raise ValueError("window dimension does not match points")
        for p in pts:
            if p.dim != dim:
                raise ValueError("mixed point dimensions")
            if p.d != d:
                raise DiscriminantMismatch("points in different fields")
            if not window.contains_point(p):
                raise ValueError(f"point {p!r} outside window")

        order = self._sorted_order(pts)
        self.points: tuple[ExactVector, ...] = tuple(pts[i] for i in order)
        for u, v in zip(self.points, self.points[1:]):
            if u == v:
                raise ValueError(f"duplicate point {u!r}")
        if labels is not None:
            labels = list(labels)
            if len(labels) != len(pts):
                raise ValueError("labels length does not match points")
            labels = [labels[i] for i in order]
        self.labels: tuple | None = tuple(labels) if labels is not None else None
        self.window = window
        self.d = d
        self.dim = dim
        self._axis = None
        self._class_cache: dict = {}
        self._rmin: ExactScalar | None = None

    @staticmethod
    def _sorted_order(pts: list[ExactVector]) -> list[int]:
        order = sorted(range(len(pts)), key=lambda i: pts[i].floats())

        def cmp(i: int, j: int) -> int:
            for a, b in zip(pts[i].coords, pts[j].coords):
                s = (a - b).sign()
                if s:
                    return s
            return 0

        # repair float ties with exact comparisons (rare)
        i = 0
        while i < len(order) - 1:
            j = i + 1
            fi = pts[order[i]].floats()
            while j < len(order) and pts[order[j]].floats() == fi:
                j += 1
            if j - i > 1:
                order[i:j] = sorted(order[i:j], key=cmp_to_key(cmp))
            i = j
        return order

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self):
        return f"<PatternSample dim={self.dim} d={self.d} n={len(self.points)}>"

    # -- 1D integer coordinate view ---------------------------------------

    def axis(self):
        """(Q, A, B, F): coords are (A[i] + B[i]*sqrt(d)) / Q, F float values."""
        if self.dim != 1:
            raise WindowError("integer axis view requires dim 1")
        if self._axis is None:
            qs = [c.coords[0] for c in self.points]
            Q = 1
            for s in qs:
                Q = Q * s.a.denominator // math.gcd(Q, s.a.denominator)
                Q = Q * s.b.denominator // math.gcd(Q, s.b.denominator)
            A = [int(s.a * Q) for s in qs]
            B = [int(s.b * Q) for s in qs]
            F = np.array([float(s) for s in qs], dtype=np.float64)
            self._axis = (Q, A, B, F)
        return self._axis

    def scalar(self, i: int) -> ExactScalar:
        return self.points[i].coords[0]

    # -- basic geometry ----------------------------------------------------

    @property
    def r_min(self) -> ExactScalar:
        if self._rmin is None:
            if len(self.points) < 2:
                raise ValueError("r_min needs at least two points")
            if self.dim == 1:
                best = None
                for u, v in zip(self.points, self.points[1:]):
                    g = v.coords[0] - u.coords[0]
                    if best is None or (g - best).sign() < 0:
                        best = g
                self._rmin = best
            else:
                best_sq = None
                floats = [p.floats() for p in self.points]
                bf = math.inf
                for i in range(len(self.points)):
                    j = i + 1
                    while j < len(self.points) and floats[j][0] - floats[i][0] <= bf + 1e-9:
                        dsq = (self.points[j] - self.points[i]).norm_sq()
                        if best_sq is None or (dsq - best_sq).sign() < 0:
                            best_sq = dsq
                            bf = math.sqrt(float(dsq))
                        j += 1
                root = exact_sqrt(best_sq)
                if root is None:
                    raise ValueError("minimal distance is not in the field; use r_min_sq")
                self._rmin = root
        return self._rmin

    def gaps(self) -> list[ExactScalar]:
        if self.dim != 1:
            raise WindowError("gaps are a 1D notion")
        return [v.coords[0] - u.coords[0] for u, v in zip(self.points, self.points[1:])]

    def max_gap(self) -> ExactScalar:
        best = None
        for g in self.gaps():
            if best is None or (g - best).sign() > 0:
                best = g
        return best

    def label_of(self, p: ExactVector):
        if self.labels is None:
            return None
        try:
            i = self.points.index(p)
        except ValueError:
            return None
        return self.labels[i]

    def translate(self, v: ExactVector) -> "PatternSample":
        """Shift every point and the window by v."""
        pts = [p + v for p in self.points]
        win = Window(
            tuple(a + c for a, c in zip(self.window.lo, v.coords)),
            tuple(b + c for b, c in zip(self.window.hi, v.coords)),
        )
        return PatternSample(pts, win, self.labels)

    def restrict(self, lo, hi) -> "PatternSample":
        """1D sub-sample on [lo, hi] (window shrinks accordingly)."""
        if self.dim != 1:
            raise WindowError("restrict is 1D only")
        lo_s, hi_s = as_scalar(lo, self.d), as_scalar(hi, self.d)
        keep = [
            i
            for i, p in enumerate(self.points)
            if (p.coords[0] - lo_s).sign() >= 0 and (hi_s - p.coords[0]).sign() >= 0
        ]
        if not keep:
            raise ValueError("restriction keeps no points")
        labels = [self.labels[i] for i in keep] if self.labels is not None else None
        return PatternSample([self.points[i] for i in keep], window1d(lo_s, hi_s, self.d), labels)

    def contains(self, v: ExactVector) -> bool:
        if not hasattr(self, "_point_set"):
            self._point_set = frozenset(self.points)
        return v in self._point_set

    # -- anchors and patches -------------------------------------------------

    def safe_anchor_indices(self, r: RadiusLike) -> list[int]:
        r_s = as_scalar(r, self.d)
        if self.dim != 1:
            return [
                i for i, p in enumerate(self.points) if self.window.contains_ball(p, r_s)
            ]
        # float prefilter with a band of exact checks near the margin
        _, _, _, F = self.axis()
        rf = float(r_s)
        lo_f, hi_f = float(self.window.lo[0]), float(self.window.hi[0])
        out = []
        slack = 1e-6
        lo_s, hi_s = self.window.lo[0], self.window.hi[0]
        for i, xf in enumerate(F):
            if xf - rf > lo_f + slack and xf + rf < hi_f - slack:
                out.append(i)
            elif xf - rf < lo_f - slack or xf + rf > hi_f + slack:
                continue
            else:
                x = self.points[i].coords[0]
                if (x - r_s - lo_s).sign() >= 0 and (hi_s - x - r_s).sign() >= 0:
                    out.append(i)
        return out

    def neighborhood_indices(self, x: ExactVector, r: ExactScalar) -> list[int]:
        """Indices of points with |p - x| < r (exact, float-prefiltered)."""
        if self.dim == 1:
            _, _, _, F = self.axis()
            xf, rf = float(x.coords[0]), float(r)
            lo = int(np.searchsorted(F, xf - rf - 1e-6, side="left"))
            hi = int(np.searchsorted(F, xf + rf + 1e-6, side="right"))
            out = []
            xs = x.coords[0]
            for j in range(lo, hi):
                o = self.points[j].coords[0] - xs
                if (o + r).sign() > 0 and (r - o).sign() > 0:
                    out.append(j)
            return out
        out = []
        rsq = r * r
        rf = math.sqrt(float(rsq)) + 1e-6
        xf = x.floats()
        for j, p in enumerate(self.points):
            pf = p.floats()
            if abs(pf[0] - xf[0]) > rf or abs(pf[1] - xf[1]) > rf:
                continue
            if (rsq - (p - x).norm_sq()).sign() > 0:
                out.append(j)
        return out


def safe_anchors(sample: PatternSample, r: RadiusLike) -> list[ExactVector]:
    """Pattern points p with B(p, r) inside the window; may be empty."""
    r_s = as_scalar(r, sample.d)
    if r_s.sign() <= 0:
        raise ValueError("radius must be positive")
    return [sample.points[i] for i in sample.safe_anchor_indices(r_s)]


def extract_patch(sample: PatternSample, x: ExactVector, r: RadiusLike) -> Patch:
    """The r-patch of the sample around x (x need not be a pattern point)."""
    r_s = as_scalar(r, sample.d)
    if not sample.window.contains_ball(x, r_s):
        raise WindowError(f"ball of radius {r_s} around {x!r} leaves the window")
    idx = sample.neighborhood_indices(x, r_s)
    return Patch(r_s, tuple(sample.points[j] - x for j in idx))


def _sign_int(u: int, v: int, d: int) -> int:
    """Exact sign of u + v*sqrt(d) with integer u, v."""
    if v == 0:
        return 0 if u == 0 else (1 if u > 0 else -1)
    if u == 0:
        return 1 if v > 0 else -1
    if u > 0 and v > 0:
        return 1
    if u < 0 and v < 0:
        return -1
    lhs, rhs = u * u, v * v * d
    if lhs == rhs:
        return 0
    if u > 0:
        return 1 if lhs > rhs else -1
    return 1 if lhs < rhs else -1


def _patch_keys_1d(sample: PatternSample, anchors: list[int], r: ExactScalar):
    """Integer patch keys ((dA, dB), ...) per anchor, pure int arithmetic."""
    Q, A, B, F = sample.axis()
    d = sample.d
    # r*Q as an integer pair (scaled by S to clear r's denominators)
    ra, rb = r.a * Q, r.b * Q
    S = (ra.denominator * rb.denominator) // math.gcd(ra.denominator, rb.denominator)
    Ra, Rb = int(ra * S), int(rb * S)
    rf = float(r)
    n = len(A)
    xf = F[np.asarray(anchors, dtype=np.int64)] if anchors else F[:0]
    los = np.searchsorted(F, xf - rf - 1e-6, side="left")
    his = np.minimum(np.searchsorted(F, xf + rf + 1e-6, side="right"), n)
    keys = []
    for pos, i in enumerate(anchors):
        xa, xb = A[i], B[i]
        key = []
        for j in range(los[pos], his[pos]):
            da, db = A[j] - xa, B[j] - xb
            # |da + db sqrt(d)| < r*Q  <=>  both (scaled) strict inequalities
            if (
                _sign_int(da * S + Ra, db * S + Rb, d) > 0
                and _sign_int(Ra - da * S, Rb - db * S, d) > 0
            ):
                key.append((da, db))
        keys.append(tuple(key))
    return keys


def _patch_key_generic(sample: PatternSample, x: ExactVector, r: ExactScalar):
    idx = sample.neighborhood_indices(x, r)
    return tuple((sample.points[j] - x).key() for j in idx)


def _patch_lex_cmp(p: Patch, q: Patch) -> int:
    for u, v in zip(p.offsets, q.offsets):
        for a, b in zip(u.coords, v.coords):
            s = (a - b).sign()
            if s:
                return s
    return (len(p.offsets) > len(q.offsets)) - (len(p.offsets) < len(q.offsets))


def classify_patches(sample: PatternSample, r: RadiusLike) -> PatchClassTable:
    """Partition the safe anchors by exact r-patch equality.

    Classes are listed in lexicographic order of their canonical offset
    tuples, so tables built from equal samples are identical.
    """
    r_s = as_scalar(r, sample.d)
    cache_key = r_s.key()
    hit = sample._class_cache.get(cache_key)
    if hit is not None:
        return hit

    anchors = sample.safe_anchor_indices(r_s)
    if not anchors:
        raise WindowError(f"no anchor admits radius {r_s} inside the window")
    excluded = len(sample.points) - len(anchors)

    if sample.dim == 1:
        keys = _patch_keys_1d(sample, anchors, r_s)
    else:
        workers = _max_workers()
        if workers > 1 and len(anchors) > 256:
            def chunk_keys(span):
                return [
                    _patch_key_generic(sample, sample.points[i], r_s) for i in span
                ]
            chunks = [anchors[i::workers] for i in range(workers)]
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(chunk_keys, chunks))
            keyed = {}
            for span, part in zip(chunks, parts):
                for i, k in zip(span, part):
                    keyed[i] = k
            keys = [keyed[i] for i in anchors]
        else:
            keys = [_patch_key_generic(sample, sample.points[i], r_s) for i in anchors]

    groups: dict = {}
    for i, k in zip(anchors, keys):
        groups.setdefault(k, []).append(i)

    reps = []
    for k, members in groups.items():
        anchor = sample.points[members[0]]
        patch = extract_patch(sample, anchor, r_s)
        reps.append((patch, members))
    reps.sort(key=cmp_to_key(lambda a, b: _patch_lex_cmp(a[0], b[0])))

    membership = {}
    anchor_indices = []
    classes = []
    for ci, (patch, members) in enumerate(reps):
        classes.append(patch)
        anchor_indices.append(tuple(members))
        for i in members:
            membership[sample.points[i]] = ci

    table = PatchClassTable(
        radius=r_s,
        classes=tuple(classes),
        membership=membership,
        anchor_indices=tuple(anchor_indices),
        excluded_anchors=excluded,
    )
    sample._class_cache[cache_key] = table
    return table


# -- metrics ---------------------------------------------------------------


def _norm_sq(v: ExactVector) -> ExactScalar:
    return v.norm_sq()


def patch_distance(
    sample: PatternSample, other: PatternSample, r_max_test: RadiusLike
) -> PatchMetric:
    """Anchored patch metric: reciprocal of the largest r with equal r-patches
    around the origin (no translations allowed)."""
    d = sample.d
    r_cap = as_scalar(r_max_test, d)
    zero = ExactVector(tuple(ExactScalar(0, 0, d) for _ in range(sample.dim)))
    for s in (sample, other):
        if not s.window.contains_ball(zero, r_cap):
            raise WindowError("window does not contain the tested ball around 0")
    cap_sq = r_cap * r_cap
    pts_a = {sample.points[j].key(): sample.points[j]
             for j in sample.neighborhood_indices(zero, r_cap)}
    pts_b = {other.points[j].key(): other.points[j]
             for j in other.neighborhood_indices(zero, r_cap)}
    best_sq = None
    for k, p in pts_a.items():
        if k not in pts_b:
            nsq = _norm_sq(p)
            if best_sq is None or (nsq - best_sq).sign() < 0:
                best_sq = nsq
    for k, p in pts_b.items():
        if k not in pts_a:
            nsq = _norm_sq(p)
            if best_sq is None or (nsq - best_sq).sign() < 0:
                best_sq = nsq
    if best_sq is None:
        return PatchMetric(agree_radius_sq=cap_sq, censored=True)
    if best_sq.is_zero():  # cannot happen: keys equal iff points equal
        return PatchMetric(agree_radius_sq=None, censored=False)
    return PatchMetric(agree_radius_sq=best_sq, censored=False)


def _pair_agreement_around(
    sample: PatternSample, x: ExactVector, other: PatternSample, y: ExactVector,
    cap: ExactScalar,
) -> tuple[ExactScalar, bool]:
    """Squared sup agreement radius of the patches of `sample` around x and of
    `other` around y, capped by cap and the window margins (censored flag)."""
    eff = cap
    for s, c in ((sample, x), (other, y)):
        m = s.window.margin(c)
        if (m - eff).sign() < 0:
            eff = m
    if eff.sign() <= 0:
        return ExactScalar(0, 0, sample.d), False
    keys_a = {(sample.points[j] - x).key(): sample.points[j] - x
              for j in sample.neighborhood_indices(x, eff)}
    keys_b = {(other.points[j] - y).key(): other.points[j] - y
              for j in other.neighborhood_indices(y, eff)}
    best_sq = None
    for k, o in keys_a.items():
        if k not in keys_b:
            nsq = _norm_sq(o)
            if best_sq is None or (nsq - best_sq).sign() < 0:
                best_sq = nsq
    for k, o in keys_b.items():
        if k not in keys_a:
            nsq = _norm_sq(o)
            if best_sq is None or (nsq - best_sq).sign() < 0:
                best_sq = nsq
    if best_sq is None:
        return eff * eff, True
    return best_sq, False


def patch_distance_translated(
    sample: PatternSample, other: PatternSample, r_max_test: RadiusLike
) -> PatchMetric:
    """Patch metric allowing translations x, x' with |x|, |x'| < 1/(2r) before
    comparison.

    Candidate translation pairs are anchored point pairs (p, q) near the
    origin and symmetric splits ((p-q)/2, (q-p)/2) realizing global shifts;
    this is a finite proxy for the full infimum (noted in the docs).  Each
    pair contributes min(agreement radius, constraint radius 1/(2 max|x|));
    the best pair decides, all comparisons on exact squares.
    """
    d = sample.d
    r_cap = as_scalar(r_max_test, d)
    zero = ExactVector(tuple(ExactScalar(0, 0, d) for _ in range(sample.dim)))
    for s in (sample, other):
        if not s.window.contains_ball(zero, r_cap):
            raise WindowError("window does not contain the tested ball around 0")
    half = Fraction(1, 2)
    one = ExactScalar(1, 0, d)
    cap_sq = r_cap * r_cap

    best_sq: ExactScalar | None = None
    best_censored = False

    def offer(agree_sq: ExactScalar, censored: bool, cons_sq: ExactScalar | None):
        nonlocal best_sq, best_censored
        contrib, contrib_censored = agree_sq, censored
        if cons_sq is not None and (cons_sq - contrib).sign() < 0:
            contrib, contrib_censored = cons_sq, False
        if (contrib - cap_sq).sign() > 0:
            contrib, contrib_censored = cap_sq, True
        if contrib.sign() > 0 and (best_sq is None or (contrib - best_sq).sign() > 0):
            best_sq, best_censored = contrib, contrib_censored

    # baseline: no translation at all
    agree_sq, censored = _pair_agreement_around(sample, zero, other, zero, r_cap)
    offer(agree_sq, censored, None)

    # a shifted pair only helps if its constraint radius 1/(2 max|x|) exceeds
    # the baseline radius, which bounds the candidate displacement
    def near(s: PatternSample) -> list[ExactVector]:
        out = [zero]
        reach_f = float(s.window.margin(zero))
        if best_sq is not None and best_sq.sign() > 0:
            reach_f = min(reach_f, 0.5 / math.sqrt(float(best_sq)) + 1e-9)
        if reach_f <= 0:
            return out
        reach = as_scalar(Fraction(reach_f).limit_denominator(10**9), d)
        if reach.sign() <= 0:
            return out
        for j in s.neighborhood_indices(zero, reach):
            p = s.points[j]
            if not all(c.is_zero() for c in p.coords):
                out.append(p)
        return out

    near_a, near_b = near(sample), near(other)
    pairs = []
    seen = {(zero.key(), zero.key())}
    for p in near_a:
        pf = p.floats()
        for q in near_b:
            qf = q.floats()
            t_half = (p - q).scale(half)
            disp_anchor = max(sum(c * c for c in pf), sum(c * c for c in qf))
            disp_split = sum((a - b) ** 2 for a, b in zip(pf, qf)) / 4
            for (x, y), disp in (((p, q), disp_anchor), ((t_half, -t_half), disp_split)):
                k = (x.key(), y.key())
                if k not in seen:
                    seen.add(k)
                    pairs.append((disp, x, y))

    # examine small-displacement pairs first; prune once they cannot win
    pairs.sort(key=lambda t: t[0])
    for _, x, y in pairs:
        a_sq, b_sq = _norm_sq(x), _norm_sq(y)
        mn_sq = a_sq if (a_sq - b_sq).sign() >= 0 else b_sq
        if mn_sq.is_zero():
            cons_sq = None
        else:
            cons_sq = one / (mn_sq * 4)  # (1/(2 max|x|))^2
            if best_sq is not None and (cons_sq - best_sq).sign() <= 0:
                break  # sorted by displacement: no later pair can improve
        agree_sq, censored = _pair_agreement_around(sample, x, other, y, r_cap)
        offer(agree_sq, censored, cons_sq)
    if best_sq is None or best_sq.sign() <= 0:
        return PatchMetric(agree_radius_sq=None, censored=False)
    return PatchMetric(agree_radius_sq=best_sq, censored=best_censored)


# -- offset separation (deformation invertibility input) --------------------


def offset_separation_sq(sample: PatternSample, r: RadiusLike) -> ExactScalar:
    """Exact squared minimal distance between distinct offsets occurring in
    any r-patch anchored at a safe pattern point."""
    r_s = as_scalar(r, sample.d)
    anchors = sample.safe_anchor_indices(r_s)
    if not anchors:
        raise WindowError(f"no safe anchor at radius {r_s}")
    if sample.dim == 1:
        keys = _patch_keys_1d(sample, anchors, r_s)
        Q, _, _, _ = sample.axis()
        offsets: dict = {}
        for key in keys:
            for da, db in key:
                offsets[(da, db)] = None
        if len(offsets) < 2:
            raise ValueError("fewer than two distinct offsets at this radius")
        d = sample.d
        sq = math.sqrt(d)
        vals = sorted(offsets.keys(), key=lambda t: t[0] + t[1] * sq)
        # float ordering can confuse near-equal values; repair exactly
        if any(
            _sign_int(v2[0] - v1[0], v2[1] - v1[1], d) < 0
            for v1, v2 in zip(vals, vals[1:])
        ):
            vals.sort(key=cmp_to_key(lambda p, q: _sign_int(p[0] - q[0], p[1] - q[1], d)))
        best = None
        for (a1, b1), (a2, b2) in zip(vals, vals[1:]):
            gap = ExactScalar(Fraction(a2 - a1, Q), Fraction(b2 - b1, Q), d)
            if best is None or ((gap * gap) - best).sign() < 0:
                best = gap * gap
        return best
    offsets = {}
    for i in anchors:
        x = sample.points[i]
        for j in sample.neighborhood_indices(x, r_s):
            o = sample.points[j] - x
            offsets[o.key()] = o
    if len(offsets) < 2:
        raise ValueError("fewer than two distinct offsets at this radius")
    items = list(offsets.values())
    floats = sorted(range(len(items)), key=lambda i: items[i].floats())
    items = [items[i] for i in floats]
    best_sq = None
    bf = math.inf
    ifl = [it.floats() for it in items]
    for i in range(len(items)):
        j = i + 1
        while j < len(items) and ifl[j][0] - ifl[i][0] <= bf + 1e-9:
            dsq = (items[j] - items[i]).norm_sq()
            if best_sq is None or (dsq - best_sq).sign() < 0:
                best_sq = dsq
                bf = math.sqrt(float(dsq))
            j += 1
    return best_sq


def offset_separation(sample: PatternSample, r: RadiusLike) -> ExactScalar:
    """Minimal distance between distinct offsets across all safe r-patches.

    Exact in 1D; in 2D only when the minimum is realized inside the field
    (axis-aligned minima of product patterns are).
    """
    sq = offset_separation_sq(sample, r)
    root = exact_sqrt(sq)
    if root is None:
        raise ValueError(
            "minimal offset distance is not representable in Q(sqrt(d)); "
            "use offset_separation_sq"
        )
    return root


# -- recurrences ------------------------------------------------------------


def _pair_agreement_1d(
    sample: PatternSample, i: int, j: int, cap: ExactScalar
) -> tuple[ExactScalar, ExactVector | None, bool]:
    """Exact agreement radius of the patches at points i and j, capped.

    Returns (size, witness_offset, censored).  Patches agree on the open ball
    of radius `size`; the witness offset (|witness| = size) belongs to exactly
    one of the two patches unless censored.
    """
    pts = sample.points
    xi, xj = pts[i].coords[0], pts[j].coords[0]
    n = len(pts)
    d = sample.d

    best: ExactScalar | None = None
    witness: ExactScalar | None = None

    def consider(off: ExactScalar):
        nonlocal best, witness
        a = abs(off)
        if best is None or (a - best).sign() < 0:
            best = a
            witness = off

    # rightward walk
    ki, kj = i + 1, j + 1
    while True:
        oi = pts[ki].coords[0] - xi if ki < n else None
        oj = pts[kj].coords[0] - xj if kj < n else None
        oi_in = oi is not None and (cap - oi).sign() > 0
        oj_in = oj is not None and (cap - oj).sign() > 0
        if not oi_in and not oj_in:
            break
        if oi_in and oj_in:
            s = (oi - oj).sign()
            if s == 0:
                ki += 1
                kj += 1
                continue
            consider(oi if s < 0 else oj)
        else:
            consider(oi if oi_in else oj)
        break
    # leftward walk
    ki, kj = i - 1, j - 1
    while True:
        oi = pts[ki].coords[0] - xi if ki >= 0 else None
        oj = pts[kj].coords[0] - xj if kj >= 0 else None
        oi_in = oi is not None and (cap + oi).sign() > 0
        oj_in = oj is not None and (cap + oj).sign() > 0
        if not oi_in and not oj_in:
            break
        if oi_in and oj_in:
            s = (oi - oj).sign()
            if s == 0:
                ki -= 1
                kj -= 1
                continue
            consider(oi if s > 0 else oj)
        else:
            consider(oi if oi_in else oj)
        break

    if best is None:
        return cap, None, True
    return best, vec1(witness), False


def find_recurrences(
    sample: PatternSample, r_lo: RadiusLike, r_hi: RadiusLike
) -> list[Recurrence]:
    """All ordered safe-anchor pairs with exact agreement radius in
    [r_lo, r_hi); pairs whose agreement is cut off by the window (with cap
    >= r_lo) are included with censored=True."""
    if sample.dim != 1:
        raise WindowError("recurrence search implemented for dim 1")
    d = sample.d
    lo = as_scalar(r_lo, d)
    hi = as_scalar(r_hi, d)
    if (hi - lo).sign() <= 0:
        raise ValueError("need r_lo < r_hi")
    table = classify_patches(sample, lo)
    out: list[Recurrence] = []
    for members in table.anchor_indices:
        for ai in range(len(members)):
            for bi in range(len(members)):
                if ai == bi:
                    continue
                i, j = members[ai], members[bi]
                cap_i = sample.window.margin(sample.points[i])
                cap_j = sample.window.margin(sample.points[j])
                cap = cap_i if (cap_i - cap_j).sign() <= 0 else cap_j
                eff_cap = cap if (cap - hi).sign() <= 0 else hi
                size, witness, censored = _pair_agreement_1d(sample, i, j, eff_cap)
                if censored and (hi - eff_cap).sign() > 0:
                    pass  # true censoring by the window
                elif censored:
                    continue  # agreement reaches r_hi; size outside [r_lo, r_hi)
                if (size - lo).sign() < 0:
                    continue
                if not censored and (size - hi).sign() >= 0:
                    continue
                out.append(
                    Recurrence(
                        x1=sample.points[i],
                        x2=sample.points[j],
                        size=size,
                        witness=witness,
                        censored=censored,
                    )
                )
    return out


# -- Voronoi cells (1D) ------------------------------------------------------


def voronoi_cells(sample: PatternSample):
    """[(point, lo, hi)] for interior points: cell bounds are midpoints to the
    neighbours.  dim 2 is unsupported."""
    if sample.dim != 1:
        raise WindowError("Voronoi cells implemented for dim 1 only")
    if len(sample.points) < 3:
        raise ValueError("need at least three points for interior cells")
    out = []
    half = Fraction(1, 2)
    for prev, cur, nxt in zip(sample.points, sample.points[1:], sample.points[2:]):
        lo = (prev.coords[0] + cur.coords[0]) * half
        hi = (cur.coords[0] + nxt.coords[0]) * half
        out.append((cur, lo, hi))
    return out
