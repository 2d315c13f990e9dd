"""Site functions on patterns and pattern-equivariance diagnostics.

A function on pattern points is equivariant with range R when anchors with
equal R-patches carry equal values; the weak variant replaces equality by
small oscillation over a finite patch-class partition.  The mollified
extension turns a site function into a smooth field on a grid by convolving
its piecewise-constant Voronoi interpolation with a bump kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exactnum import ExactScalar, ExactVector, vec1
from .patterns import (
    PatternSample,
    WindowError,
    as_scalar,
    classify_patches,
    extract_patch,
    safe_anchors,
)


class SiteFunction:
    """A map from (a subset of) the points of a sample to exact vectors."""

    def __init__(self, sample: PatternSample, mapping: dict):
        self.sample = sample
        vals = {}
        dim = None
        for p, v in mapping.items():
            if not isinstance(p, ExactVector) or not isinstance(v, ExactVector):
                raise TypeError("mapping must be ExactVector -> ExactVector")
            if dim is None:
                dim = v.dim
            elif v.dim != dim:
                raise ValueError("mixed value dimensions")
            vals[p.key()] = (p, v)
        if not vals:
            raise ValueError("empty site function")
        self._vals = vals
        self.value_dim = dim

    @classmethod
    def from_callable(cls, sample: PatternSample, fn, points=None) -> "SiteFunction":
        pts = points if points is not None else sample.points
        return cls(sample, {p: fn(p) for p in pts})

    def domain(self) -> list[ExactVector]:
        return [p for p, _ in self._vals.values()]

    def defined_at(self, p: ExactVector) -> bool:
        return p.key() in self._vals

    def __call__(self, p: ExactVector) -> ExactVector:
        try:
            return self._vals[p.key()][1]
        except KeyError:
            raise KeyError(f"site function undefined at {p!r}") from None

    def __len__(self) -> int:
        return len(self._vals)


def constant_site_function(sample: PatternSample, value: ExactVector) -> SiteFunction:
    return SiteFunction(sample, {p: value for p in sample.points})


def identity_site_function(sample: PatternSample) -> SiteFunction:
    return SiteFunction(sample, {p: p for p in sample.points})


def class_site_function(sample: PatternSample, r, values: list) -> SiteFunction:
    """Assign one value per r-patch class: strongly equivariant by
    construction, with range r."""
    table = classify_patches(sample, r)
    if len(values) != len(table.classes):
        raise ValueError(f"need {len(table.classes)} values, got {len(values)}")
    mapping = {}
    for ci, members in enumerate(table.anchor_indices):
        for i in members:
            mapping[sample.points[i]] = values[ci]
    return SiteFunction(sample, mapping)


@dataclass(frozen=True)
class RangeResult:
    """Outcome of an equivariance-range search over a radius ladder."""

    passed_radius: ExactScalar | None  # smallest tested radius that passes
    tested: tuple
    witness: tuple | None  # (x, y) anchors violating the largest tested radius


def _grouped_anchors(f: SiteFunction, R) -> list[list[ExactVector]] | None:
    """Anchors of f's domain that are safe at R, grouped by R-patch class;
    None when no anchor is safe."""
    sample = f.sample
    R_s = as_scalar(R, sample.d)
    if R_s.sign() == 0:
        pts = [p for p in f.domain()]
        return [pts] if pts else None
    groups: dict = {}
    for p in f.domain():
        if not sample.window.contains_ball(p, R_s):
            continue
        key = tuple(o.key() for o in extract_patch(sample, p, R_s).offsets)
        groups.setdefault(key, []).append(p)
    return list(groups.values()) or None


def equivariance_range(f: SiteFunction, radii) -> RangeResult:
    """Smallest tested radius R at which equal R-patches force equal values.

    Radii are tested in increasing order; passing is monotone, so the first
    pass decides.  Values are compared exactly.
    """
    tested = sorted((as_scalar(r, f.sample.d) for r in radii), key=float)
    witness = None
    for R in tested:
        groups = _grouped_anchors(f, R)
        if groups is None:
            raise WindowError(f"no safe anchor at radius {R}")
        ok = True
        for grp in groups:
            v0 = f(grp[0])
            for p in grp[1:]:
                if f(p) != v0:
                    ok = False
                    witness = (grp[0], p)
                    break
            if not ok:
                break
        if ok:
            return RangeResult(passed_radius=R, tested=tuple(tested), witness=None)
    return RangeResult(passed_radius=None, tested=tuple(tested), witness=witness)


def delta_h(f: SiteFunction, h: ExactVector) -> SiteFunction:
    """Increment function p -> f(p + h) - f(p) on the common domain."""
    mapping = {}
    for p in f.domain():
        q = p + h
        if f.defined_at(q):
            mapping[p] = f(q) - f(p)
    if not mapping:
        raise ValueError("empty increment domain: h is not a return vector")
    return SiteFunction(f.sample, mapping)


@dataclass(frozen=True)
class DerivabilityResult:
    derivable: bool
    witness: tuple | None  # (x, y) centers with equal patches, different membership
    centers_tested: int


def _derivability_centers(source: PatternSample, target: PatternSample) -> list[ExactVector]:
    """Points of both patterns plus consecutive midpoints (1D): the finite
    proxy for 'all of R^n' used by the derivability check."""
    pts = {p.key(): p for p in source.points}
    for p in target.points:
        pts.setdefault(p.key(), p)
    if source.dim == 1:
        ordered = sorted(pts.values(), key=lambda p: float(p.coords[0]))
        half = Fraction(1, 2)
        for u, v in zip(ordered, ordered[1:]):
            m = vec1((u.coords[0] + v.coords[0]) * half)
            pts.setdefault(m.key(), m)
    return list(pts.values())


def is_locally_derivable(
    source: PatternSample, target: PatternSample, R
) -> DerivabilityResult:
    """Does the R-patch of `source` at a point decide membership in `target`?

    Tests all points of both patterns plus consecutive midpoints whose
    R-ball fits in the source window and which lie in the target window.
    """
    R_s = as_scalar(R, source.d)
    groups: dict = {}
    tested = 0
    target_set = {p.key() for p in target.points}
    for x in _derivability_centers(source, target):
        if R_s.sign() > 0 and not source.window.contains_ball(x, R_s):
            continue
        if not target.window.contains_point(x):
            continue
        tested += 1
        if R_s.sign() == 0:
            key = ()
        else:
            key = tuple(o.key() for o in extract_patch(source, x, R_s).offsets)
        member = x.key() in target_set
        prev = groups.get(key)
        if prev is None:
            groups[key] = (member, x)
        elif prev[0] != member:
            return DerivabilityResult(False, (prev[1], x), tested)
    return DerivabilityResult(True, None, tested)


@dataclass(frozen=True)
class WeakEquivarianceResult:
    passed: bool
    radius: ExactScalar
    epsilon: float
    partition: tuple  # tuple of tuples of anchors (patch classes)
    oscillations: tuple  # float per class


def weak_equivariance_test(f: SiteFunction, epsilon: float, R) -> WeakEquivarianceResult:
    """Partition safe anchors by R-patch class and measure the within-class
    oscillation of f; passes when every class oscillates below epsilon.

    Each cell is a union of patch classes, hence membership in a cell is a
    function of the R-patch (the partition is locally derivable from the
    pattern by construction).
    """
    R_s = as_scalar(R, f.sample.d)
    groups = _grouped_anchors(f, R_s)
    if groups is None:
        raise WindowError(f"no safe anchor at radius {R_s}")
    oscillations = []
    for grp in groups:
        if f.value_dim == 1:
            vals = [f(p).coords[0] for p in grp]
            lo = min(vals, key=float)
            hi = max(vals, key=float)
            for v in vals:  # exact min/max repair around float ties
                if (v - lo).sign() < 0:
                    lo = v
                if (v - hi).sign() > 0:
                    hi = v
            oscillations.append(float(hi - lo))
        else:
            arr = np.array([[float(c) for c in f(p).coords] for p in grp])
            diff = arr[:, None, :] - arr[None, :, :]
            oscillations.append(float(np.sqrt((diff**2).sum(-1)).max()))
    passed = all(o < epsilon for o in oscillations)
    return WeakEquivarianceResult(
        passed=passed,
        radius=R_s,
        epsilon=float(epsilon),
        partition=tuple(tuple(grp) for grp in groups),
        oscillations=tuple(oscillations),
    )


# -- mollified extension (1D) --------------------------------------------------


class BumpKernel:
    """Smooth bump exp(-1/(1 - (x/r)^2)) on (-r, r) with exact-enough
    cumulative integrals (composite Gauss-Legendre, ~1e-14 relative)."""

    _GL_X, _GL_W = np.polynomial.legendre.leggauss(12)

    def __init__(self, radius: float, panels: int = 512):
        if radius <= 0:
            raise ValueError("bump radius must be positive")
        self.r = float(radius)
        self.edges = np.linspace(-self.r, self.r, panels + 1)
        panel_integrals = np.array(
            [self._panel(a, b) for a, b in zip(self.edges[:-1], self.edges[1:])]
        )
        self.cum = np.concatenate([[0.0], np.cumsum(panel_integrals)])
        self.total = float(self.cum[-1])

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < self.r
        t = x[inside] / self.r
        out[inside] = np.exp(-1.0 / (1.0 - t * t))
        return out

    def _panel(self, a: float, b: float) -> float:
        mid, half = (a + b) / 2, (b - a) / 2
        return float(half * (self._GL_W * self.density(mid + half * self._GL_X)).sum())

    def cdf(self, t: float) -> float:
        """Integral of the unnormalized bump over (-r, t]."""
        if t <= -self.r:
            return 0.0
        if t >= self.r:
            return self.total
        i = int(np.searchsorted(self.edges, t, side="right")) - 1
        i = min(max(i, 0), len(self.edges) - 2)
        return float(self.cum[i] + self._panel(self.edges[i], t))

    def mass(self, a: float, b: float) -> float:
        """Normalized integral over (a, b)."""
        if b <= a:
            return 0.0
        return (self.cdf(b) - self.cdf(a)) / self.total

    def density_normalized(self, x):
        return self.density(x) / self.total

    def peak_normalized(self, x):
        """Variant normalized to rho(0) = 1 instead of unit integral."""
        return self.density(x) / math.exp(-1.0)


@dataclass
class SampledField:
    """Values of a field on a uniform 1D grid inside the sample window."""

    start: ExactScalar
    step: Fraction
    values: np.ndarray  # shape (n, m)

    def __post_init__(self):
        if self.values.ndim == 1:
            self.values = self.values[:, None]

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def value_dim(self) -> int:
        return self.values.shape[1]

    def grid_point(self, i: int) -> ExactScalar:
        return self.start + self.step * i

    def grid_floats(self) -> np.ndarray:
        return float(self.start) + float(self.step) * np.arange(self.size)

    def derivative(self) -> "SampledField":
        """Central finite differences on the interior grid."""
        if self.size < 3:
            raise ValueError("grid too small for finite differences")
        dv = (self.values[2:] - self.values[:-2]) / (2.0 * float(self.step))
        return SampledField(self.start + self.step, self.step, dv)

    def difference(self, other: "SampledField") -> "SampledField":
        if (
            self.step != other.step
            or self.size != other.size
            or (self.start - other.start).sign() != 0
        ):
            raise ValueError("fields on different grids")
        return SampledField(self.start, self.step, self.values - other.values)


def _voronoi_cells_clamped(sample: PatternSample):
    """(lo, hi) per point, midpoints inside, window bounds at the ends."""
    half = Fraction(1, 2)
    pts = sample.points
    cells = []
    for i, p in enumerate(pts):
        lo = sample.window.lo[0] if i == 0 else (pts[i - 1].coords[0] + p.coords[0]) * half
        hi = sample.window.hi[0] if i == len(pts) - 1 else (p.coords[0] + pts[i + 1].coords[0]) * half
        cells.append((float(lo), float(hi)))
    return cells


def _check_bump(sample: PatternSample, bump_radius) -> Fraction:
    if sample.dim != 1:
        raise WindowError("mollification implemented for dim 1")
    r = Fraction(bump_radius)
    two_r = as_scalar(2 * r, sample.d)
    if (sample.r_min - two_r).sign() < 0:
        raise ValueError("bump radius exceeds half the minimal gap")
    return r


def _mollified_values(psi: SiteFunction, kernel: BumpKernel, xs) -> np.ndarray:
    """phi(x) = convolution of the bump with the Voronoi step interpolation,
    evaluated at float locations xs."""
    sample = psi.sample
    cells = _voronoi_cells_clamped(sample)
    vals = np.array([[float(c) for c in psi(p).coords] for p in sample.points])
    pts_f = np.array([float(p.coords[0]) for p in sample.points])
    rf = kernel.r
    out = np.zeros((len(xs), vals.shape[1]))
    for g, x in enumerate(xs):
        i0 = int(np.searchsorted(pts_f, x - rf - 1e-9)) - 1
        i1 = int(np.searchsorted(pts_f, x + rf + 1e-9)) + 1
        acc = np.zeros(vals.shape[1])
        for i in range(max(i0, 0), min(i1, len(cells))):
            clo, chi = cells[i]
            # phi(x) = sum_i psi_i * integral of rho over (x - chi, x - clo)
            w = kernel.mass(max(x - chi, -rf), min(x - clo, rf))
            if w:
                acc += w * vals[i]
        out[g] = acc
    return out


def mollify_extend(psi: SiteFunction, bump_radius, grid_step) -> SampledField:
    """Smooth the piecewise-constant Voronoi interpolation of psi with a
    unit-integral bump of the given radius, sampled on a uniform grid.

    Requires bump_radius <= r_min/2 so that each pattern point's bump support
    stays inside its own Voronoi cell; then the field reproduces psi at the
    pattern points up to quadrature error (see mollify_values_at).
    """
    sample = psi.sample
    r = _check_bump(sample, bump_radius)
    step = Fraction(grid_step)
    if step <= 0:
        raise ValueError("grid step must be positive")
    if any(not psi.defined_at(p) for p in sample.points):
        raise ValueError("mollification needs psi on every pattern point")
    kernel = BumpKernel(float(r))
    lo_f = float(sample.window.lo[0])
    hi_f = float(sample.window.hi[0])
    n_grid = int(math.floor((hi_f - lo_f) / float(step))) + 1
    xs = lo_f + float(step) * np.arange(n_grid)
    out = _mollified_values(psi, kernel, xs)
    return SampledField(sample.window.lo[0], step, out)


def mollify_values_at(psi: SiteFunction, bump_radius, points) -> np.ndarray:
    """The mollified field evaluated at exact pattern locations (float image);
    at pattern points it returns psi to quadrature accuracy (~1e-14)."""
    r = _check_bump(psi.sample, bump_radius)
    kernel = BumpKernel(float(r))
    xs = [float(p.coords[0]) for p in points]
    return _mollified_values(psi, kernel, xs)


def mollify_pointwise(psi: SiteFunction, bump_radius, grid_step) -> SampledField:
    """Peak-normalized variant: phi(x) = sum_p rho(x - p) psi(p) with
    rho(0) = 1, so phi agrees with psi exactly at pattern points."""
    sample = psi.sample
    if sample.dim != 1:
        raise WindowError("mollification implemented for dim 1")
    r = Fraction(bump_radius)
    two_r = as_scalar(2 * r, sample.d)
    if (sample.r_min - two_r).sign() < 0:
        raise ValueError("bump radius exceeds half the minimal gap")
    step = Fraction(grid_step)
    kernel = BumpKernel(float(r))
    pts_f = np.array([float(p.coords[0]) for p in sample.points])
    vals = np.array([[float(c) for c in psi(p).coords] for p in sample.points])
    lo_f, hi_f = float(sample.window.lo[0]), float(sample.window.hi[0])
    n_grid = int(math.floor((hi_f - lo_f) / float(step))) + 1
    xs = lo_f + float(step) * np.arange(n_grid)
    out = np.zeros((n_grid, vals.shape[1]))
    for g, x in enumerate(xs):
        w = kernel.peak_normalized(x - pts_f)
        out[g] = w @ vals
    return SampledField(sample.window.lo[0], step, out)


def field_restriction_error(field: SampledField, psi: SiteFunction) -> float:
    """Max |field - psi| over pattern points resolvable on the grid, the
    field evaluated by exact-grid matching or linear interpolation."""
    xs = field.grid_floats()
    worst = 0.0
    for p in psi.sample.points:
        x = float(p.coords[0])
        if x < xs[0] or x > xs[-1]:
            continue
        pos = (x - xs[0]) / float(field.step)
        i = int(round(pos))
        if abs(pos - i) < 1e-9 and 0 <= i < field.size:
            fv = field.values[i]
        else:
            i = int(math.floor(pos))
            if i + 1 >= field.size:
                continue
            t = pos - i
            fv = (1 - t) * field.values[i] + t * field.values[i + 1]
        pv = np.array([float(c) for c in psi(p).coords])
        worst = max(worst, float(np.abs(fv - pv).max()))
    return worst


def field_equivariance_range(
    field: SampledField, sample: PatternSample, radii, tol: float
) -> RangeResult:
    """Equivariance search for grid fields: grid points with equal R-patches
    must carry values within tol (numeric analog of the exact site test)."""
    tested = sorted((as_scalar(r, sample.d) for r in radii), key=float)
    witness = None
    for R in tested:
        groups: dict = {}
        for i in range(field.size):
            x = vec1(field.grid_point(i))
            if not sample.window.contains_ball(x, R):
                continue
            key = tuple(o.key() for o in extract_patch(sample, x, R).offsets)
            groups.setdefault(key, []).append(i)
        if not groups:
            raise WindowError(f"no safe grid point at radius {R}")
        ok = True
        for key, idxs in groups.items():
            block = field.values[idxs]
            osc = float(np.abs(block - block[0]).max())
            if osc >= tol:
                ok = False
                witness = (idxs[0], idxs[int(np.abs(block - block[0]).max(axis=1).argmax())])
                break
        if ok:
            return RangeResult(passed_radius=R, tested=tuple(tested), witness=None)
    return RangeResult(passed_radius=None, tested=tuple(tested), witness=witness)
