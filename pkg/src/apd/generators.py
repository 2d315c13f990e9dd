"""Exact constructors of FLC Delone sets.

1D primitive substitutions realized with their natural tile lengths (left
Perron eigenvector, shortest letter normalized to 1), 1D cut-and-project sets
with exact window membership, periodic lattices, and 2D products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .exactnum import ExactScalar, ExactVector, vec1, vec2
from .patterns import PatternSample, Window, as_scalar, window1d


class RuleError(ValueError):
    """Invalid substitution rule (non-primitive, bad lengths, bad alphabet)."""


def _substitution_matrix(alphabet: list[str], images: dict[str, str]) -> list[list[int]]:
    """M[i][j] = number of occurrences of letter i in the image of letter j."""
    index = {ch: i for i, ch in enumerate(alphabet)}
    n = len(alphabet)
    M = [[0] * n for _ in range(n)]
    for j, ch in enumerate(alphabet):
        for out in images[ch]:
            if out not in index:
                raise RuleError(f"image of {ch!r} uses unknown letter {out!r}")
            M[index[out]][j] += 1
    return M


def _is_primitive(M: list[list[int]]) -> bool:
    n = len(M)
    P = [row[:] for row in M]
    # some power up to n^2 - 2n + 2 of a primitive matrix is positive
    for _ in range(n * n - 2 * n + 2):
        if all(all(v > 0 for v in row) for row in P):
            return True
        P = [
            [sum(P[i][k] * M[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]
        # clamp to avoid giant entries; only positivity matters
        P = [[min(v, 1) if v > 0 else 0 for v in row] for row in P]
    return all(all(v > 0 for v in row) for row in P)


def _char_poly(M: list[list[int]]) -> list[Fraction]:
    """Monic characteristic polynomial coefficients [c0, ..., c_{n-1}, 1]
    via Faddeev-LeVerrier."""
    n = len(M)
    A = [[Fraction(M[i][j]) for j in range(n)] for i in range(n)]
    Mk = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    coeffs = [Fraction(1)] * (n + 1)
    cur = [row[:] for row in Mk]
    for k in range(1, n + 1):
        cur = [
            [sum(A[i][m] * cur[m][j] for m in range(n)) for j in range(n)]
            for i in range(n)
        ]
        tr = sum(cur[i][i] for i in range(n))
        c = -tr / k
        coeffs[n - k] = c
        for i in range(n):
            cur[i][i] += c
    return coeffs


def _square_free_split(n: int) -> tuple[int, int]:
    """n = s^2 * e with e square-free; returns (s, e)."""
    s, e, k = 1, 1, 2
    m = n
    while k * k <= m:
        while m % (k * k) == 0:
            s *= k
            m //= k * k
        if m % k == 0:
            e *= k
            m //= k
        k += 1
    e *= m
    return s, e


def perron_eigenvalue(M: list[list[int]], d: int | None = None) -> ExactScalar:
    """Largest eigenvalue of an integer matrix, exact in Q(sqrt(d)).

    Rational roots are found by integer root search, then the polynomial is
    deflated; a remaining quadratic factor is solved by radicals.  Raises
    RuleError when the eigenvalue does not lie in a real quadratic field.
    """
    coeffs = _char_poly(M)  # monic, integer for integer M
    ints = [int(c) for c in coeffs]
    roots: list[ExactScalar] = []

    def eval_poly(cs, x: int) -> int:
        acc = 0
        for c in reversed(cs):
            acc = acc * x + c
        return acc

    work = ints[:]
    changed = True
    while len(work) > 3 and changed:
        changed = False
        c0 = work[0]
        cands = {0} if c0 == 0 else set()
        for k in range(1, abs(c0) + 1 if c0 else 1):
            if c0 and c0 % k == 0:
                cands.update((k, -k))
        for r in sorted(cands, key=abs):
            if eval_poly(work, r) == 0:
                # synthetic division by (x - r)
                out = [0] * (len(work) - 1)
                acc = 0
                for i in range(len(work) - 1, 0, -1):
                    acc = acc * r + work[i]
                    out[i - 1] = acc
                work = out
                roots.append(ExactScalar(r, 0, d or 5))
                changed = True
                break

    if len(work) == 2:  # linear: x + c0
        roots.append(ExactScalar(-work[0], 0, d or 5))
    elif len(work) == 3:  # monic quadratic x^2 + p x + q
        p, q = work[1], work[0]
        disc = p * p - 4 * q
        if disc < 0:
            raise RuleError("complex eigenvalues in the leading factor")
        s, e = _square_free_split(disc)
        if e == 1:
            roots.append(ExactScalar(Fraction(-p + s, 2), 0, d or 5))
            roots.append(ExactScalar(Fraction(-p - s, 2), 0, d or 5))
        else:
            if d is not None and e != d:
                raise RuleError(f"eigenvalue lives in Q(sqrt({e})), not Q(sqrt({d}))")
            dd = e
            roots.append(ExactScalar(Fraction(-p, 2), Fraction(s, 2), dd))
            roots.append(ExactScalar(Fraction(-p, 2), Fraction(-s, 2), dd))
    elif len(work) > 3:
        raise RuleError("eigenvalue not expressible in a quadratic field")

    if not roots:
        raise RuleError("no real eigenvalue found")
    return max(roots, key=float)


def left_perron_vector(M: list[list[int]], lam: ExactScalar) -> list[ExactScalar]:
    """Left eigenvector for lam, normalized so the least entry equals 1."""
    n = len(M)
    d = lam.d
    # solve v (M - lam I) = 0, i.e. (M^T - lam I) v^T = 0
    A = [
        [ExactScalar(M[j][i], 0, d) - (lam if i == j else 0) for j in range(n)]
        for i in range(n)
    ]
    # Gaussian elimination to row echelon form
    pivots = []
    row = 0
    for col in range(n):
        sel = None
        for r in range(row, n):
            if not A[r][col].is_zero():
                sel = r
                break
        if sel is None:
            continue
        A[row], A[sel] = A[sel], A[row]
        inv = ExactScalar(1, 0, d) / A[row][col]
        A[row] = [v * inv for v in A[row]]
        for r in range(n):
            if r != row and not A[r][col].is_zero():
                f = A[r][col]
                A[r] = [v - f * w for v, w in zip(A[r], A[row])]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    if not free:
        raise RuleError("eigenvalue is not an eigenvalue of the matrix")
    fc = free[0]
    v = [ExactScalar(0, 0, d)] * n
    v[fc] = ExactScalar(1, 0, d)
    for r, pc in enumerate(pivots):
        v[pc] = -A[r][fc]
    signs = {x.sign() for x in v if not x.is_zero()}
    if signs == {-1}:
        v = [-x for x in v]
    if any(x.sign() <= 0 for x in v):
        raise RuleError("Perron vector is not strictly positive")
    least = min(v, key=float)
    inv = ExactScalar(1, 0, d) / least
    return [x * inv for x in v]


@dataclass(frozen=True)
class SubstitutionRule:
    """A primitive 1D substitution with exact natural tile lengths."""

    alphabet: tuple[str, ...]
    images: dict
    lengths: dict  # letter -> ExactScalar
    d: int

    def __post_init__(self):
        if len(set(self.alphabet)) != len(self.alphabet):
            raise RuleError("duplicate letters in alphabet")
        for ch in self.alphabet:
            if ch not in self.images or not self.images[ch]:
                raise RuleError(f"letter {ch!r} has no image")
        M = _substitution_matrix(list(self.alphabet), self.images)
        if not _is_primitive(M):
            raise RuleError("substitution matrix is not primitive")
        lam = self.scaling_factor()
        for ch in self.alphabet:
            total = ExactScalar(0, 0, self.d)
            for out in self.images[ch]:
                total = total + self.lengths[out]
            if total != self.lengths[ch] * lam:
                raise RuleError(
                    f"lengths violate the eigenvector identity at letter {ch!r}"
                )
            if self.lengths[ch].sign() <= 0:
                raise RuleError("tile lengths must be positive")

    def matrix(self) -> list[list[int]]:
        return _substitution_matrix(list(self.alphabet), self.images)

    def scaling_factor(self) -> ExactScalar:
        """The inflation multiplier (Perron eigenvalue), exact."""
        M = self.matrix()
        # derive from the stated lengths: sum over the image of any letter
        ch = self.alphabet[0]
        total = ExactScalar(0, 0, self.d)
        for out in self.images[ch]:
            total = total + self.lengths[out]
        return total / self.lengths[ch]

    @classmethod
    def with_natural_lengths(cls, alphabet, images, d: int | None = None
                             ) -> "SubstitutionRule":
        """Derive lengths from the left Perron eigenvector exactly."""
        alphabet = tuple(alphabet)
        M = _substitution_matrix(list(alphabet), images)
        if not _is_primitive(M):
            raise RuleError("substitution matrix is not primitive")
        lam = perron_eigenvalue(M, d)
        vec = left_perron_vector(M, lam)
        lengths = {ch: vec[i] for i, ch in enumerate(alphabet)}
        return cls(alphabet, dict(images), lengths, lam.d)


def substitution_fixed_word(rule: SubstitutionRule, seed: str, k: int) -> str:
    """Apply the substitution k times to a single seed letter (k = 0: seed)."""
    if seed not in rule.alphabet:
        raise RuleError(f"seed {seed!r} not in alphabet")
    if k < 0:
        raise ValueError("iteration count must be >= 0")
    word = seed
    for _ in range(k):
        word = "".join(rule.images[ch] for ch in word)
    return word


def realize_points(rule: SubstitutionRule, word: str, origin=0) -> PatternSample:
    """Vertex set of the word's tile run: partial sums of letter lengths.

    The point starting tile i carries letter label word[i]; the final vertex
    is unlabeled.  The window is exactly the covered segment.
    """
    if not word:
        raise RuleError("empty word")
    d = rule.d
    x = as_scalar(origin, d)
    pts = [vec1(x)]
    labels: list = []
    for ch in word:
        labels.append(ch)
        x = x + rule.lengths[ch]
        pts.append(vec1(x))
    labels.append(None)
    win = window1d(as_scalar(origin, d), x, d)
    return PatternSample(pts, win, labels)


def generate_substitution_sample(rule: SubstitutionRule, seed: str, k: int,
                                 origin=0) -> PatternSample:
    return realize_points(rule, substitution_fixed_word(rule, seed, k), origin)


# -- built-in rules -----------------------------------------------------------


def fibonacci_rule() -> SubstitutionRule:
    tau = ExactScalar(Fraction(1, 2), Fraction(1, 2), 5)
    return SubstitutionRule(
        ("a", "b"),
        {"a": "ab", "b": "a"},
        {"a": tau, "b": ExactScalar(1, 0, 5)},
        5,
    )


def silver_rule() -> SubstitutionRule:
    """Ammann chain: a -> aab, scaling 1 + sqrt(2)."""
    return SubstitutionRule(
        ("a", "b"),
        {"a": "aab", "b": "a"},
        {"a": ExactScalar(1, 1, 2), "b": ExactScalar(1, 0, 2)},
        2,
    )


def period_doubling_rule(d: int = 5) -> SubstitutionRule:
    """a -> ab, b -> aa: rational scaling 2, both tiles of length 1."""
    one = ExactScalar(1, 0, d)
    return SubstitutionRule(
        ("a", "b"),
        {"a": "ab", "b": "aa"},
        {"a": one, "b": one},
        d,
    )


def periodic_rule(d: int = 5) -> SubstitutionRule:
    """Unit tiles doubling each step: realizes integer lattice segments."""
    return SubstitutionRule(
        ("a",),
        {"a": "aa"},
        {"a": ExactScalar(1, 0, d)},
        d,
    )


BUILTIN_RULES = {
    "fibonacci": fibonacci_rule,
    "silver": silver_rule,
    "period-doubling": period_doubling_rule,
    "periodic": periodic_rule,
}


def integer_lattice(lo: int, hi: int, d: int = 5) -> PatternSample:
    """Z on [lo, hi], labels all 'a' (unit tiles)."""
    pts = [vec1(ExactScalar(n, 0, d)) for n in range(lo, hi + 1)]
    labels = ["a"] * (hi - lo) + [None]
    return PatternSample(pts, window1d(lo, hi, d), labels)


# -- cut and project -----------------------------------------------------------


def _exact_floor(x: ExactScalar) -> int:
    f = math.floor(float(x))
    while (x - (f + 1)).sign() >= 0:
        f += 1
    while (x - f).sign() < 0:
        f -= 1
    return f


def _exact_ceil(x: ExactScalar) -> int:
    return -_exact_floor(-x)


def cut_and_project_1d(
    d: int,
    window_lo,
    window_hi,
    phys_lo,
    phys_hi,
    closed_left: bool = True,
) -> PatternSample:
    """Model set {m + n*w : conjugate(m + n*w) in internal window}.

    w = (1 + sqrt(d))/2 for d = 1 mod 4 (ring of integers), else sqrt(d);
    the star map is Galois conjugation.  Window membership is decided
    exactly; [lo, hi) or (lo, hi] depending on closed_left.
    """
    if d % 4 == 1:
        omega = ExactScalar(Fraction(1, 2), Fraction(1, 2), d)
    else:
        omega = ExactScalar(0, 1, d)
    omega_c = omega.conjugate()
    wlo, whi = as_scalar(window_lo, d), as_scalar(window_hi, d)
    plo, phi = as_scalar(phys_lo, d), as_scalar(phys_hi, d)
    if (whi - wlo).sign() < 0:
        raise ValueError("empty internal window interval")

    def in_window(star: ExactScalar) -> bool:
        lo_ok = (star - wlo).sign() >= 0 if closed_left else (star - wlo).sign() > 0
        hi_ok = (whi - star).sign() > 0 if closed_left else (whi - star).sign() >= 0
        return lo_ok and hi_ok

    spread = omega - omega_c  # sqrt(d) or 2 sqrt(d), positive
    n_lo = _exact_ceil((plo - whi) / spread)
    n_hi = _exact_floor((phi - wlo) / spread)
    pts = []
    for n in range(n_lo, n_hi + 1):
        m_lo = _exact_ceil(plo - omega * n)
        m_hi = _exact_floor(phi - omega * n)
        for m in range(m_lo, m_hi + 1):
            star = ExactScalar(m, 0, d) + omega_c * n
            if in_window(star):
                pts.append(vec1(ExactScalar(m, 0, d) + omega * n))
    if not pts:
        raise ValueError("cut-and-project selection is empty")
    return PatternSample(pts, window1d(plo, phi, d))


def fibonacci_cut_project(phys_lo, phys_hi) -> PatternSample:
    """Cut-and-project Fibonacci chain with gaps {1, tau}: internal window
    (-1, tau - 1] of length tau."""
    tau = ExactScalar(Fraction(1, 2), Fraction(1, 2), 5)
    return cut_and_project_1d(
        5, ExactScalar(-1, 0, 5), tau - 1, phys_lo, phys_hi, closed_left=False
    )


def product_pattern(p1: PatternSample, p2: PatternSample) -> PatternSample:
    """2D product {(p, q)}; labels are (l1, l2) pairs when both factors carry
    labels."""
    if p1.dim != 1 or p2.dim != 1:
        raise ValueError("product needs two 1D samples")
    if p1.d != p2.d:
        raise ValueError("product factors live in different fields")
    pts = []
    labels = [] if (p1.labels is not None and p2.labels is not None) else None
    for i, u in enumerate(p1.points):
        for j, v in enumerate(p2.points):
            pts.append(vec2(u.coords[0], v.coords[0]))
            if labels is not None:
                labels.append((p1.labels[i], p2.labels[j]))
    win = Window(
        (p1.window.lo[0], p2.window.lo[0]),
        (p1.window.hi[0], p2.window.hi[0]),
    )
    return PatternSample(pts, win, labels)
