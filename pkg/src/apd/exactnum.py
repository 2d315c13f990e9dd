"""Exact arithmetic in a real quadratic field Q(sqrt(d)) and short vectors over it.

Every scalar is a + b*sqrt(d) with arbitrary-precision rational a, b and a
fixed square-free d >= 2.  Equality, signs and norm comparisons are decided
exactly, so point-set and patch comparisons built on top of this module never
depend on floating point.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import total_ordering

RationalLike = "int | Fraction"


class DiscriminantMismatch(ValueError):
    """Raised when scalars from different quadratic fields are combined."""


def is_square_free(n: int) -> bool:
    if n < 1:
        return False
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def _check_d(d: int) -> int:
    if not isinstance(d, int) or d < 2 or not is_square_free(d):
        raise ValueError(f"discriminant must be a square-free integer >= 2, got {d!r}")
    return d


_SQRT_CACHE: dict[int, float] = {}


def _sqrt_d(d: int) -> float:
    v = _SQRT_CACHE.get(d)
    if v is None:
        v = math.sqrt(d)
        _SQRT_CACHE[d] = v
    return v


@total_ordering
class ExactScalar:
    """An element a + b*sqrt(d) of Q(sqrt(d)), immutable and hashable.

    Mixing scalars with distinct d raises DiscriminantMismatch; plain ints and
    Fractions coerce into the field of the other operand.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b=0, d: int = 5):
        object.__setattr__(self, "a", Fraction(a))
        object.__setattr__(self, "b", Fraction(b))
        object.__setattr__(self, "d", _check_d(d))

    def __setattr__(self, name, value):
        raise AttributeError("ExactScalar is immutable")

    @classmethod
    def rational(cls, q, d: int) -> "ExactScalar":
        return cls(Fraction(q), 0, d)

    @classmethod
    def root(cls, d: int) -> "ExactScalar":
        """sqrt(d) itself."""
        return cls(0, 1, d)

    def _coerce(self, other) -> "ExactScalar | None":
        if isinstance(other, ExactScalar):
            if other.d != self.d:
                raise DiscriminantMismatch(f"cannot combine sqrt({self.d}) with sqrt({other.d})")
            return other
        if isinstance(other, (int, Fraction)):
            return ExactScalar(other, 0, self.d)
        return None

    # -- field arithmetic -------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExactScalar(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExactScalar(self.a - o.a, self.b - o.b, self.d)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return ExactScalar(-self.a, -self.b, self.d)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExactScalar(
            self.a * o.a + self.b * o.b * self.d,
            self.a * o.b + self.b * o.a,
            self.d,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        # multiply by the conjugate; the norm a^2 - b^2 d vanishes only at 0
        n = o.a * o.a - o.b * o.b * o.d
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt(d))")
        return ExactScalar(
            (self.a * o.a - self.b * o.b * self.d) / n,
            (self.b * o.a - self.a * o.b) / n,
            self.d,
        )

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def conjugate(self) -> "ExactScalar":
        """Galois conjugate a - b*sqrt(d)."""
        return ExactScalar(self.a, -self.b, self.d)

    # -- exact comparisons -------------------------------------------------

    def sign(self) -> int:
        """Exact sign in {-1, 0, +1}, decided by rational case analysis."""
        a, b = self.a, self.b
        if b == 0:
            return 0 if a == 0 else (1 if a > 0 else -1)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: |a| vs |b| sqrt(d), squared comparison is exact
        lhs, rhs = a * a, b * b * self.d
        if lhs == rhs:
            return 0  # impossible for square-free d >= 2, kept for safety
        if a > 0:  # b < 0
            return 1 if lhs > rhs else -1
        return 1 if lhs < rhs else -1

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        if isinstance(other, ExactScalar):
            if self.b == 0 and other.b == 0:
                return self.a == other.a  # rationals agree across fields
            return self.d == other.d and self.a == other.a and self.b == other.b
        return NotImplemented

    def __lt__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)  # agree with int/Fraction hashing
        return hash((self.a, self.b, self.d))

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __bool__(self):
        return not self.is_zero()

    # -- conversions ---------------------------------------------------------

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * _sqrt_d(self.d)

    def key(self) -> tuple:
        """Dense hashable form (fast dict key for patch tables)."""
        return (self.a.numerator, self.a.denominator, self.b.numerator, self.b.denominator)

    def __repr__(self):
        return f"ExactScalar({self.a!r}, {self.b!r}, d={self.d})"

    def __str__(self):
        return format_scalar(self)


def to_float(x) -> float:
    """Nearest double of an ExactScalar / Fraction / int. Non-authoritative."""
    if isinstance(x, ExactScalar):
        return float(x)
    return float(x)


def scalar_sign(x) -> int:
    if isinstance(x, ExactScalar):
        return x.sign()
    q = Fraction(x)
    return 0 if q == 0 else (1 if q > 0 else -1)


_TERM = r"[+-]?\s*(?:\d+(?:/\d+)?)"
_SQRT_TERM = re.compile(
    r"^\s*(?P<coef>[+-]?\s*(?:\d+(?:/\d+)?)?)\s*\*?\s*sqrt\(\s*(?P<d>\d+)\s*\)\s*$"
)


def parse_scalar(text: str, d: int | None = None) -> ExactScalar:
    """Parse "a/b+c/e*sqrt(d)" (either term optional) into an ExactScalar.

    When the text carries no sqrt term, `d` must be supplied to place the
    rational in a field.  A d mismatch between text and argument is an error.
    """
    s = text.strip().replace(" ", "")
    if not s:
        raise ValueError("empty scalar text")
    # split into at most two top-level terms on +/- not inside parentheses
    terms: list[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch in "+-" and depth == 0 and i > start:
            terms.append(s[start:i])
            start = i
    terms.append(s[start:])
    if len(terms) > 2:
        raise ValueError(f"cannot parse scalar {text!r}")

    a = Fraction(0)
    b = Fraction(0)
    seen_d: int | None = None
    for term in terms:
        m = _SQRT_TERM.match(term)
        if m:
            coef = m.group("coef").replace(" ", "")
            if coef in ("", "+"):
                c = Fraction(1)
            elif coef == "-":
                c = Fraction(-1)
            else:
                c = Fraction(coef)
            td = int(m.group("d"))
            if seen_d is not None and td != seen_d:
                raise ValueError(f"two different radicands in {text!r}")
            seen_d = td
            b += c
        else:
            a += Fraction(term)
    if seen_d is None:
        if d is None:
            raise ValueError(f"no sqrt term in {text!r} and no field given")
        seen_d = d
    elif d is not None and seen_d != d:
        raise DiscriminantMismatch(f"scalar {text!r} lives in sqrt({seen_d}), expected sqrt({d})")
    return ExactScalar(a, b, seen_d)


def format_scalar(x: ExactScalar) -> str:
    """Canonical text form with reduced fractions: "a/b+c/e*sqrt(d)"."""

    def frac(q: Fraction) -> str:
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"

    if x.b == 0:
        return frac(x.a)
    root = f"sqrt({x.d})"
    babs = frac(abs(x.b))
    bpart = root if abs(x.b) == 1 else f"{babs}*{root}"
    if x.a == 0:
        return bpart if x.b > 0 else f"-{bpart}"
    sign = "+" if x.b > 0 else "-"
    return f"{frac(x.a)}{sign}{bpart}"


class ExactVector:
    """A point of R^n (n = 1 or 2) with ExactScalar coordinates, immutable."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        cs = tuple(coords)
        if not 1 <= len(cs) <= 2:
            raise ValueError(f"supported dimensions are 1 and 2, got {len(cs)}")
        d = None
        for c in cs:
            if not isinstance(c, ExactScalar):
                raise TypeError("coordinates must be ExactScalar")
            if d is None:
                d = c.d
            elif c.d != d:
                raise DiscriminantMismatch("vector coordinates in different fields")
        object.__setattr__(self, "coords", cs)

    def __setattr__(self, name, value):
        raise AttributeError("ExactVector is immutable")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def d(self) -> int:
        return self.coords[0].d

    def __add__(self, other):
        if not isinstance(other, ExactVector):
            return NotImplemented
        return ExactVector(a + b for a, b in zip(self.coords, other.coords, strict=True))

    def __sub__(self, other):
        if not isinstance(other, ExactVector):
            return NotImplemented
        return ExactVector(a - b for a, b in zip(self.coords, other.coords, strict=True))

    def __neg__(self):
        return ExactVector(-c for c in self.coords)

    def scale(self, s) -> "ExactVector":
        return ExactVector(c * s for c in self.coords)

    def norm_sq(self) -> ExactScalar:
        """Exact squared Euclidean norm (stays inside the field)."""
        acc = self.coords[0] * self.coords[0]
        for c in self.coords[1:]:
            acc = acc + c * c
        return acc

    def __eq__(self, other):
        if not isinstance(other, ExactVector):
            return NotImplemented
        return self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def key(self) -> tuple:
        return tuple(c.key() for c in self.coords)

    def floats(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.coords)

    def __repr__(self):
        return "ExactVector(" + ", ".join(str(c) for c in self.coords) + ")"


def vec1(x: ExactScalar) -> ExactVector:
    return ExactVector((x,))


def vec2(x: ExactScalar, y: ExactScalar) -> ExactVector:
    return ExactVector((x, y))


def scalar_arith(op: str, x: ExactScalar, y: ExactScalar | None = None) -> ExactScalar:
    """Dispatch form of the field operations (op in add/sub/mul/div/neg)."""
    if op == "neg":
        return -x
    if y is None:
        raise ValueError(f"binary op {op!r} needs two operands")
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown op {op!r}")


def sort_scalars(values: list[ExactScalar]) -> list[ExactScalar]:
    """Sort exactly: float key first, exact comparison inside float ties."""
    out = sorted(values, key=float)
    i = 0
    while i < len(out) - 1:
        j = i + 1
        while j < len(out) and float(out[j]) == float(out[i]):
            j += 1
        if j - i > 1:
            seg = out[i:j]
            # insertion sort with exact sign comparisons; ties are rare
            for k in range(1, len(seg)):
                m = k
                while m > 0 and (seg[m] - seg[m - 1]).sign() < 0:
                    seg[m], seg[m - 1] = seg[m - 1], seg[m]
                    m -= 1
            out[i:j] = seg
        i = j
    return out
