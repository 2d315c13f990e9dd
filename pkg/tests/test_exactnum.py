import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apd.exactnum import (
    DiscriminantMismatch,
    ExactScalar,
    ExactVector,
    format_scalar,
    parse_scalar,
    scalar_arith,
    sort_scalars,
    vec1,
)

TAU = ExactScalar(Fraction(1, 2), Fraction(1, 2), 5)


def rationals(max_num=50, max_den=12):
    return st.fractions(
        min_value=-max_num, max_value=max_num, max_denominator=max_den
    )


def scalars(d=5):
    return st.builds(lambda a, b: ExactScalar(a, b, d), rationals(), rationals())


def test_add_cancels_root_part():
    x = ExactScalar(1, 1, 5)
    y = ExactScalar(2, -1, 5)
    assert x + y == ExactScalar(3, 0, 5)


def test_tau_squared_is_tau_plus_one():
    sq = TAU * TAU
    assert sq == ExactScalar(Fraction(3, 2), Fraction(1, 2), 5)
    assert sq == TAU + 1


def test_sqrt2_squared():
    r = ExactScalar(0, 1, 2)
    assert r * r == ExactScalar(2, 0, 2)


def test_sign_examples():
    assert ExactScalar(2, -1, 5).sign() == -1  # sqrt(5) > 2
    assert ExactScalar(0, 0, 5).sign() == 0
    # -3 + 2 sqrt(5): positive iff (2)^2 * 5 > 3^2, i.e. 20 > 9
    assert 2 * 2 * 5 > 3 * 3
    assert ExactScalar(-3, 2, 5).sign() == 1


def test_to_float_examples():
    assert float(TAU) == 1.6180339887498949
    assert float(ExactScalar(1, 0, 5)) == 1.0
    assert float(ExactScalar(0, 1, 2)) == 1.4142135623730951


def test_scalar_arith_dispatch():
    x = ExactScalar(1, 1, 5)
    y = ExactScalar(2, -1, 5)
    assert scalar_arith("add", x, y) == x + y
    assert scalar_arith("sub", x, y) == x - y
    assert scalar_arith("mul", x, y) == x * y
    assert scalar_arith("div", x, y) == x / y
    assert scalar_arith("neg", x) == -x
    with pytest.raises(ValueError):
        scalar_arith("pow", x, y)


def test_discriminant_mismatch():
    with pytest.raises(DiscriminantMismatch):
        ExactScalar(1, 1, 5) + ExactScalar(1, 1, 2)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        ExactScalar(1, 0, 5) / ExactScalar(0, 0, 5)


def test_int_and_fraction_coercion():
    assert TAU + 1 == ExactScalar(Fraction(3, 2), Fraction(1, 2), 5)
    assert 2 * TAU == ExactScalar(1, 1, 5)
    assert TAU - Fraction(1, 2) == ExactScalar(0, Fraction(1, 2), 5)
    assert 1 / TAU == TAU - 1  # 1/tau = tau - 1


@given(x=scalars(), y=scalars(), z=scalars())
@settings(max_examples=200)
def test_field_axioms(x, y, z):
    assert (x + y) + z == x + (y + z)
    assert x * (y + z) == x * y + x * z
    assert x + y == y + x
    assert x * y == y * x
    if not x.is_zero():
        assert x * (ExactScalar(1, 0, 5) / x) == ExactScalar(1, 0, 5)


@given(x=scalars())
@settings(max_examples=200)
def test_sign_symmetry_and_squares(x):
    assert x.sign() == -(-x).sign()
    s = (x * x).sign()
    assert s >= 0
    assert (s == 0) == x.is_zero()


def test_float_monotone_with_sign():
    rng = random.Random(7)
    for _ in range(1000):
        x = ExactScalar(Fraction(rng.randint(-60, 60), rng.randint(1, 9)),
                        Fraction(rng.randint(-60, 60), rng.randint(1, 9)), 5)
        y = ExactScalar(Fraction(rng.randint(-60, 60), rng.randint(1, 9)),
                        Fraction(rng.randint(-60, 60), rng.randint(1, 9)), 5)
        fs = float(x) - float(y)
        float_sign = 0 if fs == 0 else (1 if fs > 0 else -1)
        assert float_sign in (0, (x - y).sign())


def test_abs_and_ordering():
    assert abs(ExactScalar(2, -1, 5)) == ExactScalar(-2, 1, 5)
    assert ExactScalar(2, -1, 5) < ExactScalar(0, 0, 5)
    assert TAU > 1
    assert TAU < 2


def test_parse_format_roundtrip():
    cases = [
        ExactScalar(Fraction(1, 2), Fraction(1, 2), 5),
        ExactScalar(3, 0, 5),
        ExactScalar(0, -1, 2),
        ExactScalar(Fraction(-7, 3), Fraction(2, 9), 13),
        ExactScalar(0, 0, 5),
    ]
    for x in cases:
        assert parse_scalar(format_scalar(x), x.d) == x


def test_parse_variants():
    assert parse_scalar("1/2+1/2*sqrt(5)") == TAU
    assert parse_scalar("sqrt(2)") == ExactScalar(0, 1, 2)
    assert parse_scalar("-sqrt(2)") == ExactScalar(0, -1, 2)
    assert parse_scalar("3", d=5) == ExactScalar(3, 0, 5)
    assert parse_scalar("-2/5", d=2) == ExactScalar(Fraction(-2, 5), 0, 2)
    assert parse_scalar("1-1/2*sqrt(5)") == ExactScalar(1, Fraction(-1, 2), 5)
    with pytest.raises(ValueError):
        parse_scalar("tau")
    with pytest.raises(ValueError):
        parse_scalar("2", d=None)


def test_format_canonical():
    assert format_scalar(ExactScalar(Fraction(2, 4), Fraction(1, 2), 5)) == "1/2+1/2*sqrt(5)"
    assert format_scalar(ExactScalar(3, 0, 5)) == "3"
    assert format_scalar(ExactScalar(0, -2, 2)) == "-2*sqrt(2)"
    assert format_scalar(ExactScalar(1, -1, 5)) == "1-sqrt(5)"


def test_vector_basics():
    v = ExactVector((TAU, ExactScalar(1, 0, 5)))
    w = v - v
    assert w.norm_sq() == ExactScalar(0, 0, 5)
    assert v.norm_sq() == TAU * TAU + 1
    assert v.dim == 2 and v.d == 5
    with pytest.raises(DiscriminantMismatch):
        ExactVector((TAU, ExactScalar(1, 0, 2)))
    with pytest.raises(ValueError):
        ExactVector((TAU, TAU, TAU))


def test_vector_scale_and_hash():
    v = vec1(TAU)
    assert v.scale(2) == vec1(2 * TAU)
    assert hash(v) == hash(vec1(ExactScalar(Fraction(1, 2), Fraction(1, 2), 5)))


def test_sort_scalars_exact():
    rng = random.Random(3)
    vals = [ExactScalar(Fraction(rng.randint(-40, 40), rng.randint(1, 7)),
                        Fraction(rng.randint(-40, 40), rng.randint(1, 7)), 5)
            for _ in range(200)]
    out = sort_scalars(vals)
    for u, v in zip(out, out[1:]):
        assert (v - u).sign() >= 0


def test_rational_equality_across_fields():
    assert ExactScalar(3, 0, 5) == ExactScalar(3, 0, 2)
    assert ExactScalar(3, 0, 5) == 3
    assert hash(ExactScalar(3, 0, 5)) == hash(3)


def test_conjugate():
    assert TAU.conjugate() == ExactScalar(Fraction(1, 2), Fraction(-1, 2), 5)
    x = ExactScalar(2, 3, 5)
    prod = x * x.conjugate()
    assert prod == ExactScalar(2 * 2 - 3 * 3 * 5, 0, 5)


def test_float_of_fraction_helper():
    from apd.exactnum import to_float

    assert to_float(Fraction(1, 4)) == 0.25
    assert to_float(TAU) == float(TAU)
    assert math.isclose(to_float(ExactScalar(0, 1, 2)), math.sqrt(2))
