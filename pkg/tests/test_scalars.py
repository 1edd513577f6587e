import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanczos_lab._dd import DD
from lanczos_lab.scalars import (
    Precision,
    ext_add,
    ext_div,
    ext_mul,
    ext_sqrt,
    ext_sub,
    round_to,
)

mp.mp.dps = 50

finite = st.floats(min_value=-1e15, max_value=1e15, allow_nan=False)
small = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def dd_to_mp(x: DD):
    return mp.mpf(x.hi) + mp.mpf(x.lo)


def test_unit_roundoffs():
    assert Precision.LOW32.unit_roundoff == pytest.approx(5.96e-8, rel=1e-2)
    assert Precision.WORK64.unit_roundoff == pytest.approx(1.11e-16, rel=1e-2)
    assert Precision.EXT128.unit_roundoff <= 1e-30


def test_add_keeps_tiny_term():
    r = ext_sub(ext_add(1.0, 2.0 ** -60), 1.0)
    assert float(r.hi) == 2.0 ** -60 and float(r.lo) == 0.0


def test_mul_identity(rng):
    for x in rng.standard_normal(50) * 1e3:
        r = ext_mul(float(x), 1.0)
        assert r.hi == x and r.lo == 0.0


def test_sqrt2_squared():
    r = ext_sqrt(2.0)
    ref = mp.sqrt(2)
    assert abs(dd_to_mp(r) - ref) < mp.mpf("1e-31")
    resid = ext_sub(ext_mul(r, r), 2.0)
    assert abs(float(resid.hi)) < 1e-30


@given(small, small)
@settings(max_examples=200, deadline=None)
def test_two_sum_identity(a, b):
    # hi + lo of ext_add equals the exact sum of binary64-exact inputs
    r = ext_add(a, b)
    assert dd_to_mp(r) == mp.mpf(a) + mp.mpf(b)


@given(finite, finite)
@settings(max_examples=200, deadline=None)
def test_ops_match_binary64_to_roundoff(a, b):
    got = float(ext_mul(a, b))
    assert got == pytest.approx(a * b, rel=1e-15, abs=1e-300)


@pytest.mark.parametrize("op,mpop", [
    (ext_add, mp.fadd),
    (ext_sub, lambda x, y: x - y),
    (ext_mul, lambda x, y: x * y),
    (ext_div, lambda x, y: x / y),
])
def test_ops_vs_bignum(rng, op, mpop):
    # pairs of normalized dd values built from products
    ulp = mp.mpf(2) ** -104
    for _ in range(100):
        a = ext_mul(float(rng.standard_normal()), float(rng.uniform(0.5, 2)))
        b = ext_mul(float(rng.standard_normal()), float(rng.uniform(0.5, 2)))
        if float(b) == 0 and op is ext_div:
            continue
        got = dd_to_mp(op(a, b))
        ref = mpop(dd_to_mp(a), dd_to_mp(b))
        if ref != 0:
            assert abs(got - ref) <= 4 * abs(ref) * ulp


def test_sqrt_vs_bignum(rng):
    ulp = mp.mpf(2) ** -104
    for _ in range(100):
        a = ext_mul(float(rng.uniform(0.01, 100)), float(rng.uniform(0.5, 2)))
        a = ext_mul(a, a)
        got = dd_to_mp(ext_sqrt(a))
        ref = mp.sqrt(dd_to_mp(a))
        assert abs(got - ref) <= 4 * abs(ref) * ulp


def test_round_low32_below_ulp():
    assert round_to(Precision.LOW32, 1.0 + 2.0 ** -30) == np.float32(1.0)


def test_round_work64_nearest():
    pi_dd = ext_add(3.141592653589793, 1.2246467991473532e-16)
    assert round_to(Precision.WORK64, pi_dd) == float(
        np.float64(3.141592653589793) + np.float64(1.2246467991473532e-16)
    )


def test_round_low32_point_one():
    got = round_to(Precision.LOW32, 0.1)
    assert float(got) == float(np.float32(0.1))
    assert abs(float(got) - 0.1) / 0.1 < 6e-8


def test_round_low32_correct_vs_bignum(rng):
    # sampled ulp check: compare against rounding the 50-digit value directly
    for _ in range(300):
        a = float(rng.standard_normal())
        b = float(rng.standard_normal()) * 2.0 ** -40
        x = ext_add(a, b)
        got = round_to(Precision.LOW32, x)
        exact = dd_to_mp(x)
        lo32 = np.float32(got)
        down = np.nextafter(lo32, -np.inf)
        up = np.nextafter(lo32, np.inf)
        assert abs(exact - mp.mpf(float(lo32))) <= abs(exact - mp.mpf(float(down)))
        assert abs(exact - mp.mpf(float(lo32))) <= abs(exact - mp.mpf(float(up)))


@given(small, small)
@settings(max_examples=200, deadline=None)
def test_round_monotone(a, b):
    x, y = sorted((a, b))
    for p in (Precision.LOW32, Precision.WORK64):
        assert round_to(p, x) <= round_to(p, y)


@given(small)
@settings(max_examples=100, deadline=None)
def test_round_idempotent(a):
    for p in (Precision.LOW32, Precision.WORK64):
        once = round_to(p, float(a))
        again = round_to(p, float(once))
        assert once == again


def test_round_overflow_flags_inf():
    assert np.isinf(round_to(Precision.LOW32, 1e39))


def test_round_arrays():
    x = DD(np.array([1.0, 2.0, 0.1]))
    out = round_to(Precision.LOW32, x)
    assert out.dtype == np.float32
    assert out[2] == np.float32(0.1)
