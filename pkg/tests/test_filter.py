import math

import numpy as np
import pytest
from scipy.linalg import expm

from pllranges import TransferFunction, impulse_response, realize, zero_input_response

from conftest import TAU1, TAU2


def roundtrip_error(tf, rng, n=20):
    fr = realize(tf)
    worst = 0.0
    poles = np.roots(tf.den[::-1]) if len(tf.den) > 1 else np.array([])
    for _ in range(n):
        s = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        if len(poles) and np.min(np.abs(s - poles)) < 1e-3:
            continue
        want = tf(s)
        got = fr.transfer_at(s)
        worst = max(worst, abs(got - want) / abs(want))
    return worst


def test_realize_example1(tf_example1):
    fr = realize(tf_example1)
    assert fr.order == 2
    assert fr.h == 0.0
    assert fr.transfer_at(0.0).real == pytest.approx(1.0, abs=1e-12)


def test_realize_static():
    fr = realize(TransferFunction((1.0,), (1.0,)))
    assert fr.order == 0
    assert fr.h == 1.0
    assert fr.A.shape == (0, 0)
    assert impulse_response(fr, 3.0) == 0.0


def test_realize_pi(tf_pi):
    fr = realize(tf_pi)
    assert fr.order == 1
    assert fr.h == pytest.approx(0.0225 / 0.0633, rel=1e-12)
    assert tf_pi.zero_pole_multiplicity() == 1
    assert abs(fr.transfer_at(1.3 + 0.7j) - tf_pi(1.3 + 0.7j)) < 1e-12


def test_leadlag_matches_circuit_form(tf_leadlag):
    # The first-order realization is the classical circuit one.
    fr = realize(tf_leadlag)
    s = TAU1 + TAU2
    assert fr.A[0, 0] == pytest.approx(-1 / s, rel=1e-12)
    assert fr.b[0] == pytest.approx(TAU1 / s, rel=1e-12)
    assert fr.c[0] == pytest.approx(1 / s, rel=1e-12)
    assert fr.h == pytest.approx(TAU2 / s, rel=1e-12)


@pytest.mark.parametrize("num,den", [
    ((1.0, 0.5), (1.0, 0.5, 0.5)),
    ((1.0, 0.25, 0.5), (1.0, 2.0, 2.0, 2.0)),
    ((1.0, 0.0225), (0.0, 0.0633)),
    ((1.0, TAU2), (1.0, TAU1 + TAU2)),
    ((2.0, 1.0, 3.0), (1.0, 2.0, 2.0, 1.0)),
    ((0.5, 1.0, 0.25, 2.0), (1.0, 1.0, 3.0, 2.0, 1.5)),
])
def test_roundtrip_random_points(num, den):
    rng = np.random.default_rng(42)
    assert roundtrip_error(TransferFunction(num, den), rng) <= 1e-9


def test_dc_gain():
    assert TransferFunction((1.0, 0.5), (1.0, 0.5, 0.5)).dc_gain() == 1.0
    assert TransferFunction((1.0, 0.25, 0.5), (1.0, 2.0, 2.0, 2.0)).dc_gain() == 1.0
    assert math.isinf(TransferFunction((1.0, 0.0225), (0.0, 0.0633)).dc_gain())


def test_dc_gain_matches_realization(tf_example1, tf_example2, tf_leadlag):
    for tf in (tf_example1, tf_example2, tf_leadlag):
        fr = realize(tf)
        got = -fr.c @ np.linalg.solve(fr.A, fr.b) + fr.h
        assert got == pytest.approx(tf.dc_gain(), abs=1e-9)
        # no pole at zero -> nonsingular A
        assert abs(np.linalg.det(fr.A)) > 1e-12


def test_impulse_response(tf_example1, tf_leadlag):
    fr = realize(tf_leadlag)
    assert impulse_response(fr, 0.0) == pytest.approx(float(fr.c[0] * fr.b[0]), rel=1e-12)
    fr1 = realize(tf_example1)
    assert abs(impulse_response(fr1, 50.0)) < 1e-6   # stable A decays


def test_impulse_semigroup(tf_example1):
    fr = realize(tf_example1)
    t, u = 0.7, 1.9
    direct = fr.c @ expm(fr.A * (t + u)) @ fr.b
    split = fr.c @ expm(fr.A * t) @ expm(fr.A * u) @ fr.b
    assert direct == pytest.approx(split, abs=1e-9)


def test_zero_input_response(tf_example1, tf_pi):
    fr = realize(tf_example1)
    assert zero_input_response(fr, np.zeros(2), 1.7) == 0.0
    # x0 = b reproduces the impulse response
    for t in (0.0, 0.4, 2.1):
        assert zero_input_response(fr, fr.b, t) == pytest.approx(
            impulse_response(fr, t), abs=1e-12)
    # marginally stable PI mode neither blows up nor vanishes
    frpi = realize(tf_pi)
    val = zero_input_response(frpi, np.array([1.0]), 100.0)
    assert math.isfinite(val) and abs(val) > 1.0


def test_zero_input_dimension_check(tf_example1):
    fr = realize(tf_example1)
    with pytest.raises(ValueError, match="state dimension"):
        zero_input_response(fr, np.zeros(3), 1.0)


def test_improper_rejected():
    with pytest.raises(ValueError, match="improper"):
        TransferFunction((1.0, 2.0, 3.0), (1.0, 1.0))


def test_non_coprime_rejected():
    # (1+s)(1+2s) / (1+s)(1+3s): common root at -1
    num = (1.0, 3.0, 2.0)
    den = (1.0, 4.0, 3.0)
    with pytest.raises(ValueError, match="non-coprime"):
        TransferFunction(num, den)


def test_degenerate_rejected():
    with pytest.raises(ValueError, match="zero denominator"):
        TransferFunction((1.0,), (0.0,))
    with pytest.raises(ValueError, match="zero numerator"):
        TransferFunction((0.0,), (1.0, 1.0))


def test_trailing_zeros_trimmed():
    tf = TransferFunction((1.0, 0.0), (1.0, 2.0, 0.0))
    assert tf.num == (1.0,)
    assert tf.den == (1.0, 2.0)
    assert tf.order == 1
