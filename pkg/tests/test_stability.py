import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cacc_dift.control import ConfigError, Mode
from cacc_dift.stability import (
    ACC_BOUNDARY,
    GOLDEN_BOUNDARY,
    FrequencyGrid,
    TransferFunction,
    build_ss,
    cacc1_worst_case_boundary,
    chain_response,
    hinf_norm,
    hop_transfer_functions,
    magnitude,
    region_check,
    sweep_boundary,
)

FIRST_ORDER = TransferFunction([1.0], [1.0, 1.0])
DOUBLE_INT = TransferFunction([1.0], [0.0, 0.0, 1.0])


def direct_ss(mode, w, h, s):
    """Worst-case SS evaluated from the block transfer functions at complex s."""
    G = 1 / s**2
    K = w * (w + s)
    H = 1 + h * s
    F = 1 / H
    loop = 1 + G * K * H
    if mode == Mode.CACC1:
        return (G * K + 2 * G * F * s**2) / loop
    if mode in (Mode.CACC2, Mode.CACC3):
        return (G * K + G * F * s**2) / loop
    return G * K / loop


# --- rational arithmetic ----------------------------------------------------

def test_trim_and_common_s_cancellation():
    tf = TransferFunction([0.0, 0.0, 2.0, 0.0], [0.0, 0.0, 1.0, 3.0, 0.0])
    assert tf.num.tolist() == [2.0]
    assert tf.den.tolist() == [1.0, 3.0]


def test_zero_denominator_rejected():
    with pytest.raises(ZeroDivisionError):
        TransferFunction([1.0], [0.0, 0.0])


coef = st.lists(st.floats(-3, 3).filter(lambda x: abs(x) > 1e-2), min_size=1, max_size=4)


@settings(max_examples=100, deadline=None)
@given(n1=coef, d1=coef, n2=coef, d2=coef, seed=st.integers(0, 2**32 - 1))
def test_sum_and_product_match_pointwise_oracle(n1, d1, n2, d2, seed):
    a, b = TransferFunction(n1, d1), TransferFunction(n2, d2)
    rng = np.random.default_rng(seed)
    ev = lambda c, z: sum(ci * z**k for k, ci in enumerate(c))
    for z in rng.normal(size=20) + 1j * rng.normal(size=20):
        if min(abs(ev(d1, z)), abs(ev(d2, z))) < 1e-2:
            continue
        r1, r2 = ev(n1, z) / ev(d1, z), ev(n2, z) / ev(d2, z)
        assert (a + b)(z) == pytest.approx(r1 + r2, rel=1e-10, abs=1e-10 * (abs(r1) + abs(r2)))
        assert (a * b)(z) == pytest.approx(r1 * r2, rel=1e-10)
        assert (a - b)(z) == pytest.approx(r1 - r2, rel=1e-10, abs=1e-10 * (abs(r1) + abs(r2)))


# --- magnitude ----------------------------------------------------------------

@pytest.mark.parametrize(
    "tf, omega, expected",
    [(FIRST_ORDER, 0.0, 1.0), (FIRST_ORDER, 1.0, 1 / math.sqrt(2)), (DOUBLE_INT, 2.0, 0.25)],
)
def test_magnitude_examples(tf, omega, expected):
    assert magnitude(tf, omega) == pytest.approx(expected, rel=1e-14)


def test_magnitude_pole_on_axis_is_infinite():
    assert magnitude(DOUBLE_INT, 0.0) == math.inf
    assert magnitude(TransferFunction([1.0], [4.0, 0.0, 1.0]), 2.0) == math.inf


def test_magnitude_vectorised():
    w = np.array([0.0, 1.0, 10.0])
    np.testing.assert_allclose(magnitude(FIRST_ORDER, w), 1 / np.sqrt(1 + w**2), rtol=1e-14)


# --- SS construction -------------------------------------------------------

def test_acc_dc_gain_is_one():
    for w, h in ((1.45, 1.0), (2.0, 0.3), (0.7, 5.0)):
        assert build_ss(Mode.ACC, w, h).dc_gain == pytest.approx(1.0, rel=1e-15)


def test_cacc2_coefficients():
    tf = build_ss(Mode.CACC2, 0.8, 1.0)
    assert tf.num.tolist() == [1.0] and tf.den.tolist() == [1.0, 1.0]
    assert build_ss(Mode.CACC3, 3.0, 1.0).den.tolist() == [1.0, 1.0]


def test_acc_explicit_form():
    w, h = 1.45, 1.0
    tf = build_ss(Mode.ACC, w, h)
    p = w * h
    assert tf.num.tolist() == pytest.approx([w * w, w])
    assert tf.den.tolist() == pytest.approx([w * w, w * (1 + p), 1 + p])


@pytest.mark.parametrize("mode", list(Mode))
@pytest.mark.parametrize("w, h", [(0.8, 1.0), (1.45, 1.0), (0.3, 2.5)])
def test_build_ss_matches_block_algebra(mode, w, h):
    tf = build_ss(mode, w, h)
    for s in 1j * np.logspace(-2, 2, 17) + np.array([0.0]):
        assert tf(s) == pytest.approx(direct_ss(mode, w, h, s), rel=1e-10)


def test_cacc1_matches_printed_rational_form():
    w, h = 0.8, 1.0
    p = w * h
    s = 1j * np.logspace(-2, 2, 50)
    lhs = ((2 + p) * s**2 + w * (p + 1) * s + w**2) / ((1 + p) * s**2 + w * (p + 1) * s + w**2)
    np.testing.assert_allclose(build_ss(Mode.CACC1, w, h)(s), lhs / (1 + h * s), rtol=1e-12)


@pytest.mark.parametrize("mode", list(Mode))
def test_ss_functions_are_strictly_proper(mode):
    tf = build_ss(mode, 1.0, 1.0)
    assert tf.num.size < tf.den.size
    assert magnitude(tf, 1e6) < 1e-5


def test_build_ss_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        build_ss(Mode.ACC, 0.0, 1.0)


# --- H-infinity --------------------------------------------------------------

def test_grid_precondition():
    with pytest.raises(ValueError):
        FrequencyGrid(1e-2, 1e3, 4000)
    with pytest.raises(ValueError):
        FrequencyGrid(1e-3, 1e3, 1000)


def test_hinf_cacc2():
    res = hinf_norm(build_ss(Mode.CACC2, 0.8, 1.0))
    assert res.argmax_omega == pytest.approx(1e-3)
    assert res.norm == pytest.approx(1.0, abs=1e-6)
    assert res.string_stable


def test_hinf_acc_on_boundary_is_marginal():
    res = hinf_norm(build_ss(Mode.ACC, math.sqrt(2), 1.0))
    assert abs(res.norm - 1.0) < 1e-6
    assert res.string_stable


def test_hinf_acc_below_boundary_amplifies():
    res = hinf_norm(build_ss(Mode.ACC, 1.0, 1.0))
    assert res.norm > 1.0 and not res.string_stable


def test_hinf_refinement_finds_resonance_peak():
    # lightly damped 2nd order: peak 1/(2 z sqrt(1 - z^2)) at w_n sqrt(1 - 2 z^2)
    z, wn = 0.05, 3.0
    tf = TransferFunction([wn**2], [wn**2, 2 * z * wn, 1.0])
    res = hinf_norm(tf)
    assert res.norm == pytest.approx(1 / (2 * z * math.sqrt(1 - z * z)), rel=1e-10)
    assert res.argmax_omega == pytest.approx(wn * math.sqrt(1 - 2 * z * z), rel=1e-6)


def test_hinf_pole_on_axis():
    res = hinf_norm(TransferFunction([1.0], [4.0, 0.0, 1.0]))
    assert res.norm == math.inf and not res.string_stable
    assert res.argmax_omega == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(w=st.floats(0.1, 5.0), h=st.floats(0.1, 5.0), mode=st.sampled_from(list(Mode)))
def test_hinf_bounds_every_grid_point(w, h, mode):
    tf = build_ss(mode, w, h)
    grid = FrequencyGrid()
    res = hinf_norm(tf, grid)
    assert np.all(magnitude(tf, grid.points()) <= res.norm)


# --- regions ----------------------------------------------------------------

def test_region_examples():
    assert region_check(Mode.CACC1, 0.8, 1.0)
    assert region_check(Mode.ACC, 1.45, 1.0)
    assert not region_check(Mode.CACC1, 0.5, 1.0)
    assert region_check(Mode.CACC2, 0.01, 7.0) and region_check(Mode.CACC3, 9.0, 0.01)
    assert GOLDEN_BOUNDARY == pytest.approx(0.6180339887, rel=1e-9)


def test_cacc1_intermediate_inequality_example():
    # 1 / (w^2 (w h + 1)^2) at w=0.5, h=1 is 1.78 > h^2, so the region excludes it
    w, h = 0.5, 1.0
    assert 1 / (w**2 * (w * h + 1) ** 2) == pytest.approx(1.7778, rel=1e-4)


@pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("factor", [0.9, 1.1])
def test_acc_region_agrees_with_sweep(h, factor):
    w = factor * ACC_BOUNDARY / h
    assert hinf_norm(build_ss(Mode.ACC, w, h)).string_stable == region_check(Mode.ACC, w, h)


def test_cacc1_exact_worst_case_boundary():
    # closed form from the quadratic in omega^2, cross-checked by bisection on the sweep
    b = cacc1_worst_case_boundary()
    assert b == pytest.approx(0.8177958, abs=1e-6)
    assert sweep_boundary(Mode.CACC1) == pytest.approx(b, abs=1e-5)


@pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
def test_cacc1_worst_case_inequality_above_exact_boundary(h):
    # |N/D| <= |1 + h s| at every swept frequency once omega_k*h_d clears the exact boundary
    for p in (0.82, 1.0, 2.0):
        w = p / h
        s = 1j * FrequencyGrid().points()
        lhs = np.abs(((2 + p) * s**2 + w * (p + 1) * s + w**2) / ((1 + p) * s**2 + w * (p + 1) * s + w**2))
        assert np.all(lhs <= np.abs(1 + h * s) * (1 + 1e-12))


def test_cacc1_closed_form_region_is_not_sufficient_for_worst_case():
    # documents the gap between the closed-form CACC1 region and its own worst-case SS
    at_golden = hinf_norm(build_ss(Mode.CACC1, GOLDEN_BOUNDARY, 1.0))
    assert at_golden.norm == pytest.approx(1.15448, abs=1e-4)
    assert region_check(Mode.CACC1, 0.8, 1.0)
    assert hinf_norm(build_ss(Mode.CACC1, 0.8, 1.0)).norm == pytest.approx(1.0117569, abs=1e-6)


# --- full chain -------------------------------------------------------------

def test_hop_functions_reproduce_worst_case():
    hop = hop_transfer_functions(0.8, 1.0)
    s = 1j * np.logspace(-2, 2, 25)
    np.testing.assert_allclose(hop["ff1"](s) + hop["ff2"](s) + hop["fb"](s), build_ss(Mode.CACC1, 0.8, 1.0)(s), rtol=1e-12)
    np.testing.assert_allclose(hop["ff1"](s) + hop["fb"](s), 1 / (1 + s), rtol=1e-12)


def test_chain_of_acc_is_power_of_single_hop():
    w = np.logspace(-2, 2, 200)
    chain = chain_response(["ACC"] * 5, w)
    hop = magnitude(build_ss(Mode.ACC, 1.45, 1.0), w)
    np.testing.assert_allclose(chain[-1], hop**5, rtol=1e-10)


@pytest.mark.parametrize(
    "modes",
    [
        ["CACC2"] + ["CACC1"] * 8,
        ["ACC"] * 9,
        ["CACC2"] + ["CACC3"] * 8,
        ["ACC", "CACC3", "CACC1", "CACC2", "ACC", "CACC1", "CACC1", "CACC3", "CACC2"],
    ],
)
def test_table1_full_chain_is_string_stable(modes):
    w = FrequencyGrid().points()
    assert chain_response(modes, w).max() <= 1.0 + 1e-9
