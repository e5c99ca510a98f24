import numpy as np
import pytest
from hypothesis import given, strategies as st
from oracles import bump_integral, g0_oracle

from dimred_nls.potentials import (
    InadmissiblePotentialError,
    PotentialSpec,
    ScaledPotentialParams,
    admissibility_check,
    bump,
    coupling_constant_g0,
    eval_scaled_potential,
    mixed_norm_inf1,
    reference_bump,
    scaled_to_threshold,
    spectral_smoothness,
)

CGN = 0.6336962967985058  # measured 32-mode value; fixed here to keep unit tests fast


def test_g0_reference_against_oracle():
    est = coupling_constant_g0(reference_bump())
    oracle = g0_oracle(reference_bump())
    assert oracle == pytest.approx(-1.5274386877552, rel=1e-10)
    assert est.value < 0
    assert abs(est.value - oracle) <= 1e-6 * abs(oracle)
    assert est.error < 1e-6


def test_g0_richardson_errors_shrink():
    h = np.array(coupling_constant_g0(reference_bump(), quad_level=4).history)
    diffs = np.abs(np.diff(h))[-3:]
    assert np.all(np.diff(diffs) < 0)


def test_g0_zero_potential():
    assert coupling_constant_g0(PotentialSpec.zero()).value == 0.0


@given(st.floats(-10.0, -1e-3))
def test_g0_linear_in_amplitude(A):
    base = coupling_constant_g0(reference_bump(), quad_level=3).value
    assert coupling_constant_g0(reference_bump(A), quad_level=3).value == pytest.approx(-A * base, rel=1e-12)


def test_g0_rejects_repulsive():
    with pytest.raises(InadmissiblePotentialError):
        coupling_constant_g0(reference_bump(1.0))


@pytest.mark.parametrize("kind", ["separable", "radial"])
def test_x_fourier_matches_quadrature(kind):
    spec = PotentialSpec(kind, -1.3, 1.1, 0.6, shift=(0.2, -0.1))
    x, w = np.polynomial.legendre.leggauss(120)
    R = spec.radius_x
    y1 = spec.shift[0] + R * x
    y2 = spec.shift[1] + R * x
    Y1, Y2 = np.meshgrid(y1, y2, indexing="ij")
    W = np.outer(w, w) * R * R
    for q1, q2, z in [(0.0, 0.0, 0.1), (1.5, -2.0, 0.3), (4.0, 1.0, -0.2)]:
        direct = np.sum(W * spec(Y1, Y2, z) * np.exp(-1j * (q1 * Y1 + q2 * Y2)))
        assert abs(spec.x_fourier(q1, q2, z) - direct) < 1e-9


def test_radial_x_integral_matches_quadrature():
    spec = PotentialSpec("radial", -1.0, 1.0, 0.5)
    x, w = np.polynomial.legendre.leggauss(200)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    for z in (0.0, 0.2, 0.45):
        assert spec.x_integral(z) == pytest.approx(np.sum(W * spec(X1, X2, z)), abs=1e-8)


def test_mixed_norm_separable_closed_form():
    spec = reference_bump(-2.0)
    exact = 2.0 * (spec.radius_x * bump_integral()) ** 2
    assert mixed_norm_inf1(spec) == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("frame,factor", [("rescaled", "c"), ("lab", "a")])
def test_mixed_norm_scaling(frame, factor):
    spec = PotentialSpec("separable", -1.0, 0.5, np.pi / 4)
    params = ScaledPotentialParams(N=4.0, L=0.5, beta=0.25)
    scale = params.c if factor == "c" else params.a
    assert mixed_norm_inf1(spec, params, frame) == pytest.approx(scale * mixed_norm_inf1(spec), rel=1e-8)


def test_scaled_potential_periodic_and_bounded_domain():
    spec = reference_bump()
    params = ScaledPotentialParams(N=4.0, L=0.5, beta=0.25)
    r = np.array([0.3, -0.2, 0.1])
    shifted = r + np.array([2 * np.pi, -2 * np.pi, 0.0])
    assert eval_scaled_potential(spec, params, "rescaled", r) == pytest.approx(
        eval_scaled_potential(spec, params, "rescaled", shifted)
    )
    with pytest.raises(ValueError):
        eval_scaled_potential(spec, params, "lab", [0.0, 0.0, 0.9])


def test_scaled_params_validation():
    with pytest.raises(ValueError):
        ScaledPotentialParams(N=1e6, L=0.5, beta=0.25)
    assert ScaledPotentialParams(N=1e6, L=0.5, beta=0.25, strict=False).c > 1
    with pytest.raises(ValueError):
        ScaledPotentialParams(N=1.0, L=0.5, beta=0.5)


def test_threshold_scaling_and_admissibility():
    spec = scaled_to_threshold(reference_bump(), CGN, 0.5)
    assert mixed_norm_inf1(spec) == pytest.approx(1 / CGN**4, rel=1e-10)
    rep = admissibility_check(spec, CGN, 0.99)
    assert rep.admissible, rep.to_dict()
    too_big = spec.with_amplitude(2.2 * spec.amplitude)
    assert admissibility_check(too_big, CGN, 0.99).failed() == ["smallness"]


@pytest.mark.parametrize(
    "spec,entry",
    [
        (reference_bump(0.5), "nonpositive"),
        (PotentialSpec("separable", -0.1, 1.0, 0.5, shift=(0.4, 0.0)), "even"),
        (PotentialSpec("separable", -0.1, 1.0, 1.6), "compact_support"),
    ],
)
def test_admissibility_reports_each_hypothesis(spec, entry):
    assert entry in admissibility_check(spec, CGN, 0.5).failed()


def test_smoothness_diagnostic_separates_regularity():
    n = 128
    t = -2 + 4 * np.arange(n) / n
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    assert spectral_smoothness(bump(T1) * bump(T2))[0]
    kink = np.maximum(1 - np.abs(T1), 0) * np.maximum(1 - np.abs(T2), 0)
    assert not spectral_smoothness(kink)[0]
    c3 = np.maximum(1 - T1**2, 0) ** 4 * np.maximum(1 - T2**2, 0) ** 4
    assert not spectral_smoothness(c3)[0]
    assert spectral_smoothness(np.zeros((n, n))) == (True, 1.0)


@given(
    st.sampled_from(["separable", "radial"]),
    st.floats(-5, 0),
    st.floats(0.1, 3.0),
    st.floats(0.1, 1.5),
    st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
)
def test_spec_json_round_trip(kind, A, rx, rz, shift):
    spec = PotentialSpec(kind, A, rx, rz, shift)
    assert PotentialSpec.from_json(spec.to_json()) == spec


def test_spec_validation():
    with pytest.raises(ValueError):
        PotentialSpec("gaussian")
    with pytest.raises(ValueError):
        PotentialSpec("separable", -1.0, 0.0, 1.0)
