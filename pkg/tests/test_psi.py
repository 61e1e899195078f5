from dataclasses import replace

import mpmath as mp
import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from spectral_lab.errors import DegenerateBumpError, DomainError
from spectral_lab.psi import (
    build_psi,
    bump_derivatives,
    bump_eval,
    central_difference,
    correction_coeffs,
    fd_weights,
    psi_derivative,
    psi_eval,
    sup_norms,
    verify_psi,
    write_psi_table,
)

EPS_GRID = [round(0.1 * k, 10) for k in range(1, 10)]


def test_bump_derivatives_match_sympy():
    t, a = sp.symbols("t a", positive=True)
    u = a**2 - t**2
    expr = sp.exp(-1 / u) * u**10
    derivs = [expr] + [sp.diff(expr, t, k) for k in range(1, 5)]
    fns = [sp.lambdify((t, a), d, "mpmath") for d in derivs]
    for aval in (0.3, 0.6):
        ts = np.array([0.0, 0.1 * aval, 0.5 * aval, 0.9 * aval])
        ours = bump_derivatives(ts, aval)
        for k in range(5):
            for j, tv in enumerate(ts):
                ref = float(fns[k](mp.mpf(tv), mp.mpf(aval)))
                assert ours[k, j] == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_bump_examples():
    a = 0.6
    assert bump_eval(a, a) == 0
    assert bump_eval(a * (1 - 1e-9), a) < 1e-300
    assert bump_eval(0.0, a) == pytest.approx(a**20 * np.exp(-1 / a**2), rel=1e-14)
    assert bump_eval(0.0, a, order=1) == 0
    assert bump_eval(0.0, a, order=3) == 0
    with pytest.raises(DomainError):
        bump_eval(-0.1, a)
    with pytest.raises(DomainError):
        bump_eval(0.9, a, eps=0.8)


def test_fd_weights_exact_on_polynomials():
    offs = np.arange(-5, 6)
    for order in range(1, 5):
        w = fd_weights(offs, order)
        for deg in range(11):
            exact = float(np.prod(np.arange(1, order + 1))) if deg == order else 0.0
            assert w @ offs.astype(float) ** deg == pytest.approx(exact, abs=1e-8)
    assert central_difference(np.sin, 0.3, 1, 1e-2) == pytest.approx(np.cos(0.3), rel=1e-12)


def _eta_mp(s, a, b, c):
    u = a * a - s * s
    if u <= 0:
        return mp.mpf(0)
    return mp.exp(-1 / u) * u**10 * (1 - b * s**2 + c * s**4)


def test_correction_coefficients_under_fd_oracle():
    a = 0.6  # eps = 0.8
    cc = correction_coeffs(a)
    mp.mp.dps = 50
    try:
        A, B, C = mp.mpf(a), mp.mpf(cc.b), mp.mpf(cc.c)
        E0 = _eta_mp(mp.mpf(0), A, mp.mpf(0), mp.mpf(0))
        h = mp.mpf(a) * mp.mpf("1e-3")
        offs = list(range(-5, 6))
        vals = [_eta_mp(k * h, A, B, C) for k in offs]
        table = sp.finite_diff_weights(4, offs, 0)
        for order in (1, 2, 3, 4):
            # exact rational weights, so the oracle has no rounding in the stencil
            w = table[order][-1]
            d = sum(mp.mpf(wk.p) / wk.q * v for wk, v in zip(w, vals)) / h**order
            assert abs(float(d / E0)) <= 1e-8
    finally:
        mp.mp.dps = 15
    assert abs(cc.residual_2) <= 1e-12 and abs(cc.residual_4) <= 1e-10
    # the alternative closed forms leave a visible defect
    assert max(abs(cc.printed_residual_2), abs(cc.printed_residual_4)) > 1e-3


def test_degenerate_bump():
    with pytest.raises(DegenerateBumpError):
        correction_coeffs(0.0)
    with pytest.raises(DegenerateBumpError):
        correction_coeffs(0.01)


@pytest.mark.parametrize("eps", EPS_GRID)
def test_psi_regularizer_properties(eps):
    psi = build_psi(eps, 1.0)
    rep = verify_psi(psi)
    assert rep.holds
    assert 0 < psi.psi0 < eps
    assert all(r <= 1e-6 for r in rep.relative_fd_at_T)


def test_psi_branches():
    psi = build_psi(0.8, 1.0)
    t = np.linspace(0, 1.0, 11)
    assert np.all(psi_eval(psi, t) == psi.psi0)
    assert np.all(psi_eval(psi, np.linspace(1.0 + psi.a, psi.end, 7)) == 0)
    left, right = psi(1.0), psi(1.0 + 1e-15)
    assert abs(left - right) <= 1e-12 * psi.psi0
    assert psi_derivative(psi, 0.0, 1) == 0
    with pytest.raises(DomainError):
        psi(psi.end + 0.1)
    with pytest.raises(DomainError):
        build_psi(1.5, 1.0)


@given(st.sampled_from(EPS_GRID), st.floats(0.2, 3.0))
def test_psi_nonnegative_nonincreasing(eps, T):
    psi = build_psi(eps, T)
    t = np.linspace(T, psi.end, 2001)
    vals = psi(t)
    assert np.all(vals >= 0)
    assert np.all(np.diff(vals) <= 0)


@given(st.sampled_from(EPS_GRID), st.floats(1e-3, 1e3))
def test_psi_rescaling_covariance(eps, factor):
    psi = build_psi(eps, 1.0)
    scaled = replace(psi, psi0=psi.psi0 * factor)
    t = np.linspace(0, psi.end, 301)
    base = psi.derivatives(t) / psi.psi0
    scale = np.max(np.abs(base), axis=1, keepdims=True)
    # entries below ~1e-300 absolute are subnormal after scaling; compare against each row's sup
    assert np.all(np.abs(scaled.derivatives(t) / scaled.psi0 - base) <= 1e-12 * scale)


def test_sup_norm_refinement_stable():
    psi = build_psi(0.5, 1.0)
    coarse, fine = np.array(sup_norms(psi, 20001)), np.array(sup_norms(psi, 80001))
    assert np.all(np.abs(coarse / fine - 1) <= 0.02)


def test_psi_table(tmp_path):
    psi = build_psi(0.5, 1.0)
    write_psi_table(tmp_path / "psi.csv", psi, num=11)
    rows = (tmp_path / "psi.csv").read_text().splitlines()
    assert rows[0].startswith("t,psi") and len(rows) == 12
