import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectral_lab.errors import NotEllipticError, UnsupportedOrderError
from spectral_lab.lattice import FourierLattice
from spectral_lab.spectral import (
    SpaceTimeField,
    assemble_operator,
    constant_field,
    eigendata,
    laplacian_symbol,
    project,
    read_basis,
    shift_to_positive,
    sobolev_norm,
    variable_symbol,
    write_basis,
)
from spectral_lab.toroidal import ToroidalSymbol, quantize

LAT = FourierLattice(1, 12)


@pytest.fixture(scope="module")
def heat():
    return assemble_operator(laplacian_symbol(LAT))


@pytest.fixture(scope="module")
def var_op():
    return assemble_operator(variable_symbol(LAT, shift=25.0))


def test_multiplier_operator(heat):
    assert heat.is_multiplier
    assert heat.floor == 1.0
    b = eigendata(heat, 20.0)
    q = 4 * np.pi**2
    assert np.allclose(b.mu[:5], [1, 1 + q, 1 + q, 1 + 4 * q, 1 + 4 * q], rtol=1e-15)
    # eigenvectors are coordinate vectors
    assert np.all(np.sum(np.abs(b.vectors) > 0, axis=0) == 1)


def test_variable_operator_against_dense_oracle(var_op):
    sym = variable_symbol(LAT, shift=25.0)
    A = np.empty((LAT.num_freqs,) * 2, dtype=complex)
    for j in range(LAT.num_freqs):
        e = np.zeros(LAT.num_freqs)
        e[j] = 1
        A[:, j] = LAT.transform(quantize(sym, LAT.inverse(e)))
    oracle = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        b = eigendata(var_op, np.sqrt(oracle[-1]) * 1.01)
    assert b.size == LAT.num_freqs
    assert np.max(np.abs(b.mu - oracle) / oracle) <= 1e-8
    assert np.linalg.norm(var_op.matrix - var_op.matrix.conj().T) <= 1e-12 * np.linalg.norm(var_op.matrix)
    assert var_op.report["defect"] > 0


def test_basis_invariants(var_op):
    b = eigendata(var_op, 40.0)
    assert np.all(np.diff(b.mu) >= 0)
    assert np.max(np.abs(b.gram() - np.eye(b.size))) <= 1e-10
    assert np.all(b.residuals(var_op) <= 1e-8 * (1 + b.mu))
    # self-adjointness in the eigenbasis
    G = b.vectors.conj().T @ var_op.matrix @ b.vectors
    assert np.max(np.abs(G - np.diag(b.mu))) <= 1e-9 * max(1, b.mu.max())
    assert b.mu[0] >= var_op.floor - 1e-9


def test_eigendata_is_deterministic(var_op):
    b1, b2 = eigendata(var_op, 40.0), eigendata(var_op, 40.0)
    assert np.array_equal(b1.vectors, b2.vectors)


def test_sign_changing_symbol_rejected():
    sym = ToroidalSymbol.multiplier(LAT, lambda xi: xi[:, 0], order=1)
    with pytest.raises(NotEllipticError):
        assemble_operator(sym)
    with pytest.raises(NotEllipticError):
        assemble_operator(ToroidalSymbol.multiplier(LAT, lambda xi: 1j + xi[:, 0] ** 2, order=2))


def test_negative_symmetrized_operator_is_clamped():
    op = assemble_operator(variable_symbol(LAT, shift=1.0))
    assert op.report["min_eigenvalue"] < 0
    with pytest.warns(RuntimeWarning, match="clamping"):
        b = eigendata(op, 10.0)
    assert b.mu[0] == 0


def test_truncation_flag(heat):
    with pytest.warns(RuntimeWarning):
        assert eigendata(heat, 70.0).truncated
    assert not eigendata(heat, 20.0).truncated


def test_projection_examples(heat):
    b = eigendata(heat, 40.0)
    f = b.mode(0) + b.mode(b.size - 1)
    assert np.allclose(project(b, b.lam[0], f), b.mode(0), atol=1e-13)
    g = b.grid_function(np.arange(b.size) + 1.0)
    assert np.allclose(project(b, b.lam_max, g), g, atol=1e-10)
    once = project(b, 20.0, g)
    assert np.max(np.abs(project(b, 20.0, once) - once)) <= 1e-12
    assert np.allclose(project(b, 0.5, g), 0)


@given(st.floats(1, 40), st.floats(0, 20), st.integers(0, 2**32 - 1))
def test_projector_family_monotone(lam, extra, seed):
    b = eigendata(assemble_operator(laplacian_symbol(LAT)), 40.0)
    g = b.grid_function(np.random.default_rng(seed).standard_normal(b.size))
    small = project(b, lam, g)
    assert np.max(np.abs(project(b, lam, project(b, lam + extra, g)) - small)) <= 1e-12 * (1 + np.abs(g).max())


def test_weyl_count_nondecreasing(heat):
    b = eigendata(heat, 40.0)
    counts = [len(b.select(lam)) for lam in np.linspace(1, 40, 50)]
    assert np.all(np.diff(counts) >= 0)


def test_shift_to_positive(heat):
    b = eigendata(heat, 20.0)
    s = shift_to_positive(b, 3.0)
    assert np.array_equal(s.mu, b.mu + 3.0)
    assert np.array_equal(s.vectors, b.vectors)
    shifted = shift_to_positive(heat, 4.0)
    assert shifted.floor == heat.floor + 4.0
    lam = shift_to_positive(b.__class__(b.lattice, 2.0, np.array([0.0]), b.vectors[:, :1], b.labels[:1]), 4.0).lam
    assert lam[0] == pytest.approx(2.0)


def test_sobolev_constant(heat):
    b = eigendata(heat, 5.0)
    fld = constant_field(b, [1.0], 0.0, 0.7)
    assert sobolev_norm(fld, 0) == pytest.approx(np.sqrt(2 * 0.7), rel=1e-12)
    with pytest.raises(UnsupportedOrderError):
        sobolev_norm(fld, 3)


def test_sobolev_single_mode_closed_form(heat):
    b = eigendata(heat, 10.0)
    j = 1
    lam = b.lam[j]
    T = 0.8

    def modal(t, k):
        out = np.zeros((b.size, len(t)), dtype=complex)
        out[j] = lam**k * (np.sinh(lam * t) if k % 2 == 0 else np.cosh(lam * t))
        return out

    fld = SpaceTimeField(LAT, b.vectors, b.lam, modal, 0.0, T)
    sh2 = np.sinh(2 * lam * T) / (4 * lam) - T / 2
    ch2 = np.sinh(2 * lam * T) / (4 * lam) + T / 2
    # weight (1 + 4 pi^2 xi^2) equals mu_j = lam^2 for -Laplace + 1
    exact = 2 * sh2 + lam**2 * ch2 + lam**2 * sh2
    assert sobolev_norm(fld, 1, tol=1e-12) == pytest.approx(np.sqrt(exact), rel=1e-8)
    assert sobolev_norm(fld, 0) == pytest.approx(np.sqrt(2 * sh2), rel=1e-8)


def test_basis_roundtrip(var_op, tmp_path):
    b = eigendata(var_op, 30.0)
    write_basis(tmp_path / "b.txt", b)
    back = read_basis(tmp_path / "b.txt")
    assert np.array_equal(back.mu, b.mu)
    assert np.array_equal(back.vectors, b.vectors)
    assert np.array_equal(back.labels, b.labels)


def test_first_and_restrict(heat):
    b = eigendata(heat, 30.0)
    assert b.first(3).size == 3
    assert b.restrict(b.lam[2]).size == 3
    with pytest.raises(ValueError):
        b.first(b.size + 1)
