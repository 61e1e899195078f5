import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectral_lab.errors import DimensionError, InvalidHorizonError, InvalidSubdomainError
from spectral_lab.lattice import FourierLattice, Subdomain, dilated_eigendata, inner_product


def direct_dft(lat, f):
    x = lat.points
    return np.exp(-2j * np.pi * (lat.freqs @ x.T)) @ f.ravel() / lat.num_points


def test_sizes():
    lat = FourierLattice(2, 3)
    assert lat.num_freqs == 49
    assert lat.points_per_axis > 2 * lat.N * 2
    assert lat.freqs.shape == (49, 2)
    assert lat.grid_shape == (14, 14)


def test_constant_and_pure_mode(lat1):
    c = lat1.transform(np.ones(lat1.grid_shape))
    expected = np.zeros(lat1.num_freqs)
    expected[lat1.freq_index(0)] = 1
    assert np.allclose(c, expected, atol=1e-15)
    c = lat1.transform(np.exp(2j * np.pi * lat1.points[:, 0]))
    expected = np.zeros(lat1.num_freqs)
    expected[lat1.freq_index(1)] = 1
    assert np.allclose(c, expected, atol=1e-14)


@pytest.mark.parametrize("n,N", [(1, 12), (2, 4), (3, 2)])
def test_transform_matches_direct_sum(n, N, rng):
    lat = FourierLattice(n, N)
    f = rng.standard_normal(lat.grid_shape)
    assert np.max(np.abs(lat.transform(f) - direct_dft(lat, f))) <= 1e-12


@pytest.mark.parametrize("n,N", [(1, 12), (2, 4)])
def test_roundtrip_band_limited(n, N, rng):
    lat = FourierLattice(n, N)
    c = rng.standard_normal(lat.num_freqs) + 1j * rng.standard_normal(lat.num_freqs)
    assert np.max(np.abs(lat.transform(lat.inverse(c)) - c)) <= 1e-12
    x = rng.random((7, n))
    assert np.allclose(lat.evaluate(c, x), np.exp(2j * np.pi * x @ lat.freqs.T) @ c)


def test_dimension_errors(lat1):
    with pytest.raises(DimensionError):
        lat1.transform(np.ones(5))
    with pytest.raises(DimensionError):
        lat1.inverse(np.ones(3))
    with pytest.raises(DimensionError):
        FourierLattice(0, 3)
    with pytest.raises(DimensionError):
        lat1.freq_index(99)


def test_inner_product_examples(lat1):
    x = lat1.points[:, 0]
    one = np.ones(lat1.grid_shape)
    assert inner_product(lat1, one, one) == pytest.approx(1.0, abs=1e-15)
    e1, e2 = np.exp(2j * np.pi * x), np.exp(4j * np.pi * x)
    assert abs(inner_product(lat1, e1, e2)) <= 1e-14
    assert inner_product(lat1, one, one, Subdomain.interval(0, 0.5)).real == pytest.approx(0.5, abs=1e-14)


def test_empty_region_rejected():
    with pytest.raises(InvalidSubdomainError):
        Subdomain(boxes=())
    with pytest.raises(InvalidSubdomainError):
        Subdomain.interval(0.3, 0.3)
    with pytest.raises(InvalidSubdomainError):
        Subdomain(boxes=(((0, 0.5),), ((0.4, 0.6),)))


@given(st.lists(st.floats(-3, 3), min_size=33, max_size=33), st.lists(st.floats(-3, 3), min_size=33, max_size=33))
def test_parseval(re, im):
    lat = FourierLattice(1, 16)
    c = np.array(re) + 1j * np.array(im)
    f = lat.inverse(c)
    assert abs(inner_product(lat, f, f).real - np.sum(np.abs(c) ** 2)) <= 1e-10 * (1 + np.sum(np.abs(c) ** 2))


@given(st.floats(0, 0.7), st.floats(0.05, 0.3), st.integers(0, 2**32 - 1))
def test_region_inner_bounded(lo, width, seed):
    lat = FourierLattice(1, 8)
    f = np.random.default_rng(seed).standard_normal(lat.grid_shape)
    region = Subdomain.interval(lo, lo + width)
    val = inner_product(lat, f, f, region)
    assert abs(val.imag) == 0
    assert 0 <= val.real <= inner_product(lat, f, f).real + 1e-12


@given(st.floats(0, 0.9), st.floats(0.01, 0.1))
def test_weights_sum_to_measure(lo, width):
    lat = FourierLattice(1, 8)
    region = Subdomain.interval(lo, lo + width)
    assert abs(region.weights(lat).sum() - region.measure) <= 1e-12


def test_weights_sum_2d():
    lat = FourierLattice(2, 3)
    region = Subdomain(boxes=(((0.1, 0.4), (0.2, 0.9)), ((0.5, 0.6), (0.0, 1.0))), n=2)
    assert abs(region.weights(lat).sum() - region.measure) <= 1e-12
    assert Subdomain.full(2).is_full


def test_mass_matrix_matches_gram_and_factor(rng):
    lat = FourierLattice(1, 10)
    region = Subdomain.interval(0.1, 0.45)
    M = region.mass_matrix(lat)
    Q = region.sqrt_factor(lat)
    assert np.allclose(Q.conj().T @ Q, M, atol=1e-13)
    # oracle: fine midpoint rule on the interval
    t = 0.1 + (np.arange(200000) + 0.5) * 0.35 / 200000
    E = np.exp(2j * np.pi * np.outer(t, lat.freqs[:, 0]))
    oracle = E.conj().T @ E * (0.35 / 200000)
    assert np.allclose(M, oracle, atol=1e-10)


def test_ball_wraps():
    b = Subdomain.ball(0.05, 0.1)
    assert b.measure == pytest.approx(0.2)
    assert b.contains([[0.0], [0.95], [0.5]]).tolist() == [True, True, False]


def test_dilated_examples():
    assert dilated_eigendata(1.0, 0.0, 3).eigenvalue(1) == pytest.approx(np.pi**2, rel=1e-15)
    assert dilated_eigendata(1.0, 0.0, 3).eigenvalue(0) == 0
    assert dilated_eigendata(0.5, 0.5, 3).eigenvalue(2) == pytest.approx(4 * np.pi**2, rel=1e-15)
    with pytest.raises(InvalidHorizonError):
        dilated_eigendata(0.0, 0.1, 3)


@given(st.floats(0.1, 5), st.floats(0, 0.9), st.integers(1, 20))
def test_dilated_even_and_increasing(T, eps, K):
    tor = dilated_eigendata(T, eps, K)
    ev = tor.eigenvalues
    assert np.array_equal(ev, ev[::-1])
    assert np.all(np.diff(ev[K:]) > 0)
    assert ev[K] == 0
