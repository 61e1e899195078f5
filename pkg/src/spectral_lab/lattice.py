"""Flat tori, Fourier lattices, sensor subdomains and the dilated time torus.

All measures are normalized so that Vol(T^n) = 1. Grid functions are arrays of
shape ``(P,) * n``; Fourier coefficients are flat vectors ordered
lexicographically in the frequency vector.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import DimensionError, InvalidHorizonError, InvalidSubdomainError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FourierLattice:
    """Frequencies ``|xi_i| <= N`` on T^n with a uniform grid of ``4N+2`` points per axis."""

    n: int
    N: int

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise DimensionError(f"need n >= 1 and N >= 1, got n={self.n}, N={self.N}")

    @property
    def points_per_axis(self) -> int:
        return 4 * self.N + 2

    @property
    def grid_shape(self) -> tuple:
        return (self.points_per_axis,) * self.n

    @property
    def num_points(self) -> int:
        return self.points_per_axis**self.n

    @property
    def num_freqs(self) -> int:
        return (2 * self.N + 1) ** self.n

    @cached_property
    def freqs(self) -> np.ndarray:
        """Integer frequency vectors, shape ``(num_freqs, n)``, lexicographic order."""
        axis = np.arange(-self.N, self.N + 1)
        mesh = np.meshgrid(*([axis] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def points(self) -> np.ndarray:
        """Grid points, shape ``(num_points, n)``, C order matching ``grid_shape``."""
        axis = np.arange(self.points_per_axis) / self.points_per_axis
        mesh = np.meshgrid(*([axis] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def _fft_index(self) -> tuple:
        # position of each retained frequency inside an unshifted FFT array
        idx = np.mod(self.freqs, self.points_per_axis)
        return tuple(idx[:, i] for i in range(self.n))

    @cached_property
    def synthesis(self) -> np.ndarray:
        """Matrix ``e^{2 pi i x.xi}`` of shape ``(num_points, num_freqs)``."""
        return np.exp(1j * TWO_PI * (self.points @ self.freqs.T))

    def freq_index(self, xi) -> int:
        xi = np.atleast_1d(np.asarray(xi, dtype=int))
        if xi.shape != (self.n,) or np.any(np.abs(xi) > self.N):
            raise DimensionError(f"frequency {xi.tolist()} not on the lattice")
        return int(np.ravel_multi_index(tuple(xi + self.N), (2 * self.N + 1,) * self.n))

    def check_grid(self, f) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.grid_shape:
            raise DimensionError(f"grid function has shape {f.shape}, lattice expects {self.grid_shape}")
        return f

    def check_coeffs(self, c) -> np.ndarray:
        c = np.asarray(c)
        if c.shape[0] != self.num_freqs:
            raise DimensionError(f"coefficient vector has length {c.shape[0]}, lattice has {self.num_freqs}")
        return c

    def transform(self, f) -> np.ndarray:
        """Periodic Fourier coefficients of a grid function on the retained frequencies."""
        f = self.check_grid(f)
        F = np.fft.fftn(f) / self.num_points
        return F[self._fft_index]

    def inverse(self, coeffs) -> np.ndarray:
        """Evaluate ``sum_xi c(xi) e^{2 pi i x.xi}`` at the grid points."""
        coeffs = self.check_coeffs(coeffs)
        F = np.zeros(self.grid_shape, dtype=complex)
        F[self._fft_index] = coeffs
        return np.fft.ifftn(F) * self.num_points

    def evaluate(self, coeffs, x) -> np.ndarray:
        """Evaluate a trigonometric polynomial at arbitrary points ``x`` of shape ``(k, n)``."""
        coeffs = self.check_coeffs(coeffs)
        x = np.asarray(x, dtype=float).reshape(-1, self.n)
        return np.exp(1j * TWO_PI * (x @ self.freqs.T)) @ coeffs

    def laplace_weights(self, power: float = 1.0) -> np.ndarray:
        """Multiplier ``(1 + 4 pi^2 |xi|^2)^power`` on the retained frequencies."""
        return (1.0 + TWO_PI**2 * np.sum(self.freqs**2, axis=1)) ** power

    def inner(self, f, g, region: "Subdomain | None" = None) -> complex:
        return inner_product(self, f, g, region)


def _interval_overlap(lo, hi, a, b):
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def _periodic_overlap(lo, hi, a, b):
    # overlap of [lo, hi) within [0, 1) against the periodic cell [a, b)
    total = 0.0
    for shift in (-1.0, 0.0, 1.0):
        total = total + _interval_overlap(lo, hi, a + shift, b + shift)
    return total


@dataclass(frozen=True)
class Subdomain:
    """Finite union of pairwise disjoint half-open boxes in ``[0, 1)^n``."""

    boxes: tuple
    n: int = 1

    def __post_init__(self):
        boxes = tuple(tuple((float(lo), float(hi)) for lo, hi in box) for box in self.boxes)
        object.__setattr__(self, "boxes", boxes)
        if not boxes:
            raise InvalidSubdomainError("subdomain has no boxes")
        for box in boxes:
            if len(box) != self.n:
                raise InvalidSubdomainError(f"box {box} does not have {self.n} axes")
            for lo, hi in box:
                if not (0.0 <= lo < hi <= 1.0):
                    raise InvalidSubdomainError(f"interval ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")
        for b1, b2 in itertools.combinations(boxes, 2):
            if all(min(h1, h2) > max(l1, l2) for (l1, h1), (l2, h2) in zip(b1, b2)):
                raise InvalidSubdomainError(f"boxes {b1} and {b2} overlap")

    @classmethod
    def interval(cls, lo, hi):
        return cls(boxes=(((lo, hi),),), n=1)

    @classmethod
    def full(cls, n=1):
        return cls(boxes=(((0.0, 1.0),) * n,), n=n)

    @classmethod
    def ball(cls, center, radius, n=1):
        """Periodic ball of the flat metric; only n=1 (an arc) is a box union."""
        if n != 1:
            raise InvalidSubdomainError("geodesic balls are box unions only on T^1")
        if not 0 < radius < 0.5:
            raise InvalidSubdomainError(f"radius {radius} must lie in (0, 1/2)")
        lo, hi = (center - radius) % 1.0, (center + radius) % 1.0
        if lo < hi:
            return cls.interval(lo, hi)
        boxes = []
        if hi > 0:
            boxes.append(((0.0, hi),))
        if lo < 1:
            boxes.append(((lo, 1.0),))
        return cls(boxes=tuple(boxes), n=1)

    @property
    def measure(self) -> float:
        return float(sum(np.prod([hi - lo for lo, hi in box]) for box in self.boxes))

    @property
    def is_full(self) -> bool:
        return abs(self.measure - 1.0) < 1e-15

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.n)
        inside = np.zeros(len(x), dtype=bool)
        for box in self.boxes:
            ok = np.ones(len(x), dtype=bool)
            for i, (lo, hi) in enumerate(box):
                ok &= (x[:, i] >= lo) & (x[:, i] < hi)
            inside |= ok
        return inside

    def weights(self, lattice: FourierLattice) -> np.ndarray:
        """Per-grid-point mass of the indicator, by exact box/cell overlap."""
        if lattice.n != self.n:
            raise DimensionError("subdomain and lattice dimensions differ")
        P = lattice.points_per_axis
        centers = np.arange(P) / P
        a, b = centers - 0.5 / P, centers + 0.5 / P
        w = np.zeros(lattice.grid_shape)
        for box in self.boxes:
            per_axis = [_periodic_overlap(lo, hi, a, b) for lo, hi in box]
            term = per_axis[0]
            for arr in per_axis[1:]:
                term = np.multiply.outer(term, arr)
            w += term
        return w

    def fourier_coeffs(self, k) -> np.ndarray:
        """Exact ``int_omega e^{-2 pi i k.x} dx`` for integer vectors ``k`` of shape ``(m, n)``."""
        k = np.asarray(k).reshape(-1, self.n)
        out = np.zeros(len(k), dtype=complex)
        for box in self.boxes:
            term = np.ones(len(k), dtype=complex)
            for i, (lo, hi) in enumerate(box):
                ki = k[:, i].astype(float)
                nz = ki != 0
                fac = np.full(len(k), hi - lo, dtype=complex)
                kk = ki[nz]
                fac[nz] = (np.exp(-1j * TWO_PI * kk * lo) - np.exp(-1j * TWO_PI * kk * hi)) / (1j * TWO_PI * kk)
                term *= fac
            out += term
        return out

    def mass_matrix(self, lattice: FourierLattice) -> np.ndarray:
        """Exact Fourier-frame mass matrix ``M[xi, eta] = <1_omega e_eta, e_xi>``."""
        return _cached_mass(self, lattice)

    def _mass_matrix(self, lattice: FourierLattice) -> np.ndarray:
        F = lattice.freqs
        diff = (F[:, None, :] - F[None, :, :]).reshape(-1, self.n)
        return self.fourier_coeffs(diff).reshape(len(F), len(F))

    def gauss_rule(self, lattice: FourierLattice, extra: int = 20):
        """Tensor Gauss-Legendre rule on each box, exact to rounding for lattice band-limited products."""
        pts, wts = [], []
        for box in self.boxes:
            axes = []
            for lo, hi in box:
                q = int(np.ceil(TWO_PI * lattice.N * (hi - lo))) + extra
                x, w = np.polynomial.legendre.leggauss(q)
                axes.append(((x + 1) * 0.5 * (hi - lo) + lo, w * 0.5 * (hi - lo)))
            mesh = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
            wmesh = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
            pts.append(np.stack([m.ravel() for m in mesh], axis=-1))
            wts.append(np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=1))
        return np.concatenate(pts), np.concatenate(wts)

    def sqrt_factor(self, lattice: FourierLattice) -> np.ndarray:
        """Matrix ``Q`` with ``Q^H Q`` equal to ``mass_matrix`` (rows are weighted quadrature nodes)."""
        return _cached_factor(self, lattice)

    def _sqrt_factor(self, lattice: FourierLattice) -> np.ndarray:
        x, w = self.gauss_rule(lattice)
        return np.sqrt(w)[:, None] * np.exp(1j * TWO_PI * (x @ lattice.freqs.T))

    def to_spec(self) -> list:
        return [[list(iv) for iv in box] for box in self.boxes]


@lru_cache(maxsize=16)
def _cached_mass(region: Subdomain, lattice: FourierLattice) -> np.ndarray:
    M = region._mass_matrix(lattice)
    M.setflags(write=False)
    return M


@lru_cache(maxsize=16)
def _cached_factor(region: Subdomain, lattice: FourierLattice) -> np.ndarray:
    Q = region._sqrt_factor(lattice)
    Q.setflags(write=False)
    return Q


def inner_product(lattice: FourierLattice, f, g, region: Subdomain | None = None) -> complex:
    """Quadrature of ``int_region f conj(g)``; ``region=None`` is the whole torus."""
    f = lattice.check_grid(f)
    g = lattice.check_grid(g)
    if region is None:
        w = np.full(lattice.grid_shape, 1.0 / lattice.num_points)
    else:
        if region.measure <= 0:
            raise InvalidSubdomainError("empty region")
        w = region.weights(lattice)
    return complex(np.sum(w * f * np.conj(g)))


@dataclass(frozen=True)
class DilatedTorus:
    """The periodized time interval ``[-(T+eps), T+eps)`` and the spectrum of ``-d^2/dt^2`` on it."""

    T: float
    eps: float
    K: int
    eigenvalues: np.ndarray = field(repr=False, compare=False)

    @property
    def period(self) -> float:
        return 2.0 * (self.T + self.eps)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def eigenvalue(self, k) -> float:
        return (np.pi * k / (self.T + self.eps)) ** 2

    def eigenfunction(self, k, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.pi * k * t / (self.T + self.eps)) / np.sqrt(self.period)


def dilated_eigendata(T: float, eps: float, K: int) -> DilatedTorus:
    if not T > 0:
        raise InvalidHorizonError(f"horizon T must be positive, got {T}")
    if not 0 <= eps < 1:
        raise InvalidHorizonError(f"padding eps must lie in [0, 1), got {eps}")
    if K < 1:
        raise InvalidHorizonError(f"mode cap K must be >= 1, got {K}")
    k = np.arange(-K, K + 1)
    return DilatedTorus(T=T, eps=eps, K=K, eigenvalues=(np.pi * k / (T + eps)) ** 2)
