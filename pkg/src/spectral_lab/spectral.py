"""Elliptic operators on the Fourier frame, their spectral data, projectors and space-time norms."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import DimensionError, NotEllipticError, UnsupportedOrderError
from .lattice import TWO_PI, FourierLattice, Subdomain
from .toroidal import ToroidalSymbol, galerkin_matrix, japanese_bracket

CLUSTER_TOL = 1e-10


@dataclass(frozen=True)
class EllipticOperator:
    """Positive elliptic operator, stored as multiplier values or a Hermitian Fourier-frame matrix."""

    lattice: FourierLattice
    order: float
    multiplier: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)
    floor: float = 0.0
    report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if (self.multiplier is None) == (self.matrix is None):
            raise ValueError("give exactly one of multiplier or matrix")
        if not self.order > 0:
            raise ValueError(f"order must be positive, got {self.order}")
        if self.matrix is not None:
            A = np.asarray(self.matrix)
            if A.shape != (self.lattice.num_freqs,) * 2:
                raise DimensionError(f"matrix shape {A.shape} does not match the lattice")
            if np.linalg.norm(A - A.conj().T) > 1e-12 * max(1.0, np.linalg.norm(A)):
                raise ValueError("operator matrix is not Hermitian")

    @property
    def is_multiplier(self) -> bool:
        return self.multiplier is not None

    def dense(self) -> np.ndarray:
        if self.is_multiplier:
            return np.diag(self.multiplier.astype(complex))
        return self.matrix

    def apply(self, coeffs) -> np.ndarray:
        coeffs = self.lattice.check_coeffs(coeffs)
        if self.is_multiplier:
            return self.multiplier * coeffs
        return self.matrix @ coeffs


def ellipticity_ratio(sym: ToroidalSymbol, radius: float = 1.0) -> float:
    """max/min of |a(x, xi)| / <xi>^order over sampled |xi| >= radius."""
    xi = sym.lattice.freqs
    keep = np.sqrt(np.sum(xi**2, axis=1)) >= radius
    if not keep.any():
        raise NotEllipticError(f"no lattice frequency with |xi| >= {radius}")
    r = np.abs(sym.values[:, keep]) / japanese_bracket(xi[keep])[None, :] ** sym.order
    lo = r.min()
    if lo == 0 or not np.isfinite(r.max()):
        return float("inf")
    return float(r.max() / lo)


def assemble_operator(sym: ToroidalSymbol, radius: float = 1.0) -> EllipticOperator:
    """Build E(x, D) from a positive elliptic symbol.

    x-dependent symbols are Galerkin-assembled and symmetrized; the size of the
    discarded anti-Hermitian part is kept in ``report['defect']``.
    """
    if not sym.order > 0:
        raise NotEllipticError(f"order must be positive, got {sym.order}")
    vals = sym.values
    scale = max(float(np.max(np.abs(vals))), 1.0)
    if np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > 1e-12 * scale:
        raise NotEllipticError("symbol is not real-valued")
    vals = np.real(vals)
    nonzero = np.any(sym.lattice.freqs != 0, axis=1)
    sampled_min = float(vals[:, nonzero].min())
    if sampled_min <= 0:
        where = np.argwhere(vals[:, nonzero] <= 0)[0]
        xi = sym.lattice.freqs[nonzero][where[1]]
        raise NotEllipticError(f"symbol is not strictly positive: a = {sampled_min:g} at xi = {xi.tolist()}")
    if vals[:, ~nonzero].min() < 0:
        raise NotEllipticError("symbol is negative at xi = 0")
    ratio = ellipticity_ratio(sym, radius)
    if not np.isfinite(ratio):
        raise NotEllipticError("ellipticity ratio is infinite")
    report = {"ellipticity_ratio": ratio, "sampled_min": sampled_min, "defect": 0.0}
    if sym.is_multiplier:
        mult = vals[0].astype(float)
        report["min_eigenvalue"] = float(mult.min())
        return EllipticOperator(sym.lattice, sym.order, multiplier=mult, floor=float(max(mult.min(), 0.0)), report=report)
    A = galerkin_matrix(sym.with_order(sym.order))
    H = 0.5 * (A + A.conj().T)
    report["defect"] = float(np.linalg.norm(A - H, 2))
    lowest = float(np.linalg.eigvalsh(H)[0])
    report["min_eigenvalue"] = lowest
    floor = max(lowest, 0.0)
    return EllipticOperator(sym.lattice, sym.order, matrix=H, floor=floor, report=report)


def laplacian_symbol(lattice: FourierLattice, shift: float = 1.0, order: float = 2.0) -> ToroidalSymbol:
    """Multiplier (shift + 4 pi^2 |xi|^2)^(order/2); order 2 is -Delta + shift."""
    vals = (shift + TWO_PI**2 * np.sum(lattice.freqs**2, axis=1)) ** (order / 2.0)
    return ToroidalSymbol.multiplier(lattice, vals, order=order)


def variable_symbol(lattice: FourierLattice, amplitude: float = 2.0, shift: float = 1.0, order: float = 2.0) -> ToroidalSymbol:
    """(amplitude + cos 2 pi x_1)(shift + 4 pi^2 |xi|^2)^(order/2)."""

    def fn(x, xi):
        return (amplitude + np.cos(TWO_PI * x[..., 0])) * (shift + TWO_PI**2 * np.sum(xi**2, axis=-1)) ** (order / 2.0)

    return ToroidalSymbol.from_callable(lattice, fn, order=order)


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs with lambda_j <= lam_max, ascending, eigenvectors as Fourier-frame columns."""

    lattice: FourierLattice
    order: float
    mu: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    lam_max: float = np.inf
    floor: float = 0.0
    next_mu: float = np.inf
    truncated: bool = False
    is_multiplier: bool = False

    @property
    def lam(self) -> np.ndarray:
        return np.clip(self.mu, 0.0, None) ** (1.0 / self.order)

    @property
    def size(self) -> int:
        return len(self.mu)

    def select(self, lam: float) -> np.ndarray:
        """Indices of modes with lambda_j <= lam."""
        return np.flatnonzero(self.lam <= lam * (1 + 1e-12))

    def restrict(self, lam: float) -> "SpectralBasis":
        idx = self.select(lam)
        nxt = self.mu[idx[-1] + 1] if len(idx) < self.size else self.next_mu
        return replace(self, mu=self.mu[idx], vectors=self.vectors[:, idx], labels=self.labels[idx],
                       lam_max=min(lam, self.lam_max), next_mu=float(nxt))

    def first(self, m: int) -> "SpectralBasis":
        """The m lowest modes (ties resolved by the stored order)."""
        if not 1 <= m <= self.size:
            raise ValueError(f"basis has {self.size} modes, asked for {m}")
        nxt = self.mu[m] if m < self.size else self.next_mu
        return replace(self, mu=self.mu[:m], vectors=self.vectors[:, :m], labels=self.labels[:m],
                       lam_max=float(self.lam[m - 1]), next_mu=float(nxt))

    def to_fourier(self, modal) -> np.ndarray:
        return self.vectors @ np.asarray(modal)

    def to_modal(self, fourier) -> np.ndarray:
        return self.vectors.conj().T @ np.asarray(fourier)

    def grid_function(self, modal) -> np.ndarray:
        return self.lattice.inverse(self.to_fourier(modal))

    def modal_of_grid(self, f) -> np.ndarray:
        return self.to_modal(self.lattice.transform(f))

    def mode(self, j: int) -> np.ndarray:
        return self.lattice.inverse(self.vectors[:, j])

    def mass_matrix(self, region: Subdomain) -> np.ndarray:
        """``M[j, k] = <1_omega rho_k, rho_j>`` on the retained modes."""
        V = self.vectors
        return V.conj().T @ region.mass_matrix(self.lattice) @ V

    def sqrt_factor(self, region: Subdomain, idx=None) -> np.ndarray:
        """``B`` with ``B^H B = mass_matrix(region)`` restricted to the columns ``idx``."""
        V = self.vectors if idx is None else self.vectors[:, idx]
        return region.sqrt_factor(self.lattice) @ V

    def gram(self) -> np.ndarray:
        return self.vectors.conj().T @ self.vectors

    def residuals(self, op: EllipticOperator) -> np.ndarray:
        V = self.vectors
        AV = op.multiplier[:, None] * V if op.is_multiplier else op.matrix @ V
        return np.linalg.norm(AV - V * self.mu[None, :], axis=0)


def _canonical_cluster(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic basis of span(V).

    Coordinate vectors are projected onto the span strongest-first and
    orthonormalized; the result is ordered by lattice index.
    """
    k = V.shape[1]
    P = V @ V.conj().T
    basis, picks = [], []
    for i in np.argsort(-np.sum(np.abs(V) ** 2, axis=1), kind="stable"):
        v = P[:, i].copy()
        for b in basis:
            v -= b * np.vdot(b, v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis.append(v / nv)
            picks.append(i)
        if len(basis) == k:
            break
    order = np.argsort(picks, kind="stable")
    return np.stack([basis[i] for i in order], axis=1), np.array(picks)[order]


def _fix_phase(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        i = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())[0]
        V[:, j] = col * (np.abs(col[i]) / col[i])
    return V


def eigendata(op: EllipticOperator, lam_max: float) -> SpectralBasis:
    """All modes with lambda_j <= lam_max, ascending, ties broken by lattice frequency order."""
    if not lam_max > 0:
        raise ValueError(f"lam_max must be positive, got {lam_max}")
    lat = op.lattice
    if op.is_multiplier:
        mu_all = op.multiplier.astype(float)
        perm = np.lexsort((np.arange(lat.num_freqs), mu_all))
        mu_all = mu_all[perm]
        V_all = np.eye(lat.num_freqs, dtype=complex)[:, perm]
        labels = perm
    else:
        mu_all, V_all = np.linalg.eigh(op.matrix)
        labels = np.empty(len(mu_all), dtype=int)
        start = 0
        while start < len(mu_all):
            stop = start + 1
            while stop < len(mu_all) and mu_all[stop] - mu_all[stop - 1] <= CLUSTER_TOL * (1 + abs(mu_all[stop])):
                stop += 1
            Vc, picks = _canonical_cluster(V_all[:, start:stop])
            V_all[:, start:stop] = Vc
            labels[start:stop] = picks
            if stop - start > 1:
                mu_all[start:stop] = np.real(np.einsum("ij,ij->j", Vc.conj(), op.matrix @ Vc))
            start = stop
        V_all = _fix_phase(V_all)
    if mu_all[0] < 0:
        warnings.warn(f"clamping negative eigenvalue {mu_all[0]:.3e} to zero", RuntimeWarning, stacklevel=2)
        mu_all = np.where(mu_all < 0, 0.0, mu_all)
    lam_all = mu_all ** (1.0 / op.order)
    keep = lam_all <= lam_max * (1 + 1e-12)
    m = int(keep.sum())
    truncated = lam_max**op.order > 0.5 * mu_all[-1]
    if truncated:
        warnings.warn(
            f"lam_max^nu = {lam_max**op.order:.3g} exceeds half the largest eigenvalue {mu_all[-1]:.3g}; "
            "increase the lattice cutoff", RuntimeWarning, stacklevel=2)
    return SpectralBasis(
        lattice=lat, order=op.order, mu=mu_all[:m].copy(), vectors=V_all[:, :m].copy(), labels=labels[:m].copy(),
        lam_max=float(lam_max), floor=op.floor, next_mu=float(mu_all[m]) if m < len(mu_all) else np.inf,
        truncated=bool(truncated), is_multiplier=op.is_multiplier,
    )


def project(basis: SpectralBasis, lam: float, f) -> np.ndarray:
    """E_lam f = sum over lambda_j <= lam of (f, rho_j) rho_j, on the grid."""
    idx = basis.select(lam)
    coeffs = basis.modal_of_grid(f)
    keep = np.zeros(basis.size)
    keep[idx] = 1.0
    return basis.grid_function(coeffs * keep)


def shift_to_positive(obj, c: float):
    """E + c for an operator (or the matching basis): mu -> mu + c, eigenvectors unchanged."""
    if not c > 0:
        raise ValueError(f"shift must be positive, got {c}")
    if isinstance(obj, EllipticOperator):
        if obj.is_multiplier:
            return replace(obj, multiplier=obj.multiplier + c, floor=obj.floor + c)
        return replace(obj, matrix=obj.matrix + c * np.eye(len(obj.matrix)), floor=obj.floor + c)
    if isinstance(obj, SpectralBasis):
        return replace(obj, mu=obj.mu + c, floor=obj.floor + c, next_mu=obj.next_mu + c,
                       lam_max=float((obj.lam_max**obj.order + c) ** (1.0 / obj.order)))
    raise TypeError(f"cannot shift {type(obj).__name__}")


@dataclass(frozen=True)
class SpaceTimeField:
    """f(x, t) = sum_j c_j(t) rho_j(x) on [t0, t1].

    ``modal(t, k)`` returns the k-th time derivative of the coefficients with
    shape ``(m, len(t))``. ``lam`` holds lambda_j for each column of ``vectors``.
    """

    lattice: FourierLattice
    vectors: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    modal: Callable = field(repr=False)
    t0: float = 0.0
    t1: float = 1.0
    breakpoints: tuple = ()
    min_panels: int = 64

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError(f"time interval must be increasing, got [{self.t0}, {self.t1}]")

    def on(self, t0: float, t1: float) -> "SpaceTimeField":
        return replace(self, t0=t0, t1=t1)

    def pieces(self) -> list:
        cuts = sorted({self.t0, self.t1, *[b for b in self.breakpoints if self.t0 < b < self.t1]})
        return list(zip(cuts[:-1], cuts[1:]))

    def coefficients(self, t, k: int = 0) -> np.ndarray:
        return self.modal(np.atleast_1d(np.asarray(t, dtype=float)), k)

    def evaluate(self, t, k: int = 0) -> np.ndarray:
        """Grid values, shape ``(len(t),) + grid_shape``."""
        F = self.vectors @ self.coefficients(t, k)
        return np.stack([self.lattice.inverse(F[:, i]) for i in range(F.shape[1])])


def adaptive_simpson(integrand: Callable, pieces, min_panels: int = 64, tol: float = 1e-9, max_panels: int = 1 << 16) -> float:
    """Composite Simpson on each piece, doubling panels until successive totals agree to ``tol``."""
    panels = max(min_panels, 2)
    prev = None
    while True:
        total = 0.0
        for a, b in pieces:
            t = np.linspace(a, b, panels + 1)
            total += simpson(integrand(t), x=t)
        if prev is not None and abs(total - prev) <= tol * max(1.0, abs(total)):
            return float(total)
        if panels >= max_panels:
            warnings.warn(f"Simpson refinement stopped at {panels} panels (change {abs(total - prev):.2e})",
                          RuntimeWarning, stacklevel=2)
            return float(total)
        prev = total
        panels *= 2


def _sobolev_integrand(fld: SpaceTimeField, s: int) -> Callable:
    freq_weight = 1.0 + TWO_PI**2 * np.sum(fld.lattice.freqs**2, axis=1)
    V = fld.vectors

    def integrand(t):
        val = np.zeros(len(t))
        c0 = fld.modal(t, 0)
        F = V @ c0
        for j in range(s + 1):
            val += np.sum(np.abs(fld.modal(t, j)) ** 2, axis=0)
            val += np.sum((freq_weight**j)[:, None] * np.abs(F) ** 2, axis=0)
        return val

    return integrand


def sobolev_norm(fld: SpaceTimeField, s: int, tol: float = 1e-9) -> float:
    """H^s(M x (t0, t1)) norm: sum over j <= s of the time-derivative and (1 - Delta)^(j/2) energies."""
    if s not in (0, 1, 2):
        raise UnsupportedOrderError(f"Sobolev order {s} not supported (use 0, 1 or 2)")
    total = adaptive_simpson(_sobolev_integrand(fld, s), fld.pieces(), fld.min_panels, tol)
    return float(np.sqrt(max(total, 0.0)))


def constant_field(basis: SpectralBasis, modal, t0: float, t1: float) -> SpaceTimeField:
    """Time-independent field with fixed modal coefficients."""
    c = np.asarray(modal, dtype=complex)

    def modal_fn(t, k):
        if k == 0:
            return np.repeat(c[:, None], len(t), axis=1)
        return np.zeros((len(c), len(t)), dtype=complex)

    return SpaceTimeField(basis.lattice, basis.vectors, basis.lam, modal_fn, t0, t1)


def write_basis(path, basis: SpectralBasis) -> None:
    """Columnar text: ``j mu lambda re_0 im_0 re_1 im_1 ...`` per mode."""
    lat = basis.lattice
    lines = [f"# {lat.n} {lat.N} {basis.order!r} {basis.lam_max!r} {basis.floor!r} {basis.next_mu!r} "
             f"{int(basis.truncated)} {int(basis.is_multiplier)}"]
    for j in range(basis.size):
        v = basis.vectors[:, j]
        parts = [str(j), f"{basis.mu[j]:.17g}", f"{basis.lam[j]:.17g}", str(int(basis.labels[j]))]
        parts += [f"{x:.17g}" for pair in zip(v.real, v.imag) for x in pair]
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_basis(path) -> SpectralBasis:
    text = Path(path).read_text().splitlines()
    h = text[0].lstrip("#").split()
    lat = FourierLattice(int(h[0]), int(h[1]))
    rows = np.loadtxt(text[1:], ndmin=2) if len(text) > 1 else np.zeros((0, 4 + 2 * lat.num_freqs))
    vec = rows[:, 4::2] + 1j * rows[:, 5::2]
    return SpectralBasis(
        lattice=lat, order=float(h[2]), mu=rows[:, 1].copy(), vectors=vec.T.copy(), labels=rows[:, 3].astype(int),
        lam_max=float(h[3]), floor=float(h[4]), next_mu=float(h[5]), truncated=bool(int(h[6])),
        is_multiplier=bool(int(h[7])),
    )
