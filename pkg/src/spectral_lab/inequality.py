"""Spectral-inequality measurements: observability constants, the sinh extension F,
interpolation ratios, the odd-extension symmetry identity and doubling ratios."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionGuardError, FitError, IllConditionedSensorError, InsufficientCutoffError, RescalingError
from .lattice import TWO_PI, Subdomain
from .psi import PsiFunction
from .spectral import SpaceTimeField, SpectralBasis, adaptive_simpson, sobolev_norm

FACTOR_GUARD = 1e-14
OVERFLOW_LIMIT = 700.0


@dataclass(frozen=True)
class WavePacket:
    """kappa = sum over lambda_j <= cutoff of a_j rho_j."""

    basis: SpectralBasis = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    cutoff: float = np.inf

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        idx = self.basis.select(self.cutoff)
        if c.shape != (len(idx),):
            raise ValueError(f"packet needs {len(idx)} coefficients below lambda = {self.cutoff}, got {c.shape}")
        if not np.all(np.isfinite(c)) or not np.any(c != 0):
            raise ValueError("packet coefficients must be finite and not all zero")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def random(cls, basis: SpectralBasis, cutoff: float, rng: np.random.Generator, normalize: bool = True):
        m = len(basis.select(cutoff))
        c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        if normalize:
            c /= np.linalg.norm(c)
        return cls(basis, c, cutoff)

    @property
    def indices(self) -> np.ndarray:
        return self.basis.select(self.cutoff)

    @property
    def lam(self) -> np.ndarray:
        return self.basis.lam[self.indices]

    @property
    def vectors(self) -> np.ndarray:
        return self.basis.vectors[:, self.indices]

    def fourier(self) -> np.ndarray:
        return self.vectors @ self.coeffs

    def grid(self) -> np.ndarray:
        return self.basis.lattice.inverse(self.fourier())

    def evaluate(self, x) -> np.ndarray:
        return self.basis.lattice.evaluate(self.fourier(), x)

    def norm(self, region: Subdomain | None = None) -> float:
        if region is None:
            return float(np.linalg.norm(self.fourier()))
        B = region.sqrt_factor(self.basis.lattice) @ self.vectors
        return float(np.linalg.norm(B @ self.coeffs))


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    i = np.flatnonzero(np.abs(v) > 1e-8 * np.abs(v).max())[0]
    return v * (np.abs(v[i]) / v[i])


@dataclass(frozen=True)
class ObservabilityValue:
    """C = sup ||kappa|| / ||kappa||_omega, with sigma_min of the omega-mass matrix."""

    value: float
    sigma_min: float
    factor_sigma_min: float
    packet: WavePacket = field(repr=False)

    def __float__(self):
        return self.value


def observability_constant(basis: SpectralBasis, region: Subdomain, lam: float) -> ObservabilityValue:
    """1/sqrt(sigma_min(G)), G_jk = <1_omega rho_j, rho_k> over lambda_j <= lam.

    Computed from the singular values of the square-root factor B (G = B^H B),
    which resolves sigma_min(G) down to ~1e-30.
    """
    idx = basis.select(lam)
    if len(idx) == 0:
        raise InsufficientCutoffError(f"no mode with lambda_j <= {lam}")
    B = region.sqrt_factor(basis.lattice) @ basis.vectors[:, idx]
    _, s, Vh = np.linalg.svd(B, full_matrices=False)
    smin = float(s[-1])
    if smin < FACTOR_GUARD:
        raise IllConditionedSensorError(
            f"sensor factor sigma_min = {smin:.3e} < {FACTOR_GUARD:g}: omega is too small for lambda = {lam}")
    # ties: choose the lexicographically largest phase-fixed candidate
    cands = [_phase_normalize(Vh[i].conj()) for i in range(len(s)) if s[i] - smin <= 1e-10]
    best = max(cands, key=lambda v: tuple(np.round(np.concatenate([v.real, v.imag]), 12)))
    value = max(1.0 / smin, 1.0)
    return ObservabilityValue(value, smin * smin, smin, WavePacket(basis, best, lam))


@dataclass(frozen=True)
class ExponentialFit:
    C1: float
    C2: float
    r2: float


def fit_exponential(lams, values) -> ExponentialFit:
    """Least squares of log(values) = log C1 + C2 * lambda."""
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(lams) < 3 or len(lams) != len(values):
        raise FitError("need at least three (lambda, value) pairs")
    if np.ptp(lams) == 0:
        raise FitError("degenerate grid: all lambda values are equal")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise FitError("values must be positive and finite")
    y = np.log(values)
    slope, intercept = np.polyfit(lams, y, 1)
    resid = y - (intercept + slope * lams)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(resid @ resid) / ss_tot)
    return ExponentialFit(float(np.exp(intercept)), float(slope), r2)


@dataclass(frozen=True)
class ObservabilityReport:
    lams: np.ndarray
    C: np.ndarray
    sigma_min: np.ndarray
    fit: ExponentialFit | None

    def table(self):
        return ["lambda", "C", "sigma_min"], [[float(a), float(b), float(c)] for a, b, c in zip(self.lams, self.C, self.sigma_min)]

    def summary(self) -> dict:
        if self.fit is None:
            return {"C1": None, "C2": None, "r2": None}
        return {"C1": self.fit.C1, "C2": self.fit.C2, "r2": self.fit.r2}


def observability_report(basis: SpectralBasis, region: Subdomain, lams) -> ObservabilityReport:
    lams = np.asarray(lams, dtype=float)
    vals = [observability_constant(basis, region, lam) for lam in lams]
    C = np.array([v.value for v in vals])
    smin = np.array([v.sigma_min for v in vals])
    fit = fit_exponential(lams, C) if len(lams) >= 3 and np.ptp(lams) > 0 else None
    return ObservabilityReport(lams, C, smin, fit)


def _sinh_modal(lam: np.ndarray, a: np.ndarray, t: np.ndarray, k: int) -> np.ndarray:
    """k-th t-derivative of a_j sinh(lambda_j t)/lambda_j, with the lambda = 0 limit t."""
    out = np.zeros((len(lam), len(t)), dtype=complex)
    zero = lam == 0
    lt = np.outer(lam[~zero], t)
    base = np.cosh(lt) if k % 2 else np.sinh(lt)
    out[~zero] = (lam[~zero] ** (k - 1))[:, None] * base * a[~zero, None]
    if zero.any():
        prof = t if k == 0 else (np.ones_like(t) if k == 1 else np.zeros_like(t))
        out[zero] = a[zero, None] * prof[None, :]
    return out


def build_F(packet: WavePacket, T: float, t_end: float | None = None, min_panels: int = 64) -> SpaceTimeField:
    """F(x, t) = sum sinh(lambda_j t)/lambda_j a_j rho_j(x) on [0, T] (or up to ``t_end``)."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    t_end = T if t_end is None else t_end
    lam = packet.lam
    if lam.max() * t_end > OVERFLOW_LIMIT:
        raise RescalingError(
            f"lambda * t = {lam.max() * t_end:.1f} exceeds {OVERFLOW_LIMIT:g}; "
            "shorten the horizon or lower the packet cutoff (sinh overflows)")
    a = packet.coeffs

    def modal(t, k):
        return _sinh_modal(lam, a, np.asarray(t, dtype=float), k)

    return SpaceTimeField(packet.basis.lattice, packet.vectors, lam, modal, 0.0, t_end, (T,), min_panels)


@dataclass(frozen=True)
class InterpolationParts:
    inner: float
    full: float
    omega: float

    def ratio(self, kappa_exp: float) -> float:
        return self.inner / (self.full**kappa_exp * self.omega ** (1.0 - kappa_exp))


def interpolation_parts(packet: WavePacket, region: Subdomain, T: float, alpha: float,
                        min_panels: int = 64) -> InterpolationParts:
    if not 0 < alpha < T / 2:
        raise ValueError(f"need 0 < alpha < T/2, got alpha={alpha}, T={T}")
    omega = packet.norm(region)
    if omega <= FACTOR_GUARD:
        raise DivisionGuardError(f"packet vanishes on omega (norm {omega:.3e})")
    F = build_F(packet, T, min_panels=min_panels)
    inner = sobolev_norm(F.on(alpha, T - alpha), 1)
    full = sobolev_norm(F, 1)
    return InterpolationParts(inner, full, omega)


def interpolation_ratio(packet: WavePacket, region: Subdomain, T: float, alpha: float, kappa_exp: float,
                        min_panels: int = 64) -> float:
    """||F||_{H^1(M x (alpha, T - alpha))} / (||F||_{H^1(M_T)}^k ||kappa||_{L^2(omega)}^(1-k))."""
    if not 0 < kappa_exp < 1:
        raise ValueError(f"exponent must lie in (0, 1), got {kappa_exp}")
    return interpolation_parts(packet, region, T, alpha, min_panels).ratio(kappa_exp)


DEFAULT_KAPPA_GRID = tuple(np.round(np.arange(1, 20) * 0.05, 10))


@dataclass(frozen=True)
class InterpolationSearch:
    kappa_grid: np.ndarray
    max_ratio: np.ndarray
    best_kappa: float
    best_ratio: float

    def table(self):
        return ["kappa", "max_ratio"], [[float(k), float(r)] for k, r in zip(self.kappa_grid, self.max_ratio)]

    def summary(self) -> dict:
        return {"best_kappa": self.best_kappa, "best_ratio": self.best_ratio}


def interpolation_search(packets, region: Subdomain, T: float, alpha: float, kappa_grid=DEFAULT_KAPPA_GRID,
                         min_panels: int = 64) -> InterpolationSearch:
    """Exponent minimizing the worst ratio over ``packets`` (a packet or a list of them)."""
    if isinstance(packets, WavePacket):
        packets = [packets]
    parts = [interpolation_parts(p, region, T, alpha, min_panels) for p in packets]
    grid = np.asarray(kappa_grid, dtype=float)
    worst = np.array([max(pt.ratio(k) for pt in parts) for k in grid])
    i = int(np.argmin(worst))
    return InterpolationSearch(grid, worst, float(grid[i]), float(worst[i]))


def psi_times_F(packet: WavePacket, psi: PsiFunction, normalized: bool = True, min_panels: int = 64) -> SpaceTimeField:
    """phi = psi F on [0, T + eps]; divided by psi(0) when ``normalized`` (psi(0) can be ~1e-200)."""
    F = build_F(packet, psi.T, t_end=psi.end, min_panels=min_panels)
    scale = 1.0 / psi.psi0 if normalized else 1.0
    binom = ((1,), (1, 1), (1, 2, 1), (1, 3, 3, 1), (1, 4, 6, 4, 1))

    def modal(t, k):
        d = psi.derivatives(np.clip(t, 0.0, psi.end), extend=True) * scale
        return sum(binom[k][i] * d[i][None, :] * F.modal(t, k - i) for i in range(k + 1))

    return SpaceTimeField(F.lattice, F.vectors, F.lam, modal, 0.0, psi.end,
                          (psi.T, psi.T + psi.a), min_panels)


def _extend(fld: SpaceTimeField, parity: int | None) -> SpaceTimeField:
    L = fld.t1

    def modal(t, k):
        t = np.asarray(t, dtype=float)
        out = fld.modal(np.abs(t), k)
        neg = t < 0
        if parity is None:
            out[:, neg] = 0.0
        else:
            sign = parity * (-1) ** k
            out[:, neg] *= sign
        return out

    bps = tuple(sorted({0.0, *fld.breakpoints, *(-b for b in fld.breakpoints)}))
    return SpaceTimeField(fld.lattice, fld.vectors, fld.lam, modal, -L, L, bps, fld.min_panels)


def odd_extension(fld: SpaceTimeField) -> SpaceTimeField:
    """phi(-t) = -phi(t) on [-(t1), t1] for a field given on [0, t1]."""
    return _extend(fld, -1)


def even_extension(fld: SpaceTimeField) -> SpaceTimeField:
    return _extend(fld, 1)


def zero_extension(fld: SpaceTimeField) -> SpaceTimeField:
    return _extend(fld, None)


@dataclass(frozen=True)
class SymmetryReport:
    lhs: float
    rhs: float
    rel_error: float
    parity_defect: float
    holds: bool


def _operator_energy(fld: SpaceTimeField):
    lam2 = fld.lam**2

    def integrand(t):
        v = -fld.modal(t, 2) + lam2[:, None] * fld.modal(t, 0)
        return np.sum(np.abs(v) ** 2, axis=0)

    return integrand


def symmetry_check(fld: SpaceTimeField, tol: float = 1e-8, samples: int = 257) -> SymmetryReport:
    """Compare ||(-d_t^2 + E^(2/nu)) phi||^2 over the full period with twice the half-period value.

    The field must live on a symmetric interval [-L, L]. ``parity_defect`` is
    max |phi(-t) + phi(t)| / max |phi| on sampled t; a non-odd field gets
    ``holds = False`` through it even where the factor-two identity survives.
    """
    L = fld.t1
    if abs(fld.t0 + L) > 1e-12 * max(1.0, L):
        raise ValueError("symmetry check needs a field on a symmetric interval [-L, L]")
    integrand = _operator_energy(fld)
    full_pieces = fld.pieces()
    half_pieces = [(a, b) for a, b in full_pieces if a >= 0]
    lhs = adaptive_simpson(integrand, full_pieces, fld.min_panels, tol=1e-12)
    rhs = 2.0 * adaptive_simpson(integrand, half_pieces, fld.min_panels, tol=1e-12)
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny)
    t = np.linspace(0.0, L, samples)[1:]
    pos, neg = fld.modal(t, 0), fld.modal(-t, 0)
    scale = max(float(np.max(np.abs(pos))), np.finfo(float).tiny)
    defect = float(np.max(np.abs(pos + neg)) / scale)
    return SymmetryReport(float(lhs), float(rhs), float(rel), defect, bool(rel <= tol and defect <= tol))


def _ball_points(center, radius: float, h: float) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    n = len(center)
    m = int(np.ceil(2 * radius / h)) + 1
    axis = np.linspace(-radius, radius, m)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    off = np.stack([g.ravel() for g in mesh], axis=-1)
    if n > 1:
        off = off[np.sum(off**2, axis=1) <= radius**2 * (1 + 1e-12)]
    return center[None, :] + off


def doubling_ratio(packet: WavePacket, center, radius: float, oversample: int = 16) -> float:
    """sup_{B(x0, 2R)} |kappa| / sup_{B(x0, R)} |kappa| on a grid with ``oversample`` points per period of the top mode."""
    if not 0 < radius < 0.25:
        raise ValueError(f"radius must lie in (0, 1/4), got {radius}")
    lat = packet.basis.lattice
    fhat = packet.fourier()
    nz = np.abs(fhat) > 1e-14 * np.abs(fhat).max()
    K = int(np.max(np.abs(lat.freqs[nz]))) if nz.any() else 0
    h = 1.0 / (oversample * (2 * K + 1))
    xs_small = _ball_points(center, radius, h)
    xs_big = _ball_points(center, 2 * radius, h)
    phase = lambda x: np.exp(1j * TWO_PI * (x @ lat.freqs[nz].T))
    small = float(np.max(np.abs(phase(xs_small) @ fhat[nz])))
    big = float(np.max(np.abs(phase(xs_big) @ fhat[nz])))
    if small <= 1e-14:
        raise DivisionGuardError(f"packet vanishes on B(x0, R) (sup {small:.3e})")
    return max(big, small) / small


def l2_doubling_packet(basis: SpectralBasis, center: float, radius: float, lam: float) -> WavePacket:
    """Packet maximizing ||kappa||_{B(2R)} / ||kappa||_{B(R)} (one-dimensional tori)."""
    idx = basis.select(lam)
    if len(idx) == 0:
        raise InsufficientCutoffError(f"no mode with lambda_j <= {lam}")
    V = basis.vectors[:, idx]
    Q1 = Subdomain.ball(center, radius).sqrt_factor(basis.lattice) @ V
    Q2 = Subdomain.ball(center, 2 * radius).sqrt_factor(basis.lattice) @ V
    _, R1 = np.linalg.qr(Q1)
    X = np.linalg.solve(R1.T, Q2.T).T
    _, _, Vh = np.linalg.svd(X)
    v = np.linalg.solve(R1, Vh[0].conj())
    return WavePacket(basis, _phase_normalize(v / np.linalg.norm(v)), lam)


@dataclass(frozen=True)
class DoublingReport:
    center: float
    radius: float
    lams: np.ndarray
    ratios: np.ndarray
    fit: ExponentialFit | None

    def table(self):
        return ["lambda", "ratio"], [[float(a), float(b)] for a, b in zip(self.lams, self.ratios)]

    def summary(self) -> dict:
        out = {"center": self.center, "radius": self.radius}
        if self.fit is not None:
            out.update(slope=self.fit.C2, intercept=float(np.log(self.fit.C1)), r2=self.fit.r2)
        return out


def doubling_report(basis: SpectralBasis, center: float, radius: float, lams, rng: np.random.Generator | None = None,
                    random_packets: int = 8) -> DoublingReport:
    """Worst doubling ratio per lambda over the L2-extremal packet and seeded random packets."""
    rng = np.random.default_rng(0) if rng is None else rng
    lams = np.asarray(lams, dtype=float)
    ratios = []
    for lam in lams:
        packets = [l2_doubling_packet(basis, center, radius, lam)]
        packets += [WavePacket.random(basis, lam, rng) for _ in range(random_packets)]
        ratios.append(max(doubling_ratio(p, center, radius) for p in packets))
    ratios = np.array(ratios)
    fit = fit_exponential(lams, ratios) if len(lams) >= 3 and np.ptp(lams) > 0 else None
    return DoublingReport(float(center), float(radius), lams, ratios, fit)
