"""Complex powers by spectral decomposition and by contour integration, resolvents,
parameter-ellipticity sweeps and the product-operator bounds on M x T_{T,eps}."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContourCollisionError,
    DivisionGuardError,
    SingularPowerError,
    SingularResolventError,
    TruncationError,
)
from .lattice import TWO_PI, DilatedTorus, dilated_eigendata
from .quadrature import tanh_sinh
from .spectral import EllipticOperator, SpectralBasis
from .toroidal import ToroidalSymbol

KERNEL_TOL = 1e-12


def _hermitian_data(obj):
    """(matrix, eigenvalues, eigenvectors) for a Hermitian matrix, operator or spectral basis."""
    if isinstance(obj, SpectralBasis):
        return obj.vectors @ np.diag(obj.mu) @ obj.vectors.conj().T, obj.mu, obj.vectors
    if isinstance(obj, EllipticOperator):
        A = obj.dense()
    else:
        A = np.asarray(obj)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        if np.linalg.norm(A - A.conj().T) > 1e-10 * max(1.0, np.linalg.norm(A)):
            raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh(A)
    return A, w, V


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, SpectralBasis):
        return obj.vectors @ np.diag(obj.mu) @ obj.vectors.conj().T
    if isinstance(obj, EllipticOperator):
        return obj.dense()
    return np.asarray(obj)


@dataclass(frozen=True)
class PowerOperator:
    """A^z with its kernel projector (A^0 = I - P0)."""

    z: complex
    matrix: np.ndarray = field(repr=False)
    kernel_projector: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray | None = field(default=None, repr=False)

    def __matmul__(self, other):
        other = other.matrix if isinstance(other, PowerOperator) else other
        return self.matrix @ other


def _kernel_mask(w: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(w))), 1.0) if len(w) else 1.0
    return np.abs(w) <= KERNEL_TOL * scale


def spectral_power(obj, z: complex) -> PowerOperator:
    """A^z = sum mu_j^z rho_j rho_j^* with the principal branch; kernel modes map to zero."""
    _, w, V = _hermitian_data(obj)
    ker = _kernel_mask(w)
    if ker.any() and np.real(z) < 0:
        raise SingularPowerError(f"operator has a zero eigenvalue and Re(z) = {np.real(z)} < 0")
    if np.any(w[~ker] < 0):
        raise SingularPowerError("operator has negative eigenvalues; powers need a nonnegative spectrum")
    vals = np.zeros(len(w), dtype=complex)
    vals[~ker] = np.power(w[~ker].astype(complex), z)
    M = (V * vals[None, :]) @ V.conj().T
    P0 = V[:, ker] @ V[:, ker].conj().T
    if np.imag(z) == 0:
        M = 0.5 * (M + M.conj().T)
    return PowerOperator(complex(z), M, P0, vals)


@dataclass(frozen=True)
class ContourSpec:
    """Boundary of {|lambda - v| < R} minus the wedge |arg(lambda - v) - pi| < aperture.

    The vertex v sits strictly between the kernel and the smallest positive
    eigenvalue; the rays leave it at arg = pi -/+ aperture.
    """

    vertex: float
    aperture: float = np.pi / 4
    radius: float = 0.0
    nodes: int = 400

    def __post_init__(self):
        if not self.vertex > 0:
            raise ValueError(f"vertex must be positive, got {self.vertex}")
        if not 0 < self.aperture < np.pi / 2:
            raise ValueError(f"aperture must lie in (0, pi/2), got {self.aperture}")
        if self.nodes < 10 or self.nodes % 2:
            raise ValueError(f"node count must be even and >= 10, got {self.nodes}")

    @classmethod
    def for_spectrum(cls, eigenvalues, nodes: int = 400, aperture: float = np.pi / 4, radius_factor: float = 100.0):
        w = np.asarray(eigenvalues, dtype=float)
        pos = w[~_kernel_mask(w)]
        if len(pos) == 0:
            raise ContourCollisionError("spectrum has no positive eigenvalue")
        return cls(vertex=0.5 * pos.min(), aperture=aperture, radius=radius_factor * pos.max(), nodes=nodes)

    def distance_to(self, w) -> np.ndarray:
        """Distance from real points ``w`` to the contour."""
        w = np.asarray(w, dtype=float)
        v, R = self.vertex, self.radius
        theta = np.pi - self.aperture
        d = w - v
        # rays: closest point is the vertex unless w projects onto the ray
        proj = d * np.cos(theta)
        ray = np.where(proj > 0, np.abs(d) * np.sin(theta), np.abs(d))
        ray = np.where(proj > R, np.hypot(d - R * np.cos(theta), R * np.sin(theta)), ray)
        arc = np.abs(R - np.abs(d))
        return np.minimum(ray, arc)

    def nodes_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Counterclockwise quadrature nodes and complex weights d(lambda)."""
        v, R = self.vertex, self.radius
        theta = np.pi - self.aperture
        n_ray = int(0.4 * self.nodes)
        n_arc = self.nodes - 2 * n_ray
        s, ws = tanh_sinh(n_ray)
        r0 = v
        log_span = np.log1p(R / r0)
        r = r0 * np.expm1(s * log_span)
        dr = r0 * np.exp(s * log_span) * log_span * ws
        up, down = np.exp(1j * theta), np.exp(-1j * theta)
        # in along the upper ray, out along the lower ray, back through the right half-plane
        z_in, w_in = v + r[::-1] * up, -(dr[::-1]) * up
        z_out, w_out = v + r * down, dr * down
        sa, wa = tanh_sinh(n_arc)
        ang = -theta + 2 * theta * sa
        z_arc = v + R * np.exp(1j * ang)
        w_arc = 1j * R * np.exp(1j * ang) * 2 * theta * wa
        return np.concatenate([z_in, z_out, z_arc]), np.concatenate([w_in, w_out, w_arc])


def _contour_integrals(A: np.ndarray, exponents, spec: ContourSpec, chunk: int = 64) -> list:
    """(1/2 pi i) * integral of lambda^z (lambda - A)^{-1} over the contour, for each z."""
    lam, wts = spec.nodes_and_weights()
    m = len(A)
    eye = np.eye(m)
    out = [np.zeros((m, m), dtype=complex) for _ in exponents]
    for start in range(0, len(lam), chunk):
        lc, wc = lam[start:start + chunk], wts[start:start + chunk]
        res = np.linalg.solve(lc[:, None, None] * eye[None] - A[None], np.broadcast_to(eye, (len(lc), m, m)))
        for acc, z in zip(out, exponents):
            coef = wc * np.power(lc, z)
            acc += np.einsum("k,kij->ij", coef, res)
    return [acc / (2j * np.pi) for acc in out]


def contour_power(obj, z: complex, spec: ContourSpec | None = None) -> PowerOperator:
    """A^z from the resolvent integral over ``spec``; for Re z > 0 computed as A^k A^(z-k)."""
    A = _as_matrix(obj).astype(complex)
    w = np.linalg.eigvalsh(A)
    if spec is None:
        spec = ContourSpec.for_spectrum(w)
    if spec.radius - (w.max() - spec.vertex) < spec.vertex / 2:
        raise TruncationError(f"arc radius {spec.radius:.3g} does not enclose the spectrum up to {w.max():.3g}")
    pos = w[~_kernel_mask(w)]
    dist = spec.distance_to(w)
    if np.any(pos < spec.vertex) or np.any(dist < spec.vertex / 2):
        bad = pos[pos < spec.vertex][0] if np.any(pos < spec.vertex) else w[np.argmin(dist)]
        raise ContourCollisionError(f"eigenvalue {bad:.6g} is not separated from the contour by {spec.vertex / 2:.3g}")
    k = int(np.ceil(np.real(z))) if np.real(z) > 0 else 0
    frac, zero = _contour_integrals(A, [z - k, 0.0], spec)
    M = np.linalg.matrix_power(A, k) @ frac if k else frac
    if np.imag(z) == 0:
        M = 0.5 * (M + M.conj().T)
    P0 = np.eye(len(A)) - 0.5 * (zero + zero.conj().T)
    return PowerOperator(complex(z), M, P0)


def resolvent(obj, lam: complex) -> np.ndarray:
    """(A - lam I)^{-1}."""
    A, w, V = _hermitian_data(obj)
    radius = max(float(np.max(np.abs(w))), 1.0)
    dist = float(np.min(np.abs(w - lam)))
    if dist <= 1e-10 * radius:
        raise SingularResolventError(f"lambda = {lam} lies on the spectrum (distance {dist:.3g})")
    return np.linalg.solve(A - lam * np.eye(len(A)), np.eye(len(A)))


@dataclass(frozen=True)
class ParameterEllipticityReport:
    holds: bool
    lower: float
    upper: float
    radius: float
    counterexample: dict | None = None


def parameter_ellipticity_check(sym: ToroidalSymbol, eps0: float, d: float, samples: int = 40,
                                lam_span: float = 1e6, radius: float = 0.0) -> ParameterEllipticityReport:
    """Witness C1 (1 + |theta| + |lambda|^(1/d))^m <= |a - lambda| <= C2 (...)^m on the ray (-inf, -eps0].

    ``m`` is the symbol order; lambda is sampled geometrically on the ray and
    only frequencies with |theta| >= radius enter the constants.
    """
    if not eps0 > 0:
        raise ValueError(f"eps0 must be positive, got {eps0}")
    vals = sym.table
    scale = max(float(np.max(np.abs(vals))), 1.0)
    on_ray = (np.abs(np.imag(vals)) <= 1e-12 * scale) & (np.real(vals) <= -eps0)
    if on_ray.any():
        ix, jf = np.argwhere(on_ray)[0]
        a = complex(vals[ix, jf])
        return ParameterEllipticityReport(False, 0.0, np.inf, radius, {
            "x_index": int(ix), "xi": sym.lattice.freqs[jf].tolist(), "lambda": a.real, "value": a})
    theta = sym.lattice.freqs
    keep = np.sqrt(np.sum(theta**2, axis=1)) >= radius
    lam = -eps0 * np.geomspace(1.0, lam_span, samples)
    a = vals[:, keep][..., None]
    weight = (1.0 + np.sqrt(np.sum(theta[keep] ** 2, axis=1))[None, :, None] + np.abs(lam)[None, None, :] ** (1.0 / d)) ** sym.order
    ratio = np.abs(a - lam[None, None, :]) / weight
    lo, hi = float(ratio.min()), float(ratio.max())
    if lo <= 0:
        ix, jf, kl = np.unravel_index(np.argmin(ratio), ratio.shape)
        return ParameterEllipticityReport(False, lo, hi, radius, {
            "x_index": int(ix), "xi": theta[keep][jf].tolist(), "lambda": float(lam[kl]), "value": complex(a[ix, jf, 0])})
    return ParameterEllipticityReport(bool(np.isfinite(hi)), lo, hi, radius)


DEFAULT_EPS_GRID = tuple(np.round(np.arange(1, 10) * 0.1, 10))


@dataclass(frozen=True)
class ProductOperatorReport:
    eps_grid: np.ndarray
    B: np.ndarray
    C: np.ndarray
    floor: float
    bound: float
    bound_applies: bool

    @property
    def B_sup(self) -> float:
        return float(np.max(self.B))

    @property
    def C_sup(self) -> float:
        return float(np.max(self.C))

    def table(self):
        return ["eps", "B_eps", "C_eps"], [[float(e), float(b), float(c)] for e, b, c in zip(self.eps_grid, self.B, self.C)]

    def summary(self) -> dict:
        return {"B_sup": self.B_sup, "C_sup": self.C_sup, "floor": self.floor, "bound": self.bound,
                "bound_applies": self.bound_applies}


def product_operator_inverse(basis: SpectralBasis, T: float, K: int, eps_grid=DEFAULT_EPS_GRID,
                             op: EllipticOperator | None = None) -> ProductOperatorReport:
    """B_eps and C_eps for -d_t^2 + E^(2/nu) on M x T_{T,eps} over the eps grid.

    Pass the assembled ``op`` only to force the dense (non-multiplier) computation of C_eps.
    """
    c = basis.floor
    if not c > 0:
        raise DivisionGuardError("operator floor c = 0: the product operator is not invertible")
    lam2 = basis.lam**2
    eps_grid = np.asarray(eps_grid, dtype=float)
    freq_sq = TWO_PI**2 * np.sum(basis.lattice.freqs**2, axis=1)
    dense = op is not None or not basis.is_multiplier
    B, C = [], []
    for eps in eps_grid:
        torus = dilated_eigendata(T, eps, K)
        mu_k = np.unique(torus.eigenvalues)
        joint = mu_k[:, None] + lam2[None, :]
        B.append(float(np.max((1.0 + joint) / joint)))
        if not dense:
            xi_sq = freq_sq[basis.labels]
            C.append(float(np.max((mu_k[:, None] + xi_sq[None, :]) / joint)))
        else:
            V = basis.vectors
            norms = []
            for mk, row in zip(mu_k, joint):
                G = (mk + freq_sq)[:, None] * ((V / row[None, :]) @ V.conj().T)
                norms.append(np.linalg.norm(G, 2))
            C.append(float(max(norms)))
    return ProductOperatorReport(eps_grid, np.array(B), np.array(C), c, 1.0 + 1.0 / c, bool(lam2.min() >= c * (1 - 1e-12)))


def joint_spectrum(basis: SpectralBasis, torus: DilatedTorus) -> np.ndarray:
    """Sorted values mu_{k,eps} + lambda_j^2."""
    return np.sort((torus.eigenvalues[:, None] + basis.lam[None, :] ** 2).ravel())
