"""The time regularizer psi: constant on [0, T], a flat bump on [T, T + a], zero after."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DegenerateBumpError, DomainError

BUMP_POWER = 10


@lru_cache(maxsize=None)
def _profile_terms(k: int) -> tuple:
    """Laurent coefficients {p: c} with g^(k)(u) = e^{-1/u} sum_p c u^p for g(u) = u^10 e^{-1/u}."""
    terms = {BUMP_POWER: 1.0}
    for _ in range(k):
        nxt: dict = {}
        for p, c in terms.items():
            # d/du (u^p e^{-1/u}) = (p u^{p-1} + u^{p-2}) e^{-1/u}
            if p:
                nxt[p - 1] = nxt.get(p - 1, 0.0) + c * p
            nxt[p - 2] = nxt.get(p - 2, 0.0) + c
        terms = nxt
    return tuple(sorted(terms.items()))


def _profile(u: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    logu = np.log(up)
    acc = np.zeros_like(up)
    for p, c in _profile_terms(k):
        acc += c * np.exp(p * logu - 1.0 / up)
    out[pos] = acc
    return out


def bump_derivatives(t, a: float) -> np.ndarray:
    """E, E', E'', E''', E'''' of E(t) = e^{-1/(a^2 - t^2)} (a^2 - t^2)^10, zero for |t| >= a.

    Returns shape ``(5,) + t.shape``. Chain rule with u = a^2 - t^2, u' = -2t, u'' = -2.
    """
    t = np.asarray(t, dtype=float)
    u = a * a - t * t
    g = [_profile(u, k) for k in range(5)]
    d1, d2 = -2.0 * t, -2.0
    E0 = g[0]
    E1 = g[1] * d1
    E2 = g[2] * d1**2 + g[1] * d2
    E3 = g[3] * d1**3 + 3.0 * g[2] * d1 * d2
    E4 = g[4] * d1**4 + 6.0 * g[3] * d1**2 * d2 + 3.0 * g[2] * d2**2
    return np.stack([E0, E1, E2, E3, E4])


def bump_eval(t, a: float, eps: float | None = None, order: int = 0) -> np.ndarray:
    """E^(order)(t) on [0, eps] (eps defaults to 4a/3)."""
    if eps is None:
        eps = 4.0 * a / 3.0
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > eps * (1 + 1e-14)):
        raise DomainError(f"bump argument must lie in [0, {eps}]")
    if not 0 <= order <= 4:
        raise ValueError(f"derivative order {order} not available")
    return bump_derivatives(t, a)[order]


def _poly_derivatives(t, b, c) -> np.ndarray:
    # q(t) = 1 - b t^2 + c t^4 and its first four derivatives
    t = np.asarray(t, dtype=float)
    return np.stack([
        1.0 - b * t**2 + c * t**4,
        -2.0 * b * t + 4.0 * c * t**3,
        -2.0 * b + 12.0 * c * t**2 + 0.0 * t,
        24.0 * c * t,
        24.0 * c + 0.0 * t,
    ])


_BINOM = ((1,), (1, 1), (1, 2, 1), (1, 3, 3, 1), (1, 4, 6, 4, 1))


def corrected_bump_derivatives(t, a, b, c) -> np.ndarray:
    """Derivatives 0..4 of eta(t) = E(t)(1 - b t^2 + c t^4) by the product rule."""
    E = bump_derivatives(t, a)
    q = _poly_derivatives(t, b, c)
    return np.stack([sum(_BINOM[i][k] * E[k] * q[i - k] for k in range(i + 1)) for i in range(5)])


def central_difference(f, t: float, order: int, h: float) -> float:
    """Central difference of eighth-order accuracy for derivatives 1..4."""
    if not 1 <= order <= 4:
        raise ValueError(f"derivative order {order} not available")
    half = 4 if order <= 2 else 5
    offs = np.arange(-half, half + 1)
    w = fd_weights(offs, order)
    vals = np.array([f(t + k * h) for k in offs], dtype=float)
    # weights sum to zero, so removing the centre value only reduces rounding
    return float(w @ (vals - vals[half]) / h**order)


@lru_cache(maxsize=None)
def _fd_weights_cached(offsets: tuple, order: int) -> tuple:
    x = np.array(offsets, dtype=float)
    n = len(x)
    V = np.vander(x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return tuple(np.linalg.solve(V, rhs))


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative on integer ``offsets``."""
    return np.array(_fd_weights_cached(tuple(int(o) for o in offsets), int(order)))


@dataclass(frozen=True)
class CorrectionCoefficients:
    b: float
    c: float
    printed_b: float
    printed_c: float
    residual_2: float
    residual_4: float
    printed_residual_2: float
    printed_residual_4: float


def correction_coeffs(a: float) -> CorrectionCoefficients:
    """Solve eta''(0) = eta''''(0) = 0 for eta = E(1 - b t^2 + c t^4).

    Also evaluates the alternative closed forms b' = (E''(0) - E(0))/2 and
    c' = (6 (E''(0) - E(0)) E''(0) - E''''(0)) / (12 E(0)), with the residuals
    each pair leaves in eta''(0) and eta''''(0) (relative to E(0)).
    """
    if not a > 0:
        raise DegenerateBumpError(f"bump half-width must be positive, got {a}")
    E = bump_derivatives(0.0, a)
    E0, E2, E4 = float(E[0]), float(E[2]), float(E[4])
    if E0 == 0 or not np.isfinite(E0):
        raise DegenerateBumpError(f"E(0) = {E0} for a = {a}; the correction system is singular")
    b = E2 / (2.0 * E0)
    c = (12.0 * b * E2 - E4) / (24.0 * E0)
    pb = (E2 - E0) / 2.0
    pc = (6.0 * (E2 - E0) * E2 - E4) / (12.0 * E0)

    def residuals(bb, cc):
        eta = corrected_bump_derivatives(0.0, a, bb, cc)
        return float(eta[2] / E0), float(eta[4] / E0)

    r2, r4 = residuals(b, c)
    p2, p4 = residuals(pb, pc)
    return CorrectionCoefficients(b, c, pb, pc, r2, r4, p2, p4)


@dataclass(frozen=True)
class PsiFunction:
    """psi(t) = psi0 on [0, T]; psi0 eta(t - T)/eta(0) on [T, T + a]; 0 on [T + a, T + eps]."""

    eps: float
    T: float
    coeffs: CorrectionCoefficients = field(repr=False)
    psi0: float = 0.0

    @property
    def a(self) -> float:
        return 0.75 * self.eps

    @property
    def b(self) -> float:
        return self.coeffs.b

    @property
    def c(self) -> float:
        return self.coeffs.c

    @property
    def end(self) -> float:
        return self.T + self.eps

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.end * (1 + 1e-14)):
            raise DomainError(f"psi is defined on [0, {self.end}]")
        return t

    def offset(self, t, extend: bool = False) -> np.ndarray:
        """psi(t) - psi0 without cancellation (relative accuracy near t = T)."""
        t = np.asarray(t, dtype=float) if extend else self._check(t)
        s = t - self.T
        out = np.zeros(t.shape)
        a2 = self.a * self.a
        on_bump = (s > 0) & (s < self.a)
        sb = s[on_bump]
        x = sb * sb / a2
        q = -self.b * sb**2 + self.c * sb**4
        # eta(s)/eta(0) = exp(-x/(a^2 - s^2)) (1 - x)^10 q(s)
        log_ratio = -x / (a2 - sb * sb) + BUMP_POWER * np.log1p(-x) + np.log1p(q)
        out[on_bump] = self.psi0 * np.expm1(log_ratio)
        out[s >= self.a] = -self.psi0
        return out

    def derivatives(self, t, extend: bool = False) -> np.ndarray:
        """psi and its first four derivatives, shape ``(5,) + t.shape``; bump-side limits at T.

        With ``extend`` the domain check is skipped and psi is continued by 0 beyond
        T + eps and by psi0 below 0.
        """
        t = np.asarray(t, dtype=float) if extend else self._check(t)
        s = t - self.T
        out = np.zeros((5,) + t.shape)
        eta0 = bump_derivatives(0.0, self.a)[0]
        bump = corrected_bump_derivatives(np.clip(s, 0.0, self.a), self.a, self.b, self.c) * (self.psi0 / eta0)
        on_bump = (s > 0) & (s < self.a)
        out[:, on_bump] = bump[:, on_bump]
        out[0] = np.where(s < self.a, self.psi0 + self.offset(t, extend=True), 0.0)
        return out

    def __call__(self, t) -> np.ndarray:
        return self.derivatives(t)[0]

    def derivative(self, t, i: int) -> np.ndarray:
        if not 0 <= i <= 4:
            raise ValueError(f"derivative order {i} not available")
        return self.derivatives(t)[i]

    def tabulate(self, num: int = 401) -> np.ndarray:
        t = np.linspace(0.0, self.end, num)
        return np.column_stack([t, self.derivatives(t).T])


def build_psi(eps: float, T: float) -> PsiFunction:
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    a = 0.75 * eps
    coeffs = correction_coeffs(a)
    E0 = float(bump_derivatives(0.0, a)[0])
    psi0 = min(eps, E0 * E0)
    if psi0 == 0:
        raise DegenerateBumpError(f"psi(0) underflows for eps = {eps}")
    return PsiFunction(eps, T, coeffs, psi0)


def psi_eval(psi: PsiFunction, t) -> np.ndarray:
    return psi(t)


def psi_derivative(psi: PsiFunction, t, i: int) -> np.ndarray:
    return psi.derivative(t, i)


@dataclass(frozen=True)
class PsiReport:
    eps: float
    psi0: float
    psi0_ok: bool
    fd_at_T: tuple
    relative_fd_at_T: tuple
    exact_at_T: tuple
    sup_norms: tuple
    flat_ok: bool
    witness: float | None

    @property
    def holds(self) -> bool:
        return self.psi0_ok and self.flat_ok


def sup_norms(psi: PsiFunction, samples: int = 20001) -> tuple:
    """Sampled sup |psi^(i)| for i = 0..4 (the bump interval carries all the variation)."""
    t = np.linspace(psi.T, psi.T + psi.a, samples)
    return tuple(float(v) for v in np.max(np.abs(psi.derivatives(t)), axis=1))


def verify_psi(psi: PsiFunction, tol: float = 1e-6, samples: int = 20001, step: float | None = None) -> PsiReport:
    """Check 0 < psi(0) < eps and the flatness psi^(i)(T) = 0, i = 1..4, by finite differences.

    Flatness is measured relative to sup |psi^(i)|, since psi0 itself may be
    as small as 1e-200. The default step is 1e-3 a^2: the bump varies on the
    scale a^2 (not a) near its centre.
    """
    h = 1e-3 * psi.a**2 if step is None else step
    f = lambda s: float(psi.offset(np.array(s), extend=True))
    sups = sup_norms(psi, samples)
    fd, rel = [], []
    for i in range(1, 5):
        v = central_difference(f, psi.T, i, h)
        fd.append(v)
        rel.append(abs(v) / sups[i] if sups[i] > 0 else abs(v))
    eta = corrected_bump_derivatives(0.0, psi.a, psi.b, psi.c)
    exact = tuple(float(x) for x in eta[1:] * (psi.psi0 / eta[0]))
    flat = all(r <= tol for r in rel)
    witness = None if flat else psi.T
    return PsiReport(psi.eps, psi.psi0, bool(0 < psi.psi0 < psi.eps), tuple(fd), tuple(rel), exact, sups, flat, witness)


def write_psi_table(path, psi: PsiFunction, num: int = 401) -> None:
    tab = psi.tabulate(num)
    header = "t,psi,psi_1,psi_2,psi_3,psi_4"
    lines = [header] + [",".join(f"{v:.17g}" for v in row) for row in tab]
    Path(path).write_text("\n".join(lines) + "\n")
