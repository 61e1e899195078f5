"""Null-control of u' + E^alpha u = 1_omega g on a spectral truncation.

Modal coordinates throughout: a state is its coefficient vector over the
basis modes, and A = E^alpha acts as diag(mu_j^alpha).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, GramianAssemblyError, InadmissibleExponentError, UncontrollableTruncationError
from .lattice import Subdomain
from .spectral import SpectralBasis, adaptive_simpson

COND_LIMIT = 1e13
TIKHONOV = 1e-12


@dataclass(frozen=True)
class ControlProblem:
    basis: SpectralBasis = field(repr=False)
    alpha: float
    T: float
    region: Subdomain
    u0: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        u0 = np.asarray(self.u0, dtype=complex)
        if u0.shape != (self.basis.size,):
            raise ValueError(f"initial state needs {self.basis.size} modal coefficients, got {u0.shape}")
        if not np.all(np.isfinite(u0)):
            raise ValueError("initial state is not finite")
        object.__setattr__(self, "u0", u0)

    @property
    def nu(self) -> float:
        return self.basis.order

    @property
    def rates(self) -> np.ndarray:
        """Decay rates mu_j^alpha."""
        return np.clip(self.basis.mu, 0.0, None) ** self.alpha

    @property
    def mass(self) -> np.ndarray:
        return self.basis.mass_matrix(self.region)

    def with_(self, **kw) -> "ControlProblem":
        vals = dict(basis=self.basis, alpha=self.alpha, T=self.T, region=self.region, u0=self.u0)
        vals.update(kw)
        return ControlProblem(**vals)

    def tail_bound(self) -> float:
        """Free decay e^{-mu_{m+1}^alpha T} of the first neglected mode."""
        nxt = self.basis.next_mu
        return 0.0 if not np.isfinite(nxt) else float(np.exp(-(nxt**self.alpha) * self.T))


def semigroup_apply(problem: ControlProblem, t: float, state) -> np.ndarray:
    """e^{-t A} on modal coefficients."""
    if t < 0:
        raise DomainError(f"semigroup time must be nonnegative, got {t}")
    return np.exp(-t * problem.rates) * np.asarray(state)


def _gramian(mass: np.ndarray, rates: np.ndarray, T: float) -> np.ndarray:
    s = rates[:, None] + rates[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel = np.where(s > 0, -np.expm1(-s * T) / np.where(s > 0, s, 1.0), T)
    G = mass * kernel
    return 0.5 * (G + G.conj().T)


def observability_gramian(problem: ControlProblem, T: float | None = None) -> np.ndarray:
    """G_jk = M_jk (1 - e^{-(a_j + a_k) T}) / (a_j + a_k), with the limit T for a_j + a_k = 0."""
    T = problem.T if T is None else T
    G = _gramian(problem.mass, problem.rates, T)
    w = np.linalg.eigvalsh(G)
    if w[0] < -1e-10:
        raise GramianAssemblyError(f"Gramian is indefinite (smallest eigenvalue {w[0]:.3e})")
    return G


def _solve_gramian(G: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool, float]:
    w = np.linalg.eigvalsh(G)
    wmax = max(float(w[-1]), 0.0)
    wmin = float(w[0])
    cond = wmax / wmin if wmin > 0 else np.inf
    if wmax == 0:
        raise UncontrollableTruncationError("Gramian vanishes")
    regularized = not (wmin > wmax / COND_LIMIT)
    A = G
    if regularized:
        eta = TIKHONOV * np.trace(G).real / len(G)
        A = G + eta * np.eye(len(G))
    try:
        phi = sla.solve(A, rhs, assume_a="her")
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise UncontrollableTruncationError(f"Gramian solve failed: {exc}") from exc
    if not np.all(np.isfinite(phi)):
        raise UncontrollableTruncationError("Gramian solve produced non-finite values")
    return phi, regularized, cond


@dataclass(frozen=True)
class ControlResult:
    """HUM control g(t, x) = 1_omega(x) sum_j (e^{-(T - t) A} phi)_j rho_j(x)."""

    problem: ControlProblem = field(repr=False)
    phi: np.ndarray = field(repr=False)
    terminal: np.ndarray = field(repr=False)
    residual: float
    cost: float
    gramian_condition: float
    regularized: bool
    stage_costs: tuple = ()
    stage_norms: tuple = ()

    def modal(self, t) -> np.ndarray:
        """Modal coefficients of the control's unrestricted profile, shape ``(m, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(-np.outer(self.problem.rates, self.problem.T - t)) * self.phi[:, None]

    def evaluate(self, t: float, x) -> np.ndarray:
        """g(t, x) at points ``x`` of shape ``(k, n)``; zero outside omega."""
        lat = self.problem.basis.lattice
        vals = lat.evaluate(self.problem.basis.to_fourier(self.modal(t)[:, 0]), x)
        return np.where(self.problem.region.contains(x), vals, 0.0)

    def cost_by_quadrature(self) -> float:
        M = self.problem.mass

        def integrand(t):
            c = self.modal(t)
            return np.real(np.einsum("it,ij,jt->t", c.conj(), M, c))

        # the integrand has a layer of width ~1/max rate at t = T; grade the pieces toward it
        T = self.problem.T
        cuts = [0.0] + [T - T * 2.0**-k for k in range(1, 48)] + [T]
        pieces = list(zip(cuts[:-1], cuts[1:]))
        return float(np.sqrt(max(adaptive_simpson(integrand, pieces, min_panels=16), 0.0)))

    def table(self):
        p = self.problem
        rows = [[j, float(p.basis.lam[j]), float(p.u0[j].real), float(p.u0[j].imag), float(self.phi[j].real),
                 float(self.phi[j].imag), float(abs(self.terminal[j]))] for j in range(p.basis.size)]
        return ["j", "lambda", "u0_re", "u0_im", "phi_re", "phi_im", "terminal_abs"], rows

    def summary(self) -> dict:
        p = self.problem
        return {"alpha": p.alpha, "nu": p.nu, "T": p.T, "omega": p.region.to_spec(), "residual": self.residual,
                "cost": self.cost, "gramian_condition": self.gramian_condition, "regularized": self.regularized,
                "tail_bound": p.tail_bound(), "stage_costs": list(self.stage_costs),
                "stage_norms": list(self.stage_norms)}


def hum_control(problem: ControlProblem) -> ControlResult:
    """Minimal-norm control steering the truncated state to zero at time T."""
    free = semigroup_apply(problem, problem.T, problem.u0)
    scale = max(float(np.linalg.norm(problem.u0)), 1.0)
    G = observability_gramian(problem)
    if not np.any(problem.u0):
        phi = np.zeros_like(problem.u0)
        regularized, cond = False, float(np.linalg.cond(G))
    else:
        phi, regularized, cond = _solve_gramian(G, -free)
    terminal = free + G @ phi
    cost = float(np.sqrt(max(-np.vdot(phi, free).real, 0.0)))
    return ControlResult(problem, phi, terminal, float(np.linalg.norm(terminal) / scale), cost, cond, regularized)


@dataclass(frozen=True)
class MillerReport:
    alpha: float
    nu: float
    admissible: bool
    gamma: float
    beta_star: float


def miller_gate(alpha: float, nu: float) -> MillerReport:
    """Admissible iff alpha * nu > 1; then gamma = 1/(alpha nu) and beta* = 1/(alpha nu - 1)."""
    if not (alpha > 0 and nu > 0):
        raise DomainError(f"alpha and nu must be positive, got ({alpha}, {nu})")
    p = alpha * nu
    ok = p > 1
    return MillerReport(alpha, nu, bool(ok), 1.0 / p, 1.0 / (p - 1.0) if ok else np.inf)


def lr_iterative_control(problem: ControlProblem, growth: float = 2.0, lam0: float | None = None) -> ControlResult:
    """Dyadic strategy: stage k (length T 2^{-(k+1)}) controls lambda_j <= lam0 growth^k
    during its first half and lets the state decay freely during the second."""
    gate = miller_gate(problem.alpha, problem.nu)
    if not gate.admissible:
        raise InadmissibleExponentError(f"alpha * nu = {problem.alpha * problem.nu:g} <= 1")
    if growth <= 1:
        raise ValueError(f"block growth factor must exceed 1, got {growth}")
    lam = problem.basis.lam
    if lam0 is None:
        lam0 = float(np.sort(lam)[min(3, len(lam) - 1)])
    mass, rates = problem.mass, problem.rates
    u = problem.u0.copy()
    scale = max(float(np.linalg.norm(u)), 1.0)
    costs, norms, phis = [], [], []
    used, k, worst_cond, reg_any = 0.0, 0, 1.0, False
    while True:
        stage = problem.T * 2.0 ** (-(k + 1))
        tau = 0.5 * stage
        blk = np.flatnonzero(lam <= lam0 * growth**k * (1 + 1e-12))
        G = _gramian(mass, rates, tau)
        free = np.exp(-tau * rates) * u
        if np.any(free[blk]):
            phi, reg, cond = _solve_gramian(G[np.ix_(blk, blk)], -free[blk])
        else:
            phi, reg, cond = np.zeros(len(blk), dtype=complex), False, 1.0
        worst_cond, reg_any = max(worst_cond, cond), reg_any or reg
        u = free + G[:, blk] @ phi
        costs.append(float(np.sqrt(max(np.real(np.vdot(phi, G[np.ix_(blk, blk)] @ phi)), 0.0))))
        u = np.exp(-tau * rates) * u
        norms.append(float(np.linalg.norm(u)))
        phis.append(phi)
        used += stage
        k += 1
        if len(blk) == len(lam):
            break
    u = np.exp(-(problem.T - used) * rates) * u
    total_cost = float(np.sqrt(np.sum(np.square(costs))))
    phi_full = np.zeros_like(problem.u0)
    return ControlResult(problem, phi_full, u, float(np.linalg.norm(u) / scale), total_cost, worst_cond, reg_any,
                         tuple(costs), tuple(norms))


def control_cost(problem: ControlProblem, T: float | None = None) -> float:
    """C_T = sup ||e^{-TA} v|| / ||1_omega e^{-tA} v||_{L^2(0,T)} = ||L^{-1} D|| with G = L L^H, D = e^{-TA}."""
    T = problem.T if T is None else T
    G = _gramian(problem.mass, problem.rates, T)
    L = np.linalg.cholesky(G)
    X = sla.solve_triangular(L, np.diag(np.exp(-T * problem.rates)), lower=True)
    return float(np.linalg.norm(X, 2))


@dataclass(frozen=True)
class CostCurve:
    T_grid: np.ndarray
    C_T: np.ndarray
    flags: np.ndarray
    beta_fit: float
    C1: float
    C2: float
    beta_star: float
    fit_points: int

    def table(self):
        return ["T", "C_T", "flag"], [[float(t), float(c), int(f)] for t, c, f in zip(self.T_grid, self.C_T, self.flags)]

    def summary(self) -> dict:
        return {"beta_fit": self.beta_fit, "C1": self.C1, "C2": self.C2, "beta_star": self.beta_star,
                "fit_points": self.fit_points}


def cost_curve(problem: ControlProblem, T_grid) -> CostCurve:
    """C_T over ``T_grid`` and the fit log log C_T = log C2 - beta log T on the short-time half.

    Points with C_T <= 1 (log log undefined) or a failed factorization are
    flagged and skipped by the fit; C1 is fixed at 1 in this form.
    """
    gate = miller_gate(problem.alpha, problem.nu)
    T_grid = np.asarray(T_grid, dtype=float)
    if np.any(T_grid <= 0):
        raise DomainError("T grid must be positive")
    vals, flags = [], []
    for T in T_grid:
        try:
            c = control_cost(problem, T)
            vals.append(c)
            flags.append(0 if np.isfinite(c) else 1)
        except np.linalg.LinAlgError:
            vals.append(np.nan)
            flags.append(1)
    vals, flags = np.array(vals), np.array(flags)
    order = np.argsort(T_grid, kind="stable")
    short = order[: int(np.ceil(len(T_grid) / 2))]
    use = [i for i in short if flags[i] == 0 and vals[i] > 1]
    beta, C2 = np.nan, np.nan
    if len(use) >= 2:
        slope, icpt = np.polyfit(np.log(T_grid[use]), np.log(np.log(vals[use])), 1)
        beta, C2 = float(-slope), float(np.exp(icpt))
    return CostCurve(T_grid, vals, flags, beta, 1.0, C2, gate.beta_star, len(use))
