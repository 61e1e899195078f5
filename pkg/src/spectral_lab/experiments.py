"""Experiment implementations driven by an ExperimentConfig."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .calculus import ContourSpec, contour_power, product_operator_inverse, spectral_power
from .config import ExperimentConfig
from .control import ControlProblem, cost_curve, hum_control, lr_iterative_control, miller_gate
from .inequality import WavePacket, doubling_report, interpolation_search, observability_report
from .lattice import FourierLattice, Subdomain
from .psi import build_psi, sup_norms, verify_psi
from .spectral import assemble_operator, eigendata, laplacian_symbol, variable_symbol


@dataclass
class Outcome:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())


class Context:
    """Lazily built lattice, operator and sensor shared by the experiments of one run."""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    @cached_property
    def lattice(self) -> FourierLattice:
        return FourierLattice(self.config.n, self.config.N)

    @cached_property
    def operator(self):
        cfg = self.config
        if cfg.symbol == "shifted-laplacian":
            sym = laplacian_symbol(self.lattice, cfg.shift, cfg.nu)
        else:
            sym = variable_symbol(self.lattice, cfg.amplitude, cfg.shift, cfg.nu)
        return assemble_operator(sym)

    @cached_property
    def region(self) -> Subdomain:
        return Subdomain(self.config.boxes, self.config.n)

    @cached_property
    def _all_mu(self) -> np.ndarray:
        op = self.operator
        return np.sort(op.multiplier if op.is_multiplier else np.linalg.eigvalsh(op.matrix))

    def basis(self, lam_max: float):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return eigendata(self.operator, lam_max)

    def basis_modes(self, m: int):
        mu = self._all_mu
        if m > len(mu):
            raise ValueError(f"lattice has {len(mu)} modes, asked for {m}")
        lam = max(mu[m - 1], 0.0) ** (1.0 / self.config.nu)
        return self.basis(lam * (1 + 1e-9)).first(m)

    def tol(self, key: str) -> float:
        return self.config.tolerances[key]


def run_spectra(ctx: Context, p: dict, rng) -> Outcome:
    b = ctx.basis(p.get("lambda_max", 30.0))
    res = b.residuals(ctx.operator)
    ortho = float(np.max(np.abs(b.gram() - np.eye(b.size))))
    rows = [[j, float(b.mu[j]), float(b.lam[j])] for j in range(b.size)]
    return Outcome(["j", "mu", "lambda"], rows,
                   {"modes": b.size, "max_residual": float(res.max()), "orthonormality": ortho,
                    "truncated": b.truncated},
                   {"residual": bool(np.all(res <= ctx.tol("residual") * (1 + b.mu))),
                    "orthonormality": ortho <= ctx.tol("orthonormality")})


def run_observability(ctx: Context, p: dict, rng) -> Outcome:
    lams = np.asarray(p.get("lambdas", [5, 10, 15, 20]), dtype=float)
    rep = observability_report(ctx.basis(lams.max()), ctx.region, lams)
    cols, rows = rep.table()
    checks = {"finite": bool(np.all(np.isfinite(rep.C))),
              "nondecreasing": bool(np.all(np.diff(rep.C) >= -1e-10 * rep.C[1:]))}
    if rep.fit is not None:
        checks["r2"] = rep.fit.r2 >= ctx.tol("r2")
        checks["growth"] = rep.fit.C2 > 0 or ctx.region.is_full
    return Outcome(cols, rows, rep.summary(), checks)


def run_doubling(ctx: Context, p: dict, rng) -> Outcome:
    lams = np.asarray(p.get("lambdas", [5, 10, 15, 20, 25, 30, 35, 40]), dtype=float)
    rep = doubling_report(ctx.basis(lams.max()), p.get("center", 0.5), p.get("radius", 0.1), lams, rng,
                          p.get("random_packets", 8))
    cols, rows = rep.table()
    checks = {"ratios_at_least_one": bool(np.all(rep.ratios >= 1.0))}
    if rep.fit is not None:
        checks["r2"] = rep.fit.r2 >= ctx.tol("doubling_r2")
    return Outcome(cols, rows, rep.summary(), checks)


def run_interpolation(ctx: Context, p: dict, rng) -> Outcome:
    lam = p.get("lambda", 40.0)
    b = ctx.basis(lam)
    T, alpha, panels = p.get("T", 1.0), p.get("alpha", 0.25), p.get("panels", 64)
    packets = [WavePacket.random(b, lam, rng) for _ in range(p.get("packets", 10))]
    kw = {} if "kappa_grid" not in p else {"kappa_grid": p["kappa_grid"]}
    coarse = interpolation_search(packets, ctx.region, T, alpha, min_panels=panels, **kw)
    fine = interpolation_search(packets, ctx.region, T, alpha, min_panels=2 * panels, **kw)
    drift = abs(fine.best_ratio / coarse.best_ratio - 1.0)
    cols, rows = coarse.table()
    summary = dict(coarse.summary(), refined_ratio=fine.best_ratio, refinement_drift=drift)
    return Outcome(cols, rows, summary, {"finite": bool(np.isfinite(coarse.best_ratio)), "stable": drift <= 0.05})


def run_psi_check(ctx: Context, p: dict, rng) -> Outcome:
    T = p.get("T", 1.0)
    grid = p.get("eps_grid", [round(0.1 * k, 10) for k in range(1, 10)])
    rows, ok, drift, m0 = [], True, 0.0, 0.0
    for eps in grid:
        psi = build_psi(eps, T)
        rep = verify_psi(psi, tol=ctx.tol("psi"))
        fine = sup_norms(psi, 40001)
        drift = max(drift, max(abs(a / b - 1.0) for a, b in zip(rep.sup_norms, fine) if b > 0))
        m0 = max(m0, max(rep.sup_norms))
        ok = ok and rep.holds
        rows.append([eps, rep.psi0, *rep.relative_fd_at_T, *rep.sup_norms])
    cols = ["eps", "psi0", "fd1", "fd2", "fd3", "fd4", "sup0", "sup1", "sup2", "sup3", "sup4"]
    return Outcome(cols, rows, {"M0": m0, "refinement_drift": drift},
                   {"regularizer": ok, "stable_sup": drift <= 0.02, "M0_finite": bool(np.isfinite(m0))})


def galerkin_block(op, modes: int) -> np.ndarray:
    """Compression of the operator to the ``modes`` lowest-|xi| coordinate vectors."""
    freqs = op.lattice.freqs
    order = np.lexsort((np.arange(len(freqs)), np.sum(freqs**2, axis=1)))[:modes]
    sel = np.sort(order)
    return op.dense()[np.ix_(sel, sel)]


def run_powers(ctx: Context, p: dict, rng) -> Outcome:
    A = galerkin_block(ctx.operator, p.get("modes", 30))
    nodes = p.get("nodes", 400)
    w = np.linalg.eigvalsh(A)
    spec = ContourSpec.for_spectrum(w, nodes=nodes)
    rows, worst = [], 0.0
    for z in p.get("z", [-1.0, -0.5, 0.5]):
        exact = spectral_power(A, z).matrix
        approx = contour_power(A, z, spec).matrix
        err = float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
        worst = max(worst, err)
        rows.append([z, err])
    return Outcome(["z", "rel_error"], rows, {"max_rel_error": worst, "vertex": spec.vertex, "radius": spec.radius},
                   {"agreement": worst <= ctx.tol("power")})


def run_product_bounds(ctx: Context, p: dict, rng) -> Outcome:
    b = ctx.basis(p.get("lambda_max", 30.0))
    kw = {} if "eps_grid" not in p else {"eps_grid": p["eps_grid"]}
    rep = product_operator_inverse(b, p.get("T", 1.0), p.get("K", 16), **kw)
    cols, rows = rep.table()
    checks = {"C_finite": bool(np.all(np.isfinite(rep.C)))}
    if rep.bound_applies:
        checks["B_bound"] = bool(np.all(rep.B <= rep.bound + 1e-9))
    return Outcome(cols, rows, rep.summary(), checks)


def run_control(ctx: Context, p: dict, rng) -> Outcome:
    b = ctx.basis_modes(p.get("modes", 20))
    u0 = rng.standard_normal(b.size) + 1j * rng.standard_normal(b.size)
    prob = ControlProblem(b, p.get("alpha", 1.0), p.get("T", 1.0), ctx.region, u0)
    res = hum_control(prob)
    cols, rows = res.table()
    summary = res.summary()
    checks = {"residual": res.residual <= ctx.tol("residual")}
    if miller_gate(prob.alpha, prob.nu).admissible:
        lr = lr_iterative_control(prob)
        summary.update(lr_stage_norms=list(lr.stage_norms), lr_residual=lr.residual)
        checks["lr_envelope"] = lr.residual <= 10 * res.residual
    return Outcome(cols, rows, summary, checks)


def run_cost_curve(ctx: Context, p: dict, rng) -> Outcome:
    b = ctx.basis_modes(p.get("modes", 20))
    grid = p.get("T_grid", [round(0.05 * k, 10) for k in range(1, 21)])
    prob = ControlProblem(b, p.get("alpha", 1.0), max(grid), ctx.region, np.zeros(b.size))
    curve = cost_curve(prob, grid)
    cols, rows = curve.table()
    order = np.argsort(curve.T_grid)
    vals = curve.C_T[order]
    ok = np.isfinite(vals)
    mono = bool(np.all(np.diff(vals[ok]) <= 1e-9 * vals[ok][:-1]))
    checks = {"nonincreasing": mono}
    if np.isfinite(curve.beta_star):
        checks["beta_range"] = bool(0 < curve.beta_fit <= curve.beta_star + 0.5)
    return Outcome(cols, rows, curve.summary(), checks)


EXPERIMENTS = {
    "spectra": run_spectra,
    "observability": run_observability,
    "doubling": run_doubling,
    "interpolation": run_interpolation,
    "psi-check": run_psi_check,
    "powers": run_powers,
    "product-bounds": run_product_bounds,
    "control": run_control,
    "cost-curve": run_cost_curve,
}
