"""Toroidal symbols on a Fourier lattice: quantization, seminorms and the L2 bound."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InsufficientCutoffError, OrderError
from .lattice import TWO_PI, FourierLattice


def japanese_bracket(xi) -> np.ndarray:
    """<xi> = (1 + |xi|^2)^(1/2), taken over the last axis."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + np.sum(xi**2, axis=-1))


def dimensional_constant(n: int) -> float:
    """Envelope constant used with ``cv_bound``: 2^([n/2]+2)."""
    return float(2 ** (n // 2 + 2))


@dataclass(frozen=True)
class ToroidalSymbol:
    """Lattice-sampled symbol a(x, xi).

    ``values`` has shape ``(num_points, num_freqs)``, or ``(1, num_freqs)`` for
    an x-independent multiplier (broadcast across the grid).
    """

    lattice: FourierLattice
    values: np.ndarray = field(repr=False)
    order: float = 0.0
    rho: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        if vals.ndim == 1:
            vals = vals[None, :]
        lat = self.lattice
        if vals.shape[1] != lat.num_freqs or vals.shape[0] not in (1, lat.num_points):
            raise DimensionError(
                f"symbol table has shape {vals.shape}; expected (1 or {lat.num_points}, {lat.num_freqs})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("symbol table contains non-finite values")
        if not (0.0 <= self.delta < self.rho <= 1.0):
            raise ValueError(f"need 0 <= delta < rho <= 1, got rho={self.rho}, delta={self.delta}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, lattice, fn, order=0.0, rho=1.0, delta=0.0):
        """Sample ``fn(x, xi)``; ``x`` has shape ``(P^n, 1, n)`` and ``xi`` shape ``(1, F, n)``."""
        x = lattice.points[:, None, :]
        xi = lattice.freqs[None, :, :].astype(float)
        vals = np.broadcast_to(fn(x, xi), (lattice.num_points, lattice.num_freqs))
        return cls(lattice, np.array(vals), order, rho, delta)

    @classmethod
    def multiplier(cls, lattice, fn_or_values, order=0.0, rho=1.0, delta=0.0):
        """x-independent symbol from values on the lattice or a callable of ``xi`` (shape ``(F, n)``)."""
        if callable(fn_or_values):
            vals = fn_or_values(lattice.freqs.astype(float))
        else:
            vals = fn_or_values
        vals = np.asarray(vals).reshape(1, lattice.num_freqs)
        return cls(lattice, vals, order, rho, delta)

    @property
    def is_multiplier(self) -> bool:
        return self.values.shape[0] == 1

    @property
    def table(self) -> np.ndarray:
        return np.broadcast_to(self.values, (self.lattice.num_points, self.lattice.num_freqs))

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.all(self.values.imag == 0))

    @property
    def is_positive(self) -> bool:
        return self.is_real and bool(np.all(np.real(self.values) > 0))

    def multiplier_values(self) -> np.ndarray:
        if not self.is_multiplier:
            raise ValueError("symbol depends on x")
        return self.values[0]

    def scaled(self, c) -> "ToroidalSymbol":
        return ToroidalSymbol(self.lattice, c * self.values, self.order, self.rho, self.delta)

    def with_order(self, order) -> "ToroidalSymbol":
        return ToroidalSymbol(self.lattice, self.values, order, self.rho, self.delta)

    def normalized(self) -> "ToroidalSymbol":
        """Order-zero symbol a(x, xi) <xi>^(-order)."""
        w = japanese_bracket(self.lattice.freqs) ** (-self.order)
        return ToroidalSymbol(self.lattice, self.values * w[None, :], 0.0, self.rho, self.delta)


def _check_same_lattice(sym: ToroidalSymbol, lattice: FourierLattice):
    if sym.lattice != lattice:
        raise DimensionError(f"symbol lives on {sym.lattice}, input on {lattice}")


def quantize(sym: ToroidalSymbol, u) -> np.ndarray:
    """Apply a(x, D) to a grid function: sum_xi e^{2 pi i x.xi} a(x, xi) u_hat(xi)."""
    lat = sym.lattice
    u = lat.check_grid(u)
    uhat = lat.transform(u)
    if sym.is_multiplier:
        return lat.inverse(sym.values[0] * uhat)
    out = (lat.synthesis * sym.values) @ uhat
    return out.reshape(lat.grid_shape)


def x_fourier(sym: ToroidalSymbol) -> np.ndarray:
    """FFT of the table along x, shape ``(P,)*n + (F,)``, normalized as periodic coefficients."""
    lat = sym.lattice
    tab = sym.table.reshape(lat.grid_shape + (lat.num_freqs,))
    return np.fft.fftn(tab, axes=tuple(range(lat.n))) / lat.num_points


def galerkin_matrix(sym: ToroidalSymbol) -> np.ndarray:
    """Matrix of a(x, D) in the Fourier frame: ``A[xi, eta] = <a(x, D) e_eta, e_xi>``."""
    lat = sym.lattice
    if sym.is_multiplier:
        return np.diag(sym.values[0].astype(complex))
    ahat = x_fourier(sym)
    P = lat.points_per_axis
    diff = np.mod(lat.freqs[:, None, :] - lat.freqs[None, :, :], P)
    cols = np.broadcast_to(np.arange(lat.num_freqs)[None, :], diff.shape[:2])
    idx = tuple(diff[..., i] for i in range(lat.n)) + (cols,)
    return ahat[idx]


def _x_derivative(sym: ToroidalSymbol, beta) -> np.ndarray:
    lat = sym.lattice
    if sum(beta) == 0:
        return sym.table.reshape(lat.grid_shape + (lat.num_freqs,))
    if sym.is_multiplier:
        return np.zeros(lat.grid_shape + (lat.num_freqs,))
    ahat = x_fourier(sym)
    k = np.fft.fftfreq(lat.points_per_axis, d=1.0 / lat.points_per_axis)
    for axis, b in enumerate(beta):
        if b:
            shape = [1] * (lat.n + 1)
            shape[axis] = -1
            factor = (1j * TWO_PI * k) ** b
            # the Nyquist mode has no symmetric partner; drop it for odd orders
            if b % 2 and lat.points_per_axis % 2 == 0:
                factor[lat.points_per_axis // 2] = 0.0
            ahat = ahat * factor.reshape(shape)
    return np.fft.ifftn(ahat, axes=tuple(range(lat.n))) * lat.num_points


def _forward_differences(arr: np.ndarray, alpha, n: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Apply Delta_xi^alpha on the frequency axes; returns values and the surviving frequency mask."""
    side = 2 * N + 1
    lead = arr.shape[:-1]
    cube = arr.reshape(lead + (side,) * n)
    off = len(lead)
    for axis, a in enumerate(alpha):
        for _ in range(a):
            cube = np.diff(cube, axis=off + axis)
    valid = [side - a for a in alpha]
    return cube, valid


def seminorm(sym: ToroidalSymbol, alpha, beta) -> float:
    """sup over the table of <xi>^(rho|alpha| - delta|beta|) |Delta_xi^alpha d_x^beta a(x, xi)|."""
    lat = sym.lattice
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    beta = tuple(int(b) for b in np.atleast_1d(beta))
    if len(alpha) != lat.n or len(beta) != lat.n:
        raise DimensionError(f"multi-indices must have length {lat.n}")
    if any(a < 0 for a in alpha + beta):
        raise ValueError("multi-indices must be nonnegative")
    if any(a >= 2 * lat.N + 1 for a in alpha):
        raise InsufficientCutoffError(f"difference order {alpha} exhausts the lattice with N={lat.N}")
    dx = _x_derivative(sym, beta)
    dx = dx.reshape(-1, lat.num_freqs)
    diffed, valid = _forward_differences(dx, alpha, lat.n, lat.N)
    # base points xi of the forward differences: the first valid[i] entries per axis
    axes = [np.arange(-lat.N, -lat.N + v) for v in valid]
    mesh = np.meshgrid(*axes, indexing="ij")
    base = np.stack([m.ravel() for m in mesh], axis=-1)
    weight = japanese_bracket(base) ** (sym.rho * sum(alpha) - sym.delta * sum(beta))
    vals = np.abs(diffed.reshape(diffed.shape[0], -1)) * weight[None, :]
    return float(vals.max())


def multi_indices(n: int, max_total: int):
    """All (alpha, beta) pairs of n-dimensional multi-indices with |alpha| + |beta| <= max_total."""
    for combo in itertools.product(range(max_total + 1), repeat=2 * n):
        if sum(combo) <= max_total:
            yield combo[:n], combo[n:]


@dataclass(frozen=True)
class SeminormReport:
    constants: dict
    max_order: int
    dimensional_constant: float

    @property
    def bound(self) -> float:
        return max(self.constants.values())


def seminorm_report(sym: ToroidalSymbol, max_order: int | None = None) -> SeminormReport:
    n = sym.lattice.n
    if max_order is None:
        max_order = n // 2 + 1
    consts = {(a, b): seminorm(sym, a, b) for a, b in multi_indices(n, max_order)}
    return SeminormReport(consts, max_order, dimensional_constant(n))


def cv_bound(sym: ToroidalSymbol) -> float:
    """Largest seminorm over |alpha| + |beta| <= [n/2] + 1, controlling the L2 operator norm."""
    if sym.order != 0:
        raise OrderError(f"cv_bound needs an order-0 symbol, got order {sym.order}; normalize first")
    return seminorm_report(sym).bound


def operator_norm(sym: ToroidalSymbol) -> float:
    """Exact L2 norm of a(x, D) on the truncated frame (largest singular value)."""
    if sym.is_multiplier:
        return float(np.max(np.abs(sym.values)))
    return float(np.linalg.norm(galerkin_matrix(sym), 2))


def write_symbol(path, sym: ToroidalSymbol) -> None:
    """Columnar text: header ``# n N nu rho delta`` then rows ``x_index xi_1..xi_n re im``."""
    lat = sym.lattice
    tab = sym.values
    xs = np.arange(tab.shape[0])
    lines = [f"# {lat.n} {lat.N} {sym.order!r} {sym.rho!r} {sym.delta!r} {'multiplier' if sym.is_multiplier else 'full'}"]
    vals = np.asarray(tab, dtype=complex)
    for xi_idx in xs:
        for f_idx, xi in enumerate(lat.freqs):
            v = vals[xi_idx, f_idx]
            lines.append(" ".join([str(xi_idx)] + [str(int(k)) for k in xi] + [f"{v.real:.17g}", f"{v.imag:.17g}"]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_symbol(path) -> ToroidalSymbol:
    text = Path(path).read_text().splitlines()
    head = text[0].lstrip("#").split()
    n, N = int(head[0]), int(head[1])
    order, rho, delta = float(head[2]), float(head[3]), float(head[4])
    kind = head[5] if len(head) > 5 else "full"
    lat = FourierLattice(n, N)
    rows = np.loadtxt(text[1:], ndmin=2)
    nx = 1 if kind == "multiplier" else lat.num_points
    if rows.shape[0] != nx * lat.num_freqs:
        raise DimensionError(f"symbol file has {rows.shape[0]} rows, expected {nx * lat.num_freqs}")
    table = np.zeros((nx, lat.num_freqs), dtype=complex)
    xi = rows[:, 1 : 1 + n].astype(int)
    f_idx = np.ravel_multi_index(tuple((xi + N).T), (2 * N + 1,) * n)
    table[rows[:, 0].astype(int), f_idx] = rows[:, 1 + n] + 1j * rows[:, 2 + n]
    if np.all(table.imag == 0):
        table = table.real
    return ToroidalSymbol(lat, table, order, rho, delta)
