"""Small quadrature helpers shared across modules."""
from __future__ import annotations

import numpy as np


def tanh_sinh(n: int, span: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid rule in the double-exponential variable, mapped to [0, 1].

    Nodes cluster at both endpoints, which suits integrands with endpoint
    layers such as the resolvent near the contour vertex.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    k = np.linspace(-span, span, n)
    h = k[1] - k[0]
    u = 0.5 * np.pi * np.sinh(k)
    x = 0.5 * (1.0 + np.tanh(u))
    w = 0.25 * np.pi * np.cosh(k) / np.cosh(u) ** 2 * h
    return x, w


def gauss_legendre(a: float, b: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0) * (b - a) + a, 0.5 * (b - a) * w
