"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np


def graded_gauss(T, levels=40, q=20):
    """Composite Gauss-Legendre nodes on [0, T], refined geometrically toward t = T."""
    cuts = [0.0] + [T - T * 2.0**-k for k in range(1, levels)] + [T]
    x, w = np.polynomial.legendre.leggauss(q)
    ts, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        ts.append(a + (x + 1) * (b - a) / 2)
        ws.append(w * (b - a) / 2)
    return np.concatenate(ts), np.concatenate(ws)


def min_perturbed_cost(result, trials=100, degree=4, seed=9):
    """Smallest cost among ``trials`` controls g + d, with d a random polynomial-in-time profile
    whose terminal contribution vanishes. Returns (base cost by quadrature, min perturbed cost)."""
    prob = result.problem
    m, T = prob.basis.size, prob.T
    t, w = graded_gauss(T)
    M, rates = prob.mass, prob.rates
    P = np.stack([np.polynomial.legendre.Legendre.basis(p, domain=[0, T])(t) for p in range(degree)])
    decay = np.exp(-np.outer(rates, T - t))
    K = np.zeros((m, m * degree), dtype=complex)
    for j in range(m):
        for p in range(degree):
            K[:, j * degree + p] = decay @ (w * P[p]) * M[:, j]
    _, s, Vh = np.linalg.svd(K)
    kernel = Vh[np.sum(s > 1e-12 * s[0]):].conj().T
    r = np.random.default_rng(seed)
    g = result.modal(t)

    def cost(profile):
        return np.sqrt(float(np.real(np.einsum("it,ij,jt,t->", profile.conj(), M, profile, w))))

    best = np.inf
    for _ in range(trials):
        beta = kernel @ (r.standard_normal(kernel.shape[1]) + 1j * r.standard_normal(kernel.shape[1]))
        beta *= 10 ** r.uniform(-3, 1) / np.linalg.norm(beta)
        assert np.max(np.abs(K @ beta)) <= 1e-9 * np.linalg.norm(beta) * np.linalg.norm(K)
        best = min(best, cost(g + np.einsum("jp,pt->jt", beta.reshape(m, degree), P)))
    return cost(g), best
