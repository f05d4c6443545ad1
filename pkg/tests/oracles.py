"""Independent reference implementations used to validate closed forms.

Everything here is deliberately slow and direct: dense spherical quadrature,
per-entry double loops, refit-based cross validation, and finite-difference
operators. Tests freeze expectations against these rather than against the
library's own fast paths.
"""

import numpy as np

from atfinterp.geometry import PairSet
from atfinterp.sphere import integrate, lebedev

ORACLE_QUAD = lebedev(590)


def quad_factor_kernel(phi, a, b, k, directions=ORACLE_QUAD) -> complex:
    """Direct quadrature of phi(v) exp(ik v.(a-b)) over the unit sphere."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return integrate(lambda v: phi(v) * np.exp(1j * k * (v @ d)), directions)


def pair_kernel_reference(kappa_factor, pairs_a: PairSet, pairs_b: PairSet):
    """Symmetrized pair kernel, one scalar factor evaluation at a time."""
    out = np.empty((len(pairs_a), len(pairs_b)), dtype=complex)
    for i in range(len(pairs_a)):
        r, s = pairs_a.receivers[i], pairs_a.sources[i]
        for j in range(len(pairs_b)):
            r2, s2 = pairs_b.receivers[j], pairs_b.sources[j]
            out[i, j] = 0.5 * (kappa_factor(r, r2) * kappa_factor(s, s2)
                               + kappa_factor(s, r2) * kappa_factor(r, s2))
    return out


def residual_kernel_reference(pairs_a: PairSet, pairs_b: PairSet, weighting,
                              k: float):
    """Per-entry quadrature double loop over node pairs (no factorization)."""
    nodes = weighting.quad_r.nodes
    wts = weighting.quad_r.weights
    wmat = weighting.weight_grid_symmetrized()
    full = np.outer(wts, wts) * wmat
    out = np.empty((len(pairs_a), len(pairs_b)), dtype=complex)

    def sym_feature(pairs, n, vi, vj):
        r, s = pairs.receivers[n], pairs.sources[n]
        return 0.5 * (np.exp(1j * k * (vi @ r + vj @ s))
                      + np.exp(1j * k * (vi @ s + vj @ r)))

    for a in range(len(pairs_a)):
        for b in range(len(pairs_b)):
            acc = 0.0 + 0.0j
            for i, vi in enumerate(nodes):
                for j, vj in enumerate(nodes):
                    acc += (full[i, j] * sym_feature(pairs_a, a, vi, vj)
                            * np.conj(sym_feature(pairs_b, b, vi, vj)))
            out[a, b] = acc
    return out


def loo_refit_reference(model, pairs: PairSet, y, lam: float) -> float:
    """Mean squared leave-one-out error by N literal refits."""
    from atfinterp.kernelcore import gram, kernel_vector
    from atfinterp.regress import fit, predict_reverberant

    y = np.asarray(y, dtype=complex)
    n = len(pairs)
    total = 0.0
    for i in range(n):
        keep = [j for j in range(n) if j != i]
        sub = pairs.subset(keep)
        fitted = fit(model, sub, y[keep], lam)
        pred = predict_reverberant(fitted, pairs.subset([i]))[0]
        total += abs(pred - y[i]) ** 2
    return total / n


def fd_laplacian(f, point, h: float = 1e-3) -> complex:
    """Standard 7-point finite-difference Laplacian of a scalar field."""
    point = np.asarray(point, dtype=float)
    center = f(point)
    acc = -6.0 * center
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        acc += f(point + step) + f(point - step)
    return acc / h ** 2


def helmholtz_residual(f, point, k: float, h: float = 1e-3) -> float:
    """|(lap + k^2) f| / (k^2 |f|) at one point."""
    val = f(np.asarray(point, dtype=float))
    res = fd_laplacian(f, point, h) + k ** 2 * val
    return abs(res) / (k ** 2 * abs(val))


def central_difference(f, x, h: float = 1e-5):
    """Componentwise central-difference gradient of scalar f at vector x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_pairs(rng, n: int, spread: float = 0.15, min_gap: float = 0.3):
    """Random source-receiver pairs in two separated blobs."""
    r_center = np.array([0.5, 0.4, 0.3])
    s_center = -r_center
    assert np.linalg.norm(r_center - s_center) > min_gap
    recv = r_center + spread * rng.standard_normal((n, 3))
    srcs = s_center + spread * rng.standard_normal((n, 3))
    return PairSet(receivers=recv, sources=srcs)
