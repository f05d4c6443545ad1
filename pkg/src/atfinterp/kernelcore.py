"""Reciprocal Helmholtz kernels between source-receiver pairs.

Every kernel here is built from plane waves e^{ik v.x}, so any finite kernel
combination satisfies the homogeneous Helmholtz equation exactly in both the
receiver and the source argument, and every kernel is symmetric under
swapping the source/receiver roles inside either argument (acoustic
reciprocity).

A directional weighting phi on the sphere induces the factor kernel

    kappa_phi(a, b) = int_{S^2} phi(v) e^{ik v.(a - b)} dv,

and the pair kernel is the reciprocity-symmetrized product

    kappa(q, q') = 0.5 [kappa_phi(r, r') kappa_phi(s, s')
                        + kappa_phi(s, r') kappa_phi(r, s')].

Closed forms are available for the uniform, sunken-sphere and von
Mises-Fisher mixture weightings; the learned residual weighting is handled
by spherical quadrature over a fixed node set. Gram assembly has a fast
path for pair sets that are full receiver x source grids, which rewrites
everything in terms of small per-point-set matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import mlpweight
from .geometry import FrequencyContext, PairSet, as_points, unit_vector
from .mlpweight import MLPParams
from .sphere import FOUR_PI, DirectionSet, lebedev, tdesign

UNIFORM_PAIR_WEIGHT = 1.0 / (16.0 * np.pi ** 2)

_SERIES_CUTOFF = 1e-4
BETA_MAX = 200.0  # soft cap keeping sinh/cosh far from overflow


class NumericalError(RuntimeError):
    """Linear-algebra failure carrying a diagnostic eigenvalue estimate."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


def eta(z) -> np.ndarray:
    """Unconjugated complex length sqrt(z . z) of (..., 3) vectors.

    For real input this is the Euclidean norm; in general the principal
    square root of the bilinear (not Hermitian) self-product. The kernels
    only feed eta through even functions, so the branch choice is
    immaterial.
    """
    z = np.asarray(z)
    s = np.sum(z * z, axis=-1).astype(complex)
    return np.sqrt(s)


def csinc(z) -> np.ndarray:
    """sin(z)/z for complex z, with a series below |z| = 1e-4 (csinc(0) = 1)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = z[small]
    z2 = zs * zs
    out[small] = 1.0 - z2 / 6.0 * (1.0 - z2 / 20.0)
    zb = z[~small]
    out[~small] = np.sin(zb) / zb
    return out


def csinc_deriv_ratio(z) -> np.ndarray:
    """g(z) = csinc'(z)/z = (cos z - csinc(z)) / z^2, series near zero.

    Even in z, hence branch-independent; shows up in kernel parameter
    derivatives through d/dp csinc(eta) = g(eta) * (0.5 d eta^2 / dp).
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = z[small]
    z2 = zs * zs
    out[small] = -(1.0 / 3.0) + z2 / 30.0 * (1.0 - z2 / 28.0)
    zb = z[~small]
    out[~small] = (np.cos(zb) - np.sin(zb) / zb) / (zb * zb)
    return out


def vmf_normalization(beta) -> np.ndarray:
    """C(beta) = sinh(beta)/beta with C(0) = 1, stable near zero."""
    beta = np.asarray(beta, dtype=float)
    out = np.empty_like(beta)
    small = np.abs(beta) < _SERIES_CUTOFF
    b2 = beta[small] ** 2
    out[small] = 1.0 + b2 / 6.0 * (1.0 + b2 / 20.0)
    out[~small] = np.sinh(beta[~small]) / beta[~small]
    return out


def _vmf_normalization_deriv(beta) -> np.ndarray:
    """C'(beta) = (beta cosh beta - sinh beta) / beta^2, series near zero."""
    beta = np.asarray(beta, dtype=float)
    out = np.empty_like(beta)
    small = np.abs(beta) < _SERIES_CUTOFF
    bs = beta[small]
    out[small] = bs / 3.0 * (1.0 + bs * bs / 10.0)
    bb = beta[~small]
    out[~small] = (bb * np.cosh(bb) - np.sinh(bb)) / (bb * bb)
    return out


# ---------------------------------------------------------------------------
# weighting variants


@dataclass(frozen=True)
class UniformWeighting:
    """phi(v) = 1 / (4 pi): no preferred direction."""

    def phi(self, vhats) -> np.ndarray:
        vhats = as_points(vhats, "vhats")
        return np.full(len(vhats), 1.0 / FOUR_PI)


@dataclass(frozen=True)
class SunkenWeighting:
    """Weighting suppressed along +-axis: (1/4pi)(1 + gamma^2 - cosh(zeta v.axis)/cosh zeta).

    gamma**2 is the floor at the poles; zeta controls how sharply the
    suppression is concentrated around the axis. Nonnegative for all
    parameter values.
    """

    gamma: float
    zeta: float
    axis: np.ndarray

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0 < self.zeta <= BETA_MAX:
            raise ValueError(f"zeta must lie in (0, {BETA_MAX}]")
        axis = np.ascontiguousarray(unit_vector(self.axis))
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)

    def phi(self, vhats) -> np.ndarray:
        vhats = as_points(vhats, "vhats")
        proj = vhats @ self.axis
        return (1.0 + self.gamma ** 2
                - np.cosh(self.zeta * proj) / np.cosh(self.zeta)) / FOUR_PI


@dataclass(frozen=True)
class DirectedWeighting:
    """Convex von Mises-Fisher mixture phi(v) = sum_d alpha_d e^{beta_d v.v_d} / (4 pi C(beta_d)).

    alphas live on the simplex; betas are nonnegative concentrations. The
    component at pinned_index keeps beta = 0 and its direction fixed (by
    convention the axis joining the two region centers), so the optimizer
    can never prioritize the direct-path direction.
    """

    alphas: np.ndarray
    betas: np.ndarray
    directions: np.ndarray
    pinned_index: int = 0

    def __post_init__(self):
        # copy so the caller's arrays are never locked
        alphas = np.array(self.alphas, dtype=float, order="C")
        betas = np.array(self.betas, dtype=float, order="C")
        directions = np.array(self.directions, dtype=float, order="C")
        d = len(alphas)
        if betas.shape != (d,) or directions.shape != (d, 3):
            raise ValueError("alphas, betas and directions must agree in length")
        if np.any(alphas < -1e-12):
            raise ValueError("alphas must be nonnegative")
        if abs(alphas.sum() - 1.0) > 1e-10:
            raise ValueError("alphas must sum to 1")
        if np.any(betas < 0) or np.any(betas > BETA_MAX):
            raise ValueError(f"betas must lie in [0, {BETA_MAX}]")
        if not 0 <= self.pinned_index < d:
            raise ValueError("pinned_index out of range")
        if betas[self.pinned_index] != 0.0:
            raise ValueError("beta at the pinned component must be 0")
        if np.max(np.abs(np.linalg.norm(directions, axis=1) - 1.0)) > 1e-12:
            raise ValueError("directions must be unit vectors")
        for a in (alphas, betas, directions):
            a.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "directions", directions)

    @property
    def n_components(self) -> int:
        return len(self.alphas)

    def with_params(self, alphas, betas) -> "DirectedWeighting":
        return replace(self, alphas=np.asarray(alphas, dtype=float),
                       betas=np.asarray(betas, dtype=float))

    def phi(self, vhats) -> np.ndarray:
        vhats = as_points(vhats, "vhats")
        c = vmf_normalization(self.betas)
        out = np.zeros(len(vhats))
        for d in range(self.n_components):
            out += (self.alphas[d] / (FOUR_PI * c[d])
                    * np.exp(self.betas[d] * (vhats @ self.directions[d])))
        return out


def directed_weighting_for_axis(axis, degree: int = 4, beta_init: float = 1.0,
                                alphas=None, betas=None) -> DirectedWeighting:
    """Mixture over a spherical-design direction grid with the first node pinned to axis.

    Default state: uniform alphas, beta = beta_init on free components and 0
    on the pinned one.
    """
    directions = np.array(tdesign(degree).nodes)
    directions[0] = unit_vector(axis)
    d = len(directions)
    if alphas is None:
        alphas = np.full(d, 1.0 / d)
    if betas is None:
        betas = np.full(d, float(beta_init))
        betas[0] = 0.0
    return DirectedWeighting(alphas=alphas, betas=betas, directions=directions,
                             pinned_index=0)


@dataclass(frozen=True)
class ResidualWeighting:
    """Learned nonnegative weight w(rhat, shat) handled by spherical quadrature.

    Both spheres must use the same quadrature node set; the weight matrix is
    symmetrized across the two spheres during kernel assembly, which realizes
    reciprocity exactly whatever the network outputs.
    """

    theta: MLPParams
    quad_r: DirectionSet
    quad_s: DirectionSet

    def __post_init__(self):
        if not (np.array_equal(self.quad_r.nodes, self.quad_s.nodes)
                and np.array_equal(self.quad_r.weights, self.quad_s.weights)):
            raise ValueError("residual weighting needs identical quadrature "
                             "sets on both spheres")

    def with_theta(self, theta: MLPParams) -> "ResidualWeighting":
        return replace(self, theta=theta)

    def weight_grid(self) -> np.ndarray:
        """Raw network outputs at all node pairs, shape (nq, nq)."""
        return mlpweight.forward_grid(self.theta, self.quad_r, self.quad_s)

    def weight_grid_symmetrized(self) -> np.ndarray:
        w = self.weight_grid()
        return 0.5 * (w + w.T)


def residual_weighting(theta: MLPParams | None = None, n_quad: int = 110,
                       seed: int = 0, scale: float = 0.1) -> ResidualWeighting:
    """Residual weighting over a Lebedev grid; fresh small-scale MLP by default."""
    quad = lebedev(n_quad)
    if theta is None:
        theta = mlpweight.init(seed, scale)
    return ResidualWeighting(theta=theta, quad_r=quad, quad_s=quad)


@dataclass(frozen=True)
class SumWeighting:
    """Directional mixture plus learned residual; the kernels add."""

    directed: DirectedWeighting
    residual: ResidualWeighting


@dataclass(frozen=True)
class KernelModel:
    """A weighting variant bound to a frequency context."""

    weighting: object
    context: FrequencyContext


# ---------------------------------------------------------------------------
# closed-form factor kernels (pointwise, broadcasting)


def _pair_diff(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a - b


def kappa_phi_uniform(a, b, ctx: FrequencyContext):
    """j0(k |a-b|): factor kernel of the uniform weighting."""
    d = np.linalg.norm(_pair_diff(a, b), axis=-1)
    return csinc(ctx.wavenumber * d).real


def kappa_phi_sunken(a, b, ctx: FrequencyContext, weighting: SunkenWeighting):
    """Closed form of the sunken-sphere factor kernel."""
    diff = _pair_diff(a, b)
    k = ctx.wavenumber
    dist = np.linalg.norm(diff, axis=-1)
    kd = k * diff
    zeta_axis = 1j * weighting.zeta * weighting.axis
    both = (csinc(eta(kd - zeta_axis)) + csinc(eta(kd + zeta_axis)))
    return ((1.0 + weighting.gamma ** 2) * csinc(k * dist)
            - both / (2.0 * np.cosh(weighting.zeta)))


def kappa_phi_directed(a, b, ctx: FrequencyContext, weighting: DirectedWeighting):
    """Closed form of the von Mises-Fisher mixture factor kernel."""
    diff = _pair_diff(a, b)
    k = ctx.wavenumber
    c = vmf_normalization(weighting.betas)
    out = np.zeros(diff.shape[:-1], dtype=complex)
    for d in range(weighting.n_components):
        arg = eta(k * diff - 1j * weighting.betas[d] * weighting.directions[d])
        out += weighting.alphas[d] / c[d] * csinc(arg)
    return out


def symmetrized_kernel(kappa_phi, q: PairSet, q2: PairSet):
    """Lift a factor kernel to the reciprocal pair kernel, elementwise.

    kappa_phi maps two (n, 3) position arrays to (n,) factor values; q and
    q2 must have equal length. Returns
    0.5 [k(r,r') k(s,s') + k(s,r') k(r,s')] per pair.
    """
    if len(q) != len(q2):
        raise ValueError("pair sets must have equal length")
    r, s = q.receivers, q.sources
    r2, s2 = q2.receivers, q2.sources
    return 0.5 * (np.asarray(kappa_phi(r, r2)) * np.asarray(kappa_phi(s, s2))
                  + np.asarray(kappa_phi(s, r2)) * np.asarray(kappa_phi(r, s2)))


# ---------------------------------------------------------------------------
# residual kernel by quadrature


def plane_wave_features(pairs: PairSet, quad_r: DirectionSet, quad_s: DirectionSet,
                        ctx: FrequencyContext):
    """Plane-wave feature matrices of a pair set on a quadrature node-pair grid.

    Returns (direct, swapped), each of shape (nr * ns, n): row (i, j) of the
    direct block holds e^{ik(v_i . r_n + u_j . s_n)}, the swapped block has
    receiver and source exchanged. All entries have unit modulus.
    """
    k = ctx.wavenumber
    er = np.exp(1j * k * (quad_r.nodes @ pairs.receivers.T))
    es = np.exp(1j * k * (quad_s.nodes @ pairs.sources.T))
    er_sw = np.exp(1j * k * (quad_r.nodes @ pairs.sources.T))
    es_sw = np.exp(1j * k * (quad_s.nodes @ pairs.receivers.T))
    n = len(pairs)
    direct = (er[:, None, :] * es[None, :, :]).reshape(-1, n)
    swapped = (er_sw[:, None, :] * es_sw[None, :, :]).reshape(-1, n)
    return direct, swapped


def _residual_weight_matrix(weighting: ResidualWeighting) -> np.ndarray:
    """Quadrature-weighted symmetrized weight matrix, shape (nq, nq)."""
    wsym = weighting.weight_grid_symmetrized()
    return np.outer(weighting.quad_r.weights, weighting.quad_s.weights) * wsym


def kappa_residual(q: PairSet, q2: PairSet, weighting: ResidualWeighting,
                   ctx: FrequencyContext):
    """Residual kernel values, elementwise over two equal-length pair sets."""
    if len(q) != len(q2):
        raise ValueError("pair sets must have equal length")
    wmat = _residual_weight_matrix(weighting).ravel()
    fd, fs = plane_wave_features(q, weighting.quad_r, weighting.quad_s, ctx)
    gd, gs = plane_wave_features(q2, weighting.quad_r, weighting.quad_s, ctx)
    e1 = 0.5 * (fd + fs)
    e2 = 0.5 * (gd + gs)
    return np.einsum("f,fn,fn->n", wmat, e1, np.conj(e2))


# ---------------------------------------------------------------------------
# cross-Gram assembly


def _phi_cross(weighting, ctx, a_points, b_points) -> np.ndarray:
    """Factor-kernel matrix (nA, nB) for an analytic weighting."""
    a = a_points[:, None, :]
    b = b_points[None, :, :]
    if isinstance(weighting, UniformWeighting):
        return kappa_phi_uniform(a, b, ctx).astype(complex)
    if isinstance(weighting, SunkenWeighting):
        return kappa_phi_sunken(a, b, ctx, weighting)
    if isinstance(weighting, DirectedWeighting):
        return kappa_phi_directed(a, b, ctx, weighting)
    raise TypeError(f"no closed-form factor kernel for {type(weighting).__name__}")


def _analytic_cross(weighting, ctx, rows: PairSet, cols: PairSet) -> np.ndarray:
    if rows.is_grid and cols.is_grid:
        x_rr = _phi_cross(weighting, ctx, rows.receiver_points, cols.receiver_points)
        x_ss = _phi_cross(weighting, ctx, rows.source_points, cols.source_points)
        x_sr = _phi_cross(weighting, ctx, rows.source_points, cols.receiver_points)
        x_rs = _phi_cross(weighting, ctx, rows.receiver_points, cols.source_points)
        k4 = (x_ss[:, None, :, None] * x_rr[None, :, None, :]
              + x_sr[:, None, None, :] * x_rs[None, :, :, None])
        return 0.5 * k4.reshape(len(rows), len(cols))
    x_rr = _phi_cross(weighting, ctx, rows.receivers, cols.receivers)
    x_ss = _phi_cross(weighting, ctx, rows.sources, cols.sources)
    x_sr = _phi_cross(weighting, ctx, rows.sources, cols.receivers)
    x_rs = _phi_cross(weighting, ctx, rows.receivers, cols.sources)
    return 0.5 * (x_rr * x_ss + x_sr * x_rs)


def _residual_phases(weighting: ResidualWeighting, ctx, points) -> np.ndarray:
    """e^{ik v_i . x_m} for all quadrature nodes and points, shape (nq, m)."""
    return np.exp(1j * ctx.wavenumber * (weighting.quad_r.nodes @ points.T))


def _residual_cross(weighting: ResidualWeighting, ctx, rows: PairSet,
                    cols: PairSet) -> np.ndarray:
    wmat = _residual_weight_matrix(weighting)
    if rows.is_grid and cols.is_grid:
        pr = _residual_phases(weighting, ctx, rows.receiver_points)
        ps = _residual_phases(weighting, ctx, rows.source_points)
        qr = np.conj(_residual_phases(weighting, ctx, cols.receiver_points))
        qs = np.conj(_residual_phases(weighting, ctx, cols.source_points))
        m_r, l_r = len(rows.receiver_points), len(rows.source_points)
        m_c, l_c = len(cols.receiver_points), len(cols.source_points)
        nq = len(weighting.quad_r)
        # direct x direct: sum_ij W_ij (Pr_i,m Qr*_i,m') (Ps_j,l Qs*_j,l')
        rr = (pr[:, :, None] * qr[:, None, :]).reshape(nq, -1)
        ss = (ps[:, :, None] * qs[:, None, :]).reshape(nq, -1)
        g1 = rr.T @ (wmat @ ss)
        g1 = g1.reshape(m_r, m_c, l_r, l_c).transpose(2, 0, 3, 1)
        # direct x swapped: sum_ij W_ij (Pr_i,m Qs*_i,l') (Ps_j,l Qr*_j,m')
        rs = (pr[:, :, None] * qs[:, None, :]).reshape(nq, -1)
        sr = (ps[:, :, None] * qr[:, None, :]).reshape(nq, -1)
        g2 = rs.T @ (wmat @ sr)
        g2 = g2.reshape(m_r, l_c, l_r, m_c).transpose(2, 0, 1, 3)
        return 0.5 * (g1 + g2).reshape(len(rows), len(cols))
    fd, fs = plane_wave_features(rows, weighting.quad_r, weighting.quad_s, ctx)
    e_rows = 0.5 * (fd + fs)
    weighted = (e_rows * wmat.ravel()[:, None]).conj().T
    out = np.empty((len(rows), len(cols)), dtype=complex)
    # feature blocks are nq^2 x n; chunk the column side to bound memory
    block = max(1, 4_000_000 // e_rows.shape[0])
    for lo in range(0, len(cols), block):
        sub = cols.subset(np.arange(lo, min(lo + block, len(cols))))
        gd, gs = plane_wave_features(sub, weighting.quad_r, weighting.quad_s, ctx)
        out[:, lo:lo + block] = np.conj(weighted @ (0.5 * (gd + gs)))
    return out


def cross_gram(model: KernelModel, rows: PairSet, cols: PairSet) -> np.ndarray:
    """Kernel matrix [kappa(rows_i, cols_j)], shape (len(rows), len(cols))."""
    w = model.weighting
    if isinstance(w, (UniformWeighting, SunkenWeighting, DirectedWeighting)):
        return _analytic_cross(w, model.context, rows, cols)
    if isinstance(w, ResidualWeighting):
        return _residual_cross(w, model.context, rows, cols)
    if isinstance(w, SumWeighting):
        return (_analytic_cross(w.directed, model.context, rows, cols)
                + _residual_cross(w.residual, model.context, rows, cols))
    raise TypeError(f"unknown weighting {type(w).__name__}")


def gram(model: KernelModel, pairs: PairSet) -> np.ndarray:
    """Hermitian Gram matrix of a pair set (averaged with its adjoint)."""
    if len(pairs) == 0:
        raise ValueError("pairs must be nonempty")
    k = cross_gram(model, pairs, pairs)
    return 0.5 * (k + k.conj().T)


def kernel_vector(model: KernelModel, queries: PairSet, pairs: PairSet) -> np.ndarray:
    """Rows kappa(query, pair_n) against a measurement pair set, (nq, n)."""
    if len(pairs) == 0:
        raise ValueError("pairs must be nonempty")
    return cross_gram(model, queries, pairs)


def gram_to_file(k: np.ndarray, path) -> None:
    """Raw little-endian complex128 dump (interleaved re/im doubles)."""
    np.ascontiguousarray(k, dtype="<c16").tofile(path)


def gram_from_file(path) -> np.ndarray:
    flat = np.fromfile(path, dtype="<c16")
    n = int(round(np.sqrt(flat.size)))
    if n * n != flat.size:
        raise ValueError(f"{path}: not a square complex matrix ({flat.size} entries)")
    return flat.reshape(n, n).astype(complex)


# ---------------------------------------------------------------------------
# Gram derivative contractions
#
# The hyperparameter optimizer needs, for each kernel parameter p, the scalar
# Re sum_{n,n'} (dK/dp)[n,n'] wc[n',n] for one fixed adjoint matrix wc per
# iteration. For grid pair sets the derivative matrices factor over the point
# sets, so the big contraction against wc happens once per factor slot and
# every parameter only touches point-set-sized matrices afterwards.


def _factor_adjoints(weighting, ctx, pairs: PairSet, wc: np.ndarray):
    """Adjoint matrices for the four factor slots of the pair kernel.

    Returns [(a_points, b_points, adjoint), ...] such that the wc-contraction
    of the Gram derivative is 0.5 * Re sum(d_factor(a, b) * adjoint) summed
    over the four slots (rr, ss, sr, rs), where d_factor is the derivative
    of the factor kernel on the full a x b point cross.
    """
    if pairs.is_grid:
        rp, sp = pairs.receiver_points, pairs.source_points
        m, l = len(rp), len(sp)
        x_rr = _phi_cross(weighting, ctx, rp, rp)
        x_ss = _phi_cross(weighting, ctx, sp, sp)
        x_sr = _phi_cross(weighting, ctx, sp, rp)
        x_rs = _phi_cross(weighting, ctx, rp, sp)
        wc4 = wc.reshape(l, m, l, m)
        a1 = np.tensordot(x_ss, wc4, axes=([0, 1], [2, 0])).T
        a2 = np.tensordot(x_rr, wc4, axes=([0, 1], [3, 1])).T
        a3 = np.tensordot(x_rs, wc4, axes=([0, 1], [3, 0])).T
        a4 = np.tensordot(x_sr, wc4, axes=([0, 1], [2, 1])).T
        return [(rp, rp, a1), (sp, sp, a2), (sp, rp, a3), (rp, sp, a4)]
    r, s = pairs.receivers, pairs.sources
    wct = wc.T
    x_rr = _phi_cross(weighting, ctx, r, r)
    x_ss = _phi_cross(weighting, ctx, s, s)
    x_sr = _phi_cross(weighting, ctx, s, r)
    x_rs = _phi_cross(weighting, ctx, r, s)
    return [(r, r, x_ss * wct), (s, s, x_rr * wct),
            (s, r, x_rs * wct), (r, s, x_sr * wct)]


def _sunken_factor_derivs(weighting: SunkenWeighting, ctx, a_pts, b_pts):
    """(d/dgamma, d/dzeta) of the sunken factor kernel on a point cross."""
    diff = a_pts[:, None, :] - b_pts[None, :, :]
    k = ctx.wavenumber
    zeta = weighting.zeta
    dist = np.linalg.norm(diff, axis=-1)
    proj = diff @ weighting.axis
    kd = k * diff
    zeta_axis = 1j * zeta * weighting.axis
    eta_m = eta(kd - zeta_axis)
    eta_p = eta(kd + zeta_axis)
    j0_m, j0_p = csinc(eta_m), csinc(eta_p)
    g_m, g_p = csinc_deriv_ratio(eta_m), csinc_deriv_ratio(eta_p)
    d_gamma = 2.0 * weighting.gamma * csinc(k * dist)
    cosh_z = np.cosh(zeta)
    d_zeta = (-(g_m * (-zeta - 1j * k * proj) + g_p * (-zeta + 1j * k * proj))
              / (2.0 * cosh_z)
              + (j0_m + j0_p) * np.sinh(zeta) / (2.0 * cosh_z ** 2))
    return d_gamma, d_zeta


def _directed_component_factors(weighting: DirectedWeighting, ctx, a_pts, b_pts):
    """Per-component factor values and their beta derivatives on a point cross.

    Returns (comp, dcomp) stacks of shape (D, nA, nB): comp[d] is the
    unit-coefficient vMF factor j0(eta)/C(beta_d); dcomp[d] its derivative
    in beta_d.
    """
    diff = a_pts[:, None, :] - b_pts[None, :, :]
    k = ctx.wavenumber
    d_count = weighting.n_components
    c = vmf_normalization(weighting.betas)
    dc = _vmf_normalization_deriv(weighting.betas)
    comp = np.empty((d_count,) + diff.shape[:-1], dtype=complex)
    dcomp = np.empty_like(comp)
    for d in range(d_count):
        beta = weighting.betas[d]
        vhat = weighting.directions[d]
        arg = eta(k * diff - 1j * beta * vhat)
        comp[d] = csinc(arg) / c[d]
        proj = diff @ vhat
        dcomp[d] = (csinc_deriv_ratio(arg) * (-beta - 1j * k * proj)
                    - comp[d] * dc[d]) / c[d]
    return comp, dcomp


def _analytic_gradients(weighting, ctx, pairs: PairSet, wc: np.ndarray) -> dict:
    combos = _factor_adjoints(weighting, ctx, pairs, wc)
    if isinstance(weighting, SunkenWeighting):
        g_gamma = 0.0
        g_zeta = 0.0
        for a_pts, b_pts, adj in combos:
            d_gamma, d_zeta = _sunken_factor_derivs(weighting, ctx, a_pts, b_pts)
            g_gamma += np.sum(d_gamma * adj).real
            g_zeta += np.sum(d_zeta * adj).real
        return {"gamma": 0.5 * g_gamma, "zeta": 0.5 * g_zeta}
    if isinstance(weighting, DirectedWeighting):
        d_count = weighting.n_components
        g_alpha = np.zeros(d_count)
        g_beta = np.zeros(d_count)
        for a_pts, b_pts, adj in combos:
            comp, dcomp = _directed_component_factors(weighting, ctx, a_pts, b_pts)
            g_alpha += np.real(np.tensordot(comp, adj, axes=([1, 2], [0, 1])))
            g_beta += np.real(np.tensordot(dcomp, adj, axes=([1, 2], [0, 1])))
        return {"alphas": 0.5 * g_alpha, "betas": 0.5 * weighting.alphas * g_beta}
    raise TypeError(f"no analytic gradients for {type(weighting).__name__}")


def _residual_gradient(weighting: ResidualWeighting, ctx, pairs: PairSet,
                       wc: np.ndarray) -> MLPParams:
    """Gradient of the wc-contraction through the residual kernel, as MLPParams."""
    quad = weighting.quad_r
    nq = len(quad)
    if pairs.is_grid:
        pr = _residual_phases(weighting, ctx, pairs.receiver_points)
        ps = _residual_phases(weighting, ctx, pairs.source_points)
        m, l = pr.shape[1], ps.shape[1]
        wc4 = wc.reshape(l, m, l, m)
        v1 = wc4.transpose(3, 1, 2, 0).reshape(m * m, l * l)
        rr = (pr[:, :, None] * np.conj(pr)[:, None, :]).reshape(nq, -1)
        ss = (ps[:, :, None] * np.conj(ps)[:, None, :]).reshape(nq, -1)
        s_a = rr @ (v1 @ ss.T)
        v2 = wc4.transpose(3, 0, 2, 1).reshape(m * l, l * m)
        rs = (pr[:, :, None] * np.conj(ps)[:, None, :]).reshape(nq, -1)
        sr = (ps[:, :, None] * np.conj(pr)[:, None, :]).reshape(nq, -1)
        s_b = rs @ (v2 @ sr.T)
        s_mat = 0.25 * (s_a + s_b + s_b.T + s_a.T)
    else:
        fd, fs = plane_wave_features(pairs, weighting.quad_r, weighting.quad_s, ctx)
        feats = 0.5 * (fd + fs)
        s_mat = np.einsum("fn,fn->f", feats @ wc.T, np.conj(feats)).reshape(nq, nq)
    upstream = np.real(s_mat) * np.outer(quad.weights, quad.weights)
    return mlpweight.backprop(weighting.theta, weighting.quad_r,
                              weighting.quad_s, upstream)


def gram_gradients(model: KernelModel, pairs: PairSet, wc: np.ndarray) -> dict:
    """Contractions Re sum (dK/dp)[n,n'] wc[n',n] for every kernel parameter.

    Keys by weighting kind: directed -> "alphas", "betas" (arrays); sunken ->
    "gamma", "zeta" (floats); residual -> "theta" (MLPParams); sum -> the
    union. Uniform has no parameters and yields {}.
    """
    w = model.weighting
    ctx = model.context
    if isinstance(w, UniformWeighting):
        return {}
    if isinstance(w, (SunkenWeighting, DirectedWeighting)):
        return _analytic_gradients(w, ctx, pairs, wc)
    if isinstance(w, ResidualWeighting):
        return {"theta": _residual_gradient(w, ctx, pairs, wc)}
    if isinstance(w, SumWeighting):
        out = _analytic_gradients(w.directed, ctx, pairs, wc)
        out["theta"] = _residual_gradient(w.residual, ctx, pairs, wc)
        return out
    raise TypeError(f"unknown weighting {type(w).__name__}")
