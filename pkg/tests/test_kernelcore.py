import numpy as np
import pytest

from atfinterp import mlpweight
from atfinterp.geometry import FrequencyContext, PairSet
from atfinterp.kernelcore import (BETA_MAX, UNIFORM_PAIR_WEIGHT,
                                  DirectedWeighting, KernelModel,
                                  NumericalError, ResidualWeighting,
                                  SumWeighting, SunkenWeighting,
                                  UniformWeighting, cross_gram, csinc,
                                  csinc_deriv_ratio,
                                  directed_weighting_for_axis, eta, gram,
                                  gram_from_file, gram_to_file,
                                  kappa_phi_directed, kappa_phi_sunken,
                                  kappa_phi_uniform, kappa_residual,
                                  kernel_vector, plane_wave_features,
                                  residual_weighting, symmetrized_kernel,
                                  vmf_normalization)
from atfinterp.sphere import integrate, lebedev, tdesign
from oracles import (ORACLE_QUAD, helmholtz_residual, pair_kernel_reference,
                     quad_factor_kernel, random_pairs,
                     residual_kernel_reference)

CTX = FrequencyContext(800.0)


# --- scalar helpers ---------------------------------------------------------


def test_eta_real_vector_is_norm():
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = rng.standard_normal(3)
        assert np.isclose(eta(d), np.linalg.norm(d))
    assert eta(np.zeros(3)) == 0.0


def test_csinc_basic_values():
    assert csinc(0.0) == 1.0
    for x in (0.5, 2.0, 9.7):
        assert np.isclose(csinc(x), np.sin(x) / x, rtol=1e-14)


def test_csinc_series_joins_direct_branch():
    # straddle the series cutoff; both branches must agree
    for mag in (5e-5, 9.9e-5, 1.01e-4, 2e-4):
        for z in (mag, mag * 1j, mag * (0.6 + 0.8j)):
            direct = np.sin(complex(z)) / complex(z)
            assert abs(csinc(z) - direct) < 1e-15


def test_csinc_even_in_sign():
    # the complex length is only defined up to sign; csinc must not care
    rng = np.random.default_rng(1)
    for _ in range(40):
        z = complex(rng.standard_normal(), rng.standard_normal()) * 5.0
        assert np.isclose(csinc(z), csinc(-z), rtol=1e-14)


def test_csinc_imaginary_axis_is_sinh():
    for beta in (0.3, 2.0, 10.0, 20.0):
        assert np.isclose(csinc(1j * beta).real, np.sinh(beta) / beta,
                          rtol=1e-13)
        assert abs(csinc(1j * beta).imag) < 1e-13 * np.sinh(beta) / beta


def test_vmf_normalization():
    assert vmf_normalization(0.0) == 1.0
    for b in (1e-6, 0.5, 8.0, 20.0):
        assert np.isclose(vmf_normalization(b), np.sinh(b) / b, rtol=1e-13)


def test_csinc_deriv_ratio_matches_fd():
    h = 1e-6
    for z in (0.8, 3.0 + 0.5j, 1e-5):
        fd = (csinc(z + h) - csinc(z - h)) / (2 * h)
        assert abs(csinc_deriv_ratio(z) * z - fd) < 1e-8


# --- weighting parameter validation ----------------------------------------


def test_sunken_weighting_validation():
    w = SunkenWeighting(gamma=0.5, zeta=4.0, axis=(0, 0, 2.0))
    assert np.isclose(np.linalg.norm(w.axis), 1.0)
    with pytest.raises(ValueError):
        SunkenWeighting(gamma=-0.1, zeta=4.0, axis=(0, 0, 1.0))
    with pytest.raises(ValueError):
        SunkenWeighting(gamma=0.5, zeta=0.0, axis=(0, 0, 1.0))


def test_directed_weighting_validation():
    dirs = tdesign(3).nodes[:3]
    ok = DirectedWeighting(alphas=(0.2, 0.3, 0.5), betas=(0.0, 1.0, 2.0),
                           directions=dirs, pinned_index=0)
    assert ok.n_components == 3
    with pytest.raises(ValueError):
        DirectedWeighting(alphas=(0.2, 0.3, 0.4), betas=(0.0, 1.0, 2.0),
                          directions=dirs, pinned_index=0)
    with pytest.raises(ValueError):
        DirectedWeighting(alphas=(0.2, 0.3, 0.5), betas=(1.0, 1.0, 2.0),
                          directions=dirs, pinned_index=0)
    with pytest.raises(ValueError):
        DirectedWeighting(alphas=(0.2, 0.3, 0.5), betas=(0.0, 1.0, -2.0),
                          directions=dirs, pinned_index=0)
    with pytest.raises(ValueError):
        DirectedWeighting(alphas=(0.2, 0.3, 0.5), betas=(0.0, 1.0, 2.0),
                          directions=2.0 * dirs, pinned_index=0)


def test_directed_weighting_for_axis_defaults():
    axis = np.array([0.3, -0.5, 0.8])
    w = directed_weighting_for_axis(axis, degree=4)
    assert w.n_components == 25
    assert np.allclose(w.directions[0], axis / np.linalg.norm(axis))
    assert np.allclose(w.alphas, 1.0 / 25)
    assert w.betas[w.pinned_index] == 0.0
    assert w.pinned_index == 0


def test_residual_weighting_needs_shared_nodes():
    theta = mlpweight.init(0, 0.1)
    with pytest.raises(ValueError):
        ResidualWeighting(theta=theta, quad_r=lebedev(26), quad_s=lebedev(110))


# --- weighting densities ----------------------------------------------------


def test_uniform_phi_constant():
    w = UniformWeighting()
    v = tdesign(3).nodes
    assert np.allclose(w.phi(v), 1.0 / (4 * np.pi))


def test_sunken_phi_nonnegative_and_suppresses_axis():
    w = SunkenWeighting(gamma=0.4, zeta=5.0, axis=(0, 0, 1.0))
    quad = lebedev(590)
    vals = w.phi(quad.nodes)
    assert np.all(vals >= -1e-15)
    on_axis = w.phi(np.array([[0.0, 0.0, 1.0]]))[0]
    equator = w.phi(np.array([[1.0, 0.0, 0.0]]))[0]
    assert on_axis < equator


def test_sunken_phi_integral_matches_diagonal():
    # total mass equals the kernel's coincident-argument value
    w = SunkenWeighting(gamma=0.7, zeta=3.0, axis=(0.0, 1.0, 0.0))
    total = integrate(lambda v: w.phi(v), lebedev(590)).real
    p = np.array([0.2, 0.1, -0.3])
    diag = kappa_phi_sunken(p, p, CTX, w)
    assert np.isclose(total, complex(diag).real, rtol=1e-10)
    assert np.isclose(total, 1.0 + 0.7 ** 2 - np.tanh(3.0) / 3.0, rtol=1e-10)


def test_directed_phi_is_normalized_mixture():
    rng = np.random.default_rng(3)
    w = directed_weighting_for_axis(np.array([1.0, 1.0, 0.0]), degree=3)
    al = rng.random(16)
    al /= al.sum()
    be = rng.uniform(0.0, 15.0, 16)
    be[0] = 0.0
    w = w.with_params(alphas=al, betas=be)
    total = integrate(lambda v: w.phi(v), lebedev(590)).real
    assert np.isclose(total, 1.0, rtol=1e-9)
    assert np.all(w.phi(lebedev(110).nodes) >= 0.0)


# --- closed forms against dense quadrature ----------------------------------


def test_uniform_factor_against_quadrature():
    rng = np.random.default_rng(4)
    k = CTX.wavenumber
    for _ in range(5):
        a, b = rng.standard_normal((2, 3)) * 0.3
        want = quad_factor_kernel(lambda v: np.full(len(v), 1 / (4 * np.pi)),
                                  a, b, k)
        got = kappa_phi_uniform(a, b, CTX)
        assert abs(got - want) < 1e-8
    assert np.isclose(kappa_phi_uniform(a, a, CTX), 1.0)


def test_sunken_factor_against_quadrature():
    rng = np.random.default_rng(5)
    k = CTX.wavenumber
    w = SunkenWeighting(gamma=0.5, zeta=4.0, axis=(0.2, -0.4, 0.6))
    for _ in range(5):
        a, b = rng.standard_normal((2, 3)) * 0.3
        want = quad_factor_kernel(w.phi, a, b, k)
        got = complex(kappa_phi_sunken(a, b, CTX, w))
        assert abs(got - want) <= 1e-7 * max(abs(want), 1.0)


def test_directed_factor_against_quadrature():
    rng = np.random.default_rng(6)
    k = CTX.wavenumber
    w = directed_weighting_for_axis(np.array([0.1, 0.9, -0.2]), degree=3)
    al = rng.random(16)
    al /= al.sum()
    be = rng.uniform(0.0, 18.0, 16)
    be[0] = 0.0
    w = w.with_params(alphas=al, betas=be)
    for _ in range(5):
        a, b = rng.standard_normal((2, 3)) * 0.3
        want = quad_factor_kernel(w.phi, a, b, k)
        got = complex(kappa_phi_directed(a, b, CTX, w))
        assert abs(got - want) <= 1e-7 * max(abs(want), 1.0)


def test_directed_single_zero_lobe_reduces_to_uniform():
    w = DirectedWeighting(alphas=(1.0,), betas=(0.0,),
                          directions=np.array([[0.0, 0.0, 1.0]]),
                          pinned_index=0)
    rng = np.random.default_rng(7)
    for _ in range(10):
        a, b = rng.standard_normal((2, 3)) * 0.4
        assert np.isclose(complex(kappa_phi_directed(a, b, CTX, w)),
                          complex(kappa_phi_uniform(a, b, CTX)), rtol=1e-12)


def test_directed_diagonal_is_alpha_sum():
    rng = np.random.default_rng(8)
    w0 = directed_weighting_for_axis(np.array([0.5, 0.5, -0.5]), degree=3)
    for _ in range(20):
        al = rng.random(16)
        al /= al.sum()
        be = rng.uniform(0.0, 20.0, 16)
        be[0] = 0.0
        w = w0.with_params(alphas=al, betas=be)
        p = rng.standard_normal(3) * 0.3
        assert abs(complex(kappa_phi_directed(p, p, CTX, w)) - 1.0) < 1e-12


# --- symmetrized pair kernel -------------------------------------------------


def test_symmetrized_kernel_reciprocity():
    rng = np.random.default_rng(9)
    w = SunkenWeighting(gamma=0.3, zeta=2.0, axis=(0, 0, 1.0))

    def factor(a, b):
        return kappa_phi_sunken(a, b, CTX, w)

    q = random_pairs(rng, 4)
    q2 = random_pairs(rng, 4)
    base = symmetrized_kernel(factor, q, q2)
    assert np.allclose(symmetrized_kernel(factor, q.swapped(), q2), base,
                       rtol=1e-12)
    assert np.allclose(symmetrized_kernel(factor, q, q2.swapped()), base,
                       rtol=1e-12)


def test_symmetrized_kernel_directed_diagonal():
    rng = np.random.default_rng(10)
    w = directed_weighting_for_axis(np.array([0.0, 1.0, 0.0]), degree=3)

    def factor(a, b):
        return kappa_phi_directed(a, b, CTX, w)

    q = random_pairs(rng, 3)
    diag = symmetrized_kernel(factor, q, q)
    assert diag.shape == (3,)
    for i in range(3):
        r, s = q.receivers[i][None, :], q.sources[i][None, :]
        # factor(r, r) = factor(s, s) = 1 on the diagonal
        want = 0.5 * (1.0 + factor(s, r)[0] * factor(r, s)[0])
        assert np.isclose(diag[i], want, rtol=1e-12)


# --- plane-wave features and residual kernel --------------------------------


def test_features_at_origin_are_ones():
    pairs = PairSet(receivers=np.zeros((1, 3)), sources=np.zeros((1, 3)))
    quad = lebedev(26)
    direct, swapped = plane_wave_features(pairs, quad, quad, CTX)
    assert direct.shape == (26 * 26, 1)
    assert np.allclose(direct, 1.0)
    assert np.allclose(swapped, 1.0)


def test_features_unit_modulus():
    rng = np.random.default_rng(11)
    pairs = random_pairs(rng, 4)
    quad = lebedev(26)
    direct, swapped = plane_wave_features(pairs, quad, quad, CTX)
    assert np.allclose(np.abs(direct), 1.0)
    assert np.allclose(np.abs(swapped), 1.0)


def test_residual_kernel_matches_double_loop():
    rng = np.random.default_rng(12)
    w = residual_weighting(theta=mlpweight.init(3, 0.5), n_quad=26)
    q = random_pairs(rng, 3)
    q2 = random_pairs(rng, 3)
    want = residual_kernel_reference(q, q2, w, CTX.wavenumber)
    got = cross_gram(KernelModel(weighting=w, context=CTX), q, q2)
    assert np.max(np.abs(got - want)) < 1e-12 * np.max(np.abs(want))
    # elementwise evaluation agrees with the matrix diagonal of the cross form
    elem = kappa_residual(q, q2, w, CTX)
    assert np.allclose(elem, np.diag(want), rtol=1e-12)


def test_residual_constant_weight_reduces_to_uniform():
    # anchor for the kernel normalization: a flat weight of 1/(16 pi^2)
    # must reproduce the uniform pair kernel quadrature-evaluated on the
    # same node grid
    quad = lebedev(110)
    theta = mlpweight.init(0, 0.0)  # zero net; we bypass it below
    w = residual_weighting(theta=theta, n_quad=110)
    rng = np.random.default_rng(13)
    q = random_pairs(rng, 3)
    q2 = random_pairs(rng, 3)

    class FlatResidual(ResidualWeighting):
        def weight_grid(self):
            return np.full((len(quad), len(quad)), UNIFORM_PAIR_WEIGHT)

    flat = FlatResidual(theta=theta, quad_r=quad, quad_s=quad)
    got = cross_gram(KernelModel(weighting=flat, context=CTX), q, q2)

    def factor_on_grid(a, b):
        k = CTX.wavenumber
        return integrate(lambda v: np.exp(1j * k * (v @ (np.asarray(a)
                                                         - np.asarray(b)))),
                         quad) / (4 * np.pi)

    want = pair_kernel_reference(factor_on_grid, q, q2)
    assert np.max(np.abs(got - want)) < 1e-12


def test_residual_diagonal_real_nonnegative():
    rng = np.random.default_rng(14)
    w = residual_weighting(theta=mlpweight.init(5, 0.5), n_quad=26)
    q = random_pairs(rng, 5)
    diag = kappa_residual(q, q, w, CTX)
    assert np.max(np.abs(diag.imag)) < 1e-12 * np.max(diag.real)
    assert np.all(diag.real >= -1e-14)


def test_residual_swap_invariance():
    rng = np.random.default_rng(15)
    w = residual_weighting(theta=mlpweight.init(6, 0.5), n_quad=26)
    q = random_pairs(rng, 4)
    q2 = random_pairs(rng, 4)
    model = KernelModel(weighting=w, context=CTX)
    base = cross_gram(model, q, q2)
    assert np.allclose(cross_gram(model, q.swapped(), q2), base, rtol=1e-12)
    assert np.allclose(cross_gram(model, q, q2.swapped()), base, rtol=1e-12)


# --- gram assembly -----------------------------------------------------------


def all_weightings(seed=0):
    axis = np.array([0.3, -0.6, 0.2])
    directed = directed_weighting_for_axis(axis, degree=3)
    rng = np.random.default_rng(seed)
    al = rng.random(16)
    al /= al.sum()
    be = rng.uniform(0.0, 10.0, 16)
    be[0] = 0.0
    directed = directed.with_params(alphas=al, betas=be)
    residual = residual_weighting(theta=mlpweight.init(seed, 0.4), n_quad=26)
    return [UniformWeighting(),
            SunkenWeighting(gamma=0.6, zeta=3.5, axis=axis),
            directed,
            residual,
            SumWeighting(directed=directed, residual=residual)]


@pytest.mark.parametrize("weighting", all_weightings(), ids=lambda w: type(w).__name__)
def test_gram_hermitian_and_psd(weighting):
    rng = np.random.default_rng(16)
    pairs = random_pairs(rng, 24)
    k = gram(KernelModel(weighting=weighting, context=CTX), pairs)
    assert np.allclose(k, k.conj().T, atol=1e-12 * np.max(np.abs(k)))
    eigs = np.linalg.eigvalsh(k)
    assert eigs[0] >= -1e-8 * np.trace(k).real


@pytest.mark.parametrize("weighting", all_weightings(1), ids=lambda w: type(w).__name__)
def test_grid_fast_path_matches_generic(weighting):
    # same positions once as a structured grid, once as an explicit list
    rng = np.random.default_rng(17)
    recv = np.array([0.5, 0.4, 0.3]) + 0.1 * rng.standard_normal((4, 3))
    srcs = -np.array([0.5, 0.4, 0.3]) + 0.1 * rng.standard_normal((3, 3))
    grid = PairSet.from_grid(recv, srcs)
    flat = PairSet(receivers=grid.receivers.copy(),
                   sources=grid.sources.copy())
    assert grid.is_grid and not flat.is_grid
    model = KernelModel(weighting=weighting, context=CTX)
    kg = gram(model, grid)
    kf = gram(model, flat)
    assert np.max(np.abs(kg - kf)) < 1e-11 * np.max(np.abs(kf))


def test_gram_single_pair_and_coincident_rows():
    rng = np.random.default_rng(18)
    model = KernelModel(weighting=UniformWeighting(), context=CTX)
    one = random_pairs(rng, 1)
    k1 = gram(model, one)
    assert k1.shape == (1, 1)
    r, s = one.receivers[0], one.sources[0]
    self_val = 0.5 * (1.0 + complex(kappa_phi_uniform(s, r, CTX))
                      * complex(kappa_phi_uniform(r, s, CTX)))
    assert np.isclose(k1[0, 0], self_val, rtol=1e-12)
    dup = PairSet(receivers=np.vstack([r, r]), sources=np.vstack([s, s]))
    k2 = gram(model, dup)
    assert np.allclose(k2[0], k2[1], rtol=1e-14)


def test_gram_rejects_empty():
    empty = PairSet(receivers=np.zeros((0, 3)), sources=np.zeros((0, 3)))
    model = KernelModel(weighting=UniformWeighting(), context=CTX)
    with pytest.raises(ValueError):
        gram(model, empty)
    with pytest.raises(ValueError):
        kernel_vector(model, random_pairs(np.random.default_rng(0), 1), empty)


def test_kernel_vector_matches_gram_rows():
    rng = np.random.default_rng(19)
    pairs = random_pairs(rng, 6)
    for weighting in all_weightings(2):
        model = KernelModel(weighting=weighting, context=CTX)
        k = gram(model, pairs)
        kv = kernel_vector(model, pairs.subset([2]), pairs)
        assert np.allclose(kv[0], k[2], rtol=1e-10, atol=1e-12)


def test_kernel_conjugate_symmetry():
    rng = np.random.default_rng(20)
    q = random_pairs(rng, 5)
    q2 = random_pairs(rng, 4)
    for weighting in all_weightings(3):
        model = KernelModel(weighting=weighting, context=CTX)
        a = cross_gram(model, q, q2)
        b = cross_gram(model, q2, q)
        assert np.allclose(a, b.conj().T, rtol=1e-11, atol=1e-13)


def test_gram_file_roundtrip(tmp_path):
    rng = np.random.default_rng(21)
    pairs = random_pairs(rng, 5)
    k = gram(KernelModel(weighting=UniformWeighting(), context=CTX), pairs)
    path = tmp_path / "gram.bin"
    gram_to_file(k, path)
    back = gram_from_file(path)
    assert np.array_equal(back, k)


def test_kernel_expansion_solves_helmholtz_both_arguments():
    # any finite kernel expansion must stay in the constrained space
    rng = np.random.default_rng(22)
    pairs = random_pairs(rng, 6)
    coeffs = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    k = CTX.wavenumber
    for weighting in all_weightings(4):
        model = KernelModel(weighting=weighting, context=CTX)

        def in_r(r, s0=np.array([-0.45, -0.38, -0.31])):
            q = PairSet(receivers=r[None, :], sources=s0[None, :])
            return complex(kernel_vector(model, q, pairs)[0] @ coeffs)

        def in_s(s, r0=np.array([0.52, 0.41, 0.33])):
            q = PairSet(receivers=r0[None, :], sources=s[None, :])
            return complex(kernel_vector(model, q, pairs)[0] @ coeffs)

        assert helmholtz_residual(in_r, [0.5, 0.45, 0.25], k) < 1e-4
        assert helmholtz_residual(in_s, [-0.5, -0.45, -0.25], k) < 1e-4


def test_numerical_error_carries_eigenvalue():
    err = NumericalError("bad", min_eigenvalue=-0.25)
    assert err.min_eigenvalue == -0.25
    assert isinstance(err, RuntimeError)
