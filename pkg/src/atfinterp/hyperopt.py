"""Leave-one-out error minimization over kernel hyperparameters.

Gradient descent with backtracking for the concentration (beta), network
(theta) and sunken-sphere (gamma, zeta) parameters, and reduced-gradient
descent on the simplex for the mixture coefficients (alpha). All groups
move simultaneously each iteration under one shared backtracking test, so
every accepted iterate strictly decreases the LOO error.

One Hermitian inverse of (K + lambda I) per accepted iterate feeds both the
objective and, contracted against the kernel derivative structure, every
parameter gradient; nothing is recomputed per parameter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import kernelcore
from .geometry import PairSet, unit_vector
from .kernelcore import (BETA_MAX, DirectedWeighting, KernelModel,
                         NumericalError, ResidualWeighting, SumWeighting,
                         SunkenWeighting, gram)
from .mlpweight import MLPParams
from .regress import loo_terms
from .roomsim import MeasurementSet

_ZETA_MIN = 1e-6


@dataclass(frozen=True)
class OptimizerConfig:
    """Schedule and stopping knobs for the LOO descent.

    step_size is the largest step ever tried; the working step shrinks
    under backtracking and recovers by doubling after accepted iterates.
    The *_step_scale factors precondition the shared step per parameter
    group, since the groups see gradients of very different magnitude.
    fd_check_interval, when set, verifies one analytic gradient coordinate
    against central finite differences every that-many iterations (a debug
    guard; expensive).
    """

    max_iters: int = 200
    step_size: float = 1.0
    backtracking_factor: float = 0.5
    max_backtracks: int = 30
    fd_check_interval: int | None = None
    tol: float = 1e-6
    tol_window: int = 5
    seed: int = 0
    duplicate_swapped: bool = False
    alpha_step_scale: float = 1.0
    beta_step_scale: float = 1.0
    theta_step_scale: float = 1.0
    sunken_step_scale: float = 1.0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0 < self.backtracking_factor < 1:
            raise ValueError("backtracking_factor must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")
        if self.tol < 0 or self.tol_window < 1:
            raise ValueError("invalid convergence settings")
        if self.fd_check_interval is not None and self.fd_check_interval < 1:
            raise ValueError("fd_check_interval must be positive or None")
        for name in ("alpha_step_scale", "beta_step_scale",
                     "theta_step_scale", "sunken_step_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class HyperState:
    """Snapshot of the optimization variables plus objective bookkeeping."""

    weighting: object
    value: float | None = None
    iteration: int = 0

    def _directed(self):
        if isinstance(self.weighting, DirectedWeighting):
            return self.weighting
        if isinstance(self.weighting, SumWeighting):
            return self.weighting.directed
        return None

    @property
    def alphas(self):
        d = self._directed()
        return None if d is None else d.alphas

    @property
    def betas(self):
        d = self._directed()
        return None if d is None else d.betas

    @property
    def theta(self):
        if isinstance(self.weighting, ResidualWeighting):
            return self.weighting.theta
        if isinstance(self.weighting, SumWeighting):
            return self.weighting.residual.theta
        return None

    @property
    def gamma(self):
        w = self.weighting
        return w.gamma if isinstance(w, SunkenWeighting) else None

    @property
    def zeta(self):
        w = self.weighting
        return w.zeta if isinstance(w, SunkenWeighting) else None


def _loo_weight_matrix(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Adjoint matrix wc with dE_LOO = Re sum dK[n,n'] wc[n',n].

    Derived by differentiating E = mean |a_n / b_n|^2 with a = P y,
    b = diag(P), P = (K + lambda I)^{-1}, dP = -P dK P.
    """
    n = len(a)
    u = a / b ** 2
    t = np.abs(a) ** 2 / b ** 3
    pu = p @ u
    ptp = (p * t[None, :]) @ p
    return (2.0 / n) * (ptp - np.outer(a, np.conj(pu)))


def _training_set(dataset: MeasurementSet, duplicate_swapped: bool):
    pairs, y = dataset.pairs, dataset.values
    if duplicate_swapped:
        pairs = pairs.concatenated(pairs.swapped())
        y = np.concatenate([y, y])
    return pairs, y


def grad_eloo(state: HyperState, dataset: MeasurementSet, lam: float) -> dict:
    """Gradient of the closed-form LOO error at the state's weighting.

    Returns per-group entries ("alphas"/"betas", "theta", "gamma"/"zeta"
    depending on the weighting kind). Gradients at pinned coordinates are
    reported as computed; constraints are applied by the stepping logic,
    not here.
    """
    model = KernelModel(weighting=state.weighting, context=dataset.context)
    pairs, y = dataset.pairs, dataset.values
    k = gram(model, pairs)
    _, a, b, p = loo_terms(k, y, lam)
    wc = _loo_weight_matrix(a, b, p)
    return kernelcore.gram_gradients(model, pairs, wc)


def reduced_gradient_step(alphas, grad_alpha, step: float) -> np.ndarray:
    """One reduced-gradient descent step on the probability simplex.

    The largest coordinate (last one on ties) is eliminated through the
    sum-to-one constraint; the remaining coordinates descend the reduced
    gradient g_i - g_ref, negatives clamp to zero, and the result is
    renormalized so the sum is exactly one.
    """
    alphas = np.asarray(alphas, dtype=float)
    grad_alpha = np.asarray(grad_alpha, dtype=float)
    if alphas.shape != grad_alpha.shape or alphas.ndim != 1:
        raise ValueError("alphas and grad_alpha must be equal-length vectors")
    if abs(alphas.sum() - 1.0) > 1e-9 or np.any(alphas < -1e-12):
        raise ValueError("alphas must lie on the simplex")
    ref = int(np.flatnonzero(alphas == alphas.max())[-1])
    new = alphas - step * (grad_alpha - grad_alpha[ref])
    new[ref] = alphas[ref]
    new[ref] = 1.0 - (new.sum() - new[ref])
    new = np.maximum(new, 0.0)
    total = new.sum()
    if total <= 0.0:
        new = np.zeros_like(alphas)
        new[ref] = 1.0
        return new
    new /= total
    _absorb_simplex_gap(new)
    return new


def _absorb_simplex_gap(new: np.ndarray) -> None:
    """Adjust one coordinate in place until the float sum is exactly 1.

    The sum is monotone in any single coordinate but rounds at every
    partial, so for an unlucky coordinate the reachable sums can hop over
    1.0; coordinates are probed largest first by bracketing the crossing
    and bisecting to adjacent floats, moving on when the exact value is
    unreachable. Coordinates stay nonnegative.
    """
    if new.sum() == 1.0:
        return
    for j in (int(t) for t in np.argsort(new)[::-1]):
        if new[j] <= 0.0:
            break
        saved = new[j]

        def total_at(x):
            new[j] = x
            return new.sum()

        # bracket the crossing with an expanding additive correction
        lo = hi = None
        x = saved
        s = total_at(x)
        delta = 1.0 - s
        for _ in range(64):
            if s == 1.0:
                return
            if s < 1.0:
                lo = x if lo is None or x > lo else lo
            else:
                hi = x if hi is None or x < hi else hi
            if lo is not None and hi is not None:
                break
            x = x + delta
            if x <= 0.0:
                break
            s = total_at(x)
            delta *= 2.0
        if lo is not None and hi is not None:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if not lo < mid < hi:
                    break
                s = total_at(mid)
                if s == 1.0:
                    return
                if s < 1.0:
                    lo = mid
                else:
                    hi = mid
        new[j] = saved


def _apply_step(weighting, grads: dict, step: float, cfg: OptimizerConfig):
    if isinstance(weighting, DirectedWeighting):
        alphas = reduced_gradient_step(weighting.alphas, grads["alphas"],
                                       step * cfg.alpha_step_scale)
        betas = weighting.betas - step * cfg.beta_step_scale * grads["betas"]
        betas = np.clip(betas, 0.0, BETA_MAX)
        betas[weighting.pinned_index] = 0.0
        return weighting.with_params(alphas, betas)
    if isinstance(weighting, ResidualWeighting):
        theta = weighting.theta.shifted(grads["theta"],
                                        -step * cfg.theta_step_scale)
        return weighting.with_theta(theta)
    if isinstance(weighting, SumWeighting):
        return SumWeighting(
            directed=_apply_step(weighting.directed, grads, step, cfg),
            residual=_apply_step(weighting.residual, grads, step, cfg))
    if isinstance(weighting, SunkenWeighting):
        s = step * cfg.sunken_step_scale
        gamma = max(weighting.gamma - s * grads["gamma"], 0.0)
        zeta = float(np.clip(weighting.zeta - s * grads["zeta"],
                             _ZETA_MIN, BETA_MAX))
        return replace(weighting, gamma=gamma, zeta=zeta)
    raise TypeError(f"cannot step weighting {type(weighting).__name__}")


def _bump_theta(theta: MLPParams, h: float) -> MLPParams:
    ws = [w.copy() for w in theta.weights]
    ws[0][0, 0] += h
    return MLPParams(weights=tuple(ws), biases=theta.biases)


def _fd_probe(weighting, grads, pairs, y, ctx, lam, iteration: int) -> None:
    """Central-difference spot check of one gradient coordinate."""
    h = 1e-5
    if isinstance(weighting, SunkenWeighting):
        analytic = grads["zeta"]
        low = replace(weighting, zeta=weighting.zeta - h)
        high = replace(weighting, zeta=weighting.zeta + h)
    elif isinstance(weighting, (DirectedWeighting, SumWeighting)):
        directed = weighting if isinstance(weighting, DirectedWeighting) \
            else weighting.directed
        free = [i for i in range(directed.n_components)
                if i != directed.pinned_index]
        coord = free[0]
        analytic = grads["betas"][coord]

        def bump(sign):
            betas = directed.betas.copy()
            betas[coord] += sign * h
            new = directed.with_params(directed.alphas, betas)
            if isinstance(weighting, SumWeighting):
                return replace(weighting, directed=new)
            return new

        low, high = bump(-1), bump(+1)
    else:
        analytic = grads["theta"].weights[0][0, 0]
        low = weighting.with_theta(_bump_theta(weighting.theta, -h))
        high = weighting.with_theta(_bump_theta(weighting.theta, +h))

    def value(w):
        k = gram(KernelModel(weighting=w, context=ctx), pairs)
        return loo_terms(k, y, lam)[0]

    fd = (value(high) - value(low)) / (2 * h)
    scale = max(abs(fd), abs(analytic), 1e-12)
    if abs(fd - analytic) / scale > 1e-2:
        raise NumericalError(
            f"gradient check failed at iteration {iteration}: "
            f"analytic {analytic:.6e} vs central difference {fd:.6e}")


def _descend(weighting, pairs: PairSet, y: np.ndarray, ctx, lam: float,
             cfg: OptimizerConfig):
    """Shared descent engine; returns (weighting, trace)."""
    if len(pairs) < 2:
        raise ValueError("optimization needs at least two measurements")

    def evaluate(w):
        k = gram(KernelModel(weighting=w, context=ctx), pairs)
        return loo_terms(k, y, lam)

    value, a, b, p = evaluate(weighting)
    trace = [(0, value, 0.0)]
    step = cfg.step_size
    stall = 0
    for iteration in range(1, cfg.max_iters + 1):
        wc = _loo_weight_matrix(a, b, p)
        model = KernelModel(weighting=weighting, context=ctx)
        grads = kernelcore.gram_gradients(model, pairs, wc)
        if not grads:
            break
        if cfg.fd_check_interval and iteration % cfg.fd_check_interval == 0:
            _fd_probe(weighting, grads, pairs, y, ctx, lam, iteration)
        accepted = None
        for _ in range(cfg.max_backtracks):
            candidate = _apply_step(weighting, grads, step, cfg)
            trial = evaluate(candidate)
            if trial[0] < value:
                accepted = (candidate,) + trial
                break
            step *= cfg.backtracking_factor
        if accepted is None:
            break
        weighting, new_value, a, b, p = accepted
        relative = (value - new_value) / value if value > 0 else 0.0
        value = new_value
        trace.append((iteration, value, step))
        step = min(2.0 * step, cfg.step_size)
        stall = stall + 1 if relative < cfg.tol else 0
        if stall >= cfg.tol_window:
            break
    return weighting, trace


def optimize(dataset: MeasurementSet, template: KernelModel, lam: float,
             cfg: OptimizerConfig = OptimizerConfig()):
    """Minimize the LOO error over the template's free hyperparameters.

    The template weighting must be directed, residual, or their sum.
    Returns (KernelModel with the optimized weighting, trace) where trace
    rows are (iteration, E_LOO, accepted step); row 0 is the initial state
    and the E_LOO column never increases.
    """
    w = template.weighting
    if not isinstance(w, (DirectedWeighting, ResidualWeighting, SumWeighting)):
        raise ValueError("optimize handles directed, residual or sum "
                         "weightings; got " + type(w).__name__)
    ctx = dataset.context
    pairs, y = _training_set(dataset, cfg.duplicate_swapped)
    final, trace = _descend(w, pairs, y, ctx, lam, cfg)
    return KernelModel(weighting=final, context=ctx), trace


def optimize_sunken(dataset: MeasurementSet, lam: float,
                    cfg: OptimizerConfig = OptimizerConfig(), axis=None,
                    gamma_init: float = 1.0, zeta_init: float = 4.0):
    """Minimize the LOO error of the sunken-sphere weighting over (gamma, zeta).

    The suppression axis defaults to the line joining the receiver- and
    source-point centroids (the weighting is even in the axis, so its sign
    does not matter). Returns (KernelModel, trace) like optimize.
    """
    if axis is None:
        axis = (np.mean(dataset.pairs.receivers, axis=0)
                - np.mean(dataset.pairs.sources, axis=0))
    weighting = SunkenWeighting(gamma=float(gamma_init), zeta=float(zeta_init),
                                axis=unit_vector(axis))
    ctx = dataset.context
    pairs, y = _training_set(dataset, cfg.duplicate_swapped)
    final, trace = _descend(weighting, pairs, y, ctx, lam, cfg)
    return KernelModel(weighting=final, context=ctx), trace


def save_trace(trace, path) -> None:
    """Write an optimizer trace as CSV (iter, e_loo, step_size)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "e_loo", "step_size"])
        for iteration, value, step in trace:
            writer.writerow([iteration, repr(float(value)), repr(float(step))])
