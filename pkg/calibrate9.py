"""Proposed-model descent with eval tracking and weight stats (run once)."""
import numpy as np

from atfinterp import mlpweight
from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, _axis, _derive_seed,
                               _eval_pairs, _room, build_arrays, nmse)
from atfinterp.hyperopt import (OptimizerConfig, _apply_step,
                                _loo_weight_matrix)
from atfinterp.kernelcore import (KernelModel, SumWeighting,
                                  directed_weighting_for_axis, gram,
                                  gram_gradients, residual_weighting)
from atfinterp.regress import fit, loo_terms, predict_full
from atfinterp.roomsim import atf, make_dataset
from atfinterp.sphere import lebedev

OPT = OptimizerConfig(max_iters=150, step_size=4.0, alpha_step_scale=140.0,
                      beta_step_scale=2e5, theta_step_scale=2.5e-3,
                      tol=1e-9, tol_window=25, seed=0)
cfg = ExperimentConfig(
    frequencies=(400.0, 800.0, 1150.0, 1500.0),
    eval_receivers=30, eval_sources=30, trials=3, seed=0, optimizer=OPT,
)
room = _room(cfg)
src_pts, rcv_pts = build_arrays(cfg)
FI = 2
freq = cfg.frequencies[FI]
ctx = FrequencyContext(frequency=freq, speed_of_sound=cfg.speed_of_sound)
eval_pairs = _eval_pairs(cfg, FI)
reference = atf(eval_pairs.receivers, eval_pairs.sources, ctx, room)
dataset = make_dataset(src_pts, rcv_pts, ctx, room, cfg.snr_db,
                       seed=_derive_seed(cfg.seed, 1, FI, 0))
pairs, y = dataset.pairs, dataset.values

axis = _axis(cfg)
theta = mlpweight.init(_derive_seed(cfg.seed, 4, FI, 0), 0.1)
w = SumWeighting(directed=directed_weighting_for_axis(axis,
                                                      cfg.directions_degree),
                 residual=residual_weighting(theta=theta,
                                             n_quad=cfg.residual_quad))


def evaluate(wt):
    k = gram(KernelModel(weighting=wt, context=ctx), pairs)
    return loo_terms(k, y, cfg.lam)


def nm(wt):
    model = KernelModel(weighting=wt, context=ctx)
    fitted = fit(model, pairs, y, cfg.lam)
    return nmse(predict_full(fitted, eval_pairs), reference)


def weight_stats(wt):
    grid = lebedev(110).nodes
    phi = wt.directed.phi(grid)
    res = np.abs([mlpweight.forward(wt.residual.theta, g, g) for g in grid])
    return (10 * np.log10(phi.max() / np.median(phi)), phi.max(), res.max())


value, a, b, p = evaluate(w)
step = OPT.step_size
print(f"iter   0  E {value:.6e}  NMSE {nm(w):+.2f}", flush=True)
for it in range(1, OPT.max_iters + 1):
    wc = _loo_weight_matrix(a, b, p)
    grads = gram_gradients(KernelModel(weighting=w, context=ctx), pairs, wc)
    accepted = None
    for _ in range(OPT.max_backtracks):
        cand = _apply_step(w, grads, step, OPT)
        trial = evaluate(cand)
        if trial[0] < value:
            accepted = (cand,) + trial
            break
        step *= OPT.backtracking_factor
    if accepted is None:
        print(f"stuck at iter {it}", flush=True)
        break
    w, value, a, b, p = accepted
    step = min(2.0 * step, OPT.step_size)
    if it % 10 == 0:
        d = w.directed
        print(f"iter {it:3d}  E {value:.6e}  NMSE {nm(w):+.2f}  "
              f"amax {d.alphas.max():.3f} bmax {d.betas.max():.2f}", flush=True)
dyn, phi_max, res_max = weight_stats(w)
print(f"phi dynamic range {dyn:.1f} dB  phi max {phi_max:.4f}  "
      f"w_res max {res_max:.4f}", flush=True)
