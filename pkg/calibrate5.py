"""Directed-only descent with per-iteration eval tracking (run once)."""
import numpy as np

from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, _axis, _derive_seed,
                               _eval_pairs, _room, build_arrays, nmse)
from atfinterp.hyperopt import (OptimizerConfig, _apply_step,
                                _loo_weight_matrix)
from atfinterp.kernelcore import (KernelModel, directed_weighting_for_axis,
                                  gram, gram_gradients)
from atfinterp.regress import fit, loo_terms, predict_full
from atfinterp.roomsim import atf, make_dataset

OPT = OptimizerConfig(max_iters=200, step_size=4.0, alpha_step_scale=140.0,
                      beta_step_scale=2e5, theta_step_scale=1e-3,
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


def evaluate(w):
    k = gram(KernelModel(weighting=w, context=ctx), pairs)
    return loo_terms(k, y, cfg.lam)


def nm(w):
    model = KernelModel(weighting=w, context=ctx)
    fitted = fit(model, pairs, y, cfg.lam)
    return nmse(predict_full(fitted, eval_pairs), reference)


def descend(w, beta_cap, iters, tag):
    value, a, b, p = evaluate(w)
    step = OPT.step_size
    print(f"[{tag}] iter   0  E {value:.6e}  NMSE {nm(w):+.2f}", flush=True)
    for it in range(1, iters + 1):
        wc = _loo_weight_matrix(a, b, p)
        grads = gram_gradients(KernelModel(weighting=w, context=ctx), pairs, wc)
        accepted = None
        for _ in range(OPT.max_backtracks):
            cand = _apply_step(w, grads, step, OPT)
            if beta_cap is not None:
                be = np.minimum(cand.betas, beta_cap)
                be[cand.pinned_index] = 0.0
                cand = cand.with_params(betas=be)
            trial = evaluate(cand)
            if trial[0] < value:
                accepted = (cand,) + trial
                break
            step *= OPT.backtracking_factor
        if accepted is None:
            print(f"[{tag}] stuck at iter {it}", flush=True)
            break
        w, value, a, b, p = accepted
        step = min(2.0 * step, OPT.step_size)
        if it % 5 == 0 or it == iters:
            print(f"[{tag}] iter {it:3d}  E {value:.6e}  NMSE {nm(w):+.2f}  "
                  f"amax {w.alphas.max():.3f} bmax {w.betas.max():.2f} "
                  f"bmean {w.betas.mean():.2f}", flush=True)
    return w


axis = _axis(cfg)
w0 = directed_weighting_for_axis(axis, cfg.directions_degree)
descend(w0, None, 120, "free")
descend(w0, 6.0, 120, "cap6")
