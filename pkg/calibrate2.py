"""Optimizer scale tuning at full experiment scale (run once)."""
import time

import numpy as np

from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, _derive_seed, _eval_pairs,
                               _room, build_arrays, method_model, nmse)
from atfinterp.hyperopt import OptimizerConfig
from atfinterp.regress import fit, predict_full
from atfinterp.roomsim import atf, make_dataset

OPT = OptimizerConfig(max_iters=100, step_size=1e3, alpha_step_scale=1.0,
                      beta_step_scale=300.0, theta_step_scale=1e-2,
                      tol=1e-9, tol_window=15, seed=0)
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

t0 = time.time()
model, trace = method_model("proposed", cfg, dataset,
                            theta_seed=_derive_seed(cfg.seed, 4, FI, 0))
t_opt = time.time() - t0
fitted = fit(model, dataset.pairs, dataset.values, cfg.lam)
estimate = predict_full(fitted, eval_pairs)
score = nmse(estimate, reference)
print(f"proposed: {t_opt:.0f}s, {len(trace)-1} iters, NMSE {score:.2f} dB")
for i in range(0, len(trace), 10):
    print(f"  iter {trace[i][0]:4d}  E {trace[i][1]:.6e}  step {trace[i][2]:.3e}")
print(f"  final E {trace[-1][1]:.6e}")
d = model.weighting.directed
print(f"alpha max {d.alphas.max():.3f} nnz>{1/50:.2f}: {(d.alphas > 0.02).sum()}"
      f"  beta max {d.betas.max():.2f} mean {d.betas.mean():.2f}")
