"""Timing and quality calibration at full experiment scale (run once)."""
import time

import numpy as np

from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, _derive_seed, _eval_pairs,
                               _room, build_arrays, method_model, nmse)
from atfinterp.hyperopt import OptimizerConfig
from atfinterp.regress import fit, predict_full
from atfinterp.roomsim import atf, make_dataset

OPT = OptimizerConfig(max_iters=40, step_size=1e3, beta_step_scale=500.0,
                      theta_step_scale=0.5, tol=1e-7, tol_window=8, seed=0)
cfg = ExperimentConfig(
    frequencies=(400.0, 800.0, 1150.0, 1500.0),
    eval_receivers=30,
    eval_sources=30,
    trials=3,
    seed=0,
    optimizer=OPT,
)
room = _room(cfg)
src_pts, rcv_pts = build_arrays(cfg)

for FI in (2, 3):
    freq = cfg.frequencies[FI]
    ctx = FrequencyContext(frequency=freq, speed_of_sound=cfg.speed_of_sound)
    eval_pairs = _eval_pairs(cfg, FI)
    reference = atf(eval_pairs.receivers, eval_pairs.sources, ctx, room)
    dataset = make_dataset(src_pts, rcv_pts, ctx, room, cfg.snr_db,
                           seed=_derive_seed(cfg.seed, 1, FI, 0))
    print(f"=== {freq:g} Hz ===", flush=True)
    for method in ("uniform", "sunken", "proposed"):
        t0 = time.time()
        model, trace = method_model(method, cfg, dataset,
                                    theta_seed=_derive_seed(cfg.seed, 4, FI, 0))
        t_opt = time.time() - t0
        fitted = fit(model, dataset.pairs, dataset.values, cfg.lam)
        estimate = predict_full(fitted, eval_pairs)
        score = nmse(estimate, reference)
        n_it = 0 if trace is None else len(trace) - 1
        e0 = None if trace is None else trace[0][1]
        e1 = None if trace is None else trace[-1][1]
        print(f"{method:9s} opt {t_opt:7.1f}s ({n_it} iters)  NMSE {score:7.2f} dB"
              f"  E_LOO {e0} -> {e1}", flush=True)
        w = model.weighting
        if method == "proposed":
            d = w.directed
            print(f"   alpha max {d.alphas.max():.3f} nnz {(d.alphas>1e-6).sum()}"
                  f"  beta max {d.betas.max():.2f}", flush=True)
        if method == "sunken":
            print(f"   gamma {w.gamma:.4f} zeta {w.zeta:.4f}", flush=True)
