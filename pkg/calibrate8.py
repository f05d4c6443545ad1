"""Noiseless representational floors per kernel family (run once)."""
import numpy as np

from atfinterp import mlpweight
from atfinterp.geometry import FrequencyContext, unit_vector
from atfinterp.harness import (ExperimentConfig, _axis, _derive_seed,
                               _eval_pairs, _room, build_arrays, nmse)
from atfinterp.kernelcore import (KernelModel, SumWeighting, SunkenWeighting,
                                  UniformWeighting,
                                  directed_weighting_for_axis,
                                  residual_weighting)
from atfinterp.regress import fit, predict_full
from atfinterp.roomsim import atf, make_dataset

cfg = ExperimentConfig(
    frequencies=(400.0, 800.0, 1150.0, 1500.0),
    eval_receivers=30, eval_sources=30, trials=3, seed=0,
)
room = _room(cfg)
src_pts, rcv_pts = build_arrays(cfg)
FI = 2
freq = cfg.frequencies[FI]
ctx = FrequencyContext(frequency=freq, speed_of_sound=cfg.speed_of_sound)
eval_pairs = _eval_pairs(cfg, FI)
reference = atf(eval_pairs.receivers, eval_pairs.sources, ctx, room)
clean = make_dataset(src_pts, rcv_pts, ctx, room, None,
                     seed=_derive_seed(cfg.seed, 1, FI, 0))
axis = _axis(cfg)
base = directed_weighting_for_axis(axis, cfg.directions_degree)
D = len(base.alphas)

al = np.full(D, 0.6 / D)
al[19] += 0.4
be = np.zeros(D)
be[1:] = 8.0
theta = mlpweight.init(_derive_seed(cfg.seed, 4, FI, 0), 0.1)
weightings = [
    ("uniform", UniformWeighting()),
    ("sunken-init", SunkenWeighting(gamma=1.0, zeta=4.0,
                                    axis=unit_vector(axis))),
    ("dir-uniform-B1", base),
    ("best-mix d19", base.with_params(alphas=al, betas=be)),
    ("residual-init", residual_weighting(theta=theta,
                                         n_quad=cfg.residual_quad)),
    ("proposed-init", SumWeighting(directed=base,
                                   residual=residual_weighting(
                                       theta=theta,
                                       n_quad=cfg.residual_quad))),
]
for lam in (1e-6, 1e-8):
    for name, w in weightings:
        model = KernelModel(weighting=w, context=ctx)
        try:
            fitted = fit(model, clean.pairs, clean.values, lam)
            score = nmse(predict_full(fitted, eval_pairs), reference)
            print(f"lam {lam:.0e}  {name:15s} floor {score:+.2f} dB",
                  flush=True)
        except Exception as exc:
            print(f"lam {lam:.0e}  {name:15s} failed: {exc}", flush=True)
