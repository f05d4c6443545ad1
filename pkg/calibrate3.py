"""Directed-kernel landscape probe at full experiment scale (run once)."""
import numpy as np

from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, _axis, _derive_seed,
                               _eval_pairs, _room, build_arrays, nmse)
from atfinterp.kernelcore import (KernelModel, UniformWeighting,
                                  directed_weighting_for_axis, gram)
from atfinterp.regress import fit, loo_terms, predict_full
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
dataset = make_dataset(src_pts, rcv_pts, ctx, room, cfg.snr_db,
                       seed=_derive_seed(cfg.seed, 1, FI, 0))
axis = _axis(cfg)
base = directed_weighting_for_axis(axis, cfg.directions_degree)
D = len(base.alphas)


def eloo(w):
    model = KernelModel(weighting=w, context=ctx)
    k = gram(model, dataset.pairs)
    return loo_terms(k, dataset.values, cfg.lam)[0], model


def nm(model):
    fitted = fit(model, dataset.pairs, dataset.values, cfg.lam)
    return nmse(predict_full(fitted, eval_pairs), reference)


e, model = eloo(UniformWeighting())
print(f"uniform          E {e:.6e}  NMSE {nm(model):+.2f} dB", flush=True)
e, model = eloo(base)
print(f"dir uniform B=1  E {e:.6e}  NMSE {nm(model):+.2f} dB", flush=True)
al = np.full(D, 1.0 / D)
be = np.zeros(D)
be[1:] = 3.0
e, model = eloo(base.with_params(alphas=al, betas=be))
print(f"dir uniform B=3  E {e:.6e}  NMSE {nm(model):+.2f} dB", flush=True)

results = []
for B in (3.0, 10.0):
    for d in range(D):
        al = np.zeros(D)
        al[d] = 1.0
        be = np.zeros(D)
        be[1:] = B
        w = base.with_params(alphas=al, betas=be)
        e, model = eloo(w)
        results.append((e, d, B, model))
        print(f"  d={d:2d} B={B:4.1f}  E {e:.6e}", flush=True)
results.sort(key=lambda t: t[0])
print("top5 by E:", flush=True)
for e, d, B, model in results[:5]:
    print(f"  d={d:2d} B={B:4.1f}  E {e:.6e}  NMSE {nm(model):+.2f} dB",
          flush=True)

d_best = results[0][1]
for B in (1.0, 2.0, 5.0, 8.0, 12.0, 20.0, 40.0):
    al = np.zeros(D)
    al[d_best] = 1.0
    be = np.zeros(D)
    be[1:] = B
    w = base.with_params(alphas=al, betas=be)
    e, model = eloo(w)
    print(f"best-d B={B:5.1f}  E {e:.6e}  NMSE {nm(model):+.2f} dB", flush=True)
