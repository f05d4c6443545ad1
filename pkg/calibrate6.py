"""Direct eval-NMSE search over mild directed mixtures (run once)."""
import numpy as np

from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, _axis, _derive_seed,
                               _eval_pairs, _room, build_arrays, nmse)
from atfinterp.kernelcore import (KernelModel, SunkenWeighting,
                                  UniformWeighting,
                                  directed_weighting_for_axis, gram)
from atfinterp.regress import fit, predict_full
from atfinterp.geometry import unit_vector
from atfinterp.roomsim import atf, make_dataset, reverberant_atf

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
ref_rev = reverberant_atf(eval_pairs.receivers, eval_pairs.sources, ctx, room)
direct = reference - ref_rev
dataset = make_dataset(src_pts, rcv_pts, ctx, room, cfg.snr_db,
                       seed=_derive_seed(cfg.seed, 1, FI, 0))
axis = _axis(cfg)
base = directed_weighting_for_axis(axis, cfg.directions_degree)
D = len(base.alphas)


def nm(w):
    model = KernelModel(weighting=w, context=ctx)
    fitted = fit(model, dataset.pairs, dataset.values, cfg.lam)
    est = predict_full(fitted, eval_pairs)
    full = nmse(est, reference)
    rev = nmse(est - direct, ref_rev)
    return full, rev


full, rev = nm(UniformWeighting())
print(f"uniform      NMSE {full:+.2f}  rev-only {rev:+.2f}", flush=True)
full, rev = nm(SunkenWeighting(gamma=1.0, zeta=4.0, axis=unit_vector(axis)))
print(f"sunken init  NMSE {full:+.2f}  rev-only {rev:+.2f}", flush=True)

rows = []
for B in (3.0, 8.0):
    for m in (0.2, 0.4):
        for d in range(D):
            al = np.full(D, (1.0 - m) / D)
            al[d] += m
            be = np.zeros(D)
            be[1:] = B
            w = base.with_params(alphas=al, betas=be)
            full, rev = nm(w)
            rows.append((full, d, m, B))
rows.sort()
print("best mild mixtures by eval NMSE:", flush=True)
for full, d, m, B in rows[:10]:
    print(f"  d={d:2d} m={m:.1f} B={B:.0f}  NMSE {full:+.2f}", flush=True)
print(f"worst: {rows[-1][0]:+.2f}  median {rows[len(rows)//2][0]:+.2f}",
      flush=True)
