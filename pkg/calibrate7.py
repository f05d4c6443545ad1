"""Directional-gain dependence on image order (run once)."""
import numpy as np

from atfinterp.geometry import FrequencyContext, unit_vector
from atfinterp.harness import (ExperimentConfig, _axis, _derive_seed,
                               _eval_pairs, build_arrays, nmse)
from atfinterp.kernelcore import (KernelModel, SunkenWeighting,
                                  UniformWeighting,
                                  directed_weighting_for_axis, gram)
from atfinterp.regress import fit, loo_terms, predict_full
from atfinterp.roomsim import RoomConfig, atf, make_dataset, reflection_from_t60

cfg = ExperimentConfig(
    frequencies=(400.0, 800.0, 1150.0, 1500.0),
    eval_receivers=30, eval_sources=30, trials=3, seed=0,
)
src_pts, rcv_pts = build_arrays(cfg)
FI = 2
freq = cfg.frequencies[FI]
ctx = FrequencyContext(frequency=freq, speed_of_sound=cfg.speed_of_sound)
eval_pairs = _eval_pairs(cfg, FI)
axis = _axis(cfg)
base = directed_weighting_for_axis(axis, cfg.directions_degree)
D = len(base.alphas)
beta_wall = reflection_from_t60(cfg.room_dimensions, cfg.t60)

for order in (2, 3, 4, 6, 10, 20):
    room = RoomConfig(dimensions=cfg.room_dimensions,
                      reflection_coefficient=beta_wall,
                      max_image_order=order,
                      speed_of_sound=cfg.speed_of_sound)
    reference = atf(eval_pairs.receivers, eval_pairs.sources, ctx, room)
    dataset = make_dataset(src_pts, rcv_pts, ctx, room, cfg.snr_db,
                           seed=_derive_seed(cfg.seed, 1, FI, 0))

    def score(w):
        model = KernelModel(weighting=w, context=ctx)
        k = gram(model, dataset.pairs)
        e = loo_terms(k, dataset.values, cfg.lam)[0]
        fitted = fit(model, dataset.pairs, dataset.values, cfg.lam)
        return nmse(predict_full(fitted, eval_pairs), reference), e

    u_nm, u_e = score(UniformWeighting())
    s_nm, s_e = score(SunkenWeighting(gamma=1.0, zeta=4.0,
                                      axis=unit_vector(axis)))
    best = (np.inf, None)
    for d in range(D):
        al = np.full(D, 0.7 / D)
        al[d] += 0.3
        be = np.zeros(D)
        be[1:] = 5.0
        w = base.with_params(alphas=al, betas=be)
        nm_d, e_d = score(w)
        if nm_d < best[0]:
            best = (nm_d, d, e_d)
    print(f"order {order:2d}: uniform {u_nm:+.2f} (E {u_e:.3e})  "
          f"sunken-init {s_nm:+.2f}  best-mix d={best[1]:2d} {best[0]:+.2f} "
          f"(E {best[2]:.3e})", flush=True)
