import time

import numpy as np

from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (DEFAULT_OPTIMIZER, ExperimentConfig,
                               build_arrays, _derive_seed, _room)
from atfinterp.hyperopt import optimize_sunken
from atfinterp.roomsim import make_dataset
from dataclasses import replace

cfg = ExperimentConfig()
room = _room(cfg)
src, rcv = build_arrays(cfg)
ctx = FrequencyContext(frequency=1150.0, speed_of_sound=cfg.speed_of_sound)
fi = cfg.frequencies.index(1150.0)
ds = make_dataset(src, rcv, ctx, room, cfg.snr_db,
                  seed=_derive_seed(cfg.seed, 1, fi, 0))

for label, opt in (
    ("default(cap4)", DEFAULT_OPTIMIZER),
    ("cap1e3", replace(DEFAULT_OPTIMIZER, step_size=1e3)),
):
    t0 = time.time()
    model, trace = optimize_sunken(ds, cfg.lam, opt)
    w = model.weighting
    print(f"{label}: iters={len(trace) - 1} E {trace[0][1]:.6e} -> "
          f"{trace[-1][1]:.6e} gamma={w.gamma:.4f} zeta={w.zeta:.4f} "
          f"steps[{trace[1][2]:.3g},{trace[-1][2]:.3g}] "
          f"({time.time() - t0:.1f}s)")
