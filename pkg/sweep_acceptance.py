import time

import numpy as np

from atfinterp import mlpweight
from atfinterp.geometry import FrequencyContext
from atfinterp.harness import (ExperimentConfig, build_arrays, export_field_slice,
                               method_model, run_experiment, write_nmse_svg,
                               write_report, _derive_seed, _room)
from atfinterp.regress import fit
from atfinterp.roomsim import make_dataset
from atfinterp.sphere import lebedev

t0 = time.time()
cfg = ExperimentConfig(
    frequencies=(1150.0, 1500.0),
    methods=("uniform", "sunken", "directed", "proposed"),
    eval_receivers=30,
    eval_sources=30,
    trials=3,
    seed=0,
)
report = run_experiment(cfg)
print(f"sweep done in {time.time() - t0:.0f}s")
for row in report.rows:
    print("row", row)
means = report.means()
for (m, f), v in sorted(means.items(), key=lambda kv: (kv[0][1], kv[0][0])):
    print(f"mean {m:10s} {f:7.1f} {v:8.3f}")
for f in cfg.frequencies:
    print(f"delta@{f:g}: prop-unif {means[('proposed', f)] - means[('uniform', f)]:+.3f} "
          f"sunk-unif {means[('sunken', f)] - means[('uniform', f)]:+.3f} "
          f"prop-dir {means[('proposed', f)] - means[('directed', f)]:+.3f}")
for key, trace in sorted(report.traces.items()):
    print(f"trace {key}: iters={len(trace) - 1} E {trace[0][1]:.4e} -> {trace[-1][1]:.4e}")
write_report(report, "sweep_out")
write_nmse_svg(report, "sweep_out/nmse.svg")

# rebuild the 1150 Hz trial-0 models for weight stats and slice comparison
room = _room(cfg)
src, rcv = build_arrays(cfg)
fi = cfg.frequencies.index(1150.0)
ctx = FrequencyContext(frequency=1150.0, speed_of_sound=cfg.speed_of_sound)
ds = make_dataset(src, rcv, ctx, room, cfg.snr_db,
                  seed=_derive_seed(cfg.seed, 1, fi, 0))
models = {}
for method in ("uniform", "proposed"):
    model, _ = method_model(method, cfg, ds,
                            theta_seed=_derive_seed(cfg.seed, 4, fi, 0))
    models[method] = fit(model, ds.pairs, ds.values, cfg.lam)
w = models["proposed"].model.weighting
grid = lebedev(110).nodes
phi = w.directed.phi(grid)
print(f"phi max {phi.max():.4f} median {np.median(phi):.4e} "
      f"range_db {10 * np.log10(phi.max() / np.median(phi)):.1f}")
print("alphas>=0.01:", [round(float(a), 3) for a in w.directed.alphas if a >= 0.01])
print("beta max:", float(w.directed.betas.max()))
res = np.abs([mlpweight.forward(w.residual.theta, g, g) for g in grid])
print(f"w_res max {res.max():.4e}")
for method, fitted in models.items():
    rows = export_field_slice(fitted, np.asarray(cfg.source_center), room,
                              center=cfg.receiver_center,
                              radius=cfg.region_radius,
                              resolution=cfg.slice_resolution)
    nses = [r[4] for r in rows]
    print(f"slice {method}: mean_nse {np.mean(nses):.3f} dB "
          f"median {np.median(nses):.3f}")
print(f"all done in {time.time() - t0:.0f}s")
