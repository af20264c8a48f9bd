"""Scratch: matched-seed quantizer vs perturbation gap across the SNR grid."""
import time

from ia_grassmann.channel import SystemDims
from ia_grassmann.feedback import BitSchedule
from ia_grassmann.harness import ExperimentConfig, SchemeSpec, run_experiment

dims = SystemDims(3, 2, 2, 1)
TRIALS = 3000
grid = tuple(float(s) for s in range(0, 41, 5))

t0 = time.time()
for bits in (5, 10, 15):
    cfg = ExperimentConfig(
        dims=dims, snr_grid_db=grid, metric="projected",
        schemes=(SchemeSpec("proposed", BitSchedule.fixed(bits, dims)),
                 SchemeSpec("perturbed", BitSchedule.fixed(bits, dims))),
        trials=TRIALS, base_seed=7)
    rows = run_experiment(cfg)
    quant = {r.snr_db: r for r in rows if r.scheme == "proposed"}
    pert = {r.snr_db: r for r in rows if r.scheme == "perturbed"}
    diffs = [(s, pert[s].mean_sum_rate - quant[s].mean_sum_rate,
              3 * max(pert[s].stderr, quant[s].stderr)) for s in grid]
    worst = max(diffs, key=lambda t: abs(t[1]))
    print(f"bits={bits:2d}  worst |pert-quant| = {abs(worst[1]):.4f} "
          f"at {worst[0]:.0f} dB (3se={worst[2]:.3f})  [{time.time()-t0:.0f}s]")
    for s, dlt, se in diffs:
        print(f"   snr={s:5.1f}  diff={dlt:+8.4f}")
