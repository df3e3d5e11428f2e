"""Search for a fast ordering ramp and inspect the result.

Runs the multi-start BFGS search for a three-atom chain (small enough to
finish in about a minute), prints the best piecewise-linear detuning ramp,
its fidelity, and the fast/backward/fast stage classification, then
re-propagates the winner and prints the fidelity trace.

Run:  python demos/02_ramp_search.py  [restarts]
"""

import sys

import numpy as np

from rydramp import (ChainConfig, OptimizationProblem, classify_nqn,
                     optimize, propagate_with_observables)

restarts = int(sys.argv[1]) if len(sys.argv) > 1 else 8

config = ChainConfig(n_atoms=3, spacing=5.85, omega=1.0)
problem = OptimizationProblem(chain=config, tau=1.8, n_segments=8,
                              restarts=restarts, seed=0)
print(f"searching: N={config.n_atoms}, tau={problem.tau} us, "
      f"{problem.n_segments} segments, {restarts} restarts ...")
report = optimize(problem, workers=2)

print(f"\nbest fidelity: {report.best_fidelity:.5f} "
      f"(restart {report.best_restart}, "
      f"{report.loss_evaluations} loss evaluations)")
print("knot detunings / Omega:",
      np.round(np.array(report.best_schedule.knot_deltas) / config.omega, 2))

windows = classify_nqn(report.best_schedule)
if windows is None:
    print("ramp structure: unclassified")
else:
    print(f"ramp structure: fast {windows.n1} us, "
          f"backward {windows.q} us, fast {windows.n2} us")

samples = np.linspace(0.0, report.best_schedule.total_duration, 19)
series = propagate_with_observables(
    config, report.best_schedule, samples,
    observables=("fidelity", "lambda_i", "n_tot"))
print("\n  t_us     F       Lambda_I  n_tot")
for t, f, lam, nt in zip(series["t_us"], series["fidelity"],
                         series["lambda_i"], series["n_tot"]):
    bar = "#" * int(round(30 * f))
    print(f"  {t:5.2f}  {f:7.4f}  {lam:7.4f}  {nt:5.2f}  {bar}")
