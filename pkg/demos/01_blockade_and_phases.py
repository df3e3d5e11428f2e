"""Ground-state phases of a driven interacting chain.

Builds the chain Hamiltonian at a few working points, shows the blockade
radius arithmetic, and maps the ground-state order over the
(detuning, blockade ratio) plane, printing a coarse ASCII phase diagram:
disordered at strong negative detuning, period-2 order once only nearest
neighbours are blockaded, period-3/4 order as the blockade range grows.

Run:  python demos/01_blockade_and_phases.py
"""

import numpy as np

from rydramp import ChainConfig, scan

config = ChainConfig(n_atoms=7, spacing=5.85, c6=862690.0, omega=1.0)
print(f"chain: N={config.n_atoms}, a={config.spacing} um, "
      f"Omega={config.omega} (2pi) MHz")
print(f"blockade radius R_b = (C6/Omega)^(1/6) = "
      f"{config.blockade_radius():.2f} um")
print(f"R_b / a = {config.blockade_radius() / config.spacing:.2f} "
      f"(nearest neighbours blockaded)\n")

deltas = np.linspace(-4, 12, 33)
ratios = np.linspace(0.5, 4.5, 17)
points = scan(config, deltas, ratios)

symbol = {"disordered": ".", "Z2": "2", "Z3": "3", "Z4": "4", "other": "?"}
print("phase map (rows: R_b/a ascending; columns: Delta/Omega "
      f"{deltas[0]:.0f} to {deltas[-1]:.0f})")
for r_idx in range(len(ratios) - 1, -1, -1):
    row = points[r_idx * len(deltas):(r_idx + 1) * len(deltas)]
    line = "".join(symbol[p.phase_label] for p in row)
    print(f"  R_b/a={ratios[r_idx]:4.2f}  {line}")
print("\nlegend: . disordered   2/3/4 period-2/3/4 density-wave order")
