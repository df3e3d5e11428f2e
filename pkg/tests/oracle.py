"""Independent reference implementations used only by the tests.

The propagation oracle integrates the Schrodinger equation as a plain
complex ODE with an adaptive high-order Runge-Kutta scheme operating on
densely rebuilt Hamiltonian matrices.  It shares no stepping logic with
the production propagator (midpoint/CF4 exponential substeps), so
agreement between the two is a meaningful check.
"""

import numpy as np
from scipy.integrate import solve_ivp

from rydramp.hamiltonian import build_full
from rydramp.model import ChainConfig, PulseSchedule


def ode_propagate(config: ChainConfig, schedule: PulseSchedule,
                  state: np.ndarray, t_start: float = 0.0,
                  t_end: float = None, rtol: float = 1e-11,
                  atol: float = 1e-13) -> np.ndarray:
    """Final state via adaptive DOP853 on the full 2^N system."""
    if t_end is None:
        t_end = schedule.total_duration

    def rhs(t, y):
        om = float(schedule.omega_at(t))
        de = float(schedule.delta_at(t))
        h = build_full(config, om, de)
        return -1j * (h @ y)

    sol = solve_ivp(rhs, (t_start, t_end), np.asarray(state, dtype=complex),
                    method="DOP853", rtol=rtol, atol=atol, dense_output=False)
    assert sol.success, sol.message
    return sol.y[:, -1]


def tensor_product_spectrum(n_atoms: int, omega: float) -> np.ndarray:
    """Analytic eigenvalues of N independent driven atoms at zero detuning.

    Each atom contributes +-(2 pi omega)/2; the total spectrum is
    (N - 2k) (2 pi omega) / 2 with multiplicity C(N, k).
    """
    from math import comb
    w = 2.0 * np.pi * omega / 2.0
    evals = []
    for k in range(n_atoms + 1):
        evals.extend([(n_atoms - 2 * k) * w] * comb(n_atoms, k))
    return np.sort(np.asarray(evals))


def stencil5_gradient(f, x: np.ndarray, step: float) -> np.ndarray:
    """Five-point-stencil gradient, one order higher than central
    differences."""
    g = np.zeros_like(x)
    for i in range(x.size):
        xs = [x.copy() for _ in range(4)]
        xs[0][i] += 2 * step
        xs[1][i] += step
        xs[2][i] -= step
        xs[3][i] -= 2 * step
        g[i] = (-f(xs[0]) + 8 * f(xs[1]) - 8 * f(xs[2]) + f(xs[3])) / (12 * step)
    return g
