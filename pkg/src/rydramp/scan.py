"""Ground-state phase classification over the detuning-blockade plane.

A chain's ground state is classified by the density-wave structure factor
of its occupation profile,

    S(q) = |sum_j e^(i q j) <n_j>|^2 / N^2,

evaluated at q = pi, 2pi/3 and pi/2 (period 2, 3 and 4).  A period-4
profile aliases onto q = pi with equal weight, so ties resolve toward the
longer period.  Finite chains with open boundaries smear the lobe edges
relative to the thermodynamic-limit diagram; the intent here is the
qualitative layout (ordered lobes appearing in ascending blockade range),
not precise boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .hamiltonian import build_full
from .model import ChainConfig, ConfigError
from . import diagnostics
from .spectrum import DEGENERACY_RTOL

#: Labels keyed by the structure-factor momentum that wins.
_Q_LABELS = ((np.pi / 2.0, "Z4"), (2.0 * np.pi / 3.0, "Z3"), (np.pi, "Z2"))

#: Minimum normalized structure-factor peak for an ordered label.
ORDER_THRESHOLD = 0.05

#: Minimum filling n_tot / N for an ordered label.
FILLING_THRESHOLD = 0.1


@dataclass(frozen=True)
class GroundState:
    """Lowest eigenvector of the chain Hamiltonian at fixed detuning."""

    state: np.ndarray
    energy: float
    gap: float
    degenerate: bool


@dataclass(frozen=True)
class PhasePoint:
    delta_over_omega: float
    rb_over_a: float
    phase_label: str
    order_strength: float


def ground_state(config: ChainConfig, delta: float) -> GroundState:
    """Ground state of H(omega, delta); flags near-degeneracy.

    On a near-degenerate ground space (gap below ``DEGENERACY_RTOL`` of the
    spectral scale) the lowest-index eigenvector is returned with
    ``degenerate=True``; occupation profiles, which drive classification,
    remain well defined.
    """
    h = build_full(config, config.omega, delta)
    evals, evecs = np.linalg.eigh(h)
    scale = max(float(np.max(np.abs(evals))), 1e-300)
    gap = float(evals[1] - evals[0]) if evals.size > 1 else np.inf
    return GroundState(state=evecs[:, 0].astype(np.complex128),
                       energy=float(evals[0]), gap=gap,
                       degenerate=bool(gap < DEGENERACY_RTOL * scale))


def structure_factor(occupations: np.ndarray, q: float) -> float:
    """Normalized density-wave structure factor S(q) of a site profile."""
    n = occupations.size
    sites = np.arange(1, n + 1)
    amp = np.sum(occupations * np.exp(1j * q * sites))
    return float(np.abs(amp) ** 2) / n**2


def classify_phase(state: np.ndarray, config: ChainConfig) -> PhasePoint:
    """Label the density-wave order of a normalized state."""
    occ = diagnostics.local_occupations(state)
    n_tot = float(occ.sum())
    best_label = "disordered"
    best_s = 0.0
    for q, label in _Q_LABELS:
        s = structure_factor(occ, q)
        if s > best_s + 1e-12:
            best_s = s
            best_label = label
    if best_s <= ORDER_THRESHOLD or n_tot / config.n_atoms <= FILLING_THRESHOLD:
        best_label = "disordered"
    return PhasePoint(
        delta_over_omega=np.nan, rb_over_a=np.nan,
        phase_label=best_label, order_strength=best_s)


def scan(config: ChainConfig, delta_over_omega: Sequence[float],
         rb_over_a: Sequence[float]) -> list:
    """Classify the ground state on a rectangular grid.

    ``config`` fixes N, C6 and Omega; the lattice spacing is re-derived
    from each requested blockade ratio.  Points are emitted row-major
    (outer loop over ``rb_over_a``, inner over ``delta_over_omega``).
    """
    deltas = list(delta_over_omega)
    ratios = list(rb_over_a)
    if not deltas or not ratios:
        raise ConfigError("grid: must contain at least one point")
    rb = config.blockade_radius()
    points = []
    for ratio in ratios:
        if ratio <= 0:
            raise ConfigError("rb_over_a: must be positive")
        chain = replace(config, spacing=rb / ratio)
        for dov in deltas:
            gs = ground_state(chain, dov * config.omega)
            pt = classify_phase(gs.state, chain)
            points.append(replace(pt, delta_over_omega=float(dov),
                                  rb_over_a=float(ratio)))
    return points
