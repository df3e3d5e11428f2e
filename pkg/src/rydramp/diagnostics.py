"""Scalar observables of an evolving chain state.

Projections come in two flavours: ``Lambda`` onto the bare product basis
(directly measurable site occupations) and ``Gamma`` onto the adiabatic
basis of instantaneous eigenstates.  Both are complete orthonormal bases,
so each set of projection probabilities sums to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .model import BareState, ChainConfig, ConfigError, target_state
from .spectrum import EigenFrame

#: Per-atom readout error of the fidelity model for measured period-2
#: states.
PER_ATOM_ERROR = 0.08


def _n_atoms_of(state: np.ndarray) -> int:
    n = int(np.log2(state.size).round())
    if (1 << n) != state.size:
        raise ConfigError("state: length must be a power of two")
    return n


def fidelity(state: np.ndarray, target: Union[BareState, int]) -> float:
    """|<target|psi>|^2 for a bare target state."""
    idx = target.index if isinstance(target, BareState) else int(target)
    return float(np.abs(state[idx]) ** 2)


def bare_projections(state: np.ndarray,
                     subset: Optional[Sequence[int]] = None) -> np.ndarray:
    """Probabilities Lambda_n = |<n|psi>|^2 over the bare basis.

    With ``subset`` (a list of bare indices) only those entries are
    returned, in the given order.
    """
    lam = np.abs(state) ** 2
    if subset is not None:
        return lam[np.asarray(subset, dtype=np.int64)]
    return lam


def low_energy_basis(config: ChainConfig) -> list:
    """Bare states dominating the ramp dynamics, as ``BareState`` objects.

    The all-ground state, the N single excitations (atom order) and the
    ordered target.
    """
    n = config.n_atoms
    states = [BareState(0, n)]
    states += [BareState(1 << (n - 1 - i), n) for i in range(n)]
    tgt = target_state(config)
    if tgt not in states:
        states.append(tgt)
    return states


def adiabatic_projections(state: np.ndarray, frame: EigenFrame) -> np.ndarray:
    """Probabilities Gamma keyed by adiabatic label.

    ``result[label - 1]`` is the projection probability onto the eigenstate
    carrying that tracked label (see :class:`rydramp.spectrum.LabelTracker`).
    For a frame without history the labels coincide with ascending energy
    order.

    Inside a near-degenerate block the individual eigenvectors are gauge
    dependent, so per-member values there are not physical; sum the entries
    of each block (``frame.degenerate_mask()`` marks the affected labels;
    block sums are gauge invariant).
    """
    if frame.eigenvectors.shape[0] != state.size:
        raise ConfigError(
            f"state: dimension {state.size} does not match frame "
            f"{frame.eigenvectors.shape[0]}")
    amps = frame.eigenvectors.T.conj() @ state
    probs = np.abs(amps) ** 2
    gamma = np.empty_like(probs)
    gamma[frame.labels - 1] = probs
    return gamma


def local_occupations(state: np.ndarray) -> np.ndarray:
    """Expectation <n_i> per site (site 0 = atom 1)."""
    n = _n_atoms_of(state)
    probs = np.abs(state) ** 2
    idx = np.arange(state.size)
    occ = np.empty(n)
    for i in range(n):
        occ[i] = probs[(idx >> (n - 1 - i)) & 1 == 1].sum()
    return occ


def order_parameter(state: np.ndarray) -> tuple:
    """(DeltaS, n_tot): staggered and total excitation numbers.

    DeltaS sums <n_i> over odd-numbered atoms minus even-numbered atoms
    (atom 1 is odd); n_tot is the total Rydberg population.  Both reach
    (N+1)/2 for the period-2 ordered state on an odd chain and vanish for
    the all-ground state.
    """
    occ = local_occupations(state)
    signs = np.where(np.arange(occ.size) % 2 == 0, 1.0, -1.0)
    return float(signs @ occ), float(occ.sum())


def measured_fidelity(ideal: float, n_atoms: int,
                      per_atom_error: float = PER_ATOM_ERROR) -> float:
    """Fidelity after per-atom readout errors, for odd period-2 chains.

    Each of the (N+1)/2 excited atoms in the target pattern is read out
    correctly with probability 1 - per_atom_error, so the measured fidelity
    is ideal * (1 - per_atom_error)^((N+1)/2).
    """
    if n_atoms % 2 == 0:
        raise ConfigError("n_atoms: readout model is defined for odd chains")
    return ideal * (1.0 - per_atom_error) ** ((n_atoms + 1) // 2)


@dataclass
class ObservableSet:
    """All scalar diagnostics of one state at one instant."""

    fidelity: float
    lam: np.ndarray
    delta_s: float
    n_tot: float
    local_n: np.ndarray
    gamma: Optional[np.ndarray] = None

    @classmethod
    def from_state(cls, config: ChainConfig, state: np.ndarray,
                   frame: Optional[EigenFrame] = None) -> "ObservableSet":
        tgt = target_state(config)
        ds, ntot = order_parameter(state)
        return cls(
            fidelity=fidelity(state, tgt),
            lam=bare_projections(state),
            delta_s=ds,
            n_tot=ntot,
            local_n=local_occupations(state),
            gamma=None if frame is None else adiabatic_projections(state, frame),
        )
