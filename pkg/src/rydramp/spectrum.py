"""Instantaneous eigensystem analysis and level-crossing tools.

The *adiabatic basis* is the set of instantaneous eigenstates of H(t),
ordered by energy.  Because avoided crossings can be arbitrarily sharp,
plotting projections against a fixed eigenstate index produces misleading
jumps; :class:`LabelTracker` therefore assigns each eigenvector a persistent
*adiabatic label* by maximal-overlap continuity between consecutive frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hamiltonian import TWO_PI
from .model import ChainConfig, ConfigError, target_state

#: Relative eigenvalue gap below which two levels are treated as a
#: degenerate block (projections onto individual members are gauge
#: dependent and flagged non-physical).
DEGENERACY_RTOL = 1e-9

#: Overlap magnitude below which continuity tracking is considered
#: ambiguous and falls back to energy ordering.
AMBIGUOUS_OVERLAP = 0.5


@dataclass
class EigenFrame:
    """Sorted eigensystem of H at one instant.

    ``labels[j]`` is the persistent adiabatic label (1-based) of eigenvector
    column ``j``; for a frame produced without history it is simply ``j+1``.
    ``tracked_index_map[j]`` gives the column index in the *previous* frame
    that column ``j`` continues (identity for a standalone frame).
    """

    t: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: np.ndarray
    tracked_index_map: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def degenerate_mask(self, rtol: float = DEGENERACY_RTOL) -> np.ndarray:
        """Boolean mask of levels belonging to a near-degenerate block."""
        e = self.eigenvalues
        scale = max(np.max(np.abs(e)), 1e-300)
        close = np.diff(e) < rtol * scale
        mask = np.zeros(e.size, dtype=bool)
        mask[:-1] |= close
        mask[1:] |= close
        return mask


def _fix_gauge(vecs: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of each column positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.nonzero(np.abs(col) > 1e-11 * np.max(np.abs(col)))[0]
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def eigensystem(h: np.ndarray, t: float = 0.0) -> EigenFrame:
    """Full eigendecomposition of a real-symmetric Hamiltonian.

    Eigenvalues ascend; eigenvectors are orthonormal columns with the sign
    convention that the first non-negligible component is positive.
    """
    h = np.asarray(h)
    scale = max(np.max(np.abs(h)), 1.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-10 * scale:
        raise ConfigError("h: matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(h)
    evecs = _fix_gauge(np.real_if_close(evecs))
    dim = evals.size
    ident = np.arange(dim)
    return EigenFrame(t=t, eigenvalues=evals, eigenvectors=evecs,
                      labels=ident + 1, tracked_index_map=ident)


def track_adiabatic_labels(prev: EigenFrame, new: EigenFrame) -> np.ndarray:
    """Match ``new``'s eigenvectors to ``prev``'s by maximal overlap.

    Returns a permutation ``p`` with ``p[j]`` = column of ``prev`` continued
    by column ``j`` of ``new``.  Assignment is greedy on |overlap|, largest
    first; pairs whose best available overlap falls below
    ``AMBIGUOUS_OVERLAP`` (e.g. inside a degenerate block, where the gauge
    is arbitrary) are instead matched in energy order.
    """
    if prev.dim != new.dim:
        raise ConfigError(
            f"new: dimension {new.dim} does not match previous frame {prev.dim}")
    dim = prev.dim
    overlap = np.abs(prev.eigenvectors.T.conj() @ new.eigenvectors)
    order = np.argsort(overlap, axis=None)[::-1]
    perm = np.full(dim, -1, dtype=np.int64)
    used_prev = np.zeros(dim, dtype=bool)
    used_new = np.zeros(dim, dtype=bool)
    assigned = 0
    for flat in order:
        i, j = divmod(int(flat), dim)
        if used_prev[i] or used_new[j]:
            continue
        if overlap[i, j] < AMBIGUOUS_OVERLAP:
            break
        perm[j] = i
        used_prev[i] = used_new[j] = True
        assigned += 1
        if assigned == dim:
            break
    if assigned < dim:
        # ambiguous remainder: pair leftovers in energy (index) order
        rest_prev = np.flatnonzero(~used_prev)
        rest_new = np.flatnonzero(~used_new)
        perm[rest_new] = rest_prev
    return perm


class LabelTracker:
    """Carries adiabatic labels through a sequence of eigenframes."""

    def __init__(self) -> None:
        self._prev: Optional[EigenFrame] = None

    def update(self, h: np.ndarray, t: float) -> EigenFrame:
        frame = eigensystem(h, t=t)
        if self._prev is not None:
            perm = track_adiabatic_labels(self._prev, frame)
            frame.tracked_index_map = perm
            frame.labels = self._prev.labels[perm]
        self._prev = frame
        return frame


def bare_crossings(config: ChainConfig) -> np.ndarray:
    """Detunings at which low-band bare energies cross, in (2pi) MHz.

    The low band consists of the all-ground state (energy 0), the single
    excitations (energy -Delta) and the ordered target (energy
    -m Delta + W with m excitations and interaction sum W).  Crossings:
    Delta = 0 (ground vs singles), W/m (ground vs target) and W/(m-1)
    (singles vs target).  For a three-atom period-2 chain this evaluates to
    {0, V/128, V/64} with V the nearest-neighbour interaction.
    """
    tgt = target_state(config)
    occ = np.flatnonzero(tgt.occupations())  # 0-based sites
    w = 0.0
    for ai in range(occ.size):
        for aj in range(ai + 1, occ.size):
            dist = (occ[aj] - occ[ai]) * config.spacing
            w += config.c6 / dist**6
    m = tgt.excitations
    crossings = {0.0}
    if m >= 1 and w > 0:
        crossings.add(w / m)
    if m >= 2:
        crossings.add(w / (m - 1))
    return np.array(sorted(crossings))


def landau_zener(omega: float, delta_rate: float,
                 convention: str = "paper") -> float:
    """Diabatic survival probability at a linear level crossing.

    Parameters
    ----------
    omega:
        Rabi frequency in (2pi) MHz.
    delta_rate:
        Detuning sweep rate in (2pi) MHz / us (must be positive).
    convention:
        ``"paper"`` evaluates exp(-2 pi Omega^2 / dDelta/dt) with both
        quantities in angular units.  ``"half-coupling"`` uses the coupling
        that actually appears in the chain Hamiltonian, Omega/2, giving the
        exact asymptotic survival probability of a driven two-level system:
        exp(-pi Omega^2 / (2 dDelta/dt)).
    """
    if delta_rate <= 0:
        raise ConfigError("delta_rate: must be positive")
    w = TWO_PI * omega
    rate = TWO_PI * delta_rate
    if convention == "paper":
        coupling = w
    elif convention == "half-coupling":
        coupling = w / 2.0
    else:
        raise ConfigError(
            f"convention: expected 'paper' or 'half-coupling', got {convention!r}")
    return float(np.exp(-2.0 * np.pi * coupling**2 / rate))


def paper_rate_for_probability(omega: float, probability: float) -> float:
    """Invert the paper-convention crossing formula for the sweep rate.

    Returns the detuning rate in (2pi) MHz / us at which
    ``landau_zener(omega, rate, "paper")`` equals ``probability``.
    """
    if not 0 < probability < 1:
        raise ConfigError("probability: must lie strictly between 0 and 1")
    w = TWO_PI * omega
    rate = -2.0 * np.pi * w**2 / np.log(probability)
    return rate / TWO_PI
