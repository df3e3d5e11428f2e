"""Dense Hamiltonian assembly for the driven interacting chain.

The chain Hamiltonian (hbar = 1) is

    H = sum_i (Omega/2 sigma_x^i - Delta n_i) + sum_{i<j} V_ij n_i n_j,
    V_ij = C6 / (|i - j| a)^6,

acting on the 2^N bare product basis.  Matrices returned by this module are
real symmetric with entries in angular units (rad/us); the inputs are linear
frequencies in (2pi) MHz, converted exactly once here.

All pairwise interactions are retained (no nearest-neighbour cutoff), and
storage is dense: the intended regime is desk-scale exact dynamics, N <= 14
or so.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .model import ChainConfig, ConfigError

TWO_PI = 2.0 * np.pi

#: Largest atom count for which dense 2^N x 2^N construction is allowed.
CAP_ATOMS = 16

#: Bare indices (atom 1 = MSB) of the five-state basis used by the reduced
#: three-atom model: |000>, |100>, |010>, |001>, |101>.
REDUCED5_BARE_INDICES = (0, 4, 2, 1, 5)


def pair_interaction(i: int, j: int, config: ChainConfig) -> float:
    """van der Waals energy of sites ``i`` and ``j`` (1-based), in (2pi) MHz.

    Evaluated as (C6 / a^6) / |i - j|^6 so that next-nearest neighbours
    relate to the nearest-neighbour value by division by exactly 64.
    """
    if i == j:
        raise ConfigError(f"j: pair interaction needs distinct sites, got i = j = {i}")
    if not (1 <= i <= config.n_atoms and 1 <= j <= config.n_atoms):
        raise ConfigError(f"i: sites must lie in [1, {config.n_atoms}]")
    return config.c6 / config.spacing**6 / float(abs(i - j)) ** 6


def occupation_numbers(n_atoms: int) -> np.ndarray:
    """popcount(b) for every bare index b, i.e. total excitation number."""
    b = np.arange(1 << n_atoms, dtype=np.uint32)
    counts = np.zeros(b.shape, dtype=np.int64)
    for k in range(n_atoms):
        counts += (b >> k) & 1
    return counts


def interaction_diagonal(config: ChainConfig) -> np.ndarray:
    """sum_{i<j in b} V_ij for every bare index b, in (2pi) MHz."""
    n = config.n_atoms
    dim = 1 << n
    b = np.arange(dim, dtype=np.uint32)
    diag = np.zeros(dim, dtype=float)
    for i in range(1, n + 1):
        bit_i = (b >> (n - i)) & 1
        for j in range(i + 1, n + 1):
            bit_j = (b >> (n - j)) & 1
            diag += pair_interaction(i, j, config) * (bit_i & bit_j)
    return diag


def x_sum_sparse(n_atoms: int) -> sparse.csr_matrix:
    """sum_i sigma_x^i as a unit-coefficient CSR matrix on the bare basis."""
    dim = 1 << n_atoms
    rows = np.repeat(np.arange(dim, dtype=np.int64), n_atoms)
    cols = (rows ^ (1 << np.tile(np.arange(n_atoms, dtype=np.int64), dim)))
    data = np.ones(rows.size, dtype=float)
    return sparse.csr_matrix((data, (rows, cols)), shape=(dim, dim))


def build_full(config: ChainConfig, omega: float, delta: float,
               cap_atoms: int = CAP_ATOMS) -> np.ndarray:
    """Full 2^N x 2^N Hamiltonian for constant (omega, delta), in rad/us.

    Diagonal entry for bare state b:  -delta * popcount(b) + interaction sum;
    off-diagonal omega/2 between states differing in exactly one bit.
    """
    if config.n_atoms > cap_atoms:
        raise ConfigError(
            f"n_atoms: {config.n_atoms} exceeds the dense-construction cap "
            f"of {cap_atoms}")
    dim = config.dim
    h = np.zeros((dim, dim), dtype=float)
    occ = occupation_numbers(config.n_atoms)
    diag = TWO_PI * (-delta * occ + interaction_diagonal(config))
    np.fill_diagonal(h, diag)
    idx = np.arange(dim)
    half_omega = TWO_PI * omega / 2.0
    for k in range(config.n_atoms):
        h[idx, idx ^ (1 << k)] = half_omega
    return h


def build_reduced5(omega: float, delta: float, v_nn: float) -> np.ndarray:
    """Five-state Hamiltonian of a three-atom chain, in rad/us.

    Basis order: |000>, |100>, |010>, |001>, |101> (see
    ``REDUCED5_BARE_INDICES``).  ``v_nn`` is the nearest-neighbour
    interaction in (2pi) MHz; the only interaction that survives in this
    basis is the next-nearest pair of |101>, v_nn / 64.  The middle single
    excitation |010> does not couple to |101> (two flips apart), so that
    entry is exactly zero.
    """
    w = TWO_PI * omega / 2.0
    # same arithmetic order as the full builder, so the projected block of
    # the 8x8 matrix matches this one bit for bit
    diag = TWO_PI * np.array([0.0, -delta * 1.0, -delta * 1.0, -delta * 1.0,
                              -delta * 2.0 + v_nn / 64.0])
    h = np.array([
        [0.0, w,  w,  w,  0.0],
        [w, 0.0, 0.0, 0.0, w],
        [w, 0.0, 0.0, 0.0, 0.0],
        [w, 0.0, 0.0, 0.0, w],
        [0.0, w, 0.0, w, 0.0],
    ])
    h[np.diag_indices(5)] = diag
    return h


def nearest_neighbour_v(config: ChainConfig) -> float:
    """Interaction of an adjacent pair, C6/a^6, in (2pi) MHz."""
    return config.c6 / config.spacing**6
