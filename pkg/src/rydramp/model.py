"""Physical configuration, bare-basis conventions and pulse schedules.

Unit conventions used across the package:

* All frequencies exposed through public APIs (``omega``, ``delta``, ``c6``)
  are *linear* frequencies quoted in (2pi) MHz, matching the usual hardware
  notation.  Conversion to angular units (rad/us) happens exactly once, when
  a Hamiltonian matrix is assembled (see :mod:`rydramp.hamiltonian`).
* Times and lengths are in us and um respectively.
* Bare product states are indexed with atom 1 as the *most significant bit*,
  so ``|101>`` for a three-atom chain has index 5.

All types defined here are immutable value objects and safe to share across
processes or threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

#: van der Waals coefficient of the 70S Rydberg level used by large tweezer
#: arrays, in (2pi) MHz um^6.
C6_DEFAULT = 862690.0

#: Minimum ramp-segment duration accepted by default, in us (hardware
#: waveform resolution floor).
MIN_SEGMENT_US = 0.05

#: Default lattice spacing as a fraction of the blockade radius, per target
#: order.  The order-2 value is a choice (any value with a < R_b < 2a keeps
#: the chain in the period-2 lobe); the order-3/4 values put the chain in
#: the corresponding higher-order lobes.
DEFAULT_SPACING_FRACTION = {2: 0.60, 3: 0.36, 4: 0.29}

#: Detuning ramp endpoints in units of the Rabi frequency.
DELTA_START_OVER_OMEGA = -12.0
DELTA_END_OVER_OMEGA = 12.0


class ConfigError(ValueError):
    """Raised when a configuration value violates a model constraint.

    The message always names the offending field first so command-line
    callers can surface it directly.
    """


def _require(condition: bool, field_name: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{field_name}: {message}")


@dataclass(frozen=True)
class ChainConfig:
    """Static description of a 1D chain of Rydberg atoms.

    Parameters
    ----------
    n_atoms:
        Number of atoms N in the chain.
    spacing:
        Lattice constant a in um.
    c6:
        van der Waals coefficient in (2pi) MHz um^6.
    order:
        Target density-wave period k; the prepared state excites every k-th
        atom starting from atom 1.
    omega:
        Rabi frequency in (2pi) MHz (constant during the ramp).
    """

    n_atoms: int
    spacing: float
    c6: float = C6_DEFAULT
    order: int = 2
    omega: float = 1.0

    def __post_init__(self) -> None:
        _require(int(self.n_atoms) == self.n_atoms and self.n_atoms >= 1,
                 "n_atoms", "must be a positive integer")
        _require(self.spacing > 0, "spacing", "must be positive")
        _require(self.c6 > 0, "c6", "must be positive")
        _require(self.omega > 0, "omega", "must be positive")
        _require(self.order in (2, 3, 4), "order", "must be one of 2, 3, 4")

    def blockade_radius(self) -> float:
        """Blockade radius R_b = (C6/Omega)^(1/6) in um."""
        return (self.c6 / self.omega) ** (1.0 / 6.0)

    @property
    def dim(self) -> int:
        """Dimension 2^N of the bare product basis."""
        return 1 << self.n_atoms


@dataclass(frozen=True)
class BareState:
    """A single product state of local |0>/|1> states.

    ``index`` is the integer whose binary expansion (atom 1 = most
    significant bit) gives the occupation string.
    """

    index: int
    n_atoms: int

    def __post_init__(self) -> None:
        _require(0 <= self.index < (1 << self.n_atoms), "index",
                 f"must lie in [0, 2^{self.n_atoms})")

    @classmethod
    def from_string(cls, bits: str) -> "BareState":
        """Build from an occupation string such as ``"101"``."""
        return cls(index=int(bits, 2), n_atoms=len(bits))

    @property
    def bits(self) -> str:
        """Occupation string, atom 1 first."""
        return format(self.index, f"0{self.n_atoms}b")

    def occupations(self) -> np.ndarray:
        """Per-site occupation numbers as a 0/1 integer array (site 0 = atom 1)."""
        return np.array([int(b) for b in self.bits], dtype=np.int64)

    @property
    def excitations(self) -> int:
        return int(self.index).bit_count()


def target_state(config: ChainConfig) -> BareState:
    """Ordered target state for ``config``: atoms 1, 1+k, 1+2k, ... excited.

    Requires ``n_atoms == 1 (mod order)`` so that both chain ends are
    excited; this explicitly breaks the translational symmetry of the
    Hamiltonian, which a unitary evolution could otherwise never break.
    """
    n, k = config.n_atoms, config.order
    if n % k != 1 % k:
        raise ConfigError(
            f"n_atoms: {n} is not congruent to 1 mod {k}; a period-{k} "
            f"target needs both chain ends excited")
    index = 0
    for atom in range(0, n, k):
        index |= 1 << (n - 1 - atom)
    return BareState(index=index, n_atoms=n)


def disordered_state(n_atoms: int) -> np.ndarray:
    """State vector of ``|D> = |00...0>``, the all-ground product state."""
    psi = np.zeros(1 << n_atoms, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def basis_state(n_atoms: int, index: int) -> np.ndarray:
    """State vector of the bare product state with the given index."""
    psi = np.zeros(1 << n_atoms, dtype=np.complex128)
    psi[index] = 1.0
    return psi


@dataclass(frozen=True)
class OmegaEnvelope:
    """Trapezoidal Rabi-frequency envelope with optional idle windows.

    Timeline of a schedule:
    ``[idle_lead | rise | detuning ramp (tau) | fall | idle_tail]``.
    Omega is zero during the idle windows, ramps linearly over ``rise``
    and ``fall`` (with the detuning parked at its boundary value), and
    holds ``hold`` during the knot ramp itself.
    """

    hold: float
    rise: float = 0.0
    fall: float = 0.0
    idle_lead: float = 0.0
    idle_tail: float = 0.0

    def __post_init__(self) -> None:
        _require(self.hold >= 0, "hold", "must be non-negative")
        for name in ("rise", "fall", "idle_lead", "idle_tail"):
            _require(getattr(self, name) >= 0, name, "must be non-negative")


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-linear detuning ramp plus Rabi envelope.

    ``knot_times`` are ramp-local (t0 = 0, last = tau); evaluation time is
    absolute over the full timeline including idle and rise/fall windows.
    """

    tau: float
    knot_times: tuple
    knot_deltas: tuple
    envelope: OmegaEnvelope
    min_segment: float = MIN_SEGMENT_US

    def __post_init__(self) -> None:
        times = np.asarray(self.knot_times, dtype=float)
        deltas = np.asarray(self.knot_deltas, dtype=float)
        _require(times.ndim == 1 and times.size >= 2, "knot_times",
                 "need at least two knots")
        _require(times.size == deltas.size, "knot_deltas",
                 "must match knot_times in length")
        _require(times[0] == 0.0, "knot_times", "must start at 0")
        _require(abs(times[-1] - self.tau) < 1e-12, "knot_times",
                 f"must end at tau = {self.tau}")
        segs = np.diff(times)
        _require(bool(np.all(segs > 0)), "knot_times",
                 "must be strictly increasing")
        _require(bool(np.all(segs >= self.min_segment - 1e-12)), "knot_times",
                 f"every segment must last at least {self.min_segment} us")
        object.__setattr__(self, "knot_times", tuple(float(t) for t in times))
        object.__setattr__(self, "knot_deltas", tuple(float(d) for d in deltas))

    # -- timeline ---------------------------------------------------------

    @property
    def ramp_start(self) -> float:
        """Absolute time at which the detuning ramp begins."""
        return self.envelope.idle_lead + self.envelope.rise

    @property
    def total_duration(self) -> float:
        e = self.envelope
        return e.idle_lead + e.rise + self.tau + e.fall + e.idle_tail

    def breakpoints(self) -> np.ndarray:
        """All times where (Omega, Delta) changes slope, ascending."""
        e = self.envelope
        pts = [0.0, e.idle_lead, e.idle_lead + e.rise]
        off = self.ramp_start
        pts.extend(off + t for t in self.knot_times)
        pts.append(off + self.tau + e.fall)
        pts.append(self.total_duration)
        uniq = np.unique(np.asarray(pts, dtype=float))
        return uniq

    # -- evaluation -------------------------------------------------------

    def delta_at(self, t) -> np.ndarray:
        """Detuning in (2pi) MHz at absolute time(s) ``t``.

        Exact at knots; clamped to the boundary knot values inside the
        idle/rise/fall windows.
        """
        s = np.asarray(t, dtype=float) - self.ramp_start
        return np.interp(s, self.knot_times, self.knot_deltas)

    def omega_at(self, t) -> np.ndarray:
        """Rabi frequency in (2pi) MHz at absolute time(s) ``t``.

        Zero in the idle windows, linear over the rise/fall windows, and
        equal to the hold value throughout the detuning ramp (endpoints
        included).
        """
        e = self.envelope
        t = np.asarray(t, dtype=float)
        t_rise = e.idle_lead
        t_hold = t_rise + e.rise
        t_fall = t_hold + self.tau
        t_off = t_fall + e.fall
        out = np.where((t >= t_hold) & (t <= t_fall), e.hold, 0.0)
        if e.rise > 0:
            m = (t >= t_rise) & (t < t_hold)
            out = np.where(m, e.hold * (t - t_rise) / e.rise, out)
        if e.fall > 0:
            m = (t > t_fall) & (t <= t_off)
            out = np.where(m, e.hold * (t_off - t) / e.fall, out)
        return out

    def evaluate(self, t: float) -> tuple:
        """(omega, delta) in (2pi) MHz at absolute time ``t``.

        Raises ``ConfigError`` if ``t`` lies outside the schedule timeline.
        """
        if t < -1e-12 or t > self.total_duration + 1e-12:
            raise ConfigError(
                f"t: {t} outside schedule domain [0, {self.total_duration}]")
        return float(self.omega_at(t)), float(self.delta_at(t))

    # -- construction helpers ---------------------------------------------

    def with_knot_deltas(self, deltas: Sequence[float]) -> "PulseSchedule":
        return replace(self, knot_deltas=tuple(float(d) for d in deltas))

    def with_interior_deltas(self, interior: Sequence[float]) -> "PulseSchedule":
        """Replace the free interior knot values, keeping fixed endpoints."""
        if len(interior) != len(self.knot_deltas) - 2:
            raise ConfigError(
                f"interior: expected {len(self.knot_deltas) - 2} values, "
                f"got {len(interior)}")
        full = (self.knot_deltas[0], *map(float, interior), self.knot_deltas[-1])
        return replace(self, knot_deltas=full)

    def sweep_rates(self) -> np.ndarray:
        """Per-segment detuning sweep rates in (2pi) MHz / us."""
        t = np.asarray(self.knot_times)
        d = np.asarray(self.knot_deltas)
        return np.diff(d) / np.diff(t)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "tau_us": self.tau,
            "knots": [
                {"t_us": t, "delta_mhz": d}
                for t, d in zip(self.knot_times, self.knot_deltas)
            ],
            "omega": {
                "hold_mhz": self.envelope.hold,
                "rise_us": self.envelope.rise,
                "fall_us": self.envelope.fall,
                "idle_lead_us": self.envelope.idle_lead,
                "idle_tail_us": self.envelope.idle_tail,
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict,
                       min_segment: float = MIN_SEGMENT_US) -> "PulseSchedule":
        try:
            knots = doc["knots"]
            env = doc["omega"]
            return cls(
                tau=float(doc["tau_us"]),
                knot_times=tuple(float(k["t_us"]) for k in knots),
                knot_deltas=tuple(float(k["delta_mhz"]) for k in knots),
                envelope=OmegaEnvelope(
                    hold=float(env["hold_mhz"]),
                    rise=float(env.get("rise_us", 0.0)),
                    fall=float(env.get("fall_us", 0.0)),
                    idle_lead=float(env.get("idle_lead_us", 0.0)),
                    idle_tail=float(env.get("idle_tail_us", 0.0)),
                ),
                min_segment=min_segment,
            )
        except KeyError as exc:
            raise ConfigError(f"{exc.args[0]}: missing schedule field") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PulseSchedule":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def uniform_knot_times(tau: float, n_segments: int) -> tuple:
    """n_segments+1 equally spaced knot times spanning [0, tau]."""
    return tuple(tau * i / n_segments for i in range(n_segments + 1))


def default_nqn_seed(config: ChainConfig, tau: float, n_segments: int,
                     rng: Optional[np.random.Generator] = None,
                     envelope: Optional[OmegaEnvelope] = None,
                     min_segment: float = MIN_SEGMENT_US) -> PulseSchedule:
    """Seed schedule for ramp optimization.

    Uniform knot spacing over ``tau``; boundary detunings fixed at
    -12 Omega and +12 Omega.  Interior knots are drawn uniformly from
    [-12 Omega, 12 Omega] when ``rng`` is given, otherwise filled by
    linear interpolation between the endpoints.
    """
    if tau < n_segments * min_segment - 1e-12:
        raise ConfigError(
            f"tau: {tau} us cannot hold {n_segments} segments at the "
            f"{min_segment} us resolution floor")
    lo = DELTA_START_OVER_OMEGA * config.omega
    hi = DELTA_END_OVER_OMEGA * config.omega
    times = uniform_knot_times(tau, n_segments)
    if rng is None:
        deltas = tuple(np.linspace(lo, hi, n_segments + 1))
    else:
        interior = rng.uniform(lo, hi, size=n_segments - 1)
        deltas = (lo, *interior, hi)
    if envelope is None:
        envelope = OmegaEnvelope(hold=config.omega)
    return PulseSchedule(tau=tau, knot_times=times, knot_deltas=deltas,
                         envelope=envelope, min_segment=min_segment)


# ---------------------------------------------------------------------------
# Run configuration document (JSON)
# ---------------------------------------------------------------------------

_RUN_FIELDS = (
    "n_atoms", "order", "omega_mhz", "spacing_um", "c6_mhz_um6", "tau_us",
    "n_segments", "delta_start_over_omega", "delta_end_over_omega",
    "idle_us", "seed", "restarts",
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved contents of a JSON run-configuration document.

    ``spacing_um`` defaults to an order-dependent fraction of the blockade
    radius (see ``DEFAULT_SPACING_FRACTION``) when omitted.
    """

    n_atoms: int = 7
    order: int = 2
    omega_mhz: float = 1.0
    spacing_um: Optional[float] = None
    c6_mhz_um6: float = C6_DEFAULT
    tau_us: float = 1.8
    n_segments: int = 8
    delta_start_over_omega: float = DELTA_START_OVER_OMEGA
    delta_end_over_omega: float = DELTA_END_OVER_OMEGA
    idle_us: float = 0.0
    seed: int = 0
    restarts: int = 50

    def __post_init__(self) -> None:
        _require(self.n_segments >= 1, "n_segments", "must be >= 1")
        _require(self.restarts >= 1, "restarts", "must be >= 1")
        _require(self.tau_us > 0, "tau_us", "must be positive")
        _require(self.idle_us >= 0, "idle_us", "must be non-negative")
        # Constructing the chain validates the physical fields.
        self.chain()

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RunConfig":
        unknown = set(doc) - set(_RUN_FIELDS)
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown config field")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def resolved_spacing(self) -> float:
        if self.spacing_um is not None:
            return self.spacing_um
        rb = (self.c6_mhz_um6 / self.omega_mhz) ** (1.0 / 6.0)
        return DEFAULT_SPACING_FRACTION[self.order] * rb

    def chain(self) -> ChainConfig:
        return ChainConfig(n_atoms=self.n_atoms, spacing=self.resolved_spacing(),
                           c6=self.c6_mhz_um6, order=self.order,
                           omega=self.omega_mhz)

    def envelope(self) -> OmegaEnvelope:
        return OmegaEnvelope(hold=self.omega_mhz, idle_lead=self.idle_us,
                             idle_tail=self.idle_us)

    def seed_schedule(self, rng: Optional[np.random.Generator] = None) -> PulseSchedule:
        sched = default_nqn_seed(self.chain(), self.tau_us, self.n_segments,
                                 rng=rng, envelope=self.envelope())
        lo = self.delta_start_over_omega * self.omega_mhz
        hi = self.delta_end_over_omega * self.omega_mhz
        deltas = (lo, *sched.knot_deltas[1:-1], hi)
        return sched.with_knot_deltas(deltas)

    def to_json_dict(self) -> dict:
        """All fields materialized (spacing resolved to a number)."""
        doc = {name: getattr(self, name) for name in _RUN_FIELDS}
        doc["spacing_um"] = self.resolved_spacing()
        return doc
