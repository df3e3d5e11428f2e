"""Multi-start quasi-Newton search for high-fidelity detuning ramps.

The control variable is the vector of *interior* knot detunings of a
piecewise-linear ramp with fixed endpoints (-12 Omega at t = 0, +12 Omega
at t = tau).  The loss is 1 - |<target|psi(tau)>|^2 for evolution starting
from the all-ground state.  Each restart draws an independent interior
vector uniformly from [-12 Omega, 12 Omega] and runs BFGS (inverse-Hessian
update, backtracking Armijo line search, knots projected back into a
+-20 Omega box after each step); the best restart wins.

Gradients are central finite differences.  All perturbed schedules of one
gradient evaluation differ only in knot values, so they are propagated
together as one batch (see :func:`rydramp.propagate.propagate_batch`).

Reproducibility contract: given the same problem and seed, the report is
bitwise identical, independent of the number of worker processes and of
restart scheduling (restarts use per-index RNG streams and the reduction
orders ties by restart index).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import (ChainConfig, ConfigError, OmegaEnvelope, PulseSchedule,
                    RunConfig, default_nqn_seed, target_state,
                    DELTA_START_OVER_OMEGA, DELTA_END_OVER_OMEGA)
from .propagate import propagate, propagate_batch
from . import diagnostics

#: Default knot box half-width in units of Omega.
BOUND_OVER_OMEGA = 20.0

#: Relaxed propagation tolerance used while optimizing; final results are
#: re-evaluated at the tight default tolerance.
OPT_TOL = 1e-6
FINAL_TOL = 1e-8

_ARMIJO_C1 = 1e-4
_MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class OptimizationProblem:
    """Specification of one ramp-search task."""

    chain: ChainConfig
    tau: float
    n_segments: int = 8
    delta_start: Optional[float] = None  # defaults to -12 Omega
    delta_end: Optional[float] = None    # defaults to +12 Omega
    restarts: int = 50
    seed: int = 0
    bound_over_omega: float = BOUND_OVER_OMEGA
    envelope: Optional[OmegaEnvelope] = None
    fd_step_over_omega: float = 1e-3
    maxiter: int = 60
    gtol: float = 1e-5

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ConfigError("restarts: must be >= 1")
        if self.n_segments < 2:
            raise ConfigError("n_segments: need at least 2 segments")

    @classmethod
    def from_run_config(cls, rc: RunConfig, **overrides) -> "OptimizationProblem":
        kw = dict(
            chain=rc.chain(), tau=rc.tau_us, n_segments=rc.n_segments,
            delta_start=rc.delta_start_over_omega * rc.omega_mhz,
            delta_end=rc.delta_end_over_omega * rc.omega_mhz,
            restarts=rc.restarts, seed=rc.seed, envelope=rc.envelope(),
        )
        kw.update(overrides)
        return cls(**kw)

    @property
    def n_free(self) -> int:
        """Number of free parameters (interior knots)."""
        return self.n_segments - 1

    def template(self) -> PulseSchedule:
        """Schedule with fixed endpoints and linearly seeded interior."""
        sched = default_nqn_seed(self.chain, self.tau, self.n_segments,
                                 envelope=self.envelope)
        lo = self.delta_start if self.delta_start is not None \
            else DELTA_START_OVER_OMEGA * self.chain.omega
        hi = self.delta_end if self.delta_end is not None \
            else DELTA_END_OVER_OMEGA * self.chain.omega
        return sched.with_knot_deltas((lo, *sched.knot_deltas[1:-1], hi))

    def schedule_for(self, interior: Sequence[float]) -> PulseSchedule:
        return self.template().with_interior_deltas(interior)

    @property
    def bound(self) -> float:
        return self.bound_over_omega * self.chain.omega

    def initial_knots(self, restart_index: int) -> np.ndarray:
        """Uniform draw in [-12 Omega, 12 Omega] from the restart's stream."""
        rng = np.random.default_rng([self.seed, restart_index])
        w = self.chain.omega
        return rng.uniform(DELTA_START_OVER_OMEGA * w,
                           DELTA_END_OVER_OMEGA * w, size=self.n_free)


@dataclass
class NqnWindows:
    """Time windows (ramp-local, us) of the three ramp stages."""

    n1: tuple
    q: tuple
    n2: tuple

    def to_json_dict(self) -> dict:
        return {"n1_us": list(self.n1), "q_us": list(self.q),
                "n2_us": list(self.n2)}


def classify_nqn(schedule: PulseSchedule,
                 theta_fast: Optional[float] = None,
                 theta_slow: float = 0.0) -> Optional[NqnWindows]:
    """Classify a ramp into fast-forward / backward / fast-forward stages.

    Segment sweep rates are compared against ``theta_fast`` (default
    20 Omega per us, with Omega taken from the envelope hold value) and
    ``theta_slow`` (default 0: the middle stage must sweep backward).
    Returns ``None`` when the pattern is not present ("unclassified"):
    the leading run of fast segments, the first backward run after it and
    the trailing run of fast segments must all be non-empty.
    """
    if theta_fast is None:
        theta_fast = 20.0 * schedule.envelope.hold
    rates = schedule.sweep_rates()
    times = schedule.knot_times
    n = rates.size
    i = 0
    while i < n and rates[i] > theta_fast:
        i += 1
    if i == 0:
        return None
    j0 = i
    while j0 < n and not rates[j0] < theta_slow:
        j0 += 1
    if j0 == n:
        return None
    j1 = j0
    while j1 < n and rates[j1] < theta_slow:
        j1 += 1
    k = n
    while k > j1 and rates[k - 1] > theta_fast:
        k -= 1
    if k == n:
        return None
    return NqnWindows(n1=(times[0], times[i]),
                      q=(times[j0], times[j1]),
                      n2=(times[k], times[n]))


def loss(interior: Sequence[float], problem: OptimizationProblem,
         tol: float = OPT_TOL,
         substeps_per_us: Optional[float] = None) -> float:
    """1 - fidelity of the final state to the ordered target."""
    interior = np.asarray(interior, dtype=float)
    if interior.size != problem.n_free:
        raise ConfigError(
            f"interior: expected {problem.n_free} knots, got {interior.size}")
    sched = problem.schedule_for(interior)
    result = propagate(problem.chain, sched, tol=tol,
                       substeps_per_us=substeps_per_us)
    tgt = target_state(problem.chain)
    return 1.0 - diagnostics.fidelity(result.final_state, tgt)


def _loss_of_final(problem: OptimizationProblem, finals: np.ndarray) -> np.ndarray:
    tgt = target_state(problem.chain)
    return 1.0 - np.abs(finals[tgt.index, :]) ** 2


def loss_and_gradient(interior: np.ndarray, problem: OptimizationProblem,
                      substeps_per_us: float) -> tuple:
    """Loss and central-difference gradient in one batched propagation.

    The batch holds the unperturbed schedule plus +-step perturbations of
    every interior knot (step = ``fd_step_over_omega`` Omega).
    """
    step = problem.fd_step_over_omega * problem.chain.omega
    scheds = [problem.schedule_for(interior)]
    for k in range(problem.n_free):
        for sign in (1.0, -1.0):
            x = interior.copy()
            x[k] += sign * step
            scheds.append(problem.schedule_for(x))
    finals = propagate_batch(problem.chain, scheds,
                             substeps_per_us=substeps_per_us)
    losses = _loss_of_final(problem, finals)
    grad = (losses[1::2] - losses[2::2]) / (2.0 * step)
    return float(losses[0]), grad


def central_difference(f, x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of a scalar function, one evaluation per
    perturbation."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def gradient(interior: Sequence[float], problem: OptimizationProblem,
             tol: float = OPT_TOL,
             substeps_per_us: Optional[float] = None) -> np.ndarray:
    """Central finite-difference gradient of :func:`loss`.

    Step: ``fd_step_over_omega`` times the Rabi frequency per knot.
    """
    interior = np.asarray(interior, dtype=float)
    spu = substeps_per_us
    if spu is None:
        spu = _calibrate(problem, tol)
    step = problem.fd_step_over_omega * problem.chain.omega
    return central_difference(
        lambda v: loss(v, problem, substeps_per_us=spu), interior, step)


def _calibrate(problem: OptimizationProblem, tol: float) -> float:
    """Substep density meeting ``tol`` on a few probe schedules.

    The optimizer then propagates on this fixed density, which keeps the
    discretization bias a smooth function of the knots (important for
    finite differences) and avoids paying the refinement loop on every
    evaluation.  The halving loop of :func:`propagate` overshoots for the
    fourth-order stepper, so the accepted density is walked back down while
    the probe states stay within ``tol`` of their fine references.
    """
    probes = []
    spu = 0.0
    for k in range(3):
        rng = np.random.default_rng([problem.seed, 982_451_653 + k])
        sched = default_nqn_seed(problem.chain, problem.tau,
                                 problem.n_segments, rng=rng,
                                 envelope=problem.envelope)
        res = propagate(problem.chain, sched, tol=tol / 4.0)
        probes.append((sched, res.final_state))
        spu = max(spu, res.substeps_used / sched.total_duration)
    while spu > 8.0:
        trial = spu / 2.0
        worst = 0.0
        for sched, ref in probes:
            r = propagate(problem.chain, sched, substeps_per_us=trial)
            worst = max(worst, float(np.linalg.norm(r.final_state - ref)))
        if worst < 0.5 * tol:
            spu = trial
        else:
            break
    return 1.25 * spu


@dataclass
class RestartResult:
    index: int
    best_loss: float
    best_knots: np.ndarray
    loss_history: list
    gradient_evaluations: int
    loss_evaluations: int
    converged: bool


def _run_restart(problem: OptimizationProblem, restart_index: int,
                 spu: float) -> RestartResult:
    bound = problem.bound
    x = np.clip(problem.initial_knots(restart_index), -bound, bound)
    n = problem.n_free

    n_loss = 0
    n_grad = 0

    def eval_single(xv: np.ndarray) -> float:
        nonlocal n_loss
        n_loss += 1
        return loss(xv, problem, substeps_per_us=spu)

    def eval_bundle(xv: np.ndarray) -> tuple:
        nonlocal n_loss, n_grad
        n_loss += 2 * n + 1
        n_grad += 1
        return loss_and_gradient(xv, problem, spu)

    f, g = eval_bundle(x)
    best_f, best_x = f, x.copy()
    history = [f]
    hinv = np.eye(n)
    scaled = False
    converged = False

    for iteration in range(problem.maxiter):
        if np.max(np.abs(g)) < problem.gtol or f < 1e-7:
            converged = True
            break
        d = -hinv @ g
        if g @ d >= 0.0:
            hinv = np.eye(n)
            d = -g
        if iteration == 0:
            # knots live on an Omega-sized landscape; take an O(Omega)
            # first trial step instead of trusting the raw gradient scale
            d = d * (problem.chain.omega / max(np.max(np.abs(d)), 1e-30))
        alpha = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            x_new = np.clip(x + alpha * d, -bound, bound)
            actual = x_new - x
            if np.max(np.abs(actual)) < 1e-14:
                break
            f_try = eval_single(x_new)
            if f_try < best_f:
                best_f, best_x = f_try, x_new.copy()
            if f_try <= f + _ARMIJO_C1 * (g @ actual):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        f_new, g_new = eval_bundle(x_new)
        if f_new < best_f:
            best_f, best_x = f_new, x_new.copy()
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                # Shanno-Phua sizing of the initial inverse Hessian
                hinv = (sy / float(y @ y)) * np.eye(n)
                scaled = True
            rho = 1.0 / sy
            sy_outer = np.outer(s, y)
            hinv = (np.eye(n) - rho * sy_outer) @ hinv @ \
                   (np.eye(n) - rho * sy_outer.T) + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        history.append(f)

    return RestartResult(index=restart_index, best_loss=best_f,
                         best_knots=best_x, loss_history=history,
                         gradient_evaluations=n_grad,
                         loss_evaluations=n_loss, converged=converged)


def _restart_task(args) -> RestartResult:
    problem, index, spu = args
    return _run_restart(problem, index, spu)


@dataclass
class OptimizationReport:
    """Best ramp found by multi-start BFGS plus bookkeeping."""

    problem: OptimizationProblem
    best_knots: np.ndarray          # interior knot detunings, (2pi) MHz
    best_schedule: PulseSchedule
    best_loss: float                # minimum loss seen by the optimizer
    best_fidelity: float            # re-evaluated at FINAL_TOL
    best_restart: int
    loss_history: list              # one list per restart
    restart_losses: list
    restart_seeds: list
    gradient_evaluations: int
    loss_evaluations: int
    any_converged: bool
    nqn: Optional[NqnWindows]
    substeps_per_us: float

    @property
    def optimizer_fidelity(self) -> float:
        """1 - best loss as tracked during optimization."""
        return 1.0 - self.best_loss

    def to_json_dict(self) -> dict:
        return {
            "best_fidelity": self.best_fidelity,
            "optimizer_fidelity": self.optimizer_fidelity,
            "best_loss": self.best_loss,
            "best_restart": self.best_restart,
            "best_knots_mhz": [float(v) for v in self.best_knots],
            "schedule": self.best_schedule.to_json_dict(),
            "nqn_segments": self.nqn.to_json_dict() if self.nqn else "unclassified",
            "restart_losses": [float(v) for v in self.restart_losses],
            "restart_seeds": self.restart_seeds,
            "loss_history": [[float(v) for v in h] for h in self.loss_history],
            "gradient_evaluations": self.gradient_evaluations,
            "loss_evaluations": self.loss_evaluations,
            "any_converged": self.any_converged,
            "substeps_per_us": self.substeps_per_us,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def optimize(problem: OptimizationProblem, workers: int = 1) -> OptimizationReport:
    """Run all restarts and return the best ramp found.

    ``workers`` > 1 distributes restarts over processes; the result is
    identical to the serial run (the reduction is ordered by loss with
    restart index as tie-break, and every restart owns an independent,
    index-derived RNG stream).
    """
    spu = _calibrate(problem, OPT_TOL)
    tasks = [(problem, r, spu) for r in range(problem.restarts)]
    if workers > 1 and problem.restarts > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_restart_task, tasks))
    else:
        results = [_restart_task(t) for t in tasks]

    results.sort(key=lambda r: (r.best_loss, r.index))
    best = results[0]
    by_index = sorted(results, key=lambda r: r.index)

    sched = problem.schedule_for(best.best_knots)
    final = propagate(problem.chain, sched, tol=FINAL_TOL)
    tgt = target_state(problem.chain)
    best_fidelity = diagnostics.fidelity(final.final_state, tgt)

    return OptimizationReport(
        problem=problem,
        best_knots=np.asarray(best.best_knots, dtype=float),
        best_schedule=sched,
        best_loss=best.best_loss,
        best_fidelity=best_fidelity,
        best_restart=best.index,
        loss_history=[r.loss_history for r in by_index],
        restart_losses=[r.best_loss for r in by_index],
        restart_seeds=[[problem.seed, r.index] for r in by_index],
        gradient_evaluations=sum(r.gradient_evaluations for r in results),
        loss_evaluations=sum(r.loss_evaluations for r in results),
        any_converged=any(r.converged for r in results),
        nqn=classify_nqn(sched),
        substeps_per_us=spu,
    )
