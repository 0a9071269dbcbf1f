"""CRAB pulse optimization of the coupling schedule and the sequential baseline."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ._kernels import rk4_star_real_final
from .dynamics import TimeGrid
from .model import SystemParams
from .schedule import CrabSchedule, HarmonicProfile, PiecewiseSchedule, Segment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CrabConfig:
    """Settings of one CRAB optimization.

    ``grid_N=None`` uses the default integration grid for the system.
    ``basis_states=None`` means the n single-cavity states.
    """

    T: float
    m: int = 6
    g0_fixed: float = 1.0
    amplitude_bound: float = 5.0
    seed: int = 0
    n_restarts: int = 5
    max_evals: int = 2000
    simplex_step: float = 0.5
    grid_N: int | None = None
    basis_states: np.ndarray | None = None

    def __post_init__(self):
        if self.m < 1 or self.n_restarts < 1 or self.max_evals < 1:
            raise ValueError("m, n_restarts and max_evals must be >= 1")
        if not (self.T > 0 and self.amplitude_bound > 0 and self.simplex_step > 0):
            raise ValueError("T, amplitude_bound and simplex_step must be positive")

    def grid(self, params: SystemParams) -> TimeGrid:
        return TimeGrid.default(params, self.T) if self.grid_N is None else TimeGrid(self.T, self.grid_N)


@dataclass
class OptimizationReport:
    schedule: CrabSchedule
    objective_history: np.ndarray
    per_basis_residuals: np.ndarray
    evaluations: int
    seed: int
    budget_exhausted: bool = False
    restart_objectives: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return float(np.sum(self.per_basis_residuals))

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "per_basis_residuals": self.per_basis_residuals.tolist(),
            "evaluations": self.evaluations,
            "seed": self.seed,
            "budget_exhausted": self.budget_exhausted,
            "restart_objectives": list(self.restart_objectives),
            "objective_history": self.objective_history.tolist(),
        }


def crab_schedule(cfg: CrabConfig, A, r) -> CrabSchedule:
    """g_i(t) = (1/m) sum_k A[k, i] sin(2 pi k (1 + r_k) t / T), g0 fixed."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    r = np.asarray(r, dtype=float)
    if A.shape[0] != cfg.m or r.shape != (cfg.m,):
        raise ValueError(f"expected A with {cfg.m} rows and {cfg.m} random offsets")
    if np.any(np.abs(A) > cfg.amplitude_bound * (1 + 1e-12)):
        raise ValueError(f"amplitude exceeds bound {cfg.amplitude_bound}")
    if np.any((r < 0) | (r > 1)):
        raise ValueError("r_k must lie in [0, 1]")
    return CrabSchedule(T=cfg.T, g0_fixed=cfg.g0_fixed, A=A, r=r, seed=cfg.seed)


def _basis_columns(params: SystemParams, states) -> np.ndarray:
    if states is None:
        states = np.eye(params.n)
    states = np.atleast_2d(np.asarray(states))
    if np.iscomplexobj(states) and np.any(np.imag(states) != 0):
        raise ValueError("optimization basis states must be real")
    states = np.real(states).astype(float)
    if states.shape[1] != params.n or np.linalg.matrix_rank(states) < params.n:
        raise ValueError("basis states must be n linearly independent rows of length n")
    cols = np.zeros((params.dim, states.shape[0]))
    cols[1:-1] = states.T
    return cols


class _Objective:
    """J(A) = sum of squared residual norms; the sine basis is cached per r."""

    def __init__(self, params, cfg, r, cols):
        self.grid = cfg.grid(params)
        self.damp = params.damping.astype(float)
        self.cols = np.ascontiguousarray(cols)
        self.m, self.n = cfg.m, params.n
        self.g0 = cfg.g0_fixed
        w = 2 * np.pi * np.arange(1, cfg.m + 1) * (1 + r) / cfg.T
        self.basis = np.sin(np.outer(w, self.grid.half_times))
        self.nfev = 0

    def residuals(self, x) -> np.ndarray:
        A = np.asarray(x, dtype=float).reshape(self.m, self.n)
        g = np.empty((self.n + 1, self.basis.shape[1]))
        g[0] = self.g0
        g[1:] = A.T @ self.basis / self.m
        out = rk4_star_real_final(g, self.damp, self.cols, self.grid.h)
        return np.sum(out * out, axis=0)

    def __call__(self, x) -> float:
        self.nfev += 1
        return float(np.sum(self.residuals(x)))


def _restart(params, cfg, cols, r, signs):
    obj = _Objective(params, cfg, r, cols)
    dim = cfg.m * params.n
    x0 = np.zeros(dim)
    simplex = np.vstack([x0, cfg.simplex_step * cfg.g0_fixed * np.diag(signs)])
    best = [obj(x0)]

    def track(intermediate_result):
        best.append(min(best[-1], float(intermediate_result.fun)))

    res = minimize(obj, x0, method="Nelder-Mead", callback=track,
                   bounds=[(-cfg.amplitude_bound, cfg.amplitude_bound)] * dim,
                   options={"maxfev": cfg.max_evals, "initial_simplex": simplex,
                            "xatol": 1e-10, "fatol": 1e-14, "adaptive": True})
    x = np.clip(res.x, -cfg.amplitude_bound, cfg.amplitude_bound)
    return x, obj.residuals(x), np.asarray(best), obj.nfev, res.status == 1


def optimize_crab(params: SystemParams, cfg: CrabConfig, *, n_jobs: int = 1) -> OptimizationReport:
    """Minimize the summed residual of every basis state with one CRAB schedule.

    Each restart draws fresh r_k from the seeded generator and starts
    Nelder-Mead at A = 0. Restarts are independent and may run in parallel.
    """
    if params.n < 1:
        raise ValueError("need at least one microwave cavity")
    cols = _basis_columns(params, cfg.basis_states)
    rng = np.random.default_rng(cfg.seed)
    draws = [(rng.uniform(0.0, 1.0, cfg.m), rng.choice([-1.0, 1.0], cfg.m * params.n))
             for _ in range(cfg.n_restarts)]

    if n_jobs == 1:
        runs = [_restart(params, cfg, cols, r, s) for r, s in draws]
    else:
        from joblib import Parallel, delayed
        runs = Parallel(n_jobs=n_jobs)(delayed(_restart)(params, cfg, cols, r, s) for r, s in draws)

    history, evaluations, exhausted = [], 0, False
    best_idx, best_val = 0, np.inf
    for i, (x, res, hist, nfev, hit) in enumerate(runs):
        evaluations += nfev
        exhausted |= hit
        floor = history[-1] if history else np.inf
        history.extend(np.minimum(hist, floor))
        if np.sum(res) < best_val:
            best_idx, best_val = i, float(np.sum(res))
    x, res = runs[best_idx][0], runs[best_idx][1]
    # J_final <= J(0): restart 0's history starts at A = 0
    sched = crab_schedule(cfg, x.reshape(cfg.m, params.n), draws[best_idx][0])
    if exhausted:
        log.info("CRAB evaluation budget exhausted; returning best schedule found (J=%.3e)", best_val)
    return OptimizationReport(
        schedule=sched,
        objective_history=np.asarray(history),
        per_basis_residuals=res,
        evaluations=evaluations,
        seed=cfg.seed,
        budget_exhausted=exhausted,
        restart_objectives=[float(np.sum(run[1])) for run in runs],
    )


def single_cavity_residual(params: SystemParams, schedule, grid: TimeGrid | None = None) -> float:
    """Residual population after emptying one cavity (first microwave slot)."""
    grid = grid or TimeGrid.default(params, schedule.T)
    cols = np.zeros((params.dim, 1))
    cols[1, 0] = 1.0
    g = np.ascontiguousarray(schedule.values(grid.half_times))
    out = rk4_star_real_final(g, params.damping.astype(float), cols, grid.h)
    return float(np.sum(out * out))


def fit_bump_peak(params: SystemParams, duration: float, g0: float = 1.0, bound: float = 5.0) -> float:
    """Peak of a sin(pi t/duration) coupling that best empties one cavity."""
    one = SystemParams(n=1, kappa0=params.kappa0, kappa=float(np.max(params.kappa)), gamma_m=params.gamma_m)

    def resid(peak):
        seg = Segment(duration, np.array([g0, 1.0]), HarmonicProfile.bump(peak))
        return single_cavity_residual(one, PiecewiseSchedule((seg,)))

    return float(minimize_scalar(resid, bounds=(1e-3, bound), method="bounded",
                                 options={"xatol": 1e-6}).x)


def trivial_schedule(params: SystemParams, T: float, per_stage_margin: float = 0.0,
                     profile: HarmonicProfile | None = None, g0: float | None = None) -> PiecewiseSchedule:
    """Empty the cavities one at a time, each in its own stage of length T/n.

    In stage i only g_i is switched on, shaped by ``profile`` over the
    active part of the stage. The last ``per_stage_margin`` fraction of each
    stage is idle (all microwave couplings off) so the optical cavity can
    ring down. Without a profile a sine bump is used, its peak fitted to
    empty a single cavity within the active time.
    """
    n = params.n
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= per_stage_margin < 1:
        raise ValueError("per_stage_margin must be in [0, 1)")
    g0 = params.g0_ref if g0 is None else g0
    stage = T / n
    active = stage * (1 - per_stage_margin)
    if profile is None:
        profile = HarmonicProfile.bump(fit_bump_peak(params, active, g0))
    segments = []
    for i in range(1, n + 1):
        g = np.zeros(n + 1)
        g[0], g[i] = g0, 1.0
        segments.append(Segment(active, g, profile))
        if per_stage_margin > 0:
            idle = np.zeros(n + 1)
            idle[0] = g0
            segments.append(Segment(stage - active, idle))
    return PiecewiseSchedule(tuple(segments))


def profile_from_crab(schedule: CrabSchedule, channel: int = 0) -> HarmonicProfile:
    """Coupling shape of one CRAB channel in fractional time, reusable per stage."""
    if schedule.reversed:
        raise ValueError("profile extraction expects a forward schedule")
    return HarmonicProfile(tuple(schedule.A[:, channel]), tuple(schedule.r))
