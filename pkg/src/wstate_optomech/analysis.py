"""Fidelity metrics, emit/reverse/inject roundtrips and the parameter sweeps."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np

from .control import CrabConfig, optimize_crab, profile_from_crab, trivial_schedule
from .dynamics import PulseShape, TimeGrid, Trajectory, evolve_emission, evolve_injection, time_reverse
from .model import SystemParams


@dataclass(frozen=True)
class WState:
    """Unit-norm coefficients (w_1..w_n) of a single-excitation W state."""

    w: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=complex)).copy()
        if w.ndim != 1:
            raise ValueError("W coefficients must be a vector")
        if abs(np.vdot(w, w).real - 1) > 1e-12:
            raise ValueError(f"W coefficients must have unit norm, got {np.linalg.norm(w)}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_unnormalized(cls, w) -> "WState":
        w = np.asarray(w, dtype=complex)
        return cls(w / np.linalg.norm(w))

    @classmethod
    def basis(cls, n: int, i: int) -> "WState":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)

    @property
    def n(self) -> int:
        return self.w.size

    def embed(self) -> np.ndarray:
        """Excitation vector (a0, a1..an, bm) with empty optical and mechanical modes."""
        psi = np.zeros(self.n + 2, dtype=complex)
        psi[1:-1] = self.w
        return psi


def random_w_states(n: int, count: int, seed: int) -> list[WState]:
    """Uniform on the complex unit sphere in n dimensions."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return [WState.from_unnormalized(row) for row in z]


def overlap_fidelity(target, final) -> float:
    """|<target|final>|^2 without renormalizing ``final``."""
    target = np.asarray(target, dtype=complex)
    final = np.asarray(final, dtype=complex)
    if target.shape != final.shape:
        raise ValueError(f"dimension mismatch: {target.shape} vs {final.shape}")
    return float(abs(np.vdot(target, final)) ** 2)


@dataclass
class Roundtrip:
    emission: Trajectory
    injection: Trajectory
    fidelity: float

    @property
    def pulse(self) -> PulseShape:
        return self.emission.emitted


def _grid(params, sched, grid):
    return grid or TimeGrid.default(params, sched.T)


def roundtrip(params: SystemParams, sched, target: WState, grid: TimeGrid | None = None,
              *, normalize_pulse: bool = True) -> Roundtrip:
    """Emit, time-reverse pulse and schedule, inject into the empty system.

    The emission leg starts from conj(target): reversing the conjugated
    output then regenerates the target itself, also for complex w. For
    real w this is the plain emit-and-reverse procedure. The incident
    pulse is rescaled to carry exactly one photon unless
    ``normalize_pulse=False``, which injects the emitted amplitude as is.
    Nothing is injected when nothing was emitted.
    """
    grid = _grid(params, sched, grid)
    emission = evolve_emission(params, sched, np.conj(target.embed()), grid)
    pulse = time_reverse(emission.emitted)
    if normalize_pulse and pulse.photon_content > 0:
        pulse = pulse.normalized()
    injection = evolve_injection(params, time_reverse(sched), pulse, None, grid)
    return Roundtrip(emission, injection, overlap_fidelity(target.embed(), injection.final))


def generation_fidelity(params: SystemParams, sched, targets=None, grid: TimeGrid | None = None,
                        *, normalize_pulse: bool = True) -> float:
    """Mean roundtrip fidelity; defaults to the n single-cavity states."""
    if targets is None:
        targets = [WState.basis(params.n, i) for i in range(params.n)]
    grid = _grid(params, sched, grid)
    return float(np.mean([roundtrip(params, sched, w, grid, normalize_pulse=normalize_pulse).fidelity
                          for w in targets]))


def transmission_fidelity(params: SystemParams, sched, target: WState, grid: TimeGrid | None = None) -> float:
    """Fraction of the excitation that leaves as the output photon."""
    grid = _grid(params, sched, grid)
    return float(evolve_emission(params, sched, target.embed(), grid).flux_out_cum[-1])


# ----------------------------------------------------------------------- sweeps

@dataclass
class SweepResult:
    axis: str
    values: np.ndarray
    fidelity: np.ndarray
    method: str
    n: int
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.fidelity = np.asarray(self.fidelity, dtype=float)
        if self.values.shape != self.fidelity.shape:
            raise ValueError("axis values and fidelities differ in length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis_value", "fidelity", "method", "n"])
        for v, f in zip(self.values, self.fidelity):
            w.writerow([f"{v:.17g}", f"{f:.17g}", self.method, self.n])
        return buf.getvalue()

    def crossing(self, level: float) -> float:
        """First axis value where the curve reaches ``level`` (linear interpolation)."""
        f, x = self.fidelity, self.values
        above = np.flatnonzero(f >= level)
        if above.size == 0:
            return math.nan
        k = above[0]
        if k == 0:
            return float(x[0])
        return float(x[k - 1] + (level - f[k - 1]) * (x[k] - x[k - 1]) / (f[k] - f[k - 1]))


def _run_parallel(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(it) for it in items]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=n_jobs)(delayed(fn)(it) for it in items)


def sweep_damping(params: SystemParams, sched, axis: str, values, grid: TimeGrid | None = None,
                  *, method: str = "optimized", n_jobs: int = 1) -> SweepResult:
    """Generation fidelity versus kappa_i or gamma_m with the schedule held fixed.

    The other damping is set to zero.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < 0) or np.any(np.diff(values) < 0):
        raise ValueError("sweep values must be non-negative and ascending")
    if axis == "kappa_i":
        make = lambda v: dataclasses.replace(params, kappa=np.full(params.n, v), gamma_m=0.0)
    elif axis == "gamma_m":
        make = lambda v: dataclasses.replace(params, kappa=np.zeros(params.n), gamma_m=v)
    else:
        raise ValueError(f"unknown damping axis {axis!r}")
    grid = _grid(params, sched, grid)
    fids = _run_parallel(lambda v: generation_fidelity(make(v), sched, grid=grid), values, n_jobs)
    return SweepResult(axis, values, np.array(fids), method, params.n)


def optimized_point(params: SystemParams, T: float, cfg: CrabConfig):
    cfg = dataclasses.replace(cfg, T=T)
    rep = optimize_crab(params, cfg)
    return rep.schedule, generation_fidelity(params, rep.schedule, grid=cfg.grid(params))


def trivial_point(params: SystemParams, T: float, cfg: CrabConfig):
    """Sequential baseline built from the optimized single-cavity pulse at T/n."""
    single = dataclasses.replace(params, n=1, kappa=params.kappa[:1])
    ref_cfg = dataclasses.replace(cfg, T=T / params.n)
    ref = optimize_crab(single, ref_cfg)
    sched = trivial_schedule(params, T, profile=profile_from_crab(ref.schedule), g0=cfg.g0_fixed)
    grid = dataclasses.replace(cfg, T=T).grid(params)
    return sched, generation_fidelity(params, sched, grid=grid)


def sweep_time(params: SystemParams, n_list, T_values, methods=("trivial", "optimized"),
               cfg: CrabConfig | None = None, *, n_jobs: int = 1) -> list[SweepResult]:
    """Fidelity versus duration for each cavity count and method.

    ``params`` supplies the damping rates; its n is replaced by each entry
    of ``n_list``. Every (n, T) point of the optimized method runs its own
    CRAB optimization.
    """
    cfg = cfg or CrabConfig(T=1.0)
    T_values = np.asarray(T_values, dtype=float)
    out = []
    for n in n_list:
        p = dataclasses.replace(params, n=n, kappa=np.full(n, float(params.kappa[0])))
        for method in methods:
            if method == "optimized":
                point = lambda T: optimized_point(p, T, cfg)[1]
            elif method == "trivial":
                point = lambda T: trivial_point(p, T, cfg)[1]
            else:
                raise ValueError(f"unknown method {method!r}")
            fids = _run_parallel(point, T_values, n_jobs)
            meta = {"seed": cfg.seed, "m": cfg.m, "restarts": cfg.n_restarts, "max_evals": cfg.max_evals}
            if method == "trivial":
                meta["stage_profile"] = "optimized single-cavity CRAB pulse at T/n, unit peak scale"
            out.append(SweepResult("g0T", T_values, np.array(fids), method, n, meta))
    return out
