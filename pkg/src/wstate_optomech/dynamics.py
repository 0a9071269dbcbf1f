"""
Single-excitation dynamics: full non-Hermitian model with an input-output
port on the optical cavity, the reduced dark-subspace model, and time
reversal of pulses and schedules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import rk4_star
from .model import SystemParams, as_coupling, dark_basis, phi0_vector, u_matrix, DegenerateCouplingError
from .schedule import CouplingSchedule

MIN_NODES = 512


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_k = k T / N, k = 0..N."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.N) != self.N or self.N < MIN_NODES:
            raise ValueError(f"N must be an integer >= {MIN_NODES}")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def default(cls, params: SystemParams, T: float) -> "TimeGrid":
        return cls(T, max(4096, math.ceil(40 * params.kappa0 * T)))

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    @property
    def half_times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, 2 * self.N + 1)

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.T, 2 * self.N)


@dataclass(frozen=True)
class PulseShape:
    """Single-photon amplitude f(t_k); |f|^2 is a photon flux."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).copy()
        if s.shape != (self.grid.N + 1,):
            raise ValueError(f"pulse needs {self.grid.N + 1} samples, got {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def photon_content(self) -> float:
        return float(np.trapezoid(np.abs(self.samples) ** 2, dx=self.grid.h))

    def normalized(self) -> "PulseShape":
        return PulseShape(self.grid, self.samples / math.sqrt(self.photon_content))

    def at_half_steps(self) -> np.ndarray:
        """Linear interpolation onto nodes and midpoints."""
        out = np.empty(2 * self.grid.N + 1, dtype=complex)
        out[::2] = self.samples
        out[1::2] = 0.5 * (self.samples[:-1] + self.samples[1:])
        return out


@dataclass(frozen=True)
class Trajectory:
    """Amplitudes at every node plus the photon/loss ledger.

    ``states`` has shape (N+1, n+2) in basis order (a0, a1..an, bm).
    ``loss_cum`` has shape (N+1, n+1): channels kappa_1..kappa_n, gamma_m.
    """

    grid: TimeGrid
    states: np.ndarray
    emitted: PulseShape
    absorbed: PulseShape | None
    flux_out_cum: np.ndarray
    flux_in_cum: np.ndarray
    loss_cum: np.ndarray

    @property
    def norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.states) ** 2, axis=1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def residual(self) -> float:
        return float(self.norm2[-1])

    @property
    def ledger_error(self) -> np.ndarray:
        """Per-node violation of probability balance."""
        total = self.norm2 + self.flux_out_cum - self.flux_in_cum + self.loss_cum.sum(axis=1)
        return total - self.norm2[0]


def _as_state(psi, dim: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dim,):
        raise ValueError(f"state must have length {dim}, got shape {psi.shape}")
    return psi


def _check_match(params: SystemParams, sched: CouplingSchedule, grid: TimeGrid):
    if sched.n != params.n:
        raise ValueError(f"schedule has {sched.n} microwave couplings, params expect {params.n}")
    if not math.isclose(sched.T, grid.T, rel_tol=1e-12):
        raise ValueError(f"schedule duration {sched.T} != grid duration {grid.T}")


def propagate(params, sched, psi0, grid, f_half=None, *, record=True, source_sign=1.0):
    """Batch integration of columns ``psi0`` (shape (n+2, K)).

    Low-level entry point shared by the public evolve functions and the
    optimizer objective. Returns the raw (states, aux) arrays of the kernel.
    """
    _check_match(params, sched, grid)
    psi0 = np.ascontiguousarray(psi0, dtype=complex)
    g_half = np.ascontiguousarray(sched.values(grid.half_times), dtype=float)
    if f_half is None:
        f_half = np.zeros((2 * grid.N + 1, psi0.shape[1]), dtype=complex)
    states, aux = rk4_star(g_half, params.damping.astype(float), psi0,
                           np.ascontiguousarray(f_half, dtype=complex), grid.h, float(source_sign), record)
    if not np.all(np.isfinite(states[-1])):
        bad = np.flatnonzero(~np.all(np.isfinite(states.reshape(states.shape[0], -1)), axis=1))
        t_bad = grid.times[bad[0]] if record else grid.T
        raise IntegrationError(f"non-finite state at t={t_bad:g}")
    return states, aux


def _trajectory(params, grid, states, aux, f_in_nodes, absorbed):
    sk = math.sqrt(params.kappa0)
    emitted = PulseShape(grid, sk * states[:, 0] - f_in_nodes)
    return Trajectory(grid=grid, states=states, emitted=emitted, absorbed=absorbed,
                      flux_out_cum=aux[:, 0].copy(), flux_in_cum=aux[:, -1].copy(),
                      loss_cum=aux[:, 1:-1].copy())


def evolve_emission(params: SystemParams, sched: CouplingSchedule, psi0, grid: TimeGrid) -> Trajectory:
    """Free decay of ``psi0`` with output f(t) = sqrt(kappa0) a0(t)."""
    psi0 = _as_state(psi0, params.dim)
    states, aux = propagate(params, sched, psi0[:, None], grid)
    return _trajectory(params, grid, states[:, :, 0], aux[:, :, 0], np.zeros(grid.N + 1), None)


def evolve_injection(params: SystemParams, sched: CouplingSchedule, f_in: PulseShape, psi0, grid: TimeGrid,
                     *, source_sign: float = 1.0) -> Trajectory:
    """Drive the optical port with ``f_in``; records the reflected output.

    The input enters as +sqrt(kappa0) f_in on the a0 amplitude and leaves
    as f_out = sqrt(kappa0) a0 - f_in. ``source_sign=-1`` flips the source
    without touching the output relation; it exists only as a negative
    control for the ledger check.
    """
    if f_in.grid != grid:
        raise ValueError("pulse grid does not match integration grid")
    psi0 = np.zeros(params.dim, dtype=complex) if psi0 is None else _as_state(psi0, params.dim)
    states, aux = propagate(params, sched, psi0[:, None], grid, f_in.at_half_steps()[:, None],
                            source_sign=source_sign)
    return _trajectory(params, grid, states[:, :, 0], aux[:, :, 0], f_in.samples, f_in)


def final_states(params: SystemParams, sched: CouplingSchedule, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Final amplitudes for many initial columns at once, no recording."""
    states, _ = propagate(params, sched, psi0, grid, record=False)
    return states[0]


def convergence_change(params, sched, psi0, grid) -> float:
    """Sup-norm change of the trajectory at shared nodes when the step is halved."""
    psi0 = _as_state(psi0, params.dim)[:, None]
    coarse, _ = propagate(params, sched, psi0, grid)
    fine, _ = propagate(params, sched, psi0, grid.refined())
    return float(np.max(np.abs(fine[::2] - coarse)))


# ---------------------------------------------------------------- reduced model

@dataclass(frozen=True)
class ReducedState:
    C: np.ndarray
    alpha: np.ndarray | None = None


@dataclass(frozen=True)
class ReducedTrajectory:
    """Dark-coefficient trajectory; ``alpha`` is NaN where phi0 is undefined."""

    grid: TimeGrid
    C: np.ndarray
    alpha: np.ndarray

    def __len__(self):
        return self.C.shape[0]

    def __getitem__(self, k) -> ReducedState:
        return ReducedState(self.C[k], self.alpha[k])


def dark_first_components(g: np.ndarray) -> np.ndarray:
    """Optical-cavity component of each dark state, vectorized over trailing axes.

    ``g`` has shape (n+1, ...); the result has shape (n, ...).
    """
    g = np.asarray(g, dtype=float)
    s = np.sqrt(np.cumsum(g * g, axis=0))
    sn = s[-1]
    den = np.empty_like(g[1:])
    den[0] = s[1]
    den[1:] = s[1:-1] * s[2:]
    num = np.empty_like(g[1:])
    num[0] = g[1]
    num[1:] = g[0] * g[2:]
    if np.any(den[0] <= 1e-12 * sn) or np.any(den[1:] <= 1e-12 * sn * sn):
        raise DegenerateCouplingError("dark basis singular within schedule")
    return num / den


def evolve_reduced(params: SystemParams, sched: CouplingSchedule, C0, grid: TimeGrid) -> ReducedTrajectory:
    """Integrate dC/dt = -(kappa0/2) M(t) C in the instantaneous dark basis.

    Uses the same RK4 nodes and midpoints as the full model.
    """
    _check_match(params, sched, grid)
    C0 = np.asarray(C0.C if isinstance(C0, ReducedState) else C0, dtype=complex)
    if C0.shape != (params.n,):
        raise ValueError(f"C0 must have length {params.n}")
    times = grid.half_times
    try:
        first = dark_first_components(sched.values(times))
    except DegenerateCouplingError:
        bad = next(t for t in times if _singular(sched.sample(t)))
        raise DegenerateCouplingError(f"dark basis singular at t={bad:g}") from None
    rate = 0.5 * params.kappa0
    h = grid.h
    C = np.empty((grid.N + 1, params.n), dtype=complex)
    C[0] = y = C0
    for k in range(grid.N):
        fa, fm, fb = first[:, 2 * k], first[:, 2 * k + 1], first[:, 2 * k + 2]
        k1 = -rate * fa * (fa @ y)
        y2 = y + 0.5 * h * k1
        k2 = -rate * fm * (fm @ y2)
        y3 = y + 0.5 * h * k2
        k3 = -rate * fm * (fm @ y3)
        y4 = y + h * k3
        k4 = -rate * fb * (fb @ y4)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        C[k + 1] = y
    alpha = np.full_like(C, np.nan)
    for k, t in enumerate(grid.times):
        g = sched.sample(t)
        try:
            alpha[k] = u_matrix(g).T @ C[k]
        except DegenerateCouplingError:
            pass
    return ReducedTrajectory(grid, C, alpha)


def _singular(g) -> bool:
    try:
        dark_basis(g)
    except DegenerateCouplingError:
        return True
    return False


def analytic_time_independent(g, kappa0: float, C0, t):
    """Closed-form dark coefficients for a fixed coupling direction.

    Only the phi0 component decays, at rate (kappa0/2)(1 - g0^2/s_n^2);
    ``t=np.inf`` returns the surviving part C0 - phi0 <phi0|C0>.
    Array ``t`` gives shape t.shape + (n,).
    """
    g = as_coupling(g)
    C0 = np.asarray(C0.C if isinstance(C0, ReducedState) else C0, dtype=complex)
    phi0 = phi0_vector(g)
    weight = 1.0 - g[0] ** 2 / np.sum(g * g)
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        decay = np.where(np.isinf(t), 0.0, np.exp(-0.5 * kappa0 * weight * np.where(np.isinf(t), 0, t)))
    proj = phi0 @ C0
    return C0 + np.multiply.outer(decay - 1.0, phi0 * proj)


# ---------------------------------------------------------------- time reversal

def time_reverse(x):
    """Pulse: f'(t) = conj f(T - t). Schedule: g'_j(t) = g_j(T - t)."""
    if isinstance(x, PulseShape):
        return PulseShape(x.grid, np.conj(x.samples[::-1]))
    if isinstance(x, CouplingSchedule):
        return x.time_reversed()
    raise TypeError(f"cannot time-reverse {type(x).__name__}")
