"""Identity checks behind the ``verify`` command."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .analysis import WState, random_w_states
from .dynamics import (TimeGrid, analytic_time_independent, evolve_emission, evolve_injection,
                       evolve_reduced, time_reverse)
from .model import SystemParams, dark_basis, interaction_hamiltonian, partial_norms, v_matrix
from .schedule import ConstantRatioSchedule, CrabSchedule, HarmonicProfile


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value < self.threshold)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.value:.3e} (< {self.threshold:.0e})"

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold, "passed": self.passed}


def random_crab(rng, n: int, T: float, m: int = 6, bound: float = 2.0) -> CrabSchedule:
    return CrabSchedule(T=T, g0_fixed=1.0, A=rng.uniform(-bound, bound, (m, n)), r=rng.uniform(0, 1, m))


def check_spectrum(rng, trials: int = 100) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        g = rng.normal(size=n + 1)
        sn = partial_norms(g)[-1]
        ev = np.sort(np.linalg.eigvalsh(interaction_hamiltonian(g)))
        expected = np.sort(np.concatenate([np.zeros(n), [sn, -sn]]))
        worst = max(worst, np.max(np.abs(ev - expected)) / sn)
    return CheckResult("spectrum {0 x n, +-s_n} (relative)", worst, 1e-10)


def check_dark_basis(rng, trials: int = 50) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        g = rng.normal(size=n + 1)
        b = dark_basis(g)
        vecs = b.vectors
        h = interaction_hamiltonian(g)
        worst = max(worst, np.max(np.abs(vecs.T @ vecs - np.eye(n + 2))),
                    np.max(np.abs(h @ b.dark)), np.max(np.abs(b.dark[-1])))
    return CheckResult("dark/bright orthonormality and null space", worst, 1e-12)


def check_v_antisymmetry(rng, schedules: int = 20, T: float = 100.0, samples: int = 25) -> CheckResult:
    worst = 0.0
    for _ in range(schedules):
        n = int(rng.integers(2, 5))
        sched = random_crab(rng, n, T)
        vs = [v_matrix(sched, t) for t in np.linspace(0.05 * T, 0.95 * T, samples)]
        sym = max(np.max(np.abs(v + v.T)) for v in vs)
        scale = max(np.max(np.abs(v)) for v in vs)
        worst = max(worst, sym / scale)
    return CheckResult("max|V+V^T| / max|V|", worst, 1e-8)


def check_reduced_norm(rng, T: float = 100.0) -> CheckResult:
    n = 3
    sched = random_crab(rng, n, T)
    p = SystemParams(n=n, kappa0=0.0)
    C0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    C0 /= np.linalg.norm(C0)
    traj = evolve_reduced(p, sched, C0, TimeGrid(T, 4096))
    drift = np.max(np.abs(np.linalg.norm(traj.C, axis=1) - 1))
    return CheckResult("reduced-model norm drift (kappa0=0)", drift, 1e-6)


def check_analytic(rng) -> CheckResult:
    n, kappa0 = 3, 10.0
    g = np.concatenate([[1.0], rng.uniform(0.3, 2.0, n)])
    env = HarmonicProfile(amplitudes=(0.4, -0.2), r=(0.3, 0.7), offset=1.0)
    T = 5.0
    sched = ConstantRatioSchedule(T=T, g_ref=g, envelope=env)
    p = SystemParams(n=n, kappa0=kappa0)
    C0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    C0 /= np.linalg.norm(C0)
    grid = TimeGrid(T, 4096)
    traj = evolve_reduced(p, sched, C0, grid)
    exact = analytic_time_independent(g, kappa0, C0, grid.times)
    return CheckResult("analytic vs reduced integration (sup norm)", float(np.max(np.abs(traj.C - exact))), 1e-6)


def check_ledger(rng, source_sign: float = 1.0) -> CheckResult:
    n, T = 3, 60.0
    p = SystemParams(n=n, kappa0=10.0, kappa=1e-3, gamma_m=1e-2)
    sched = random_crab(rng, n, T)
    grid = TimeGrid.default(p, T)
    w = random_w_states(n, 1, int(rng.integers(1 << 31)))[0]
    em = evolve_emission(p, sched, w.embed(), grid)
    inj = evolve_injection(p, time_reverse(sched), time_reverse(em.emitted), None, grid, source_sign=source_sign)
    worst = max(np.max(np.abs(em.ledger_error)), np.max(np.abs(inj.ledger_error)))
    return CheckResult("photon ledger balance (emission + injection)", float(worst), 1e-6)


def check_lossless_count(rng) -> CheckResult:
    n, T = 3, 60.0
    p = SystemParams(n=n, kappa0=10.0)
    sched = random_crab(rng, n, T)
    grid = TimeGrid.default(p, T)
    w = random_w_states(n, 1, int(rng.integers(1 << 31)))[0]
    em = evolve_emission(p, sched, w.embed(), grid)
    return CheckResult("lossless photon count |int|f|^2 + |psi(T)|^2 - 1|",
                       abs(em.emitted.photon_content + em.residual - 1), 1e-6)


def run_checks(seed: int = 0, *, flip_io_sign: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_spectrum(rng),
        check_dark_basis(rng),
        check_v_antisymmetry(rng),
        check_reduced_norm(rng),
        check_analytic(rng),
        check_ledger(rng, source_sign=-1.0 if flip_io_sign else 1.0),
        check_lossless_count(rng),
    ]
