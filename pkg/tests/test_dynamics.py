from dataclasses import dataclass

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from wstate_optomech.analysis import WState, random_w_states
from wstate_optomech.dynamics import (IntegrationError, PulseShape, ReducedState, TimeGrid,
                                      analytic_time_independent, convergence_change, evolve_emission,
                                      evolve_injection, evolve_reduced, final_states, time_reverse)
from wstate_optomech.model import SystemParams, conditional_hamiltonian, dark_basis, phi0_vector
from wstate_optomech.schedule import ConstantRatioSchedule, CouplingSchedule, CrabSchedule, HarmonicProfile


@dataclass(frozen=True)
class SlowSchedule(CouplingSchedule):
    """Smooth test schedule whose microwave couplings never vanish.

    With ``last_only`` only g_n varies, which keeps the dark basis free of
    any internal rotation (D^T dD/dt = 0).
    """

    T: float
    n: int = 3
    reversed: bool = False
    last_only: bool = False
    kind = "slow"

    def _values(self, t):
        u = np.asarray(t) / self.T
        one = np.ones_like(u)
        last = 0.8 + 0.6 * np.sin(np.pi * u)
        if self.last_only:
            return np.array([one, one, 1.2 * one, last])
        return np.array([one, 1 + 0.5 * np.sin(2 * np.pi * u), 1.2 - 0.6 * u, last])


def crab(seed, n=3, T=60.0, bound=2.0):
    rng = np.random.default_rng(seed)
    return CrabSchedule(T=T, g0_fixed=1.0, A=rng.uniform(-bound, bound, (6, n)), r=rng.uniform(0, 1, 6))


# --------------------------------------------------------------- grid/pulse

def test_default_grid_resolves_optical_decay():
    p = SystemParams(n=3, kappa0=10.0)
    assert TimeGrid.default(p, 100.0).N == 40000
    assert TimeGrid.default(p, 1.0).N == 4096


def test_grid_rejects_bad_values():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 100)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 10)


def test_pulse_photon_content_and_normalization():
    grid = TimeGrid(10.0, 2000)
    f = PulseShape(grid, np.exp(-((grid.times - 5) ** 2)))
    assert f.photon_content == pytest.approx(np.sqrt(np.pi / 2), rel=1e-9)
    assert f.normalized().photon_content == pytest.approx(1.0, rel=1e-12)


def test_time_reversal_of_pulses():
    grid = TimeGrid(4.0, 1000)
    t = grid.times
    half = np.sin(np.pi * t / 4.0)
    sym = PulseShape(grid, half + half[::-1])
    np.testing.assert_array_equal(time_reverse(sym).samples, sym.samples)
    f = PulseShape(grid, np.exp(1j * t) * t)
    np.testing.assert_array_equal(time_reverse(time_reverse(f)).samples, f.samples)


def test_time_reversal_of_schedule():
    sched = crab(0)
    rev = time_reverse(sched)
    np.testing.assert_allclose(rev.sample(12.5), sched.sample(sched.T - 12.5), rtol=1e-14)
    assert np.all(rev.sample(sched.T)[1:] == 0)
    assert np.any(np.abs(rev.sample(0.0)[1:]) > 1e-3)
    assert time_reverse(rev).to_dict() == sched.to_dict()
    with pytest.raises(TypeError):
        time_reverse(np.zeros(3))


# ------------------------------------------------------------ full model

def test_lossless_evolution_is_unitary():
    p = SystemParams(n=3, kappa0=0.0)
    w = random_w_states(3, 1, 4)[0]
    traj = evolve_emission(p, crab(1), w.embed(), TimeGrid(60.0, 20000))
    np.testing.assert_allclose(traj.norm2, 1.0, atol=1e-9)


def test_constant_couplings_match_matrix_exponential():
    p = SystemParams(n=1, kappa0=10.0, kappa=0.05, gamma_m=0.02)
    g = np.array([1.0, 0.7])
    sched = ConstantRatioSchedule(T=5.0, g_ref=g)
    psi0 = np.array([0.0, 1.0, 0.0], dtype=complex)
    grid = TimeGrid(5.0, 8000)
    traj = evolve_emission(p, sched, psi0, grid)
    hc = conditional_hamiltonian(g, p)
    for k in np.linspace(0, grid.N, 20).astype(int):
        exact = scipy.linalg.expm(-1j * hc * grid.times[k]) @ psi0
        np.testing.assert_allclose(traj.states[k], exact, atol=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_emission_ledger_balances(seed):
    p = SystemParams(n=3, kappa0=10.0, kappa=1e-2, gamma_m=5e-2)
    w = random_w_states(3, 1, seed)[0]
    traj = evolve_emission(p, crab(seed), w.embed(), TimeGrid.default(p, 60.0))
    assert np.max(np.abs(traj.ledger_error)) < 1e-10
    # the recorded output flux integrates the emitted pulse
    assert traj.emitted.photon_content == pytest.approx(traj.flux_out_cum[-1], abs=1e-6)


def test_injection_of_nothing_stays_empty():
    p = SystemParams(n=2, kappa0=10.0)
    grid = TimeGrid(20.0, 4096)
    traj = evolve_injection(p, crab(2, n=2, T=20.0), PulseShape(grid, np.zeros(grid.N + 1)), None, grid)
    assert np.all(traj.states == 0) and np.all(traj.emitted.samples == 0)


def test_empty_emission_gives_zero_pulse():
    p = SystemParams(n=2, kappa0=10.0)
    traj = evolve_emission(p, crab(2, n=2, T=20.0), np.zeros(4), TimeGrid(20.0, 4096))
    assert np.all(traj.emitted.samples == 0) and traj.residual == 0


def test_injection_ledger_and_grid_check():
    p = SystemParams(n=1, kappa0=10.0, kappa=0.01, gamma_m=0.01)
    grid = TimeGrid(20.0, 8000)
    f = PulseShape(grid, np.exp(-((grid.times - 10) ** 2) / 4)).normalized()
    traj = evolve_injection(p, ConstantRatioSchedule(T=20.0, g_ref=np.array([1.0, 1.0])), f, None, grid)
    assert np.max(np.abs(traj.ledger_error)) < 1e-9
    assert traj.flux_in_cum[-1] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError, match="grid"):
        evolve_injection(p, ConstantRatioSchedule(T=20.0, g_ref=np.array([1.0, 1.0])), f, None, TimeGrid(20.0, 4096))


def test_lossless_roundtrip_bound():
    # emit from psi1, inject the conjugate-reversed pulse: F >= 1 - 4 eps
    p = SystemParams(n=3, kappa0=10.0)
    psi1 = WState(np.array([1 / np.sqrt(2), 1 / np.sqrt(3), 1 / np.sqrt(6)]))
    sched = crab(3, T=60.0)
    grid = TimeGrid.default(p, 60.0)
    em = evolve_emission(p, sched, psi1.embed(), grid)
    inj = evolve_injection(p, time_reverse(sched), time_reverse(em.emitted), None, grid)
    eps = em.residual
    fid = abs(np.vdot(psi1.embed(), inj.final)) ** 2
    assert fid >= 1 - 4 * eps


def test_final_states_batch_matches_single_runs():
    p = SystemParams(n=2, kappa0=10.0, gamma_m=0.01)
    sched, grid = crab(4, n=2, T=20.0), TimeGrid(20.0, 4096)
    cols = np.eye(4, dtype=complex)[:, 1:3]
    batch = final_states(p, sched, cols, grid)
    for j in range(2):
        np.testing.assert_allclose(batch[:, j], evolve_emission(p, sched, cols[:, j], grid).final, atol=1e-14)


def test_step_refinement_converges():
    p = SystemParams(n=2, kappa0=10.0)
    psi0 = np.array([0, 0.6, 0.8, 0], dtype=complex)
    assert convergence_change(p, crab(5, n=2, T=20.0), psi0, TimeGrid(20.0, 4096)) < 1e-6


def test_divergence_reported():
    p = SystemParams(n=1, kappa0=1e6)
    with pytest.raises(IntegrationError, match="non-finite"):
        evolve_emission(p, ConstantRatioSchedule(T=10.0, g_ref=np.array([1.0, 1.0])), [1, 0, 0], TimeGrid(10.0, 512))


def test_state_and_schedule_shape_checks():
    p = SystemParams(n=2, kappa0=1.0)
    with pytest.raises(ValueError, match="length"):
        evolve_emission(p, crab(0, n=2, T=10.0), np.zeros(3), TimeGrid(10.0, 1024))
    with pytest.raises(ValueError, match="couplings"):
        evolve_emission(p, crab(0, n=3, T=10.0), np.zeros(4), TimeGrid(10.0, 1024))
    with pytest.raises(ValueError, match="duration"):
        evolve_emission(p, crab(0, n=2, T=10.0), np.zeros(4), TimeGrid(11.0, 1024))


# ----------------------------------------------------------- reduced model

def test_reduced_norm_conserved_without_output_damping():
    p = SystemParams(n=3, kappa0=0.0)
    C0 = np.array([0.6, 0.0, 0.8j])
    traj = evolve_reduced(p, SlowSchedule(T=100.0), C0, TimeGrid(100.0, 4096))
    assert np.max(np.abs(np.linalg.norm(traj.C, axis=1) - 1)) < 1e-6
    assert len(traj) == 4097 and isinstance(traj[3], ReducedState)


def test_reduced_constant_ratio_decay_law():
    g = np.array([1.0, 0.5, 1.5, 0.7])
    kappa0, T = 10.0, 3.0
    p = SystemParams(n=3, kappa0=kappa0)
    grid = TimeGrid(T, 4096)
    phi0 = phi0_vector(g)
    traj = evolve_reduced(p, ConstantRatioSchedule(T=T, g_ref=g), phi0, grid)
    lam = 1 - g[0] ** 2 / np.sum(g * g)
    np.testing.assert_allclose(np.sum(np.abs(traj.C) ** 2, axis=1), np.exp(-kappa0 * lam * grid.times), atol=1e-9)


def test_analytic_solution_limits():
    g = np.array([1.0, 0.4, -0.9])
    phi0 = phi0_vector(g)
    perp = np.array([-phi0[1], phi0[0]])
    np.testing.assert_allclose(analytic_time_independent(g, 10.0, phi0, np.inf), 0, atol=1e-15)
    np.testing.assert_allclose(analytic_time_independent(g, 10.0, perp, [0.0, 1.0, 50.0]), [perp] * 3, atol=1e-15)
    b1, b2 = 0.6, 0.8j
    c_inf = analytic_time_independent(g, 10.0, b1 * phi0 + b2 * perp, np.inf)
    assert np.linalg.norm(c_inf) ** 2 == pytest.approx(abs(b2) ** 2, abs=1e-14)


def test_analytic_matches_reduced_with_envelope():
    g = np.array([1.0, 0.8, 0.3, 1.4])
    env = HarmonicProfile(amplitudes=(0.4, -0.2), r=(0.3, 0.7), offset=1.0)
    sched = ConstantRatioSchedule(T=5.0, g_ref=g, envelope=env)
    p = SystemParams(n=3, kappa0=10.0)
    C0 = np.array([0.3, -0.5j, 0.81])
    C0 = C0 / np.linalg.norm(C0)
    grid = TimeGrid(5.0, 4096)
    traj = evolve_reduced(p, sched, C0, grid)
    np.testing.assert_allclose(traj.C, analytic_time_independent(g, 10.0, C0, grid.times), atol=1e-6)


def _dark_projection(sched, full, grid, k):
    return dark_basis(sched.sample(grid.times[k])).dark.T @ full.states[k]


def test_reduced_model_tracks_full_dynamics_in_adiabatic_limit():
    p = SystemParams(n=3, kappa0=0.2)
    sched = SlowSchedule(T=100.0, last_only=True)
    grid = TimeGrid(100.0, 20000)
    C0 = np.array([0.5, 0.5, np.sqrt(0.5)])
    full = evolve_emission(p, sched, dark_basis(sched.sample(0.0)).dark @ C0, grid)
    red = evolve_reduced(p, sched, C0, grid)
    for k in np.linspace(0, grid.N, 40).astype(int):
        assert np.max(np.abs(_dark_projection(sched, full, grid, k) - red.C[k])) < 1e-2


def test_general_schedule_needs_dark_connection_term():
    # when the dark states rotate among themselves the projected full dynamics
    # follows dC/dt = -(kappa0/2) M C - D^T (dD/dt) C instead
    p = SystemParams(n=3, kappa0=0.2)
    sched = SlowSchedule(T=100.0)
    grid = TimeGrid(100.0, 20000)
    C0 = np.array([0.5, 0.5, np.sqrt(0.5)])
    full = evolve_emission(p, sched, dark_basis(sched.sample(0.0)).dark @ C0, grid)

    def rhs(t, c):
        d = dark_basis(sched.sample(t)).dark
        eps = 1e-5 * sched.T
        lo, hi = max(t - eps, 0.0), min(t + eps, sched.T)
        dd = (dark_basis(sched.sample(hi)).dark - dark_basis(sched.sample(lo)).dark) / (hi - lo)
        return -0.5 * p.kappa0 * np.outer(d[0], d[0]) @ c - d.T @ dd @ c

    sol = scipy.integrate.solve_ivp(rhs, (0, sched.T), C0.astype(complex), t_eval=grid.times[::1000],
                                    rtol=1e-9, atol=1e-11)
    red = evolve_reduced(p, sched, C0, grid)
    proj = np.array([_dark_projection(sched, full, grid, k) for k in range(0, grid.N + 1, 1000)])
    assert np.max(np.abs(proj - sol.y.T)) < 1e-2
    assert np.max(np.abs(proj - red.C[::1000])) > 3e-2
