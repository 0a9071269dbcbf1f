"""
Static algebra of the n-cavity optomechanical interface.

Single-excitation basis ordering used throughout the package::

    index 0        optical cavity a0
    index 1..n     microwave cavities a1..an
    index n+1      mechanical mode bm

All couplings are real. Rates may be given in any consistent unit; the
CLI normalizes to units of the reference coupling ``g0_ref``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

# relative tolerance on the s_{i-1} s_i denominators of the dark states
SINGULAR_TOL = 1e-12


class DegenerateCouplingError(ValueError):
    """Coupling vector for which the requested basis object does not exist."""


@dataclass(frozen=True)
class SystemParams:
    """Damping rates and bookkeeping frequencies of the interface.

    Parameters
    ----------
    n : int
        Number of microwave cavities.
    kappa0 : float
        Optical cavity damping rate (the output port).
    kappa : array_like of shape (n,)
        Microwave cavity damping rates. A scalar is broadcast.
    gamma_m : float
        Mechanical damping rate.
    omega_m : float, optional
        Mechanical frequency. Only used for the resolved-sideband flag.
    g0_ref : float
        Reference coupling scale. Normalizing divides every rate by it.
    """

    n: int
    kappa0: float
    kappa: np.ndarray | float = 0.0
    gamma_m: float = 0.0
    omega_m: float | None = None
    g0_ref: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), (self.n,)).copy()
        kappa.setflags(write=False)
        object.__setattr__(self, "kappa", kappa)
        rates = np.concatenate([[self.kappa0, self.gamma_m, self.g0_ref], kappa])
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("rates must be finite and non-negative")
        if self.g0_ref <= 0:
            raise ValueError("g0_ref must be positive")
        if self.omega_m is not None and not self.omega_m > 0:
            raise ValueError("omega_m must be positive")

    @property
    def damping(self) -> np.ndarray:
        """Decay rates in basis order (kappa0, kappa_1..kappa_n, gamma_m)."""
        return np.concatenate([[self.kappa0], self.kappa, [self.gamma_m]])

    @property
    def dim(self) -> int:
        return self.n + 2

    def normalized(self) -> "SystemParams":
        """Same physics in units where the reference coupling is 1."""
        s = self.g0_ref
        return SystemParams(
            n=self.n,
            kappa0=self.kappa0 / s,
            kappa=self.kappa / s,
            gamma_m=self.gamma_m / s,
            omega_m=None if self.omega_m is None else self.omega_m / s,
            g0_ref=1.0,
            meta=dict(self.meta),
        )

    def validity_flags(self) -> dict[str, bool]:
        """Regime flags; each is true when the relevant ratio is at least 10.

        ``resolved_sideband`` is None when no mechanical frequency is set.
        """
        lossy = max(self.gamma_m, float(np.max(self.kappa)))
        hierarchy = self.kappa0 >= 10 * lossy if lossy > 0 else True
        sideband = None if self.omega_m is None else self.omega_m >= 10 * self.kappa0
        return {"resolved_sideband": sideband, "hierarchy": bool(hierarchy)}

    def check_validity(self) -> None:
        for name, ok in self.validity_flags().items():
            if ok is False:
                warnings.warn(f"parameter regime check failed: {name}", RuntimeWarning, stacklevel=2)


def as_coupling(g) -> np.ndarray:
    """Validate a coupling vector (g0, g1, ..., gn) and return it as floats."""
    g = np.asarray(g)
    if np.iscomplexobj(g):
        if np.any(np.imag(g) != 0):
            raise ValueError("couplings must be real")
        g = np.real(g)
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("coupling vector must be 1-D with n+1 >= 2 entries")
    if not np.all(np.isfinite(g)):
        raise ValueError("coupling vector must be finite")
    return g


def partial_norms(g) -> np.ndarray:
    """s_i = sqrt(g_0^2 + ... + g_i^2) for i = 0..n."""
    g = as_coupling(g)
    s = np.sqrt(np.cumsum(g * g))
    if s[-1] == 0:
        raise DegenerateCouplingError("degenerate coupling vector")
    return s


def interaction_hamiltonian(g) -> np.ndarray:
    """Beam-splitter interaction of every cavity with the mechanical mode."""
    g = as_coupling(g)
    d = g.size + 1
    h = np.zeros((d, d))
    h[:-1, -1] = g
    h[-1, :-1] = g
    return h


def conditional_hamiltonian(g, params: SystemParams) -> np.ndarray:
    """No-jump Hamiltonian H_I - (i/2) diag(kappa0, kappa_i, gamma_m)."""
    g = as_coupling(g)
    if g.size != params.n + 1:
        raise ValueError(f"coupling vector has {g.size} entries, expected {params.n + 1}")
    return interaction_hamiltonian(g) - 0.5j * np.diag(params.damping)


@dataclass(frozen=True)
class DarkBasis:
    """Closed-form adiabatic eigenbasis of the interaction Hamiltonian.

    ``dark`` and ``bright`` hold column vectors of length n+2. ``phi0`` is
    None when every microwave coupling vanishes.
    """

    dark: np.ndarray
    bright: np.ndarray
    s: np.ndarray
    phi0: np.ndarray | None

    @property
    def vectors(self) -> np.ndarray:
        return np.hstack([self.dark, self.bright])

    @property
    def output_weight(self) -> float:
        """1 - g0^2 / s_n^2, the nonzero eigenvalue of the reduced loss matrix."""
        return float(np.sum(self.dark[0] ** 2))


def dark_basis(g) -> DarkBasis:
    g = as_coupling(g)
    s = partial_norms(g)
    n = g.size - 1
    sn = s[-1]
    dark = np.zeros((n + 2, n))

    if s[1] <= SINGULAR_TOL * sn:
        raise DegenerateCouplingError("dark basis singular at this coupling vector")
    dark[0, 0] = g[1] / s[1]
    dark[1, 0] = -g[0] / s[1]
    for i in range(2, n + 1):
        den = s[i - 1] * s[i]
        if den <= SINGULAR_TOL * sn * sn:
            raise DegenerateCouplingError("dark basis singular at this coupling vector")
        dark[:i, i - 1] = g[:i] * g[i] / den
        dark[i, i - 1] = -s[i - 1] ** 2 / den

    bright = np.empty((n + 2, 2))
    bright[:-1, 0] = bright[:-1, 1] = g / (np.sqrt(2) * sn)
    bright[-1, 0] = 1 / np.sqrt(2)
    bright[-1, 1] = -1 / np.sqrt(2)

    weight = np.sum(dark[0] ** 2)
    phi0 = dark[0] / np.sqrt(weight) if weight > SINGULAR_TOL else None
    return DarkBasis(dark=dark, bright=bright, s=s, phi0=phi0)


def phi0_vector(g) -> np.ndarray:
    """Normalized optical-cavity components of the dark states."""
    basis = dark_basis(g)
    if basis.phi0 is None:
        raise DegenerateCouplingError("phi0 undefined: all microwave couplings vanish")
    return basis.phi0


def m_matrix(g) -> np.ndarray:
    """Rank-one loss matrix of the dark subspace.

    Defined whenever the dark basis is, including the point where every
    microwave coupling is zero (M = 0 there).
    """
    first = dark_basis(g).dark[0]
    return np.outer(first, first)


def _householder_completion(phi0: np.ndarray, branch: int) -> np.ndarray:
    # reflector whose first column is +-phi0; branch picks the stable sign
    n = phi0.size
    e1 = np.zeros(n)
    e1[0] = 1.0
    v = e1 + branch * phi0
    q = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    q[:, 0] = phi0
    return q


def _branch(phi0: np.ndarray) -> int:
    return 1 if phi0[0] >= 0 else -1


def u_matrix(g) -> np.ndarray:
    """Orthogonal matrix diagonalizing M, first column phi0.

    Columns 2..n complete phi0 with a Householder reflector; each of those
    columns is sign-fixed so its largest-magnitude entry is positive.
    """
    phi0 = phi0_vector(g)
    u = _householder_completion(phi0, _branch(phi0))
    for j in range(1, u.shape[1]):
        col = u[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            u[:, j] = -col
    return u


def adiabaticity_ratio(g, dg) -> np.ndarray:
    """|dg_i/dt / g_i| / |g_i| per coupling; inf where g_i = 0."""
    g = as_coupling(g)
    dg = np.asarray(dg, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs(dg) / (g * g)


def v_matrix(schedule, t: float, h: float | None = None, *, return_error: bool = False):
    """Finite-difference estimate of V = (dU^T/dt) U for a coupling schedule.

    Central differences at steps h and 2h are combined by Richardson
    extrapolation; their disagreement is the error estimate. While it
    exceeds 1e-6 the step is quartered (at most three times) and a warning
    is raised if that does not help. The completion branch and the column
    signs are taken from U(t) so the stencil is continuous.
    """
    if h is None:
        h = schedule.T / 1e5
    if t - 2 * h < 0 or t + 2 * h > schedule.T:
        raise ValueError("finite-difference stencil leaves [0, T]")

    phi0 = phi0_vector(schedule.sample(t))
    branch = _branch(phi0)
    u0 = _householder_completion(phi0, branch)

    def aligned(tt):
        try:
            u = _householder_completion(phi0_vector(schedule.sample(tt)), branch)
        except DegenerateCouplingError as exc:
            raise DegenerateCouplingError(f"singular basis in stencil at t={tt:g}") from exc
        return u * np.where(np.sum(u * u0, axis=0) < 0, -1.0, 1.0)

    for _ in range(4):
        um2, um1, up1, up2 = (aligned(t + k * h) for k in (-2, -1, 1, 2))
        v1 = (up1 - um1).T @ u0 / (2 * h)
        v2 = (up2 - um2).T @ u0 / (4 * h)
        err = float(np.max(np.abs(v1 - v2)))
        if err <= 1e-6:
            break
        h /= 4
    else:
        warnings.warn(f"V estimate at t={t:g}: h/2h disagreement {err:.2e}", RuntimeWarning, stacklevel=2)
    v = (4 * v1 - v2) / 3
    # express in the column-sign convention of u_matrix
    signs = np.sign(np.sum(u_matrix(schedule.sample(t)) * u0, axis=0))
    v = v * np.outer(signs, signs)
    return (v, err) if return_error else v
