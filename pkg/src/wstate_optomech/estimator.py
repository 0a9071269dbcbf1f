"""
scikit-learn style front end.

``fit`` learns a coupling schedule that empties every row of X (W
coefficient vectors, default: the single-cavity states). ``transform``
maps W states to their output photon pulses, ``inverse_transform`` maps
pulses back to the generated excitation vectors, and ``score`` is the mean
generation fidelity.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .analysis import WState, generation_fidelity
from .control import CrabConfig, optimize_crab, profile_from_crab, trivial_schedule
from .dynamics import PulseShape, TimeGrid, evolve_emission, evolve_injection, time_reverse
from .model import SystemParams


def check_w_states(X, n: int | None = None, *, normalize: bool = False) -> np.ndarray:
    """Validate a 2-D array of W coefficient rows."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"expected a 2-D array of W coefficients, got shape {X.shape}")
    if n is not None and X.shape[1] != n:
        raise ValueError(f"W states have {X.shape[1]} coefficients, expected {n}")
    X = X.astype(complex)
    if not np.all(np.isfinite(X)):
        raise ValueError("W coefficients must be finite")
    norms = np.linalg.norm(X, axis=1)
    if normalize:
        if np.any(norms == 0):
            raise ValueError("cannot normalize an all-zero W state")
        return X / norms[:, None]
    if np.any(np.abs(norms ** 2 - 1) > 1e-9):
        raise ValueError("W states must be normalized")
    return X


def check_params(params, n_features: int | None = None) -> SystemParams:
    if not isinstance(params, SystemParams):
        raise TypeError("params must be a SystemParams instance")
    if n_features is not None and params.n != n_features:
        raise ValueError(f"params describe {params.n} cavities, data has {n_features}")
    return params


class _TransferMixin(TransformerMixin):

    def transform(self, X):
        """Output pulses for each W state, shape (n_samples, N+1)."""
        check_is_fitted(self, "schedule_")
        X = check_w_states(X, self.params.n)
        out = np.empty((X.shape[0], self.grid_.N + 1), dtype=complex)
        for k, w in enumerate(X):
            out[k] = evolve_emission(self.params, self.schedule_, WState(w).embed(), self.grid_).emitted.samples
        return out

    def inverse_transform(self, F):
        """Excitation vectors left after injecting the time-reversed pulses.

        Each row of F is an emitted pulse as returned by ``transform``; it is
        conjugated, reversed, rescaled to one photon and injected into the
        empty system driven by the reversed schedule. Because of the
        conjugation, emitting w and injecting gives conj(w); pass the pulse
        of conj(w) to regenerate w.
        """
        check_is_fitted(self, "schedule_")
        F = np.atleast_2d(np.asarray(F, dtype=complex))
        rev = time_reverse(self.schedule_)
        out = np.empty((F.shape[0], self.params.dim), dtype=complex)
        for k, f in enumerate(F):
            pulse = time_reverse(PulseShape(self.grid_, f)).normalized()
            out[k] = evolve_injection(self.params, rev, pulse, None, self.grid_).final
        return out

    def score(self, X=None, y=None):
        """Mean generation fidelity over the rows of X (default: basis states)."""
        check_is_fitted(self, "schedule_")
        targets = None
        if X is not None:
            targets = [WState(w) for w in check_w_states(X, self.params.n)]
        return generation_fidelity(self.params, self.schedule_, targets, self.grid_)


class CrabTransfer(_TransferMixin, BaseEstimator):
    """One CRAB-optimized schedule that maps any W state to a photon pulse.

    Parameters
    ----------
    params : SystemParams
        Damping rates in units of g0.
    duration : float
        Protocol length T in units of 1/g0.
    n_harmonics : int
        Harmonics per microwave coupling.
    amplitude_bound : float
        Box constraint on every CRAB amplitude.
    n_restarts, max_evals : int
        Nelder-Mead restarts and evaluation budget per restart.
    grid_N : int or None
        Integration steps; None picks the default for the damping rates.
    random_state : int
        Seed for the randomized CRAB frequencies.
    n_jobs : int
        Restarts run in parallel when > 1.
    """

    def __init__(self, params=None, duration=100.0, n_harmonics=6, amplitude_bound=5.0,
                 n_restarts=5, max_evals=2000, grid_N=None, random_state=0, n_jobs=1):
        self.params = params
        self.duration = duration
        self.n_harmonics = n_harmonics
        self.amplitude_bound = amplitude_bound
        self.n_restarts = n_restarts
        self.max_evals = max_evals
        self.grid_N = grid_N
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self, basis):
        return CrabConfig(T=float(self.duration), m=int(self.n_harmonics), amplitude_bound=self.amplitude_bound,
                          seed=int(self.random_state), n_restarts=int(self.n_restarts),
                          max_evals=int(self.max_evals), grid_N=self.grid_N, basis_states=basis)

    def fit(self, X=None, y=None):
        """X: real W rows spanning all n cavities; default the identity basis."""
        params = check_params(self.params)
        basis = None
        if X is not None:
            X = check_w_states(X, params.n, normalize=True)
            basis = X.real if not np.any(X.imag) else X
        cfg = self._config(basis)
        self.report_ = optimize_crab(params, cfg, n_jobs=self.n_jobs)
        self.schedule_ = self.report_.schedule
        self.grid_ = cfg.grid(params)
        self.n_features_in_ = params.n
        return self


class SequentialTransfer(_TransferMixin, BaseEstimator):
    """Baseline that empties the cavities one after another.

    With ``reference="crab"`` every stage reuses the single-cavity CRAB
    pulse optimized for the stage length; ``reference="bump"`` uses a
    sine bump with fitted peak.
    """

    def __init__(self, params=None, duration=100.0, reference="crab", per_stage_margin=0.0,
                 n_harmonics=6, n_restarts=5, max_evals=2000, grid_N=None, random_state=0):
        self.params = params
        self.duration = duration
        self.reference = reference
        self.per_stage_margin = per_stage_margin
        self.n_harmonics = n_harmonics
        self.n_restarts = n_restarts
        self.max_evals = max_evals
        self.grid_N = grid_N
        self.random_state = random_state

    def fit(self, X=None, y=None):
        params = check_params(self.params)
        T = float(self.duration)
        profile = None
        if self.reference == "crab":
            single = SystemParams(n=1, kappa0=params.kappa0, kappa=params.kappa[:1], gamma_m=params.gamma_m)
            cfg = CrabConfig(T=T / params.n * (1 - self.per_stage_margin), m=int(self.n_harmonics),
                             seed=int(self.random_state), n_restarts=int(self.n_restarts),
                             max_evals=int(self.max_evals))
            profile = profile_from_crab(optimize_crab(single, cfg).schedule)
        elif self.reference != "bump":
            raise ValueError(f"unknown reference {self.reference!r}")
        self.schedule_ = trivial_schedule(params, T, self.per_stage_margin, profile)
        self.grid_ = TimeGrid.default(params, T) if self.grid_N is None else TimeGrid(T, self.grid_N)
        self.n_features_in_ = params.n
        return self
