"""Time-dependent coupling schedules g_0(t), ..., g_n(t) on [0, T]."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .model import as_coupling


@dataclass(frozen=True)
class HarmonicProfile:
    """Scalar envelope p(u) = offset + (1/m) sum_k A_k sin(2 pi k (1 + r_k) u), u in [0, 1].

    With ``offset=0`` and integer-free frequencies this is one channel of a
    CRAB ansatz; ``HarmonicProfile.bump()`` gives sin(pi u).
    """

    amplitudes: tuple
    r: tuple
    offset: float = 0.0

    def __post_init__(self):
        if len(self.amplitudes) != len(self.r) or len(self.r) == 0:
            raise ValueError("amplitudes and r must be non-empty and of equal length")
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))

    @classmethod
    def bump(cls, peak: float = 1.0) -> "HarmonicProfile":
        return cls(amplitudes=(peak,), r=(-0.5,))

    @property
    def frequencies(self) -> np.ndarray:
        k = np.arange(1, len(self.r) + 1)
        return 2 * np.pi * k * (1 + np.asarray(self.r))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        s = np.sin(np.multiply.outer(self.frequencies, u))
        return self.offset + np.tensordot(np.asarray(self.amplitudes), s, axes=1) / len(self.r)

    def to_dict(self) -> dict:
        return {"amplitudes": list(self.amplitudes), "r": list(self.r), "offset": self.offset}


class CouplingSchedule:
    """Base class. Subclasses implement ``_values`` on forward time."""

    kind: str = ""
    T: float
    n: int
    reversed: bool

    def values(self, t) -> np.ndarray:
        """Couplings at times t, shape (n+1,) + shape(t)."""
        t = np.asarray(t, dtype=float)
        if self.reversed:
            t = self.T - t
        return self._values(t)

    def sample(self, t: float) -> np.ndarray:
        if not -1e-12 * self.T <= t <= self.T * (1 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.T}]")
        return self.values(float(t))

    def time_reversed(self):
        """g'_j(t) = g_j(T - t)."""
        return dataclasses.replace(self, reversed=not self.reversed)

    def _values(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CrabSchedule(CouplingSchedule):
    """Fixed g0 and CRAB sine-series microwave couplings.

    ``A`` has shape (m, n): ``A[k, i]`` multiplies harmonic k+1 of cavity i+1.
    """

    T: float
    g0_fixed: float
    A: np.ndarray
    r: np.ndarray
    reversed: bool = False
    seed: int | None = None
    kind = "crab"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)).copy()
        r = np.atleast_1d(np.asarray(self.r, dtype=float)).copy()
        if r.ndim != 1 or A.shape[0] != r.size:
            raise ValueError("A must have shape (m, n) with m = len(r)")
        if not self.T > 0:
            raise ValueError("T must be positive")
        A.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "r", r)

    @property
    def m(self) -> int:
        return self.r.size

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        return 2 * np.pi * np.arange(1, self.m + 1) * (1 + self.r) / self.T

    def _values(self, t):
        s = np.sin(np.multiply.outer(self.frequencies, t))
        gi = np.tensordot(self.A.T, s, axes=1) / self.m
        g0 = np.full((1,) + np.shape(t), float(self.g0_fixed))
        return np.concatenate([g0, gi], axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "m": self.m,
            "g0_fixed": self.g0_fixed,
            "A": self.A.tolist(),
            "r": self.r.tolist(),
            "seed": self.seed,
            "reversed": self.reversed,
        }


@dataclass(frozen=True)
class Segment:
    """One stage of a piecewise schedule.

    During the stage the couplings are ``g`` with every microwave entry
    multiplied by ``profile(u)``, u the fractional position in the stage.
    ``profile=None`` keeps them constant.
    """

    duration: float
    g: np.ndarray
    profile: HarmonicProfile | None = None

    def __post_init__(self):
        g = as_coupling(self.g).copy()
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "g": self.g.tolist(),
            "profile": None if self.profile is None else self.profile.to_dict(),
        }


@dataclass(frozen=True)
class PiecewiseSchedule(CouplingSchedule):
    segments: tuple
    reversed: bool = False
    kind = "piecewise"

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("piecewise schedule needs at least one segment")
        if len({s.g.size for s in segs}) != 1:
            raise ValueError("segments disagree on the number of couplings")
        object.__setattr__(self, "segments", segs)

    @property
    def T(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def n(self) -> int:
        return self.segments[0].g.size - 1

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def _values(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        edges = self.boundaries
        idx = np.clip(np.searchsorted(edges, flat, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty((self.n + 1, flat.size))
        for j, seg in enumerate(self.segments):
            sel = idx == j
            if not np.any(sel):
                continue
            scale = np.ones(sel.sum())
            if seg.profile is not None:
                scale = seg.profile((flat[sel] - edges[j]) / seg.duration)
            out[0, sel] = seg.g[0]
            out[1:, sel] = np.outer(seg.g[1:], scale)
        return out.reshape((self.n + 1,) + t.shape)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "segments": [s.to_dict() for s in self.segments],
            "reversed": self.reversed,
        }


@dataclass(frozen=True)
class ConstantRatioSchedule(CouplingSchedule):
    """g_j(t) = envelope(t/T) * g_j(0): the coupling direction never changes."""

    T: float
    g_ref: np.ndarray
    envelope: HarmonicProfile | None = None
    reversed: bool = False
    kind = "constant-ratio"

    def __post_init__(self):
        g = as_coupling(self.g_ref).copy()
        g.setflags(write=False)
        object.__setattr__(self, "g_ref", g)

    @property
    def n(self) -> int:
        return self.g_ref.size - 1

    def _values(self, t):
        t = np.asarray(t, dtype=float)
        f = np.ones_like(t) if self.envelope is None else self.envelope(t / self.T)
        return np.multiply.outer(self.g_ref, f)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "g_ref": self.g_ref.tolist(),
            "envelope": None if self.envelope is None else self.envelope.to_dict(),
            "reversed": self.reversed,
        }


def _profile(d):
    return None if d is None else HarmonicProfile(d["amplitudes"], d["r"], d.get("offset", 0.0))


def schedule_from_dict(d: dict) -> CouplingSchedule:
    kind = d.get("kind")
    rev = bool(d.get("reversed", False))
    if kind == "crab":
        A = np.asarray(d["A"], dtype=float)
        if A.shape[0] != int(d.get("m", A.shape[0])):
            raise ValueError("schedule field m disagrees with A")
        return CrabSchedule(T=float(d["T"]), g0_fixed=float(d["g0_fixed"]), A=A,
                            r=np.asarray(d["r"], dtype=float), reversed=rev, seed=d.get("seed"))
    if kind == "piecewise":
        segs = tuple(Segment(float(s["duration"]), np.asarray(s["g"], dtype=float), _profile(s.get("profile")))
                     for s in d["segments"])
        sched = PiecewiseSchedule(segs, reversed=rev)
        if "T" in d and not np.isclose(sched.T, float(d["T"]), rtol=1e-12, atol=0):
            raise ValueError("segment durations do not sum to T")
        return sched
    if kind == "constant-ratio":
        return ConstantRatioSchedule(T=float(d["T"]), g_ref=np.asarray(d["g_ref"], dtype=float),
                                     envelope=_profile(d.get("envelope")), reversed=rev)
    raise ValueError(f"unknown schedule kind {kind!r}")
