"""
Command-line front end.

Every subcommand reads one JSON config (``--config``); all numbers in it are
either already in units of the reference coupling g0 (``--units g0``) or in
raw units, i.e. rates in rad/s and times in s (``--units raw``), in which
case ``system.g0`` gives the scale. Outputs are always written in g0 units
and the CSV headers record the conversion.

Config layout (every block optional unless the command needs it)::

    {
      "system":   {"n": 3, "kappa0": 10, "kappa": 1e-5, "gamma_m": 1e-3,
                   "omega_m": null, "g0": 1},
      "schedule": {"file": "schedule.json"}
                  or {"crab": {"T": 100, "m": 6, "amplitude_bound": 5,
                               "n_restarts": 5, "max_evals": 2000}},
      "grid":     {"N": null},
      "seed":     0,
      "targets":  [[0.7071, 0.5774, 0.4082], "empty", {"re": [...], "im": [...]}],
      "inject":   {"pulse": "pulse.csv", "time_reverse": true, "normalize": true},
      "sweep":    {"kind": "damping", "axis": "gamma_m", "values": [...]}
                  or {"kind": "time", "n": [1, 2, 3], "T": [...],
                      "methods": ["trivial", "optimized"]},
      "min_fidelity": null
    }
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .analysis import WState, roundtrip, sweep_damping, sweep_time
from .control import CrabConfig, optimize_crab
from .dynamics import PulseShape, TimeGrid, evolve_emission, evolve_injection, time_reverse
from .model import SystemParams
from .verify import run_checks

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("wstate_optomech")


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------- config

@dataclasses.dataclass
class RunConfig:
    raw: dict
    units: str
    seed: int
    out: Path
    jobs: int
    base: Path

    @property
    def g0(self) -> float:
        return float(self.raw.get("system", {}).get("g0", 1.0)) if self.units == "raw" else 1.0

    def rate(self, x):
        return None if x is None else np.asarray(x, dtype=float) / self.g0

    def time(self, x):
        return None if x is None else np.asarray(x, dtype=float) * self.g0

    def header(self) -> str:
        if self.units == "raw":
            return f"units: g0 (input given raw, normalized by g0_ref={self.g0:.17g} rad/s)"
        return "units: g0"

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def params(self) -> SystemParams:
        sysd = self.raw.get("system")
        if not isinstance(sysd, dict) or "n" not in sysd or "kappa0" not in sysd:
            raise ConfigError("config needs a 'system' block with at least n and kappa0")
        if self.units == "g0" and float(sysd.get("g0", 1.0)) != 1.0:
            raise ConfigError("--units g0 requires system.g0 = 1 (or omitted)")
        if self.g0 <= 0:
            raise ConfigError("system.g0 must be positive")
        try:
            p = SystemParams(n=sysd["n"], kappa0=float(self.rate(sysd["kappa0"])),
                             kappa=self.rate(sysd.get("kappa", 0.0)),
                             gamma_m=float(self.rate(sysd.get("gamma_m", 0.0))),
                             omega_m=None if sysd.get("omega_m") is None else float(self.rate(sysd["omega_m"])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid system block: {exc}") from exc
        p.check_validity()
        return p

    def grid_for(self, params: SystemParams, T: float) -> TimeGrid:
        N = self.raw.get("grid", {}).get("N")
        return TimeGrid.default(params, T) if N is None else TimeGrid(T, int(N))

    def crab(self, T: float | None = None) -> CrabConfig:
        block = self.raw.get("schedule", {}).get("crab")
        if block is None:
            raise ConfigError("config needs schedule.crab for this command")
        known = {"T", "m", "amplitude_bound", "n_restarts", "max_evals", "simplex_step"}
        unknown = set(block) - known
        if unknown:
            raise ConfigError(f"unknown schedule.crab keys: {sorted(unknown)}")
        if T is None:
            if "T" not in block:
                raise ConfigError("schedule.crab.T missing")
            T = float(self.time(block["T"]))
        kw = {k: block[k] for k in ("m", "amplitude_bound", "n_restarts", "max_evals", "simplex_step") if k in block}
        N = self.raw.get("grid", {}).get("N")
        try:
            return CrabConfig(T=T, seed=self.seed, grid_N=None if N is None else int(N), **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid schedule.crab block: {exc}") from exc

    def schedule(self):
        block = self.raw.get("schedule", {})
        if "file" not in block:
            raise ConfigError("missing schedule: set schedule.file (run 'optimize' to create one)")
        path = self.path(block["file"])
        if not path.exists():
            raise ConfigError(f"schedule file not found: {path}")
        try:
            return fio.load_schedule(path)
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad schedule file {path}: {exc}") from exc

    def targets(self, n: int) -> list:
        items = self.raw.get("targets")
        if not items:
            raise ConfigError("config needs a non-empty 'targets' list")
        out = []
        for item in items:
            if item == "empty":
                out.append(None)
                continue
            if isinstance(item, dict):
                w = np.asarray(item.get("re", 0.0), dtype=float) + 1j * np.asarray(item.get("im", 0.0), dtype=float)
            else:
                w = np.asarray(item, dtype=complex)
            if w.shape != (n,):
                raise ConfigError(f"target {item!r} needs {n} coefficients")
            norm = np.linalg.norm(w)
            if not abs(norm - 1) < 1e-6:
                raise ConfigError(f"target {item!r} is not normalized (norm {norm:.6g})")
            out.append(WState.from_unnormalized(w))
        return out


def load_config(args) -> RunConfig:
    raw, base = {}, Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        base = path.resolve().parent
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return RunConfig(raw=raw, units=args.units, seed=seed, out=Path(args.out), jobs=args.jobs, base=base)


# --------------------------------------------------------------- commands

def cmd_verify(cfg: RunConfig, args) -> int:
    flip = bool(args.flip_io_sign or cfg.raw.get("debug", {}).get("flip_io_sign", False))
    results = run_checks(cfg.seed, flip_io_sign=flip)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    report = {"format_version": fio.FORMAT_VERSION, "seed": cfg.seed, "flip_io_sign": flip,
              "passed": ok, "checks": [r.to_dict() for r in results]}
    fio.atomic_write(cfg.out / "verify_report.json", fio.dumps(report))
    print("all checks passed" if ok else "CHECK FAILURE")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_optimize(cfg: RunConfig, args) -> int:
    params = cfg.params()
    crab = cfg.crab()
    rep = optimize_crab(params, crab, n_jobs=cfg.jobs)
    fio.save_schedule(cfg.out / "schedule.json", rep.schedule)
    extra = {"system": {"n": params.n, "kappa0": params.kappa0, "kappa": params.kappa.tolist(),
                        "gamma_m": params.gamma_m},
             "units": cfg.header(), "grid_N": crab.grid(params).N}
    if rep.budget_exhausted:
        extra["warning"] = "evaluation budget exhausted in at least one restart"
    fio.save_report(cfg.out / "report.json", rep, extra)
    print(f"objective {rep.objective:.6e}  residuals {np.array2string(rep.per_basis_residuals, precision=3)}")
    if rep.budget_exhausted:
        print("warning: evaluation budget exhausted", file=sys.stderr)
    return EXIT_OK


def _write_run(cfg, stem, traj, pulse):
    fio.atomic_write(cfg.out / f"{stem}_trajectory.csv", fio.trajectory_csv(traj, cfg.header()))
    fio.atomic_write(cfg.out / f"{stem}_pulse.csv", fio.pulse_csv(pulse, cfg.header()))


def cmd_emit(cfg: RunConfig, args) -> int:
    params, sched = cfg.params(), cfg.schedule()
    grid = cfg.grid_for(params, sched.T)
    for k, w in enumerate(cfg.targets(params.n)):
        psi0 = np.zeros(params.dim, dtype=complex) if w is None else w.embed()
        traj = evolve_emission(params, sched, psi0, grid)
        _write_run(cfg, f"emit_{k}", traj, traj.emitted)
        print(f"target {k}: emitted photon number {traj.flux_out_cum[-1]:.10f}")
    return EXIT_OK


def cmd_inject(cfg: RunConfig, args) -> int:
    params, sched = cfg.params(), cfg.schedule()
    block = cfg.raw.get("inject", {})
    if "pulse" not in block:
        raise ConfigError("config needs inject.pulse (a pulse CSV)")
    path = cfg.path(block["pulse"])
    if not path.exists():
        raise ConfigError(f"pulse file not found: {path}")
    t, f = fio.read_pulse_csv(path)
    grid = TimeGrid(float(t[-1]), t.size - 1)
    if not math.isclose(grid.T, sched.T, rel_tol=1e-9) or np.max(np.abs(t - grid.times)) > 1e-9 * grid.T:
        raise ConfigError("pulse time axis must be uniform on [0, T] of the schedule")
    pulse = PulseShape(grid, f)
    if block.get("time_reverse", True):
        pulse, sched = time_reverse(pulse), time_reverse(sched)
    if block.get("normalize", True) and pulse.photon_content > 0:
        pulse = pulse.normalized()
    traj = evolve_injection(params, sched, pulse, None, grid)
    _write_run(cfg, "inject", traj, traj.emitted)
    print(f"absorbed excitation {traj.norm2[-1]:.10f}")
    for k, w in enumerate(cfg.raw.get("targets") and cfg.targets(params.n) or []):
        if w is not None:
            print(f"F_{k + 1} = {abs(np.vdot(w.embed(), traj.final)) ** 2:.10f}")
    return EXIT_OK


def cmd_roundtrip(cfg: RunConfig, args) -> int:
    params, sched = cfg.params(), cfg.schedule()
    grid = cfg.grid_for(params, sched.T)
    threshold = cfg.raw.get("min_fidelity")
    targets = cfg.targets(params.n)
    if any(w is None for w in targets):
        raise ConfigError("roundtrip targets must be W states, not 'empty'")
    fids = []
    for k, w in enumerate(targets):
        rt = roundtrip(params, sched, w, grid)
        _write_run(cfg, f"roundtrip_{k}_emit", rt.emission, rt.emission.emitted)
        _write_run(cfg, f"roundtrip_{k}_inject", rt.injection, rt.injection.emitted)
        fids.append(rt.fidelity)
        print(f"F_{k + 1} = {rt.fidelity:.10f}")
    summary = {"format_version": fio.FORMAT_VERSION, "fidelities": fids, "units": cfg.header()}
    fio.atomic_write(cfg.out / "roundtrip.json", fio.dumps(summary))
    if threshold is not None and min(fids) < float(threshold):
        print(f"fidelity below min_fidelity={threshold}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    params = cfg.params()
    block = cfg.raw.get("sweep")
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("config needs a 'sweep' block with a 'kind'")
    if block["kind"] == "damping":
        axis = block.get("axis")
        if axis not in ("kappa_i", "gamma_m"):
            raise ConfigError("sweep.axis must be 'kappa_i' or 'gamma_m'")
        sched = cfg.schedule()
        values = cfg.rate(block.get("values", []))
        if values.ndim != 1 or values.size == 0:
            raise ConfigError("sweep.values must be a non-empty list")
        results = [sweep_damping(params, sched, axis, values, cfg.grid_for(params, sched.T),
                                 method=block.get("method", "optimized"), n_jobs=cfg.jobs)]
    elif block["kind"] == "time":
        methods = tuple(block.get("methods", ("trivial", "optimized")))
        if not set(methods) <= {"trivial", "optimized"}:
            raise ConfigError("sweep.methods may contain 'trivial' and 'optimized'")
        T_values = cfg.time(block.get("T", []))
        if T_values.ndim != 1 or T_values.size == 0:
            raise ConfigError("sweep.T must be a non-empty list")
        crab = cfg.crab(T=float(T_values[0]))
        results = sweep_time(params, block.get("n", [params.n]), T_values, methods, crab, n_jobs=cfg.jobs)
    else:
        raise ConfigError(f"unknown sweep kind {block['kind']!r}")
    for res in results:
        name = f"sweep_{res.axis}_{res.method}_n{res.n}.csv"
        fio.atomic_write(cfg.out / name, f"# {cfg.header()}\n" + res.to_csv())
        print(f"{name}: " + " ".join(f"{f:.5f}" for f in res.fidelity))
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify, "optimize": cmd_optimize, "emit": cmd_emit,
    "inject": cmd_inject, "roundtrip": cmd_roundtrip, "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    # flags may go before or after the subcommand; SUPPRESS keeps the
    # subparser from overwriting a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, metavar="N", default=argparse.SUPPRESS)
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, metavar="N", default=argparse.SUPPRESS)
    common.add_argument("--units", choices=("raw", "g0"), default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="wstate-optomech", parents=[common],
                                     description="Emit W states of n microwave cavities as one optical photon.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "run the model identity checks",
        "optimize": "CRAB-optimize a coupling schedule",
        "emit": "emit photons from W states",
        "inject": "absorb a pulse into the empty system",
        "roundtrip": "emit, time-reverse, inject and report F_p",
        "sweep": "fidelity versus damping or duration",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "verify":
            p.add_argument("--flip-io-sign", action="store_true",
                           help="debug: flip the injection source sign (ledger check must fail)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    defaults = {"config": None, "seed": None, "out": ".", "jobs": 1, "units": "g0", "verbose": False,
                "flip_io_sign": False}
    for k, v in defaults.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
