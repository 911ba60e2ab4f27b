"""Command-line entry point: ``sphpoisson <command> [--config run.json] [--field value ...]``.

Each command reads an optional JSON config, lets flags override it, checks
every field before doing any work and writes its outputs (with the resolved
config embedded) under ``--out``.  Exit codes: 0 success, 1 failed self-test,
2 invalid config, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
import time
from typing import Any, Callable

import numpy as np

from . import operators
from .confinement import (
    ConfinedState,
    RadialProblem,
    evolve_limit,
    profile_by_name,
    project_initial,
    radial_eigensolve,
)
from .evolution import DivergedError, default_dt, evolve
from .instability import instability_experiment
from .operators import poisson_eigen_errors
from .resonance import count_representations, enumerate_lambda, growth_table, write_growth_csv
from .sht import SpectralField, analyze, make_grid, synthesize

SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --------------------------------------------------------------------------
# Config fields: name -> (type, default, validator or None, help)

_Check = Callable[[Any], bool]


def _pos(x) -> bool:
    return x > 0


def _nonneg(x) -> bool:
    return x >= 0


FIELDS: dict[str, tuple[type, Any, _Check | None, str]] = {
    "seed": (int, 0, lambda s: 0 <= s <= SEED_MAX, "64-bit seed for random fields"),
    "bandlimit": (int, 16, _nonneg, "spherical-harmonic bandlimit L"),
    "dt": (float, None, _pos, "time step (default 0.5/(L(L+1)))"),
    "t_end": (float, 1.0, _nonneg, "final time"),
    "snapshot_every": (int, 0, _nonneg, "SPH1 snapshot stride in steps (0: none)"),
    "initial": (str, "random", lambda s: s in ("random", "constant", "psi"), "initial data: random, constant or psi"),
    "decay": (float, 2.0, _nonneg, "coefficient decay exponent of random data"),
    "mass": (float, 1.0, _pos, "L2 mass of the initial data"),
    "n": (int, 64, lambda n: n >= 3, "sectoral order"),
    "delta0": (float, 1.0, lambda d: 0 < d <= 1, "norm of the first state"),
    "K": (int, 32, lambda k: k >= 1, "subspace depth"),
    "use_solver": (bool, False, None, "also integrate both states numerically"),
    "tol": (float, 1e-10, _pos, "minimizer tolerance"),
    "eps": (float, 0.1, lambda e: 0 < e <= 1, "confinement width"),
    "r_max": (float, 3.0, lambda r: r >= 2, "radial truncation"),
    "n_r": (int, 2000, lambda n: n >= 200, "radial grid points"),
    "n_modes": (int, 4, lambda p: p >= 1, "retained radial modes"),
    "profile": (str, "quartic", lambda s: s in ("quartic", "harmonic"), "confinement profile"),
    "M": (int, 25, None, "target of k1^2 + sigma k2^2"),
    "sigma": (int, 1, lambda s: s in (1, -1), "sign in k1^2 + sigma k2^2"),
    "N": (list, [3], lambda v: len(v) in (1, 4) and all(isinstance(x, int) and x >= 1 for x in v), "window scale(s)"),
    "k": (int, 0, None, "resonance value"),
    "growth": (bool, False, None, "write the sup_k growth table instead"),
    "repeats": (int, 5, _pos, "timing repetitions"),
}

COMMAND_FIELDS = {
    "selftest": ["bandlimit", "seed"],
    "evolve": ["seed", "bandlimit", "dt", "t_end", "snapshot_every", "initial", "decay", "mass", "n"],
    "instability": ["seed", "n", "delta0", "K", "use_solver", "tol", "dt"],
    "confine": ["seed", "eps", "r_max", "n_r", "n_modes", "profile", "bandlimit", "dt", "t_end", "decay", "mass"],
    "count": ["M", "sigma", "N"],
    "lambda": ["N", "k", "growth"],
    "transform-bench": ["seed", "bandlimit", "repeats"],
}

SELFTEST_DEFAULT_L = 64


def _coerce(name: str, value):
    typ = FIELDS[name][0]
    if value is None:
        return None
    try:
        if typ is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("1", "true", "yes", "0", "false", "no"):
                return value.lower() in ("1", "true", "yes")
            raise TypeError
        if typ is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if typ is float:
            v = float(value)
            if not math.isfinite(v):
                raise TypeError
            return v
        if typ is list:
            if isinstance(value, int):
                return [value]
            if isinstance(value, str):
                return [int(x) for x in value.replace(",", " ").split()]
            return [int(x) for x in value]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"cannot read {value!r} as {typ.__name__}") from None


def resolve_config(command: str, file_cfg: dict, overrides: dict) -> dict:
    """Defaults < config file < flags, then validate every field."""
    names = COMMAND_FIELDS[command]
    unknown = set(file_cfg) - set(names) - {"command"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], f"not a field of {command}")
    cfg = {}
    for name in names:
        value = FIELDS[name][1]
        if name in file_cfg:
            value = file_cfg[name]
        if overrides.get(name) is not None:
            value = overrides[name]
        value = _coerce(name, value)
        check = FIELDS[name][2]
        if value is not None and check is not None and not check(value):
            raise ConfigError(name, f"invalid value {value!r}")
        cfg[name] = value
    cfg["command"] = command
    # cross-field preconditions of the target operations
    if command == "confine" and cfg["n_modes"] >= cfg["n_r"] // 10:
        raise ConfigError("n_modes", "must be much smaller than n_r")
    if command == "evolve" and cfg["initial"] == "psi" and cfg["n"] > cfg["bandlimit"]:
        raise ConfigError("n", "psi_n needs n <= bandlimit")
    return cfg


# --------------------------------------------------------------------------
# Commands


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _random_field(L: int, seed: int, decay: float, mass: float) -> SpectralField:
    f = SpectralField.random(L, np.random.default_rng(seed), decay)
    return f * math.sqrt(mass / f.mass())


@contextlib.contextmanager
def _corrupted_poisson():
    """Test hook: perturb the Poisson multiplier at one degree."""
    original = operators.MultiplierSpec.values

    def broken(self, L):
        v = original(self, L)
        if self.kind == "poisson" and L >= 3:
            v = v.copy()
            v[3] *= 1.0 + 1e-6
        return v

    operators.MultiplierSpec.values = broken
    try:
        yield
    finally:
        operators.MultiplierSpec.values = original


def selftest_checks(L: int, seed: int) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []
    grid = make_grid(L)

    f = SpectralField.random(L, rng, 0.0)
    back = analyze(synthesize(f, grid), L)
    err = float(np.max(np.abs(back.coeffs - f.coeffs)) / np.max(np.abs(f.coeffs)))
    results.append(("round trip", err < 1e-10, f"max rel err {err:.2e}"))

    v = synthesize(f, grid).values
    q = float(np.real(grid.integrate(np.abs(v) ** 2)))
    err = abs(q - f.mass()) / f.mass()
    results.append(("parseval", err < 1e-10, f"rel err {err:.2e}"))

    worst = float(poisson_eigen_errors(L).max())
    results.append(("poisson eigenvalue", worst < 1e-12, f"max coeff err {worst:.2e}"))

    u = _random_field(L, seed, 2.0, 1.0)
    rec = evolve(u, t_end=50 * default_dt(L))
    results.append(("mass conservation", rec.mass_drift() < 1e-11, f"50-step drift {rec.mass_drift():.2e}"))
    return results


def cmd_selftest(cfg: dict, args) -> int:
    t0 = time.perf_counter()
    ctx = _corrupted_poisson() if args.inject_fault == "poisson-eigenvalue" else contextlib.nullcontext()
    with ctx:
        results = selftest_checks(cfg["bandlimit"], cfg["seed"])
    width = max(len(r[0]) for r in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = [r[0] for r in results if not r[1]]
    print(f"selftest L={cfg['bandlimit']}: {len(results) - len(failed)}/{len(results)} passed in {time.perf_counter() - t0:.1f}s")
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def cmd_evolve(cfg: dict, args) -> int:
    L = cfg["bandlimit"]
    if cfg["initial"] == "constant":
        u0 = SpectralField.single(L, 0, 0, math.sqrt(4 * math.pi))
    elif cfg["initial"] == "psi":
        from .instability import build_psi

        u0 = build_psi(cfg["n"], L)
    else:
        u0 = _random_field(L, cfg["seed"], cfg["decay"], cfg["mass"])
    rec = evolve(u0, dt=cfg["dt"], t_end=cfg["t_end"], snapshot_every=cfg["snapshot_every"])
    rec.to_csv(_out_path(args, "evolve.csv"), config=cfg)
    if rec.snapshots:
        rec.write_snapshots(args.out)
        _write_json(_out_path(args, "snapshots.json"), {"config": cfg, "steps": sorted(rec.snapshots)})
    summary = f"mass_drift={rec.mass_drift():.3e} energy_drift={rec.energy_drift():.3e} steps={len(rec.times) - 1}"
    if cfg["initial"] == "constant":
        exact = np.exp(-1j * rec.times[-1]) * u0.coeffs
        summary += f" phase_error={float(np.max(np.abs(rec.final_state.coeffs - exact))):.3e}"
    print(summary)
    return 0


def cmd_instability(cfg: dict, args) -> int:
    rep = instability_experiment(
        cfg["n"], cfg["delta0"], cfg["K"], use_solver=cfg["use_solver"], tol=cfg["tol"], dt=cfg["dt"]
    )
    rep.to_json(_out_path(args, "instability.json"), config=cfg)
    line = f"n={rep.n} s0={rep.s0:.6f} t_n={rep.t_n:.6f} separation_analytic={rep.separation_analytic:.6f}"
    if rep.separation_solver is not None:
        line += f" separation_solver={rep.separation_solver:.6f} discrepancy={rep.discrepancy:.3e}"
    print(line)
    return 0


def cmd_confine(cfg: dict, args) -> int:
    prob = RadialProblem(profile_by_name(cfg["profile"]), cfg["eps"], cfg["r_max"], cfg["n_r"])
    basis = radial_eigensolve(prob, cfg["n_modes"])
    basis.to_csv(_out_path(args, "radial_basis.csv"), config=cfg)
    basis.energies_json(_out_path(args, "radial_energies.json"), config=cfg)
    z = (prob.r - 1.0) / prob.eps
    sphere = _random_field(cfg["bandlimit"], cfg["seed"], cfg["decay"], cfg["mass"])
    state: ConfinedState = project_initial(np.exp(-0.5 * z**2), sphere, basis)
    rec = evolve_limit(state, cfg["dt"], cfg["t_end"])
    rec.to_csv(_out_path(args, "confine.csv"), config=cfg)
    rad = rec.extra["radial_energy"]
    print(
        f"mass_drift={rec.mass_drift():.3e} radial_energy_drift={float(np.max(np.abs(rad - rad[0])) / rad[0]):.3e} "
        f"energy_drift={rec.energy_drift():.3e} discarded_mass={state.discarded_mass:.3e}"
    )
    return 0


def cmd_count(cfg: dict, args) -> int:
    if len(cfg["N"]) != 1:
        raise ConfigError("N", "count takes a single N")
    print(count_representations(cfg["M"], cfg["sigma"], cfg["N"][0]))
    return 0


def cmd_lambda(cfg: dict, args) -> int:
    N = cfg["N"] * 4 if len(cfg["N"]) == 1 else cfg["N"]
    if cfg["growth"]:
        rows = growth_table(tuple(sorted(set(cfg["N"]))) if len(cfg["N"]) > 1 else (8, 16, 32, 64))
        write_growth_csv(rows, _out_path(args, "growth.csv"), config=cfg)
        print(" ".join(f"N={r['N']}:{r['sup_count']}" for r in rows))
        return 0
    tuples = enumerate_lambda(tuple(N), cfg["k"])
    with open(_out_path(args, "lambda.csv"), "w") as fh:
        fh.write("# config: " + json.dumps(cfg, sort_keys=True) + "\n")
        fh.write("n1,n2,n3,n4\n")
        for t in tuples:
            fh.write(",".join(map(str, t)) + "\n")
    print(len(tuples))
    return 0


def cmd_transform_bench(cfg: dict, args) -> int:
    L = cfg["bandlimit"]
    grid = make_grid(L)
    f = SpectralField.random(L, np.random.default_rng(cfg["seed"]), 0.0)
    out = {"config": cfg, "grid": list(grid.shape)}
    for method in ("fft", "direct"):
        v = synthesize(f, grid, method)
        t0 = time.perf_counter()
        for _ in range(cfg["repeats"]):
            v = synthesize(f, grid, method)
        t1 = time.perf_counter()
        for _ in range(cfg["repeats"]):
            analyze(v, L, method)
        t2 = time.perf_counter()
        out[method] = {"synthesize_s": (t1 - t0) / cfg["repeats"], "analyze_s": (t2 - t1) / cfg["repeats"]}
    diff = float(np.max(np.abs(synthesize(f, grid, "fft").values - synthesize(f, grid, "direct").values)))
    out["fft_vs_direct"] = diff
    _write_json(_out_path(args, "transform_bench.json"), out)
    print(
        f"L={L} fft synth {out['fft']['synthesize_s']:.2e}s analyze {out['fft']['analyze_s']:.2e}s; "
        f"direct synth {out['direct']['synthesize_s']:.2e}s; max diff {diff:.1e}"
    )
    return 0


COMMANDS = {
    "selftest": cmd_selftest,
    "evolve": cmd_evolve,
    "instability": cmd_instability,
    "confine": cmd_confine,
    "count": cmd_count,
    "lambda": cmd_lambda,
    "transform-bench": cmd_transform_bench,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sphpoisson", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fields in COMMAND_FIELDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with field values")
        sp.add_argument("--out", default=".", help="output directory")
        for f in fields:
            typ, default, _, help_ = FIELDS[f]
            flags = [f"--{f}"] + ([f"--{f.replace('_', '-')}"] if "_" in f else [])
            if typ is bool:
                sp.add_argument(*flags, dest=f, default=None, action=argparse.BooleanOptionalAction, help=help_)
            elif typ is list:
                sp.add_argument(*flags, dest=f, default=None, type=int, nargs="+", help=help_)
            else:
                # strings are parsed later so a bad value reports its field name
                sp.add_argument(*flags, dest=f, default=None, help=f"{help_} (default {default})")
        if name == "selftest":
            sp.add_argument("--inject-fault", choices=["poisson-eigenvalue"], help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        file_cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    file_cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError("config", str(exc)) from None
            if not isinstance(file_cfg, dict):
                raise ConfigError("config", "top level must be an object")
        overrides = {f: getattr(args, f, None) for f in COMMAND_FIELDS[command]}
        if command == "selftest" and overrides.get("bandlimit") is None and "bandlimit" not in file_cfg:
            overrides["bandlimit"] = SELFTEST_DEFAULT_L
        cfg = resolve_config(command, file_cfg, overrides)
        return COMMANDS[command](cfg, args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except DivergedError as exc:
        print(f"diverged at step {exc.step}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
