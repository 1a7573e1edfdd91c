"""Command-line entry point: ``piecewise-fde {simulate,equilibria,uniqueness,verify}``.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence, TextIO

from . import __version__
from .config import BREAKPOINT_CONVENTION, MAX_SEED, PRESETS, SCHEMA_VERSION, ConfigError, RunConfig, parse_config
from .model import UniquenessQuery, equilibria, lipschitz_constants, omitted_equilibria, uniqueness_criterion
from .solvers import IntegrationDivergedError, Trajectory, solve_piecewise
from .stochastic import BIT_GENERATOR, GAUSSIAN_METHOD
from .validation import VERIFY_DELTAS, default_weight_fn, run_checks

__all__ = [
    "main",
    "build_parser",
    "cmd_simulate",
    "cmd_equilibria",
    "cmd_uniqueness",
    "cmd_verify",
    "header_lines",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_DIVERGED",
    "EXIT_VERIFY",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_VERIFY = 4


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def header_lines(config: RunConfig, kind: str) -> list[str]:
    """Comment header; the ``config`` line alone is enough to replay the run."""
    lines = [
        f"piecewise-fde {kind}",
        f"schema_version: {SCHEMA_VERSION}",
        f"package_version: {__version__}",
        f"seed: {config.seed}",
        f"bit_generator: {BIT_GENERATOR}",
        f"gaussian_method: {GAUSSIAN_METHOD}",
        f"preset: {config.preset_name or 'none'}",
        "segments: "
        + "; ".join(
            f"{i}={s.kind.value}[{_fmt(s.t_start)},{_fmt(s.t_end)}]"
            + (f" delta={_fmt(s.delta.delta)}" if s.kind.is_fractional else "")
            for i, s in enumerate(config.schedule.segments)
        ),
        "breakpoint rows belong to the segment they start",
    ]
    if config.preset_name in PRESETS:
        lines.append(f"convention: {BREAKPOINT_CONVENTION}")
    lines.append(f"config: {config.to_json()}")
    return ["# " + line for line in lines]


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _timeseries_text(config: RunConfig, traj: Trajectory) -> str:
    labels = traj.segment_labels()
    rows = header_lines(config, "timeseries") + ["t,x,y,segment"]
    rows += [
        f"{_fmt(t)},{_fmt(x)},{_fmt(y)},{k}" for t, x, y, k in zip(traj.times, traj.x, traj.y, labels)
    ]
    return "\n".join(rows) + "\n"


def _phase_text(config: RunConfig, traj: Trajectory) -> str:
    rows = header_lines(config, "phase") + ["x,y"]
    rows += [f"{_fmt(x)},{_fmt(y)}" for x, y in zip(traj.x, traj.y)]
    return "\n".join(rows) + "\n"


def _simulate_one(config: RunConfig, out_dir: Path, suffix: str = "") -> tuple[Path, Path, int]:
    """Solve and write both CSVs; on divergence leave no output file behind."""
    ts_path = out_dir / f"timeseries{suffix}.csv"
    ph_path = out_dir / f"phase{suffix}.csv"
    try:
        traj = solve_piecewise(config.params, config.schedule, config.initial, seed=config.seed)
        _atomic_write(ts_path, _timeseries_text(config, traj))
        _atomic_write(ph_path, _phase_text(config, traj))
    except IntegrationDivergedError:
        for p in (ts_path, ph_path):
            p.unlink(missing_ok=True)
        raise
    return ts_path, ph_path, len(traj.times)


def _ensemble_member(args: tuple[RunConfig, str, str]) -> tuple[str, bool, str]:
    config, out_dir, suffix = args
    try:
        ts, _, _ = _simulate_one(config, Path(out_dir), suffix)
    except IntegrationDivergedError as exc:
        return suffix, False, str(exc)
    return suffix, True, str(ts)


def cmd_simulate(config: RunConfig, out_dir: str | Path = ".", ensemble: int = 1, *, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if ensemble <= 1:
        try:
            ts, ph, n = _simulate_one(config, out_dir)
        except IntegrationDivergedError as exc:
            print(f"error: integration diverged: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        print(f"wrote {ts} ({n} rows)", file=out)
        print(f"wrote {ph}", file=out)
        return EXIT_OK

    if config.seed + ensemble - 1 > MAX_SEED:
        print("error: seed: ensemble seeds would exceed 2**64 - 1", file=sys.stderr)
        return EXIT_CONFIG
    jobs = []
    for i in range(ensemble):
        seed = config.seed + i
        member = RunConfig(config.params, config.initial, config.schedule, seed, config.preset_name)
        jobs.append((member, str(out_dir), f"_seed{seed}"))
    failed = 0
    workers = min(ensemble, os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for suffix, ok, result in pool.map(_ensemble_member, jobs):
            if ok:
                print(f"wrote {result}", file=out)
            else:
                failed += 1
                print(f"error: member {suffix.lstrip('_')} diverged: {result}", file=sys.stderr)
    return EXIT_DIVERGED if failed else EXIT_OK


def cmd_equilibria(config: RunConfig, *, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    print("label,x,y,eig1,eig2,class,feasible", file=out)
    for rep in equilibria(config.params):
        e1, e2 = rep.eigenvalues
        print(
            f"{rep.label},{_fmt(rep.point.x)},{_fmt(rep.point.y)},{_complex(e1)},{_complex(e2)},"
            f"{rep.classification.value},{'yes' if rep.feasible else 'no'}",
            file=out,
        )
    for note in omitted_equilibria(config.params):
        print(f"# omitted: {note}", file=out)
    return EXIT_OK


def _complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0.0:
        return _fmt(z.real)
    return f"{_fmt(z.real)}{'+' if z.imag >= 0 else '-'}{_fmt(abs(z.imag))}j"


def cmd_uniqueness(
    config: RunConfig,
    k: float | None = None,
    a: float = 1.0,
    b: float = 0.0,
    T: float | None = None,
    *,
    out: TextIO | None = None,
) -> int:
    """Evaluate the contraction bound for each Lipschitz constant (or a given ``k``)."""
    out = out or sys.stdout
    delta = config.fractional_delta or 1.0
    horizon = T if T is not None else config.schedule.t_end - config.schedule.t_start
    if k is None:
        k1, k2 = lipschitz_constants(config.params)
        print(f"k1 = {_fmt(k1)}", file=out)
        print(f"k2 = {_fmt(k2)}", file=out)
        cases = [("k1", k1), ("k2", k2)]
    else:
        cases = [("k", k)]
    try:
        queries = [(name, UniquenessQuery(kv, delta, horizon, a, b)) for name, kv in cases]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"delta = {_fmt(delta)}, T = {_fmt(horizon)}, a = {_fmt(a)}, b = {_fmt(b)}", file=out)
    for name, q in queries:
        value, holds = uniqueness_criterion(q)
        print(f"{name}: value = {_fmt(value)} -> {'holds' if holds else 'fails'}", file=out)
    return EXIT_OK


def cmd_verify(
    weight_fn: Callable = default_weight_fn,
    deltas: Sequence[float] = VERIFY_DELTAS,
    *,
    out: TextIO | None = None,
) -> int:
    out = out or sys.stdout
    results = run_checks(weight_fn, deltas=deltas)
    for r in results:
        print(r.line(), file=out)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=out)
    return EXIT_VERIFY if failed else EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config, or an output CSV whose header is replayed")
    p.add_argument("--preset", metavar="NAME", help=f"one of: {', '.join(sorted(PRESETS))}")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--h", type=float, metavar="REAL", help="step size")
    for name in ("r", "lambda1", "lambda2", "lambda3", "lambda4", "sigma1", "sigma2", "x0", "y0"):
        p.add_argument(f"--{name}", type=float, metavar="REAL")
    p.add_argument("--delta", type=float, metavar="REAL", help="order of every fractional segment")
    for name in ("P1", "P2", "P"):
        p.add_argument(f"--{name}", type=float, metavar="REAL", help="breakpoint / horizon override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="piecewise-fde", description="Piecewise classical/fractional/stochastic solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate and write timeseries.csv and phase.csv")
    _add_config_flags(sim)
    sim.add_argument("--out", default=".", metavar="DIR")
    sim.add_argument("--ensemble", type=int, default=1, metavar="N", help="run N seeds (seed, seed+1, ...) in parallel")

    eq = sub.add_parser("equilibria", help="equilibria with eigenvalues and stability class")
    _add_config_flags(eq)

    un = sub.add_parser("uniqueness", help="evaluate the uniqueness bound")
    _add_config_flags(un)
    un.add_argument("--k", type=float, help="Lipschitz constant (default: k1 and k2 from the parameters)")
    un.add_argument("--a", type=float, default=1.0)
    un.add_argument("--b", type=float, default=0.0)
    un.add_argument("--T", type=float, help="horizon (default: schedule length)")

    sub.add_parser("verify", help="run the built-in oracle suite")
    return parser


_OVERRIDE_KEYS = ("r", "lambda1", "lambda2", "lambda3", "lambda4", "sigma1", "sigma2", "x0", "y0", "seed", "h", "delta", "P1", "P2", "P")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key) for key in _OVERRIDE_KEYS}
    return parse_config(args.config, preset=args.preset, overrides=overrides)


def _uniqueness_without_config(args: argparse.Namespace) -> bool:
    return args.k is not None and args.config is None and args.preset is None


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify()
    try:
        if args.command == "uniqueness" and _uniqueness_without_config(args):
            # a bare ``--k`` query needs no model parameters
            try:
                q = UniquenessQuery(args.k, args.delta if args.delta is not None else 1.0, args.T if args.T is not None else 1.0, args.a, args.b)
            except ValueError as exc:
                raise ConfigError("uniqueness", str(exc)) from None
            value, holds = uniqueness_criterion(q)
            print(f"delta = {_fmt(q.delta)}, T = {_fmt(q.T)}, a = {_fmt(q.a)}, b = {_fmt(q.b)}")
            print(f"k: value = {_fmt(value)} -> {'holds' if holds else 'fails'}")
            return EXIT_OK
        config = _config_from_args(args)
        if args.command == "simulate":
            if args.ensemble < 1:
                raise ConfigError("ensemble", f"must be >= 1, got {args.ensemble}")
            return cmd_simulate(config, args.out, args.ensemble)
        if args.command == "equilibria":
            return cmd_equilibria(config)
        return cmd_uniqueness(config, args.k, args.a, args.b, args.T)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
