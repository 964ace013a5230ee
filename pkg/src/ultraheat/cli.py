"""Command-line front end.

Configuration is layered: built-in defaults, then an optional JSON config
file, then ``ULTRAHEAT_*`` environment variables, then command-line flags.
Floats are written with 17 significant digits and exact rationals as
``"a/b"`` strings, so identical (config, arguments, seed) give identical
bytes.  The exit status is 0 exactly when every check of the command passes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import funcspace
from .filtration import (DEFAULT_LEVEL_CAP, Filtration, n_adic_filtration, taibleson_filtration)
from .markov import IncrementSampler, level_ks_test, path_rng, sample_path, symmetry_check
from .sadic import DEFAULT_COSET_CAP, SAdicPoint, norm
from .spectral import (OnSphere, SymbolAlpha, duhamel_solve, evolve, heat_kernel, spectrum)
from .verify import SUITES, run_suite

ENV_PREFIX = "ULTRAHEAT_"


@dataclass
class Config:
    primes: list[int]
    alpha: float = 1.0
    support_level: int = 2
    resolution_level: int = -2
    eps: float = 1e-12
    seed: int = 0
    level_cap: int = DEFAULT_LEVEL_CAP
    dimension_cap: int = DEFAULT_COSET_CAP
    samples: int = 100_000
    # "sadic", "taibleson:<p>:<n>" or "nadic:<n>"
    filtration: str = "sadic"

    def validate(self) -> Config:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.resolution_level > self.support_level:
            raise ValueError("resolution_level must not exceed support_level")
        if self.level_cap < 1 or self.dimension_cap < 1 or self.samples < 1:
            raise ValueError("caps and sample counts must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.build_filtration()
        return self

    def build_filtration(self) -> Filtration:
        kind, *args = self.filtration.split(":")
        if kind == "sadic":
            return Filtration.sadic(self.primes, level_cap=self.level_cap)
        if kind == "taibleson" and len(args) == 2:
            return taibleson_filtration(int(args[0]), int(args[1]), level_cap=self.level_cap)
        if kind == "nadic" and len(args) == 1:
            return n_adic_filtration(int(args[0]), level_cap=self.level_cap)
        raise ValueError(f"unknown filtration {self.filtration!r}")

    def symbol(self) -> SymbolAlpha:
        return SymbolAlpha(self.alpha, self.build_filtration())


def _coerce(name: str, raw):
    kind = {f.name: f.type for f in fields(Config)}[name]
    if name == "primes":
        if isinstance(raw, str):
            return [int(p) for p in raw.replace(" ", "").split(",") if p]
        return [int(p) for p in raw]
    if kind == "float":
        return float(raw)
    if kind == "int":
        return int(raw)
    return str(raw)


def load_config(path: str | None, overrides: dict, environ=os.environ) -> Config:
    data: dict = {"primes": [2, 3]}
    if path:
        with open(path) as fh:
            data.update(json.load(fh))
    names = {f.name for f in fields(Config)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for name in names:
        env = environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            data[name] = env
    data.update({k: v for k, v in overrides.items() if v is not None})
    return Config(**{k: _coerce(k, v) for k, v in data.items()}).validate()


# -- formatting -------------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, Fraction):
        return fmt(v)
    if isinstance(v, (float, np.floating)):
        return float(format(float(v), ".17g"))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def emit_table(columns: list[str], rows: list[list], out, json_path: str | None) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    if json_path:
        write_json(json_path, [dict(zip(columns, [_jsonable(v) for v in r])) for r in rows])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=1)
        fh.write("\n")


def parse_range(text: str) -> range:
    """``"a:b"`` is inclusive on both ends; a single integer is a one-level range."""
    if ":" in text:
        a, b = text.split(":")
        return range(int(a), int(b) + 1)
    return range(int(text), int(text) + 1)


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


# -- commands ---------------------------------------------------------------------------------


def cmd_radii(cfg: Config, levels: range, out, json_path=None) -> bool:
    f = cfg.build_filtration()
    rows = [[n, f.radius(n), f.radius_float(n), "*".join(map(str, f.ramification_group(n)))]
            for n in levels]
    emit_table(["n", "radius", "radius_float", "ramification"], rows, out, json_path)
    return True


def cmd_spectrum(cfg: Config, levels: range, out, json_path=None) -> bool:
    sym = cfg.symbol()
    rows = [[p.level, sym.filtration.radius(p.level), p.eigenvalue] for p in spectrum(sym, levels)]
    emit_table(["n", "radius", "eigenvalue"], rows, out, json_path)
    return all(a[2] < b[2] for a, b in zip(rows, rows[1:]))


def _read_points(path, f: Filtration) -> list[SAdicPoint]:
    with open(path) as fh:
        data = json.load(fh)
    return [SAdicPoint.from_json(f, p) for p in data]


def cmd_kernel(cfg: Config, ts: list[float], out, levels: range | None = None,
               points_path=None, json_path=None) -> bool:
    sym = cfg.symbol()
    f = sym.filtration
    if points_path:
        xs = [(norm(x), x) for x in _read_points(points_path, f)]
    else:
        levels = levels if levels is not None else range(-6, 7)
        xs = [(f.radius(j), OnSphere(j)) for j in levels]
    rows = []
    ok = True
    for t in ts:
        for nx, x in xs:
            z = heat_kernel(sym, x, t, eps=cfg.eps)
            ok &= z.value > 0
            rows.append([nx, t, z.value, z.tail_bound, z.levels_used])
    emit_table(["x_norm", "t", "Z", "tail_bound", "levels_used"], rows, out, json_path)
    return bool(ok)


def cmd_solve(cfg: Config, f_path, ts: list[float], out_dir, out, source_path=None,
              steps: int = 64, json_path=None) -> bool:
    sym = cfg.symbol()
    fn = funcspace.load(f_path, sym.filtration)
    src = funcspace.load(source_path, sym.filtration) if source_path else None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, t in enumerate(ts):
        if src is None:
            u = evolve(sym, fn, t, eps=cfg.eps)
        elif t == 0:
            u = fn
        else:
            u = duhamel_solve(sym, fn, lambda tau: src, t, steps, eps=cfg.eps)
        name = f"solution_{i:03d}.json"
        funcspace.dump(u, out_dir / name)
        rows.append([t, u.l2_norm(), getattr(u, "tail_bound", 0.0),
                     getattr(u, "exterior_mass", 0.0), name])
    emit_table(["t", "l2_norm", "tail_bound", "exterior_mass", "file"], rows, out, json_path)
    if src is not None:
        return True
    order = sorted(rows, key=lambda r: r[0])
    # contraction: the full-space L2 norm cannot grow; the window view may lose mass outward
    return all(b[1] <= a[1] * (1 + 1e-12) + 1e-15 for a, b in zip(order, order[1:]))


def cmd_sample(cfg: Config, t: float, steps: int, paths: int, out_dir, out,
               support_level: int = 20, resolution: int = -20) -> bool:
    sym = cfg.symbol()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(0.0, t * steps, steps + 1)
    samplers: dict = {}
    tails = 0
    for i in range(paths):
        tr = sample_path(sym, grid, path_rng(cfg.seed, i), support_level, resolution, cfg.eps,
                         seed=cfg.seed, samplers=samplers)
        tails += tr.tail_events
        tr.write_csv(out_dir / f"path_{i:05d}.csv")
    smp = IncrementSampler(sym, t, support_level, resolution, cfg.eps)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2 ** 32]))
    reports = [level_ks_test(smp, cfg.samples, rng),
               symmetry_check(smp, min(cfg.samples, 5000), rng)]
    summary = {"paths": paths, "steps": steps, "dt": t, "tail_events": tails,
               "exterior_mass": smp.exterior_mass, "tests": [r.to_json() for r in reports]}
    write_json(out_dir / "stats.json", summary)
    ok = all(r.passed for r in reports)
    emit_table(["test", "N", "statistic", "p_value", "pass"],
               [[r.test, r.N, r.statistic, "" if r.p_value is None else r.p_value, r.passed]
                for r in reports], out, None)
    return ok


def cmd_verify(cfg: Config, suite: str, out, json_path=None) -> bool:
    checks = run_suite(suite, cfg.symbol(), cfg.seed, cfg.samples,
                       (cfg.support_level, cfg.resolution_level))
    rows = [[c.suite, c.name, c.passed, "" if c.value is None else c.value,
             "" if c.limit is None else c.limit] for c in checks]
    emit_table(["suite", "check", "pass", "value", "limit"], rows, out, None)
    if json_path:
        write_json(json_path, [c.to_json() for c in checks])
    return all(c.passed for c in checks)


# -- argument parsing ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--primes", help="comma separated primes, e.g. 2,3")
    g.add_argument("--alpha", type=float)
    g.add_argument("--support-level", type=int, dest="support_level")
    g.add_argument("--resolution-level", type=int, dest="resolution_level")
    g.add_argument("--eps", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--level-cap", type=int, dest="level_cap")
    g.add_argument("--dimension-cap", type=int, dest="dimension_cap")
    g.add_argument("--samples", type=int)
    g.add_argument("--filtration", help="sadic, taibleson:<p>:<n> or nadic:<n>")
    g.add_argument("--json", dest="json_out", help="also write a JSON mirror here")
    g.add_argument("-o", "--out", help="write the table here instead of stdout")

    p = argparse.ArgumentParser(prog="ultraheat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("radii", parents=[common], help="radius table")
    s.add_argument("--levels", default="-3:5", help="inclusive range a:b")

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalues of D^alpha")
    s.add_argument("--levels", default="1:6", help="inclusive range a:b")

    s = sub.add_parser("kernel", parents=[common], help="heat kernel values")
    s.add_argument("--t", default="0.01,1,100", help="comma separated times")
    s.add_argument("--levels", default="-6:6", help="norm ladder as sphere levels a:b")
    s.add_argument("--points", help="JSON list of points")

    for name in ("solve", "duhamel"):
        s = sub.add_parser(name, parents=[common], help="Cauchy problem" if name == "solve"
                           else "alias of solve with a source term")
        s.add_argument("function", help="function file")
        s.add_argument("--t", default="0,0.1,1")
        s.add_argument("--out-dir", default="solutions")
        s.add_argument("--source", required=name == "duhamel",
                       help="function file used as a time-independent source")
        s.add_argument("--steps", type=int, default=64, help="Simpson panels")

    s = sub.add_parser("sample", parents=[common], help="simulate trajectories")
    s.add_argument("--t", type=float, default=1.0, help="time step")
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--paths", type=int, default=10)
    s.add_argument("--out-dir", default="trajectories")
    s.add_argument("--window", default="20:-20", help="support:resolution levels for increments")

    s = sub.add_parser("verify", parents=[common], help="run a check suite")
    s.add_argument("suite", choices=[*SUITES, "all"])
    return p


CONFIG_KEYS = [f.name for f in fields(Config)]


def main(argv=None, environ=os.environ) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in CONFIG_KEYS}, environ)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    buf = io.StringIO()
    cmd = args.command
    try:
        if cmd == "radii":
            ok = cmd_radii(cfg, parse_range(args.levels), buf, args.json_out)
        elif cmd == "spectrum":
            ok = cmd_spectrum(cfg, parse_range(args.levels), buf, args.json_out)
        elif cmd == "kernel":
            ok = cmd_kernel(cfg, parse_floats(args.t), buf, parse_range(args.levels),
                            args.points, args.json_out)
        elif cmd in ("solve", "duhamel"):
            ok = cmd_solve(cfg, args.function, parse_floats(args.t), args.out_dir, buf,
                           args.source, args.steps, args.json_out)
        elif cmd == "sample":
            k, l = (int(v) for v in args.window.split(":"))
            ok = cmd_sample(cfg, args.t, args.steps, args.paths, args.out_dir, buf, k, l)
        else:
            ok = cmd_verify(cfg, args.suite, buf, args.json_out)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
