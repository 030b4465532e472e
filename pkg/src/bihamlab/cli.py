"""Command-line driver: ``bihamlab {verify, integrate, oracle, bench}``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags (flags win).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import hierarchy as hy
from .brackets import StatePoint
from .errors import BihamError, ConfigError, RegularityLost, SingularValueCollision
from .linalg_core import MIN_GAP
from .observables import Hamiltonian, parse
from .sampling import random_state, rng_for
from .suites import RATIO_STEPS, SUITES, oracle_trial, ratio_excess, run_suite

COMMANDS = ("verify", "integrate", "oracle", "bench")


@dataclass
class RunConfig:
    n: int = 3
    seed: int = 0
    trials: int = 50
    min_gap: float = MIN_GAP
    suite: str = "all"
    tol: float | None = None
    m: int = 1
    l: int | None = None
    t: float = 0.2
    steps: int = 2000
    ratio_steps: int = RATIO_STEPS
    samples: int | None = None
    K: int = 4
    observables: list = field(default_factory=list)
    q: list | None = None
    L: list | None = None
    out: str | None = None
    json: str | None = None

    def validate(self) -> "RunConfig":
        if not 2 <= self.n <= 8:
            raise ConfigError(f"n must be in 2..8, got {self.n}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.ratio_steps < 1:
            raise ConfigError("ratio_steps must be >= 1")
        if self.m < 1 or (self.l is not None and self.l < 1):
            raise ConfigError("flow indices must be >= 1")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tolerances must be positive")
        if not self.min_gap > 0:
            raise ConfigError("min_gap must be positive")
        if self.samples is not None and (self.samples < 1 or self.steps % self.samples):
            raise ConfigError("samples must divide steps")
        for name in self.suite_names():
            if name not in SUITES:
                raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
        if (self.q is None) != (self.L is None):
            raise ConfigError("q and L must be given together")
        return self

    def suite_names(self) -> list[str]:
        if self.suite == "all":
            return list(SUITES)
        return [s.strip() for s in self.suite.split(",") if s.strip()]

    def initial_state(self, trial: int = 0) -> StatePoint:
        if self.q is not None:
            try:
                return StatePoint(np.asarray(self.q, float), np.asarray(self.L, complex), self.min_gap)
            except (ValueError, BihamError) as exc:
                raise ConfigError(f"invalid initial state: {exc}") from exc
        return random_state(self.n, rng_for(self.seed, trial), min_gap=self.min_gap)


def _convert(name: str, raw: str):
    kinds = {f.name: f for f in fields(RunConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    try:
        if name in ("n", "seed", "trials", "m", "l", "steps", "ratio_steps", "samples", "K"):
            return int(raw)
        if name in ("min_gap", "tol", "t"):
            return float(raw)
        if name == "observables":
            return [s.strip() for s in raw.split(";") if s.strip()]
        if name in ("q", "L"):
            return _complexify(json.loads(raw))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def _complexify(obj):
    # JSON has no complex numbers; accept strings such as "1+2j"
    if isinstance(obj, list):
        return [_complexify(x) for x in obj]
    if isinstance(obj, str):
        return complex(obj.replace(" ", ""))
    return obj


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _convert(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bihamlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--n", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--suite", help=f"comma-separated subset of: {', '.join(SUITES)}; or 'all'")
    parser.add_argument("--m", type=int, help="flow index")
    parser.add_argument("--l", type=int, help="second flow index (commutator suite)")
    parser.add_argument("--t", type=float, help="final time")
    parser.add_argument("--steps", type=int, help="RK4 steps")
    parser.add_argument("--tol", type=float, help="override every tolerance of the selected suites")
    parser.add_argument("--config", help="file of key = value lines")
    parser.add_argument("--out", help="CSV output path (integrate)")
    parser.add_argument("--json", help="append a JSON line per result to this file")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values = read_config(args.config) if args.config else {}
    for name in ("n", "seed", "trials", "suite", "m", "l", "t", "steps", "tol", "out", "json"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.3e}"


class _Json:
    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8") if path else None

    def write(self, record: dict):
        if self.fh:
            self.fh.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self):
        if self.fh:
            self.fh.close()


# --- commands -------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    sink = _Json(cfg.json)
    options = {"pairs": ((cfg.m, cfg.l),) if cfg.l is not None else None}
    ok_all = True
    print(f"{'suite':<14} {'check':<28} {'residual':>10} {'tol':>10}  result", file=out)
    try:
        for name in cfg.suite_names():
            rep = run_suite(name, cfg.n, cfg.trials, cfg.seed, cfg.tol, options=options)
            for check, val, tol, ok in rep.checks:
                print(f"{name:<14} {check:<28} {val:>10.3e} {tol:>10.1e}  {'PASS' if ok else 'FAIL'}", file=out)
            sink.write(rep.as_dict())
            ok_all &= rep.passed
    finally:
        sink.close()
    print(f"overall: {'PASS' if ok_all else 'FAIL'} (n={cfg.n}, trials={cfg.trials}, seed={cfg.seed})", file=out)
    return 0 if ok_all else 1


def _hk(L: np.ndarray, k: int) -> float:
    return float(np.trace(np.linalg.matrix_power(L, k)).real) / k


def cmd_integrate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    p0 = cfg.initial_state()
    n = p0.n
    try:
        obs = [(text, parse(text)) for text in cfg.observables]
    except ValueError as exc:
        raise ConfigError(f"bad observable: {exc}") from exc
    header = ["t"] + [f"q_{j + 1}" for j in range(n)] + [f"H_{k}" for k in range(1, cfg.K + 1)] + [t for t, _ in obs]
    samples = cfg.samples or cfg.steps
    rows = []
    aborted = None
    try:
        for time_, pt in hy.trajectory(cfg.m, p0, cfg.t, cfg.steps, samples):
            row = [time_, *pt.q, *(_hk(pt.L, k) for k in range(1, cfg.K + 1)), *(F.evaluate(pt.q, pt.L) for _, F in obs)]
            rows.append(row)
    except RegularityLost as exc:
        aborted = exc
    fh = open(cfg.out, "w", newline="", encoding="utf-8") if cfg.out else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    finally:
        if cfg.out:
            fh.close()
    h0 = [_hk(p0.L, k) for k in range(1, cfg.K + 1)]
    drifts = [max(abs(r[1 + n + k] - h0[k]) for r in rows) / (1 + abs(h0[k])) for k in range(cfg.K)]
    info = out if cfg.out else sys.stderr
    for k, d in enumerate(drifts, 1):
        print(f"drift H_{k}: {d:.3e}", file=info)
    sink = _Json(cfg.json)
    sink.write({"command": "integrate", "drifts": drifts, "aborted_at": None if aborted is None else aborted.t})
    sink.close()
    if aborted is not None:
        print(f"error: trajectory left the alcove at t = {aborted.t:.6g}: {aborted}", file=sys.stderr)
        return 1
    return 0


def cmd_oracle(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    tol = cfg.tol if cfg.tol is not None else 1e-8
    sink = _Json(cfg.json)
    trials = 1 if cfg.q is not None else cfg.trials
    ok_all = True
    print(f"{'trial':>5} {'discrepancy':>12} {'ratio':>8} {'spectrum':>10}  result", file=out)
    try:
        for i in range(trials):
            p0 = cfg.initial_state(i)
            try:
                r = oracle_trial(cfg.n, None, cfg.m, cfg.t, cfg.steps, cfg.ratio_steps, p=p0)
            except SingularValueCollision as exc:
                print(f"{i:>5} singular value collision after retries with perturbed t: {exc}", file=out)
                ok_all = False
                continue
            ok = r["discrepancy"] <= tol and ratio_excess(r["ratio"]) == 0.0 and r["spectrum"] <= 1e-10
            ok_all &= ok
            ratio = "n/a" if r["ratio"] is None else f"{r['ratio']:.2f}"
            print(f"{i:>5} {r['discrepancy']:>12.3e} {ratio:>8} {r['spectrum']:>10.2e}  {'PASS' if ok else 'FAIL'}", file=out)
            sink.write({"command": "oracle", "trial": i, "passed": ok, **r})
    finally:
        sink.close()
    print(
        f"overall: {'PASS' if ok_all else 'FAIL'} (m={cfg.m}, t={cfg.t}, steps={cfg.steps}, "
        f"ratio from {cfg.ratio_steps}/{2 * cfg.ratio_steps} steps)",
        file=out,
    )
    return 0 if ok_all else 1


def cmd_bench(cfg: RunConfig, out=None) -> int:
    """Wall-clock time per suite (not deterministic by nature)."""
    out = out or sys.stdout
    sink = _Json(cfg.json)
    trials = min(cfg.trials, 5)
    for name in cfg.suite_names():
        start = time.perf_counter()
        rep = run_suite(name, cfg.n, trials, cfg.seed, cfg.tol)
        dt = time.perf_counter() - start
        print(f"{name:<14} {dt / trials * 1e3:9.1f} ms/trial  {'PASS' if rep.passed else 'FAIL'}", file=out)
        sink.write({"command": "bench", "suite": name, "seconds_per_trial": dt / trials})
    sink.close()
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        handler = {"verify": cmd_verify, "integrate": cmd_integrate, "oracle": cmd_oracle, "bench": cmd_bench}[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
