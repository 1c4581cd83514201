"""Command-line front end.

Every subcommand writes ``<output>/<subcommand>.csv`` (samples, or
``.samples.json`` with ``--format json``) and ``<output>/<subcommand>.summary.json``.
Exit codes: 0 success, 1 acceptance failure, 2 invalid configuration,
3 budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from . import limit_lab as ll
from . import mean_field_sim as mfs
from .acceptance import PROFILES, AcceptanceRun
from .core_random import MASK64, RandomStream
from .exact_laws import expected_slow_count, stein_chen_bound
from .stats_kit import (IntegerHistogram, ks_against_cdf, ks_two_sample, normal_cdf,
                        poisson_pmf, tv_integer)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

# per-subcommand stream labels; never renumber
LABELS = {"two-point": 1, "flooding": 2, "diameter": 3, "hopcount": 4, "joint": 5,
          "poisson-check": 6, "xi": 7, "q-tail": 8, "moments": 9}

COMMANDS = list(LABELS) + ["verify"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 1
    n: int = 1000
    replicates: int = 100
    alpha: float = 1.0
    gamma: float = 1.0
    inner: float = 4.0
    outer: float = 4.0
    mode: str = "candidate"
    candidates: int | None = None
    budget: int = mfs.DEFAULT_EXACT_BUDGET
    m: int = 3
    delta: float = 1e-6
    x: list | None = None
    resamples: int = 1000
    reference_draws: int = 10_000
    profile: str = "quick"
    workers: int = 1
    output: str = "."
    format: str = "csv"

    def validate(self) -> None:
        if not 0 <= self.seed <= MASK64:
            raise ConfigError("seed must fit in 64 bits")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.mode not in ("exact", "candidate"):
            raise ConfigError("mode must be exact or candidate")
        if self.candidates is not None and self.candidates < 2:
            raise ConfigError("candidates must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {sorted(PROFILES)}")
        if not self.gamma > 0 or not self.outer > 0:
            raise ConfigError("gamma and outer must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.m < 2:
            raise ConfigError("m must be at least 2")
        if self.resamples < 100:
            raise ConfigError("resamples must be at least 100")
        if self.reference_draws < 1:
            raise ConfigError("reference-draws must be at least 1")
        if self.x is not None and not all(v > 0 for v in self.x):
            raise ConfigError("x values must be positive")


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def version_string() -> str:
    """``git describe`` of the source checkout when available, else the package version."""
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file of option values; flags take precedence")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--workers", type=int, help="processes; does not change the output")
    common.add_argument("--output", help="output directory (default: current)")
    common.add_argument("--format", help="samples file format: csv or json")

    p = argparse.ArgumentParser(prog="mfdiam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mfdiam {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "two-point": "distance between two fixed vertices",
        "flooding": "largest distance from a fixed vertex",
        "diameter": "weighted diameter",
        "hopcount": "edges on the lightest path; maximal hop count",
        "joint": "joint recentred distances among m fixed vertices",
        "poisson-check": "number of slow vertices against its Poisson law",
        "xi": "samples of the limit variable Xi",
        "q-tail": "samples of Q and tail estimates of P(Q > x)",
        "moments": "mean and variance of Xi with bootstrap intervals",
        "verify": "run the acceptance suite",
    }
    subs = {name: sub.add_parser(name, parents=[common], help=h, argument_default=S)
            for name, h in helps.items()}
    subs["diameter"].add_argument("--mode", help="exact or candidate")
    subs["diameter"].add_argument("--candidates", type=int)
    subs["diameter"].add_argument("--budget", type=int, help="largest n allowed in exact mode")
    subs["diameter"].add_argument("--reference-draws", type=int)
    subs["joint"].add_argument("--m", type=int)
    subs["poisson-check"].add_argument("--alpha", type=float)
    for name in ("xi", "moments"):
        subs[name].add_argument("--gamma", type=float)
        subs[name].add_argument("--inner", type=float)
        subs[name].add_argument("--outer", type=float)
    subs["moments"].add_argument("--resamples", type=int)
    subs["q-tail"].add_argument("--delta", type=float)
    subs["q-tail"].add_argument("--x", type=float, nargs="+")
    subs["verify"].add_argument("--profile", help=f"one of {sorted(PROFILES)}")
    return p


def resolve_config(ns: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key not in _FIELDS:
                raise ConfigError(f"unknown config key {k!r}")
            values[key] = v
    for k, v in vars(ns).items():
        if k in _FIELDS:
            values[k] = v
    try:
        cfg = ExperimentConfig(**values)
        for f in fields(ExperimentConfig):
            v = getattr(cfg, f.name)
            if f.name in ("seed", "n", "replicates", "candidates", "budget", "m", "resamples",
                          "reference_draws", "workers") and v is not None:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError(f"{f.name} must be an integer")
    except TypeError as err:
        raise ConfigError(str(err)) from err
    cfg.validate()
    return cfg


# -- output -------------------------------------------------------------------

def _plain(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def write_outputs(cfg: ExperimentConfig, command: str, header: list[str], rows: list,
                  stats: dict, wall: float) -> None:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        with open(out / f"{command}.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for v in _plain(list(row))])
    else:
        recs = [dict(zip(header, _plain(list(r)))) for r in rows]
        (out / f"{command}.samples.json").write_text(json.dumps(recs, indent=1) + "\n",
                                                     encoding="utf-8")
    summary = {"command": command, "seed": cfg.seed, "n": cfg.n, "replicates": cfg.replicates,
               "version": version_string(), "wall_seconds": round(wall, 3),
               "config": _plain({k: v for k, v in asdict(cfg).items()
                                 if k not in ("output", "workers")}),
               "statistics": _plain(stats)}
    (out / f"{command}.summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- subcommands ----------------------------------------------------------------

def _stream(cfg: ExperimentConfig, command: str) -> RandomStream:
    return RandomStream(cfg.seed).derive(LABELS[command])


def _moments(x: np.ndarray) -> dict:
    x = np.asarray(x, dtype=float)
    return {"mean": float(x.mean()), "variance": float(x.var(ddof=1)) if x.size > 1 else 0.0}


def _reference(stream: RandomStream, kind: str, draws: int) -> np.ndarray:
    ref = stream.derive(10 ** 9)
    if kind == "d2":
        return ll.sample_d_entries(ref, 2, draws)[:, 0]
    if kind == "gumbel2":
        return ref.sampler().gumbel(2 * draws).reshape(2, -1).sum(axis=0)
    return np.array([s.value for s in ll.sample_xi_many(ref, draws) if s.stable])


def cmd_two_point(cfg, st):
    v = np.asarray(ex.run_replicates(ex.bind(ex.two_point_replicate, n=cfg.n), st,
                                     cfg.replicates, cfg.workers))
    rc = v - math.log(cfg.n)
    stats = _moments(rc) | {"ks_vs_limit": ks_two_sample(rc, _reference(st, "d2", 100_000))}
    rows = [(r, v[r], rc[r]) for r in range(v.size)]
    return ["replicate", "value", "recentered"], rows, stats


def cmd_flooding(cfg, st):
    v = np.asarray(ex.run_replicates(ex.bind(ex.flooding_replicate, n=cfg.n), st,
                                     cfg.replicates, cfg.workers))
    rc = v - 2 * math.log(cfg.n)
    stats = _moments(rc) | {"ks_vs_limit": ks_two_sample(rc, _reference(st, "gumbel2", 100_000))}
    rows = [(r, v[r], rc[r]) for r in range(v.size)]
    return ["replicate", "value", "recentered"], rows, stats


def cmd_diameter(cfg, st):
    if cfg.mode == "exact" and cfg.n > cfg.budget:
        raise mfs.BudgetExceeded(f"n={cfg.n} exceeds the exact-mode budget {cfg.budget}")
    fn = ex.bind(ex.diameter_replicate, n=cfg.n, mode=cfg.mode, candidates=cfg.candidates,
                 budget=cfg.budget)
    res = ex.run_replicates(fn, st, cfg.replicates, cfg.workers)
    ln3 = 3 * math.log(cfg.n)
    rc = np.array([d.value for d in res]) - ln3
    stats = _moments(rc) | {"ks_vs_xi": ks_two_sample(rc, _reference(st, "xi",
                                                                     cfg.reference_draws))}
    rows = [(r, d.value, d.value - ln3, d.pair[0], d.pair[1], d.mode) for r, d in enumerate(res)]
    return ["replicate", "value", "recentered", "source_i", "source_j", "mode"], rows, stats


def cmd_hopcount(cfg, st):
    res = ex.run_replicates(ex.bind(ex.hopcount_replicate, n=cfg.n), st, cfg.replicates,
                            cfg.workers)
    typ = np.array([a for a, _ in res], dtype=float)
    mx = np.array([b for _, b in res], dtype=float)
    ln = math.log(cfg.n)
    stats = {"typical": _moments(typ), "max": _moments(mx),
             "ks_normalized_vs_normal": ks_against_cdf((typ - ln) / math.sqrt(ln), normal_cdf),
             "max_over_log_n_mean": float(mx.mean() / ln), "alpha_star": mfs.alpha_star()}
    rows = [(r, a, b) for r, (a, b) in enumerate(res)]
    return ["replicate", "typical", "max"], rows, stats


def cmd_joint(cfg, st):
    if cfg.m > cfg.n:
        raise ConfigError("m exceeds n")
    res = ex.run_replicates(ex.bind(ex.joint_replicate, n=cfg.n, m=cfg.m), st, cfg.replicates,
                            cfg.workers)
    rows = []
    for r, (arr, _) in enumerate(res):
        for a in range(cfg.m - 1):
            for b in range(a + 1, cfg.m):
                rows.append((r, a, b, arr[a, b]))
    first = np.array([arr[0, 1] for arr, _ in res])
    stats = {"interior_hit_fraction": float(np.mean([h for _, h in res])),
             "pair_01": _moments(first),
             "ks_pair_01_vs_limit": ks_two_sample(first, _reference(st, "d2", 100_000))}
    return ["replicate", "a", "b", "recentered"], rows, stats


def cmd_poisson_check(cfg, st):
    counts = ex.run_replicates(ex.bind(ex.slow_count_replicate, n=cfg.n, alpha=cfg.alpha), st,
                               cfg.replicates, cfg.workers)
    mu = expected_slow_count(cfg.n, cfg.alpha)
    tv = tv_integer(IntegerHistogram.from_values(counts), lambda k: poisson_pmf(k, mu))
    stats = _moments(counts) | {"poisson_mean": mu, "tv": tv,
                                "stein_chen_bound": stein_chen_bound(cfg.n, cfg.alpha)}
    return ["replicate", "count"], list(enumerate(counts)), stats


def cmd_xi(cfg, st):
    fn = ex.bind(ex.xi_replicate, gamma=cfg.gamma, inner=cfg.inner, outer=cfg.outer)
    res = ex.run_replicates(fn, st, cfg.replicates, cfg.workers)
    vals = np.array([s.value for s in res if s.stable])
    stats = {"stable_fraction": float(np.mean([s.stable for s in res]))}
    if vals.size:
        stats |= _moments(vals)
    rows = [(r, s.value, int(s.stable)) for r, s in enumerate(res)]
    return ["replicate", "value", "stable"], rows, stats


def cmd_q_tail(cfg, st):
    q = np.asarray(ex.run_replicates(ex.bind(ex.q_replicate, delta=cfg.delta), st,
                                     cfg.replicates, cfg.workers))
    tails = {}
    for x in cfg.x or [0.5, 1.0, 2.0]:
        d = ll.tail_q_direct(q, x)
        pr = ll.tail_q_product(st.derive(10 ** 9), x, replicates=cfg.replicates)
        tails[repr(float(x))] = {"direct": d.estimate, "direct_se": d.std_error,
                                 "product": pr.estimate, "product_se": pr.std_error,
                                 "lower_bound": ll.tail_q_lower_bound(x).estimate}
    return ["replicate", "value"], list(enumerate(q)), {"tails": tails}


def cmd_moments(cfg, st):
    if cfg.replicates < 100:
        raise ConfigError("moments needs at least 100 replicates")
    fn = ex.bind(ex.xi_replicate, gamma=cfg.gamma, inner=cfg.inner, outer=cfg.outer)
    res = ex.run_replicates(fn, st.derive(0), cfg.replicates, cfg.workers)
    m = ll.moments_from_samples(res, st.derive(1), cfg.resamples)
    rows = [(r, s.value, int(s.stable)) for r, s in enumerate(res)]
    return ["replicate", "value", "stable"], rows, asdict(m)


HANDLERS = {"two-point": cmd_two_point, "flooding": cmd_flooding, "diameter": cmd_diameter,
            "hopcount": cmd_hopcount, "joint": cmd_joint, "poisson-check": cmd_poisson_check,
            "xi": cmd_xi, "q-tail": cmd_q_tail, "moments": cmd_moments}


def run(command: str, cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    if command == "verify":
        acc = AcceptanceRun(cfg.profile, cfg.seed, cfg.workers)
        results = []
        for k in range(1, 13):
            res = acc.run(k)
            print(res.line(), flush=True)
            results.append(res)
        ok = all(r.passed for r in results)
        rows = [(r.number, r.title, int(r.passed)) for r in results]
        stats = {"profile": cfg.profile, "all_passed": ok,
                 "criteria": [r.as_dict() for r in results]}
        write_outputs(cfg, command, ["criterion", "title", "passed"], rows, stats,
                      time.perf_counter() - t0)
        return EXIT_OK if ok else EXIT_FAIL
    header, rows, stats = HANDLERS[command](cfg, _stream(cfg, command))
    write_outputs(cfg, command, header, rows, stats, time.perf_counter() - t0)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as err:  # argparse has already printed usage to stderr
        return EXIT_CONFIG if err.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve_config(ns)
        return run(ns.command, cfg)
    except ConfigError as err:
        print(f"mfdiam {ns.command}: invalid configuration: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except mfs.BudgetExceeded as err:
        print(f"mfdiam {ns.command}: budget exhausted: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except ll.TooUnstable as err:
        print(f"mfdiam {ns.command}: truncation too shallow: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
