"""Command-line entry point: ``lcn-ot {generate,run,sweep,theorem-check}``.

Exit status is 0 on success, 1 on a configuration error and 2 when any
variant (or theorem check) fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError
from .generators import generate
from .metrics import kernel_error_study, iteration_bound_study, sinkhorn_error_study
from .pointio import write_points
from .runner import RunConfig, run, sweep

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

SCENARIOS = {
    "clustered": lambda **kw: kernel_error_study("clustered", **kw),
    "uniform-manifold": lambda **kw: kernel_error_study("uniform-manifold", **kw),
    "iteration-bound": iteration_bound_study,
    "sinkhorn-error": sinkhorn_error_study,
}


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _problem_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--generator", choices=["uniform-ball", "clustered"])
    g.add_argument("--points", nargs=2, metavar=("P_FILE", "Q_FILE"), help="load point sets instead of generating")
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--d", type=int, help="ambient dimension")
    g.add_argument("--clusters", type=int, help="cluster count c")
    g.add_argument("--center-distance", type=float, help="minimum center spacing D")
    g.add_argument("--radius", type=float, help="cluster radius r")


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON RunConfig; flags override its fields")
    _problem_args(p)
    p.add_argument("--variants", nargs="+", choices=["full", "sparse", "nystrom", "lcn"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--budget", type=int, help="total budget, split per variant")
    p.add_argument("--neighbors", type=int)
    p.add_argument("--landmarks", type=int)
    p.add_argument("--cost", choices=["euclidean", "negative-dot", "cosine-derived"])
    p.add_argument("--lsh-scheme", choices=["cross-polytope", "kmeans", "hierarchical-kmeans"])
    p.add_argument("--rows-per-band", type=int)
    p.add_argument("--bands", type=int)
    p.add_argument("--kmeans-iters", type=int)
    p.add_argument("--branching", type=int)
    p.add_argument("--landmark-method", choices=["kmeans", "kmeans++-sampling"])
    p.add_argument("--bp", action="store_true", default=None, help="unbalanced transport via the BP extension")
    p.add_argument("--deletion-cost", type=float)
    p.add_argument("--heads", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--seeds", nargs="+", type=int)
    p.add_argument("--output", help="output path prefix; writes .csv and .json")
    p.add_argument("--strict", action="store_true", default=None,
                   help="single worker, no timings; output is byte-identical across runs")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lcn-ot", description="Sparse, Nyström and LCN Sinkhorn benchmarks.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a generated point-set pair")
    _problem_args(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-p", type=Path, required=True)
    g.add_argument("--out-q", type=Path, required=True)
    g.add_argument("--binary", action="store_true")

    _run_args(sub.add_parser("run", help="run variants over seeds"))
    s = sub.add_parser("sweep", help="run over a list of problem sizes")
    _run_args(s)
    s.add_argument("--sizes", nargs="+", type=int, required=True)

    t = sub.add_parser("theorem-check", help="kernel-error and convergence studies")
    t.add_argument("--scenario", choices=sorted(SCENARIOS), required=True)
    t.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("--output", type=Path)
    return ap


def _problem_from_args(a, base: dict | None) -> dict:
    if a.points and a.generator:
        raise ConfigError("exactly one problem source: --generator or --points")
    if a.points:
        return {"generator": "file", "paths": list(a.points)}
    prob = dict(base) if base and not a.generator else {}
    if a.generator:
        prob["generator"] = a.generator
    for key, val in (("n", a.n), ("m", a.m), ("d", a.d), ("c", a.clusters), ("D", a.center_distance),
                     ("r", a.radius)):
        if val is not None:
            prob[key] = val
    if "generator" not in prob:
        prob["generator"] = "uniform-ball"
    if prob["generator"] == "clustered":
        missing = [k for k in ("c", "D", "r") if k not in prob]
        if missing:
            raise ConfigError(f"clustered problems need {', '.join(missing)}")
    if "n" not in prob:
        raise ConfigError("--n is required for generated problems")
    return prob


def config_from_args(a) -> RunConfig:
    if a.config:
        try:
            cfg = RunConfig.from_json(a.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {a.config}: {exc}") from exc
    else:
        cfg = RunConfig()
    has_problem = any(v is not None for v in (a.generator, a.points, a.n, a.m, a.d, a.clusters,
                                                a.center_distance, a.radius))
    if has_problem or not a.config:
        cfg.problem = _problem_from_args(a, cfg.problem if a.config else None)
    if a.budget is not None and (a.neighbors is not None or a.landmarks is not None):
        raise ConfigError("--budget conflicts with --neighbors/--landmarks")
    if a.budget is not None:
        cfg.budget = {"total": a.budget}
    elif a.neighbors is not None or a.landmarks is not None:
        cfg.budget = {k: v for k, v in (("neighbors", a.neighbors), ("landmarks", a.landmarks)) if v is not None}
    lsh = dict(cfg.lsh)
    for key in ("rows_per_band", "bands", "kmeans_iters", "branching"):
        if getattr(a, key) is not None:
            lsh[key] = getattr(a, key)
    if a.lsh_scheme:
        lsh["scheme"] = a.lsh_scheme
    cfg.lsh = lsh
    bp = dict(cfg.bp)
    if a.bp:
        bp["enabled"] = True
    if a.deletion_cost is not None:
        bp["deletion_cost"] = a.deletion_cost
    cfg.bp = bp
    for key, attr in (("variants", "variants"), ("lam", "lam"), ("cost", "cost"), ("heads", "heads"),
                      ("tol", "tol"), ("max_iters", "max_iters"), ("seeds", "seeds"), ("output", "output"),
                      ("strict", "strict"), ("landmark_method", "landmark_method")):
        val = getattr(a, attr)
        if val is not None:
            setattr(cfg, key, val)
    return cfg.validate()


def _parse_param(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
    try:
        return key.replace("-", "_"), json.loads(raw)
    except json.JSONDecodeError:
        return key.replace("-", "_"), raw


def _cmd_generate(a) -> int:
    prob = _problem_from_args(a, None)
    if prob["generator"] == "file":
        raise ConfigError("generate needs --generator, not --points")
    kind = prob.pop("generator")
    try:
        P, Q, _ = generate(kind, prob, a.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_points(a.out_p, P, binary=a.binary)
    write_points(a.out_q, Q, binary=a.binary)
    print(f"wrote {P.n}x{P.dim} to {a.out_p} and {Q.n}x{Q.dim} to {a.out_q}")
    return EXIT_OK


def _summarize(records) -> int:
    for r in records:
        if r.failed:
            print(f"FAIL {r.error}", file=sys.stderr)
        else:
            print(f"{r.variant:8s} seed={r.seed} n={r.n} m={r.m} lambda={r.lam:g} d={r.distance:.6g} "
                  f"iters={r.iters} pcc={r.pcc if r.pcc is None else round(r.pcc, 4)}")
    return EXIT_FAILED if any(r.failed for r in records) else EXIT_OK


def _cmd_run(a) -> int:
    return _summarize(run(config_from_args(a)))


def _cmd_sweep(a) -> int:
    if any(s < 1 for s in a.sizes):
        raise ConfigError("sizes must be positive")
    return _summarize(sweep(config_from_args(a), a.sizes))


def _cmd_theorem(a) -> int:
    params = dict(_parse_param(p) for p in a.param)
    try:
        report = SCENARIOS[a.scenario](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {a.scenario}: {exc}") from exc
    text = json.dumps(report.to_dict(), indent=2, default=float)
    if a.output:
        a.output.parent.mkdir(parents=True, exist_ok=True)
        a.output.write_text(text)
    print(text)
    return EXIT_OK if report.ok else EXIT_FAILED


COMMANDS = {"generate": _cmd_generate, "run": _cmd_run, "sweep": _cmd_sweep, "theorem-check": _cmd_theorem}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
