"""Benchmark orchestration: configs, per-seed runs, CSV/JSON emission."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .generators import generate
from .geometry import CostFunction, Marginals, PointSet
from .lsh import LshScheme
from .metrics import CSV_FIELDS, compare_plans
from .nystrom import LandmarkMethod
from .pointio import read_points
from .sinkhorn import head_lambdas, sinkhorn
from .variants import Budget, BuildOptions, Variant, build_operator

log = logging.getLogger(__name__)

REFERENCE_MAX_ENTRIES = 10**6
THREADS_ENV = "LCN_OT_THREADS"
GENERATORS = ("uniform-ball", "clustered", "file")


@dataclass
class RunConfig:
    """Everything needed to reproduce a benchmark run.

    ``problem`` holds ``generator`` plus its parameters; for ``file`` it holds
    ``paths = [p_path, q_path]``. ``budget`` is either ``{"total": k}``, split
    per variant, or explicit ``neighbors``/``landmarks``.
    """

    problem: dict = field(default_factory=lambda: {"generator": "uniform-ball", "n": 500, "d": 16})
    variants: list = field(default_factory=lambda: [v.value for v in Variant])
    lam: float = 0.05
    budget: dict = field(default_factory=lambda: {"total": 40})
    cost: str = CostFunction.EUCLIDEAN.value
    lsh: dict = field(default_factory=dict)
    landmark_method: str | None = None
    bp: dict = field(default_factory=lambda: {"enabled": False, "deletion_cost": float("inf")})
    heads: int = 1
    tol: float | None = None
    max_iters: int = 500
    seeds: list = field(default_factory=lambda: [0])
    output: str | None = None
    strict: bool = False

    def validate(self) -> "RunConfig":
        gen = self.problem.get("generator")
        if gen not in GENERATORS:
            raise ConfigError(f"problem.generator must be one of {GENERATORS}, got {gen!r}")
        if (gen == "file") != ("paths" in self.problem):
            raise ConfigError("exactly one problem source: a generator or a pair of point files")
        if gen == "file" and len(self.problem["paths"]) != 2:
            raise ConfigError("file problems need exactly two paths")
        if gen != "file" and "n" not in self.problem:
            raise ConfigError("generated problems need n")
        if not self.variants:
            raise ConfigError("no variants selected")
        try:
            for v in self.variants:
                self.budget_for(v)
            self.options()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.heads < 1 or self.max_iters < 1:
            raise ConfigError("heads and max_iters must be at least 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        return self

    def budget_for(self, variant) -> Budget:
        variant = Variant(variant)
        b = self.budget
        if "total" in b:
            if set(b) != {"total"}:
                raise ConfigError("budget: give either total or neighbors/landmarks")
            return Budget.split(variant, int(b["total"]))
        bud = Budget(int(b.get("neighbors", 0)), int(b.get("landmarks", 0)))
        missing = []
        if variant in (Variant.SPARSE, Variant.LCN) and bud.neighbors < 1:
            missing.append("neighbors")
        if variant in (Variant.NYSTROM, Variant.LCN) and bud.landmarks < 1:
            missing.append("landmarks")
        if missing:
            raise ConfigError(f"budget for {variant.value} needs positive {' and '.join(missing)}")
        return bud

    def options(self) -> BuildOptions:
        lsh = dict(self.lsh)
        unknown = set(lsh) - {"scheme", "rows_per_band", "bands", "kmeans_iters", "branching"}
        if unknown:
            raise ConfigError(f"unknown lsh keys {sorted(unknown)}")
        scheme = lsh.pop("scheme", None)
        dc = self.bp.get("deletion_cost", float("inf"))
        return BuildOptions(
            cost=CostFunction.parse(self.cost),
            lsh_scheme=None if scheme is None else LshScheme(scheme),
            landmark_method=None if self.landmark_method is None else LandmarkMethod(self.landmark_method),
            bp=bool(self.bp.get("enabled", False)),
            deletion_cost=tuple(dc) if isinstance(dc, list) else dc,
            **lsh,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc


@dataclass
class RunRecord:
    variant: str
    seed: int
    n: int
    m: int
    lam: float
    budget: int
    head: int = 0
    distance: float | None = None
    iters: int | None = None
    converged: bool | None = None
    marginal_err: float | None = None
    rel_err_d: float | None = None
    pcc: float | None = None
    iou: float | None = None
    ms_kernel: float | None = None
    ms_ot: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_row(self) -> dict:
        vals = dict(variant=self.variant, n=self.n, m=self.m, budget=self.budget, iters=self.iters,
                    rel_err_d=self.rel_err_d, pcc=self.pcc, iou=self.iou, ms_kernel=self.ms_kernel,
                    ms_ot=self.ms_ot, **{"lambda": self.lam})
        return {k: ("" if vals[k] is None else vals[k]) for k in CSV_FIELDS}


def load_problem(cfg: RunConfig, seed: int) -> tuple[PointSet, PointSet, Marginals]:
    prob = dict(cfg.problem)
    kind = prob.pop("generator")
    if kind == "file":
        p_path, q_path = prob["paths"]
        P, Q = read_points(p_path), read_points(q_path)
        return P, Q, Marginals.uniform(P.n, Q.n)
    return generate(kind, prob, seed)


def worker_count(strict: bool = False) -> int:
    if strict:
        return 1
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    return k


def _ms(t0: float, strict: bool) -> float | None:
    return None if strict else round(1e3 * (time.perf_counter() - t0), 3)


def _run_seed(cfg: RunConfig, seed: int) -> list[RunRecord]:
    opts = cfg.options()
    P, Q, marg = load_problem(cfg, seed)
    records = []
    for head, lam in enumerate(head_lambdas(cfg.heads, cfg.lam) if cfg.heads > 1 else [cfg.lam]):
        lam = float(lam)
        ref, ref_ms = None, None
        if P.n * Q.n <= REFERENCE_MAX_ENTRIES:
            try:
                ref_op = build_operator(Variant.FULL, P, Q, lam, Budget(), opts, seed)
                t0 = time.perf_counter()
                ref = sinkhorn(ref_op, marg, cfg.tol, cfg.max_iters)
                ref_ms = _ms(t0, cfg.strict)
            except Exception as exc:  # reference failure only drops the metrics
                log.warning("reference solve failed (seed %d, lambda %g): %s", seed, lam, exc)
        for v in cfg.variants:
            bud = cfg.budget_for(v)
            rec = RunRecord(Variant(v).value, seed, P.n, Q.n, lam, bud.total, head)
            try:
                t0 = time.perf_counter()
                op = build_operator(v, P, Q, lam, bud, opts, seed)
                rec.ms_kernel = _ms(t0, cfg.strict)
                if ref is not None and Variant(v) is Variant.FULL:
                    res, rec.ms_ot = ref, ref_ms
                else:
                    t0 = time.perf_counter()
                    res = sinkhorn(op, marg, cfg.tol, cfg.max_iters, check_support=False)
                    rec.ms_ot = _ms(t0, cfg.strict)
                rec.distance, rec.iters = float(res.distance), res.iters
                rec.converged, rec.marginal_err = bool(res.converged), float(res.marginal_err)
                if ref is not None:
                    cmp = compare_plans(ref.plan, res.plan, ref.distance, res.distance)
                    rec.rel_err_d, rec.pcc, rec.iou = cmp.rel_err_d, cmp.pcc, cmp.iou
            except Exception as exc:
                rec.error = f"variant={rec.variant} seed={seed} lambda={lam:g}: {type(exc).__name__}: {exc}"
                log.error(rec.error)
            records.append(rec)
    return records


def run(cfg: RunConfig) -> list[RunRecord]:
    """Run every (seed, variant) pair; a failing variant is recorded, not raised.

    Output order is seed-major, then head, then the configured variant order,
    regardless of worker scheduling.
    """
    cfg.validate()
    workers = worker_count(cfg.strict)
    if workers == 1 or len(cfg.seeds) == 1:
        per_seed = [_run_seed(cfg, s) for s in cfg.seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(lambda s: _run_seed(cfg, s), cfg.seeds))
    records = [r for rs in per_seed for r in rs]
    if cfg.output:
        write_outputs(records, cfg.output, cfg)
    return records


def sweep(cfg: RunConfig, sizes) -> list[RunRecord]:
    """``run`` repeated over problem sizes ``n = m = size``."""
    if cfg.problem.get("generator") == "file":
        raise ConfigError("sweeps need a generated problem")
    out = []
    for n in sizes:
        sub = dataclasses.replace(cfg, problem={**cfg.problem, "n": int(n), "m": int(n)}, output=None)
        out.extend(run(sub))
    if cfg.output:
        write_outputs(out, cfg.output, cfg)
    return out


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            if not r.failed:
                w.writerow(r.csv_row())


def write_outputs(records, output, cfg: RunConfig | None = None) -> tuple[Path, Path]:
    """Write ``<output>.csv`` and ``<output>.json``; failed runs appear only in the JSON."""
    base = Path(output)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    write_csv(records, csv_path)
    payload = {"config": cfg.to_dict() if cfg else None, "records": [dataclasses.asdict(r) for r in records]}
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return csv_path, json_path
