"""Batch runs over an (n, m) grid, CSV records, and power-law fits."""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import initialization as ini
from . import solver as sv
from .errors import EllipfeasError, InsufficientData, InvalidInput
from .generators import GenSpec, generate
from .problem import Certificate, Kind, Status, read_vector, verify_certificate, write_vector

HEADER = ("n", "m", "class", "seed", "init", "alg", "status", "iterations", "drops",
          "decreases", "refactorizations", "runtime_ms")

RATIOS = (1.4, 2.0, 2.8, 4.0)
DESK_N = (30, 60, 125)
LARGE_N = (250, 500)
INITS = ("bigm", "fv", "twophase")
ALGS = ("sea", "sea-oldlb", "sea-nodec", "oea")


def algorithm_config(alg: str, **overrides) -> sv.SolverConfig:
    """Solver settings behind each algorithm label."""
    base = {
        "sea": dict(algorithm="sea"),
        "sea-oldlb": dict(algorithm="sea", bound_rule="old"),
        "sea-nodec": dict(algorithm="sea", allow_decrease=False),
        "oea": dict(algorithm="oea"),
    }
    if alg not in base:
        raise InvalidInput(f"unknown algorithm label {alg!r}")
    opts = dict(base[alg], record_trace=False)
    opts.update(overrides)
    return sv.SolverConfig(**opts)


def applicable(init: str, alg: str) -> bool:
    # the two-phase start is only defined for the standard algorithm
    return not (init == "twophase" and alg == "oea")


def grid_cells(ns: Sequence[int], ratios: Sequence[float] = RATIOS) -> List[Tuple[int, int]]:
    return [(n, int(round(r * n))) for n in ns for r in ratios]


def parse_grid(text: str) -> List[Tuple[int, int]]:
    """``desk``, ``full``, or explicit ``NxM`` pairs separated by commas."""
    text = text.strip()
    if text == "desk":
        return grid_cells(DESK_N)
    if text == "full":
        return grid_cells(DESK_N + LARGE_N)
    cells = []
    for part in text.split(","):
        try:
            n, m = part.lower().split("x")
            cells.append((int(n), int(m)))
        except ValueError:
            raise InvalidInput(f"bad grid cell {part!r}; expected NxM") from None
    return cells


@dataclass(frozen=True)
class RunRecord:
    n: int
    m: int
    cls: str
    seed: int
    init: str
    alg: str
    status: str
    iterations: int
    drops: int
    decreases: int
    refactorizations: int
    runtime_ms: float

    def key(self):
        return (self.n, self.m, self.cls, self.seed, self.init, self.alg)

    def row(self) -> List[str]:
        vals = list(astuple(self))
        vals[-1] = f"{self.runtime_ms:.3f}"
        return [str(v) for v in vals]

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "RunRecord":
        return cls(int(row["n"]), int(row["m"]), row["class"], int(row["seed"]), row["init"],
                   row["alg"], row["status"], int(row["iterations"]), int(row["drops"]),
                   int(row["decreases"]), int(row["refactorizations"]), float(row["runtime_ms"]))


@dataclass(frozen=True)
class Job:
    spec: GenSpec
    init: str
    alg: str
    deterministic: bool = False
    max_iter: Optional[int] = None


def certificate_name(spec: GenSpec, init: str, alg: str) -> str:
    return f"{spec.cls}_n{spec.n}_m{spec.m}_s{spec.seed}_{init}_{alg}.txt"


def run_one(job: Job):
    """Run one cell; failures become a status, never an exception."""
    P, _ = generate(job.spec)
    cfg = algorithm_config(job.alg, max_iter=job.max_iter)
    t0 = time.perf_counter()
    cert = None
    try:
        out = ini.solve(P, job.init, cfg)
        status, stats = out.status.value, out.stats
        if out.status == Status.INFEASIBLE and out.certificate is not None:
            cert = out.certificate.x
    except EllipfeasError:
        status, stats = Status.NUMERICAL_FAILURE.value, None
    ms = 0.0 if job.deterministic else (time.perf_counter() - t0) * 1000.0
    s = job.spec
    rec = RunRecord(s.n, s.m, s.cls, s.seed, job.init, job.alg, status,
                    stats.iterations if stats else 0, stats.drops if stats else 0,
                    stats.decreases if stats else 0, stats.refactorizations if stats else 0, ms)
    return rec, cert


def build_jobs(cells, inits, algs, seeds, classes=("feasible", "infeasible"), deterministic=False,
               max_iter=None) -> List[Job]:
    jobs = []
    for n, m in cells:
        for cls in classes:
            for seed in seeds:
                spec = GenSpec(n, m, cls, seed)
                for init in inits:
                    for alg in algs:
                        if applicable(init, alg):
                            jobs.append(Job(spec, init, alg, deterministic, max_iter))
    return jobs


def run_suite(cells, inits=("bigm",), algs=("sea",), seeds: Iterable[int] = range(10),
              out: Optional[Path] = None, classes=("feasible", "infeasible"), deterministic: bool = False,
              jobs: int = 1, max_iter: Optional[int] = None, progress=None) -> List[RunRecord]:
    """Run every applicable (cell, class, seed, init, alg) combination.

    Records come back sorted, so the CSV does not depend on scheduling.
    Certificates of infeasible outcomes go to ``<out stem>_certs/`` next to
    the CSV.  Two-phase with the OEA is skipped as not applicable.
    """
    for i in inits:
        if i not in INITS:
            raise InvalidInput(f"unknown init {i!r}")
    todo = build_jobs(cells, inits, algs, list(seeds), classes, deterministic, max_iter)
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(run_one, todo):
                results.append(res)
                if progress:
                    progress(res[0])
    else:
        for job in todo:
            res = run_one(job)
            results.append(res)
            if progress:
                progress(res[0])
    results.sort(key=lambda r: r[0].key())
    records = [r for r, _ in results]
    if out is not None:
        out = Path(out)
        write_records(records, out)
        cdir = certificate_dir(out)
        for rec, cert in results:
            if cert is None:
                continue
            cdir.mkdir(parents=True, exist_ok=True)
            spec = GenSpec(rec.n, rec.m, rec.cls, rec.seed)
            with open(cdir / certificate_name(spec, rec.init, rec.alg), "w") as fh:
                write_vector(cert, fh)
    return records


def certificate_dir(csv_path: Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + "_certs")


def write_records(records: Sequence[RunRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in records:
            w.writerow(r.row())


def read_records(path: Path) -> List[RunRecord]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != HEADER:
            raise InvalidInput(f"unexpected CSV header {rd.fieldnames}")
        return [RunRecord.from_row(row) for row in rd]


def reverify_certificates(path: Path) -> Dict[str, bool]:
    """Reload every stored certificate and check it against a regenerated instance."""
    out = {}
    for rec in read_records(path):
        if rec.status != Status.INFEASIBLE.value:
            continue
        spec = GenSpec(rec.n, rec.m, rec.cls, rec.seed)
        name = certificate_name(spec, rec.init, rec.alg)
        f = certificate_dir(path) / name
        if not f.exists():
            out[name] = False
            continue
        with open(f) as fh:
            x = read_vector(fh)
        P, _ = generate(spec)
        out[name] = verify_certificate(P, None, Certificate(x, Kind.ONE_SIDED))
    return out


def aggregate(records: Sequence[RunRecord]) -> List[dict]:
    """Mean iterations per (n, m) with one column per (init, alg, class)."""
    groups: Dict[Tuple[int, int], Dict[str, List[int]]] = {}
    for r in records:
        col = f"{r.init}/{r.alg}/{'feas' if r.cls == 'feasible' else 'infeas'}"
        groups.setdefault((r.n, r.m), {}).setdefault(col, []).append(r.iterations)
    rows = []
    for (n, m) in sorted(groups):
        row = {"n": n, "m": m}
        for col, its in sorted(groups[(n, m)].items()):
            row[col] = float(np.mean(its))
        rows.append(row)
    return rows


def format_table(rows: List[dict]) -> str:
    cols = sorted({k for r in rows for k in r if k not in ("n", "m")})
    lines = ["n\tm\t" + "\t".join(cols)]
    for r in rows:
        lines.append(f"{r['n']}\t{r['m']}\t" + "\t".join(
            f"{r[c]:.1f}" if c in r else "-" for c in cols))
    return "\n".join(lines)


def fit_power_law(records: Sequence[RunRecord], predictor: str = "m") -> Tuple[float, float]:
    """Least squares of ln(iterations) on ln(predictor); returns (coefficient, exponent).

    Runs with zero iterations carry no information on a log scale and are left out.
    """
    if predictor not in ("n", "m"):
        raise InvalidInput("predictor must be 'n' or 'm'")
    xs, ys = [], []
    for r in records:
        if r.iterations > 0:
            xs.append(math.log(getattr(r, predictor)))
            ys.append(math.log(r.iterations))
    if len(set(xs)) < 3:
        raise InsufficientData("need at least three distinct predictor values")
    slope, intercept = np.polyfit(np.array(xs), np.array(ys), 1)
    return float(math.exp(intercept)), float(slope)


def geometric_mean_ratio(records: Sequence[RunRecord], num_alg: str, den_alg: str) -> float:
    """Geometric mean of iterations(num)/iterations(den) over runs present for both labels."""
    by = {}
    for r in records:
        by[(r.n, r.m, r.cls, r.seed, r.init, r.alg)] = r.iterations
    logs = []
    for (n, m, c, s, i, a), it in by.items():
        if a != num_alg:
            continue
        other = by.get((n, m, c, s, i, den_alg))
        if other and it > 0:
            logs.append(math.log(it / other))
    if not logs:
        raise InsufficientData("no paired runs")
    return float(math.exp(np.mean(logs)))


__all__ = ["HEADER", "RATIOS", "DESK_N", "LARGE_N", "INITS", "ALGS", "RunRecord", "Job",
           "algorithm_config", "applicable", "grid_cells", "parse_grid", "run_one", "build_jobs",
           "run_suite", "write_records", "read_records", "reverify_certificates", "aggregate",
           "format_table", "fit_power_law", "geometric_mean_ratio", "certificate_dir"]
