"""Monte Carlo rate experiments over an n-grid.

Each (n, rep) cell draws its own cloud from a seed derived from
(master seed, n, rep), fits with the oracle plan or with Lepski selection,
and records the error in both norms. Cells that raise are kept in the record
list with ``failed`` set and left out of the aggregates.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import WeightTriple, assemble_operator, build_graph
from .kernel import KernelSpec, kde_deviation_bound, make_kernel
from .lepski import build_grid, select_from_fits
from .regress import (DEFAULT_C0_EPS, DEFAULT_CAP_EPS, empirical_error, fit_on_operator,
                      make_plan)
from .sampler import (DensitySpec, RegressionSpec, density_from_dict, regression_from_dict,
                      sample_cloud)
from .spectral import eigensolve

__all__ = [
    "ExperimentConfig",
    "LepskiSettings",
    "RateReport",
    "run_experiment",
    "slope_fit",
    "emit_report",
    "cell_seed",
    "DEGENERATE_WERR",
]

DEGENERATE_WERR = 1e-12
REPORT_VERSION = 1


@dataclass(frozen=True)
class LepskiSettings:
    s_min: int = 1
    s_max: int = 3
    M_min: float = 0.2
    M_max: float = 20.0
    c_grid: float = 1.0
    c0: float = 1.0
    relative_M: bool = True  # M bounds are multiples of the true radius


@dataclass(frozen=True)
class ExperimentConfig:
    n_grid: tuple[int, ...]
    reps: int
    density: DensitySpec
    regression: RegressionSpec
    kernel: KernelSpec
    triple: WeightTriple
    mode: str = "oracle"
    s: int | None = None
    M: float | None = None
    lepski: LepskiSettings = field(default_factory=LepskiSettings)
    noise_sd: float = 1.0
    seed: int = 0
    c0_eps: float = DEFAULT_C0_EPS
    C0_eps: float = DEFAULT_CAP_EPS
    workers: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be a nonempty strictly ascending list")
        if grid[0] < 2:
            raise ValueError("every n in n_grid must be at least 2")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.mode not in ("oracle", "lepski"):
            raise ValueError(f"mode must be 'oracle' or 'lepski', got {self.mode!r}")
        object.__setattr__(self, "n_grid", grid)

    @property
    def oracle_s(self) -> int:
        return self.regression.smoothness_s if self.s is None else int(self.s)

    @property
    def oracle_M(self) -> float:
        return self.regression.sobolev_M if self.M is None else float(self.M)

    @property
    def theory_slope(self) -> float:
        s, d = self.oracle_s, self.density.dim
        return -2.0 * s / (2.0 * s + d)

    def to_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid), "reps": self.reps,
            "density": self.density.to_dict(), "regression": self.regression.to_dict(),
            "kernel": self.kernel.kind, "triple": self.triple.to_dict(),
            "mode": self.mode, "s": self.oracle_s, "M": self.oracle_M,
            "lepski": asdict(self.lepski), "noise_sd": self.noise_sd, "seed": self.seed,
            "c0_eps": self.c0_eps, "C0_eps": self.C0_eps,
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        density = density_from_dict(cfg.get("density", {"kind": "uniform"}), cfg.get("dim"))
        return cls(
            n_grid=tuple(cfg["n_grid"]), reps=int(cfg.get("reps", 1)), density=density,
            regression=regression_from_dict(cfg.get("regression", {"name": "cosine_neumann"})),
            kernel=make_kernel(cfg.get("kernel", "uniform"), density.dim),
            triple=WeightTriple.from_dict(cfg.get("triple", {"p": 1, "q": 2, "r": 0})),
            mode=cfg.get("mode", "oracle"), s=cfg.get("s"), M=cfg.get("M"),
            lepski=LepskiSettings(**cfg.get("lepski", {})),
            noise_sd=float(cfg.get("noise_sd", 1.0)), seed=int(cfg.get("seed", 0)),
            c0_eps=float(cfg.get("c0_eps", DEFAULT_C0_EPS)),
            C0_eps=float(cfg.get("C0_eps", DEFAULT_CAP_EPS)),
            workers=int(cfg.get("workers", 1)),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def cell_seed(master: int, n: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(master), int(n), int(rep)]).generate_state(1)[0])


def _oracle_cell(cfg: ExperimentConfig, cloud, cache: dict):
    plan = make_plan(cfg.oracle_s, cfg.oracle_M, cloud.n, cloud.dim,
                     c0_eps=cfg.c0_eps, C0_eps=cfg.C0_eps)
    key = (plan.eps, plan.K)
    if key not in cache:
        op = assemble_operator(build_graph(cloud.X, plan.eps, cfg.kernel, cfg.triple))
        cache[key] = (op, eigensolve(op, plan.K))
    op, basis = cache[key]
    return fit_on_operator(cloud.Y, op, plan, basis=basis)


def _run_cell(cfg: ExperimentConfig, n: int, rep: int) -> dict:
    seed = cell_seed(cfg.seed, n, rep)
    rec = {"n": n, "rep": rep, "seed": seed, "failed": False, "message": ""}
    try:
        cloud = sample_cloud(cfg.density, cfg.regression, n, noise_sd=cfg.noise_sd, seed=seed)
        truth = cloud.truth()
        cache: dict = {}
        oracle = _oracle_cell(cfg, cloud, cache)
        if cfg.mode == "oracle":
            fit = oracle
        else:
            ls = cfg.lepski
            scale = cfg.regression.sobolev_M if ls.relative_M else 1.0
            grid = build_grid(n, ls.s_min, ls.s_max, ls.M_min * scale, ls.M_max * scale, ls.c_grid)
            fits = []
            for s, M in grid.pairs:
                plan = make_plan(s, M, n, cloud.dim, c0_eps=cfg.c0_eps, C0_eps=cfg.C0_eps)
                key = (plan.eps, plan.K)
                if key not in cache:
                    op = assemble_operator(build_graph(cloud.X, plan.eps, cfg.kernel, cfg.triple))
                    cache[key] = (op, eigensolve(op, plan.K))
                op, basis = cache[key]
                fits.append(fit_on_operator(cloud.Y, op, plan, basis=basis))
            sel = select_from_fits(grid, fits, n, cloud.dim, ls.c0)
            fit = sel.fit
            rec.update(s_hat=sel.s_hat, M_hat=sel.M_hat, fallback=sel.fallback,
                       oracle_werr=empirical_error(oracle.fitted, truth, oracle.operator)[0])
        werr, err = empirical_error(fit.fitted, truth, fit.operator)
        lo, hi = fit.operator.norm_equivalence()
        rec.update(werr=werr, err=err, K=fit.plan.K, eps=fit.plan.eps, connected=fit.connected,
                   delta=kde_deviation_bound(n, fit.plan.eps, cfg.kernel, cfg.density.g_max),
                   norm_lo=lo, norm_hi=hi)
    except Exception as exc:  # recorded, never aborts the sweep
        rec.update(failed=True, message=f"{type(exc).__name__}: {exc}")
    return rec


def _run_cell_star(args):
    return _run_cell(*args)


def slope_fit(xs, ys) -> tuple[float, float, float]:
    """OLS of log y on log x; returns (slope, intercept, r2)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("slope_fit needs at least three (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("slope_fit needs strictly positive inputs")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass(frozen=True)
class RateReport:
    config: ExperimentConfig
    records: tuple[dict, ...]
    summary: dict

    @property
    def slope(self) -> float | None:
        return self.summary["slope"]

    def medians(self, key: str = "werr") -> np.ndarray:
        return np.array([row[f"median_{key}"] for row in self.summary["per_n"]], dtype=float)


def _summarize(cfg: ExperimentConfig, records: list[dict]) -> dict:
    per_n = []
    for n in cfg.n_grid:
        ok = [r for r in records if r["n"] == n and not r["failed"]]
        row = {"n": n, "count": len(ok), "failed": sum(r["n"] == n and r["failed"] for r in records)}
        for key in ("werr", "err") + (("oracle_werr",) if cfg.mode == "lepski" else ()):
            vals = np.array([r[key] for r in ok], dtype=float)
            if vals.size:
                q25, med, q75 = np.percentile(vals, [25, 50, 75])
                row.update({f"median_{key}": float(med), f"q25_{key}": float(q25),
                            f"q75_{key}": float(q75)})
            else:
                row.update({f"median_{key}": None, f"q25_{key}": None, f"q75_{key}": None})
        per_n.append(row)
    meds = [row["median_werr"] for row in per_n]
    status, slope, intercept, r2 = "ok", None, None, None
    if any(m is None for m in meds):
        status = "insufficient"
    elif len(meds) < 3:
        status = "too-few-n"
    elif min(meds) < DEGENERATE_WERR:
        status = "degenerate"
    else:
        slope, intercept, r2 = slope_fit(cfg.n_grid, meds)
    theory = cfg.theory_slope
    if meds and meds[0] is not None and meds[0] > 0:
        anchor = meds[0] / cfg.n_grid[0] ** theory
        for row in per_n:
            row["theory"] = float(anchor * row["n"] ** theory)
    else:
        for row in per_n:
            row["theory"] = None
    return {
        "version": REPORT_VERSION, "status": status, "slope": slope, "intercept": intercept,
        "r2": r2, "theory_slope": theory, "per_n": per_n,
        "records": len(records), "failed": sum(r["failed"] for r in records),
        "config": cfg.to_dict(), "config_digest": cfg.digest(),
    }


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> RateReport:
    workers = cfg.workers if workers is None else workers
    env_cap = os.environ.get("PCRWLE_THREADS")
    if env_cap:
        workers = min(workers, max(1, int(env_cap)))
    jobs = [(cfg, n, rep) for n in cfg.n_grid for rep in range(cfg.reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell_star, jobs))
    else:
        records = [_run_cell_star(j) for j in jobs]
    records.sort(key=lambda r: (r["n"], r["rep"]))
    return RateReport(config=cfg, records=tuple(records), summary=_summarize(cfg, records))


_RECORD_FIELDS = ["n", "rep", "seed", "werr", "err", "K", "eps", "connected", "delta",
                  "norm_lo", "norm_hi", "s_hat", "M_hat", "fallback", "oracle_werr",
                  "failed", "message"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def emit_report(report: RateReport, path) -> dict[str, Path]:
    """Write records CSV, summary JSON and curve CSV into directory ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        stem = f"rate_{report.summary['config_digest']}"
        files = {"records": out / f"{stem}_records.csv", "summary": out / f"{stem}_summary.json",
                 "curve": out / f"{stem}_curve.csv"}
        with files["records"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"# pcrwle rate records v{REPORT_VERSION}"])
            w.writerow(_RECORD_FIELDS)
            for rec in report.records:
                w.writerow([_fmt(rec.get(k)) for k in _RECORD_FIELDS])
        files["summary"].write_text(json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
        with files["curve"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "median", "q25", "q75", "theory"])
            for row in report.summary["per_n"]:
                w.writerow([row["n"]] + [_fmt(row[k]) for k in
                                         ("median_werr", "q25_werr", "q75_werr", "theory")])
    except OSError as exc:
        raise OSError(f"could not write report under {out}: {exc}") from exc
    return files

