"""Command-line driver: ``pcrwle {fit,spectrum,lepski,bench,validate}``.

Experiments are described by a JSON config file; ``--set key=value``
overrides single keys (dotted paths reach nested objects, values are parsed
as JSON when possible). Exit codes: 0 success, 1 failed validation check,
2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

log = logging.getLogger("pcrwle")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
SCHEMA_VERSION = 1

_TRIPLE_NAMES = ["unnormalized", "normalized", "random_walk", "q_one"]

# key -> description; drives both the schema docs and --help
CONFIG_KEYS = {
    "version": "schema version, currently 1",
    "seed": "master seed for sampling (default 0)",
    "n": "sample size for fit/spectrum/lepski synthetic data",
    "dim": "ambient dimension d of the unit cube (default 1)",
    "density": "sampling density: {kind: uniform | truncated-mixture | product-polynomial, ...}",
    "regression": "regression function: {name: constant | cosine_neumann | bump_compact | sawtooth_smooth, ...}",
    "noise_sd": "standard deviation of the Gaussian response noise (default 1)",
    "data_csv": "fit only: CSV with columns x_1..x_d, y instead of synthetic data",
    "kernel": "kernel profile: uniform | triangular-decreasing | epanechnikov-profile",
    "triple": "Laplacian weights: a name (" + ", ".join(_TRIPLE_NAMES) + ") or {p, q, r, q_is_one}",
    "s": "smoothness used by the tuning rule (integer >= 1)",
    "M": "Sobolev radius used by the tuning rule (default: catalog value of the regression)",
    "K": "override for the number of eigenvectors (1 <= K <= n)",
    "eps": "override for the graph radius",
    "c0_eps": "constant of the lower radius bound (default 2)",
    "C0_eps": "constant of the upper radius bound K^(-1/d) (default 1)",
    "method": "eigensolver: auto | dense | lanczos",
    "weyl_range": "spectrum only: [k_lo, k_hi] for the log-log eigenvalue slope",
    "lepski": "{s_min, s_max, M_min, M_max, c_grid, c0, relative_M}; relative_M scales M bounds by the true radius",
    "n_grid": "bench only: ascending sample sizes",
    "reps": "bench only: repetitions per sample size",
    "mode": "bench only: oracle | lepski",
    "workers": "bench only: process count (capped by PCRWLE_THREADS)",
    "graphs": "validate only: random graphs per triple",
    "inject_asymmetry": "validate only: test hook that perturbs one weight asymmetrically",
}

_TRIPLE_SCHEMA = {
    "oneOf": [
        {"type": "string", "enum": _TRIPLE_NAMES},
        {"type": "object", "required": ["p", "q", "r"], "additionalProperties": False,
         "properties": {"p": {"type": "number"}, "q": {"type": "number"},
                        "r": {"type": "number"}, "q_is_one": {"type": "boolean"}}},
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "n": {"type": "integer", "minimum": 2},
        "dim": {"type": "integer", "minimum": 1},
        "density": {
            "type": "object", "required": ["kind"],
            "properties": {
                "kind": {"enum": ["uniform", "truncated-mixture", "product-polynomial"]},
                "dim": {"type": "integer", "minimum": 1},
                "w0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "mu": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]},
                "coefs": {"type": "array", "items": {"type": "number"}},
            },
            "additionalProperties": False,
        },
        "regression": {
            "type": "object", "required": ["name"],
            "properties": {
                "name": {"enum": ["constant", "cosine_neumann", "bump_compact", "sawtooth_smooth"]},
                "value": {"type": "number"}, "k": {"type": "integer", "minimum": 1},
                "s": {"type": "integer", "minimum": 1}, "terms": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "noise_sd": {"type": "number", "minimum": 0},
        "data_csv": {"type": "string"},
        "kernel": {"enum": ["uniform", "triangular-decreasing", "epanechnikov-profile"]},
        "triple": _TRIPLE_SCHEMA,
        "s": {"type": "integer", "minimum": 1},
        "M": {"type": "number", "exclusiveMinimum": 0},
        "K": {"type": "integer"},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "c0_eps": {"type": "number", "exclusiveMinimum": 0},
        "C0_eps": {"type": "number", "exclusiveMinimum": 0},
        "method": {"enum": ["auto", "dense", "lanczos"]},
        "weyl_range": {"type": "array", "items": {"type": "integer", "minimum": 1},
                       "minItems": 2, "maxItems": 2},
        "lepski": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "s_min": {"type": "integer", "minimum": 1}, "s_max": {"type": "integer", "minimum": 1},
                "M_min": {"type": "number", "exclusiveMinimum": 0},
                "M_max": {"type": "number", "exclusiveMinimum": 0},
                "c_grid": {"type": "number", "exclusiveMinimum": 0},
                "c0": {"type": "number", "exclusiveMinimum": 0},
                "relative_M": {"type": "boolean"},
            },
        },
        "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "reps": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["oracle", "lepski"]},
        "workers": {"type": "integer", "minimum": 1},
        "graphs": {"type": "integer", "minimum": 1},
        "inject_asymmetry": {"type": "boolean"},
    },
}


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------- #
# config handling


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg: dict = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config key {where}: {exc.message}") from None
    return cfg


def _triple(cfg: dict):
    from .graph import NAMED_TRIPLES, WeightTriple

    spec = cfg.get("triple", "unnormalized")
    if isinstance(spec, str):
        return NAMED_TRIPLES[spec]
    return WeightTriple.from_dict(spec)


def _setup(cfg: dict):
    """Density, regression, kernel and triple from a validated config."""
    from .kernel import make_kernel
    from .sampler import density_from_dict, regression_from_dict

    density = density_from_dict(cfg.get("density", {"kind": "uniform"}), cfg.get("dim"))
    regression = regression_from_dict(cfg.get("regression", {"name": "cosine_neumann"}))
    kernel = make_kernel(cfg.get("kernel", "uniform"), density.dim)
    return density, regression, kernel, _triple(cfg)


def _cloud(cfg: dict, density, regression):
    from .sampler import PointCloud, sample_cloud

    if "data_csv" in cfg:
        X, Y = _read_data(cfg["data_csv"])
        return PointCloud(X=X, Y=Y, seed=None)
    return sample_cloud(density, regression, int(cfg.get("n", 500)),
                        noise_sd=float(cfg.get("noise_sd", 1.0)), seed=int(cfg.get("seed", 0)))


def _read_data(path: str):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read data {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: empty data file")
    header = [h.strip() for h in rows[0]]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    if "y" not in header or not xcols:
        raise ConfigError(f"{path}: need columns x_1..x_d and y")
    try:
        body = np.array([[float(r[i]) for i in xcols + [header.index("y")]] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row: {exc}") from None
    bad = np.nonzero(~np.isfinite(body).all(axis=1))[0]
    if bad.size:
        raise ConfigError(f"{path}: non-finite value in data row {int(bad[0]) + 1}")
    return body[:, :-1], body[:, -1]


def _plan(cfg: dict, regression, n: int, d: int):
    from .regress import DEFAULT_C0_EPS, DEFAULT_CAP_EPS, make_plan

    s = int(cfg.get("s", regression.smoothness_s))
    M = float(cfg.get("M", regression.sobolev_M))
    return make_plan(s, M, n, d, c0_eps=float(cfg.get("c0_eps", DEFAULT_C0_EPS)),
                     C0_eps=float(cfg.get("C0_eps", DEFAULT_CAP_EPS)),
                     K=cfg.get("K"), eps=cfg.get("eps"))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --------------------------------------------------------------------------- #
# subcommands; each returns (exit code, list of written files)


def cmd_fit(cfg: dict, out: Path):
    from .graph import assemble_operator, build_graph
    from .regress import dump_fit, empirical_error, fit_on_operator

    density, regression, kernel, triple = _setup(cfg)
    cloud = _cloud(cfg, density, regression)
    plan = _plan(cfg, regression, cloud.n, cloud.dim)
    if kernel.dim != cloud.dim:
        from .kernel import make_kernel
        kernel = make_kernel(kernel.kind, cloud.dim)

    def run():
        op = assemble_operator(build_graph(cloud.X, plan.eps, kernel, triple))
        return fit_on_operator(cloud.Y, op, plan, method=cfg.get("method", "auto"))

    fit = _numeric(run)
    meta = {"plan": plan.to_dict(), "triple": triple.to_dict(), "kernel": kernel.to_dict(),
            "connected": fit.connected, "eigenvalues": fit.basis.eigenvalues,
            "coefficients": fit.coefficients, "source": cfg.get("data_csv", "synthetic")}
    if "data_csv" not in cfg:
        werr, err = empirical_error(fit.fitted, cloud.truth(), fit.operator)
        meta.update(werr=werr, err=err, density=density.to_dict(), regression=regression.to_dict())
    files = [out / "fit.csv", out / "fit.json"]
    dump_fit(fit, cloud, files[0])
    _write_json(files[1], meta)
    return EXIT_OK, files


def cmd_spectrum(cfg: dict, out: Path):
    from .graph import assemble_operator, build_graph
    from .spectral import eigensolve, weyl_slope

    density, regression, kernel, triple = _setup(cfg)
    cloud = _cloud(cfg, density, regression)
    plan = _plan(cfg, regression, cloud.n, cloud.dim)

    def run():
        op = assemble_operator(build_graph(cloud.X, plan.eps, kernel, triple))
        return op, eigensolve(op, plan.K, method=cfg.get("method", "auto"))

    op, basis = _numeric(run)
    k_lo, k_hi = cfg.get("weyl_range", [2, plan.K])
    slope = None
    if 2 <= k_lo < k_hi <= basis.K and basis.eigenvalues[k_lo - 1] > 0:
        slope = weyl_slope(basis, k_lo, k_hi)
    elif "weyl_range" in cfg:
        raise ConfigError(f"weyl_range {cfg['weyl_range']} needs 2 <= k_lo < k_hi <= K={basis.K}")
    files = [out / "spectrum.csv", out / "spectrum.json"]
    basis.dump(files[0])
    _write_json(files[1], {"plan": plan.to_dict(), "triple": triple.to_dict(),
                           "components": op.graph.components()[0], "method": basis.method,
                           "weyl_range": [k_lo, k_hi], "weyl_slope": slope,
                           "lambda_2": basis.eigenvalues[1] if basis.K > 1 else None,
                           "max_residual": float(basis.residuals.max())})
    return EXIT_OK, files


def cmd_lepski(cfg: dict, out: Path):
    from .lepski import build_grid, comparison_table, select
    from .regress import DEFAULT_C0_EPS, DEFAULT_CAP_EPS, dump_fit, empirical_error

    density, regression, kernel, triple = _setup(cfg)
    cloud = _cloud(cfg, density, regression)
    ls = {"s_min": 1, "s_max": 3, "M_min": 0.2, "M_max": 20.0, "c_grid": 1.0, "c0": 1.0,
          "relative_M": True, **cfg.get("lepski", {})}
    scale = regression.sobolev_M if ls["relative_M"] else 1.0
    grid = build_grid(cloud.n, ls["s_min"], ls["s_max"], ls["M_min"] * scale,
                      ls["M_max"] * scale, ls["c_grid"])
    sel = _numeric(lambda: select(grid, cloud, triple, kernel, c0=ls["c0"],
                                  c0_eps=float(cfg.get("c0_eps", DEFAULT_C0_EPS)),
                                  C0_eps=float(cfg.get("C0_eps", DEFAULT_CAP_EPS)),
                                  method=cfg.get("method", "auto")))
    report = sel.to_dict()
    report["comparisons"] = comparison_table(sel)
    if sel.fallback:
        report["warning"] = "no admissible grid entry; fell back to the first entry"
        log.warning(report["warning"])
    if "data_csv" not in cfg:
        report["werr"], report["err"] = empirical_error(sel.fit.fitted, cloud.truth(), sel.fit.operator)
    files = [out / "lepski_selection.json", out / "lepski_fit.csv"]
    _write_json(files[0], report)
    dump_fit(sel.fit, cloud, files[1])
    return EXIT_OK, files


def cmd_bench(cfg: dict, out: Path):
    from .bench import ExperimentConfig, emit_report, run_experiment

    bcfg = dict(cfg)
    if isinstance(bcfg.get("triple"), str):
        bcfg["triple"] = _triple(cfg).to_dict()
    if "n_grid" not in bcfg:
        raise ConfigError("bench needs n_grid")
    exp = ExperimentConfig.from_dict(bcfg)
    report = _numeric(lambda: run_experiment(exp))
    files = list(emit_report(report, out).values())
    log.info("slope %s (theory %.4f), status %s", report.slope, exp.theory_slope,
             report.summary["status"])
    return EXIT_OK, files


def cmd_validate(cfg: dict, out: Path):
    from .checks import run_suite
    from .graph import NAMED_TRIPLES

    triples = dict(NAMED_TRIPLES)
    if isinstance(cfg.get("triple"), dict):
        triples["configured"] = _triple(cfg)  # q_is_one mismatches surface as config errors
    results = _numeric(lambda: run_suite(graphs=int(cfg.get("graphs", 3)),
                                         seed=int(cfg.get("seed", 0)), triples=triples,
                                         fault=bool(cfg.get("inject_asymmetry", False))))
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed checks: " + ", ".join(failed))
        return EXIT_CHECK, []
    return EXIT_OK, []


COMMANDS = {"fit": cmd_fit, "spectrum": cmd_spectrum, "lepski": cmd_lepski,
            "bench": cmd_bench, "validate": cmd_validate}


class NumericalError(Exception):
    pass


def _numeric(fn):
    """Run a computation, mapping numerical failures to NumericalError."""
    from .oracle import OracleError
    from .sampler import SamplerError
    from .spectral import EigensolverError

    try:
        return fn()
    except (EigensolverError, OracleError, SamplerError, FloatingPointError,
            np.linalg.LinAlgError, ValueError, ZeroDivisionError) as exc:
        raise NumericalError(f"{type(exc).__name__}: {exc}") from exc


# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:<18} {v}" for k, v in CONFIG_KEYS.items())
    epilog = ("config keys (JSON object, all optional):\n" + keys
              + "\n\nexit codes: 0 ok, 1 failed check, 2 config error, 3 numerical error, 4 I/O error"
              + "\nenvironment: PCRWLE_THREADS caps worker processes and BLAS threads")
    parser = argparse.ArgumentParser(prog="pcrwle", description=__doc__.splitlines()[0],
                                     epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter,
                           help=f"run the {name} pipeline")
        p.add_argument("--config", "-c", help="JSON config file")
        p.add_argument("--out", "-o", default=".", help="output directory (default: .)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key (repeatable)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _cap_threads() -> None:
    cap = os.environ.get("PCRWLE_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def main(argv: list[str] | None = None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
        out = Path(args.out)
        if args.command != "validate":
            out.mkdir(parents=True, exist_ok=True)
        code, files = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # raised while turning the config into specs and plans
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in files:
        print(f)
    return code


if __name__ == "__main__":
    sys.exit(main())
