"""Command-line interface: ``twinclust {fit,sweep,eval,kernel-bank}``.

Exit codes: 0 on success, 2 for usage or input errors, 3 for numerical
failures. Settings come from built-in defaults, then an optional INI config
file (``--config``), then command-line flags, later sources winning. The
default output directory can be set with ``TWINCLUST_OUTPUT_DIR``.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import KMeansConfig, kernel_kmeans, kmeans, spectral_clustering
from .dataio import load_csv, read_labels, standardize, write_labels
from .exceptions import DataIOError, InvalidConfig, LengthMismatch, NumericalError, TwinClustError
from .kernels import (
    KernelBank,
    bank_from_specs,
    cached_bank,
    check_bank,
    data_fingerprint,
    kernel_from_spec,
    parse_kernel_spec,
)
from .metrics import evaluate
from .scmk import ScmkConfig, fit_scmk
from .scsk import ScskConfig, fit_scsk

logger = logging.getLogger("twinclust")

OUTPUT_ENV = "TWINCLUST_OUTPUT_DIR"
ALGORITHMS = ("scsk", "scmk", "kkm", "sc", "kmeans")
DEFAULT_ALPHA_GRID = (1e-5, 1e-4, 1e-3, 0.01, 0.1, 1, 10, 100)
DEFAULT_BETA_GRID = (1e-6, 1e-5)


@dataclass
class RunConfig:
    data: str | None = None
    label_column: str | None = None
    algo: str = "scsk"
    kernels: list = field(default_factory=lambda: ["gaussian:t=1"])
    alpha: float = 0.1
    beta: float = 1e-5
    c: int | None = None
    tol: float = 1e-6
    max_outer: int = 100
    seed: int = 0
    restarts: int = 20
    out: str | None = None
    beta_autotune: bool = False
    check_psd: bool = False
    standardize: bool = False
    save_matrices: bool = False
    cache_dir: str | None = None
    qp_tol: float = 1e-8
    qp_max_iter: int = 1000
    nmi_average: str = "geometric"

    def validate(self):
        if self.algo not in ALGORITHMS:
            raise InvalidConfig(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if not self.data:
            raise InvalidConfig("a dataset path is required (--data)")
        if self.algo in ("scsk", "scmk") and not (self.alpha > 0 and self.beta > 0):
            raise InvalidConfig("alpha and beta must be positive")
        if self.algo in ("scsk", "kkm", "sc"):
            if len(self.kernels) != 1 or parse_kernel_spec(self.kernels[0])[0] == "bank":
                raise InvalidConfig(f"{self.algo} takes exactly one non-bank kernel")
        for spec in self.kernels:
            parse_kernel_spec(spec)
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    if name == "kernels":
        if isinstance(value, str):
            return [s.strip() for s in value.replace("\n", ";").split(";") if s.strip()]
        return list(value)
    if kind == "bool":
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    try:
        if kind.startswith("int"):
            return int(value)
        if kind == "float":
            return float(value)
    except (TypeError, ValueError):
        raise InvalidConfig(f"invalid value {value!r} for {name}") from None
    return str(value)


def read_config_file(path):
    """Flatten every section of an INI file into one ``RunConfig`` key map.

    Keys may use dashes or underscores; unknown keys are an error.
    """
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"no such config file: {path}")
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        raw = doc.get("config", doc)
    else:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string("[DEFAULT]\n" + path.read_text())
        except configparser.Error as exc:
            raise InvalidConfig(f"cannot parse {path}: {exc}") from exc
        raw = dict(parser.defaults())
        for section in parser.sections():
            raw.update({k: v for k, v in parser.items(section)})
    out = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in _FIELD_TYPES:
            raise InvalidConfig(f"unknown config key {key!r} in {path}")
        out[name] = _coerce(name, value)
    return out


def resolve_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for name in _FIELD_TYPES:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = _coerce(name, flag)
    return RunConfig(**values)


def output_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out or os.environ.get(OUTPUT_ENV) or "twinclust-out")


def versions():
    import scipy
    import sklearn

    return {
        "twinclust": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _load(cfg: RunConfig):
    data = load_csv(cfg.data, cfg.label_column)
    if cfg.standardize:
        data = standardize(data)
    return data


def _n_clusters(cfg, data):
    if cfg.c is not None:
        return cfg.c
    if data.labels is None:
        raise InvalidConfig("cluster count --c is required when the data has no labels")
    return int(data.labels.max()) + 1


def _bank(cfg, X):
    if cfg.cache_dir:
        bank = cached_bank(X, cfg.kernels, cfg.cache_dir, rescale=cfg.algo == "scmk")
    elif cfg.algo == "scmk":
        bank = bank_from_specs(X, cfg.kernels)
    else:
        K, desc = kernel_from_spec(X, cfg.kernels[0])
        bank = KernelBank(K[None], [desc])
    return check_bank(bank, check_psd=cfg.check_psd)


def run_fit(cfg: RunConfig, out: Path, data=None):
    """Run one configured fit and write its artifacts into ``out``.

    Returns a summary dict (also stored in the manifest).
    """
    cfg.validate()
    data = data if data is not None else _load(cfg)
    X = data.values
    c = _n_clusters(cfg, data)
    summary = {}
    result = None
    descriptors = []
    if cfg.algo == "kmeans":
        labels, inertia = kmeans(X, KMeansConfig(k=c, restarts=cfg.restarts, seed=cfg.seed))
        summary["inertia"] = inertia
    else:
        bank = _bank(cfg, X)
        descriptors = list(bank.descriptors)
        common = dict(
            alpha=cfg.alpha,
            beta=cfg.beta,
            c=c,
            tol=cfg.tol,
            max_outer=cfg.max_outer,
            seed=cfg.seed,
            beta_autotune=cfg.beta_autotune,
            qp_tol=cfg.qp_tol,
            qp_max_iter=cfg.qp_max_iter,
            restarts=cfg.restarts,
        )
        kcfg = KMeansConfig(k=c, restarts=cfg.restarts, seed=cfg.seed)
        if cfg.algo == "scsk":
            result = fit_scsk(bank[0], ScskConfig(**common))
        elif cfg.algo == "scmk":
            result = fit_scmk(bank, ScmkConfig(**common))
        elif cfg.algo == "kkm":
            labels, obj = kernel_kmeans(bank[0], kcfg, return_objective=True)
            summary["objective"] = obj
        else:
            labels = spectral_clustering(bank[0], c, kcfg)
        if result is not None:
            labels = result.labels
            summary.update(
                n_iter=result.n_iter,
                converged=result.converged,
                components_found=result.components_found,
                label_source=result.label_source,
                final_objective=result.objective_trace[-1],
                final_beta=result.beta_trace[-1],
            )

    out.mkdir(parents=True, exist_ok=True)
    write_labels(labels, out / "labels.txt")
    if result is not None:
        (out / "trace.txt").write_text("".join(f"{v!r}\n" for v in result.objective_trace))
        if cfg.save_matrices:
            np.save(out / "Z.npy", result.Z)
            np.save(out / "P.npy", result.P)
        if result.weights is not None:
            w = result.weights
            (out / "weights.txt").write_text(
                "".join(f"{d}={v!r}\n" for d, v in zip(descriptors, w))
            )
            summary["weights"] = dict(zip(descriptors, map(float, w)))
            summary["weights_sqrt_sum"] = float(np.sqrt(w).sum())
    if data.labels is not None:
        report = evaluate(labels, data.labels, average=cfg.nmi_average)
        (out / "metrics.txt").write_text(report.to_lines())
        summary["metrics"] = report.as_dict()
    manifest = {
        "config": asdict(cfg),
        "n_clusters": c,
        "n_samples": data.n,
        "n_features": data.D,
        "data_sha256": data_fingerprint(X),
        "kernel_descriptors": descriptors,
        "versions": versions(),
        "result": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return summary


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InvalidConfig(f"invalid grid {text!r}") from None


def _sweep_cell(cfg: RunConfig, root: str, alpha: float, beta: float):
    out = Path(root) / f"alpha={alpha:g}_beta={beta:g}"
    cell = RunConfig(**{**asdict(cfg), "alpha": alpha, "beta": beta, "out": str(out)})
    row = {"alpha": alpha, "beta": beta, "status": "ok", "error": ""}
    try:
        summary = run_fit(cell, out)
    except TwinClustError as exc:
        row.update(status="failed", error=f"{exc.category}: {exc}")
        return row
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        row.update(status="failed", error=f"NumericalError: {exc}")
        return row
    row.update(summary.get("metrics", {}))
    row["n_iter"] = summary.get("n_iter", "")
    row["components_found"] = summary.get("components_found", "")
    return row


SWEEP_COLUMNS = ("alpha", "beta", "status", "acc", "nmi", "purity", "n_iter", "components_found", "error")


def run_sweep(cfg: RunConfig, alphas, betas, out: Path, jobs=1):
    """One fit per (alpha, beta) cell, each in its own directory.

    Failed cells are reported with ``status=failed`` and the sweep goes on.
    Writes ``sweep.csv`` in long format and returns the rows.
    """
    if not alphas or not betas:
        raise InvalidConfig("sweep grids must be non-empty")
    if cfg.algo not in ("scsk", "scmk"):
        raise InvalidConfig("sweep applies to scsk or scmk")
    if not cfg.data:
        raise InvalidConfig("a dataset path is required (--data)")
    cells = [(a, b) for a in alphas for b in betas]
    out.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_cell, cfg, str(out), a, b) for a, b in cells]
            rows = [f.result() for f in futures]
    else:
        rows = [_sweep_cell(cfg, str(out), a, b) for a, b in cells]
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells_out = []
        for col in SWEEP_COLUMNS:
            v = row.get(col, "")
            if isinstance(v, float):
                v = f"{v:.6g}"
            cells_out.append(str(v).replace(",", ";"))
        lines.append(",".join(cells_out))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return rows


def cmd_fit(args):
    if args.from_manifest:
        args.config = args.from_manifest
    cfg = resolve_config(args)
    out = output_dir(cfg)
    summary = run_fit(cfg, out)
    print(f"wrote {out}")
    if "metrics" in summary:
        for k, v in summary["metrics"].items():
            print(f"{k}={v:.6f}")
    return 0


def cmd_sweep(args):
    cfg = resolve_config(args)
    alphas = _float_list(args.alpha_grid) if args.alpha_grid else list(DEFAULT_ALPHA_GRID)
    betas = _float_list(args.beta_grid) if args.beta_grid else list(DEFAULT_BETA_GRID)
    out = output_dir(cfg)
    rows = run_sweep(cfg, alphas, betas, out, jobs=args.jobs)
    print(Path(out / "sweep.csv").read_text(), end="")
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        print(f"{failed} of {len(rows)} cells failed", file=sys.stderr)
    return 0


def cmd_eval(args):
    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    if pred.size != truth.size:
        raise LengthMismatch(f"{args.pred} has {pred.size} labels, {args.truth} has {truth.size}")
    report = evaluate(pred, truth, average=args.nmi_average)
    print(report.to_table())
    text = report.to_lines()
    print(text, end="")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "metrics.txt").write_text(text)
    return 0


def cmd_kernel_bank(args):
    cfg = resolve_config(args)
    if not cfg.data:
        raise InvalidConfig("a dataset path is required (--data)")
    data = _load(cfg)
    cache = cfg.cache_dir or str(output_dir(cfg) / "kernel-cache")
    bank = cached_bank(data.values, cfg.kernels, cache, rescale=not args.no_rescale)
    check_bank(bank, check_psd=cfg.check_psd)
    for d in bank.descriptors:
        print(d)
    print(f"cached {bank.r} kernels ({bank.n}x{bank.n}) in {cache}")
    return 0


def _add_run_options(p):
    p.add_argument("--config", help="INI config file (flags override it)")
    p.add_argument("--data", help="CSV dataset")
    p.add_argument("--labels", dest="label_column", help="label column name or index (e.g. -1)")
    p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--kernel", dest="kernels", action="append", help="kernel spec; repeat for a bank")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--c", type=int, help="number of clusters (default: number of label classes)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./twinclust-out)")
    p.add_argument("--cache-dir", help="directory for cached kernel matrices")
    p.add_argument("--qp-tol", type=float)
    p.add_argument("--qp-max-iter", type=int)
    p.add_argument("--nmi-average", choices=("geometric", "arithmetic"))
    for flag in ("beta-autotune", "check-psd", "standardize", "save-matrices"):
        p.add_argument(f"--{flag}", action="store_const", const=True, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="twinclust", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model and write labels, metrics, trace and manifest")
    _add_run_options(p)
    p.add_argument("--from-manifest", help="rerun the configuration stored in a manifest.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="fit over an alpha x beta grid and write sweep.csv")
    _add_run_options(p)
    p.add_argument("--alpha-grid", help="comma-separated alphas")
    p.add_argument("--beta-grid", help="comma-separated betas")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="score a label file against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.add_argument("--nmi-average", choices=("geometric", "arithmetic"), default="geometric")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kernel-bank", help="precompute and cache kernel matrices")
    _add_run_options(p)
    p.add_argument("--no-rescale", action="store_true", help="keep raw kernel scale")
    p.set_defaults(func=cmd_kernel_bank)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TwinClustError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error[{NumericalError.category}]: {exc}", file=sys.stderr)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
