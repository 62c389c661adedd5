"""Command-line workbench: ``herit-ridge <command> [flags]``.

Each command writes ``report.json`` plus its tables (CSV) and, with
``--plot``, SVG charts rebuilt from those tables.  All files are staged in a
hidden directory and renamed into ``--out-dir`` only after the command
succeeds, so a failing run leaves nothing behind.

Exit status: 0 success, 1 user error (bad flags, inputs or parameters),
2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from contextlib import contextmanager, nullcontext
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from herit_ridge import __version__, plots, sim
from herit_ridge.errors import NumericalError, UserInputError
from herit_ridge.geno import (
    StandardizationParams,
    align_rows,
    apply_standardization,
    drop_monomorphic,
    read_genotype_csv,
    read_plink_bed,
    read_table_csv,
    standardize_empirical,
    write_genotype_csv,
    write_plink_bed,
    write_table_csv,
)
from herit_ridge.ridge import (
    GCV_PROJECTION,
    METHODS,
    H2Data,
    estimate_h2,
    fit_with_fixed_effects,
    h2_to_lambda,
    parse_grid,
    predict_out_of_sample,
)
from herit_ridge.theory import theory_curve

log = logging.getLogger("herit_ridge")

SCHEMA_VERSION = 1
THREADS_ENV = "HERIT_RIDGE_THREADS"
REPORT = "report.json"

CURVE_COLUMNS = ("method", "h2", "lambda", "error")
THEORY_COLUMNS = ("h2", "log_n_over_p", "n_over_p", "test_mse", "train_mse", "corr2", "regime")
SUMMARY_COLUMNS = ("n", "p", "f_c", "h2_sim", "method", "replicates", "mean_bias", "sd_bias")


class UsageError(UserInputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ staging


class Staging:
    """Collects output files in a hidden directory; :meth:`commit` renames them into place."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self._created_out_dir = not out_dir.exists()
        out_dir.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".herit-ridge-", dir=out_dir))
        self.names: list[str] = []
        self.tables: dict[str, dict] = {}

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.tmp / name

    def text(self, name: str, content: str) -> None:
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(content)

    def table(self, name: str, columns, rows) -> None:
        self.text(name, sim.rows_csv_text(columns, rows))
        self.tables[name] = {"schema_version": SCHEMA_VERSION, "columns": list(columns)}

    def commit(self) -> list[str]:
        for name in self.names:
            os.replace(self.tmp / name, self.out_dir / name)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return sorted(self.names)

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)
        if self._created_out_dir:
            try:
                self.out_dir.rmdir()
            except OSError:
                pass


class Timer:
    def __init__(self):
        self.phases: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t0
            log.info("%s: %.3f s", name, self.phases[name])


# ------------------------------------------------------------------ parsing


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _cells(text: str) -> list[list[int]]:
    out = []
    for tok in _str_list(text):
        try:
            n, p = tok.lower().split("x")
            out.append([int(n), int(p)])
        except ValueError as exc:
            raise UsageError(f"cells must look like 200x2000,500x10000, got {tok!r}") from exc
    return out


def _common(sp: argparse.ArgumentParser, seed: int | None = 0) -> None:
    sp.add_argument("--out-dir", default=".", help="directory for report.json, tables and plots")
    if seed is not None:
        sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--config", help="JSON file whose keys override the flags")
    sp.add_argument("--threads", type=int, default=None, help=f"BLAS threads (default ${THREADS_ENV})")
    sp.add_argument("--plot", action="store_true", help="also write SVG charts")
    sp.add_argument("--timing", action="store_true", help="record wall-clock phases in the report")


def _geno_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--geno", help="genotype CSV (or a .bed path)")
    sp.add_argument("--bed")
    sp.add_argument("--bim")
    sp.add_argument("--fam")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="herit-ridge", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"herit-ridge {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    sp = sub.add_parser("simulate-genotypes", help="draw allele counts from random frequencies")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--format", choices=("csv", "plink"), default="csv")
    sp.add_argument("--prefix", default="genotypes")
    _common(sp)

    sp = sub.add_parser("simulate-phenotype", help="simulate y = Z u + e on given genotypes")
    _geno_flags(sp)
    sp.add_argument("--h2", type=float, required=True)
    sp.add_argument("--fc", type=float, default=1.0, help="fraction of causal variants")
    sp.add_argument("--frequencies", help="CSV of true frequencies (variant_id,freq); default: empirical scaling")
    _common(sp)

    sp = sub.add_parser("estimate-h2", help="estimate heritability")
    _geno_flags(sp)
    sp.add_argument("--pheno", required=True)
    sp.add_argument("--pheno-col", help="phenotype column (default: first)")
    sp.add_argument("--covar")
    sp.add_argument("--method", type=_str_list, default=[GCV_PROJECTION], help=f"comma list of {', '.join(METHODS)}")
    sp.add_argument("--grid", type=parse_grid, default=None, help="h2 grid start:stop:step (default 0.01:0.99:0.01)")
    sp.add_argument("--k", type=int, default=10, help="folds for cross validation")
    sp.add_argument("--std-geno", help="standardization-set genotypes (gcv-twoset)")
    sp.add_argument("--std-pheno")
    sp.add_argument("--std-covar")
    _common(sp)

    sp = sub.add_parser("predict", help="fit ridge on a training set and score a test set")
    _geno_flags(sp)
    sp.add_argument("--pheno", required=True)
    sp.add_argument("--pheno-col")
    sp.add_argument("--covar")
    sp.add_argument("--test-geno", required=True)
    sp.add_argument("--test-pheno", required=True)
    sp.add_argument("--test-covar")
    sp.add_argument("--h2", type=float, help="fixed h2; otherwise estimated with --method")
    sp.add_argument("--method", default=GCV_PROJECTION)
    sp.add_argument("--grid", type=parse_grid, default=None)
    _common(sp)

    sp = sub.add_parser("theory-curves", help="tabulate the closed-form accuracy curves")
    sp.add_argument("--h2", type=_float_list, required=True, help="comma list of h2 values")
    sp.add_argument("--np-log-range", type=parse_grid, default=parse_grid("-4:4:0.1"), help="log(n/p) start:stop:step")
    _common(sp, seed=None)

    cfg = sim.HeritabilityExperimentConfig()
    sp = sub.add_parser("experiment-heritability", help="bias of heritability estimators over a simulation grid")
    sp.add_argument("--cells", type=_cells, default=[list(c) for c in cfg.cells], help="e.g. 200x2000,500x10000")
    sp.add_argument("--h2-sims", type=_float_list, default=cfg.h2_sims)
    sp.add_argument("--fcs", type=_float_list, default=cfg.f_cs)
    sp.add_argument("--method", "--methods", dest="methods", type=_str_list, default=cfg.methods)
    sp.add_argument("--replicates", type=int, default=cfg.replicates)
    sp.add_argument("--standardization-set-size", type=int, default=cfg.standardization_set_size)
    sp.add_argument("--grid", type=parse_grid, default=None)
    _common(sp, seed=cfg.seed)

    pcfg = sim.PredictionExperimentConfig()
    sp = sub.add_parser("experiment-prediction", help="test error and correlation against theory")
    sp.add_argument("--n", type=int, default=pcfg.n)
    sp.add_argument("--n-test", type=int, default=pcfg.n_test)
    sp.add_argument("--replicates", "--training-sets", dest="replicates", type=int, default=pcfg.training_sets)
    sp.add_argument("--h2", type=float, default=pcfg.h2)
    sp.add_argument("--p-list", type=_int_list, default=pcfg.p_list)
    _common(sp, seed=pcfg.seed)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return action.choices[command]


def apply_config(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> argparse.Namespace:
    """Override parsed flags with the keys of the ``--config`` JSON document."""
    if not ns.config:
        return ns
    try:
        with open(ns.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--config: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("--config: top level must be a JSON object")
    actions = {a.dest: a for a in _subparser(parser, ns.command)._actions}
    for key, value in doc.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest in ("command", "config", "help") or dest not in actions:
            raise UsageError(f"--config: unknown key {key!r} for {ns.command}")
        conv = actions[dest].type
        if conv is not None and isinstance(value, (str, int, float)) and not isinstance(value, bool):
            value = conv(str(value))
        setattr(ns, dest, value)
    return ns


def _echo(ns: argparse.Namespace) -> dict:
    out = {}
    for k, v in sorted(vars(ns).items()):
        if k in ("plot", "timing"):
            continue
        if isinstance(v, np.ndarray):
            v = [float(x) for x in v]
        out[k] = v
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ------------------------------------------------------------------ inputs


def _read_geno_path(path: str):
    if path.endswith(".bed"):
        stem = path[:-4]
        return read_plink_bed(path, stem + ".bim", stem + ".fam")
    return read_genotype_csv(path)


def load_genotypes(ns):
    if ns.bed:
        stem = ns.bed[:-4] if ns.bed.endswith(".bed") else ns.bed
        return read_plink_bed(
            stem + ".bed" if not ns.bed.endswith(".bed") else ns.bed, ns.bim or stem + ".bim", ns.fam or stem + ".fam"
        )
    if ns.geno:
        return _read_geno_path(ns.geno)
    raise UsageError("one of --geno or --bed is required")


def _column(path: str, sample_ids, col: str | None = None) -> np.ndarray:
    ids, names, data = read_table_csv(path)
    if not names:
        raise UserInputError(f"{path}: no data columns")
    j = 0 if col is None else (names.index(col) if col in names else -1)
    if j < 0:
        raise UserInputError(f"{path}: no column {col!r} (have {', '.join(names)})")
    return align_rows(sample_ids, ids, data[:, j])


def _matrix(path: str | None, sample_ids) -> np.ndarray | None:
    if path is None:
        return None
    ids, _, data = read_table_csv(path)
    return align_rows(sample_ids, ids, data)


# ---------------------------------------------------------------- commands


def cmd_simulate_genotypes(ns, out: Staging, timer: Timer) -> dict:
    with timer.phase("simulate"):
        M = sim.simulate_genotypes(ns.n, ns.p, seed=ns.seed)
    if ns.format == "csv":
        write_genotype_csv(M, out.path(f"{ns.prefix}.csv"))
    else:
        for ext in (".bed", ".bim", ".fam"):
            out.path(ns.prefix + ext)
        write_plink_bed(M, out.tmp / ns.prefix)
    out.table(
        "frequencies.csv", ("variant_id", "freq"), [{"variant_id": v, "freq": float(f)} for v, f in zip(M.variant_ids, M.true_freqs)]
    )
    return {"n": M.n, "p": M.p, "mean_frequency": float(M.true_freqs.mean())}


def cmd_simulate_phenotype(ns, out: Staging, timer: Timer) -> dict:
    M = load_genotypes(ns)
    with timer.phase("standardize"):
        if ns.frequencies:
            with open(ns.frequencies, encoding="utf-8", newline="") as fh:
                rows = {r["variant_id"]: float(r["freq"]) for r in csv.DictReader(fh)}
            try:
                freqs = np.array([rows[v] for v in M.variant_ids])
            except KeyError as exc:
                raise UserInputError(f"{ns.frequencies}: no frequency for variant {exc.args[0]!r}") from exc
            Z = apply_standardization(M, StandardizationParams.from_frequencies(freqs))
            kept = np.arange(M.p)
        else:
            M_kept, kept = drop_monomorphic(M)
            Z = standardize_empirical(M_kept)
    with timer.phase("simulate"):
        ph = sim.simulate_phenotype(Z, ns.h2, ns.fc, seed=ns.seed)
    write_table_csv(out.path("phenotype.csv"), M.sample_ids, ["y"], ph.y)
    out.tables["phenotype.csv"] = {"schema_version": SCHEMA_VERSION, "columns": ["sample_id", "y"]}
    out.table(
        "effects.csv",
        ("variant_id", "u"),
        [{"variant_id": M.variant_ids[j], "u": float(u)} for j, u in zip(kept, ph.u_true)],
    )
    g = ph.y - ph.e
    return {
        "n": M.n,
        "p_used": int(Z.p),
        "n_causal": int(ph.causal_index_set.size),
        "var_y": float(np.var(ph.y)),
        "realized_h2": float(np.var(g) / np.var(ph.y)),
        "standardization": "true-frequencies" if ns.frequencies else "empirical",
    }


def cmd_estimate_h2(ns, out: Staging, timer: Timer) -> dict:
    unknown = [m for m in ns.method if m not in METHODS]
    if unknown or not ns.method:
        raise UsageError(f"--method: unknown {unknown}; choose from {', '.join(METHODS)}")
    with timer.phase("read"):
        M = load_genotypes(ns)
        y = _column(ns.pheno, M.sample_ids, ns.pheno_col)
        cov = _matrix(ns.covar, M.sample_ids)
        std_M = std_y = std_cov = None
        if ns.std_geno:
            std_M = _read_geno_path(ns.std_geno)
            if ns.std_pheno is None:
                raise UsageError("--std-geno needs --std-pheno")
            std_y = _column(ns.std_pheno, std_M.sample_ids, ns.pheno_col)
            std_cov = _matrix(ns.std_covar, std_M.sample_ids)
    data = H2Data(M, y, cov, std_M, std_y, std_cov)
    estimates = []
    for method in ns.method:
        with timer.phase(f"estimate:{method}"):
            estimates.append(estimate_h2(data, method, h2_grid=ns.grid, k=ns.k, seed=ns.seed))
    curve_rows = [
        {"method": e.method, "h2": float(h), "lambda": float(lam), "error": float(err)}
        for e in estimates
        if e.curve is not None
        for h, lam, err in zip(e.curve.h2_grid, e.curve.lambda_grid, e.curve.errors)
    ]
    if curve_rows:
        out.table("curves.csv", CURVE_COLUMNS, curve_rows)
        if ns.plot:
            by_method: dict[str, list[dict]] = {}
            for r in _reread(curve_rows):
                by_method.setdefault(r["method"], []).append(r)
            out.text("gcv_curves.svg", plots.gcv_curves_svg(by_method))
    results = estimates[0].to_dict()
    if len(estimates) > 1:
        results["additional"] = [e.to_dict() for e in estimates[1:]]
    return results


def _reread(rows: list[dict]) -> list[dict]:
    # plots are drawn from the CSV text itself, never from in-memory values
    text = sim.rows_csv_text(list(rows[0]), rows)
    return list(csv.DictReader(io.StringIO(text)))


def cmd_predict(ns, out: Staging, timer: Timer) -> dict:
    with timer.phase("read"):
        M = load_genotypes(ns)
        y = _column(ns.pheno, M.sample_ids, ns.pheno_col)
        cov = _matrix(ns.covar, M.sample_ids)
        M_te = _read_geno_path(ns.test_geno)
        y_te = _column(ns.test_pheno, M_te.sample_ids, ns.pheno_col)
        cov_te = _matrix(ns.test_covar, M_te.sample_ids)
    if M_te.variant_ids != M.variant_ids:
        raise UserInputError("training and test genotypes must list the same variants in the same order")
    if (cov is None) != (cov_te is None):
        raise UsageError("--covar and --test-covar must be given together")
    M_kept, kept = drop_monomorphic(M)
    Z = standardize_empirical(M_kept)
    with timer.phase("estimate"):
        if ns.h2 is None:
            est = estimate_h2(H2Data(M, y, cov), ns.method, h2_grid=ns.grid, seed=ns.seed)
            h2, method = est.h2, est.method
        else:
            h2, method = ns.h2, "fixed"
    lam = h2_to_lambda(h2, Z.p)
    with timer.phase("fit"):
        sol, beta = fit_with_fixed_effects(Z, y, lam, cov)
    with timer.phase("score"):
        rep = predict_out_of_sample(sol, Z.params, beta, M_te.subset(cols=kept), y_te, cov_te)
    write_table_csv(
        out.path("predictions.csv"), M_te.sample_ids, ["y", "f_hat", "g_hat"], np.column_stack([y_te, rep.f_hat, rep.g_hat])
    )
    out.tables["predictions.csv"] = {"schema_version": SCHEMA_VERSION, "columns": ["sample_id", "y", "f_hat", "g_hat"]}
    return {
        "h2": h2,
        "lambda": lam,
        "h2_source": method,
        "p_used": int(Z.p),
        "beta_hat": [float(b) for b in beta],
        "prediction": rep.to_dict(),
    }


def cmd_theory_curves(ns, out: Staging, timer: Timer) -> dict:
    rows = []
    for h2 in ns.h2:
        for x, pt in zip(ns.np_log_range, theory_curve(h2, ns.np_log_range)):
            rows.append(
                {
                    "h2": float(h2),
                    "log_n_over_p": float(x),
                    "n_over_p": pt.n,
                    "test_mse": pt.test_mse,
                    "train_mse": pt.train_mse,
                    "corr2": pt.corr2,
                    "regime": pt.regime,
                }
            )
    out.table("theory.csv", THEORY_COLUMNS, rows)
    if ns.plot:
        table = _reread(rows)
        for metric in ("test_mse", "train_mse", "corr2"):
            out.text(f"theory_{metric}.svg", plots.theory_svg(table, metric))
    return {"rows": len(rows), "h2": ns.h2}


def cmd_experiment_heritability(ns, out: Staging, timer: Timer) -> dict:
    cfg = sim.HeritabilityExperimentConfig(
        cells=ns.cells,
        h2_sims=ns.h2_sims,
        f_cs=ns.fcs,
        replicates=ns.replicates,
        seed=ns.seed,
        methods=ns.methods,
        standardization_set_size=ns.standardization_set_size,
        h2_grid=None if ns.grid is None else [float(v) for v in ns.grid],
    )
    with timer.phase("simulate+estimate"):
        rows = sim.run_heritability_experiment(cfg, progress=lambda r, k: log.info("replicate %d/%d", r, k))
    summary = sim.summarize_heritability(rows)
    out.table("heritability.csv", sim.HERITABILITY_COLUMNS, rows)
    out.table("heritability_summary.csv", SUMMARY_COLUMNS, summary)
    if ns.plot:
        table = _reread(summary)
        for n, p in cfg.cells:
            for fc in cfg.f_cs:
                out.text(f"heritability_n{n}_p{p}_fc{fc:g}.svg", plots.heritability_svg(table, n, p, fc))
    return {"config": cfg.to_dict(), "rows": len(rows), "summary": summary}


def cmd_experiment_prediction(ns, out: Staging, timer: Timer) -> dict:
    cfg = sim.PredictionExperimentConfig(
        n=ns.n, n_test=ns.n_test, training_sets=ns.replicates, h2=ns.h2, p_list=ns.p_list, seed=ns.seed
    )
    with timer.phase("simulate+fit"):
        report = sim.run_prediction_experiment(cfg, progress=lambda i, k: log.info("p value %d/%d", i, k))
    out.table("prediction.csv", sim.PREDICTION_COLUMNS, report.rows)
    if ns.plot:
        table = _reread([asdict(r) for r in report.rows])
        out.text("prediction_mse_training.svg", plots.prediction_svg(table, cfg.h2, "err_p", "training"))
        out.text("prediction_mse_individual.svg", plots.prediction_svg(table, cfg.h2, "err_p", "individual"))
        out.text("prediction_corr2.svg", plots.prediction_svg(table, cfg.h2, "corr2_p", "training"))
    return {"config": cfg.to_dict(), "rows": [asdict(r) for r in report.rows]}


COMMANDS = {
    "simulate-genotypes": cmd_simulate_genotypes,
    "simulate-phenotype": cmd_simulate_phenotype,
    "estimate-h2": cmd_estimate_h2,
    "predict": cmd_predict,
    "theory-curves": cmd_theory_curves,
    "experiment-heritability": cmd_experiment_heritability,
    "experiment-prediction": cmd_experiment_prediction,
}


def _thread_limit(threads: int | None):
    if threads is None:
        return nullcontext()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.info("threadpoolctl not installed; --threads only affects new processes")
        os.environ["OPENBLAS_NUM_THREADS"] = os.environ["OMP_NUM_THREADS"] = str(threads)
        return nullcontext()
    return threadpool_limits(limits=threads)


def run_command(argv) -> tuple[int, dict | None]:
    """Parse ``argv``, run the command and write its outputs; returns (exit status, report)."""
    parser = build_parser()
    out = None
    try:
        ns = apply_config(parser, parser.parse_args(argv))
        if getattr(ns, "threads", None) is None and os.environ.get(THREADS_ENV):
            try:
                ns.threads = int(os.environ[THREADS_ENV])
            except ValueError as exc:
                raise UsageError(f"{THREADS_ENV} must be an integer") from exc
        timer = Timer()
        with _thread_limit(ns.threads):
            out = Staging(Path(ns.out_dir))
            results = COMMANDS[ns.command](ns, out, timer)
        report = {
            "schema_version": SCHEMA_VERSION,
            "command": ns.command,
            "config_echo": _echo(ns),
            "results": results,
            "tables": dict(sorted(out.tables.items())),
            "timing": {k: round(v, 6) for k, v in timer.phases.items()} if ns.timing else None,
            "versions": {"herit_ridge": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        }
        out.text(REPORT, json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
        written = out.commit()
        log.info("wrote %s", ", ".join(written))
        return 0, report
    except UserInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = 1
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = 1
    if out is not None:
        out.abort()
    return status, None


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    status, _ = run_command(sys.argv[1:] if argv is None else argv)
    return status


if __name__ == "__main__":
    sys.exit(main())
