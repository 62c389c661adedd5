"""Synthetic genotypes/phenotypes and the two simulation campaigns.

Every random stream is derived from ``(seed, label, indices...)`` through
:class:`numpy.random.SeedSequence`, so any replicate, training set or grid cell
can be regenerated on its own and results never depend on execution order.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import zlib
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from herit_ridge import ridge
from herit_ridge.errors import NoCausalVariants, OutOfRange, UserInputError
from herit_ridge.geno import (
    RawGenotypeMatrix,
    StandardizationParams,
    apply_standardization,
    drop_monomorphic,
    gram_spectrum,
    standardize_empirical,
)
from herit_ridge.reml import reml_estimate
from herit_ridge.ridge import h2_to_lambda, ridge_fit, squared_correlation
from herit_ridge.theory import fit_effective_ratio, theoretical_corr2, theoretical_test_mse

log = logging.getLogger(__name__)

FREQ_LOW, FREQ_HIGH = 0.05, 0.5


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Independent generator for a labelled work unit."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for k in keys:
        entropy.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return rng_for(int(seed_or_rng))


def simulate_frequencies(p: int, rng) -> np.ndarray:
    return _as_rng(rng).uniform(FREQ_LOW, FREQ_HIGH, size=p)


def simulate_counts(n: int, freqs: np.ndarray, rng) -> np.ndarray:
    """Binomial(2, f_j) draws as the sum of two Bernoulli(f_j)."""
    rng = _as_rng(rng)
    p = freqs.size
    counts = (rng.random((n, p)) < freqs).astype(np.int8)
    counts += rng.random((n, p)) < freqs
    return counts


def simulate_genotypes(n: int, p: int, seed=0, freqs: np.ndarray | None = None) -> RawGenotypeMatrix:
    """Independent variants with frequencies ~ U[0.05, 0.5] and Binomial(2, f) genotypes."""
    if n < 2 or p < 1:
        raise OutOfRange(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    rng = _as_rng(seed)
    f = simulate_frequencies(p, rng) if freqs is None else np.asarray(freqs, dtype=float)
    if f.shape != (p,):
        raise OutOfRange("frequency vector does not match p")
    return RawGenotypeMatrix(simulate_counts(n, f, rng), true_freqs=f)


def true_standardized(M: RawGenotypeMatrix) -> np.ndarray:
    """Z* : genotypes standardized with their true frequencies."""
    if M.true_freqs is None:
        raise UserInputError("matrix carries no true frequencies")
    return apply_standardization(M, StandardizationParams.from_frequencies(M.true_freqs)).z


@dataclass(frozen=True)
class PhenotypeSim:
    y: np.ndarray
    u_true: np.ndarray
    causal_index_set: np.ndarray
    e: np.ndarray


def n_causal(p: int, f_c: float) -> int:
    # tolerance guards products such as 0.29 * 100 = 28.999999999999996
    return int(math.floor(p * f_c + 1e-9))


def simulate_effects(p: int, h2_sim: float, f_c: float, rng) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= h2_sim < 1:
        raise OutOfRange("h2_sim must lie in [0, 1)")
    if not 0 < f_c <= 1:
        raise OutOfRange("f_c must lie in (0, 1]")
    k = n_causal(p, f_c)
    if k == 0:
        raise NoCausalVariants(f"floor(p * f_c) = 0 for p={p}, f_c={f_c}")
    rng = _as_rng(rng)
    causal = np.sort(rng.choice(p, size=k, replace=False))
    u = np.zeros(p)
    u[causal] = rng.normal(0.0, math.sqrt(h2_sim / k), size=k)
    return u, causal


def simulate_phenotype(Z, h2_sim: float, f_c: float, seed=0) -> PhenotypeSim:
    """y = Z u + e with floor(p f_c) causal effects ~ N(0, h2/(p f_c)) and e ~ N(0, 1 - h2)."""
    z = Z.z if hasattr(Z, "z") else np.asarray(Z, dtype=float)
    rng = _as_rng(seed)
    u, causal = simulate_effects(z.shape[1], h2_sim, f_c, rng)
    e = rng.normal(0.0, math.sqrt(1.0 - h2_sim), size=z.shape[0])
    return PhenotypeSim(z @ u + e, u, causal, e)


# ------------------------------------------------ heritability estimation


@dataclass
class HeritabilityExperimentConfig:
    """Grid of (n, p) cells x h2_sim x f_c, replicated; one n_max x p_max matrix per replicate."""

    cells: list[tuple[int, int]] = field(default_factory=lambda: [(200, 2000), (500, 10000)])
    h2_sims: list[float] = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    f_cs: list[float] = field(default_factory=lambda: [0.1, 1.0])
    replicates: int = 20
    seed: int = 1
    methods: list[str] = field(default_factory=lambda: [ridge.GCV_PROJECTION, ridge.GCV_TWOSET, ridge.REML])
    standardization_set_size: int = 1000
    h2_grid: list[float] | None = None
    scenario: str = "fully-synthetic"
    cv_folds: int = 10

    def __post_init__(self):
        self.cells = [tuple(int(v) for v in c) for c in self.cells]
        unknown = set(self.methods) - set(ridge.METHODS)
        if unknown:
            raise UserInputError(f"unknown methods: {sorted(unknown)}")
        if self.replicates < 1:
            raise UserInputError("replicates must be >= 1")
        for n, p in self.cells:
            for fc in self.f_cs:
                if n_causal(p, fc) < 1:
                    raise UserInputError(f"floor(p * f_c) = 0 for p={p}, f_c={fc}")
        if self.scenario != "fully-synthetic":
            raise UserInputError("only the fully-synthetic scenario can be simulated")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cells"] = [list(c) for c in self.cells]
        return d


HERITABILITY_COLUMNS = ("scenario", "n", "p", "f_c", "h2_sim", "method", "replicate", "h2_est", "bias")


@dataclass(frozen=True)
class HeritabilityRow:
    scenario: str
    n: int
    p: int
    f_c: float
    h2_sim: float
    method: str
    replicate: int
    h2_est: float
    bias: float


def _cell_setups(M, M_std, methods, cfg, replicate):
    """Genotype-only work shared by every phenotype of a cell."""
    setups = {}
    M_kept, _ = drop_monomorphic(M)
    needs_emp = {ridge.GCV_PROJECTION, ridge.REML, ridge.GCV_NAIVE} & set(methods)
    if needs_emp:
        Z = standardize_empirical(M_kept)
        setups["Z"] = Z
        if ridge.GCV_NAIVE in methods:
            spectrum = gram_spectrum(Z)
            setups["spectrum"] = spectrum
            setups["projection"] = ridge.projection_setup(Z, spectrum=spectrum)
        else:
            setups["projection"] = ridge.projection_setup(Z)
    if ridge.GCV_TWOSET in methods:
        setups["twoset"] = ridge.twoset_setup(M, M_std)
    if ridge.CV10 in methods:
        setups["kfold"] = ridge.KFoldCache(M_kept, k=cfg.cv_folds, seed=int(rng_for(cfg.seed, "folds", replicate).integers(2**31)))
    return setups


def _estimate(method, setups, y, y_std, grid):
    if method == ridge.GCV_PROJECTION:
        C, cache_c = setups["projection"]
        Z = setups["Z"]
        curve = ridge.gcv_error_curve(cache_c, C.apply(y), grid, Z.p)
        return curve.argmin_h2
    if method == ridge.REML:
        return reml_estimate(setups["Z"], y, setup=setups["projection"]).h2
    if method == ridge.GCV_NAIVE:
        Z = setups["Z"]
        curve = ridge.gcv_error_curve(setups["spectrum"], y - y.mean(), grid, Z.p)
        return curve.argmin_h2
    if method == ridge.GCV_TWOSET:
        ts = setups["twoset"]
        y_adj = y - ridge.twoset_fixed_effects(y_std)[0]
        return ridge.gcv_error_curve(ts.cache, y_adj, grid, int(ts.kept.size)).argmin_h2
    if method == ridge.CV10:
        return setups["kfold"].curve(y, grid).argmin_h2
    raise UserInputError(f"unknown method {method!r}")


def run_heritability_experiment(cfg: HeritabilityExperimentConfig, progress=None) -> list[HeritabilityRow]:
    """Estimate h2 on simulated phenotypes for every cell, method and replicate."""
    grid = ridge.default_h2_grid() if cfg.h2_grid is None else np.asarray(cfg.h2_grid, dtype=float)
    n_max = max(n for n, _ in cfg.cells)
    p_max = max(p for _, p in cfg.cells)
    rows: list[HeritabilityRow] = []
    for r in range(cfg.replicates):
        g_rng = rng_for(cfg.seed, "genotypes", r)
        freqs = simulate_frequencies(p_max, g_rng)
        big = RawGenotypeMatrix(simulate_counts(n_max, freqs, g_rng), true_freqs=freqs)
        std_big = RawGenotypeMatrix(simulate_counts(cfg.standardization_set_size, freqs, g_rng), true_freqs=freqs)
        for ci, (n, p) in enumerate(cfg.cells):
            M = big.subset(rows=slice(0, n), cols=slice(0, p))
            M_std = std_big.subset(cols=slice(0, p))
            z_star = true_standardized(M)
            z_star_std = true_standardized(M_std) if ridge.GCV_TWOSET in cfg.methods else None
            setups = _cell_setups(M, M_std, cfg.methods, cfg, r)
            for hi, h2 in enumerate(cfg.h2_sims):
                for fi, fc in enumerate(cfg.f_cs):
                    ph_rng = rng_for(cfg.seed, "phenotype", r, ci, hi, fi)
                    u, _ = simulate_effects(p, h2, fc, ph_rng)
                    y = z_star @ u + ph_rng.normal(0.0, math.sqrt(1.0 - h2), size=n)
                    y_std = None
                    if z_star_std is not None:
                        y_std = z_star_std @ u + ph_rng.normal(0.0, math.sqrt(1.0 - h2), size=z_star_std.shape[0])
                    for method in cfg.methods:
                        est = _estimate(method, setups, y, y_std, grid)
                        rows.append(HeritabilityRow(cfg.scenario, n, p, float(fc), float(h2), method, r, est, est - h2))
        if progress:
            progress(r + 1, cfg.replicates)
    return rows


def summarize_heritability(rows: Sequence[HeritabilityRow]) -> list[dict]:
    """Mean and sd of the bias per (n, p, f_c, h2_sim, method)."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row.n, row.p, row.f_c, row.h2_sim, row.method), []).append(row.bias)
    out = []
    for (n, p, fc, h2, method), biases in sorted(groups.items()):
        b = np.asarray(biases)
        out.append(
            {
                "n": n,
                "p": p,
                "f_c": fc,
                "h2_sim": h2,
                "method": method,
                "replicates": b.size,
                "mean_bias": float(b.mean()),
                "sd_bias": float(b.std(ddof=1)) if b.size > 1 else 0.0,
            }
        )
    return out


# ---------------------------------------------------- prediction accuracy


def desk_p_list(n: int, log_min: float = -3.0, log_max: float = 3.0, points: int = 8) -> list[int]:
    """Variant counts covering log(n/p) evenly, in descending order of p."""
    xs = np.linspace(log_min, log_max, points)
    return [max(1, int(round(n * math.exp(-x)))) for x in xs]


FULL_SCALE_P_LIST = (
    50000, 25000, 16667, 12500, 10000, 5000, 3333, 2500, 2000, 1667,
    1429, 1250, 1111, 1000, 500, 136, 79, 56, 43, 35, 29, 25, 22, 20,
)  # fmt: skip


@dataclass
class PredictionExperimentConfig:
    n: int = 500
    n_test: int = 1000
    training_sets: int = 60
    h2: float = 0.6
    p_list: list[int] = field(default_factory=lambda: desk_p_list(500))
    seed: int = 2

    def __post_init__(self):
        self.p_list = sorted({int(p) for p in self.p_list}, reverse=True)
        if not 0 < self.h2 < 1:
            raise UserInputError("h2 must lie strictly between 0 and 1")
        if self.training_sets < 2 or self.n < 2 or self.n_test < 2 or not self.p_list or min(self.p_list) < 1:
            raise UserInputError("need >= 2 training sets, n >= 2, n_test >= 2 and p >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


PREDICTION_COLUMNS = (
    "p",
    "log_n_over_p",
    "n_over_p",
    "err_p",
    "bias2_p",
    "var_p",
    "corr2_p",
    "theory_test_mse",
    "theory_corr2",
    "sd_over_training_sets",
    "sd_over_test_individuals",
    "corr2_sd_over_training_sets",
    "corr2_degenerate_count",
)


@dataclass(frozen=True)
class PredictionRow:
    p: int
    log_n_over_p: float
    n_over_p: float
    err_p: float
    bias2_p: float
    var_p: float
    corr2_p: float
    theory_test_mse: float
    theory_corr2: float
    sd_over_training_sets: float
    sd_over_test_individuals: float
    corr2_sd_over_training_sets: float
    corr2_degenerate_count: int


@dataclass(frozen=True)
class PredictionExperimentReport:
    config: PredictionExperimentConfig
    rows: tuple[PredictionRow, ...]

    def row_for(self, p: int) -> PredictionRow:
        return next(r for r in self.rows if r.p == p)


def prediction_metrics(y_test, g_test, preds: np.ndarray) -> dict:
    """Empirical error, bias^2, variance and corr^2 from K x n_test predictions.

    ``g_test`` is the true genetic value Z_te u of the test individuals; the
    mean prediction over training sets is the centering reference for bias
    and variance.
    """
    sq = (y_test[None, :] - preds) ** 2
    per_training = sq.mean(axis=1)
    per_individual = sq.mean(axis=0)
    g_bar = preds.mean(axis=0)
    corr = [squared_correlation(y_test, row) for row in preds]
    c2 = np.array([c for c, _ in corr])
    return {
        "err_p": float(per_training.mean()),
        "bias2_p": float(np.mean((g_test - g_bar) ** 2)),
        "var_p": float(np.mean((preds - g_bar[None, :]) ** 2)),
        "corr2_p": float(c2.mean()),
        "sd_over_training_sets": float(per_training.std(ddof=1)),
        "sd_over_test_individuals": float(per_individual.std(ddof=1)),
        "corr2_sd_over_training_sets": float(c2.std(ddof=1)),
        "corr2_degenerate_count": int(sum(d for _, d in corr)),
    }


def run_prediction_experiment(cfg: PredictionExperimentConfig, progress=None) -> PredictionExperimentReport:
    """Ridge prediction accuracy across n/p with lambda = p (1 - h2) / h2.

    One frequency vector and one effect vector are drawn at p_max; for each p
    the first p effects are rescaled by sqrt(p_max / p).  Each training set is
    drawn once at p_max and its leading columns serve every p.
    """
    h2, n, p_max = cfg.h2, cfg.n, max(cfg.p_list)
    g_rng = rng_for(cfg.seed, "global")
    freqs = simulate_frequencies(p_max, g_rng)
    u_global = g_rng.normal(0.0, math.sqrt(h2 / p_max), size=p_max)
    params = StandardizationParams.from_frequencies(freqs)
    t_rng = rng_for(cfg.seed, "test")
    z_te = (simulate_counts(cfg.n_test, freqs, t_rng) - params.means) / params.sds
    e_te = t_rng.normal(0.0, math.sqrt(1.0 - h2), size=cfg.n_test)
    effects = {p: u_global[:p] * math.sqrt(p_max / p) for p in cfg.p_list}
    g_te = {p: z_te[:, :p] @ effects[p] for p in cfg.p_list}
    preds = {p: np.empty((cfg.training_sets, cfg.n_test)) for p in cfg.p_list}
    for k in range(cfg.training_sets):
        k_rng = rng_for(cfg.seed, "training", k)
        z_tr = (simulate_counts(n, freqs, k_rng) - params.means) / params.sds
        e_tr = k_rng.normal(0.0, math.sqrt(1.0 - h2), size=n)
        for p in cfg.p_list:
            zp = np.ascontiguousarray(z_tr[:, :p])
            y_tr = zp @ effects[p] + e_tr
            sol = ridge_fit(zp, y_tr, h2_to_lambda(h2, p))
            preds[p][k] = z_te[:, :p] @ sol.u_hat
        if progress:
            progress(k + 1, cfg.training_sets)
    rows = []
    for p in cfg.p_list:
        y_te = g_te[p] + e_te
        m = prediction_metrics(y_te, g_te[p], preds[p])
        rows.append(
            PredictionRow(
                p=p,
                log_n_over_p=math.log(n / p),
                n_over_p=n / p,
                theory_test_mse=theoretical_test_mse(n, p, h2),
                theory_corr2=theoretical_corr2(n, p, h2),
                **m,
            )
        )
    return PredictionExperimentReport(cfg, tuple(rows))


# -------------------------------------------------- effective marker ratio


def effective_ratio_observations(
    n: int,
    p_list: Sequence[int],
    h2: float,
    replicates: int,
    n_test: int = 1000,
    duplicate_columns: bool = False,
    seed: int = 3,
) -> list[tuple[int, int, float]]:
    """(n, p, normalized test MSE) triples from the prediction pipeline.

    With ``duplicate_columns`` each listed p is made of p/2 simulated variants
    each present twice, so the effective marker count is p/2.
    """
    obs = []
    for r in range(replicates):
        for j, p in enumerate(p_list):
            rng = rng_for(seed, "effective-ratio", r, j)
            q = p // 2 if duplicate_columns else p
            if duplicate_columns and 2 * q != p:
                raise UserInputError("duplicated-column designs need an even p")
            freqs = simulate_frequencies(q, rng)
            params = StandardizationParams.from_frequencies(freqs)

            def draw(size):
                z = (simulate_counts(size, freqs, rng) - params.means) / params.sds
                return np.hstack([z, z]) if duplicate_columns else z

            u = rng.normal(0.0, math.sqrt(h2 / p), size=p)
            z_tr, z_te = draw(n), draw(n_test)
            y_tr = z_tr @ u + rng.normal(0.0, math.sqrt(1.0 - h2), size=n)
            y_te = z_te @ u + rng.normal(0.0, math.sqrt(1.0 - h2), size=n_test)
            sol = ridge_fit(z_tr, y_tr, h2_to_lambda(h2, p))
            mse = float(np.mean((y_te - z_te @ sol.u_hat) ** 2))
            obs.append((n, p, mse / float(np.mean(y_te**2))))
    return obs


def run_effective_ratio_experiment(n, p_list, h2, replicates, n_test=1000, duplicate_columns=False, seed=3):
    obs = effective_ratio_observations(n, p_list, h2, replicates, n_test, duplicate_columns, seed)
    return fit_effective_ratio(obs, h2)


# ------------------------------------------------------------------- CSV


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_csv_text(columns: Sequence[str], rows) -> str:
    """CSV text for dataclass rows or dicts with a fixed column order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        d = row if isinstance(row, dict) else asdict(row)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def write_rows_csv(path, columns: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_csv_text(columns, rows))
