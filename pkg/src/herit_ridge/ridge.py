"""Ridge estimation, error curves over a heritability grid, and h2 estimators.

Penalties are always indexed by heritability through ``lambda = p (1 - h2) / h2``
so that every curve is read directly on the h2 scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from herit_ridge.errors import (
    DimensionMismatch,
    FoldTooSmall,
    HatDiagonalOne,
    OutOfRange,
    StandardizationSetTooSmall,
    UserInputError,
)
from herit_ridge.geno import (
    EXTERNAL,
    ContrastMatrix,
    NoConstantNullEigenvector,
    RawGenotypeMatrix,
    SpectralCache,
    StandardizationParams,
    StandardizedMatrix,
    apply_standardization,
    contrast_from_qr,
    contrast_from_svd,
    drop_monomorphic,
    gram_spectrum,
    intercept_design,
    standardize_empirical,
)

log = logging.getLogger(__name__)

GCV_PROJECTION = "gcv-projection"
GCV_TWOSET = "gcv-twoset"
GCV_NAIVE = "gcv-naive"
CV10 = "cv10"
REML = "reml"
METHODS = (GCV_PROJECTION, GCV_TWOSET, CV10, REML, GCV_NAIVE)

MIN_STANDARDIZATION_SET = 30
HAT_ONE_TOLERANCE = 1e-12


# ----------------------------------------------------------- lambda <-> h2


def h2_to_lambda(h2, p):
    h2 = np.asarray(h2, dtype=float)
    if np.any((h2 <= 0) | (h2 >= 1)):
        raise OutOfRange("h2 must lie strictly between 0 and 1")
    if p < 1:
        raise OutOfRange("p must be >= 1")
    out = p * (1.0 - h2) / h2
    return float(out) if out.ndim == 0 else out


def lambda_to_h2(lam, p):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise OutOfRange("lambda must be positive")
    if p < 1:
        raise OutOfRange("p must be >= 1")
    out = p / (p + lam)
    return float(out) if out.ndim == 0 else out


def lambda_h2_map(p, x, direction: str = "h2->lambda"):
    """Map heritability to penalty (``"h2->lambda"``) or back (``"lambda->h2"``)."""
    if direction == "h2->lambda":
        return h2_to_lambda(x, p)
    if direction == "lambda->h2":
        return lambda_to_h2(x, p)
    raise UserInputError(f"unknown direction {direction!r}")


def default_h2_grid() -> np.ndarray:
    return np.arange(1, 100) / 100.0


def parse_grid(text: str) -> np.ndarray:
    """``"start:stop:step"`` (inclusive stop) to an array."""
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise UserInputError(f"grid must look like start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise UserInputError(f"empty grid {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def _check_grid(h2_grid) -> np.ndarray:
    g = np.asarray(h2_grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise UserInputError("h2 grid must be a non-empty 1-d sequence")
    if np.any((g <= 0) | (g >= 1)) or np.any(np.diff(g) <= 0):
        raise UserInputError("h2 grid must be strictly ascending inside (0, 1)")
    return g


# ----------------------------------------------------------------- results


@dataclass(frozen=True)
class RidgeSolution:
    u_hat: np.ndarray
    lam: float
    fitted_via: str


@dataclass(frozen=True)
class GcvCurve:
    h2_grid: np.ndarray
    lambda_grid: np.ndarray
    errors: np.ndarray
    method: str

    @property
    def argmin_index(self) -> int:
        # np.argmin returns the first minimum; the grid is ascending, so ties go to the smallest h2
        return int(np.argmin(self.errors))

    @property
    def argmin_h2(self) -> float:
        return float(self.h2_grid[self.argmin_index])

    @property
    def at_boundary(self) -> bool:
        return self.argmin_index in (0, self.h2_grid.size - 1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "h2_grid": [float(v) for v in self.h2_grid],
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "errors": [float(v) for v in self.errors],
            "argmin_h2": self.argmin_h2,
        }


@dataclass(frozen=True)
class H2Estimate:
    h2: float
    lam: float
    method: str
    n_used: int
    p_used: int
    curve: GcvCurve | None = None
    boundary: bool = False
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "method": self.method,
            "h2": self.h2,
            "lambda": self.lam,
            "n_used": self.n_used,
            "p_used": self.p_used,
            "boundary": self.boundary,
            "details": self.details,
        }
        if self.curve is not None:
            out["curve"] = self.curve.to_dict()
        return out


def _estimate_from_curve(curve: GcvCurve, method: str, n_used: int, p_used: int, **details) -> H2Estimate:
    if curve.at_boundary:
        log.warning("%s: error minimum at grid edge h2=%.2f", method, curve.argmin_h2)
    return H2Estimate(
        h2=curve.argmin_h2,
        lam=float(curve.lambda_grid[curve.argmin_index]),
        method=method,
        n_used=n_used,
        p_used=p_used,
        curve=curve,
        boundary=curve.at_boundary,
        details=details,
    )


# ------------------------------------------------------------------ fitting


def _as_array(Z) -> np.ndarray:
    return Z.z if isinstance(Z, StandardizedMatrix) else np.asarray(Z, dtype=float)


def ridge_fit(Z, y, lam: float, cache: SpectralCache | None = None) -> RidgeSolution:
    """Ridge estimate of the effects.

    Uses the dual form ``Z^T (Z Z^T + lam I)^-1 y`` when p > n (or when the
    spectrum of ``Z Z^T`` is supplied) and the primal form otherwise.
    """
    z = _as_array(Z)
    y = np.asarray(y, dtype=float)
    n, p = z.shape
    if y.shape != (n,):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({n},)")
    if not lam > 0:
        raise OutOfRange("lambda must be positive")
    if cache is not None:
        if cache.m != n:
            raise DimensionMismatch("spectrum does not match Z")
        alpha = cache.eigvecs @ (cache.rotate(y) / (cache.eigvals + lam))
        return RidgeSolution(z.T @ alpha, float(lam), "dual")
    if p > n:
        alpha = np.linalg.solve(z @ z.T + lam * np.eye(n), y)
        return RidgeSolution(z.T @ alpha, float(lam), "dual")
    u = np.linalg.solve(z.T @ z + lam * np.eye(p), z.T @ y)
    return RidgeSolution(u, float(lam), "primal")


def gcv_errors(cache: SpectralCache, b: np.ndarray, lambdas) -> np.ndarray:
    """GCV error for each penalty given the rotated response ``b = U^T y``.

    err = (1/m) sum_k b_k^2 s_k^2 / [(1/m) sum_k s_k]^2 with s_k = lam / (d_k + lam).
    """
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))[:, None]
    s = lam / (cache.eigvals[None, :] + lam)
    num = (s**2 * (b**2)[None, :]).mean(axis=1)
    den = s.mean(axis=1) ** 2
    return num / den


def gcv_error_curve(cache: SpectralCache, y_contrasted, h2_grid, p: int, method: str = "gcv") -> GcvCurve:
    """GCV curve over an h2 grid; ``p`` is the variant count used by the penalty map."""
    grid = _check_grid(h2_grid)
    y = np.asarray(y_contrasted, dtype=float)
    if y.shape != (cache.m,):
        raise DimensionMismatch(f"response of length {y.shape[0]} for spectrum of size {cache.m}")
    lambdas = h2_to_lambda(grid, p)
    errors = gcv_errors(cache, cache.rotate(y), lambdas)
    return GcvCurve(grid, np.atleast_1d(lambdas), errors, method)


def hat_diagonal(cache: SpectralCache, lam: float) -> np.ndarray:
    return (cache.eigvecs**2) @ (cache.eigvals / (cache.eigvals + lam))


def hat_matrix(cache: SpectralCache, lam: float) -> np.ndarray:
    U = cache.eigvecs
    return (U * (cache.eigvals / (cache.eigvals + lam))) @ U.T


def loo_error_exact(Z, y, lam: float, cache: SpectralCache | None = None) -> float:
    """Closed-form leave-one-out error (1/n) sum ((y_i - yhat_i) / (1 - H_ii))^2."""
    z = _as_array(Z)
    y = np.asarray(y, dtype=float)
    if y.shape != (z.shape[0],):
        raise DimensionMismatch("y does not match Z")
    if not lam > 0:
        raise OutOfRange("lambda must be positive")
    if cache is None:
        cache = gram_spectrum(z)
    U = cache.eigvecs
    shrink = lam / (cache.eigvals + lam)
    resid = U @ (shrink * cache.rotate(y))
    # 1 - H_ii computed directly from the complementary weights for accuracy
    one_minus_h = (U**2) @ shrink
    bad = np.flatnonzero(one_minus_h <= HAT_ONE_TOLERANCE)
    if bad.size:
        i = int(bad[0])
        raise HatDiagonalOne(i, float(1.0 - one_minus_h[i]))
    return float(np.mean((resid / one_minus_h) ** 2))


# ------------------------------------------------------------------ k-fold


def kfold_partition(n: int, k: int, seed: int) -> list[np.ndarray]:
    if not 2 <= k <= n:
        raise UserInputError(f"k must lie in [2, n={n}], got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta


@dataclass(frozen=True)
class _Fold:
    train: np.ndarray
    test: np.ndarray
    cache: SpectralCache
    cross: np.ndarray  # Z_test Z_train^T U


class KFoldCache:
    """Per-fold standardization and spectra, reusable across phenotypes.

    With ``shared_standardization`` the matrix is standardized once on all
    samples and no intercept is estimated; with ``k = n`` this reproduces the
    closed-form leave-one-out error, which is what the flag exists for.
    """

    def __init__(
        self,
        M: RawGenotypeMatrix | StandardizedMatrix,
        k: int = 10,
        seed: int = 0,
        covariates: np.ndarray | None = None,
        shared_standardization: bool = False,
    ):
        n = M.n
        self.k = k
        self.seed = seed
        self.n = n
        self.p = M.p
        self.shared = shared_standardization
        self.folds_idx = kfold_partition(n, k, seed)
        if not shared_standardization and min(f.size for f in self.folds_idx) < 2:
            raise FoldTooSmall(f"{k} folds over {n} samples leaves a fold with < 2 samples")
        self.design = None if shared_standardization else intercept_design(n, covariates)
        if shared_standardization:
            Z = M.z if isinstance(M, StandardizedMatrix) else standardize_empirical(M).z
        elif isinstance(M, StandardizedMatrix):
            raise UserInputError("per-fold standardization needs raw genotypes")
        folds = []
        for test in self.folds_idx:
            train = np.setdiff1d(np.arange(n), test)
            if shared_standardization:
                z_tr, z_te = Z[train], Z[test]
            else:
                z_tr, z_te = self._standardize_fold(M.values, train, test)
            cache = gram_spectrum(z_tr)
            cross = (z_te @ z_tr.T) @ cache.eigvecs
            folds.append(_Fold(train, test, cache, cross))
        self.folds = folds

    @staticmethod
    def _standardize_fold(values: np.ndarray, train: np.ndarray, test: np.ndarray):
        x_tr = values[train].astype(float)
        means = x_tr.mean(axis=0)
        sds = x_tr.std(axis=0)
        keep = sds > 0
        z_tr = (x_tr[:, keep] - means[keep]) / sds[keep]
        z_te = (values[test][:, keep] - means[keep]) / sds[keep]
        return z_tr, z_te

    def errors(self, y, lambdas) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise DimensionMismatch("y does not match the genotype matrix")
        lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
        sse = np.zeros(lambdas.size)
        for fold in self.folds:
            y_tr, y_te = y[fold.train], y[fold.test]
            if self.design is not None:
                beta = _ols(self.design[fold.train], y_tr)
                y_tr = y_tr - self.design[fold.train] @ beta
                y_te = y_te - self.design[fold.test] @ beta
            b = fold.cache.rotate(y_tr)
            # predictions for every lambda: (n_test x m) @ (m x L)
            pred = fold.cross @ (b[:, None] / (fold.cache.eigvals[:, None] + lambdas[None, :]))
            sse += ((y_te[:, None] - pred) ** 2).sum(axis=0)
        return sse / self.n

    def curve(self, y, h2_grid, p: int | None = None) -> GcvCurve:
        grid = _check_grid(h2_grid)
        lambdas = np.atleast_1d(h2_to_lambda(grid, p or self.p))
        return GcvCurve(grid, lambdas, self.errors(y, lambdas), "kfold")


def kfold_cv_error(
    M,
    y,
    lam: float,
    k: int = 10,
    seed: int = 0,
    covariates: np.ndarray | None = None,
    shared_standardization: bool = False,
) -> float:
    """Mean squared held-out error of k-fold CV at a single penalty."""
    if not lam > 0:
        raise OutOfRange("lambda must be positive")
    cache = KFoldCache(M, k, seed, covariates, shared_standardization)
    return float(cache.errors(y, [lam])[0])


# ------------------------------------------------------------- estimators


def projection_setup(
    Z: StandardizedMatrix, covariates: np.ndarray | None = None, spectrum: SpectralCache | None = None
) -> tuple[ContrastMatrix, SpectralCache]:
    """Contrast and contrasted spectrum for the projection estimator.

    Intercept-only data that were centered on themselves with p >= n use the
    eigenvector contrast (no second factorization); anything else goes
    through the QR contrast of ``[1, X]``.
    """
    if covariates is None and Z.empirically_centered_on_self and Z.p >= Z.n:
        cache = spectrum if spectrum is not None else gram_spectrum(Z)
        try:
            return contrast_from_svd(cache), cache.drop_last()
        except NoConstantNullEigenvector:
            log.info("no constant null eigenvector; falling back to the QR contrast")
    C = contrast_from_qr(intercept_design(Z.n, covariates))
    return C, gram_spectrum(Z, C)


def gcv_projection(
    Z: StandardizedMatrix, y, covariates: np.ndarray | None = None, h2_grid=None, spectrum=None
) -> H2Estimate:
    C, cache_c = projection_setup(Z, covariates, spectrum)
    curve = gcv_error_curve(cache_c, C.apply(np.asarray(y, dtype=float)), _grid(h2_grid), Z.p, "gcv")
    return _estimate_from_curve(curve, GCV_PROJECTION, cache_c.m, Z.p, contrast=C.method)


def fit_with_fixed_effects(
    Z: StandardizedMatrix, y, lam: float, covariates: np.ndarray | None = None, setup=None
) -> tuple[RidgeSolution, np.ndarray]:
    """Ridge with an unpenalized intercept (and covariates).

    The effects are fitted on the contrasted data ``(C Z, C y)``; the fixed
    effects are then the OLS fit of ``y - Z u_hat`` on ``[1, X]``, which is the
    joint minimizer of the partially penalized least squares problem.
    """
    y = np.asarray(y, dtype=float)
    C, cache_c = setup if setup is not None else projection_setup(Z, covariates)
    sol = ridge_fit(C.apply(Z.z), C.apply(y), lam, cache=cache_c)
    X = intercept_design(Z.n, covariates)
    return sol, _ols(X, y - Z.z @ sol.u_hat)


def gcv_naive(Z: StandardizedMatrix, y, covariates: np.ndarray | None = None, h2_grid=None, spectrum=None) -> H2Estimate:
    """GCV after estimating fixed effects by OLS on the same data (the biased pipeline)."""
    y = np.asarray(y, dtype=float)
    X = intercept_design(Z.n, covariates)
    y_res = y - X @ _ols(X, y)
    cache = spectrum if spectrum is not None else gram_spectrum(Z)
    curve = gcv_error_curve(cache, y_res, _grid(h2_grid), Z.p, "gcv")
    return _estimate_from_curve(curve, GCV_NAIVE, cache.m, Z.p)


@dataclass(frozen=True)
class TwoSetSetup:
    params: StandardizationParams
    kept: np.ndarray
    z_train: StandardizedMatrix
    cache: SpectralCache
    n_dropped: int


def twoset_setup(M_train: RawGenotypeMatrix, M_std: RawGenotypeMatrix) -> TwoSetSetup:
    """Standardize the training set with means/sds estimated on the standardization set.

    Variants monomorphic in the standardization set are dropped.
    """
    if M_std.n < MIN_STANDARDIZATION_SET:
        raise StandardizationSetTooSmall(
            f"standardization set has {M_std.n} samples, need >= {MIN_STANDARDIZATION_SET}"
        )
    if M_std.p != M_train.p:
        raise DimensionMismatch("standardization and training sets have different variants")
    M_std_kept, kept = drop_monomorphic(M_std)
    params = StandardizationParams.estimate(M_std_kept, source=EXTERNAL)
    Z = apply_standardization(M_train.subset(cols=kept), params)
    return TwoSetSetup(params, kept, Z, gram_spectrum(Z), M_train.p - kept.size)


def twoset_fixed_effects(y_std, covariates_std: np.ndarray | None = None) -> np.ndarray:
    """OLS of the standardization-set phenotype on [1, X]."""
    y_std = np.asarray(y_std, dtype=float)
    return _ols(intercept_design(y_std.size, covariates_std), y_std)


def gcv_twoset(
    M_train: RawGenotypeMatrix,
    y_train,
    M_std: RawGenotypeMatrix,
    y_std,
    covariates_train: np.ndarray | None = None,
    covariates_std: np.ndarray | None = None,
    h2_grid=None,
    setup: TwoSetSetup | None = None,
) -> H2Estimate:
    setup = setup or twoset_setup(M_train, M_std)
    beta = twoset_fixed_effects(y_std, covariates_std)
    y_adj = np.asarray(y_train, dtype=float) - intercept_design(M_train.n, covariates_train) @ beta
    p_used = int(setup.kept.size)
    curve = gcv_error_curve(setup.cache, y_adj, _grid(h2_grid), p_used, "gcv")
    return _estimate_from_curve(
        curve, GCV_TWOSET, M_train.n, p_used, dropped_variants=setup.n_dropped, beta_hat=[float(b) for b in beta]
    )


def cv_estimate(kcache: KFoldCache, y, h2_grid=None) -> H2Estimate:
    curve = kcache.curve(y, _grid(h2_grid))
    return _estimate_from_curve(curve, CV10 if kcache.k == 10 else f"cv{kcache.k}", kcache.n, kcache.p, k=kcache.k, seed=kcache.seed)


def _grid(h2_grid) -> np.ndarray:
    return default_h2_grid() if h2_grid is None else _check_grid(h2_grid)


@dataclass(frozen=True)
class H2Data:
    """Inputs to :func:`estimate_h2`; the standardization set is only used by the two-set method."""

    genotypes: RawGenotypeMatrix
    y: np.ndarray
    covariates: np.ndarray | None = None
    std_genotypes: RawGenotypeMatrix | None = None
    std_y: np.ndarray | None = None
    std_covariates: np.ndarray | None = None


def estimate_h2(data: H2Data, method: str, h2_grid=None, k: int = 10, seed: int = 0) -> H2Estimate:
    """Estimate heritability with one of ``gcv-projection``, ``gcv-twoset``, ``cv10``, ``reml``, ``gcv-naive``."""
    y = np.asarray(data.y, dtype=float)
    if y.shape != (data.genotypes.n,):
        raise DimensionMismatch("phenotype length does not match the genotype matrix")
    if method == GCV_TWOSET:
        if data.std_genotypes is None or data.std_y is None:
            raise UserInputError("gcv-twoset needs a standardization set (genotypes and phenotype)")
        return gcv_twoset(
            data.genotypes, y, data.std_genotypes, data.std_y, data.covariates, data.std_covariates, h2_grid
        )
    M, _ = drop_monomorphic(data.genotypes)
    if method == CV10:
        kcache = KFoldCache(M, k=k, seed=seed, covariates=data.covariates)
        return cv_estimate(kcache, y, h2_grid)
    Z = standardize_empirical(M)
    if method == GCV_PROJECTION:
        return gcv_projection(Z, y, data.covariates, h2_grid)
    if method == GCV_NAIVE:
        return gcv_naive(Z, y, data.covariates, h2_grid)
    if method == REML:
        from herit_ridge.reml import reml_estimate

        return reml_estimate(Z, y, data.covariates)
    raise UserInputError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


# -------------------------------------------------------------- prediction


@dataclass(frozen=True)
class PredictionReport:
    g_hat: np.ndarray
    f_hat: np.ndarray
    y_tilde: np.ndarray
    mse: float
    corr2: float
    normalized_mse: float
    degenerate: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_test": int(self.y_tilde.size),
            "mse": self.mse,
            "corr2": self.corr2,
            "normalized_mse": self.normalized_mse,
            "corr2_degenerate": self.degenerate,
        }


def squared_correlation(a, b) -> tuple[float, bool]:
    """Squared Pearson correlation; (0.0, True) when either side has zero variance."""
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    saa, sbb = float(a @ a), float(b @ b)
    if saa <= 0 or sbb <= 0:
        return 0.0, True
    return float((a @ b) ** 2 / (saa * sbb)), False


def predict_out_of_sample(
    solution: RidgeSolution,
    params: StandardizationParams,
    beta_hat,
    M_test: RawGenotypeMatrix,
    y_test,
    covariates_test: np.ndarray | None = None,
) -> PredictionReport:
    """Score a fitted model on a test set standardized with training-side parameters."""
    y_test = np.asarray(y_test, dtype=float)
    if y_test.shape != (M_test.n,):
        raise DimensionMismatch("test phenotype does not match test genotypes")
    if solution.u_hat.shape != (M_test.p,) or params.p != M_test.p:
        raise DimensionMismatch("effect vector / standardization params do not match test variants")
    Z_te = apply_standardization(M_test, params).z
    g_hat = Z_te @ solution.u_hat
    X_te = intercept_design(M_test.n, covariates_test)
    beta = np.asarray(beta_hat, dtype=float)
    if beta.shape != (X_te.shape[1],):
        raise DimensionMismatch(f"beta_hat has {beta.size} entries, design has {X_te.shape[1]} columns")
    f_hat = X_te @ beta
    y_tilde = y_test - f_hat
    mse = float(np.mean((y_tilde - g_hat) ** 2))
    corr2, degenerate = squared_correlation(y_tilde, g_hat)
    denom = float(np.mean(y_tilde**2))
    return PredictionReport(g_hat, f_hat, y_tilde, mse, corr2, mse / denom if denom > 0 else float("nan"), degenerate)
