"""Genotype data model, standardization, contrasts and the Gram spectrum.

The expensive step of every estimator in the package is the eigendecomposition
of the sample Gram matrix ``Z Z^T`` (possibly after a contrast).  It is done
once per dataset by :func:`gram_spectrum` and shared by GCV, exact LOO and REML.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from herit_ridge.errors import (
    BadMagic,
    DimensionMismatch,
    InconsistentDimensions,
    InvalidGenotype,
    NoConstantNullEigenvector,
    NonPositiveSd,
    NumericalFailure,
    RankDeficientCovariates,
    TruncatedPayload,
    UserInputError,
    ZeroVarianceColumn,
)

log = logging.getLogger(__name__)

EMPIRICAL = "empirical-on-self"
EXTERNAL = "external-set"
TRUE_FREQUENCIES = "true-frequencies"

CLAMP_RELATIVE = 1e-8
CONSTANT_TOLERANCE = 1e-6

BED_MAGIC = b"\x6c\x1b"
BED_SNP_MAJOR = 0x01
# 2-bit PLINK code -> copies of A1; -1 marks missing.
_BED_LOOKUP = np.array([2, -1, 1, 0], dtype=np.int8)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RawGenotypeMatrix:
    """n x p allele counts in {0, 1, 2}."""

    values: np.ndarray
    variant_ids: tuple[str, ...] = ()
    sample_ids: tuple[str, ...] = ()
    true_freqs: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DimensionMismatch("genotype matrix must be two-dimensional")
        n, p = values.shape
        if n < 2 or p < 1:
            raise DimensionMismatch(f"need n >= 2 and p >= 1, got {n} x {p}")
        if not np.isin(values, (0, 1, 2)).all():
            raise InvalidGenotype("genotype entries must be 0, 1 or 2")
        object.__setattr__(self, "values", _frozen(values.astype(np.int8, copy=True)))
        vids = tuple(self.variant_ids) or tuple(f"v{j}" for j in range(p))
        sids = tuple(self.sample_ids) or tuple(f"s{i}" for i in range(n))
        if len(vids) != p or len(sids) != n:
            raise DimensionMismatch("id lists do not match the matrix shape")
        object.__setattr__(self, "variant_ids", vids)
        object.__setattr__(self, "sample_ids", sids)
        if self.true_freqs is not None:
            f = np.asarray(self.true_freqs, dtype=float)
            if f.shape != (p,):
                raise DimensionMismatch("true_freqs must have one entry per variant")
            if np.any((f <= 0) | (f >= 1)):
                raise UserInputError("true frequencies must lie in (0, 1)")
            object.__setattr__(self, "true_freqs", _frozen(f.copy()))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, rows=None, cols=None) -> RawGenotypeMatrix:
        """Sub-matrix by row/column index arrays or slices, keeping ids aligned."""
        rows = slice(None) if rows is None else rows
        cols = slice(None) if cols is None else cols
        ridx = np.arange(self.n)[rows]
        cidx = np.arange(self.p)[cols]
        return RawGenotypeMatrix(
            values=self.values[np.ix_(ridx, cidx)],
            variant_ids=tuple(self.variant_ids[j] for j in cidx),
            sample_ids=tuple(self.sample_ids[i] for i in ridx),
            true_freqs=None if self.true_freqs is None else self.true_freqs[cidx],
        )


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    sds: np.ndarray
    source: str = EXTERNAL

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        sds = np.asarray(self.sds, dtype=float)
        if means.ndim != 1 or means.shape != sds.shape:
            raise DimensionMismatch("means and sds must be 1-d of equal length")
        bad = np.flatnonzero(~(sds > 0))
        if bad.size:
            raise NonPositiveSd(int(bad[0]))
        if self.source not in (EMPIRICAL, EXTERNAL, TRUE_FREQUENCIES):
            raise UserInputError(f"unknown standardization source {self.source!r}")
        object.__setattr__(self, "means", _frozen(means.copy()))
        object.__setattr__(self, "sds", _frozen(sds.copy()))

    @property
    def p(self) -> int:
        return self.means.shape[0]

    @classmethod
    def from_frequencies(cls, freqs) -> StandardizationParams:
        f = np.asarray(freqs, dtype=float)
        return cls(2.0 * f, np.sqrt(2.0 * f * (1.0 - f)), TRUE_FREQUENCIES)

    @classmethod
    def estimate(cls, M: RawGenotypeMatrix | np.ndarray, source: str = EXTERNAL):
        """Column means and population (divide-by-n) standard deviations."""
        values = M.values if isinstance(M, RawGenotypeMatrix) else np.asarray(M)
        x = values.astype(float)
        means = x.mean(axis=0)
        sds = x.std(axis=0)
        zero = np.flatnonzero(sds <= 0)
        if zero.size:
            raise ZeroVarianceColumn(int(zero[0]))
        return cls(means, sds, source)

    def subset(self, cols) -> StandardizationParams:
        return StandardizationParams(self.means[cols], self.sds[cols], self.source)


@dataclass(frozen=True)
class StandardizedMatrix:
    z: np.ndarray
    params: StandardizationParams
    empirically_centered_on_self: bool = False

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.params.p:
            raise DimensionMismatch("z columns do not match standardization params")
        object.__setattr__(self, "z", _frozen(z))

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        return self.z.shape[1]


@dataclass(frozen=True)
class ContrastMatrix:
    """Semi-orthogonal C ((n-r-1) x n) with C C^T = I and C X_full = 0."""

    c: np.ndarray
    method: str

    def __post_init__(self):
        object.__setattr__(self, "c", _frozen(np.asarray(self.c, dtype=float)))

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def n(self) -> int:
        return self.c.shape[1]

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self.c @ a

    def projector(self) -> np.ndarray:
        return self.c.T @ self.c


@dataclass(frozen=True)
class SpectralCache:
    """Eigendecomposition of a (contrasted) Gram matrix, eigenvalues descending."""

    eigvals: np.ndarray
    eigvecs: np.ndarray
    trace: float = field(default=float("nan"))

    def __post_init__(self):
        d = np.asarray(self.eigvals, dtype=float)
        U = np.asarray(self.eigvecs, dtype=float)
        if U.shape != (d.size, d.size):
            raise DimensionMismatch("eigvecs must be m x m for m eigenvalues")
        object.__setattr__(self, "eigvals", _frozen(d))
        object.__setattr__(self, "eigvecs", _frozen(U))
        if math.isnan(self.trace):
            object.__setattr__(self, "trace", float(d.sum()))

    @property
    def m(self) -> int:
        return self.eigvals.size

    def rotate(self, y) -> np.ndarray:
        """b = U^T y."""
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.m:
            raise DimensionMismatch(f"vector of length {y.shape[0]} for spectrum of size {self.m}")
        return self.eigvecs.T @ y

    def gram(self) -> np.ndarray:
        return (self.eigvecs * self.eigvals) @ self.eigvecs.T

    def drop_last(self) -> SpectralCache:
        """Spectrum of C K C^T for C = the leading m-1 eigenvectors (diagonal, identity basis)."""
        return SpectralCache(self.eigvals[:-1].copy(), np.eye(self.m - 1))


def _as_z(Z) -> np.ndarray:
    return Z.z if isinstance(Z, StandardizedMatrix) else np.asarray(Z, dtype=float)


def drop_monomorphic(M: RawGenotypeMatrix) -> tuple[RawGenotypeMatrix, np.ndarray]:
    """Remove constant columns; returns the filtered matrix and the kept column indices."""
    keep = np.flatnonzero(M.values.min(axis=0) != M.values.max(axis=0))
    if keep.size == M.p:
        return M, keep
    log.info("dropping %d monomorphic variants", M.p - keep.size)
    return M.subset(cols=keep), keep


def standardize_empirical(M: RawGenotypeMatrix) -> StandardizedMatrix:
    """Center and scale every column with its own mean and population sd."""
    params = StandardizationParams.estimate(M, source=EMPIRICAL)
    z = (M.values - params.means) / params.sds
    return StandardizedMatrix(z, params, empirically_centered_on_self=True)


def apply_standardization(M: RawGenotypeMatrix, params: StandardizationParams) -> StandardizedMatrix:
    if params.p != M.p:
        raise DimensionMismatch(f"params for {params.p} variants, matrix has {M.p}")
    z = (M.values - params.means) / params.sds
    return StandardizedMatrix(z, params, empirically_centered_on_self=False)


def _normalize_signs(U: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each eigenvector made positive.
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def gram_spectrum(Z, C: ContrastMatrix | None = None) -> SpectralCache:
    """Eigendecomposition of ``Z Z^T`` or ``C Z Z^T C^T``.

    Eigenvalues come back in descending order; values below ``1e-8 * trace``
    are set to exactly zero.
    """
    z = _as_z(Z)
    if C is not None:
        if C.n != z.shape[0]:
            raise DimensionMismatch(f"contrast has {C.n} columns, Z has {z.shape[0]} rows")
        z = C.c @ z
    K = z @ z.T
    try:
        w, U = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition did not converge: {exc}") from exc
    w = w[::-1].copy()
    U = _normalize_signs(U[:, ::-1])
    trace = float(np.trace(K))
    w[w < CLAMP_RELATIVE * max(trace, 0.0)] = 0.0
    return SpectralCache(w, U, trace)


def is_constant_vector(v: np.ndarray, tol: float = CONSTANT_TOLERANCE) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.max(np.abs(v - v.mean())) < tol * np.linalg.norm(v))


def contrast_from_svd(cache: SpectralCache) -> ContrastMatrix:
    """Contrast made of every eigenvector except the constant null one.

    Only valid when the Gram comes from an empirically centered matrix with a
    single zero eigenvalue (intercept, no covariates, p >= n).
    """
    d = cache.eigvals
    if d.size < 2 or d[-1] != 0.0:
        raise NoConstantNullEigenvector("smallest eigenvalue is not zero")
    if d.size > 2 and d[-2] == 0.0:
        raise NoConstantNullEigenvector("null space has dimension > 1; use the QR contrast")
    if not is_constant_vector(cache.eigvecs[:, -1]):
        raise NoConstantNullEigenvector("eigenvector of the zero eigenvalue is not constant")
    return ContrastMatrix(cache.eigvecs[:, :-1].T.copy(), "svd-constant-vector")


def intercept_design(n: int, covariates: np.ndarray | None = None) -> np.ndarray:
    """n x (r+1) matrix [1, X]."""
    ones = np.ones((n, 1))
    if covariates is None:
        return ones
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise DimensionMismatch(f"covariates have {X.shape[0]} rows, expected {n}")
    return np.hstack([ones, X])


def contrast_from_qr(X_full: np.ndarray) -> ContrastMatrix:
    """C = Q2^T from the complete QR decomposition of [1, X]."""
    X = np.asarray(X_full, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if k >= n:
        raise RankDeficientCovariates(f"{k} fixed-effect columns for {n} samples")
    if not np.allclose(X[:, 0], 1.0):
        raise UserInputError("first column of X_full must be the intercept column of ones")
    Q, R = np.linalg.qr(X, mode="complete")
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0) * math.sqrt(n):
        raise RankDeficientCovariates("fixed-effect design is not of full column rank")
    return ContrastMatrix(Q[:, k:].T.copy(), "qr")


# --------------------------------------------------------------------- I/O


def _read_whitespace_rows(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


def impute_missing(counts: np.ndarray) -> np.ndarray:
    """Replace -1 entries by the rounded column mean of the observed counts."""
    counts = counts.astype(np.int8, copy=True)
    missing = counts < 0
    if not missing.any():
        return counts
    observed = np.where(missing, 0, counts).astype(float)
    n_obs = (~missing).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = observed.sum(axis=0) / n_obs
    if (n_obs == 0).any():
        log.warning("%d variants have no observed genotype; filled with 0", int((n_obs == 0).sum()))
        means[n_obs == 0] = 0.0
    fill = np.floor(means + 0.5).astype(np.int8)
    rows, cols = np.nonzero(missing)
    counts[rows, cols] = fill[cols]
    return counts


def decode_bed(payload: bytes, n: int, p: int) -> np.ndarray:
    """Decode a SNP-major .bed payload (after the 3 header bytes) to n x p counts, -1 = missing."""
    per_variant = (n + 3) // 4
    expected = per_variant * p
    if len(payload) < expected:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise InconsistentDimensions(
            f"payload has {len(payload)} bytes, expected {expected} for {n} samples x {p} variants"
        )
    data = np.frombuffer(payload, dtype=np.uint8).reshape(p, per_variant)
    codes = (data[:, :, None] >> np.array([0, 2, 4, 6], dtype=np.uint8)) & 0b11
    codes = codes.reshape(p, per_variant * 4)[:, :n]
    return _BED_LOOKUP[codes].T.copy()


def encode_bed(counts: np.ndarray) -> bytes:
    """Inverse of :func:`decode_bed` including the header; -1 encodes missing."""
    counts = np.asarray(counts)
    n, p = counts.shape
    # indexed by count + 1: missing, 0, 1, 2 copies of A1
    codes = np.array([0b01, 0b11, 0b10, 0b00], dtype=np.uint8)[counts.T.astype(int) + 1]
    per_variant = (n + 3) // 4
    padded = np.zeros((p, per_variant * 4), dtype=np.uint8)
    padded[:, :n] = codes
    quads = padded.reshape(p, per_variant, 4)
    packed = quads[:, :, 0] | (quads[:, :, 1] << 2) | (quads[:, :, 2] << 4) | (quads[:, :, 3] << 6)
    return BED_MAGIC + bytes([BED_SNP_MAJOR]) + packed.astype(np.uint8).tobytes()


def read_plink_bed(bed_path, bim_path, fam_path) -> RawGenotypeMatrix:
    """Read a PLINK 1 binary trio; missing calls are mean-imputed."""
    fam = _read_whitespace_rows(Path(fam_path))
    bim = _read_whitespace_rows(Path(bim_path))
    if any(len(r) < 2 for r in fam) or any(len(r) < 2 for r in bim):
        raise InconsistentDimensions("malformed .fam or .bim row")
    n, p = len(fam), len(bim)
    raw = Path(bed_path).read_bytes()
    if len(raw) < 3 or raw[:2] != BED_MAGIC:
        raise BadMagic(f"{bed_path}: not a PLINK .bed file")
    if raw[2] != BED_SNP_MAJOR:
        raise BadMagic(f"{bed_path}: only SNP-major mode (0x01) is supported")
    counts = decode_bed(raw[3:], n, p)
    n_missing = int((counts < 0).sum())
    if n_missing:
        log.info("imputing %d missing genotypes", n_missing)
    return RawGenotypeMatrix(
        impute_missing(counts),
        variant_ids=tuple(r[1] for r in bim),
        sample_ids=tuple(r[1] for r in fam),
    )


def write_plink_bed(M: RawGenotypeMatrix | np.ndarray, prefix) -> tuple[Path, Path, Path]:
    """Write a .bed/.bim/.fam trio (used for fixtures and round trips)."""
    if not isinstance(M, RawGenotypeMatrix):
        counts = np.asarray(M)
        n, p = counts.shape
        vids = [f"v{j}" for j in range(p)]
        sids = [f"s{i}" for i in range(n)]
    else:
        counts, vids, sids = M.values, M.variant_ids, M.sample_ids
    prefix = Path(prefix)
    bed, bim, fam = (prefix.with_suffix(s) for s in (".bed", ".bim", ".fam"))
    bed.write_bytes(encode_bed(counts))
    bim.write_text("".join(f"1\t{v}\t0\t{j + 1}\tA\tC\n" for j, v in enumerate(vids)), encoding="utf-8")
    fam.write_text("".join(f"{s}\t{s}\t0\t0\t0\t-9\n" for s in sids), encoding="utf-8")
    return bed, bim, fam


SAMPLE_ID = "sample_id"


def read_genotype_csv(path) -> RawGenotypeMatrix:
    """Header of variant ids (optionally led by ``sample_id``), rows of 0/1/2, '.' missing."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InconsistentDimensions(f"{path}: empty genotype file")
    header, body = rows[0], [r for r in rows[1:] if r]
    has_ids = bool(header) and header[0] == SAMPLE_ID
    vids = header[1:] if has_ids else header
    sids = []
    counts = np.empty((len(body), len(vids)), dtype=np.int8)
    for i, row in enumerate(body):
        if has_ids:
            sids.append(row[0])
            row = row[1:]
        if len(row) != len(vids):
            raise InconsistentDimensions(f"{path}: row {i + 1} has {len(row)} entries, expected {len(vids)}")
        for j, tok in enumerate(row):
            tok = tok.strip()
            if tok == ".":
                counts[i, j] = -1
            elif tok in ("0", "1", "2"):
                counts[i, j] = int(tok)
            else:
                raise InvalidGenotype(f"{path}: row {i + 1}, column {j + 1}: {tok!r}")
    return RawGenotypeMatrix(impute_missing(counts), variant_ids=tuple(vids), sample_ids=tuple(sids))


def write_genotype_csv(M: RawGenotypeMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([SAMPLE_ID, *M.variant_ids])
        for sid, row in zip(M.sample_ids, M.values):
            w.writerow([sid, *(int(v) for v in row)])


def read_table_csv(path) -> tuple[tuple[str, ...], list[str], np.ndarray]:
    """Phenotype/covariate CSV: ``sample_id`` column plus named numeric columns."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or not rows[0] or rows[0][0] != SAMPLE_ID:
        raise InconsistentDimensions(f"{path}: first column must be {SAMPLE_ID!r}")
    names = rows[0][1:]
    ids, data = [], []
    for i, row in enumerate(rows[1:]):
        if len(row) != len(names) + 1:
            raise InconsistentDimensions(f"{path}: row {i + 1} has {len(row)} fields")
        ids.append(row[0])
        try:
            data.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise UserInputError(f"{path}: row {i + 1}: {exc}") from exc
    return tuple(ids), names, np.asarray(data, dtype=float).reshape(len(ids), len(names))


def write_table_csv(path, sample_ids: Sequence[str], names: Sequence[str], data: np.ndarray) -> None:
    data = np.asarray(data, dtype=float).reshape(len(sample_ids), len(names))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([SAMPLE_ID, *names])
        for sid, row in zip(sample_ids, data):
            w.writerow([sid, *(repr(float(v)) for v in row)])


def align_rows(target_ids: Sequence[str], ids: Sequence[str], data: np.ndarray) -> np.ndarray:
    """Reorder table rows to ``target_ids``; every target id must be present."""
    index = {s: i for i, s in enumerate(ids)}
    missing = [s for s in target_ids if s not in index]
    if missing:
        raise InconsistentDimensions(f"{len(missing)} samples missing from table, e.g. {missing[0]!r}")
    return np.asarray(data)[[index[s] for s in target_ids]]
