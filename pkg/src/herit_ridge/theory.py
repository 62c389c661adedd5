"""Closed-form approximations of ridge prediction accuracy in terms of n, p and h2.

All functions assume independent standardized markers, unit phenotypic
variance and the penalty ``lambda = p (1 - h2) / h2``.  They accept scalars or
broadcastable arrays; ``n`` and ``p`` may be non-integer so curves can be drawn
over a continuous n/p ratio.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from herit_ridge.errors import InvalidInversion, OutOfRange

log = logging.getLogger(__name__)

HIGH_DIM = "high-dim"
LOW_DIM = "low-dim"


def _check(n, p, h2):
    n, p, h2 = (np.asarray(v, dtype=float) for v in (n, p, h2))
    if np.any(n <= 0) or np.any(p <= 0):
        raise OutOfRange("n and p must be positive")
    if np.any((h2 <= 0) | (h2 >= 1)):
        raise OutOfRange("h2 must lie strictly between 0 and 1")
    return n, p, h2


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def theoretical_test_mse(n, p, h2):
    """Expected test-set squared error; high-dimensional branch when p >= n."""
    n, p, h2 = _check(n, p, h2)
    r = n / p
    high = 1.0 - r * h2**2
    low = (1.0 - h2) * (1.0 + r * h2) / (1.0 + h2 * (r - 1.0))
    return _out(np.where(p >= n, high, low))


def mse_decomposition(n, p, h2):
    """(irreducible, variance, bias) terms whose sum is :func:`theoretical_test_mse`."""
    n, p, h2 = _check(n, p, h2)
    r = n / p
    sigma2 = 1.0 - h2
    denom = 1.0 + h2 * (r - 1.0)
    var_high = sigma2 * h2**2 * r
    bias_high = h2 * (1.0 + r * (h2**2 - 2.0 * h2))
    var_low = sigma2 / r * (r * h2 / denom) ** 2
    bias_low = h2 * (sigma2 / denom) ** 2
    high = p >= n
    return (
        _out(np.broadcast_to(sigma2, np.broadcast(n, p, h2).shape).copy()),
        _out(np.where(high, var_high, var_low)),
        _out(np.where(high, bias_high, bias_low)),
    )


def theoretical_train_mse(n, p, h2):
    """Expected training-set squared error."""
    n, p, h2 = _check(n, p, h2)
    lam = p * (1.0 - h2) / h2
    a = n / (n + lam)
    c = (p / n) * (1.0 - h2) + h2
    low = 1.0 - 2.0 * a * c + a**2 * c
    return _out(np.where(p > n, (1.0 - h2) ** 2, low))


def theoretical_corr2(n, p, h2):
    """Expected squared correlation between test phenotype and prediction."""
    n, p, h2 = _check(n, p, h2)
    high = (n / p) * h2**2
    low = h2**2 / ((p / n) * (1.0 - h2) + h2)
    return _out(np.where(n < p, high, low))


@dataclass(frozen=True)
class TheoryPoint:
    n: float
    p: float
    h2: float
    test_mse: float
    train_mse: float
    corr2: float
    regime: str


def theory_point(n, p, h2) -> TheoryPoint:
    return TheoryPoint(
        n=float(n),
        p=float(p),
        h2=float(h2),
        test_mse=theoretical_test_mse(n, p, h2),
        train_mse=theoretical_train_mse(n, p, h2),
        corr2=theoretical_corr2(n, p, h2),
        regime=HIGH_DIM if p >= n else LOW_DIM,
    )


def theory_curve(h2: float, log_ratios) -> list[TheoryPoint]:
    """Theory values along log(n/p), evaluated with p = 1 and n = exp(log_ratio)."""
    return [theory_point(float(np.exp(x)), 1.0, h2) for x in np.asarray(log_ratios, dtype=float)]


@dataclass(frozen=True)
class EffectiveRatioFit:
    ratio_p_over_pe: float
    per_n_estimates: tuple[tuple[float, float], ...]
    r2_of_fit: float
    n_dropped: int = 0
    n_clipped: int = 0


def fit_effective_ratio(observations: Iterable[tuple[float, float, float]], h2: float) -> EffectiveRatioFit:
    """Fit p/p_e from observed normalized test errors in the p > n regime.

    Each observation (n, p, mse) is inverted through ``mse = 1 - (n/p_e) h2^2``
    and the resulting n/p_e values are regressed on n/p through the origin.
    """
    if not 0 < h2 < 1:
        raise OutOfRange("h2 must lie strictly between 0 and 1")
    xs, ys, pairs = [], [], []
    dropped = clipped = 0
    for n, p, mse in observations:
        if not p > n:
            raise OutOfRange(f"observation with n={n}, p={p} is not in the p > n regime")
        if mse >= 1.0:
            log.warning("observed error %.4f >= 1 at n=%s, p=%s; observation dropped", mse, n, p)
            dropped += 1
            continue
        if mse < 1.0 - h2:
            clipped += 1
            mse = 1.0 - h2
        est = (1.0 - mse) / h2**2
        xs.append(n / p)
        ys.append(est)
        pairs.append((float(n), float(est)))
    if not xs:
        raise InvalidInversion("no observation could be inverted (all errors >= 1)")
    x, y = np.asarray(xs), np.asarray(ys)
    slope = float(x @ y / (x @ x))
    r2 = 1.0 - float(((y - slope * x) ** 2).sum() / (y @ y))
    if not slope > 0:
        raise InvalidInversion(f"fitted ratio {slope} is not positive")
    return EffectiveRatioFit(slope, tuple(pairs), r2, dropped, clipped)
