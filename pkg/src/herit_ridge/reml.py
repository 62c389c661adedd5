"""Single-variance-component REML heritability from a contrasted Gram spectrum.

With ``y_c = C y`` and ``K_c = C Z Z^T C^T = U diag(d) U^T`` the restricted
model is ``y_c ~ N(0, s2 * (h2 * K_c / p + (1 - h2) I))``.  Profiling the total
scale ``s2`` out leaves a one-dimensional objective in h2 that costs O(m) per
evaluation once ``b = U^T y_c`` is known.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from herit_ridge.errors import DimensionMismatch, OutOfRange
from herit_ridge.geno import SpectralCache, StandardizedMatrix

log = logging.getLogger(__name__)

H2_LOWER = 1e-4
H2_UPPER = 1.0 - 1e-4
XATOL = 1e-5
COARSE_POINTS = 50
MAX_ITER = 200


@dataclass(frozen=True)
class RemlFit:
    h2: float
    tau: float
    sigma2: float
    loglik: float
    iterations: int
    converged: bool = True
    boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "h2": self.h2,
            "tau": self.tau,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "boundary": self.boundary,
        }


def _weights(eigvals: np.ndarray, h2, p: int) -> np.ndarray:
    h2 = np.asarray(h2, dtype=float)[..., None]
    return h2 * eigvals / p + (1.0 - h2)


def profile_loglik(eigvals: np.ndarray, b: np.ndarray, h2, p: int):
    """Profiled restricted log-likelihood (constants dropped); vectorized over h2."""
    w = _weights(eigvals, h2, p)
    m = eigvals.size
    scale = (b**2 / w).sum(axis=-1) / m
    out = -0.5 * (m * np.log(scale) + np.log(w).sum(axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def profile_scale(eigvals: np.ndarray, b: np.ndarray, h2: float, p: int) -> float:
    w = _weights(eigvals, h2, p)
    return float((b**2 / w).sum() / eigvals.size)


def reml_profile_h2(cache: SpectralCache, y_contrasted, p: int) -> RemlFit:
    """Maximize the profiled restricted likelihood over h2 in [1e-4, 1 - 1e-4].

    A coarse grid brackets the maximum, then a bounded Brent search refines it
    to ``|dh2| < 1e-5``.  If the refinement fails the best grid point is
    returned with ``converged=False``.
    """
    y = np.asarray(y_contrasted, dtype=float)
    if y.shape != (cache.m,):
        raise DimensionMismatch(f"response of length {y.shape[0]} for spectrum of size {cache.m}")
    if p < 1:
        raise OutOfRange("p must be >= 1")
    d = cache.eigvals
    b = cache.rotate(y)
    grid = np.linspace(H2_LOWER, H2_UPPER, COARSE_POINTS)
    ll = profile_loglik(d, b, grid, p)
    i = int(np.argmax(ll))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(
        lambda h: -profile_loglik(d, b, h, p),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": XATOL, "maxiter": MAX_ITER},
    )
    if res.success and -res.fun >= ll[i]:
        h2, loglik, iters, converged = float(res.x), float(-res.fun), int(res.nfev), True
    else:
        if not res.success:
            log.warning("REML refinement did not converge; returning best grid point")
        h2, loglik, iters, converged = float(grid[i]), float(ll[i]), int(res.nfev), bool(res.success)
    # snap to the bound when the optimum sits on it
    for edge in (H2_LOWER, H2_UPPER):
        if abs(h2 - edge) < 2 * XATOL and profile_loglik(d, b, edge, p) >= loglik:
            h2, loglik = edge, float(profile_loglik(d, b, edge, p))
    boundary = h2 in (H2_LOWER, H2_UPPER)
    s2 = profile_scale(d, b, h2, p)
    return RemlFit(
        h2=h2,
        tau=h2 * s2 / p,
        sigma2=(1.0 - h2) * s2,
        loglik=loglik,
        iterations=iters,
        converged=converged,
        boundary=boundary,
    )


def reml_estimate(Z: StandardizedMatrix, y, covariates=None, setup=None):
    """REML heritability as an :class:`~herit_ridge.ridge.H2Estimate` (contrast chosen as for GCV)."""
    from herit_ridge.ridge import REML, H2Estimate, h2_to_lambda, projection_setup

    C, cache_c = setup if setup is not None else projection_setup(Z, covariates)
    fit = reml_profile_h2(cache_c, C.apply(np.asarray(y, dtype=float)), Z.p)
    return H2Estimate(
        h2=fit.h2,
        lam=h2_to_lambda(fit.h2, Z.p),
        method=REML,
        n_used=cache_c.m,
        p_used=Z.p,
        boundary=fit.boundary,
        details=fit.to_dict(),
    )
