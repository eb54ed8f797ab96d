"""Diagonal lower bounds R <= H^T H.

``diagonal_bound_sdp`` solves

    maximize sum(r)  subject to  r_n >= alpha_min,  G - diag(r) PSD

with a log-barrier interior-point method on the vector ``r``. The feasible
set touches ``alpha_min * 1`` and has no interior in exact arithmetic
(the minimum eigenvector pins ``r_n = alpha_min`` wherever it is non-zero),
so the lower bound is relaxed by ``delta = 1e-8 * ||G||`` during the solve
and restored by clipping afterwards. The resulting bound is PSD-feasible to
within ``delta``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .operators import min_eigenvalue

DELTA_REL = 1e-8


class BoundError(RuntimeError):
    pass


class ConvergenceError(BoundError):
    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass
class DiagonalBound:
    r: np.ndarray
    alpha_min: float
    margin: float
    method: str
    iterations: int = 0

    @property
    def R(self):
        return np.diag(self.r)


def _check_gram(G):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("G must be square")
    scale = max(1.0, np.abs(G).max()) if G.size else 1.0
    if not np.allclose(G, G.T, rtol=0, atol=1e-10 * scale):
        raise ValueError("G must be symmetric")
    return 0.5 * (G + G.T)


def certify(G, r, tol=None):
    """Minimum eigenvalue of G - diag(r) and whether it is >= -tol.

    ``tol`` defaults to ``1e-7 * ||G||_2``.
    """
    G = _check_gram(G)
    r = np.asarray(r, dtype=float)
    if r.shape != (G.shape[0],):
        raise ValueError("r does not match G")
    if G.size == 0:
        return True, np.inf
    if tol is None:
        tol = 1e-7 * _norm2(G)
    margin = min_eigenvalue(G - np.diag(r))
    return bool(margin >= -tol), margin


def _norm2(G):
    if G.size == 0:
        return 0.0
    return float(np.max(np.abs(linalg.eigvalsh(G))))


def diagonal_bound_simple(G):
    """The GNC-style bound R = alpha_min * I."""
    G = _check_gram(G)
    K = G.shape[0]
    if K == 0:
        return DiagonalBound(np.zeros(0), np.inf, np.inf, "simple")
    alpha = max(min_eigenvalue(G), 0.0)
    r = np.full(K, alpha)
    return DiagonalBound(r, alpha, min_eigenvalue(G - np.diag(r)), "simple")


def _barrier_terms(Gs, s):
    """Inverse and log-determinant of Gs - diag(s) via Cholesky."""
    c = linalg.cho_factor(Gs - np.diag(s), lower=True, check_finite=False)
    Sinv = linalg.cho_solve(c, np.eye(Gs.shape[0]), check_finite=False)
    return Sinv, 2.0 * np.sum(np.log(np.diag(c[0])))


def diagonal_bound_sdp(G, tol=1e-9, max_newton=200):
    """Maximal diagonal lower bound of ``G`` (sum of entries maximised)."""
    G = _check_gram(G)
    K = G.shape[0]
    if K == 0:
        return DiagonalBound(np.zeros(0), np.inf, np.inf, "sdp")
    norm = _norm2(G)
    alpha = min_eigenvalue(G)
    if alpha < -1e-8 * max(norm, 1.0):
        raise BoundError(f"G is not positive semidefinite (min eigenvalue {alpha:.3e})")
    alpha = max(alpha, 0.0)
    if norm == 0.0:
        return DiagonalBound(np.zeros(K), 0.0, 0.0, "sdp")
    if np.count_nonzero(G - np.diag(np.diag(G))) == 0:
        r = np.diag(G).copy()
        return DiagonalBound(r, alpha, min_eigenvalue(G - np.diag(r)), "sdp")

    # work in the slack s = r - lower, so the lower-bound barrier is exact
    delta = DELTA_REL * norm
    lower = alpha - delta
    Gs = G - lower * np.eye(K)
    s = np.full(K, 0.5 * delta)

    def centering_obj(s, mu):
        if np.any(s <= 0):
            return np.inf
        try:
            _, logdet = _barrier_terms(Gs, s)
        except linalg.LinAlgError:
            return np.inf
        return -np.sum(s) / mu - logdet - np.sum(np.log(s))

    mu = norm / K
    mu_final = tol * norm / K
    iters = 0
    while True:
        for _ in range(max_newton):
            Sinv, _ = _barrier_terms(Gs, s)
            grad = -1.0 / mu + np.diag(Sinv) - 1.0 / s
            hess = Sinv**2 + np.diag(1.0 / s**2)
            d = 1.0 / np.sqrt(np.diag(hess))
            try:
                c = linalg.cho_factor(d[:, None] * hess * d[None, :], lower=True)
                step = -d * linalg.cho_solve(c, d * grad)
            except linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec2 = float(-grad @ step)
            iters += 1
            # suboptimality of the centring step is about mu * dec2 / 2; the barrier
            # value itself is only accurate to ~1e-8 near the boundary
            if dec2 < 1e-6:
                break
            f0 = centering_obj(s, mu)
            t = 1.0
            while t > 1e-12:
                f1 = centering_obj(s + t * step, mu)
                if f1 <= f0 - 0.25 * t * dec2:
                    break
                t *= 0.5
            else:
                # no decrease representable in floating point: centred as far as possible
                break
            s = s + t * step
            if np.max(np.abs(t * step)) <= 1e-15 * (abs(lower) + np.max(s)):
                break
        else:
            raise ConvergenceError("barrier Newton iterations did not converge", _finish(G, lower + s, alpha, iters))
        if mu <= mu_final:
            break
        mu = max(mu / 10.0, mu_final)
    return _finish(G, lower + s, alpha, iters)


def _finish(G, r, alpha, iters):
    margin = min_eigenvalue(G - np.diag(r))
    # a uniform shift by the margin keeps G - diag(r) PSD: it lifts a
    # strictly feasible iterate and repairs a slightly infeasible one
    r = r + margin
    r = np.maximum(r, alpha)
    return DiagonalBound(r, alpha, min_eigenvalue(G - np.diag(r)), "sdp", iters)


def diagonal_bound(G, method="sdp", tol=1e-9):
    if method == "sdp":
        return diagonal_bound_sdp(G, tol=tol)
    if method == "simple":
        return diagonal_bound_simple(G)
    raise ValueError(f"unknown bound method {method!r}")
