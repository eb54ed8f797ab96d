"""Sparsity-penalized least squares.

Minimises ``F(x) = 0.5*||y - H x||^2 + sum_n lam_n * phi(x_n; a_n)`` by
majorization-minimization: each penalty term is bounded above by a
quadratic touching it at the current iterate, so every step is a weighted
least-squares solve. Solves are written in terms of the inverse weights
``w_n = |x_n| / (lam_n phi'(|x_n|))`` which vanish for zero coordinates, so
zeros need no special casing inside the linear algebra. For the ARMA
operator ``H = A^{-1} B`` the solve reduces to a banded system

    x = W B^T (A A^T + B W B^T)^{-1} A y.

After MM settles, a few Newton steps on the support polish the iterate and
zero coordinates that violate the optimality conditions are released.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal

from .operators import ArmaOperator, DenseOperator, LinearOperator, gram
from .penalties import (
    ConvexityError,
    PenaltySpec,
    in_parameter_set,
    penalty_deriv,
    penalty_value,
)

log = logging.getLogger(__name__)

ZERO_LOCK = 1e-10
SUPPORT_EPS = 1e-3


class SolverError(RuntimeError):
    pass


@dataclass
class ProblemSpec:
    """Data of one sparsity-penalized least-squares instance.

    ``bound`` optionally records the diagonal lower bound ``r`` of ``H^T H``
    from which ``a`` was derived; when present it is used to certify
    convexity (``a_n <= r_n / lam_n``).
    """

    y: np.ndarray
    H: LinearOperator
    lam: np.ndarray
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    a: np.ndarray = None
    bound: np.ndarray = None

    def __post_init__(self):
        if not isinstance(self.H, LinearOperator):
            self.H = DenseOperator(self.H)
        M, N = self.H.shape
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (M,):
            raise ValueError(f"y has shape {self.y.shape}, operator expects ({M},)")
        self.lam = np.broadcast_to(np.asarray(self.lam, dtype=float), (N,)).copy()
        if np.any(self.lam <= 0):
            raise ValueError("lam must be positive")
        a = self.penalty.a if self.a is None else self.a
        self.a = np.broadcast_to(np.asarray(a, dtype=float), (N,)).copy()
        if np.any(self.a < 0):
            raise ValueError("a must be non-negative")
        if self.bound is not None:
            self.bound = np.asarray(self.bound, dtype=float)

    @property
    def spec(self):
        return self.penalty.with_a(self.a)

    def is_certified_convex(self):
        if self.penalty.kind == "abs" or not np.any(self.a > 0):
            return True
        if self.penalty.kind not in ("log", "atan") or self.bound is None:
            return False
        r = self.bound
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = np.where(r > 0, in_parameter_set(self.lam / np.where(r > 0, r, 1), self.a), self.a == 0)
        return bool(np.all(ok))


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    optimality_max_violation: float
    support: np.ndarray
    history: list = field(default_factory=list, repr=False)


def objective(problem, x):
    x = np.asarray(x, dtype=float)
    resid = problem.y - problem.H.matvec(x)
    return 0.5 * float(resid @ resid) + float(np.sum(problem.lam * _phi(problem, x)))


def _phi(problem, x):
    return penalty_value(problem.spec, x)


def support(x, eps=SUPPORT_EPS):
    """Indices with ``|x_n| > eps``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return np.flatnonzero(np.abs(np.asarray(x)) > eps)


def check_optimality(problem, x):
    """Maximum violation of the first-order optimality conditions.

    With ``c = H^T (y - H x)``, a minimiser satisfies ``c_n = lam_n phi'(x_n)``
    on its support and ``|c_n| <= lam_n phi'(0+)`` elsewhere. The violation
    is the largest distance (in the units of ``c``) from these sets. The
    scatter pairs ``(x_n a_n, c_n / lam_n)`` lie on the graph of ``phi'``.
    """
    x = np.asarray(x, dtype=float)
    c = problem.H.rmatvec(problem.y - problem.H.matvec(x))
    spec = problem.spec
    nz = x != 0
    d = penalty_deriv(spec, x, 1)
    d0 = penalty_deriv(spec, np.zeros_like(x), 1)
    lam = problem.lam
    with np.errstate(invalid="ignore"):
        viol = np.where(nz, np.abs(c - lam * d), np.maximum(np.abs(c) - lam * d0, 0.0))
    viol = np.nan_to_num(viol, nan=0.0)
    scatter = np.column_stack([x * problem.a, c / lam])
    return (float(viol.max()) if viol.size else 0.0), scatter


# -- linear-algebra back ends -------------------------------------------------


class _DenseSystem:
    def __init__(self, H, y):
        mat = H.matrix if isinstance(H, DenseOperator) else H.to_dense()
        self.H = DenseOperator(mat)
        self.G = gram(self.H, limit=max(mat.shape[1], 1))
        self.hty = mat.T @ y

    def solve(self, w):
        s = np.sqrt(w)
        K = s[:, None] * self.G * s[None, :]
        K[np.diag_indices_from(K)] += 1.0
        z = linalg.cho_solve(linalg.cho_factor(K, lower=True), s * self.hty)
        return s * z


def _band_lower(c, w, n, bw):
    """Lower band storage of C diag(w) C^T for lower-triangular Toeplitz C."""
    ab = np.zeros((bw + 1, n))
    q = c.size - 1
    for d in range(q + 1):
        for m in range(d, q + 1):
            coef = c[m] * c[m - d]
            if coef == 0.0 or m >= n:
                continue
            i = np.arange(m, n)
            ab[d, i - d] += coef * w[i - m]
    return ab


class _BandedSystem:
    def __init__(self, H, y):
        self.op = H
        self.n = H.n
        self.bw = max(H.a.size, H.b.size) - 1
        self.AAt = _band_lower(H.a, np.ones(self.n), self.n, self.bw)
        self.Ay = signal.lfilter(H.a, [1.0], y)

    def solve(self, w):
        ab = self.AAt + _band_lower(self.op.b, w, self.n, self.bw)
        z = linalg.solveh_banded(ab, self.Ay, lower=True)
        btz = signal.lfilter(self.op.b, [1.0], z[::-1])[::-1]
        return w * btz


def _system(H, y):
    if isinstance(H, ArmaOperator):
        return _BandedSystem(H, y)
    return _DenseSystem(H, y)


# -- majorization-minimization ----------------------------------------------


def _inverse_weights(x, lam, curvature):
    """w = |x| / (lam phi'(|x|)), with small coordinates locked to zero."""
    t = np.abs(x)
    w = np.zeros_like(t)
    nz = t > 0
    w[nz] = t[nz] / (lam[nz] * curvature(t[nz], nz))
    w[w < ZERO_LOCK] = 0.0
    return w


def _mm_loop(system, x, lam, curvature, cost, max_iter, rel_tol, history):
    it = 0
    f_prev = cost(x)
    for it in range(1, max_iter + 1):
        w = _inverse_weights(x, lam, curvature)
        x_new = system.solve(w)
        x_new[w == 0] = 0.0
        f_new = cost(x_new)
        history.append(f_new)
        if f_new > f_prev + 1e-12 * max(1.0, abs(f_prev)):
            log.debug("MM objective increased: %.17g -> %.17g", f_prev, f_new)
        delta = np.linalg.norm(x_new - x) / max(1e-12, np.linalg.norm(x))
        x, f_prev = x_new, f_new
        if delta < rel_tol:
            break
    return x, it


def _newton_polish(problem, x, cost, steps=30):
    """Active-set Newton on the support of ``x``.

    A coordinate whose Newton step would cross zero is stopped at zero and
    dropped from the support; every accepted step decreases F.
    """
    f = cost(x)
    lam_all, spec = problem.lam, problem.spec
    for _ in range(steps):
        S = np.flatnonzero(x)
        if S.size == 0:
            break
        HS = problem.H.subcolumns(S).matrix
        sub = spec.with_a(problem.a[S])
        lam = lam_all[S]
        u = x[S]
        grad = -HS.T @ (problem.y - HS @ u) + lam * penalty_deriv(sub, u, 1)
        if np.max(np.abs(grad)) < 1e-13 * max(1.0, np.max(lam)):
            break
        hess = HS.T @ HS + np.diag(lam * penalty_deriv(sub, u, 2))
        try:
            step = linalg.solve(hess, grad, assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(step * u > 0, u / step, np.inf)
        t_cross = float(ratio.min()) if ratio.size else np.inf
        t = min(1.0, t_cross)
        accepted = False
        while t > 1e-8:
            u_new = u - t * step
            if t >= t_cross:
                u_new[ratio <= t_cross * (1 + 1e-12)] = 0.0
            x_new = np.zeros_like(x)
            x_new[S] = u_new
            f_new = cost(x_new)
            if f_new <= f + 1e-14 * max(1.0, abs(f)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        moved = np.linalg.norm(x_new - x)
        x, f = x_new, f_new
        if moved <= 1e-15 * max(1.0, np.linalg.norm(x)):
            break
    return x


def _release_zeros(problem, x, c, thresh):
    """Move violating zero coordinates off zero by a coordinate-descent step."""
    idx = np.flatnonzero((x == 0) & (np.abs(c) > thresh))
    norms2 = np.sum(problem.H.subcolumns(idx).matrix ** 2, axis=0)
    x = x.copy()
    x[idx] = np.sign(c[idx]) * (np.abs(c[idx]) - thresh[idx]) / np.maximum(norms2, 1e-300)
    return x


def _run(problem, x0, curvature, cost, max_iter, rel_tol, opt_tol, polish=True, chunk=100):
    system = _system(problem.H, problem.y)
    x = problem.H.rmatvec(problem.y) if x0 is None else np.array(x0, dtype=float)
    history = [cost(x)]
    total = 0
    viol = np.inf
    while total < max_iter:
        x, it = _mm_loop(system, x, problem.lam, curvature, cost, min(chunk, max_iter - total), rel_tol, history)
        total += it
        if polish:
            x = _newton_polish(problem, x, cost)
            history.append(cost(x))
        viol, _ = check_optimality(problem, x)
        if viol <= opt_tol:
            break
        c = problem.H.rmatvec(problem.y - problem.H.matvec(x))
        d0 = problem.lam * penalty_deriv(problem.spec, np.zeros_like(x), 1)
        if np.any((x == 0) & (np.abs(c) > d0 + opt_tol)):
            x = _release_zeros(problem, x, c, d0)
            history.append(cost(x))
    return x, total, viol, history


def _curvature_for(problem):
    spec = problem.spec

    def curvature(t, mask):
        return penalty_deriv(spec.with_a(problem.a[mask]), t, 1)

    return curvature


def solve_penalized_ls(problem, max_iter=2000, rel_tol=1e-9, opt_tol=None, x0=None, assume_convex=False):
    """Minimise F for a convex instance and verify the optimality conditions.

    For log/atan penalties with some ``a_n > 0`` the instance must either
    carry a certified bound (``problem.bound``) or the caller must pass
    ``assume_convex=True``.
    """
    if problem.penalty.kind not in ("abs", "log", "atan"):
        raise ValueError(f"penalty {problem.penalty.kind!r} not supported by the convex solver")
    if not assume_convex and not problem.is_certified_convex():
        raise ConvexityError("instance is not certified convex: supply bound r with a_n <= r_n/lam_n")
    if opt_tol is None:
        opt_tol = 1e-5 * float(np.max(problem.lam))
    cost = lambda x: objective(problem, x)  # noqa: E731
    x, iters, viol, history = _run(problem, x0, _curvature_for(problem), cost, max_iter, rel_tol, opt_tol)
    f = cost(x)
    if f > history[0] + 1e-9 * max(1.0, abs(history[0])):
        raise SolverError("objective increased overall; the instance is probably non-convex")
    return SolveReport(
        x=x,
        objective=f,
        iterations=iters,
        converged=viol <= opt_tol,
        optimality_max_violation=viol,
        support=support(x),
        history=history,
    )


def mm_descent(problem, x0, max_iter=2000, rel_tol=1e-12):
    """Plain MM descent from ``x0`` without any convexity requirement.

    Useful for exhibiting distinct stationary points of a non-convex F.
    """
    cost = lambda x: objective(problem, x)  # noqa: E731
    system = _system(problem.H, problem.y)
    history = [cost(np.asarray(x0, dtype=float))]
    x, it = _mm_loop(system, np.array(x0, dtype=float), problem.lam, _curvature_for(problem), cost, max_iter, rel_tol, history)
    viol, _ = check_optimality(problem, x)
    return SolveReport(x, cost(x), it, True, viol, support(x), history)


def solve_weighted_l1(H, y, weights, max_iter=2000, rel_tol=1e-9, x0=None):
    """min 0.5*||y - H x||^2 + sum_n weights_n |x_n|."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    problem = ProblemSpec(y, H, weights, PenaltySpec("abs"))
    return solve_penalized_ls(problem, max_iter=max_iter, rel_tol=rel_tol, x0=x0)


def _lp_objective(H, y, lam, p, x, eps=0.0):
    r = y - H.matvec(x)
    return 0.5 * float(r @ r) + lam * float(np.sum((np.abs(x) + eps) ** p - eps**p))


def solve_lp_irl2(H, y, lam=1.0, p=0.7, eps=1e-8, max_outer=50, rel_tol=1e-8, x0=None):
    """Iteratively reweighted least squares for 0.5||y - Hx||^2 + lam sum |x_n|^p.

    Each outer iteration is one quadratic-majorizer (MM) step on the
    smoothed penalty ``(|x| + eps)^p``.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not isinstance(H, LinearOperator):
        H = DenseOperator(H)
    y = np.asarray(y, dtype=float)
    N = H.shape[1]
    lam_vec = np.full(N, float(lam))
    system = _system(H, y)

    def curvature(t, mask):
        return p * (t + eps) ** (p - 1)

    cost = lambda x: _lp_objective(H, y, lam, p, x, eps)  # noqa: E731
    x = H.rmatvec(y) if x0 is None else np.array(x0, dtype=float)
    history = [cost(x)]
    x, it = _mm_loop(system, x, lam_vec, curvature, cost, max_outer, rel_tol, history)
    return _lp_report(H, y, lam, p, x, it, history)


def solve_lp_irl1(H, y, lam=1.0, p=0.7, eps=1e-8, max_outer=50, rel_tol=1e-8, x0=None, inner_iter=2000):
    """Iteratively reweighted l1 for 0.5||y - Hx||^2 + lam sum |x_n|^p.

    Starts from the l1 solution with the same ``lam``; each outer step
    solves a weighted l1 problem with weights ``lam p (|x_n| + eps)^(p-1)``.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not isinstance(H, LinearOperator):
        H = DenseOperator(H)
    y = np.asarray(y, dtype=float)
    N = H.shape[1]
    if x0 is None:
        x = solve_weighted_l1(H, y, np.full(N, float(lam)), max_iter=inner_iter).x
    else:
        x = np.array(x0, dtype=float)
    cost = lambda x: _lp_objective(H, y, lam, p, x, eps)  # noqa: E731
    history = [cost(x)]
    it = 0
    for it in range(1, max_outer + 1):
        weights = lam * p * (np.abs(x) + eps) ** (p - 1)
        x_new = solve_weighted_l1(H, y, weights, max_iter=inner_iter, x0=x).x
        history.append(cost(x_new))
        delta = np.linalg.norm(x_new - x) / max(1e-12, np.linalg.norm(x))
        x = x_new
        if delta < rel_tol:
            break
    return _lp_report(H, y, lam, p, x, it, history)


def _lp_report(H, y, lam, p, x, iters, history):
    return SolveReport(
        x=x,
        objective=_lp_objective(H, y, lam, p, x),
        iterations=iters,
        converged=True,
        optimality_max_violation=float("nan"),
        support=support(x),
        history=history,
    )


def debias(H, y, supp):
    """Unpenalized least squares restricted to ``supp``; zeros elsewhere."""
    if not isinstance(H, LinearOperator):
        H = DenseOperator(H)
    supp = np.asarray(supp, dtype=int)
    x = np.zeros(H.shape[1])
    if supp.size == 0:
        return x
    if supp.size > H.shape[0]:
        raise ValueError("support larger than the number of observations")
    HS = H.subcolumns(supp).matrix
    u, _, rank, _ = np.linalg.lstsq(HS, np.asarray(y, dtype=float), rcond=None)
    if rank < supp.size:
        warnings.warn("rank-deficient support; using the minimum-norm solution", RuntimeWarning)
    x[supp] = u
    return x


def select_lambda(H, sigma):
    """Three-sigma rule: lam_n = 3 sigma ||H[:, n]||_2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lam = 3.0 * sigma * H.column_norms()
    if np.any(lam == 0):
        warnings.warn("zero column norm: coordinate left unregularized", RuntimeWarning)
    return lam
