"""Iterative maximally sparse convex (IMSC) regularization.

Starting from the l1 solution, each outer iteration restricts ``H`` to the
columns on the current support, computes a diagonal lower bound ``r`` of the
restricted Gram matrix and re-solves with the most non-convex penalty that
keeps the restricted cost convex (``a_n = beta r_n / lam_n``). Supports can
only shrink, so the loop stops as soon as the support size stops decreasing.
"""

from dataclasses import dataclass, field

import numpy as np

from .bound import certify, diagonal_bound
from .operators import DenseOperator, LinearOperator, gram
from .penalties import PenaltySpec
from .solvers import ProblemSpec, SolverError, objective, solve_penalized_ls, solve_weighted_l1
from .solvers import support as eps_support

SUPPORT_EPS = 1e-3


class ImscError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass
class ImscConfig:
    beta: float = 1.0
    penalty: str = "atan"
    bound_method: str = "sdp"
    max_outer: int = 10
    support_eps: float = SUPPORT_EPS
    max_iter: int = 2000

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.penalty not in ("log", "atan"):
            raise ValueError(f"IMSC penalty must be 'log' or 'atan', got {self.penalty!r}")
        if self.bound_method not in ("sdp", "simple"):
            raise ValueError(f"unknown bound method {self.bound_method!r}")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if self.support_eps < 0:
            raise ValueError("support_eps must be non-negative")


@dataclass
class ImscIteration:
    K: int
    support: np.ndarray
    r: np.ndarray = None
    a: np.ndarray = None
    margin: float = None
    objective: float = None
    iterations: int = 0
    violation: float = None


@dataclass
class ImscTrace:
    iterations: list = field(default_factory=list)
    terminated_by: str = ""

    @property
    def sizes(self):
        return [it.K for it in self.iterations]

    def to_json(self):
        out = []
        for it in self.iterations:
            out.append({
                "K": it.K,
                "support": it.support.tolist(),
                "r": None if it.r is None else it.r.tolist(),
                "a": None if it.a is None else it.a.tolist(),
                "margin": it.margin,
                "objective": it.objective,
                "iterations": it.iterations,
                "violation": it.violation,
            })
        return {"iterations": out, "terminated_by": self.terminated_by}


def support(x, eps=SUPPORT_EPS):
    """Indices n with ``|x_n| > eps``."""
    return eps_support(x, eps)


def run_imsc(H, y, lam, cfg=None, x_l1=None):
    """Run IMSC and return ``(x, trace)``.

    ``lam`` is a scalar or a length-N vector; the restricted problems keep
    the original per-index values. A precomputed l1 solution for the same
    ``lam`` may be passed as ``x_l1`` to skip the initial solve.
    """
    cfg = cfg or ImscConfig()
    if not isinstance(H, LinearOperator):
        H = DenseOperator(H)
    y = np.asarray(y, dtype=float)
    N = H.shape[1]
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (N,)).copy()
    if np.any(lam <= 0):
        raise ValueError("lam must be positive")

    trace = ImscTrace()
    if x_l1 is None:
        l1 = solve_weighted_l1(H, y, lam, max_iter=cfg.max_iter)
        if not l1.converged:
            raise ImscError("l1 initialization did not converge", trace)
        x = l1.x
    else:
        x = np.asarray(x_l1, dtype=float).copy()
    K_prev = N
    for i in range(1, cfg.max_outer + 1):
        S = support(x, cfg.support_eps)
        rec = ImscIteration(K=S.size, support=S)
        rec.objective = objective(ProblemSpec(y, H, lam), x) if i == 1 else None
        trace.iterations.append(rec)
        if S.size >= K_prev:
            trace.terminated_by = "support"
            break
        if S.size == 0:
            x = np.zeros(N)
            trace.terminated_by = "empty"
            break
        if i == cfg.max_outer:
            trace.terminated_by = "max_outer"
            break
        K_prev = S.size

        Hs = H.subcolumns(S)
        G = gram(Hs, limit=max(S.size, 1))
        bound = diagonal_bound(G, cfg.bound_method)
        ok, margin = certify(G, bound.r)
        if not ok:
            raise ImscError(f"diagonal bound failed certification (margin {margin:.3e})", trace)
        r = np.maximum(bound.r, 0.0)
        a = cfg.beta * r / lam[S]
        rec.r, rec.a, rec.margin = r, a, margin

        prob = ProblemSpec(y, Hs, lam[S], PenaltySpec(cfg.penalty), a=a, bound=r)
        try:
            rep = solve_penalized_ls(prob, max_iter=cfg.max_iter, x0=x[S])
        except SolverError as exc:
            raise ImscError(f"inner solve failed at iteration {i}: {exc}", trace) from exc
        if not rep.converged:
            raise ImscError(
                f"inner solve did not converge at iteration {i} (violation {rep.optimality_max_violation:.3e})",
                trace,
            )
        rec.objective = rep.objective
        rec.iterations = rep.iterations
        rec.violation = rep.optimality_max_violation
        x = np.zeros(N)
        x[S] = rep.x
    return x, trace
