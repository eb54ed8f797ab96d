"""Parametric sparsity penalties and their threshold functions.

The log and atan families are parameterised by a non-convexity parameter
``a >= 0``; ``a = 0`` reduces both to the absolute value. For a threshold
``lam`` the scalar cost ``0.5*(y - x)**2 + lam*phi(x; a)`` stays strictly
convex while ``0 <= a <= 1/lam``.

All functions accept scalars or numpy arrays. Sign is factored out
explicitly so that symmetry holds exactly in floating point.
"""

from dataclasses import dataclass

import numpy as np

KINDS = ("abs", "log", "atan", "hard", "lp")

_SQRT3 = np.sqrt(3.0)

# relative slack when comparing a*lam against 1
_SET_RTOL = 1e-12


class PenaltyError(ValueError):
    """Invalid penalty parameters."""


class ConvexityError(ValueError):
    """The scalar cost is not convex for the requested (lam, a)."""


class UnsupportedPenaltyError(ValueError):
    """Operation not defined for this penalty kind."""


@dataclass(frozen=True)
class PenaltySpec:
    """A penalty family together with its parameters.

    ``a`` is ignored by ``abs`` and ``hard``; ``p`` is only used by ``lp``.
    """

    kind: str = "abs"
    a: float = 0.0
    p: float = 0.7

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PenaltyError(f"unknown penalty kind {self.kind!r}")
        if not np.all(np.asarray(self.a) >= 0):
            raise PenaltyError(f"penalty parameter a must be >= 0, got {self.a}")
        if self.kind == "lp" and not 0 < self.p < 1:
            raise PenaltyError(f"lp exponent must lie in (0, 1), got {self.p}")

    def with_a(self, a):
        return PenaltySpec(self.kind, a, self.p)


@dataclass(frozen=True)
class ThresholdProps:
    threshold: float
    slope_at_T: float
    curvature_at_T: float


def _out(v, like):
    return float(v) if np.ndim(like) == 0 else v


def _as_params(spec, x):
    x = np.asarray(x, dtype=float)
    a = np.asarray(spec.a, dtype=float)
    if np.any(a < 0):
        raise PenaltyError("penalty parameter a must be >= 0")
    return x, np.abs(x), a


def penalty_value(spec, x):
    """Evaluate phi(x; a)."""
    x, t, a = _as_params(spec, x)
    kind = spec.kind
    if kind == "abs":
        v = t
    elif kind == "log":
        # phi = t * g(a t) with g(u) = log(1 + u) / u, g(0) = 1; stays finite for tiny a
        u = a * t
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = t * np.where(u > 0, np.log1p(u) / np.where(u > 0, u, 1.0), 1.0)
        v = np.where(np.isinf(t), np.inf, v)
    elif kind == "atan":
        # atan((1+2at)/sqrt3) - pi/6 rewritten as a single arctan to avoid
        # cancellation for small a*t, then scaled as t * g(a t) like log
        u = a * t
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            g = 2.0 / _SQRT3 * np.arctan(_SQRT3 * u / (2.0 + u)) / np.where(u > 0, u, 1.0)
            v = t * np.where(u > 0, g, 1.0)
            lim = np.where(a > 0, 2 * np.pi / (3 * _SQRT3 * np.where(a > 0, a, 1.0)), np.inf)
        v = np.where(np.isinf(t), lim, v)
    elif kind == "lp":
        v = t ** spec.p
    else:
        raise UnsupportedPenaltyError("hard threshold has no parametric penalty form")
    return _out(v, x)


def penalty_deriv(spec, x, order=1):
    """Derivative of phi of the given order (1, 2 or 3).

    At ``x == 0`` the right-sided derivative is returned.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x, t, a = _as_params(spec, x)
    kind = spec.kind
    if kind == "hard":
        raise UnsupportedPenaltyError("hard threshold has no differentiable penalty")
    if kind == "abs":
        d = np.ones_like(t) if order == 1 else np.zeros_like(t)
    elif kind == "log":
        u = 1.0 + a * t
        d = {1: 1.0 / u, 2: -a / u**2, 3: 2 * a**2 / u**3}[order]
    elif kind == "atan":
        q = a * a * t * t + a * t + 1.0
        s = 2 * a * a * t + a
        d = {1: 1.0 / q, 2: -s / q**2, 3: 2 * s**2 / q**3 - 2 * a * a / q**2}[order]
    else:
        p = spec.p
        with np.errstate(divide="ignore", over="ignore"):
            d = {
                1: p * t ** (p - 1),
                2: p * (p - 1) * t ** (p - 2),
                3: p * (p - 1) * (p - 2) * t ** (p - 3),
            }[order]
    d = d * np.ones_like(t)
    if order != 2:
        d = np.where(x < 0, -d, d)
    return _out(d, x)


def in_parameter_set(lam, a):
    """True when x**2/2 + lam*phi(x; a) is convex for the log/atan penalties.

    The closed boundary ``a == 1/lam`` is included.
    """
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    ok = (lam > 0) & (a >= 0) & (a * lam <= 1.0 + _SET_RTOL)
    return bool(ok) if ok.ndim == 0 else ok


def _check_prox_args(spec, lam):
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0):
        raise PenaltyError("lam must be positive")
    if spec.kind in ("log", "atan"):
        if not np.all(in_parameter_set(lam_arr, spec.a)):
            raise ConvexityError(
                f"(lam, a) outside the convex parameter set: need a <= 1/lam"
            )
    elif spec.kind == "lp":
        raise UnsupportedPenaltyError("lp has no convex scalar cost; prox not provided")
    return lam_arr


def prox(spec, y, lam):
    """Threshold function: argmin_x 0.5*(y - x)**2 + lam*phi(x; a).

    Inputs with ``|y| <= T`` map to exactly zero.
    """
    lam = _check_prox_args(spec, lam)
    y = np.asarray(y, dtype=float)
    t = np.abs(y)
    sgn = np.where(y < 0, -1.0, 1.0)
    kind = spec.kind
    if kind == "hard":
        out = np.where(t > lam, t, 0.0)
    elif kind == "abs":
        out = np.maximum(t - lam, 0.0)
    else:
        a = np.asarray(spec.a, dtype=float)
        a, lam, t = np.broadcast_arrays(a, lam, t)
        if kind == "log":
            out = _prox_log(t, lam, a)
        else:
            out = _prox_atan(t, lam, a)
    out = sgn * out
    return _out(out, y)


def _prox_log(t, lam, a):
    # positive root of a x^2 + (1 - a t) x + (lam - t) = 0
    c = t - lam
    b = 1.0 - a * t
    disc = np.sqrt(np.maximum(b * b + 4.0 * a * np.maximum(c, 0.0), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = 2.0 * c / (b + disc)
        direct = (disc - b) / (2.0 * np.where(a > 0, a, 1.0))
    x = np.where(b > 0, stable, direct)
    x = np.where(a > 0, x, c)
    return np.where(c > 0, x, 0.0)


def _prox_atan(t, lam, a, rtol=1e-12, max_iter=200):
    """Root of (x - t)(a^2 x^2 + a x + 1) + lam on (0, t).

    Newton on the cubic, with bisection whenever the step leaves the bracket.
    """
    shape = np.shape(t)
    t = np.atleast_1d(t).astype(float).ravel()
    lam = np.atleast_1d(lam).astype(float).ravel()
    a = np.atleast_1d(a).astype(float).ravel()
    active = t > lam
    x = np.zeros_like(t)
    if not np.any(active):
        return x.reshape(shape)
    idx = active
    tt, ll, aa = t[idx], lam[idx], a[idx]
    lo = np.zeros_like(tt)
    hi = tt.copy()
    # soft threshold is a good start: it is the a = 0 answer and lies below the root
    xx = np.clip(tt - ll, lo, hi)
    scale = np.maximum(tt, 1.0)
    done = np.zeros(tt.shape, dtype=bool)
    for _ in range(max_iter):
        q = aa * aa * xx * xx + aa * xx + 1.0
        g = (xx - tt) * q + ll
        done |= np.abs(g) <= rtol * scale
        done |= (hi - lo) <= 4 * np.finfo(float).eps * scale
        if np.all(done):
            break
        lo = np.where(g < 0, xx, lo)
        hi = np.where(g > 0, xx, hi)
        dg = q + (xx - tt) * (2 * aa * aa * xx + aa)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xx - g / dg
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        step = np.where(bad, 0.5 * (lo + hi), step)
        xx = np.where(done, xx, step)
    x[idx] = xx
    return x.reshape(shape)


def threshold_props(spec, lam):
    """Threshold T, slope and curvature of the threshold function at T+.

    At the boundary ``a == 1/lam`` the slope is reported as ``inf``.
    """
    if spec.kind not in ("abs", "log", "atan"):
        raise UnsupportedPenaltyError(f"threshold properties undefined for {spec.kind!r}")
    if lam <= 0:
        raise PenaltyError("lam must be positive")
    a = 0.0 if spec.kind == "abs" else float(spec.a)
    if not in_parameter_set(lam, a):
        raise ConvexityError("slope undefined: a*lam > 1")
    d1 = penalty_deriv(spec, 0.0, 1)
    d2 = penalty_deriv(spec, 0.0, 2)
    d3 = penalty_deriv(spec, 0.0, 3)
    fp = 1.0 + lam * d2
    T = lam * d1
    if fp <= 1e-15:
        curv = 0.0 if d3 == 0 else -np.inf
        return ThresholdProps(T, np.inf, curv)
    return ThresholdProps(T, 1.0 / fp, -lam * d3 / fp**3)


def a_from_slope(lam, slope):
    """Parameter ``a`` giving the requested threshold-function slope at T+."""
    if lam <= 0:
        raise PenaltyError("lam must be positive")
    if not slope >= 1:
        raise PenaltyError(f"slope at the threshold must be >= 1, got {slope}")
    if np.isinf(slope):
        return 1.0 / lam
    return (1.0 - 1.0 / slope) / lam
