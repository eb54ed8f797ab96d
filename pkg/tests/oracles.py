"""Independent reference computations used by the tests."""

import numpy as np

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-12, max_iter=400):
    """Minimiser of a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    xs = [a, b, c, d]
    vals = [f(v) for v in xs]
    return xs[min(range(4), key=lambda i: vals[i])]


def log_phi(x, a):
    return np.log1p(a * abs(x)) / a if a > 0 else abs(x)


def atan_phi(x, a):
    # straight from the closed form, without the cancellation-free rewrite
    if a == 0:
        return abs(x)
    return 2.0 / (a * np.sqrt(3.0)) * (np.arctan((1.0 + 2.0 * a * abs(x)) / np.sqrt(3.0)) - np.pi / 6.0)


def _atan_phi_diff(x, a):
    # arctan(u) - arctan(v) = arctan((u - v) / (1 + u v)) with u - v = 2 a x / sqrt3
    if a == 0:
        return abs(x)
    u = (1.0 + 2.0 * a * abs(x)) / np.sqrt(3.0)
    v = 1.0 / np.sqrt(3.0)
    # the float pass may overflow for extreme a; the mpmath pass corrects it
    with np.errstate(over="ignore", invalid="ignore"):
        return 2.0 / (a * np.sqrt(3.0)) * np.arctan(2.0 * a * abs(x) / np.sqrt(3.0) / (1.0 + u * v))


def _mp_cost(kind, t, lam, a):
    import mpmath as mp

    t, lam, a = mp.mpf(t), mp.mpf(lam), mp.mpf(a)

    def phi(x):
        if a == 0:
            return x
        if a * t < mp.mpf("1e-30"):
            # both penalties are x - a x^2 / 2 + O(a^2 x^3)
            return x - a * x * x / 2
        if kind == "log":
            return mp.log(1 + a * x) / a
        return 2 / (a * mp.sqrt(3)) * (mp.atan((1 + 2 * a * x) / mp.sqrt(3)) - mp.pi / 6)

    return lambda x: (t - x) ** 2 / 2 + lam * phi(x)


def prox_oracle(kind, y, lam, a):
    """argmin_x 0.5 (y - x)^2 + lam phi(x) by golden-section search on [0, |y|].

    A double-precision pass locates the minimiser to about sqrt(eps); a second
    pass in 50-digit arithmetic on a window around it removes the rounding
    floor, which matters where the cost is very flat (a near 1/lam).
    """
    import mpmath as mp

    phi = log_phi if kind == "log" else _atan_phi_diff
    t = abs(y)
    if t == 0:
        return 0.0
    f = lambda x: x * (0.5 * x - t) + lam * phi(x, a)  # noqa: E731
    x = golden_section(f, 0.0, t)
    w = 1e-4 * max(1.0, t)
    with mp.workdps(50):
        F = _mp_cost(kind, t, lam, a)
        for _ in range(100):
            lo, hi = max(0.0, x - w), min(t, x + w)
            x = float(golden_section(F, mp.mpf(lo), mp.mpf(hi), tol=1e-16))
            # re-centre if the first pass was off by more than the window
            if (x - lo > 0.01 * w or lo == 0.0) and (hi - x > 0.01 * w or hi == t):
                break
        if F(mp.mpf(0)) <= F(mp.mpf(x)):
            x = 0.0
    return float(np.sign(y) * x)


def richardson_slope_curv(g, T, hs=(1e-3, 1e-4)):
    """One-sided first and second derivatives of g at T+ (g(T) = 0)."""
    out = []
    for h in hs:
        g1, g2 = g(T + h), g(T + 2 * h)
        d1 = (4 * g1 - g2) / (2 * h)  # second-order one-sided, using g(T) = 0
        d2 = (g2 - 2 * g1) / h**2
        out.append((d1, d2))
    (s1, c1), (s2, c2) = out
    r = hs[0] / hs[1]
    slope = (r**2 * s2 - s1) / (r**2 - 1)
    curv = (r * c2 - c1) / (r - 1)
    return slope, curv


def _max_last(G, heads, tau, iters=60):
    """For each row of ``heads``, the largest t with G - diag(head, t) PSD (to -tau).

    Batched bisection on the minimum eigenvalue; ``-inf`` where no t works.
    """
    K = G.shape[0]
    P = heads.shape[0]
    mats = np.broadcast_to(G, (P, K, K)).copy()
    idx = np.arange(K - 1)
    mats[:, idx, idx] -= heads

    def ok(t):
        m = mats.copy()
        m[:, K - 1, K - 1] -= t
        return np.linalg.eigvalsh(m)[:, 0] >= -tau

    lo = np.full(P, -np.abs(G).sum() - 1.0)
    hi = np.full(P, G[K - 1, K - 1] + tau)
    feasible = ok(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        good = ok(mid)
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)
    return np.where(feasible, lo, -np.inf)


def sdp_grid_oracle(G, n_grid=None, refine=8):
    """Brute-force max of sum(r) s.t. r >= alpha_min, G - diag(r) PSD, for K = 2 or 3.

    All coordinates but one are gridded on [alpha_min, G_ii] (endpoints
    included) and the remaining one is maximised by bisection; the best grid
    point is refined on successively finer local grids. Every coordinate
    takes a turn as the exactly maximised one and the best value is kept
    (each value is attained by a feasible point).
    """
    G = np.asarray(G, dtype=float)
    K = G.shape[0]
    best = -np.inf
    for last in range(K):
        perm = [i for i in range(K) if i != last] + [last]
        best = max(best, _grid_oracle_last(G[np.ix_(perm, perm)], n_grid, refine))
    return best


def _grid_oracle_last(G, n_grid, refine):
    K = G.shape[0]
    ev = np.linalg.eigvalsh(G)
    alpha = ev[0]
    scale = max(np.abs(ev).max(), 1.0)
    tau = 1e-10 * scale
    lower = alpha - 1e-9 * scale
    if n_grid is None:
        n_grid = 2001 if K == 2 else 61
    ranges = [(alpha, max(G[i, i], alpha)) for i in range(K - 1)]

    def best_of(axes):
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, K - 1)
        t = _max_last(G, mesh, tau)
        val = np.where(t >= lower, mesh.sum(axis=1) + t, -np.inf)
        j = int(np.argmax(val))
        return val[j], mesh[j]

    best, head = best_of([np.linspace(lo, hi, n_grid) for lo, hi in ranges])
    steps = np.array([(hi - lo) / (n_grid - 1) for lo, hi in ranges])
    for _ in range(refine):
        axes = [np.unique(np.clip(np.linspace(c - s, c + s, 21), lo, hi)) for c, s, (lo, hi) in zip(head, steps, ranges)]
        v, h = best_of(axes)
        if v > best:
            best, head = v, h
        steps = steps / 4.0
    return best
