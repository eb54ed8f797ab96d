"""Sparse deconvolution benchmark.

Spike trains with uniformly random gaps are passed through the ARMA system
and corrupted by white Gaussian noise; each algorithm's estimate is scored
by L2/L1 error and by support errors (false zeros plus false non-zeros).
"""

import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .imsc import ImscConfig, run_imsc
from .io import csv_text
from .operators import ArmaOperator
from .penalties import PenaltySpec, prox
from .rng import box_muller, substream
from .solvers import debias, select_lambda, solve_lp_irl1, solve_lp_irl2, solve_weighted_l1, support

BASE_ALGORITHMS = ("l1", "irl2_lp", "irl1_lp", "imsc_log", "imsc_atan", "imsc_s_atan")
ALGORITHMS = tuple(a for b in BASE_ALGORITHMS for a in (b, b + "+debias"))

_IMSC = {
    "imsc_log": ImscConfig(penalty="log"),
    "imsc_atan": ImscConfig(penalty="atan"),
    "imsc_s_atan": ImscConfig(penalty="atan", bound_method="simple"),
}

SUMMARY_HEADER = ["algorithm", "trials", "failures", "L2E", "L1E", "SE", "FZ", "FN"]


@dataclass
class ExperimentConfig:
    N: int = 1000
    gap_min: int = 5
    gap_max: int = 35
    amp_min: float = -1.0
    amp_max: float = 1.0
    b_coeffs: list = field(default_factory=lambda: [1.0, 0.8])
    a_coeffs: list = field(default_factory=lambda: [1.0, -1.047, 0.81])
    sigma: float = 0.2
    trials: int = 20
    master_seed: int = 0
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    metric_eps: float = 1e-3
    lam: float = None  # None: three-sigma rule per column
    lp_lambda: float = 1.0
    lp_p: float = 0.7

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if not 1 <= self.gap_min <= self.gap_max:
            raise ValueError("need 1 <= gap_min <= gap_max")
        if self.amp_min > self.amp_max:
            raise ValueError("amp_min exceeds amp_max")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative 64-bit integer")
        self.algorithms = list(self.algorithms)
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}; choose from {list(ALGORITHMS)}")
        if not self.algorithms:
            raise ValueError("no algorithms selected")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def operator(self):
        return ArmaOperator(self.b_coeffs, self.a_coeffs, self.N)


@dataclass
class TrialMetrics:
    algorithm: str
    L2E: float
    L1E: float
    SE: int
    FZ: int
    FN: int
    runtime: float = 0.0
    trial: int = -1


def gen_sparse_spikes(cfg, trial_index):
    rng = substream(cfg.master_seed, trial_index, "spikes")
    x = np.zeros(cfg.N)
    pos = int(rng.integers(cfg.gap_min, cfg.gap_max + 1))
    while pos < cfg.N:
        x[pos] = rng.uniform(cfg.amp_min, cfg.amp_max)
        pos += int(rng.integers(cfg.gap_min, cfg.gap_max + 1))
    return x


def gen_observation(x, cfg, trial_index, H=None, sigma=None):
    """``H x`` plus the trial's noise stream; ``sigma`` overrides ``cfg.sigma``."""
    if H is None:
        H = cfg.operator()
    sigma = cfg.sigma if sigma is None else float(sigma)
    w = box_muller(substream(cfg.master_seed, trial_index, "noise"), cfg.N)
    return H.matvec(x) + sigma * w


def compute_metrics(x_true, x_est, eps=1e-3, algorithm=""):
    x_true = np.asarray(x_true, dtype=float)
    x_est = np.asarray(x_est, dtype=float)
    if x_true.shape != x_est.shape:
        raise ValueError(f"length mismatch: {x_true.shape} vs {x_est.shape}")
    d = x_true - x_est
    s_true = np.abs(x_true) > eps
    s_est = np.abs(x_est) > eps
    fz = int(np.count_nonzero(s_true & ~s_est))
    fn = int(np.count_nonzero(~s_true & s_est))
    return TrialMetrics(algorithm, float(np.linalg.norm(d)), float(np.sum(np.abs(d))), fz + fn, fz, fn)


def _solve_base(name, H, y, lam, cfg, cache):
    """Estimate for one base algorithm, plus extra diagnostics."""
    if name == "l1":
        rep = solve_weighted_l1(H, y, lam)
        return rep.x, {"converged": rep.converged}
    if name == "irl2_lp":
        return solve_lp_irl2(H, y, cfg.lp_lambda, cfg.lp_p).x, {}
    if name == "irl1_lp":
        return solve_lp_irl1(H, y, cfg.lp_lambda, cfg.lp_p).x, {}
    x_l1 = cache.get("l1")
    x, trace = run_imsc(H, y, lam, _IMSC[name], x_l1=x_l1)
    return x, {"outer_iterations": len(trace.iterations), "sizes": trace.sizes,
               "margins": [it.margin for it in trace.iterations if it.margin is not None]}


@dataclass
class BenchmarkResult:
    config: ExperimentConfig
    lam: np.ndarray
    rows: list
    failures: dict
    diagnostics: dict

    def summary(self):
        out = []
        for alg in self.config.algorithms:
            ms = [m for m in self.rows if m.algorithm == alg]
            if ms:
                means = [float(np.mean([getattr(m, k) for m in ms])) for k in ("L2E", "L1E", "SE", "FZ", "FN")]
            else:
                means = [float("nan")] * 5
            out.append([alg, len(ms), self.failures.get(alg, 0)] + means)
        return out

    def mean(self, alg, metric="L2E"):
        return float(np.mean([getattr(m, metric) for m in self.rows if m.algorithm == alg]))

    def summary_csv(self):
        return csv_text(SUMMARY_HEADER, self.summary())

    def trials_csv(self):
        header = ["trial", "algorithm", "L2E", "L1E", "SE", "FZ", "FN"]
        rows = [[m.trial, m.algorithm, m.L2E, m.L1E, m.SE, m.FZ, m.FN] for m in self.rows]
        return csv_text(header, rows)

    def to_json(self, timing=False):
        trials = []
        for m in self.rows:
            d = asdict(m)
            if not timing:
                d.pop("runtime")
            trials.append(d)
        summary = [dict(zip(SUMMARY_HEADER, row)) for row in self.summary()]
        return {
            "config": self.config.to_dict(),
            "lambda_interior": float(np.median(self.lam)),
            "summary": summary,
            "trials": trials,
            "failures": self.failures,
            "diagnostics": self.diagnostics,
        }


def run_benchmark(cfg, lam=None, progress=None):
    """Run every selected algorithm on ``cfg.trials`` independent instances."""
    H = cfg.operator()
    if lam is None:
        lam = cfg.lam
    lam = select_lambda(H, cfg.sigma) if lam is None else np.full(cfg.N, float(lam))
    wanted = set(cfg.algorithms)
    bases = [b for b in BASE_ALGORITHMS if b in wanted or b + "+debias" in wanted]
    # IMSC starts from the l1 solution; compute it once per trial
    if any(b.startswith("imsc") for b in bases) and "l1" not in bases:
        bases = ["l1"] + bases
    rows, failures = [], {}
    diagnostics = {b: [] for b in bases if b.startswith("imsc")}
    for t in range(cfg.trials):
        x = gen_sparse_spikes(cfg, t)
        y = gen_observation(x, cfg, t, H)
        cache = {}
        for b in bases:
            t0 = time.perf_counter()
            try:
                xe, info = _solve_base(b, H, y, lam, cfg, cache)
            except Exception as exc:  # recorded and excluded from the means
                for alg in (b, b + "+debias"):
                    if alg in wanted:
                        failures[alg] = failures.get(alg, 0) + 1
                if b in diagnostics:
                    diagnostics[b].append({"trial": t, "error": f"{type(exc).__name__}: {exc}"})
                continue
            t_base = time.perf_counter() - t0
            cache[b] = xe
            if b in diagnostics:
                diagnostics[b].append(dict(trial=t, **info))
            if b in wanted:
                m = compute_metrics(x, xe, cfg.metric_eps, b)
                m.runtime, m.trial = t_base, t
                rows.append(m)
            if b + "+debias" in wanted:
                t1 = time.perf_counter()
                xd = debias(H, y, support(xe, cfg.metric_eps))
                m = compute_metrics(x, xd, cfg.metric_eps, b + "+debias")
                m.runtime, m.trial = t_base + time.perf_counter() - t1, t
                rows.append(m)
        if progress:
            progress(t)
    order = {a: i for i, a in enumerate(cfg.algorithms)}
    rows.sort(key=lambda m: (m.trial, order[m.algorithm]))
    return BenchmarkResult(cfg, lam, rows, failures, diagnostics)


SWEEP_HEADER = ["lambda", "algorithm", "trials", "failures", "L2E", "L1E", "SE"]


def lambda_sweep(cfg, lambda_grid):
    """Mean errors per algorithm for each fixed ``lam`` in the grid.

    The grid value replaces both the three-sigma ``lam`` and the l_p
    comparators' ``lam``.
    """
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(v <= 0 for v in grid):
        raise ValueError("lambda values must be positive")
    rows = []
    for v in grid:
        sub = ExperimentConfig.from_dict({**cfg.to_dict(), "lam": v, "lp_lambda": v})
        res = run_benchmark(sub)
        for row in res.summary():
            rows.append([v, row[0], row[1], row[2], row[3], row[4], row[5]])
    return rows


def sweep_csv(rows):
    return csv_text(SWEEP_HEADER, rows)


def demo_signal(n=512, amplitude=6.0, spacing=32):
    """Spikes of alternating sign and growing height on a zero background."""
    x = np.zeros(n)
    pos = np.arange(spacing // 2, n, spacing)
    x[pos] = amplitude * (1.0 + np.arange(pos.size) % 3) * np.where(np.arange(pos.size) % 2, -1.0, 1.0)
    return x


def denoise_demo(signal, sigma, kind="atan", T=None, a=None, seed=0):
    """Noisy copy of ``signal`` thresholded elementwise with threshold ``T``.

    ``T`` defaults to ``3 sigma``. For log/atan, ``a`` defaults to ``1/T``,
    the most non-convex value that keeps the scalar cost convex.
    Returns ``(noisy, denoised, rmse)``.
    """
    signal = np.asarray(signal, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if T is None:
        T = 3.0 * sigma
    if T < 0:
        raise ValueError("threshold must be non-negative")
    if kind not in ("abs", "soft", "hard", "log", "atan"):
        raise ValueError(f"unknown threshold kind {kind!r}")
    if kind == "soft":
        kind = "abs"
    noisy = signal + sigma * box_muller(substream(seed, 0, "denoise"), signal.size)
    if T == 0:
        den = noisy.copy()
    else:
        if a is None:
            a = 1.0 / T if kind in ("log", "atan") else 0.0
        den = prox(PenaltySpec(kind, a), noisy, T)
    rmse = float(np.sqrt(np.mean((den - signal) ** 2)))
    return noisy, den, rmse
