import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msc.bench import ExperimentConfig, gen_observation, gen_sparse_spikes
from msc.bound import certify
from msc.imsc import ImscConfig, ImscError, ImscTrace, run_imsc, support
from msc.operators import gram
from msc.solvers import select_lambda, solve_weighted_l1


@pytest.fixture(scope="module")
def deconv_run(deconv):
    x, trace = run_imsc(deconv["H"], deconv["y"], deconv["lam"], x_l1=deconv["l1"])
    return x, trace


def _trial(t):
    cfg = ExperimentConfig()
    H = cfg.operator()
    y = gen_observation(gen_sparse_spikes(cfg, t), cfg, t, H)
    return H, y, select_lambda(H, cfg.sigma)


def test_support_examples():
    assert support(np.zeros(4)).size == 0
    assert support(np.array([1e-4, 0.5]), 1e-3).tolist() == [1]
    with pytest.raises(ValueError):
        support(np.ones(2), -1.0)


def test_zero_observation():
    x, trace = run_imsc(np.eye(5), np.zeros(5), 1.0)
    assert np.array_equal(x, np.zeros(5))
    assert trace.sizes == [0]
    assert trace.terminated_by == "empty"


def test_beta_zero_equals_l1(rng):
    H = rng.standard_normal((40, 30)) / 3
    y = H @ np.where(rng.random(30) < 0.2, 2.0, 0.0) + 0.05 * rng.standard_normal(40)
    lam = 0.3
    x, trace = run_imsc(H, y, lam, ImscConfig(beta=0.0, support_eps=0.0))
    ref = solve_weighted_l1(H, y, np.full(30, lam)).x
    assert np.allclose(x, ref, atol=1e-6)
    assert all(it.a is None or np.all(it.a == 0) for it in trace.iterations)


def test_deconvolution_shrinking_supports(deconv, deconv_run):
    x, trace = deconv_run
    sizes = trace.sizes
    assert sizes[0] == support(deconv["l1"]).size
    assert 2 <= len(sizes) <= 6
    assert all(b < a for a, b in zip(sizes[:-2], sizes[1:-1]))
    assert sizes[-1] >= sizes[-2] and trace.terminated_by == "support"
    for prev, cur in zip(trace.iterations, trace.iterations[1:]):
        assert set(cur.support) <= set(prev.support)


def test_per_iteration_convexity(deconv, deconv_run):
    H, lam = deconv["H"], deconv["lam"]
    _, trace = deconv_run
    for it in trace.iterations:
        if it.r is None:
            continue
        G = gram(H.subcolumns(it.support))
        ok, _ = certify(G, it.r)
        assert ok
        assert np.all(it.a <= it.r / lam[it.support] * (1 + 1e-12))
        assert it.violation <= 1e-5 * lam.max()


def test_idempotent_fixed_point(deconv, deconv_run):
    # termination by support size means the support repeated; one more
    # solve on it from the final iterate returns the same iterate
    from msc.penalties import PenaltySpec
    from msc.solvers import ProblemSpec, solve_penalized_ls

    H, y, lam = deconv["H"], deconv["y"], deconv["lam"]
    x, trace = deconv_run
    last = [it for it in trace.iterations if it.r is not None][-1]
    S = support(x)
    assert np.array_equal(S, last.support)
    prob = ProblemSpec(y, H.subcolumns(S), lam[S], PenaltySpec("atan"), a=last.a, bound=last.r)
    rep = solve_penalized_ls(prob, x0=x[S])
    assert np.allclose(rep.x, x[S], atol=1e-8)


def _retained_sums(trace):
    solved = [it for it in trace.iterations if it.r is not None]
    out = []
    for prev, cur in zip(solved, solved[1:]):
        pos = np.searchsorted(prev.support, cur.support)
        out.append((cur.r.sum(), prev.r[pos].sum()))
    return out


def test_previous_bound_feasible_after_shrinking(deconv, deconv_run):
    # restricting r to the retained indices stays a valid bound, so each
    # restricted problem is at most as constrained as the previous one
    H = deconv["H"]
    _, trace = deconv_run
    solved = [it for it in trace.iterations if it.r is not None]
    for prev, cur in zip(solved, solved[1:]):
        pos = np.searchsorted(prev.support, cur.support)
        G = gram(H.subcolumns(cur.support))
        ok, _ = certify(G, prev.r[pos])
        assert ok


@pytest.mark.xfail(reason="the sum-optimal bound is not monotone under column deletion when "
                          "r_n >= alpha_min binds; fails on trial 0 (K 43 -> 41)", strict=False)
def test_bound_growth():
    for t in range(5):
        H, y, lam = _trial(t)
        _, trace = run_imsc(H, y, lam)
        for new, old in _retained_sums(trace):
            assert new >= old - 1e-6


@pytest.mark.parametrize("kwargs", [
    {"beta": -0.1}, {"beta": 1.5}, {"penalty": "abs"}, {"bound_method": "exact"},
    {"max_outer": 0}, {"support_eps": -1.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ImscConfig(**kwargs)


def test_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        run_imsc(np.eye(2), np.ones(2), 0.0)


def test_max_outer_terminates(deconv):
    _, trace = run_imsc(deconv["H"], deconv["y"], deconv["lam"], ImscConfig(max_outer=1), x_l1=deconv["l1"])
    assert trace.terminated_by == "max_outer"
    assert len(trace.iterations) == 1


def test_simple_bound_variant(deconv):
    x, trace = run_imsc(deconv["H"], deconv["y"], deconv["lam"], ImscConfig(bound_method="simple"), x_l1=deconv["l1"])
    for it in trace.iterations:
        if it.r is not None:
            assert np.ptp(it.r) == 0.0


def test_trace_json(deconv_run):
    _, trace = deconv_run
    d = json.loads(json.dumps(trace.to_json()))
    assert [it["K"] for it in d["iterations"]] == trace.sizes
    assert d["terminated_by"] == trace.terminated_by


def test_error_carries_trace():
    err = ImscError("boom", ImscTrace())
    assert isinstance(err.trace, ImscTrace)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["log", "atan"]))
def test_small_random_problems_nested(seed, kind):
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((25, 15)) / 3
    y = H @ np.where(rng.random(15) < 0.3, rng.normal(0, 2, 15), 0.0) + 0.05 * rng.standard_normal(25)
    x, trace = run_imsc(H, y, 0.2, ImscConfig(penalty=kind))
    sizes = trace.sizes
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))
    for prev, cur in zip(trace.iterations, trace.iterations[1:]):
        assert set(cur.support) <= set(prev.support)
    assert np.array_equal(support(x), trace.iterations[-1].support)
