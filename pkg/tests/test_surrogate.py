import numpy as np
import pytest
from hypothesis import given, strategies as st

from viewil.surrogate import GaussianProcessSurrogate, OutOfBounds, RandomSearch, make_optimizer


def test_first_ask_is_seeded_uniform():
    a = GaussianProcessSurrogate([0, 0], [1, 2], seed=3).ask()
    b = GaussianProcessSurrogate([0, 0], [1, 2], seed=3).ask()
    assert np.array_equal(a, b)
    assert np.all(a >= 0) and np.all(a <= (1, 2))


def test_single_observation_moves_away():
    gp = GaussianProcessSurrogate([0.0], [1.0], seed=0, noise=0.0)
    gp.tell([0.5], 1.0)
    nxt = gp.ask()
    assert not np.allclose(nxt, 0.5)


def test_tell_then_predict_interpolates():
    gp = GaussianProcessSurrogate([0, 0], [1, 1], seed=0)
    rng = np.random.default_rng(0)
    xs = rng.random((4, 2))
    ys = [0.3, -1.2, 2.0, 0.1]
    for x, y in zip(xs, ys):
        gp.tell(x, y)
    mean, _ = gp.predict(xs)
    sd = np.std(ys)
    assert np.all(np.abs(mean - ys) <= gp.noise * sd)


def test_posterior_matches_direct_kernel_solve():
    lo, hi = np.array([0.0, -1.0]), np.array([2.0, 1.0])
    gp = GaussianProcessSurrogate(lo, hi, seed=0, refit_every=0, lengthscale=0.3)
    rng = np.random.default_rng(7)
    X = lo + (hi - lo) * rng.random((5, 2))
    y = rng.normal(size=5)
    for x, v in zip(X, y):
        gp.tell(x, v)
    Q = lo + (hi - lo) * rng.random((9, 2))
    # oracle: plain numpy solve of the standardized GP equations
    U, V = (X - lo) / (hi - lo), (Q - lo) / (hi - lo)
    k = lambda A, B: np.array([[np.exp(-np.sum((a - b) ** 2) / (2 * 0.3 ** 2)) for b in B] for a in A])
    K = k(U, U) + (gp.noise ** 2 + gp.jitter) * np.eye(5)
    z = (y - y.mean()) / y.std()
    Ks = k(V, U)
    mean = Ks @ np.linalg.solve(K, z) * y.std() + y.mean()
    var = 1.0 - np.einsum("ij,ji->i", Ks, np.linalg.solve(K, Ks.T))
    got_m, got_s = gp.predict(Q)
    assert np.abs(got_m - mean).max() < 1e-8
    assert np.abs(got_s - np.sqrt(np.maximum(var, 0)) * y.std()).max() < 1e-8
    assert np.all(got_s <= y.std() + 1e-12)


def test_duplicates_do_not_fail():
    gp = GaussianProcessSurrogate([0], [1], seed=0)
    for v in (1.0, 2.0, 3.0, 0.5, 1.5, 2.5):
        gp.tell([0.25], v)
    x = gp.ask()
    assert np.all(np.isfinite(x)) and np.all(np.isfinite(gp.predict([[0.25]])[0]))


def test_out_of_bounds_and_nonfinite():
    gp = make_optimizer("gp", [0, 0], [1, 1], 0)
    with pytest.raises(OutOfBounds):
        gp.tell([1.5, 0.5], 0.0)
    with pytest.raises(ValueError):
        gp.tell([0.5, 0.5], float("nan"))
    with pytest.raises(ValueError):
        make_optimizer("cma", [0], [1])


def run_quadratic(seed, opt_kind="gp", budget=25):
    target = np.random.default_rng(seed + 1000).uniform(0.1, 0.9)
    opt = make_optimizer(opt_kind, [0.0], [1.0], seed)
    for _ in range(budget):
        x = opt.ask()
        opt.tell(x, -(x[0] - target) ** 2)
    return abs(opt.best()[0][0] - target)


def test_quadratic_benchmark():
    hits = sum(run_quadratic(s) <= 0.05 for s in range(100))
    assert hits >= 95


@given(st.integers(0, 1000))
def test_asks_stay_in_bounds(seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-1, 0, 3)
    hi = lo + rng.uniform(0.01, 1, 3)
    for kind in ("gp", "random"):
        opt = make_optimizer(kind, lo, hi, seed)
        for _ in range(6):
            x = opt.ask()
            assert np.all(x >= lo) and np.all(x <= hi)
            opt.tell(x, float(-np.sum(x ** 2)))
        assert len(opt.history) == 6


def test_deterministic_sequence():
    def seq():
        opt = GaussianProcessSurrogate([0, 0], [1, 1], seed=5)
        out = []
        for _ in range(8):
            x = opt.ask()
            opt.tell(x, float(np.sin(5 * x).sum()))
            out.append(x)
        return np.array(out)
    assert np.array_equal(seq(), seq())


def test_random_search_is_uniform_draws():
    rs = RandomSearch([0], [1], seed=0)
    xs = np.array([rs.ask()[0] for _ in range(5000)])
    assert abs(xs.mean() - 0.5) < 0.02
