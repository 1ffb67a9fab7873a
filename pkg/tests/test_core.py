import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepfree import (NumericalFailure, ProjectionDomain, StochasticOracle,
                      derive_stream, sgd_run, trace_distances)


def abs_oracle():
    """f(x) = |x| in one dimension; subgradient 0 at the kink."""
    grad = lambda x: np.sign(x)
    return StochasticOracle(dimension=1, query=lambda x, rng: grad(x),
                            norm_bound_L=1.0, exact_subgradient=grad,
                            exact_value=lambda x: float(np.abs(x).sum()),
                            optimum_info=(np.zeros(1), 0.0))


def zero_oracle(d=3):
    return StochasticOracle(dimension=d, query=lambda x, rng: np.zeros(d))


WHOLE = ProjectionDomain.whole_space()


class TestSgdRun:
    def test_zero_gradient(self):
        x0 = np.array([1.0, -2.0, 0.5])
        tr = sgd_run(zero_oracle(), WHOLE, x0, 0.7, 5, stream=0)
        assert tr.r_bar == 0.0
        assert tr.G == 0.0
        assert np.array_equal(tr.x_avg, x0)

    def test_abs_quarter_step(self):
        tr = sgd_run(abs_oracle(), WHOLE, np.array([1.0]), 0.25, 4, stream=0,
                     record_full=True)
        assert np.array_equal(tr.xs.ravel(), [1.0, 0.75, 0.5, 0.25, 0.0])
        assert tr.G == 4.0
        assert tr.r_bar == 1.0
        assert tr.x_avg[0] == 0.625

    def test_abs_oscillating(self):
        tr = sgd_run(abs_oracle(), WHOLE, np.array([1.0]), 2.0, 4, stream=0,
                     record_full=True)
        assert np.array_equal(tr.xs.ravel(), [1.0, -1.0, 1.0, -1.0, 1.0])
        assert tr.G == 4.0
        assert tr.r_bar == 2.0
        assert tr.x_avg[0] == 0.0

    def test_projection_halfline(self):
        # f(x) = x on [0, inf): one step reaches the boundary and stays
        oracle = StochasticOracle(dimension=1, query=lambda x, rng: np.ones(1))
        dom = ProjectionDomain.box(np.zeros(1), np.full(1, np.inf))
        tr = sgd_run(oracle, dom, np.array([0.5]), 1.0, 2, stream=0,
                     record_full=True)
        assert np.array_equal(tr.xs.ravel(), [0.5, 0.0, 0.0])
        assert tr.G == 2.0
        assert tr.r_bar == 0.5

    def test_determinism(self):
        spec = dict(x0=np.array([2.0, -1.0]), eta=0.1, T=20, stream=987654321)
        noisy = StochasticOracle(
            dimension=2, query=lambda x, rng: x + rng.standard_normal(2))
        a = sgd_run(noisy, WHOLE, **spec)
        b = sgd_run(noisy, WHOLE, **spec)
        assert a.G == b.G and a.r_bar == b.r_bar
        assert np.array_equal(a.x_avg, b.x_avg)

    def test_numerical_failure_reports_step(self):
        def bad_query(x, rng):
            return np.full(1, np.nan) if bad_query.n == 3 else np.ones(1)
        bad_query.n = 0

        def counting(x, rng):
            g = bad_query(x, rng)
            bad_query.n += 1
            return g

        oracle = StochasticOracle(dimension=1, query=counting)
        with pytest.raises(NumericalFailure) as err:
            sgd_run(oracle, WHOLE, np.zeros(1), 0.1, 10, stream=0)
        assert err.value.step == 3

    def test_value_tracking(self):
        oracle = abs_oracle()
        tr = sgd_run(oracle, WHOLE, np.array([1.0]), 0.25, 4, stream=0,
                     value_fn=oracle.exact_value)
        assert tr.best_f == 0.0
        assert tr.best_x[0] == 0.0
        assert tr.value_avg == (1.0 + 0.75 + 0.5 + 0.25) / 4


class TestTraceInvariants:
    @given(eta=st.floats(0.01, 4.0), T=st.integers(1, 30),
           seed=st.integers(0, 10**6))
    @settings(max_examples=50, deadline=None)
    def test_summary_bounds(self, eta, T, seed):
        rng = np.random.default_rng(seed)
        d = 3
        c = rng.standard_normal(d)
        oracle = StochasticOracle(
            dimension=d,
            query=lambda x, r: np.sign(x - c) + 0.3 * r.standard_normal(d))
        tr = sgd_run(oracle, WHOLE, rng.standard_normal(d), eta, T,
                     stream=seed, record_full=True)
        assert tr.query_count == T
        assert tr.r_bar <= eta * np.sqrt(T * tr.G) + 1e-9
        assert tr.G >= tr.g0_norm ** 2 - 1e-12
        if tr.r_bar > 0:
            assert tr.G > 0
        # summaries recompute exactly from the record
        assert np.allclose(tr.x_avg, tr.xs[:T].mean(axis=0), atol=1e-12)
        r_rec = max(np.linalg.norm(tr.xs - tr.xs[0], axis=1))
        assert tr.r_bar == pytest.approx(r_rec, abs=1e-12)
        g_rec = float(np.sum(tr.gs * tr.gs))
        assert tr.G == pytest.approx(g_rec, rel=1e-12)

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_per_step_subgradient_inequality(self, seed):
        rng = np.random.default_rng(seed)
        d, T, eta = 4, 20, 0.2
        c = rng.standard_normal(d)
        grad = lambda x: x - c
        oracle = StochasticOracle(dimension=d, query=lambda x, r: grad(x),
                                  exact_subgradient=grad)
        tr = sgd_run(oracle, WHOLE, rng.standard_normal(d) * 2, eta, T,
                     stream=seed, record_full=True)
        d0, d_bar, series = trace_distances(tr, c)
        for i in range(T):
            lhs = series[i + 1] ** 2
            rhs = (series[i] ** 2
                   - 2 * eta * float(tr.gs[i] @ (tr.xs[i] - c))
                   + eta ** 2 * float(tr.gs[i] @ tr.gs[i]))
            assert lhs <= rhs + 1e-9
        # noiseless bounded growth: d_t^2 <= d0^2 + eta^2 G_t
        g_prefix = np.cumsum(np.sum(tr.gs * tr.gs, axis=1))
        for t in range(1, T + 1):
            assert series[t] ** 2 <= d0 ** 2 + eta ** 2 * g_prefix[t - 1] + 1e-9

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=20, deadline=None)
    def test_error_bound_realization(self, seed):
        # mean suboptimality <= r_bar d0 / (eta T) + eta G / (2 T) noiselessly
        rng = np.random.default_rng(seed)
        d, T, eta = 3, 25, 0.1
        c = rng.standard_normal(d)
        grad = lambda x: np.sign(x - c)
        val = lambda x: float(np.abs(x - c).sum())
        oracle = StochasticOracle(dimension=d, query=lambda x, r: grad(x),
                                  exact_subgradient=grad, exact_value=val)
        tr = sgd_run(oracle, WHOLE, rng.standard_normal(d), eta, T,
                     stream=seed, value_fn=val, record_full=True)
        d0 = float(np.linalg.norm(tr.x0 - c))
        f_star = 0.0
        bound = tr.r_bar * d0 / (eta * T) + eta * tr.G / (2 * T)
        assert tr.value_avg - f_star <= bound + 1e-9


class TestTraceDistances:
    def test_at_optimum(self):
        tr = sgd_run(zero_oracle(1), WHOLE, np.zeros(1), 1.0, 3, stream=0,
                     record_full=True)
        d0, d_bar, _ = trace_distances(tr, np.zeros(1))
        assert d0 == 0.0 and d_bar == 0.0

    def test_abs_series(self):
        tr = sgd_run(abs_oracle(), WHOLE, np.array([1.0]), 0.25, 4, stream=0,
                     record_full=True)
        d0, d_bar, series = trace_distances(tr, np.zeros(1))
        assert d0 == 1.0 and d_bar == 1.0
        assert np.array_equal(series, [1.0, 0.75, 0.5, 0.25, 0.0])

    def test_oscillating_series(self):
        tr = sgd_run(abs_oracle(), WHOLE, np.array([1.0]), 2.0, 4, stream=0,
                     record_full=True)
        _, d_bar, series = trace_distances(tr, np.zeros(1))
        assert d_bar == 1.0
        assert np.all(series == 1.0)

    def test_requires_record(self):
        tr = sgd_run(abs_oracle(), WHOLE, np.array([1.0]), 0.25, 4, stream=0)
        with pytest.raises(ValueError):
            trace_distances(tr, np.zeros(1))


class TestProjections:
    @given(x=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
           y=st.lists(st.floats(-10, 10), min_size=3, max_size=3))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_and_nonexpansive(self, x, y):
        x, y = np.array(x), np.array(y)
        domains = [
            ProjectionDomain.whole_space(),
            ProjectionDomain.ball(np.array([1.0, 0.0, -1.0]), 2.0),
            ProjectionDomain.box(np.array([-1.0, -2.0, 0.0]),
                                 np.array([1.0, 0.0, 3.0])),
        ]
        for dom in domains:
            px, py = dom.project(x), dom.project(y)
            assert np.allclose(dom.project(px), px, atol=1e-12)
            assert (np.linalg.norm(px - py)
                    <= np.linalg.norm(x - y) + 1e-12)
            assert dom.contains(px, tol=1e-9)

    def test_ball_projection_exact(self):
        dom = ProjectionDomain.ball(np.zeros(2), 1.0)
        p = dom.project(np.array([3.0, 4.0]))
        assert np.allclose(p, [0.6, 0.8])


class TestStreams:
    def test_derive_stream_is_pure(self):
        assert derive_stream(7, "trace", 2, 3) == derive_stream(7, "trace", 2, 3)

    def test_distinct_labels_distinct_streams(self):
        seen = {derive_stream(0, "trace", k, j)
                for k in range(4) for j in range(16)}
        assert len(seen) == 64

    def test_128_bit_range(self):
        s = derive_stream(0, "g0")
        assert 0 <= s < 1 << 128
