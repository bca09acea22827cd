import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loclab.errors import FitInfeasibleError, InvalidParameterError
from loclab.stats import EnsembleEstimate, default_window, ensemble_mean, fit_decay


def _estimate(r, y):
    r = np.asarray(r, dtype=float)
    return EnsembleEstimate("synthetic", r, np.asarray(y, dtype=float), np.zeros_like(r),
                            np.ones_like(r, dtype=int))


def test_constant_samples():
    est = ensemble_mean({1: [2.5] * 7, 2: [1.0] * 3})
    assert est.mean.tolist() == [2.5, 1.0] and est.stderr.tolist() == [0.0, 0.0]
    assert est.count.tolist() == [7, 3]


def test_two_samples():
    est = ensemble_mean({4: [1.0, 4.0]})
    assert est.mean[0] == 2.5 and est.stderr[0] == pytest.approx(1.5)


def test_single_sample_has_zero_stderr():
    assert ensemble_mean({1: [3.0]}).stderr[0] == 0.0


def test_uniform_clt():
    rng = np.random.default_rng(123)
    est = ensemble_mean({0: rng.uniform(size=10_000)})
    assert abs(est.mean[0] - 0.5) <= 3 * est.stderr[0]


def test_empty_group_rejected():
    with pytest.raises(InvalidParameterError):
        ensemble_mean({1: []})


def test_array_form_and_order_independence():
    rng = np.random.default_rng(5)
    arr = rng.uniform(size=(50, 3))
    a = ensemble_mean(([1, 2, 3], arr))
    b = ensemble_mean(([1, 2, 3], arr[::-1]))
    assert a.mean.tolist() == b.mean.tolist()
    assert a.stderr.tolist() == b.stderr.tolist()


def test_exact_exponential_recovery():
    r = np.arange(1, 21)
    fit = fit_decay(_estimate(r, 3.0 * np.exp(-0.3 * r)), "EXP")
    assert abs(fit.m - 0.3) <= 1e-10 and fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.C == pytest.approx(3.0, rel=1e-10)


def test_exact_stretched_recovery():
    r = np.arange(1, 31)
    fit = fit_decay(_estimate(r, np.exp(-r ** 0.7)), "STRETCHED")
    assert 0.695 <= fit.zeta <= 0.705
    assert fit.r2 > 0.9999


def test_logpow_recovery():
    r = np.arange(2, 25)
    eps, r0 = 0.1, 0.0
    lb = lambda t: np.log(np.sqrt(1 + t * t)) ** (1 + eps)
    y = 0.5 * np.exp(lb(r0) + lb(r0 + r)) * np.exp(-0.4 * r)
    fit = fit_decay(_estimate(r, y), "LOGPOW", epsilon=eps)
    assert fit.m == pytest.approx(0.4, abs=1e-10) and fit.C == pytest.approx(0.5, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(0.05, 1.0), st.floats(0.2, 1.0))
def test_scale_equivariance(c, m, zeta):
    r = np.arange(1, 16)
    y = np.exp(-m * r ** zeta) * (1 + 0.05 * np.sin(r))
    for model in ("EXP", "STRETCHED"):
        a = fit_decay(_estimate(r, y), model)
        b = fit_decay(_estimate(r, c * y), model)
        assert b.rate == pytest.approx(a.rate, rel=1e-7, abs=1e-9)
        assert b.zeta == a.zeta
        assert b.C == pytest.approx(c * a.C, rel=1e-7)


def test_deterministic():
    r = np.arange(1, 12)
    y = np.exp(-0.2 * r ** 0.6) * (1 + 0.1 * np.cos(3 * r))
    a, b = fit_decay(_estimate(r, y), "STRETCHED"), fit_decay(_estimate(r, y), "STRETCHED")
    assert a.to_dict() == b.to_dict()


def test_window_selection():
    r = np.arange(1, 30)
    y = np.where(r < 10, np.exp(-1.0 * r), np.exp(-0.5 * r - 4.5))
    fit = fit_decay(_estimate(r, y), "EXP", window=(10, 29))
    assert fit.m == pytest.approx(0.5, abs=1e-10) and fit.window == (10.0, 29.0)


def test_too_few_points():
    with pytest.raises(FitInfeasibleError):
        fit_decay(_estimate([1, 2, 3], [1.0, 0.5, 0.25]), "EXP")


def test_non_positive_means_shrink_window():
    r = np.arange(1, 11)
    y = np.exp(-0.3 * r)
    y[8:] = 0.0
    fit = fit_decay(_estimate(r, y), "EXP")
    assert fit.n_points == 8 and fit.m == pytest.approx(0.3, abs=1e-10)
    y[3] = 0.0
    with pytest.raises(FitInfeasibleError):
        fit_decay(_estimate(r, y), "EXP")


def test_zeta_hidden_below_r2_floor():
    rng = np.random.default_rng(0)
    r = np.arange(1, 20)
    fit = fit_decay(_estimate(r, rng.uniform(0.5, 1.5, size=r.size)), "STRETCHED", r2_floor=0.99)
    assert not fit.reliable and fit.to_dict()["params"]["zeta"] is None
    assert set(fit.to_dict()) == {"model", "params", "r2", "window", "n_points"}


def test_unknown_model():
    with pytest.raises(InvalidParameterError):
        fit_decay(_estimate(range(1, 9), np.ones(8)), "POWER")


def test_default_window():
    assert default_window(60) == (1, 20)
