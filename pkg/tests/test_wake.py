import numpy as np
import pytest

from apexgame import autodiff as ad
from apexgame import wake as wk
from helpers import fd_gradient, rel_err


MODEL = wk.WakeModel()


def test_relative_gap_time_worked_example():
    gap_b = wk.relative_gap_time(10.32, 10.00)
    gap_a = wk.relative_gap_time(10.00, 10.32)
    assert gap_b == pytest.approx(0.32)
    assert gap_a == pytest.approx(-0.32)


def test_relative_gap_time_antisymmetric():
    rng = np.random.default_rng(0)
    for _ in range(10):
        ta, tb = rng.uniform(0, 100, 2)
        assert wk.relative_gap_time(ta, tb) == -wk.relative_gap_time(tb, ta)
    assert wk.relative_gap_time(5.0, 5.0) == 0.0


def test_delta_base_anchor_points():
    assert wk.delta_base(MODEL, -0.32) == 0.0
    assert wk.delta_base(MODEL, 0.32) == pytest.approx(0.116, abs=1e-3)
    assert wk.delta_base(MODEL, 1.4) <= 0.005


def test_delta_base_vectorized():
    t = np.array([-1.0, 0.0, 0.05, 0.1, 0.5, 2.0])
    d = wk.delta_base(MODEL, t)
    assert d.shape == t.shape
    assert np.all(d[:3] == 0.0)
    assert d[3] == pytest.approx(MODEL.delta_max)


def test_delta_smooth_front_car_gets_nothing():
    assert wk.delta_smooth(MODEL, -1.0) < 1e-4
    t = np.linspace(-10.0, 0.0, 1001)
    assert np.all(wk.delta_smooth(MODEL, t) < 1e-3)


def test_delta_smooth_worked_example():
    assert wk.delta_smooth(MODEL, 0.32) == pytest.approx(0.116, abs=0.005)


def test_delta_smooth_matches_base_away_from_threshold():
    t = np.concatenate([
        np.linspace(-2.0, MODEL.t_ovt - 0.05, 300),
        np.linspace(MODEL.t_ovt + 0.05, 2.0, 300),
    ])
    assert np.max(np.abs(wk.delta_smooth(MODEL, t) - wk.delta_base(MODEL, t))) <= 0.01


def test_delta_smooth_monotone_beyond_threshold():
    t = np.arange(MODEL.t_ovt + 0.05, 2.0, 1e-3)
    d = wk.delta_smooth(MODEL, t)
    assert np.all(np.diff(d) <= 0.0)


def test_delta_smooth_bounded():
    t = np.linspace(-10.0, 10.0, 20001)
    d = wk.delta_smooth(MODEL, t)
    assert np.all(d >= 0.0)
    assert np.all(d <= MODEL.delta_max * 1.05)


def test_delta_smooth_second_derivative_matches_fd():
    g = ad.Graph()
    t = g.var()
    expr = wk.delta_smooth(MODEL, t)
    (d1,) = ad.grad_graph(expr, [t])
    rng = np.random.default_rng(123)
    pts = rng.uniform(-0.5, 2.0, 20)
    for p in pts:
        d2 = ad.gradient(d1, [p])[0]
        fd = fd_gradient(lambda q: d1.eval(q), np.array([p]), h=1e-5)[0]
        assert rel_err(d2, fd, floor=1e-3) < 1e-4


def test_delta_smooth_expr_matches_numeric():
    g = ad.Graph()
    t = g.var()
    expr = wk.delta_smooth(MODEL, t)
    for p in (-2.0, -0.1, 0.0, 0.11, 0.32, 1.7):
        assert expr.eval([p]) == pytest.approx(wk.delta_smooth(MODEL, p), abs=1e-14)


def base_samples(n=140):
    t = np.linspace(-0.5, 2.0, n)
    return np.column_stack([t, wk.delta_base(MODEL, t)])


def test_fit_surrogate_reaches_residual_target():
    net = wk.fit_surrogate(base_samples(), [1, 8, 8, 1], seed=0)
    s = base_samples()
    res = np.max(np.abs(net(s[:, 0]) - s[:, 1]))
    assert res <= 0.01


def test_fit_surrogate_zero_targets():
    t = np.linspace(-0.5, 2.0, 80)
    samples = np.column_stack([t, np.zeros_like(t)])
    net = wk.fit_surrogate(samples, [1, 4, 1], seed=1)
    assert np.max(np.abs(net(t))) <= 1e-3


def test_fit_surrogate_deterministic():
    net1 = wk.fit_surrogate(base_samples(), [1, 6, 1], seed=3)
    net2 = wk.fit_surrogate(base_samples(), [1, 6, 1], seed=3)
    for w1, w2 in zip(net1.weights, net2.weights):
        assert np.array_equal(w1, w2)
    for b1, b2 in zip(net1.biases, net2.biases):
        assert np.array_equal(b1, b2)


def test_fit_surrogate_requires_enough_samples():
    t = np.linspace(-0.5, 2.0, 20)
    with pytest.raises(ValueError):
        wk.fit_surrogate(np.column_stack([t, t * 0]), [1, 4, 1])


def test_fit_surrogate_fit_error_on_impossible_target():
    rng = np.random.default_rng(0)
    t = np.linspace(-0.5, 2.0, 60)
    noisy = np.column_stack([t, rng.uniform(0, 0.4, 60)])
    with pytest.raises(wk.FitError):
        wk.fit_surrogate(noisy, [1, 2, 1], seed=0, restarts=1,
                         residual_target=1e-9)


def test_surrogate_json_round_trip():
    net = wk.fit_surrogate(base_samples(), [1, 6, 1], seed=2)
    text = net.to_json()
    net2 = wk.SurrogateNet.from_json(text)
    t = np.linspace(-0.5, 2.0, 50)
    assert np.array_equal(net(t), net2(t))
    assert net2.activation == "tanh"


def test_surrogate_used_by_delta_smooth_and_expr_path():
    net = wk.fit_surrogate(base_samples(), [1, 8, 8, 1], seed=0)
    model = wk.WakeModel(surrogate=net)
    t0 = 0.32
    num = wk.delta_smooth(model, t0)
    assert num == pytest.approx(0.116, abs=0.012)
    g = ad.Graph()
    t = g.var()
    expr = wk.delta_smooth(model, t)
    assert expr.eval([t0]) == pytest.approx(num, abs=1e-12)
    assert 0.0 <= num <= net.output_scale


def test_wake_model_invariants():
    with pytest.raises(ValueError):
        wk.WakeModel(delta_max=1.2)
    with pytest.raises(ValueError):
        wk.WakeModel(lam=-1.0)
