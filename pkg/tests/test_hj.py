import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrwave.errors import RangeError
from lrwave.flows import FlowKind, flow_batch
from lrwave.hj import (HJSolution, build_hj, build_W, calibrate, eval_effective_symbol, hj_residual_fd,
                       invert_lambda, lambda_map, modified_flow, modified_flow_composed, S_t, S_t_inverse,
                       smooth_step, transport_pushforward, w_table_csv)
from lrwave.symbols import eval_total, flat, long_range

LR = long_range(0.5, 0.8)


@pytest.fixture(scope="module")
def hj20():
    return build_hj(LR, t_min=-2.0, R=20.0)


@pytest.fixture(scope="module")
def hj_flat():
    return build_hj(flat(), t_min=-2.0)


# -- cutoff -------------------------------------------------------------------

@given(st.floats(-2, 3))
def test_smooth_step_range(s):
    v = smooth_step(np.array([s]))[0][0]
    assert 0.0 <= v <= 1.0
    if s <= 0:
        assert v == 0.0
    if s >= 1:
        assert v == 1.0


def test_smooth_step_derivatives():
    s = np.linspace(0.05, 0.95, 19)
    e = 1e-6
    st0, d1, d2 = smooth_step(s)
    assert np.all(np.diff(st0) > 0)
    assert np.allclose(d1, (smooth_step(s + e)[0] - smooth_step(s - e)[0]) / (2 * e), atol=1e-7)
    assert np.allclose(d2, (smooth_step(s + e)[1] - smooth_step(s - e)[1]) / (2 * e), atol=1e-5)
    assert smooth_step(np.array([0.5]))[0][0] == pytest.approx(0.5, abs=1e-15)


# -- Lambda map ---------------------------------------------------------------

def test_lambda_flat_identity():
    xi = np.array([[15.0], [-40.0]])
    eta, low = lambda_map(flat(), -1.5, xi, 10.0)
    assert np.allclose(eta, xi, atol=1e-12) and not low.any()


def test_lambda_zero_time_identity():
    xi = np.array([[30.0], [-55.0]])
    assert np.array_equal(lambda_map(LR, 0.0, xi, 20.0)[0], xi)


def test_lambda_low_regime_flagged():
    assert lambda_map(LR, -1.0, [[5.0]], 20.0)[1][0]


def test_lambda_shift_scales_like_R_power():
    # |Lambda(xi) - xi| R^mu / |xi| stays bounded as R doubles, over |xi| in [30, 100] R/20
    consts = []
    for R in (20.0, 40.0):
        xi = np.linspace(30, 100, 15)[:, None] * R / 20.0
        eta, _ = lambda_map(LR, -1.0, xi, R)
        consts.append(np.max(np.abs(eta - xi) * R ** 0.8 / np.abs(xi)))
    assert max(consts) <= 2.0 * min(consts)
    eta, _ = lambda_map(LR, -1.0, [[40.0]], 20.0)
    assert abs(eta[0, 0] - 40.0) <= consts[0] * 20.0 ** -0.8 * 40.0 * (1 + 1e-12)


def test_invert_flat_one_iteration():
    info = invert_lambda(flat(), -1.0, [[25.0]], 10.0, return_info=True)
    assert np.allclose(info["zeta"], [[25.0]], atol=1e-12)
    assert info["iterations"][0] == 1


def test_invert_zero_time():
    assert np.array_equal(invert_lambda(LR, 0.0, [[33.0]], 20.0), [[33.0]])


def test_invert_lr_converges_fast():
    info = invert_lambda(LR, -1.0, [[40.0]], 20.0, return_info=True)
    eta, _ = lambda_map(LR, -1.0, info["zeta"], 20.0)
    assert info["iterations"][0] <= 5
    assert abs(eta[0, 0] - 40.0) <= 1e-10


def test_calibration_picks_smallest_candidate():
    R, c4, report = calibrate(LR, -2.0)
    assert R == 10.0
    assert report[0]["jacobian_defect"] <= 0.5
    assert c4 == pytest.approx(2.0 * (report[0]["relative_shift"] + 1.0))


# -- W ------------------------------------------------------------------------

@given(st.floats(-2, 0), st.floats(0.05, 200), st.sampled_from([1.0, -1.0]))
def test_flat_w_closed_form(t, r, sgn):
    hj = build_hj(flat(), t_min=-2.0, R=10.0, c4=2.0)
    xi = np.array([[sgn * r]])
    v = hj.evaluate(t, xi)
    assert v.W[0] == pytest.approx(-10.0 * r + 0.5 * t * r * r, abs=1e-9 * max(1, r * r))
    assert v.dW[0, 0] == pytest.approx(-10.0 * sgn + t * sgn * r, abs=1e-9 * max(1, r))
    assert v.dtW[0] == pytest.approx(0.5 * r * r, rel=1e-9)


def test_w_at_zero_time(hj20):
    xi = np.array([[hj20.c4R + 1.0], [-2 * hj20.c4R], [5 * hj20.c4R]])
    W, dW, dtW = build_W(hj20, 0.0, xi)
    assert np.allclose(W, -20.0 * np.abs(xi[:, 0]), rtol=1e-14)


def test_low_branch_exact(hj20):
    xi = np.array([[0.3], [-5.0], [hj20.c4R - 1e-9]])
    v = hj20.evaluate(-1.3, xi)
    r = np.abs(xi[:, 0])
    assert np.array_equal(v.W, -20.0 * r + 0.5 * -1.3 * r ** 2)
    assert all(b == "low" for b in v.branch)


def test_branch_labels(hj20):
    xi = np.array([[1.0], [hj20.c4R + 0.5], [hj20.c4R + 2.0]])
    assert list(hj20.evaluate(-1.0, xi).branch) == ["low", "band", "high"]


def test_hj_residual_example(hj20):
    res = hj_residual_fd(hj20, [-1.0], [[50.0]])
    assert res["hj_residual"] <= 1e-6 and res["grad_residual"] <= 1e-5


def test_gradient_consistent_in_band(hj20):
    xi = np.linspace(hj20.c4R + 0.05, hj20.c4R + 0.95, 7)[:, None]
    res = hj_residual_fd(hj20, [-1.5, -0.5], xi)
    assert res["grad_residual"] <= 1e-5


def test_gradient_is_anchor_trajectory_position(hj20):
    xi = np.array([[60.0], [-90.0]])
    v = hj20.evaluate(-1.0, xi)
    zeta = v.zeta
    fb = flow_batch(LR, FlowKind.full(), -20.0 * np.sign(zeta), zeta, (0.0, -1.0), opts=hj20.opts.flow_opts())
    assert np.allclose(v.dW, fb.y, atol=1e-9)


def test_derivative_growth_bounded(hj20):
    r = np.geomspace(hj20.c4R + 1.0, 2000.0, 24)
    v = hj20.evaluate(-1.0, r[:, None])
    jr = np.sqrt(1 + r * r)
    for q in (np.abs(v.W) / jr ** 2, np.abs(v.dW[:, 0]) / jr, np.abs(v.d2W[:, 0, 0])):
        assert np.all(np.isfinite(q))
        assert q[12:].max() <= 2.0 * q[:12].max()


def test_zeta_derivative_bounded(hj20):
    r = np.geomspace(hj20.c4R + 1.0, 2000.0, 16)
    e = 1e-3
    zp = hj20.evaluate(-1.0, (r + e)[:, None]).zeta[:, 0]
    zm = hj20.evaluate(-1.0, (r - e)[:, None]).zeta[:, 0]
    d = np.abs(zp - zm) / (2 * e)
    assert d.max() <= 1.5 and d.min() >= 0.5


def test_cache_has_no_semantic_effect(hj20):
    cold = HJSolution(LR, hj20.R, hj20.c4, hj20.t_min, use_cache=False)
    xi = np.array([[45.0], [-70.0], [hj20.c4R + 0.3]])
    a, b = hj20.evaluate(-0.8, xi), cold.evaluate(-0.8, xi)
    for u, w in ((a.W, b.W), (a.dW, b.dW), (a.dtW, b.dtW), (a.d2W, b.d2W)):
        assert np.allclose(u, w, rtol=1e-12, atol=1e-12)


def test_time_range_enforced(hj20):
    with pytest.raises(RangeError):
        hj20.evaluate(0.5, [[30.0]])
    with pytest.raises(RangeError):
        hj20.evaluate(-2.5, [[30.0]])


def test_w_table_csv(hj20):
    text = w_table_csv(hj20, [-1.0, 0.0], [[1.0], [hj20.c4R + 0.5], [60.0]])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "xi0", "W", "dW0", "dtW", "branch"]
    assert [r[-1] for r in rows[1:4]] == ["low", "band", "high"]
    assert len(rows) == 7


# -- effective symbol and modified flows --------------------------------------

def test_effective_symbol_flat_zero(hj_flat):
    xi = np.array([[30.0], [80.0]])
    assert np.allclose(eval_effective_symbol(flat(), hj_flat, -1.0, [[0.3], [-2.0]], xi), 0.0, atol=1e-9)


def test_effective_symbol_vanishes_at_origin(hj20):
    xi = np.array([[50.0], [-120.0]])
    assert np.allclose(eval_effective_symbol(LR, hj20, -1.0, [[0.0], [0.0]], xi), 0.0, atol=1e-6)


def test_effective_symbol_high_branch_identity(hj20):
    xi = np.array([[50.0]])
    v = hj20.evaluate(-1.0, xi)
    ell = eval_effective_symbol(LR, hj20, -1.0, [[1.0]], xi)
    ref = eval_total(LR, 1.0 + v.dW, xi) - eval_total(LR, v.dW, xi)
    assert np.allclose(ell, ref, atol=1e-6)


def test_effective_symbol_growth(hj20):
    xi = np.geomspace(50, 2000, 12)[:, None]
    ell = np.abs(eval_effective_symbol(LR, hj20, -1.0, np.ones_like(xi), xi))
    q = ell / np.sqrt(1 + xi[:, 0] ** 2) ** 0.2
    assert q.max() <= 3.0 * q.min()


def test_modified_flow_flat(hj_flat):
    res = modified_flow(flat(), hj_flat, [[0.5]], [[30.0]], -1.5, t_eval=[0.0, -0.7, -1.5])
    assert np.allclose(res.z[0, :, 0], 0.5 + hj_flat.R, atol=1e-8)
    assert np.allclose(res.eta[0, :, 0], 30.0, atol=1e-10)


def test_modified_flow_zero_time(hj20):
    res = modified_flow(LR, hj20, [[0.5]], [[-40.0]], 0.0)
    assert res.z[0, -1, 0] == 0.5 - 20.0 and res.eta[0, -1, 0] == -40.0


def test_modified_flow_two_routes(hj20, rng):
    x = rng.uniform(-3, 3, size=(20, 1))
    xi = rng.choice([-1, 1], size=(20, 1)) * rng.uniform(60, 150, size=(20, 1))
    res = modified_flow(LR, hj20, x, xi, -1.0, rtol=1e-12, atol=1e-12)
    z, eta = modified_flow_composed(LR, hj20, (x, xi), -1.0)
    assert np.allclose(res.z[:, -1], z, atol=1e-6)
    assert np.allclose(res.eta[:, -1], eta, atol=1e-6)


def test_pushforward_zero_time(hj20):
    f0 = lambda x, xi: np.exp(-(x[:, 0] - 1.0) ** 2) * np.exp(-((xi[:, 0] - 50.0) / 10) ** 2)
    # S_0 moves x to x + R xi/|xi|, so the pushforward reads f0 at z - R xi/|xi|
    z = np.array([[21.0], [22.0]])
    xi = np.array([[50.0], [55.0]])
    vals = transport_pushforward(f0, hj20, LR, 0.0, z, xi)
    assert np.allclose(vals, f0(z - 20.0, xi), atol=1e-14)


def test_pushforward_flat_constant_in_time(hj_flat):
    f0 = lambda x, xi: np.cos(x[:, 0]) * np.sin(xi[:, 0] / 30)
    z, xi = np.array([[3.0], [-1.0]]), np.array([[40.0], [-55.0]])
    a = transport_pushforward(f0, hj_flat, flat(), -1.7, z, xi)
    b = transport_pushforward(f0, hj_flat, flat(), 0.0, z, xi)
    assert np.allclose(a, b, atol=1e-8)


def test_pushforward_maps_support(hj20):
    box = (0.0, 2.0, 60.0, 80.0)

    def f0(x, xi):
        inside = (x[:, 0] > box[0]) & (x[:, 0] < box[1]) & (xi[:, 0] > box[2]) & (xi[:, 0] < box[3])
        return inside.astype(float)

    g = np.linspace(0.02, 0.98, 7)
    X, K = np.meshgrid(box[0] + g * 2.0, box[2] + g * 20.0)
    x, xi = X.reshape(-1, 1), K.reshape(-1, 1)
    z, eta = S_t(LR, hj20, -1.0, x, xi)
    assert np.all(transport_pushforward(f0, hj20, LR, -1.0, z, eta) == 1.0)
    back = S_t_inverse(LR, hj20, -1.0, z, eta)
    assert np.allclose(back[0], x, atol=1e-7) and np.allclose(back[1], xi, atol=1e-7)
