import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lrwave.errors import DomainError, PreconditionError, UnsupportedOrderError
from lrwave.symbols import (CoefficientField, HamiltonianSpec, JapanesePower, MonomialTimes, PotentialField,
                            SineField, Zero, anisotropic, check_decay_lipschitz, eval_kinetic, eval_total,
                            eval_virial, flat, get_spec, japanese, long_range, validate_decay_assumptions)

CATALOG = [flat(1), flat(2), long_range(0.5, 0.8), long_range(0.5, 0.8, n=2, v0=0.3),
           long_range(-0.3, 0.5, v0=0.2, potential="growing"), anisotropic()]

finite = st.floats(-50, 50, allow_nan=False)


# -- kinetic and total energy -------------------------------------------------

def test_kinetic_flat_examples():
    assert eval_kinetic(flat(), [0.0], [2.0]) == 2.0
    assert eval_kinetic(flat(), [3.7], [0.0]) == 0.0


def test_kinetic_lr_at_origin():
    assert eval_kinetic(long_range(0.5, 0.8), [0.0], [1.0]) == pytest.approx(0.75, abs=1e-15)


def test_total_examples():
    assert eval_total(flat(), [1.0], [1.0]) == 0.5
    # V = 0.3 <x>^-0.8 is 0.3 (1 + x^2)^-0.4; at xi = 0 only V remains
    assert eval_total(long_range(0.5, 0.8, v0=0.3), [0.0], [0.0]) == pytest.approx(0.3, abs=1e-15)


def test_total_lr_closed_form():
    x, xi = 10.0, 1.0
    ref = 0.5 * (1 + 0.5 * (1 + x * x) ** -0.4) * xi * xi
    assert eval_total(long_range(0.5, 0.8), [x], [xi]) == pytest.approx(ref, rel=1e-15)


def test_non_finite_input_rejected():
    with pytest.raises(DomainError):
        eval_kinetic(flat(), [np.nan], [1.0])


@pytest.mark.parametrize("spec", CATALOG, ids=lambda s: f"{s.name}{s.n}")
def test_ellipticity_and_positivity(spec, rng):
    x = rng.uniform(-30, 30, size=(1000, spec.n))
    d = rng.normal(size=(1000, spec.n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    k2 = 2 * eval_kinetic(spec, x, d)
    assert k2.min() >= spec.metric.c_low * (1 - 1e-12)
    assert k2.max() <= spec.metric.c_high * (1 + 1e-12)


@pytest.mark.parametrize("spec", CATALOG, ids=lambda s: f"{s.name}{s.n}")
def test_metric_symmetric_exactly(spec, rng):
    A = spec.metric.a(rng.uniform(-30, 30, size=(1000, spec.n)))
    assert np.max(np.abs(A - np.swapaxes(A, -1, -2))) == 0.0


# -- derivative oracles -------------------------------------------------------

FIELDS = [JapanesePower(0.5, -0.8), JapanesePower(-0.3, 1.2), MonomialTimes(JapanesePower(0.4, -2.8), 0, 1),
          SineField(0.7, 1)]


@pytest.mark.parametrize("f", FIELDS, ids=lambda f: type(f).__name__)
def test_derivatives_match_central_differences(f, rng):
    n, eps = 2, 1e-5
    X = rng.uniform(-3, 3, size=(20, n))
    for order, (lo, hi) in enumerate(((f.value, f.grad), (f.grad, f.hess), (f.hess, f.third))):
        D = np.asarray(hi(X))
        for j in range(n):
            e = np.zeros(n)
            e[j] = eps
            fd = (np.asarray(lo(X + e)) - np.asarray(lo(X - e))) / (2 * eps)
            ex = D[..., j]
            scale = np.maximum(np.abs(ex), 1e-3)
            assert np.max(np.abs(fd - ex) / scale) <= 1e-6, (order, j)


def test_japanese_power_matches_sympy():
    x0, x1 = sp.symbols("x0 x1", real=True)
    expr = sp.Rational(1, 2) * (1 + x0 ** 2 + x1 ** 2) ** sp.Rational(-2, 5)
    f = JapanesePower(0.5, -0.8)
    p = np.array([[0.7, -1.3]])
    subs = {x0: 0.7, x1: -1.3}
    assert f.value(p)[0] == pytest.approx(float(expr.subs(subs)), rel=1e-13)
    H = f.hess(p)[0]
    for i, a in enumerate((x0, x1)):
        for j, b in enumerate((x0, x1)):
            assert H[i, j] == pytest.approx(float(sp.diff(expr, a, b).subs(subs)), rel=1e-12)


# -- virial correction --------------------------------------------------------

def _virial_sympy(c, mu, xv, xiv):
    """d^2/dt^2 y^2 - 4k along the 1D kinetic flow, from the Hamilton equations."""
    x, xi = sp.symbols("x xi", real=True)
    a = 1 + c * (1 + x ** 2) ** (-sp.Rational(mu).limit_denominator(100) / 2)
    k = a * xi ** 2 / 2
    xdot, xidot = sp.diff(k, xi), -sp.diff(k, x)
    d1 = 2 * x * xdot
    d2 = sp.diff(d1, x) * xdot + sp.diff(d1, xi) * xidot
    return float((d2 - 4 * k).subs({x: xv, xi: xiv}))


def test_virial_flat_is_zero(rng):
    x = rng.normal(size=(50, 2))
    assert np.all(eval_virial(flat(2), x, rng.normal(size=(50, 2))) == 0.0)


@pytest.mark.parametrize("x,xi", [(0.0, 1.0), (1.3, -0.7), (-4.0, 2.5)])
def test_virial_matches_symbolic_expansion(x, xi):
    ref = _virial_sympy(sp.Rational(1, 2), sp.Rational(4, 5), x, xi)
    got = float(eval_virial(long_range(0.5, 0.8), [x], [xi]))
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_virial_origin_value():
    # 2 a P xi^2 at x = 0 with a = 1.5, P = 0.5
    assert float(eval_virial(long_range(0.5, 0.8), [0.0], [1.0])) == pytest.approx(1.5, rel=1e-14)


def test_virial_decays_like_mu():
    r = np.geomspace(1e2, 1e5, 30)
    U = np.abs(eval_virial(long_range(0.5, 0.8), r[:, None], np.ones((30, 1))))
    slope = np.polyfit(np.log(r), np.log(U), 1)[0]
    assert slope == pytest.approx(-0.8, abs=0.02)


@pytest.mark.parametrize("spec", CATALOG, ids=lambda s: f"{s.name}{s.n}")
def test_virial_bound(spec, rng):
    C = validate_decay_assumptions(spec).virial_constant
    x = rng.uniform(-100, 100, size=(1000, spec.n))
    xi = rng.normal(size=(1000, spec.n))
    U = np.abs(eval_virial(spec, x, xi))
    bound = C * japanese(x) ** -spec.mu * np.sum(xi ** 2, axis=1)
    assert np.all(U <= bound * (1 + 1e-9) + 1e-300)


# -- assumption validation ----------------------------------------------------

def test_validate_flat_constants_zero():
    rep = validate_decay_assumptions(flat())
    assert rep.ok
    assert all(v == 0.0 for v in rep.constants.values())


def test_validate_lr_constant():
    grid = np.linspace(-100, 100, 4001)[:, None]
    rep = validate_decay_assumptions(long_range(0.5, 0.8), grid=grid)
    assert rep.ok
    assert rep.constants["metric/0"] == pytest.approx(0.5, rel=1e-12)


def test_validate_rejects_non_decaying_metric():
    metric = CoefficientField(1, {(0, 0): SineField(1.0)}, mu=0.8, c_low=0.0 + 1e-9, c_high=2.0)
    spec = HamiltonianSpec("SIN", metric, PotentialField(Zero()), 0.8)
    rep = validate_decay_assumptions(spec)
    assert not rep.passed["metric/0"]
    assert not rep.ok


def test_validate_rejects_high_order():
    with pytest.raises(UnsupportedOrderError):
        validate_decay_assumptions(flat(), max_order=4)


def test_validate_rejects_empty_grid():
    with pytest.raises(PreconditionError):
        validate_decay_assumptions(flat(), grid=np.empty((0, 1)))


# -- decay Lipschitz estimate -------------------------------------------------

def test_lipschitz_constant_function():
    X = np.random.default_rng(0).normal(size=(100, 2))
    rep = check_decay_lipschitz(lambda P: np.full(len(P), 3.0), 1.0, -1.8, X, -X)
    assert rep.max_ratio == 0.0 and rep.passed


def test_lipschitz_japanese_power_2d(rng):
    f = JapanesePower(1.0, -0.8)
    X = rng.uniform(-50, 50, size=(10000, 2))
    Y = rng.uniform(-50, 50, size=(10000, 2))
    C = 0.8   # sup |grad <x>^-mu| <x>^(mu+1) = mu
    rep = check_decay_lipschitz(f.value, C, -1.8, X, Y)
    assert rep.passed and rep.max_ratio > 0.05


def test_lipschitz_linear_beta_zero(rng):
    g = np.array([0.6, -0.8])
    X, Y = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
    rep = check_decay_lipschitz(lambda P: P @ g, 1.0, 0.0, X, Y)
    assert rep.max_ratio <= 2 / np.pi + 1e-12


def test_lipschitz_one_dimension_sign_condition():
    f = JapanesePower(1.0, -0.8)
    with pytest.raises(PreconditionError):
        check_decay_lipschitz(f.value, 0.8, -1.8, [[1.0]], [[-1.0]])


@given(st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=30))
def test_lipschitz_property_anisotropic_entry(pairs):
    P = np.array(pairs)
    X, Y = P[:, :2], P[:, 2:]
    spec = anisotropic()
    C = validate_decay_assumptions(spec).constants["metric/1"]
    for (j, k) in ((0, 0), (0, 1)):
        f = spec.metric.entry(j, k)
        assert check_decay_lipschitz(f.value, C, -(spec.mu + 1), X, Y).passed


# -- catalog ------------------------------------------------------------------

def test_get_spec_by_name():
    assert get_spec("lr", c=0.5, mu=0.8).params == {"c": 0.5, "mu": 0.8}
    with pytest.raises(PreconditionError):
        get_spec("nope")


def test_lr_requires_ellipticity():
    with pytest.raises(PreconditionError):
        long_range(c=-1.0)


@given(st.floats(-0.9, 2.0), st.floats(0.1, 1.0), st.floats(-100, 100))
def test_lr_metric_matches_formula(c, mu, x):
    spec = long_range(c, mu)
    ref = 1 + c * (1 + x * x) ** (-mu / 2)
    assert spec.metric.a(np.array([[x]]))[0, 0, 0] == pytest.approx(ref, rel=1e-14)
