"""Jet arithmetic against independent oracles: analytic series, direct
coefficient convolution, finite differences, and affine substitution."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscflag.errors import CapabilityError, DomainError, ShapeError, \
    SingularityError
from oscflag.geometry import ImmersionChart, box, eval_jet
from oscflag.jets import (Jet, VectorJet, antiderivative,
                          compose_series, jet_arith, jet_constant, jet_cos,
                          jet_exp, jet_reciprocal, jet_sin, jet_sqrt,
                          jet_variable, lift, signature, substitute_affine,
                          variables)


def poly_jet(coeffs, order):
    """1-variable jet with prescribed Taylor coefficients."""
    c = np.zeros(signature(1, order).size)
    c[:len(coeffs)] = coeffs
    return Jet(1, order, c)


def test_monomial_product():
    u2 = poly_jet([0, 0, 1], 5)
    u3 = poly_jet([0, 0, 0, 1], 5)
    prod = jet_arith(u2, u3, "mul")
    expect = np.zeros(6)
    expect[5] = 1.0
    np.testing.assert_array_equal(prod.coeffs, expect)


def test_add_zero_identity():
    x = jet_variable(2, 3, 0, 1.7)
    zero = jet_constant(2, 3, 0.0)
    np.testing.assert_array_equal(jet_arith(x, zero, "add").coeffs, x.coeffs)


def test_sin_maclaurin():
    u = jet_variable(1, 3, 0, 0.0)
    s = jet_arith(u, None, "sin")
    np.testing.assert_allclose(s.coeffs, [0.0, 1.0, 0.0, -1.0 / 6.0],
                               atol=1e-16)


@pytest.mark.parametrize("fn,phase_cycle", [
    (jet_sin, lambda y, m: math.sin(y + m * math.pi / 2.0)),
    (jet_cos, lambda y, m: math.cos(y + m * math.pi / 2.0)),
    (jet_exp, lambda y, m: math.exp(y)),
])
def test_analytic_ops_match_derivatives(fn, phase_cycle):
    # closed-form oracle: d^m/dx^m f(2x + 0.1) = 2^m f^(m)(2x + 0.1)
    u = jet_variable(1, 6, 0, 0.37)
    out = fn(u * 2.0 + 0.1)
    y = 2.0 * 0.37 + 0.1
    for m in range(7):
        expect = (2.0 ** m) * phase_cycle(y, m)
        assert abs(out.derivative((m,)) - expect) < 1e-12 * max(1, abs(expect))


def test_reciprocal_and_sqrt():
    u = jet_variable(1, 5, 0, 2.0)
    r = jet_reciprocal(u)
    prod = u * r
    expect = np.zeros(6)
    expect[0] = 1.0
    np.testing.assert_allclose(prod.coeffs, expect, atol=1e-14)
    s = jet_sqrt(u)
    np.testing.assert_allclose((s * s).coeffs, u.coeffs, atol=1e-14)


def test_reciprocal_of_zero_raises():
    with pytest.raises(SingularityError):
        jet_reciprocal(jet_variable(1, 3, 0, 0.0))


def test_shape_mismatch_raises():
    a = jet_constant(1, 3, 1.0)
    b = jet_constant(2, 3, 1.0)
    with pytest.raises(ShapeError):
        jet_arith(a, b, "add")
    with pytest.raises(ShapeError):
        jet_arith(a, None, "nonsense")


def test_leibniz_sin_cos_identity():
    # sin(u)cos(u) through mul must equal the sin(2u)/2 series path
    u = jet_variable(1, 7, 0, 0.4)
    lhs = jet_sin(u) * jet_cos(u)
    rhs = jet_sin(u * 2.0) * 0.5
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=4),
       st.lists(st.floats(-2, 2), min_size=1, max_size=4))
def test_leibniz_polynomial_convolution(a, b):
    order = 6
    ja, jb = poly_jet(a, order), poly_jet(b, order)
    prod = ja * jb
    direct = np.zeros(order + 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            if i + j <= order:
                direct[i + j] += ai * bj
    np.testing.assert_allclose(prod.coeffs, direct, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=10))
def test_ring_axioms(vals):
    sig = signature(2, 3)
    rng = np.random.default_rng(int(abs(sum(vals)) * 1e6) % 2 ** 31)
    a = Jet(2, 3, rng.normal(size=sig.size))
    b = Jet(2, 3, rng.normal(size=sig.size))
    c = Jet(2, 3, rng.normal(size=sig.size))
    np.testing.assert_allclose((a * b).coeffs, (b * a).coeffs, atol=1e-13)
    np.testing.assert_allclose((a * (b + c)).coeffs, (a * b + a * c).coeffs,
                               atol=1e-12)
    np.testing.assert_allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs,
                               atol=1e-12)


def test_degree_zero_is_value():
    u = jet_variable(3, 4, 1, 2.5)
    assert u.value == 2.5
    out = jet_sin(u * u)
    assert abs(out.value - math.sin(2.5 ** 2)) < 1e-15


def test_antiderivative_picard_exponential():
    # solve y' = -y, y(0) = 1 by Picard sweeps; compare with exp(-t)
    order = 8
    y = jet_constant(1, order, 1.0)
    for _ in range(order + 1):
        y = antiderivative(y * (-1.0), 1.0)
    expect = [(-1.0) ** m / math.factorial(m) for m in range(order + 1)]
    np.testing.assert_allclose(y.coeffs, expect, atol=1e-14)


def test_compose_series_matches_analytic():
    u = jet_variable(2, 4, 0, 0.3) * jet_variable(2, 4, 1, -0.2)
    coeffs = np.array([math.sin(u.value)] + [0.0] * 4)
    cyc = [math.sin(u.value), math.cos(u.value), -math.sin(u.value),
           -math.cos(u.value)]
    coeffs = np.array([cyc[m % 4] / math.factorial(m) for m in range(5)])
    np.testing.assert_allclose(compose_series(u, coeffs).coeffs,
                               jet_sin(u).coeffs, atol=1e-15)


def test_lift_places_variables():
    a = jet_variable(1, 3, 0, 0.5)
    lifted = lift(jet_sin(a), 3, (2,))
    direct = jet_sin(jet_variable(3, 3, 2, 0.5))
    np.testing.assert_allclose(lifted.coeffs, direct.coeffs, atol=1e-16)


# ---------------------------------------------------------------------------
# Charts and eval_jet


def circle_chart():
    return ImmersionChart("circle", 1, 2, box([-4.0], [4.0]),
                          lambda v: [jet_cos(v[0]), jet_sin(v[0])], 8)


def test_circle_derivatives():
    dt = eval_jet(circle_chart(), [0.0], 2)
    np.testing.assert_allclose(dt.partial((0,)), [1.0, 0.0], atol=1e-16)
    np.testing.assert_allclose(dt.partial((1,)), [0.0, 1.0], atol=1e-16)
    np.testing.assert_allclose(dt.partial((2,)), [-1.0, 0.0], atol=1e-16)


def test_affine_chart_derivatives():
    rng = np.random.default_rng(0)
    mat = rng.normal(size=(5, 2))
    shift = rng.normal(size=5)

    def fn(v):
        return [v[0] * mat[j, 0] + v[1] * mat[j, 1] + shift[j]
                for j in range(5)]

    chart = ImmersionChart("affine", 2, 5, box([-1, -1], [1, 1]), fn, 6)
    dt = eval_jet(chart, [0.2, -0.3], 2)
    np.testing.assert_allclose(dt.tensor(1), mat.T, atol=1e-15)
    assert np.max(np.abs(dt.tensor(2))) < 1e-15


def test_holomorphic_chart_coordinate_planes_at_zero():
    # hand differentiation: the k-th derivative vector of the monomial curve
    # at the center is the k-th complex coordinate vector
    from oscflag.catalog import make_holomorphic_curve_surface
    m = 2
    chart = make_holomorphic_curve_surface(m).chart
    dt = eval_jet(chart, [0.0, 0.0], m + 3)
    for k in range(1, m + 4):
        vec = dt.partial((k, 0))
        expect = np.zeros(2 * (m + 3))
        expect[2 * (k - 1)] = 1.0
        np.testing.assert_allclose(vec, expect, atol=1e-12)
        # differentiating along v multiplies by i per order
        vec_v = dt.partial((k - 1, 1)) if k >= 1 else None
        expect_v = np.zeros(2 * (m + 3))
        expect_v[2 * (k - 1) + 1] = 1.0
        np.testing.assert_allclose(vec_v, expect_v, atol=1e-12)


def test_chain_rule_affine_substitution():
    # composing a chart with an affine reparametrization and evaluating
    # matches pushing the jet through the substitution
    rng = np.random.default_rng(1)
    mat = rng.normal(size=(2, 2))
    shift = rng.normal(size=2)

    def fn(v):
        return [jet_sin(v[0]) * jet_cos(v[1]), jet_exp(v[0] * 0.3 + v[1])]

    def fn_composed(w):
        v = [w[0] * mat[0, 0] + w[1] * mat[0, 1] + shift[0],
             w[0] * mat[1, 0] + w[1] * mat[1, 1] + shift[1]]
        return fn(v)

    w0 = np.array([0.15, -0.2])
    u0 = mat @ w0 + shift
    order = 4
    direct = [substitute_affine(j, mat, w0)
              for j in fn(variables(u0, order))]
    composed = fn_composed(variables(w0, order))
    for a, b in zip(direct, composed):
        np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12)


def test_chart_capability_and_domain_errors():
    chart = circle_chart()
    with pytest.raises(CapabilityError):
        chart.eval([0.0], 9)
    with pytest.raises(DomainError):
        chart.eval([5.0], 2)


def test_derivative_tensor_symmetry():
    def fn(v):
        return [jet_sin(v[0] * v[1]), v[0] * v[0] * v[1]]

    chart = ImmersionChart("mix", 2, 2, box([-1, -1], [1, 1]), fn, 5)
    dt = eval_jet(chart, [0.3, 0.4], 3)
    t3 = dt.tensor(3)
    np.testing.assert_allclose(t3, np.transpose(t3, (1, 0, 2, 3)), atol=1e-15)
    np.testing.assert_allclose(t3, np.transpose(t3, (2, 1, 0, 3)), atol=1e-15)


def test_vector_jet_requires_matching_signatures():
    with pytest.raises(ShapeError):
        VectorJet([jet_constant(1, 2, 0.0), jet_constant(1, 3, 0.0)])


def test_richardson_fd_agreement_on_circle():
    # one-step central differences of jet data, Richardson extrapolated
    chart = circle_chart()
    x = np.array([0.7])
    h = 1e-4
    jet_here = eval_jet(chart, x, 4)
    for order in range(1, 5):
        target = jet_here.partial((order,))
        lower = order - 1

        def partial_at(pt):
            return eval_jet(chart, pt, lower).partial((lower,))

        estimates = []
        for step in (h, h / 2):
            estimates.append((partial_at(x + step) - partial_at(x - step))
                             / (2 * step))
        fd = (4.0 * estimates[1] - estimates[0]) / 3.0
        rel = np.linalg.norm(fd - target) / max(1.0, np.linalg.norm(target))
        assert rel < 1e-6
