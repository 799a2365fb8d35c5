"""Pointwise geometry: frames, fundamental forms, flags, nullities, Ricci."""

import numpy as np
import pytest

from oscflag import subspaces as sub
from oscflag.catalog import get_entry
from oscflag.errors import (CapabilityError, NotImmersionError,
                            ParameterError, RegularityError)
from oscflag.geometry import (ImmersionChart, box, point_geometry,
                              projection_frame, relative_nullity, ricci,
                              s_nullity, sectional_curvature)
from oscflag.jets import jet_constant, jet_cos, jet_sin


@pytest.fixture(scope="module")
def sphere_geom():
    entry = get_entry("sphere", {"n": 2})
    rng = np.random.default_rng(2)
    x = entry.sampler(rng)
    return entry, point_geometry(entry.chart, x, 2)


def test_sphere_invariants(sphere_geom):
    entry, geom = sphere_geom
    assert [s.dim for s in geom.normal_flag] == [1]
    # alpha(X, X) = -|X|^2 times the outward normal (= position)
    pos = entry.chart.position(geom.x)
    for xv in np.eye(2):
        np.testing.assert_allclose(geom.alpha_of(xv, xv), -pos, atol=1e-12)
    # orthogonality invariants
    assert np.max(np.abs(geom.frame @ geom.first_normal.basis.T)) < 1e-12
    sym = geom.alpha - geom.alpha.transpose(1, 0, 2)
    assert np.max(np.abs(sym)) < 1e-12


def test_sphere_alpha_spans_first_normal():
    # span of alpha values has rank one at several random points
    entry = get_entry("sphere", {"n": 2})
    rng = np.random.default_rng(3)
    for _ in range(5):
        geom = point_geometry(entry.chart, entry.sampler(rng), 2)
        vals = geom.alpha.reshape(-1, 3)
        assert sub.span_of(vals, 1e-8).dim == 1
        assert np.max(sub.principal_angles(
            sub.span_of(vals, 1e-8), geom.first_normal)) < 1e-8


def test_sphere_ricci_gauss_consistency(sphere_geom):
    _, geom = sphere_geom
    rng = np.random.default_rng(1)
    for _ in range(50):
        xv = rng.standard_normal(2)
        xv /= np.linalg.norm(xv)
        assert abs(ricci(geom, xv) - 1.0) < 1e-9


def test_flat_chart_trivial_forms():
    entry = get_entry("flat")
    rng = np.random.default_rng(0)
    geom = point_geometry(entry.chart, entry.sampler(rng), 2)
    assert np.max(np.abs(geom.alpha)) < 1e-13
    assert geom.normal_flag == []
    _, nu = relative_nullity(geom)
    assert nu == 2


def test_cylinder_nullity_is_ruling():
    def fn(v):
        return [jet_cos(v[0]), jet_sin(v[0]), v[1]]

    chart = ImmersionChart("cylinder", 2, 3, box([-3, -3], [3, 3]), fn, 6)
    geom = point_geometry(chart, [0.4, 0.1], 1)
    kernel, nu = relative_nullity(geom)
    assert nu == 1
    ambient = kernel.basis @ geom.frame
    np.testing.assert_allclose(np.abs(ambient), [[0, 0, 1]], atol=1e-12)


def test_not_immersion_raises():
    def fn(v):
        return [v[0], v[0] * 1.0, jet_constant(v[0].num_vars, v[0].order, 0.0)]

    chart = ImmersionChart("degenerate", 2, 3, box([-1, -1], [1, 1]), fn, 4)
    with pytest.raises(NotImmersionError):
        point_geometry(chart, [0.1, 0.1], 1)


def test_capability_precondition():
    entry = get_entry("sphere", {"n": 2})
    with pytest.raises(CapabilityError):
        point_geometry(entry.chart, [1.0, 1.0], entry.chart.max_order)


def test_rank_stability_across_tolerances():
    names = ["sphere", "product-torus", "curve-parallel", "section4-ruled"]
    rng = np.random.default_rng(11)
    for name in names:
        entry = get_entry(name)
        x = entry.sampler(rng)
        dims = {}
        for tol in (1e-7, 1e-9):
            geom = point_geometry(entry.chart, x, entry.max_normal_order,
                                  tol)
            dims[tol] = [s.dim for s in geom.normal_flag]
        assert dims[1e-7] == dims[1e-9], name


def test_regularity_error_at_rank_drop():
    # on the ruled example the first normal rank drops at the zero section;
    # just off it at tiny t the rank decision becomes tolerance-dependent
    entry = get_entry("section4-ruled", {"m": 2})
    x = np.array([0.1, 0.2, 1e-7, 1e-7])
    with pytest.raises(RegularityError):
        point_geometry(entry.chart, x, 2, 1e-8)


def test_higher_forms_live_in_their_stage():
    entry = get_entry("curve-parallel")
    rng = np.random.default_rng(5)
    geom = point_geometry(entry.chart, entry.sampler(rng),
                          entry.max_normal_order)
    for ell, form in enumerate(geom.higher_forms, start=3):
        stage = geom.normal_flag[ell - 2]
        vals = form.reshape(-1, geom.ambient_dim)
        resid = vals - stage.project(vals)
        assert np.max(np.abs(resid)) < 1e-9
        span = sub.span_of(vals, 1e-8, ambient_dim=geom.ambient_dim)
        assert span.dim == stage.dim
        assert np.max(sub.principal_angles(span, stage)) < 1e-8


def test_normal_space_decomposition_on_ruled_example():
    # projections onto the first normal space and its complement within the
    # normal space reassemble the normal part of any ambient vector
    entry = get_entry("section4-ruled", {"m": 2})
    rng = np.random.default_rng(7)
    geom = point_geometry(entry.chart, entry.sampler(rng), 2)
    comp = geom.first_normal_complement()
    for _ in range(5):
        v = rng.standard_normal(10)
        normal_part = geom.normal_space.project(v)
        resid = normal_part - geom.first_normal.project(v) - comp.project(v)
        assert np.linalg.norm(resid) < 1e-12


def test_s_nullity_examples():
    entry = get_entry("sphere", {"n": 2})
    rng = np.random.default_rng(2)
    geom = point_geometry(entry.chart, entry.sampler(rng), 2)
    assert s_nullity(geom, 1, restarts=4, seed=0) == \
        relative_nullity(geom)[1] == 0
    with pytest.raises(ParameterError):
        s_nullity(geom, 2)

    # s = p equals the relative nullity exactly on any chart
    entry = get_entry("product-torus")
    geom = point_geometry(entry.chart, entry.sampler(rng), 2)
    assert s_nullity(geom, 2, restarts=4, seed=0) == \
        relative_nullity(geom)[1]


def test_s_nullity_monotone_on_product():
    entry = get_entry("curve-product", {"factors": 3})
    rng = np.random.default_rng(3)
    geom = point_geometry(entry.chart, entry.sampler(rng), 2)
    p = geom.first_normal.dim
    table = [s_nullity(geom, s, restarts=12, seed=s) for s in
             range(1, p + 1)]
    assert table[-1] == relative_nullity(geom)[1]
    for s in range(1, p):
        # lower bounds may interleave, but the cascaded table is monotone
        assert max(table[s - 1:]) >= table[s]


def test_ricci_normalizes_with_warning(sphere_geom):
    _, geom = sphere_geom
    with pytest.warns(UserWarning):
        val = ricci(geom, np.array([2.0, 0.0]))
    assert abs(val - 1.0) < 1e-9


def test_sectional_curvature_sphere(sphere_geom):
    _, geom = sphere_geom
    assert abs(sectional_curvature(geom, [1.0, 0.0], [0.0, 1.0]) - 1.0) < 1e-9


def test_projection_frame_deterministic_and_pivot_stable():
    rng = np.random.default_rng(9)
    space = sub.span_of(rng.standard_normal((3, 7)), 1e-8)
    f1, piv = projection_frame(space)
    f2, piv2 = projection_frame(space)
    assert piv == piv2
    np.testing.assert_array_equal(f1, f2)
    f3, _ = projection_frame(space, pivots=piv)
    np.testing.assert_allclose(f1, f3, atol=1e-14)
    gram = f1 @ f1.T
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-12)
