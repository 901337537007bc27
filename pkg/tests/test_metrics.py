import numpy as np
import pytest

from sobonet.errors import InvalidInputError
from sobonet.metrics import (
    DEFAULT_JITTER,
    GridSpec,
    measure_reference,
    norm_propagation,
    rate_fit,
    sup_error,
    sup_error_points,
)
from sobonet.network import Layer, Network, compose, identity_lift
from sobonet.relu_build import build_square
from sobonet.requ_build import build_exact_poly
from sobonet.targets import get_target, polynomial_target


def test_grid_points_are_jittered_midpoints():
    grid = GridSpec(1, points_per_axis=4)
    np.testing.assert_allclose(grid.points()[:, 0], (np.arange(4) + DEFAULT_JITTER) / 4)
    assert GridSpec(2, points_per_axis=3).points().shape == (9, 2)
    assert grid.refined().n == 8
    assert grid.describe() == "4^1@0.4871"


def test_grid_validation():
    with pytest.raises(InvalidInputError):
        GridSpec(0)
    with pytest.raises(InvalidInputError):
        GridSpec(1, jitter=1.0)
    with pytest.raises(InvalidInputError):
        GridSpec(2, box=((0.0, 1.0),))


def test_exact_network_has_zero_error():
    report = sup_error(get_target("x", n=2), identity_lift(), 1, GridSpec(1, points_per_axis=1000))
    assert report.sup(0) == 0.0
    assert report.sup(1) == 0.0
    assert report.sup(2) is None
    assert report.discarded == 0


def test_sup_error_against_constant():
    zero = Network(1, (Layer(np.zeros((1, 1)), np.zeros(1), "linear"),))
    report = sup_error(get_target("x2", n=2), zero, 1, GridSpec(1, points_per_axis=100))
    assert report.sup(0) == pytest.approx(((99 + DEFAULT_JITTER) / 100) ** 2)
    assert report.sobolev(1) == pytest.approx(2 * (99 + DEFAULT_JITTER) / 100)
    assert report.argmax[1][0] == pytest.approx((99 + DEFAULT_JITTER) / 100)
    rows = report.rows()
    assert [r["order"] for r in rows] == [0, 1]
    assert rows[0]["grid"] == "100^1@0.4871"


def test_breakpoints_are_discarded():
    kink = Network(1, (Layer(np.ones((1, 1)), np.array([-0.5]), "relu"),
                       Layer(np.ones((1, 1)), np.zeros(1), "linear")))
    x = np.array([[0.25], [0.5], [0.75]])
    report = sup_error_points(get_target("zero", n=1), kink, 1, x)
    assert report.discarded == 1
    assert report.sup(0) == 0.25


def test_threads_do_not_change_result():
    f = get_target("sin2d", n=2)
    g = polynomial_target({(1, 1): 0.1}, 2)
    grid = GridSpec(2, points_per_axis=300)
    one = measure_reference(f, g, 1, grid)
    many = sup_error_points(f, g, 1, grid.points(), grid, threads=4)
    assert (one.sup(0), one.sup(1)) == (many.sup(0), many.sup(1))


def test_rate_fit_recovers_power_law():
    fit = rate_fit([(k, 3.0 * k ** -2.0) for k in (2, 4, 8, 16)])
    assert fit.slope == pytest.approx(-2.0)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.points == 4


def test_rate_fit_rejects_degenerate_input():
    with pytest.raises(InvalidInputError):
        rate_fit([(2, 1.0), (4, 0.5)])
    with pytest.raises(InvalidInputError):
        rate_fit([(2, 1.0), (4, 0.0), (8, 0.1)])


def test_norm_propagation():
    assert norm_propagation("product", f_sup=1, f_semi=2, g_sup=3, g_semi=4) == 3 * 2 + 1 * 4
    assert norm_propagation("composition", d=4, m=1, g_sup=1, g_semi=2, f_semi=3) == pytest.approx(12.0)
    with pytest.raises(InvalidInputError):
        norm_propagation("product", f_sup=1)
    with pytest.raises(InvalidInputError):
        norm_propagation("sum", a=1)


def test_refined_grid_contains_coarse_points():
    grid = GridSpec(1, points_per_axis=5)
    fine = grid.refined()
    np.testing.assert_allclose(fine.points()[0::2, 0], grid.points()[:, 0], rtol=0, atol=1e-15)
    assert GridSpec(1, points_per_axis=3, jitter=0.5).refined().jitter == 0.5


@pytest.mark.parametrize("order", [0, 1])
def test_sup_error_never_shrinks_under_refinement(order):
    net = build_square(1, 2, validate=False)
    f = polynomial_target({(2,): 1.0}, 2)
    grid = GridSpec(1, points_per_axis=257)
    for _ in range(3):
        coarse = sup_error(f, net, order, grid).sup(order)
        grid = grid.refined()
        assert sup_error(f, net, order, grid).sup(order) >= coarse - 1e-12


def test_argmax_reproduces_reported_error():
    f = get_target("sin2d", n=2)
    g = polynomial_target({(1, 1): 0.3, (2, 0): -0.2}, 2)
    report = measure_reference(f, g, 1, GridSpec(2, points_per_axis=64))
    for k in (0, 1):
        again = sup_error_points(f, g, 1, np.array([report.argmax[k]]))
        assert again.sup(k) == report.sup(k)


def _norms(net: Network, x: np.ndarray):
    jet = net.jet(x, 1)
    keep = ~jet.breakpoints
    return jet.values[keep, 0], jet.gradients[keep, 0, 0], keep


def test_propagation_bounds_dominate_measured_norms():
    x = GridSpec(1, points_per_axis=4096).points()
    f = build_square(2, 2)
    g = build_exact_poly("square")
    fv, fd, keep = _norms(f, x)
    gv, gd, _ = _norms(g, x[keep])
    f_sup, f_semi = np.abs(fv).max(), np.abs(fd).max()
    g_sup, g_semi = np.abs(gv).max(), np.abs(gd).max()

    product = max(np.abs(fv * gv).max(), np.abs(fd * gv + fv * gd).max())
    assert product <= max(f_sup * g_sup, norm_propagation(
        "product", f_sup=f_sup, f_semi=f_semi, g_sup=g_sup, g_semi=g_semi)) + 1e-12

    # g norms taken over the range of f as well as the grid
    _, rd, _ = _norms(g, fv.reshape(-1, 1))
    outer_sup = max(g_sup, np.abs(fv).max() ** 2)
    outer_semi = max(g_semi, np.abs(rd).max())
    cv, cd, _ = _norms(compose(g, f), x)
    bound = norm_propagation("composition", d=1, m=1, g_sup=outer_sup, g_semi=outer_semi, f_semi=f_semi)
    assert max(np.abs(cv).max(), np.abs(cd).max()) <= bound + 1e-12
