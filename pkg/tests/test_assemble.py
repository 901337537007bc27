import math

import numpy as np
import pytest

from sobonet.assemble import (
    build_relu_approximant,
    build_requ_approximant,
    cell_count,
    coefficient_nets,
    explicit_sum,
    relu_budget,
    requ_budget,
    sweep_points,
)
from sobonet.errors import InvalidInputError, PreconditionError
from sobonet.local_poly import build_piecewise_approx
from sobonet.metrics import GridSpec, rate_fit
from sobonet.relu_build import SubdomainIndex
from sobonet.targets import get_target


def test_relu_budget_formula():
    width, depth = relu_budget(2, 1, 1, 1)
    assert width == pytest.approx(1680.0)
    assert depth == pytest.approx(896.0)


def test_requ_budget_formula():
    width, depth = requ_budget(3, 2, 1, 1)
    assert width == pytest.approx(2 ** 7 * 3 ** 2 * 3 * 4)
    assert depth == pytest.approx(15 * 9 * 3 * 2)


def test_cell_count():
    assert cell_count(4, 1, 1) == 16
    assert cell_count(4, 1, 2) == 4
    assert cell_count(1, 3, 1) == 9


def test_sweep_points():
    assert sweep_points(1, [4, 9]) == [(4, 2, 1), (9, 3, 1)]
    with pytest.raises(InvalidInputError):
        sweep_points(1, [5])


def test_coefficient_nets_hit_cell_values():
    poly = build_piecewise_approx(get_target("sin1d", n=2), 4, (1,), 2)
    nets = coefficient_nets(poly)
    for alpha, (net, bound) in nets.items():
        for i in range(poly.K + 1):
            lo, hi = SubdomainIndex((1,), (i,), 4).bounds()[0]
            x = np.linspace(lo, hi, 9)[1:-1].reshape(-1, 1)
            np.testing.assert_allclose(net(x)[:, 0], poly.cells[(i,)][alpha], atol=1e-12)
            assert abs(poly.cells[(i,)][alpha]) <= bound


def test_relu_approximant_is_sum_of_terms():
    f = get_target("sin1d", n=2)
    net, report = build_relu_approximant(f, 2, 2, 1, 1, measure=False)
    assert report.K == 4
    assert report.kind == "relu"
    x = GridSpec(1, points_per_axis=500).points()
    np.testing.assert_allclose(net(x)[:, 0], explicit_sum(report, x), atol=1e-10)
    assert set(report.terms) == {(1,), (2,)}
    assert report.width == net.width and report.depth == net.depth


def test_relu_approximant_error_is_small():
    f = get_target("sin1d", n=2)
    _, report = build_relu_approximant(f, 2, 4, 1, 1, grid=GridSpec(1, points_per_axis=2048))
    assert set(report.errors) == {0, 1}
    assert report.errors[0] <= 0.05
    assert report.errors[1] <= 0.5


def test_requ_approximant_reproduces_quadratic():
    f = get_target("x2", n=3)
    net, report = build_requ_approximant(f, 3, 2, 1, 1, grid=GridSpec(1, points_per_axis=1024))
    assert report.K == 4
    assert net.provenance.endswith("+relu-identity")
    assert set(report.errors) == {0, 1, 2}
    assert report.errors[0] <= 1e-6
    assert report.errors[1] <= 1e-5


def test_requ_approximant_preconditions():
    with pytest.raises(PreconditionError):
        build_requ_approximant(get_target("sin1d", n=3), 3, 1, 1, 1, measure=False)


def test_assembly_argument_checks():
    f = get_target("sin2d", n=2)
    with pytest.raises(InvalidInputError):
        build_relu_approximant(f, 2, 1, 1, 1)
    with pytest.raises(InvalidInputError):
        build_relu_approximant(f, 1, 1, 1, 2)
    with pytest.raises(InvalidInputError):
        build_relu_approximant(f, 3, 1, 1, 2)


def test_report_to_dict_is_plain():
    _, report = build_relu_approximant(get_target("cos1d", n=2), 2, 1, 1, 1, measure=False)
    doc = report.to_dict()
    assert doc["kind"] == "relu"
    assert doc["target_width"] == pytest.approx(relu_budget(2, 1, 1, 1)[0])
    assert all(set(v) == {"width", "depth"} for v in doc["sub_networks"].values())


@pytest.mark.slow
def test_relu_rate_in_one_dimension():
    f = get_target("sin1d", n=2)
    pairs = []
    for K, N, L in sweep_points(1, [4, 16, 64]):
        _, report = build_relu_approximant(f, 2, N, L, 1, grid=GridSpec(1, points_per_axis=8192))
        pairs.append((K, max(report.errors.values())))
    assert rate_fit(pairs).slope <= -0.7
    assert all(math.isfinite(e) for _, e in pairs)


@pytest.mark.slow
def test_requ_second_order_error_quarters_when_cells_double():
    f = get_target("sin1d", n=4)
    grid = GridSpec(1, points_per_axis=2048)
    errors = {}
    for K in (8, 16):
        _, report = build_requ_approximant(f, 4, 2, 1, 1, grid=grid, K=K)
        errors[K] = report.errors[2]
    assert 1 / 8 <= errors[16] / errors[8] <= 1 / 2
