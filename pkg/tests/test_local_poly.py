import numpy as np
import pytest

from sobonet.errors import InvalidInputError, OutOfDomainError
from sobonet.local_poly import (
    BallSpec,
    UnityWeights,
    averaged_taylor,
    build_piecewise_approx,
    c2_bound,
    eval_piecewise,
    load_piecewise,
    unity_profile,
)
from sobonet.metrics import GridSpec, measure_reference, rate_fit
from sobonet.parallel import task_rng
from sobonet.relu_build import SubdomainIndex, partition_indices
from sobonet.targets import get_target, polynomial_target


def test_c2_bound():
    assert c2_bound(2, 1) == 3.0
    assert c2_bound(1, 3) == 1.0
    assert c2_bound(3, 2) == pytest.approx(1 + 4 + 8)


def test_ball_must_stay_in_enlarged_domain():
    BallSpec((0.5,), 0.25)
    with pytest.raises(InvalidInputError):
        BallSpec((1.9,), 0.25)
    with pytest.raises(InvalidInputError):
        BallSpec((0.5,), 0.0)


def test_averaged_taylor_reproduces_quadratic():
    f = get_target("x2", n=3)
    coefs = averaged_taylor(f, BallSpec((0.4,), 0.1), 3)
    assert coefs[(0,)] == pytest.approx(0.0, abs=1e-9)
    assert coefs[(1,)] == pytest.approx(0.0, abs=1e-9)
    assert coefs[(2,)] == pytest.approx(1.0, abs=1e-9)


def test_averaged_taylor_reproduces_bilinear():
    f = polynomial_target({(1, 1): 1.0, (1, 0): 0.5}, 3)
    coefs = averaged_taylor(f, BallSpec((0.3, 0.6), 0.125), 3)
    expected = {(1, 1): 1.0, (1, 0): 0.5}
    for alpha, c in coefs.items():
        assert c == pytest.approx(expected.get(alpha, 0.0), abs=1e-8)


def test_constant_average_of_linear_is_center_value():
    coefs = averaged_taylor(get_target("x", n=1), BallSpec((0.7,), 0.2), 1)
    assert coefs[(0,)] == pytest.approx(0.7, abs=1e-12)


def test_piecewise_reproduces_polynomial_on_every_cell():
    f = get_target("x2", n=3)
    poly = build_piecewise_approx(f, 4, (1,), 3)
    assert eval_piecewise(poly, [0.1]) == pytest.approx(0.01, abs=1e-8)
    assert eval_piecewise(poly, [0.6], order=1)[0] == pytest.approx(1.2, abs=1e-8)
    assert poly.max_coefficient() <= c2_bound(3, 1)


def test_eval_outside_subdomain():
    poly = build_piecewise_approx(get_target("sin1d", n=2), 4, (1,), 2)
    with pytest.raises(OutOfDomainError):
        eval_piecewise(poly, [0.23])
    with pytest.raises(InvalidInputError):
        eval_piecewise(poly, [0.1], order=2)


def test_piecewise_argument_checks():
    f = get_target("sin1d", n=2)
    with pytest.raises(InvalidInputError):
        build_piecewise_approx(f, 0, (1,), 2)
    with pytest.raises(InvalidInputError):
        build_piecewise_approx(f, 4, (1, 1), 2)
    with pytest.raises(InvalidInputError):
        build_piecewise_approx(f, 4, (1,), 3)


def test_unity_profile():
    t = np.array([0.0, 1.5, 2.0, 2.5, 4.0, -2.0])
    np.testing.assert_allclose(unity_profile(t), [1.0, 1.0, 0.5, 0.0, 0.0, 0.5])


@pytest.mark.parametrize("K", [3, 8])
def test_unity_weights_sum_to_one(K):
    x = task_rng(11, K).uniform(0.0, 1.0, size=(1000, 2))
    weights = UnityWeights(K)
    for m in partition_indices(2):
        total = weights.tensor(x, m).sum(axis=1)
        np.testing.assert_allclose(total, 1.0, rtol=0.0, atol=1e-12)


def test_coefficient_field_is_constant_on_cells():
    poly = build_piecewise_approx(get_target("sin1d", n=2), 5, (2,), 2)
    weights = UnityWeights(5)
    for i in range(6):
        lo, hi = SubdomainIndex((2,), (i,), 5).bounds()[0]
        x = np.linspace(lo, hi, 9).reshape(-1, 1)
        field = poly.coefficient_field((1,), x)
        np.testing.assert_allclose(field, poly.cells[(i,)][(1,)], atol=1e-14)
        assert weights.h(i, np.array([0.5 * (lo + hi)]), 2)[0] == 1.0


def test_saved_piecewise_loads_back(tmp_path):
    poly = build_piecewise_approx(get_target("cos1d", n=2), 3, (1,), 2)
    again = load_piecewise(poly.save(tmp_path / "poly.json"))
    assert again.cells == poly.cells
    assert (again.m, again.K, again.n) == (poly.m, poly.K, poly.n)


@pytest.mark.slow
def test_piecewise_rates_for_smooth_sine():
    f = get_target("sin1d", n=3)
    grid = GridSpec(1, points_per_axis=4096)
    values, slopes = [], []
    for K in (4, 8, 16, 32):
        report = measure_reference(f, build_piecewise_approx(f, K, (1,), 3), 1, grid)
        values.append((K, report.sup(0)))
        slopes.append((K, report.sup(1)))
    assert -3.4 <= rate_fit(values).slope <= -2.6
    assert -2.4 <= rate_fit(slopes).slope <= -1.6


@pytest.mark.slow
@pytest.mark.parametrize("name", ["sin1d", "cos1d"])
def test_piecewise_error_shrinks_with_cell_count(name):
    f = get_target(name, n=3)
    grid = GridSpec(1, points_per_axis=4096)
    errors = {}
    for K in (4, 8, 16, 32):
        errors[K] = measure_reference(f, build_piecewise_approx(f, K, (1,), 3), 0, grid).sup(0)
    assert all(errors[a] >= errors[b] for a, b in [(4, 8), (8, 16), (16, 32)])
    assert 4.0 <= errors[8] / errors[16] <= 16.0
