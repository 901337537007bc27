import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobonet.errors import InvalidInputError, PreconditionError
from sobonet.metrics import GridSpec, sup_error
from sobonet.network import differentiate, evaluate
from sobonet.relu_build import partition_indices
from sobonet.requ_build import (
    CLAMP_WIDTH,
    SmoothProduct,
    build_exact_poly,
    build_smooth_partition,
    check_requ_preconditions,
    monomial_feasible,
    requ_product_tree,
    smooth_component,
    smooth_step,
)
from sobonet.parallel import task_rng

coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(coords)
def test_square_is_exact(x):
    net = build_exact_poly("square")
    assert evaluate(net, [x]) == pytest.approx(x * x, rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(coords, coords)
def test_product_is_exact(x, y):
    net = build_exact_poly("product", d=2)
    assert evaluate(net, [x, y]) == pytest.approx(x * y, rel=1e-12, abs=1e-12)


def test_identity_within_bound():
    net = build_exact_poly("identity", bound=2.0)
    x = np.linspace(-2.0, 2.0, 101).reshape(-1, 1)
    np.testing.assert_allclose(net(x)[:, 0], x[:, 0], atol=1e-14)


def test_square_second_derivative():
    der = differentiate(build_exact_poly("square"), [0.7], order=2)
    assert der.gradient[0] == pytest.approx(1.4, abs=1e-14)
    assert der.hessian[0, 0] == 2.0


def test_monomial_is_exact():
    net = build_exact_poly("monomial", N=2, L=2, d=2, alpha=(2, 1))
    x = task_rng(0, 7).uniform(size=(200, 2))
    expected = x[:, 0] ** 2 * x[:, 1]
    np.testing.assert_allclose(net(x)[:, 0], expected, rtol=1e-12, atol=1e-14)
    der = differentiate(net, [0.3, 0.6], order=2)
    assert der.gradient[0] == pytest.approx(2 * 0.3 * 0.6, abs=1e-12)
    assert der.hessian[0, 0] == pytest.approx(1.2, abs=1e-12)


def test_monomial_feasibility():
    assert monomial_feasible(2, 1, 1)
    assert not monomial_feasible(5, 1, 1)
    with pytest.raises(InvalidInputError):
        build_exact_poly("monomial", N=1, L=1, d=1, alpha=(5,))


def test_polynomial_is_exact():
    coeffs = {(2, 0): 1.5, (1, 1): -2.0, (0, 0): 0.25}
    net = build_exact_poly("polynomial", N=2, L=1, d=2, coeffs=coeffs)
    x = task_rng(1, 7).uniform(size=(100, 2))
    expected = 1.5 * x[:, 0] ** 2 - 2.0 * x[:, 0] * x[:, 1] + 0.25
    np.testing.assert_allclose(net(x)[:, 0], expected, rtol=1e-12, atol=1e-13)


def test_unknown_kind():
    with pytest.raises(InvalidInputError):
        build_exact_poly("cube")


def test_product_tree_of_squares():
    sq = build_exact_poly("square")
    net = requ_product_tree([sq, sq, sq])
    assert evaluate(net, [1.5]) == pytest.approx(1.5 ** 6, rel=1e-12)


def test_smooth_step_shape():
    t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 3.5])
    val, d1, _ = smooth_step(t)
    np.testing.assert_allclose(val, [0.0, 0.5, 1.0, 1.0, 1.0, 0.0, 0.0], atol=1e-15)
    assert d1[2] == 0.0
    assert d1[4] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=1, max_value=8))
def test_smooth_components_sum_to_one(x, K):
    s1 = smooth_component(np.array([x]), 1, K)
    s2 = smooth_component(np.array([x]), 2, K)
    assert s1[0][0] + s2[0][0] == pytest.approx(1.0, abs=1e-12)
    assert s1[1][0] + s2[1][0] == pytest.approx(0.0, abs=1e-9 * K)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_smooth_partition_of_unity(d):
    x = task_rng(d, 3).uniform(size=(500, d))
    total = sum(SmoothProduct(m, 3).value(x) for m in partition_indices(d))
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_smooth_networks_match_closed_form():
    kit = build_smooth_partition(4, 2, 1)
    assert kit.K == 16
    x = GridSpec(1, points_per_axis=8192).points()
    np.testing.assert_allclose(kit.s_nets[1](x)[:, 0], kit.s1(x[:, 0]), atol=1e-9)
    np.testing.assert_allclose(kit.s_nets[2](x)[:, 0], kit.s2(x[:, 0]), atol=1e-9)


def test_profile_clamps_are_padded_to_width_three():
    kit = build_smooth_partition(4, 2, 1)
    # four clamps per tooth, a = 4 teeth
    assert kit.profile.layers[0].rows == CLAMP_WIDTH * 4 * 4
    assert CLAMP_WIDTH == 3
    assert kit.profile.width <= 16 * 4 + 2


def test_lambda_m_second_order_error():
    kit = build_smooth_partition(1, 1, 2)
    grid = GridSpec(2, points_per_axis=96)
    for m in partition_indices(2):
        err = sup_error(kit.s_m(m), kit.lam[m], 2, grid)
        assert err.sobolev(2) <= 1e-8 * 16 * kit.K ** 2


def test_preconditions():
    check_requ_preconditions(2, 1, 2)
    with pytest.raises(PreconditionError):
        check_requ_preconditions(3, 1, 2)
    with pytest.raises(PreconditionError):
        check_requ_preconditions(1, 1, 5)
    with pytest.raises(PreconditionError):
        build_smooth_partition(4, 1, 1)
