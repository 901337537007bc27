import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobonet.errors import BudgetExceededError, InvalidInputError, UnsupportedOrderError
from sobonet.metrics import fd_check
from sobonet.network import (
    Budget,
    Layer,
    Network,
    budget_report,
    combine,
    differentiate,
    evaluate,
    identity_lift,
    linear_network,
    load_network,
    save_network,
    scale_output,
)
from sobonet.parallel import task_rng


def requ_square() -> Network:
    return Network(1, (
        Layer(np.array([[1.0], [-1.0]]), np.zeros(2), "requ"),
        Layer(np.array([[1.0, 1.0]]), np.zeros(1), "linear"),
    ), "requ_square")


def random_relu(widths, seed=0) -> Network:
    rng = task_rng(seed, 99)
    layers = []
    for i in range(1, len(widths)):
        act = "linear" if i == len(widths) - 1 else "relu"
        layers.append(Layer(rng.normal(size=(widths[i], widths[i - 1])), rng.normal(size=widths[i]), act))
    return Network(widths[0], tuple(layers), "random")


def width_n_relu(width: int, seed: int = 0) -> Network:
    return random_relu((1, width, 1), seed)


def test_identity_lift_evaluates_to_input():
    assert evaluate(identity_lift(), [0.37]) == 0.37


def test_requ_square_value_gradient_hessian():
    net = requ_square()
    assert evaluate(net, [-3.0]) == 9.0
    der = differentiate(net, [2.0], order=2)
    assert der.gradient[0] == 4.0
    assert der.hessian[0, 0] == 2.0
    assert not der.breakpoint


def test_identity_lift_gradient_is_one():
    der = differentiate(identity_lift(), [0.5])
    assert der.gradient[0] == 1.0


def test_identity_pairs_allow_second_order():
    der = differentiate(identity_lift(), [0.0], order=2)
    assert der.gradient[0] == 1.0
    assert der.hessian[0, 0] == 0.0
    assert not der.breakpoint


def test_order_two_refused_on_relu_net():
    with pytest.raises(UnsupportedOrderError):
        differentiate(random_relu((2, 4, 4, 1)), [0.3, 0.4], order=2)


def test_breakpoint_flag_on_relu_kink():
    net = Network(1, (
        Layer(np.array([[1.0]]), np.array([-0.5]), "relu"),
        Layer(np.array([[1.0]]), np.zeros(1), "linear"),
    ))
    assert differentiate(net, [0.5]).breakpoint
    der = differentiate(net, [0.25])
    assert not der.breakpoint
    assert der.gradient[0] == 0.0


def test_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        evaluate(identity_lift(2), [0.1, 0.2, 0.3])


def test_layer_shape_validation():
    with pytest.raises(InvalidInputError):
        Layer(np.ones((2, 1)), np.zeros(3))
    with pytest.raises(InvalidInputError):
        Layer(np.array([[np.inf]]), np.zeros(1))
    with pytest.raises(InvalidInputError):
        Network(1, (Layer(np.ones((1, 1)), np.zeros(1), "relu"),))


def test_random_relu_gradient_matches_finite_differences():
    net = random_relu((3, 8, 8, 8, 1), seed=3)
    x = task_rng(3, 1).uniform(0.0, 1.0, (100, 3))
    report = fd_check(net, x, h=1e-6)
    assert report.checked > 90
    assert report.max_deviation <= 1e-5


def test_budget_report_examples():
    sq = budget_report(requ_square())
    assert (sq.width, sq.depth, sq.parameter_count) == (2, 1, 7)
    assert budget_report(linear_network(np.ones((1, 3)))).depth == 0


def test_budget_enforce_mode():
    net = random_relu((1, 6, 1))
    assert Budget(6, 1, "enforce").admit(net) is net
    with pytest.raises(BudgetExceededError):
        Budget(5, 1, "enforce").admit(net)
    assert Budget(5, 1).admit(net) is net
    assert Budget(3, 1).ratio(net) == 2.0


def test_sum_of_two_width_three_nets_has_width_seven():
    a, b = width_n_relu(3, 1), width_n_relu(3, 2)
    total = combine("sum", [a, b])
    assert total.width == 7
    assert total.depth == 2
    x = np.linspace(-1.0, 1.0, 1000).reshape(-1, 1) + 0.00037
    expected = a(x)[:, 0] + b(x)[:, 0]
    np.testing.assert_allclose(total(x)[:, 0], expected, rtol=0, atol=1e-12 * (1 + np.abs(expected).max()))


def test_compose_identity_lifts():
    net = combine("compose", [identity_lift(), identity_lift()])
    assert evaluate(net, [0.9]) == pytest.approx(0.9, abs=1e-15)


def test_parallel_widths_add():
    net = combine("parallel", [width_n_relu(4), width_n_relu(6)])
    assert net.width == 10
    assert net.output_dim == 2


def test_identity_extend_threads_extra_inputs():
    base = width_n_relu(3, 5)
    net = combine("identity_extend", [base], extra=2)
    x = np.array([[0.2, -0.7, 1.3], [0.9, 0.1, -0.4]])
    out = net(x)
    np.testing.assert_allclose(out[:, 0], base(x[:, :1])[:, 0], atol=1e-14)
    np.testing.assert_array_equal(out[:, 1:], x[:, 1:])


def test_mixed_requ_relu_recorded_in_provenance():
    net = combine("parallel", [requ_square(), identity_lift()])
    assert net.provenance.endswith("+relu-identity")


def test_unknown_combine_mode():
    with pytest.raises(InvalidInputError):
        combine("frobnicate", [identity_lift()])


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-8.0, max_value=8.0, allow_nan=False), st.integers(min_value=0, max_value=20))
def test_output_scaling_is_linear(c, seed):
    net = random_relu((2, 5, 5, 1), seed)
    x = task_rng(seed, 2).uniform(0.0, 1.0, (16, 2))
    np.testing.assert_allclose(scale_output(net, c)(x), c * net(x), rtol=1e-12, atol=1e-12)


def test_evaluation_is_repeatable():
    net = random_relu((2, 7, 7, 1), 11)
    x = task_rng(11, 0).uniform(size=(50, 2))
    assert np.array_equal(net(x), net(x))


def test_parameters_round_trip_through_with_parameters():
    net = random_relu((2, 4, 3, 1), 4)
    theta = net.parameters()
    assert theta.size == net.parameter_count == (4 * 2 + 4) + (3 * 4 + 3) + (1 * 3 + 1)
    clone = net.with_parameters(theta)
    x = task_rng(4, 0).uniform(size=(20, 2))
    assert np.array_equal(clone(x), net(x))
    with pytest.raises(InvalidInputError):
        net.with_parameters(theta[:-1])


def test_save_load_is_bit_exact(tmp_path):
    net = random_relu((2, 5, 5, 1), 8)
    path = save_network(net, tmp_path / "net.json")
    again = load_network(path)
    assert again.provenance == net.provenance
    for a, b in zip(net.layers, again.layers):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
        assert a.activation == b.activation
