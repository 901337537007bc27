import math

import numpy as np
import pytest

from sobonet.errors import InvalidInputError
from sobonet.targets import (
    available_targets,
    get_target,
    multi_indices,
    polynomial_target,
    target_derivative,
)


def test_multi_indices_graded_order():
    assert multi_indices(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert len(multi_indices(3, 2)) == 10
    assert multi_indices(2, 2, exact=True) == [(2, 0), (1, 1), (0, 2)]


def test_sine_target_and_derivative():
    f = get_target("sin1d", n=3)
    assert target_derivative(f, (0,), [0.25]) == pytest.approx(1.0 / (2 * math.pi) ** 3)
    assert target_derivative(f, (1,), [0.0]) == pytest.approx(1.0 / (2 * math.pi) ** 2)


def test_polynomial_target_hessian():
    f = polynomial_target({(1, 1): 2.0, (2, 0): 1.0}, 3)
    h = f.hessian(np.array([[0.3, 0.4]]))[0]
    np.testing.assert_allclose(h, [[2.0, 2.0], [2.0, 0.0]])


def test_zero_target_broadcasts():
    f = get_target("zero", n=1)
    assert f.value(np.zeros((5, 1))).shape == (5,)
    assert np.all(f.gradient(np.ones((3, 1))) == 0.0)


def test_derivative_order_is_bounded():
    f = get_target("cos2d", n=2)
    with pytest.raises(InvalidInputError):
        f.derivative((2, 1), np.zeros((1, 2)))
    with pytest.raises(InvalidInputError):
        f.derivative((1,), np.zeros((1, 2)))


def test_unknown_target_and_order():
    with pytest.raises(InvalidInputError):
        get_target("tan1d")
    with pytest.raises(InvalidInputError):
        get_target("sin1d", n=9)


def test_registry_lists_every_target():
    for name in available_targets():
        f = get_target(name, n=2)
        assert np.all(np.isfinite(f.value(np.full((4, f.d), 0.3))))
