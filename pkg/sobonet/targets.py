"""
Registered target functions with closed-form partial derivatives.

Targets are written as sympy expressions; derivatives are differentiated
symbolically once and compiled with ``lambdify`` into numpy callables.
All targets are defined on the enlarged domain [-1, 2]^d.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np
import sympy

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
ENLARGED_DOMAIN = (-1.0, 2.0)


def multi_indices(d: int, max_order: int, exact: bool = False) -> List[MultiIndex]:
    """All α ∈ N^d with |α| ≤ max_order (or == when ``exact``), graded-lex order."""
    out: List[MultiIndex] = []
    orders = [max_order] if exact else range(max_order + 1)
    for total in orders:
        for alpha in itertools.product(range(total + 1), repeat=d):
            if sum(alpha) == total:
                out.append(tuple(alpha))
    return sorted(set(out), key=lambda a: (sum(a), tuple(-v for v in a)))


def symbols(d: int) -> Tuple[sympy.Symbol, ...]:
    return tuple(sympy.symbols(f"x1:{d + 1}", real=True))


@dataclass(eq=False)
class TargetFunction:
    """A smooth function known in closed form up to derivative order ``n``."""

    name: str
    d: int
    n: int
    expr: sympy.Expr
    sobolev_bound: float = 1.0
    _cache: Dict[MultiIndex, Callable] = field(default_factory=dict, repr=False)

    @property
    def xs(self) -> Tuple[sympy.Symbol, ...]:
        return symbols(self.d)

    def _compiled(self, alpha: MultiIndex) -> Callable:
        fn = self._cache.get(alpha)
        if fn is None:
            expr = self.expr
            for var, k in zip(self.xs, alpha):
                if k:
                    expr = sympy.diff(expr, var, k)
            fn = sympy.lambdify(self.xs, expr, modules="numpy")
            self._cache[alpha] = fn
            logger.debug("compiled D^%s of %s", list(alpha), self.name)
        return fn

    def derivative(self, alpha: Sequence[int], x: np.ndarray) -> np.ndarray:
        """D^α f on a batch of points (P, d)."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.d or min(alpha) < 0:
            raise InvalidInputError(f"multi-index {alpha} does not fit dimension {self.d}")
        if sum(alpha) > self.n:
            raise InvalidInputError(
                f"order {sum(alpha)} exceeds the registered smoothness {self.n} of {self.name}"
            )
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = self._compiled(alpha)(*[x[:, j] for j in range(self.d)])
        return np.broadcast_to(np.asarray(out, dtype=np.float64), (x.shape[0],)).copy()

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.derivative((0,) * self.d, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        eye = np.eye(self.d, dtype=int)
        return np.stack([self.derivative(e, x) for e in eye], axis=1)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.empty((x.shape[0], self.d, self.d))
        eye = np.eye(self.d, dtype=int)
        for i in range(self.d):
            for j in range(i, self.d):
                h = self.derivative(eye[i] + eye[j], x)
                out[:, i, j] = out[:, j, i] = h
        return out


def target_derivative(f: TargetFunction, alpha: Sequence[int], x: Sequence[float]) -> float:
    """Closed-form D^α f at a single point."""
    return float(f.derivative(alpha, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def polynomial_target(coeffs: Mapping[MultiIndex, float], n: int,
                      name: str = "poly", bound: float = 1.0) -> TargetFunction:
    """Σ c_α x^α as a target (used for reproduction and exactness checks)."""
    if not coeffs:
        raise InvalidInputError("a polynomial needs at least one coefficient")
    d = len(next(iter(coeffs)))
    xs = symbols(d)
    expr = sympy.Integer(0)
    for alpha, c in coeffs.items():
        term = sympy.nsimplify(c) if float(c).is_integer() else sympy.Float(c)
        for var, k in zip(xs, alpha):
            term = term * var ** k
        expr = expr + term
    return TargetFunction(name, d, n, expr, bound)


def _sine(d: int, n: int) -> TargetFunction:
    xs = symbols(d)
    two_pi = 2 * sympy.pi
    expr = sympy.Integer(1)
    for var in xs:
        expr = expr * sympy.sin(two_pi * var)
    return TargetFunction(f"sin{d}d", d, n, expr / two_pi ** n, 1.0)


def _cosine_sum(d: int, n: int) -> TargetFunction:
    xs = symbols(d)
    expr = sum(sympy.cos(sympy.pi * var) for var in xs) / (d * sympy.pi ** n)
    return TargetFunction(f"cos{d}d", d, n, expr, 1.0)


def _gauss(d: int, n: int) -> TargetFunction:
    xs = symbols(d)
    r2 = sum((var - sympy.Rational(1, 2)) ** 2 for var in xs)
    # scale keeps all derivatives up to order 4 below one on the enlarged domain
    expr = sympy.exp(-r2) / 8
    return TargetFunction(f"gauss{d}d", d, n, expr, 1.0)


_FACTORIES: Dict[str, Callable[[int, int], TargetFunction]] = {
    "sin": _sine,
    "cos": _cosine_sum,
    "gauss": _gauss,
}


@lru_cache(maxsize=None)
def _registered(name: str, n: int) -> TargetFunction:
    if name in ("x", "x2", "x3"):
        power = 1 if name == "x" else int(name[1])
        return polynomial_target({(power,): 1.0}, n, name)
    if name == "xy":
        return polynomial_target({(1, 1): 1.0}, n, name)
    if name == "zero":
        return TargetFunction("zero", 1, n, sympy.Integer(0), 0.0)
    for prefix, factory in _FACTORIES.items():
        if name.startswith(prefix) and name.endswith("d"):
            try:
                d = int(name[len(prefix):-1])
            except ValueError:
                break
            return factory(d, n)
    raise InvalidInputError(f"unknown target {name!r}; known: {', '.join(available_targets())}")


def get_target(name: str, n: int = 3) -> TargetFunction:
    """Look up a registered target, e.g. ``sin1d`` or ``x2``, with smoothness ``n``."""
    if not 0 <= n <= 5:
        raise InvalidInputError(f"smoothness order must be in [0, 5], got {n}")
    return _registered(name, n)


def available_targets() -> List[str]:
    return ["sin1d", "sin2d", "sin3d", "cos1d", "cos2d", "gauss1d", "gauss2d",
            "x", "x2", "x3", "xy", "zero"]
