"""
Explicit-weight relu constructions.

Everything here returns a :class:`~sobonet.network.Network` whose weights are
written down directly: teeth functions, the square and product networks,
multi-factor products and monomials, step and point-fitting networks, and
the periodic hat functions that form the partition of unity g_m.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConstructionFailedError, InvalidInputError
from .metrics import GridSpec, sup_error
from .network import (
    Budget,
    Layer,
    Network,
    compose,
    linear_network,
    pad_depth,
    parallel,
    shift_input,
)
from .targets import polynomial_target

logger = logging.getLogger(__name__)

MAX_TEETH = 40
PartitionIndex = Tuple[int, ...]


# ------------------------------------------------------------------- budgets
def stated_budget(kind: str, N: int = 1, L: int = 1, s: int = 2, d: int = 1) -> Budget:
    """Width/depth targets stated for each construction (report mode)."""
    log8n = math.log2(8 * N)
    table = {
        "square": (5 * N, 2 * L),
        "product2": (15 * N, 2 * L),
        "multiprod": (9 * (N + 1) + s - 1, 14 * s * (s - 1) * L),
        "monomial": (9 * (N + 1) + s - 1, 14 * s * s * L),
        "step": (4 * N + 5, 4 * L + 4),
        "pointfit": (math.ceil(16 * s * (N + 1) * log8n), math.ceil(5 * (L + 2) * math.log2(4 * L))),
    }
    if kind not in table:
        raise InvalidInputError(f"no budget registered for {kind!r}")
    w, dep = table[kind]
    return Budget(max(1, int(w)), max(1, int(dep)), "report")


def _report(kind: str, net: Network, **params) -> Network:
    budget = stated_budget(kind, **params)
    logger.debug("%s: width %d depth %d, budget constant c=%.3f",
                 net.provenance, net.width, net.depth, budget.ratio(net))
    return budget.admit(net)


# --------------------------------------------------------------------- teeth
_HAT_W = np.array([[1.0], [-1.0], [1.0], [-1.0]])
_HAT_B = np.array([0.0, 0.0, -0.5, -0.5])
_HAT_OUT = np.array([2.0, 2.0, -4.0, -4.0])


def build_teeth(i: int) -> Network:
    """T_i = T_1 ∘ … ∘ T_1 on [−1, 1]; T_1(x) = 2|x| for |x| ≤ ½, 2 − 2|x| beyond."""
    if i < 1:
        raise InvalidInputError(f"teeth index must be >= 1, got {i}")
    layers = [Layer(_HAT_W, _HAT_B, "relu")]
    y = _HAT_OUT
    for _ in range(i - 1):
        layers.append(Layer(np.vstack([y, y]), np.array([0.0, -0.5]), "relu"))
        y = np.array([2.0, -4.0])
    layers.append(Layer(y.reshape(1, -1), np.zeros(1), "linear"))
    return Network(1, tuple(layers), f"teeth(i={i})")


def _square_program(teeth: int) -> Tuple[List[Tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Per-copy layers of ψ̃(v) = |v| − Σ T_k(v)/4^k after the first (hat) layer.

    Returns the hidden layers 2..teeth as (weights, bias) on the copy's own
    previous units, plus the output row of the copy's last hidden layer.
    """
    y = _HAT_OUT
    acc = np.array([0.5, 0.5, 1.0, 1.0])
    steps = []
    for k in range(2, teeth + 1):
        steps.append((np.vstack([y, y, acc]), np.array([0.0, -0.5, 0.0])))
        y = np.array([2.0, -4.0, 0.0])
        acc = np.array([-2.0, 4.0, 4.0 ** k]) / 4.0 ** k
    return steps, acc


def _lockstep_squares(input_rows: np.ndarray, input_consts: np.ndarray,
                      out_coefs: np.ndarray, teeth: int, a: float, provenance: str) -> Network:
    """Σ_c out_c · a²ψ̃((row_c·x + const_c)/a) with the copies' neurons interleaved.

    Unit u of copy c sits at index u*C + c, so copies that see identical
    inputs produce bit-identical neurons and their signed output terms sit
    next to each other in every row sum.
    """
    rows = np.atleast_2d(np.asarray(input_rows, dtype=np.float64))
    consts = np.asarray(input_consts, dtype=np.float64)
    coefs = np.asarray(out_coefs, dtype=np.float64)
    copies, d = rows.shape
    w1 = np.zeros((4 * copies, d))
    b1 = np.zeros(4 * copies)
    for u in range(4):
        for c in range(copies):
            w1[u * copies + c] = _HAT_W[u, 0] * rows[c] / a
            b1[u * copies + c] = _HAT_B[u] + _HAT_W[u, 0] * consts[c] / a
    layers = [Layer(w1, b1, "relu")]
    steps, acc = _square_program(teeth)
    for w, b in steps:
        units_out, units_in = w.shape
        big = np.zeros((units_out * copies, units_in * copies))
        bias = np.zeros(units_out * copies)
        for c in range(copies):
            big[c::copies, c::copies] = w
            bias[c::copies] = b
        layers.append(Layer(big, bias, "relu"))
    out = np.zeros(acc.size * copies)
    for c in range(copies):
        out[c::copies] = coefs[c] * a * a * acc
    layers.append(Layer(out.reshape(1, -1), np.zeros(1), "linear"))
    return Network(d, tuple(layers), provenance)


def square_error_bound(teeth: int, a: float) -> float:
    """W^{1,∞}((−a, a)) distance from a²ψ̃(x/a) to x²."""
    return max(a * 2.0 ** -teeth, a * a * 4.0 ** -(teeth + 1))


def _initial_teeth(N: int, L: int) -> int:
    return min(MAX_TEETH, math.ceil(L * math.log2(N)) + 2)


def teeth_for(tolerance: float, a: float, factor: float = 1.0) -> int:
    """Smallest teeth count with factor·square_error_bound ≤ tolerance, at most MAX_TEETH."""
    for teeth in range(1, MAX_TEETH + 1):
        if factor * square_error_bound(teeth, a) <= tolerance:
            return teeth
    raise ConstructionFailedError(
        f"W1inf error {tolerance:.3g} needs more than {MAX_TEETH} teeth",
        {"tolerance": tolerance, "a": a, "factor": factor,
         "bound_at_cap": factor * square_error_bound(MAX_TEETH, a)},
    )


def _check_budgets(N: int, L: int, a: float) -> None:
    if N < 1 or L < 1:
        raise InvalidInputError(f"N and L must be >= 1, got N={N}, L={L}")
    if not a > 0:
        raise InvalidInputError(f"scale a must be positive, got {a}")


def _validated(make, target, tolerance: float, grid: GridSpec, N: int, L: int, kind: str) -> Network:
    history = []
    for teeth in range(_initial_teeth(N, L), MAX_TEETH + 1):
        net = make(teeth)
        err = sup_error(target, net, 1, grid).sobolev(1)
        history.append((teeth, err))
        if err <= tolerance:
            logger.debug("%s: %d teeth give W1inf error %.3g <= %.3g", kind, teeth, err, tolerance)
            return net
    raise ConstructionFailedError(
        f"{kind} did not reach W1inf error {tolerance:.3g} within {MAX_TEETH} teeth",
        {"tolerance": tolerance, "history": history, "N": N, "L": L},
    )


def build_square(N: int, L: int, a: float = 1.0, validate: bool = True,
                 teeth: Optional[int] = None) -> Network:
    """ψ(x) = a²ψ̃(x/a) ≈ x² on (−a, a) with W^{1,∞} error ≤ a²N^{−L}."""
    _check_budgets(N, L, a)

    def make(s: int) -> Network:
        return _lockstep_squares(np.ones((1, 1)), np.zeros(1), np.ones(1), s, a,
                                 f"square(N={N},L={L},a={a:g},teeth={s})")

    if teeth is not None:
        net = make(teeth)
    elif not validate:
        net = make(teeth_for(a * a * N ** -L, a))
    else:
        grid = GridSpec(1, box=((-a, a),))
        net = _validated(make, polynomial_target({(2,): 1.0}, 2), a * a * float(N) ** -L,
                         grid, N, L, "square")
    return _report("square", net, N=N, L=L)


_PRODUCT_ROWS = np.array([[0.5, 0.5], [0.5, 0.0], [0.0, 0.5]])
_PRODUCT_COEFS = np.array([2.0, -2.0, -2.0])


def _product_net(teeth: int, a: float, provenance: str) -> Network:
    return _lockstep_squares(_PRODUCT_ROWS, np.zeros(3), _PRODUCT_COEFS, teeth, a, provenance)


def build_product2(N: int, L: int, a: float = 1.0, validate: bool = True,
                   teeth: Optional[int] = None) -> Network:
    """φ(x, y) = 2[ψ((x+y)/2) − ψ(x/2) − ψ(y/2)] ≈ xy on (−a, a)².

    ψ is even, so the absolute values of the textbook formula are implicit.
    φ(0, y) and φ(x, 0) vanish exactly together with their partials.
    """
    _check_budgets(N, L, a)

    def make(s: int) -> Network:
        return _product_net(s, a, f"product2(N={N},L={L},a={a:g},teeth={s})")

    tolerance = 6.0 * a * a * float(N) ** -L
    if teeth is not None:
        net = make(teeth)
    elif not validate:
        net = make(teeth_for(tolerance, a, factor=2.0))
    else:
        grid = GridSpec(2, points_per_axis=256, box=((-a, a), (-a, a)))
        net = _validated(make, polynomial_target({(1, 1): 1.0}, 2), tolerance, grid, N, L, "product2")
    return _report("product2", net, N=N, L=L)


def _select(d: int, coords: Sequence[int]) -> Network:
    w = np.zeros((len(coords), d))
    for r, j in enumerate(coords):
        w[r, j] = 1.0
    return linear_network(w, provenance="select")


def multiprod_tolerance(s: int, N: int, L: int) -> float:
    return 10.0 * (s - 1) * float(N + 1) ** (-7 * s * L)


def _multiprod(s: int, teeth: int, d: Optional[int] = None,
               coords: Optional[Sequence[int]] = None) -> Network:
    """x_{c_1}·…·x_{c_s} from a d-dimensional input, one product stage per factor."""
    d = s if d is None else d
    coords = list(range(s)) if coords is None else list(coords)
    stage = _product_net(teeth, 1.0, f"product2(teeth={teeth})")
    net = compose(stage, _select(d, coords[:2]))
    for n in range(2, len(coords)):
        carried = pad_depth(_select(d, [coords[n]]), max(net.depth, 1))
        net = compose(stage, parallel([net, carried]))
    return net


def build_multiprod(s: int, N: int, L: int, teeth: Optional[int] = None) -> Network:
    """φ_s(x) ≈ x_1⋯x_s on [0, 1]^s via φ_n = φ_2(φ_{n−1}(x_1..x_{n−1}), σ(x_n)).

    A zero coordinate forces the output and every partial derivative to be
    exactly zero.
    """
    if s < 2:
        raise InvalidInputError(f"multiprod needs s >= 2 factors, got {s}")
    _check_budgets(N, L, 1.0)
    tolerance = multiprod_tolerance(s, N, L)
    if teeth is None:
        # each stage contributes at most 2·2^{-teeth} to the gradient error
        teeth = teeth_for(tolerance, 1.0, factor=4.0 * (s - 1))
    net = _multiprod(s, teeth)
    net = Network(net.input_dim, net.layers, f"multiprod(s={s},N={N},L={L},teeth={teeth})")
    return _report("multiprod", net, N=N, L=L, s=s)


def build_monomial(alpha: Sequence[int], N: int, L: int, s: Optional[int] = None) -> Network:
    """x^α on (0, 1)^d with W^{1,∞} error ≤ 10s(N+1)^{−7sL}."""
    alpha = tuple(int(a) for a in alpha)
    if not alpha or min(alpha) < 0:
        raise InvalidInputError(f"invalid multi-index {alpha}")
    d = len(alpha)
    k = sum(alpha)
    s = max(k, 1) if s is None else s
    if s < k:
        raise InvalidInputError(f"|alpha| = {k} exceeds s = {s}")
    tag = f"monomial(alpha={list(alpha)},N={N},L={L},s={s})"
    if k == 0:
        return Network(d, (Layer(np.zeros((1, d)), np.ones(1), "linear"),), tag)
    coords = [j for j, power in enumerate(alpha) for _ in range(power)]
    if k == 1:
        net = _select(d, coords)
        return Network(d, net.layers, tag)
    tolerance = 10.0 * s * float(N + 1) ** (-7 * s * L)
    teeth = teeth_for(tolerance, 1.0, factor=4.0 * (k - 1))
    net = _multiprod(k, teeth, d, coords)
    return _report("monomial", Network(d, net.layers, tag), N=N, L=L, s=s)


# --------------------------------------------------------------------- steps
def _staircase(thresholds: Sequence[float], delta: float, d: int = 1) -> Network:
    """Σ_k σ(1 − σ((t_k − x)/δ)): counts thresholds t_k ≤ x, ramps over [t_k − δ, t_k]."""
    t = np.asarray(thresholds, dtype=np.float64)
    if t.size == 0:
        return Network(d, (Layer(np.zeros((1, d)), np.zeros(1), "linear"),), "staircase(0)")
    w1 = np.zeros((t.size, d))
    w1[:, 0] = -1.0 / delta
    layers = (
        Layer(w1, t / delta, "relu"),
        Layer(-np.eye(t.size), np.ones(t.size), "relu"),
        Layer(np.ones((1, t.size)), np.zeros(1), "linear"),
    )
    return Network(d, layers, f"staircase({t.size})")


def _ramp_staircase(K: int, delta: float) -> Network:
    """Σ_{k<K} [σ((x − k/K)/δ + 1) − σ((x − k/K)/δ)] − σ(1) in one hidden layer of width 2K+1."""
    t = np.arange(K, dtype=np.float64) / K
    w1 = np.zeros((2 * K + 1, 1))
    w1[: 2 * K, 0] = 1.0 / delta
    b1 = np.empty(2 * K + 1)
    b1[0 : 2 * K : 2] = 1.0 - t / delta
    b1[1 : 2 * K : 2] = -t / delta
    b1[-1] = 1.0
    w2 = np.empty((1, 2 * K + 1))
    w2[0, 0 : 2 * K : 2] = 1.0
    w2[0, 1 : 2 * K : 2] = -1.0
    w2[0, -1] = -1.0
    layers = (Layer(w1, b1, "relu"), Layer(w2, np.zeros(1), "linear"))
    return Network(1, layers, f"ramp-staircase({K})")


def _stage_blocks(K: int, radix: int) -> List[int]:
    blocks = [K]
    while blocks[-1] > 1:
        blocks.append(-(-blocks[-1] // radix))
    return blocks


def build_step(K: int, delta: float, mode: str = "wide", N: int = 1, L: int = 1) -> Network:
    """φ(x) = k on [k/K, (k+1)/K − δ·1_{k<K−1}], k = 0..K−1.

    ``wide`` resolves all K plateaus in one hidden layer of width 2K+1. ``budget`` resolves
    the index digit by digit with radix 4N+2 so each stage fits width 4N+5.
    """
    if K < 1:
        raise InvalidInputError(f"K must be >= 1, got {K}")
    if not 0.0 < delta <= 1.0 / (3 * K):
        raise InvalidInputError(f"delta must lie in (0, 1/(3K)] = (0, {1.0 / (3 * K):.6g}], got {delta}")
    if mode == "wide":
        net = _ramp_staircase(K, delta)
        return Network(1, net.layers, f"step(K={K},delta={delta:g},mode=wide)")
    if mode != "budget":
        raise InvalidInputError(f"unknown step mode {mode!r}")

    blocks = _stage_blocks(K, 4 * N + 2)
    # state outputs (local position, accumulated index)
    state = linear_network(np.array([[1.0], [0.0]]), provenance="step-state")
    for b_in, b_out in zip(blocks, blocks[1:]):
        digits = -(-b_in // b_out)
        stair = _staircase([k * b_out / K for k in range(1, digits)], delta, 2)
        local = pad_depth(_select(2, [0]), stair.depth)
        acc = pad_depth(_select(2, [1]), stair.depth)
        inner = parallel([local, stair, acc])
        update = linear_network(np.array([[1.0, -b_out / K, 0.0], [0.0, float(b_out), 1.0]]))
        state = compose(compose(update, inner), state)
    net = compose(_select(2, [1]), state)
    net = Network(1, net.layers, f"step(K={K},delta={delta:g},mode=budget,N={N},L={L})")
    return _report("step", net, N=N, L=L)


# ------------------------------------------------------------------ pointfit
def build_pointfit(values: Sequence[float], N: int = 1, L: int = 1, s: int = 1) -> Network:
    """Piecewise-linear φ with φ(i) = ξ_i at the integers, clipped into [0, 1]."""
    xi = np.asarray(values, dtype=np.float64).reshape(-1)
    if xi.size == 0:
        raise InvalidInputError("pointfit needs at least one value")
    if np.any(xi < 0.0) or np.any(xi > 1.0) or not np.all(np.isfinite(xi)):
        raise InvalidInputError("pointfit values must lie in [0, 1]")
    P = xi.size
    if P > N * N * L * L:
        logger.debug("pointfit: %d points exceed N²L² = %d (budget reported only)", P, N * N * L * L)
    slopes = np.diff(xi)
    coef = np.zeros(P)
    if P > 1:
        coef[: P - 1] = slopes - np.concatenate([[0.0], slopes[:-1]])
        coef[P - 1] = -slopes[-1]
    knots = np.arange(P, dtype=np.float64)
    layers = (
        Layer(np.ones((P, 1)), -knots, "relu"),
        Layer(coef.reshape(1, -1), np.array([xi[0]]), "relu"),
        Layer(-np.ones((1, 1)), np.ones(1), "relu"),
        Layer(-np.ones((1, 1)), np.ones(1), "linear"),
    )
    net = Network(1, layers, f"pointfit(P={P},N={N},L={L},s={s})")
    return _report("pointfit", net, N=N, L=L, s=s)


# ---------------------------------------------------------------- subdomains
def _cell_interval(m_j: int, i_j: int, K: int) -> Tuple[float, float]:
    shifted = 1 if m_j == 2 else 0
    lo = (2 * i_j - shifted) / (2 * K)
    hi = (3 + 4 * i_j - 2 * shifted) / (4 * K)
    return max(lo, 0.0), min(hi, 1.0)


@dataclass(frozen=True)
class SubdomainIndex:
    m: Tuple[int, ...]
    i: Tuple[int, ...]
    K: int

    def __post_init__(self) -> None:
        if len(self.m) != len(self.i):
            raise InvalidInputError("m and i must have the same length")
        if any(v not in (1, 2) for v in self.m):
            raise InvalidInputError(f"partition index entries must be 1 or 2, got {self.m}")
        if any(not 0 <= v <= self.K for v in self.i):
            raise InvalidInputError(f"cell index must lie in 0..{self.K}, got {self.i}")

    def bounds(self) -> List[Tuple[float, float]]:
        """Per-axis [lo, hi] of Ω_{m,i} ∩ [0, 1]^d."""
        return [_cell_interval(mj, ij, self.K) for mj, ij in zip(self.m, self.i)]

    def center(self) -> Tuple[float, ...]:
        """Unclipped center of the cell (used for the averaging ball)."""
        return tuple(
            (8 * ij + 3) / (8 * self.K) - (0.5 / self.K if mj == 2 else 0.0)
            for mj, ij in zip(self.m, self.i)
        )

    def contains(self, x: Sequence[float]) -> bool:
        return all(lo <= xj <= hi for (lo, hi), xj in zip(self.bounds(), x))


def cell_indices(m: Sequence[int], K: int, x: np.ndarray) -> np.ndarray:
    """Per-axis index of the smallest cell Ω_{m,i} holding each point; −1 if none."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.empty(x.shape, dtype=np.int64)
    for j, m_j in enumerate(m):
        kx = K * x[:, j]
        if m_j == 1:
            i = np.ceil(kx - 0.75)
            ok = i <= kx
        else:
            i = np.ceil(kx - 0.25)
            ok = i <= kx + 0.5
        i = np.maximum(i, 0)
        ok &= (i <= K) & (x[:, j] >= 0.0) & (x[:, j] <= 1.0)
        out[:, j] = np.where(ok, i, -1).astype(np.int64)
    return out


def omega_contains(m: Sequence[int], K: int, x: np.ndarray) -> np.ndarray:
    return np.all(cell_indices(m, K, x) >= 0, axis=1)


def partition_indices(d: int) -> List[PartitionIndex]:
    """{1, 2}^d in lexicographic order."""
    return [tuple(m) for m in itertools.product((1, 2), repeat=d)]


# ----------------------------------------------------------- partition nets
def hat_values(x: np.ndarray, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """g_1 and its a.e. derivative (right derivative at kinks)."""
    x = np.asarray(x, dtype=np.float64)
    w = K * x - np.floor(K * x)
    val = np.select(
        [w < 0.25, w < 0.5, w < 0.75],
        [4.0 * w, np.ones_like(w), 1.0 - 4.0 * (w - 0.5)],
        np.zeros_like(w),
    )
    der = np.select([w < 0.25, w < 0.5, w < 0.75], [4.0 * K, 0.0, -4.0 * K], 0.0)
    return val, der


def _fold(period: float, count: int) -> Network:
    """Triangle wave of the given period on [0, count·period] with slope ±1."""
    knots = np.arange(2 * count) * (period / 2.0)
    coefs = np.array([1.0] + [(-1.0) ** j * 2.0 for j in range(1, 2 * count)])
    layers = (Layer(np.ones((2 * count, 1)), -knots, "relu"),
              Layer(coefs.reshape(1, -1), np.zeros(1), "linear"))
    return Network(1, layers, f"fold(p={period:g},c={count})")


def _bumps(K: int, a: int) -> Network:
    """ψ_1: a trapezoids 4K[σ(y−1/8K) − σ(y−3/8K) − σ(y−5/8K) + σ(y−7/8K)]."""
    offsets = np.array([1, 3, 5, 7]) / (8.0 * K)
    knots = np.concatenate([i / K + offsets for i in range(a)])
    coefs = np.tile(4.0 * K * np.array([1.0, -1.0, -1.0, 1.0]), a)
    layers = (Layer(np.ones((4 * a, 1)), -knots, "relu"),
              Layer(coefs.reshape(1, -1), np.zeros(1), "linear"))
    return Network(1, layers, f"bumps(K={K},a={a})")


def int_root(value: int, d: int) -> int:
    """⌊value^{1/d}⌋ computed without floating-point undershoot."""
    r = int(round(value ** (1.0 / d)))
    while r ** d > value:
        r -= 1
    while (r + 1) ** d <= value:
        r += 1
    return max(r, 1)


def fold_chain(K: int, a: int) -> Tuple[Network, Network, Network]:
    """ψ_2, ψ_3, ψ_4: folds mapping [0, 1 + 5/(8K)] onto [0, a/K].

    Every period is a multiple of 2/K, so any even 1/K-periodic profile is
    unchanged by the chain.
    """
    span = 1.0 + 5.0 / (8 * K)
    p2 = 2.0 * a / K
    r2 = a * p2
    outer = max(1, math.ceil(math.sqrt(span / (4.0 * r2))))
    p3 = 2.0 * r2
    p4 = 2.0 * outer * p3
    return _fold(p2, a), _fold(p3, outer), _fold(p4, outer)


@dataclass(frozen=True)
class HatProduct:
    """Closed-form g_m(x) = Π_j g_{m_j}(x_j) as a metrics reference."""

    m: PartitionIndex
    K: int

    @property
    def d(self) -> int:
        return len(self.m)

    def _factors(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        shift = np.array([0.0 if mj == 1 else 0.5 / self.K for mj in self.m])
        return hat_values(x + shift, self.K)

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.prod(self._factors(x)[0], axis=1)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        vals, ders = self._factors(x)
        grads = np.empty_like(vals)
        for j in range(self.d):
            others = np.delete(vals, j, axis=1)
            grads[:, j] = ders[:, j] * np.prod(others, axis=1)
        return grads


@dataclass(eq=False)
class PartitionKit:
    K: int
    d: int
    a: int
    psi1: Network
    psi2: Network
    psi3: Network
    psi4: Network
    psi: Network
    g_nets: Dict[int, Network]
    phi: Dict[PartitionIndex, Network] = field(default_factory=dict)

    def g1(self, x: np.ndarray) -> np.ndarray:
        return hat_values(x, self.K)[0]

    def g2(self, x: np.ndarray) -> np.ndarray:
        return hat_values(np.asarray(x) + 0.5 / self.K, self.K)[0]

    def g1_prime(self, x: np.ndarray) -> np.ndarray:
        return hat_values(x, self.K)[1]

    def g2_prime(self, x: np.ndarray) -> np.ndarray:
        return hat_values(np.asarray(x) + 0.5 / self.K, self.K)[1]

    def g_m(self, m: Sequence[int]) -> HatProduct:
        return HatProduct(tuple(m), self.K)


def build_partition_nets(N: int, L: int, n: int, d: int) -> PartitionKit:
    """Networks φ_m ≈ g_m = Π_j g_{m_j}(x_j) for every m ∈ {1, 2}^d."""
    if min(N, L, n, d) < 1:
        raise InvalidInputError(f"N, L, n, d must be >= 1, got {(N, L, n, d)}")
    a = int_root(N, d)
    b = int_root(L * L, d)
    K = a * a * b
    psi1 = _bumps(K, a)
    psi2, psi3, psi4 = fold_chain(K, a)
    psi = compose(psi1, compose(psi2, compose(psi3, psi4)), f"psi(K={K})")
    g_nets = {
        1: shift_input(psi, np.ones((1, 1)), np.array([1.0 / (8 * K)])),
        2: shift_input(psi, np.ones((1, 1)), np.array([5.0 / (8 * K)])),
    }
    logger.debug("partition nets: K=%d a=%d b=%d, psi width %d depth %d",
                 K, a, b, psi.width, psi.depth)

    phi: Dict[PartitionIndex, Network] = {}
    if d > 1:
        tolerance = 10.0 * (d - 1) * float(N + 1) ** (-7 * d * n * L)
        teeth = teeth_for(tolerance, 1.0, factor=4.0 * (d - 1))
        product = _multiprod(d, teeth)
    for m in partition_indices(d):
        if d == 1:
            net = g_nets[m[0]]
        else:
            factors = [compose(g_nets[mj], _select(d, [j])) for j, mj in enumerate(m)]
            net = compose(product, parallel(factors))
        phi[m] = Network(d, net.layers, f"phi_m(m={list(m)},K={K})")
        logger.debug("%s: width %d depth %d", phi[m].provenance, phi[m].width, phi[m].depth)
    return PartitionKit(K, d, a, psi1, psi2, psi3, psi4, psi, g_nets, phi)
