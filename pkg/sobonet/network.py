"""
Layered piecewise-polynomial networks with explicit weights.

A :class:`Network` is an immutable stack of affine layers, each followed by a
per-neuron activation (relu, requ or linear). The module provides exact
evaluation, forward-mode input derivatives up to order two, the combinators
used by the constructive builders and a bit-exact JSON format.

Row sums are accumulated term by term in column order. Two copies of the
same sub-network therefore produce bit-identical outputs, which the product
constructions rely on for their exact cancellations.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BudgetExceededError, InvalidInputError, UnsupportedOrderError

logger = logging.getLogger(__name__)

Activation = Literal["relu", "requ", "linear"]
ACTIVATIONS: Tuple[str, ...] = ("linear", "relu", "requ")
_CODE = {name: code for code, name in enumerate(ACTIVATIONS)}
LINEAR, RELU, REQU = 0, 1, 2

# points per block when evaluating jets; keeps Jacobian buffers small
_BLOCK = 2048


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine map ``W h + b`` followed by an activation per output row."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Union[str, Tuple[str, ...]] = "relu"

    def __post_init__(self) -> None:
        w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.shape[0] != b.shape[0]:
            raise InvalidInputError(
                f"weights have {w.shape[0]} rows but bias has length {b.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InvalidInputError("layer entries must be finite")
        act = self.activation
        if isinstance(act, str):
            if act not in _CODE:
                raise InvalidInputError(f"unknown activation {act!r}")
        else:
            act = tuple(act)
            if len(act) != w.shape[0] or any(a not in _CODE for a in act):
                raise InvalidInputError("per-neuron activations must match the row count")
            if len(set(act)) == 1:
                act = act[0]
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "bias", _frozen(b))
        object.__setattr__(self, "activation", act)

    @property
    def rows(self) -> int:
        return int(self.weights.shape[0])

    @property
    def cols(self) -> int:
        return int(self.weights.shape[1])

    @cached_property
    def codes(self) -> np.ndarray:
        if isinstance(self.activation, str):
            return np.full(self.rows, _CODE[self.activation], dtype=np.int8)
        return np.array([_CODE[a] for a in self.activation], dtype=np.int8)

    @property
    def parameter_count(self) -> int:
        return self.rows * self.cols + self.rows


@dataclass
class _LayerPlan:
    bias: np.ndarray
    steps: List[Tuple[np.ndarray, np.ndarray, np.ndarray]]
    codes: np.ndarray
    paired: np.ndarray


def _plan_steps(w: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    rows, cols = np.nonzero(w)
    if rows.size == 0:
        return []
    starts = np.searchsorted(rows, np.arange(w.shape[0]))
    rank = np.arange(rows.size) - starts[rows]
    steps = []
    for k in range(int(rank.max()) + 1):
        sel = rank == k
        r, c = rows[sel], cols[sel]
        steps.append((r, c, w[r, c]))
    return steps


def _linear_pairs(layer: Layer, nxt: Layer) -> np.ndarray:
    """Mark relu neurons that come in cancelling pairs (σ(z), σ(−z)).

    Such a pair feeds ``c σ(z) − c σ(−z) = c z`` forward, so together they
    behave as a linear channel.
    """
    paired = np.zeros(layer.rows, dtype=bool)
    relu = np.flatnonzero(layer.codes == RELU)
    if relu.size < 2:
        return paired
    sig = np.concatenate(
        [layer.weights, layer.bias[:, None], nxt.weights.T], axis=1
    ) + 0.0
    seen: Dict[bytes, List[int]] = {}
    for j in relu:
        seen.setdefault(sig[j].tobytes(), []).append(int(j))
    for j in relu:
        if paired[j] or not np.any(sig[j]):
            continue
        partners = seen.get(((-sig[j]) + 0.0).tobytes(), [])
        for k in partners:
            if not paired[k] and k != j:
                paired[j] = paired[k] = True
                break
    return paired


@dataclass(frozen=True)
class Jet:
    """Values and input derivatives of a network on a batch of points.

    ``values`` has shape (P, out), ``gradients`` (P, out, d) and
    ``hessians`` (P, out, d, d) when requested. ``breakpoints`` flags points
    where some relu kink was hit with a nonzero input gradient.
    """

    values: np.ndarray
    gradients: Optional[np.ndarray]
    hessians: Optional[np.ndarray]
    breakpoints: np.ndarray


@dataclass(frozen=True)
class Derivative:
    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray]
    breakpoint: bool


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable layered network; the last layer is linear."""

    input_dim: int
    layers: Tuple[Layer, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if self.input_dim < 1:
            raise InvalidInputError("input_dim must be positive")
        if not layers:
            raise InvalidInputError("a network needs at least its output layer")
        prev = self.input_dim
        for idx, layer in enumerate(layers):
            if layer.cols != prev:
                raise InvalidInputError(
                    f"layer {idx} expects {layer.cols} inputs but receives {prev}"
                )
            prev = layer.rows
        if layers[-1].activation != "linear":
            raise InvalidInputError("the output layer must be linear")
        object.__setattr__(self, "layers", layers)

    # ------------------------------------------------------------------ shape
    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        return max((layer.rows for layer in self.layers[:-1]), default=0)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].rows

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    @cached_property
    def _plan(self) -> List[_LayerPlan]:
        plans = []
        for idx, layer in enumerate(self.layers):
            if idx + 1 < len(self.layers):
                paired = _linear_pairs(layer, self.layers[idx + 1])
            else:
                paired = np.zeros(layer.rows, dtype=bool)
            plans.append(_LayerPlan(layer.bias, _plan_steps(layer.weights), layer.codes, paired))
        return plans

    @cached_property
    def twice_differentiable(self) -> bool:
        """False only for relu nets: unpaired relu units and no requ unit.

        In mixed nets the unpaired relu units have zero curvature a.e. and
        their kinks raise the breakpoint flag like at order 1.
        """
        if self.uses("requ"):
            return True
        for plan in self._plan[:-1]:
            if np.any((plan.codes == RELU) & ~plan.paired):
                return False
        return True

    def uses(self, activation: str) -> bool:
        code = _CODE[activation]
        return any(np.any(layer.codes == code) for layer in self.layers[:-1])

    # ------------------------------------------------------------- parameters
    def parameters(self) -> np.ndarray:
        """θ: weights (row-major) then bias, layer by layer."""
        parts = []
        for layer in self.layers:
            parts.append(layer.weights.reshape(-1))
            parts.append(layer.bias)
        return np.concatenate(parts)

    def with_parameters(self, theta: np.ndarray) -> "Network":
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != self.parameter_count:
            raise InvalidInputError(
                f"expected {self.parameter_count} parameters, got {theta.size}"
            )
        layers, pos = [], 0
        for layer in self.layers:
            n_w = layer.rows * layer.cols
            w = theta[pos:pos + n_w].reshape(layer.rows, layer.cols)
            pos += n_w
            b = theta[pos:pos + layer.rows]
            pos += layer.rows
            layers.append(Layer(w, b, layer.activation))
        return Network(self.input_dim, tuple(layers), self.provenance)

    # ------------------------------------------------------------- evaluation
    def _check_points(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, self.input_dim) if self.input_dim == 1 else x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"points must have {self.input_dim} coordinates, got shape {np.shape(x)}"
            )
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("points must be finite")
        return x

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a batch of points of shape (P, d); returns (P, out)."""
        x = self._check_points(x)
        h = x
        for plan in self._plan:
            z = np.zeros((h.shape[0], plan.bias.size))
            for rows, cols, vals in plan.steps:
                z[:, rows] += vals * h[:, cols]
            # bias last: identical column blocks cancel exactly before it is added
            z += plan.bias
            h = activate(z, plan.codes)
        return h

    def jet(self, x: np.ndarray, order: int = 1) -> Jet:
        """Values plus forward-mode input derivatives of the given order."""
        if order not in (0, 1, 2):
            raise UnsupportedOrderError(f"order must be 0, 1 or 2, got {order}")
        if order == 2 and not self.twice_differentiable:
            raise UnsupportedOrderError(
                "order 2 is not available on relu networks (relu units outside identity pairs, no requ)"
            )
        x = self._check_points(x)
        if order == 0:
            return Jet(self(x), None, None, np.zeros(x.shape[0], dtype=bool))
        out = [self._jet_block(x[s:s + _BLOCK], order) for s in range(0, x.shape[0], _BLOCK)]
        if not out:
            out = [self._jet_block(x, order)]
        return Jet(
            np.concatenate([o.values for o in out]),
            np.concatenate([o.gradients for o in out]),
            np.concatenate([o.hessians for o in out]) if order == 2 else None,
            np.concatenate([o.breakpoints for o in out]),
        )

    def _jet_block(self, x: np.ndarray, order: int) -> Jet:
        p, d = x.shape
        h = x
        g = np.broadcast_to(np.eye(d), (p, d, d)).copy()
        hs = np.zeros((p, d, d, d)) if order == 2 else None
        flags = np.zeros(p, dtype=bool)
        last = len(self._plan) - 1
        for idx, plan in enumerate(self._plan):
            n = plan.bias.size
            z = np.zeros((p, n))
            gz = np.zeros((p, n, d))
            hz = np.zeros((p, n, d, d)) if order == 2 else None
            for rows, cols, vals in plan.steps:
                z[:, rows] += vals * h[:, cols]
                gz[:, rows] += vals[:, None] * g[:, cols]
                if order == 2:
                    hz[:, rows] += vals[:, None, None] * hs[:, cols]
            z += plan.bias
            if idx == last:
                return Jet(z, gz, hz, flags)
            h = activate(z, plan.codes)
            d1 = activation_slope(z, plan.codes, plan.paired)
            moving = np.any(gz != 0.0, axis=2)
            kink = (z == 0.0) & moving
            relu_kink = kink & ((plan.codes == RELU) & ~plan.paired)
            flags |= relu_kink.any(axis=1)
            if order == 2:
                flags |= (kink & (plan.codes == REQU)).any(axis=1)
                d2 = activation_curvature(z, plan.codes)
                hs = d1[:, :, None, None] * hz + d2[:, :, None, None] * (
                    gz[:, :, :, None] * gz[:, :, None, :]
                )
            g = d1[:, :, None] * gz
        raise AssertionError("unreachable")


def activate(z: np.ndarray, codes: np.ndarray) -> np.ndarray:
    if np.all(codes == LINEAR):
        return z
    out = z.copy()
    relu = codes == RELU
    requ = codes == REQU
    if relu.any():
        out[:, relu] = np.maximum(z[:, relu], 0.0)
    if requ.any():
        r = np.maximum(z[:, requ], 0.0)
        out[:, requ] = r * r
    return out


def activation_slope(z: np.ndarray, codes: np.ndarray, paired: np.ndarray) -> np.ndarray:
    d1 = np.ones_like(z)
    relu = codes == RELU
    requ = codes == REQU
    if relu.any():
        zr = z[:, relu]
        s = (zr > 0.0).astype(np.float64)
        # a cancelling pair at z = 0 still passes slope 1 in total
        s[(zr == 0.0) & paired[relu]] = 0.5
        d1[:, relu] = s
    if requ.any():
        d1[:, requ] = 2.0 * np.maximum(z[:, requ], 0.0)
    return d1


def activation_curvature(z: np.ndarray, codes: np.ndarray) -> np.ndarray:
    d2 = np.zeros_like(z)
    requ = codes == REQU
    if requ.any():
        d2[:, requ] = 2.0 * (z[:, requ] > 0.0)
    return d2


# ---------------------------------------------------------------- operations
def evaluate(net: Network, x: Sequence[float]) -> Union[float, np.ndarray]:
    """Evaluate ``net`` at a single point."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != net.input_dim:
        raise InvalidInputError(f"expected {net.input_dim} coordinates, got {x.size}")
    out = net(x.reshape(1, -1))[0]
    return float(out[0]) if out.size == 1 else out


def differentiate(net: Network, x: Sequence[float], order: int = 1) -> Derivative:
    """Gradient (order 1) or gradient plus Hessian (order 2) of a scalar net."""
    if order not in (1, 2):
        raise UnsupportedOrderError(f"order must be 1 or 2, got {order}")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != net.input_dim:
        raise InvalidInputError(f"expected {net.input_dim} coordinates, got {x.shape[1]}")
    jet = net.jet(x, order)
    return Derivative(
        value=float(jet.values[0, 0]),
        gradient=jet.gradients[0, 0].copy(),
        hessian=None if jet.hessians is None else jet.hessians[0, 0].copy(),
        breakpoint=bool(jet.breakpoints[0]),
    )


@dataclass(frozen=True)
class Budget:
    width_bound: int
    depth_bound: int
    mode: Literal["enforce", "report"] = "report"

    def admit(self, net: Network) -> Network:
        over = net.width > self.width_bound or net.depth > self.depth_bound
        if over and self.mode == "enforce":
            raise BudgetExceededError(
                f"width {net.width} / depth {net.depth} exceed budget "
                f"{self.width_bound} / {self.depth_bound}"
            )
        if over:
            logger.debug("budget exceeded (report mode): %s", budget_report(net))
        return net

    def ratio(self, net: Network) -> float:
        """Smallest c with width <= c*width_bound and depth <= c*depth_bound."""
        return max(net.width / self.width_bound, net.depth / self.depth_bound)


@dataclass(frozen=True)
class BudgetReport:
    width: int
    depth: int
    parameter_count: int


def budget_report(net: Network) -> BudgetReport:
    return BudgetReport(net.width, net.depth, net.parameter_count)


# --------------------------------------------------------------- combinators
def ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b`` summed term by term in index order (sign-symmetric, reproducible)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    vector = b.ndim == 1
    b2 = b.reshape(-1, 1) if vector else b
    acc = np.zeros((a.shape[0], b2.shape[1]))
    for k in range(a.shape[1]):
        col = a[:, k]
        if not col.any():
            continue
        row = b2[k]
        if not row.any():
            continue
        acc += np.outer(col, row)
    return acc.reshape(-1) if vector else acc


def linear_network(weights: np.ndarray, bias: Optional[np.ndarray] = None,
                   provenance: str = "linear") -> Network:
    """Depth-0 network computing ``W x + b``."""
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    b = np.zeros(w.shape[0]) if bias is None else bias
    return Network(w.shape[1], (Layer(w, b, "linear"),), provenance)


def identity_lift(d: int = 1) -> Network:
    """x ↦ σ(x) − σ(−x), coordinate-wise; width 2d, depth 1."""
    eye = np.eye(d)
    return Network(
        d,
        (Layer(np.vstack([eye, -eye]), np.zeros(2 * d), "relu"),
         Layer(np.hstack([eye, -eye]), np.zeros(d), "linear")),
        "identity_lift",
    )


def _merge(outer_first: Layer, inner_last: Layer) -> Layer:
    w = ordered_matmul(outer_first.weights, inner_last.weights)
    b = ordered_matmul(outer_first.weights, inner_last.bias) + outer_first.bias
    return Layer(w, b, outer_first.activation)


def compose(outer: Network, inner: Network, provenance: str = "") -> Network:
    if inner.output_dim != outer.input_dim:
        raise InvalidInputError(
            f"cannot feed {inner.output_dim} outputs into a {outer.input_dim}-input network"
        )
    merged = _merge(outer.layers[0], inner.layers[-1])
    layers = inner.layers[:-1] + (merged,) + outer.layers[1:]
    tag = provenance or f"compose({outer.provenance},{inner.provenance})"
    return Network(inner.input_dim, layers, tag)


def pad_depth(net: Network, depth: int) -> Network:
    """Append relu identity pairs after the output until ``net.depth == depth``."""
    if depth < net.depth:
        raise InvalidInputError(f"cannot pad depth {net.depth} down to {depth}")
    if depth == net.depth:
        return net
    k = net.output_dim
    eye = np.eye(k)
    layers = list(net.layers[:-1])
    out = net.layers[-1]
    layers.append(Layer(np.vstack([out.weights, -out.weights]),
                        np.concatenate([out.bias, -out.bias]), "relu"))
    fold = np.hstack([eye, -eye])
    for _ in range(depth - net.depth - 1):
        layers.append(Layer(np.vstack([fold, -fold]), np.zeros(2 * k), "relu"))
    layers.append(Layer(fold, np.zeros(k), "linear"))
    return Network(net.input_dim, tuple(layers), net.provenance)


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def _acts(layer: Layer) -> Tuple[str, ...]:
    return tuple(ACTIVATIONS[c] for c in layer.codes)


def parallel(parts: Sequence[Network], provenance: str = "") -> Network:
    """Side-by-side parts on a shared input; outputs are concatenated."""
    parts = list(parts)
    if not parts:
        raise InvalidInputError("parallel needs at least one part")
    d = parts[0].input_dim
    if any(p.input_dim != d for p in parts):
        raise InvalidInputError("parallel parts must share the input dimension")
    depth = max(p.depth for p in parts)
    parts = [pad_depth(p, depth) for p in parts]
    layers = []
    for idx in range(depth + 1):
        ls = [p.layers[idx] for p in parts]
        if idx == 0:
            w = np.vstack([l.weights for l in ls])
        else:
            w = _block_diag([l.weights for l in ls])
        b = np.concatenate([l.bias for l in ls])
        acts = sum((_acts(l) for l in ls), ())
        layers.append(Layer(w, b, acts))
    tag = provenance or "parallel(" + ",".join(p.provenance for p in parts) + ")"
    return Network(d, tuple(layers), tag)


def sequential_sum(parts: Sequence[Network], provenance: str = "") -> Network:
    """Σ p_i run one after another, carrying x and the running sum.

    Each hidden layer holds the current part, 2d neurons for x and (once a
    part has finished) 2 neurons for the accumulator, giving width
    max N_i + 2d + 2 and depth Σ L_i.
    """
    parts = list(parts)
    if not parts:
        raise InvalidInputError("sum needs at least one part")
    d = parts[0].input_dim
    if any(p.input_dim != d or p.output_dim != 1 for p in parts):
        raise InvalidInputError("sum parts must be scalar with a shared input dimension")

    # forms are (row-vector over previous units, constant)
    x_form = (np.eye(d), np.zeros(d))
    acc_form: Optional[Tuple[np.ndarray, float]] = None
    prev_dim = d
    layers: List[Layer] = []

    def part_output(part: Network, block: Optional[slice]) -> Tuple[np.ndarray, float]:
        last = part.layers[-1]
        row = np.zeros(prev_dim)
        if block is None:
            row += ordered_matmul(last.weights, x_form[0])[0]
            const = float(last.bias[0] + ordered_matmul(last.weights, x_form[1])[0])
        else:
            row[block] = last.weights[0]
            const = float(last.bias[0])
        return row, const

    def add(form_a, form_b):
        if form_a is None:
            return form_b
        return form_a[0] + form_b[0], form_a[1] + form_b[1]

    for part in parts:
        block: Optional[slice] = None
        for li, layer in enumerate(part.layers[:-1]):
            if li == 0:
                part_w = ordered_matmul(layer.weights, x_form[0])
                part_b = layer.bias + ordered_matmul(layer.weights, x_form[1])
            else:
                part_w = np.zeros((layer.rows, prev_dim))
                part_w[:, block] = layer.weights
                part_b = layer.bias
            rows = [np.vstack([x_form[0], -x_form[0]])]
            bias = [np.concatenate([x_form[1], -x_form[1]])]
            acts: Tuple[str, ...] = ("relu",) * (2 * d)
            if acc_form is not None:
                rows.append(np.vstack([acc_form[0], -acc_form[0]]))
                bias.append(np.array([acc_form[1], -acc_form[1]]))
                acts += ("relu", "relu")
            rows.append(part_w)
            bias.append(part_b)
            acts += _acts(layer)
            layers.append(Layer(np.vstack(rows), np.concatenate(bias), acts))
            width = layers[-1].rows
            x_form = (np.hstack([np.eye(d), -np.eye(d), np.zeros((d, width - 2 * d))]),
                      np.zeros(d))
            if acc_form is not None:
                a_row = np.zeros(width)
                a_row[2 * d] = 1.0
                a_row[2 * d + 1] = -1.0
                acc_form = (a_row, 0.0)
                start = 2 * d + 2
            else:
                start = 2 * d
            block = slice(start, width)
            prev_dim = width
        acc_form = add(acc_form, part_output(part, block))
    out = Layer(acc_form[0].reshape(1, -1), np.array([acc_form[1]]), "linear")
    layers.append(out)
    tag = provenance or "sum(" + ",".join(p.provenance for p in parts) + ")"
    return Network(d, tuple(layers), tag)


def identity_extend(net: Network, extra: int, provenance: str = "") -> Network:
    """Map (x, y) ↦ (net(x), y) with the extra inputs y carried by relu pairs."""
    if extra < 1:
        raise InvalidInputError("identity_extend needs at least one extra input")
    d = net.input_dim
    select_x = linear_network(np.hstack([np.eye(d), np.zeros((d, extra))]))
    select_y = linear_network(np.hstack([np.zeros((extra, d)), np.eye(extra)]))
    carried = pad_depth(select_y, max(net.depth, 1))
    return parallel([compose(net, select_x), carried],
                    provenance or f"identity_extend({net.provenance},{extra})")


def combine(mode: str, parts: Sequence[Network], **options) -> Network:
    """Dispatch to the combinators.

    ``compose`` applies ``parts[-1]`` first, i.e. it returns
    ``parts[0] ∘ parts[1] ∘ … ∘ parts[-1]``. ``identity_extend`` takes one
    part and ``extra=<count>``.
    """
    parts = list(parts)
    provenance = options.get("provenance", "")
    if mode == "compose":
        if not parts:
            raise InvalidInputError("compose needs at least one part")
        net = parts[-1]
        for outer in reversed(parts[:-1]):
            net = compose(outer, net)
        result = net if not provenance else Network(net.input_dim, net.layers, provenance)
    elif mode == "sum":
        result = sequential_sum(parts, provenance)
    elif mode == "parallel":
        result = parallel(parts, provenance)
    elif mode == "identity_extend":
        if len(parts) != 1:
            raise InvalidInputError("identity_extend takes exactly one part")
        result = identity_extend(parts[0], int(options.get("extra", 1)), provenance)
    else:
        raise InvalidInputError(f"unknown combine mode {mode!r}")
    if result.uses("requ") and result.uses("relu") and "relu-identity" not in result.provenance:
        result = Network(result.input_dim, result.layers, result.provenance + "+relu-identity")
    logger.debug("combine %s -> width %d depth %d", mode, result.width, result.depth)
    return result


def scale_output(net: Network, c: float, shift: float = 0.0) -> Network:
    """Network computing ``c * net(x) + shift``."""
    last = net.layers[-1]
    layer = Layer(last.weights * c, last.bias * c + shift, "linear")
    return Network(net.input_dim, net.layers[:-1] + (layer,), net.provenance)


def shift_input(net: Network, weights: np.ndarray, bias: np.ndarray) -> Network:
    """Network computing ``net(W x + b)``."""
    return compose(net, linear_network(weights, bias))


# ----------------------------------------------------------------------- IO
def network_to_dict(net: Network) -> dict:
    layers = []
    for layer in net.layers:
        act = layer.activation if isinstance(layer.activation, str) else list(layer.activation)
        layers.append({
            "activation": act,
            "rows": layer.rows,
            "cols": layer.cols,
            "weights": [float(v) for v in layer.weights.reshape(-1)],
            "bias": [float(v) for v in layer.bias],
        })
    return {"input_dim": net.input_dim, "layers": layers, "provenance": net.provenance}


def network_from_dict(doc: dict) -> Network:
    try:
        layers = []
        for item in doc["layers"]:
            w = np.array(item["weights"], dtype=np.float64).reshape(item["rows"], item["cols"])
            act = item["activation"]
            layers.append(Layer(w, np.array(item["bias"], dtype=np.float64),
                                act if isinstance(act, str) else tuple(act)))
        return Network(int(doc["input_dim"]), tuple(layers), doc.get("provenance", ""))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed network document: {e}") from e


def save_network(net: Network, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(network_to_dict(net), indent=1) + "\n", encoding="utf-8")
    return path


def load_network(path: Union[str, Path]) -> Network:
    return network_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
