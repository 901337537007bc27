"""
σ₂ (requ) networks that realize polynomials exactly, and the C¹ partition
of unity s_m together with its network λ_m.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .network import Layer, Network, compose, linear_network, parallel, shift_input
from .relu_build import PartitionIndex, fold_chain, int_root, partition_indices
from .targets import MultiIndex

logger = logging.getLogger(__name__)

Form = Tuple[np.ndarray, float]
CLAMP_WIDTH = 3


class _FormStack:
    """Builds a network layer by layer from affine forms over the previous units.

    ``mul`` uses the polarisation identity with four requ units, ``sq`` two
    requ units and ``carry`` a relu identity pair.
    """

    def __init__(self, d: int):
        self.d = d
        self.units = d
        self.layers: List[Layer] = []

    def input(self, j: int) -> Form:
        row = np.zeros(self.units)
        row[j] = 1.0
        return row, 0.0

    def layer(self, ops: Sequence[Tuple]) -> List[Form]:
        rows: List[np.ndarray] = []
        bias: List[float] = []
        acts: List[str] = []
        spans: List[Tuple[int, np.ndarray]] = []
        for op in ops:
            kind, forms = op[0], op[1:]
            start = len(rows)
            if kind == "mul":
                (fr, fc), (gr, gc) = forms
                rows += [fr + gr, -fr - gr, fr - gr, gr - fr]
                bias += [fc + gc, -fc - gc, fc - gc, gc - fc]
                acts += ["requ"] * 4
                spans.append((start, np.array([0.25, 0.25, -0.25, -0.25])))
            elif kind == "sq":
                fr, fc = forms[0]
                rows += [fr, -fr]
                bias += [fc, -fc]
                acts += ["requ"] * 2
                spans.append((start, np.array([1.0, 1.0])))
            elif kind == "carry":
                fr, fc = forms[0]
                rows += [fr, -fr]
                bias += [fc, -fc]
                acts += ["relu"] * 2
                spans.append((start, np.array([1.0, -1.0])))
            else:
                raise InvalidInputError(f"unknown op {kind!r}")
        self.layers.append(Layer(np.vstack(rows), np.array(bias), tuple(acts)))
        self.units = len(rows)
        out = []
        for start, coefs in spans:
            row = np.zeros(self.units)
            row[start:start + coefs.size] = coefs
            out.append((row, 0.0))
        return out

    def finish(self, forms: Sequence[Form], provenance: str) -> Network:
        w = np.vstack([f[0] for f in forms])
        b = np.array([f[1] for f in forms])
        self.layers.append(Layer(w, b, "linear"))
        return Network(self.d, tuple(self.layers), provenance)


# ------------------------------------------------------------ exact networks
def monomial_feasible(k: int, N: int, L: int) -> bool:
    return N * L + 2 ** int(math.floor(math.log2(N))) >= k


def _requ_monomial(alpha: MultiIndex, N: int, L: int, tag: str) -> Network:
    d = len(alpha)
    coords = [j for j, power in enumerate(alpha) for _ in range(power)]
    k = len(coords)
    if k == 0:
        return Network(d, (Layer(np.zeros((1, d)), np.ones(1), "linear"),), tag)
    if k == 1:
        w = np.zeros((1, d))
        w[0, coords[0]] = 1.0
        return linear_network(w, provenance=tag)
    chains_n = min(N, -(-k // (L + 1)))
    chains = [coords[i::chains_n] for i in range(chains_n)]
    stack = _FormStack(d)
    values: List[Form] = [stack.input(c[0]) for c in chains]
    inputs = [stack.input(j) for j in range(d)]
    longest = max(len(c) for c in chains)
    for step in range(1, longest):
        ops = []
        for ci, chain in enumerate(chains):
            if step < len(chain):
                ops.append(("mul", values[ci], inputs[chain[step]]))
            else:
                ops.append(("carry", values[ci]))
        ops += [("carry", f) for f in inputs]
        out = stack.layer(ops)
        values, inputs = out[:chains_n], out[chains_n:]
    while len(values) > 1:
        ops = [("mul", values[i], values[i + 1]) for i in range(0, len(values) - 1, 2)]
        if len(values) % 2:
            ops.append(("carry", values[-1]))
        values = stack.layer(ops)
    net = stack.finish(values, tag)
    if net.uses("relu"):
        net = Network(d, net.layers, tag + "+relu-identity")
    return net


def requ_product(left: Network, right: Network, provenance: str = "") -> Network:
    """Exact σ₂ product of two scalar networks on a shared input."""
    gadget = Network(2, (
        Layer(np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]), np.zeros(4), "requ"),
        Layer(np.array([[0.25, 0.25, -0.25, -0.25]]), np.zeros(1), "linear"),
    ), "requ_product")
    return compose(gadget, parallel([left, right]),
                   provenance or f"requ_product({left.provenance},{right.provenance})")


def requ_product_tree(parts: Sequence[Network], provenance: str = "") -> Network:
    """Exact product of several scalar networks by a balanced tree of gadgets."""
    level = list(parts)
    if not level:
        raise InvalidInputError("product needs at least one factor")
    while len(level) > 1:
        nxt = [requ_product(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    net = level[0]
    return Network(net.input_dim, net.layers, provenance or net.provenance)


def build_exact_poly(kind: str, N: int = 1, L: int = 1, d: int = 1,
                     alpha: Optional[Sequence[int]] = None,
                     coeffs: Optional[Mapping[MultiIndex, float]] = None,
                     bound: float = 1.0) -> Network:
    """σ₂ networks reproducing polynomials exactly.

    kinds: ``square`` (x_1², 2 units), ``product`` (x_1·x_2, 4 units),
    ``identity`` (x_1 on |x_1| ≤ bound, 2 units), ``monomial`` (x^α,
    width 4N+2d, depth L+⌈log₂N⌉) and ``polynomial`` (Σ c_α x^α).
    """
    if N < 1 or L < 1 or d < 1:
        raise InvalidInputError(f"N, L, d must be >= 1, got {(N, L, d)}")
    if kind == "square":
        w = np.zeros((2, d))
        w[:, 0] = [1.0, -1.0]
        return Network(d, (Layer(w, np.zeros(2), "requ"),
                           Layer(np.ones((1, 2)), np.zeros(1), "linear")), "requ_square")
    if kind == "product":
        if d < 2:
            raise InvalidInputError("product needs d >= 2")
        w = np.zeros((4, d))
        w[:, :2] = [[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]
        return Network(d, (Layer(w, np.zeros(4), "requ"),
                           Layer(np.array([[0.25, 0.25, -0.25, -0.25]]), np.zeros(1), "linear")),
                       "requ_product")
    if kind == "identity":
        # (x+B)² − (B−x)² = 4Bx while both arguments stay non-negative
        w = np.zeros((2, d))
        w[:, 0] = [1.0, -1.0]
        return Network(d, (Layer(w, np.array([bound, bound]), "requ"),
                           Layer(np.array([[1.0, -1.0]]) / (4.0 * bound), np.zeros(1), "linear")),
                       f"requ_identity(B={bound:g})")
    if kind == "monomial":
        if alpha is None:
            raise InvalidInputError("monomial needs alpha")
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != d or min(alpha) < 0:
            raise InvalidInputError(f"alpha {alpha} does not fit dimension {d}")
        k = sum(alpha)
        if not monomial_feasible(k, N, L):
            raise InvalidInputError(
                f"infeasible budget: N*L + 2^floor(log2 N) = "
                f"{N * L + 2 ** int(math.floor(math.log2(N)))} < |alpha| = {k}"
            )
        return _requ_monomial(alpha, N, L, f"requ_monomial(alpha={list(alpha)},N={N},L={L})")
    if kind == "polynomial":
        if not coeffs:
            raise InvalidInputError("polynomial needs coefficients")
        terms = sorted(coeffs.items())
        if any(len(a) != d for a, _ in terms):
            raise InvalidInputError(f"coefficient multi-indices must have length {d}")
        parts = [build_exact_poly("monomial", N, L, d, alpha=a) for a, _ in terms]
        weights = np.array([[float(c) for _, c in terms]])
        net = compose(linear_network(weights), parallel(parts),
                      f"requ_polynomial(terms={len(terms)},N={N},L={L})")
        return net
    raise InvalidInputError(f"unknown exact polynomial kind {kind!r}")


# ------------------------------------------------------- smooth partition s_m
def _clamp(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """g(u) = min(max(u, 0), ½) and its a.e. derivative."""
    return np.clip(u, 0.0, 0.5), ((u > 0.0) & (u < 0.5)).astype(np.float64)


def smooth_step(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """s(t) = 2g²(t) − 2g²(1−t) + 2g²(3−t) − 2g²(t−2) with first and second derivatives.

    s rises from 0 to 1 on [0, 1], equals 1 on [1, 2], falls back on [2, 3]
    and vanishes outside [0, 3].
    """
    t = np.asarray(t, dtype=np.float64)
    terms = ((t, 1.0, 2.0), (1.0 - t, -1.0, -2.0), (3.0 - t, -1.0, 2.0), (t - 2.0, 1.0, -2.0))
    val = np.zeros_like(t)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    for u, inner, coef in terms:
        g, gp = _clamp(u)
        val += coef * g * g
        d1 += coef * 2.0 * g * gp * inner
        d2 += coef * 2.0 * gp * gp
    return val, d1, d2


def smooth_component(x: np.ndarray, m_j: int, K: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """s_{m_j}(x) with derivatives; s_1(x) = s(4Kx mod 4), s_2(x) = s_1(x + 1/(2K))."""
    x = np.asarray(x, dtype=np.float64)
    if m_j == 2:
        x = x + 0.5 / K
    kx = K * x
    t = 4.0 * (kx - np.floor(kx))
    val, d1, d2 = smooth_step(t)
    return val, 4.0 * K * d1, 16.0 * K * K * d2


@dataclass(frozen=True)
class SmoothProduct:
    """s_m(x) = Π_j s_{m_j}(x_j) as a metrics reference (orders 0 to 2)."""

    m: PartitionIndex
    K: int

    @property
    def d(self) -> int:
        return len(self.m)

    def _parts(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        vals, d1s, d2s = [], [], []
        for j, mj in enumerate(self.m):
            v, a, b = smooth_component(x[:, j], mj, self.K)
            vals.append(v)
            d1s.append(a)
            d2s.append(b)
        return np.stack(vals, 1), np.stack(d1s, 1), np.stack(d2s, 1)

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.prod(self._parts(x)[0], axis=1)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        vals, d1, _ = self._parts(x)
        out = np.empty_like(vals)
        for j in range(self.d):
            out[:, j] = d1[:, j] * np.prod(np.delete(vals, j, axis=1), axis=1)
        return out

    def hessian(self, x: np.ndarray) -> np.ndarray:
        vals, d1, d2 = self._parts(x)
        p = vals.shape[0]
        out = np.empty((p, self.d, self.d))
        for i in range(self.d):
            for j in range(self.d):
                if i == j:
                    out[:, i, i] = d2[:, i] * np.prod(np.delete(vals, i, axis=1), axis=1)
                else:
                    rest = np.prod(np.delete(vals, [i, j], axis=1), axis=1)
                    out[:, i, j] = d1[:, i] * d1[:, j] * rest
        return out


def _profile(K: int, a: int) -> Network:
    """Q(y) = Σ_{i<a} s(4K(y − i/K) − ½) on [0, a/K]: relu clamps, then requ squares."""
    slopes, offsets = [], []
    coefs = []
    for i in range(a):
        base = -4.0 * i - 0.5
        # u = slope·(4Ky) + offset for the four clamp arguments of s
        for slope, offset, coef in ((1.0, base, 2.0), (-1.0, 1.0 - base, -2.0),
                                    (-1.0, 3.0 - base, 2.0), (1.0, base - 2.0, -2.0)):
            slopes.append(4.0 * K * slope)
            offsets.append(offset)
            coefs.append(coef)
    n = len(coefs)
    # each clamp σ(u) − σ(u − ½) is padded with an idle third unit
    w1 = np.zeros((CLAMP_WIDTH * n, 1))
    b1 = np.zeros(CLAMP_WIDTH * n)
    w1[0::CLAMP_WIDTH, 0] = slopes
    w1[1::CLAMP_WIDTH, 0] = slopes
    b1[0::CLAMP_WIDTH] = offsets
    b1[1::CLAMP_WIDTH] = np.array(offsets) - 0.5
    w2 = np.zeros((n, CLAMP_WIDTH * n))
    for k in range(n):
        w2[k, CLAMP_WIDTH * k] = 1.0
        w2[k, CLAMP_WIDTH * k + 1] = -1.0
    layers = (
        Layer(w1, b1, "relu"),
        Layer(w2, np.zeros(n), "requ"),
        Layer(np.array([coefs]), np.zeros(1), "linear"),
    )
    return Network(1, layers, f"smooth_profile(K={K},a={a})")


@dataclass(eq=False)
class SmoothPartitionKit:
    K: int
    d: int
    profile: Network
    s_nets: Dict[int, Network]
    lam: Dict[PartitionIndex, Network] = field(default_factory=dict)

    def s(self, t: np.ndarray) -> np.ndarray:
        return smooth_step(t)[0]

    def s1(self, x: np.ndarray) -> np.ndarray:
        return smooth_component(x, 1, self.K)[0]

    def s2(self, x: np.ndarray) -> np.ndarray:
        return smooth_component(x, 2, self.K)[0]

    def component(self, m_j: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return smooth_component(x, m_j, self.K)

    def s_m(self, m: Sequence[int]) -> SmoothProduct:
        return SmoothProduct(tuple(m), self.K)


def check_requ_preconditions(N: int, L: int, need: int) -> None:
    if N < 1 or L < 1:
        raise InvalidInputError(f"N and L must be >= 1, got N={N}, L={L}")
    if not monomial_feasible(need, N, L):
        raise PreconditionError(
            f"N*L + 2^floor(log2 N) = {N * L + 2 ** int(math.floor(math.log2(N)))} < {need}"
        )
    if L < math.ceil(math.log2(N)):
        raise PreconditionError(f"L = {L} < ceil(log2 N) = {math.ceil(math.log2(N))}")


def build_smooth_partition(N: int, L: int, d: int, K: Optional[int] = None) -> SmoothPartitionKit:
    """λ_m(x) = Π_j s_{m_j}(x_j) with K = ⌊N^{1/d}⌋⌊L^{2/d}⌋ unless ``K`` is given.

    An explicit K lets the partition share its cells with a piecewise
    approximant built on a finer grid.
    """
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    check_requ_preconditions(N, L, d)
    a = int_root(N, d)
    K = a * int_root(L * L, d) if K is None else int(K)
    if K < 1:
        raise InvalidInputError(f"K must be >= 1, got {K}")
    profile = _profile(K, a)
    psi2, psi3, psi4 = fold_chain(K, a)
    chain = compose(profile, compose(psi2, compose(psi3, psi4)), f"smooth_chain(K={K})")
    s_nets = {
        1: shift_input(chain, np.ones((1, 1)), np.array([1.0 / (8 * K)])),
        2: shift_input(chain, np.ones((1, 1)), np.array([5.0 / (8 * K)])),
    }
    lam: Dict[PartitionIndex, Network] = {}
    for m in partition_indices(d):
        factors = []
        for j, mj in enumerate(m):
            sel = np.zeros((1, d))
            sel[0, j] = 1.0
            factors.append(compose(s_nets[mj], linear_network(sel)))
        tag = f"lambda_m(m={list(m)},K={K})"
        lam[m] = requ_product_tree(factors, tag) if d > 1 else Network(1, s_nets[m[0]].layers, tag)
        logger.debug("%s: width %d depth %d", tag, lam[m].width, lam[m].depth)
    return SmoothPartitionKit(K, d, profile, s_nets, lam)
