"""
Full approximants.

relu:  φ(x) = Σ_m φ̂(φ_m(x), ψ_m(x)),  ψ_m(x) = Σ_α φ̂_α(g_α(x), x^α)
requ:  γ(x) = Σ_m φ₆(λ_m(x), γ_m(x)), γ_m(x) = Σ_α φ₆(g_α(x), x^α)

g_α is the piecewise-constant coefficient field of f_{K,m}: a step network
per axis reads off the cell index and a point-fitting network maps the
flattened index to the (rescaled) coefficient.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError
from .local_poly import PiecewisePoly, build_piecewise_approx
from .metrics import GridSpec, sup_error
from .network import Network, compose, linear_network, parallel, scale_output
from .parallel import run_keyed
from .relu_build import (
    PartitionIndex,
    build_monomial,
    build_partition_nets,
    build_pointfit,
    build_product2,
    build_step,
    int_root,
    partition_indices,
    teeth_for,
)
from .requ_build import build_exact_poly, build_smooth_partition, check_requ_preconditions, requ_product
from .targets import MultiIndex, TargetFunction

logger = logging.getLogger(__name__)


def relu_budget(n: int, N: int, L: int, d: int) -> Tuple[float, float]:
    width = (34 + d) * 2 ** d * n ** (d + 1) * (N + 1) * math.log2(8 * N)
    depth = 56 * d * d * n * n * (L + 1) * math.log2(4 * L)
    return width, depth


def requ_budget(n: int, N: int, L: int, d: int) -> Tuple[float, float]:
    width = 2 ** (d + 6) * n ** (d + 1) * (N + d) * math.log2(8 * N)
    depth = 15 * n * n * (L + 2) * math.log2(4 * L)
    return width, depth


def cell_count(N: int, L: int, d: int) -> int:
    """K = ⌊N^{1/d}⌋²⌊L^{2/d}⌋."""
    a = int_root(N, d)
    return a * a * int_root(L * L, d)


@dataclass
class AssemblyReport:
    kind: str
    K: int
    n: int
    N: int
    L: int
    d: int
    width: int
    depth: int
    parameter_count: int
    target_width: float
    target_depth: float
    outer_bound: float
    sub_networks: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    errors: Dict[int, float] = field(default_factory=dict)
    terms: Dict[PartitionIndex, Network] = field(default_factory=dict, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        doc = {k: getattr(self, k) for k in (
            "kind", "K", "n", "N", "L", "d", "width", "depth", "parameter_count",
            "target_width", "target_depth", "outer_bound",
        )}
        doc["sub_networks"] = {k: {"width": w, "depth": dp} for k, (w, dp) in self.sub_networks.items()}
        doc["errors"] = {f"order{k}": v for k, v in sorted(self.errors.items())}
        return doc


def _linear_sum(parts: Sequence[Network], provenance: str) -> Network:
    """Σ parts run side by side, summed in the given order."""
    stacked = parallel(parts)
    return compose(linear_network(np.ones((1, len(parts)))), stacked, provenance)


def _axis_index(K: int, m_j: int, j: int, d: int) -> Network:
    """Cell index along axis j: plateau k covers [k/K, (k+1)/K − 1/(4K)] of x_j + shift."""
    shift = 0.5 / K if m_j == 2 else 0.0
    step = build_step(K + 1, 1.0 / (4 * (K + 1)), "wide")
    w = np.zeros((1, d))
    w[0, j] = K / (K + 1)
    return compose(step, linear_network(w, np.array([shift * K / (K + 1)])))


def coefficient_nets(poly: PiecewisePoly, N: int = 1, L: int = 1) -> Dict[MultiIndex, Tuple[Network, float]]:
    """Networks g_α equal to c_{f,i,α} on every cell Ω_{m,i}, with the bound max_i |c_{f,i,α}|."""
    K, d = poly.K, poly.d
    axes = [_axis_index(K, mj, j, d) for j, mj in enumerate(poly.m)]
    weights = np.array([[float((K + 1) ** (d - 1 - j)) for j in range(d)]])
    index = compose(linear_network(weights), parallel(axes), f"cell_index(K={K},m={list(poly.m)})")
    table = poly.table()
    out: Dict[MultiIndex, Tuple[Network, float]] = {}
    for col, alpha in enumerate(poly.alphas):
        values = table[:, col]
        bound = float(np.max(np.abs(values)))
        scale = bound if bound > 0 else 1.0
        fit = build_pointfit((values + scale) / (2.0 * scale), N, L, s=poly.n)
        net = scale_output(compose(fit, index), 2.0 * scale, -scale)
        out[alpha] = (Network(d, net.layers, f"g_alpha(alpha={list(alpha)})"), bound)
    return out


def _measured_sup(net: Network, d: int) -> float:
    grid = GridSpec(d, points_per_axis={1: 4096, 2: 128}.get(d, 24))
    return float(np.max(np.abs(net(grid.points()))))


def _measure(f: TargetFunction, net: Network, order: int, grid: Optional[GridSpec],
             threads: int) -> Dict[int, float]:
    report = sup_error(f, net, order, grid or GridSpec(f.d), threads)
    return {k: report.sup(k) for k in range(order + 1)}


def _check(f: TargetFunction, n: int, N: int, L: int, d: int) -> None:
    if f.d != d:
        raise InvalidInputError(f"target {f.name} has dimension {f.d}, expected {d}")
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    if n > f.n:
        raise InvalidInputError(f"target {f.name} is registered with smoothness {f.n} < n = {n}")
    if N < 1 or L < 1:
        raise InvalidInputError(f"N and L must be >= 1, got N={N}, L={L}")
    if f.sobolev_bound > 1.0:
        logger.warning("target %s declares a Sobolev bound %.3g > 1", f.name, f.sobolev_bound)


def build_relu_approximant(f: TargetFunction, n: int, N: int, L: int, d: int,
                           measure: bool = True, threads: int = 1,
                           grid: Optional[GridSpec] = None) -> Tuple[Network, AssemblyReport]:
    """σ₁ network φ with ‖f − φ‖_{W^{1,∞}} decaying like K^{−(n−1)}."""
    _check(f, n, N, L, d)
    kit = build_partition_nets(N, L, n, d)
    K = kit.K
    # inner products see g_α ∈ [−C, C] and x^α ∈ [0, 1]
    inner_tol = 1e-2 * float(K) ** -n

    def build_psi(m: PartitionIndex) -> Tuple[Network, Dict[str, Tuple[int, int]]]:
        poly = build_piecewise_approx(f, K, m, n)
        parts = []
        subs: Dict[str, Tuple[int, int]] = {}
        for alpha, (g_net, bound) in coefficient_nets(poly, N, L).items():
            a = bound + 1.0
            teeth = teeth_for(inner_tol / len(poly.alphas), a, factor=2.0)
            prod = build_product2(N, L, a=a, validate=False, teeth=teeth)
            mono = build_monomial(alpha, N, L, s=max(n - 1, 1))
            parts.append(compose(prod, parallel([g_net, mono])))
            subs[f"g{list(alpha)}"] = (g_net.width, g_net.depth)
            subs[f"monomial{list(alpha)}"] = (mono.width, mono.depth)
        psi = _linear_sum(parts, f"psi_m(m={list(m)},K={K})")
        subs[f"psi{list(m)}"] = (psi.width, psi.depth)
        return psi, subs

    built = dict(run_keyed(build_psi, partition_indices(d), threads))
    psi_nets = {m: built[m][0] for m in built}
    outer_bound = max(_measured_sup(p, d) for p in psi_nets.values()) + 1.0
    outer_teeth = teeth_for(1e-3 * float(K) ** -n / 2 ** d, outer_bound, factor=2.0)
    outer = build_product2(N, L, a=outer_bound, validate=False, teeth=outer_teeth)
    logger.debug("relu assembly: K=%d, outer product bound %.4g with %d teeth", K, outer_bound, outer_teeth)

    terms: Dict[PartitionIndex, Network] = {}
    for m in partition_indices(d):
        terms[m] = compose(outer, parallel([kit.phi[m], psi_nets[m]]), f"term(m={list(m)})")
    net = _linear_sum([terms[m] for m in partition_indices(d)],
                      f"relu_approximant({f.name},n={n},N={N},L={L},d={d},K={K})")

    subs: Dict[str, Tuple[int, int]] = {}
    for m in partition_indices(d):
        subs.update(built[m][1])
        subs[f"phi{list(m)}"] = (kit.phi[m].width, kit.phi[m].depth)
    tw, td = relu_budget(n, N, L, d)
    report = AssemblyReport("relu", K, n, N, L, d, net.width, net.depth, net.parameter_count,
                            tw, td, outer_bound, subs, terms=terms)
    if measure:
        report.errors = _measure(f, net, 1, grid, threads)
        logger.info("relu approximant %s K=%d: W1inf error %.4g", f.name, K, max(report.errors.values()))
    return net, report


def build_requ_approximant(f: TargetFunction, n: int, N: int, L: int, d: int,
                           measure: bool = True, threads: int = 1,
                           grid: Optional[GridSpec] = None,
                           K: Optional[int] = None) -> Tuple[Network, AssemblyReport]:
    """σ₂ network γ with ‖f − γ‖_{W^{2,∞}} decaying like K^{−(n−2)}.

    The smooth partition is built on the same cells as the piecewise
    approximant, so every coefficient-network ramp falls where s_m = 0.
    ``K`` overrides the cell count ⌊N^{1/d}⌋²⌊L^{2/d}⌋ (used by rate sweeps
    that need K and 2K in one dimension).
    """
    _check(f, n, N, L, d)
    check_requ_preconditions(N, L, max(d, n))
    K = cell_count(N, L, d) if K is None else int(K)
    kit = build_smooth_partition(N, L, d, K=K)

    def build_gamma(m: PartitionIndex) -> Tuple[Network, Dict[str, Tuple[int, int]]]:
        poly = build_piecewise_approx(f, K, m, n)
        parts = []
        subs: Dict[str, Tuple[int, int]] = {}
        for alpha, (g_net, _) in coefficient_nets(poly, N, L).items():
            mono = build_exact_poly("monomial", N, L, d, alpha=alpha)
            parts.append(requ_product(g_net, mono))
            subs[f"g{list(alpha)}"] = (g_net.width, g_net.depth)
            subs[f"monomial{list(alpha)}"] = (mono.width, mono.depth)
        gamma = _linear_sum(parts, f"gamma_m(m={list(m)},K={K})")
        subs[f"gamma{list(m)}"] = (gamma.width, gamma.depth)
        return gamma, subs

    built = dict(run_keyed(build_gamma, partition_indices(d), threads))
    terms: Dict[PartitionIndex, Network] = {}
    subs: Dict[str, Tuple[int, int]] = {}
    for m in partition_indices(d):
        terms[m] = requ_product(kit.lam[m], built[m][0], f"term(m={list(m)})")
        subs.update(built[m][1])
        subs[f"lambda{list(m)}"] = (kit.lam[m].width, kit.lam[m].depth)
    net = _linear_sum([terms[m] for m in partition_indices(d)],
                      f"requ_approximant({f.name},n={n},N={N},L={L},d={d},K={K})+relu-identity")
    tw, td = requ_budget(n, N, L, d)
    report = AssemblyReport("requ", K, n, N, L, d, net.width, net.depth, net.parameter_count,
                            tw, td, 0.0, subs, terms=terms)
    if measure:
        report.errors = _measure(f, net, 2, grid, threads)
        logger.info("requ approximant %s K=%d: W2inf error %.4g", f.name, K, max(report.errors.values()))
    return net, report


def explicit_sum(report: AssemblyReport, x: np.ndarray) -> np.ndarray:
    """Σ_m term_m(x) evaluated term by term in lexicographic m order."""
    total = np.zeros(np.atleast_2d(x).shape[0])
    for m in sorted(report.terms):
        total = total + report.terms[m](x)[:, 0]
    return total


def sweep_points(d: int, Ks: Sequence[int],
                 accept: Optional[Callable[[int, int], bool]] = None) -> List[Tuple[int, int, int]]:
    """(K, N, L) reaching each K = ⌊N^{1/d}⌋²⌊L^{2/d}⌋, smallest L first, filtered by ``accept``."""
    out = []
    for K in Ks:
        found = None
        for L in range(1, 65):
            for N in range(1, 4097):
                k = cell_count(N, L, d)
                if k == K and (accept is None or accept(N, L)):
                    found = (K, N, L)
                    break
                if k > K:
                    break
            if found:
                break
        if found is None:
            raise InvalidInputError(f"no (N, L) gives K = {K} in dimension {d}")
        out.append(found)
    return out
