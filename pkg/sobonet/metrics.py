"""
Grid estimates of L^∞ / W^{1,∞} / W^{2,∞} distances.

Sup norms are essential sups: samples where a network reports a breakpoint
(or that fall outside a piecewise approximant's subdomain) are dropped.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import InvalidInputError
from .network import Network
from .parallel import map_blocks

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 0.4871
DEFAULT_POINTS = {1: 2 ** 14, 2: 512, 3: 64}
_EVAL_BLOCK = 16384


@dataclass(frozen=True)
class GridSpec:
    d: int
    points_per_axis: Optional[int] = None
    jitter: float = DEFAULT_JITTER
    box: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidInputError("grid dimension must be positive")
        if not 0.0 < self.jitter < 1.0:
            raise InvalidInputError("jitter must lie strictly inside (0, 1)")
        if self.points_per_axis is not None and self.points_per_axis < 1:
            raise InvalidInputError("points_per_axis must be positive")
        if self.box is not None and len(self.box) != self.d:
            raise InvalidInputError("box must give one interval per axis")

    @property
    def n(self) -> int:
        return self.points_per_axis or DEFAULT_POINTS.get(self.d, 32)

    @property
    def bounds(self) -> Tuple[Tuple[float, float], ...]:
        return self.box or ((0.0, 1.0),) * self.d

    def axis(self, j: int) -> np.ndarray:
        lo, hi = self.bounds[j]
        return lo + (np.arange(self.n) + self.jitter) * ((hi - lo) / self.n)

    def points(self) -> np.ndarray:
        axes = [self.axis(j) for j in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def refined(self, factor: int = 2) -> "GridSpec":
        """``factor``× denser grid that contains every point of this one.

        The jitter becomes frac(factor·jitter); when that is 0 the points
        would hit the box edge, so the jitter is kept and nesting is lost.
        """
        if factor < 1:
            raise InvalidInputError("refinement factor must be positive")
        jitter = math.modf(factor * self.jitter)[0]
        if jitter == 0.0:
            logger.debug("refined grid keeps jitter %g; it no longer contains the coarse points", self.jitter)
            jitter = self.jitter
        return replace(self, points_per_axis=self.n * factor, jitter=jitter)

    def describe(self) -> str:
        return f"{self.n}^{self.d}@{self.jitter:g}"


@dataclass
class ErrorReport:
    sup_err_order0: float
    sup_err_order1: Optional[float]
    sup_err_order2: Optional[float]
    argmax: Dict[int, Tuple[float, ...]]
    grid: GridSpec
    discarded: int

    def sup(self, order: int) -> Optional[float]:
        return (self.sup_err_order0, self.sup_err_order1, self.sup_err_order2)[order]

    def sobolev(self, order: Optional[int] = None) -> float:
        """max over measured orders ≤ ``order`` (the W^{k,∞} distance)."""
        vals = [self.sup(k) for k in range(3) if order is None or k <= order]
        return max(v for v in vals if v is not None)

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for k in range(3):
            v = self.sup(k)
            if v is None:
                continue
            row: Dict[str, Any] = {"order": k, "sup_err": v}
            for j, c in enumerate(self.argmax.get(k, ())):
                row[f"x{j + 1}"] = c
            row["grid"] = self.grid.describe()
            row["discarded"] = self.discarded
            out.append(row)
        return out


def evaluate_any(obj: Any, x: np.ndarray, order: int) -> Tuple[np.ndarray, ...]:
    """(values, gradients, hessians, excluded) for a network or a reference.

    References expose ``value``/``gradient``/``hessian``; an optional
    ``contains(x)`` marks the points they are defined on.
    """
    if isinstance(obj, Network):
        jet = obj.jet(x, order)
        g = None if jet.gradients is None else jet.gradients[:, 0]
        h = None if jet.hessians is None else jet.hessians[:, 0]
        return jet.values[:, 0], g, h, jet.breakpoints
    excluded = np.zeros(x.shape[0], dtype=bool)
    if hasattr(obj, "contains"):
        excluded = ~obj.contains(x)
    vals = obj.value(x)
    grads = obj.gradient(x) if order >= 1 else None
    hess = obj.hessian(x) if order >= 2 else None
    return vals, grads, hess, excluded


def _block_errors(f: Any, net: Any, x: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    fv, fg, fh, fx = evaluate_any(f, x, order)
    nv, ng, nh, nx = evaluate_any(net, x, order)
    errs = np.empty((x.shape[0], order + 1))
    errs[:, 0] = np.abs(fv - nv)
    if order >= 1:
        errs[:, 1] = np.abs(fg - ng).max(axis=1)
    if order >= 2:
        errs[:, 2] = np.abs(fh - nh).reshape(x.shape[0], -1).max(axis=1)
    return errs, fx | nx


def sup_error_points(f: Any, net: Any, order: int, x: np.ndarray,
                     grid: Optional[GridSpec] = None, threads: int = 1) -> ErrorReport:
    if order not in (0, 1, 2):
        raise InvalidInputError(f"order must be 0, 1 or 2, got {order}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    parts = map_blocks(lambda s: _block_errors(f, net, x[s], order),
                       x.shape[0], _EVAL_BLOCK, threads)
    errs = np.concatenate([p[0] for p in parts])
    excluded = np.concatenate([p[1] for p in parts])
    keep = ~excluded
    if not keep.any():
        raise InvalidInputError("no grid points left after discarding breakpoints")
    sups: List[Optional[float]] = [None, None, None]
    argmax: Dict[int, Tuple[float, ...]] = {}
    idx = np.flatnonzero(keep)
    for k in range(order + 1):
        col = errs[idx, k]
        best = int(np.argmax(col))
        sups[k] = float(col[best])
        argmax[k] = tuple(float(c) for c in x[idx[best]])
    grid = grid or GridSpec(x.shape[1], points_per_axis=1)
    report = ErrorReport(sups[0], sups[1], sups[2], argmax, grid, int(excluded.sum()))
    logger.debug("sup_error order %d on %s: %s (discarded %d)",
                 order, grid.describe(), sups[: order + 1], report.discarded)
    return report


def sup_error(f: Any, net: Any, order: int = 1, grid: Optional[GridSpec] = None,
              threads: int = 1) -> ErrorReport:
    """Max over the grid of |D^α(f − net)| for every |α| ≤ order."""
    d = net.input_dim if isinstance(net, Network) else f.d
    grid = grid or GridSpec(d)
    if grid.d != d:
        raise InvalidInputError(f"grid dimension {grid.d} does not match input dimension {d}")
    return sup_error_points(f, net, order, grid.points(), grid, threads)


@dataclass(frozen=True)
class FdReport:
    max_deviation: float
    checked: int
    excluded: int


def fd_check(net: Network, points: np.ndarray, h: float = 1e-6) -> FdReport:
    """Compare forward-mode gradients with central differences."""
    x = net._check_points(points)
    jet = net.jet(x, 1)
    keep = ~jet.breakpoints
    g = jet.gradients[:, 0]
    worst = 0.0
    for j in range(net.input_dim):
        step = np.zeros(net.input_dim)
        step[j] = h
        fd = (net(x + step)[:, 0] - net(x - step)[:, 0]) / (2.0 * h)
        dev = np.abs(fd - g[:, j]) / np.maximum(1.0, np.abs(g[:, j]))
        if keep.any():
            worst = max(worst, float(dev[keep].max()))
    return FdReport(worst, int(keep.sum()), int((~keep).sum()))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: int


def rate_fit(pairs: Sequence[Tuple[float, float]]) -> RateFit:
    """Least-squares slope of log(error) against log(K)."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise InvalidInputError("rate_fit needs at least three (K, error) pairs")
    ks = np.array([p[0] for p in pairs], dtype=np.float64)
    errs = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(ks <= 0):
        raise InvalidInputError("K values must be positive")
    if np.any(errs <= 0):
        raise InvalidInputError(
            "errors must be positive; a zero error suggests exact representation, report it separately"
        )
    res = stats.linregress(np.log(ks), np.log(errs))
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2), len(pairs))


def norm_propagation(kind: str, **norms: float) -> float:
    """Upper bounds on W^{1,∞} norms of compositions and products.

    composition: d, m, g_sup, g_semi, f_semi  ->  √d·m·max{‖g‖∞, |g|·|f|}
    product:     f_sup, f_semi, g_sup, g_semi ->  ‖g‖∞|f| + ‖f‖∞|g|
    """
    if any(v < 0 for v in norms.values()):
        raise InvalidInputError("norms must be non-negative")
    try:
        if kind == "composition":
            d = norms.get("d", 1)
            m = norms.get("m", 1)
            return math.sqrt(d) * m * max(norms["g_sup"], norms["g_semi"] * norms["f_semi"])
        if kind == "product":
            return norms["g_sup"] * norms["f_semi"] + norms["f_sup"] * norms["g_semi"]
    except KeyError as e:
        raise InvalidInputError(f"{kind} bound needs norm {e.args[0]!r}") from e
    raise InvalidInputError(f"unknown propagation kind {kind!r}")


def measure_reference(f: Any, g: Any, order: int, grid: GridSpec) -> ErrorReport:
    """sup_error between two references (e.g. a target and a piecewise approximant)."""
    return sup_error_points(f, g, order, grid.points(), grid)
