"""
Averaged Taylor polynomials and the piecewise-polynomial approximants f_{K,m}.

On every cell Ω_{m,i} the target is replaced by its Taylor polynomial of
degree n−1 averaged against a smooth bump over the ball of radius 1/(4K)
around the cell center. Coefficients are stored in the global monomial
basis x^α, so a cell's polynomial is evaluated without recentering.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import factorial

from .errors import InvalidInputError, OutOfDomainError, QuadratureError
from .parallel import map_blocks
from .relu_build import SubdomainIndex, cell_indices
from .targets import ENLARGED_DOMAIN, MultiIndex, TargetFunction, multi_indices

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-8
QUAD_START = 8
QUAD_CAP = {1: 4096, 2: 512, 3: 128}
_CELL_BLOCK = 64


@dataclass(frozen=True)
class BallSpec:
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise InvalidInputError(f"ball radius must be positive, got {self.radius}")
        lo, hi = ENLARGED_DOMAIN
        if any(c - self.radius < lo or c + self.radius > hi for c in self.center):
            raise InvalidInputError(
                f"ball B({self.center}, {self.radius:g}) leaves the enlarged domain [{lo:g}, {hi:g}]^d"
            )

    @property
    def d(self) -> int:
        return len(self.center)


def c2_bound(n: int, d: int) -> float:
    """C₂(n, d) = Σ_{|α+β| ≤ n−1} 1/(α!β!) = Σ_{k<n} (2d)^k / k!."""
    return float(sum((2.0 * d) ** k / math.factorial(k) for k in range(n)))


def _bump(z: np.ndarray) -> np.ndarray:
    """exp(−1/(1 − |z|²)) inside the unit ball, 0 outside."""
    r2 = np.sum(z * z, axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


_NODE_CACHE: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}
_CHUNK_POINTS = 2 ** 20


def _reference_nodes(d: int, per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes on [−1, 1]^d that carry bump weight, and weights summing to 1.

    The weights already include the numerically computed normalization c_r.
    """
    key = (d, per_axis)
    cached = _NODE_CACHE.get(key)
    if cached is not None:
        return cached
    axis = -1.0 + (np.arange(per_axis) + 0.5) * (2.0 / per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    z = np.stack([m.reshape(-1) for m in mesh], axis=1)
    w = _bump(z)
    keep = w > 0.0
    z, w = z[keep], w[keep]
    w = w / w.sum()
    _NODE_CACHE[key] = (z, w)
    return z, w


def bump_normalization(radius: float, d: int, per_axis: int = 512) -> float:
    """c_r with ∫_B c_r·exp(−1/(1 − |y−x₀|²/r²)) dy = 1 (midpoint rule)."""
    axis = -1.0 + (np.arange(per_axis) + 0.5) * (2.0 / per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    z = np.stack([m.reshape(-1) for m in mesh], axis=1)
    cell = (2.0 * radius / per_axis) ** d
    return float(1.0 / (_bump(z).sum() * cell))


def _taylor_terms(n: int, d: int) -> List[Tuple[MultiIndex, MultiIndex, float]]:
    """(β, γ, 1/(γ!(β−γ)!)) for γ ≤ β, |β| ≤ n−1."""
    out = []
    for beta in multi_indices(d, n - 1):
        for gamma in multi_indices(d, sum(beta)):
            if all(g <= b for g, b in zip(gamma, beta)):
                rest = tuple(b - g for b, g in zip(beta, gamma))
                weight = 1.0 / float(np.prod(factorial(gamma)) * np.prod(factorial(rest)))
                out.append((beta, gamma, weight))
    return out


def _coefficients(f: TargetFunction, centers: np.ndarray, radius: float, n: int,
                  per_axis: int) -> np.ndarray:
    """Coefficient matrix (balls, |{γ : |γ| ≤ n−1}|) for one quadrature resolution."""
    d = centers.shape[1]
    z, w = _reference_nodes(d, per_axis)
    gammas = multi_indices(d, n - 1)
    col = {g: k for k, g in enumerate(gammas)}
    terms = _taylor_terms(n, d)
    out = np.zeros((centers.shape[0], len(gammas)))
    chunk = max(1, _CHUNK_POINTS // max(1, w.size))
    for start in range(0, centers.shape[0], chunk):
        # y has shape (balls, nodes, d)
        y = centers[start:start + chunk, None, :] + radius * z[None, :, :]
        flat = y.reshape(-1, d)
        derivs: Dict[MultiIndex, np.ndarray] = {}
        for beta, gamma, weight in terms:
            if beta not in derivs:
                derivs[beta] = f.derivative(beta, flat).reshape(y.shape[:2])
            rest = np.array([b - g for b, g in zip(beta, gamma)])
            mono = np.prod((-y) ** rest, axis=2)
            out[start:start + chunk, col[gamma]] += weight * ((derivs[beta] * mono) @ w)
    return out


def _averaged_batch(f: TargetFunction, centers: np.ndarray, radius: float, n: int) -> np.ndarray:
    d = centers.shape[1]
    cap = QUAD_CAP.get(d, 64)
    per_axis = QUAD_START
    prev = _coefficients(f, centers, radius, n, per_axis)
    change = float("inf")
    while per_axis < cap:
        per_axis *= 2
        cur = _coefficients(f, centers, radius, n, per_axis)
        change = float(np.max(np.abs(cur - prev)))
        if change <= QUAD_TOL:
            return cur
        prev = cur
    raise QuadratureError(
        f"averaged Taylor coefficients still moved by {change:.3g} at {per_axis} nodes per axis",
        change,
    )


def averaged_taylor(f: TargetFunction, ball: BallSpec, n: int) -> Dict[MultiIndex, float]:
    """Monomial coefficients of Q^n f, the degree n−1 Taylor polynomial averaged over ``ball``.

    The midpoint rule on the ball's bounding box is refined by doubling
    until two successive coefficient sets agree to 1e−8.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    if ball.d != f.d:
        raise InvalidInputError(f"ball dimension {ball.d} does not match target dimension {f.d}")
    coefs = _averaged_batch(f, np.array([ball.center], dtype=np.float64), ball.radius, n)[0]
    return {g: float(c) for g, c in zip(multi_indices(f.d, n - 1), coefs)}


# ------------------------------------------------------------- unity weights
def unity_profile(t: np.ndarray) -> np.ndarray:
    """h(t): 1 on |t| ≤ 3/2, 5/2 − |t| on [3/2, 5/2], 0 beyond."""
    return np.clip(2.5 - np.abs(np.asarray(t, dtype=np.float64)), 0.0, 1.0)


@dataclass(frozen=True)
class UnityWeights:
    """h_i(x) = h(4K(x − c_i)) with c_i the center of cell i along one axis."""

    K: int

    def center(self, i: int, m_j: int = 1) -> float:
        return (8 * i + 3) / (8 * self.K) - (0.5 / self.K if m_j == 2 else 0.0)

    def h(self, i: int, x: np.ndarray, m_j: int = 1) -> np.ndarray:
        return unity_profile(4 * self.K * (np.asarray(x, dtype=np.float64) - self.center(i, m_j)))

    def matrix(self, x: np.ndarray, m_j: int = 1) -> np.ndarray:
        """(P, K+1) matrix of h_i(x_p) for i = 0..K."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return np.stack([self.h(i, x, m_j) for i in range(self.K + 1)], axis=1)

    def tensor(self, x: np.ndarray, m: Sequence[int]) -> np.ndarray:
        """h_i(x) = Π_j h_{i_j}(x_j) over the flattened cell index (row-major in i)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.ones((x.shape[0], 1))
        for j, mj in enumerate(m):
            mat = self.matrix(x[:, j], mj)
            out = (out[:, :, None] * mat[:, None, :]).reshape(x.shape[0], -1)
        return out


# ------------------------------------------------------------ piecewise poly
@dataclass
class PiecewisePoly:
    """f_{K,m}: one polynomial of degree n−1 per cell Ω_{m,i}."""

    m: Tuple[int, ...]
    K: int
    n: int
    cells: Dict[Tuple[int, ...], Dict[MultiIndex, float]]
    _table: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> int:
        return len(self.m)

    @property
    def alphas(self) -> List[MultiIndex]:
        return multi_indices(self.d, self.n - 1)

    def _flat(self, idx: np.ndarray) -> np.ndarray:
        flat = np.zeros(idx.shape[0], dtype=np.int64)
        for j in range(self.d):
            flat = flat * (self.K + 1) + idx[:, j]
        return flat

    def table(self) -> np.ndarray:
        """(K+1)^d × |alphas| coefficient table indexed by the row-major cell index."""
        if self._table is None:
            alphas = self.alphas
            tab = np.zeros(((self.K + 1) ** self.d, len(alphas)))
            for i, coefs in self.cells.items():
                row = self._flat(np.array([i]))[0]
                tab[row] = [coefs.get(a, 0.0) for a in alphas]
            self._table = tab
        return self._table

    def max_coefficient(self) -> float:
        return float(np.max(np.abs(self.table()))) if self.cells else 0.0

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.all(cell_indices(self.m, self.K, x) >= 0, axis=1)

    def _rows(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        idx = cell_indices(self.m, self.K, x)
        inside = np.all(idx >= 0, axis=1)
        coefs = np.full((x.shape[0], len(self.alphas)), np.nan)
        coefs[inside] = self.table()[self._flat(idx[inside])]
        return x, coefs, inside

    def value(self, x: np.ndarray) -> np.ndarray:
        """Polynomial value; NaN outside Ω_m."""
        x, coefs, _ = self._rows(x)
        exps = np.array(self.alphas)
        mono = np.prod(x[:, None, :] ** exps[None, :, :], axis=2)
        return np.sum(coefs * mono, axis=1)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x, coefs, _ = self._rows(x)
        exps = np.array(self.alphas)
        out = np.zeros(x.shape)
        for j in range(self.d):
            lowered = exps.copy()
            lowered[:, j] = np.maximum(lowered[:, j] - 1, 0)
            mono = exps[None, :, j] * np.prod(x[:, None, :] ** lowered[None, :, :], axis=2)
            out[:, j] = np.sum(coefs * mono, axis=1)
        return out

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x, coefs, _ = self._rows(x)
        exps = np.array(self.alphas)
        out = np.zeros((x.shape[0], self.d, self.d))
        for i in range(self.d):
            for j in range(self.d):
                lowered = exps.copy()
                factor = lowered[:, i].astype(np.float64)
                lowered[:, i] = np.maximum(lowered[:, i] - 1, 0)
                factor = factor * lowered[:, j]
                lowered[:, j] = np.maximum(lowered[:, j] - 1, 0)
                mono = factor[None, :] * np.prod(x[:, None, :] ** lowered[None, :, :], axis=2)
                out[:, i, j] = np.sum(coefs * mono, axis=1)
        return out

    def coefficient_field(self, alpha: Sequence[int], x: np.ndarray) -> np.ndarray:
        """g_{f,α,m}(x) = Σ_i h_i(x)·c_{f,i,α}; constant on every cell."""
        alpha = tuple(int(a) for a in alpha)
        col = self.alphas.index(alpha)
        weights = UnityWeights(self.K).tensor(x, self.m)
        return weights @ self.table()[:, col]

    def to_dict(self) -> dict:
        cells = []
        for i in sorted(self.cells):
            coeffs = {",".join(str(v) for v in a): c for a, c in sorted(self.cells[i].items())}
            cells.append({"i": list(i), "coeffs": coeffs})
        return {"m": list(self.m), "K": self.K, "n": self.n, "cells": cells}

    @classmethod
    def from_dict(cls, doc: dict) -> "PiecewisePoly":
        try:
            cells = {
                tuple(int(v) for v in item["i"]): {
                    tuple(int(v) for v in key.split(",")): float(c)
                    for key, c in item["coeffs"].items()
                }
                for item in doc["cells"]
            }
            return cls(tuple(int(v) for v in doc["m"]), int(doc["K"]), int(doc["n"]), cells)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"malformed piecewise polynomial document: {e}") from e

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path


def build_piecewise_approx(f: TargetFunction, K: int, m: Sequence[int], n: int,
                           threads: int = 1) -> PiecewisePoly:
    """f_{K,m}: averaged Taylor polynomials on the balls B(center(Ω_{m,i}), 1/(4K))."""
    m = tuple(int(v) for v in m)
    if K < 1:
        raise InvalidInputError(f"K must be >= 1, got {K}")
    if len(m) != f.d:
        raise InvalidInputError(f"partition index {m} does not match target dimension {f.d}")
    if not 1 <= n <= f.n:
        raise InvalidInputError(f"n must lie in [1, {f.n}] for target {f.name}, got {n}")
    keys = [tuple(i) for i in np.ndindex(*([K + 1] * f.d))]
    centers = np.array([SubdomainIndex(m, i, K).center() for i in keys])
    radius = 1.0 / (4 * K)
    for c in centers[[0, -1]]:
        BallSpec(tuple(c), radius)
    parts = map_blocks(lambda s: _averaged_batch(f, centers[s], radius, n),
                       len(keys), _CELL_BLOCK, threads)
    coefs = np.concatenate(parts)
    alphas = multi_indices(f.d, n - 1)
    cells = {i: {a: float(c) for a, c in zip(alphas, row)} for i, row in zip(keys, coefs)}
    poly = PiecewisePoly(m, K, n, cells)
    bound = c2_bound(n, f.d)
    if poly.max_coefficient() > bound:
        logger.warning("f_{K,m} coefficient %.4g exceeds C2(%d,%d) = %.4g",
                       poly.max_coefficient(), n, f.d, bound)
    logger.debug("piecewise approx %s K=%d m=%s n=%d: %d cells, max |c| %.4g",
                 f.name, K, list(m), n, len(cells), poly.max_coefficient())
    return poly


def eval_piecewise(p: PiecewisePoly, x: Sequence[float], order: int = 0) -> Union[float, np.ndarray]:
    """Value (order 0) or gradient (order 1) at a single point of Ω_m."""
    if order not in (0, 1):
        raise InvalidInputError(f"order must be 0 or 1, got {order}")
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if point.shape[1] != p.d:
        raise InvalidInputError(f"point has {point.shape[1]} coordinates, expected {p.d}")
    if not p.contains(point)[0]:
        raise OutOfDomainError(f"{list(point[0])} lies outside Omega_m for m={list(p.m)}, K={p.K}")
    if order == 0:
        return float(p.value(point)[0])
    return p.gradient(point)[0]


def load_piecewise(path: Union[str, Path]) -> PiecewisePoly:
    return PiecewisePoly.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
