"""
Capacity of derivative classes: closed-form bounds and empirical searches.

Bounds: Warren's sign-pattern count, the VC/pseudo-dimension upper bound of
DΦ via U = Σ_n Σ_{i≤n} W_i, covering numbers, the Dudley integral and the
collapsed Rademacher / generalization-gap chain.

Searches: shattering search over sampled parameters, the largest shattered
m, and the bump grid that witnesses the lower bound.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy import integrate, optimize

from .errors import InvalidInputError, PreconditionError
from .network import Layer, Network
from .parallel import run_keyed, task_rng
from .targets import multi_indices, symbols

logger = logging.getLogger(__name__)

SHATTER_BATCH = 8192
PARAM_RADIUS = 4.0


# ---------------------------------------------------------------- arch
@dataclass(frozen=True)
class ArchSpec:
    """Fully connected layer widths (d, N_1, …, N_L, 1)."""

    widths: Tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 3:
            raise InvalidInputError("an architecture needs an input, at least one hidden layer and an output")
        if min(widths) < 1:
            raise InvalidInputError(f"layer widths must be positive, got {widths}")
        if widths[-1] != 1:
            raise InvalidInputError("the output width must be 1")
        if self.activation not in ("relu", "requ"):
            raise InvalidInputError(f"activation must be relu or requ, got {self.activation!r}")
        object.__setattr__(self, "widths", widths)

    @classmethod
    def parse(cls, text: str, activation: str = "relu") -> "ArchSpec":
        try:
            return cls(tuple(int(v) for v in text.split(",")), activation)
        except ValueError as e:
            raise InvalidInputError(f"cannot parse architecture {text!r}: {e}") from e

    @classmethod
    def from_hidden(cls, d: int, hidden: Sequence[int], activation: str = "relu") -> "ArchSpec":
        return cls((d, *hidden, 1), activation)

    @property
    def d(self) -> int:
        return self.widths[0]

    @property
    def L(self) -> int:
        return len(self.widths) - 2

    @property
    def layer_params(self) -> List[int]:
        """W_i = N_i·N_{i−1} + N_i for i = 1..L+1."""
        return [self.widths[i] * self.widths[i - 1] + self.widths[i] for i in range(1, len(self.widths))]

    @property
    def W(self) -> int:
        return sum(self.layer_params)

    @property
    def U(self) -> int:
        w = self.layer_params
        return sum(sum(w[:k]) for k in range(1, len(w) + 1))

    def augmented(self) -> "ArchSpec":
        return ArchSpec((self.d + 1, *self.widths[1:]), self.activation)

    def network(self, theta: np.ndarray) -> Network:
        layers = []
        for i in range(1, len(self.widths)):
            act = "linear" if i == len(self.widths) - 1 else self.activation
            layers.append(Layer(np.zeros((self.widths[i], self.widths[i - 1])), np.zeros(self.widths[i]), act))
        return Network(self.d, tuple(layers), f"mlp({','.join(map(str, self.widths))})").with_parameters(theta)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform in ±√(1/fan_in) per layer, weights then bias (parameter order)."""
        parts = []
        for i in range(1, len(self.widths)):
            bound = math.sqrt(1.0 / self.widths[i - 1])
            parts.append(rng.uniform(-bound, bound, self.widths[i] * self.widths[i - 1]))
            parts.append(rng.uniform(-bound, bound, self.widths[i]))
        return np.concatenate(parts)


@dataclass(frozen=True)
class BoundReport:
    arch: ArchSpec
    U: int
    vc_upper: float
    pdim_upper: float

    def rows(self) -> List[Dict[str, object]]:
        return [{
            "arch": ",".join(map(str, self.arch.widths)),
            "activation": self.arch.activation,
            "L": self.arch.L,
            "W": self.arch.W,
            "U": self.U,
            "vc_upper": self.vc_upper,
            "pdim_upper": self.pdim_upper,
        }]


# --------------------------------------------------------------- bounds
def warren_count(M: int, D: int, W: int) -> float:
    """2(2eMD/W)^W: most sign patterns M polynomials of degree ≤ D in W variables attain."""
    if min(M, D, W) < 1:
        raise InvalidInputError(f"M, D, W must be positive, got {(M, D, W)}")
    if W > M:
        raise PreconditionError(f"Warren's bound needs W <= M, got W={W}, M={M}")
    return 2.0 * (2.0 * math.e * M * D / W) ** W


def _vc_formula(L: int, U: int) -> float:
    r = (L + 1) * (L + 2)
    return L + 1 + U * math.log2(2.0 * r * math.log2(r))


def vc_pdim_upper(arch: ArchSpec) -> BoundReport:
    """VCdim(DΦ) ≤ L + 1 + U·log₂[2(L+1)(L+2)·log₂((L+1)(L+2))]; Pdim on the (d+1)-input architecture."""
    aug = arch.augmented()
    report = BoundReport(arch, arch.U, _vc_formula(arch.L, arch.U), _vc_formula(aug.L, aug.U))
    logger.debug("bounds for %s: U=%d vc<=%.4f pdim<=%.4f", arch.widths, report.U,
                 report.vc_upper, report.pdim_upper)
    return report


def inequality_bound(t: float, w: float, r: float) -> float:
    """From 2^m ≤ 2^t(mr/w)^w with r ≥ 16 and m ≥ w ≥ t ≥ 0: m ≤ t + w·log₂(2r·log₂ r)."""
    if r < 16:
        raise PreconditionError(f"the inequality needs r >= 16, got {r}")
    if not w >= t >= 0:
        raise PreconditionError(f"the inequality needs w >= t >= 0, got w={w}, t={t}")
    return t + w * math.log2(2.0 * r * math.log2(r))


def inequality_max_m(t: float, w: float, r: float, limit: int = 1 << 20) -> int:
    """Largest integer m ≥ w with m ≤ t + w·log₂(mr/w), found by scanning."""
    best = 0
    for m in range(max(1, math.ceil(w)), limit):
        if m <= t + w * math.log2(m * r / w):
            best = m
        elif m > 4 * inequality_bound(t, w, r):
            break
    return best


def _log(x: float, log_base: float) -> float:
    return math.log(x) if not log_base else math.log(x, log_base)


def log_covering_number(eps: float, n: int, B: float, pdim: float, log_base: float = 0.0) -> float:
    """log N(ε) with N(ε) ≤ (2enB/(ε·Pdim))^Pdim."""
    if eps <= 0 or n < 1 or B <= 0 or pdim <= 0:
        raise InvalidInputError("covering number needs eps, n, B and Pdim positive")
    if n < pdim:
        raise PreconditionError(f"covering bound needs n >= Pdim, got n={n}, Pdim={pdim:g}")
    return pdim * _log(2.0 * math.e * n * B / (eps * pdim), log_base)


def covering_number(eps: float, n: int, B: float, pdim: float) -> float:
    return math.exp(log_covering_number(eps, n, B, pdim))


def dudley_bound(pdim: float, B: float, n: int, log_base: float = 0.0) -> float:
    """inf_{0<δ<B} 4δ + 12/√n ∫_δ^B √log(2N(ε)) dε, evaluated with scipy quad."""
    if B <= 0:
        return 0.0

    def entropy(eps: float) -> float:
        return math.sqrt(_log(2.0, log_base) + log_covering_number(eps, n, B, pdim, log_base))

    def objective(delta: float) -> float:
        tail, _ = integrate.quad(entropy, delta, B, limit=200)
        return 4.0 * delta + 12.0 / math.sqrt(n) * tail

    res = optimize.minimize_scalar(objective, bounds=(1e-12 * B, B), method="bounded")
    return float(min(res.fun, objective(B)))


def rademacher_bound(pdim: float, B: float, M: int, log_base: float = 0.0) -> float:
    """28B·√(Pdim/M)·√log(2eM/Pdim)."""
    if pdim <= 0:
        raise InvalidInputError("Pdim must be positive")
    if M < pdim:
        raise PreconditionError(f"the Rademacher bound needs M >= Pdim, got M={M}, Pdim={pdim:g}")
    if B == 0:
        return 0.0
    return 28.0 * B * math.sqrt(pdim / M) * math.sqrt(_log(2.0 * math.e * M / pdim, log_base))


def gen_bound(pdim_phi: float, pdim_dphi: float, B: float, d: int, M: int,
              log_base: float = 0.0) -> float:
    """4(B+1)(d·R_M(DΦ) + R_M(Φ)) with both Rademacher terms from :func:`rademacher_bound`."""
    if B < 0 or d < 1:
        raise InvalidInputError("B must be >= 0 and d >= 1")
    r_dphi = rademacher_bound(pdim_dphi, B, M, log_base)
    r_phi = rademacher_bound(pdim_phi, B, M, log_base)
    return 4.0 * (B + 1.0) * (d * r_dphi + r_phi)


# ------------------------------------------------------------ shattering
def _batched_partial(arch: ArchSpec, thetas: np.ndarray, x: np.ndarray, i: int) -> np.ndarray:
    """D_iφ(x_j; θ_b) for every parameter row θ_b; shape (B, m)."""
    B = thetas.shape[0]
    h = np.broadcast_to(x, (B,) + x.shape).copy()
    g = np.zeros_like(h)
    g[..., i] = 1.0
    pos = 0
    last = len(arch.widths) - 1
    for k in range(1, len(arch.widths)):
        n_in, n_out = arch.widths[k - 1], arch.widths[k]
        w = thetas[:, pos:pos + n_out * n_in].reshape(B, n_out, n_in)
        pos += n_out * n_in
        b = thetas[:, pos:pos + n_out]
        pos += n_out
        z = np.einsum("bon,bmn->bmo", w, h) + b[:, None, :]
        gz = np.einsum("bon,bmn->bmo", w, g)
        if k == last:
            return gz[..., 0]
        active = np.maximum(z, 0.0)
        if arch.activation == "relu":
            h, g = active, gz * (z > 0.0)
        else:
            h, g = active * active, gz * (2.0 * active)
    raise AssertionError("unreachable")


def _pattern_codes(signs: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(signs.shape[1], dtype=np.int64)
    return signs.astype(np.int64) @ weights


def shatter_points(d: int, m: int, strategy: str = "grid", seed: int = 0) -> np.ndarray:
    """m points in (0, 1)^d: evenly spaced along the diagonal, or uniform random."""
    if strategy == "grid":
        t = (np.arange(m) + 0.5) / m
        return np.repeat(t[:, None], d, axis=1)
    if strategy == "random":
        return task_rng(seed, 7, m, d).uniform(0.0, 1.0, (m, d))
    raise InvalidInputError(f"unknown point strategy {strategy!r}")


def _grid_thetas(W: int, samples: int, radius: float, seed: int) -> Tuple[int, Callable[[np.ndarray], np.ndarray]]:
    """Deterministic θ enumeration for the grid sampler: (count, index → θ rows).

    With at least two levels per coordinate this is the midpoint lattice of
    [−R, R]^W; otherwise it enumerates per-coordinate sign flips of one seeded
    base point, flipping output-layer coordinates first.
    """
    levels = int(math.floor(samples ** (1.0 / W) + 1e-9))
    cap = 1 << 62
    if levels >= 2:
        powers = np.array([min(levels ** k, cap) for k in range(W)], dtype=np.int64)
        nodes = radius * ((2.0 * np.arange(levels) + 1.0) / levels - 1.0)
        total = min(samples, levels ** W)

        def lattice(idx: np.ndarray) -> np.ndarray:
            return nodes[(idx[:, None] // powers[None, :]) % levels]

        return total, lattice
    base = task_rng(seed, 11, W).uniform(0.25 * radius, radius, W)
    powers = np.array([min(1 << k, cap) for k in range(W)], dtype=np.int64)[::-1]

    def flips(idx: np.ndarray) -> np.ndarray:
        signs = 1.0 - 2.0 * ((idx[:, None] // powers[None, :]) % 2)
        return base[None, :] * signs

    return min(samples, 1 << min(W, 62)), flips


@dataclass
class ShatterInstance:
    points: np.ndarray
    i: int
    m: int
    patterns_found: int
    shattered: bool
    samples: int
    samples_used: int
    seed: int
    strategy: str = "grid"
    radius: float = PARAM_RADIUS
    sampler: str = "random"

    def rows(self) -> List[Dict[str, object]]:
        return [{
            "m": self.m, "i": self.i, "patterns_found": self.patterns_found,
            "patterns_possible": 2 ** self.m, "shattered": self.shattered,
            "samples": self.samples, "samples_used": self.samples_used,
            "seed": self.seed, "strategy": self.strategy, "sampler": self.sampler,
        }]


def shatter_search(arch: ArchSpec, m: int, i: int = 0, points: Optional[np.ndarray] = None,
                   samples: int = 100_000, seed: int = 0, strategy: str = "grid",
                   threads: int = 1, radius: float = PARAM_RADIUS,
                   sampler: str = "random") -> ShatterInstance:
    """Sign patterns 1[D_iφ(x_j; θ) > 0] reached by sampled θ.

    ``sampler="random"`` draws uniform θ in [−R, R]^W per batch and adds a
    copy with the output layer negated; a larger ``samples`` only extends
    the draw. ``sampler="grid"`` walks the deterministic enumeration of
    ``_grid_thetas``. Batches are keyed by index, so the result does not
    depend on the thread count.
    """
    if m < 1 or m > 62:
        raise InvalidInputError(f"m must lie in [1, 62], got {m}")
    if not 0 <= i < arch.d:
        raise InvalidInputError(f"coordinate {i} out of range for input dimension {arch.d}")
    if samples < 1:
        raise InvalidInputError("samples must be positive")
    if sampler not in ("random", "grid"):
        raise InvalidInputError(f"unknown parameter sampler {sampler!r}")
    x = shatter_points(arch.d, m, strategy, seed) if points is None else np.asarray(points, dtype=np.float64)
    if x.shape != (m, arch.d):
        raise InvalidInputError(f"points must have shape ({m}, {arch.d}), got {x.shape}")
    n_out_params = arch.layer_params[-1]
    requested = samples
    if sampler == "grid":
        samples, enumerate_thetas = _grid_thetas(arch.W, samples, radius, seed)
    n_batches = -(-samples // SHATTER_BATCH)
    full = 1 << m

    def run_batch(b: int) -> np.ndarray:
        count = min(SHATTER_BATCH, samples - b * SHATTER_BATCH)
        if sampler == "grid":
            thetas = enumerate_thetas(np.arange(b * SHATTER_BATCH, b * SHATTER_BATCH + count, dtype=np.int64))
        else:
            rng = task_rng(seed, m, i, b)
            base = rng.uniform(-radius, radius, (max(1, (count + 1) // 2), arch.W))
            flipped = base.copy()
            flipped[:, -n_out_params:] *= -1.0
            thetas = np.concatenate([base, flipped])[:count]
        return np.unique(_pattern_codes(_batched_partial(arch, thetas, x, i) > 0.0))

    seen: set = set()
    used = 0
    for start in range(0, n_batches, max(1, threads)):
        keys = range(start, min(n_batches, start + max(1, threads)))
        for b, codes in run_keyed(run_batch, keys, threads):
            if len(seen) == full:
                break
            seen.update(int(c) for c in codes)
            used = min(samples, (b + 1) * SHATTER_BATCH)
        logger.debug("shatter m=%d: %d/%d patterns after %d samples", m, len(seen), full, used)
        if len(seen) == full:
            break
    return ShatterInstance(x, i, m, len(seen), len(seen) == full, requested, used, seed, strategy,
                           radius, sampler)


def vc_lower_search(arch: ArchSpec, max_m: int, i: int = 0, samples: int = 100_000,
                    seed: int = 0, strategy: str = "grid", threads: int = 1,
                    sampler: str = "random") -> Tuple[int, List[ShatterInstance]]:
    """Largest m ≤ max_m whose shatter points are shattered, increasing m until the first failure."""
    best = 0
    history: List[ShatterInstance] = []
    for m in range(1, max_m + 1):
        inst = shatter_search(arch, m, i, None, samples, seed, strategy, threads, sampler=sampler)
        history.append(inst)
        logger.info("vc search m=%d: %d/%d patterns", m, inst.patterns_found, 2 ** m)
        if not inst.shattered:
            break
        best = m
    return best, history


# -------------------------------------------------------------- bump grid
@dataclass(eq=False)
class BumpGrid:
    """h_β(x) = Σ_θ M^{−n} β(θ) g_θ(x) with g_θ(x) = g̃(M(x − x_θ))/C.

    g̃(z) = z_i·exp(1 − 1/(1 − 9|z|²)) on |z| < 1/3, so ∂g̃/∂z_i(0) = 1 and
    sign D_i h_β(x_θ) = β(θ). C is the sampled max of |D^α g̃| over |α| ≤ n.
    """

    M_grid: int
    d: int
    n: int
    beta: np.ndarray
    i: int = 0
    _compiled: Dict[Tuple[int, ...], object] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.M_grid < 1 or self.d < 1 or self.n < 1:
            raise InvalidInputError("M_grid, d and n must be positive")
        if not 0 <= self.i < self.d:
            raise InvalidInputError(f"coordinate {self.i} out of range")
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.shape != (self.M_grid,) * self.d or not np.all(np.abs(beta) == 1.0):
            raise InvalidInputError(f"beta must be a ±1 array of shape {(self.M_grid,) * self.d}")
        self.beta = beta

    @cached_property
    def _expr(self) -> sympy.Expr:
        zs = symbols(self.d)
        r2 = sum(z ** 2 for z in zs)
        return zs[self.i] * sympy.exp(1 - 1 / (1 - 9 * r2))

    def _profile(self, alpha: Tuple[int, ...], z: np.ndarray) -> np.ndarray:
        fn = self._compiled.get(alpha)
        if fn is None:
            expr = self._expr
            for var, k in zip(symbols(self.d), alpha):
                if k:
                    expr = sympy.diff(expr, var, k)
            fn = sympy.lambdify(symbols(self.d), expr, modules="numpy")
            self._compiled[alpha] = fn
        out = np.zeros(z.shape[0])
        inside = np.sum(z * z, axis=1) < 1.0 / 9.0
        if inside.any():
            zi = z[inside]
            vals = fn(*[zi[:, j] for j in range(self.d)])
            out[inside] = np.broadcast_to(np.asarray(vals, dtype=np.float64), (zi.shape[0],))
        return out

    @cached_property
    def scale(self) -> float:
        per_axis = {1: 20001, 2: 401}.get(self.d, 61)
        axis = np.linspace(-1.0 / 3.0, 1.0 / 3.0, per_axis)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        z = np.stack([m.reshape(-1) for m in mesh], axis=1)
        peak = max(float(np.max(np.abs(self._profile(a, z)))) for a in multi_indices(self.d, self.n))
        # margin for maxima between sample nodes
        return 1.02 * peak

    def centers(self) -> np.ndarray:
        """x_θ = (θ − ½)/M for θ ∈ {1..M}^d, row-major in θ."""
        idx = np.stack(np.meshgrid(*([np.arange(self.M_grid)] * self.d), indexing="ij"), -1)
        return (idx.reshape(-1, self.d) + 0.5) / self.M_grid

    def derivative(self, alpha: Sequence[int], x: np.ndarray) -> np.ndarray:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.d or sum(alpha) > self.n:
            raise InvalidInputError(f"multi-index {alpha} not available (d={self.d}, n={self.n})")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        theta = np.clip(np.floor(x * self.M_grid), 0, self.M_grid - 1).astype(np.int64)
        z = self.M_grid * (x - (theta + 0.5) / self.M_grid)
        signs = self.beta[tuple(theta.T)]
        factor = float(self.M_grid) ** (sum(alpha) - self.n) / self.scale
        return factor * signs * self._profile(alpha, z)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.derivative((0,) * self.d, x)

    def sign_witness(self) -> np.ndarray:
        """sign D_i h_β(x_θ) at every center, row-major in θ."""
        e = tuple(1 if j == self.i else 0 for j in range(self.d))
        return np.sign(self.derivative(e, self.centers()))

    def flipped(self, theta: Sequence[int]) -> "BumpGrid":
        beta = self.beta.copy()
        beta[tuple(theta)] *= -1.0
        return BumpGrid(self.M_grid, self.d, self.n, beta, self.i)

    def max_derivative(self, per_axis: int = 0) -> Dict[Tuple[int, ...], float]:
        """Sampled sup |D^α h_β| on a uniform grid of [0, 1]^d for every |α| ≤ n."""
        per_axis = per_axis or {1: 20000, 2: 300}.get(self.d, 40)
        axis = (np.arange(per_axis) + 0.5) / per_axis
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        x = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return {a: float(np.max(np.abs(self.derivative(a, x)))) for a in multi_indices(self.d, self.n)}


def bump_grid(M_grid: int, d: int, n: int, beta: Optional[np.ndarray] = None,
              i: int = 0, seed: int = 0) -> BumpGrid:
    """Bump family h_β; a random ±1 sign map is drawn from ``seed`` when β is omitted."""
    if beta is None:
        beta = np.where(task_rng(seed, M_grid, d).random((M_grid,) * d) < 0.5, -1.0, 1.0)
    return BumpGrid(M_grid, d, n, np.asarray(beta, dtype=np.float64), i)
