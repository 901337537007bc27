"""
Training with the H¹ empirical loss and the generalization-gap experiment.

R_S(θ) = (1/M) Σ_i [ (f − φ)(x_i)² + |∇(f − φ)(x_i)|² ]

Parameter gradients are back-propagated by hand through both the value
path and the input-gradient path of the network.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .complexity import ArchSpec
from .errors import DivergenceError, InvalidInputError, SobonetError
from .metrics import GridSpec, RateFit, rate_fit
from .network import RELU, Network, activate, activation_curvature, activation_slope
from .parallel import run_keyed, task_rng
from .targets import TargetFunction

logger = logging.getLogger(__name__)

DIVERGENCE_LOSS = 1e6
DENSE_FACTOR = 16
_DENSE_CAP = 2 ** 22
_NUDGE = 0.6180339887 * 2.0 ** -30
_PROGRESS_EVERY = 100


@dataclass(frozen=True)
class TrainConfig:
    arch: ArchSpec
    target: TargetFunction
    samples: int = 256
    loss: str = "h1"
    rate: float = 0.05
    decay: float = 0.999
    steps: int = 500
    seed: int = 0
    clamp_bound: float = 1.0

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise InvalidInputError(f"sample count must be >= 1, got {self.samples}")
        if self.steps < 0:
            raise InvalidInputError(f"steps must be >= 0, got {self.steps}")
        if self.loss not in ("h1", "l2"):
            raise InvalidInputError(f"loss must be h1 or l2, got {self.loss!r}")
        if not self.rate > 0 or not 0 < self.decay <= 1:
            raise InvalidInputError("rate must be positive and decay in (0, 1]")
        if self.arch.d != self.target.d:
            raise InvalidInputError(
                f"architecture input {self.arch.d} does not match target dimension {self.target.d}"
            )
        if self.loss == "h1" and self.target.n < 1:
            raise InvalidInputError("the h1 loss needs a target with first derivatives")


@dataclass
class TrainResult:
    net: Network
    trajectory: List[float]
    R_S: float
    R_D: float
    gap: float
    wall_clock: float
    samples: int
    seed: int
    sup_net: float = 0.0

    def row(self) -> Dict[str, float]:
        return {"M": self.samples, "R_S": self.R_S, "R_D": self.R_D, "gap": self.gap}


# ------------------------------------------------------------------- loss
def _forward(net: Network, x: np.ndarray):
    """Per-layer (input, input-gradient, z, gz) records of the forward pass."""
    p, d = x.shape
    h = x
    g = np.broadcast_to(np.eye(d), (p, d, d)).transpose(0, 2, 1).copy()  # (P, units, d)
    tape = []
    for idx, layer in enumerate(net.layers):
        z = h @ layer.weights.T + layer.bias
        gz = np.einsum("on,pnk->pok", layer.weights, g)
        tape.append((h, g, z, gz))
        if idx == len(net.layers) - 1:
            break
        codes = layer.codes
        h = activate(z, codes)
        g = activation_slope(z, codes, np.zeros(codes.size, dtype=bool))[:, :, None] * gz
    return tape


def _breakpoint_rows(net: Network, tape) -> np.ndarray:
    hit = np.zeros(tape[0][0].shape[0], dtype=bool)
    for layer, (_, _, z, _) in zip(net.layers[:-1], tape[:-1]):
        hit |= np.any((z == 0.0) & (layer.codes == RELU), axis=1)
    return hit


def _nudged(x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    x = x.copy()
    x[rows] = np.clip(x[rows] + _NUDGE, 0.0, 1.0 - 2.0 ** -40)
    return x


def loss_grad(net: Network, f: TargetFunction, samples: np.ndarray,
              kind: str = "h1") -> Tuple[float, np.ndarray]:
    """Empirical loss and its gradient in parameter order (see Network.parameters)."""
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if x.shape[1] != net.input_dim or net.output_dim != 1:
        raise InvalidInputError("samples must match the input dimension of a scalar network")
    tape = _forward(net, x)
    hit = _breakpoint_rows(net, tape)
    if hit.any():
        x = _nudged(x, hit)
        tape = _forward(net, x)
        if _breakpoint_rows(net, tape).any():
            raise InvalidInputError("samples keep landing on relu breakpoints after re-jittering")
    P = x.shape[0]
    e0 = tape[-1][2][:, 0] - f.value(x)
    loss = float(np.sum(e0 * e0))
    dz = (2.0 / P) * e0[:, None]
    dgz = np.zeros((P, 1, x.shape[1]))
    if kind == "h1":
        e1 = tape[-1][3][:, 0, :] - f.gradient(x)
        loss += float(np.sum(e1 * e1))
        dgz = (2.0 / P) * e1[:, None, :]
    elif kind != "l2":
        raise InvalidInputError(f"unknown loss {kind!r}")
    loss /= P

    grads: List[np.ndarray] = []
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        h_in, g_in, _, _ = tape[idx]
        gw = dz.T @ h_in + np.einsum("pok,pnk->on", dgz, g_in)
        gb = dz.sum(axis=0)
        grads.append(np.concatenate([gw.reshape(-1), gb]))
        if idx == 0:
            break
        dh = dz @ layer.weights
        dg = np.einsum("on,pok->pnk", layer.weights, dgz)
        prev = net.layers[idx - 1]
        _, _, z, gz = tape[idx - 1]
        codes = prev.codes
        d1 = activation_slope(z, codes, np.zeros(codes.size, dtype=bool))
        d2 = activation_curvature(z, codes)
        dz = dh * d1 + d2 * np.einsum("pnk,pnk->pn", dg, gz)
        dgz = dg * d1[:, :, None]
    return loss, np.concatenate(grads[::-1])


def h1_loss_grad(net: Network, f: TargetFunction, samples: np.ndarray) -> Tuple[float, np.ndarray]:
    """(1/M)Σ[|∇(f−φ)(x_i)|² + (f−φ)(x_i)²] and its parameter gradient."""
    return loss_grad(net, f, samples, "h1")


def l2_loss_grad(net: Network, f: TargetFunction, samples: np.ndarray) -> Tuple[float, np.ndarray]:
    return loss_grad(net, f, samples, "l2")


def population_risk(net: Network, f: TargetFunction, kind: str, samples: int) -> float:
    """R_D on a jittered midpoint grid with 16× the per-axis density of the sample set."""
    d = net.input_dim
    per_axis = DENSE_FACTOR * math.ceil(samples ** (1.0 / d))
    if per_axis ** d > _DENSE_CAP:
        per_axis = int(_DENSE_CAP ** (1.0 / d))
        logger.warning("dense risk grid capped at %d points per axis", per_axis)
    x = GridSpec(d, points_per_axis=per_axis).points()
    jet = net.jet(x, 1 if kind == "h1" else 0)
    keep = ~jet.breakpoints
    e0 = jet.values[:, 0] - f.value(x)
    risk = e0 * e0
    if kind == "h1":
        e1 = jet.gradients[:, 0, :] - f.gradient(x)
        risk = risk + np.sum(e1 * e1, axis=1)
    return float(np.mean(risk[keep]))


# ------------------------------------------------------------------ train
def draw_samples(config: TrainConfig, *key: int) -> np.ndarray:
    return task_rng(config.seed, 1, config.samples, *key).uniform(0.0, 1.0, (config.samples, config.arch.d))


def train(config: TrainConfig, key: Sequence[int] = (), samples: Optional[np.ndarray] = None) -> TrainResult:
    """Full-batch gradient descent θ ← θ − rate·decay^t·∇R_S(θ)."""
    started = time.perf_counter()
    theta = config.arch.init(task_rng(config.seed, 0, *key))
    x = draw_samples(config, *key) if samples is None else np.asarray(samples, dtype=np.float64)
    net = config.arch.network(theta)
    loss, grad = loss_grad(net, config.target, x, config.loss)
    trajectory = [loss]
    for step in range(config.steps):
        theta = theta - config.rate * config.decay ** step * grad
        net = net.with_parameters(theta)
        loss, grad = loss_grad(net, config.target, x, config.loss)
        trajectory.append(loss)
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceError(f"training diverged at step {step} (loss {loss:.3g})", trajectory)
        if (step + 1) % _PROGRESS_EVERY == 0:
            logger.info("step %d/%d: R_S %.6g", step + 1, config.steps, loss)
    if trajectory[-1] > trajectory[0]:
        logger.warning("R_S rose from %.6g to %.6g; consider a smaller rate", trajectory[0], trajectory[-1])
    r_d = population_risk(net, config.target, config.loss, config.samples)
    grid = GridSpec(config.arch.d, points_per_axis=64 if config.arch.d == 1 else 16).points()
    return TrainResult(net, trajectory, loss, r_d, r_d - loss, time.perf_counter() - started,
                       config.samples, config.seed, float(np.max(np.abs(net(grid)))))


# -------------------------------------------------------------------- gap
@dataclass
class GapTable:
    """Per-M median and IQR of R_D(θ_S) − R_S(θ_S) over independent sample draws."""

    rows: List[Dict[str, float]]
    replica_rows: List[Dict[str, float]]
    slope: Optional[RateFit]
    note: str = ("median over finite replicas approximates the expectation over "
                 "sample draws; theta_D is not computed")
    failures: Dict[Tuple[int, int], str] = field(default_factory=dict)


def gap_experiment(base: TrainConfig, Ms: Sequence[int], replicas: int,
                   threads: int = 1) -> GapTable:
    Ms = [int(m) for m in Ms]
    if not Ms or any(b <= a for a, b in zip(Ms, Ms[1:])):
        raise InvalidInputError("Ms must be a non-empty increasing sequence")
    if replicas < 1:
        raise InvalidInputError("replicas must be >= 1")
    if replicas < 5:
        logger.warning("only %d replicas; medians and IQRs will be noisy", replicas)

    def run(key: Tuple[int, int]):
        M, r = key
        return train(replace(base, samples=M), key=(M, r))

    keys = [(M, r) for M in Ms for r in range(replicas)]
    results = run_keyed(run, keys, threads, return_exceptions=True)
    replica_rows: List[Dict[str, float]] = []
    failures: Dict[Tuple[int, int], str] = {}
    by_m: Dict[int, List[float]] = {M: [] for M in Ms}
    for (M, r), res in results:
        if isinstance(res, SobonetError):
            failures[(M, r)] = str(res)
            continue
        if isinstance(res, Exception):
            raise res
        by_m[M].append(res.gap)
        replica_rows.append({"M": M, "replica": r, "R_S": res.R_S, "R_D": res.R_D, "gap": res.gap})
    rows = []
    for M in Ms:
        gaps = np.array(by_m[M])
        if gaps.size == 0:
            raise DivergenceError(f"every replica failed at M={M}")
        q1, med, q3 = np.percentile(gaps, [25, 50, 75])
        rows.append({"M": M, "median_gap": float(med), "iqr": float(q3 - q1), "replicas": int(gaps.size)})
    slope = None
    pairs = [(r["M"], r["median_gap"]) for r in rows]
    if len(pairs) >= 3 and all(g > 0 for _, g in pairs):
        slope = rate_fit(pairs)
        logger.info("gap log-log slope %.3f (r2 %.3f)", slope.slope, slope.r2)
    else:
        logger.warning("gap slope not fitted: needs >= 3 Ms with positive median gaps")
    return GapTable(rows, replica_rows, slope, failures=failures)
