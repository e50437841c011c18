"""Seeded, sharded Monte Carlo estimators.

Sampling is cut into shards of fixed size; shard ``i`` draws from
``RandomSource(seed, i)``.  Shards may run on several threads, but the shard
layout and the merge order depend only on ``samples``, so results do not
depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import CoordFunction, ProductSpace, RandomSource, draw_config

SHARD_SIZE = 2048
Z95 = 1.96


@dataclass(frozen=True)
class EstimatorConfig:
    samples: int
    seed: int = 0
    streams: int = 1
    shard_size: int = SHARD_SIZE

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError(f"need at least 2 samples, got {self.samples}")
        if self.streams < 1:
            raise ValueError("streams must be >= 1")
        if self.shard_size < 1:
            raise ValueError("shard_size must be >= 1")

    def with_samples(self, samples: int) -> "EstimatorConfig":
        return EstimatorConfig(samples, self.seed, self.streams, self.shard_size)


@dataclass
class Estimate:
    quantity: str
    mean: float
    stderr: float
    count: int
    k: int | None = None
    seed: int | None = None
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)

    def z_score(self, target: float) -> float:
        d = self.mean - target
        if self.stderr == 0:
            return 0.0 if d == 0 else math.copysign(math.inf, d)
        return d / self.stderr

    def within(self, target: float, sigmas: float = 4.0) -> bool:
        return abs(self.mean - target) <= sigmas * self.stderr

    def scaled(self, c: float, quantity: str | None = None) -> "Estimate":
        return Estimate(quantity or self.quantity, self.mean * c, self.stderr * abs(c), self.count,
                        self.k, self.seed, self.flags, dict(self.extra))

    def to_row(self) -> dict:
        lo, hi = self.ci95
        row = {"quantity": self.quantity, "k": self.k, "mean": self.mean, "stderr": self.stderr,
               "count": self.count, "ci95_lo": lo, "ci95_hi": hi, "seed": self.seed,
               "flags": ";".join(self.flags)}
        row.update(self.extra)
        return row


def summarize(quantity: str, values: np.ndarray, cfg: EstimatorConfig | None = None,
              k: int | None = None, nonnegative: bool = False, **extra) -> Estimate:
    """Sample mean and its standard error from i.i.d. unbiased contributions."""
    values = np.asarray(values, dtype=float)
    count = values.size
    if count < 2:
        raise ValueError("at least two contributions are needed for a standard error")
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(count))
    flags = []
    if nonnegative and mean < 0:
        flags.append("negative_estimate")
    return Estimate(quantity, mean, stderr, count, k, None if cfg is None else cfg.seed,
                    tuple(flags), extra)


def shard_sizes(samples: int, shard_size: int) -> list[int]:
    full, rest = divmod(samples, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def run_sharded(cfg: EstimatorConfig, kernel: Callable[[np.random.Generator, int], np.ndarray],
                samples: int | None = None) -> np.ndarray:
    """Concatenate ``kernel(rng, m)`` over shards in shard order.

    ``kernel`` must return an array whose first axis has length ``m``.
    """
    sizes = shard_sizes(cfg.samples if samples is None else samples, cfg.shard_size)

    def job(i):
        return np.asarray(kernel(RandomSource(cfg.seed, i).generator, sizes[i]))

    if cfg.streams == 1 or len(sizes) == 1:
        parts = [job(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=cfg.streams) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    return np.concatenate(parts, axis=0)


def map_streams(cfg: EstimatorConfig, fn: Callable[[np.random.Generator, int], object], count: int) -> list:
    """``[fn(rng_i, i) for i in range(count)]`` with stream ``i`` for task ``i``."""

    def job(i):
        return fn(RandomSource(cfg.seed, i).generator, i)

    if cfg.streams == 1 or count == 1:
        return [job(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=cfg.streams) as pool:
        return list(pool.map(job, range(count)))


def _prefix_selectors(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """Ranks of a uniform random ordering of the coordinates, one per row."""
    return np.argsort(rng.random((m, n)), axis=1).argsort(axis=1)


def estimate_variance(space: ProductSpace, f: CoordFunction, cfg: EstimatorConfig) -> Estimate:
    """Unbiased sample variance of i.i.d. evaluations.

    The standard error is that of the mean of (S - S')^2 / 2 over independent
    pairs, computed from the same draws reshaped into pairs.
    """

    def kernel(rng, m):
        return np.asarray(f(draw_config(space, rng, m)), dtype=float)

    vals = run_sharded(cfg, kernel)
    var = float(np.var(vals, ddof=1))
    half = vals.size // 2
    if half >= 2:
        pair = 0.5 * (vals[:half] - vals[half:2 * half]) ** 2
        stderr = float(np.std(pair, ddof=1) / math.sqrt(half))
    else:
        stderr = 0.0
    return Estimate("variance", var, stderr, vals.size, seed=cfg.seed,
                    extra={"mean_S": float(np.mean(vals))})


def b_k_samples(space: ProductSpace, f: CoordFunction, k: int, rng: np.random.Generator, m: int) -> np.ndarray:
    """S(X) (S^{i_1..i_{k-1}} - S^{i_1..i_k}) for a random ordering per row."""
    n = space.n
    x = draw_config(space, rng, m)
    xp = draw_config(space, rng, m)
    rank = _prefix_selectors(rng, m, n)
    s = np.asarray(f(x), dtype=float)
    a = np.where(rank < k - 1, xp, x)
    b = np.where(rank < k, xp, x)
    return s * (np.asarray(f(a), dtype=float) - np.asarray(f(b), dtype=float))


def estimate_b_k(space: ProductSpace, f: CoordFunction, k: int, cfg: EstimatorConfig) -> Estimate:
    if not 1 <= k <= space.n:
        raise ValueError(f"k={k} outside [1, {space.n}]")
    vals = run_sharded(cfg, lambda rng, m: b_k_samples(space, f, k, rng, m))
    return summarize("B", vals, cfg, k=k, nonnegative=True)


def estimate_b_all(space: ProductSpace, f: CoordFunction, cfg: EstimatorConfig) -> list[Estimate]:
    """Every B_k from one ordering per sample (estimates are correlated across k)."""
    n = space.n

    def kernel(rng, m):
        x = draw_config(space, rng, m)
        xp = draw_config(space, rng, m)
        rank = _prefix_selectors(rng, m, n)
        vals = np.empty((m, n + 1))
        for j in range(n + 1):
            vals[:, j] = f(np.where(rank < j, xp, x))
        return vals[:, :1] * (vals[:, :-1] - vals[:, 1:])

    vals = run_sharded(cfg, kernel)
    return [summarize("B", vals[:, k - 1], cfg, k=k, nonnegative=True) for k in range(1, n + 1)]


def paired_square_mean(sampler: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]],
                       cfg: EstimatorConfig, quantity: str = "paired_square_mean") -> Estimate:
    """Unbiased estimate of E_J[(E[D | J])^2] from products D * D'.

    ``sampler(rng, m)`` returns two length-``m`` arrays of effects that are
    conditionally independent given a shared index drawn per row.
    """

    def kernel(rng, m):
        d1, d2 = sampler(rng, m)
        return np.asarray(d1, dtype=float) * np.asarray(d2, dtype=float)

    return summarize(quantity, run_sharded(cfg, kernel), cfg, nonnegative=True)


def grouped_square_mean(effects: np.ndarray, quantity: str = "grouped_square_mean",
                        cfg: EstimatorConfig | None = None) -> Estimate:
    """Average over groups j of an unbiased estimate of (E D_j)^2.

    ``effects`` has shape ``(J, R)``: R >= 2 i.i.d. replicas of the effect for
    each of J fixed indices.  Per group the U-statistic
    ((sum D)^2 - sum D^2) / (R (R - 1)) is unbiased for (E D_j)^2; its
    variance is estimated by the jackknife over replicas.
    """
    effects = np.asarray(effects, dtype=float)
    J, R = effects.shape
    if R < 3:
        raise ValueError("need at least 3 replicas per index for a jackknife stderr")
    s = effects.sum(axis=1)
    q = (effects ** 2).sum(axis=1)
    u = (s * s - q) / (R * (R - 1))
    # leave-one-out U-statistics
    s_loo = s[:, None] - effects
    q_loo = q[:, None] - effects ** 2
    u_loo = (s_loo ** 2 - q_loo) / ((R - 1) * (R - 2))
    var_j = (R - 1) / R * np.sum((u_loo - u_loo.mean(axis=1, keepdims=True)) ** 2, axis=1)
    mean = float(np.mean(u))
    stderr = float(math.sqrt(np.sum(var_j)) / J)
    flags = ("negative_estimate",) if mean < 0 else ()
    return Estimate(quantity, mean, stderr, J * R, seed=None if cfg is None else cfg.seed,
                    flags=flags, extra={"indices": J, "replicas": R})
