"""Variance experiments for the LCS of two random words.

Coordinates of the underlying product space are the ``n`` letters of X
followed by the ``n`` letters of Y.  Perturbation estimators sample an index
and compare LCS values of configurations that differ only there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exact import decompose
from .lcs import lcs_batch, lcs_function, paired_lcs_function
from .model import DEFAULT_MAX_STATE_BITS, FiniteDistribution, ProductSpace
from .montecarlo import (
    Estimate, EstimatorConfig, estimate_variance, grouped_square_mean, map_streams,
    paired_square_mean, run_sharded, summarize,
)

EXACT_MAX_N = 4


class HypothesisError(ValueError):
    """Raised when the inputs do not certify the hypothesis a bound needs."""


@dataclass(frozen=True)
class LcsModel:
    n: int
    x_dist: FiniteDistribution
    y_dist: FiniteDistribution

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("word length must be >= 1")

    @classmethod
    def uniform(cls, n: int, alphabet: int = 2) -> "LcsModel":
        d = FiniteDistribution.uniform(alphabet)
        return cls(n, d, d)

    @classmethod
    def bernoulli(cls, n: int, p: float) -> "LcsModel":
        d = FiniteDistribution.bernoulli(p)
        return cls(n, d, d)

    @property
    def symmetric(self) -> bool:
        """Both words uniform over the same alphabet, which forces B_{2n}(2n) = 0."""
        return (self.x_dist.atoms == self.y_dist.atoms
                and len(set(self.x_dist.probs)) == 1 and len(set(self.y_dist.probs)) == 1)

    def space(self) -> ProductSpace:
        return ProductSpace((self.x_dist,) * self.n + (self.y_dist,) * self.n)

    def function(self):
        return lcs_function(2 * self.n)

    def coord_dist(self, j: int) -> FiniteDistribution:
        return self.x_dist if j < self.n else self.y_dist

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """``m`` configurations of shape ``(m, 2n)``: X letters then Y letters."""
        x = self.x_dist.sample(rng, (m, self.n))
        y = self.y_dist.sample(rng, (m, self.n))
        return np.concatenate([x, y], axis=1)

    def lcs(self, z: np.ndarray) -> np.ndarray:
        return lcs_batch(z[:, : self.n], z[:, self.n:])

    def describe(self) -> dict:
        return {"n": self.n, "x_atoms": list(self.x_dist.atoms), "x_probs": list(self.x_dist.probs),
                "y_atoms": list(self.y_dist.atoms), "y_probs": list(self.y_dist.probs)}


@dataclass(frozen=True)
class PerturbationSpec:
    w1: tuple[int, ...]
    w2: tuple[int, ...]
    replicas: int = 1000
    paired: bool = False

    def __post_init__(self):
        w1 = tuple(int(a) for a in self.w1)
        w2 = tuple(int(a) for a in self.w2)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        if len(w1) != len(w2) or not w1:
            raise ValueError("w1 and w2 must be non-empty words of equal length")
        if self.replicas < 3:
            raise ValueError("need at least 3 replicas per index")
        if self.paired and len(w1) != 2:
            raise ValueError("paired mode takes one letter pair (x, y) per word")

    @property
    def block_len(self) -> int:
        return 1 if self.paired else len(self.w1)

    @classmethod
    def pair_formula(cls, replicas: int = 1000) -> "PerturbationSpec":
        """Letter pairs (X_j, Y_j) replaced by (0, 0) versus (0, 1)."""
        return cls((0, 0), (0, 1), replicas, paired=True)


@dataclass
class LcsVarianceReport:
    n: int
    variance: Estimate
    bound_general: float
    bound_halved: float
    symmetric: bool
    exact: bool
    passed: bool
    lower_bounds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return self.bound_halved if self.symmetric else self.bound_general

    def rows(self) -> list[dict]:
        row = {"n": self.n, "variance": self.variance.mean, "stderr": self.variance.stderr,
               "count": self.variance.count, "exact": self.exact,
               "bound_general": self.bound_general, "bound_halved": self.bound_halved,
               "symmetric": self.symmetric, "bound_applied": self.bound, "pass": self.passed}
        row.update(self.lower_bounds)
        return [row]


def _exact_ok(model: LcsModel, max_n: int) -> bool:
    return model.n <= max_n and model.space().state_bits <= DEFAULT_MAX_STATE_BITS


def exact_decomposition(model: LcsModel):
    return decompose(model.space(), model.function())


# -- estimators -----------------------------------------------------------------

def b1_lcs_estimate(model: LcsModel, cfg: EstimatorConfig) -> Estimate:
    """B_1(2n): resample one uniformly chosen letter and average Delta^2 / 2."""
    N = 2 * model.n

    def kernel(rng, m):
        z = model.sample(rng, m)
        j = rng.integers(0, N, size=m)
        fresh = model.sample(rng, m)
        rows = np.arange(m)
        z2 = z.copy()
        z2[rows, j] = fresh[rows, j]
        d = model.lcs(z).astype(float) - model.lcs(z2)
        return 0.5 * d * d

    est = summarize("B1", run_sharded(cfg, kernel), cfg, k=1, nonnegative=True)
    est.extra["n"] = model.n
    return est


def _binary_p(d: FiniteDistribution) -> float:
    if d.atoms != (0, 1):
        raise ValueError(f"binary alphabet on atoms (0, 1) required, got atoms {d.atoms}")
    return d.probs[1]


def blast_lcs_estimate(model: LcsModel, cfg: EstimatorConfig) -> Estimate:
    """B_{2n}(2n) = (1/2n) sum_k (E[LCS(Z^{k,1}) - LCS(Z^{k,0})])^2 p_k (1 - p_k).

    Each sample draws an index k and two independent backgrounds; the product
    of their effects is unbiased for the squared mean effect.  ``extra``
    carries the variance lower bound 2n * B_{2n}.
    """
    px, py = _binary_p(model.x_dist), _binary_p(model.y_dist)
    n, N = model.n, 2 * model.n
    pq = np.array([px * (1 - px)] * n + [py * (1 - py)] * n)

    def sampler(rng, m):
        k = rng.integers(0, N, size=m)
        rows = np.arange(m)
        out = []
        for _ in range(2):
            z = model.sample(rng, m)
            z[rows, k] = 1
            hi = model.lcs(z)
            z[rows, k] = 0
            out.append((hi - model.lcs(z)).astype(float))
        return out[0] * pq[k], out[1]

    if np.all(pq == 0):
        est = Estimate("B2n", 0.0, 0.0, cfg.samples, k=N, seed=cfg.seed)
    else:
        est = paired_square_mean(sampler, cfg, "B2n")
        est.k = N
    est.extra.update({"n": n, "lower_bound_var": N * est.mean, "lower_bound_stderr": N * est.stderr})
    return est


def _block_effects(model: LcsModel, spec: PerturbationSpec, cfg: EstimatorConfig) -> np.ndarray:
    """Array ``(J, R)`` of effects LCS(w1 at index j) - LCS(w2 at index j)."""
    n, R = model.n, spec.replicas
    if spec.paired:
        J = n
    else:
        b = spec.block_len
        if n % b:
            raise ValueError(f"block length {b} does not divide n={n}")
        J = n // b
    w1 = np.asarray(spec.w1)
    w2 = np.asarray(spec.w2)

    def effects(rng, j):
        z = model.sample(rng, R)
        if spec.paired:
            z[:, j], z[:, n + j] = w1[0], w1[1]
            a = model.lcs(z)
            z[:, j], z[:, n + j] = w2[0], w2[1]
        else:
            sl = slice(j * spec.block_len, (j + 1) * spec.block_len)
            z[:, sl] = w1
            a = model.lcs(z)
            z[:, sl] = w2
        return (a - model.lcs(z)).astype(float)

    return np.array(map_streams(cfg, effects, J))


def cell_statistic(model: LcsModel, spec: PerturbationSpec, cfg: EstimatorConfig) -> Estimate:
    """(1/J) sum_j (E[LCS(Z^{j,w1}) - LCS(Z^{j,w2})])^2 over the J blocks.

    Blocks are consecutive letters of X (block mode) or single letter pairs
    (X_j, Y_j) (paired mode).  In paired mode with uniform binary letters,
    ``extra["B_n"]`` is statistic / 4, the last B of the paired-letter space.
    """
    if spec.w1 == spec.w2:
        J = model.n if spec.paired else model.n // spec.block_len
        est = Estimate("cell_statistic", 0.0, 0.0, J * spec.replicas, seed=cfg.seed)
    else:
        est = grouped_square_mean(_block_effects(model, spec, cfg), "cell_statistic", cfg)
    est.extra.update({"n": model.n, "b": spec.block_len, "w1": "".join(map(str, spec.w1)),
                      "w2": "".join(map(str, spec.w2))})
    if spec.paired:
        est.extra["B_n"] = est.mean / 4
        est.extra["B_n_stderr"] = est.stderr / 4
    return est


def paired_space(n: int) -> ProductSpace:
    """Uniform letter pairs, atom id 2 * x + y."""
    return ProductSpace.iid(FiniteDistribution.uniform(4), n)


def paired_exact_b_last(n: int) -> float:
    _, r = decompose(paired_space(n), paired_lcs_function(n))
    return float(r.B[-1])


def figure1_table(ns, spec: PerturbationSpec, cfg: EstimatorConfig, alphabet: int = 2) -> list[Estimate]:
    """Block statistic on uniform words for each n (seed shifted per n)."""
    out = []
    for n in ns:
        sub = EstimatorConfig(cfg.samples, (cfg.seed + 1_000_003 * int(n)) & 0xFFFFFFFFFFFFFFFF,
                              cfg.streams, cfg.shard_size)
        out.append(cell_statistic(LcsModel.uniform(int(n), alphabet), spec, sub))
    return out


def trend_slope(xs, ests: list[Estimate]) -> tuple[float, float]:
    """Weighted least-squares slope of estimate means against ``xs`` and its stderr."""
    x = np.asarray(xs, dtype=float)
    y = np.array([e.mean for e in ests])
    s = np.array([e.stderr for e in ests])
    w = 1.0 / np.maximum(s, 1e-300) ** 2
    xm = np.sum(w * x) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * y) / sxx)
    return slope, float(math.sqrt(1.0 / sxx))


def floor_fit(xs, ests: list[Estimate]) -> tuple[float, float, float]:
    """Weighted fit of ``delta + c / n``; returns (delta, stderr of delta, c).

    Edge blocks carry larger effects and their weight in the average decays
    like 1/n, so ``delta`` is the part of the statistic that does not vanish.
    """
    x = np.asarray(xs, dtype=float)
    y = np.array([e.mean for e in ests])
    w = 1.0 / np.maximum(np.array([e.stderr for e in ests]), 1e-300) ** 2
    X = np.stack([np.ones_like(x), 1.0 / x], axis=1)
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    return float(beta[0]), float(math.sqrt(cov[0, 0])), float(beta[1])


# -- bounds ---------------------------------------------------------------------

@dataclass
class OmittedLetterResult:
    n: int
    p: float
    delta_e: Estimate
    delta_e_squared: Estimate
    b2n_linear: float
    b2n_quadratic: float
    bound_linear: float
    bound_quadratic: float
    variance: Estimate | None = None

    def rows(self) -> list[dict]:
        row = {"n": self.n, "p": self.p, "delta_e": self.delta_e.mean,
               "delta_e_stderr": self.delta_e.stderr,
               "delta_e_sq": self.delta_e_squared.mean, "delta_e_sq_stderr": self.delta_e_squared.stderr,
               "b2n_linear": self.b2n_linear, "b2n_quadratic": self.b2n_quadratic,
               "var_bound_linear": self.bound_linear, "var_bound_quadratic": self.bound_quadratic,
               "default_form": "quadratic"}
        if self.variance is not None:
            row.update({"variance": self.variance.mean, "variance_stderr": self.variance.stderr})
        return [row]


def omitted_letter_bound(model: LcsModel, cfg: EstimatorConfig, omitted: int | None = None,
                         with_variance: bool = True) -> OmittedLetterResult:
    """Lower bounds on B_{2n}(2n) and Var LC_n from a letter that X uses and Y never does.

    With p = P(X_i = omitted) and dE = E LC_n - E LC_{n-1,n} (drop the last
    letter of X), both (1/4) dE p and (1/4) dE^2 p are reported for B_{2n};
    the variance bounds multiply by 2n.  dE^2 is estimated from products of
    two independent coupled differences.
    """
    omitted = model.x_dist.max_atom if omitted is None else int(omitted)
    p = model.x_dist.prob_of(omitted)
    if p <= 0:
        raise HypothesisError(f"letter {omitted} has probability 0 in the X alphabet")
    if model.y_dist.prob_of(omitted) > 0:
        raise HypothesisError(f"letter {omitted} also occurs in the Y alphabet")
    n = model.n

    def diff(rng, m):
        z = model.sample(rng, m)
        full = model.lcs(z)
        short = lcs_batch(z[:, : n - 1], z[:, n:]) if n > 1 else np.zeros(m, dtype=np.int64)
        return (full - short).astype(float)

    def kernel(rng, m):
        return np.stack([diff(rng, m), diff(rng, m)], axis=1)

    d = run_sharded(cfg, kernel)
    de = summarize("delta_E", d.mean(axis=1), cfg)
    de2 = summarize("delta_E_squared", d[:, 0] * d[:, 1], cfg)
    var = None
    if with_variance:
        var = estimate_variance(model.space(), model.function(), cfg)
    N = 2 * n
    return OmittedLetterResult(
        n, p, de, de2,
        b2n_linear=0.25 * de.mean * p, b2n_quadratic=0.25 * de2.mean * p,
        bound_linear=0.25 * de.mean * p * N, bound_quadratic=0.25 * de2.mean * p * N,
        variance=var,
    )


def exact_delta_e(model: LcsModel) -> float:
    """E LC_n - E LC_{n-1,n} by enumeration."""
    space = model.space()
    space.check_enumerable()
    grid = space.grid()
    w = space.weights().ravel()
    n = model.n
    full = lcs_batch(grid[:, :n], grid[:, n:])
    short = lcs_batch(grid[:, : n - 1], grid[:, n:]) if n > 1 else np.zeros(len(grid), dtype=np.int64)
    return float(np.sum(w * (full - short)))


def alphabet_constant(d: FiniteDistribution) -> float:
    """1 - sum p^2, the probability that two independent letters differ."""
    return 1.0 - math.fsum(p * p for p in d.probs)


def upper_bound_report(model: LcsModel, cfg: EstimatorConfig, exact_max_n: int = EXACT_MAX_N,
                       sigmas: float = 4.0) -> LcsVarianceReport:
    """Compare Var LC_n with the Efron-Stein type upper bounds.

    General: n (c_x + c_y) / 2 with c = 1 - sum p^2.  When B_{2n}(2n) = 0
    (uniform letters on a common alphabet) the bound halves to n (c_x + c_y) / 4,
    which is n/4 for fair binary letters.
    """
    cx, cy = alphabet_constant(model.x_dist), alphabet_constant(model.y_dist)
    general = model.n * (cx + cy) / 2
    halved = general / 2
    symmetric = model.symmetric
    bound = halved if symmetric else general
    meta = {"model": model.describe(), "seed": cfg.seed, "samples": cfg.samples}
    if _exact_ok(model, exact_max_n):
        t, r = exact_decomposition(model)
        var = Estimate("variance", t.variance, 0.0, len(model.space().grid()), seed=None,
                       extra={"method": "exact"})
        lower = {"b2n_exact": float(r.B[-1]), "lower_bound_2nB2n": 2 * model.n * float(r.B[-1])}
        return LcsVarianceReport(model.n, var, general, halved, symmetric, True,
                                 t.variance <= bound + t.tol, lower, meta)
    var = estimate_variance(model.space(), model.function(), cfg)
    var.extra["method"] = "monte_carlo"
    return LcsVarianceReport(model.n, var, general, halved, symmetric, False,
                             var.mean <= bound + sigmas * var.stderr, {}, meta)


def varsup_constant(p0: float, gamma_half_upper: float) -> float:
    """2 p0 (1 - p0) ((g(p0) - gamma_half_upper) / (1/2 - p0))^2 with g(p) = p^2 + (1-p)^2.

    g(p0) is a certified lower bound on the LCS constant at bias p0 and
    ``gamma_half_upper`` an upper bound at p = 1/2; the value is a lower bound
    on limsup Var LC_n / n.
    """
    if not 0 < p0 < 0.5:
        raise ValueError(f"p0 must lie in (0, 1/2), got {p0}")
    low = p0 * p0 + (1 - p0) ** 2
    if low < gamma_half_upper:
        raise HypothesisError(
            f"lower bound {low:.6g} at p0={p0} does not exceed the upper bound "
            f"{gamma_half_upper:.6g} at 1/2")
    slope = (low - gamma_half_upper) / (0.5 - p0)
    return 2 * p0 * (1 - p0) * slope * slope
