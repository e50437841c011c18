"""Gaussian limits for Rademacher sums, the Hoeffding construction, and the
hypercontractive gap integral.

For S = G((X_1 + ... + X_n) / sqrt(n)) with Rademacher X_i, iterated
differences only depend on how many signs are fixed, so J_k and K_k reduce to
one-dimensional binomial sums.  As n grows they approach
eta_k = E[G^(k)(Z)^2] and theta_k = (E G^(k)(Z))^2 for standard normal Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

from .exact import decompose
from .model import CoordFunction, FiniteDistribution, ProductSpace


def binom_weights(m: int) -> np.ndarray:
    """P(sum of m fair signs = m - 2j), j = 0..m."""
    if m <= 60:
        return np.array([math.comb(m, j) for j in range(m + 1)], dtype=float) / 2.0 ** m
    j = np.arange(m + 1)
    logw = (math.lgamma(m + 1) - np.array([math.lgamma(i + 1) + math.lgamma(m - i + 1) for i in j])
            - m * math.log(2.0))
    return np.exp(logw)


def gaussian_moment(p: int) -> int:
    """E Z^p for standard normal Z: (p-1)!! for even p, 0 for odd p."""
    if p % 2:
        return 0
    out = 1
    for q in range(p - 1, 0, -2):
        out *= q
    return out


@dataclass(frozen=True)
class PolynomialG:
    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs) or (0.0,)
        while len(c) > 1 and c[-1] == 0.0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def derivative(self, k: int = 1) -> "PolynomialG":
        if k > self.degree:
            return PolynomialG((0.0,))
        return PolynomialG(tuple(P.polyder(self.coeffs, k)))

    def square(self) -> "PolynomialG":
        return PolynomialG(tuple(P.polymul(self.coeffs, self.coeffs)))

    def gaussian_mean(self) -> float:
        return math.fsum(c * gaussian_moment(j) for j, c in enumerate(self.coeffs))

    def gaussian_variance(self) -> float:
        m = self.gaussian_mean()
        return self.square().gaussian_mean() - m * m


@dataclass
class GaussianTargets:
    eta: np.ndarray
    theta: np.ndarray
    variance: float
    residuals: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= 1e-12 for v in self.residuals.values())


def gaussian_targets(G: PolynomialG, kmax: int | None = None) -> GaussianTargets:
    """eta_k and theta_k for k = 1..kmax, with the finite series identities checked.

    Residuals are relative to max(1, largest term involved).
    """
    kmax = G.degree if kmax is None else kmax
    if kmax < 1:
        kmax = 1
    d = max(G.degree, kmax)
    eta = np.zeros(d + 1)
    theta = np.zeros(d + 1)
    for k in range(1, d + 1):
        g = G.derivative(k)
        eta[k] = g.square().gaussian_mean()
        theta[k] = g.gaussian_mean() ** 2
    var = G.gaussian_variance()
    fact = [math.factorial(i) for i in range(d + 2)]
    e = [eta[i] / fact[i] for i in range(d + 1)]
    t = [theta[i] / fact[i] for i in range(d + 1)]
    scale = max(1.0, abs(var), max(e[1:], default=0.0))
    res = {
        "series_eta": abs(var - math.fsum((-1) ** (i - 1) * e[i] for i in range(1, d + 1))) / scale,
        "series_theta": abs(var - math.fsum(t[1:])) / scale,
    }
    for i in range(1, d + 1):
        res[f"eta_from_theta[{i}]"] = abs(e[i] - math.fsum(math.comb(j, i) * t[j] for j in range(i, d + 1))) / scale
        rest = math.fsum((-1) ** (j - 1) * e[j] for j in range(1, i + 1))
        rest += (-1) ** i * math.fsum(math.comb(j - 1, i) * t[j] for j in range(i + 1, d + 1))
        res[f"restKder[{i}]"] = abs(var - rest) / scale
        # sandwich at truncation order i (the term of order i + 1 vanishes beyond the degree)
        e_next = e[i + 1] if i + 1 <= d else 0.0
        t_next = t[i + 1] if i + 1 <= d else 0.0
        mid_j = (-1) ** i * (var - math.fsum((-1) ** (j - 1) * e[j] for j in range(1, i + 1)))
        mid_k = var - math.fsum(t[1: i + 1])
        res[f"sandwich_eta[{i}]"] = max(0.0, t_next - mid_j, mid_j - e_next) / scale
        res[f"sandwich_theta[{i}]"] = max(0.0, t_next - mid_k, mid_k - e_next) / scale
    for a in (0.0, 0.25, 0.5, 0.75, 1.0):
        tr = math.fsum((-1) ** (i - 1) * a ** i * e[i] + (1 - a) ** i * t[i] for i in range(1, d + 1))
        res[f"troncder[a={a}]"] = abs(var - tr) / scale
    return GaussianTargets(eta[1: kmax + 1].copy(), theta[1: kmax + 1].copy(), var, res)


# -- Rademacher sums --------------------------------------------------------------

def rademacher_sum_function(G: PolynomialG, n: int) -> CoordFunction:
    """S(x) = G(sum_i (2 x_i - 1) / sqrt(n)) on 0/1 coordinates."""
    root = math.sqrt(n)

    def evaluator(a):
        return G((2 * a.sum(axis=-1) - n) / root)

    return CoordFunction(n, evaluator, label=f"G(sum/sqrt({n}))", permutation_symmetric=True,
                         params={"family": "gaussian_poly", "coeffs": list(G.coeffs)})


def rademacher_space(n: int) -> ProductSpace:
    return ProductSpace.iid(FiniteDistribution.bernoulli(0.5), n)


def rademacher_jackknife(G: PolynomialG, n: int, kmax: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(J_k(n), K_k(n)) for k = 1..kmax through binomial sums over the free signs."""
    kmax = n if kmax is None else kmax
    if not 1 <= kmax <= n:
        raise ValueError(f"kmax={kmax} outside [1, {n}]")
    root = math.sqrt(n)
    J = np.zeros(kmax)
    K = np.zeros(kmax)
    for k in range(1, min(kmax, G.degree) + 1):
        # k-th differences of a polynomial of degree < k vanish identically
        m = n - k
        w = binom_weights(m)
        r = m - 2.0 * np.arange(m + 1)
        coef = np.array([math.comb(k, i) * (-1) ** i for i in range(k + 1)], dtype=float) / 2.0 ** k
        shifts = 2.0 * np.arange(k + 1) - k
        vals = G((shifts[:, None] + r[None, :]) / root)  # (k+1, m+1)
        diff = coef @ vals
        gbar = vals @ w
        scale = math.comb(n, k) * math.factorial(k)
        J[k - 1] = scale * float(np.dot(w, diff * diff))
        K[k - 1] = scale * float(np.dot(coef, gbar)) ** 2
    return J, K


def convergence_table(G: PolynomialG, ns, kmax: int) -> list[dict]:
    tg = gaussian_targets(G, kmax)
    rows = []
    for n in ns:
        J, K = rademacher_jackknife(G, int(n), min(kmax, int(n)))
        for k in range(1, len(J) + 1):
            rows.append({"n": int(n), "k": k, "J": J[k - 1], "eta": tg.eta[k - 1],
                         "K": K[k - 1], "theta": tg.theta[k - 1],
                         "gap_J": abs(J[k - 1] - tg.eta[k - 1]), "gap_K": abs(K[k - 1] - tg.theta[k - 1])})
    return rows


def gaps_nonincreasing(rows: list[dict], tol: float = 1e-12) -> list[tuple[int, str]]:
    """(k, column) pairs whose gap grows somewhere along increasing n."""
    bad = []
    ks = sorted({r["k"] for r in rows})
    for k in ks:
        seq = sorted((r for r in rows if r["k"] == k), key=lambda r: r["n"])
        for col in ("gap_J", "gap_K"):
            g = [r[col] for r in seq]
            if any(b > a * (1 + 1e-9) + tol for a, b in zip(g, g[1:])):
                bad.append((k, col))
    return bad


# -- attaining prescribed K_k ----------------------------------------------------------

@dataclass(frozen=True)
class HoeffdingSpec:
    targets: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(a) for a in self.targets)
        object.__setattr__(self, "targets", t)
        if not t:
            raise ValueError("need at least one target")
        for k, a in enumerate(t, 1):
            if not math.isfinite(a) or a < 0:
                raise ValueError(f"target K_{k} = {a} must be finite and >= 0")

    @property
    def n(self) -> int:
        return len(self.targets)

    def amplitudes(self) -> np.ndarray:
        n = self.n
        return np.array([math.sqrt(a / (math.factorial(k) * math.comb(n, k)))
                         for k, a in enumerate(self.targets, 1)])


def elementary_symmetric(v: np.ndarray) -> np.ndarray:
    """e_0..e_n of the last axis, shape (..., n + 1), by the O(n^2) recurrence."""
    n = v.shape[-1]
    e = np.zeros(v.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        e[..., 1: i + 2] = e[..., 1: i + 2] + v[..., i: i + 1] * e[..., 0: i + 1]
    return e


def hoeffding_construct(spec: HoeffdingSpec, verify: bool = True, max_verify_n: int = 8):
    """S = sum_k A_k e_k(x) on Rademacher signs with A_k = sqrt(a_k / (k! C(n, k))).

    Returns the function and, when ``verify`` and n is small enough, the
    exact-engine K_k values with their largest deviation from the targets.
    """
    n = spec.n
    A = spec.amplitudes()

    def evaluator(a):
        e = elementary_symmetric(2.0 * a - 1.0)
        return e[..., 1:] @ A

    f = CoordFunction(n, evaluator, label="hoeffding", permutation_symmetric=True,
                      params={"family": "hoeffding", "targets": list(spec.targets)})
    report = {"n": n, "amplitudes": A.tolist(), "verified": False}
    if verify and n <= max_verify_n:
        _, r = decompose(rademacher_space(n), f)
        K = np.array([r.Kp[k - 1] * math.factorial(k) for k in range(1, n + 1)])
        report.update({"verified": True, "K": K.tolist(),
                       "max_residual": float(np.max(np.abs(K - np.asarray(spec.targets))))})
    return f, report


# -- hypercontractive gap integral -------------------------------------------------------

HYPER_MAX_N = 40
HYPER_LOWER = 2 * math.exp(-1) * math.log(2)


class QuadratureError(RuntimeError):
    pass


@dataclass
class HyperResult:
    n: int
    R: float
    abserr: float
    evaluations: int

    @property
    def ratio(self) -> float:
        return self.R / math.sqrt(self.n)

    def to_row(self) -> dict:
        return {"n": self.n, "R": self.R, "R_over_sqrt_n": self.ratio, "abserr": self.abserr,
                "evaluations": self.evaluations, "lower_bound": HYPER_LOWER}


def hyper_gap_ratio(n: int, epsabs: float = 1e-10, max_err: float = 1e-8) -> HyperResult:
    """R(n) = sqrt(2) int_0^{1/2} (sum_i L_i e^{-L_i t} / n)^{1/2} t^{-1/2} dt, L_i = 2^{i-1}.

    With t = u^2 the integrand becomes smooth:
    R = 2 sqrt(2) int_0^{1/sqrt 2} (sum_i L_i e^{-L_i u^2} / n)^{1/2} du.
    Breakpoints sit at u = L_i^{-1/2}, where each exponential turns off.
    """
    if not 1 <= n <= HYPER_MAX_N:
        raise ValueError(f"n={n} outside [1, {HYPER_MAX_N}]")
    L = 2.0 ** np.arange(n)
    top = 1 / math.sqrt(2)

    def integrand(u):
        return math.sqrt(float(np.sum(L * np.exp(-L * u * u))) / n)

    pts = [float(x) for x in L ** -0.5 if 0 < x < top]
    val, err, info = integrate.quad(integrand, 0.0, top, points=pts or None, epsabs=epsabs,
                                    epsrel=1e-12, limit=500, full_output=1)[:3]
    R = 2 * math.sqrt(2) * val
    err = 2 * math.sqrt(2) * err
    if err > max_err:
        raise QuadratureError(f"quadrature error {err:.3g} above {max_err:.3g} for n={n}")
    return HyperResult(n, R, err, int(info["neval"]))
