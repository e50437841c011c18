"""Exact enumeration of the B_k / jackknife decomposition on small product spaces.

Everything here is a functional of two tables indexed by coordinate subsets:

* ``corr[a] = E[S S^a] = E[(E^a S)^2]`` where ``E^a`` integrates out the
  coordinates in ``a``;
* ``components[T] = E[S_T^2]``, the squared norms of the Hoeffding (ANOVA)
  components ``S_T = prod_{i in T}(I - E_i) prod_{i not in T} E_i S``.

They are linked by ``corr[a] = sum over T disjoint from a of components[T]``.
With ``W_t`` the sum of components over ``|T| = t``, the iterated backward
differences of B are

    D^l B_k = sum_t W_t C(t, l+1) C(n-t, k-1) / (C(n, l+1) C(n-l-1, k-1)),

a non-negative combination, so complete monotonicity holds term by term.
The same quantities computed from ``corr`` differences are kept as
cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations

import numpy as np

from .model import (
    DEFAULT_MAX_STATE_BITS, CoordFunction, ProductSpace, SizeError, mask_to_bool,
    popcount, submasks,
)

DEFAULT_MAX_COORDS = 12
TOL = 1e-9
EXACT_TOL = 1e-12
MONOTONE_TOL = 1e-12


def _ratio(num: int, den: int) -> float:
    return float(Fraction(num, den))


def _level_of(n: int) -> np.ndarray:
    return np.array([popcount(m) for m in range(1 << n)], dtype=int)


# -- tables -------------------------------------------------------------------

def _subset_tables(a: np.ndarray, b: np.ndarray, probs: list[np.ndarray], center: bool) -> np.ndarray:
    """For every subset mask, E[P a * P b] where P projects each axis.

    Axis ``i`` in the mask is averaged out (``center=False``) or centered
    (``center=True``); axes outside the mask are kept (``center=False``) or
    averaged (``center=True``).  Bit ``i`` of the mask refers to axis ``i``.
    """
    n = a.ndim
    out = np.zeros(1 << n)
    w0 = np.ones(a.shape)
    for i, p in enumerate(probs):
        shape = [1] * n
        shape[i] = p.size
        w0 = w0 * p.reshape(shape)

    def rec(i, mask, x, y, w):
        if i == n:
            out[mask] = float(np.sum(w * x * y))
            return
        shape = [1] * n
        shape[i] = probs[i].size
        p = probs[i].reshape(shape)
        mx = np.sum(x * p, axis=i, keepdims=True)
        my = mx if y is x else np.sum(y * p, axis=i, keepdims=True)
        wr = np.sum(w, axis=i, keepdims=True)
        if center:
            rec(i + 1, mask, mx, my, wr)
            cy = None if y is x else y - my
            cx = x - mx
            rec(i + 1, mask | (1 << i), cx, cx if cy is None else cy, w)
        else:
            rec(i + 1, mask, x, y, w)
            rec(i + 1, mask | (1 << i), mx, my, wr)

    rec(0, 0, a, b if b is not a else a, w0)
    return out


@dataclass(frozen=True)
class CorrelationTable:
    n: int
    corr: np.ndarray
    mean: float
    second_moment: float
    components: np.ndarray
    exact: bool = False
    label: str = ""

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    @property
    def variance(self) -> float:
        return float(self.corr[0] - self.corr[self.full])

    @property
    def level_sums(self) -> np.ndarray:
        """W_t = sum of Hoeffding components over |T| = t, t = 0..n."""
        lv = _level_of(self.n)
        return np.array([math.fsum(self.components[lv == t]) for t in range(self.n + 1)])

    @property
    def level_means(self) -> np.ndarray:
        """Average of corr over subsets of each size."""
        lv = _level_of(self.n)
        return np.array([math.fsum(self.corr[lv == g]) / math.comb(self.n, g)
                         for g in range(self.n + 1)])

    @property
    def tol(self) -> float:
        return EXACT_TOL if self.exact else TOL

    def corr_from_components(self) -> np.ndarray:
        """Zeta transform: corr[a] = sum_{T subset of complement(a)} components[T]."""
        out = np.zeros(1 << self.n)
        for a in range(1 << self.n):
            comp = self.full & ~a
            out[a] = math.fsum(self.components[s] for s in submasks(comp))
        return out


def _check_size(space: ProductSpace, max_state_bits, max_coords):
    space.check_enumerable(max_state_bits)
    if space.n > max_coords:
        raise SizeError(f"{space.n} coordinates requested, allowed {max_coords}")


def correlation_table(space: ProductSpace, f: CoordFunction, *,
                      max_state_bits: float = DEFAULT_MAX_STATE_BITS,
                      max_coords: int = DEFAULT_MAX_COORDS) -> CorrelationTable:
    """Exact ``corr[a] = E[(E^a S)^2]`` and Hoeffding components of ``S = f(X)``."""
    _check_size(space, max_state_bits, max_coords)
    values = f.table(space)
    return table_from_values(values, space, label=f.label)


def table_from_values(values: np.ndarray, space: ProductSpace, label: str = "") -> CorrelationTable:
    probs = space.prob_vectors()
    corr = _subset_tables(values, values, probs, center=False)
    comps = _subset_tables(values, values, probs, center=True)
    w = space.weights()
    mean = float(np.sum(w * values))
    second = float(np.sum(w * values * values))
    exact = space.exact and bool(np.all(values == np.round(values)))
    return CorrelationTable(space.n, corr, mean, second, comps, exact, label)


# -- B_k and its differences --------------------------------------------------

@dataclass
class DecompositionReport:
    n: int
    B: np.ndarray
    DB: list[np.ndarray]
    Jp: np.ndarray
    Kp: np.ndarray
    variance: float
    residuals: dict = field(default_factory=dict)
    exact: bool = False

    def db(self, l: int, k: int) -> float:
        """D^l B_k with 1-based k."""
        return float(self.DB[l][k - 1])

    @property
    def min_db(self) -> float:
        return float(min(np.min(row) for row in self.DB))

    def rows(self) -> list[dict]:
        out = []
        for k in range(1, self.n + 1):
            out.append({"k": k, "B": float(self.B[k - 1]), "Jp": float(self.Jp[k - 1]),
                        "Kp": float(self.Kp[k - 1]), "J": float(self.Jp[k - 1] * math.factorial(k)),
                        "K": float(self.Kp[k - 1] * math.factorial(k))})
        return out


def db_weight(n: int, t: int, l: int, k: int) -> float:
    """Weight of W_t in D^l B_k: probability that a random disjoint (A, B) pair
    with |A| = l+1, |B| = k-1 has A inside and B outside a fixed t-set."""
    return _ratio(math.comb(t, l + 1) * math.comb(n - t, k - 1),
                  math.comb(n, l + 1) * math.comb(n - l - 1, k - 1))


def b_and_derivatives(t: CorrelationTable) -> DecompositionReport:
    n = t.n
    W = t.level_sums
    DB = []
    for l in range(n):
        row = np.array([math.fsum(W[s] * db_weight(n, s, l, k) for s in range(l + 1, n + 1))
                        for k in range(1, n - l + 1)])
        DB.append(row)
    B = DB[0].copy()

    # cross-checks: B_k = m_{k-1} - m_k from corr, and D^l B_k - D^l B_{k+1} = D^{l+1} B_k
    m = t.level_means
    b_corr = m[:-1] - m[1:]
    scale = max(1.0, abs(t.variance), float(np.max(np.abs(t.corr))))
    db_corr = db_from_level_means(n, m)
    db_gap = max(float(np.max(np.abs(a - b))) for a, b in zip(db_corr, DB))
    rec = 0.0
    for l in range(n - 1):
        diff = DB[l][:-1] - DB[l][1:]
        rec = max(rec, float(np.max(np.abs(diff - DB[l + 1]))))
    Jp, Kp = _jk(n, DB)
    return DecompositionReport(
        n, B, DB, Jp, Kp, t.variance,
        residuals={"b_corr_vs_components": float(np.max(np.abs(b_corr - B))) / scale,
                   "db_corr_vs_components": db_gap / scale,
                   "db_recursion": rec / scale},
        exact=t.exact,
    )


def db_from_level_means(n: int, m: np.ndarray) -> list[np.ndarray]:
    """D^l B_k averaged over disjoint (A, B), |A| = l+1, |B| = k-1, of
    sum_{a subset of A} (-1)^|a| corr[a | B]; by symmetry of the average only
    the level means of corr enter."""
    return [np.array([math.fsum((-1) ** j * math.comb(l + 1, j) * m[k - 1 + j] for j in range(l + 2))
                      for k in range(1, n - l + 1)])
            for l in range(n)]


def _jk(n: int, DB: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    Jp = np.array([math.comb(n, k) * DB[k - 1][0] for k in range(1, n + 1)])
    Kp = np.array([math.comb(n, k) * DB[k - 1][n - k] for k in range(1, n + 1)])
    return Jp, Kp


def jackknife_from_table(r: DecompositionReport) -> tuple[np.ndarray, np.ndarray]:
    """J'_k = C(n,k) D^{k-1} B_1 and K'_k = C(n,k) D^{k-1} B_{n-k+1}."""
    return _jk(r.n, r.DB)


def decompose(space: ProductSpace, f: CoordFunction, **kw) -> tuple[CorrelationTable, DecompositionReport]:
    t = correlation_table(space, f, **kw)
    return t, b_and_derivatives(t)


# -- identities ---------------------------------------------------------------

@dataclass
class IdentityReport:
    tolerance: float
    entries: list[tuple[str, float, bool]] = field(default_factory=list)

    def add(self, name: str, residual: float, tol: float | None = None):
        tol = self.tolerance if tol is None else tol
        residual = float(residual)
        self.entries.append((name, residual, bool(residual <= tol)))

    def extend(self, other: "IdentityReport"):
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.entries)

    @property
    def max_residual(self) -> float:
        return max((r for _, r, _ in self.entries), default=0.0)

    def failures(self) -> list[tuple[str, float]]:
        return [(name, r) for name, r, ok in self.entries if not ok]

    def rows(self) -> list[dict]:
        return [{"identity": name, "residual": r, "pass": ok, "tolerance": self.tolerance}
                for name, r, ok in self.entries]


def _alt_j(Jp, k):
    """Var-free alternating partial sum J'_1 - J'_2 + ... + (-1)^{k-1} J'_k."""
    return math.fsum((-1) ** (j - 1) * Jp[j - 1] for j in range(1, k + 1))


def verify_identities(r: DecompositionReport, t: CorrelationTable, tol: float | None = None) -> IdentityReport:
    """Residuals of the variance identities, each normalised by max(1, scale)."""
    n = r.n
    var = t.variance
    Jp, Kp, B, DB = r.Jp, r.Kp, r.B, r.DB
    base = t.tol if tol is None else tol
    scale = max(1.0, abs(var), float(np.max(np.abs(Jp))))
    rep = IdentityReport(base)

    def add(name, resid):
        rep.add(name, abs(resid) / scale)

    add("telescoping", math.fsum(B) - var)
    rep.add("complete_monotonicity", max(0.0, -r.min_db), MONOTONE_TOL)
    for name, v in r.residuals.items():
        rep.add(name, v)
    add("egalJ_alternating", var - _alt_j(Jp, n))
    add("egalJ_K", var - math.fsum(Kp))

    for k in range(1, n + 1):
        lhs_j = var - _alt_j(Jp, k)  # Var - J'_1 + ... + (-1)^k J'_k
        rhs_j = 0.0
        rhs_k = 0.0
        if k < n:
            rhs_j = (-1) ** k * math.fsum(math.comb(n - i, k) * DB[k][i - 1] for i in range(1, n - k + 1))
            rhs_k = math.fsum(math.comb(j - 1, k) * DB[k][j - k - 1] for j in range(k + 1, n + 1))
        add(f"formJ[{k}]", lhs_j - rhs_j)
        lhs_k = var - math.fsum(Kp[:k])
        add(f"formK[{k}]", lhs_k - rhs_k)

        if k < n:
            mid = (-1) ** k * lhs_j
            rep.add(f"sandwichJ[{k}]", max(0.0, Kp[k] - mid, mid - Jp[k]) / scale)
            rep.add(f"sandwichK[{k}]", max(0.0, Kp[k] - lhs_k, lhs_k - Jp[k]) / scale)

        rest = _alt_j(Jp, k) + (-1) ** k * math.fsum(math.comb(j - 1, k) * Kp[j - 1] for j in range(k + 1, n + 1))
        add(f"restK[{k}]", var - rest)

        tr = math.fsum((-1) ** (i - 1) * _ratio(math.comb(k, i), math.comb(n, i)) * Jp[i - 1]
                       for i in range(1, k + 1))
        tr += math.fsum(_ratio(math.comb(n - k, i), math.comb(n, i)) * Kp[i - 1]
                        for i in range(1, n - k + 1))
        add(f"tronc[{k}]", var - tr)

        bj = math.fsum((-1) ** j * _ratio(math.comb(k - 1, j), math.comb(n, j + 1)) * Jp[j]
                       for j in range(k))
        add(f"invBJ[{k}]", B[k - 1] - bj)
        bk = math.fsum(_ratio(math.comb(n - k, j), math.comb(n, j + 1)) * Kp[j]
                       for j in range(n - k + 1))
        add(f"invBK[{k}]", B[k - 1] - bk)

        # inversion formula on the finite sequence B itself
        fwd = math.fsum((-1) ** j * math.comb(k - 1, j) * DB[j][0] for j in range(k))
        bwd = math.fsum(math.comb(n - k, j) * DB[j][n - j - 1] for j in range(n - k + 1))
        add(f"inversion_first[{k}]", B[k - 1] - fwd)
        add(f"inversion_last[{k}]", B[k - 1] - bwd)

    tf = t_family(t)
    add("ET_equals_var", tf.expected_T - var)
    add("T_levels_equal_B", float(np.max(np.abs(tf.b_levels - B))))
    return rep


# -- covariance, T_A, interpolation --------------------------------------------

def covariance_b(space: ProductSpace, f: CoordFunction, g: CoordFunction, **kw) -> np.ndarray:
    """B_k(S, T) from the polarized table E[S T^a] = E[E^a S E^a T]."""
    if f.arity != g.arity:
        raise ValueError(f"arity mismatch: {f.arity} vs {g.arity}")
    _check_size(space, kw.get("max_state_bits", DEFAULT_MAX_STATE_BITS),
                kw.get("max_coords", DEFAULT_MAX_COORDS))
    a = f.table(space)
    b = g.table(space)
    pcorr = _subset_tables(a, b, space.prob_vectors(), center=False)
    n = space.n
    lv = _level_of(n)
    m = np.array([math.fsum(pcorr[lv == s]) / math.comb(n, s) for s in range(n + 1)])
    return m[:-1] - m[1:]


def covariance(space: ProductSpace, f: CoordFunction, g: CoordFunction) -> float:
    w = space.weights()
    a = f.table(space)
    b = g.table(space)
    return float(np.sum(w * a * b) - np.sum(w * a) * np.sum(w * b))


@dataclass
class TFamily:
    expected_TA: np.ndarray  # indexed by mask; the full set carries 0
    expected_T: float
    b_levels: np.ndarray


def t_family(t: CorrelationTable) -> TFamily:
    n = t.n
    full = t.full
    eta = np.zeros(1 << n)
    et = []
    levels = np.zeros(n)
    for a in range(full):
        s = math.fsum(t.corr[a] - t.corr[a | (1 << j)] for j in range(n) if not (a >> j) & 1)
        eta[a] = 2.0 * s
        size = popcount(a)
        term = eta[a] / (2 * (n - size) * math.comb(n, size))
        et.append(term)
        levels[size] += term
    return TFamily(eta, math.fsum(et), levels)


def beta_integral(a: int, b: int) -> Fraction:
    """Integral over [0, 1] of x^a (1-x)^b."""
    return Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 1))


def interpolation_check(t: CorrelationTable, space: ProductSpace, f: CoordFunction,
                        tol: float | None = None) -> IdentityReport:
    """Variance through the uniform interpolation X^(alpha) between X and X'.

    rho(alpha) = E[S(X^(0)) S(X^(alpha))] = sum_g alpha^g (1-alpha)^(n-g) sum_{|c|=g} corr[c].
    For each coordinate i, the integrand E[d_iS(X^(0)) d_iS(X^(alpha))] is a
    polynomial in the same basis whose every surviving term carries a factor
    (1 - alpha); after dividing, it integrates exactly with Beta integrals.
    """
    n = t.n
    base = t.tol if tol is None else tol
    scale = max(1.0, abs(t.variance))
    rep = IdentityReport(base)
    var = t.variance
    lv = _level_of(n)

    rho0 = math.fsum(t.corr[lv == 0])
    rho1 = math.fsum(t.corr[lv == n])
    rep.add("varint", abs(rho0 - rho1 - var) / scale)

    values = f.table(space)
    probs = space.prob_vectors()
    total = []
    remainder = 0.0
    for i in range(n):
        shape = [1] * n
        shape[i] = probs[i].size
        d = values - np.sum(values * probs[i].reshape(shape), axis=i, keepdims=True)
        ci = _subset_tables(d, d, probs, center=False)
        # terms alpha^g (1-alpha)^(n-g); the g = n term has no (1-alpha) factor
        remainder = max(remainder, abs(ci[(1 << n) - 1]))
        for c in range(1 << n):
            if (c >> i) & 1:
                remainder = max(remainder, abs(ci[c]))
                continue
            g = lv[c]
            total.append(ci[c] * float(beta_integral(g, n - g - 1)))
    rep.add("varduni_remainder", remainder / scale)
    rep.add("varduni", abs(math.fsum(total) - var) / scale)

    r = b_and_derivatives(t)
    beta_sum = math.fsum(float(n * math.comb(n - 1, k) * beta_integral(k, n - 1 - k)) * r.B[k]
                         for k in range(n))
    rep.add("beta_binomial", abs(beta_sum - math.fsum(r.B)) / scale)
    return rep


# -- weak L1-L2 bound on the fair cube ------------------------------------------

@dataclass
class WeakTalagrandResult:
    variance: float
    rhs: float
    talagrand_sum: float
    norms: list[tuple[float, float]]
    passed: bool

    @property
    def ratio(self) -> float:
        return self.rhs / self.variance if self.variance > 0 else math.inf


def weak_talagrand_check(space: ProductSpace, f: CoordFunction, tol: float = 1e-12) -> WeakTalagrandResult:
    """Compare Var S with (1/4) sum_j (1 + 2/n - 2/(n ln 2) ln(|t_j|_2/|t_j|_1)) |t_j|_2^2.

    Requires fair 0/1 coordinates and increments t_j = S(x_j=0) - S(x_j=1)
    taking values in {-1, 0, 1}.  ``talagrand_sum`` is
    sum_j |t_j|_2^2 / (1 + ln(|t_j|_2/|t_j|_1)), the L1-L2 bound with constant 1.
    """
    for i, c in enumerate(space.coords):
        if c.atoms != (0, 1) or abs(c.probs[0] - 0.5) > 1e-15:
            raise ValueError(f"coordinate {i} is not a fair Bernoulli on atoms (0, 1)")
    n = space.n
    values = f.table(space)
    var = float(values.var())
    rhs_terms, tal_terms, norms = [], [], []
    for j in range(n):
        tau = np.take(values, 0, axis=j) - np.take(values, 1, axis=j)
        bad = np.abs(np.abs(tau) - np.round(np.abs(tau)).clip(0, 1)) > tol
        if np.any(bad) or np.any(np.abs(tau) > 1 + tol):
            raise ValueError(f"increment of coordinate {j} is not in {{-1, 0, 1}}")
        l1 = float(np.mean(np.abs(tau)))
        l2 = math.sqrt(float(np.mean(tau * tau)))
        norms.append((l1, l2))
        if l1 == 0.0:
            continue
        log_ratio = math.log(l2 / l1)
        rhs_terms.append((1 + 2 / n - 2 / (n * math.log(2)) * log_ratio) * l2 * l2)
        tal_terms.append(l2 * l2 / (1 + log_ratio))
    rhs = 0.25 * math.fsum(rhs_terms)
    return WeakTalagrandResult(var, rhs, math.fsum(tal_terms), norms, var <= rhs + tol)


# -- literal permutation-average oracles (independent route) ----------------------

LITERAL_MAX_COORDS = 5


def _moment_matrix(space: ProductSpace, f: CoordFunction) -> np.ndarray:
    """M[c, d] = E[S^c S^d] by direct enumeration of (X, X') pairs."""
    n = space.n
    if n > LITERAL_MAX_COORDS:
        raise SizeError(f"literal oracle limited to n <= {LITERAL_MAX_COORDS}")
    grid = space.grid()
    w = space.weights().ravel()
    N = len(grid)
    x = np.repeat(grid, N, axis=0)
    xp = np.tile(grid, (N, 1))
    pw = np.repeat(w, N) * np.tile(w, N)
    vals = np.empty((1 << n, N * N))
    for c in range(1 << n):
        vals[c] = f(np.where(mask_to_bool(c, n), xp, x))
    return (vals * pw) @ vals.T


def literal_b(space: ProductSpace, f: CoordFunction) -> np.ndarray:
    """B_k = E (1/n!) sum over orderings of S (S^{i_1..i_{k-1}} - S^{i_1..i_k})."""
    n = space.n
    M = _moment_matrix(space, f)
    B = np.zeros(n)
    perms = list(permutations(range(n)))
    for perm in perms:
        prefix = 0
        for k in range(n):
            nxt = prefix | (1 << perm[k])
            B[k] += M[0, prefix] - M[0, nxt]
            prefix = nxt
    return B / len(perms)


def literal_db(space: ProductSpace, f: CoordFunction) -> list[np.ndarray]:
    """D^l B_k = E 1/(2^{l+1} n!) sum over orderings of (Delta_A S)(Delta_A S)^B,
    A = {i_1..i_{l+1}}, B = {i_{l+2}..i_{k+l}}."""
    n = space.n
    M = _moment_matrix(space, f)
    perms = list(permutations(range(n)))
    out = []
    for l in range(n):
        row = np.zeros(n - l)
        for perm in perms:
            A = 0
            for i in perm[: l + 1]:
                A |= 1 << i
            subs = [(s, -1.0 if popcount(s) & 1 else 1.0) for s in submasks(A)]
            for k in range(1, n - l + 1):
                Bm = 0
                for i in perm[l + 1: k + l]:
                    Bm |= 1 << i
                acc = 0.0
                for s1, g1 in subs:
                    for s2, g2 in subs:
                        acc += g1 * g2 * M[s1, s2 | Bm]
                row[k - 1] += acc
        out.append(row / (len(perms) * 2 ** (l + 1)))
    return out
