"""Longest common subsequence lengths.

``lcs_dp`` is the textbook dynamic program and serves as the definition.
``lcs_length`` uses the bit-parallel column update (Allison-Dix / Hyyro):
each column of the DP table is stored as a vector of 64-bit words holding
the positions where the row value increases, and one column step is

    U = V & match[y_j];  V = (V + U) | (V - U)

with multiword carry propagation.  Since ``U`` is a bitwise subset of ``V``,
``V - U`` never borrows and equals ``V & ~U``.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from numba import njit

from .model import CoordFunction

BRUTE_MAX_LEN = 12

_ONE = np.uint64(1)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


class AlphabetError(ValueError):
    pass


@njit(cache=True, nogil=True)
def _popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((v * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True, nogil=True)
def _lcs_bitpar(x, y, alpha):
    m = x.shape[0]
    if m == 0 or y.shape[0] == 0:
        return 0
    nw = (m + 63) // 64
    match = np.zeros((alpha, nw), dtype=np.uint64)
    for i in range(m):
        c = x[i]
        if c < alpha:
            match[c, i // 64] |= np.uint64(1) << np.uint64(i % 64)
    v = np.empty(nw, dtype=np.uint64)
    for w in range(nw):
        v[w] = np.uint64(0xFFFFFFFFFFFFFFFF)
    for j in range(y.shape[0]):
        c = y[j]
        if c >= alpha:
            continue
        carry = np.uint64(0)
        for w in range(nw):
            vw = v[w]
            u = vw & match[c, w]
            s = vw + u
            c1 = s < vw
            s2 = s + carry
            c2 = s2 < s
            v[w] = s2 | (vw & ~u)
            carry = np.uint64(1) if (c1 or c2) else np.uint64(0)
    zeros = 0
    for w in range(nw):
        vw = v[w]
        bits = m - 64 * w
        if bits < 64:
            vw |= ~((np.uint64(1) << np.uint64(bits)) - np.uint64(1))
        zeros += 64 - _popcount64(vw)
    return zeros


@njit(cache=True, nogil=True)
def _lcs_dp(x, y):
    m = x.shape[0]
    n = y.shape[0]
    prev = np.zeros(n + 1, dtype=np.int64)
    cur = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, m + 1):
        xi = x[i - 1]
        cur[0] = 0
        for j in range(1, n + 1):
            if xi == y[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[n]


@njit(cache=True, nogil=True)
def _lcs_batch(xs, ys, alpha):
    out = np.empty(xs.shape[0], dtype=np.int64)
    for r in range(xs.shape[0]):
        out[r] = _lcs_bitpar(xs[r], ys[r], alpha)
    return out


def _as_word(w) -> np.ndarray:
    if isinstance(w, str):
        return np.frombuffer(w.encode(), dtype=np.uint8).astype(np.int64) - ord("0")
    arr = np.asarray(w, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("a word must be one-dimensional")
    if arr.size and arr.min() < 0:
        raise AlphabetError("letters must be non-negative ids")
    return arr


def _check_alphabet(w: np.ndarray, alphabet: int | None):
    if alphabet is not None and w.size and w.max() >= alphabet:
        raise AlphabetError(f"letter {int(w.max())} outside alphabet of size {alphabet}")


def lcs_dp(x, y) -> int:
    """Reference dynamic program, O(|x||y|) time and O(|y|) memory."""
    return int(_lcs_dp(_as_word(x), _as_word(y)))


def lcs_length(x, y, x_alphabet: int | None = None, y_alphabet: int | None = None) -> int:
    """LCS length via the bit-parallel kernel.

    Words are sequences of non-negative letter ids, or strings of digits.  When
    alphabet sizes are given, letters are checked against them.
    """
    x = _as_word(x)
    y = _as_word(y)
    _check_alphabet(x, x_alphabet)
    _check_alphabet(y, y_alphabet)
    if x.size == 0 or y.size == 0:
        return 0
    alpha = int(max(x.max(), y.max())) + 1
    return int(_lcs_bitpar(x, y, alpha))


def lcs_batch(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Row-wise LCS of two integer arrays of shape ``(B, m)`` and ``(B, n)``."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    if xs.shape[0] != ys.shape[0]:
        raise ValueError("batches differ in length")
    if xs.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if xs.shape[1] == 0 or ys.shape[1] == 0:
        return np.zeros(xs.shape[0], dtype=np.int64)
    alpha = int(max(xs.max(), ys.max())) + 1
    return _lcs_batch(xs, ys, alpha)


def lcs_brute_oracle(x, y) -> int:
    """Exhaustive search over subsequences of ``x`` (test oracle)."""
    x = [int(a) for a in _as_word(x)]
    y = [int(a) for a in _as_word(y)]
    if len(x) > BRUTE_MAX_LEN:
        raise ValueError(f"brute-force oracle limited to |x| <= {BRUTE_MAX_LEN}")

    def is_subseq(sub):
        it = iter(y)
        return all(any(c == d for d in it) for c in sub)

    for k in range(min(len(x), len(y)), 0, -1):
        if any(is_subseq(sub) for sub in combinations(x, k)):
            return k
    return 0


def lcs_function(n: int, x_len: int | None = None) -> CoordFunction:
    """LCS of the first ``x_len`` coordinates against the remaining ones.

    With the default ``x_len = n // 2`` this is LC of two words of equal length
    seen as a function of ``n`` letters.
    """
    if x_len is None:
        if n % 2:
            raise ValueError("two equal words need an even number of coordinates")
        x_len = n // 2

    def evaluator(arr):
        flat = arr.reshape(-1, n)
        return lcs_batch(flat[:, :x_len], flat[:, x_len:]).astype(float).reshape(arr.shape[:-1])

    return CoordFunction(
        n, evaluator, label=f"lcs({x_len},{n - x_len})",
        boolean_increments=True, params={"family": "lcs", "x_len": x_len},
    )


def paired_lcs_function(n: int) -> CoordFunction:
    """LC_n as a function of the letter pairs Z_j = (X_j, Y_j), atom id 2*x + y."""

    def evaluator(arr):
        flat = arr.reshape(-1, n)
        return lcs_batch(flat >> 1, flat & 1).astype(float).reshape(arr.shape[:-1])

    return CoordFunction(n, evaluator, label=f"paired_lcs({n})", params={"family": "paired_lcs"})
