"""Finite product spaces, functions on them, and the resampling operator.

A configuration is a length-``n`` integer vector of atom ids; batches of
configurations are arrays of shape ``(..., n)``.  Subsets of coordinates are
plain integer bitmasks (bit ``i`` set means coordinate ``i`` belongs to the
subset).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

PROB_SUM_TOL = 1e-12
DEFAULT_MAX_STATE_BITS = 20


class InvalidMaskError(ValueError):
    pass


class SizeError(ValueError):
    """Raised when a product space is too large for exact enumeration."""


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_from_indices(indices: Sequence[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def indices_from_mask(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def check_mask(mask: int, n: int) -> int:
    mask = int(mask)
    if mask < 0 or mask >> n:
        raise InvalidMaskError(f"mask {mask:#x} has bits outside [0, {n})")
    return mask


def submasks(mask: int):
    """Yield every subset of ``mask`` (including 0 and ``mask`` itself)."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def mask_to_bool(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)


@dataclass(frozen=True)
class FiniteDistribution:
    """Law of one coordinate: distinct integer atoms with probabilities.

    ``exact`` marks dyadic probabilities, which lets the exact engine use a
    tighter tolerance.
    """

    atoms: tuple[int, ...]
    probs: tuple[float, ...]
    exact: bool = False

    def __post_init__(self):
        atoms = tuple(int(a) for a in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        if not atoms:
            raise ValueError("distribution needs at least one atom")
        if len(set(atoms)) != len(atoms):
            raise ValueError(f"atoms must be distinct, got {atoms}")
        if any(a < 0 for a in atoms):
            raise ValueError("atom ids must be non-negative integers")
        if len(probs) != len(atoms):
            raise ValueError("atoms and probs differ in length")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise ValueError(f"probabilities must be finite and >= 0, got {probs}")
        if abs(math.fsum(probs) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def uniform(cls, k: int) -> "FiniteDistribution":
        exact = k & (k - 1) == 0
        return cls(tuple(range(k)), (1.0 / k,) * k, exact=exact)

    @classmethod
    def bernoulli(cls, p: float) -> "FiniteDistribution":
        """Atoms (0, 1) with P(1) = p."""
        return cls((0, 1), (1.0 - p, p), exact=_is_dyadic(p))

    @classmethod
    def from_probs(cls, probs: Sequence[float], exact: bool | None = None):
        probs = tuple(float(p) for p in probs)
        if exact is None:
            exact = all(_is_dyadic(p) for p in probs)
        return cls(tuple(range(len(probs))), probs, exact=exact)

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def max_atom(self) -> int:
        return max(self.atoms)

    def prob_of(self, atom: int) -> float:
        try:
            return self.probs[self.atoms.index(int(atom))]
        except ValueError:
            return 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-CDF sampling on the stored probability order."""
        cdf = np.cumsum(self.probs)
        u = rng.random(size)
        idx = np.searchsorted(cdf, u, side="right")
        np.minimum(idx, len(self.atoms) - 1, out=idx)
        return np.asarray(self.atoms, dtype=np.int64)[idx]


def _is_dyadic(p: float, max_bits: int = 30) -> bool:
    return float(p * (1 << max_bits)).is_integer()


@dataclass(frozen=True)
class ProductSpace:
    coords: tuple[FiniteDistribution, ...]

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        if len(coords) < 1:
            raise ValueError("a product space needs at least one coordinate")

    @classmethod
    def iid(cls, dist: FiniteDistribution, n: int) -> "ProductSpace":
        return cls((dist,) * n)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def exact(self) -> bool:
        return all(c.exact for c in self.coords)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.coords)

    @property
    def state_bits(self) -> float:
        return sum(math.log2(c.size) for c in self.coords)

    def check_enumerable(self, max_state_bits: float = DEFAULT_MAX_STATE_BITS):
        if self.state_bits > max_state_bits + 1e-9:
            raise SizeError(
                f"product space needs {self.state_bits:.2f} state bits, "
                f"allowed {max_state_bits}"
            )

    def grid(self) -> np.ndarray:
        """All configurations in C order, shape ``(prod(shape), n)``."""
        axes = [np.asarray(c.atoms, dtype=np.int64) for c in self.coords]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def prob_vectors(self) -> list[np.ndarray]:
        return [np.asarray(c.probs, dtype=float) for c in self.coords]

    def weights(self) -> np.ndarray:
        """Probability of every grid configuration, shaped like ``shape``."""
        w = np.ones(())
        for p in self.prob_vectors():
            w = np.multiply.outer(w, p)
        return w

    def contains(self, config) -> bool:
        config = np.asarray(config)
        if config.shape != (self.n,):
            return False
        return all(int(v) in c.atoms for v, c in zip(config, self.coords))


@dataclass(frozen=True)
class CoordFunction:
    """A deterministic function of ``arity`` coordinates.

    ``evaluator`` takes an integer array of shape ``(..., arity)`` and returns
    real values of shape ``(...)``.  ``boolean_increments`` records that every
    single-coordinate flip changes the value by 0 or 1 in absolute value.
    """

    arity: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    permutation_symmetric: bool = False
    boolean_increments: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, configs) -> np.ndarray | float:
        arr = np.asarray(configs, dtype=np.int64)
        if arr.shape[-1] != self.arity:
            raise ValueError(
                f"{self.label or 'function'} expects {self.arity} coordinates, "
                f"got trailing dimension {arr.shape[-1]}"
            )
        out = np.asarray(self.evaluator(arr), dtype=float)
        if arr.ndim == 1:
            return float(out)
        return out

    @classmethod
    def from_scalar(cls, arity: int, fn: Callable[[np.ndarray], float], **kw):
        """Wrap a function of a single configuration."""

        def evaluator(arr):
            flat = arr.reshape(-1, arity)
            vals = np.fromiter((fn(row) for row in flat), dtype=float, count=len(flat))
            return vals.reshape(arr.shape[:-1])

        return cls(arity, evaluator, **kw)

    def table(self, space: ProductSpace) -> np.ndarray:
        """Values on the full grid of ``space``, shaped like ``space.shape``."""
        if space.n != self.arity:
            raise ValueError(f"arity {self.arity} does not match space with n={space.n}")
        vals = np.asarray(self(space.grid()), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{self.label or 'function'} is not finite on the support")
        return vals.reshape(space.shape)


class RandomSource:
    """Counter-based random stream keyed by ``(seed, stream)``.

    Two sources with the same key produce the same sequence.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, stream={self.stream})"


def resample(c, mask: int, replacement) -> np.ndarray:
    """Take coordinates in ``mask`` from ``replacement`` and the rest from ``c``."""
    c = np.asarray(c)
    replacement = np.asarray(replacement)
    if c.shape != replacement.shape:
        raise ValueError("configuration and replacement differ in shape")
    n = c.shape[-1]
    sel = mask_to_bool(check_mask(mask, n), n)
    return np.where(sel, replacement, c)


def resample_batch(c: np.ndarray, replacement: np.ndarray, sel: np.ndarray) -> np.ndarray:
    """Row-wise resampling with a boolean selector of shape ``(..., n)``."""
    return np.where(sel, replacement, c)


def delta_eval(f: CoordFunction, c, r, mask: int) -> float:
    """Inclusion-exclusion difference: sum over sub in mask of (-1)^|sub| f(c^sub)."""
    c = np.asarray(c)
    n = c.shape[-1]
    mask = check_mask(mask, n)
    if mask == 0:
        raise ValueError("delta over the empty set is undefined; evaluate f directly")
    subs = list(submasks(mask))
    sel = np.array([mask_to_bool(s, n) for s in subs])
    configs = np.where(sel, np.asarray(r), c)
    signs = np.array([-1.0 if popcount(s) & 1 else 1.0 for s in subs])
    vals = np.asarray(f(configs), dtype=float)
    return float(math.fsum(signs * vals))


def draw_config(space: ProductSpace, rng: RandomSource | np.random.Generator, size=None):
    """Independent draws from each coordinate law.

    With ``size=None`` a single configuration of shape ``(n,)`` is returned,
    otherwise an array of shape ``(size, n)``.
    """
    gen = rng.generator if isinstance(rng, RandomSource) else rng
    count = 1 if size is None else int(size)
    cols = [c.sample(gen, count) for c in space.coords]
    out = np.stack(cols, axis=-1)
    return out[0] if size is None else out
