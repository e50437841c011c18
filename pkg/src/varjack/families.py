"""Built-in function families and JSON-compatible config loading.

Each family maps atom ids to real values through a value table (``values``),
either one list shared by all coordinates or one list per coordinate.  Without
a table the atom id itself is the value.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import CoordFunction, FiniteDistribution, ProductSpace


def _value_table(values, n: int, max_atom: int) -> np.ndarray:
    if values is None:
        return np.tile(np.arange(max_atom + 1, dtype=float), (n, 1))
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (n, 1))
    if arr.shape[0] != n:
        raise ValueError(f"value table has {arr.shape[0]} rows for {n} coordinates")
    return arr


def _lookup(table: np.ndarray, arr: np.ndarray) -> np.ndarray:
    return table[np.arange(table.shape[0]), arr]


def additive(n: int, weights=None, values=None, max_atom: int = 1) -> CoordFunction:
    table = _value_table(values, n, max_atom)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    return CoordFunction(
        n, lambda a: _lookup(table, a) @ w, label="additive",
        permutation_symmetric=weights is None,
        params={"family": "additive"},
    )


def product(n: int, coords=None, values=None, max_atom: int = 1, label="product") -> CoordFunction:
    """Product of the values of ``coords`` (all coordinates by default)."""
    table = _value_table(values, n, max_atom)
    idx = np.arange(n) if coords is None else np.asarray(coords, dtype=int)
    zero_one = values is None and max_atom == 1
    return CoordFunction(
        n, lambda a: np.prod(_lookup(table, a)[..., idx], axis=-1), label=label,
        boolean_increments=zero_one, params={"family": label},
    )


def parity(n: int, values=(-1.0, 1.0)) -> CoordFunction:
    f = product(n, values=values, label="parity")
    return CoordFunction(n, f.evaluator, label="parity", permutation_symmetric=True,
                         params={"family": "parity"})


def prefix_product(n: int, m: int | None = None, values=None) -> CoordFunction:
    """x_1 * ... * x_m, with m = n // 2 by default."""
    m = n // 2 if m is None else m
    f = product(n, coords=range(m), values=values)
    return CoordFunction(n, f.evaluator, label=f"prefix_product({m})",
                         boolean_increments=f.boolean_increments,
                         params={"family": "prefix_product", "m": m})


def dictator(n: int, i: int = 0) -> CoordFunction:
    return CoordFunction(n, lambda a: a[..., i].astype(float), label=f"dictator({i})",
                         boolean_increments=True, params={"family": "dictator"})


def tribes(n: int, width: int) -> CoordFunction:
    """OR of ANDs over consecutive blocks of ``width`` 0/1 coordinates."""
    if n % width:
        raise ValueError("tribes width must divide n")

    def evaluator(a):
        blocks = a.reshape(a.shape[:-1] + (n // width, width))
        return np.any(np.all(blocks == 1, axis=-1), axis=-1).astype(float)

    return CoordFunction(n, evaluator, label=f"tribes({width})", boolean_increments=True,
                         params={"family": "tribes", "width": width})


def multilinear(n: int, coeffs: dict, values=None, max_atom: int = 1) -> CoordFunction:
    """Sum over subsets T of c_T * prod_{i in T} v_i(x_i); ``coeffs`` maps bitmask -> c."""
    table = _value_table(values, n, max_atom)
    items = [(int(m), float(c)) for m, c in coeffs.items()]
    sels = [np.array([(m >> i) & 1 for i in range(n)], dtype=bool) for m, _ in items]

    def evaluator(a):
        v = _lookup(table, a)
        out = np.zeros(a.shape[:-1])
        for (mask, c), sel in zip(items, sels):
            out = out + c * np.prod(np.where(sel, v, 1.0), axis=-1)
        return out

    return CoordFunction(n, evaluator, label="multilinear",
                         params={"family": "multilinear", "terms": len(items)})


def constant(n: int, c: float = 0.0) -> CoordFunction:
    return CoordFunction(n, lambda a: np.full(a.shape[:-1], float(c)), label="constant",
                         permutation_symmetric=True, boolean_increments=True,
                         params={"family": "constant"})


def random_multilinear(space: ProductSpace, rng: np.random.Generator, density=0.6) -> CoordFunction:
    """Random coefficients on random subsets with random value tables (test instances)."""
    n = space.n
    coeffs = {}
    for mask in range(1 << n):
        if rng.random() < density:
            coeffs[mask] = float(rng.normal())
    max_atom = max(c.max_atom for c in space.coords)
    values = rng.normal(size=(n, max_atom + 1))
    return multilinear(n, coeffs, values=values, max_atom=max_atom)


# -- config loading ---------------------------------------------------------

def space_from_config(cfg: dict) -> ProductSpace:
    if "coords" in cfg:
        coords = []
        for c in cfg["coords"]:
            probs = c["probs"]
            atoms = c.get("atoms", list(range(len(probs))))
            coords.append(FiniteDistribution(tuple(atoms), tuple(probs),
                                             exact=c.get("exact", False)))
        return ProductSpace(tuple(coords))
    n = int(cfg["n"])
    if "probs" in cfg:
        probs = cfg["probs"]
        if probs and isinstance(probs[0], (list, tuple)):
            return ProductSpace(tuple(FiniteDistribution.from_probs(p) for p in probs))
        return ProductSpace.iid(FiniteDistribution.from_probs(probs), n)
    if "p" in cfg:
        return ProductSpace.iid(FiniteDistribution.bernoulli(float(cfg["p"])), n)
    return ProductSpace.iid(FiniteDistribution.uniform(int(cfg.get("alphabet", 2))), n)


def function_from_config(cfg: dict, space: ProductSpace) -> CoordFunction:
    from . import asymptotics, lcs

    n = space.n
    family = cfg.get("family", "additive")
    values = cfg.get("values")
    max_atom = max(c.max_atom for c in space.coords)
    if family == "additive":
        return additive(n, cfg.get("weights"), values, max_atom)
    if family == "parity":
        return parity(n, values if values is not None else (-1.0, 1.0))
    if family == "product":
        return product(n, cfg.get("coords"), values, max_atom)
    if family in ("prefix_product", "product-of-prefix"):
        return prefix_product(n, cfg.get("m"), values)
    if family in ("multilinear", "multilinear-with-coefficients"):
        coeffs = {int(k): v for k, v in cfg["coeffs"].items()}
        return multilinear(n, coeffs, values, max_atom)
    if family == "dictator":
        return dictator(n, int(cfg.get("i", 0)))
    if family == "tribes":
        return tribes(n, int(cfg["width"]))
    if family == "constant":
        return constant(n, float(cfg.get("c", 0.0)))
    if family == "lcs":
        return lcs.lcs_function(n, cfg.get("x_len"))
    if family == "paired_lcs":
        return lcs.paired_lcs_function(n)
    if family == "gaussian_poly":
        G = asymptotics.PolynomialG(tuple(cfg["coeffs"]))
        return asymptotics.rademacher_sum_function(G, n)
    raise ValueError(f"unknown function family {family!r}")


def load_config(source) -> dict:
    if isinstance(source, dict):
        return source
    text = Path(source).read_text()
    return json.loads(text)


def load_instance(source) -> tuple[ProductSpace, CoordFunction]:
    cfg = load_config(source)
    space = space_from_config(cfg["space"])
    return space, function_from_config(cfg.get("function", {}), space)


def rademacher(n: int) -> ProductSpace:
    """Fair coordinates on atoms {0, 1}; pair with value table (-1, 1)."""
    return ProductSpace.iid(FiniteDistribution.bernoulli(0.5), n)

