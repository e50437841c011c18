"""Command line harness: ``varjack <subcommand> [options]``.

Exit status is 0 when every checked invariant holds, 1 when one fails (the
failing quantity is named on stderr) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import asymptotics as asy
from . import exact
from . import families as fam
from . import lcs_lab
from .model import FiniteDistribution, ProductSpace
from .montecarlo import EstimatorConfig, estimate_b_k, estimate_variance

SEED_ENV = "VARJACK_SEED"
INSTANCE_KEYS = ("space", "function")


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:  # pragma: no cover - running from a source tree
        return "0+unknown"


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(" ", "").split(",") if t]


def _word(text: str) -> tuple[int, ...]:
    text = str(text).strip()
    if "," in text:
        return tuple(_int_list(text))
    return tuple(int(c) for c in text)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise SystemExit(f"{SEED_ENV}={raw!r} is not an integer")


# -- output -----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def emit(args, rows: list[dict], extra_meta: dict | None = None):
    manifest = {
        "subcommand": args.command if not getattr(args, "lcs_command", None)
        else f"lcs {args.lcs_command}",
        "config": _resolved(args),
        "seed": args.seed,
        "version": _version(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra_meta:
        manifest["metadata"] = extra_meta
    if args.format == "json":
        text = json.dumps(_jsonable({"manifest": manifest, "rows": rows}), indent=2) + "\n"
    else:
        text = to_csv(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        if args.format == "csv":
            with open(args.out + ".manifest.json", "w") as fh:
                json.dump(_jsonable(manifest), fh, indent=2)
                fh.write("\n")
    else:
        sys.stdout.write(text)


def _resolved(args) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def fail(message: str) -> int:
    print(f"invariant failed: {message}", file=sys.stderr)
    return 1


# -- instances ---------------------------------------------------------------------

def _instance(args) -> tuple[ProductSpace, object]:
    if args.instance is not None:
        return fam.load_instance(args.instance)
    space_cfg = {"n": args.n}
    if args.p is not None:
        space_cfg["p"] = args.p
    else:
        space_cfg["alphabet"] = args.alphabet
    space = fam.space_from_config(space_cfg)
    fcfg = {"family": args.family}
    if args.family == "parity":
        fcfg["values"] = [-1.0, 1.0]
    return space, fam.function_from_config(fcfg, space)


def _cfg(args) -> EstimatorConfig:
    return EstimatorConfig(args.samples, args.seed, args.threads)


# -- subcommands ---------------------------------------------------------------------

def cmd_decompose(args) -> int:
    space, f = _instance(args)
    t, r = exact.decompose(space, f, max_state_bits=args.max_state_bits)
    rep = exact.verify_identities(r, t)
    rows = []
    for row in r.rows():
        row.update({"n": r.n, "variance": r.variance, "exact": r.exact})
        rows.append(row)
    if args.derivatives:
        rows = [{"l": l, "k": k, "DB": float(r.DB[l][k - 1])}
                for l in range(r.n) for k in range(1, r.n - l + 1)]
    emit(args, rows, {"label": f.label, "max_residual": rep.max_residual})
    if not rep.passed:
        name, res = rep.failures()[0]
        return fail(f"{name} residual={res:.3g}")
    return 0


def random_instance(rng: np.random.Generator, max_n: int):
    """A random binary or ternary space with a multilinear or LCS-type function."""
    kind = rng.choice(["multilinear", "multilinear", "lcs"])
    if kind == "lcs":
        n = int(rng.choice([c for c in (2, 4, 6, 8) if c <= max_n]))
        probs = rng.dirichlet(np.ones(2)) if rng.random() < 0.5 else np.array([0.5, 0.5])
        space = ProductSpace.iid(FiniteDistribution.from_probs(probs), n)
        return space, fam.function_from_config({"family": "lcs"}, space)
    n = int(rng.integers(1, max_n + 1))
    coords = []
    for _ in range(n):
        k = 3 if (rng.random() < 0.4 and n <= 6) else 2
        coords.append(FiniteDistribution.from_probs(rng.dirichlet(np.ones(k))))
    space = ProductSpace(tuple(coords))
    return space, fam.random_multilinear(space, rng)


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows, failures = [], []
    for i in range(args.instances):
        space, f = random_instance(rng, args.max_n)
        t, r = exact.decompose(space, f)
        rep = exact.verify_identities(r, t)
        if space.n <= 6:
            rep.extend(exact.interpolation_check(t, space, f))
        for row in rep.rows():
            row.update({"instance": i, "n": space.n, "function": f.label, "seed": args.seed})
            rows.append(row)
        failures += [(i, name, res) for name, res in rep.failures()]
    emit(args, rows)
    if failures:
        i, name, res = failures[0]
        return fail(f"instance {i}: {name} residual={res:.3g} ({len(failures)} failures)")
    return 0


def cmd_estimate(args) -> int:
    space, f = _instance(args)
    cfg = _cfg(args)
    if args.quantity == "variance":
        ests = [estimate_variance(space, f, cfg)]
    else:
        ks = range(1, space.n + 1) if args.k is None else [args.k]
        ests = [estimate_b_k(space, f, k, cfg) for k in ks]
    rows = []
    for e in ests:
        row = e.to_row()
        row.update({"n": space.n, "samples": cfg.samples})
        rows.append(row)
    emit(args, rows, {"label": f.label})
    return 0


def _lcs_model(args) -> lcs_lab.LcsModel:
    if args.p is not None:
        return lcs_lab.LcsModel.bernoulli(args.n, args.p)
    return lcs_lab.LcsModel.uniform(args.n, args.alphabet)


def cmd_lcs(args) -> int:
    sub = args.lcs_command
    cfg = _cfg(args)
    if sub == "varsup":
        try:
            c = lcs_lab.varsup_constant(args.p0, args.gamma_half)
        except lcs_lab.HypothesisError as exc:
            return fail(str(exc))
        emit(args, [{"p0": args.p0, "gamma_half_upper": args.gamma_half, "constant": c}])
        return 0
    if sub == "upper":
        rep = lcs_lab.upper_bound_report(_lcs_model(args), cfg)
        emit(args, [dict(r, seed=args.seed, samples=args.samples) for r in rep.rows()])
        if not rep.passed:
            return fail(f"Var LC_{rep.n} = {rep.variance.mean:.6g} above bound {rep.bound:.6g}")
        return 0
    if sub in ("blast", "b1"):
        model = _lcs_model(args)
        est = (lcs_lab.blast_lcs_estimate if sub == "blast" else lcs_lab.b1_lcs_estimate)(model, cfg)
        emit(args, [dict(est.to_row(), samples=args.samples)])
        return 0
    if sub == "omitted":
        x = FiniteDistribution.from_probs([(1 - args.p) / args.alphabet] * args.alphabet + [args.p])
        y = FiniteDistribution.uniform(args.alphabet)
        res = lcs_lab.omitted_letter_bound(lcs_lab.LcsModel(args.n, x, y), cfg)
        emit(args, [dict(r, seed=args.seed, samples=args.samples) for r in res.rows()])
        return 0
    if sub == "figure1":
        if args.paired:
            spec = lcs_lab.PerturbationSpec.pair_formula(args.replicas)
        else:
            spec = lcs_lab.PerturbationSpec(_word(args.w1), _word(args.w2), args.replicas)
        ns = _int_list(args.ns) if args.ns else [args.n]
        ests = lcs_lab.figure1_table(ns, spec, cfg, args.alphabet)
        rows = []
        for e in ests:
            row = e.to_row()
            row["seed"] = args.seed
            rows.append(row)
        meta = None
        if len(ns) >= 2:
            slope, se = lcs_lab.trend_slope(ns, ests)
            meta = {"slope": slope, "slope_stderr": se}
            if len(ns) >= 3:
                delta, dse, c = lcs_lab.floor_fit(ns, ests)
                meta.update({"floor": delta, "floor_stderr": dse, "edge_coefficient": c})
        emit(args, rows, meta)
        return 0
    raise AssertionError(sub)


def cmd_gaussian(args) -> int:
    G = asy.PolynomialG(tuple(_float_list(args.coeffs)))
    tg = asy.gaussian_targets(G, args.kmax)
    rows = asy.convergence_table(G, _int_list(args.ns), args.kmax)
    emit(args, rows, {"variance": tg.variance, "series_residuals": tg.residuals})
    if not tg.passed:
        name = max(tg.residuals, key=tg.residuals.get)
        return fail(f"{name} residual={tg.residuals[name]:.3g}")
    bad = asy.gaps_nonincreasing(rows)
    if bad and args.check_gaps:
        k, col = bad[0]
        return fail(f"{col} at k={k} grows along n")
    return 0


def cmd_hoeffding(args) -> int:
    spec = asy.HoeffdingSpec(tuple(_float_list(args.targets)))
    _, rep = asy.hoeffding_construct(spec)
    rows = [{"k": k, "target": a, "amplitude": rep["amplitudes"][k - 1],
             "K": rep["K"][k - 1] if rep["verified"] else None}
            for k, a in enumerate(spec.targets, 1)]
    emit(args, rows, {"verified": rep["verified"]})
    if rep["verified"] and rep["max_residual"] > 1e-9 * max(1.0, max(spec.targets)):
        return fail(f"K_k round trip residual={rep['max_residual']:.3g}")
    return 0


def cmd_hyper(args) -> int:
    ns = _int_list(args.ns) if args.ns else list(range(1, args.n_max + 1))
    try:
        res = [asy.hyper_gap_ratio(n) for n in ns]
    except asy.QuadratureError as exc:
        return fail(str(exc))
    rows = [r.to_row() for r in res]
    emit(args, rows)
    low = [r for r in res if r.ratio < asy.HYPER_LOWER - 1e-6]
    if low:
        return fail(f"R({low[0].n})/sqrt(n) = {low[0].ratio:.6g} below {asy.HYPER_LOWER:.6g}")
    return 0


# -- parser -----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                   help=f"random seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", default=None, help="JSON file; its keys override flags")


def _instance_flags(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--p", type=float, default=None, help="Bernoulli(p) coordinates")
    p.add_argument("--family", default="additive")
    p.add_argument("--instance", default=None, help="JSON file with 'space' and 'function'")
    p.add_argument("--max-state-bits", type=float, default=20)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varjack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="exact B_k, D^l B_k, J'_k, K'_k")
    _common(p)
    _instance_flags(p)
    p.add_argument("--derivatives", action="store_true", help="emit the D^l B_k table")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="identity residuals on random instances")
    _common(p)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--max-n", type=int, default=8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate", help="Monte Carlo estimates of Var S or B_k")
    _common(p)
    _instance_flags(p)
    p.add_argument("--quantity", choices=("b", "variance"), default="b")
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("lcs", help="LCS variance experiments")
    lsub = p.add_subparsers(dest="lcs_command", required=True)
    for name in ("upper", "blast", "b1", "figure1", "omitted", "varsup"):
        q = lsub.add_parser(name)
        _common(q)
        q.add_argument("--n", type=int, default=50)
        q.add_argument("--alphabet", type=int, default=2)
        q.add_argument("--p", type=float, default=None)
        if name == "figure1":
            q.add_argument("--ns", default=None, help="comma-separated word lengths")
            q.add_argument("--replicas", type=int, default=1000)
            q.add_argument("--w1", default="10")
            q.add_argument("--w2", default="11")
            q.add_argument("--paired", action="store_true", help="letter-pair formula (0,0) vs (0,1)")
        if name == "varsup":
            q.add_argument("--p0", type=float, default=0.096)
            q.add_argument("--gamma-half", type=float, default=0.8263)
        q.set_defaults(func=cmd_lcs)

    p = sub.add_parser("gaussian", help="J_k(n), K_k(n) against Gaussian targets")
    _common(p)
    p.add_argument("--coeffs", default="0,0,1", help="c0,c1,... of G")
    p.add_argument("--ns", default="10,20,40,80")
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--check-gaps", action="store_true", help="fail if a gap grows along n")
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("hoeffding", help="function with prescribed K_k")
    _common(p)
    p.add_argument("--targets", default="3,1,4,1,5")
    p.set_defaults(func=cmd_hoeffding)

    p = sub.add_parser("hyper", help="hypercontractive gap integral R(n)")
    _common(p)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--ns", default=None)
    p.set_defaults(func=cmd_hyper)
    return parser


def apply_config(parser: argparse.ArgumentParser, args) -> None:
    if not args.config:
        return
    cfg = fam.load_config(args.config)
    for key, value in cfg.items():
        if key in INSTANCE_KEYS:
            args.instance = {k: cfg[k] for k in INSTANCE_KEYS if k in cfg}
            continue
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("command", "lcs_command", "func"):
            parser.error(f"unknown config key {key!r}")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    apply_config(parser, args)
    if args.seed is None:
        args.seed = _default_seed()
    if args.samples < 2:
        parser.error("--samples must be at least 2")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (ValueError, exact.SizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
