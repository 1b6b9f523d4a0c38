"""Command line front end: JSON documents in, one JSON document out.

Exit status: 0 success, 1 validation error, 2 budget exceeded,
3 statistical rejection (``test-*`` verbs only).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from functools import partial

import numpy as np

from . import stochastic
from .core import (
    BoxSum,
    boxplus,
    boxplus_pow,
    canonical_form,
    canonical_key,
    diam,
    is_isomorphic,
    new_space,
    sample_distance_matrix,
    scale,
    space_from_dict,
    space_to_dict,
)
from .errors import MMSpaceError, NotIrreducible, ParseError
from .factorization import Factorization, divides, factorize, is_irreducible, join, meet, nth_root, quotient, sigma
from .functionals import (
    SemicharacterSpec,
    bigD,
    bigDA,
    check_kappa_chain,
    chi,
    chi1,
    chi_exponent_bounds,
    chi_monte_carlo,
    delta,
)
from .prohorov import (
    dgpr_lower,
    dgpr_to_trivial,
    dgpr_to_trivial_exact,
    dgpr_upper,
    prohorov as prohorov_distance,
    prohorov_oracle,
    verify_certificate,
)
from .stochastic import (
    DiscreteDistributionOnM,
    FiniteLevyMeasure,
    StableSpec,
    discrete_stable_laplace,
    discrete_stable_space,
    equality_test_values,
    levy_laplace_exact,
    lepage_residual,
    lln_empirical,
    lln_limit_exact,
    panel_values,
    sample_discrete_stable_count,
    sample_lepage,
    sample_levy,
    stability_check,
    stable_laplace_quadrature,
    thin,
    thinning_laplace_exact,
)

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_REJECT = 0, 1, 2, 3

DEFAULTS = {"seed": 0, "samples": 10**4, "tol": 1e-3, "budget": 4096, "out": "-", "workers": 1}

# Library operation -> the one verb that exposes it.
OPERATION_VERBS = {
    "new_space": "validate",
    "space_from_dict": "validate",
    "space_to_dict": "validate",
    "canonical_key": "validate",
    "canonical_form": "validate",
    "sample_distance_matrix": "validate",
    "boxplus": "boxplus",
    "boxplus_pow": "pow",
    "scale": "scale",
    "diam": "diam",
    "is_isomorphic": "iso",
    "chi": "chi",
    "chi_monte_carlo": "chi",
    "chi_exponent_bounds": "chi",
    "bigDA": "chi",
    "chi1": "functionals",
    "bigD": "functionals",
    "delta": "functionals",
    "check_kappa_chain": "functionals",
    "prohorov": "prohorov",
    "prohorov_oracle": "prohorov",
    "dgpr_to_trivial": "dgpr0",
    "dgpr_to_trivial_exact": "dgpr0",
    "dgpr_upper": "dgpr-upper",
    "dgpr_lower": "dgpr-upper",
    "verify_certificate": "dgpr-upper",
    "factorize": "factorize",
    "find_factor_split": "factorize",
    "sigma": "factorize",
    "is_irreducible": "factorize",
    "divides": "divides",
    "quotient": "quotient",
    "meet": "meet",
    "join": "join",
    "nth_root": "root",
    "sample_levy": "sample-levy",
    "levy_laplace_exact": "sample-levy",
    "sample_lepage": "sample-lepage",
    "lepage_residual": "sample-lepage",
    "stable_laplace_quadrature": "sample-lepage",
    "thin": "thin",
    "thinning_laplace_exact": "thin",
    "sample_discrete_stable_count": "discrete-stable",
    "discrete_stable_space": "discrete-stable",
    "discrete_stable_laplace": "discrete-stable",
    "equality_test": "test-equal",
    "empirical_laplace": "test-equal",
    "stability_check": "test-stable",
    "lln_limit_exact": "lln-demo",
    "lln_empirical": "lln-demo",
}

STOCHASTIC_VERBS = ("sample-levy", "sample-lepage", "thin", "discrete-stable", "test-equal", "test-stable", "lln-demo")


class Rejected(Exception):
    """Carries the report of a rejected statistical test."""

    def __init__(self, body: dict):
        super().__init__("rejected")
        self.body = body


# --------------------------------------------------------------------------
# input / output


def _load(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def _space(path: str):
    return space_from_dict(_load(path))


def _panel(path: str) -> list[SemicharacterSpec]:
    doc = _load(path)
    docs = doc if isinstance(doc, list) else [doc]
    if not docs:
        raise ParseError("panel must contain at least one semicharacter spec")
    return [SemicharacterSpec.from_dict(d) for d in docs]


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render(doc) -> str:
    return json.dumps(_clean(doc), separators=(",", ":"), allow_nan=False) + "\n"


def boxsum_to_dict(S: BoxSum, budget: int) -> dict:
    """Factored form: distinct atoms plus ``(scale, atom)`` terms, and the product if it fits."""
    atoms, index, terms = [], {}, []
    for c, s in S.terms:
        if id(s) not in index:
            index[id(s)] = len(atoms)
            atoms.append(s)
        terms.append({"scale": c, "atom": index[id(s)]})
    points = math.prod(s.n for _, s in S.terms)
    out = {
        "points": points,
        "diam": diam(S),
        "atoms": [space_to_dict(s) for s in atoms],
        "terms": terms,
        "space": space_to_dict(S.materialize(budget)) if points <= budget else None,
    }
    return out


def _panel_values(panel, fn) -> list[dict]:
    return [{"A": A.to_dict(), "value": fn(A)} for A in panel]


# --------------------------------------------------------------------------
# verbs


def cmd_validate(args) -> dict:
    doc = _load(args.space)
    X = space_from_dict(doc)
    X = new_space(X.dist, X.weights)
    out = {"valid": True, "n": X.n, "canonical_key": canonical_key(X).hex(), "space": space_to_dict(X)}
    if args.canonical:
        out["canonical"] = space_to_dict(canonical_form(X))
    if args.sample_dist:
        out["sample_dist"] = sample_distance_matrix(X, args.sample_dist, args.seed)
    return out


def cmd_boxplus(args) -> dict:
    return space_to_dict(boxplus(_space(args.x), _space(args.y), args.budget))


def cmd_pow(args) -> dict:
    return space_to_dict(boxplus_pow(_space(args.x), args.k, args.budget))


def cmd_scale(args) -> dict:
    return space_to_dict(scale(args.a, _space(args.x)))


def cmd_diam(args) -> dict:
    return {"diam": diam(_space(args.x))}


def cmd_iso(args) -> dict:
    return {"isomorphic": is_isomorphic(_space(args.x), _space(args.y))}


def cmd_chi(args) -> dict:
    A = SemicharacterSpec.from_dict(_load(args.spec))
    X = _space(args.x)
    out = {"A": A.to_dict()}
    if args.mc:
        out["estimate"] = chi_monte_carlo(A, X, args.samples, args.seed).to_dict()
    else:
        out["chi"] = chi(A, X)
        out["D_A"] = bigDA(A, X)
    if not A.is_empty:
        hi, lo = chi_exponent_bounds(A)
        out["exponent_bounds"] = {"hi": hi, "lo": lo}
    return out


def cmd_functionals(args) -> dict:
    X = _space(args.x)
    return {"chi1": chi1(X), "D": bigD(X), "delta": delta(X), "kappa_chain": check_kappa_chain(X).to_dict()}


def cmd_prohorov(args) -> dict:
    doc = _load(args.doc)
    try:
        mu1, mu2, d = doc["mu1"], doc["mu2"], doc["dist"]
    except (KeyError, TypeError):
        raise ParseError("expected an object with 'mu1', 'mu2' and 'dist'") from None
    fn = prohorov_oracle if args.oracle else prohorov_distance
    return {"prohorov": fn(mu1, mu2, d), "method": "oracle" if args.oracle else "max-flow"}


def cmd_dgpr0(args) -> dict:
    X = _space(args.x)
    out = {"dgpr_to_trivial": dgpr_to_trivial(X)}
    if X.n <= 64:
        out["exact"] = dgpr_to_trivial_exact(X)
    return out


def cmd_dgpr_upper(args) -> dict:
    X, Y = _space(args.x), _space(args.y)
    bound, cert = dgpr_upper(X, Y, budget=args.restarts, seed=args.seed)
    return {
        "upper": bound,
        "lower": dgpr_lower(X, Y),
        "verified": verify_certificate(X, Y, cert),
        "certificate": cert.to_dict(),
    }


def cmd_factorize(args) -> dict:
    doc = _load(args.doc)
    if isinstance(doc, dict) and "factors" in doc:
        return space_to_dict(sigma(Factorization.from_dict(doc), args.budget))
    X = space_from_dict(doc)
    F = factorize(X)
    out = F.to_dict()
    out["irreducible"] = is_irreducible(X)
    return out


def cmd_divides(args) -> dict:
    return {"divides": divides(_space(args.y), _space(args.x))}


def cmd_quotient(args) -> dict:
    return space_to_dict(quotient(_space(args.x), _space(args.y)))


def cmd_meet(args) -> dict:
    return space_to_dict(meet(_space(args.x), _space(args.y)))


def cmd_join(args) -> dict:
    return space_to_dict(join(_space(args.x), _space(args.y), budget=args.budget))


def cmd_root(args) -> dict:
    W = nth_root(_space(args.x), args.k)
    return {"root": None if W is None else space_to_dict(W)}


def cmd_sample_levy(args) -> dict:
    nu = FiniteLevyMeasure.from_dict(_load(args.nu))
    S = sample_levy(nu, args.t, args.seed)
    out = {"sample": boxsum_to_dict(S, args.budget)}
    if args.panel:
        out["laplace_exact"] = _panel_values(_panel(args.panel), lambda A: levy_laplace_exact(A, nu, args.t))
    return out


def _stable_spec(doc, tol: float) -> StableSpec:
    if isinstance(doc, dict) and "tail_tol" not in doc:
        doc = {**doc, "tail_tol": tol}
    return StableSpec.from_dict(doc)


def cmd_sample_lepage(args) -> dict:
    spec = _stable_spec(_load(args.spec), args.tol)
    S = sample_lepage(spec, args.seed)
    out = {"sample": boxsum_to_dict(S, args.budget), "residual_bound": lepage_residual(spec, S)}
    if args.panel:
        out["laplace_quadrature"] = _panel_values(
            _panel(args.panel), lambda A: stable_laplace_quadrature(A, spec.alpha, spec.base)
        )
    return out


def cmd_thin(args) -> dict:
    X = _space(args.x)
    out = {"sample": space_to_dict(thin(X, args.p, args.seed))}
    if args.panel:
        out["laplace_exact"] = _panel_values(_panel(args.panel), lambda A: thinning_laplace_exact(A, X, args.p))
    return out


def cmd_discrete_stable(args) -> dict:
    Y = _space(args.y)
    if args.count_only:
        return {"count": sample_discrete_stable_count(args.alpha, args.c, args.seed)}
    F = discrete_stable_space(args.alpha, args.c, Y, args.seed)
    out = {"count": sum(m for _, m in F.factors), "sample": F.to_dict()}
    if args.panel:
        out["laplace_exact"] = _panel_values(_panel(args.panel), lambda A: discrete_stable_laplace(A, args.alpha, args.c, Y))
    return out


# laws for test-equal


def _constant_draw(X, rng):
    return X


def _distribution_draw(dist: DiscreteDistributionOnM, rng):
    return dist.spaces[int(dist.draw(rng, 1)[0])]


def law_sampler(doc, tol: float):
    """Build a picklable ``rng -> sample`` callable from a law document."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError("a law document needs a 'kind'")
    kind = doc["kind"]
    try:
        if kind == "space":
            return partial(_constant_draw, space_from_dict(doc["space"]))
        if kind == "distribution":
            return partial(_distribution_draw, DiscreteDistributionOnM.from_dict(doc["dist"]))
        if kind == "levy":
            return partial(stochastic.levy_draw, FiniteLevyMeasure.from_dict(doc["nu"]), float(doc["t"]))
        if kind == "lepage":
            return partial(stochastic.lepage_draw, _stable_spec(doc["spec"], tol))
        if kind == "thin":
            probs = doc["p"] if isinstance(doc["p"], list) else [doc["p"]]
            F = factorize(space_from_dict(doc["space"]))
            return partial(stochastic.thin_draw, F, tuple(float(p) for p in probs))
        if kind == "discrete-stable":
            Y = space_from_dict(doc["space"])
            if not is_irreducible(Y):
                raise NotIrreducible("discrete stable laws need an irreducible base space")
            return partial(stochastic.discrete_stable_draw, float(doc["alpha"]), float(doc["c"]), canonical_form(Y))
    except KeyError as exc:
        raise ParseError(f"law of kind {kind!r} is missing {exc.args[0]!r}") from None
    raise ParseError(f"unknown law kind {kind!r}")


def _report(rep) -> dict:
    body = rep.to_dict()
    if rep.reject:
        raise Rejected(body)
    return body


def cmd_test_equal(args) -> dict:
    fx = law_sampler(_load(args.law_x), args.tol)
    fy = law_sampler(_load(args.law_y), args.tol)
    panel = _panel(args.panel)
    vx = panel_values(fx, panel, args.samples, (args.seed, 0), args.workers)
    vy = panel_values(fy, panel, args.samples, (args.seed, 1), args.workers)
    return _report(equality_test_values(vx, vy, panel, args.z))


def cmd_test_stable(args) -> dict:
    spec = _stable_spec(_load(args.spec), args.tol)
    other = _stable_spec(_load(args.against), args.tol) if args.against else None
    rep = stability_check(spec, args.a, args.b, _panel(args.panel), args.samples, args.seed, args.z, other, args.workers)
    return _report(rep)


def cmd_lln_demo(args) -> dict:
    dist = DiscreteDistributionOnM.from_dict(_load(args.dist))
    A = SemicharacterSpec.from_dict(_load(args.spec))
    exact = lln_limit_exact(A, dist)
    est = lln_empirical(A, dist, args.n, args.samples, args.seed, args.workers)
    return {"n": args.n, "exact_limit": exact, "empirical": est.to_dict(), "z": est.z_score(exact)}


# --------------------------------------------------------------------------
# parser


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(suppress: bool) -> argparse.ArgumentParser:
    """Shared flags; the copy attached to each verb only records flags actually given."""
    d = (lambda k: argparse.SUPPRESS) if suppress else DEFAULTS.get
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int, default=d("seed"), help="random seed (default 0)")
    p.add_argument("--samples", type=int, default=d("samples"), help="Monte Carlo sample count (default 10000)")
    p.add_argument("--tol", type=float, default=d("tol"), help="LePage truncation level when a spec omits tail_tol (default 1e-3)")
    p.add_argument("--budget", type=int, default=d("budget"), help="maximum points of an explicit product (default 4096)")
    p.add_argument("--out", default=d("out"), help="output path, '-' for standard output")
    p.add_argument("--workers", type=int, default=d("workers"), help="worker processes for batch sampling (default 1)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmspace", description=__doc__.splitlines()[0], parents=[_common(False)])
    common = _common(True)
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB", parser_class=_Parser)

    def verb(name, fn, help_, *positionals):
        p = sub.add_parser(name, help=help_, parents=[common])
        for arg, h in positionals:
            p.add_argument(arg, help=h)
        p.set_defaults(func=fn)
        return p

    p = verb("validate", cmd_validate, "check a space and print its canonical key", ("space", "space JSON"))
    p.add_argument("--canonical", action="store_true", help="also print the canonically relabeled space")
    p.add_argument("--sample-dist", type=int, default=0, metavar="M", help="also print an M x M sampled distance matrix")
    verb("boxplus", cmd_boxplus, "product of two spaces", ("x", "space JSON"), ("y", "space JSON"))
    verb("pow", cmd_pow, "k-fold product", ("x", "space JSON")).add_argument("k", type=int)
    p = sub.add_parser("scale", help="multiply distances by a", parents=[common])
    p.add_argument("a", type=float)
    p.add_argument("x", help="space JSON")
    p.set_defaults(func=cmd_scale)
    verb("diam", cmd_diam, "diameter", ("x", "space JSON"))
    verb("iso", cmd_iso, "isomorphism test", ("x", "space JSON"), ("y", "space JSON"))
    p = verb("chi", cmd_chi, "semicharacter value", ("spec", "semicharacter spec JSON"), ("x", "space JSON"))
    p.add_argument("--mc", action="store_true", help="Monte Carlo estimate with --samples and --seed")
    verb("functionals", cmd_functionals, "chi_1, D, Delta and the two-sided comparison", ("x", "space JSON"))
    p = verb("prohorov", cmd_prohorov, "Prohorov distance of two measures", ("doc", "JSON with mu1, mu2, dist"))
    p.add_argument("--oracle", action="store_true", help="use exhaustive set enumeration (n <= 12)")
    verb("dgpr0", cmd_dgpr0, "Gromov-Prohorov distance to the one-point space", ("x", "space JSON"))
    p = verb("dgpr-upper", cmd_dgpr_upper, "certified Gromov-Prohorov bounds", ("x", "space JSON"), ("y", "space JSON"))
    p.add_argument("--restarts", type=int, default=256, help="number of seed pairs to try")
    verb("factorize", cmd_factorize, "space -> factorization, factorization -> space", ("doc", "space or factorization JSON"))
    verb("divides", cmd_divides, "does y divide x", ("x", "space JSON"), ("y", "candidate divisor"))
    verb("quotient", cmd_quotient, "the z with x = y boxplus z", ("x", "space JSON"), ("y", "divisor"))
    verb("meet", cmd_meet, "greatest common divisor", ("x", "space JSON"), ("y", "space JSON"))
    verb("join", cmd_join, "least common multiple", ("x", "space JSON"), ("y", "space JSON"))
    verb("root", cmd_root, "k-th root if it exists", ("x", "space JSON")).add_argument("k", type=int)

    p = verb("sample-levy", cmd_sample_levy, "Levy law marginal", ("nu", "Levy measure JSON"))
    p.add_argument("--t", type=float, default=1.0, help="time (default 1)")
    p.add_argument("--panel", help="semicharacter specs for exact Laplace values")
    p = verb("sample-lepage", cmd_sample_lepage, "stable law via its LePage series", ("spec", "stable spec JSON"))
    p.add_argument("--panel", help="semicharacter specs for quadrature Laplace values")
    p = verb("thin", cmd_thin, "independent thinning of prime factors", ("x", "space JSON"))
    p.add_argument("--p", type=float, required=True, help="retention probability")
    p.add_argument("--panel", help="semicharacter specs for exact Laplace values")
    p = verb("discrete-stable", cmd_discrete_stable, "power of an irreducible space with discrete stable exponent", ("y", "irreducible space JSON"))
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--count-only", action="store_true", help="print only the exponent")
    p.add_argument("--panel", help="semicharacter specs for exact Laplace values")
    p = verb("test-equal", cmd_test_equal, "two-sample test of equality in law", ("law_x", "law JSON"), ("law_y", "law JSON"), ("panel", "semicharacter specs"))
    p.add_argument("--z", type=float, default=stochastic.DEFAULT_Z)
    p = verb("test-stable", cmd_test_stable, "check the stability identity", ("spec", "stable spec JSON"), ("panel", "semicharacter specs"))
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--against", help="stable spec for the right-hand side (power check)")
    p.add_argument("--z", type=float, default=stochastic.DEFAULT_Z)
    p = verb("lln-demo", cmd_lln_demo, "averages of i.i.d. spaces versus the exact limit", ("dist", "distribution JSON"), ("spec", "semicharacter spec JSON"))
    p.add_argument("--n", type=int, default=512, help="number of averaged spaces")
    return parser


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(render({"error": "UsageError", "message": str(exc)}))
        return EXIT_INVALID
    status = EXIT_OK
    try:
        body = args.func(args)
    except Rejected as rej:
        body, status = rej.body, EXIT_REJECT
    except MMSpaceError as exc:
        body, status = {"error": exc.code, "message": str(exc)}, exc.exit_status
    except (ValueError, TypeError) as exc:
        body, status = {"error": "InvalidArgument", "message": str(exc)}, EXIT_INVALID
    _emit(render(body), args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
