"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 a numeric target was not met.
Exact rationals are printed as "p/q" strings, reals with 12 significant digits,
and every reported number carries an error field.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Any

from . import concave, heights, mahler, polytope, resultants, ronkin, toric
from .numeric import QuadratureConfig, fmt_real

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class NumericTargetError(Exception):
    """A computation finished but missed its accuracy or validity target."""

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


def _fr(x) -> str:
    x = Fraction(x)
    return str(x)


def _load(path: str):
    text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    return json.loads(text)


def _list(obj, key: str):
    if isinstance(obj, dict) and key in obj:
        obj = obj[key]
    if not isinstance(obj, list):
        raise ValueError(f"expected a JSON list (or an object with '{key}')")
    return obj


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.replace(" ", "").split(",") if x]


def _rats(s: str) -> list[Fraction]:
    return [polytope.to_fraction(x) for x in s.replace(" ", "").split(",") if x]


def _cfg(a) -> QuadratureConfig:
    kw = {"budget": a.budget, "seed": a.seed, "batches": a.batches}
    if getattr(a, "u_step", None):
        kw["u_step"] = a.u_step
    if getattr(a, "m_step", None):
        kw["m_step"] = a.m_step
    return QuadratureConfig(**kw)


def _exact_value(x) -> dict:
    if isinstance(x, Fraction):
        return {"value": _fr(x), "error": "0"}
    if isinstance(x, concave.ScaledRational):
        return {"value": fmt_real(float(x)), "exact": str(x), "error": "0"}
    return x.to_json()


# ---------------------------------------------------------------------------
# handlers


def poly_mv(a):
    Ps = [polytope.Polytope.from_json(p) for p in _list(_load(a.input), "polytopes")]
    return {"mixed_volume": _fr(polytope.mixed_volume(Ps)), "error": "0"}


def poly_vol(a):
    P = polytope.Polytope.from_json(_load(a.input))
    return {"volume": _fr(polytope.volume(P)), "error": "0"}


def poly_newton(a):
    f = ronkin.LaurentPolynomial.from_json(_load(a.input))
    return {"newton_polytope": polytope.newton_polytope(f).to_json()}


def _concaves(path):
    return [concave.PAConcave.from_json(x) for x in _list(_load(path), "functions")]


def cave_mi(a):
    return {"mixed_integral": _exact_value(concave.mixed_integral(_concaves(a.input)))}


def cave_dual(a):
    fs = _concaves(a.input)
    if len(fs) != 1:
        raise ValueError("dual takes one function")
    return {"dual": concave.legendre_dual(fs[0]).to_json()}


def cave_supconv(a):
    fs = _concaves(a.input)
    if len(fs) != 2:
        raise ValueError("sup-convolution takes two functions")
    return {"sup_convolution": concave.sup_convolution(fs[0], fs[1]).to_json()}


def ronkin_eval(a):
    f = ronkin.LaurentPolynomial.from_json(_load(a.poly))
    v = ronkin.PlaceQ.parse(a.place)
    u = _rats(a.u)
    if len(u) != f.nvars:
        raise ValueError("point dimension differs from the variable count")
    if v.is_archimedean:
        return {"place": v.label(), "ronkin": ronkin.arch_ronkin_value(f, u, _cfg(a)).to_json()}
    g = ronkin.tropical_ronkin(f, v)
    q = g(u)
    return {"place": v.label(), "ronkin": {"value": fmt_real(float(q) * g.unit.value), "exact": f"{_fr(q)}*{g.unit.label}" if g.unit != concave.ONE and q else _fr(q), "error": "0"}}


def ronkin_roof(a):
    f = ronkin.LaurentPolynomial.from_json(_load(a.poly))
    v = ronkin.PlaceQ.parse(a.place)
    if not v.is_archimedean:
        return {"place": v.label(), "roof": ronkin.ronkin_roof(f, v).to_json()}
    r = ronkin.ronkin_roof(f, v, _cfg(a))
    out = {"place": v.label(), "integral": r.integral().to_json(), "grid_error": fmt_real(r.error)}
    if a.full:
        out["roof"] = r.to_json()
    return out


def ronkin_push(a):
    f = ronkin.LaurentPolynomial.from_json(_load(a.poly))
    gamma = json.loads(a.gamma)
    rep = ronkin.pushforward_check(f, gamma, _cfg(a), archimedean=not a.exact_only)
    if not rep["passed"]:
        raise NumericTargetError("pushforward identity failed", rep)
    return rep


def height_point(a):
    P = heights.ProjectivePoint.from_json(_load(a.input))
    return heights.projective_height(P, a.precision).to_json()


def height_tuple(a):
    h = heights.height_tuple_Q(_rats(a.coords))
    return {"height": fmt_real(h), "error": "0"}


def height_axioms(a):
    rep = heights.gvf_axiom_suite(seed=a.seed, samples=a.samples, max_conductor=a.max_conductor)
    rep = _format_floats(rep)
    if not rep["passed"]:
        raise NumericTargetError("axiom residuals above tolerance", rep)
    return rep


def res_sylvester(a):
    R = resultants.sylvester_resultant_form(a.n)
    out = {"n": a.n, "terms": len(R.terms), "content": R.content, "max_coefficient": R.max_coefficient, "height": {"value": fmt_real(resultants.form_height(R)), "error": "0"}}
    if a.full:
        out["form"] = R.to_json()
    return out


def res_point(a):
    R = resultants.point_resultant_form(_ints(a.coords), a.n)
    return {"form": R.to_json(), "height": {"value": fmt_real(resultants.form_height(R)), "error": "0"}}


def res_converge(a):
    if a.case == "point" and not a.coords:
        raise ValueError("--coords is required for the point case")
    rows = resultants.convergence_table(a.case, a.nmax, _ints(a.coords) if a.coords else None)
    if a.out == "csv":
        lines = ["n,height,normalized,envelope"] + [
            f"{r.n},{fmt_real(r.height)},{fmt_real(r.normalized)},{'' if r.envelope is None else fmt_real(r.envelope)}" for r in rows
        ]
        return "\n".join(lines) + "\n"
    return {"case": a.case, "rows": [dict(r.to_json(), error="0") for r in rows]}


def res_fs(a):
    R = resultants.sylvester_resultant_form(a.n) if a.case == "sylvester" else resultants.point_resultant_form(_ints(a.coords), a.n)
    est = resultants.fs_height_estimate(R, _cfg(a))
    h = resultants.form_height(R)
    bound = resultants.fs_comparison_bound(R)
    return {
        "fs_height": {"value": fmt_real(est["value"]), "error": fmt_real(est["stderr"]), "error_kind": "stderr"},
        "form_height": {"value": fmt_real(h), "error": "0"},
        "comparison_bound": fmt_real(bound),
        "within_bound": bool(abs(est["value"] - h) <= bound + 3 * est["stderr"]),
        "samples": est["samples"],
        "seed": est["seed"],
    }


def res_veronese(a):
    rep = resultants.veronese_gap(a.r, a.n, _cfg(a))
    rep = _format_floats(rep)
    rep["error"] = "0"
    if not rep["within"]:
        raise NumericTargetError("Veronese gap above its bound", rep)
    return rep


def _polyc(a):
    return mahler.PolyC.from_json(_load(a.poly))


def mahler_torus(a):
    return mahler.mahler_torus(_polyc(a), _cfg(a), method=a.method).to_json()


def mahler_sphere(a):
    return mahler.mahler_sphere(_polyc(a), _cfg(a)).to_json()


def mahler_mixed(a):
    P = _polyc(a)
    parts = _ints(a.partition) if a.partition else None
    return mahler.mahler_multisphere(P, parts, _cfg(a)).to_json()


def mahler_exact(a):
    v, e = mahler.mahler_univariate_exact(_polyc(a))
    return {"value": fmt_real(v), "error": fmt_real(e), "error_kind": "bound"}


def mahler_bounds(a):
    if a.samples < 1:
        raise ValueError("--samples must be at least 1")
    rep = mahler.bound_suite(seed=a.seed, corpus=a.samples, cfg=QuadratureConfig(budget=a.budget, batches=a.batches, seed=a.seed))
    rep = _format_floats(rep)
    if not rep["passed"]:
        raise NumericTargetError("bound violations found", rep)
    return rep


def _divisors(path):
    return [toric.ToricDivisorData.from_json(d) for d in _list(_load(path), "divisors")]


def _polys(path):
    obj = _load(path)
    if isinstance(obj, dict) and "terms" in obj:
        return [ronkin.LaurentPolynomial.from_json(obj)]
    return [ronkin.LaurentPolynomial.from_json(f) for f in _list(obj, "polys")]


def toric_height(a):
    return toric.toric_height(_divisors(a.divisors)).to_json()


def toric_hyper(a):
    fs = _polys(a.poly)
    if len(fs) != 1:
        raise ValueError("hyper takes a single polynomial")
    return toric.hypersurface_height(_divisors(a.divisors), fs[0], _cfg(a)).to_json()


def toric_gualdi(a):
    Ds = _divisors(a.divisors) if a.divisors else []
    rep = toric.gualdi_limit(Ds, _polys(a.polys), _cfg(a), tol=a.tol)
    out = rep.to_json()
    if a.tol is not None and not rep.extra.get("meets_tol", True):
        raise NumericTargetError("tolerance not met", out)
    return out


def toric_experiment(a):
    fs = _polys(a.poly)
    Ns = _ints(a.N)
    limit = toric.FLAGSHIP_VALUE if a.limit == "flagship" else (float(a.limit) if a.limit else None)
    res = toric.torsion_experiment(fs, Ns, samples=a.samples, seed=a.seed, precision=a.precision, limit=limit)
    if a.csv:
        with open(a.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(toric.experiment_csv(res["rows"]))
    if a.out == "csv":
        return toric.experiment_csv(res["rows"])
    rep = res["report"]
    if rep["all_degenerate"]:
        raise NumericTargetError("every draw was degenerate", rep)
    return rep


def _format_floats(obj):
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return fmt_real(obj)
    if isinstance(obj, dict):
        return {k: _format_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_format_floats(v) for v in obj]
    if hasattr(obj, "item"):
        return _format_floats(obj.item())
    return obj


# ---------------------------------------------------------------------------
# parser


def _common(p, stochastic: bool = False, budget: int = 1024, samples_alias: bool = False):
    p.add_argument("--out", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--workers", type=int, default=None, help="accepted for compatibility; results do not depend on it")
    if stochastic:
        p.add_argument("--seed", type=int, default=0)
        names = ("--budget", "--samples") if samples_alias else ("--budget",)
        p.add_argument(*names, dest="budget", type=int, default=budget, help="quadrature nodes per evaluation")
        p.add_argument("--batches", type=int, default=4)
        p.add_argument("--u-step", type=float, default=None)
        p.add_argument("--m-step", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toricheights", description="Heights of toric varieties, Ronkin functions and Mahler measures.")
    top = ap.add_subparsers(dest="group", required=True)

    def group(name, help_):
        return top.add_parser(name, help=help_).add_subparsers(dest="cmd", required=True)

    g = group("poly", "polytopes")
    for name, fn, help_ in (("mv", poly_mv, "mixed volume of n polytopes"), ("vol", poly_vol, "volume"), ("newton", poly_newton, "Newton polytope")):
        p = g.add_parser(name, help=help_)
        p.add_argument("--in", dest="input", required=True)
        _common(p)
        p.set_defaults(fn=fn)

    g = group("cave", "concave functions")
    for name, fn in (("mi", cave_mi), ("dual", cave_dual), ("supconv", cave_supconv)):
        p = g.add_parser(name)
        p.add_argument("--in", dest="input", required=True)
        _common(p)
        p.set_defaults(fn=fn)

    g = group("ronkin", "Ronkin functions")
    p = g.add_parser("eval")
    p.add_argument("--poly", required=True)
    p.add_argument("--u", required=True, help="comma-separated rationals")
    p.add_argument("--place", default="inf")
    _common(p, True)
    p.set_defaults(fn=ronkin_eval)
    p = g.add_parser("roof")
    p.add_argument("--poly", required=True)
    p.add_argument("--place", default="inf")
    p.add_argument("--full", action="store_true", help="include the sampled grid")
    _common(p, True)
    p.set_defaults(fn=ronkin_roof)
    p = g.add_parser("push")
    p.add_argument("--poly", required=True)
    p.add_argument("--gamma", required=True, help="JSON integer matrix, rows = target coordinates")
    p.add_argument("--exact-only", action="store_true")
    _common(p, True)
    p.set_defaults(fn=ronkin_push)

    g = group("height", "Weil heights")
    p = g.add_parser("point")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--precision", type=float, default=1e-12)
    _common(p)
    p.set_defaults(fn=height_point)
    p = g.add_parser("tuple")
    p.add_argument("--coords", required=True)
    _common(p)
    p.set_defaults(fn=height_tuple)
    p = g.add_parser("axioms")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--max-conductor", type=int, default=24)
    _common(p)
    p.set_defaults(fn=height_axioms)

    g = group("res", "resultant forms")
    p = g.add_parser("sylvester")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--full", action="store_true")
    _common(p)
    p.set_defaults(fn=res_sylvester)
    p = g.add_parser("point")
    p.add_argument("--coords", required=True)
    p.add_argument("--n", type=int, required=True)
    _common(p)
    p.set_defaults(fn=res_point)
    p = g.add_parser("converge")
    p.add_argument("--case", choices=("sylvester", "point"), required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--coords", default=None)
    _common(p)
    p.set_defaults(fn=res_converge)
    p = g.add_parser("fs")
    p.add_argument("--case", choices=("sylvester", "point"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--coords", default=None)
    _common(p, True, budget=8192, samples_alias=True)
    p.set_defaults(fn=res_fs)
    p = g.add_parser("veronese")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _common(p, True, budget=10000, samples_alias=True)
    p.set_defaults(fn=res_veronese)

    g = group("mahler", "Mahler measures")
    for name, fn in (("torus", mahler_torus), ("sphere", mahler_sphere), ("mixed", mahler_mixed), ("exact", mahler_exact)):
        p = g.add_parser(name)
        p.add_argument("--poly", required=True)
        if name == "mixed":
            p.add_argument("--partition", default=None, help="group sizes, default from the JSON")
        if name == "torus":
            p.add_argument("--method", choices=("auto", "qmc"), default="auto")
        _common(p, True, budget=4096, samples_alias=True)
        p.set_defaults(fn=fn)
    p = g.add_parser("bounds")
    p.add_argument("--samples", type=int, default=1000, help="random polynomials per configuration")
    _common(p, True)
    p.set_defaults(fn=mahler_bounds, batches=8)

    g = group("toric", "toric heights")
    p = g.add_parser("height")
    p.add_argument("--divisors", required=True)
    _common(p)
    p.set_defaults(fn=toric_height)
    p = g.add_parser("hyper")
    p.add_argument("--divisors", required=True)
    p.add_argument("--poly", required=True)
    _common(p, True)
    p.set_defaults(fn=toric_hyper)
    p = g.add_parser("gualdi")
    p.add_argument("--divisors", default=None)
    p.add_argument("--polys", required=True)
    p.add_argument("--tol", type=float, default=None)
    _common(p, True)
    p.set_defaults(fn=toric_gualdi)
    p = g.add_parser("experiment")
    p.add_argument("--poly", required=True, help="JSON list of affine-linear polynomials")
    p.add_argument("--N", required=True, help="comma-separated conductors")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", type=float, default=1e-9)
    p.add_argument("--limit", default="flagship", help="'flagship', a number, or empty")
    p.add_argument("--csv", default=None, help="also write per-draw heights here")
    p.add_argument("--out", choices=("json", "csv"), default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=toric_experiment)
    return ap


def _emit(result, a) -> None:
    text = result if isinstance(result, str) else json.dumps(result, indent=2, ensure_ascii=False) + "\n"
    if getattr(a, "output", None):
        with open(a.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if a.workers is None and os.environ.get("TORICHEIGHTS_WORKERS"):
        a.workers = int(os.environ["TORICHEIGHTS_WORKERS"])
    try:
        _emit(a.fn(a), a)
        return EXIT_OK
    except NumericTargetError as exc:
        if exc.payload is not None:
            _emit(exc.payload, a)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, json.JSONDecodeError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
