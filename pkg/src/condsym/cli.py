"""Command-line front end: ``condsym <subcommand> [options]``.

Every verdict-producing subcommand builds a :class:`condsym.report.Report`
and prints it as text or JSON. Exit codes: 0 all checks pass, 1 a check
failed, 2 usage or configuration error, 3 inconclusive checks with --strict.
"""
from __future__ import annotations

import argparse
import contextlib
import sys
from fractions import Fraction
from typing import Optional, Sequence

from condsym import reduction as red
from condsym import solutions as sol
from condsym import waveforms as wf
from condsym.lie import LieError, check_invariance_numeric, check_invariance_symbolic, default_region
from condsym.numerics import NumericsError
from condsym.report import Check, Report
from condsym.symcore import to_expr
from condsym.symcore.printer import to_string

EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------ argument types
def alpha_arg(text: str):
    """'alpha' (symbolic) or an exact rational such as -1, 1/2 or 0.25."""
    t = text.strip()
    if t == "alpha":
        return t
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"alpha must be a rational number or 'alpha', got {text!r}") from None


def region_arg(text: str):
    """``name=lo:hi``, e.g. ``x0=1:2``."""
    try:
        name, rng = text.split("=", 1)
        lo, hi = (float(v) for v in rng.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"region must look like x0=1:2, got {text!r}") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError(f"empty interval in {text!r}")
    return name.strip(), (lo, hi)


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


# ------------------------------------------------------------ parser
def _common(alpha_default, alpha_help: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--n", type=int, default=3, help="number of spatial variables")
    g.add_argument("--alpha", type=alpha_arg, default=alpha_default, help=alpha_help)
    g.add_argument("--convention", choices=("paper", "euler"), default="euler",
                   help="sign convention linking the anz1 exponent to alpha")
    g.add_argument("--seed", type=int, default=42, help="random seed for sampling")
    g.add_argument("--samples", type=_positive_int, default=200, help="number of numeric sample points")
    g.add_argument("--tol", type=_positive_float, default=1e-6, help="residual tolerance for pass/fail")
    g.add_argument("--output", choices=("text", "json"), default="text", help="report format")
    g.add_argument("--strict", action="store_true", help="exit 3 when any check is inconclusive")
    g.add_argument("--region", type=region_arg, action="append", default=[], metavar="NAME=LO:HI",
                   help="override a sampling interval (repeatable), e.g. x0=1:2")
    g.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from JSON output")
    return p


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    top = argparse.ArgumentParser(prog="condsym", formatter_class=fmt,
                                  description="Conditional symmetries, reductions and exact solutions "
                                              "of the multidimensional wave equation.")
    sub = top.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("reduce", formatter_class=fmt, help="reduce the wave equation with an ansatz",
                       parents=[_common("alpha", "ansatz parameter ('alpha' keeps it symbolic)")])
    p.add_argument("--ansatz", choices=("anz1", "anz2"), default="anz1", help="ansatz to substitute")
    p.add_argument("--compare", metavar="FIXTURE", default=None,
                   help="printed fixture to diff against (see 'condsym fixtures')")
    p.add_argument("--project", choices=("none", "directional", "radial"), default="none",
                   help="project the reduced equation to an ODE")
    p.add_argument("--m", type=_float_list, default=None, metavar="M1,..,Mn",
                   help="unit direction for the directional projection (None means e1)")
    p.add_argument("--points", type=_positive_int, default=50,
                   help="points per profile for the anz1 arbitration oracle")

    p = sub.add_parser("invariance", formatter_class=fmt, help="check an operator against a system",
                       parents=[_common(Fraction(0), "alpha of the add1/add2 condition")])
    p.add_argument("--system", default="wave", help="wave, wave+add1 or wave+add2")
    p.add_argument("--F", dest="F", default=None,
                   help="nonlinearity: zero, power, exp, conformal, F (opaque) or an expression in u")
    p.add_argument("--op", required=True,
                   help="D, P<mu>, dx<mu>, J<mu><nu>, euler, u-scaling, rotation-12, op2 or op1")
    p.add_argument("--mode", choices=("symbolic", "numeric", "both"), default="both", help="checker to run")
    p.add_argument("--weight", type=alpha_arg, default=Fraction(0), help="u-weight of the dilation D")
    p.add_argument("--op1-alpha", type=alpha_arg, default=Fraction(1), help="alpha of op1 (nonzero)")
    p.add_argument("--op1-term", action="append", default=[], metavar="C:P:K0,..,Kn",
                   help="op1 monomial c*u^p*prod theta_mu^k_mu (repeatable)")
    p.add_argument("--op1-d", type=alpha_arg, default=Fraction(0), help="dilation coefficient d of op1")

    p = sub.add_parser("verify", formatter_class=fmt, help="three-layer verification of a catalog solution",
                       parents=[_common(None, "override the entry's alpha")])
    p.add_argument("--solution", required=True, help="catalog entry id (see 'condsym catalog')")
    p.add_argument("--layers", type=_int_list, default=[1, 2, 3], help="layers to run, e.g. 1,2,3")
    p.add_argument("--all-conventions", action="store_true",
                   help="run anz1 layers 2 and 3 under both conventions")

    p = sub.add_parser("transform", formatter_class=fmt, help="flow a solution along an operator and re-verify",
                       parents=[_common(None, "override the entry's alpha")])
    p.add_argument("--solution", required=True, help="catalog entry id")
    p.add_argument("--op", required=True, help="operator name as for 'invariance' (op1 excluded)")
    p.add_argument("--epsilon", type=float, default=0.1, help="group parameter")
    p.add_argument("--targets", default="wave,condition", help="comma list of wave, condition, add1, add2")
    p.add_argument("--weight", type=alpha_arg, default=Fraction(0), help="u-weight of the dilation D")

    p = sub.add_parser("catalog", formatter_class=fmt, help="list catalogued solutions",
                       parents=[_common(None, "unused")])
    p.add_argument("--solution", default=None, help="show one entry")

    p = sub.add_parser("fixtures", formatter_class=fmt, help="list printed fixtures or check solution fixtures",
                       parents=[_common(None, "unused")])
    p.add_argument("--show", default=None, metavar="ID", help="show one fixture")
    p.add_argument("--check", action="store_true",
                   help="check the printed solutions against the printed ODE (symbolic)")
    return top


# ------------------------------------------------------------ helpers
def _alpha_str(a) -> Optional[str]:
    return None if a is None else str(a)


def _base_config(args) -> dict:
    return {"n": args.n, "alpha": _alpha_str(args.alpha), "convention": args.convention, "seed": args.seed,
            "samples": args.samples, "tol": args.tol,
            "region": {k: list(v) for k, v in args.region} or None}


def _region_dict(args) -> dict:
    out = {}
    for k, v in args.region:
        if k in out:
            raise UsageError(f"region {k} given twice")
        out[k] = v
    return out


def _status(verdict_status: str) -> str:
    return {"invariant": "pass", "not-invariant": "fail"}.get(verdict_status, "inconclusive")


def resolve_operator(name: str, n: int, weight=Fraction(0), op1=None):
    """Vector field by CLI name."""
    key = name.strip()
    inst = wf.op2_instances(n)
    if key == "D":
        return wf.op_D(n, weight)
    if key in inst:
        return inst[key]
    if key == "op2":
        return wf.op2_arbitrary(n)
    if key == "op1":
        if op1 is None:
            raise UsageError("op1 needs --op1-term")
        return wf.op_op1(op1, n)
    for prefix in ("P", "dx"):
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            mu = int(key[len(prefix):])
            if mu > n:
                raise UsageError(f"coordinate index {mu} exceeds n={n}")
            return wf.translation(n, mu)
    if key.startswith("J") and len(key) == 3 and key[1:].isdigit():
        mu, nu = int(key[1]), int(key[2])
        if mu == nu or max(mu, nu) > n:
            raise UsageError(f"bad Lorentz indices in {key!r}")
        return wf.lorentz(n, mu, nu)
    raise UsageError(f"unknown operator {name!r}")


def _op1_spec(args) -> Optional[wf.Op1Spec]:
    if not args.op1_term:
        return None
    terms = []
    for t in args.op1_term:
        try:
            c, p, ks = t.split(":")
            terms.append((Fraction(c), Fraction(p), tuple(Fraction(k) for k in ks.split(","))))
        except ValueError:
            raise UsageError(f"op1 term must look like C:P:K0,..,Kn, got {t!r}") from None
    if args.op1_alpha == "alpha" or args.op1_d == "alpha":
        raise UsageError("op1 needs numeric alpha and d")
    return wf.Op1Spec(args.op1_alpha, terms, d=args.op1_d)


# ------------------------------------------------------------ commands
def cmd_reduce(args) -> Report:
    a = args.alpha
    cfg = dict(_base_config(args), ansatz=args.ansatz, compare=args.compare, project=args.project)
    rep = Report("reduce", cfg)
    params = None if a == "alpha" else {"alpha": a}
    if args.ansatz == "anz1":
        beta = red.convention_beta(a, args.convention)
        derived = red.reduce_anz1(beta, args.n)
        target = f"x0^({beta})*phi(w)"
    else:
        derived = red.reduce_anz2(a, args.n)
        target = "anz2"
    lines = [f"{args.ansatz} reduced equations (n={args.n}, alpha={a}, convention={args.convention}):"]
    for i, f in enumerate(derived.equations):
        lines.append(f"  [{i}] {f.render()}")
    rep.add(Check(f"reduce/{args.ansatz}", target, "symbolic", "pass",
                  note=f"{len(derived.equations)} equation(s), fitted exactly to the index basis"))
    subject = derived
    if args.project != "none":
        if len(derived.equations) != 1:
            raise UsageError("projection applies to a single reduced equation (use --ansatz anz1)")
        ode = red.normalize_ode(red.project_ode(derived.equations[0], args.project, args.m, args.n))
        lines.append(f"  {args.project} ODE: {to_string(to_expr(ode))} = 0")
        subject = ode
    rep.details.append({"equations": [f.render() for f in derived.equations], "text": "\n".join(lines)})
    if args.compare:
        diff = red.compare_with_paper(subject, args.compare, params)
        st = {"match": "pass", "mismatch": "fail"}.get(diff.verdict, "inconclusive")
        rep.add(Check(f"compare/{diff.fixture}", diff.fixture, "symbolic", st,
                      note=f"{diff.verdict}: {len(diff.mismatches)} differing term(s)" if diff.rows else diff.verdict))
        rep.details.append({"diff": diff.to_dict(), "text": diff.render()})
        fx = wf.paper_fixture(args.compare)
        if args.ansatz == "anz1" and args.project == "none" and fx.kind == "index-form" and len(fx.statement) == 1:
            arb = red.arbitrate_anz1(fx.id, args.convention, None if a == "alpha" else a, args.n,
                                     args.points, args.seed, args.tol)
            agree = arb["consistent"] == (diff.verdict == "match")
            worst = max(arb["runs"], key=lambda r: r["max_relative_deviation"])
            rep.add(Check(f"arbitrate/{fx.id}", fx.id, "numeric", "pass" if arb["consistent"] else "fail",
                          arb["max_relative_deviation"], args.tol, args.points * len(red.profiles(args.n)),
                          args.seed, {"alpha": worst["alpha"], **(worst.get("location") or {})},
                          note="printed equation is " + ("consistent" if arb["consistent"] else "inconsistent")
                               + " with the finite-difference oracle"))
            rep.details.append({"arbitration": {"consistent": arb["consistent"],
                                                "max_relative_deviation": arb["max_relative_deviation"],
                                                "agrees_with_diff": agree}})
    return rep


def cmd_invariance(args) -> Report:
    try:
        system = wf.system_by_name(args.system, args.n, args.alpha, args.F)
    except wf.WaveformError as exc:
        raise UsageError(str(exc)) from None
    v = resolve_operator(args.op, args.n, args.weight, _op1_spec(args))
    cfg = dict(_base_config(args), system=system.name, operator=args.op, F=args.F, mode=args.mode)
    rep = Report("invariance", cfg)
    verdicts = []
    if args.mode in ("symbolic", "both"):
        vs = check_invariance_symbolic(system, v)
        verdicts.append(vs)
        note = "; ".join(vs.notes)
        if vs.residuals:
            note = (note + "; " if note else "") + "; ".join(
                f"{k}: {to_string(to_expr(r))}" for k, r in sorted(vs.residuals.items()))
        rep.add(Check(f"invariance/{args.op}/symbolic", system.name, "symbolic", _status(vs.status),
                      0.0 if vs.invariant else None, note=note if len(note) <= 400 else note[:400] + " ..."))
    if args.mode in ("numeric", "both"):
        region = default_region(args.n)
        for k, (lo, hi) in _region_dict(args).items():
            if not (k.startswith("x") and k[1:].isdigit() and int(k[1:]) <= args.n):
                raise UsageError(f"invariance regions are x0..x{args.n}, got {k}")
            region[int(k[1:])] = (lo, hi)
        needs = any("alpha" in e.params() for _, e in system.equations)
        params = {"alpha": args.alpha} if needs else None
        if params and args.alpha == "alpha":
            raise UsageError("numeric mode needs a numeric --alpha")
        vn = check_invariance_numeric(system, v, args.samples, args.seed, args.tol, region, params)
        verdicts.append(vn)
        rep.add(Check(f"invariance/{args.op}/numeric", system.name, "numeric", _status(vn.status),
                      vn.max_residual, vn.tolerance, vn.samples, vn.seed, vn.location))
    rep.details.append({"operator": v.describe()})
    if len(verdicts) == 2:
        agree = verdicts[0].status == verdicts[1].status or verdicts[0].status == "inconclusive"
        rep.details.append({"agreement": agree,
                            "text": "symbolic and numeric verdicts " + ("agree" if agree else "DISAGREE")})
    return rep


def _conventions(args, entry) -> tuple:
    if entry.ansatz == "anz1" and args.all_conventions:
        return ("euler", "paper")
    return (args.convention,)


def cmd_verify(args) -> Report:
    entry = sol.get_entry(args.solution)
    bad = [k for k in args.layers if k not in (1, 2, 3)]
    if bad or not args.layers:
        raise UsageError(f"layers must be drawn from 1,2,3, got {args.layers}")
    alpha = None if args.alpha is None else args.alpha
    if alpha == "alpha":
        raise UsageError("verify needs a numeric --alpha")
    rep = sol.verify_three_layer(entry.id, _conventions(args, entry), args.n, alpha, args.tol, args.samples,
                                 args.seed, tuple(sorted(set(args.layers))), _region_dict(args) or None)
    rep.config.update(convention=args.convention, region=_base_config(args)["region"])
    if entry.note:
        rep.details.append({"text": f"note: {entry.note}"})
    return rep


def cmd_transform(args) -> Report:
    entry = sol.get_entry(args.solution)
    if args.op == "op1":
        raise UsageError("transform supports concrete operators only")
    v = resolve_operator(args.op, args.n, args.weight)
    if args.alpha == "alpha":
        raise UsageError("transform needs a numeric --alpha")
    targets = tuple(t.strip() for t in args.targets.split(",") if t.strip())
    rep = sol.transform_and_verify(entry.id, v, args.epsilon, targets, args.n, args.alpha, args.samples,
                                   args.seed, args.tol, args.convention, _region_dict(args) or None)
    rep.config.update(operator=args.op, convention=args.convention)
    return rep


def _entry_text(e) -> str:
    bodies = []
    for u, b in e.bodies:
        if isinstance(b, sol.Quadrature):
            bodies.append(f"{u} = int_{b.basepoint:g}^w {to_string(to_expr(b.integrand))} dt")
        else:
            bodies.append(f"{u} = {to_string(to_expr(b))}")
    return (f"{e.id}: {e.ansatz}, {e.projection}, alpha={e.alpha}, printed ODE {e.fixture}\n    "
            + "\n    ".join(bodies) + (f"\n    note: {e.note}" if e.note else ""))


def cmd_catalog(args) -> Report:
    entries = [sol.get_entry(args.solution)] if args.solution else sol.catalog()
    rep = Report("catalog", {"solution": args.solution})
    for e in entries:
        rep.details.append({"id": e.id, "ansatz": e.ansatz, "projection": e.projection, "alpha": str(e.alpha),
                            "fixture": e.fixture, "printed": e.printed, "quadrature": e.quadrature_backed,
                            "text": _entry_text(e)})
    return rep


def cmd_fixtures(args) -> Report:
    rep = Report("fixtures", {"show": args.show, "check": args.check})
    ids = [wf.paper_fixture(args.show).id] if args.show else wf.fixture_ids()
    for fid in ids:
        fx = wf.paper_fixture(fid)
        cond = ", ".join(f"{k}={v}" for k, v in sorted(fx.conditions.items()))
        rep.details.append({"id": fx.id, "kind": fx.kind, "text": f"{fx.id} [{fx.kind}] {fx.text}"
                            + (f"  ({cond})" if cond else "")})
    if args.check:
        for sid in ("sol-a0", "sol-am1"):
            ok = wf.check_fixture_solution(sid, "reduced2")
            rep.add(Check(f"fixture/{sid}", "reduced2", "symbolic", "pass" if ok else "fail", 0.0 if ok else None))
    return rep


COMMANDS = {"reduce": cmd_reduce, "invariance": cmd_invariance, "verify": cmd_verify,
            "transform": cmd_transform, "catalog": cmd_catalog, "fixtures": cmd_fixtures}

DOMAIN_ERRORS = (UsageError, KeyError, ValueError, LieError, NumericsError, ArithmeticError)


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None):
    """Execute one command; returns ``(exit_code, report or None)``."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return (exc.code if isinstance(exc.code, int) else EXIT_USAGE), None
    if args.n < 2:
        print("condsym: error: --n must be at least 2", file=stderr)
        return EXIT_USAGE, None
    try:
        rep = COMMANDS[args.command](args)
    except DOMAIN_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"condsym {args.command}: error: {msg}", file=stderr)
        return EXIT_USAGE, None
    if args.output == "json":
        stdout.write(rep.to_json(timestamp=not args.no_timestamp))
    else:
        stdout.write(rep.render_text())
    return rep.exit_code(args.strict), rep


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
