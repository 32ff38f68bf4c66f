"""Command-line front end: ``mixedaffine {compute,verify,demo}``.

Exit codes: 0 success, 1 mathematical violation, 2 input validation,
3 numerical non-convergence (including tolerance-infeasible reports).
"""

import argparse
import csv
import io
import json
import sys
import time

from . import bodies as B
from . import functionals as F
from . import harness as H
from . import illumination as I
from . import scalar as S
from .errors import MixedAffineError, ValidationError
from .quadrature import DEFAULT_RESOLUTION, build_rule

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VIOLATION, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3

CSV_FIELDS = ["name", "anchor", "relation", "lhs", "rhs", "slack", "rel_slack", "tolerance",
              "status", "equality_case", "sha256", "note"]


def split_list(text):
    """Split a comma-separated descriptor list, keeping JSON documents whole."""
    text = text.strip()
    if text.startswith("["):
        items = json.loads(text)
        return [json.dumps(x) if isinstance(x, dict) else str(x) for x in items]
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s.strip() for s in out if s.strip()]


def parse_function(text):
    text = text.strip()
    if text.startswith("@"):
        with open(text[1:]) as fh:
            return S.from_doc(json.load(fh))
    if text.startswith("{"):
        return S.from_doc(json.loads(text))
    return S.parse_descriptor(text)


def _fmt(x):
    return "%.17g" % x


def _dump(doc):
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _rule(n, rule_n):
    return build_rule(n, rule_n or DEFAULT_RESOLUTION[n])


def _bodies(args, n):
    text = args.bodies or args.body
    if not text:
        raise ValidationError("no bodies given (use --bodies or --body)")
    return [B.parse_descriptor(t, n) for t in split_list(text)]


# --------------------------------------------------------------------------
# compute


def cmd_compute(args):
    start = time.perf_counter()
    n = args.dim
    rule = _rule(n, args.rule_n)
    bodies = _bodies(args, n)
    variant = args.variant.replace("-", "_")
    inputs = {"bodies": bodies}
    if variant == "lp":
        if args.p is None:
            raise ValidationError("--variant lp needs --p")
        if len(bodies) != 1:
            raise ValidationError("--variant lp takes a single body")
        value = F.lp_asa(args.p, bodies[0], rule)
        inputs["p"] = args.p
    else:
        if not args.functions:
            raise ValidationError("no functions given (use --functions)")
        fns = [parse_function(t) for t in split_list(args.functions)]
        inputs["functions"] = fns
        if variant.startswith("ith_"):
            base = F.normalize_variant(variant[4:])
            if args.i is None:
                raise ValidationError(f"--variant {args.variant} needs --i")
            if len(bodies) != 2 or len(fns) != 2:
                raise ValidationError("i-th mixed form takes two bodies and two functions")
            value = F.ith_mixed_asa(base, args.i, fns[0], bodies[0], fns[1], bodies[1], rule)
            inputs["i"] = args.i
        else:
            variant = F.normalize_variant(variant)
            if len(fns) == 1 and len(bodies) == 1:
                value = F.diagonal_asa(fns[0], bodies[0], variant, rule)
            else:
                if len(fns) != len(bodies):
                    raise ValidationError(
                        f"{len(fns)} functions given for {len(bodies)} bodies")
                value = F.mixed(variant, fns, bodies, rule)
    doc = {"schema_version": SCHEMA_VERSION, "command": "compute", "variant": args.variant,
           "value": float(value), "rule": {"n": rule.n, "N": rule.resolution, "nodes": rule.size},
           "inputs": H.digest_of(**inputs)}
    if not args.deterministic:
        doc["wall_time"] = time.perf_counter() - start
    if args.format == "csv":
        _write("variant,value\n%s,%s\n" % (args.variant, _fmt(value)), args.out)
    else:
        _write(_dump(doc), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def reports_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow([r.name, r.anchor, r.relation, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.slack),
                    _fmt(r.rel_slack), _fmt(r.tolerance), r.status, int(bool(r.equality_case)),
                    (r.digest or {}).get("sha256", ""), r.note])
    return buf.getvalue()


def suite_exit_code(counts):
    if counts[H.FAIL]:
        return EXIT_VIOLATION
    if counts[H.INFEASIBLE]:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_verify(args):
    start = time.perf_counter()
    if args.tol is not None and not args.tol > 0:
        raise ValidationError("--tol must be positive")
    dims = tuple(int(d) for d in str(args.dim).split(","))
    for d in dims:
        if d not in (2, 3):
            raise ValidationError(f"dimension not supported: n={d} (supported: 2, 3)")
    if args.trials < 1:
        raise ValidationError("--trials must be >= 1")
    reports = H.run_property_suite(args.seed, args.trials, dims, tol=args.tol,
                                   workers=args.workers, rule_n=args.rule_n)
    counts = H.summarize(reports)
    doc = {"schema_version": SCHEMA_VERSION, "command": "verify", "seed": args.seed,
           "trials": args.trials, "dims": list(dims), "tolerance": args.tol,
           "summary": counts, "reports": [r.to_dict() for r in reports]}
    if not args.deterministic:
        doc["wall_time"] = time.perf_counter() - start
    if args.format == "csv":
        _write(reports_csv(reports), args.out)
    else:
        _write(_dump(doc), args.out)
    if args.csv:
        _write(reports_csv(reports), args.csv)
    code = suite_exit_code(counts)
    print(f"verify: {counts[H.PASS]} pass, {counts[H.FAIL]} fail, "
          f"{counts[H.INFEASIBLE]} tolerance infeasible, {counts[H.INFO]} info", file=sys.stderr)
    return code


# --------------------------------------------------------------------------
# demos


def demo_counterexample(args):
    rule = _rule(2, args.rule_n or 1024)
    rep = H.check_counterexample(rule)
    lhs, star = H.counterexample_values(rule)
    doc = {"schema_version": SCHEMA_VERSION, "command": "demo", "demo": "counterexample",
           "as_psi": lhs, "as_star_psi_polar": star, "ratio": lhs / star, "claimed_ratio": 4.0,
           "report": rep.to_dict()}
    _write(_dump(doc), args.out)
    print(f"as_psi(TB, B) = {_fmt(lhs)}\nas*_psi((TB)polar, B) = {_fmt(star)}\n"
          f"ratio = {lhs / star:.9f} (claimed 4): {rep.status.upper()}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def _illumination_problem(args):
    K = B.parse_descriptor(args.body or "ball", 2)
    variant = (args.variant or "phi").replace("-", "_")
    if args.functions:
        fns = [parse_function(t) for t in split_list(args.functions)]
    else:
        default = "pc:1:0.5" if variant == F.PHI else "pv:1:-1"
        fns = [parse_function(default)] * 2
    if args.bodies:
        gen = [B.parse_descriptor(t, 2) for t in split_list(args.bodies)]
    else:
        gen = [K, K]
    return I.mixed_weight(variant, fns, gen, K=K)


def demo_illumination(args):
    problem = _illumination_problem(args)
    study = I.geometric_limit_estimate(problem, s0=args.s0, levels=args.levels, M=args.M)
    rows = [(s, a, q, study.table[k][0]) for k, (s, a, q) in
            enumerate(zip(study.s, study.area, study.q))]
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "area", "q", "extrapolant"])
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        _write(buf.getvalue(), args.out)
    else:
        doc = {"schema_version": SCHEMA_VERSION, "command": "demo", "demo": "illumination",
               "rows": [dict(zip(["s", "area", "q", "extrapolant"], r)) for r in rows],
               "limit": study.estimate, "direct": problem.reference,
               "relative_difference": study.estimate / problem.reference - 1.0}
        _write(_dump(doc), args.out)
    print(f"limit = {study.estimate:.6f}  direct = {problem.reference:.6f}", file=sys.stderr)
    return EXIT_OK


def demo_flatten_sweep(args):
    rows = H.flatten_sweep(p=args.p if args.p is not None else 2.0,
                           rule=_rule(2, args.rule_n or 1024))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "delta", "value"])
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    _write(buf.getvalue(), args.out)
    vals = [r[2] for r in rows]
    if not all(b < a for a, b in zip(vals, vals[1:])):
        print("flatten-sweep: values are not strictly decreasing", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


DEMOS = {"counterexample": demo_counterexample, "illumination": demo_illumination,
         "flatten-sweep": demo_flatten_sweep}


def cmd_demo(args):
    return DEMOS[args.name](args)


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="mixedaffine",
                                description="General mixed affine surface areas.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--rule-n", type=int, default=None, help="quadrature resolution N")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--deterministic", action="store_true", help="omit wall time")

    c = sub.add_parser("compute", help="evaluate a functional")
    c.add_argument("--variant", required=True,
                   help="phi, psi, phi-star, psi-star, ith-<variant> or lp")
    c.add_argument("--dim", type=int, default=2, choices=[2, 3])
    c.add_argument("--bodies", help="comma-separated body descriptors")
    c.add_argument("--body", help="alias of --bodies for a single body")
    c.add_argument("--functions", help="comma-separated function descriptors")
    c.add_argument("--p", type=float)
    c.add_argument("--i", type=float)
    common(c)
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", help="run the randomized inequality suite")
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--trials", type=int, default=10)
    v.add_argument("--dim", default="2", help="2, 3 or 2,3")
    v.add_argument("--tol", type=float, default=None)
    v.add_argument("--workers", type=int, default=None)
    v.add_argument("--csv", default=None, help="also write the reports as CSV here")
    common(v)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="reproduce a special computation")
    d.add_argument("name", choices=sorted(DEMOS))
    d.add_argument("--body", help="base body (illumination)")
    d.add_argument("--bodies", help="generating bodies (illumination)")
    d.add_argument("--functions", help="generating functions (illumination)")
    d.add_argument("--variant", help="phi or psi (illumination)")
    d.add_argument("--p", type=float, help="L_p exponent (flatten-sweep)")
    d.add_argument("--s0", type=float, default=0.1)
    d.add_argument("--levels", type=int, default=4)
    d.add_argument("--M", type=int, default=1024)
    common(d)
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MixedAffineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
