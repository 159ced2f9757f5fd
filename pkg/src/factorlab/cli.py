"""Command-line front end: ``factorlab <subcommand> [flags]``.

Exit codes: 0 success or certified, 1 refusal or invalid input, 2 budget
exhausted (no certificate), 3 a check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import __version__
from . import counterexamples as cx
from . import vector as vv
from .core import Instance, inequality_ratio
from .disentangle import (
    disentangle,
    duality_certificate,
    maurey_factorise,
    verify_certificate,
)
from .documents import (
    certificate_to_dict,
    dumps,
    encode,
    instance_to_dict,
    load_certificate,
    load_instance,
)
from .errors import FactorlabError
from .oracle import brute_force_constant, estimate_best_constant

EXIT_OK, EXIT_REFUSED, EXIT_BUDGET, EXIT_FAILED = 0, 1, 2, 3
CSV_COLUMNS = ("estimate", "stderr", "samples", "seed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text: str):
    """Comma separated numbers, or a path to a JSON array."""
    text = text.strip()
    if text.startswith("[") or "," in text or _is_number(text):
        try:
            vals = json.loads(text) if text.startswith("[") else [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse numbers from {text!r}") from None
        return [float(v) for v in vals]
    try:
        with open(text, encoding="utf-8") as fh:
            return [float(v) for v in json.load(fh)]
    except (OSError, ValueError, TypeError):
        raise argparse.ArgumentTypeError(f"{text!r} is neither a number list nor a JSON array file") from None


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the report here instead of standard output")
    common.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    common.add_argument("--manifest", help="also write a run manifest to this path")

    parser = _Parser(prog="factorlab", description="Disentanglement certificates and related experiments.")
    parser.add_argument("--version", action="version", version=f"factorlab {__version__}")
    parser.add_argument("--validate-report", metavar="PATH", help="check that PATH is a well-formed report")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="compute certificate weights")
    p.add_argument("--instance", required=True)
    p.add_argument("--constant", type=float, help="constant A (default: known or estimated)")
    p.add_argument("--cap", type=float, help="fixed cap (default: schedule 1+1e-4, 2, 4, ..., 1024)")
    p.add_argument("--budget", type=int, default=4000, help="separation oracle budget per call")
    p.add_argument("--max-rounds", type=int, default=300)
    p.add_argument("--explore", action="store_true", help="attempt exponents outside the guaranteed range")

    p = sub.add_parser("verify", parents=[common], help="check a certificate")
    p.add_argument("--instance", required=True)
    p.add_argument("--certificate", required=True)
    p.add_argument("--budget", type=int, default=4000)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("duality", parents=[common], help="weights for an L^q bound with q > 1")
    p.add_argument("--instance", required=True)
    p.add_argument("--weight", required=True, type=_floats, help="G as comma list or JSON file")
    p.add_argument("--constant", type=float)
    p.add_argument("--cap", type=float)
    p.add_argument("--budget", type=int, default=4000)

    p = sub.add_parser("maurey", parents=[common], help="weights for an L^q bound with q < 1")
    p.add_argument("--instance", required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--constant", type=float)
    p.add_argument("--cap", type=float)
    p.add_argument("--budget", type=int, default=4000)

    p = sub.add_parser("constant", parents=[common], help="lower bound on the best constant")
    p.add_argument("--instance", required=True)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--grid", type=int, help="use exhaustive grid search with this many levels")

    p = sub.add_parser("khintchine", parents=[common], help="Rademacher moment ratio")
    p.add_argument("--a", required=True, type=_floats)
    p.add_argument("--q", required=True, type=float)
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("stable", parents=[common], help="p-stable moment ratio")
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--q", required=True, type=float)
    p.add_argument("--a", required=True, type=_floats)
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("type", parents=[common], help="empirical Rademacher-type constant of l^r")
    p.add_argument("--r", required=True, type=float)
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--dim", required=True, type=int)
    p.add_argument("--N", required=True, type=int)
    p.add_argument("--samples", type=int, default=200)

    p = sub.add_parser("rs", parents=[common], help="Rudin-Shapiro polynomial properties")
    p.add_argument("--m", required=True, type=int)
    p.add_argument("--check", action="store_true", help="exit 3 when a property fails")
    p.add_argument("--grid", type=int)

    p = sub.add_parser("ftp", parents=[common], help="growth of the convolution counterexample")
    p.add_argument("--r", required=True, type=float)
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--M", required=True, type=int)
    p.add_argument("--start", type=int, default=4)

    p = sub.add_parser("gallery", parents=[common], help="emit a gallery instance")
    p.add_argument("--kind", required=True, choices=cx.GALLERY_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--emit", help="write the instance document here")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("--manifest", required=True)
    return parser


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, result dict or CSV rows, outcome)


def _solve_report(rep, inst: Instance) -> dict:
    doc = {
        "outcome": rep.outcome,
        "iterations": rep.iterations,
        "constraint_counts": rep.constraint_counts,
        "worst_residuals": rep.worst_residuals,
        "constant": rep.constant,
        "cap": rep.cap,
        "required_cap_lower": rep.required_cap_lower,
        "required_cap_upper": rep.required_cap_upper,
        "separation_methods": rep.separation_methods,
        "oracle_budget": rep.oracle_budget,
        "certificate": certificate_to_dict(rep.certificate) if rep.certificate is not None else None,
    }
    return doc


def _outcome_code(outcome: str) -> int:
    return EXIT_OK if outcome == "certified" else EXIT_BUDGET


def cmd_solve(a):
    inst = load_instance(a.instance)
    rep = disentangle(inst, A=a.constant, cap=a.cap, seed=a.seed, max_rounds=a.max_rounds,
                      oracle_budget=a.budget, explore=a.explore)
    return _outcome_code(rep.outcome), _solve_report(rep, inst), rep.outcome


def cmd_verify(a):
    inst = load_instance(a.instance)
    cert = load_certificate(a.certificate)
    rep = verify_certificate(inst, cert, budget=a.budget, seed=a.seed, trials=a.trials, tol=a.tol)
    doc = {
        "ok": rep.ok,
        "geometric_floor": rep.geometric_floor,
        "geometric_residual": rep.geometric_residual,
        "worst_atom": rep.worst_atom,
        "separation": rep.separation,
        "separation_methods": rep.separation_methods,
        "chain_trials": rep.chain_trials,
        "chain_max_ratio": rep.chain_max_ratio,
        "chain_failures": rep.chain_failures,
    }
    outcome = "pass" if rep.ok else "fail"
    return (EXIT_OK if rep.ok else EXIT_FAILED), doc, outcome


def cmd_duality(a):
    inst = load_instance(a.instance)
    cert, rep = duality_certificate(inst, np.array(a.weight), A=a.constant, cap=a.cap, seed=a.seed,
                                    oracle_budget=a.budget)
    doc = _solve_report(rep, inst)
    doc["certificate"] = certificate_to_dict(cert) if cert is not None else None
    return _outcome_code(rep.outcome), doc, rep.outcome


def cmd_maurey(a):
    inst = load_instance(a.instance)
    res = maurey_factorise(inst, q=a.q, A=a.constant, cap=a.cap, seed=a.seed, oracle_budget=a.budget)
    doc = _solve_report(res.report, inst)
    doc["certificate"] = certificate_to_dict(res.certificate) if res.certificate is not None else None
    doc.update({"B": res.B, "q": res.q, "dual_norm": res.dual_norm, "consistency_residual": res.consistency_residual})
    return _outcome_code(res.report.outcome), doc, res.report.outcome


def cmd_constant(a):
    inst = load_instance(a.instance)
    q = inst.profile.q if inst.profile.q is not None else 1.0
    if a.grid is not None:
        est = brute_force_constant(inst, a.grid, q=q)
    else:
        est = estimate_best_constant(inst, budget=a.budget, seed=a.seed, q=q)
    doc = {"method": est.method, "bound": est.lower_bound, "constant": est.constant,
           "evaluations": est.evaluations, "witness": [np.asarray(w) for w in est.witness],
           "check_ratio": inequality_ratio(inst, est.witness, q)}
    return EXIT_OK, doc, "estimated"


def cmd_khintchine(a):
    r = vv.khintchine_check(a.a, a.q, samples=a.samples, seed=a.seed)
    row = dict(r.as_row(), exact=int(r.exact), q=a.q, N=len(a.a))
    return EXIT_OK, [row], "estimated"


def cmd_stable(a):
    r = vv.stable_equivalence_check(a.p, a.q, a.a, samples=a.samples, seed=a.seed)
    row = dict(r.as_row(), reference=r.reference, p=a.p, q=a.q, N=len(a.a))
    return EXIT_OK, [row], "estimated"


def cmd_type(a):
    r = vv.type_constant_estimate(a.dim, a.r, a.p, a.N, samples=a.samples, seed=a.seed)
    row = {"estimate": r.constant, "stderr": 0.0, "samples": r.samples, "seed": r.seed,
           "r": a.r, "p": a.p, "dim": a.dim, "N": a.N}
    return EXIT_OK, [row], "estimated"


def cmd_rs(a):
    rep = cx.verify_rs_properties(a.m, a.grid)
    conv = cx.dirichlet_block_convolution(a.m)
    P, Q = cx.rudin_shapiro(a.m)
    doc = {"m": a.m, "properties": rep, "convolution": conv,
           "P": P.coefficients.real.astype(int).tolist(), "Q": Q.coefficients.real.astype(int).tolist()}
    ok = rep["ok"] and conv["ok"]
    code = EXIT_FAILED if (a.check and not ok) else EXIT_OK
    return code, doc, "pass" if ok else "fail"


def cmd_ftp(a):
    t = cx.ftp_growth_experiment(a.r, a.p, a.M, a.start)
    doc = {"r": t.r, "p": t.p, "rows": t.rows, "band_ok": t.band_ok, "bounded_ok": t.bounded_ok,
           "two_way_ok": t.two_way_ok, "multiplier_block_norms": t.multiplier_block_norms,
           "multiplier_norm_sum": float(sum(t.multiplier_block_norms))}
    return (EXIT_OK if t.ok else EXIT_FAILED), doc, "pass" if t.ok else "fail"


def cmd_gallery(a):
    params = {k: v for k, v in (("n", a.n), ("d", a.d), ("lam", a.lam)) if v is not None}
    g = cx.gallery(a.kind, **params)
    inst_doc = instance_to_dict(g.instance)
    if a.emit:
        with open(a.emit, "w", encoding="utf-8") as fh:
            fh.write(dumps(inst_doc) + "\n")
    doc = {"kind": g.kind, "verdict": g.verdict, "witnesses": g.witnesses, "parameters": g.parameters,
           "predicted": g.predicted, "atoms": g.instance.space_x.atom_count, "emitted": a.emit}
    return EXIT_OK, doc, g.verdict


COMMANDS = {
    "solve": cmd_solve, "verify": cmd_verify, "duality": cmd_duality, "maurey": cmd_maurey,
    "constant": cmd_constant, "khintchine": cmd_khintchine, "stable": cmd_stable, "type": cmd_type,
    "rs": cmd_rs, "ftp": cmd_ftp, "gallery": cmd_gallery,
}
CSV_COMMANDS = {"khintchine", "stable", "type"}


def _parameters(args) -> dict:
    skip = {"command", "out", "manifest", "validate_report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def render(command: str, args, code: int, result, outcome: str) -> str:
    if command in CSV_COMMANDS:
        buf = io.StringIO()
        cols = list(CSV_COLUMNS) + [k for k in result[0] if k not in CSV_COLUMNS]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in result:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()
    doc = {
        "report": command,
        "version": __version__,
        "seed": args.seed,
        "parameters": _parameters(args),
        "outcome": outcome,
        "exit_code": code,
        "result": result,
    }
    return dumps(doc) + "\n"


# ---------------------------------------------------------------------------
# report validation


def validate_report(text: str):
    """Return a list of problems (empty when the report is well formed)."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            return [f"not valid JSON: {exc}"]
        problems = []
        for key in ("report", "version", "seed", "parameters", "outcome", "exit_code", "result"):
            if key not in doc:
                problems.append(f"missing field '{key}'")
        if doc.get("report") not in COMMANDS:
            problems.append(f"unknown report type {doc.get('report')!r}")
        if doc.get("exit_code") not in (0, 1, 2, 3):
            problems.append("exit_code must be 0, 1, 2 or 3")
        if doc.get("report") == "solve" and isinstance(doc.get("result"), dict):
            res = doc["result"]
            if res.get("outcome") not in ("certified", "infeasible-evidence", "budget-exhausted"):
                problems.append("solve outcome is not recognised")
            if res.get("outcome") == "certified" and not res.get("certificate"):
                problems.append("certified solve report without a certificate")
        return problems
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return ["empty report"]
    header = rows[0]
    problems = [f"CSV header lacks '{c}'" for c in CSV_COLUMNS if c not in header]
    if len(rows) < 2:
        problems.append("CSV report has no data rows")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            problems.append(f"line {i}: expected {len(header)} fields")
            continue
        for col in CSV_COLUMNS:
            if col in header:
                try:
                    float(row[header.index(col)])
                except ValueError:
                    problems.append(f"line {i}: '{col}' is not a number")
    return problems


# ---------------------------------------------------------------------------


def _write(path, text):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_REFUSED
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.validate_report:
        try:
            with open(args.validate_report, encoding="utf-8") as fh:
                problems = validate_report(fh.read())
        except OSError as exc:
            print(f"cannot read report: {exc}", file=sys.stderr)
            return EXIT_REFUSED
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_OK if not problems else EXIT_REFUSED
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_REFUSED
    if args.command == "replay":
        try:
            with open(args.manifest, encoding="utf-8") as fh:
                recorded = json.load(fh)["argv"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"cannot read manifest: {exc}", file=sys.stderr)
            return EXIT_REFUSED
        return main(recorded)
    started = time.perf_counter()
    try:
        code, result, outcome = COMMANDS[args.command](args)
    except (FactorlabError, ValueError, OSError) as exc:
        print(f"factorlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    text = render(args.command, args, code, result, outcome)
    _write(args.out, text)
    if args.manifest:
        manifest = {
            "subcommand": args.command,
            "argv": [a for a in argv],
            "parameters": _parameters(args),
            "seed": args.seed,
            "version": __version__,
            "wall_time": time.perf_counter() - started,
            "outcome": outcome,
            "exit_code": code,
        }
        with open(args.manifest, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(encode(manifest), indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
