"""Command-line entry point: build matrices, run checks, Gauss and relation tools."""
import argparse
import json
import sys
import time
import traceback

from . import __version__
from .builders import U_, V_, model, rational_R
from .scalars import ScalarError
from .verifier import (CHECKS, GRAMMAR_VERSION, SpecializationPole, point_rng, prime_table,
                       run_all, run_check)

MATRICES = ("R", "R21", "RJ", "P", "Q", "QJ", "U", "UU", "D", "Dt")
VARIANTS = ("q", "qtilde", "structured", "compact", "rational")
GAUSS_OPS = ("suite", "decompose", "dpm", "central")
RLL_OPS = ("count", "e2", "e3", "oracle", "twist")
EXPORTS = ("relations", "R")


class UsageError(Exception):
    pass


def make_parser():
    p = argparse.ArgumentParser(prog="qloop", description=__doc__)
    p.add_argument("--version", action="version", version=f"qloop {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    targets = {
        "build": ("matrix", "one of " + ", ".join(MATRICES)),
        "check": ("name", "check name or 'all': " + ", ".join(CHECKS)),
        "gauss": ("op", "one of " + ", ".join(GAUSS_OPS)),
        "rll": ("op", "one of " + ", ".join(RLL_OPS)),
        "export": ("what", "one of " + ", ".join(EXPORTS)),
    }
    for cmd, (dest, hlp) in targets.items():
        sp = sub.add_parser(cmd)
        sp.add_argument(dest, help=hlp)
        sp.add_argument("--n", type=int, default=2)
        sp.add_argument("--xi-mode", choices=("generic", "specialized"), default="specialized")
        sp.add_argument("--mode", choices=("exact", "modular"), default=None)
        sp.add_argument("--points", type=int, default=20)
        sp.add_argument("--prime-index", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--variant", choices=VARIANTS, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("json", "text"), default="json")
        sp.add_argument("--samples", type=int, default=10, help="gauss suite sample count")
        sp.add_argument("--input", default=None, help="JSON file with an L matrix for gauss decompose")
        sp.add_argument("--jobs", type=int, default=1)
    return p


def _need_seed(args):
    if args.seed is None:
        raise UsageError(f"--seed is required for '{args.command}'")
    return args.seed


def _primes(args):
    if args.prime_index is None:
        return None
    table = prime_table()
    if not 0 <= args.prime_index < len(table):
        raise UsageError(f"--prime-index must be in [0, {len(table) - 1}]")
    return (table[args.prime_index],)


def build_matrix(name, n, xi_mode="specialized", variant=None):
    m = model(n, xi_mode)
    variant = variant or ("compact" if name == "RJ" else "q")
    if name in ("R", "R21"):
        if variant == "rational":
            if name == "R21":
                raise UsageError("--variant rational is only available for R")
            return rational_R(n)
        if variant not in ("q", "qtilde"):
            raise UsageError(f"--variant {variant} does not apply to {name}")
        return m.R(variant=variant) if name == "R" else m.R21(variant=variant)
    if name == "RJ":
        if variant not in ("structured", "compact"):
            raise UsageError(f"--variant {variant} does not apply to RJ")
        return m.RJ(form=variant)
    if name == "Q":
        if variant == "qtilde":
            return m.Qtilde(U_, V_)
        if variant != "q":
            raise UsageError(f"--variant {variant} does not apply to Q")
        return m.Qmat(U_, V_)
    table = {"P": lambda: m.P(U_, V_), "QJ": lambda: m.QJ(U_, V_), "U": m.U, "UU": m.UU,
             "D": m.D, "Dt": m.Dt}
    if name not in table:
        raise UsageError(f"unknown matrix {name!r}; expected one of {', '.join(MATRICES)}")
    return table[name]()


def _reports_doc(reports, args):
    return {"engine_version": __version__, "grammar_version": GRAMMAR_VERSION,
            "command": args.command, "reports": [r.to_json() for r in reports]}


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_reports(reports, args):
    if args.format == "json":
        text = json.dumps(_reports_doc(reports, args), sort_keys=True, indent=1) + "\n"
    else:
        lines = []
        for r in reports:
            lines.append(f"{r.name} {r.verdict}")
            for d in r.details:
                if d["verdict"] != "pass":
                    lines.append(f"  {d['verdict']}: {d['label']}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 1 if any(r.verdict == "fail" for r in reports) else 0


def cmd_build(args):
    M = build_matrix(args.matrix, args.n, args.xi_mode, args.variant)
    doc = {"matrix": args.matrix, "n": args.n, "xi_mode": args.xi_mode,
           "variant": args.variant, "engine_version": __version__, **M.to_json()}
    if args.format == "json":
        _emit(json.dumps(doc, sort_keys=True, indent=1) + "\n", args.out)
    else:
        _emit("".join(f"{r} {c} {v}\n" for (r, c), v in M.items()), args.out)
    return 0


def cmd_check(args):
    mode = args.mode or ("exact" if args.n <= 2 else "modular")
    seed = _need_seed(args) if mode == "modular" else (args.seed or 0)
    primes = _primes(args)
    variant = args.variant or "q"
    if variant not in ("q", "qtilde"):
        raise UsageError("check accepts --variant q or qtilde")
    if args.name == "all":
        reports = run_all(args.n, args.mode, seed, args.points, primes, variant, args.jobs)
    elif args.name == "ybe":
        from .verifier import check_ybe
        reports = [check_ybe(args.n, args.mode, seed, args.points, primes,
                             xi_mode=args.xi_mode, variant=variant)]
    elif args.name in CHECKS:
        reports = [run_check(args.name, args.n, args.mode, seed, args.points, primes, variant)]
    else:
        raise UsageError(f"unknown check {args.name!r}; expected 'all' or one of {', '.join(CHECKS)}")
    if args.name == "all":
        reports.sort(key=lambda r: r.name)
    return _emit_reports(reports, args)


def _load_L(path):
    from .gauss import LSample
    from .scalars import parse
    with open(path) as fh:
        doc = json.load(fh)
    rows = doc["rows"] if isinstance(doc, dict) else doc
    return LSample.from_lists([[parse(str(x)) for x in row] for row in rows], provenance="input")


def cmd_gauss(args):
    from . import gauss
    op = args.op
    if op == "suite":
        seed = _need_seed(args)
        return _emit_reports([gauss.gauss_suite(2 * args.n, args.samples, seed)], args)
    if op == "decompose":
        if not args.input:
            raise UsageError("gauss decompose needs --input")
        L = _load_L(args.input)
        t = gauss.gauss_decompose(L)
        report = gauss.make_report("gauss_sample", {"N": L.N}, gauss.sample_results(L, t))
        if args.format == "json":
            doc = {"engine_version": __version__, "triple": t.to_json(), "report": report.to_json()}
            _emit(json.dumps(doc, sort_keys=True, indent=1) + "\n", args.out)
            return 0 if report.passed else 1
        return _emit_reports([report], args)
    if op == "dpm":
        seed = _need_seed(args)
        L = gauss.random_symmetrized(point_rng(seed, "cli-dpm", args.n), 2 * args.n)
        return _emit_reports([gauss.check_dpm(L)], args)
    if op == "central":
        seed = _need_seed(args)
        k_list = gauss.random_k_list(point_rng(seed, "cli-central", args.n), args.n, central=True)
        report = gauss.make_report("central_diagonal", {"n": args.n, "seed": seed},
                                   gauss.central_results(k_list, args.n))
        return _emit_reports([report], args)
    raise UsageError(f"unknown gauss op {op!r}; expected one of {', '.join(GAUSS_OPS)}")


def cmd_rll(args):
    from . import rll
    op, n = args.op, args.n
    if n < 1:
        raise UsageError("--n must be at least 1")
    if op == "count":
        _emit(json.dumps({"n": n, "relations": len(rll.all_relations(n))}) + "\n", args.out)
        return 0
    if op == "e2":
        return _emit_reports([rll.verify_e2(n)], args)
    if op == "e3":
        return _emit_reports([rll.verify_e3(n)], args)
    if op == "oracle":
        return _emit_reports([rll.verify_oracle(n, args.points, _need_seed(args))], args)
    if op == "twist":
        return _emit_reports([rll.verify_twist(n)], args)
    raise UsageError(f"unknown rll op {op!r}; expected one of {', '.join(RLL_OPS)}")


def cmd_export(args):
    if args.what == "relations":
        from . import rll
        if not args.out:
            raise UsageError("export relations needs --out")
        digest = rll.export_relations(args.n, args.out, args.format)
        sys.stdout.write(json.dumps({"path": args.out, "sha256": digest}) + "\n")
        return 0
    if args.what == "R":
        args.matrix = "R"
        return cmd_build(args)
    raise UsageError(f"unknown export {args.what!r}; expected one of {', '.join(EXPORTS)}")


COMMANDS = {"build": cmd_build, "check": cmd_check, "gauss": cmd_gauss, "rll": cmd_rll,
            "export": cmd_export}


def dispatch(argv):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.n < 1:
        print("qloop: error: --n must be at least 1", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qloop: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"qloop: error: {exc}", file=sys.stderr)
        return 2
    except (ScalarError, SpecializationPole, ArithmeticError) as exc:
        print(f"qloop: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3
    print(f"qloop: done in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


def main(argv=None):
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
