"""Command-line entry point: ``chainlet run|quantize|integrate|norm``."""
from __future__ import annotations

import argparse
import json
import sys

from . import io
from .elements import ElementChain
from .errors import ChainletError
from .experiments import EXPERIMENTS, ExperimentSpec, run, table_csv, write_result
from .forms import PolyForm
from .norms import bracket
from .polyhedral import DecompositionCert, PolyChain
from .quantize import Cube, quantize_cube, quantize_simplex

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def parse_levels(text):
    """'a..b' (inclusive) or a comma list."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError("empty level range")
        return tuple(range(lo, hi + 1))
    return tuple(int(x) for x in text.split(","))


def _parser():
    p = argparse.ArgumentParser(prog="chainlet", description="Chainlet identity and convergence harness")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run an experiment (E1..E8 or all)")
    r.add_argument("experiment", choices=EXPERIMENTS + ("all",))
    r.add_argument("--n", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--levels", help="a..b or a,b,c")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="output directory (default: print CSV to stdout)")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--timing", action="store_true", help="record wall time per row")

    q = sub.add_parser("quantize", help="quantize a cube or simplex chain")
    q.add_argument("chain")
    q.add_argument("--level", type=int, required=True)
    q.add_argument("--out", help="write the element chain and report JSON here")

    i = sub.add_parser("integrate", help="integrate a form over a chain")
    i.add_argument("chain")
    i.add_argument("form")

    n = sub.add_parser("norm", help="natural-norm bracket of a chain")
    n.add_argument("chain")
    n.add_argument("--r", type=int, required=True)
    n.add_argument("--cert")
    return p


def _cmd_run(args, out):
    ids = EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    levels = parse_levels(args.levels) if args.levels else None
    ok = True
    for eid in ids:
        spec = ExperimentSpec(eid, n=args.n, k=args.k, levels=levels, out=args.out,
                              seed=args.seed, fmt=args.format, timing=args.timing)
        result = run(spec)
        ok &= result.passed
        if args.out:
            for path in write_result(result, args.out, args.format):
                print(path, file=out)
        else:
            for t in result.tables:
                print(f"# {eid} {t.name}", file=out)
                out.write(table_csv(t))
        for c in result.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {eid} {c.name} ({c.detail})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_quantize(args, out):
    src = io.load(args.chain)
    if isinstance(src, Cube):
        E, rep = quantize_cube(src, args.level)
    elif isinstance(src, PolyChain):
        E, rep = quantize_simplex(src, args.level)
    else:
        raise io.InputError("quantize expects a cube or a polyhedral chain")
    doc = {"chain": io.to_json(E), "report": rep.to_json()}
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out, file=out)
    else:
        print(text, file=out)
    return EXIT_OK


def _cmd_integrate(args, out):
    chain = io.load(args.chain)
    if isinstance(chain, Cube):
        chain = chain.chain()
    form = io.load(args.form)
    if not isinstance(chain, (PolyChain, ElementChain)) or not isinstance(form, PolyForm):
        raise io.InputError("integrate expects a chain file and a form file")
    if (form.n, form.k) != (chain.n, chain.k):
        raise io.InputError("form dimension and degree must match the chain")
    print(repr(float(chain.integrate(form))), file=out)
    return EXIT_OK


def _cmd_norm(args, out):
    chain = io.load(args.chain)
    if isinstance(chain, Cube):
        chain = chain.chain()
    if not isinstance(chain, (PolyChain, ElementChain)):
        raise io.InputError("norm expects a chain file")
    certs = []
    if args.cert:
        cert = io.load(args.cert)
        if not isinstance(cert, DecompositionCert):
            raise io.InputError("--cert expects a certificate file")
        certs.append(cert)
    b = bracket(chain, args.r, certs)
    print(json.dumps(b.to_json(), indent=2, default=str), file=out)
    return EXIT_OK if b.consistent else EXIT_FAIL


COMMANDS = {"run": _cmd_run, "quantize": _cmd_quantize, "integrate": _cmd_integrate,
            "norm": _cmd_norm}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.cmd](args, out)
    except (ChainletError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
