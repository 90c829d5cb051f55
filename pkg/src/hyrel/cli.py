"""Command-line front door for the whole pipeline.

Subcommands:
  check      parse a relational model, elaborate a command, lower, solve
  translate  emit the lowered machines as SMV plus the prenex property
  smv-check  check a prenex property directly over SMV machines
  oracle     brute-force instance search with the reference semantics
  bench      run a JSON suite of cases in a worker pool and compare verdicts

Exit status: 0 = conclusive result, 2 = inconclusive, 1 = error.
"""

import argparse
import json
import multiprocessing
import os
import pathlib
import sys
import time
from dataclasses import dataclass

from . import backend_exp as BE
from . import backend_sym as BS
from . import ltl as M
from . import witness as W
from .core.ast import HyrelError, PES, SEMANTICS
from .core.enumerate import find_instance
from .frontend import (
    ParseError, elaborate, parse_hyperltl, parse_smv, parse_spec,
    print_hyperltl,
)
from .hyperize import Composition, LoweredProblem, _empty_outer_machine, lower
from .ltl import FORALL, HyperLtlSpec
from .models import model_path
from .rl2ltl import emit_smv

DEFAULT_K = 4
DEFAULT_TIMEOUT = 200.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--backend", choices=("exp", "sym"), default=None)
    p.add_argument("-k", type=int, default=None,
                   help="unrolling depth (k+1 states per trace)")
    p.add_argument("--semantics", choices=SEMANTICS, default=None)
    p.add_argument("--no-compose", action="store_true")
    p.add_argument("--no-symmetry", action="store_true")
    p.add_argument("--no-mult", action="store_true")
    p.add_argument("--no-absorb", action="store_true")
    p.add_argument("--split-init", action="store_true")
    p.add_argument("--solver", default=None,
                   help="external QBF solver command (invoked on a .qcir file)")
    p.add_argument("--format", choices=("text", "json", "dot"),
                   default="text")
    p.add_argument("--seed", type=int, default=0)


def _build_parser():
    top = _Parser(prog="hyrel", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="check a relational model command")
    p.add_argument("spec")
    p.add_argument("command", nargs="?", default=None)
    _add_common(p)

    p = sub.add_parser("translate",
                       help="emit lowered SMV machines and the property")
    p.add_argument("spec")
    p.add_argument("command", nargs="?", default=None)
    _add_common(p)

    p = sub.add_parser("smv-check",
                       help="check a prenex property over SMV machines")
    p.add_argument("files", nargs="+",
                   help="one or more .smv machines followed by the property "
                        "file")
    _add_common(p)

    p = sub.add_parser("oracle", help="reference brute-force instance search")
    p.add_argument("spec")
    p.add_argument("command", nargs="?", default=None)
    _add_common(p)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("suite")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None,
                   help="per-case timeout in seconds (default 200)")
    _add_common(p)
    return top


def _read(path):
    p = pathlib.Path(path)
    if str(path).startswith("bundled:"):
        return model_path(str(path)[len("bundled:"):]).read_text()
    return p.read_text()


# ---------------------------------------------------------------------------
# Shared runners


@dataclass
class RunOutcome:
    verdict: object
    lp: object
    hyper: object  # original hyper problem, or None for the SMV path
    kind: str  # "check" | "run" | "property"
    negated: bool
    k: int
    sem: str
    backend: str
    elapsed: float

    @property
    def result(self):
        o = self.verdict.outcome
        if o == "INCONCLUSIVE" or not self.verdict.conclusive:
            return "inconclusive"
        if self.kind == "run":
            return "sat" if o == "SAT" else "unsat"
        if self.negated:
            return "violated" if o == "SAT" else "holds"
        return "holds" if o == "SAT" else "violated"


def _run_backend(lp, args, k, sem, backend):
    if backend == "exp":
        return BE.check(lp, k + 1, absorb=not args.no_absorb,
                        split=args.split_init)
    return BS.check(lp, k, sem,
                    engine="external" if args.solver else "builtin",
                    command=args.solver, absorb=not args.no_absorb)


def _lower_spec(args):
    text = _read(args.spec)
    model = parse_spec(text)
    res = elaborate(model, args.command, mult_lifting=not args.no_mult)
    k = args.k if args.k is not None else (res.k if res.k is not None
                                           else DEFAULT_K)
    sem = args.semantics or res.sem or PES
    backend = args.backend or res.backend or "sym"
    compose = backend == "sym" and not args.no_compose
    lp = lower(res.hyper, k=k, compose=compose,
               symmetry=not args.no_symmetry)
    kind = model.commands()[res.command].kind
    return res, lp, k, sem, backend, kind


def run_spec_check(args):
    start = time.monotonic()
    res, lp, k, sem, backend, kind = _lower_spec(args)
    v = _run_backend(lp, args, k, sem, backend)
    return RunOutcome(v, lp, res.hyper, kind, kind == "check", k, sem,
                      backend, time.monotonic() - start)


def _smv_lowered(args):
    if len(args.files) < 2:
        raise UsageError(
            "smv-check needs at least one machine file and a property file")
    *mfiles, pfile = args.files
    sources = {}
    for f in mfiles:
        src = parse_smv(_read(f))
        name = pathlib.Path(str(f).split(":", 1)[-1]).stem
        if name in sources:
            raise UsageError(f"duplicate machine name {name!r}")
        sources[name] = src
    spec = parse_hyperltl(
        _read(pfile), {n: s.machine() for n, s in sources.items()})
    if not spec.prefix:
        raise UsageError("the property has no trace quantifiers")
    negated = spec.prefix[0][0] == FORALL
    prefix = spec.prefix
    body = spec.body
    if negated:
        # search for a counterexample of a universally-led property
        prefix = tuple(
            (M.EXISTS if pol == FORALL else FORALL, var, mname)
            for pol, var, mname in prefix)
        body = M.nnf(M.lnot(body))
    machines = []
    resolved = []
    residuals = {}
    for pol, var, mname in prefix:
        if mname is None:
            if len(sources) != 1:
                raise UsageError(
                    f"trace variable {var} does not name its machine and "
                    "several machines were given")
            mname = next(iter(sources))
        if mname not in sources:
            raise UsageError(f"unknown machine {mname!r} for trace {var}")
        src = sources[mname]
        residual = M.land(*(
            M.map_atoms(f, lambda a, _v=var: M.LAtom(_v, a.expr))
            for f in src.ltlspec))
        if isinstance(residual, M.LTrue):
            residual = None
        m = src.machine(trace_var=var).replaced(name=mname,
                                                residual=residual)
        machines.append(m)
        resolved.append((pol, var, mname))
        residuals[var] = (pol, residual)
    assumptions = M.land(*(r for pol, r in residuals.values()
                           if pol == FORALL and r is not None))
    goal = M.land(*([r for pol, r in residuals.values()
                     if pol == M.EXISTS and r is not None] + [body]))
    full = M.limplies(assumptions, goal)
    new_prefix = tuple(resolved)
    comp = Composition(None, new_prefix, None,
                       {var: [(var, mname, {})]
                        for _, var, mname in resolved}, ())
    lp = LoweredProblem((_empty_outer_machine(),) + tuple(machines),
                        HyperLtlSpec(new_prefix, full), comp)
    return lp, negated


def run_smv_check(args):
    start = time.monotonic()
    lp, negated = _smv_lowered(args)
    k = args.k if args.k is not None else DEFAULT_K
    sem = args.semantics or PES
    backend = args.backend or "exp"
    v = _run_backend(lp, args, k, sem, backend)
    return RunOutcome(v, lp, None, "property", negated, k, sem, backend,
                      time.monotonic() - start)


# ---------------------------------------------------------------------------
# Reporting


def _print_outcome(out, args, stream=None):
    stream = stream or sys.stdout
    v = out.verdict
    lines = [
        f"result: {out.result}",
        f"conclusive: {'true' if v.conclusive else 'false'}",
        f"search-outcome: {v.outcome}"
        + (f" (bounded: {v.stats['bounded']})"
           if v.outcome == 'INCONCLUSIVE' and 'bounded' in v.stats else ""),
        f"k: {out.k}",
        f"semantics: {out.sem}",
        f"backend: {out.backend}",
    ]
    sizes = v.stats.get("sizes")
    if sizes:
        parts = [f"{tag}={a}/{b}" for tag, (a, b) in sorted(sizes.items())]
        lines.append("sizes: " + " ".join(parts))
    lines.append(f"time: {out.elapsed:.2f}s")
    for wmsg in v.warnings:
        lines.append(f"warning: {wmsg}")
    info = sys.stderr if args.format == "json" else stream
    print("\n".join(lines), file=info)
    if v.witness:
        try:
            w = W.backtrace(v, out.lp, out.hyper)
        except HyrelError as e:
            print(f"warning: witness backtrace failed: {e}", file=sys.stderr)
            return
        print(W.render(w, args.format), end="", file=stream)


def _exit_code(out):
    return 0 if out.verdict.conclusive else 2


# ---------------------------------------------------------------------------
# Subcommand drivers


def _cmd_check(args):
    out = run_spec_check(args)
    _print_outcome(out, args)
    return _exit_code(out)


def _cmd_smv_check(args):
    out = run_smv_check(args)
    _print_outcome(out, args)
    return _exit_code(out)


def _cmd_translate(args):
    text = _read(args.spec)
    model = parse_spec(text)
    res = elaborate(model, args.command, mult_lifting=not args.no_mult)
    k = args.k if args.k is not None else (res.k if res.k is not None
                                           else DEFAULT_K)
    compose = not args.no_compose
    lp = lower(res.hyper, k=k, compose=compose,
               symmetry=not args.no_symmetry, check_empty=False)
    chunks = []
    for m in lp.machines:
        if not m.variables and m.trace_var is None:
            continue
        chunks.append(f"-- machine {m.trace_var or m.name}\n"
                      + emit_smv(m, include_residual=False))
    chunks.append("-- property\n" + print_hyperltl(lp.spec))
    sys.stdout.write("\n".join(chunks))
    return 0


def _cmd_oracle(args):
    text = _read(args.spec)
    model = parse_spec(text)
    res = elaborate(model, args.command, mult_lifting=not args.no_mult)
    k = args.k if args.k is not None else (res.k if res.k is not None
                                           else DEFAULT_K)
    t = find_instance(res.hyper, max_prefix=k + 1)
    kind = model.commands()[res.command].kind
    if t is None:
        print(f"oracle: no instance with prefix length <= {k + 1}")
        return 2
    label = ("counterexample" if kind == "check" else "instance")
    print(f"oracle: {label} found")
    w = W.RelationalWitness(
        (W.WitnessTrace(W.OUTER, "outer", t.states, t.loop),), ())
    sys.stdout.write(W.render(w, args.format))
    return 0


# ---------------------------------------------------------------------------
# Bench


_RES_SYMBOL = {"holds": "✔", "sat": "✔",
               "violated": "✗", "unsat": "✗"}


def _bench_case(case, base):
    """Run one suite case; returns a plain-dict record (worker-safe)."""
    flags = case.get("flags", {})
    ns = argparse.Namespace(
        backend=case.get("backend"), k=case.get("k"),
        semantics=case.get("semantics"),
        no_compose=flags.get("no_compose", False),
        no_symmetry=flags.get("no_symmetry", False),
        no_mult=flags.get("no_mult", False),
        no_absorb=flags.get("no_absorb", False),
        split_init=flags.get("split_init", False),
        solver=case.get("solver"), format="text", seed=0,
    )

    def resolve(p):
        if str(p).startswith("bundled:"):
            return str(p)
        return str((pathlib.Path(base) / p))

    try:
        if "spec" in case:
            ns.spec = resolve(case["spec"])
            ns.command = case.get("command")
            out = run_spec_check(ns)
        else:
            ns.files = [resolve(f) for f in case["machines"]]
            ns.files.append(resolve(case["property"]))
            out = run_smv_check(ns)
    except (HyrelError, ParseError, OSError, UsageError) as e:
        return {"name": case.get("name", "?"), "error": str(e)}
    v = out.verdict
    sizes = v.stats.get("sizes") or {}
    record = {
        "name": case.get("name", "?"),
        "result": out.result,
        "conclusive": v.conclusive,
        "k": out.k,
        "semantics": out.sem,
        "backend": out.backend,
        "sizes": {str(t): list(ab) for t, ab in sizes.items()},
        "time": round(out.elapsed, 3),
        "warnings": list(v.warnings),
    }
    if v.witness:
        try:
            w = W.backtrace(v, out.lp, out.hyper)
            record["witness"] = W.render_json(w)
        except HyrelError as e:
            record["witness_error"] = str(e)
    return record


def bench(suite_path, jobs=None, timeout=None, stream=None):
    """Run a suite; returns (records, ok). Report order == input order."""
    stream = stream or sys.stdout
    doc = json.loads(_read(suite_path))
    cases = doc["cases"] if isinstance(doc, dict) else doc
    base = pathlib.Path(str(suite_path)).resolve().parent
    timeout = timeout if timeout is not None else \
        (doc.get("timeout", DEFAULT_TIMEOUT) if isinstance(doc, dict)
         else DEFAULT_TIMEOUT)
    jobs = jobs or min(4, os.cpu_count() or 1)

    records = [None] * len(cases)
    if cases:
        ctx = multiprocessing.get_context("fork") \
            if "fork" in multiprocessing.get_all_start_methods() \
            else multiprocessing.get_context()
        with ctx.Pool(processes=min(jobs, len(cases))) as pool:
            pending = [
                pool.apply_async(_bench_case, (case, str(base)))
                for case in cases
            ]
            for i, (case, fut) in enumerate(zip(cases, pending)):
                budget = case.get("timeout", timeout)
                try:
                    records[i] = fut.get(timeout=budget)
                except multiprocessing.TimeoutError:
                    records[i] = {"name": case.get("name", "?"),
                                  "error": f"timeout after {budget}s"}

    ok = True
    header = f"{'case':24} {'res':4} {'k':>3} {'sem':5} {'size':14} " \
             f"{'t(s)':>8}  status"
    print(header, file=stream)
    print("-" * len(header), file=stream)
    for case, rec in zip(cases, records):
        name = rec["name"]
        if "error" in rec:
            status = f"ERROR: {rec['error']}"
            symbol, kk, sem, size, t = "!", "-", "-", "-", "-"
            match = case.get("expect") is None
        else:
            symbol = _RES_SYMBOL.get(rec["result"], "❓")
            kk = rec["k"]
            sem = rec["semantics"]
            sizes = rec["sizes"]
            size = " ".join(f"{a}×{b}" if a != b else str(a)
                            for _, (a, b) in sorted(sizes.items())) or "-"
            t = f"{rec['time']:.2f}"
            expect = case.get("expect")
            match = expect is None or expect == rec["result"]
            status = "ok" if match else \
                f"MISMATCH: expected {expect}, got {rec['result']}"
        ok = ok and match
        print(f"{name:24} {symbol:4} {kk!s:>3} {sem!s:5} {size:14} "
              f"{t!s:>8}  {status}", file=stream)
    return records, ok


def _cmd_bench(args):
    records, ok = bench(args.suite, args.jobs, args.timeout)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Entry points


def cli_main(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        if args.cmd == "check":
            return _cmd_check(args)
        if args.cmd == "translate":
            return _cmd_translate(args)
        if args.cmd == "smv-check":
            return _cmd_smv_check(args)
        if args.cmd == "oracle":
            return _cmd_oracle(args)
        if args.cmd == "bench":
            return _cmd_bench(args)
        raise UsageError(f"unknown subcommand {args.cmd}")
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ParseError, HyrelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
