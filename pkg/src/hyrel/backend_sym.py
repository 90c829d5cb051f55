"""Symbolic bounded model checking backend.

Unrolls bit-blasted machines and the prenex formula into a quantified
Boolean circuit under a chosen bounded semantics (with halting variants
that switch to exact stuttering-lasso evaluation when every machine can
stutter at the last step), solves it with a built-in decision-diagram
expansion solver or an external non-CNF QBF solver via QCIR, and interprets
conclusiveness: SAT under pessimistic-style semantics and UNSAT under
optimistic-style semantics are conclusive; everything else is inconclusive.
"""

import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass

from . import ltl as M
from .backend_exp import ResourceError, Verdict
from .boolexpr import (
    BAnd, BFalse, BNot, BOr, BTrue, FALSE, TRUE, VarIs, band, bimplies,
    bnot, bor, map_leaves,
)
from .core.ast import HOPT, HPES, OPT, PES, HyrelError
from .ltl import EXISTS, FORALL, MachineLasso
from .mvdd import DdManager

DEFAULT_NODE_CEILING = 4_000_000
LASSO = "lasso"  # internal mode: exact evaluation of the stuttering suffix


def _inp(tag, name, step):
    return f"{tag if tag is not None else '$outer'}@{name}@{step}"


@dataclass
class QbfProblem:
    blocks: tuple  # of (polarity, tuple of input names)
    matrix: object  # BExpr circuit over Boolean inputs
    var_map: dict  # (trace tag, variable name, step) -> input name
    halting: object = None  # identity-test circuit for halting semantics
    k: int = 0


@dataclass
class QbfResult:
    satisfiable: bool
    outer_assignment: dict = None  # input name -> bool, leading ∃ block(s)


# ---------------------------------------------------------------------------
# Bit-blasting a lowered problem


def bitblast_problem(lp):
    """Bit-blast every machine and remap the spec's atoms consistently."""
    from . import rl2ltl
    from .hyperize import LoweredProblem

    fixes = {}
    machines = []
    for m in lp.machines:
        bb, fix = rl2ltl.bitblast(m, return_fix=True)
        machines.append(bb)
        fixes[m.trace_var] = fix

    def fix_atom(a):
        fix = fixes.get(a.trace)
        if fix is None:
            return a
        return M.LAtom(a.trace, map_leaves(a.expr, fix))

    spec = M.HyperLtlSpec(lp.spec.prefix,
                          M.map_atoms(lp.spec.body, fix_atom))
    return LoweredProblem(tuple(machines), spec, lp.composition,
                          lp.vacuous, lp.warnings)


# ---------------------------------------------------------------------------
# Unrolling


def unroll_qbf(lp, k, sem):
    """Prenex QBF circuit: k+1 variable copies per machine, acceptance
    INIT(0) ∧ TRANS(0..k-1) ∧ INVAR(0..k); universal machines' acceptance
    is implied, existential machines' conjoined; the body is unrolled by
    the bounded-semantics rules."""
    machines = [(None, lp.outer)]
    machines += [(m.trace_var, m) for m in lp.machines[1:]]
    for _, m in machines:
        if any(not v.boolean for v in m.variables):
            raise HyrelError(
                f"machine {m.name} is not bit-blasted (integer variables)")
    var_map = {}
    for tag, m in machines:
        for i in range(k + 1):
            for v in m.variables:
                var_map[(tag, v.name, i)] = _inp(tag, v.name, i)

    def at(expr, i, prime_step=None):
        def fix(v):
            step = (prime_step if prime_step is not None else i + 1) \
                if v.primed else i
            return VarIs(_inp(tag_box[0], v.name, step), v.value)
        return map_leaves(expr, fix)

    tag_box = [None]

    def acceptance(tag, m):
        tag_box[0] = tag
        parts = [at(m.init_expr(), 0)]
        parts += [at(m.invar_expr(), i) for i in range(k + 1)]
        parts += [at(m.trans_expr(), i) for i in range(k)]
        return band(*parts)

    def halting_test():
        parts = []
        for tag, m in machines:
            tag_box[0] = tag
            parts.append(at(m.trans_expr(), k, prime_step=k))
        return band(*parts)

    def atom_circ(a, i, mode, negated):
        tag_box[0] = a.trace
        if M.atom_prime(M.LAtom(a.trace, a.expr)):
            if mode == LASSO:
                v = at(a.expr, i, prime_step=min(i + 1, k))
                return bnot(v) if negated else v
            if i + 1 > k:
                return TRUE if mode == OPT else FALSE
        v = at(a.expr, i)
        return bnot(v) if negated else v

    memo = {}

    def circ(f, i, mode):
        key = (id(f), i, mode)
        hit = memo.get(key)
        if hit is None:
            hit = memo[key] = _circ(f, i, mode)
        return hit

    def _circ(f, i, mode):
        def sub(g, j):
            return circ(g, j, mode)

        if isinstance(f, M.LTrue):
            return TRUE
        if isinstance(f, M.LFalse):
            return FALSE
        if isinstance(f, M.LAtom):
            return atom_circ(f, i, mode, False)
        if isinstance(f, M.LNot) and isinstance(f.body, M.LAtom):
            # negated-atom literal: the prime-horizon rule applies to the
            # literal as a whole, not through classical negation
            a = f.body
            if M.atom_prime(a) and mode != LASSO and i + 1 > k:
                return TRUE if mode == OPT else FALSE
            return atom_circ(a, i, mode, True)
        if isinstance(f, M.LNot):
            return bnot(sub(f.body, i))
        if isinstance(f, M.LAnd):
            return band(sub(f.left, i), sub(f.right, i))
        if isinstance(f, M.LOr):
            return bor(sub(f.left, i), sub(f.right, i))
        if isinstance(f, M.LNext):
            if mode == LASSO:
                return sub(f.body, min(i + 1, k))
            if mode == PES:
                return FALSE if i >= k else sub(f.body, i + 1)
            return TRUE if i >= k else sub(f.body, i + 1)
        if isinstance(f, M.LAlways):
            if mode == PES:
                return FALSE
            return band(*(sub(f.body, j) for j in range(i, k + 1)))
        if isinstance(f, M.LEventually):
            if mode == OPT:
                return TRUE
            return bor(*(sub(f.body, j) for j in range(i, k + 1)))
        if isinstance(f, M.LUntil):
            found = bor(*(
                band(sub(f.right, l),
                     *(sub(f.left, j) for j in range(i, l)))
                for l in range(i, k + 1)
            ))
            if mode == OPT:
                return bor(found,
                           band(*(sub(f.left, j) for j in range(i, k + 1))))
            return found
        if isinstance(f, M.LRelease):
            found = bor(*(
                band(sub(f.left, l),
                     *(sub(f.right, j) for j in range(i, l + 1)))
                for l in range(i, k + 1)
            ))
            if mode == PES:
                return found
            return bor(found,
                       band(*(sub(f.right, j) for j in range(i, k + 1))))
        if isinstance(f, M.LBefore):
            return FALSE if i == 0 else sub(f.body, i - 1)
        if isinstance(f, M.LOnce):
            return bor(*(sub(f.body, j) for j in range(i + 1)))
        if isinstance(f, M.LHist):
            return band(*(sub(f.body, j) for j in range(i + 1)))
        if isinstance(f, M.LSince):
            return bor(*(
                band(sub(f.right, l),
                     *(sub(f.left, j) for j in range(l + 1, i + 1)))
                for l in range(i + 1)
            ))
        raise TypeError(type(f))

    halting = None
    if sem in (HPES, HOPT):
        halting = halting_test()
        base = PES if sem == HPES else OPT
        phi = bor(band(halting, circ(lp.spec.body, 0, LASSO)),
                  band(bnot(halting), circ(lp.spec.body, 0, base)))
    else:
        phi = circ(lp.spec.body, 0, sem)

    # acceptances nest by quantifier order (innermost first): existential
    # levels conjoin theirs, universal levels assume theirs — conjoining
    # an inner existential acceptance outside an enclosing universal
    # implication would break vacuous truth over empty path domains
    matrix = phi
    for (tag, m), pol in reversed(list(zip(
            machines, [EXISTS] + [p for p, _, _ in lp.spec.prefix]))):
        acc = acceptance(tag, m)
        matrix = (band(acc, matrix) if pol == EXISTS
                  else bimplies(acc, matrix))

    blocks = []
    for (tag, m), pol in zip(
            machines, [EXISTS] + [p for p, _, _ in lp.spec.prefix]):
        names = tuple(_inp(tag, v.name, i)
                      for i in range(k + 1) for v in m.variables)
        if blocks and blocks[-1][0] == pol:
            blocks[-1] = (pol, blocks[-1][1] + names)
        else:
            blocks.append((pol, names))
    return QbfProblem(tuple(blocks), matrix, var_map, halting, k)


# ---------------------------------------------------------------------------
# Solving


def solve_qbf(q, engine="builtin", command=None,
              node_ceiling=DEFAULT_NODE_CEILING):
    if engine == "external":
        return _solve_external(q, command)
    if engine != "builtin":
        raise HyrelError(f"unknown solver engine {engine!r}")
    order = [((name, False), (False, True))
             for _, names in q.blocks for name in names]
    mgr = DdManager(order)
    u = mgr.from_bexpr(q.matrix)

    def guard():
        if len(mgr.nodes) > node_ceiling:
            raise ResourceError(
                f"diagram node ceiling {node_ceiling} exceeded")

    guard()
    blocks = list(q.blocks)
    lead = 0
    while lead < len(blocks) and blocks[lead][0] == EXISTS:
        lead += 1
    for pol, names in reversed(blocks[lead:]):
        op = "or" if pol == EXISTS else "and"
        for name in reversed(names):
            u = mgr.apply(op, mgr.restrict(u, name, False),
                          mgr.restrict(u, name, True))
            guard()
    if u == 0:
        return QbfResult(False)
    lead_names = [n for _, ns in blocks[:lead] for n in ns]
    idxs = [mgr.index[(n, False)] for n in lead_names]
    try:
        a = next(mgr.sat_assignments(u, idxs))
    except StopIteration:
        return QbfResult(False)
    return QbfResult(True, {n: a.get((n, False), False)
                            for n in lead_names})


# ---------------------------------------------------------------------------
# QCIR export and the external-solver wrapper


def to_qcir(q):
    """Cleansed prenex QCIR-G14 with deterministic gate numbering; returns
    (text, input-name -> number)."""
    nums = {}
    for _, names in q.blocks:
        for n in names:
            nums[n] = len(nums) + 1
    counter = [len(nums)]
    gates = []
    memo = {}

    def lit(b):
        if isinstance(b, BTrue):
            counter[0] += 1
            gates.append(f"{counter[0]} = and()")
            return counter[0]
        if isinstance(b, BFalse):
            counter[0] += 1
            gates.append(f"{counter[0]} = or()")
            return counter[0]
        if isinstance(b, VarIs):
            n = nums[b.name]
            return n if b.value else -n
        if isinstance(b, BNot):
            return -lit(b.body)
        g = memo.get(b)
        if g is not None:
            return g
        op = "and" if isinstance(b, BAnd) else "or"
        args = [lit(a) for a in b.args]
        counter[0] += 1
        g = counter[0]
        gates.append(f"{g} = {op}({', '.join(map(str, args))})")
        memo[b] = g
        return g

    out = lit(q.matrix)
    lines = [f"#QCIR-G14 {counter[0]}"]
    for pol, names in q.blocks:
        if not names:
            continue
        kw = "exists" if pol == EXISTS else "forall"
        lines.append(f"{kw}({', '.join(str(nums[n]) for n in names)})")
    lines.append(f"output({out})")
    lines.extend(gates)
    return "\n".join(lines) + "\n", nums


def to_qdimacs(q):
    """QDIMACS via Tseitin conversion; gate variables join an innermost
    existential block."""
    nums = {}
    for _, names in q.blocks:
        for n in names:
            nums[n] = len(nums) + 1
    counter = [len(nums)]
    clauses = []
    memo = {}

    def lit(b):
        if isinstance(b, BTrue):
            counter[0] += 1
            clauses.append([counter[0]])
            return counter[0]
        if isinstance(b, BFalse):
            counter[0] += 1
            clauses.append([-counter[0]])
            return counter[0]
        if isinstance(b, VarIs):
            n = nums[b.name]
            return n if b.value else -n
        if isinstance(b, BNot):
            return -lit(b.body)
        g = memo.get(b)
        if g is not None:
            return g
        args = [lit(a) for a in b.args]
        counter[0] += 1
        g = counter[0]
        if isinstance(b, BAnd):
            for a in args:
                clauses.append([-g, a])
            clauses.append([g] + [-a for a in args])
        else:
            for a in args:
                clauses.append([g, -a])
            clauses.append([-g] + args)
        memo[b] = g
        return g

    out = lit(q.matrix)
    clauses.append([out])
    lines = [f"p cnf {counter[0]} {len(clauses)}"]
    for i, (pol, names) in enumerate(q.blocks):
        kw = "e" if pol == EXISTS else "a"
        ns = [str(nums[n]) for n in names]
        if i == len(q.blocks) - 1 and pol == EXISTS:
            ns += [str(v) for v in range(len(nums) + 1, counter[0] + 1)]
        if ns:
            lines.append(f"{kw} {' '.join(ns)} 0")
    if not q.blocks or q.blocks[-1][0] != EXISTS:
        extra = [str(v) for v in range(len(nums) + 1, counter[0] + 1)]
        if extra:
            lines.append(f"e {' '.join(extra)} 0")
    lines.extend(" ".join(map(str, c)) + " 0" for c in clauses)
    return "\n".join(lines) + "\n", nums


_RESULT_RE = re.compile(r"^\s*(?:r\s+)?(SAT|UNSAT)\b", re.I | re.M)


def _solve_external(q, command):
    """Invoke `command file.qcir`; the first SAT/UNSAT token (or exit code
    10/20) conveys the result, `v` lines list signed integer literals for
    the outer assignment."""
    if not command:
        raise HyrelError("external engine requires a solver command")
    text, nums = to_qcir(q)
    back = {v: k for k, v in nums.items()}
    with tempfile.NamedTemporaryFile(
            "w", suffix=".qcir", delete=False) as f:
        f.write(text)
        path = f.name
    try:
        proc = subprocess.run(shlex.split(command) + [path],
                              capture_output=True, text=True, timeout=600)
    except OSError as e:
        raise HyrelError(f"solver invocation failed: {e}") from e
    except subprocess.TimeoutExpired as e:
        raise ResourceError("external solver timed out") from e
    out = proc.stdout or ""
    m = _RESULT_RE.search(out)
    if m:
        sat = m.group(1).upper() == "SAT"
    elif proc.returncode in (10, 20):
        sat = proc.returncode == 10
    else:
        raise HyrelError(
            "could not parse solver output "
            f"(exit {proc.returncode}): {out[:500]}{proc.stderr[:500]}")
    if not sat:
        return QbfResult(False)
    assignment = {}
    for line in out.splitlines():
        if line.startswith("v") or line.startswith("V"):
            for tok in line[1:].split():
                try:
                    v = int(tok)
                except ValueError:
                    continue
                if v != 0 and abs(v) in back:
                    assignment[back[abs(v)]] = v > 0
    return QbfResult(True, assignment or None)


# ---------------------------------------------------------------------------
# Verdict interpretation


def approx_unsound(f, neg=False):
    """True when a horizon-sensitive subformula (future operator or primed
    atom) occurs under an odd number of non-literal negations, in which
    case the pessimistic/optimistic approximations lose their one-sided
    soundness and verdicts must stay inconclusive."""
    if isinstance(f, M.LAtom):
        return neg and M.atom_prime(f)
    if isinstance(f, M.LNot):
        if isinstance(f.body, M.LAtom):
            return False  # literals follow the prime-horizon rule directly
        return approx_unsound(f.body, not neg)
    if neg and isinstance(f, (M.LNext, M.LAlways, M.LEventually,
                              M.LUntil, M.LRelease)):
        return True
    return any(approx_unsound(c, neg) for c in M.children(f))


def interpret_verdict(r, sem, *, halting_held=False, total_checked=False,
                      witness=None, stats=None, warnings=(),
                      approx_sound=True):
    stats = stats or {}
    warnings = tuple(warnings)
    if not total_checked:
        warnings += ("transition-relation totality not verified",)
    if not approx_sound and not (r.satisfiable and sem in (HPES, HOPT)
                                 and halting_held):
        warnings += ("one-sided approximation unsound for this formula "
                     "(future operator under past negation); verdict kept "
                     "inconclusive",)
    if r.satisfiable and sem in (PES, HPES) and (
            approx_sound or halting_held):
        return Verdict("SAT", True, witness, stats, warnings)
    if not r.satisfiable and sem in (OPT, HOPT) and approx_sound:
        return Verdict("UNSAT", True, None, stats, warnings)
    if r.satisfiable and sem == HOPT and halting_held:
        return Verdict("SAT", True, witness, stats, warnings)
    stats = dict(stats)
    stats["bounded"] = "SAT" if r.satisfiable else "UNSAT"
    return Verdict("INCONCLUSIVE", False,
                   witness if r.satisfiable else None, stats, warnings)


def stutter_total(m):
    """Syntactic totality stand-in: every invariant state admits a
    stuttering successor, checked by asserting INVAR ∧ ¬(TRANS with primes
    identified) is unsatisfiable on the machine's diagram."""
    from .mvdd import interleaved_order

    mgr = DdManager(interleaved_order(m.variables, primed=False))
    stay = map_leaves(m.trans_expr(),
                      lambda v: VarIs(v.name, v.value, False))
    u = mgr.apply("and", mgr.from_bexpr(m.invar_expr()),
                  mgr.apply("not", mgr.from_bexpr(stay)))
    return u == 0


# ---------------------------------------------------------------------------
# The check


def check(lp, k, sem=PES, engine="builtin", command=None,
          node_ceiling=DEFAULT_NODE_CEILING, absorb=False):
    """Full symbolic pipeline: bit-blast, unroll, solve, interpret.
    Single-trace formula absorption is only applied when every machine
    passes the syntactic stutter-totality check."""
    if lp.vacuous:
        return Verdict("UNSAT", True, None, {"vacuous": True}, lp.warnings)
    bb = bitblast_problem(lp)
    # negation normal form keeps the one-sided approximations sound; weak
    # past negations have no dual here, so their presence around future
    # operators is detected and downgrades conclusiveness instead
    bb = type(bb)(bb.machines,
                  M.HyperLtlSpec(bb.spec.prefix, M.nnf(bb.spec.body)),
                  bb.composition, bb.vacuous, bb.warnings)
    spec, machines = bb.spec, None
    warnings = list(lp.warnings)
    if absorb:
        from .backend_exp import absorb_formula

        ms = {None: bb.machines[0]}
        for m in bb.machines[1:]:
            ms[m.trace_var] = m
        if all(stutter_total(m) for m in ms.values()):
            spec2, ms2, moved = absorb_formula(spec, ms)
            # fold absorbed residuals back into the formula: the symbolic
            # encoding evaluates machine residuals nowhere else
            spec2, ms2 = _residuals_to_body(spec2, ms2)
            # moving body parts into machine acceptance is only an
            # equivalence when every quantifier level keeps at least one
            # length-(k+1) path; otherwise vacuous truth would be lost
            if moved == 0 or all(_has_path(m, k) for m in ms2.values()):
                spec, ms = spec2, ms2
                bb = type(bb)((ms[None],)
                              + tuple(ms[v] for _, v, _ in spec.prefix),
                              spec, bb.composition, bb.vacuous, bb.warnings)
            else:
                warnings.append(
                    "formula absorption skipped: empty quantifier level")
        else:
            warnings.append(
                "formula absorption skipped: stutter-totality check failed")
    bb = type(bb)(bb.machines,
                  M.HyperLtlSpec(bb.spec.prefix, M.nnf(bb.spec.body)),
                  bb.composition, bb.vacuous, bb.warnings)
    sound = not approx_unsound(bb.spec.body)
    q = unroll_qbf(bb, k, sem)
    r = solve_qbf(q, engine, command, node_ceiling)
    halting_held = False
    witness = None
    if r.satisfiable and r.outer_assignment is not None:
        witness = _extract_witness(bb, q, r.outer_assignment)
        if q.halting is not None:
            halting_held = _eval_partial(q.halting, r.outer_assignment)
    stats = {"inputs": sum(len(ns) for _, ns in q.blocks),
             "blocks": len(q.blocks), "k": k, "sem": sem}
    return interpret_verdict(
        r, sem, halting_held=bool(halting_held), witness=witness,
        stats=stats, warnings=tuple(warnings), approx_sound=sound)


def _has_path(m, k):
    """Does the machine admit at least one run of k+1 states?"""
    from .backend_exp import build_explicit

    s = build_explicit(m)
    frontier = set(s.initial)
    for _ in range(k):
        frontier = {j for i in frontier for j in s.succs[i]}
        if not frontier:
            return False
    return bool(frontier)


def _residuals_to_body(spec, machines):
    parts = [spec.body]
    new = {}
    for tag, m in machines.items():
        if m.residual is not None and not isinstance(m.residual, M.LTrue):
            pol = EXISTS if tag is None else next(
                p for p, v, _ in spec.prefix if v == tag)
            if pol == EXISTS:
                parts.append(m.residual)
            else:
                parts = [M.lor(M.lnot(m.residual), M.land(*parts))]
        new[tag] = m.replaced(residual=None)
    return M.HyperLtlSpec(spec.prefix, M.land(*parts)), new


def _eval_partial(circ, assignment):
    """Evaluate a circuit under a partial assignment; None when an input is
    missing."""
    if isinstance(circ, BTrue):
        return True
    if isinstance(circ, BFalse):
        return False
    if isinstance(circ, VarIs):
        v = assignment.get(circ.name)
        return None if v is None else (v == circ.value)
    if isinstance(circ, BNot):
        v = _eval_partial(circ.body, assignment)
        return None if v is None else not v
    vals = [_eval_partial(a, assignment) for a in circ.args]
    if isinstance(circ, BAnd):
        if any(v is False for v in vals):
            return False
        return None if any(v is None for v in vals) else True
    if any(v is True for v in vals):
        return True
    return None if any(v is None for v in vals) else False


def _extract_witness(bb, q, assignment):
    """Per-machine step-state sequences for machines wholly covered by the
    outer assignment; prefix-only (no loop is claimed)."""
    tags = [None] + [v for p, v, _ in bb.spec.prefix if p == EXISTS]
    machines = {None: bb.outer}
    for m in bb.machines[1:]:
        machines[m.trace_var] = m
    out = {}
    for tag in tags:
        m = machines.get(tag)
        if m is None:
            continue
        states = []
        ok = True
        for i in range(q.k + 1):
            st = {}
            for v in m.variables:
                val = assignment.get(_inp(tag, v.name, i))
                if val is None:
                    ok = False
                    break
                st[v.name] = val
            if not ok:
                break
            states.append(st)
        if ok and states:
            out[tag] = tuple(states)
    return out or None
