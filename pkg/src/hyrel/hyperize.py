"""Hyper-problem normalization: negation normal form, prenex extraction of
trace quantifiers, quantifier composition via problem products, and
symmetry-breaking predicates over the outer problem."""

from dataclasses import dataclass

from .core.ast import (
    After, AllQ, Always, And, AtomE, Before, BoundArrow, BoundExpr,
    BoundLeaf, Closure, Compr, Converse, Diff, Eventually, FalseF, Formula,
    Historically, HyperProblem, HyrelError, Iden, Iff, Implies, In, Inter,
    Join, Lone, NoneE, Not, Once, Or, Prime, Problem, Product, Rel,
    RelationDecl, Releases, Sel, Since, Some, SomeQ, TraceAll, TraceSome,
    TrueF, Union, UnivE, Until, children, conj,
)

FORALL, EXISTS = "A", "E"


# ---------------------------------------------------------------------------
# NNF


def nnf_formula(f, neg=False):
    """Negation normal form preserving the exact (infinite) semantics;
    Implies/Iff are expanded, negation survives only on atomic formulas and
    on the past operators without dual nodes."""
    if isinstance(f, TrueF):
        return FalseF() if neg else f
    if isinstance(f, FalseF):
        return TrueF() if neg else f
    if isinstance(f, (In, Some, Lone)):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return nnf_formula(f.body, not neg)
    if isinstance(f, And):
        l, r = nnf_formula(f.left, neg), nnf_formula(f.right, neg)
        return Or(l, r) if neg else And(l, r)
    if isinstance(f, Or):
        l, r = nnf_formula(f.left, neg), nnf_formula(f.right, neg)
        return And(l, r) if neg else Or(l, r)
    if isinstance(f, Implies):
        return nnf_formula(Or(Not(f.left), f.right), neg)
    if isinstance(f, Iff):
        both = And(f.left, f.right)
        neither = And(Not(f.left), Not(f.right))
        return nnf_formula(Or(both, neither), neg)
    if isinstance(f, After):
        return After(nnf_formula(f.body, neg))
    if isinstance(f, Always):
        body = nnf_formula(f.body, neg)
        return Eventually(body) if neg else Always(body)
    if isinstance(f, Eventually):
        body = nnf_formula(f.body, neg)
        return Always(body) if neg else Eventually(body)
    if isinstance(f, Until):
        l, r = nnf_formula(f.left, neg), nnf_formula(f.right, neg)
        return Releases(l, r) if neg else Until(l, r)
    if isinstance(f, Releases):
        l, r = nnf_formula(f.left, neg), nnf_formula(f.right, neg)
        return Until(l, r) if neg else Releases(l, r)
    if isinstance(f, Before):
        body = Before(nnf_formula(f.body))
        return Not(body) if neg else body
    if isinstance(f, Once):
        body = nnf_formula(f.body, neg)
        return Historically(body) if neg else Once(body)
    if isinstance(f, Historically):
        body = nnf_formula(f.body, neg)
        return Once(body) if neg else Historically(body)
    if isinstance(f, Since):
        body = Since(nnf_formula(f.left), nnf_formula(f.right))
        return Not(body) if neg else body
    if isinstance(f, AllQ):
        if neg:
            return SomeQ(f.var, f.domain, nnf_formula(f.body, True))
        return AllQ(f.var, f.domain, nnf_formula(f.body))
    if isinstance(f, SomeQ):
        if neg:
            return AllQ(f.var, f.domain, nnf_formula(f.body, True))
        return SomeQ(f.var, f.domain, nnf_formula(f.body))
    if isinstance(f, TraceAll):
        if neg:
            return TraceSome(f.var, f.problem, nnf_formula(f.body, True))
        return TraceAll(f.var, f.problem, nnf_formula(f.body))
    if isinstance(f, TraceSome):
        if neg:
            return TraceAll(f.var, f.problem, nnf_formula(f.body, True))
        return TraceSome(f.var, f.problem, nnf_formula(f.body))
    raise TypeError(type(f))


# ---------------------------------------------------------------------------
# Trace-variable utilities


def expr_traces(e, out):
    if isinstance(e, Sel):
        out.add(e.trace)
        expr_traces(e.expr, out)
    elif isinstance(e, (Converse, Closure, Prime)):
        expr_traces(e.expr, out)
    elif isinstance(e, (Union, Inter, Diff, Product, Join)):
        expr_traces(e.left, out)
        expr_traces(e.right, out)
    elif isinstance(e, Compr):
        for _, dom in e.decls:
            expr_traces(dom, out)
        formula_traces(e.body, out)


def formula_traces(f, out=None):
    if out is None:
        out = set()
        formula_traces(f, out)
        return out
    if isinstance(f, (In,)):
        expr_traces(f.left, out)
        expr_traces(f.right, out)
    elif isinstance(f, (Some, Lone)):
        expr_traces(f.expr, out)
    elif isinstance(f, (AllQ, SomeQ)):
        expr_traces(f.domain, out)
    elif isinstance(f, (TraceAll, TraceSome)):
        out.add(f.var)
    for c in children(f):
        formula_traces(c, out)
    return out


def has_nested_trace_quant(f):
    from .core.ast import has_trace_quant

    return has_trace_quant(f)


def strip_sel(f, var):
    """Rewrite a single-trace formula by dropping its Sel(·, var) wrappers,
    turning it into a plain constraint of var's problem."""
    return _map_exprs(f, lambda e: _strip_sel_e(e, var))


def _strip_sel_e(e, var):
    if isinstance(e, Sel):
        if e.trace != var:
            raise HyrelError(f"unexpected trace {e.trace} while absorbing")
        return _strip_sel_e(e.expr, var)
    return _rebuild_e(e, lambda sub: _strip_sel_e(sub, var))


def _rebuild_e(e, fn):
    if isinstance(e, (Rel, AtomE, NoneE, UnivE, Iden)):
        return e
    if isinstance(e, (Converse, Closure, Prime)):
        return type(e)(fn(e.expr))
    if isinstance(e, (Union, Inter, Diff, Product, Join)):
        return type(e)(fn(e.left), fn(e.right))
    if isinstance(e, Sel):
        return Sel(fn(e.expr), e.trace)
    if isinstance(e, Compr):
        return Compr(tuple((n, fn(d)) for n, d in e.decls), e.body)
    raise TypeError(type(e))


def _map_exprs(f, fn):
    if isinstance(f, In):
        return In(fn(f.left), fn(f.right))
    if isinstance(f, (Some, Lone)):
        return type(f)(fn(f.expr))
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, (AllQ, SomeQ)):
        return type(f)(f.var, fn(f.domain), _map_exprs(f.body, fn))
    if isinstance(f, (TraceAll, TraceSome)):
        return type(f)(f.var, f.problem, _map_exprs(f.body, fn))
    parts = tuple(_map_exprs(c, fn) for c in children(f))
    return type(f)(*parts)


def rename_rels_formula(f, mapping):
    return _map_exprs(f, lambda e: rename_rels_expr(e, mapping))


def rename_rels_expr(e, mapping):
    if isinstance(e, Rel):
        return Rel(mapping.get(e.name, e.name))
    return _rebuild_e(e, lambda sub: rename_rels_expr(sub, mapping))


# ---------------------------------------------------------------------------
# Prenex


def to_nnf_prenex(f):
    """Returns (prefix, matrix): prefix entries are (polarity, var, problem
    name); the matrix is trace-quantifier-free NNF. Equisatisfiable with f
    provided every quantified problem is nonempty."""
    from .core.ast import check_trace_quant_positions

    check_trace_quant_positions(f)
    g = nnf_formula(f)
    prefix = []

    def pull(h):
        if isinstance(h, TraceAll):
            prefix.append((FORALL, h.var, h.problem))
            return pull(h.body)
        if isinstance(h, TraceSome):
            prefix.append((EXISTS, h.var, h.problem))
            return pull(h.body)
        if isinstance(h, (And, Or)):
            return type(h)(pull(h.left), pull(h.right))
        return h

    matrix = pull(g)
    vars_seen = [v for _, v, _ in prefix]
    if len(set(vars_seen)) != len(vars_seen):
        raise HyrelError("duplicate trace variables in prefix")
    return tuple(prefix), matrix


# ---------------------------------------------------------------------------
# Composition


@dataclass(frozen=True)
class Composition:
    """Result of quantifier composition: the rewritten hyper problem and
    prefix, plus the provenance needed to split witnesses back apart.

    var_sources maps each surviving quantifier variable to the list of
    (original var, relation renaming) merged into it; outer_sources lists
    the outermost existential variables merged into the outer problem.
    """

    hyper: HyperProblem
    prefix: tuple
    matrix: Formula
    var_sources: dict
    outer_sources: tuple


def _renamed_problem(p, var):
    mapping = {d.name: f"{d.name}${var}" for d in p.decls}
    decls = tuple(
        RelationDecl(mapping[d.name], d.arity, d.mutability,
                     _rename_bound(d.lower, mapping),
                     _rename_bound(d.upper, mapping))
        for d in p.decls
    )
    constraint = rename_rels_formula(p.constraint, mapping)
    return Problem(p.universe, decls, constraint), mapping


def _rename_bound(b, mapping):
    if b.is_literal:
        return b
    return BoundExpr.of_arrows(*(_rename_tree(t, mapping) for t in b.arrows))


def _rename_tree(t, mapping):
    if isinstance(t, BoundLeaf):
        return BoundLeaf(t.mult, rename_rels_expr(t.expr, mapping))
    return BoundArrow(_rename_tree(t.left, mapping), t.mult_left,
                      t.mult_right, _rename_tree(t.right, mapping))


def _retarget_sels(f, var_map):
    """var_map: old trace var -> (new trace var | None for outer, renaming)."""

    def fix(e):
        if isinstance(e, Sel):
            if e.trace in var_map:
                new, mapping = var_map[e.trace]
                inner = rename_rels_expr(_strip_sel_e(e.expr, e.trace), mapping)
                return Sel(inner, new) if new is not None else inner
            return Sel(fix(e.expr), e.trace)
        return _rebuild_e(e, fix)

    return _map_exprs(f, fix)


def compose_quantifiers(h, prefix, matrix):
    """Merge adjacent same-polarity quantifier blocks into products, and the
    outermost existential block into the outer problem."""
    blocks = []
    for pol, var, pname in prefix:
        if blocks and blocks[-1][0] == pol:
            blocks[-1][1].append((var, pname))
        else:
            blocks.append([pol, [(var, pname)]])

    problems = dict(h.inner)
    outer = h.outer
    new_prefix = []
    var_sources = {}
    outer_sources = []
    var_map = {}
    new_inner = []

    for bi, (pol, members) in enumerate(blocks):
        if bi == 0 and pol == EXISTS:
            decls = list(outer.decls)
            constraints = [outer.constraint]
            for var, pname in members:
                rp, mapping = _renamed_problem(problems[pname], var)
                decls.extend(rp.decls)
                constraints.append(rp.constraint)
                var_map[var] = (None, mapping)
                outer_sources.append((var, pname, mapping))
            outer = Problem(outer.universe, tuple(decls), conj(constraints))
            continue
        if len(members) == 1:
            var, pname = members[0]
            new_prefix.append((pol, var, pname))
            var_sources[var] = [(var, pname, {})]
            new_inner.append((pname, problems[pname]))
            continue
        new_var = "x".join(v for v, _ in members)
        new_name = new_var
        decls, constraints = [], []
        sources = []
        universe = problems[members[0][1]].universe
        for var, pname in members:
            rp, mapping = _renamed_problem(problems[pname], var)
            decls.extend(rp.decls)
            constraints.append(rp.constraint)
            var_map[var] = (new_var, mapping)
            sources.append((var, pname, mapping))
        new_inner.append(
            (new_name, Problem(universe, tuple(decls), conj(constraints)))
        )
        new_prefix.append((pol, new_var, new_name))
        var_sources[new_var] = sources

    # keep uncomposed problems that are still referenced
    needed = {pname for _, _, pname in new_prefix}
    inner = tuple(
        (n, p) for n, p in dict(new_inner).items() if n in needed
    )
    new_matrix = _retarget_sels(matrix, var_map)
    return Composition(HyperProblem(inner, outer), tuple(new_prefix),
                       new_matrix, var_sources, tuple(outer_sources))


# ---------------------------------------------------------------------------
# Symmetry breaking


def atom_classes(p):
    """Equivalence classes of universe atoms under permutations preserving
    every declaration's expanded bounds, by partition refinement."""
    from .core.bounds import constant_decls, expand_lower, expand_upper

    atoms = list(p.universe.atoms)
    constants = constant_decls(p.decls)
    bounds = []
    for d in p.decls:
        try:
            lo = expand_lower(d.lower, constants, p.universe)
            hi = expand_upper(d.upper, constants, p.universe)
        except HyrelError:
            return [[a] for a in atoms]
        bounds.append((d.name, lo, hi))

    # atoms named by constant singleton bounds must stay fixed
    cls = {a: 0 for a in atoms}

    def signature(a):
        sig = []
        for name, lo, hi in bounds:
            for tag, tset in (("lo", lo), ("hi", hi)):
                pats = sorted(
                    tuple("*" if x == a else str(cls[x]) for x in t)
                    for t in tset.tuples if a in t
                )
                sig.append((name, tag, tuple(pats)))
        return tuple(sig)

    while True:
        sigs = {a: signature(a) for a in atoms}
        order = {}
        new_cls = {}
        for a in atoms:
            key = (cls[a], sigs[a])
            if key not in order:
                order[key] = len(order)
            new_cls[a] = order[key]
        if new_cls == cls:
            break
        cls = new_cls

    groups = {}
    for a in atoms:
        groups.setdefault(cls[a], []).append(a)
    return [sorted(g) for g in groups.values()]


def break_symmetries(p):
    """Lex-leader predicate over adjacent transpositions within each atom
    class, comparing the initial-state membership vector of every
    non-constant relation."""
    free = [
        d for d in p.decls
        if not (d.lower.is_literal and d.upper.is_literal
                and d.lower.literal == d.upper.literal)
    ]
    if not free:
        return TrueF()
    from .core.bounds import constant_decls, expand_lower, expand_upper

    constants = constant_decls(p.decls)
    expanded = []
    for d in p.decls:
        try:
            expanded.append((d, expand_lower(d.lower, constants, p.universe),
                             expand_upper(d.upper, constants, p.universe)))
        except HyrelError:
            return TrueF()
    free_names = {d.name for d in free}

    def swap_tuple(t, a, b):
        return tuple(b if x == a else a if x == b else x for x in t)

    def preserves(a, b):
        # only a transposition mapping every declaration's bound sets onto
        # themselves is a symmetry we may break
        for _, lo, hi in expanded:
            for tset in (lo, hi):
                if any(swap_tuple(t, a, b) not in tset.tuples
                       for t in tset.tuples):
                    return False
        return True

    preds = []
    for group in atom_classes(p):
        for a, b in zip(group, group[1:]):
            if not preserves(a, b):
                continue
            bits = []
            for d, lo, hi in expanded:
                if d.name not in free_names:
                    continue
                for t in hi.sorted():
                    if t in lo.tuples:
                        continue
                    swapped = swap_tuple(t, a, b)
                    if swapped == t:
                        continue
                    bits.append((d.name, t, swapped))
            pred = _lex_leq(bits)
            if not isinstance(pred, TrueF):
                preds.append(pred)
    return conj(preds)


# ---------------------------------------------------------------------------
# Lowering


@dataclass(frozen=True)
class LoweredProblem:
    """Machines plus a prenex HyperLTL spec over them.

    machines[0] is the outer machine (trace_var None, implicitly the
    outermost existential search target); the rest follow the prefix order.
    The spec body has the shape `assumptions implies goal`, where
    assumptions collect the residual acceptance of universally quantified
    machines and the goal conjoins existential/outer residuals with the
    grounded matrix.
    """

    machines: tuple
    spec: object  # ltl.HyperLtlSpec
    composition: Composition
    vacuous: bool = False
    warnings: tuple = ()

    @property
    def outer(self):
        return self.machines[0]

    def machine(self, var):
        for m in self.machines:
            if m.trace_var == var:
                return m
        raise KeyError(var)


def _empty_outer_machine():
    from .boolexpr import StateMachine

    return StateMachine("outer", ())


def single_machine_lp(machine, residual=None):
    """Wrap one quantified machine as an existential single-trace search
    (used for non-emptiness checks and plain BMC)."""
    from . import ltl as M

    var = machine.trace_var or "$t"
    m = machine.replaced(trace_var=var, residual=None)
    body = M.LTrue()
    if residual is not None:
        body = M.map_atoms(residual, lambda a: M.LAtom(var, a.expr))
    spec = M.HyperLtlSpec(((EXISTS, var, m.name),), body)
    comp = Composition(None, ((EXISTS, var, m.name),), None,
                       {var: [(var, m.name, {})]}, ())
    return LoweredProblem((_empty_outer_machine(), m), spec, comp)


def _nonempty_status(machine, residual, k):
    """'nonempty' | 'empty' | 'unknown' via a bounded single-machine search:
    the symbolic backend under pessimistic semantics first, the explicit
    backend (with its lasso-diameter conclusiveness rule) as fallback."""
    from .core.ast import PES

    lp = single_machine_lp(machine, residual)
    try:
        from . import backend_sym

        v = backend_sym.check(lp, k, PES)
        if v.conclusive and v.outcome == "SAT":
            return "nonempty"
    except HyrelError:
        pass
    try:
        from . import backend_exp

        v = backend_exp.check(lp, k)
        if v.outcome == "SAT":
            return "nonempty"
        if v.conclusive:
            return "empty"
    except HyrelError:
        pass
    return "unknown"


def lower(h, k=4, compose=True, symmetry=True, check_empty=True):
    """Turn an elaborated hyper problem into machines plus a prenex
    HyperLTL spec: prenex the constraint, optionally compose quantifier
    blocks, ground every quantified problem and the outer problem, check
    each quantified machine for non-emptiness (prenexing assumes it), and
    assemble the `assumptions implies goal` body."""
    from . import ltl as M
    from . import rl2ltl

    prefix, matrix = to_nnf_prenex(h.outer.constraint)
    stripped = HyperProblem(
        h.inner, Problem(h.outer.universe, h.outer.decls, TrueF()))
    if compose:
        comp = compose_quantifiers(stripped, prefix, matrix)
    else:
        comp = Composition(
            stripped, prefix, matrix,
            {v: [(v, pname, {})] for _, v, pname in prefix}, ())
    warnings = []
    outer_p = comp.hyper.outer
    if symmetry:
        sbp = break_symmetries(outer_p)
        if not isinstance(sbp, TrueF):
            outer_p = Problem(outer_p.universe, outer_p.decls,
                              conj([outer_p.constraint, sbp]))

    outer_grounder = rl2ltl.grounder_for(outer_p, None, "outer")
    outer_machine, outer_residual = _finish_machine(outer_grounder, outer_p)
    machines = [outer_machine]
    subs = {}
    residuals = {}
    vacuous = False
    for pol, var, pname in comp.prefix:
        p = comp.hyper.inner_problem(pname)
        g = rl2ltl.grounder_for(p, var, var)
        subs[var] = g
        m, res = _finish_machine(g, p)
        machines.append(m)
        residuals[var] = (pol, res)
        if check_empty:
            status = _nonempty_status(m, res, k)
            if status == "empty":
                vacuous = True
            elif status == "unknown":
                warnings.append(
                    f"non-emptiness of machine {var} not established "
                    f"at bound {k}")

    omega = rl2ltl.ground_matrix(comp.matrix, outer_p, subs)
    assumptions = M.land(*(r for pol, r in residuals.values()
                           if pol == FORALL))
    goal = M.land(*([r for pol, r in residuals.values() if pol == EXISTS]
                    + [outer_residual, omega]))
    body = M.LFalse() if vacuous else M.limplies(assumptions, goal)
    spec = M.HyperLtlSpec(
        tuple((pol, var, var) for pol, var, _ in comp.prefix), body)
    return LoweredProblem(tuple(machines), spec, comp, vacuous,
                          tuple(warnings))


def _finish_machine(g, p):
    from . import ltl as M
    from . import rl2ltl
    from .boolexpr import StateMachine

    grounded = g.ground_formula(p.constraint)
    init, invar, trans, spec = rl2ltl.classify_conjuncts(grounded)
    residual = M.land(*spec)
    machine = StateMachine(
        g.name, g.variables, tuple(init), tuple(g.invar) + tuple(invar),
        tuple(g.trans) + tuple(trans), g.gmap, g.trace_var, residual)
    return machine, residual


def _member(name, t):
    e = AtomE(t[0])
    for atom in t[1:]:
        e = Product(e, AtomE(atom))
    return In(e, Rel(name))


def _lex_leq(bits):
    """Membership vector of the original tuples <=lex that of the swapped
    tuples, encoded as the usual prefix-equality chain."""
    out = TrueF()
    seen = []
    for name, t, s in bits:
        orig = _member(name, t)
        perm = _member(name, s)
        cond = Implies(conj([Iff(o, q) for o, q in seen]), Implies(orig, perm))
        out = And(out, cond) if not isinstance(out, TrueF) else cond
        seen.append((orig, perm))
    return out
