"""Elaboration of parsed models into relational hyper problems.

A command's scope fixes an exact universe (atoms named `Sig$0..`), signature
and enumeration declarations become constant unary relations, subset
signatures become bounded unary relations, and fields become relations of
arity 1 + type arity whose multiplicity arrows are carried into upper bounds
(or expanded into first-order constraints when lifting is off or a type
mentions a non-constant set). The command formula — negated for `check` — is
put into negation normal form; for each trace variable, top-level conjuncts
mentioning only that variable are moved into the constraint of its inner
problem, and identical inner problems are shared.
"""

from dataclasses import dataclass

from ..core import ast as C
from ..core.ast import (
    AllQ, And, AtomE, BoundArrow, BoundExpr, BoundLeaf, Closure, Diff,
    FalseF, HyperProblem, Implies, In, Inter, Iden, Join, Lone, MUTABLE,
    Not, NoneE, Or, Prime, Problem, Product, Rel, RelationDecl, STATIC,
    Sel, Some, SomeQ, TraceAll, TraceSome, TrueF, TupleSet, Universe,
    UnivE, check_trace_quant_positions, conj, conjuncts_of, disj,
    disjuncts_of, eq, has_trace_quant, no_, one_, ts,
)
from ..core.bounds import constant_decls, eval_const_expr
from ..hyperize import (
    formula_traces, nnf_formula, rename_rels_expr, strip_sel,
)
from . import spec_parser as S
from .spec_parser import ParseError

DEFAULT_SCOPE = 3
_MAX_INLINE_DEPTH = 64


class ElabError(ParseError):
    pass


@dataclass(frozen=True)
class ElabResult:
    hyper: HyperProblem
    command: str
    model: S.SpecModel
    sig_atoms: dict
    k: object
    sem: object
    backend: object
    diagnostics: tuple = ()


# ---------------------------------------------------------------------------
# Helpers over core formulas


def _card_formula(mult, e):
    if mult == "set":
        return TrueF()
    if mult == "some":
        return Some(e)
    if mult == "lone":
        return Lone(e)
    if mult == "one":
        return one_(e)
    if mult == "no":
        return no_(e)
    raise ElabError(f"unknown multiplicity {mult}")


def _collect_binders(f, out):
    if isinstance(f, (AllQ, SomeQ)):
        out.append(f.var)
    for c in C.children(f):
        _collect_binders(c, out)


def _apply_rename(f, mapping):
    if isinstance(f, (AllQ, SomeQ)):
        return type(f)(mapping.get(f.var, f.var),
                       rename_rels_expr(f.domain, mapping),
                       _apply_rename(f.body, mapping))
    if isinstance(f, In):
        return In(rename_rels_expr(f.left, mapping),
                  rename_rels_expr(f.right, mapping))
    if isinstance(f, (Some, Lone)):
        return type(f)(rename_rels_expr(f.expr, mapping))
    if isinstance(f, (TrueF, FalseF)):
        return f
    return type(f)(*[_apply_rename(c, mapping) for c in C.children(f)])


def _canon_constraint(f):
    """Rename first-order binders positionally so that structurally equal
    constraints produced from different quantifier copies compare equal."""
    names = []
    _collect_binders(f, names)
    mapping = {n: f"v{i}" for i, n in enumerate(dict.fromkeys(names))}
    return _apply_rename(f, mapping)


def _outer_rels(f, out=None):
    """Names of relations referenced outside any trace selector."""
    if out is None:
        out = set()
        _outer_rels(f, out)
        return out

    def ex(e):
        if isinstance(e, Rel):
            out.add(e.name)
        elif isinstance(e, Sel):
            pass
        elif isinstance(e, (C.Converse, C.Closure, Prime)):
            ex(e.expr)
        elif isinstance(e, (C.Union, Inter, Diff, Product, Join)):
            ex(e.left)
            ex(e.right)
        elif isinstance(e, C.Compr):
            for _, dom in e.decls:
                ex(dom)
            _outer_rels(e.body, out)

    if isinstance(f, In):
        ex(f.left)
        ex(f.right)
    elif isinstance(f, (Some, Lone)):
        ex(f.expr)
    elif isinstance(f, (AllQ, SomeQ)):
        ex(f.domain)
    for c in C.children(f):
        _outer_rels(c, out)
    return out


# ---------------------------------------------------------------------------
# The elaborator


class _Elaborator:
    def __init__(self, model, mult_lifting=True, partition=True):
        self.model = model
        self.mult = mult_lifting
        self.do_partition = partition
        self.preds = model.preds()
        self.funs = model.funs()
        self.diagnostics = []
        self.depth = 0
        self.fresh_n = 0
        self._sel_depth = 0

    # -- declarations -------------------------------------------------------

    def build_universe(self, command):
        scopes = {}
        for n, signame in command.scopes:
            if signame in scopes:
                raise ElabError(f"duplicate scope for {signame}")
            scopes[signame] = n

        atoms = []
        self.sig_atoms = {}
        self.global_decls = []
        self.upper_vals = {}
        self.trace_sigs = set()
        self.enum_names = []
        self.mult_constraints = []
        self.sig_records = {}  # name -> S.Sig

        sig_paras = []
        for p in self.model.paragraphs:
            if isinstance(p, S.Enum):
                if p.name in self.upper_vals:
                    raise ElabError(f"duplicate declaration {p.name}")
                members = list(p.members)
                eatoms = [f"{p.name}${i}" for i in range(len(members))]
                atoms.extend(eatoms)
                self.sig_atoms[p.name] = tuple(eatoms)
                self.enum_names.append(p.name)
                self._const_decl(p.name, ts(1, [(a,) for a in eatoms]))
                for m, a in zip(members, eatoms):
                    self._const_decl(m, ts(1, [(a,)]))
                self._const_decl(
                    f"{p.name}$next", ts(2, list(zip(eatoms, eatoms[1:]))))
            elif isinstance(p, S.Sig):
                sig_paras.append(p)

        # top-level signatures first, then subset signatures
        for p in sig_paras:
            for name in p.names:
                if name in self.upper_vals:
                    raise ElabError(f"duplicate declaration {name}")
                self.sig_records[name] = p
                if p.trace:
                    self.trace_sigs.add(name)
                if p.parent is not None:
                    continue
                n = scopes.get(name, 1 if (p.one or p.trace) else DEFAULT_SCOPE)
                if (p.one or p.trace) and n != 1:
                    raise ElabError(
                        f"signature {name} admits only scope 1")
                satoms = [f"{name}${i}" for i in range(n)]
                atoms.extend(satoms)
                self.sig_atoms[name] = tuple(satoms)
                self._const_decl(name, ts(1, [(a,) for a in satoms]))
        for p in sig_paras:
            for name in p.names:
                if p.parent is None:
                    continue
                kind, parent = p.parent
                if kind == "extends":
                    raise ElabError(
                        "extends hierarchies are not supported; "
                        "use subset signatures")
                if parent not in self.upper_vals:
                    raise ElabError(f"unknown parent signature {parent}")
                if name in scopes:
                    raise ElabError(
                        f"subset signature {name} cannot be scoped")
                mult = "one" if p.one else "set"
                if self.mult:
                    upper = BoundExpr.of_arrows(BoundLeaf(mult, Rel(parent)))
                else:
                    upper = BoundExpr.of(self.upper_vals[parent])
                    if p.one:
                        self.mult_constraints.append(one_(Rel(name)))
                self.global_decls.append(
                    RelationDecl(name, 1, STATIC, BoundExpr.of(ts(1)), upper))
                self.upper_vals[name] = self.upper_vals[parent]

        self.universe = Universe(tuple(atoms))
        self.constants = constant_decls(self.global_decls)
        self._build_fields()
        self.rel_arity = {d.name: d.arity for d in self.global_decls}
        for ds in self.field_decls.values():
            for d in ds:
                self.rel_arity[d.name] = d.arity

    def _const_decl(self, name, tset):
        b = BoundExpr.of(tset)
        self.global_decls.append(
            RelationDecl(name, tset.arity, STATIC, b, b))
        self.upper_vals[name] = tset

    def _build_fields(self):
        self.field_decls = {s: [] for s in self.trace_sigs}
        self.field_owner = {}
        self.inner_template = {s: [] for s in self.trace_sigs}
        for p in self.model.sigs():
            for owner in p.names:
                for f in p.fields:
                    self._field(owner, f, p.trace)

    def _field(self, owner, f, owner_is_trace):
        if f.name in self.upper_vals or f.name in self.field_owner:
            raise ElabError(f"duplicate declaration {f.name}")
        tau = f.type if not isinstance(f.type, S.SName) else \
            S.SMultSet("one", f.type)
        leaves = self._type_leaves(tau)
        leaf_info = []
        all_const = True
        for leaf in leaves:
            ce = self.expr(leaf, {})
            try:
                val = eval_const_expr(ce, self.constants, self.universe)
                const = True
            except C.HyrelError:
                val = eval_const_expr(ce, self.upper_vals, self.universe)
                const = False
            all_const = all_const and const
            leaf_info.append((ce, val))
        arity = 1 + sum(v.arity for _, v in leaf_info)
        mutability = MUTABLE if f.mutable else STATIC
        lower = BoundExpr.of(ts(arity))

        prod = self.upper_vals[owner].tuples
        for _, v in leaf_info:
            prod = frozenset(a + b for a in prod for b in v.tuples)
        prod_ts = TupleSet(arity, prod)

        owner_leaf = BoundLeaf("set", Rel(owner))
        if self.mult and all_const:
            upper = BoundExpr.of_arrows(self._owner_tree(owner_leaf, tau))
            mult_conj = None
        else:
            upper = BoundExpr.of(prod_ts)
            var = self._fresh("o")
            mult_conj = AllQ(
                var, Rel(owner),
                self._type_formula(tau, Join(Rel(var), Rel(f.name)), {}))
        decl = RelationDecl(f.name, arity, mutability, lower, upper)
        if owner_is_trace:
            self.field_decls[owner].append(decl)
            self.field_owner[f.name] = owner
            if mult_conj is not None:
                self.inner_template[owner].append(mult_conj)
        else:
            self.global_decls.append(decl)
            self.upper_vals[f.name] = prod_ts
            if mult_conj is not None:
                self.mult_constraints.append(mult_conj)

    def _type_leaves(self, tau):
        if isinstance(tau, S.SArrow):
            return self._type_leaves(tau.left) + self._type_leaves(tau.right)
        if isinstance(tau, S.SMultSet):
            return self._type_leaves(tau.expr)
        return [tau]

    def _owner_tree(self, owner_leaf, tau):
        if isinstance(tau, S.SMultSet):
            return BoundArrow(owner_leaf, "set", tau.mult,
                              BoundLeaf("set", self.expr(tau.expr, {})))
        return BoundArrow(owner_leaf, "set", "set", self._arrow_tree(tau))

    def _arrow_tree(self, tau):
        if isinstance(tau, S.SArrow):
            return BoundArrow(self._arrow_tree(tau.left), tau.ml, tau.mr,
                              self._arrow_tree(tau.right))
        if isinstance(tau, S.SMultSet):
            raise ElabError(
                "multiplicity sets inside arrow types are not supported")
        return BoundLeaf("set", self.expr(tau, {}))

    def _type_formula(self, tau, val, env):
        """Per-owner multiplicity constraint: the slice `val` satisfies the
        field's arrow type."""
        if isinstance(tau, S.SMultSet):
            base = self.expr(tau.expr, env)
            return And(In(val, base), _card_formula(tau.mult, val))
        if not isinstance(tau, S.SArrow):
            base = self.expr(tau, env)
            return In(val, base)
        if isinstance(tau.left, (S.SArrow, S.SMultSet)):
            raise ElabError(
                "multiplicity arrows with a non-unary left operand "
                "are not supported")
        lexpr = self.expr(tau.left, env)
        parts = []
        v = self._fresh("m")
        slice_ = Join(Rel(v), val)
        body = self._type_formula(tau.right, slice_, env)
        if tau.mr != "set":
            body = And(_card_formula(tau.mr, slice_), body)
        parts.append(AllQ(v, lexpr, body))
        if tau.ml != "set":
            if isinstance(tau.right, (S.SArrow, S.SMultSet)):
                raise ElabError(
                    "left multiplicities over arrow-typed ranges "
                    "are not supported")
            rexpr = self.expr(tau.right, env)
            w = self._fresh("m")
            parts.append(
                AllQ(w, rexpr, _card_formula(tau.ml, Join(val, Rel(w)))))
        # tuples whose first column escapes the left set
        parts.append(In(val, Product(lexpr, self._expansion_expr(tau.right))))
        return conj(parts)

    def _expansion_expr(self, tau):
        if isinstance(tau, S.SArrow):
            return Product(self._expansion_expr(tau.left),
                           self._expansion_expr(tau.right))
        if isinstance(tau, S.SMultSet):
            return self._expansion_expr(tau.expr)
        return self.expr(tau, {})

    def _fresh(self, base):
        self.fresh_n += 1
        return f"${base}{self.fresh_n}"

    # -- expression translation --------------------------------------------

    def arity_of(self, e):
        if isinstance(e, Rel):
            return self.rel_arity.get(e.name, 1)
        if isinstance(e, (AtomE, UnivE)):
            return 1
        if isinstance(e, NoneE):
            return e.arity
        if isinstance(e, (Iden, C.Converse, C.Closure)):
            return 2
        if isinstance(e, (C.Union, Inter, Diff)):
            return self.arity_of(e.left)
        if isinstance(e, Product):
            return self.arity_of(e.left) + self.arity_of(e.right)
        if isinstance(e, Join):
            return self.arity_of(e.left) + self.arity_of(e.right) - 2
        if isinstance(e, (Prime, Sel)):
            return self.arity_of(e.expr)
        if isinstance(e, C.Compr):
            return len(e.decls)
        raise ElabError(f"cannot infer arity of {type(e).__name__}")

    def expr(self, e, env):
        if isinstance(e, S.SName):
            b = env.get(e.name)
            if b is not None:
                if b[0] == "trace":
                    raise ElabError(
                        f"trace variable {e.name} used outside a "
                        "selector-compatible position")
                if b[0] == "fo":
                    return Rel(b[1])
                return b[1]  # ("val", core expr)
            if e.name in self.upper_vals or e.name in self.field_owner:
                if e.name in self.field_owner and not self._sel_depth:
                    raise ElabError(
                        f"trace-state relation {e.name} must be accessed "
                        "through a trace variable")
                return Rel(e.name)
            raise ElabError(f"unknown identifier {e.name}")
        if isinstance(e, S.SConst):
            return {"univ": UnivE(), "none": NoneE(1), "iden": Iden()}[e.kind]
        if isinstance(e, S.SPrimeE):
            return Prime(self.expr(e.expr, env))
        if isinstance(e, S.SUnary):
            body = self.expr(e.expr, env)
            if e.op == "~":
                return C.Converse(body)
            if e.op == "^":
                return Closure(body)
            return C.Union(Iden(), Closure(body))
        if isinstance(e, S.SArrow):
            if e.ml != "set" or e.mr != "set":
                raise ElabError(
                    "multiplicity arrows are only allowed in declarations "
                    "and on the right of `in`")
            return Product(self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, S.SMultSet):
            raise ElabError(
                "multiplicity sets are only allowed in declarations "
                "and on the right of `in`")
        if isinstance(e, S.SBinary):
            if e.op == ".":
                tb = env.get(e.left.name) if isinstance(e.left, S.SName) \
                    else None
                if tb is not None and tb[0] == "trace":
                    _, var, sig = tb
                    owner = AtomE(f"{sig}$0")
                    self._sel_depth += 1
                    try:
                        inner = self.expr(e.right, env)
                    finally:
                        self._sel_depth -= 1
                    return Sel(Join(owner, inner), var)
                l, r = self.expr(e.left, env), self.expr(e.right, env)
                return Join(l, r)
            l, r = self.expr(e.left, env), self.expr(e.right, env)
            if e.op == "+":
                return C.Union(l, r)
            if e.op == "-":
                return Diff(l, r)
            if e.op == "&":
                return Inter(l, r)
            if e.op == "<:":
                guard = l
                for _ in range(self.arity_of(r) - 1):
                    guard = Product(guard, UnivE())
                return Inter(r, guard)
            if e.op == ":>":
                guard = r
                for _ in range(self.arity_of(l) - 1):
                    guard = Product(UnivE(), guard)
                return Inter(l, guard)
            raise ElabError(f"unknown operator {e.op}")
        if isinstance(e, S.SCall):
            return self._call_expr(e, env)
        raise ElabError(f"unexpected expression {type(e).__name__}")

    def _call_expr(self, e, env):
        if e.name == "max":
            if len(e.args) != 1:
                raise ElabError("max takes one argument")
            if len(self.enum_names) != 1:
                raise ElabError(
                    "max requires exactly one enumeration in the model")
            nxt = Rel(f"{self.enum_names[0]}$next")
            v = self.expr(e.args[0], env)
            return Diff(v, Join(Closure(nxt), v))
        fn = self.funs.get(e.name)
        if fn is None:
            raise ElabError(f"unknown function {e.name}")
        return self._inline(fn, e.args, env, self.expr)

    def _inline(self, decl, args, env, translate):
        if len(args) != len(decl.params):
            raise ElabError(
                f"{decl.name} expects {len(decl.params)} arguments")
        self.depth += 1
        if self.depth > _MAX_INLINE_DEPTH:
            raise ElabError(f"recursive definition involving {decl.name}")
        try:
            inner = {}
            for (pname, _ptype), arg in zip(decl.params, args):
                if isinstance(arg, S.SName) and arg.name in env:
                    inner[pname] = env[arg.name]
                else:
                    inner[pname] = ("val", self.expr(arg, env))
            return translate(decl.body, inner)
        finally:
            self.depth -= 1

    # -- formula translation -----------------------------------------------

    def formula(self, f, env):
        if isinstance(f, S.STrueF):
            return TrueF()
        if isinstance(f, S.SNot):
            return Not(self.formula(f.body, env))
        if isinstance(f, S.SAndF):
            return And(self.formula(f.left, env), self.formula(f.right, env))
        if isinstance(f, S.SOrF):
            return Or(self.formula(f.left, env), self.formula(f.right, env))
        if isinstance(f, S.SImpliesF):
            return Implies(self.formula(f.left, env),
                           self.formula(f.right, env))
        if isinstance(f, S.SIffF):
            return C.Iff(self.formula(f.left, env),
                         self.formula(f.right, env))
        if isinstance(f, S.STempU):
            body = self.formula(f.body, env)
            node = {
                "always": C.Always, "eventually": C.Eventually,
                "after": C.After, "once": C.Once,
                "historically": C.Historically, "before": C.Before,
            }[f.op]
            return node(body)
        if isinstance(f, S.STempB):
            node = {"until": C.Until, "releases": C.Releases,
                    "since": C.Since}[f.op]
            return node(self.formula(f.left, env),
                        self.formula(f.right, env))
        if isinstance(f, S.SCard):
            e = self.expr(f.expr, env)
            return _card_formula(f.mult, e)
        if isinstance(f, S.SCompare):
            return self._compare(f, env)
        if isinstance(f, S.SQuant):
            return self._quant(f, env)
        if isinstance(f, S.SCall):
            pred = self.preds.get(f.name)
            if pred is None:
                raise ElabError(f"unknown predicate {f.name}")
            return self._inline(pred, f.args, env, self.formula)
        raise ElabError(f"unexpected formula {type(f).__name__}")

    def _compare(self, f, env):
        if f.op in ("in", "!in"):
            l = self.expr(f.left, env)
            rhs = f.right
            if isinstance(rhs, S.SMultSet):
                base = self.expr(rhs.expr, env)
                out = And(In(l, base), _card_formula(rhs.mult, l))
            elif isinstance(rhs, S.SArrow) and self._has_mult(rhs):
                out = self._type_formula(rhs, l, env)
            else:
                out = In(l, self.expr(rhs, env))
            return Not(out) if f.op == "!in" else out
        l, r = self.expr(f.left, env), self.expr(f.right, env)
        out = eq(l, r)
        return Not(out) if f.op == "!=" else out

    @staticmethod
    def _has_mult(tau):
        if isinstance(tau, S.SArrow):
            return (tau.ml != "set" or tau.mr != "set"
                    or _Elaborator._has_mult(tau.left)
                    or _Elaborator._has_mult(tau.right))
        return isinstance(tau, S.SMultSet)

    def _quant(self, f, env):
        bindings = []  # (kind, fresh var, domain)
        env = dict(env)
        for names, dom in f.decls:
            trace_sig = None
            if isinstance(dom, S.SName) and dom.name not in env \
                    and dom.name in self.trace_sigs:
                trace_sig = dom.name
            for name in names:
                if trace_sig is not None:
                    var = self._fresh_var(name)
                    env[name] = ("trace", var, trace_sig)
                    bindings.append(("trace", var, trace_sig))
                else:
                    dome = self.expr(dom, env)
                    var = self._fresh_var(name)
                    env[name] = ("fo", var)
                    bindings.append(("fo", var, dome))
        body = self.formula(f.body, env)
        for kind, var, dom in reversed(bindings):
            if kind == "trace":
                node = TraceAll if f.q == "all" else TraceSome
                self.trace_vars[var] = dom
                body = node(var, var, body)
            else:
                node = AllQ if f.q == "all" else SomeQ
                body = node(var, dom, body)
        return body

    def _fresh_var(self, name):
        if name not in self.rel_arity and name not in self.used_vars:
            self.used_vars.add(name)
            return name
        self.fresh_n += 1
        fresh = f"{name}${self.fresh_n}"
        self.used_vars.add(fresh)
        return fresh

    # -- partitioning -------------------------------------------------------

    def _coherence(self, var):
        parts = []
        for d in self.global_decls:
            if d.name in self.constants:
                continue
            same = eq(Sel(Rel(d.name), var), Rel(d.name))
            parts.append(C.Always(same) if d.mutability == MUTABLE else same)
        return conj(parts)

    def _absorbable(self, f, var):
        if has_trace_quant(f):
            return False
        if formula_traces(f) != {var}:
            return False
        decl_rels = {n for n in _outer_rels(f) if n in self.rel_arity}
        return decl_rels <= set(self.constants)

    def partition(self, f):
        if isinstance(f, TraceSome):
            body = self._absorb_some(self.partition(f.body), f.var)
            return TraceSome(f.var, f.problem, conj(conjuncts_of(body)))
        if isinstance(f, TraceAll):
            body = self._absorb_all(self.partition(f.body), f.var)
            return TraceAll(f.var, f.problem, disj(disjuncts_of(body)))
        if isinstance(f, (And, Or)):
            return type(f)(self.partition(f.left), self.partition(f.right))
        return f

    def _absorb_some(self, f, var):
        """Move conjuncts over `var` alone into its problem; a conjunct may
        sit under further nested existential trace quantifiers (sound even
        for empty problems, unlike pulling through universals)."""
        if isinstance(f, TraceSome):
            return TraceSome(f.var, f.problem,
                             self._absorb_some(f.body, var))
        if isinstance(f, And):
            return And(self._absorb_some(f.left, var),
                       self._absorb_some(f.right, var))
        if self._absorbable(f, var):
            self.moved[var].append(strip_sel(f, var))
            return TrueF()
        return f

    def _absorb_all(self, f, var):
        """Negate-and-move disjuncts over `var` alone (at this quantifier's
        own level only)."""
        if isinstance(f, Or):
            return Or(self._absorb_all(f.left, var),
                      self._absorb_all(f.right, var))
        if self._absorbable(f, var):
            self.moved[var].append(nnf_formula(Not(strip_sel(f, var))))
            return FalseF()
        return f

    def add_coherence(self, f):
        if isinstance(f, TraceSome):
            body = self.add_coherence(f.body)
            coh = self._coherence(f.var)
            if not isinstance(coh, TrueF):
                body = And(coh, body)
            return TraceSome(f.var, f.problem, body)
        if isinstance(f, TraceAll):
            body = self.add_coherence(f.body)
            coh = self._coherence(f.var)
            if not isinstance(coh, TrueF):
                body = Implies(coh, body)
            return TraceAll(f.var, f.problem, body)
        if isinstance(f, (And, Or)):
            return type(f)(self.add_coherence(f.left),
                           self.add_coherence(f.right))
        return f

    # -- entry point --------------------------------------------------------

    def run(self, command_name):
        commands = self.model.commands()
        if not commands:
            raise ElabError("the model declares no commands")
        if command_name is None:
            command_name = next(iter(commands))
        if command_name not in commands:
            raise ElabError(f"unknown command {command_name}")
        command = commands[command_name]
        self.build_universe(command)
        self.trace_vars = {}
        self.used_vars = set()

        parts = [self.formula(fact.body, {}) for fact in self.model.facts()]
        if command.kind == "run":
            body = command.body
            if body is None:
                pred = self.preds.get(command.name)
                if pred is None:
                    raise ElabError(
                        f"run target {command.name} is not a predicate")
                body = S.SCall(command.name, ())
            parts.append(self.formula(body, {}))
        else:
            body = command.body
            if body is None:
                asserts = self.model.asserts()
                if command.name not in asserts:
                    raise ElabError(f"unknown assertion {command.name}")
                body = asserts[command.name].body
            parts.append(Not(self.formula(body, {})))

        g = nnf_formula(conj(parts))
        self.moved = {v: [] for v in self.trace_vars}
        if self.do_partition:
            g = self.partition(g)
        g = self.add_coherence(g)

        # share structurally identical inner problems
        rename = {}
        inner = []
        groups = {}
        for var, sig in self.trace_vars.items():
            constraint = _canon_constraint(
                conj(self.inner_template[sig] + self.moved[var]))
            key = (sig, constraint)
            if key not in groups:
                base = sig if not any(n == sig for n, _ in inner) else \
                    f"{sig}${var}"
                decls = tuple(self.global_decls) + \
                    tuple(self.field_decls[sig])
                inner.append((base, Problem(self.universe, decls, constraint)))
                groups[key] = base
            rename[var] = groups[key]
        g = self._rename_problems(g, rename)

        outer_constraint = conj(self.mult_constraints + [g])
        check_trace_quant_positions(outer_constraint)
        outer = Problem(self.universe, tuple(self.global_decls),
                        outer_constraint)
        hyper = HyperProblem(tuple(inner), outer)
        return ElabResult(
            hyper, command_name, self.model, dict(self.sig_atoms),
            command.k, command.sem, command.backend,
            tuple(self.diagnostics))

    def _rename_problems(self, f, rename):
        if isinstance(f, (TraceAll, TraceSome)):
            return type(f)(f.var, rename[f.problem],
                           self._rename_problems(f.body, rename))
        if isinstance(f, (And, Or, Implies)):
            return type(f)(self._rename_problems(f.left, rename),
                           self._rename_problems(f.right, rename))
        if isinstance(f, Not):
            return Not(self._rename_problems(f.body, rename))
        return f


def elaborate(model, command=None, *, mult_lifting=True, partition=True):
    return _Elaborator(model, mult_lifting, partition).run(command)
