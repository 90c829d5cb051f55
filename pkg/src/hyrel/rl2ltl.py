"""Grounding of relational temporal problems into state machines.

Each relation is flattened to state variables over its expanded bounds: one
Boolean variable per free tuple by default, or one integer variable per left
tuple when the upper bound is a multiplicity arrow with a functional (`one`,
or `lone` with a sentinel) rightmost column. Relational operators expand to
Boolean combinations over these variables, first-order quantifiers to finite
conjunctions/disjunctions over the universe, and primes to next-state
references. Top-level conjuncts are classified into INIT/INVAR/TRANS
sections; whatever cannot be placed remains a residual LTL formula.
"""

import math

from . import ltl as M
from .boolexpr import (
    FALSE, TRUE, VarDecl, VarIs, StateMachine, band, bimplies, bnot, bor,
    has_primed, map_leaves,
)
from .core.ast import (
    AllQ, After, Always, And, AtomE, Before, BoundArrow, BoundLeaf, Closure,
    Compr, Converse, Diff, Eventually, FalseF, Historically, HyrelError, Iden,
    Iff, Implies, In, Inter, Join, Lone, NoneE, Not, Once, Or, Prime, Product,
    Rel, Releases, Sel, Since, Some, SomeQ, TraceAll, TraceSome, TrueF,
    Union, UnivE, Until, LONE, NO, ONE, SET, SOME,
)
from .core.bounds import (
    constant_decls, eval_const_expr, expand_lower, expand_upper,
    tree_expansion, _strip_mult,
)

ABSENT = "none$"  # sentinel domain value for `lone` functional columns


class GroundError(HyrelError):
    pass


def _var_name(rel, t):
    return "_".join((rel,) + t) if t else rel


def _card_bexpr(mult, exprs):
    """Symbolic cardinality constraint over membership expressions."""
    if mult == SET:
        return TRUE
    if mult == NO:
        return band(*(bnot(e) for e in exprs))
    some = bor(*exprs)
    lone = band(
        *(
            bnot(band(exprs[i], exprs[j]))
            for i in range(len(exprs))
            for j in range(i + 1, len(exprs))
        )
    )
    if mult == SOME:
        return some
    if mult == LONE:
        return lone
    if mult == ONE:
        return band(some, lone)
    raise GroundError(f"unknown multiplicity {mult}")


class _Grounder:
    def __init__(self, p, trace_var=None, name=None):
        self.p = p
        self.trace_var = trace_var
        self.name = name or trace_var or "M"
        self.constants = constant_decls(p.decls)
        self.variables = []
        self.gmap = {}
        self.invar = []
        self.trans = []
        self.hi = {}
        self._decl_vars = {}
        try:
            for d in p.decls:
                self._declare(d)
        except HyrelError as e:
            raise GroundError(str(e)) from e

    # -- variable layout ----------------------------------------------------

    def _declare(self, d):
        lo = expand_lower(d.lower, self.constants, self.p.universe)
        hi = expand_upper(d.upper, self.constants, self.p.universe)
        if not lo.tuples <= hi.tuples:
            raise GroundError(f"lower bound of {d.name} exceeds upper bound")
        self.hi[d.name] = hi
        self._decl_vars[d.name] = []
        if not self._try_functional(d, lo, hi):
            for t in hi.sorted():
                if t in lo.tuples:
                    self.gmap[(d.name, t)] = ("const", True)
                    continue
                vname = _var_name(d.name, t)
                self._add_var(d, VarDecl(vname, 2, boolean=True,
                                         frozen=d.is_static))
                self.gmap[(d.name, t)] = ("bool", vname)
        if not d.upper.is_literal:
            for tree in d.upper.arrows:
                c = self._tree_invar(tree, d.name)
                if not isinstance(c, type(TRUE)):
                    self.invar.append(c)
        if d.is_static:
            self._freeze(d)

    def _try_functional(self, d, lo, hi):
        """Integer encoding for a functional rightmost column."""
        if d.upper.is_literal or len(d.upper.arrows) != 1 or lo.tuples:
            return False
        tree = d.upper.arrows[0]
        if isinstance(tree, BoundLeaf):
            if tree.mult not in (ONE, LONE):
                return False
            lefts, rights = [()], self._leaf_atoms(tree)
            mult = tree.mult
        else:
            if tree.mult_right not in (ONE, LONE) or not isinstance(
                    tree.right, BoundLeaf):
                return False
            rights = self._leaf_atoms(tree.right)
            if rights is None:
                return False
            lefts = [
                t for t in tree_expansion(
                    tree.left, self.constants, self.p.universe).sorted()
            ]
            mult = tree.mult_right
        if rights is None or not rights:
            return False
        domain = tuple(rights) + ((ABSENT,) if mult == LONE else ())
        for lt in lefts:
            vname = _var_name(d.name, lt)
            self._add_var(d, VarDecl(vname, len(domain), boolean=False,
                                     frozen=d.is_static, domain=domain))
            for ra in rights:
                self.gmap[(d.name, lt + (ra,))] = ("int", vname, ra)
        return True

    def _add_var(self, d, v):
        self.variables.append(v)
        self._decl_vars[d.name].append(v)

    def _leaf_atoms(self, leaf):
        v = eval_const_expr(leaf.expr, self.constants, self.p.universe)
        if v.arity != 1:
            return None
        return [a for (a,) in v.sorted()]

    def _tree_invar(self, tree, rel):
        mem = {t: self._mem(rel, t) for t in self.hi[rel].tuples}
        return self._tree_sat(tree, mem)

    def _tree_sat(self, tree, mem):
        if isinstance(tree, BoundLeaf):
            return _card_bexpr(tree.mult, [mem[t] for t in sorted(mem)])
        lexp = tree_expansion(tree.left, self.constants, self.p.universe)
        rexp = tree_expansion(tree.right, self.constants, self.p.universe)
        la = lexp.arity
        out = []
        for a in lexp.sorted():
            img = {
                t[la:]: e for t, e in mem.items() if t[:la] == a
            }
            exprs = [img[t] for t in sorted(img)]
            out.append(_card_bexpr(tree.mult_right, exprs))
            out.append(self._tree_sat(_strip_mult(tree.right), img))
        for b in rexp.sorted():
            pre = {
                t[:la]: e for t, e in mem.items() if t[la:] == b
            }
            exprs = [pre[t] for t in sorted(pre)]
            out.append(_card_bexpr(tree.mult_left, exprs))
            out.append(self._tree_sat(_strip_mult(tree.left), pre))
        return band(*out)

    def _freeze(self, d):
        for v in self._decl_vars[d.name]:
            if v.boolean:
                eq = bor(band(VarIs(v.name, True), VarIs(v.name, True, True)),
                         band(bnot(VarIs(v.name, True)),
                              bnot(VarIs(v.name, True, True))))
            else:
                eq = bor(*(band(VarIs(v.name, val), VarIs(v.name, val, True))
                           for val in v.values))
            self.trans.append(eq)

    def _mem(self, rel, t, primed=False):
        ref = self.gmap.get((rel, t))
        if ref is None:
            return FALSE
        if ref[0] == "const":
            return TRUE if ref[1] else FALSE
        if ref[0] == "bool":
            return VarIs(ref[1], True, primed)
        return VarIs(ref[1], ref[2], primed)

    # -- expression grounding -----------------------------------------------

    def _gexpr(self, e, env, t):
        """Symbolic tuple set: (arity, {tuple: membership bexpr})."""
        if t > 1:
            raise GroundError("nested primes are not groundable")
        if isinstance(e, Rel):
            if e.name in env:
                tup = env[e.name]
                return len(tup), {tup: TRUE}
            if e.name in self.constants:
                v = self.constants[e.name]
                return v.arity, {tu: TRUE for tu in v.tuples}
            if e.name in self.hi:
                hi = self.hi[e.name]
                return hi.arity, {
                    tu: self._mem(e.name, tu, t == 1) for tu in hi.tuples
                }
            raise GroundError(f"unbound relation {e.name!r}")
        if isinstance(e, AtomE):
            if e.atom not in self.p.universe.atoms:
                raise GroundError(f"atom {e.atom!r} outside the universe")
            return 1, {(e.atom,): TRUE}
        if isinstance(e, NoneE):
            return e.arity, {}
        if isinstance(e, Iden):
            return 2, {(a, a): TRUE for a in self.p.universe.atoms}
        if isinstance(e, UnivE):
            return 1, {(a,): TRUE for a in self.p.universe.atoms}
        if isinstance(e, Prime):
            return self._gexpr(e.expr, env, t + 1)
        if isinstance(e, Converse):
            ar, m = self._gexpr(e.expr, env, t)
            if ar != 2:
                raise GroundError("converse requires arity 2")
            return 2, {(b, a): x for (a, b), x in m.items()}
        if isinstance(e, Closure):
            return self._gclosure(e, env, t)
        if isinstance(e, Union):
            la, l = self._gexpr(e.left, env, t)
            ra, r = self._gexpr(e.right, env, t)
            self._arity_eq(la, ra)
            out = dict(l)
            for tu, x in r.items():
                out[tu] = bor(out.get(tu, FALSE), x)
            return la, out
        if isinstance(e, Inter):
            la, l = self._gexpr(e.left, env, t)
            ra, r = self._gexpr(e.right, env, t)
            self._arity_eq(la, ra)
            return la, {
                tu: band(l[tu], r[tu]) for tu in l.keys() & r.keys()
            }
        if isinstance(e, Diff):
            la, l = self._gexpr(e.left, env, t)
            ra, r = self._gexpr(e.right, env, t)
            self._arity_eq(la, ra)
            return la, {
                tu: band(x, bnot(r.get(tu, FALSE))) for tu, x in l.items()
            }
        if isinstance(e, Product):
            la, l = self._gexpr(e.left, env, t)
            ra, r = self._gexpr(e.right, env, t)
            return la + ra, {
                a + b: band(x, y) for a, x in l.items() for b, y in r.items()
            }
        if isinstance(e, Join):
            la, l = self._gexpr(e.left, env, t)
            ra, r = self._gexpr(e.right, env, t)
            ar = la + ra - 2
            if ar < 1:
                raise GroundError("join of two unary expressions")
            out = {}
            for a, x in l.items():
                for b, y in r.items():
                    if a[-1] != b[0]:
                        continue
                    tu = a[:-1] + b[1:]
                    out[tu] = bor(out.get(tu, FALSE), band(x, y))
            return ar, out
        if isinstance(e, Compr):
            return self._gcompr(e, env, t)
        if isinstance(e, Sel):
            raise GroundError("trace selector inside a single-trace problem")
        raise GroundError(f"unknown expression node {type(e).__name__}")

    def _arity_eq(self, a, b):
        if a != b:
            raise GroundError(f"arity mismatch {a} vs {b}")

    def _gclosure(self, e, env, t):
        ar, m = self._gexpr(e.expr, env, t)
        if ar != 2:
            raise GroundError("closure requires arity 2")
        atoms = self.p.universe.atoms
        cur = dict(m)
        for _ in range(max(1, math.ceil(math.log2(max(2, len(atoms)))))):
            nxt = dict(cur)
            for (a, b), x in cur.items():
                for (c, d), y in cur.items():
                    if b != c:
                        continue
                    nxt[(a, d)] = bor(nxt.get((a, d), FALSE), band(x, y))
            cur = nxt
        return 2, cur

    def _gcompr(self, e, env, t):
        out = {}

        def rec(idx, env2, prefix, cond):
            if idx == len(e.decls):
                body = self._gstate(e.body, env2)
                out[tuple(prefix)] = band(cond, body)
                return
            name, dom = e.decls[idx]
            ar, m = self._gexpr(dom, env2, t)
            if ar != 1:
                raise GroundError("comprehension binder domain must be unary")
            for (a,), x in sorted(m.items()):
                rec(idx + 1, {**env2, name: (a,)}, prefix + [a], band(cond, x))

        rec(0, env, [], TRUE)
        return len(e.decls), out

    # -- formula grounding --------------------------------------------------

    def _gatom(self, f, env):
        if isinstance(f, In):
            la, l = self._gexpr(f.left, env, 0)
            ra, r = self._gexpr(f.right, env, 0)
            self._arity_eq(la, ra)
            return band(*(bimplies(x, r.get(tu, FALSE))
                          for tu, x in sorted(l.items())))
        if isinstance(f, Some):
            _, m = self._gexpr(f.expr, env, 0)
            return bor(*(m[tu] for tu in sorted(m)))
        if isinstance(f, Lone):
            _, m = self._gexpr(f.expr, env, 0)
            exprs = [m[tu] for tu in sorted(m)]
            return _card_bexpr(LONE, exprs)
        raise GroundError(f"not an atom: {type(f).__name__}")

    def _gstate(self, f, env):
        """Ground a temporal-operator-free formula to a single bexpr."""
        if isinstance(f, TrueF):
            return TRUE
        if isinstance(f, FalseF):
            return FALSE
        if isinstance(f, (In, Some, Lone)):
            return self._gatom(f, env)
        if isinstance(f, Not):
            return bnot(self._gstate(f.body, env))
        if isinstance(f, And):
            return band(self._gstate(f.left, env), self._gstate(f.right, env))
        if isinstance(f, Or):
            return bor(self._gstate(f.left, env), self._gstate(f.right, env))
        if isinstance(f, Implies):
            return bimplies(self._gstate(f.left, env),
                            self._gstate(f.right, env))
        if isinstance(f, Iff):
            l, r = self._gstate(f.left, env), self._gstate(f.right, env)
            return bor(band(l, r), band(bnot(l), bnot(r)))
        if isinstance(f, (AllQ, SomeQ)):
            ar, m = self._gexpr(f.domain, env, 0)
            if ar != 1:
                raise GroundError("quantifier domain must be unary")
            parts = []
            for (a,), x in sorted(m.items()):
                body = self._gstate(f.body, {**env, f.var: (a,)})
                parts.append(bimplies(x, body) if isinstance(f, AllQ)
                             else band(x, body))
            return band(*parts) if isinstance(f, AllQ) else bor(*parts)
        raise GroundError(
            f"temporal operator {type(f).__name__} in a state context")

    def ground_formula(self, f, env=None):
        env = env or {}
        if isinstance(f, TrueF):
            return M.LTrue()
        if isinstance(f, FalseF):
            return M.LFalse()
        if isinstance(f, (In, Some, Lone)):
            return self._atomize(self._gatom(f, env))
        if isinstance(f, Not):
            return M.lnot(self.ground_formula(f.body, env))
        if isinstance(f, And):
            return M.land(self.ground_formula(f.left, env),
                          self.ground_formula(f.right, env))
        if isinstance(f, Or):
            return M.lor(self.ground_formula(f.left, env),
                         self.ground_formula(f.right, env))
        if isinstance(f, Implies):
            return M.limplies(self.ground_formula(f.left, env),
                              self.ground_formula(f.right, env))
        if isinstance(f, Iff):
            l = self.ground_formula(f.left, env)
            r = self.ground_formula(f.right, env)
            return M.lor(M.land(l, r), M.land(M.lnot(l), M.lnot(r)))
        if isinstance(f, (AllQ, SomeQ)):
            ar, m = self._gexpr(f.domain, env, 0)
            if ar != 1:
                raise GroundError("quantifier domain must be unary")
            parts = []
            for (a,), x in sorted(m.items()):
                body = self.ground_formula(f.body, {**env, f.var: (a,)})
                guard = self._atomize(x)
                parts.append(M.limplies(guard, body)
                             if isinstance(f, AllQ) else M.land(guard, body))
            return (M.land(*parts) if isinstance(f, AllQ)
                    else M.lor(*parts)) if parts else (
                M.LTrue() if isinstance(f, AllQ) else M.LFalse())
        if isinstance(f, After):
            return M.LNext(self.ground_formula(f.body, env))
        if isinstance(f, Always):
            return M.LAlways(self.ground_formula(f.body, env))
        if isinstance(f, Eventually):
            return M.LEventually(self.ground_formula(f.body, env))
        if isinstance(f, Until):
            return M.LUntil(self.ground_formula(f.left, env),
                            self.ground_formula(f.right, env))
        if isinstance(f, Releases):
            return M.LRelease(self.ground_formula(f.left, env),
                              self.ground_formula(f.right, env))
        if isinstance(f, Before):
            return M.LBefore(self.ground_formula(f.body, env))
        if isinstance(f, Once):
            return M.LOnce(self.ground_formula(f.body, env))
        if isinstance(f, Historically):
            return M.LHist(self.ground_formula(f.body, env))
        if isinstance(f, Since):
            return M.LSince(self.ground_formula(f.left, env),
                            self.ground_formula(f.right, env))
        if isinstance(f, (TraceAll, TraceSome)):
            raise GroundError("trace quantifier inside a single problem")
        raise GroundError(f"unknown formula node {type(f).__name__}")

    def _atomize(self, bexpr):
        if isinstance(bexpr, type(TRUE)):
            return M.LTrue()
        if isinstance(bexpr, type(FALSE)):
            return M.LFalse()
        return M.LAtom(self.trace_var, bexpr)


# ---------------------------------------------------------------------------
# Multi-trace matrix grounding

_TAG_SEP = "\x1f"


def _tag_leaves(b, trace):
    return map_leaves(
        b, lambda v: VarIs(f"{trace}{_TAG_SEP}{v.name}", v.value, v.primed))


def _leaf_tag(v):
    if _TAG_SEP in v.name:
        return v.name.split(_TAG_SEP, 1)[0]
    return None


def _untag(b):
    return map_leaves(
        b, lambda v: VarIs(v.name.split(_TAG_SEP, 1)[-1], v.value, v.primed))


def _tags_of(b):
    return {_leaf_tag(v) for v in _bleaves(b)}


def _bleaves(b):
    from .boolexpr import BAnd, BNot, BOr

    if isinstance(b, VarIs):
        return [b]
    if isinstance(b, BNot):
        return _bleaves(b.body)
    if isinstance(b, (BAnd, BOr)):
        return [v for a in b.args for v in _bleaves(a)]
    return []


def _split_tagged(b):
    """Lift a trace-tagged Boolean expression to an LTL formula whose atoms
    are maximal single-trace subexpressions."""
    from .boolexpr import BAnd, BNot, BOr

    if isinstance(b, type(TRUE)):
        return M.LTrue()
    if isinstance(b, type(FALSE)):
        return M.LFalse()
    tags = _tags_of(b)
    if len(tags) <= 1:
        tag = next(iter(tags)) if tags else None
        return M.LAtom(tag, _untag(b))
    if isinstance(b, BNot):
        return M.lnot(_split_tagged(b.body))
    if isinstance(b, (BAnd, BOr)):
        groups, mixed = {}, []
        for a in b.args:
            atags = _tags_of(a)
            if len(atags) <= 1:
                groups.setdefault(
                    next(iter(atags)) if atags else None, []).append(a)
            else:
                mixed.append(_split_tagged(a))
        comb, lift = ((band, M.land) if isinstance(b, BAnd)
                      else (bor, M.lor))
        parts = [
            M.LAtom(tag, _untag(comb(*args)))
            for tag, args in sorted(groups.items(), key=lambda kv: str(kv[0]))
        ]
        return lift(*(parts + mixed))
    raise TypeError(type(b))


class _MatrixGrounder(_Grounder):
    """Grounds a trace-quantifier-free matrix whose expressions mix the
    outer problem's relations with `Sel`-tagged references into quantified
    problems, producing LTL whose atoms carry the owning trace variable."""

    def __init__(self, outer, subs):
        super().__init__(outer, trace_var=None, name="outer")
        self.subs = subs

    def _gexpr(self, e, env, t):
        if isinstance(e, Sel):
            g = self.subs.get(e.trace)
            if g is None:
                raise GroundError(f"unknown trace variable {e.trace!r}")
            ar, m = g._gexpr(e.expr, env, t)
            return ar, {
                tu: _tag_leaves(x, e.trace) for tu, x in m.items()
            }
        return super()._gexpr(e, env, t)

    def _atomize(self, bexpr):
        return _split_tagged(bexpr)


def ground_matrix(matrix, outer, subs):
    """Ground a prenex matrix over the outer problem plus per-trace grounders
    (trace var -> _Grounder of that quantifier's problem)."""
    return _MatrixGrounder(outer, subs).ground_formula(matrix)


def grounder_for(p, trace_var=None, name=None):
    return _Grounder(p, trace_var, name)


# ---------------------------------------------------------------------------
# Classification


def classify_conjuncts(f):
    """Split a grounded top-level conjunction into (init, invar, trans, spec):
    temporal-free conjuncts become INIT, `always` of temporal-free bodies
    become INVAR (unprimed) or TRANS (primed), the rest stays residual LTL."""
    init, invar, trans, spec = [], [], [], []
    for c in M.conjuncts(f):
        b = _as_bexpr(c)
        if b is not None and not has_primed(b):
            init.append(b)
            continue
        if isinstance(c, M.LAlways):
            b = _as_bexpr(c.body)
            if b is not None:
                (trans if has_primed(b) else invar).append(b)
                continue
        spec.append(c)
    return init, invar, trans, spec


def _as_bexpr(f):
    """The Boolean expression of a temporal-operator-free formula, or None."""
    if isinstance(f, M.LTrue):
        return TRUE
    if isinstance(f, M.LFalse):
        return FALSE
    if isinstance(f, M.LAtom):
        return f.expr
    if isinstance(f, M.LNot):
        b = _as_bexpr(f.body)
        return None if b is None else bnot(b)
    if isinstance(f, M.LAnd):
        l, r = _as_bexpr(f.left), _as_bexpr(f.right)
        return None if l is None or r is None else band(l, r)
    if isinstance(f, M.LOr):
        l, r = _as_bexpr(f.left), _as_bexpr(f.right)
        return None if l is None or r is None else bor(l, r)
    return None


def reassemble(init, invar, trans, spec, trace_var=None):
    """Re-conjoin classified parts into one LTL formula (for equivalence
    checking): init ∧ G invar ∧ G trans ∧ spec."""
    def atom(b):
        return M.LAtom(trace_var, b)

    parts = [atom(b) for b in init]
    parts += [M.LAlways(atom(b)) for b in invar + list(trans)]
    parts += list(spec)
    return M.land(*parts)


# ---------------------------------------------------------------------------
# Entry points


def ground(p, trace_var=None, name=None):
    """Ground a Problem into a (StateMachine, residual-LTL) pair."""
    g = _Grounder(p, trace_var, name)
    grounded = g.ground_formula(p.constraint)
    init, invar, trans, spec = classify_conjuncts(grounded)
    residual = M.land(*spec)
    machine = StateMachine(
        g.name, g.variables, tuple(init), tuple(g.invar) + tuple(invar),
        tuple(g.trans) + tuple(trans), g.gmap, trace_var, residual)
    return machine, residual


def bitblast(m, return_fix=False):
    """Replace integer variables by ceil(log2 d) Boolean bits, adding a range
    INVAR when the domain size is not a power of two. With return_fix, also
    returns the leaf-rewriting function (identity when nothing changed), so
    formulas outside the machine can be remapped consistently."""
    mapping = {}
    variables = []
    range_invar = []
    for v in m.variables:
        if v.boolean:
            variables.append(v)
            continue
        nbits = max(1, math.ceil(math.log2(v.size)))
        bits = [
            VarDecl(f"{v.name}#b{i}", 2, boolean=True, frozen=v.frozen)
            for i in range(nbits)
        ]
        variables.extend(bits)
        enc = {}
        for idx, val in enumerate(v.values):
            enc[val] = tuple(
                (bits[i].name, bool((idx >> i) & 1)) for i in range(nbits)
            )
        mapping[v.name] = enc
        for idx in range(v.size, 2 ** nbits):
            pat = band(*(
                VarIs(bits[i].name, bool((idx >> i) & 1))
                for i in range(nbits)
            ))
            range_invar.append(bnot(pat))
    if not mapping:
        return (m, lambda leaf: leaf) if return_fix else m

    def fix(leaf):
        enc = mapping.get(leaf.name)
        if enc is None:
            return leaf
        return band(*(
            VarIs(n, bv, leaf.primed) for n, bv in enc[leaf.value]
        ))

    def fix_all(exprs):
        return tuple(map_leaves(b, fix) for b in exprs)

    gmap = {}
    for key, ref in m.grounding_map.items():
        if ref[0] == "int" and ref[1] in mapping:
            gmap[key] = ("bits", mapping[ref[1]][ref[2]])
        else:
            gmap[key] = ref
    residual = m.residual
    if residual is not None:
        residual = M.map_atoms(
            residual,
            lambda a: M.LAtom(a.trace, map_leaves(a.expr, fix)))
    out = StateMachine(
        m.name, variables, fix_all(m.init),
        tuple(range_invar) + fix_all(m.invar), fix_all(m.trans), gmap,
        m.trace_var, residual)
    return (out, fix) if return_fix else out


# ---------------------------------------------------------------------------
# SMV emission


def _fmt_val(v):
    if v is True:
        return "TRUE"
    if v is False:
        return "FALSE"
    return str(v)


def _fmt_bexpr(b, prec=0):
    if isinstance(b, type(TRUE)):
        return "TRUE"
    if isinstance(b, type(FALSE)):
        return "FALSE"
    if isinstance(b, VarIs):
        name = f"next({b.name})" if b.primed else b.name
        if b.value is True:
            return name
        if b.value is False:
            return f"!{name}"
        s = f"{name} = {_fmt_val(b.value)}"
        return f"({s})" if prec > 0 else s
    from .boolexpr import BNot, BAnd, BOr

    if isinstance(b, BNot):
        return f"!{_fmt_bexpr(b.body, 3)}"
    if isinstance(b, BAnd):
        s = " & ".join(_fmt_bexpr(a, 2) for a in b.args)
        return f"({s})" if prec > 2 else s
    if isinstance(b, BOr):
        s = " | ".join(_fmt_bexpr(a, 1) for a in b.args)
        return f"({s})" if prec > 1 else s
    raise TypeError(type(b))


def _fmt_ltl(f, prec=0):
    if isinstance(f, M.LTrue):
        return "TRUE"
    if isinstance(f, M.LFalse):
        return "FALSE"
    if isinstance(f, M.LAtom):
        return f"({_fmt_bexpr(f.expr)})"
    if isinstance(f, M.LNot):
        return f"!{_fmt_ltl(f.body, 4)}"
    if isinstance(f, M.LAnd):
        s = f"{_fmt_ltl(f.left, 2)} & {_fmt_ltl(f.right, 2)}"
        return f"({s})" if prec > 2 else s
    if isinstance(f, M.LOr):
        s = f"{_fmt_ltl(f.left, 1)} | {_fmt_ltl(f.right, 1)}"
        return f"({s})" if prec > 1 else s
    unary = {M.LNext: "X", M.LAlways: "G", M.LEventually: "F",
             M.LBefore: "Y", M.LOnce: "O", M.LHist: "H"}
    for cls, op in unary.items():
        if isinstance(f, cls):
            return f"{op} {_fmt_ltl(f.body, 4)}"
    binary = {M.LUntil: "U", M.LRelease: "R", M.LSince: "S"}
    for cls, op in binary.items():
        if isinstance(f, cls):
            s = f"{_fmt_ltl(f.left, 4)} {op} {_fmt_ltl(f.right, 4)}"
            return f"({s})"
    raise TypeError(type(f))


def emit_smv(m, include_residual=True):
    """Serialize a machine in the declarative SMV dialect read by parse_smv;
    deterministic (declaration-ordered) output."""
    out = ["MODULE main", "VAR"]
    for v in m.variables:
        if v.boolean:
            out.append(f"  {v.name} : boolean;")
        else:
            dom = ", ".join(_fmt_val(x) for x in v.values)
            out.append(f"  {v.name} : {{{dom}}};")
    for b in m.init:
        out.append(f"INIT {_fmt_bexpr(b)};")
    for b in m.invar:
        out.append(f"INVAR {_fmt_bexpr(b)};")
    for b in m.trans:
        out.append(f"TRANS {_fmt_bexpr(b)};")
    if include_residual and m.residual is not None and \
            not isinstance(m.residual, M.LTrue):
        out.append(f"LTLSPEC {_fmt_ltl(m.residual)};")
    return "\n".join(out) + "\n"
