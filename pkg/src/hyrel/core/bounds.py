"""Bound expansion and multiplicity checking for relation declarations.

Upper bounds are either literal tuple sets or conjunctions of multiplicity
arrow trees over constant-bounded expressions. The arrow rule is applied
right-associatively column pair by column pair: for `L mL -> mR R`, the image
of every L-tuple must satisfy mR (and R recursively), and the preimage of
every R-tuple must satisfy mL (and L recursively).
"""

from .ast import (
    BoundArrow, BoundExpr, BoundLeaf, EvalError, HyrelError, LassoTrace,
    TraceContext, TupleSet, mult_card_ok, SET,
)
from .eval import eval_expr


def _const_ctx(constants, universe):
    t = LassoTrace([dict(constants)], 0)
    return TraceContext({"$const": t}, universe=universe)


def eval_const_expr(e, constants, universe):
    """Evaluate a constant relational expression (leaves of bound trees)."""
    ctx = _const_ctx(constants, universe)
    return eval_expr(e, ctx, "$const", 0)


def tree_arity(tree, constants, universe):
    if isinstance(tree, BoundLeaf):
        return eval_const_expr(tree.expr, constants, universe).arity
    return tree_arity(tree.left, constants, universe) + tree_arity(
        tree.right, constants, universe
    )


def tree_expansion(tree, constants, universe):
    """All tuples an arrow tree can possibly admit (multiplicities ignored)."""
    if isinstance(tree, BoundLeaf):
        return eval_const_expr(tree.expr, constants, universe)
    l = tree_expansion(tree.left, constants, universe)
    r = tree_expansion(tree.right, constants, universe)
    return TupleSet(
        l.arity + r.arity, frozenset(a + b for a in l.tuples for b in r.tuples)
    )


def tree_satisfied(tree, value, constants, universe):
    """Does a tuple-set value satisfy one arrow tree?"""
    if isinstance(tree, BoundLeaf):
        base = eval_const_expr(tree.expr, constants, universe)
        return value.tuples <= base.tuples and mult_card_ok(tree.mult, len(value))
    lexp = tree_expansion(tree.left, constants, universe)
    rexp = tree_expansion(tree.right, constants, universe)
    la = lexp.arity
    full = frozenset(a + b for a in lexp.tuples for b in rexp.tuples)
    if not value.tuples <= full:
        return False
    for a in lexp.sorted():
        img = TupleSet(
            rexp.arity, frozenset(t[la:] for t in value.tuples if t[:la] == a)
        )
        if not mult_card_ok(tree.mult_right, len(img)):
            return False
        if not tree_satisfied(_strip_mult(tree.right), img, constants, universe):
            return False
    for b in rexp.sorted():
        pre = TupleSet(
            la, frozenset(t[:la] for t in value.tuples if t[la:] == b)
        )
        if not mult_card_ok(tree.mult_left, len(pre)):
            return False
        if not tree_satisfied(_strip_mult(tree.left), pre, constants, universe):
            return False
    return True


def _strip_mult(tree):
    # row/column images are checked against the sub-tree's structure only;
    # the outer multiplicity was already applied by the enclosing arrow
    if isinstance(tree, BoundLeaf):
        return BoundLeaf(SET, tree.expr)
    return tree


def expand_upper(bexpr, constants, universe):
    if bexpr.is_literal:
        return bexpr.literal
    sets = [tree_expansion(t, constants, universe) for t in bexpr.arrows]
    out = sets[0].tuples
    for s in sets[1:]:
        out &= s.tuples
    return TupleSet(sets[0].arity, out)


def expand_lower(bexpr, constants, universe):
    if bexpr.is_literal:
        return bexpr.literal
    if len(bexpr.arrows) == 1 and isinstance(bexpr.arrows[0], BoundLeaf):
        return eval_const_expr(bexpr.arrows[0].expr, constants, universe)
    raise HyrelError("lower bounds must be literal tuple sets or plain expressions")


def upper_satisfied(bexpr, value, constants, universe):
    if bexpr.is_literal:
        return value.tuples <= bexpr.literal.tuples
    return all(tree_satisfied(t, value, constants, universe) for t in bexpr.arrows)


def constant_decls(decls):
    """Relations with equal literal lower and upper bounds, as a value map."""
    out = {}
    for d in decls:
        if d.lower.is_literal and d.upper.is_literal and d.lower.literal == d.upper.literal:
            out[d.name] = d.lower.literal
    return out


def satisfies_bounds(t, decls, universe=None):
    """Check lower ⊆ value ⊆ upper for every relation in every state, with
    multiplicity-arrow uppers checked by the inductive per-column rule, and
    static relations constant over the prefix."""
    constants = constant_decls(decls)
    for d in decls:
        values = []
        for s in t.states:
            if d.name not in s:
                return False
            values.append(s[d.name])
        if d.is_static and any(v != values[0] for v in values[1:]):
            return False
        try:
            lo = expand_lower(d.lower, constants, universe)
        except EvalError:
            return False
        for v in values:
            if v.arity != d.arity:
                return False
            if not lo.tuples <= v.tuples:
                return False
            if not upper_satisfied(d.upper, v, constants, universe):
                return False
    return True
