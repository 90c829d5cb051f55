"""Brute-force instance enumeration: the executable oracle.

Enumerates every lasso of a Problem up to a prefix bound in a deterministic
lexicographic order, and decides hyper problems by exhaustive quantification
over those lassos.
"""

import itertools

from .ast import HyrelError, LassoTrace, TraceContext, TupleSet
from .bounds import constant_decls, expand_lower, expand_upper, upper_satisfied
from .eval import eval_formula

DEFAULT_CEILING = 2 ** 20


def relation_values(decl, constants, universe, ceiling=DEFAULT_CEILING):
    """All tuple sets between the declared bounds, in lexicographic order."""
    lo = expand_lower(decl.lower, constants, universe)
    hi = expand_upper(decl.upper, constants, universe)
    if not lo.tuples <= hi.tuples:
        raise HyrelError(f"lower bound of {decl.name} exceeds upper bound")
    free = sorted(hi.tuples - lo.tuples)
    if 2 ** len(free) > ceiling:
        raise HyrelError(
            f"value count 2^{len(free)} for {decl.name} exceeds ceiling {ceiling}"
        )
    out = []
    for r in range(len(free) + 1):
        for combo in itertools.combinations(free, r):
            v = TupleSet(decl.arity, lo.tuples | frozenset(combo))
            if upper_satisfied(decl.upper, v, constants, universe):
                out.append(v)
    out.sort(key=lambda v: (len(v), v.sorted()))
    return out


def enumerate_lassos(p, max_prefix, max_loop_window=None, ceiling=DEFAULT_CEILING,
                     prune=True):
    """Yield every LassoTrace of p with prefix length ≤ max_prefix (and loop
    window ≤ max_loop_window) whose bounds and constraint hold.

    With prune enabled, partial prefixes whose optimistic bounded valuation is
    already false are cut off: no infinite extension can satisfy the
    constraint, so no lasso completing the prefix is lost.
    """
    from .eval import eval_bounded
    from .ast import OPT

    if max_loop_window is None:
        max_loop_window = max_prefix
    constants = constant_decls(p.decls)
    static = [d for d in p.decls if d.is_static]
    mutable = [d for d in p.decls if not d.is_static]
    static_vals = [relation_values(d, constants, p.universe) for d in static]
    mutable_vals = [relation_values(d, constants, p.universe) for d in mutable]
    per_state = 1
    for vs in mutable_vals:
        per_state *= len(vs)
    if per_state > ceiling:
        raise HyrelError(
            f"per-state valuation count {per_state} exceeds ceiling {ceiling}"
        )

    def states_for(static_combo):
        base = dict(zip((d.name for d in static), static_combo))
        for mut_combo in itertools.product(*mutable_vals):
            s = dict(base)
            s.update(zip((d.name for d in mutable), mut_combo))
            yield s

    def viable(seq):
        if not prune:
            return True
        t = LassoTrace(seq, len(seq) - 1)
        ctx = TraceContext({"$self": t}, universe=p.universe)
        return eval_bounded(p.constraint, ctx, "$self", 0, len(seq) - 1, OPT)

    def emit(seq, n):
        for loop in range(max(0, n - max_loop_window), n):
            t = LassoTrace(seq, loop)
            ctx = TraceContext({"$self": t}, universe=p.universe)
            if eval_formula(p.constraint, ctx, "$self", 0):
                yield t

    for n in range(1, max_prefix + 1):
        for static_combo in itertools.product(*static_vals):
            all_states = list(states_for(static_combo))

            def walk(seq):
                if len(seq) == n:
                    yield from emit(seq, n)
                    return
                for s in all_states:
                    nxt = seq + [s]
                    if len(nxt) < n and not viable(nxt):
                        continue
                    yield from walk(nxt)

            yield from walk([])


class InstancePool:
    """Caches enumerate_lassos output per inner problem of a hyper problem."""

    def __init__(self, h, max_prefix, max_loop_window=None, ceiling=DEFAULT_CEILING):
        self.h = h
        self.max_prefix = max_prefix
        self.max_loop_window = max_loop_window
        self.ceiling = ceiling
        self._cache = {}

    def __call__(self, name):
        if name not in self._cache:
            self._cache[name] = list(
                enumerate_lassos(
                    self.h.inner_problem(name),
                    self.max_prefix,
                    self.max_loop_window,
                    self.ceiling,
                )
            )
        return self._cache[name]


def is_instance(t, h, max_prefix=4, pool=None):
    """Does lasso t satisfy the outer declarations and hyper constraint of h,
    with inner trace quantifiers resolved by brute-force enumeration?"""
    from .bounds import satisfies_bounds

    if not satisfies_bounds(t, h.outer.decls, h.outer.universe):
        return False
    if pool is None:
        pool = InstancePool(h, max_prefix)
    ctx = TraceContext({"$outer": t}, universe=h.outer.universe)
    return eval_formula(h.outer.constraint, ctx, "$outer", 0, quantify=pool)


def find_instance(h, max_prefix=4, ceiling=DEFAULT_CEILING):
    """First outer lasso (in enumeration order) that is an instance of h, or
    None if none exists within the bound."""
    pool = InstancePool(h, max_prefix, ceiling=ceiling)
    outer_all = Problem_all_lassos(h, max_prefix, ceiling)
    for t in outer_all:
        ctx = TraceContext({"$outer": t}, universe=h.outer.universe)
        if eval_formula(h.outer.constraint, ctx, "$outer", 0, quantify=pool):
            return t
    return None


def Problem_all_lassos(h, max_prefix, ceiling):
    from .ast import Problem, TrueF

    outer_free = Problem(h.outer.universe, h.outer.decls, TrueF())
    return enumerate_lassos(outer_free, max_prefix, ceiling=ceiling)
