"""Reference semantics: relational expression evaluation, exact infinite
(ultimately periodic) formula evaluation, and the four bounded semantics.

The infinite evaluator is the ground-truth oracle for the whole pipeline. It
works by scanning positions of the joint lasso up to a stabilization horizon:
state-level values repeat with the joint loop period, and past-operator values
stabilize after a bounded number of extra loop traversals (their recurrences
are monotone in the carried bit), so every temporal operator can be decided by
a finite scan.
"""

import math

from .ast import (
    AllQ, After, Always, AtomE, Before, Closure, Compr, Converse, Diff,
    EvalError, Eventually, Expr, FalseF, Formula, Historically, Iden, Iff,
    Implies, In, Inter, Join, LassoTrace, Lone, NoneE, Not, Once, Or, Prime,
    Problem, Product, Rel, Releases, Sel, Since, Some, SomeQ, TraceAll,
    TraceContext, TraceSome, TrueF, TupleSet, Union, UnivE, Until,
    And, children,
    PES, OPT, HPES, HOPT, dual_sem,
)

# ---------------------------------------------------------------------------
# Expression evaluation


def eval_expr(e, ctx, pi, i, fcallback=None):
    """Denotation of expression e in trace pi at step i.

    fcallback(formula, pi, i) decides comprehension bodies; by default they are
    evaluated with the exact infinite semantics.
    """
    if fcallback is None:
        def fcallback(f, pi2, i2):
            return eval_formula(f, ctx, pi2, i2)
    return _eexpr(e, ctx, pi, i, fcallback)


def _eexpr(e, ctx, pi, i, fcb):
    if isinstance(e, Rel):
        if e.name in ctx.bindings:
            t = ctx.bindings[e.name]
            return TupleSet(len(t), frozenset({t}))
        state = ctx.trace(pi).state_at(i)
        try:
            return state[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, AtomE):
        return TupleSet(1, frozenset({(e.atom,)}))
    if isinstance(e, NoneE):
        return TupleSet(e.arity, frozenset())
    if isinstance(e, UnivE):
        if ctx.universe is None:
            raise EvalError("univ used without a universe in context")
        return TupleSet(1, frozenset((a,) for a in ctx.universe.atoms))
    if isinstance(e, Iden):
        if ctx.universe is None:
            raise EvalError("iden used without a universe in context")
        return TupleSet(2, frozenset((a, a) for a in ctx.universe.atoms))
    if isinstance(e, Converse):
        v = _eexpr(e.expr, ctx, pi, i, fcb)
        if v.arity != 2:
            raise EvalError("converse requires arity 2")
        return TupleSet(2, frozenset((b, a) for (a, b) in v.tuples))
    if isinstance(e, Closure):
        v = _eexpr(e.expr, ctx, pi, i, fcb)
        if v.arity != 2:
            raise EvalError("closure requires arity 2")
        return transitive_closure(v)
    if isinstance(e, Union):
        l, r = _eexpr(e.left, ctx, pi, i, fcb), _eexpr(e.right, ctx, pi, i, fcb)
        _same_arity(l, r)
        return TupleSet(l.arity, l.tuples | r.tuples)
    if isinstance(e, Inter):
        l, r = _eexpr(e.left, ctx, pi, i, fcb), _eexpr(e.right, ctx, pi, i, fcb)
        _same_arity(l, r)
        return TupleSet(l.arity, l.tuples & r.tuples)
    if isinstance(e, Diff):
        l, r = _eexpr(e.left, ctx, pi, i, fcb), _eexpr(e.right, ctx, pi, i, fcb)
        _same_arity(l, r)
        return TupleSet(l.arity, l.tuples - r.tuples)
    if isinstance(e, Product):
        l, r = _eexpr(e.left, ctx, pi, i, fcb), _eexpr(e.right, ctx, pi, i, fcb)
        return TupleSet(
            l.arity + r.arity, frozenset(a + b for a in l.tuples for b in r.tuples)
        )
    if isinstance(e, Join):
        l, r = _eexpr(e.left, ctx, pi, i, fcb), _eexpr(e.right, ctx, pi, i, fcb)
        return join(l, r)
    if isinstance(e, Compr):
        return _comprehension(e, ctx, pi, i, fcb)
    if isinstance(e, Prime):
        return _eexpr(e.expr, ctx, pi, i + 1, fcb)
    if isinstance(e, Sel):
        return _eexpr(e.expr, ctx, e.trace, i, fcb)
    raise EvalError(f"unknown expression node {type(e).__name__}")


def _same_arity(l, r):
    if l.arity != r.arity:
        raise EvalError(f"arity mismatch {l.arity} vs {r.arity}")


def join(l, r):
    arity = l.arity + r.arity - 2
    if arity < 1:
        raise EvalError("join of two unary expressions")
    out = set()
    for a in l.tuples:
        for b in r.tuples:
            if a[-1] == b[0]:
                out.add(a[:-1] + b[1:])
    return TupleSet(arity, frozenset(out))


def transitive_closure(v):
    cur = v.tuples
    while True:
        nxt = cur | frozenset(
            (a, d) for (a, b) in cur for (c, d) in cur if b == c
        )
        if nxt == cur:
            return TupleSet(2, cur)
        cur = nxt


def _comprehension(e, ctx, pi, i, fcb):
    results = set()

    def rec(idx, cctx, prefix):
        if idx == len(e.decls):
            if fcb_with_ctx(e.body, cctx, pi, i):
                results.add(tuple(prefix))
            return
        name, dom = e.decls[idx]
        v = _eexpr(dom, cctx, pi, i, fcb)
        if v.arity != 1:
            raise EvalError("comprehension binder domain must be unary")
        for (a,) in sorted(v.tuples):
            rec(idx + 1, cctx.bind(name, (a,)), prefix + [a])

    def fcb_with_ctx(f, cctx, pi2, i2):
        # the callback closes over the outer ctx; re-evaluate with bindings
        return eval_formula(f, cctx, pi2, i2)

    rec(0, ctx, [])
    return TupleSet(len(e.decls), frozenset(results))


def prime_depth_expr(e):
    if isinstance(e, Prime):
        return 1 + prime_depth_expr(e.expr)
    if isinstance(e, (Rel, AtomE, NoneE, UnivE, Iden)):
        return 0
    if isinstance(e, (Converse, Closure, Sel)):
        return prime_depth_expr(e.expr)
    if isinstance(e, (Union, Inter, Diff, Product, Join)):
        return max(prime_depth_expr(e.left), prime_depth_expr(e.right))
    if isinstance(e, Compr):
        d = max((prime_depth_expr(dom) for _, dom in e.decls), default=0)
        return max(d, prime_depth_formula(e.body))
    return 0


def prime_depth_formula(f):
    if isinstance(f, In):
        return max(prime_depth_expr(f.left), prime_depth_expr(f.right))
    if isinstance(f, (Some, Lone)):
        return prime_depth_expr(f.expr)
    if isinstance(f, (AllQ, SomeQ)):
        return max(prime_depth_expr(f.domain), prime_depth_formula(f.body))
    return max((prime_depth_formula(c) for c in children(f)), default=0)


def past_depth(f):
    if isinstance(f, (Before, Once, Historically, Since)):
        return 1 + max((past_depth(c) for c in children(f)), default=0)
    if isinstance(f, In):
        return 0
    return max((past_depth(c) for c in children(f)), default=0)


# ---------------------------------------------------------------------------
# Exact infinite semantics


def eval_formula(f, ctx, pi, i, quantify=None):
    """Satisfaction of f over infinite (ultimately periodic) semantics.

    quantify(problem_name) yields the candidate LassoTraces of an inner
    problem; it is only consulted for trace quantifiers.
    """
    return _Evaluator(ctx, quantify, past_depth(f)).val(f, pi, i)


class _Evaluator:
    def __init__(self, ctx, quantify, pdepth):
        self.ctx = ctx
        self.quantify = quantify
        self.memo = {}
        prefixes = [len(t.states) for t in ctx.traces.values()]
        periods = [t.period for t in ctx.traces.values()]
        self.prefix = max(prefixes, default=1)
        self.period = math.lcm(*periods) if periods else 1
        # horizon past which all subformula values repeat with the period
        self.horizon = self.prefix + (3 + pdepth) * self.period

    def norm(self, i):
        if i < self.horizon:
            return i
        lo = self.horizon - self.period
        return lo + (i - lo) % self.period

    def val(self, f, pi, i, cctx=None):
        ctx = cctx if cctx is not None else self.ctx
        i = self.norm(i)
        key = (id(f), pi, i, ctx.bindings_key())
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        v = self._val(f, pi, i, ctx)
        self.memo[key] = v
        return v

    def _val(self, f, pi, i, ctx):
        cap = self.horizon + self.period

        def sub(g, j, c=ctx):
            return self.val(g, pi, j, c)

        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, In):
            fcb = lambda g, p2, i2: self.val(g, p2, i2, ctx)
            l = _eexpr(f.left, ctx, pi, i, fcb)
            r = _eexpr(f.right, ctx, pi, i, fcb)
            return l.tuples <= r.tuples
        if isinstance(f, Some):
            fcb = lambda g, p2, i2: self.val(g, p2, i2, ctx)
            return len(_eexpr(f.expr, ctx, pi, i, fcb)) > 0
        if isinstance(f, Lone):
            fcb = lambda g, p2, i2: self.val(g, p2, i2, ctx)
            return len(_eexpr(f.expr, ctx, pi, i, fcb)) <= 1
        if isinstance(f, Not):
            return not sub(f.body, i)
        if isinstance(f, And):
            return sub(f.left, i) and sub(f.right, i)
        if isinstance(f, Or):
            return sub(f.left, i) or sub(f.right, i)
        if isinstance(f, Implies):
            return (not sub(f.left, i)) or sub(f.right, i)
        if isinstance(f, Iff):
            return sub(f.left, i) == sub(f.right, i)
        if isinstance(f, AllQ):
            fcb = lambda g, p2, i2: self.val(g, p2, i2, ctx)
            dom = _eexpr(f.domain, ctx, pi, i, fcb)
            if dom.arity != 1:
                raise EvalError("quantifier domain must be unary")
            return all(
                self.val(f.body, pi, i, ctx.bind(f.var, t)) for t in dom.sorted()
            )
        if isinstance(f, SomeQ):
            fcb = lambda g, p2, i2: self.val(g, p2, i2, ctx)
            dom = _eexpr(f.domain, ctx, pi, i, fcb)
            if dom.arity != 1:
                raise EvalError("quantifier domain must be unary")
            return any(
                self.val(f.body, pi, i, ctx.bind(f.var, t)) for t in dom.sorted()
            )
        if isinstance(f, After):
            return sub(f.body, i + 1)
        if isinstance(f, Always):
            return all(sub(f.body, j) for j in range(i, cap))
        if isinstance(f, Eventually):
            return any(sub(f.body, j) for j in range(i, cap))
        if isinstance(f, Until):
            for l in range(i, cap):
                if sub(f.right, l):
                    return True
                if not sub(f.left, l):
                    return False
            return False
        if isinstance(f, Releases):
            # weak release: right holds up to and including the step where
            # left releases it, or forever
            for l in range(i, cap):
                if not sub(f.right, l):
                    return False
                if sub(f.left, l):
                    return True
            return True
        if isinstance(f, Before):
            return i > 0 and sub(f.body, i - 1)
        if isinstance(f, Once):
            return any(sub(f.body, j) for j in range(i, -1, -1))
        if isinstance(f, Historically):
            return all(sub(f.body, j) for j in range(i, -1, -1))
        if isinstance(f, Since):
            for l in range(i, -1, -1):
                if sub(f.right, l):
                    return True
                if not sub(f.left, l):
                    return False
            return False
        if isinstance(f, TraceAll):
            return all(
                _Evaluator(
                    ctx.bind_trace(f.var, t), self.quantify, past_depth(f.body)
                ).val(f.body, pi, i)
                for t in self._instances(f.problem)
            )
        if isinstance(f, TraceSome):
            return any(
                _Evaluator(
                    ctx.bind_trace(f.var, t), self.quantify, past_depth(f.body)
                ).val(f.body, pi, i)
                for t in self._instances(f.problem)
            )
        raise EvalError(f"unknown formula node {type(f).__name__}")

    def _instances(self, problem):
        if self.quantify is None:
            raise EvalError(f"trace quantifier over {problem!r} without enumerator")
        return self.quantify(problem)


# ---------------------------------------------------------------------------
# Bounded semantics


def eval_bounded(f, ctx, pi, i, k, sem, paper_literal_release=False):
    """Bounded satisfaction over the length-(k+1) prefixes of the traces in
    ctx, under pessimistic/optimistic semantics or their halting variants."""
    if i > k:
        raise EvalError(f"step index {i} exceeds bound {k}")
    for t in ctx.traces.values():
        if len(t.states) < k + 1:
            raise EvalError("trace prefix shorter than bound k")
    if sem in (HPES, HOPT):
        if _stutters_at(ctx, k):
            cut = {
                name: LassoTrace(t.states[: k + 1], k)
                for name, t in ctx.traces.items()
            }
            cctx = TraceContext(cut, ctx.bindings, ctx.universe)
            return eval_formula(f, cctx, pi, i)
        sem = PES if sem == HPES else OPT
    b = _Bounded(ctx, k, paper_literal_release)
    return b.val(f, pi, i, sem, ctx)


def _stutters_at(ctx, k):
    for t in ctx.traces.values():
        if t.state_at(k + 1) != t.state_at(k):
            return False
    return True


class _Bounded:
    def __init__(self, ctx, k, paper_literal_release):
        self.ctx = ctx
        self.k = k
        self.plr = paper_literal_release
        self.memo = {}

    def val(self, f, pi, i, sem, ctx):
        key = (id(f), pi, i, sem, ctx.bindings_key())
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        v = self._val(f, pi, i, sem, ctx)
        self.memo[key] = v
        return v

    def _atom(self, f, pi, i, sem, ctx):
        if i + prime_depth_formula(f) > self.k:
            return sem == OPT
        fcb = lambda g, p2, i2: self.val(g, p2, i2, sem, ctx)
        if isinstance(f, In):
            l = _eexpr(f.left, ctx, pi, i, fcb)
            r = _eexpr(f.right, ctx, pi, i, fcb)
            return l.tuples <= r.tuples
        if isinstance(f, Some):
            return len(_eexpr(f.expr, ctx, pi, i, fcb)) > 0
        return len(_eexpr(f.expr, ctx, pi, i, fcb)) <= 1

    def _val(self, f, pi, i, sem, ctx):
        k = self.k

        def sub(g, j, s=sem, c=ctx):
            return self.val(g, pi, j, s, c)

        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, (In, Some, Lone)):
            return self._atom(f, pi, i, sem, ctx)
        if isinstance(f, Not):
            # a negated atom is a literal: the prime-horizon rule applies to
            # the literal as a whole, otherwise negation is classical
            if isinstance(f.body, (In, Some, Lone)):
                if i + prime_depth_formula(f.body) > self.k:
                    return sem == OPT
                return not self._atom(f.body, pi, i, sem, ctx)
            return not sub(f.body, i)
        if isinstance(f, And):
            return sub(f.left, i) and sub(f.right, i)
        if isinstance(f, Or):
            return sub(f.left, i) or sub(f.right, i)
        if isinstance(f, Implies):
            return (not sub(f.left, i)) or sub(f.right, i)
        if isinstance(f, Iff):
            return sub(f.left, i) == sub(f.right, i)
        if isinstance(f, (AllQ, SomeQ)):
            if i + prime_depth_expr(f.domain) > k:
                return sem == OPT
            fcb = lambda g, p2, i2: self.val(g, p2, i2, sem, ctx)
            dom = _eexpr(f.domain, ctx, pi, i, fcb)
            op = all if isinstance(f, AllQ) else any
            return op(
                self.val(f.body, pi, i, sem, ctx.bind(f.var, t))
                for t in dom.sorted()
            )
        if isinstance(f, After):
            if sem == PES:
                return i < k and sub(f.body, i + 1)
            return i >= k or sub(f.body, i + 1)
        if isinstance(f, Always):
            if sem == PES:
                return False
            return all(sub(f.body, j) for j in range(i, k + 1))
        if isinstance(f, Eventually):
            if sem == PES:
                return any(sub(f.body, j) for j in range(i, k + 1))
            return True
        if isinstance(f, Until):
            found = any(
                sub(f.right, l) and all(sub(f.left, j) for j in range(i, l))
                for l in range(i, k + 1)
            )
            if sem == PES:
                return found
            return found or all(sub(f.left, j) for j in range(i, k + 1))
        if isinstance(f, Releases):
            rel, held = (f.left, f.right) if not self.plr else (f.right, f.left)
            found = any(
                sub(rel, l) and all(sub(held, j) for j in range(i, l + 1))
                for l in range(i, k + 1)
            )
            if sem == PES:
                return found
            return found or all(sub(held, j) for j in range(i, k + 1))
        if isinstance(f, Before):
            return i > 0 and sub(f.body, i - 1)
        if isinstance(f, Once):
            return any(sub(f.body, j) for j in range(i, -1, -1))
        if isinstance(f, Historically):
            return all(sub(f.body, j) for j in range(i, -1, -1))
        if isinstance(f, Since):
            for l in range(i, -1, -1):
                if sub(f.right, l):
                    return True
                if not sub(f.left, l):
                    return False
            return False
        if isinstance(f, (TraceAll, TraceSome)):
            raise EvalError("trace quantifier in bounded evaluation")
        raise EvalError(f"unknown formula node {type(f).__name__}")
