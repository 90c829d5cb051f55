import random

import pytest

from hyrel.core import (
    Always, And, BoundExpr, Eventually, EvalError, In, LassoTrace, Not,
    Problem, Rel, Releases, Sel, Some, TraceAll, TraceContext, TrueF,
    TupleSet, Universe, Until, eval_formula, no_, ts,
    MUTABLE, RelationDecl,
)
from genutil import (
    ctx_for, random_lasso, random_nnf, small_decls, small_universe,
)


def mk(states, loop=0):
    t = LassoTrace(states, loop)
    return TraceContext({"t": t})


def test_always_invariant_holds():
    ctx = mk([{"p": ts(1, [("a",)])}, {"p": ts(1, [("b",)])}], loop=0)
    assert eval_formula(Always(Some(Rel("p"))), ctx, "t", 0)


def test_always_fails_in_loop():
    ctx = mk([{"p": ts(1, [("a",)])}, {"p": ts(1)}], loop=1)
    assert not eval_formula(Always(Some(Rel("p"))), ctx, "t", 0)


def test_until_unfolding():
    # (no p) until (some p) on [p={}, p={a}] with loop=1: the Fig.-2-style
    # unfolding needs l=1 with no-p holding at 0
    ctx = mk([{"p": ts(1)}, {"p": ts(1, [("a",)])}], loop=1)
    assert eval_formula(Until(no_(Rel("p")), Some(Rel("p"))), ctx, "t", 0)


def test_until_is_a_least_fixpoint_on_the_loop():
    # "no p until some p" where p stays empty forever: the left side holds at
    # every position but the right side never arrives, so until is false
    ctx = mk([{"p": ts(1)}], loop=0)
    assert not eval_formula(Until(no_(Rel("p")), Some(Rel("p"))), ctx, "t", 0)


def test_eventually_sees_loop():
    ctx = mk([{"p": ts(1)}, {"p": ts(1, [("a",)])}], loop=1)
    assert eval_formula(Eventually(Some(Rel("p"))), ctx, "t", 0)
    ctx2 = mk([{"p": ts(1, [("a",)])}, {"p": ts(1)}], loop=1)
    assert eval_formula(Eventually(Some(Rel("p"))), ctx2, "t", 1) is False


def test_trace_quantifier_defers_to_enumerator():
    u = Universe(("a",))
    pdecl = RelationDecl(
        "p", 1, MUTABLE, BoundExpr.of(ts(1, [("a",)])), BoundExpr.of(ts(1, [("a",)]))
    )
    prob = Problem(u, (pdecl,), TrueF())

    def quantify(name):
        assert name == "P"
        from hyrel.core import enumerate_lassos

        return enumerate_lassos(prob, 2)

    f = TraceAll("pi", "P", Some(Sel(Rel("p"), "pi")))
    ctx = TraceContext({}, universe=u)
    assert eval_formula(f, ctx, "t", 0, quantify=quantify)


def test_trace_quantifier_without_enumerator_errors():
    f = TraceAll("pi", "P", TrueF())
    with pytest.raises(EvalError):
        eval_formula(f, TraceContext({}), "t", 0)


def unfold_once(t):
    """Same infinite trace with the loop unrolled one extra time."""
    period = t.period
    states = list(t.states) + [t.states[t.loop + j] for j in range(period)]
    return LassoTrace(states, t.loop + period)


def test_infinite_identities_randomized():
    rng = random.Random(42)
    u = small_universe()
    for _ in range(150):
        decls = small_decls(u, rng)
        t = random_lasso(decls, u, rng)
        ctx, pi = ctx_for(t, u)
        f = random_nnf(decls, rng, depth=2)
        i = rng.randrange(len(t.states))
        # always = not eventually not (infinite semantics only)
        assert eval_formula(Always(f), ctx, pi, i) == eval_formula(
            Not(Eventually(Not(f))), ctx, pi, i
        )
        # releases is the dual of until
        g = random_nnf(decls, rng, depth=1)
        assert eval_formula(Releases(f, g), ctx, pi, i) == eval_formula(
            Not(Until(Not(f), Not(g))), ctx, pi, i
        )


def test_unfolding_preserves_valuation():
    rng = random.Random(7)
    u = small_universe()
    for _ in range(120):
        decls = small_decls(u, rng)
        t = random_lasso(decls, u, rng)
        t2 = unfold_once(t)
        ctx, pi = ctx_for(t, u)
        ctx2, _ = ctx_for(t2, u)
        f = random_nnf(decls, rng, depth=2)
        for i in range(len(t.states) + 2):
            assert eval_formula(f, ctx, pi, i) == eval_formula(f, ctx2, pi, i)


def test_lasso_wrap_future_only():
    rng = random.Random(99)
    u = small_universe()
    for _ in range(100):
        decls = small_decls(u, rng)
        t = random_lasso(decls, u, rng)
        ctx, pi = ctx_for(t, u)
        f = random_nnf(decls, rng, depth=2, past=False)
        period = t.period
        for i in range(t.loop, len(t.states)):
            assert eval_formula(f, ctx, pi, i) == eval_formula(f, ctx, pi, i + period)


def test_lasso_wrap_past_stabilized():
    from hyrel.core import past_depth

    rng = random.Random(5)
    u = small_universe()
    for _ in range(100):
        decls = small_decls(u, rng)
        t = random_lasso(decls, u, rng)
        ctx, pi = ctx_for(t, u)
        f = random_nnf(decls, rng, depth=2, past=True)
        period = t.period
        base = len(t.states) + (1 + past_depth(f)) * period
        assert eval_formula(f, ctx, pi, base) == eval_formula(
            f, ctx, pi, base + period
        )
