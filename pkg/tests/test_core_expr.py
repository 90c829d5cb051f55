import pytest

from hyrel.core import (
    AtomE, BoundExpr, Compr, Converse, Closure, Diff, EvalError, In, Inter,
    Iden, Join, LassoTrace, NoneE, Prime, Product, Rel, Sel, Some,
    TraceContext, TupleSet, Universe, UnivE, Union, eval_expr, ts,
)


def mk_ctx(states, loop=0, universe=None, name="t"):
    t = LassoTrace(states, loop)
    return TraceContext({name: t}, universe=universe)


U = Universe(("a", "b"))


def test_converse():
    ctx = mk_ctx([{"r": ts(2, [("a", "b")])}])
    assert eval_expr(Converse(Rel("r")), ctx, "t", 0) == ts(2, [("b", "a")])


def test_transitive_closure():
    ctx = mk_ctx([{"r": ts(2, [("a", "b"), ("b", "a")])}])
    got = eval_expr(Closure(Rel("r")), ctx, "t", 0)
    assert got == ts(2, [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")])


def test_join_single_witness():
    ctx = mk_ctx([{"r": ts(2, [("a", "b")]), "s": ts(2, [("b", "a")])}])
    assert eval_expr(Join(Rel("r"), Rel("s")), ctx, "t", 0) == ts(2, [("a", "a")])


def test_join_no_witness():
    ctx = mk_ctx([{"r": ts(2, [("a", "b")]), "s": ts(2, [("a", "a")])}])
    assert eval_expr(Join(Rel("r"), Rel("s")), ctx, "t", 0) == ts(2)


def test_set_operators():
    ctx = mk_ctx([{"p": ts(1, [("a",)]), "q": ts(1, [("a",), ("b",)])}])
    assert eval_expr(Union(Rel("p"), Rel("q")), ctx, "t", 0) == ts(1, [("a",), ("b",)])
    assert eval_expr(Inter(Rel("p"), Rel("q")), ctx, "t", 0) == ts(1, [("a",)])
    assert eval_expr(Diff(Rel("q"), Rel("p")), ctx, "t", 0) == ts(1, [("b",)])
    assert eval_expr(Product(Rel("p"), Rel("q")), ctx, "t", 0) == ts(
        2, [("a", "a"), ("a", "b")]
    )


def test_iden_univ_none():
    ctx = mk_ctx([{}], universe=U)
    assert eval_expr(Iden(), ctx, "t", 0) == ts(2, [("a", "a"), ("b", "b")])
    assert eval_expr(UnivE(), ctx, "t", 0) == ts(1, [("a",), ("b",)])
    assert eval_expr(NoneE(), ctx, "t", 0) == ts(1)


def test_prime_reads_next_state():
    ctx = mk_ctx([{"p": ts(1, [("a",)])}, {"p": ts(1, [("b",)])}], loop=1)
    assert eval_expr(Prime(Rel("p")), ctx, "t", 0) == ts(1, [("b",)])
    # beyond the prefix the lasso folds into the loop
    assert eval_expr(Prime(Rel("p")), ctx, "t", 1) == ts(1, [("b",)])


def test_selector_switches_trace():
    t1 = LassoTrace([{"p": ts(1, [("a",)])}], 0)
    t2 = LassoTrace([{"p": ts(1, [("b",)])}], 0)
    ctx = TraceContext({"t1": t1, "t2": t2})
    assert eval_expr(Sel(Rel("p"), "t2"), ctx, "t1", 0) == ts(1, [("b",)])


def test_atom_constant():
    ctx = mk_ctx([{}])
    assert eval_expr(AtomE("a"), ctx, "t", 0) == ts(1, [("a",)])


def test_comprehension_binds_singletons():
    ctx = mk_ctx(
        [{"p": ts(1, [("a",), ("b",)]), "r": ts(2, [("a", "b")])}], universe=U
    )
    e = Compr((("x", Rel("p")),), Some(Join(Rel("x"), Rel("r"))))
    assert eval_expr(e, ctx, "t", 0) == ts(1, [("a",)])


def test_unbound_variable_error():
    ctx = mk_ctx([{}])
    with pytest.raises(EvalError, match="missing"):
        eval_expr(Rel("missing"), ctx, "t", 0)


def test_arity_mismatch_error():
    ctx = mk_ctx([{"p": ts(1, [("a",)]), "r": ts(2, [("a", "b")])}])
    with pytest.raises(EvalError):
        eval_expr(Union(Rel("p"), Rel("r")), ctx, "t", 0)
    with pytest.raises(EvalError):
        eval_expr(Converse(Rel("p")), ctx, "t", 0)
