"""NNF, prenex extraction, quantifier composition, and symmetry breaking."""

import random

import pytest

from hyrel import hyperize as H
from hyrel.core import (
    Always, And, AtomE, BoundExpr, Eventually, FalseF, HyrelError,
    HyperProblem, Iff, Implies, In, Lone, Not, Or, Problem, Rel,
    RelationDecl, Sel, Some, TraceAll, TraceSome, TrueF, Universe,
    enumerate_lassos, eval_formula, find_instance, ts,
    After, Until, Releases, Before, Since, Once, Historically,
    STATIC, MUTABLE, conj,
)

from genutil import (
    ctx_for, random_atom, random_expr, random_lasso, random_nnf,
    small_decls, small_universe,
)


# ---------------------------------------------------------------------------
# NNF


def _general_formula(decls, rng, depth):
    """Random formula with negation, implication, and iff at any position."""
    if depth == 0:
        return random_atom(decls, rng)
    op = rng.choice(
        ["not", "implies", "iff", "and", "or", "after", "always",
         "eventually", "until", "releases", "before", "once", "hist",
         "since"])
    a = _general_formula(decls, rng, depth - 1)
    if op == "not":
        return Not(a)
    if op == "after":
        return After(a)
    if op == "always":
        return Always(a)
    if op == "eventually":
        return Eventually(a)
    if op == "before":
        return Before(a)
    if op == "once":
        return Once(a)
    if op == "hist":
        return Historically(a)
    b = _general_formula(decls, rng, depth - 1)
    return {
        "implies": Implies, "iff": Iff, "and": And, "or": Or,
        "until": Until, "releases": Releases, "since": Since,
    }[op](a, b)


def _assert_nnf_shape(f):
    if isinstance(f, Not):
        assert isinstance(f.body, (In, Some, Lone, Before, Since))
        return
    assert not isinstance(f, (Implies, Iff))
    from hyrel.core.ast import children

    for c in children(f):
        _assert_nnf_shape(c)


def test_nnf_preserves_exact_semantics():
    rng = random.Random(7)
    u = small_universe()
    for _ in range(250):
        decls = small_decls(u, rng)
        f = _general_formula(decls, rng, rng.randint(1, 3))
        g = H.nnf_formula(f)
        _assert_nnf_shape(g)
        for _ in range(3):
            t = random_lasso(decls, u, rng)
            ctx, pi = ctx_for(t, u)
            assert eval_formula(f, ctx, pi, 0) == eval_formula(g, ctx, pi, 0)


def test_nnf_double_negation_and_duals():
    p = Some(Rel("p"))
    assert H.nnf_formula(Not(Not(p))) == p
    assert H.nnf_formula(Not(Always(p))) == Eventually(Not(p))
    assert H.nnf_formula(Not(Until(p, p))) == Releases(Not(p), Not(p))
    assert H.nnf_formula(Not(TraceAll("t", "P", p))) == \
        TraceSome("t", "P", Not(p))


# ---------------------------------------------------------------------------
# Hyper-formula generators


def _inner_problem(rng, u, constrained=True):
    decls = small_decls(u, rng)
    constraint = TrueF()
    if constrained and rng.random() < 0.6:
        constraint = random_nnf(decls, rng, depth=1, past=False)
    return Problem(u, decls, constraint)


def _hatom(scope, probs, rng):
    v1 = rng.choice(scope)
    e1 = Sel(random_expr(probs[v1].decls, rng, 1), v1)
    kind = rng.randrange(3)
    if kind == 0:
        f = Some(e1)
    elif kind == 1:
        f = Lone(e1)
    else:
        v2 = rng.choice(scope)
        f = In(e1, Sel(random_expr(probs[v2].decls, rng, 1), v2))
    return Not(f) if rng.random() < 0.3 else f


def _hmatrix(scope, probs, rng, depth):
    if depth == 0 or rng.random() < 0.35:
        return _hatom(scope, probs, rng)
    op = rng.choice(["and", "or", "not", "always", "eventually", "until"])
    a = _hmatrix(scope, probs, rng, depth - 1)
    if op == "not":
        return Not(a)
    if op == "always":
        return Always(a)
    if op == "eventually":
        return Eventually(a)
    b = _hmatrix(scope, probs, rng, depth - 1)
    return {"and": And, "or": Or, "until": Until}[op](a, b)


def _hyper_formula(rng, scope, probs, pnames, quota, polarity=None):
    if quota > 0 and (not scope or rng.random() < 0.55):
        var = f"t{len(probs)}"
        pname = rng.choice(pnames)
        pol = polarity if polarity else rng.choice([H.FORALL, H.EXISTS])
        node = TraceAll if pol == H.FORALL else TraceSome
        probs2 = dict(probs)
        probs2[var] = probs["$by_name"][pname]
        body = _hyper_formula(
            rng, scope + [var],
            {**probs2, var: probs["$by_name"][pname]}, pnames, quota - 1)
        return node(var, pname, body)
    if scope and rng.random() < 0.3:
        op = rng.choice([And, Or])
        return op(
            _hyper_formula(rng, scope, probs, pnames, quota),
            _hyper_formula(rng, scope, probs, pnames, 0),
        )
    return _hmatrix(scope, probs, rng, 2)


def _make_case(rng, nquant=None, polarity=None):
    u = small_universe()
    by_name = {f"P{i}": _inner_problem(rng, u) for i in range(2)}
    quota = nquant if nquant is not None else rng.randint(1, 3)
    f = _hyper_formula(rng, [], {"$by_name": by_name}, list(by_name),
                       quota, polarity)
    return u, by_name, f


def _rebuild(prefix, matrix):
    f = matrix
    for pol, var, pname in reversed(prefix):
        node = TraceAll if pol == H.FORALL else TraceSome
        f = node(var, pname, f)
    return f


def _truth(u, inner, f, max_prefix=1):
    h = HyperProblem(tuple(inner.items()), Problem(u, (), f))
    return find_instance(h, max_prefix=max_prefix) is not None


# ---------------------------------------------------------------------------
# Prenex


def test_prenex_matrix_is_quantifier_free_nnf():
    rng = random.Random(21)
    for _ in range(100):
        _, _, f = _make_case(rng)
        prefix, matrix = H.to_nnf_prenex(f)
        assert not H.has_nested_trace_quant(matrix)
        _assert_nnf_shape(matrix)
        assert {v for _, v, _ in prefix} >= H.formula_traces(matrix)


def test_prenex_preserves_truth():
    rng = random.Random(22)
    for _ in range(120):
        u, inner, f = _make_case(rng)
        prefix, matrix = H.to_nnf_prenex(f)
        assert _truth(u, inner, f) == _truth(u, inner, _rebuild(prefix, matrix))


def test_prenex_rejects_quantifier_under_temporal_operator():
    f = Always(TraceSome("t", "P", Some(Sel(Rel("p"), "t"))))
    with pytest.raises(HyrelError):
        H.to_nnf_prenex(f)


def test_prenex_rejects_duplicate_variables():
    inner = Some(Sel(Rel("p"), "t"))
    f = And(TraceSome("t", "P", inner), TraceSome("t", "P", inner))
    with pytest.raises(HyrelError, match="duplicate"):
        H.to_nnf_prenex(f)


# ---------------------------------------------------------------------------
# Composition


def _compose_case(u, inner, f):
    prefix, matrix = H.to_nnf_prenex(f)
    h = HyperProblem(tuple(inner.items()), Problem(u, (), TrueF()))
    return H.compose_quantifiers(h, prefix, matrix), prefix


def test_compose_merges_adjacent_blocks():
    u = small_universe()
    rng = random.Random(5)
    inner = {"P": _inner_problem(rng, u, constrained=False)}
    a = Some(Sel(Rel("p"), "t1"))
    f = TraceSome("t1", "P", TraceSome(
        "t2", "P", TraceAll("t3", "P", TraceSome("t4", "P", a))))
    comp, _ = _compose_case(u, inner, f)
    # the outermost existential block is folded into the outer problem
    assert [pol for pol, _, _ in comp.prefix] == [H.FORALL, H.EXISTS]
    assert {v for v, _, _ in comp.outer_sources} == {"t1", "t2"}
    # the two merged copies get disjoint relation names in the outer problem
    names = [d.name for d in comp.hyper.outer.decls]
    assert len(names) == len(set(names))
    assert any(n.endswith("$t1") for n in names)
    assert any(n.endswith("$t2") for n in names)


def test_compose_products_forall_block():
    u = small_universe()
    rng = random.Random(6)
    inner = {"P": _inner_problem(rng, u, constrained=False)}
    a = And(Some(Sel(Rel("p"), "t1")), Some(Sel(Rel("p"), "t2")))
    f = TraceAll("t1", "P", TraceAll("t2", "P", a))
    comp, _ = _compose_case(u, inner, f)
    (entry,) = comp.prefix
    pol, var, pname = entry
    assert pol == H.FORALL
    merged = dict(comp.hyper.inner)[pname]
    assert len(merged.decls) == 2 * len(inner["P"].decls)
    assert {v for v, _, _ in comp.var_sources[var]} == {"t1", "t2"}


def test_compose_preserves_truth_at_unit_prefix():
    rng = random.Random(31)
    for _ in range(80):
        u, inner, f = _make_case(rng)
        comp, _ = _compose_case(u, inner, f)
        g = _rebuild(comp.prefix, comp.matrix)
        h2 = HyperProblem(
            comp.hyper.inner,
            Problem(u, comp.hyper.outer.decls,
                    conj([comp.hyper.outer.constraint, g])))
        assert _truth(u, inner, f, 1) == (find_instance(h2, 1) is not None)


def test_compose_is_sound_for_existential_prefixes():
    # any witness of the composed problem projects back to traces of the
    # original problems, so composed satisfiability implies the original's
    rng = random.Random(32)
    for _ in range(40):
        u, inner, f = _make_case(rng, polarity=H.EXISTS)
        comp, _ = _compose_case(u, inner, f)
        g = _rebuild(comp.prefix, comp.matrix)
        h2 = HyperProblem(
            comp.hyper.inner,
            Problem(u, comp.hyper.outer.decls,
                    conj([comp.hyper.outer.constraint, g])))
        if find_instance(h2, 2) is not None:
            assert _truth(u, inner, f, 2)


# ---------------------------------------------------------------------------
# Symmetry breaking


def test_atom_classes_separate_named_atoms():
    u = Universe(("a0", "a1", "a2"))
    decls = (
        RelationDecl("q", 1, STATIC, BoundExpr.of(ts(1, [])),
                     BoundExpr.of(ts(1, [("a0",)]))),
        RelationDecl("p", 1, MUTABLE, BoundExpr.of(ts(1, [])),
                     BoundExpr.of(ts(1, [(a,) for a in u.atoms]))),
    )
    classes = H.atom_classes(Problem(u, decls, TrueF()))
    assert {frozenset(g) for g in classes} == \
        {frozenset({"a0"}), frozenset({"a1", "a2"})}


def test_atom_classes_fully_symmetric():
    u = Universe(("a0", "a1", "a2"))
    decls = (
        RelationDecl("p", 1, MUTABLE, BoundExpr.of(ts(1, [])),
                     BoundExpr.of(ts(1, [(a,) for a in u.atoms]))),
    )
    classes = H.atom_classes(Problem(u, decls, TrueF()))
    assert classes == [["a0", "a1", "a2"]]


def test_symmetry_breaking_reduces_four_instances_to_three():
    u = small_universe()
    d = RelationDecl("p", 1, STATIC, BoundExpr.of(ts(1, [])),
                     BoundExpr.of(ts(1, [("a0",), ("a1",)])))
    p = Problem(u, (d,), TrueF())
    assert len(list(enumerate_lassos(p, 1))) == 4
    sbp = H.break_symmetries(p)
    reduced = Problem(u, (d,), sbp)
    assert len(list(enumerate_lassos(reduced, 1))) == 3


def test_symmetry_breaking_fixes_distinguished_atoms():
    u = small_universe()
    decls = (
        RelationDecl("q", 1, STATIC, BoundExpr.of(ts(1, [("a0",)])),
                     BoundExpr.of(ts(1, [("a0",)]))),
        RelationDecl("p", 1, MUTABLE, BoundExpr.of(ts(1, [])),
                     BoundExpr.of(ts(1, [("a0",), ("a1",)]))),
    )
    # a0 is pinned by the constant q, so no symmetry may be broken
    sbp = H.break_symmetries(Problem(u, decls, TrueF()))
    assert isinstance(sbp, TrueF)


def test_symmetry_breaking_preserves_satisfiability():
    rng = random.Random(77)
    u = small_universe()
    for _ in range(60):
        decls = small_decls(u, rng)
        constraint = random_nnf(decls, rng, depth=2, past=False)
        p = Problem(u, decls, constraint)
        sbp = H.break_symmetries(p)
        full = list(enumerate_lassos(p, 2))
        kept = list(enumerate_lassos(Problem(u, decls, And(constraint, sbp)), 2))
        assert len(kept) <= len(full)
        assert bool(full) == bool(kept), (constraint, sbp)


# ---------------------------------------------------------------------------
# Relation renaming and Sel stripping


def test_strip_sel_rejects_foreign_traces():
    f = Some(Sel(Rel("p"), "t1"))
    assert H.strip_sel(f, "t1") == Some(Rel("p"))
    with pytest.raises(HyrelError):
        H.strip_sel(f, "t2")


def test_rename_rels_roundtrip():
    rng = random.Random(9)
    u = small_universe()
    decls = small_decls(u, rng)
    f = random_nnf(decls, rng, depth=3)
    fwd = {d.name: d.name + "$x" for d in decls}
    back = {v: k for k, v in fwd.items()}
    assert H.rename_rels_formula(H.rename_rels_formula(f, fwd), back) == f
