"""Grounding: variable layout, conjunct classification, bit-blasting, and
bijection with the brute-force relational enumerator."""

import itertools
import random

import pytest

from hyrel import ltl as M
from hyrel import rl2ltl as G
from hyrel.boolexpr import VarIs, beval
from hyrel.core import (
    Always, And, BoundArrow, BoundExpr, BoundLeaf, In, Problem, Rel,
    RelationDecl, Some, TrueF, TupleSet, Universe, constant_decls,
    enumerate_lassos, relation_values, ts,
    LONE, MUTABLE, ONE, SET, SOME, STATIC,
)
from hyrel.frontend import parse_smv

from genutil import (
    all_machine_lassos, all_machine_states, decode_gmap, machine_vars,
    random_lasso, random_ltl, random_machine_lasso, random_nnf, small_decls,
    small_universe,
)


def _lit(arity, tuples):
    return BoundExpr.of(ts(arity, tuples))


def _const_unary(name, atoms):
    b = _lit(1, [(a,) for a in atoms])
    return RelationDecl(name, 1, STATIC, b, b)


# ---------------------------------------------------------------------------
# Variable layout


def test_unary_relation_grounds_to_one_boolean_per_tuple():
    u = small_universe()
    d = RelationDecl("p", 1, MUTABLE, _lit(1, []),
                     _lit(1, [("a0",), ("a1",)]))
    m, _ = G.ground(Problem(u, (d,), TrueF()), "t")
    assert [v.name for v in m.variables] == ["p_a0", "p_a1"]
    assert all(v.boolean for v in m.variables)


def test_functional_column_grounds_to_integer_variables():
    u = Universe(("x0", "x1", "y0", "y1", "y2"))
    decls = (
        _const_unary("A", ("x0", "x1")),
        _const_unary("B", ("y0", "y1", "y2")),
        RelationDecl(
            "f", 2, MUTABLE, _lit(2, []),
            BoundExpr.of_arrows(BoundArrow(
                BoundLeaf(SET, Rel("A")), SET, ONE, BoundLeaf(SET, Rel("B"))))),
    )
    m, _ = G.ground(Problem(u, decls, TrueF()), "t")
    ints = [v for v in m.variables if not v.boolean]
    assert [v.name for v in ints] == ["f_x0", "f_x1"]
    assert all(v.size == 3 for v in ints)
    assert m.grounding_map[("f", ("x0", "y1"))] == ("int", "f_x0", "y1")


def test_lone_column_adds_sentinel_value():
    u = Universe(("x0", "y0", "y1"))
    decls = (
        _const_unary("A", ("x0",)),
        _const_unary("B", ("y0", "y1")),
        RelationDecl(
            "f", 2, MUTABLE, _lit(2, []),
            BoundExpr.of_arrows(BoundArrow(
                BoundLeaf(SET, Rel("A")), SET, LONE,
                BoundLeaf(SET, Rel("B"))))),
    )
    m, _ = G.ground(Problem(u, decls, TrueF()), "t")
    (v,) = [v for v in m.variables if not v.boolean]
    assert v.size == 3 and G.ABSENT in v.values


def test_lower_bound_tuples_are_constant_true():
    u = small_universe()
    d = RelationDecl("p", 1, MUTABLE, _lit(1, [("a0",)]),
                     _lit(1, [("a0",), ("a1",)]))
    m, _ = G.ground(Problem(u, (d,), TrueF()), "t")
    assert m.grounding_map[("p", ("a0",))] == ("const", True)
    assert [v.name for v in m.variables] == ["p_a1"]


def test_some_p_grounds_to_disjunction():
    u = small_universe()
    d = RelationDecl("p", 1, MUTABLE, _lit(1, []),
                     _lit(1, [("a0",), ("a1",)]))
    m, residual = G.ground(Problem(u, (d,), Some(Rel("p"))), "t")
    # a temporal-free conjunct lands in INIT, not the residual
    assert isinstance(residual, M.LTrue)
    (init,) = m.init
    assert beval(init, {"p_a0": True, "p_a1": False})
    assert beval(init, {"p_a0": False, "p_a1": True})
    assert not beval(init, {"p_a0": False, "p_a1": False})


def test_static_relations_are_frozen_with_trans_equality():
    u = small_universe()
    d = RelationDecl("p", 1, STATIC, _lit(1, []), _lit(1, [("a0",)]))
    m, _ = G.ground(Problem(u, (d,), TrueF()), "t")
    assert m.var("p_a0").frozen
    (eq,) = m.trans
    assert beval(eq, {"p_a0": True}, {"p_a0": True})
    assert not beval(eq, {"p_a0": True}, {"p_a0": False})


def test_atom_outside_universe_is_an_error():
    from hyrel.core import AtomE, In

    u = small_universe()
    d = RelationDecl("p", 1, MUTABLE, _lit(1, []), _lit(1, [("a0",)]))
    p = Problem(u, (d,), In(AtomE("zz"), Rel("p")))
    with pytest.raises(G.GroundError, match="zz"):
        G.ground(p, "t")


# ---------------------------------------------------------------------------
# Integer/Boolean encoding equivalence


@pytest.mark.parametrize("na,nb", [(1, 2), (2, 2), (2, 3), (3, 3)])
@pytest.mark.parametrize("ml", [SET, LONE, SOME, ONE])
@pytest.mark.parametrize("mr", [ONE, LONE])
def test_functional_encoding_matches_relation_values(na, nb, ml, mr):
    xa = tuple(f"x{i}" for i in range(na))
    yb = tuple(f"y{i}" for i in range(nb))
    u = Universe(xa + yb)
    d = RelationDecl(
        "f", 2, MUTABLE, _lit(2, []),
        BoundExpr.of_arrows(BoundArrow(
            BoundLeaf(SET, Rel("A")), ml, mr, BoundLeaf(SET, Rel("B")))))
    decls = (_const_unary("A", xa), _const_unary("B", yb), d)
    p = Problem(u, decls, TrueF())
    m, _ = G.ground(p, "t")
    assert any(not v.boolean for v in m.variables)
    seen = {
        frozenset(decode_gmap(m.grounding_map, s)["f"])
        for s in all_machine_states(m)
    }
    expected = {
        v.tuples for v in relation_values(d, constant_decls(decls), u)
    }
    assert seen == expected


@pytest.mark.parametrize("ml,mr", [(ONE, SET), (LONE, SOME), (SOME, SET)])
def test_nonfunctional_arrows_fall_back_to_boolean_with_invar(ml, mr):
    u = Universe(("x0", "x1", "y0", "y1"))
    d = RelationDecl(
        "f", 2, MUTABLE, _lit(2, []),
        BoundExpr.of_arrows(BoundArrow(
            BoundLeaf(SET, Rel("A")), ml, mr, BoundLeaf(SET, Rel("B")))))
    decls = (_const_unary("A", ("x0", "x1")), _const_unary("B", ("y0", "y1")),
             d)
    p = Problem(u, decls, TrueF())
    m, _ = G.ground(p, "t")
    assert all(v.boolean for v in m.variables)
    seen = {
        frozenset(decode_gmap(m.grounding_map, s)["f"])
        for s in all_machine_states(m)
    }
    expected = {
        v.tuples for v in relation_values(d, constant_decls(decls), u)
    }
    assert seen == expected


# ---------------------------------------------------------------------------
# Grounding soundness (bijection with the relational enumerator)


def _lasso_key(states, loop, decls):
    return (
        tuple(
            tuple(sorted((d.name, tuple(sorted(states[i][d.name])))
                         for d in decls))
            for i in range(len(states))
        ),
        loop,
    )


def _check_bijection(p, max_prefix=2):
    m, _ = G.ground(p, "t")
    core = {
        _lasso_key([{d.name: s[d.name].tuples for d in p.decls}
                    for s in t.states], t.loop, p.decls)
        for t in enumerate_lassos(p, max_prefix)
    }
    machine = set()
    for l in all_machine_lassos(m, max_prefix):
        decoded = [decode_gmap(m.grounding_map, s) for s in l.states]
        machine.add(_lasso_key(
            [{d.name: frozenset(dec.get(d.name, set())) for d in p.decls}
             for dec in decoded],
            l.loop, p.decls))
    assert core == machine, p.constraint


def test_grounding_bijection_random_problems():
    rng = random.Random(4242)
    u = small_universe()
    for _ in range(35):
        decls = small_decls(u, rng)
        constraint = random_nnf(decls, rng, depth=2)
        _check_bijection(Problem(u, decls, constraint))


def test_grounding_bijection_with_arrow_bounds():
    from hyrel.core import Join

    u = small_universe()
    arrow = BoundExpr.of_arrows(BoundArrow(
        BoundLeaf(SET, Rel("A")), LONE, LONE, BoundLeaf(SET, Rel("A"))))
    decls = (
        _const_unary("A", ("a0", "a1")),
        RelationDecl("f", 2, MUTABLE, _lit(2, []), arrow),
        RelationDecl("p", 1, MUTABLE, _lit(1, []), _lit(1, [("a0",)])),
    )
    constraint = Always(In(Rel("p"), Join(Rel("A"), Rel("f"))))
    _check_bijection(Problem(u, decls, constraint))


def test_grounding_bijection_ternary_relation():
    rng = random.Random(9)
    u = small_universe()
    triples = [("a0", "a0", "a1"), ("a1", "a0", "a0"), ("a0", "a1", "a1")]
    decls = (
        RelationDecl("p", 1, MUTABLE, _lit(1, []), _lit(1, [("a0",), ("a1",)])),
        RelationDecl("w", 3, MUTABLE, _lit(3, []), _lit(3, triples)),
    )
    from hyrel.core import Join, Product

    constraint = And(
        Some(Rel("w")),
        Always(In(Join(Rel("p"), Rel("w")), Product(Rel("p"), Rel("p")))),
    )
    _check_bijection(Problem(u, decls, constraint))


# ---------------------------------------------------------------------------
# Conjunct classification


def test_classification_examples():
    u = small_universe()
    d = RelationDecl("p", 1, MUTABLE, _lit(1, []), _lit(1, [("a0",)]))
    from hyrel.core import Eventually, NoneE, Not, Prime

    constraint = And(
        And(
            In(Rel("p"), NoneE(1)),
            Always(In(Prime(Rel("p")), Rel("p"))),
        ),
        And(Always(Some(Rel("p"))), Eventually(Not(Some(Rel("p"))))),
    )
    m, residual = G.ground(Problem(u, (d,), constraint), "t")
    assert len(m.init) == 1
    assert len([b for b in m.trans]) == 1
    assert len(m.invar) == 1
    assert isinstance(residual, M.LEventually)


def test_classification_reassembly_is_equivalent():
    rng = random.Random(11)
    for _ in range(120):
        variables = machine_vars(rng)
        n = rng.randint(1, 4)
        parts = []
        for _ in range(n):
            kind = rng.random()
            f = random_ltl(variables, (None,), rng, depth=rng.randint(0, 2))
            if kind < 0.4:
                f = M.LAlways(f)
            parts.append(f)
        f = M.land(*parts)
        init, invar, trans, spec = G.classify_conjuncts(f)
        g = G.reassemble(init, invar, trans, spec)
        for _ in range(4):
            t = random_machine_lasso(variables, rng)
            assert M.eval_ltl(f, {None: t}) == M.eval_ltl(g, {None: t})


# ---------------------------------------------------------------------------
# Bit-blasting


def _int_machine(domain, frozen=False):
    from hyrel.boolexpr import StateMachine, VarDecl

    var = VarDecl("v", len(domain), boolean=False, frozen=frozen,
                  domain=tuple(domain))
    init = (VarIs("v", domain[0]),)
    trans = (VarIs("v", domain[-1], True),)
    gmap = {("r", (d,)): ("int", "v", d) for d in domain}
    return StateMachine("m", (var,), init, (), trans, gmap, "t", None)


def test_bitblast_power_of_two_domain():
    m = G.bitblast(_int_machine(["w", "x", "y", "z"]))
    assert [v.name for v in m.variables] == ["v#b0", "v#b1"]
    assert not m.invar


def test_bitblast_nonpower_domain_adds_range_invar():
    m0 = _int_machine(["x", "y", "z"])
    m = G.bitblast(m0)
    assert len(m.variables) == 2 and len(m.invar) == 1
    assert len(list(all_machine_states(m))) == 3


def test_bitblast_is_identity_on_boolean_machines():
    from hyrel.boolexpr import StateMachine, VarDecl

    m = StateMachine("m", (VarDecl("x", 2),), (VarIs("x", True),))
    assert G.bitblast(m) is m


def test_bitblast_preserves_reachable_states_and_decoding():
    rng = random.Random(3)
    u = Universe(("x0", "x1", "y0", "y1", "y2"))
    decls = (
        _const_unary("A", ("x0", "x1")),
        _const_unary("B", ("y0", "y1", "y2")),
        RelationDecl(
            "f", 2, MUTABLE, _lit(2, []),
            BoundExpr.of_arrows(BoundArrow(
                BoundLeaf(SET, Rel("A")), SET, ONE, BoundLeaf(SET, Rel("B"))))),
    )
    m, _ = G.ground(Problem(u, decls, TrueF()), "t")
    bb = G.bitblast(m)
    orig = {
        frozenset(decode_gmap(m.grounding_map, s)["f"])
        for s in all_machine_states(m)
    }
    blasted = {
        frozenset(decode_gmap(bb.grounding_map, s)["f"])
        for s in all_machine_states(bb)
    }
    assert orig == blasted
    assert len(list(all_machine_states(m))) == \
        len(list(all_machine_states(bb)))


def test_bitblast_preserves_transitions():
    m0 = _int_machine(["x", "y", "z"])
    bb = G.bitblast(m0)
    # states reachable in one step from init must decode identically
    def steps(m):
        out = set()
        for a in all_machine_states(m):
            if not beval(m.init_expr(), a, a):
                continue
            for b in all_machine_states(m):
                if beval(m.trans_expr(), a, b):
                    va = decode_gmap(m.grounding_map, a)["r"]
                    vb = decode_gmap(m.grounding_map, b)["r"]
                    out.add((frozenset(va), frozenset(vb)))
        return out

    assert steps(m0) == steps(bb)


# ---------------------------------------------------------------------------
# SMV emission round-trip


def test_emit_smv_roundtrip():
    rng = random.Random(17)
    u = small_universe()
    for _ in range(15):
        decls = small_decls(u, rng)
        constraint = random_nnf(decls, rng, depth=2)
        m, _ = G.ground(Problem(u, decls, constraint), "t")
        src = parse_smv(G.emit_smv(m))
        m2 = src.machine("t")
        assert m2.var_names() == m.var_names()
        for v in m.variables:
            assert tuple(m2.var(v.name).values) == tuple(v.values)
        for _ in range(6):
            a = {v.name: rng.choice(v.values) for v in m.variables}
            b = {v.name: rng.choice(v.values) for v in m.variables}
            assert beval(m.init_expr(), a, a) == beval(m2.init_expr(), a, a)
            assert beval(m.invar_expr(), a, a) == beval(m2.invar_expr(), a, a)
            assert beval(m.trans_expr(), a, b) == beval(m2.trans_expr(), a, b)


def test_emit_smv_residual_roundtrip():
    rng = random.Random(19)
    u = small_universe()
    d = RelationDecl("p", 1, MUTABLE, _lit(1, []), _lit(1, [("a0",), ("a1",)]))
    from hyrel.core import Eventually, Until

    constraint = Until(Some(Rel("p")), Eventually(In(Rel("p"), Rel("p"))))
    m, residual = G.ground(Problem(u, (d,), constraint), "t")
    assert not isinstance(residual, M.LTrue)
    src = parse_smv(G.emit_smv(m))
    (spec,) = src.ltlspec
    for _ in range(12):
        states = [
            {v.name: rng.choice(v.values) for v in m.variables}
            for _ in range(rng.randint(1, 3))
        ]
        t = M.MachineLasso(states, rng.randrange(len(states)))
        assert M.eval_ltl(residual, {"t": t}) == M.eval_ltl(spec, {None: t})


def test_emit_smv_is_deterministic():
    rng = random.Random(23)
    u = small_universe()
    decls = small_decls(u, rng)
    constraint = random_nnf(decls, rng, depth=2)
    m, _ = G.ground(Problem(u, decls, constraint), "t")
    assert G.emit_smv(m) == G.emit_smv(m)
