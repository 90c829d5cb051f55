import itertools
import random

import pytest

from hyrel.boolexpr import FALSE, TRUE, VarIs, band, beval, bnot, bor, VarDecl
from hyrel.mvdd import DdManager, interleaved_order, nnf_bexpr, partition
from genutil import machine_vars, random_bexpr


def bool_order(n):
    return [((f"x{i}", False), (False, True)) for i in range(n)]


def all_assignments(order):
    keys = [k for k, _ in order]
    domains = [vals for _, vals in order]
    for combo in itertools.product(*domains):
        yield dict(zip(keys, combo))


def split_env(assignment):
    cur = {n: v for (n, p), v in assignment.items() if not p}
    nxt = {n: v for (n, p), v in assignment.items() if p}
    return cur, nxt or None


def rand_dd(m, vs, rng, depth=3):
    return m.from_bexpr(random_bexpr(vs, rng, depth, primed_ok=True))


def test_contradiction_collapses():
    m = DdManager(bool_order(2))
    x = m.var_is("x0", True)
    assert m.apply("and", x, m.apply("not", x)) == 0
    assert m.apply("or", x, m.apply("not", x)) == 1


def test_association_order_gives_identical_identity():
    m = DdManager(bool_order(3))
    x, y, z = (m.var_is(f"x{i}", True) for i in range(3))
    assert m.apply("and", m.apply("and", x, y), z) == \
        m.apply("and", x, m.apply("and", y, z))


def test_apply_matches_truth_table_10_vars():
    rng = random.Random(23)
    order = bool_order(10)
    m = DdManager(order)
    vs = tuple(VarDecl(f"x{i}", 2) for i in range(10))
    for _ in range(10):
        b = random_bexpr(vs, rng, 4)
        u = m.from_bexpr(b)
        for a in all_assignments(order):
            cur, _ = split_env(a)
            assert m.eval(u, a) == beval(b, cur)


def test_canonicity_equal_functions_equal_identity_12_vars():
    rng = random.Random(29)
    order = bool_order(12)
    m = DdManager(order)
    vs = tuple(VarDecl(f"x{i}", 2) for i in range(12))
    assignments = list(all_assignments(order))
    built = []
    for _ in range(30):
        b = random_bexpr(vs, rng, 3)
        u = m.from_bexpr(b)
        table = tuple(beval(b, split_env(a)[0]) for a in assignments)
        built.append((table, u))
    for (t1, u1), (t2, u2) in itertools.combinations(built, 2):
        assert (t1 == t2) == (u1 == u2)


def test_ordered_and_reduced_invariants():
    rng = random.Random(31)
    vs = machine_vars(rng, n=4)
    m = DdManager(interleaved_order(vs))
    for _ in range(50):
        u = rand_dd(m, vs, rng)
        stack, seen = [u], set()
        while stack:
            n = stack.pop()
            if n in (0, 1) or n in seen:
                continue
            seen.add(n)
            vi, children = m.nodes[n]
            assert any(c != children[0] for c in children)
            for c in children:
                if c not in (0, 1):
                    assert m.nodes[c][0] > vi
                stack.append(c)


def test_ite_and_equal():
    m = DdManager(bool_order(3))
    x, y, z = (m.var_is(f"x{i}", True) for i in range(3))
    ite = m.apply("ite", x, y, z)
    eq = m.apply("equal", x, y)
    for a in all_assignments(bool_order(3)):
        vx, vy, vz = a[("x0", False)], a[("x1", False)], a[("x2", False)]
        assert m.eval(ite, a) == (vy if vx else vz)
        assert m.eval(eq, a) == (vx == vy)


def test_restrict_is_cofactor():
    rng = random.Random(37)
    vs = machine_vars(rng, n=3)
    m = DdManager(interleaved_order(vs))
    for _ in range(40):
        u = rand_dd(m, vs, rng)
        v = rng.choice(vs)
        primed = rng.random() < 0.5
        val = rng.choice(v.values)
        r = m.restrict(u, v.name, val, primed)
        for a in all_assignments(m.order):
            a2 = dict(a)
            a2[(v.name, primed)] = val
            assert m.eval(r, a2) == m.eval(u, a2)


def test_sat_enumeration_and_counting():
    rng = random.Random(41)
    vs = machine_vars(rng, n=3)
    m = DdManager(interleaved_order(vs))
    for _ in range(25):
        u = rand_dd(m, vs, rng)
        expected = [a for a in all_assignments(m.order) if m.eval(u, a)]
        got = [dict(sorted(a.items(), key=repr))
               for a in m.sat_assignments(u)]
        assert len(got) == len(expected) == m.count_sat(u)
        key = lambda a: tuple(sorted((repr(k), repr(v)) for k, v in a.items()))
        assert sorted(map(key, got)) == sorted(map(key, expected))


def test_circuit_terminals_and_single_variable():
    m = DdManager(bool_order(1))
    assert m.to_circuit(1) is TRUE
    assert m.to_circuit(0) is FALSE
    assert m.to_circuit(m.var_is("x0", True)) == VarIs("x0", True)


def test_circuit_agrees_on_1000_random_assignments():
    rng = random.Random(43)
    vs = machine_vars(rng, n=4)
    m = DdManager(interleaved_order(vs))
    u = 1
    for _ in range(6):
        u = m.apply(rng.choice(["and", "or"]), u, rand_dd(m, vs, rng))
    circuit = m.to_circuit(u)
    order = m.order
    for _ in range(1000):
        a = {k: rng.choice(vals) for k, vals in order}
        cur, nxt = split_env(a)
        assert beval(circuit, cur, nxt) == m.eval(u, a)


def test_circuit_preserves_sharing():
    m = DdManager(bool_order(4))
    x0, x1, x2, x3 = (m.var_is(f"x{i}", True) for i in range(4))
    shared = m.apply("equal", x2, x3)
    u = m.apply("ite", x0, shared, m.apply("and", x1, shared))
    circ = m.to_circuit(u)
    # the shared DD node appears as one shared Python object in the DAG
    seen = {}

    def collect(e):
        seen[id(e)] = e
        for c in getattr(e, "args", ()):
            collect(c)
        if hasattr(e, "body"):
            collect(e.body)

    collect(circ)
    assert len(seen) < 40


def test_support():
    m = DdManager(bool_order(3))
    u = m.apply("and", m.var_is("x0", True), m.var_is("x2", False))
    assert m.support(u) == {("x0", False), ("x2", False)}


def test_manager_rejects_duplicate_order():
    with pytest.raises(ValueError):
        DdManager(bool_order(2) + bool_order(1))


def test_partition_conjunctive():
    a, b, c = VarIs("a", True), VarIs("b", True), VarIs("c", True)
    assert partition(band(a, b, c)) == [a, b, c]
    assert partition(a) == [a]


def test_partition_disjunctive_de_morgan():
    a, b = VarIs("a", True), VarIs("b", True)
    assert partition(bnot(band(a, b)), mode="disjunctive") == [bnot(a), bnot(b)]


def test_nnf_bexpr_preserves_truth():
    rng = random.Random(47)
    vs = machine_vars(rng)
    for _ in range(100):
        b = random_bexpr(vs, rng, 3, primed_ok=True)
        g = nnf_bexpr(bnot(b))
        cur = {v.name: rng.choice(v.values) for v in vs}
        nxt = {v.name: rng.choice(v.values) for v in vs}
        assert beval(g, cur, nxt) == (not beval(b, cur, nxt))


def test_multi_valued_int_variables():
    vs = (VarDecl("n", 3, boolean=False),)
    m = DdManager(interleaved_order(vs, primed=False))
    parts = [m.var_is("n", v) for v in range(3)]
    assert m.apply("or", *parts) == 1
    assert m.apply("and", parts[0], parts[1]) == 0


def test_to_dot_renders():
    m = DdManager(bool_order(2))
    u = m.apply("and", m.var_is("x0", True), m.var_is("x1", False))
    dot = m.to_dot(u)
    assert dot.startswith("digraph") and "x0" in dot and "x1" in dot
