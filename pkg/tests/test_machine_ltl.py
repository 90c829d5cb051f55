import random

import pytest

from hyrel.boolexpr import (
    FALSE, TRUE, BAnd, BNot, BOr, VarIs, band, beval, bimplies, biff, bnot,
    bor, bvars, has_primed, rename_vars, unprime, StateMachine, VarDecl,
)
from hyrel import ltl as M
from hyrel.core import PES, OPT, HPES, HOPT
from genutil import (
    machine_vars, random_assignment, random_bexpr, random_ltl,
    random_machine_lasso,
)


def naive_beval(b, cur, nxt):
    # independent oracle: structural evaluation without smart constructors
    if isinstance(b, (VarIs,)):
        env = nxt if b.primed else cur
        return env[b.name] == b.value
    if isinstance(b, BNot):
        return not naive_beval(b.body, cur, nxt)
    if isinstance(b, BAnd):
        return all(naive_beval(a, cur, nxt) for a in b.args)
    if isinstance(b, BOr):
        return any(naive_beval(a, cur, nxt) for a in b.args)
    return b is TRUE


def test_smart_constructors_preserve_truth():
    rng = random.Random(7)
    vs = machine_vars(rng)
    for _ in range(200):
        a = random_bexpr(vs, rng, 3, primed_ok=True)
        b = random_bexpr(vs, rng, 3, primed_ok=True)
        cur = random_assignment(vs, rng)
        nxt = random_assignment(vs, rng)
        assert beval(band(a, b), cur, nxt) == (
            beval(a, cur, nxt) and beval(b, cur, nxt)
        )
        assert beval(bor(a, b), cur, nxt) == (
            beval(a, cur, nxt) or beval(b, cur, nxt)
        )
        assert beval(bnot(a), cur, nxt) == (not beval(a, cur, nxt))
        assert beval(bimplies(a, b), cur, nxt) == (
            (not beval(a, cur, nxt)) or beval(b, cur, nxt)
        )
        assert beval(biff(a, b), cur, nxt) == (
            beval(a, cur, nxt) == beval(b, cur, nxt)
        )
        assert beval(a, cur, nxt) == naive_beval(a, cur, nxt)


def test_constructor_laws():
    v = VarIs("x", True)
    assert band() is TRUE and bor() is FALSE
    assert band(v, TRUE) == v and bor(v, FALSE) == v
    assert band(v, FALSE) is FALSE and bor(v, TRUE) is TRUE
    assert bnot(bnot(v)) == v
    assert band(band(v, v), v) == BAnd((v, v, v))


def test_rename_and_unprime():
    b = band(VarIs("x", True), VarIs("y", 2, primed=True))
    r = rename_vars(b, {"x": "m0.x"})
    assert ("m0.x", False) in bvars(r) and ("y", True) in bvars(r)
    assert has_primed(b) and not has_primed(unprime(b))
    assert beval(unprime(b), {"x": True, "y": 2}) is True


def test_primed_without_next_state_raises():
    with pytest.raises(ValueError):
        beval(VarIs("x", True, primed=True), {"x": True}, None)


def test_state_machine_basics():
    vs = (VarDecl("b", 2), VarDecl("n", 3, boolean=False))
    m = StateMachine("m", vs, init=(VarIs("b", True),))
    assert m.state_count() == 6
    assert m.var("n").values == (0, 1, 2)
    assert m.replaced(name="m2").name == "m2"
    assert m.init_expr() == VarIs("b", True)


def _unfold(t):
    return M.MachineLasso(t.states + t.states[t.loop:], t.loop + t.period)


def test_exact_eval_invariant_under_unfolding():
    rng = random.Random(11)
    vs = machine_vars(rng)
    for _ in range(150):
        f = random_ltl(vs, ("t0", "t1"), rng, depth=3, nnf_only=False)
        traces = {
            "t0": random_machine_lasso(vs, rng),
            "t1": random_machine_lasso(vs, rng),
        }
        unfolded = {n: _unfold(t) for n, t in traces.items()}
        assert M.eval_ltl(f, traces) == M.eval_ltl(f, unfolded)


def test_nnf_preserves_exact_semantics_and_shape():
    rng = random.Random(13)
    vs = machine_vars(rng)
    for _ in range(150):
        f = random_ltl(vs, ("t",), rng, depth=3, nnf_only=False)
        g = M.nnf(f)
        traces = {"t": random_machine_lasso(vs, rng)}
        assert M.eval_ltl(f, traces) == M.eval_ltl(g, traces)
        _assert_nnf(g)


def _assert_nnf(f):
    if isinstance(f, M.LNot):
        # negation survives only on atoms and on the past operators that
        # have no dual node
        assert isinstance(f.body, (M.LAtom, M.LBefore, M.LSince))
        if not isinstance(f.body, M.LAtom):
            _assert_nnf(f.body)
        return
    for c in M.children(f):
        _assert_nnf(c)


def test_bounded_envelope_and_monotonicity():
    rng = random.Random(17)
    vs = machine_vars(rng, n=2)
    for _ in range(200):
        f = random_ltl(vs, ("t0", "t1"), rng, depth=3)
        traces = {
            "t0": random_machine_lasso(vs, rng),
            "t1": random_machine_lasso(vs, rng),
        }
        exact = M.eval_ltl(f, traces)
        prev_pes, prev_opt = False, True
        for k in range(0, 6):
            pes = M.eval_ltl_bounded(f, traces, 0, k, PES)
            opt = M.eval_ltl_bounded(f, traces, 0, k, OPT)
            if pes:
                assert exact
            if exact:
                assert opt
            assert pes >= prev_pes and opt <= prev_opt
            prev_pes, prev_opt = pes, opt


def test_halting_semantics_agree_on_stuttering_prefix():
    rng = random.Random(19)
    vs = machine_vars(rng, n=2)
    for _ in range(100):
        f = random_ltl(vs, ("t",), rng, depth=2, primed_ok=False)
        s = random_assignment(vs, rng)
        t = M.MachineLasso([random_assignment(vs, rng), s, s], 2)
        # both traces stutter at k=2, so the halting semantics coincide and
        # equal the exact valuation of the truncated self-looping lasso
        h1 = M.eval_ltl_bounded(f, {"t": t}, 0, 2, HPES)
        h2 = M.eval_ltl_bounded(f, {"t": t}, 0, 2, HOPT)
        assert h1 == h2 == M.eval_ltl(f, {"t": t})


def test_halting_falls_back_when_not_stuttering():
    a = M.LAtom("t", VarIs("b0", True))
    t = M.MachineLasso([{"b0": True}, {"b0": False}], 0)
    f = M.LAlways(a)
    assert M.eval_ltl_bounded(f, {"t": t}, 0, 1, HPES) == \
        M.eval_ltl_bounded(f, {"t": t}, 0, 1, PES)
    assert M.eval_ltl_bounded(f, {"t": t}, 0, 1, HOPT) == \
        M.eval_ltl_bounded(f, {"t": t}, 0, 1, OPT)


def test_helpers():
    a = M.LAtom("x", VarIs("b", True))
    b = M.LAtom("y", VarIs("b", False))
    f = M.LAnd(M.LAnd(a, b), M.LOr(a, M.LNot(b)))
    assert M.conjuncts(f) == [a, b, M.LOr(a, M.LNot(b))]
    assert M.disjuncts(M.LOr(a, M.LOr(b, a))) == [a, b, a]
    assert M.traces_of(f) == {"x", "y"}
    assert M.op_count(a) == 1 and M.op_count(f) == 8
    g = M.map_atoms(f, lambda at: M.LAtom("z", at.expr))
    assert M.traces_of(g) == {"z"}
    assert M.land() == M.LTrue() and M.lor() == M.LFalse()
    assert M.land(a, M.LTrue()) == a and M.lor(a, M.LFalse()) == a
    assert M.limplies(M.LTrue(), b) == b
