"""Propositional LTL over trace-tagged machine atoms.

This is the formula language of lowered problems: atoms pair a Boolean
expression over one machine's variables with the trace variable owning that
machine (or None for single-machine formulas). Includes NNF, exact evaluation
over joint machine lassos, and bounded evaluation over prefixes, mirroring
the core reference semantics.
"""

import math
from dataclasses import dataclass

from .boolexpr import beval, bvars, has_primed
from .core.ast import PES, OPT, HPES, HOPT


@dataclass(frozen=True)
class L:
    pass


@dataclass(frozen=True)
class LTrue(L):
    pass


@dataclass(frozen=True)
class LFalse(L):
    pass


@dataclass(frozen=True)
class LAtom(L):
    trace: object  # str | None
    expr: object  # BExpr


@dataclass(frozen=True)
class LNot(L):
    body: L


@dataclass(frozen=True)
class LAnd(L):
    left: L
    right: L


@dataclass(frozen=True)
class LOr(L):
    left: L
    right: L


@dataclass(frozen=True)
class LNext(L):
    body: L


@dataclass(frozen=True)
class LAlways(L):
    body: L


@dataclass(frozen=True)
class LEventually(L):
    body: L


@dataclass(frozen=True)
class LUntil(L):
    left: L
    right: L


@dataclass(frozen=True)
class LRelease(L):
    left: L
    right: L


@dataclass(frozen=True)
class LBefore(L):
    body: L


@dataclass(frozen=True)
class LOnce(L):
    body: L


@dataclass(frozen=True)
class LHist(L):
    body: L


@dataclass(frozen=True)
class LSince(L):
    left: L
    right: L


FORALL, EXISTS = "A", "E"


@dataclass(frozen=True)
class HyperLtlSpec:
    """Prenex HyperLTL: quantifier prefix over named machines plus a body."""

    prefix: tuple  # of (polarity, trace-var, machine-name)
    body: L


def land(*fs):
    out = None
    for f in fs:
        if isinstance(f, LTrue):
            continue
        if isinstance(f, LFalse):
            return LFalse()
        out = f if out is None else LAnd(out, f)
    return out if out is not None else LTrue()


def lor(*fs):
    out = None
    for f in fs:
        if isinstance(f, LFalse):
            continue
        if isinstance(f, LTrue):
            return LTrue()
        out = f if out is None else LOr(out, f)
    return out if out is not None else LFalse()


def lnot(f):
    if isinstance(f, LTrue):
        return LFalse()
    if isinstance(f, LFalse):
        return LTrue()
    if isinstance(f, LNot):
        return f.body
    return LNot(f)


def limplies(a, b):
    return lor(lnot(a), b)


def children(f):
    if isinstance(f, (LNot, LNext, LAlways, LEventually, LBefore, LOnce, LHist)):
        return (f.body,)
    if isinstance(f, (LAnd, LOr, LUntil, LRelease, LSince)):
        return (f.left, f.right)
    return ()


def nnf(f, neg=False):
    """Negation normal form with classical temporal dualities."""
    if isinstance(f, LTrue):
        return LFalse() if neg else f
    if isinstance(f, LFalse):
        return LTrue() if neg else f
    if isinstance(f, LAtom):
        return LNot(f) if neg else f
    if isinstance(f, LNot):
        return nnf(f.body, not neg)
    if isinstance(f, LAnd):
        if neg:
            return LOr(nnf(f.left, True), nnf(f.right, True))
        return LAnd(nnf(f.left, False), nnf(f.right, False))
    if isinstance(f, LOr):
        if neg:
            return LAnd(nnf(f.left, True), nnf(f.right, True))
        return LOr(nnf(f.left, False), nnf(f.right, False))
    if isinstance(f, LNext):
        return LNext(nnf(f.body, neg))
    if isinstance(f, LAlways):
        return LEventually(nnf(f.body, True)) if neg else LAlways(nnf(f.body))
    if isinstance(f, LEventually):
        return LAlways(nnf(f.body, True)) if neg else LEventually(nnf(f.body))
    if isinstance(f, LUntil):
        if neg:
            return LRelease(nnf(f.left, True), nnf(f.right, True))
        return LUntil(nnf(f.left), nnf(f.right))
    if isinstance(f, LRelease):
        if neg:
            return LUntil(nnf(f.left, True), nnf(f.right, True))
        return LRelease(nnf(f.left), nnf(f.right))
    if isinstance(f, LBefore):
        # Y is existential about the past; its dual is "no predecessor or
        # body fails there", expressed as ¬Y(¬body) kept as a literal form
        if neg:
            return lnot(LBefore(nnf(f.body)))
        return LBefore(nnf(f.body))
    if isinstance(f, LOnce):
        return LHist(nnf(f.body, True)) if neg else LOnce(nnf(f.body))
    if isinstance(f, LHist):
        return LOnce(nnf(f.body, True)) if neg else LHist(nnf(f.body))
    if isinstance(f, LSince):
        if neg:
            return lnot(LSince(nnf(f.left), nnf(f.right)))
        return LSince(nnf(f.left), nnf(f.right))
    raise TypeError(type(f))


def conjuncts(f):
    if isinstance(f, LAnd):
        return conjuncts(f.left) + conjuncts(f.right)
    if isinstance(f, LTrue):
        return []
    return [f]


def disjuncts(f):
    if isinstance(f, LOr):
        return disjuncts(f.left) + disjuncts(f.right)
    if isinstance(f, LFalse):
        return []
    return [f]


def traces_of(f):
    if isinstance(f, LAtom):
        return set() if f.trace is None else {f.trace}
    out = set()
    for c in children(f):
        out |= traces_of(c)
    return out


def map_atoms(f, fn):
    if isinstance(f, LAtom):
        return fn(f)
    if isinstance(f, (LTrue, LFalse)):
        return f
    parts = tuple(map_atoms(c, fn) for c in children(f))
    return type(f)(*parts)


def op_count(f):
    return 1 + sum(op_count(c) for c in children(f))


def past_depth(f):
    d = max((past_depth(c) for c in children(f)), default=0)
    if isinstance(f, (LBefore, LOnce, LHist, LSince)):
        return d + 1
    return d


def atom_prime(f):
    """Does this atom (or literal) reference next-state variables?"""
    if isinstance(f, LNot):
        return atom_prime(f.body)
    if isinstance(f, LAtom):
        return has_primed(f.expr)
    return False


# ---------------------------------------------------------------------------
# Evaluation over machine lassos

class MachineLasso:
    """A lasso over variable assignments: states are dicts name→value."""

    __slots__ = ("states", "loop")

    def __init__(self, states, loop):
        assert states and 0 <= loop < len(states)
        self.states = list(states)
        self.loop = loop

    def fold(self, i):
        n = len(self.states)
        if i < n:
            return i
        return self.loop + (i - self.loop) % (n - self.loop)

    def state_at(self, i):
        return self.states[self.fold(i)]

    @property
    def period(self):
        return len(self.states) - self.loop

    def key(self):
        return (tuple(tuple(sorted(s.items())) for s in self.states), self.loop)


def eval_ltl(f, traces, i=0):
    """Exact infinite-semantics evaluation; traces maps trace names (and/or
    None) to MachineLasso values, aligned positionally."""
    return _LtlEval(traces, past_depth(f)).val(f, i)


class _LtlEval:
    def __init__(self, traces, pdepth):
        self.traces = traces
        prefixes = [len(t.states) for t in traces.values()]
        periods = [t.period for t in traces.values()]
        self.prefix = max(prefixes, default=1)
        self.period = math.lcm(*periods) if periods else 1
        self.horizon = self.prefix + (3 + pdepth) * self.period
        self.memo = {}

    def norm(self, i):
        if i < self.horizon:
            return i
        lo = self.horizon - self.period
        return lo + (i - lo) % self.period

    def atom(self, a, i):
        t = self.traces[a.trace]
        return beval(a.expr, t.state_at(i), t.state_at(i + 1))

    def val(self, f, i):
        i = self.norm(i)
        key = (id(f), i)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        v = self._val(f, i)
        self.memo[key] = v
        return v

    def _val(self, f, i):
        cap = self.horizon + self.period
        sub = self.val
        if isinstance(f, LTrue):
            return True
        if isinstance(f, LFalse):
            return False
        if isinstance(f, LAtom):
            return self.atom(f, i)
        if isinstance(f, LNot):
            return not sub(f.body, i)
        if isinstance(f, LAnd):
            return sub(f.left, i) and sub(f.right, i)
        if isinstance(f, LOr):
            return sub(f.left, i) or sub(f.right, i)
        if isinstance(f, LNext):
            return sub(f.body, i + 1)
        if isinstance(f, LAlways):
            return all(sub(f.body, j) for j in range(i, cap))
        if isinstance(f, LEventually):
            return any(sub(f.body, j) for j in range(i, cap))
        if isinstance(f, LUntil):
            for l in range(i, cap):
                if sub(f.right, l):
                    return True
                if not sub(f.left, l):
                    return False
            return False
        if isinstance(f, LRelease):
            for l in range(i, cap):
                if not sub(f.right, l):
                    return False
                if sub(f.left, l):
                    return True
            return True
        if isinstance(f, LBefore):
            return i > 0 and sub(f.body, i - 1)
        if isinstance(f, LOnce):
            return any(sub(f.body, j) for j in range(i, -1, -1))
        if isinstance(f, LHist):
            return all(sub(f.body, j) for j in range(i, -1, -1))
        if isinstance(f, LSince):
            for l in range(i, -1, -1):
                if sub(f.right, l):
                    return True
                if not sub(f.left, l):
                    return False
            return False
        raise TypeError(type(f))


def eval_ltl_bounded(f, traces, i, k, sem):
    """Bounded evaluation over length-(k+1) prefixes; mirrors the core
    bounded rules (classical negation, literal prime-horizon rule)."""
    if sem in (HPES, HOPT):
        if all(
            t.state_at(k + 1) == t.state_at(k) for t in traces.values()
        ):
            cut = {
                n: MachineLasso(
                    [t.state_at(j) for j in range(k + 1)], k
                )
                for n, t in traces.items()
            }
            return eval_ltl(f, cut, i)
        sem = PES if sem == HPES else OPT
    return _lb(f, traces, i, k, sem)


def _lb(f, traces, i, k, sem):
    def sub(g, j):
        return _lb(g, traces, j, k, sem)

    def atom_val(a, j):
        t = traces[a.trace]
        nxt = t.state_at(j + 1) if j + 1 <= k else None
        return beval(a.expr, t.state_at(j), nxt)

    if isinstance(f, LTrue):
        return True
    if isinstance(f, LFalse):
        return False
    if isinstance(f, (LAtom, LNot)) and (
        isinstance(f, LAtom) or isinstance(f.body, LAtom)
    ):
        a = f if isinstance(f, LAtom) else f.body
        if atom_prime(a) and i + 1 > k:
            return sem == OPT
        v = atom_val(a, i)
        return v if isinstance(f, LAtom) else not v
    if isinstance(f, LNot):
        return not sub(f.body, i)
    if isinstance(f, LAnd):
        return sub(f.left, i) and sub(f.right, i)
    if isinstance(f, LOr):
        return sub(f.left, i) or sub(f.right, i)
    if isinstance(f, LNext):
        if sem == PES:
            return i < k and sub(f.body, i + 1)
        return i >= k or sub(f.body, i + 1)
    if isinstance(f, LAlways):
        if sem == PES:
            return False
        return all(sub(f.body, j) for j in range(i, k + 1))
    if isinstance(f, LEventually):
        if sem == PES:
            return any(sub(f.body, j) for j in range(i, k + 1))
        return True
    if isinstance(f, LUntil):
        found = any(
            sub(f.right, l) and all(sub(f.left, j) for j in range(i, l))
            for l in range(i, k + 1)
        )
        if sem == PES:
            return found
        return found or all(sub(f.left, j) for j in range(i, k + 1))
    if isinstance(f, LRelease):
        found = any(
            sub(f.left, l) and all(sub(f.right, j) for j in range(i, l + 1))
            for l in range(i, k + 1)
        )
        if sem == PES:
            return found
        return found or all(sub(f.right, j) for j in range(i, k + 1))
    if isinstance(f, LBefore):
        return i > 0 and sub(f.body, i - 1)
    if isinstance(f, LOnce):
        return any(sub(f.body, j) for j in range(i, -1, -1))
    if isinstance(f, LHist):
        return all(sub(f.body, j) for j in range(i, -1, -1))
    if isinstance(f, LSince):
        for l in range(i, -1, -1):
            if sub(f.right, l):
                return True
            if not sub(f.left, l):
                return False
        return False
    raise TypeError(type(f))
