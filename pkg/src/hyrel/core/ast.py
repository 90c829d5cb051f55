"""Abstract syntax and basic domain types for hyper relational temporal logic.

Expressions denote tuple sets over a finite universe of atoms; formulas add
first-order quantifiers, linear temporal operators (future and past) and trace
quantifiers over named problems. Everything is an immutable dataclass so values
can be hashed, memoized and shared freely.
"""

from dataclasses import dataclass, field


class HyrelError(Exception):
    """Base class for all errors raised by this package."""


class EvalError(HyrelError):
    pass


class TypeErrorHR(HyrelError):
    pass


# ---------------------------------------------------------------------------
# Universe, tuples, multiplicities, bounds


@dataclass(frozen=True)
class Universe:
    atoms: tuple

    def __post_init__(self):
        if len(set(self.atoms)) != len(self.atoms):
            raise HyrelError("universe atoms must be unique")
        if any(not a for a in self.atoms):
            raise HyrelError("universe atoms must be nonempty names")

    def index(self, atom):
        return self.atoms.index(atom)


@dataclass(frozen=True)
class TupleSet:
    """A set of equal-arity atom tuples; the arity is carried explicitly so
    that the empty set still has one."""

    arity: int
    tuples: frozenset

    def __post_init__(self):
        for t in self.tuples:
            if len(t) != self.arity:
                raise TypeErrorHR(f"tuple {t} does not have arity {self.arity}")

    def __iter__(self):
        return iter(self.tuples)

    def __len__(self):
        return len(self.tuples)

    def __contains__(self, t):
        return t in self.tuples

    def sorted(self):
        return sorted(self.tuples)


def ts(arity, tuples=()):
    return TupleSet(arity, frozenset(tuple(t) for t in tuples))


def singleton(*atoms):
    return TupleSet(len(atoms), frozenset({tuple(atoms)}))


# Multiplicity variants (Def. 2-style): set, lone, some, one, no.
SET, LONE, SOME, ONE, NO = "set", "lone", "some", "one", "no"
MULTS = (SET, LONE, SOME, ONE, NO)


def mult_card_ok(mult, n):
    if mult == SET:
        return True
    if mult == LONE:
        return n <= 1
    if mult == SOME:
        return n >= 1
    if mult == ONE:
        return n == 1
    if mult == NO:
        return n == 0
    raise HyrelError(f"unknown multiplicity {mult}")


@dataclass(frozen=True)
class BoundLeaf:
    """Leaf of a multiplicity tree: a relational expression with an optional
    outer multiplicity (e.g. `one Reviewer`)."""

    mult: str
    expr: "Expr"


@dataclass(frozen=True)
class BoundArrow:
    """`left multL -> multR right` node of a multiplicity tree."""

    left: "BoundLeaf | BoundArrow"
    mult_left: str
    mult_right: str
    right: "BoundLeaf | BoundArrow"


@dataclass(frozen=True)
class BoundExpr:
    """Either a literal tuple set or a conjunction of multiplicity-arrow
    trees over constant-bounded expressions."""

    literal: TupleSet | None = None
    arrows: tuple = ()  # of BoundLeaf | BoundArrow

    @staticmethod
    def of(tupleset):
        return BoundExpr(literal=tupleset)

    @staticmethod
    def of_arrows(*arrows):
        return BoundExpr(literal=None, arrows=tuple(arrows))

    @property
    def is_literal(self):
        return self.literal is not None


STATIC, MUTABLE = "static", "mutable"


@dataclass(frozen=True)
class RelationDecl:
    name: str
    arity: int
    mutability: str
    lower: BoundExpr
    upper: BoundExpr

    @property
    def is_static(self):
        return self.mutability == STATIC


# ---------------------------------------------------------------------------
# Relational expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Rel(Expr):
    """Reference to a declared relation or a bound first-order variable."""

    name: str


@dataclass(frozen=True)
class AtomE(Expr):
    """Constant singleton atom, used for enum literals and internal expansion
    of first-order binders."""

    atom: str


@dataclass(frozen=True)
class NoneE(Expr):
    arity: int = 1


@dataclass(frozen=True)
class UnivE(Expr):
    pass


@dataclass(frozen=True)
class Iden(Expr):
    pass


@dataclass(frozen=True)
class Converse(Expr):
    expr: Expr


@dataclass(frozen=True)
class Closure(Expr):
    expr: Expr


@dataclass(frozen=True)
class Union(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Inter(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Diff(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Product(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Join(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Compr(Expr):
    """Comprehension {x1: e1, ..., xn: en | body}; binds each xi as a constant
    singleton over time."""

    decls: tuple  # of (name, Expr)
    body: "Formula"


@dataclass(frozen=True)
class Prime(Expr):
    expr: Expr


@dataclass(frozen=True)
class Sel(Expr):
    """Trace selector e[pi]: evaluate e in the trace bound to pi."""

    expr: Expr
    trace: str


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class In(Formula):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Some(Formula):
    expr: Expr


@dataclass(frozen=True)
class Lone(Formula):
    expr: Expr


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class AllQ(Formula):
    var: str
    domain: Expr
    body: Formula


@dataclass(frozen=True)
class SomeQ(Formula):
    var: str
    domain: Expr
    body: Formula


@dataclass(frozen=True)
class After(Formula):
    body: Formula


@dataclass(frozen=True)
class Always(Formula):
    body: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    body: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Releases(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Before(Formula):
    body: Formula


@dataclass(frozen=True)
class Once(Formula):
    body: Formula


@dataclass(frozen=True)
class Historically(Formula):
    body: Formula


@dataclass(frozen=True)
class Since(Formula):
    left: Formula
    right: Formula


def _check_no_trace_quant(f, what):
    if has_trace_quant(f):
        raise TypeErrorHR(f"trace quantifier nested inside {what}")


@dataclass(frozen=True)
class TraceAll(Formula):
    var: str
    problem: str
    body: Formula


@dataclass(frozen=True)
class TraceSome(Formula):
    var: str
    problem: str
    body: Formula


TEMPORAL_FUTURE = (After, Always, Eventually, Until, Releases)
TEMPORAL_PAST = (Before, Once, Historically, Since)
TEMPORAL = TEMPORAL_FUTURE + TEMPORAL_PAST
TRACE_QUANTS = (TraceAll, TraceSome)


def children(f):
    if isinstance(f, (Not, After, Always, Eventually, Before, Once, Historically)):
        return (f.body,)
    if isinstance(f, (And, Or, Implies, Iff, Until, Releases, Since)):
        return (f.left, f.right)
    if isinstance(f, (AllQ, SomeQ, TraceAll, TraceSome)):
        return (f.body,)
    return ()


def has_trace_quant(f):
    if isinstance(f, TRACE_QUANTS):
        return True
    return any(has_trace_quant(c) for c in children(f))


def check_trace_quant_positions(f):
    """Reject trace quantifiers nested under temporal operators or first-order
    quantifiers (they may only appear under Boolean connectives)."""
    if isinstance(f, (TEMPORAL) + (AllQ, SomeQ)):
        for c in children(f):
            _check_no_trace_quant(c, type(f).__name__)
    if isinstance(f, In):
        return
    for c in children(f):
        check_trace_quant_positions(c)


# Convenience constructors for derived forms.


def no_(e):
    return Not(Some(e))


def one_(e):
    return And(Some(e), Lone(e))


def eq(e1, e2):
    return And(In(e1, e2), In(e2, e1))


def conj(fs):
    fs = list(fs)
    if not fs:
        return TrueF()
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def disj(fs):
    fs = list(fs)
    if not fs:
        return FalseF()
    out = fs[0]
    for f in fs[1:]:
        out = Or(out, f)
    return out


def conjuncts_of(f):
    if isinstance(f, And):
        return conjuncts_of(f.left) + conjuncts_of(f.right)
    if isinstance(f, TrueF):
        return []
    return [f]


def disjuncts_of(f):
    if isinstance(f, Or):
        return disjuncts_of(f.left) + disjuncts_of(f.right)
    if isinstance(f, FalseF):
        return []
    return [f]


# ---------------------------------------------------------------------------
# Problems, traces, contexts


@dataclass(frozen=True)
class Problem:
    universe: Universe
    decls: tuple  # of RelationDecl
    constraint: Formula

    def decl(self, name):
        for d in self.decls:
            if d.name == name:
                return d
        return None


@dataclass(frozen=True)
class HyperProblem:
    inner: tuple  # of (name, Problem)
    outer: Problem

    def inner_problem(self, name):
        for n, p in self.inner:
            if n == name:
                return p
        raise EvalError(f"unknown inner problem {name}")


class LassoTrace:
    """A finite prefix of states plus a loop index; state i beyond the prefix
    folds back into the loop."""

    __slots__ = ("states", "loop", "_hash")

    def __init__(self, states, loop):
        if not states:
            raise HyrelError("lasso needs at least one state")
        if not 0 <= loop < len(states):
            raise HyrelError("loop index out of range")
        self.states = tuple(dict(s) for s in states)
        self.loop = loop
        self._hash = None

    def fold(self, i):
        n = len(self.states)
        if i < n:
            return i
        period = n - self.loop
        return self.loop + (i - self.loop) % period

    def state_at(self, i):
        return self.states[self.fold(i)]

    @property
    def period(self):
        return len(self.states) - self.loop

    def key(self):
        return (
            tuple(tuple(sorted((k, v.tuples) for k, v in s.items())) for s in self.states),
            self.loop,
        )

    def __eq__(self, other):
        return isinstance(other, LassoTrace) and self.key() == other.key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self):
        return f"LassoTrace({len(self.states)} states, loop={self.loop})"


class TraceContext:
    """Maps trace-variable names to lasso traces, plus global first-order
    bindings of variables to constant atom tuples."""

    __slots__ = ("traces", "bindings", "universe")

    def __init__(self, traces, bindings=None, universe=None):
        self.traces = dict(traces)
        self.bindings = dict(bindings or {})
        self.universe = universe

    def trace(self, pi):
        try:
            return self.traces[pi]
        except KeyError:
            raise EvalError(f"unbound trace variable {pi!r}") from None

    def bind_trace(self, pi, t):
        out = TraceContext(self.traces, self.bindings, self.universe)
        out.traces[pi] = t
        return out

    def bind(self, name, tup):
        out = TraceContext(self.traces, self.bindings, self.universe)
        out.bindings[name] = tuple(tup)
        return out

    def bindings_key(self):
        return tuple(sorted(self.bindings.items()))


# Bounded semantics variants.
PES, OPT, HPES, HOPT = "pes", "opt", "hpes", "hopt"
SEMANTICS = (PES, OPT, HPES, HOPT)


def dual_sem(sem):
    return {PES: OPT, OPT: PES, HPES: HOPT, HOPT: HPES}[sem]
