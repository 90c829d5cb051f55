"""Boolean-expression trees over named state variables, and the grounded
state-machine record produced by relational-to-propositional grounding.

Leaves are `VarIs(name, value, primed)` tests; boolean variables use the
values True/False, integer variables use 0..size-1. `primed` refers to the
next state and may appear only in TRANS-class constraints.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class BExpr:
    pass


@dataclass(frozen=True)
class BTrue(BExpr):
    pass


@dataclass(frozen=True)
class BFalse(BExpr):
    pass


@dataclass(frozen=True)
class VarIs(BExpr):
    name: str
    value: object
    primed: bool = False


@dataclass(frozen=True)
class BNot(BExpr):
    body: BExpr


@dataclass(frozen=True)
class BAnd(BExpr):
    args: tuple


@dataclass(frozen=True)
class BOr(BExpr):
    args: tuple


TRUE = BTrue()
FALSE = BFalse()


def band(*args):
    flat = []
    for a in args:
        if isinstance(a, BTrue):
            continue
        if isinstance(a, BFalse):
            return FALSE
        if isinstance(a, BAnd):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return BAnd(tuple(flat))


def bor(*args):
    flat = []
    for a in args:
        if isinstance(a, BFalse):
            continue
        if isinstance(a, BTrue):
            return TRUE
        if isinstance(a, BOr):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return BOr(tuple(flat))


def bnot(a):
    if isinstance(a, BTrue):
        return FALSE
    if isinstance(a, BFalse):
        return TRUE
    if isinstance(a, BNot):
        return a.body
    return BNot(a)


def bimplies(a, b):
    return bor(bnot(a), b)


def biff(a, b):
    return bor(band(a, b), band(bnot(a), bnot(b)))


def beval(b, cur, nxt=None):
    """Evaluate over value maps name→value for the current and next state."""
    if isinstance(b, BTrue):
        return True
    if isinstance(b, BFalse):
        return False
    if isinstance(b, VarIs):
        env = nxt if b.primed else cur
        if env is None:
            raise ValueError(f"primed variable {b.name} without next state")
        return env[b.name] == b.value
    if isinstance(b, BNot):
        return not beval(b.body, cur, nxt)
    if isinstance(b, BAnd):
        return all(beval(a, cur, nxt) for a in b.args)
    if isinstance(b, BOr):
        return any(beval(a, cur, nxt) for a in b.args)
    raise TypeError(type(b))


def bvars(b, out=None):
    """Set of (name, primed) pairs referenced by b."""
    if out is None:
        out = set()
    if isinstance(b, VarIs):
        out.add((b.name, b.primed))
    elif isinstance(b, BNot):
        bvars(b.body, out)
    elif isinstance(b, (BAnd, BOr)):
        for a in b.args:
            bvars(a, out)
    return out


def has_primed(b):
    return any(p for _, p in bvars(b))


def map_leaves(b, fn):
    """Rebuild b with every VarIs leaf replaced by fn(leaf)."""
    if isinstance(b, (BTrue, BFalse)):
        return b
    if isinstance(b, VarIs):
        return fn(b)
    if isinstance(b, BNot):
        return bnot(map_leaves(b.body, fn))
    if isinstance(b, BAnd):
        return band(*(map_leaves(a, fn) for a in b.args))
    if isinstance(b, BOr):
        return bor(*(map_leaves(a, fn) for a in b.args))
    raise TypeError(type(b))


def rename_vars(b, mapping):
    return map_leaves(
        b, lambda v: VarIs(mapping.get(v.name, v.name), v.value, v.primed)
    )


def unprime(b):
    """Interpret primed leaves as current-state tests (used when a stuttering
    step makes next equal to current)."""
    return map_leaves(b, lambda v: VarIs(v.name, v.value, False))


# ---------------------------------------------------------------------------
# State machines


@dataclass(frozen=True)
class VarDecl:
    name: str
    size: int
    boolean: bool = True
    frozen: bool = False
    domain: tuple = None  # explicit value list (enum literals, ranges)

    @property
    def values(self):
        if self.domain is not None:
            return self.domain
        if self.boolean:
            return (False, True)
        return tuple(range(self.size))


class StateMachine:
    """Grounded propositional/integer state machine.

    init/invar/trans are conjunct lists; trans conjuncts may use primed
    leaves. grounding_map sends (relation, tuple) to a variable reference:
    ("bool", var), ("int", var, value) or ("const", bool). residual is a
    machine-level LTL formula (atoms are BExpr over this machine's vars) that
    every accepted trace must additionally satisfy.
    """

    def __init__(self, name, variables, init=(), invar=(), trans=(),
                 grounding_map=None, trace_var=None, residual=None):
        self.name = name
        self.variables = tuple(variables)
        self.init = tuple(init)
        self.invar = tuple(invar)
        self.trans = tuple(trans)
        self.grounding_map = dict(grounding_map or {})
        self.trace_var = trace_var
        self.residual = residual

    def var(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def var_names(self):
        return [v.name for v in self.variables]

    def init_expr(self):
        return band(*self.init)

    def invar_expr(self):
        return band(*self.invar)

    def trans_expr(self):
        return band(*self.trans)

    def replaced(self, **kw):
        out = StateMachine(
            kw.get("name", self.name),
            kw.get("variables", self.variables),
            kw.get("init", self.init),
            kw.get("invar", self.invar),
            kw.get("trans", self.trans),
            kw.get("grounding_map", self.grounding_map),
            kw.get("trace_var", self.trace_var),
            kw.get("residual", self.residual),
        )
        return out

    def state_count(self):
        n = 1
        for v in self.variables:
            n *= v.size
        return n
