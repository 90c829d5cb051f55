"""Hash-consed multi-valued decision diagrams.

A manager owns a fixed variable order (each variable carries its value
domain, so Boolean and small-integer variables are handled uniformly) and a
unique-node table; nodes are plain integer identities valid only within
their manager. Circuits are emitted as shared BExpr DAGs via Shannon
expansion, one disjunct per domain value.
"""

from collections import OrderedDict

from .boolexpr import (
    FALSE, TRUE, BAnd, BNot, BOr, BTrue, VarIs, band, bnot, bor,
)

MEMO_CAP = 1 << 16


def interleaved_order(variables, primed=True):
    """Declaration order with current/next copies interleaved."""
    out = []
    for v in variables:
        out.append(((v.name, False), v.values))
        if primed:
            out.append(((v.name, True), v.values))
    return out


class DdManager:
    """Owns the variable order and the unique table; node ids 0/1 are the
    false/true terminals."""

    def __init__(self, order):
        self.order = list(order)  # [((name, primed), values), ...]
        self.index = {key: i for i, (key, _) in enumerate(self.order)}
        if len(self.index) != len(self.order):
            raise ValueError("duplicate variable in order")
        self.nodes = [None, None]  # id -> (var_index, children)
        self.unique = {}
        self.memo = OrderedDict()

    def values_of(self, var_index):
        return self.order[var_index][1]

    def mk(self, var_index, children):
        children = tuple(children)
        if all(c == children[0] for c in children):
            return children[0]
        key = (var_index, children)
        u = self.unique.get(key)
        if u is None:
            u = len(self.nodes)
            self.nodes.append(key)
            self.unique[key] = u
        return u

    def var_is(self, name, value, primed=False):
        i = self.index[(name, primed)]
        values = self.values_of(i)
        return self.mk(i, tuple(1 if v == value else 0 for v in values))

    def _memoized(self, key, compute):
        hit = self.memo.get(key)
        if hit is not None:
            self.memo.move_to_end(key)
            return hit
        v = compute()
        self.memo[key] = v
        if len(self.memo) > MEMO_CAP:
            self.memo.popitem(last=False)
        return v

    # -- apply ------------------------------------------------------------

    def apply(self, op, *operands):
        if op == "not":
            (u,) = operands
            return self._apply_fn("not", lambda a: 1 - a, (u,))
        if op == "and":
            return self._fold(lambda a, b: a & b, "and", operands, 1)
        if op == "or":
            return self._fold(lambda a, b: a | b, "or", operands, 0)
        if op == "equal":
            a, b = operands
            return self._apply_fn("equal", lambda x, y: int(x == y), (a, b))
        if op == "ite":
            c, t, e = operands
            return self._apply_fn(
                "ite", lambda x, y, z: y if x else z, (c, t, e)
            )
        raise ValueError(f"unknown op {op}")

    def _fold(self, fn, name, operands, unit):
        acc = unit
        for u in operands:
            acc = self._apply_fn(name, lambda a, b: fn(a, b), (acc, u))
        return acc

    def _apply_fn(self, name, fn, operands):
        if all(u in (0, 1) for u in operands):
            return fn(*operands)
        key = (name, operands)

        def compute():
            top = min(
                self.nodes[u][0] for u in operands if u not in (0, 1)
            )
            n_vals = len(self.values_of(top))
            children = []
            for ci in range(n_vals):
                cof = tuple(self._cofactor(u, top, ci) for u in operands)
                children.append(self._apply_fn(name, fn, cof))
            return self.mk(top, children)

        return self._memoized(key, compute)

    def _cofactor(self, u, var_index, child_index):
        if u in (0, 1):
            return u
        vi, children = self.nodes[u]
        if vi == var_index:
            return children[child_index]
        return u

    def restrict(self, u, name, value, primed=False):
        """Cofactor of u with the named variable fixed to value."""
        vi = self.index[(name, primed)]
        ci = self.values_of(vi).index(value)
        key = ("restrict", u, vi, ci)

        def compute():
            if u in (0, 1):
                return u
            top, children = self.nodes[u]
            if top > vi:
                return u
            if top == vi:
                return children[ci]
            return self.mk(
                top, tuple(self.restrict(c, name, value, primed)
                           for c in children)
            )

        return self._memoized(key, compute)

    # -- building from Boolean expressions --------------------------------

    def from_bexpr(self, b):
        if isinstance(b, BTrue):
            return 1
        if isinstance(b, VarIs):
            return self.var_is(b.name, b.value, b.primed)
        if isinstance(b, BNot):
            return self.apply("not", self.from_bexpr(b.body))
        if isinstance(b, BAnd):
            return self.apply("and", *(self.from_bexpr(a) for a in b.args))
        if isinstance(b, BOr):
            return self.apply("or", *(self.from_bexpr(a) for a in b.args))
        return 0  # BFalse

    # -- evaluation and enumeration ----------------------------------------

    def eval(self, u, assignment):
        """assignment maps (name, primed) -> value; Boolean shorthand with
        bare names is accepted for unprimed variables."""
        while u not in (0, 1):
            vi, children = self.nodes[u]
            (name, primed), values = self.order[vi]
            if (name, primed) in assignment:
                v = assignment[(name, primed)]
            else:
                v = assignment[name]
            u = children[values.index(v)]
        return bool(u)

    def sat_assignments(self, u, var_indices=None):
        """All assignments over var_indices (default: full order) under which
        u evaluates to true, as dicts (name, primed) -> value."""
        if var_indices is None:
            var_indices = range(len(self.order))
        var_indices = list(var_indices)

        def rec(u, pos):
            if pos == len(var_indices):
                if u == 1:
                    yield {}
                return
            vi = var_indices[pos]
            key, values = self.order[vi]
            top = None if u in (0, 1) else self.nodes[u][0]
            for ci, v in enumerate(values):
                child = self._cofactor(u, vi, ci) if top == vi else u
                if child == 0:
                    continue
                for rest in rec(child, pos + 1):
                    rest[key] = v
                    yield rest

        if u == 0:
            return iter(())
        return rec(u, 0)

    def count_sat(self, u, var_indices=None):
        if var_indices is None:
            var_indices = range(len(self.order))
        var_indices = list(var_indices)

        def rec(u, pos):
            if pos == len(var_indices):
                return 1 if u == 1 else 0
            if u == 0:
                return 0
            vi = var_indices[pos]
            top = None if u == 1 else self.nodes[u][0]
            total = 0
            for ci in range(len(self.order[vi][1])):
                child = self._cofactor(u, vi, ci) if top == vi else u
                total += rec(child, pos + 1)
            return total

        return rec(u, 0)

    def node_count(self, u):
        seen = set()

        def rec(u):
            if u in (0, 1) or u in seen:
                return
            seen.add(u)
            for c in self.nodes[u][1]:
                rec(c)

        rec(u)
        return len(seen)

    def support(self, u):
        """Variable keys tested along some path from u."""
        out = set()
        stack = [u]
        seen = set()
        while stack:
            n = stack.pop()
            if n in (0, 1) or n in seen:
                continue
            seen.add(n)
            vi, children = self.nodes[n]
            out.add(self.order[vi][0])
            stack.extend(children)
        return out

    # -- circuit emission --------------------------------------------------

    def to_circuit(self, u):
        """Shannon-expand the diagram into a shared BExpr DAG equivalent to
        it on every assignment."""
        memo = {0: FALSE, 1: TRUE}

        def rec(u):
            if u in memo:
                return memo[u]
            vi, children = self.nodes[u]
            (name, primed), values = self.order[vi]
            branches = []
            for v, c in zip(values, children):
                if c == 0:
                    continue
                guard = VarIs(name, v, primed)
                sub = rec(c)
                branches.append(guard if sub is TRUE else band(guard, sub))
            expr = bor(*branches)
            memo[u] = expr
            return expr

        return rec(u)

    # -- debugging ---------------------------------------------------------

    def to_dot(self, u, title="dd"):
        lines = [f"digraph {title} {{", '  t0 [label="0",shape=box];',
                 '  t1 [label="1",shape=box];']
        seen = set()

        def rec(u):
            if u in (0, 1) or u in seen:
                return
            seen.add(u)
            vi, children = self.nodes[u]
            (name, primed), values = self.order[vi]
            label = name + ("'" if primed else "")
            lines.append(f'  n{u} [label="{label}"];')
            for v, c in zip(values, children):
                tgt = f"t{c}" if c in (0, 1) else f"n{c}"
                lines.append(f'  n{u} -> {tgt} [label="{v}"];')
                rec(c)

        rec(u)
        lines.append("}")
        return "\n".join(lines)


def partition(b, mode="conjunctive"):
    """Split a Boolean expression into top-level conjuncts, or into the
    top-level disjuncts of its negation normal form."""
    b = nnf_bexpr(b)
    if mode == "conjunctive":
        return list(b.args) if isinstance(b, BAnd) else [b]
    if mode == "disjunctive":
        return list(b.args) if isinstance(b, BOr) else [b]
    raise ValueError(mode)


def nnf_bexpr(b, neg=False):
    if isinstance(b, BNot):
        return nnf_bexpr(b.body, not neg)
    if isinstance(b, BAnd):
        parts = [nnf_bexpr(a, neg) for a in b.args]
        return bor(*parts) if neg else band(*parts)
    if isinstance(b, BOr):
        parts = [nnf_bexpr(a, neg) for a in b.args]
        return band(*parts) if neg else bor(*parts)
    return bnot(b) if neg else b
