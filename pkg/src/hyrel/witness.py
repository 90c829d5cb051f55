"""Witness backtracing and rendering.

Maps low-level witnesses (explicit machine lassos, or step assignments from
the symbolic backend) back to relational trace instances over the original
problem relations: machine states are decoded through each machine's
grounding map, composed product problems are split back into the user's
quantifier variables via the recorded ``name$var`` renamings, and
prefix-only symbolic witnesses are closed into lassos by following machine
transitions when possible.  Rendering supports a per-step text layout, a
canonical versioned JSON schema, and DOT graphs (one per step).
"""

import json
from dataclasses import dataclass

from .boolexpr import beval
from .core.ast import HyrelError, LassoTrace, TraceContext, TupleSet
from .core.bounds import satisfies_bounds
from .core.eval import eval_formula
from .ltl import EXISTS, MachineLasso

OUTER = "$outer"
SCHEMA = "hyrel-witness"
VERSION = 1


class WitnessError(HyrelError):
    """Internal inconsistency while backtracing (signals a pipeline bug)."""


@dataclass(frozen=True)
class WitnessTrace:
    """One quantifier variable's trace: per-step relation valuations (or
    scalar machine-variable values), plus a loop index (None = open prefix)."""

    var: str
    problem: str
    states: tuple  # of dict name -> TupleSet | scalar
    loop: object  # int | None
    note: str = ""

    def lasso(self):
        """Core-logic LassoTrace view; open prefixes fold at the last state."""
        loop = self.loop if self.loop is not None else len(self.states) - 1
        return LassoTrace(self.states, loop)


@dataclass(frozen=True)
class RelationalWitness:
    traces: tuple  # of WitnessTrace
    provenance: tuple = ()

    def trace(self, var):
        for t in self.traces:
            if t.var == var:
                return t
        raise KeyError(var)


# ---------------------------------------------------------------------------
# Machine-state decoding


def _ref_holds(ref, state):
    kind = ref[0]
    if kind == "const":
        return ref[1]
    if kind == "bool":
        return state[ref[1]] is True
    if kind == "int":
        return state[ref[1]] == ref[2]
    if kind == "bits":
        return all(state[n] == b for n, b in ref[1])
    raise WitnessError(f"unknown grounding reference {ref!r}")


def _is_scalar(rel, tuples_refs):
    """A grounded relation that is really a plain machine variable: the SMV
    path maps variable v either to key (v, ()) or to keys (v, (val,)) whose
    references all test v itself."""
    for t, ref in tuples_refs:
        if t == () and ref[0] == "bool" and ref[1] == rel:
            return True
        if len(t) == 1 and ref[0] == "int" and ref[1] == rel \
                and ref[2] == t[0]:
            return True
        return False
    return False


def decode_state(m, state, scalars=False):
    """Relation valuation of one machine state via the grounding map; with
    `scalars` (machine-level inputs, no relational problems behind them),
    plain variables are reported as values instead of singleton relations."""
    by_rel = {}
    for (rel, t), ref in m.grounding_map.items():
        by_rel.setdefault(rel, []).append((t, ref))
    out = {}
    for rel, pairs in sorted(by_rel.items()):
        if scalars and _is_scalar(rel, pairs):
            out[rel] = state[rel]
            continue
        arity = len(pairs[0][0])
        held = frozenset(t for t, ref in pairs if _ref_holds(ref, state))
        out[rel] = TupleSet(arity, held)
    return out


def _machine_for_states(m, states):
    """The witness may carry states over the bit-blasted variable set; pick
    the matching grounding view."""
    if not states:
        return m
    names = set(states[0])
    if {v.name for v in m.variables} <= names or not m.variables:
        return m
    from . import rl2ltl

    bb = rl2ltl.bitblast(m)
    if {v.name for v in bb.variables} <= names:
        return bb
    raise WitnessError(
        f"witness states do not match the variables of machine {m.name}")


def close_prefix(m, states, limit=None):
    """Turn an open run prefix into a lasso: first try a closing edge back
    into the prefix, then extend deterministically until a state repeats.
    Returns (states, loop) or (states, None) when no closure is found."""
    from .backend_exp import build_explicit

    invar = m.invar_expr()
    trans = m.trans_expr()

    def edge(cur, nxt):
        return beval(trans, cur, nxt) and beval(invar, nxt, None)

    for j in range(len(states)):
        if edge(states[-1], states[j]):
            return list(states), j
    try:
        sys = build_explicit(m, ceiling=1 << 16)
    except HyrelError:
        return list(states), None
    index = {
        tuple(sorted(s.items(), key=str)): i for i, s in enumerate(sys.states)
    }
    seen = {}
    path = list(states)
    cur = index.get(tuple(sorted(states[-1].items(), key=str)))
    if cur is None:
        return list(states), None
    steps = limit if limit is not None else len(sys.states) + 1
    for _ in range(steps):
        if not sys.succs[cur]:
            return list(states), None
        nxt = sys.succs[cur][0]
        if nxt in seen:
            return path, seen[nxt]
        seen[nxt] = len(path)
        path.append(dict(sys.states[nxt]))
        cur = nxt
    return list(states), None


# ---------------------------------------------------------------------------
# Backtracing


def _project(rel_states, mapping):
    """Undo a composition renaming: mapping sends original relation names to
    their renamed product names."""
    out = []
    for st in rel_states:
        missing = [r for o, r in mapping.items() if r not in st]
        if missing:
            raise WitnessError(
                f"composed relations {missing} absent from the decoded state")
        out.append({orig: st[renamed] for orig, renamed in mapping.items()})
    return out


def _check_bounds(trace, problem):
    if problem is None:
        return
    if not satisfies_bounds(trace.lasso(), problem.decls, problem.universe):
        raise WitnessError(
            f"internal error: backtraced trace {trace.var} violates the "
            f"declared bounds of problem {trace.problem}")


def backtrace(verdict, lp, hyper=None):
    """Relational witness for a SAT verdict over a lowered problem.

    `hyper` (the pre-lowering hyper problem) enables bound re-checking of
    every backtraced component; inconsistencies raise WitnessError rather
    than being repaired.
    """
    if not verdict.witness:
        raise WitnessError("the verdict carries no witness")
    comp = lp.composition
    machines = {None: lp.outer}
    for m in lp.machines[1:]:
        machines[m.trace_var] = m

    provenance = []
    decoded = {}
    for tag, w in verdict.witness.items():
        if isinstance(w, MachineLasso):
            states, loop = list(w.states), w.loop
            provenance.append(f"{tag or OUTER}: explicit lasso witness")
        else:
            states, loop = [dict(s) for s in w], None
            provenance.append(f"{tag or OUTER}: symbolic step assignment")
        m = _machine_for_states(machines[tag], states)
        if loop is None:
            states, loop = close_prefix(m, states)
            provenance.append(
                f"{tag or OUTER}: prefix closed into a lasso at step {loop}"
                if loop is not None else
                f"{tag or OUTER}: open prefix (no closure found)")
        decoded[tag] = ([decode_state(m, s, scalars=comp.hyper is None)
                         for s in states], loop)

    traces = []

    def inner_problem(name):
        if hyper is None:
            return None
        try:
            return hyper.inner_problem(name)
        except HyrelError:
            return None

    if None in decoded:
        rel_states, loop = decoded[None]
        consumed = set()
        for var, pname, mapping in comp.outer_sources:
            tr = WitnessTrace(var, pname, tuple(_project(rel_states, mapping)),
                              loop)
            _check_bounds(tr, inner_problem(pname))
            traces.append(tr)
            consumed |= set(mapping.values())
            provenance.append(
                f"{var}: split from the outer instance via the "
                f"'$'-renamed relations of {pname}")
        own = [
            {r: v for r, v in st.items() if r not in consumed}
            for st in rel_states
        ]
        if any(st for st in own):
            tr = WitnessTrace(OUTER, lp.outer.name, tuple(own), loop)
            if hyper is not None:
                _check_bounds(tr, hyper.outer)
            traces.append(tr)

    for pol, cvar, pname in comp.prefix:
        if cvar not in decoded:
            continue
        rel_states, loop = decoded[cvar]
        sources = comp.var_sources.get(cvar, [(cvar, pname, {})])
        for ovar, opname, mapping in sources:
            if mapping:
                sts = tuple(_project(rel_states, mapping))
                provenance.append(
                    f"{ovar}: split from composed quantifier {cvar}")
            else:
                sts = tuple(dict(st) for st in rel_states)
            tr = WitnessTrace(ovar, opname, sts, loop)
            _check_bounds(tr, inner_problem(opname))
            traces.append(tr)

    if not traces:
        raise WitnessError("no trace component could be backtraced")
    return RelationalWitness(tuple(traces), tuple(provenance))


# ---------------------------------------------------------------------------
# Re-validation against the reference semantics


def revalidate(w, lp, hyper=None):
    """Check a backtraced witness with the core evaluator.

    Every component trace must satisfy its problem's declared bounds and
    constraint; when the whole prefix is existential and covered, the
    grounded matrix is additionally evaluated over the witness assignment.
    Returns a dict of named boolean checks (all True = valid).
    """
    checks = {}
    comp = lp.composition
    for tr in w.traces:
        if tr.problem is None or hyper is None or tr.var == OUTER:
            continue
        try:
            p = hyper.inner_problem(tr.problem)
        except HyrelError:
            continue
        t = tr.lasso()
        ok = satisfies_bounds(t, p.decls, p.universe)
        if ok:
            ctx = TraceContext({"$self": t}, universe=p.universe)
            ok = eval_formula(p.constraint, ctx, "$self", 0)
        checks[f"component:{tr.var}"] = bool(ok)

    if comp.matrix is not None and hyper is not None and \
            all(pol == EXISTS for pol, _, _ in comp.prefix):
        need = {v for _, v, _ in comp.prefix}
        composed = _recompose(w, lp)
        if composed is not None and need <= set(composed):
            outer_t = composed.pop(OUTER, None)
            if outer_t is None:
                outer_t = LassoTrace([{}], 0)
            ctx = TraceContext({OUTER: outer_t, **composed},
                               universe=hyper.outer.universe)
            checks["matrix"] = bool(
                eval_formula(comp.matrix, ctx, OUTER, 0))
    return checks


def _recompose(w, lp):
    """Rebuild per-composed-variable lassos (renamed relations) from the
    split traces, for matrix evaluation."""
    comp = lp.composition
    out = {}
    by_var = {t.var: t for t in w.traces}

    def merge(members, loop_ref):
        lens = set()
        merged = None
        loop = None
        for ovar, pname, mapping in members:
            tr = by_var.get(ovar)
            if tr is None:
                return None, None
            lens.add(len(tr.states))
            loop = tr.loop
            states = []
            for st in tr.states:
                if mapping:
                    states.append({mapping[r]: v for r, v in st.items()
                                   if r in mapping})
                else:
                    states.append(dict(st))
            if merged is None:
                merged = states
            else:
                if len(states) != len(merged):
                    return None, None
                merged = [{**a, **b} for a, b in zip(merged, states)]
        if len(lens) > 1 or loop is None:
            return None, None
        return merged, loop

    outer_states = None
    outer_loop = None
    if OUTER in by_var:
        tr = by_var[OUTER]
        outer_states = [dict(s) for s in tr.states]
        outer_loop = tr.loop
    if comp.outer_sources:
        merged, loop = merge(comp.outer_sources, None)
        if merged is None:
            return None
        if outer_states is None:
            outer_states, outer_loop = merged, loop
        else:
            if len(merged) != len(outer_states):
                return None
            outer_states = [{**a, **b}
                            for a, b in zip(outer_states, merged)]
    if outer_states is not None:
        if outer_loop is None:
            return None
        out[OUTER] = LassoTrace(outer_states, outer_loop)
    for pol, cvar, pname in comp.prefix:
        sources = comp.var_sources.get(cvar, [(cvar, pname, {})])
        merged, loop = merge(sources, None)
        if merged is None or loop is None:
            return None
        out[cvar] = LassoTrace(merged, loop)
    return out


# ---------------------------------------------------------------------------
# Rendering


def _scalar(v):
    return not isinstance(v, TupleSet)


def _fmt_value(v):
    if isinstance(v, TupleSet):
        if not v.tuples:
            return "∅"
        return "{" + ", ".join(
            "(" + ", ".join(map(str, t)) + ")" for t in v.sorted()) + "}"
    if v is True:
        return "TRUE"
    if v is False:
        return "FALSE"
    return str(v)


def render(w, format="text"):
    if format == "text":
        return render_text(w)
    if format == "json":
        return render_json(w)
    if format == "dot":
        return render_dot(w)
    raise HyrelError(f"unknown witness format {format!r}")


def render_text(w):
    out = []
    for tr in w.traces:
        head = f"trace {tr.var} (problem {tr.problem})"
        head += (f" loop->{tr.loop}" if tr.loop is not None
                 else " (open prefix)")
        if tr.note:
            head += f"  -- {tr.note}"
        out.append(head)
        for i, st in enumerate(tr.states):
            marker = "  ↺" if tr.loop == i else ""
            out.append(f"  step {i}{marker}")
            for name in sorted(st):
                out.append(f"    {name} = {_fmt_value(st[name])}")
    return "\n".join(out) + "\n"


def _json_value(v):
    if isinstance(v, TupleSet):
        return {"arity": v.arity, "tuples": [list(t) for t in v.sorted()]}
    return v


def render_json(w):
    doc = {
        "schema": SCHEMA,
        "version": VERSION,
        "provenance": list(w.provenance),
        "traces": [
            {
                "var": tr.var,
                "problem": tr.problem,
                "loop": tr.loop,
                "note": tr.note,
                "steps": [
                    {name: _json_value(v) for name, v in sorted(st.items())}
                    for st in tr.states
                ],
            }
            for tr in w.traces
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def parse_json(text):
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA:
        raise HyrelError("not a witness document")
    if doc.get("version") != VERSION:
        raise HyrelError(f"unsupported witness version {doc.get('version')}")

    def value(v):
        if isinstance(v, dict):
            return TupleSet(v["arity"],
                            frozenset(tuple(t) for t in v["tuples"]))
        return v

    traces = tuple(
        WitnessTrace(
            t["var"], t["problem"],
            tuple({n: value(v) for n, v in st.items()} for st in t["steps"]),
            t["loop"], t.get("note", ""))
        for t in doc["traces"]
    )
    return RelationalWitness(traces, tuple(doc.get("provenance", ())))


def render_dot(w):
    n_steps = max((len(tr.states) for tr in w.traces), default=0)
    docs = []
    for i in range(n_steps):
        lines = [f"digraph step_{i} {{", "  rankdir=LR;"]
        for ti, tr in enumerate(w.traces):
            if i >= len(tr.states):
                continue
            st = tr.states[i]
            lines.append(f"  subgraph cluster_{ti} {{")
            lines.append(f'    label="{tr.var} step {i}'
                         + ("   (loop)" if tr.loop == i else "") + '";')
            atoms = set()
            rows = []
            for name in sorted(st):
                v = st[name]
                if _scalar(v):
                    rows.append(f"{name} = {_fmt_value(v)}")
                    continue
                if v.arity == 1:
                    for (a,) in v.sorted():
                        atoms.add(a)
                        rows.append(f"{a} ∈ {name}")
                else:
                    for t in v.sorted():
                        atoms.update((t[0], t[-1]))
            for a in sorted(atoms):
                lines.append(f'    "{tr.var}:{a}" [label="{a}"];')
            for name in sorted(st):
                v = st[name]
                if _scalar(v) or v.arity < 2:
                    continue
                for t in v.sorted():
                    label = name if len(t) == 2 else \
                        f"{name}[{','.join(map(str, t[1:-1]))}]"
                    lines.append(
                        f'    "{tr.var}:{t[0]}" -> "{tr.var}:{t[-1]}" '
                        f'[label="{label}"];')
            if rows:
                text = "\\n".join(rows)
                lines.append(f'    "{tr.var}:info_{i}" '
                             f'[shape=note, label="{text}"];')
            lines.append("  }")
        lines.append("}")
        docs.append("\n".join(lines))
    return "\n".join(docs) + "\n"
