"""Grounding: populate sorts from a grid configuration, build static
relations, enumerate restricted atom/action universes, and compile axioms
for the rule engine.

Grounding is *restricted by granularity*: cell-level action atoms (and the
cell-level slice of the atom universe) are instantiated only over the
active cells of fine-grained regions; coarse regions contribute region
atoms alone.  Belief atoms themselves are never truncated — restriction
controls which ground actions and program atoms exist.

The rule engine works on compiled rules whose bodies are re-ordered for
evaluation: positive fluent literals first (they bind variables against
the belief index), then enumerable statics and sort-membership atoms,
then computed or negated literals, which must be fully bound by that
point.  Violations are grounding errors that name the axiom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

from fortdefense.env import Direction, GridConfig, in_arc, in_range
from fortdefense.kr.lang import (
    Atom,
    DomainDescription,
    Literal,
    Term,
    Variable,
)

#: Regions are square blocks of this many cells per side (the last row and
#: column of regions may be smaller on grids not divisible by the block).
REGION_BLOCK = 4

#: A target is "within shooting reach" for goal selection when it is at
#: most this margin beyond weapon range (the planner closes the gap).
PURSUIT_MARGIN = 3.0

DIR_SYMBOLS = ("n", "e", "s", "w")
DIR_OF_SYMBOL = {
    "n": Direction.N,
    "e": Direction.E,
    "s": Direction.S,
    "w": Direction.W,
}
SYMBOL_OF_DIR = {v: k for k, v in DIR_OF_SYMBOL.items()}


class GroundingError(ValueError):
    """Raised when an axiom cannot be grounded; names the axiom."""


# ---------------------------------------------------------------------------
# agent and region naming
# ---------------------------------------------------------------------------


def guard_symbols(config: GridConfig) -> tuple[str, ...]:
    return tuple(f"guard{i}" for i in range(config.n_guards))


def attacker_symbols(config: GridConfig) -> tuple[str, ...]:
    return tuple(f"attacker{j + 1}" for j in range(config.n_attackers))


def agent_symbol(config: GridConfig, agent_id: int) -> str:
    if agent_id < config.n_guards:
        return f"guard{agent_id}"
    return f"attacker{agent_id - config.n_guards + 1}"


def symbol_agent_id(config: GridConfig, symbol: str) -> int:
    if symbol.startswith("guard"):
        return int(symbol[len("guard") :])
    if symbol.startswith("attacker"):
        return config.n_guards + int(symbol[len("attacker") :]) - 1
    raise KeyError(f"unknown agent symbol {symbol!r}")


def region_grid(config: GridConfig) -> tuple[int, int]:
    nx = -(-config.width // REGION_BLOCK)
    ny = -(-config.height // REGION_BLOCK)
    return nx, ny


def region_symbol_of(config: GridConfig, x: int, y: int) -> str:
    nx, _ = region_grid(config)
    return f"r{(x // REGION_BLOCK) + (y // REGION_BLOCK) * nx}"


def region_index(symbol: str) -> int:
    return int(symbol[1:])


def all_region_symbols(config: GridConfig) -> tuple[str, ...]:
    nx, ny = region_grid(config)
    return tuple(f"r{k}" for k in range(nx * ny))


def region_cells(config: GridConfig, symbol: str) -> tuple[tuple[int, int], ...]:
    nx, _ = region_grid(config)
    k = region_index(symbol)
    bx, by = k % nx, k // nx
    return tuple(
        (x, y)
        for y in range(by * REGION_BLOCK, min((by + 1) * REGION_BLOCK, config.height))
        for x in range(bx * REGION_BLOCK, min((bx + 1) * REGION_BLOCK, config.width))
    )


def fort_region_symbols(config: GridConfig) -> frozenset[str]:
    return frozenset(region_symbol_of(config, x, y) for x, y in config.fort_cells)


def region_adjacency(config: GridConfig) -> frozenset[tuple[str, str]]:
    """Edge-sharing region pairs, symmetric by construction."""
    nx, ny = region_grid(config)
    pairs = set()
    for by in range(ny):
        for bx in range(nx):
            k = bx + by * nx
            for dx, dy in ((1, 0), (0, 1)):
                ox, oy = bx + dx, by + dy
                if ox < nx and oy < ny:
                    k2 = ox + oy * nx
                    pairs.add((f"r{k}", f"r{k2}"))
                    pairs.add((f"r{k2}", f"r{k}"))
    return frozenset(pairs)


# ---------------------------------------------------------------------------
# static relations
# ---------------------------------------------------------------------------


class Static:
    """A static relation: an enumerated tuple table or a computed test.

    ``expand`` enumerates extensions of a partial argument pattern (``None``
    marks free positions); computed statics can only be tested fully bound.
    """

    def __init__(
        self,
        name: str,
        arity: int,
        table: Optional[Iterable[tuple]] = None,
        func: Optional[Callable[..., bool]] = None,
    ):
        self.name = name
        self.arity = arity
        self.table = frozenset(table) if table is not None else None
        self.func = func
        self._expand_cache: dict[tuple[int, ...], dict] = {}

    def contains(self, args: tuple) -> bool:
        if self.table is not None:
            return tuple(args) in self.table
        return bool(self.func(*args))

    def expand(self, pattern: tuple) -> Iterator[tuple]:
        free = tuple(i for i, v in enumerate(pattern) if v is None)
        if not free:
            if self.contains(pattern):
                yield tuple(pattern)
            return
        if self.table is None:
            raise GroundingError(
                f"computed static {self.name!r} cannot enumerate free arguments"
            )
        bound = tuple(i for i in range(self.arity) if i not in free)
        index = self._expand_cache.get(bound)
        if index is None:
            index = {}
            for row in sorted(self.table):
                index.setdefault(tuple(row[i] for i in bound), []).append(row)
            self._expand_cache[bound] = index
        key = tuple(pattern[i] for i in bound)
        yield from index.get(key, ())


def build_statics(config: GridConfig) -> dict[str, Static]:
    """The fort-defense static relations, derived from the configuration."""
    next_to = [
        (x, y, x + dx, y + dy)
        for x in range(config.width)
        for y in range(config.height)
        for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0))
        if config.in_bounds(x + dx, y + dy)
    ]
    cw = {"n": "e", "e": "s", "s": "w", "w": "n"}
    next_dir = [(d, cw[d]) for d in DIR_SYMBOLS]
    opposite = [("n", "s"), ("s", "n"), ("e", "w"), ("w", "e")]
    component = [
        (x, y, region_symbol_of(config, x, y))
        for x in range(config.width)
        for y in range(config.height)
    ]

    def in_sight(x1, y1, d, x2, y2) -> bool:
        return in_range(config, x1, y1, x2, y2) and in_arc(
            config, DIR_OF_SYMBOL[d], x1, y1, x2, y2
        )

    def within_reach(x1, y1, x2, y2) -> bool:
        return math.hypot(x2 - x1, y2 - y1) <= config.shoot_range + PURSUIT_MARGIN

    return {
        "next_to": Static("next_to", 4, table=next_to),
        "next_dir": Static("next_dir", 2, table=next_dir),
        "opposite_dir": Static("opposite_dir", 2, table=opposite),
        "component": Static("component", 3, table=component),
        "next_to_region": Static(
            "next_to_region", 2, table=region_adjacency(config)
        ),
        "in_sight": Static("in_sight", 5, func=in_sight),
        "within_reach": Static("within_reach", 4, func=within_reach),
    }


_BUILTIN_STATICS = {
    "neq": Static("neq", 2, func=lambda a, b: a != b),
    "eq": Static("eq", 2, func=lambda a, b: a == b),
}


# ---------------------------------------------------------------------------
# sort population
# ---------------------------------------------------------------------------


def populate_sorts(
    desc: DomainDescription, config: GridConfig, horizon: int = 8
) -> dict[str, tuple[Term, ...]]:
    guards = guard_symbols(config)
    attackers = attacker_symbols(config)
    known: dict[str, tuple[Term, ...]] = {
        "agent": guards + attackers,
        "guard": guards,
        "attacker": attackers,
        "ah_agent": guards[:1],
        "ext_agent": guards[1:] + attackers,
        "dir": DIR_SYMBOLS,
        "x_val": tuple(range(config.width)),
        "y_val": tuple(range(config.height)),
        "region": all_region_symbols(config),
        "step": tuple(range(horizon + 1)),
    }
    return {s.name: known.get(s.name, ()) for s in desc.sorts}


# ---------------------------------------------------------------------------
# rule compilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompiledRule:
    """One axiom with an evaluation-ordered body.

    ``head`` is the effect (causal law), the constrained literal (state
    constraint), the conclusion (default), or None (executability).
    ``action`` is the triggering action pattern where applicable.

    For constraints with a negative head, ``body`` holds only the literals
    evaluable before the head is bound; ``residual`` holds the rest
    (typically comparisons over head variables), checked per candidate
    atom matched against the head pattern.
    """

    axiom_id: str
    text: str
    kind: str  # "causal" | "window" | "definition" | "exec" | "default"
    action: Optional[Atom]
    head: Optional[Literal]
    body: tuple[Literal, ...]
    residual: tuple[Literal, ...] = ()
    cr_allowed: bool = False


def _literal_stage(lit: Literal, gdom: "GroundedDomain") -> int:
    pred = lit.atom.pred
    if lit.positive and pred in gdom.fluent_decls:
        return 0
    if lit.positive and pred in gdom.sorts:
        return 1
    static = gdom.statics.get(pred)
    if lit.positive and static is not None and static.table is not None:
        return 1
    return 2


def _order_body(body: tuple[Literal, ...], gdom: "GroundedDomain") -> tuple[Literal, ...]:
    return tuple(sorted(body, key=lambda lit: _literal_stage(lit, gdom)))


def _split_residual(
    body: tuple[Literal, ...], head: Literal, gdom: "GroundedDomain"
) -> tuple[tuple[Literal, ...], tuple[Literal, ...]]:
    """Split an ordered body into the prefix solvable before binding the
    head and the residual that needs head variables."""
    head_vars = {v.name for v in _vars_of(head.atom)}
    bound: set[str] = set()
    pre: list[Literal] = []
    residual: list[Literal] = []
    for lit in body:
        names = {v.name for v in _vars_of(lit.atom)}
        if _literal_stage(lit, gdom) < 2 or names <= bound:
            pre.append(lit)
            bound |= names
        else:
            residual.append(lit)
    for lit in residual:
        names = {v.name for v in _vars_of(lit.atom)}
        if not names <= bound | head_vars:
            return tuple(pre), None  # caller reports the failure
    return tuple(pre), tuple(residual)


def _vars_of(atom: Atom) -> set[Variable]:
    return {a for a in atom.args if isinstance(a, Variable)}


def _infer_var_sorts(
    gdom: "GroundedDomain", axiom_id: str, text: str, atoms: list[Atom]
) -> dict[str, str]:
    """Assign each variable its most specific declared sort, or fail."""
    candidates: dict[str, set[str]] = {}
    for atom in atoms:
        sig = gdom.signature(atom.pred)
        if sig is None:
            if atom.pred in gdom.sorts and len(atom.args) == 1:
                sig = (atom.pred,)
            else:
                continue  # neq/eq contribute no sort information
        for pos, arg in enumerate(atom.args):
            if isinstance(arg, Variable):
                candidates.setdefault(arg.name, set()).add(sig[pos])
    resolved = {}
    for var, sorts in candidates.items():
        best = None
        for s in sorts:
            if best is None or gdom.is_subsort(s, best):
                best = s
            elif not gdom.is_subsort(best, s):
                raise GroundingError(
                    f"axiom {axiom_id} ({text}): variable {var} has "
                    f"incompatible sorts {sorted(sorts)}"
                )
        resolved[var] = best
    all_vars = set()
    for atom in atoms:
        all_vars |= {v.name for v in _vars_of(atom)}
    missing = all_vars - set(resolved)
    if missing:
        raise GroundingError(
            f"axiom {axiom_id} ({text}): unsorted symbol(s) {sorted(missing)}"
        )
    return resolved


# ---------------------------------------------------------------------------
# grounded domain
# ---------------------------------------------------------------------------


@dataclass
class GroundedDomain:
    desc: DomainDescription
    config: Optional[GridConfig]
    sorts: dict[str, tuple[Term, ...]]
    statics: dict[str, Static]
    active_cells: frozenset[tuple[int, int]]
    fine_regions: frozenset[str]
    horizon: int = 8
    fluent_decls: dict = field(default_factory=dict)
    fluent_atoms: dict[str, tuple[Atom, ...]] = field(default_factory=dict)
    ground_actions: tuple[Atom, ...] = ()
    exo_ground_actions: tuple[Atom, ...] = ()
    causal_by_action: dict[str, list[CompiledRule]] = field(default_factory=dict)
    exec_by_action: dict[str, list[CompiledRule]] = field(default_factory=dict)
    windows: list[CompiledRule] = field(default_factory=list)
    definitions: list[CompiledRule] = field(default_factory=list)
    defaults: list[CompiledRule] = field(default_factory=list)
    window_triggers: dict[str, list[tuple[CompiledRule, int]]] = field(default_factory=dict)
    inertial_preds: frozenset[str] = frozenset()
    recursive_definitions: bool = False
    _sort_sets: dict[str, frozenset] = field(default_factory=dict)

    # -- sort helpers -------------------------------------------------------

    def is_subsort(self, a: str, b: str) -> bool:
        """Whether sort a is b or a descendant of b."""
        parents = {s.name: s.parent for s in self.desc.sorts}
        cur: Optional[str] = a
        while cur is not None:
            if cur == b:
                return True
            cur = parents.get(cur)
        return False

    def in_sort(self, value: Term, sort: str) -> bool:
        cached = self._sort_sets.get(sort)
        if cached is None:
            cached = frozenset(self.sorts.get(sort, ()))
            self._sort_sets[sort] = cached
        return value in cached

    def signature(self, pred: str) -> Optional[tuple[str, ...]]:
        decl = (
            self.desc.fluents.get(pred)
            or self.desc.statics.get(pred)
            or self.desc.actions.get(pred)
        )
        return decl.arg_sorts if decl else None

    def is_inertial(self, pred: str) -> bool:
        decl = self.desc.fluents.get(pred)
        return decl is not None and decl.kind == "inertial"

    def is_defined(self, pred: str) -> bool:
        decl = self.desc.fluents.get(pred)
        return decl is not None and decl.kind == "defined"

    @property
    def ah_symbol(self) -> Optional[str]:
        vals = self.sorts.get("ah_agent", ())
        return vals[0] if vals else None

    def report(self) -> dict:
        return {
            "atoms": {p: len(atoms) for p, atoms in sorted(self.fluent_atoms.items())},
            "atom_total": sum(len(a) for a in self.fluent_atoms.values()),
            "own_actions": len(self.ground_actions),
            "exo_actions": len(self.exo_ground_actions),
            "fine_regions": sorted(self.fine_regions, key=region_index),
            "active_cells": len(self.active_cells),
        }


def _enumerate_atoms(
    gdom: GroundedDomain, pred: str, arg_sorts: tuple[str, ...]
) -> tuple[Atom, ...]:
    """Atom universe for one predicate, with (x_val, y_val) argument pairs
    restricted to the active cells when grounding against a grid."""
    slots: list[tuple] = []
    i = 0
    while i < len(arg_sorts):
        if (
            gdom.config is not None
            and i + 1 < len(arg_sorts)
            and arg_sorts[i] == "x_val"
            and arg_sorts[i + 1] == "y_val"
        ):
            slots.append(("cell", sorted(gdom.active_cells)))
            i += 2
        else:
            slots.append(("plain", gdom.sorts.get(arg_sorts[i], ())))
            i += 1
    atoms: list[Atom] = []

    def rec(idx: int, acc: tuple):
        if idx == len(slots):
            atoms.append(Atom(pred, acc))
            return
        kind, values = slots[idx]
        for v in values:
            rec(idx + 1, acc + (v if kind == "cell" else (v,)))

    rec(0, ())
    return tuple(atoms)


def ground(
    desc: DomainDescription,
    config: Optional[GridConfig] = None,
    *,
    sorts: Optional[dict[str, tuple[Term, ...]]] = None,
    statics: Optional[dict[str, Static]] = None,
    fine_regions: Optional[Iterable[str]] = None,
    horizon: int = 8,
) -> GroundedDomain:
    """Ground a domain description against a grid configuration.

    Synthetic domains (tests, default-conflict fixtures) may instead pass
    explicit ``sorts``/``statics``.  ``fine_regions`` restricts cell-level
    grounding; the default is every region fine.
    """
    if sorts is None:
        if config is None:
            sorts = {s.name: () for s in desc.sorts}
        else:
            sorts = populate_sorts(desc, config, horizon)
    resolved_statics = dict(_BUILTIN_STATICS)
    if config is not None:
        resolved_statics.update(build_statics(config))
    if statics is not None:
        resolved_statics.update(statics)

    if config is not None:
        if fine_regions is None:
            fine = frozenset(all_region_symbols(config))
        else:
            fine = frozenset(fine_regions)
        active = frozenset(
            cell for r in fine for cell in region_cells(config, r)
        )
    else:
        fine = frozenset()
        active = frozenset()

    gdom = GroundedDomain(
        desc=desc,
        config=config,
        sorts=sorts,
        statics=resolved_statics,
        active_cells=active,
        fine_regions=fine,
        horizon=horizon,
        fluent_decls=dict(desc.fluents),
    )

    # undeclared statics referenced by axioms fail during _validate in lang;
    # here we verify every declared static has a relation
    for name in desc.statics:
        if name not in resolved_statics:
            raise GroundingError(f"no relation provided for declared static {name!r}")

    # --- compile axioms ----------------------------------------------------
    for law in desc.causal_laws:
        atoms = [law.action, law.effect.atom] + [l.atom for l in law.conditions]
        _infer_var_sorts(gdom, law.axiom_id, law.text, atoms)
        body = _order_body(law.conditions, gdom)
        _check_bindable(gdom, law.axiom_id, law.text, law.action, body, law.effect)
        rule = CompiledRule(law.axiom_id, law.text, "causal", law.action, law.effect, body)
        gdom.causal_by_action.setdefault(law.action.pred, []).append(rule)
    for con in desc.constraints:
        atoms = [con.head.atom] + [l.atom for l in con.body]
        _infer_var_sorts(gdom, con.axiom_id, con.text, atoms)
        body = _order_body(con.body, gdom)
        if gdom.is_defined(con.head.atom.pred):
            _check_bindable(gdom, con.axiom_id, con.text, None, body, con.head)
            rule = CompiledRule(con.axiom_id, con.text, "definition", None, con.head, body)
            gdom.definitions.append(rule)
        else:
            # negative inertial heads bind remaining variables against the
            # current belief; positive inertial heads must bind from the body
            if con.head.positive:
                _check_bindable(gdom, con.axiom_id, con.text, None, body, con.head)
                rule = CompiledRule(con.axiom_id, con.text, "window", None, con.head, body)
            else:
                pre, residual = _split_residual(body, con.head, gdom)
                if residual is None:
                    raise GroundingError(
                        f"axiom {con.axiom_id} ({con.text}): body variables "
                        f"unreachable from fluents, statics, or the head"
                    )
                rule = CompiledRule(
                    con.axiom_id, con.text, "window", None, con.head, pre, residual
                )
            gdom.windows.append(rule)
            for i, lit in enumerate(rule.body):
                if lit.positive and lit.atom.pred in gdom.fluent_decls:
                    gdom.window_triggers.setdefault(lit.atom.pred, []).append((rule, i))
    for ex in desc.executabilities:
        atoms = [ex.action] + [l.atom for l in ex.conditions]
        _infer_var_sorts(gdom, ex.axiom_id, ex.text, atoms)
        body = _order_body(ex.conditions, gdom)
        _check_bindable(gdom, ex.axiom_id, ex.text, ex.action, body, None)
        rule = CompiledRule(ex.axiom_id, ex.text, "exec", ex.action, None, body)
        gdom.exec_by_action.setdefault(ex.action.pred, []).append(rule)
    for d in desc.defaults:
        atoms = [d.conclusion.atom] + [l.atom for l in d.body]
        _infer_var_sorts(gdom, d.axiom_id, d.text, atoms)
        body = _order_body(d.body, gdom)
        _check_bindable(gdom, d.axiom_id, d.text, None, body, d.conclusion)
        gdom.defaults.append(
            CompiledRule(
                d.axiom_id, d.text, "default", None, d.conclusion, body,
                cr_allowed=d.cr_allowed,
            )
        )

    gdom.inertial_preds = frozenset(
        p for p, d in desc.fluents.items() if d.kind == "inertial"
    )
    defined_preds = set(desc.fluents) - gdom.inertial_preds
    gdom.recursive_definitions = any(
        lit.atom.pred in defined_preds
        for rule in gdom.definitions
        for lit in rule.body
    )

    # --- atom and action universes -----------------------------------------
    for pred, decl in desc.fluents.items():
        gdom.fluent_atoms[pred] = _enumerate_atoms(gdom, pred, decl.arg_sorts)
    own, exo = [], []
    for name, adecl in desc.actions.items():
        for atom in _enumerate_atoms(gdom, name, adecl.arg_sorts):
            (exo if adecl.exogenous else own).append(atom)
    gdom.ground_actions = tuple(own)
    gdom.exo_ground_actions = tuple(exo)
    return gdom


def restrict(gdom: GroundedDomain, fine_regions: Iterable[str]) -> GroundedDomain:
    """A cheap re-grounding of an already-grounded domain at a different
    granularity: compiled rules, statics, and sorts are shared; only the
    active cells and the cell-level atom/action universes are rebuilt."""
    if gdom.config is None:
        raise GroundingError("granularity restriction requires a grid configuration")
    fine = frozenset(fine_regions)
    out = GroundedDomain(
        desc=gdom.desc,
        config=gdom.config,
        sorts=gdom.sorts,
        statics=gdom.statics,
        active_cells=frozenset(
            cell for r in fine for cell in region_cells(gdom.config, r)
        ),
        fine_regions=fine,
        horizon=gdom.horizon,
        fluent_decls=gdom.fluent_decls,
        causal_by_action=gdom.causal_by_action,
        exec_by_action=gdom.exec_by_action,
        windows=gdom.windows,
        definitions=gdom.definitions,
        defaults=gdom.defaults,
        window_triggers=gdom.window_triggers,
        inertial_preds=gdom.inertial_preds,
        recursive_definitions=gdom.recursive_definitions,
    )
    for pred, decl in gdom.desc.fluents.items():
        gdom_atoms = gdom.fluent_atoms.get(pred, ())
        if "x_val" in decl.arg_sorts:
            out.fluent_atoms[pred] = _enumerate_atoms(out, pred, decl.arg_sorts)
        else:
            out.fluent_atoms[pred] = gdom_atoms
    own, exo = [], []
    for name, adecl in gdom.desc.actions.items():
        if "x_val" in adecl.arg_sorts:
            atoms = _enumerate_atoms(out, name, adecl.arg_sorts)
        else:
            atoms = tuple(
                a
                for a in (gdom.ground_actions + gdom.exo_ground_actions)
                if a.pred == name
            )
        (exo if adecl.exogenous else own).extend(atoms)
    out.ground_actions = tuple(own)
    out.exo_ground_actions = tuple(exo)
    return out


def _check_bindable(
    gdom: GroundedDomain,
    axiom_id: str,
    text: str,
    action: Optional[Atom],
    body: tuple[Literal, ...],
    head: Optional[Literal],
) -> None:
    """Verify evaluation can bind every variable when it is needed."""
    bound: set[str] = set()
    if action is not None:
        bound |= {v.name for v in _vars_of(action)}
    for lit in body:
        names = {v.name for v in _vars_of(lit.atom)}
        stage = _literal_stage(lit, gdom)
        if stage == 2 and not names <= bound:
            raise GroundingError(
                f"axiom {axiom_id} ({text}): cannot bind {sorted(names - bound)} "
                f"before evaluating {lit!r}"
            )
        bound |= names
    if head is not None:
        names = {v.name for v in _vars_of(head.atom)}
        if not names <= bound:
            raise GroundingError(
                f"axiom {axiom_id} ({text}): head variable(s) "
                f"{sorted(names - bound)} not bound by the body"
            )


# ---------------------------------------------------------------------------
# pattern matching / body solving
# ---------------------------------------------------------------------------


def match_atom(pattern: Atom, ground_atom: Atom, binding: dict) -> Optional[dict]:
    """Extend ``binding`` so pattern == ground_atom, or None."""
    if pattern.pred != ground_atom.pred or len(pattern.args) != len(ground_atom.args):
        return None
    out = binding
    copied = False
    for p, g in zip(pattern.args, ground_atom.args):
        if isinstance(p, Variable):
            bound = out.get(p)
            if bound is None:
                if not copied:
                    out = dict(out)
                    copied = True
                out[p] = g
            elif bound != g:
                return None
        elif p != g:
            return None
    return out


def _substituted_args(atom: Atom, binding: dict) -> tuple:
    return tuple(
        binding.get(a) if isinstance(a, Variable) else a for a in atom.args
    )


def solve(
    gdom: GroundedDomain,
    index: "dict[str, Iterable[Atom]]",
    body: tuple[Literal, ...],
    binding: dict,
) -> Iterator[dict]:
    """All extensions of ``binding`` under which the body holds.

    ``index`` maps fluent predicate names to the ground atoms currently
    true (any iterable collection); negated fluents are closed-world.
    Callers that mutate the index must materialize the results first.
    """
    if not body:
        yield binding
        return
    lit, rest = body[0], body[1:]
    pred = lit.atom.pred

    if pred in gdom.fluent_decls:
        if lit.positive:
            for atom in index.get(pred, ()):
                b2 = match_atom(lit.atom, atom, binding)
                if b2 is not None:
                    yield from solve(gdom, index, rest, b2)
        else:
            args = _substituted_args(lit.atom, binding)
            if any(a is None for a in args):
                raise GroundingError(
                    f"negated fluent {lit!r} evaluated with unbound arguments"
                )
            if Atom(pred, args) not in index.get(pred, ()):
                yield from solve(gdom, index, rest, binding)
        return

    if pred in gdom.sorts and len(lit.atom.args) == 1:
        arg = lit.atom.args[0]
        if isinstance(arg, Variable) and arg not in binding:
            if not lit.positive:
                raise GroundingError(f"negated sort atom {lit!r} with unbound argument")
            for v in gdom.sorts.get(pred, ()):
                b2 = dict(binding)
                b2[arg] = v
                yield from solve(gdom, index, rest, b2)
            return
        value = binding.get(arg) if isinstance(arg, Variable) else arg
        if gdom.in_sort(value, pred) == lit.positive:
            yield from solve(gdom, index, rest, binding)
        return

    static = gdom.statics.get(pred)
    if static is None:
        raise GroundingError(f"no relation for symbol {pred!r} in {lit!r}")
    args = _substituted_args(lit.atom, binding)
    if lit.positive and any(a is None for a in args):
        pattern = tuple(args)
        for row in static.expand(pattern):
            b2 = dict(binding)
            ok = True
            for slot, (a, v) in zip(lit.atom.args, zip(pattern, row)):
                if a is None and isinstance(slot, Variable):
                    if b2.get(slot, v) != v:
                        ok = False
                        break
                    b2[slot] = v
            if ok:
                yield from solve(gdom, index, rest, b2)
        return
    if any(a is None for a in args):
        raise GroundingError(f"negated static {lit!r} with unbound arguments")
    if static.contains(args) == lit.positive:
        yield from solve(gdom, index, rest, binding)
