"""Execution traces and why / why-not / why-belief question answering.

An episode trace records, per tick, the tick-start belief, the selected
goal, the plan, the executed action, and the provenance of every belief
change.  Queries over a trace are answered by reconstructing the chain
of reasons behind a decision or a belief:

* **why <action> in step i** — the goal conditions that selected the
  goal, the executability condition that ruled out acting on the goal
  directly (when one did), and the plan whose first step the action was.
* **why not <action> in step i** — if the action was inexecutable, the
  executability axiom that fired; if it was executable but not chosen,
  a one-step counterfactual: the action is simulated against the
  recorded predictions and the goal condition it violates or delays is
  reported.
* **why belief <literal> at step i** — the recorded provenance of the
  belief: the causal law or state constraint that established (or
  withdrew) it, the initial observation or initial default that assumed
  it, with inertia bridging the steps in between.

Every chain link is an axiom instance whose ground antecedents can be
re-checked against the stored snapshots; the rendered text is produced
from templates (shipped as a data file) filled only with material from
the chain.  Traces serialize to JSON Lines with sorted keys and no
timestamps, so identical runs give byte-identical files.
"""

from __future__ import annotations

import json
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence, Union

from fortdefense.env import GridConfig
from fortdefense.kr.beliefs import (
    Belief,
    Provenance,
    check_executable,
    progress,
)
from fortdefense.kr.goals import Goal, _attacker_index, pose_of
from fortdefense.kr.ground import (
    GroundedDomain,
    attacker_symbols,
    ground,
    match_atom,
    solve,
)
from fortdefense.kr.lang import Atom, Literal
from fortdefense.kr.plan import goal_holds, plan as search_plan
from fortdefense.loop import (
    EpisodeRecord,
    StepRecord,
    build_schedule,
    load_domain,
)

TRACE_FORMAT_VERSION = 1
TEMPLATE_RESOURCE = "explain_templates.txt"

GRAMMAR = (
    "why [not] <action>(<args>) in step <i>   with <action> one of "
    "move(x,y) | shoot(attacker) | rotate(d) | noop   |   "
    "why belief <literal> at step <i>"
)


class QueryParseError(ValueError):
    """An unparsable query; the message restates the grammar."""


class TraceQueryError(ValueError):
    """A well-formed query that the trace cannot answer."""


class DegenerateQueryError(TraceQueryError):
    """A why-not query about the action that *was* chosen."""


# ---------------------------------------------------------------------------
# queries, chain links, answers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    kind: str  # why_action | why_not_action | why_belief
    action: Optional[Atom]
    literal: Optional[Literal]
    step: int


@dataclass(frozen=True)
class AxiomInstance:
    """One link of an explanation chain.

    ``antecedents`` are ground literals that must hold in the belief
    snapshot at ``step`` (or, for counterfactual links, in the state
    reached by simulating ``counterfactual`` from that snapshot).
    """

    template: str
    axiom_id: str
    axiom_text: str
    step: int
    antecedents: tuple[Literal, ...]
    consequence: str
    slots: tuple[tuple[str, str], ...] = ()
    counterfactual: Optional[Atom] = None

    def to_dict(self) -> dict:
        return {
            "template": self.template,
            "axiom_id": self.axiom_id,
            "axiom_text": self.axiom_text,
            "step": self.step,
            "antecedents": [str(l) for l in self.antecedents],
            "consequence": self.consequence,
            "slots": dict(self.slots),
            "counterfactual": None
            if self.counterfactual is None
            else str(self.counterfactual),
        }


@dataclass(frozen=True)
class Answer:
    query: Query
    chain: tuple[AxiomInstance, ...]
    literals: tuple[Literal, ...]
    text: str

    def to_dict(self) -> dict:
        return {
            "kind": self.query.kind,
            "step": self.query.step,
            "target": str(self.query.action or self.query.literal),
            "text": self.text,
            "chain": [inst.to_dict() for inst in self.chain],
            "literals": [str(l) for l in self.literals],
        }


# ---------------------------------------------------------------------------
# templates
# ---------------------------------------------------------------------------

_TEMPLATES: Optional[dict[str, str]] = None


def load_templates() -> dict[str, str]:
    global _TEMPLATES
    if _TEMPLATES is None:
        text = (
            resources.files("fortdefense") / "data" / TEMPLATE_RESOURCE
        ).read_text()
        templates: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                continue
            templates[key.strip()] = value.strip()
        _TEMPLATES = templates
    return _TEMPLATES


def render_chain(kind: str, top_slots: dict[str, str], chain: Sequence[AxiomInstance]) -> str:
    """Fill the top-level template for a query kind with the chain's
    clauses; identical chains render identically."""
    templates = load_templates()
    clauses = "; ".join(
        templates[inst.template].format(**dict(inst.slots)) for inst in chain
    )
    return templates[kind].format(clauses=clauses, **top_slots)


# ---------------------------------------------------------------------------
# atom / literal string round-trip
# ---------------------------------------------------------------------------

_ATOM_RE = re.compile(r"^\s*([a-z_]\w*)\s*(?:\((.*)\))?\s*$")
_INT_RE = re.compile(r"^-?\d+$")


def parse_atom(text: str) -> Atom:
    m = _ATOM_RE.match(text)
    if not m:
        raise QueryParseError(f"cannot parse atom {text!r}")
    pred, argstr = m.group(1), m.group(2)
    args: tuple = ()
    if argstr and argstr.strip():
        parts = [p.strip() for p in argstr.split(",")]
        if any(not p for p in parts):
            raise QueryParseError(f"cannot parse atom {text!r}")
        args = tuple(int(p) if _INT_RE.match(p) else p for p in parts)
    return Atom(pred, args)


def parse_literal(text: str) -> Literal:
    text = text.strip()
    if text.startswith("-"):
        return Literal(parse_atom(text[1:]), False)
    if text.lower().startswith("not "):
        return Literal(parse_atom(text[4:]), False)
    return Literal(parse_atom(text), True)


# ---------------------------------------------------------------------------
# query parsing
# ---------------------------------------------------------------------------

_STEP_RE = re.compile(r"\s+(?:in|at)\s+step\s+(\d+)$")
_MOVE_RE = re.compile(r"^move(?:\s+to)?\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)$")
_SHOOT_RE = re.compile(r"^shoot\s*\(?\s*([a-z_]\w*)\s*\)?$")
_ROTATE_RE = re.compile(r"^rotate(?:\s+to)?\s*\(?\s*([nesw])\s*\)?$")
_NOOP_RE = re.compile(r"^noop\s*(?:\(\s*\))?$")


def parse_query(text: str) -> Query:
    """Parse a query in the documented grammar (case-insensitive, with
    the surface forms "why did you ..." and "why did you not ..."
    tolerated)."""
    t = text.strip().lower().rstrip("?.! ").strip()
    if not t.startswith("why"):
        raise QueryParseError(f"cannot parse {text!r}; grammar: {GRAMMAR}")
    rest = t[3:].strip()
    m = _STEP_RE.search(rest)
    if not m:
        raise QueryParseError(
            f"missing step index in {text!r}; grammar: {GRAMMAR}"
        )
    step = int(m.group(1))
    rest = rest[: m.start()].strip()
    if rest.startswith("belief "):
        return Query("why_belief", None, parse_literal(rest[7:]), step)
    negated = False
    if rest.startswith("didn't you "):
        negated, rest = True, rest[11:]
    elif rest.startswith("did you not "):
        negated, rest = True, rest[12:]
    elif rest.startswith("did you "):
        rest = rest[8:]
    if rest.startswith("not "):
        negated, rest = True, rest[4:]
    rest = rest.strip()
    for pattern, build in (
        (_MOVE_RE, lambda m: Atom("move", (int(m.group(1)), int(m.group(2))))),
        (_SHOOT_RE, lambda m: Atom("shoot", (m.group(1),))),
        (_ROTATE_RE, lambda m: Atom("rotate", (m.group(1),))),
        (_NOOP_RE, lambda m: Atom("noop", ())),
    ):
        m = pattern.match(rest)
        if m:
            kind = "why_not_action" if negated else "why_action"
            return Query(kind, build(m), None, step)
    raise QueryParseError(f"cannot parse action in {text!r}; grammar: {GRAMMAR}")


# ---------------------------------------------------------------------------
# trace container and JSONL serialization
# ---------------------------------------------------------------------------

_GDOM_CACHE: dict[GridConfig, GroundedDomain] = {}


def _gdom_for(config: GridConfig) -> GroundedDomain:
    if config not in _GDOM_CACHE:
        _GDOM_CACHE[config] = ground(load_domain(), config)
    return _GDOM_CACHE[config]


@dataclass
class EpisodeTrace:
    """An immutable, queryable episode trace."""

    config: GridConfig
    seed: int
    policy: str
    horizon: int
    completion_applied: tuple[str, ...]
    completion_retracted: tuple[str, ...]
    steps: list[StepRecord]
    final_belief: Optional[Belief]
    outcome: str
    n_steps: int
    guards_win: bool
    gdom: GroundedDomain = field(repr=False, default=None)

    def __post_init__(self):
        if self.gdom is None:
            self.gdom = _gdom_for(self.config)

    @classmethod
    def from_record(cls, record: EpisodeRecord, config: GridConfig) -> "EpisodeTrace":
        return cls(
            config=config,
            seed=record.seed,
            policy=record.policy,
            horizon=record.horizon,
            completion_applied=record.completion_applied,
            completion_retracted=record.completion_retracted,
            steps=list(record.steps),
            final_belief=record.final_belief,
            outcome=record.outcome,
            n_steps=record.n_steps,
            guards_win=record.guards_win,
        )

    @property
    def last_step(self) -> int:
        return self.steps[-1].step if self.steps else 0

    def step(self, i: int) -> StepRecord:
        for rec in self.steps:
            if rec.step == i:
                return rec
        raise TraceQueryError(
            f"step {i} is not in the trace (decision steps 1..{self.last_step})"
        )

    def belief_at(self, i: int) -> Belief:
        for rec in self.steps:
            if rec.step == i:
                return rec.belief
        if i == self.last_step + 1 and self.final_belief is not None:
            return self.final_belief
        raise TraceQueryError(
            f"no belief snapshot for step {i} (steps 1..{self.last_step})"
        )


_HOW_ORDER = {"direct": 0, "derived": 1, "retracted": 2, "inherited": 3}


def _provenance_dict(p: Provenance) -> dict:
    return {
        "atom": str(p.atom),
        "how": p.how,
        "axiom_id": p.axiom_id,
        "axiom_text": p.axiom_text,
        "action": "" if p.action is None else str(p.action),
        "support": [str(l) for l in p.support],
    }


def _provenance_from_dict(d: dict) -> Provenance:
    return Provenance(
        atom=parse_atom(d["atom"]),
        how=d["how"],
        axiom_id=d["axiom_id"],
        axiom_text=d["axiom_text"],
        action=parse_atom(d["action"]) if d["action"] else None,
        support=tuple(parse_literal(s) for s in d["support"]),
    )


def _config_dict(config: GridConfig) -> dict:
    return {
        "width": config.width,
        "height": config.height,
        "fort_cells": sorted([x, y] for (x, y) in config.fort_cells),
        "n_guards": config.n_guards,
        "n_attackers": config.n_attackers,
        "shoot_range": config.shoot_range,
        "shoot_arc_deg": config.shoot_arc_deg,
        "max_steps": config.max_steps,
    }


def _config_from_dict(d: dict) -> GridConfig:
    return GridConfig(
        width=d["width"],
        height=d["height"],
        fort_cells=frozenset((x, y) for x, y in d["fort_cells"]),
        n_guards=d["n_guards"],
        n_attackers=d["n_attackers"],
        shoot_range=d["shoot_range"],
        shoot_arc_deg=d["shoot_arc_deg"],
        max_steps=d["max_steps"],
    )


def _step_dict(rec: StepRecord) -> dict:
    prov = sorted(
        (_provenance_dict(p) for p in rec.provenance),
        key=lambda d: (
            _HOW_ORDER.get(d["how"], 9),
            d["atom"],
            d["axiom_id"],
            d["action"],
        ),
    )
    return {
        "type": "step",
        "step": rec.step,
        "belief": sorted(str(a) for a in rec.belief.atoms),
        "goal": {
            "kind": rec.goal.kind,
            "target": rec.goal.target,
            "literals": [str(l) for l in rec.goal.literals],
        },
        "predictions": {k: int(v) for k, v in rec.predictions.items()},
        "predicted_next": {k: list(v) for k, v in rec.predicted_next.items()},
        "fine_regions": list(rec.fine_regions),
        "replanned": rec.replanned,
        "plan_success": rec.plan_success,
        "plan_expanded": rec.plan_expanded,
        "plan": [str(a) for a in rec.plan_actions],
        "chosen": None if rec.chosen is None else str(rec.chosen),
        "fallback": rec.fallback,
        "executed": [str(a) for a in rec.executed],
        "provenance": prov,
        "reconciled": rec.reconciled,
    }


def _step_from_dict(d: dict) -> StepRecord:
    return StepRecord(
        step=d["step"],
        belief=Belief(parse_atom(s) for s in d["belief"]),
        goal=Goal(
            d["goal"]["kind"],
            d["goal"]["target"],
            tuple(parse_literal(s) for s in d["goal"]["literals"]),
        ),
        predictions={k: int(v) for k, v in d["predictions"].items()},
        predicted_next={
            k: (v[0], v[1]) for k, v in d["predicted_next"].items()
        },
        fine_regions=tuple(d["fine_regions"]),
        replanned=d["replanned"],
        plan_success=d["plan_success"],
        plan_expanded=d["plan_expanded"],
        plan_actions=tuple(parse_atom(s) for s in d["plan"]),
        chosen=None if d["chosen"] is None else parse_atom(d["chosen"]),
        fallback=d["fallback"],
        executed=tuple(parse_atom(s) for s in d["executed"]),
        provenance=tuple(_provenance_from_dict(p) for p in d["provenance"]),
        reconciled=d["reconciled"],
    )


def save_traces(
    records: Sequence[EpisodeRecord], config: GridConfig, path
) -> int:
    """Write episode records as JSON Lines (sorted keys, no timestamps);
    identical inputs give byte-identical files.  Returns the episode
    count."""

    def dump(obj) -> str:
        return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"

    with open(path, "w") as f:
        for rec in records:
            f.write(
                dump(
                    {
                        "type": "episode",
                        "version": TRACE_FORMAT_VERSION,
                        "seed": rec.seed,
                        "policy": rec.policy,
                        "horizon": rec.horizon,
                        "config": _config_dict(config),
                        "completion_applied": list(rec.completion_applied),
                        "completion_retracted": list(rec.completion_retracted),
                        "outcome": rec.outcome,
                        "n_steps": rec.n_steps,
                        "guards_win": rec.guards_win,
                    }
                )
            )
            for s in rec.steps:
                f.write(dump(_step_dict(s)))
            f.write(
                dump(
                    {
                        "type": "final",
                        "belief": []
                        if rec.final_belief is None
                        else sorted(str(a) for a in rec.final_belief.atoms),
                    }
                )
            )
    return len(records)


def load_traces(path) -> list[EpisodeTrace]:
    """Read a JSONL trace file back into queryable traces."""
    traces: list[EpisodeTrace] = []
    header: Optional[dict] = None
    steps: list[StepRecord] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if d["type"] == "episode":
                if d.get("version") != TRACE_FORMAT_VERSION:
                    raise ValueError(
                        f"unsupported trace format version {d.get('version')}"
                    )
                header = d
                steps = []
            elif d["type"] == "step":
                steps.append(_step_from_dict(d))
            elif d["type"] == "final":
                if header is None:
                    raise ValueError("trace file has a final line before a header")
                config = _config_from_dict(header["config"])
                traces.append(
                    EpisodeTrace(
                        config=config,
                        seed=header["seed"],
                        policy=header["policy"],
                        horizon=header["horizon"],
                        completion_applied=tuple(header["completion_applied"]),
                        completion_retracted=tuple(header["completion_retracted"]),
                        steps=steps,
                        final_belief=Belief(parse_atom(s) for s in d["belief"])
                        if d["belief"]
                        else None,
                        outcome=header["outcome"],
                        n_steps=header["n_steps"],
                        guards_win=header["guards_win"],
                    )
                )
                header = None
    return traces


# ---------------------------------------------------------------------------
# chain construction
# ---------------------------------------------------------------------------


def _cell(x, y) -> str:
    return f"({x}, {y})"


def _fmt(value: float) -> str:
    return f"{value:.3f}".rstrip("0").rstrip(".")


def _with_agent(action: Atom, ah: str) -> Atom:
    """Insert the controlled guard as the agent argument when absent."""
    if action.pred == "noop":
        return Atom("noop", (ah,))
    if action.args and action.args[0] == ah:
        return action
    return Atom(action.pred, (ah,) + action.args)


def _nearest_attacker(belief: Belief, gdom: GroundedDomain):
    """The living attacker nearest the controlled guard (ties by index)."""
    pose = pose_of(belief, gdom.ah_symbol)
    if pose is None:
        return None
    best = None
    for sym in attacker_symbols(gdom.config):
        if Atom("shot", (sym,)) in belief.atoms:
            continue
        tpose = pose_of(belief, sym)
        if tpose is None:
            continue
        d = math.hypot(tpose[0] - pose[0], tpose[1] - pose[1])
        key = (d, _attacker_index(sym), sym, tpose)
        if best is None or key[:2] < best[:2]:
            best = key
    return best  # (distance, index, symbol, pose) or None


def _goal_instance(trace: EpisodeTrace, rec: StepRecord) -> AxiomInstance:
    gdom = trace.gdom
    config = trace.config
    goal = rec.goal
    belief = rec.belief
    ah = gdom.ah_symbol
    pose = pose_of(belief, ah)
    if goal.kind == "shoot_target" and goal.target is not None and pose is not None:
        tpose = pose_of(belief, goal.target)
        ax, ay, _ = pose
        tx, ty, _ = tpose
        reach = config.shoot_range + 3.0
        d_now = math.hypot(tx - ax, ty - ay)
        antecedents = (
            Literal(Atom("in", (ah, ax, ay)), True),
            Literal(Atom("in", (goal.target, tx, ty)), True),
            Literal(Atom("shot", (goal.target,)), False),
        )
        if d_now <= reach + 1e-9:
            slots = {
                "target": goal.target,
                "target_cell": _cell(tx, ty),
                "own_cell": _cell(ax, ay),
                "distance": _fmt(d_now),
                "reach": _fmt(reach),
            }
            template = "clause_goal_shoot"
        else:
            px, py = rec.predicted_next.get(goal.target, (tx, ty))
            slots = {
                "target": goal.target,
                "predicted_cell": _cell(px, py),
                "own_cell": _cell(ax, ay),
                "distance": _fmt(math.hypot(px - ax, py - ay)),
                "reach": _fmt(reach),
            }
            template = "clause_goal_shoot_predicted"
        return AxiomInstance(
            template=template,
            axiom_id="",
            axiom_text="goal priority: shoot an attacker within pursuit reach",
            step=rec.step,
            antecedents=antecedents,
            consequence=f"goal shoot_target({goal.target})",
            slots=tuple(sorted(slots.items())),
        )
    if goal.kind == "occupy_region" and goal.target is not None:
        antecedents = []
        from fortdefense.kr.ground import guard_symbols

        for sym in guard_symbols(config):
            if Atom("shot", (sym,)) in belief.atoms:
                antecedents.append(Literal(Atom("shot", (sym,)), True))
            else:
                antecedents.append(
                    Literal(Atom("agent_in", (sym, goal.target)), False)
                )
        nearest = _nearest_attacker(belief, gdom)
        if nearest is not None:
            sym, tpose = nearest[2], nearest[3]
            antecedents.append(Literal(Atom("in", (sym, tpose[0], tpose[1])), True))
            antecedents.append(Literal(Atom("shot", (sym,)), False))
        slots = {"region": goal.target}
        return AxiomInstance(
            template="clause_goal_occupy",
            axiom_id="",
            axiom_text="goal priority: occupy an unguarded fort-adjacent region",
            step=rec.step,
            antecedents=tuple(antecedents),
            consequence=f"goal occupy_region({goal.target})",
            slots=tuple(sorted(slots.items())),
        )
    # hold_position
    nearest = _nearest_attacker(belief, gdom)
    if goal.literals and nearest is not None and pose is not None:
        facing = goal.literals[0].atom.args[1]
        sym, tpose = nearest[2], nearest[3]
        antecedents = (
            Literal(Atom("in", (ah, pose[0], pose[1])), True),
            Literal(Atom("in", (sym, tpose[0], tpose[1])), True),
            Literal(Atom("shot", (sym,)), False),
        )
        slots = {
            "facing": str(facing),
            "target": sym,
            "target_cell": _cell(tpose[0], tpose[1]),
        }
        return AxiomInstance(
            template="clause_goal_hold",
            axiom_id="",
            axiom_text="goal priority: hold position facing the nearest attacker",
            step=rec.step,
            antecedents=antecedents,
            consequence="goal hold_position",
            slots=tuple(sorted(slots.items())),
        )
    antecedents = tuple(
        Literal(Atom("shot", (sym,)), True)
        for sym in attacker_symbols(config)
        if Atom("shot", (sym,)) in belief.atoms
    )
    return AxiomInstance(
        template="clause_goal_idle",
        axiom_id="",
        axiom_text="goal priority: hold position",
        step=rec.step,
        antecedents=antecedents,
        consequence="goal hold_position",
        slots=(),
    )


def _blocked_instance(
    trace: EpisodeTrace,
    step: int,
    action: Atom,
    belief: Belief,
    blocker,
    *,
    template_prefix: str = "clause_blocked",
    counterfactual: Optional[Atom] = None,
) -> AxiomInstance:
    """An executability-axiom instance from a check_executable blocker."""
    rule, binding = blocker
    antecedents = tuple(lit.substitute(binding) for lit in rule.body)
    slots: dict[str, str] = {
        "action": str(action),
        "axiom": f"{rule.axiom_id} {rule.text}",
        "literals": "; ".join(str(l) for l in antecedents),
    }
    template = template_prefix
    sight = next(
        (
            l
            for l in antecedents
            if not l.positive and l.atom.pred == "in_sight"
        ),
        None,
    )
    if sight is not None:
        x1, y1, facing, x2, y2 = sight.atom.args
        distance = math.hypot(x2 - x1, y2 - y1)
        slots.update(
            {
                "target": str(action.args[-1]),
                "target_cell": _cell(x2, y2),
                "own_cell": _cell(x1, y1),
                "facing": str(facing),
                "distance": _fmt(distance),
                "range": _fmt(trace.config.shoot_range),
            }
        )
        template = template_prefix + "_range"
    if counterfactual is not None:
        slots["enable"] = str(action)
    return AxiomInstance(
        template=template,
        axiom_id=rule.axiom_id,
        axiom_text=rule.text,
        step=step,
        antecedents=antecedents,
        consequence=f"{action} not executable",
        slots=tuple(sorted(slots.items())),
        counterfactual=counterfactual,
    )


def _describe_target(atom: Atom) -> str:
    if atom.pred == "move":
        return _cell(atom.args[1], atom.args[2])
    if atom.pred == "rotate":
        return f"facing {atom.args[1]}"
    if atom.pred == "shoot":
        return f"shooting {atom.args[1]}"
    return "holding position"


def _plan_instance(rec: StepRecord) -> AxiomInstance:
    plan_strs = ", ".join(str(a) for a in rec.plan_actions)
    if len(rec.plan_actions) > 1:
        template = "clause_plan_subgoal"
        slots = {
            "plan": plan_strs,
            "action": str(rec.chosen),
            "subgoal": _describe_target(rec.plan_actions[1]),
        }
    else:
        template = "clause_plan"
        slots = {"plan": plan_strs, "action": str(rec.chosen)}
    return AxiomInstance(
        template=template,
        axiom_id="",
        axiom_text="minimum-length plan for the selected goal",
        step=rec.step,
        antecedents=(),
        consequence=f"plan [{plan_strs}]",
        slots=tuple(sorted(slots.items())),
    )


def _horizon_instance(trace: EpisodeTrace, rec: StepRecord) -> AxiomInstance:
    fallback = (
        "rotating toward the nearest attacker"
        if rec.fallback == "rotate"
        else "holding position"
    )
    slots = {"horizon": str(trace.horizon), "fallback": fallback}
    return AxiomInstance(
        template="clause_horizon",
        axiom_id="",
        axiom_text="planning horizon exhausted without a plan",
        step=rec.step,
        antecedents=(),
        consequence="fallback action",
        slots=tuple(sorted(slots.items())),
    )


def _goal_satisfied_instance(rec: StepRecord) -> AxiomInstance:
    lits = "; ".join(str(l) for l in rec.goal.literals)
    return AxiomInstance(
        template="clause_goal_satisfied",
        axiom_id="",
        axiom_text="the selected goal already holds",
        step=rec.step,
        antecedents=tuple(rec.goal.literals),
        consequence="goal satisfied",
        slots=(("literals", lits),),
    )


def _chain_literals(chain: Iterable[AxiomInstance]) -> tuple[Literal, ...]:
    out: list[Literal] = []
    seen = set()
    for inst in chain:
        for lit in inst.antecedents:
            if lit not in seen:
                seen.add(lit)
                out.append(lit)
    return tuple(out)


# ---------------------------------------------------------------------------
# why <action>
# ---------------------------------------------------------------------------


def why_action_chain(
    trace: EpisodeTrace, step: int, action: Atom
) -> tuple[AxiomInstance, ...]:
    rec = trace.step(step)
    gdom = trace.gdom
    ah = gdom.ah_symbol
    action = _with_agent(action, ah)
    if rec.chosen is None:
        raise TraceQueryError(
            f"no action was executed in step {step} (the controlled guard was down)"
        )
    if action != rec.chosen:
        raise TraceQueryError(
            f"the action executed in step {step} was {rec.chosen}, not {action};"
            f" ask 'why not ...' about alternatives"
        )
    chain: list[AxiomInstance] = [_goal_instance(trace, rec)]
    goal = rec.goal
    if rec.fallback and not rec.plan_actions:
        chain.append(_horizon_instance(trace, rec))
    elif rec.chosen.pred == "noop" and not rec.plan_actions:
        if goal.literals:
            chain.append(_goal_satisfied_instance(rec))
    else:
        if goal.kind == "shoot_target" and rec.chosen.pred != "shoot":
            enable = Atom("shoot", (ah, goal.target))
            ok, blocker = check_executable(rec.belief, enable, gdom)
            if not ok and blocker is not None:
                chain.append(
                    _blocked_instance(trace, step, enable, rec.belief, blocker)
                )
        chain.append(_plan_instance(rec))
    return tuple(chain)


def answer_why(trace: EpisodeTrace, action: Atom, step: int) -> Answer:
    chain = why_action_chain(trace, step, action)
    rec = trace.step(step)
    query = Query("why_action", action, None, step)
    text = render_chain(
        "why_action", {"step": str(step), "action": str(rec.chosen)}, chain
    )
    return Answer(query, chain, _chain_literals(chain), text)


# ---------------------------------------------------------------------------
# why not <action>
# ---------------------------------------------------------------------------


def _counterfactual_child(trace: EpisodeTrace, step: int, action: Atom) -> Belief:
    """The belief reached by executing ``action`` (instead of the chosen
    action) against the recorded predictions for that step."""
    rec = trace.step(step)
    gdom = trace.gdom
    exo = build_schedule(rec.belief, gdom, rec.predictions, 1)
    atoms = (action,) + (exo[0] if exo else ())
    return progress(
        rec.belief, atoms, gdom, on_blocked="drop", checked=frozenset((action,))
    )


def why_not_chain(
    trace: EpisodeTrace, step: int, action: Atom
) -> tuple[tuple[AxiomInstance, ...], bool]:
    """The chain and whether the action was executable at all."""
    rec = trace.step(step)
    gdom = trace.gdom
    ah = gdom.ah_symbol
    action = _with_agent(action, ah)
    if rec.chosen is not None and action == rec.chosen:
        raise DegenerateQueryError(
            f"{action} is exactly the action chosen in step {step};"
            f" ask 'why {action} in step {step}'"
        )
    universe = trace_action_universe(trace)
    if action not in universe:
        raise TraceQueryError(f"{action} is not a well-formed action in this game")
    ok, blocker = check_executable(rec.belief, action, gdom)
    if not ok:
        return (
            (_blocked_instance(trace, step, action, rec.belief, blocker),),
            False,
        )
    # legal but not chosen: one-step counterfactual against the recorded
    # predictions, then a goal-conflict check
    goal = rec.goal
    chain: list[AxiomInstance] = [_goal_instance(trace, rec)]
    child = _counterfactual_child(trace, step, action)
    if goal.kind == "shoot_target" and goal.target is not None:
        enable = Atom("shoot", (ah, goal.target))
        ok2, blocker2 = check_executable(child, enable, gdom)
        if not ok2 and blocker2 is not None:
            chain.append(
                _blocked_instance(
                    trace,
                    step,
                    enable,
                    child,
                    blocker2,
                    template_prefix="clause_counterfactual",
                    counterfactual=action,
                )
            )
    remaining = len(rec.plan_actions)
    if goal_holds(child, goal):
        after = 0
    else:
        replan = search_plan(
            child,
            goal,
            gdom,
            horizon=trace.horizon,
            schedule=build_schedule(child, gdom, rec.predictions, trace.horizon),
        )
        after = len(replan.actions) if replan.success else None
    if after is None:
        chain.append(
            AxiomInstance(
                template="clause_counterfactual_unreachable",
                axiom_id="",
                axiom_text="no plan within the horizon after the counterfactual",
                step=step,
                antecedents=(),
                consequence="goal unreachable after the action",
                slots=(
                    ("action", str(action)),
                    ("horizon", str(trace.horizon)),
                ),
                counterfactual=action,
            )
        )
    else:
        delay = (1 + after) - remaining
        if delay > 0:
            chain.append(
                AxiomInstance(
                    template="clause_delay",
                    axiom_id="",
                    axiom_text="the counterfactual delays the goal",
                    step=step,
                    antecedents=(),
                    consequence=f"delays the goal by {delay} step(s)",
                    slots=(
                        ("action", str(action)),
                        ("delay", str(delay)),
                        ("later", str(1 + after)),
                        ("sooner", str(remaining)),
                    ),
                    counterfactual=action,
                )
            )
        else:
            chain.append(
                AxiomInstance(
                    template="clause_ordering",
                    axiom_id="",
                    axiom_text="equal-length alternatives resolve by canonical order",
                    step=step,
                    antecedents=(),
                    consequence="chosen action preferred by canonical order",
                    slots=(
                        ("action", str(action)),
                        ("chosen", str(rec.chosen)),
                    ),
                )
            )
    return tuple(chain), True


_UNIVERSE_CACHE: dict[int, frozenset] = {}


def trace_action_universe(trace: EpisodeTrace) -> frozenset:
    key = id(trace.gdom)
    if key not in _UNIVERSE_CACHE:
        _UNIVERSE_CACHE[key] = frozenset(trace.gdom.ground_actions)
    return _UNIVERSE_CACHE[key]


def answer_why_not(trace: EpisodeTrace, action: Atom, step: int) -> Answer:
    chain, was_legal = why_not_chain(trace, step, action)
    rec = trace.step(step)
    full = _with_agent(action, trace.gdom.ah_symbol)
    query = Query("why_not_action", action, None, step)
    if was_legal:
        text = render_chain(
            "why_not_legal",
            {
                "step": str(step),
                "action": str(full),
                "chosen": str(rec.chosen),
            },
            chain,
        )
    else:
        text = render_chain(
            "why_not_illegal", {"step": str(step), "action": str(full)}, chain
        )
    return Answer(query, chain, _chain_literals(chain), text)


# ---------------------------------------------------------------------------
# why belief <literal>
# ---------------------------------------------------------------------------


def _definition_instance(
    trace: EpisodeTrace, step: int, atom: Atom
) -> Optional[AxiomInstance]:
    """Re-derive a defined atom from its defining constraint at ``step``."""
    gdom = trace.gdom
    belief = trace.belief_at(step)
    for rule in gdom.definitions:
        binding = match_atom(rule.head.atom, atom, {})
        if binding is None:
            continue
        for solution in solve(gdom, belief.index, rule.body, binding):
            antecedents = tuple(lit.substitute(solution) for lit in rule.body)
            return AxiomInstance(
                template="clause_definition",
                axiom_id=rule.axiom_id,
                axiom_text=rule.text,
                step=step,
                antecedents=antecedents,
                consequence=str(atom),
                slots=(
                    ("axiom", f"{rule.axiom_id} {rule.text}"),
                    ("literals", "; ".join(str(l) for l in antecedents)),
                ),
            )
    return None


def _default_instance(trace: EpisodeTrace, atom: Atom) -> Optional[AxiomInstance]:
    if str(atom) not in trace.completion_applied:
        return None
    gdom = trace.gdom
    for rule in gdom.defaults:
        binding = match_atom(rule.head.atom, atom, {})
        if binding is None:
            continue
        antecedents = tuple(lit.substitute(binding) for lit in rule.body)
        return AxiomInstance(
            template="clause_default",
            axiom_id=rule.axiom_id,
            axiom_text=rule.text,
            step=1,
            antecedents=antecedents,
            consequence=str(atom),
            slots=(
                ("axiom_text", rule.text),
                ("literals", "; ".join(str(l) for l in antecedents)),
            ),
        )
    return None


def why_belief_chain(
    trace: EpisodeTrace, step: int, literal: Literal
) -> tuple[AxiomInstance, ...]:
    belief = trace.belief_at(step)
    gdom = trace.gdom
    if not belief.holds(literal):
        raise TraceQueryError(
            f"at step {step} the belief was {literal.negate()}, not {literal}"
        )
    atom = literal.atom
    if literal.positive and gdom.is_defined(atom.pred):
        inst = _definition_instance(trace, step, atom)
        if inst is not None:
            return (inst,)
        raise TraceQueryError(f"no defining axiom derives {atom}")
    # scan transitions backwards for the change that set the literal
    for rec in reversed([r for r in trace.steps if r.step < step]):
        for p in rec.provenance:
            if p.atom != atom:
                continue
            if p.how == "retracted" and not literal.positive:
                inst = AxiomInstance(
                    template="clause_window",
                    axiom_id=p.axiom_id,
                    axiom_text=p.axiom_text,
                    step=rec.step + 1,
                    antecedents=p.support,
                    consequence=f"-{atom}",
                    slots=(
                        ("atom", str(atom)),
                        ("axiom", f"{p.axiom_id} {p.axiom_text}"),
                        ("literals", "; ".join(str(l) for l in p.support)),
                        ("prev_step", str(rec.step)),
                    ),
                )
                return _with_inertia(inst, rec.step + 1, step, literal)
            if p.how == "direct" and literal.positive:
                inst = AxiomInstance(
                    template="clause_causal",
                    axiom_id=p.axiom_id,
                    axiom_text=p.axiom_text,
                    step=rec.step,
                    antecedents=p.support,
                    consequence=str(atom),
                    slots=(
                        ("action", str(p.action)),
                        ("axiom", f"{p.axiom_id} {p.axiom_text}"),
                        ("literals", "; ".join(str(l) for l in p.support) or "no conditions"),
                        ("prev_step", str(rec.step)),
                    ),
                )
                return _with_inertia(inst, rec.step + 1, step, literal)
            if p.how == "derived" and literal.positive:
                inst = AxiomInstance(
                    template="clause_definition",
                    axiom_id=p.axiom_id,
                    axiom_text=p.axiom_text,
                    step=rec.step + 1,
                    antecedents=p.support,
                    consequence=str(atom),
                    slots=(
                        ("axiom", f"{p.axiom_id} {p.axiom_text}"),
                        ("literals", "; ".join(str(l) for l in p.support)),
                    ),
                )
                return _with_inertia(inst, rec.step + 1, step, literal)
    # unchanged since the initial state
    if literal.positive:
        inst = _default_instance(trace, atom)
        if inst is not None:
            return _with_inertia(inst, 1, step, literal)
        inst = AxiomInstance(
            template="clause_observation",
            axiom_id="",
            axiom_text="initial observation",
            step=1,
            antecedents=(literal,),
            consequence=str(atom),
            slots=(),
        )
        return _with_inertia(inst, 1, step, literal)
    inst = AxiomInstance(
        template="clause_observation_negative",
        axiom_id="",
        axiom_text="closed-world assumption over recorded facts",
        step=step,
        antecedents=(literal,),
        consequence=f"-{atom}",
        slots=(),
    )
    return (inst,)


def _with_inertia(
    inst: AxiomInstance, since: int, step: int, literal: Literal
) -> tuple[AxiomInstance, ...]:
    if since >= step:
        return (inst,)
    inertia = AxiomInstance(
        template="clause_inertia",
        axiom_id="",
        axiom_text="inertia: fluents persist unless changed",
        step=step,
        antecedents=(literal,),
        consequence=str(literal),
        slots=(("step", str(step)),),
    )
    return (inst, inertia)


def answer_why_belief(trace: EpisodeTrace, literal: Literal, step: int) -> Answer:
    chain = why_belief_chain(trace, step, literal)
    query = Query("why_belief", None, literal, step)
    kind = "why_belief" if literal.positive else "why_belief_negative"
    text = render_chain(kind, {"step": str(step), "literal": str(literal)}, chain)
    return Answer(query, chain, _chain_literals(chain), text)


# ---------------------------------------------------------------------------
# dispatch, re-checking, REPL, batch
# ---------------------------------------------------------------------------


def active_axioms(
    trace: EpisodeTrace, step: int, target: Union[Atom, Literal]
) -> tuple[AxiomInstance, ...]:
    """The support chain for an executed action or a believed literal."""
    if isinstance(target, Literal):
        return why_belief_chain(trace, step, target)
    return why_action_chain(trace, step, target)


def answer_query(trace: EpisodeTrace, query: Union[Query, str]) -> Answer:
    if isinstance(query, str):
        query = parse_query(query)
    if query.kind == "why_action":
        return answer_why(trace, query.action, query.step)
    if query.kind == "why_not_action":
        return answer_why_not(trace, query.action, query.step)
    return answer_why_belief(trace, query.literal, query.step)


def recheck_instance(trace: EpisodeTrace, inst: AxiomInstance) -> bool:
    """Verify every antecedent of a chain link against the snapshot it
    refers to (re-simulating one step for counterfactual links)."""
    gdom = trace.gdom
    if inst.counterfactual is not None:
        belief = _counterfactual_child(trace, inst.step, inst.counterfactual)
    else:
        belief = trace.belief_at(inst.step)
    for lit in inst.antecedents:
        pred = lit.atom.pred
        if pred in gdom.statics:
            if gdom.statics[pred].contains(lit.atom.args) != lit.positive:
                return False
        elif pred in gdom.sorts:
            value = lit.atom.args[0] if lit.atom.args else None
            if gdom.in_sort(value, pred) != lit.positive:
                return False
        elif not belief.holds(lit):
            return False
    return True


def verify_answer(trace: EpisodeTrace, answer: Answer) -> bool:
    """The soundness re-check: every cited axiom instance must have all
    its antecedents satisfied in the stored (or re-simulated) snapshot."""
    return all(recheck_instance(trace, inst) for inst in answer.chain)


def run_batch(trace: EpisodeTrace, lines: Iterable[str]) -> list[dict]:
    """Answer queries from an iterable of lines; errors become records
    with an "error" key instead of aborting the batch."""
    out: list[dict] = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            answer = answer_query(trace, line)
            out.append({"query": line, **answer.to_dict()})
        except (QueryParseError, TraceQueryError) as exc:
            out.append({"query": line, "error": str(exc)})
    return out


def write_answers(answers: Sequence[dict], path) -> None:
    with open(path, "w") as f:
        for a in answers:
            f.write(json.dumps(a, sort_keys=True, separators=(",", ":")) + "\n")


def repl(trace: EpisodeTrace, inp=None, out=None) -> None:
    """Interactive question loop over one episode trace."""
    inp = inp if inp is not None else sys.stdin
    out = out if out is not None else sys.stdout
    print(
        f"episode seed={trace.seed} policy={trace.policy} outcome={trace.outcome}"
        f" decision steps 1..{trace.last_step}",
        file=out,
    )
    print(f"grammar: {GRAMMAR}  (quit to exit)", file=out)
    while True:
        print("explain> ", end="", file=out, flush=True)
        line = inp.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line.lower() in {"quit", "exit", "q"}:
            break
        try:
            answer = answer_query(trace, line)
            print(answer.text, file=out)
        except (QueryParseError, TraceQueryError) as exc:
            print(f"error: {exc}", file=out)
