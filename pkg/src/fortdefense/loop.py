"""Control loop for the knowledge-driven ad hoc guard, and episode runner.

Each tick the controller:

1. predicts every other live agent's next action kind with its currently
   assigned behavior model,
2. selects a goal from the belief (and the predicted next positions),
3. restricts the grounded domain to the relevant fine-grained regions,
4. plans with breadth-first search under a schedule of predicted
   exogenous actions, reusing the previous plan while the goal is
   unchanged and its next step stays executable, and
5. executes the first planned action (falling back to facing the nearest
   attacker, then to a noop, when no plan exists).

Beliefs advance by progression through the actions that actually
happened.  Cancelled moves simply do not happen (no atom), rotations are
read off the post-state, and shots contribute an atom only when they
hit.  The symbolic transition cannot express every outcome the simulator
allows (e.g. chains of moves through just-vacated cells), so after each
progression the belief is reconciled against the observation: on any
mismatch it is rebuilt from the observed poses, carrying over the
unobservable inertial atoms.

Model bookkeeping runs alongside: agreement trackers are updated for
every library model against each agent's observed action, the
keep/switch/flag rule reassigns models per agent, and a flagged agent
triggers an incremental refit from that agent's example buffer once
enough examples have accumulated.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence

from fortdefense.env import (
    Action,
    ActionKind,
    Direction,
    EpisodeResult,
    Event,
    GridConfig,
    MOVE_KINDS,
    ShotEvent,
    WorldState,
    reset,
    step,
    terminal,
)
from fortdefense.features import extract
from fortdefense.kr.beliefs import (
    Belief,
    InconsistencyError,
    Provenance,
    check_executable,
    close_defined,
    complete_initial,
    observe_world,
    progress,
)
from fortdefense.kr.goals import (
    Goal,
    _attacker_index,
    _nearest_facing,
    compute_relevance,
    corridor_regions,
    living_attackers,
    pose_of,
    region_cells,
    select_goal,
)
from fortdefense.kr.ground import (
    SYMBOL_OF_DIR,
    GroundedDomain,
    agent_symbol,
    attacker_symbols,
    ground,
    guard_symbols,
    restrict,
    symbol_agent_id,
)
from fortdefense.kr.lang import Atom, DomainDescription, parse_domain
from fortdefense.kr.plan import goal_holds, plan as search_plan
from fortdefense.models import (
    BUFFER_SIZE,
    RESERVOIR_SIZE,
    THETA_DEFAULT,
    WINDOW_DEFAULT,
    ModelLibrary,
    incremental_update,
    predict_action,
    select_or_flag,
)
from fortdefense.policies import make_mix, make_policy, policy_action

DOMAIN_RESOURCE = "fort_attack.dom"

_CW = {"n": "e", "e": "s", "s": "w", "w": "n"}
_CCW = {v: k for k, v in _CW.items()}
_OBSERVABLE_PREDS = frozenset({"in", "face", "shot"})
_MOVE_DELTA_FOR_KIND = {
    int(kind): (direction.dx, direction.dy) for kind, direction in MOVE_KINDS.items()
}


def load_domain_text() -> str:
    """The packaged guard-domain action description."""
    return (resources.files("fortdefense") / "data" / DOMAIN_RESOURCE).read_text()


def load_domain() -> DomainDescription:
    return parse_domain(load_domain_text())


# ---------------------------------------------------------------------------
# trace records
# ---------------------------------------------------------------------------


@dataclass
class StepRecord:
    """Everything the controller saw, decided, and learned in one tick.

    ``belief`` is the tick-start belief; ``executed`` and ``provenance``
    describe the transition into the next tick's belief.  Steps are
    1-indexed.
    """

    step: int
    belief: Belief
    goal: Goal
    predictions: dict[str, int] = field(default_factory=dict)
    predicted_next: dict[str, tuple[int, int]] = field(default_factory=dict)
    fine_regions: tuple[str, ...] = ()
    replanned: bool = False
    plan_success: bool = True
    plan_expanded: int = 0
    plan_actions: tuple[Atom, ...] = ()
    chosen: Optional[Atom] = None
    fallback: str = ""
    executed: tuple[Atom, ...] = ()
    provenance: tuple[Provenance, ...] = ()
    reconciled: bool = False


@dataclass
class EpisodeRecord:
    """One episode's full decision trace."""

    seed: int
    policy: str
    horizon: int = 8
    completion_applied: tuple[str, ...] = ()
    completion_retracted: tuple[str, ...] = ()
    steps: list[StepRecord] = field(default_factory=list)
    final_belief: Optional[Belief] = None
    outcome: str = ""
    n_steps: int = 0
    guards_win: bool = False


# ---------------------------------------------------------------------------
# prediction helpers
# ---------------------------------------------------------------------------


def predicted_cell(
    config: GridConfig, pos: tuple[int, int], kind: int
) -> tuple[int, int]:
    """Where an agent at ``pos`` ends up if its predicted kind executes."""
    delta = _MOVE_DELTA_FOR_KIND.get(int(kind))
    if delta is None:
        return pos
    nxt = (pos[0] + delta[0], pos[1] + delta[1])
    return nxt if config.in_bounds(*nxt) else pos


def _is_down(belief: Belief, sym: str) -> bool:
    return Atom("shot", (sym,)) in belief.atoms


def _nearest_opponent(
    belief: Belief, gdom: GroundedDomain, sym: str
) -> Optional[str]:
    """The nearest living opposing agent, ties to the lowest id."""
    config = gdom.config
    guards = guard_symbols(config)
    pool = attacker_symbols(config) if sym in guards else guards
    pose = pose_of(belief, sym)
    if pose is None:
        return None
    best: Optional[tuple[float, int, str]] = None
    for other in pool:
        if _is_down(belief, other):
            continue
        opose = pose_of(belief, other)
        if opose is None:
            continue
        d = math.hypot(opose[0] - pose[0], opose[1] - pose[1])
        key = (d, symbol_agent_id(config, other), other)
        if best is None or key < best:
            best = key
    return None if best is None else best[2]


def _exo_atom_for(
    belief: Belief, gdom: GroundedDomain, sym: str, kind: int
) -> Optional[Atom]:
    """The exogenous action atom a predicted kind denotes at the current
    simulated pose, or None when it is not expressible (noop, off the
    active cells, no living target)."""
    if _is_down(belief, sym):
        return None
    pose = pose_of(belief, sym)
    if pose is None:
        return None
    x, y, d = pose
    kind = int(kind)
    delta = _MOVE_DELTA_FOR_KIND.get(kind)
    if delta is not None:
        cell = (x + delta[0], y + delta[1])
        if cell not in gdom.active_cells:
            return None
        return Atom("agent_move", (sym, cell[0], cell[1]))
    if kind == int(ActionKind.ROTATE_CW):
        return Atom("agent_rotate", (sym, _CW[d]))
    if kind == int(ActionKind.ROTATE_CCW):
        return Atom("agent_rotate", (sym, _CCW[d]))
    if kind == int(ActionKind.SHOOT):
        target = _nearest_opponent(belief, gdom, sym)
        if target is None:
            return None
        return Atom("agent_shoot", (sym, target))
    return None


def build_schedule(
    belief: Belief,
    gdom: GroundedDomain,
    predicted_kinds: Mapping[str, int],
    horizon: int,
) -> list[tuple[Atom, ...]]:
    """Predicted exogenous actions per future depth.

    Each agent is assumed to repeat its predicted action kind; the atoms
    are re-grounded against a simulated belief so moves track the
    simulated positions, and predictions that become inexecutable (or
    leave the fine-grained zone) drop out for that depth.
    """
    schedule: list[tuple[Atom, ...]] = []
    sim = belief
    for _ in range(horizon):
        atoms: list[Atom] = []
        for sym in sorted(predicted_kinds):
            atom = _exo_atom_for(sim, gdom, sym, predicted_kinds[sym])
            if atom is None:
                continue
            ok, _ = check_executable(sim, atom, gdom)
            if ok:
                atoms.append(atom)
        schedule.append(tuple(atoms))
        if atoms:
            try:
                sim = progress(
                    sim, atoms, gdom, on_blocked="drop", checked=frozenset(atoms)
                )
            except InconsistencyError:
                break  # freeze the remaining depths at the last simulated state
    return schedule


# ---------------------------------------------------------------------------
# the controller
# ---------------------------------------------------------------------------


class AdHocController:
    """Belief-maintaining, model-predicting, planning guard controller.

    One controller serves consecutive episodes on a fixed grid
    configuration; the model library (models, assignments, trackers) and
    per-agent example buffers persist across episodes, while belief and
    plan state reset in :meth:`begin_episode`.
    """

    def __init__(
        self,
        config: GridConfig,
        library: Optional[ModelLibrary] = None,
        *,
        horizon: int = 8,
        theta: float = THETA_DEFAULT,
        window: int = WINDOW_DEFAULT,
        refit: bool = True,
        refit_min: int = WINDOW_DEFAULT,
        collect_trace: bool = False,
    ):
        self.config = config
        self.library = library if library is not None else ModelLibrary()
        self.horizon = horizon
        self.theta = theta
        self.window = window
        self.refit = refit
        self.refit_min = refit_min
        self.collect_trace = collect_trace
        self.gdom = ground(load_domain(), config, horizon=horizon)
        self.ah_id = symbol_agent_id(config, self.gdom.ah_symbol)
        self.buffers: dict[int, list[tuple[tuple[float, ...], int]]] = {}
        self.reservoirs: dict[int, list[tuple[tuple[float, ...], int]]] = {}
        # episode state
        self.belief: Optional[Belief] = None
        self.record: Optional[EpisodeRecord] = None
        self._tail: list[Atom] = []
        self._goal: Optional[Goal] = None
        self._prev_action: dict[int, Action] = {}
        self._last_vec: dict[int, tuple[float, ...]] = {}
        self._last_preds: dict[tuple[int, int], int] = {}
        self._pending: Optional[StepRecord] = None
        self.pred_total = 0
        self.pred_correct = 0

    # -- episode lifecycle ---------------------------------------------------

    def begin_episode(self, state: WorldState, *, seed: int = 0, policy: str = "") -> None:
        completion = complete_initial(observe_world(state, self.gdom), self.gdom)
        self.belief = completion.belief
        self.record = EpisodeRecord(
            seed=seed,
            policy=policy,
            horizon=self.horizon,
            completion_applied=tuple(str(inst.conclusion) for inst in completion.applied),
            completion_retracted=tuple(
                str(inst.conclusion) for inst in completion.retracted
            ),
        )
        self._tail = []
        self._goal = None
        self._prev_action = {}
        self._last_vec = {}
        self._last_preds = {}
        self._pending = None
        self.pred_total = 0
        self.pred_correct = 0
        for agent in state.agents:
            if agent.id != self.ah_id and self.library.models:
                self.library.assignment.setdefault(agent.id, min(self.library.models))

    def finish_episode(self, result: EpisodeResult) -> EpisodeRecord:
        record = self.record
        if record is None:
            raise RuntimeError("finish_episode before begin_episode")
        record.final_belief = self.belief
        record.outcome = result.outcome.value
        record.n_steps = result.steps
        record.guards_win = result.guards_win
        return record

    # -- per-tick decision ---------------------------------------------------

    def act(self, state: WorldState) -> Action:
        """Decide the controlled guard's action for this tick."""
        if self.belief is None or self.record is None:
            raise RuntimeError("act before begin_episode")
        belief = self.belief
        gdom = self.gdom
        ah = gdom.ah_symbol
        record = StepRecord(step=state.step_count + 1, belief=belief, goal=None)

        predictions, predicted_next = self._predict(state)
        record.predictions = {
            agent_symbol(self.config, aid): kind for aid, kind in predictions.items()
        }
        record.predicted_next = dict(predicted_next)

        goal = select_goal(belief, gdom, predicted_next)
        record.goal = goal

        if not state.get(self.ah_id).alive:
            record.chosen = None
            record.fallback = "dead"
            self._finalize_act(record)
            return Action.noop()

        if goal_holds(belief, goal):
            self._tail = []
            self._goal = goal
            chosen = Atom("noop", (ah,))
            record.chosen = chosen
            self._finalize_act(record)
            return self._env_action(chosen, belief)

        fine = self._fine_regions(belief, goal, predicted_next, gdom)
        record.fine_regions = tuple(sorted(fine))
        gdom_t = restrict(gdom, fine)

        reuse = False
        if self._tail and self._goal == goal:
            ok, _ = check_executable(belief, self._tail[0], gdom)
            reuse = ok
        if not reuse:
            kinds_by_sym = {
                agent_symbol(self.config, aid): kind
                for aid, kind in predictions.items()
            }
            schedule = build_schedule(belief, gdom_t, kinds_by_sym, self.horizon)
            result = search_plan(
                belief, goal, gdom_t, horizon=self.horizon, schedule=schedule
            )
            record.replanned = True
            record.plan_success = result.success
            record.plan_expanded = result.expanded
            self._tail = list(result.actions) if result.success else []
            self._goal = goal
        record.plan_actions = tuple(self._tail)

        if self._tail:
            chosen = self._tail.pop(0)
        else:
            chosen = self._fallback(belief, gdom)
            record.fallback = "noop" if chosen.pred == "noop" else "rotate"
        record.chosen = chosen
        self._finalize_act(record)
        return self._env_action(chosen, belief)

    def _finalize_act(self, record: StepRecord) -> None:
        self._pending = record
        if self.collect_trace and self.record is not None:
            self.record.steps.append(record)

    def _predict(
        self, state: WorldState
    ) -> tuple[dict[int, int], dict[str, tuple[int, int]]]:
        """Assigned-model action-kind predictions for live external agents,
        plus the implied next cells (keyed by agent symbol)."""
        lib = self.library
        predictions: dict[int, int] = {}
        predicted_next: dict[str, tuple[int, int]] = {}
        self._last_vec = {}
        self._last_preds = {}
        for agent in sorted(state.agents, key=lambda a: a.id):
            if agent.id == self.ah_id or not agent.alive:
                continue
            vec = extract(state, agent.id, self._prev_action.get(agent.id))
            self._last_vec[agent.id] = tuple(vec)
            assigned = lib.assignment.get(agent.id)
            kind = int(ActionKind.NOOP)
            for tid in sorted(lib.models):
                pred = predict_action(lib.models[tid], vec)
                self._last_preds[(agent.id, tid)] = pred
                if tid == assigned:
                    kind = pred
            predictions[agent.id] = kind
            sym = agent_symbol(self.config, agent.id)
            predicted_next[sym] = predicted_cell(self.config, agent.pos, kind)
        return predictions, predicted_next

    def _fine_regions(
        self,
        belief: Belief,
        goal: Goal,
        predicted_next: Mapping[str, tuple[int, int]],
        gdom: GroundedDomain,
    ) -> frozenset[str]:
        extra: set[str] = set()
        pose = pose_of(belief, gdom.ah_symbol)
        anchor: Optional[tuple[int, int]] = None
        if goal.kind == "shoot_target" and goal.target is not None:
            tpose = pose_of(belief, goal.target)
            if tpose is not None:
                anchor = (tpose[0], tpose[1])
        elif goal.kind == "occupy_region" and goal.target is not None:
            extra.add(goal.target)
            cells = region_cells(self.config, goal.target)
            if cells:
                anchor = cells[0]
        if pose is not None and anchor is not None:
            extra |= corridor_regions(self.config, (pose[0], pose[1]), anchor)
        fine, _ = compute_relevance(
            belief, None, predicted_next, gdom, extra=sorted(extra)
        )
        return fine

    def _fallback(self, belief: Belief, gdom: GroundedDomain) -> Atom:
        """Face the nearest living attacker; noop when already facing (or
        nothing to face, or rotation is blocked)."""
        ah = gdom.ah_symbol
        noop = Atom("noop", (ah,))
        pose = pose_of(belief, ah)
        attackers = living_attackers(belief, gdom)
        if pose is None or not attackers:
            return noop
        ax, ay, d = pose
        nearest = min(
            attackers,
            key=lambda item: (
                math.hypot(item[1][0] - ax, item[1][1] - ay),
                _attacker_index(item[0]),
            ),
        )
        tx, ty = nearest[1]
        if (tx, ty) == (ax, ay):
            return noop
        want = _nearest_facing(tx - ax, ty - ay)
        if want == d:
            return noop
        target = want if want in (_CW[d], _CCW[d]) else _CW[d]
        atom = Atom("rotate", (ah, target))
        ok, _ = check_executable(belief, atom, gdom)
        return atom if ok else noop

    def _env_action(self, chosen: Atom, belief: Belief) -> Action:
        if chosen.pred == "noop":
            return Action.noop()
        if chosen.pred == "move":
            pose = pose_of(belief, self.gdom.ah_symbol)
            assert pose is not None
            dx, dy = chosen.args[1] - pose[0], chosen.args[2] - pose[1]
            for direction in Direction:
                if (direction.dx, direction.dy) == (dx, dy):
                    return Action.move(direction)
            raise ValueError(f"non-adjacent move target in {chosen}")
        if chosen.pred == "rotate":
            pose = pose_of(belief, self.gdom.ah_symbol)
            assert pose is not None
            kind = (
                ActionKind.ROTATE_CW
                if _CW[pose[2]] == chosen.args[1]
                else ActionKind.ROTATE_CCW
            )
            return Action(kind)
        if chosen.pred == "shoot":
            return Action.shoot(symbol_agent_id(self.config, chosen.args[1]))
        raise ValueError(f"untranslatable action {chosen}")

    # -- per-tick observation ------------------------------------------------

    def observe(
        self,
        before: WorldState,
        actions: Mapping[int, Action],
        after: WorldState,
        events: Sequence[Event],
    ) -> None:
        """Advance the belief through what actually happened and update the
        model bookkeeping."""
        if self.belief is None:
            raise RuntimeError("observe before begin_episode")
        atoms = effective_atoms(self.config, before, actions, after, events, self.ah_id)
        trace: list[Provenance] = []
        new_belief: Optional[Belief] = None
        try:
            new_belief = progress(
                self.belief, atoms, self.gdom, on_blocked="drop", trace=trace
            )
        except InconsistencyError:
            trace = []
        obs = observe_world(after, self.gdom)
        reconciled = new_belief is None or any(
            not new_belief.holds(lit) for lit in obs
        )
        if reconciled:
            source = new_belief if new_belief is not None else self.belief
            carried = [
                a for a in source.atoms
                if a.pred in self.gdom.inertial_preds
                and a.pred not in _OBSERVABLE_PREDS
            ]
            positives = [lit.atom for lit in obs if lit.positive]
            new_belief = Belief(close_defined(positives + carried, self.gdom))
        self.belief = new_belief
        if self._pending is not None:
            self._pending.executed = tuple(atoms)
            self._pending.provenance = tuple(trace)
            self._pending.reconciled = reconciled
            self._pending = None
        self._update_models(before, actions)
        for agent_id, action in actions.items():
            self._prev_action[agent_id] = action

    def _update_models(
        self, before: WorldState, actions: Mapping[int, Action]
    ) -> None:
        lib = self.library
        flagged: list[int] = []
        for agent_id in sorted(actions):
            if agent_id == self.ah_id or agent_id not in self._last_vec:
                continue
            actual = int(actions[agent_id].kind)
            self.buffers.setdefault(agent_id, []).append(
                (self._last_vec[agent_id], actual)
            )
            if len(self.buffers[agent_id]) > BUFFER_SIZE:
                del self.buffers[agent_id][0]
            assigned = lib.assignment.get(agent_id)
            for tid in sorted(lib.models):
                key = (agent_id, tid)
                if key in self._last_preds:
                    lib.tracker(agent_id, tid, self.window).update(
                        self._last_preds[key], actual
                    )
                    if tid == assigned:
                        self.pred_total += 1
                        self.pred_correct += int(self._last_preds[key] == actual)
            if assigned is None and self.refit:
                flagged.append(agent_id)
        for agent_id, (verdict, tid) in sorted(
            select_or_flag(lib, self.theta).items()
        ):
            if verdict == "switch":
                lib.assignment[agent_id] = tid
            elif verdict == "flag_new_model" and self.refit:
                flagged.append(agent_id)
        for agent_id in flagged:
            self._refit(agent_id)
        # feature vectors and predictions pair with this tick's labels only
        self._last_vec = {}
        self._last_preds = {}

    def _refit(self, agent_id: int) -> None:
        """Learn (or update) a model for a flagged agent from its buffer."""
        lib = self.library
        buffer = self.buffers.get(agent_id, [])
        if len(buffer) < self.refit_min:
            return
        current_tid = lib.assignment.get(agent_id)
        current = lib.models.get(current_tid) if current_tid is not None else None
        reservoir = self.reservoirs.get(current_tid, []) if current_tid is not None else []
        updated = incremental_update(current, buffer, reservoir)
        if updated is not current:
            new_tid = lib.next_type_id()
            lib.models[new_tid] = updated
            self.reservoirs[new_tid] = (list(reservoir) + list(buffer))[:RESERVOIR_SIZE]
            lib.assignment[agent_id] = new_tid
        self.buffers[agent_id] = []


# ---------------------------------------------------------------------------
# effective-action translation
# ---------------------------------------------------------------------------


def effective_atoms(
    config: GridConfig,
    before: WorldState,
    actions: Mapping[int, Action],
    after: WorldState,
    events: Sequence[Event],
    ah_id: int,
) -> tuple[Atom, ...]:
    """The ground action atoms describing what actually happened in a tick.

    The controlled guard's actions use the guard's own action names;
    everyone else's use the exogenous ``agent_*`` names.  Cancelled moves
    and missed shots contribute nothing; rotations and moves are read off
    the post-state so agents killed mid-tick contribute nothing either.
    """
    hits = {
        (e.shooter, e.target)
        for e in events
        if isinstance(e, ShotEvent) and e.hit
    }
    atoms: list[Atom] = []
    for agent_id in sorted(actions):
        agent = before.get(agent_id)
        if not agent.alive:
            continue
        action = actions[agent_id]
        own = agent_id == ah_id
        sym = agent_symbol(config, agent_id)
        post = after.get(agent_id)
        kind = action.kind
        if int(kind) in _MOVE_DELTA_FOR_KIND:
            if post.pos != agent.pos:
                name = "move" if own else "agent_move"
                atoms.append(Atom(name, (sym, post.x, post.y)))
        elif kind in (ActionKind.ROTATE_CW, ActionKind.ROTATE_CCW):
            if post.direction != agent.direction:
                name = "rotate" if own else "agent_rotate"
                atoms.append(Atom(name, (sym, SYMBOL_OF_DIR[post.direction])))
        elif kind is ActionKind.SHOOT:
            if (agent_id, action.target) in hits:
                name = "shoot" if own else "agent_shoot"
                atoms.append(Atom(name, (sym, agent_symbol(config, action.target))))
    return tuple(atoms)


# ---------------------------------------------------------------------------
# episode runner
# ---------------------------------------------------------------------------


@dataclass
class EpisodeStats:
    """Per-episode scalar results."""

    episode: int
    seed: int
    policy: str
    outcome: str
    steps: int
    guards_win: bool
    adhoc_alive: bool
    adhoc_shots_fired: int
    adhoc_shots_hit: int
    guard_shots_fired: int
    guard_shots_hit: int
    pred_total: int
    pred_correct: int


@dataclass
class GameStats:
    """Aggregated results of a batch of episodes."""

    episodes: list[EpisodeStats] = field(default_factory=list)
    records: list[EpisodeRecord] = field(default_factory=list)
    act_ms: list[float] = field(default_factory=list)
    observe_ms: list[float] = field(default_factory=list)

    @property
    def win_rate(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.guards_win for e in self.episodes) / len(self.episodes)

    @property
    def mean_steps(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.steps for e in self.episodes) / len(self.episodes)

    @property
    def prediction_accuracy(self) -> float:
        total = sum(e.pred_total for e in self.episodes)
        if total == 0:
            return 0.0
        return sum(e.pred_correct for e in self.episodes) / total

    @property
    def adhoc_accuracy(self) -> float:
        fired = sum(e.adhoc_shots_fired for e in self.episodes)
        if fired == 0:
            return 0.0
        return sum(e.adhoc_shots_hit for e in self.episodes) / fired

    @property
    def guard_accuracy(self) -> float:
        fired = sum(e.guard_shots_fired for e in self.episodes)
        if fired == 0:
            return 0.0
        return sum(e.guard_shots_hit for e in self.episodes) / fired


def tick_rng(episode_seed: int, step_count: int, agent_id: int) -> random.Random:
    """The per-(episode, tick, agent) random stream for scripted policies."""
    return random.Random(
        (episode_seed * 1_000_003 + step_count) * 1_000_003 + agent_id
    )


def run_games(
    config: GridConfig,
    policy: str,
    n_episodes: int,
    *,
    seed: int = 0,
    ad_hoc: bool = True,
    library: Optional[ModelLibrary] = None,
    horizon: int = 8,
    theta: float = THETA_DEFAULT,
    window: int = WINDOW_DEFAULT,
    refit: bool = True,
    refit_min: int = WINDOW_DEFAULT,
    collect_traces: bool = False,
    example_sink: Optional[Mapping[str, list]] = None,
) -> GameStats:
    """Run episodes of the scripted team against the scripted attackers,
    with the controlled guard either knowledge-driven (``ad_hoc=True``) or
    scripted like its teammates (the baseline).

    ``example_sink`` maps "guard"/"attacker" to lists that collect
    ``(feature_vector, action_kind)`` pairs from every scripted agent.
    """
    stats = GameStats()
    controller: Optional[AdHocController] = None
    if ad_hoc:
        controller = AdHocController(
            config,
            library,
            horizon=horizon,
            theta=theta,
            window=window,
            refit=refit,
            refit_min=refit_min,
            collect_trace=collect_traces,
        )
    for episode in range(n_episodes):
        episode_seed = seed + episode
        spec = make_mix(episode_seed) if policy == "mix" else make_policy(policy)
        state = reset(config, episode_seed, ad_hoc=ad_hoc)
        prev_action: dict[int, Action] = {}
        if controller is not None:
            controller.begin_episode(state, seed=episode_seed, policy=policy)
        result = terminal(state)
        while result is None:
            actions: dict[int, Action] = {}
            for agent in state.agents:
                if not agent.alive:
                    continue
                if controller is not None and agent.id == controller.ah_id:
                    t0 = time.perf_counter()
                    actions[agent.id] = controller.act(state)
                    stats.act_ms.append((time.perf_counter() - t0) * 1000.0)
                    continue
                rng = tick_rng(episode_seed, state.step_count, agent.id)
                actions[agent.id] = policy_action(spec, state, agent.id, rng)
                if example_sink is not None:
                    role = "guard" if agent.kind.is_guard else "attacker"
                    vec = extract(state, agent.id, prev_action.get(agent.id))
                    example_sink[role].append((vec, int(actions[agent.id].kind)))
            nxt, events = step(state, actions)
            if controller is not None:
                t0 = time.perf_counter()
                controller.observe(state, actions, nxt, events)
                stats.observe_ms.append((time.perf_counter() - t0) * 1000.0)
            prev_action.update(actions)
            state = nxt
            result = terminal(state)
        adhoc_id = 0
        guard_ids = [a.id for a in state.agents if a.kind.is_guard]
        stats.episodes.append(
            EpisodeStats(
                episode=episode,
                seed=episode_seed,
                policy=policy,
                outcome=result.outcome.value,
                steps=result.steps,
                guards_win=result.guards_win,
                adhoc_alive=state.get(adhoc_id).alive,
                adhoc_shots_fired=state.shots_fired.get(adhoc_id, 0),
                adhoc_shots_hit=state.shots_hit.get(adhoc_id, 0),
                guard_shots_fired=sum(state.shots_fired.get(g, 0) for g in guard_ids),
                guard_shots_hit=sum(state.shots_hit.get(g, 0) for g in guard_ids),
                pred_total=controller.pred_total if controller else 0,
                pred_correct=controller.pred_correct if controller else 0,
            )
        )
        if controller is not None and collect_traces:
            stats.records.append(controller.finish_episode(result))
    return stats
