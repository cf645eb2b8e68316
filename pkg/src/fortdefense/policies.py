"""Scripted policies for the non-ad-hoc agents.

Two handcrafted training policies (P1, P2) and four analogs of pre-trained
opponent checkpoints (B220, B650, B1240, B1600), here realized as
parameterized heuristics.  The numeric parameters below are this
implementation's declared analog values (the originals are neural policies
with no published parameters); results obtained with them are directional,
not replications.

Qualitative intents:

* P1 -- guards hold close to the fort and concentrate fire on the attacker
  closest to it; attackers fan out into lanes, gather on a ring, and rush
  together.
* P2 -- both teams open by spreading out; guards then engage nearby
  attackers (with slightly noisy movement), attackers mount a frontal
  assault and shoot back.
* B220 -- guards park in the band directly in front of the fort and shoot
  whatever they legally can; attackers charge straight in.
* B650 -- guards defend a small radius; attackers sneak up the side lanes
  with staggered starts.
* B1240 -- guards patrol a wider radius; attackers sneak the edges, gather
  on a ring and rush together.
* B1600 -- guards pursue far from the fort; most attackers hunt the guards
  with live fire while the rest hold back and dash for the fort once any
  guard is drawn out of position.

Every returned action is drawn from ``legal_actions``; a dead agent noops.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from fortdefense.env import (
    MOVE_KINDS,
    Action,
    ActionKind,
    AgentState,
    Direction,
    GridConfig,
    WorldState,
    fort_center,
    fort_distance,
    in_arc,
    legal_actions,
)

BUILTIN_NAMES = ("B220", "B650", "B1240", "B1600")
POLICY_NAMES = ("P1", "P2") + BUILTIN_NAMES + ("mix",)

#: Parameter table for the six concrete policies.  Distances in cells,
#: steps in ticks, fractions in [0, 1].
DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "P1": dict(guard_radius=6, engage_range=9, anchor_gap=2),
    "P2": dict(
        guard_radius=6,
        engage_range=9,
        anchor_gap=4,
        spread_steps=5,
        jitter=0.15,
    ),
    "B220": dict(guard_radius=2, engage_range=5, anchor_gap=1, lane_gap=6),
    "B650": dict(guard_radius=8, engage_range=10, anchor_gap=3, stagger=2),
    "B1240": dict(guard_radius=9, engage_range=11, anchor_gap=5),
    "B1600": dict(
        guard_radius=10,
        engage_range=13,
        anchor_gap=7,
        aggression=0.67,
        drawn_radius=9,
        standoff_rows=13,
    ),
    "mix": {},
}

PARAM_RANGES: dict[str, tuple[float, float]] = {
    "guard_radius": (0, 40),
    "engage_range": (0, 40),
    "anchor_gap": (0, 20),
    "spread_steps": (0, 20),
    "jitter": (0.0, 1.0),
    "lane_gap": (0, 20),
    "stagger": (0, 10),
    "aggression": (0.0, 1.0),
    "drawn_radius": (0, 40),
    "standoff_rows": (0, 40),
}


@dataclass
class PolicySpec:
    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in POLICY_NAMES:
            raise ValueError(
                f"unknown policy {self.name!r}; expected one of {POLICY_NAMES}"
            )
        for key, value in self.params.items():
            if key not in PARAM_RANGES:
                raise ValueError(f"unknown policy parameter {key!r}")
            lo, hi = PARAM_RANGES[key]
            if not lo <= value <= hi:
                raise ValueError(f"{key}={value} outside documented range [{lo}, {hi}]")

    def param(self, key: str) -> float:
        if key in self.params:
            return self.params[key]
        return DEFAULT_PARAMS[self.name][key]


def make_policy(name: str, **overrides: float) -> PolicySpec:
    return PolicySpec(name=name, params=dict(overrides))


def make_mix(seed: int, choices: tuple[str, ...] = BUILTIN_NAMES) -> PolicySpec:
    """Pick one built-in policy uniformly from the episode seed."""
    if not choices:
        raise ValueError("cannot mix over an empty set of policies")
    return make_policy(random.Random(seed).choice(list(choices)))


# ---------------------------------------------------------------------------
# shared movement helpers
# ---------------------------------------------------------------------------


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _legal_moves(legal: list[Action]) -> dict[ActionKind, Action]:
    return {a.kind: a for a in legal if a.kind in MOVE_KINDS}


def _move_reducing(
    agent: AgentState,
    moves: dict[ActionKind, Action],
    key: Callable[[tuple[int, int]], float],
    limit: Optional[Callable[[tuple[int, int]], bool]] = None,
    allow_equal: bool = False,
) -> Optional[Action]:
    """The legal move minimizing ``key`` of the destination cell.

    Only strictly improving moves are returned unless ``allow_equal``;
    ties go to the first of N, E, S, W.
    """
    here = key(agent.pos)
    best: Optional[Action] = None
    best_val = here + (1e-9 if allow_equal else -1e-9)
    for kind in (
        ActionKind.MOVE_N,
        ActionKind.MOVE_E,
        ActionKind.MOVE_S,
        ActionKind.MOVE_W,
    ):
        act = moves.get(kind)
        if act is None:
            continue
        d = MOVE_KINDS[kind]
        cell = (agent.x + d.dx, agent.y + d.dy)
        if limit is not None and not limit(cell):
            continue
        val = key(cell)
        if val < best_val - 1e-12:
            best, best_val = act, val
    return best


def _rotate_toward(agent: AgentState, pos: tuple[float, float]) -> Optional[Action]:
    """One rotation step toward facing ``pos``, or None if already aligned."""
    dx, dy = pos[0] - agent.x, pos[1] - agent.y
    if dx == 0 and dy == 0:
        return None
    bearing = math.atan2(dx, dy)
    order = (Direction.N, Direction.E, Direction.S, Direction.W)

    def gap(d: Direction) -> float:
        raw = abs(bearing - d.angle) % (2 * math.pi)
        return min(raw, 2 * math.pi - raw)

    best = min(order, key=lambda d: (gap(d), order.index(d)))
    steps_cw = (order.index(best) - order.index(agent.direction)) % 4
    if steps_cw == 0:
        return None
    if steps_cw == 3:
        return Action(ActionKind.ROTATE_CCW)
    return Action(ActionKind.ROTATE_CW)


def _guard_rank(state: WorldState, agent_id: int) -> int:
    return sorted(g.id for g in state.guards()).index(agent_id)


def _attacker_rank(state: WorldState, agent_id: int) -> int:
    return sorted(a.id for a in state.attackers()).index(agent_id)


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


def _guard_anchor(cfg: GridConfig, spec: PolicySpec, rank: int, n: int) -> tuple[int, int]:
    cx, _ = fort_center(cfg)
    gap = spec.param("anchor_gap")
    offset = (rank - (n - 1) / 2) * gap
    return (_clamp(round(cx + offset), 0, cfg.width - 1), cfg.height - 2)


def _nearest_fort_cell(cfg: GridConfig, pos: tuple[int, int]) -> tuple[int, int]:
    return min(sorted(cfg.fort_cells), key=lambda c: _dist(pos, c))


def _covered(
    cfg: GridConfig,
    cell: tuple[int, int],
    shooters: list[AgentState],
    margin: float = 0.5,
) -> bool:
    """Whether any of ``shooters`` could fire on ``cell`` as currently aimed.

    Facing only changes through explicit rotations, so a mover's firing arc
    goes stale; cells outside every current arc-and-range cone are safe to
    stand on this tick.
    """
    return any(
        _dist(cell, s.pos) <= cfg.shoot_range + margin
        and in_arc(cfg, s.direction, s.x, s.y, cell[0], cell[1])
        for s in shooters
    )


# ---------------------------------------------------------------------------
# opening spread (P2): flank agents diverge along x, middles hold
# ---------------------------------------------------------------------------


def _in_spread_opening(spec: PolicySpec, state: WorldState, agent: AgentState) -> bool:
    if state.step_count >= spec.param("spread_steps"):
        return False
    team = [a for a in state.agents if a.alive and a.kind.is_guard is agent.kind.is_guard]
    foes = [a for a in state.agents if a.alive and a.kind.is_guard is not agent.kind.is_guard]
    for member in team:
        for foe in foes:
            if _dist(member.pos, foe.pos) <= state.config.shoot_range:
                return False
    return True


def _spread_move(state: WorldState, agent: AgentState, legal: list[Action]) -> Action:
    team = sorted(
        (a for a in state.agents if a.alive and a.kind.is_guard is agent.kind.is_guard),
        key=lambda a: (a.x, a.id),
    )
    moves = _legal_moves(legal)
    if agent.id == team[0].id:
        wanted = moves.get(ActionKind.MOVE_W)
    elif agent.id == team[-1].id:
        wanted = moves.get(ActionKind.MOVE_E)
    else:
        wanted = None  # middles hold so pairwise distances cannot shrink
    return wanted or Action.noop()


# ---------------------------------------------------------------------------
# guard behaviors
# ---------------------------------------------------------------------------


def _guard_action(
    spec: PolicySpec, state: WorldState, agent: AgentState, rng: random.Random
) -> Action:
    cfg = state.config
    legal = legal_actions(state, agent.id)
    moves = _legal_moves(legal)
    shots = {a.target: a for a in legal if a.kind is ActionKind.SHOOT}
    enemies = [a for a in state.attackers() if a.alive]
    if not enemies:
        return Action.noop()
    if spec.name == "P2" and _in_spread_opening(spec, state, agent):
        return _spread_move(state, agent, legal)

    threat = min(enemies, key=lambda a: (fort_distance(cfg, a.x, a.y), a.id))
    radius = spec.param("guard_radius")
    in_band = None
    if spec.name == "B220":
        # front-of-fort band: the top three rows
        in_band = lambda cell: cell[1] >= cfg.height - 3

    if spec.name == "P1":
        # fixate on the single biggest threat; other targets get a pass
        if threat.id in shots:
            return shots[threat.id]
    elif shots:
        target = min(
            shots, key=lambda t: (fort_distance(cfg, state.get(t).x, state.get(t).y), t)
        )
        return shots[target]

    chosen: Optional[Action] = None
    # aim at the threat whenever it is within weapon range
    if _dist(agent.pos, threat.pos) <= cfg.shoot_range:
        chosen = _rotate_toward(agent, threat.pos)
    # leash: strayed beyond the radius -> strictly reduce fort distance
    if chosen is None and fort_distance(cfg, agent.x, agent.y) > radius:
        chosen = _move_reducing(
            agent, moves, key=lambda c: fort_distance(cfg, *c), limit=in_band
        )
    # engage: close on the threat while staying leashed
    if chosen is None and _dist(agent.pos, threat.pos) <= spec.param("engage_range"):
        leash = lambda c: fort_distance(cfg, *c) <= radius and (
            in_band is None or in_band(c)
        )
        chosen = _move_reducing(
            agent, moves, key=lambda c: _dist(c, threat.pos), limit=leash
        )
        if chosen is None:
            chosen = _rotate_toward(agent, threat.pos)
    # idle: drift back to the anchor slot, pre-aimed at the threat
    if chosen is None:
        anchor = _guard_anchor(cfg, spec, _guard_rank(state, agent.id), cfg.n_guards)
        if _dist(agent.pos, anchor) > 1.5:
            chosen = _move_reducing(
                agent, moves, key=lambda c: _dist(c, anchor), limit=in_band
            )
        if chosen is None:
            chosen = _rotate_toward(agent, threat.pos)
    if chosen is None:
        chosen = Action.noop()
    # P2 movement is slightly noisy
    jitter = spec.params.get("jitter", DEFAULT_PARAMS[spec.name].get("jitter", 0.0))
    if jitter and chosen.kind in MOVE_KINDS and moves and rng.random() < jitter:
        options = sorted(moves.values(), key=lambda a: a.kind)
        chosen = options[rng.randrange(len(options))]
    return chosen


# ---------------------------------------------------------------------------
# attacker behaviors
# ---------------------------------------------------------------------------


def _advance(
    agent: AgentState,
    moves: dict[ActionKind, Action],
    goal: tuple[int, int],
    limit: Optional[Callable[[tuple[int, int]], bool]] = None,
) -> Action:
    """Move toward ``goal``, preferring ``limit``-approved cells.

    Falls back to unrestricted progress, then to sideways (equal-distance)
    steps, rather than standing still.
    """
    key = lambda c: _dist(c, goal)
    attempts = (
        [(limit, False), (limit, True), (None, False), (None, True)]
        if limit is not None
        else [(None, False), (None, True)]
    )
    for lim, eq in attempts:
        act = _move_reducing(agent, moves, key=key, limit=lim, allow_equal=eq)
        if act is not None:
            return act
    return Action.noop()


def _lane_advance(
    cfg: GridConfig,
    agent: AgentState,
    moves: dict[ActionKind, Action],
    lane_x: int,
    slide_row: Optional[int] = None,
    approach_row: Optional[int] = None,
    limit: Optional[Callable[[tuple[int, int]], bool]] = None,
) -> Action:
    """March up a fixed column, then along a high row to the fort.

    Three legs: slide sideways onto the lane (at ``slide_row``, so two
    attackers sliding opposite ways never deadlock on the same row), climb
    the lane to ``approach_row`` (top row by default), then close on the
    nearest fort cell.  Flank lanes hug the board edges, outside the
    defenders' resting reach.
    """
    row = cfg.height - 1 if approach_row is None else approach_row
    if agent.x != lane_x and agent.y < row:
        if slide_row is not None and agent.y < slide_row:
            return _advance(agent, moves, (agent.x, slide_row), limit)
        return _advance(agent, moves, (lane_x, agent.y), limit)
    if agent.y < row:
        return _advance(agent, moves, (lane_x, row), limit)
    return _advance(agent, moves, _nearest_fort_cell(cfg, agent.pos), limit)


def _attacker_action(
    spec: PolicySpec, state: WorldState, agent: AgentState, rng: random.Random
) -> Action:
    cfg = state.config
    legal = legal_actions(state, agent.id)
    moves = _legal_moves(legal)
    shots = {a.target: a for a in legal if a.kind is ActionKind.SHOOT}
    rank = _attacker_rank(state, agent.id)
    fort_goal = _nearest_fort_cell(cfg, agent.pos)
    cx, _ = fort_center(cfg)

    slide_row = cfg.attacker_band_rows + rank

    # every attacker is armed: take any available shot, and when running the
    # top row turn to face along it first so defenders ahead are inside the
    # firing arc when they come into range (B1600 hunters manage their own aim)
    n_aggressors = max(1, round(spec.param("aggression") * cfg.n_attackers)) if (
        spec.name == "B1600"
    ) else 0
    aggressor_mode = (
        rank < n_aggressors
        and any(g.alive for g in state.guards())
        and sum(1 for a in state.attackers() if a.alive) > 1
    )
    if not aggressor_mode:
        if shots:
            victim = min(shots, key=lambda t: (_dist(agent.pos, state.get(t).pos), t))
            return shots[victim]
        guards_alive = [g for g in state.guards() if g.alive]
        if guards_alive and agent.y == cfg.height - 1 and agent.pos != fort_goal:
            rot = _rotate_toward(agent, fort_goal)
            if rot:
                return rot

    def _wing_advance(lane_x: int, centre_rank: int) -> Action:
        # edge wing: climb to the top corner, wait there until the opposite
        # wing is also on the top row, then both close in simultaneously;
        # stop waiting the moment a defender gets close
        top = cfg.height - 1
        if agent.y >= top:
            wings = [
                a
                for a in state.attackers()
                if a.alive and _attacker_rank(state, a.id) % 3 != centre_rank
            ]
            ready = all(a.y >= top for a in wings)
            crowded = any(
                _dist(agent.pos, g.pos) <= cfg.shoot_range + 1.5
                for g in state.guards()
                if g.alive
            )
            if not ready and not crowded:
                return Action.noop()
        return _lane_advance(cfg, agent, moves, lane_x, slide_row)

    if spec.name == "P1":
        # three-pronged envelopment: the centre attacker drives straight up
        # the middle and draws the defence while the wings walk the edges to
        # the top corners and rush from both sides at once
        lane_x = (1, round(cx), cfg.width - 2)[rank % 3]
        if rank % 3 == 1:
            return _lane_advance(cfg, agent, moves, lane_x, slide_row)
        return _wing_advance(lane_x, centre_rank=1)

    if spec.name == "P2":
        if _in_spread_opening(spec, state, agent):
            return _spread_move(state, agent, legal)
        guards = [g for g in state.guards() if g.alive]
        if shots:
            target = min(shots, key=lambda t: (_dist(agent.pos, state.get(t).pos), t))
            return shots[target]
        if guards:
            nearest = min(guards, key=lambda g: (_dist(agent.pos, g.pos), g.id))
            if _dist(agent.pos, nearest.pos) <= cfg.shoot_range:
                rot = _rotate_toward(agent, nearest.pos)
                if rot:
                    return rot
        return _advance(agent, moves, (round(cx), cfg.height - 1))

    if spec.name == "B220":
        # parallel frontal columns straight at the fort, no coordination
        lane_gap = spec.param("lane_gap")
        lane_x = _clamp(round(cx + (rank - 1) * lane_gap), 1, cfg.width - 2)
        return _lane_advance(cfg, agent, moves, lane_x, slide_row)

    if spec.name == "B650":
        # edge runners with staggered starts; the last attacker goes up the middle
        if state.step_count < spec.param("stagger") * rank:
            return Action.noop()
        lane_x = (1, cfg.width - 2, round(cx))[rank % 3]
        return _lane_advance(cfg, agent, moves, lane_x, slide_row)

    if spec.name == "B1240":
        # centre attacker baits the wide-ranging defenders off their posts;
        # the wings run the edges behind the pursuit and rush together
        lane_x = (round(cx), 1, cfg.width - 2)[rank % 3]
        if rank % 3 == 0:
            return _lane_advance(cfg, agent, moves, lane_x, slide_row)
        return _wing_advance(lane_x, centre_rank=0)

    if spec.name == "B1600":
        attackers = sorted(a.id for a in state.attackers())
        guards = [g for g in state.guards() if g.alive]
        # a cell is dangerous if a defender's current cone could cover it
        # after one more closing step (they move one cell a tick)
        danger = lambda c: _covered(cfg, c, guards, margin=1.5)

        # retreat preference: get away from every pursuer, with a nudge
        # toward open ground so a flight never dead-ends in a corner
        def retreat_key(c: tuple[int, int]) -> float:
            room = min(c[0], cfg.width - 1 - c[0], c[1], cfg.height - 1 - c[1])
            return -min(_dist(c, g.pos) for g in guards) - 0.3 * room

        def dodge() -> Optional[Action]:
            # a firing cone is closing over us: sidestep out of it
            if not guards or not danger(agent.pos):
                return None
            return _move_reducing(
                agent,
                moves,
                key=lambda c: (100.0 if danger(c) else 0.0) + retreat_key(c),
                allow_equal=True,
            )

        if aggressor_mode:
            if shots:
                victim = min(
                    shots, key=lambda t: (_dist(agent.pos, state.get(t).pos), t)
                )
                return shots[victim]
            # once a teammate is climbing for its run, stop skirmishing:
            # charge the defender best placed to cut the run off and make it
            # fight us instead -- even a one-for-one trade is a bargain
            # while the fort is being breached
            runners_up = [
                a
                for a in state.attackers()
                if a.alive
                and a.y >= cfg.height - 7
                and _attacker_rank(state, a.id) >= n_aggressors
            ]
            if runners_up:
                runner = runners_up[0]
                gate = _nearest_fort_cell(cfg, runner.pos)
                blocker = min(guards, key=lambda g: (_dist(g.pos, gate), g.id))
                return _advance(agent, moves, blocker.pos)

            nearest = min(guards, key=lambda g: (_dist(agent.pos, g.pos), g.id))
            flee = dodge()
            if flee:
                return flee
            gap = _dist(agent.pos, nearest.pos)
            all_home = all(
                fort_distance(cfg, g.x, g.y) <= spec.param("drawn_radius")
                for g in guards
            )
            if rank == 0 and len(guards) > 1 and not all_home:
                # bait: hover beyond weapon range of the closest defender so
                # the pursuit chases a target it can never quite reach; the
                # band is two cells wide so a mutual approach cannot skip
                # over it (against a lone defender, join the hunt instead).
                # Orbit at the defenders' leash edge rather than fleeing
                # outright: staying the attacker nearest the fort keeps every
                # defender aimed and chasing here, not at the teammates.
                orbit = spec.param("guard_radius") + 2

                def bait_key(c: tuple[int, int]) -> float:
                    return retreat_key(c) + 0.4 * abs(
                        fort_distance(cfg, c[0], c[1]) - orbit
                    )

                if gap < cfg.shoot_range + 1.5:
                    away = _move_reducing(
                        agent,
                        moves,
                        key=bait_key,
                        limit=lambda c: not danger(c),
                    ) or _move_reducing(agent, moves, key=bait_key)
                    if away:
                        return away
                elif gap > cfg.shoot_range + 3.5:
                    closer = _move_reducing(
                        agent,
                        moves,
                        key=lambda c: _dist(c, nearest.pos),
                        limit=lambda c: not danger(c),
                    )
                    if closer:
                        return closer
                rot = _rotate_toward(agent, nearest.pos)
                if rot:
                    return rot
                return Action.noop()
            # hunter: defenders rotate only to aim at the attacker nearest
            # the fort, so their cones lag behind their movement; walk a
            # cone-free path to the rim of the mark's range, pre-aim there,
            # and only then step inside -- the shot lands next tick, before
            # the mark can turn to answer.  Prefer marks whose cone points
            # elsewhere; a mark already facing us can track our approach.
            for mark in sorted(
                guards,
                key=lambda g: (
                    in_arc(cfg, g.direction, g.x, g.y, agent.x, agent.y),
                    _dist(agent.pos, g.pos),
                    g.id,
                ),
            ):
                others = [g for g in guards if g.id != mark.id]

                def strikeable(cell: tuple[int, int]) -> bool:
                    return (
                        _dist(cell, mark.pos) <= cfg.shoot_range
                        and not in_arc(
                            cfg, mark.direction, mark.x, mark.y, cell[0], cell[1]
                        )
                        and not _covered(cfg, cell, others, margin=1.5)
                    )

                aimed = _rotate_toward(agent, mark.pos) is None
                if strikeable(agent.pos):
                    # inside the cone-free pocket: turn and the top-of-turn
                    # shot check fires
                    rot = _rotate_toward(agent, mark.pos)
                    if rot:
                        return rot
                    return Action.noop()
                reach = int(cfg.shoot_range)
                posts = [
                    (mark.x + dx, mark.y + dy)
                    for dx in range(-reach, reach + 1)
                    for dy in range(-reach, reach + 1)
                    if 0 <= mark.x + dx < cfg.width
                    and 0 <= mark.y + dy < cfg.height
                    and strikeable((mark.x + dx, mark.y + dy))
                ]
                if not posts:
                    continue
                # with two hunters working the same mark, take opposite
                # sides: one cone cannot cover a split bearing
                mates = [
                    a
                    for a in state.attackers()
                    if a.alive
                    and a.id != agent.id
                    and _attacker_rank(state, a.id) < n_aggressors
                ]
                spread = 0.5 if rank == 0 else 0.0
                post = min(
                    posts,
                    key=lambda c: (
                        _dist(agent.pos, c)
                        - spread
                        * min((_dist(c, m.pos) for m in mates), default=0.0),
                        c,
                    ),
                )
                move_ok = lambda c: not danger(c) and (
                    aimed or _dist(c, mark.pos) > cfg.shoot_range
                )
                closer = _move_reducing(
                    agent, moves, key=lambda c: _dist(c, post), limit=move_ok
                )
                if closer:
                    return closer
                # parked on the rim: spend the wait turning toward the mark
                rot = _rotate_toward(agent, mark.pos)
                if rot:
                    return rot
                break
            return Action.noop()

        # runner: wait at the standoff row while the hunters work, then
        # sneak up one edge once the defense is thinned or fully drawn out
        aggressor_ids = set(attackers[:n_aggressors])
        aggressors_alive = any(
            a.alive for a in state.attackers() if a.id in aggressor_ids
        )
        drawn = not guards or all(
            fort_distance(cfg, g.x, g.y) > spec.param("drawn_radius") for g in guards
        )
        n_alive = sum(1 for a in state.attackers() if a.alive)
        # in the last quarter of the game run flat out, cones or not:
        # the clock decides stalemates, and it decides them for the defense
        desperate = state.step_count >= 0.75 * cfg.max_steps
        if not desperate:
            evade = dodge()
            if evade:
                return evade
        if (
            drawn
            or not aggressors_alive
            or len(guards) <= 1
            or n_alive == 1
            or state.step_count >= 0.55 * cfg.max_steps
        ):
            top = cfg.height - 1
            if not guards:
                lane_x = 1 if agent.x <= cx else cfg.width - 2
            elif agent.x <= 3:
                # already committed to the west wall: no second thoughts,
                # flip-flopping mid-run walks straight back into the pursuit
                lane_x = 1
            elif agent.x >= cfg.width - 4:
                lane_x = cfg.width - 2
            else:
                lane_x = max(
                    (1, cfg.width - 2),
                    key=lambda x: min(_dist((x, top), g.pos) for g in guards),
                )
            # head straight for the top corner of the chosen edge (every
            # step closes on the fort), then along the top row to it
            goal = fort_goal if agent.y == top else (lane_x, top)
            return _advance(
                agent,
                moves,
                goal,
                limit=None if desperate else (lambda c: not danger(c)),
            )
        standoff_row = cfg.height - 1 - int(spec.param("standoff_rows"))
        if agent.y < standoff_row:
            return _advance(
                agent, moves, (agent.x, standoff_row), limit=lambda c: not danger(c)
            )
        return Action.noop()

    raise AssertionError(f"unhandled policy {spec.name}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def policy_action(
    spec: PolicySpec, state: WorldState, agent_id: int, rng: random.Random
) -> Action:
    """The scripted action for one agent this tick.

    Pure in (spec, state, agent_id, rng-stream state); the returned action is
    always in ``legal_actions(state, agent_id)``.  Dead agents noop.
    """
    agent = state.get(agent_id)
    if not agent.alive:
        return Action.noop()
    if spec.name == "mix":
        raise ValueError("'mix' must be resolved per episode with make_mix(seed)")
    if agent.kind.is_guard:
        return _guard_action(spec, state, agent, rng)
    return _attacker_action(spec, state, agent, rng)
