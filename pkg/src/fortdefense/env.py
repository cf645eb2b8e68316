"""Grid-world fort defense simulator.

A rectangular grid with a fort strip on the top edge, defended by guards
against attackers that spawn in the bottom rows.  All agents act
simultaneously each tick; shots resolve before movement, movement conflicts
resolve deterministically, and episodes end by fort capture, elimination, or
timeout.

Coordinates are (x, y) with x growing east and y growing north, so the fort
sits at y = height - 1 and attackers start near y = 0.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Mapping, Optional, Union

EPS = 1e-9


class Direction(Enum):
    """The four facings, with clockwise order N -> E -> S -> W."""

    N = (0, 1)
    E = (1, 0)
    S = (0, -1)
    W = (-1, 0)

    @property
    def dx(self) -> int:
        return self.value[0]

    @property
    def dy(self) -> int:
        return self.value[1]

    @property
    def angle(self) -> float:
        """Bearing in radians measured clockwise from north."""
        return math.atan2(self.dx, self.dy)

    def clockwise(self) -> "Direction":
        order = (Direction.N, Direction.E, Direction.S, Direction.W)
        return order[(order.index(self) + 1) % 4]

    def counterclockwise(self) -> "Direction":
        order = (Direction.N, Direction.E, Direction.S, Direction.W)
        return order[(order.index(self) - 1) % 4]


#: Direction index used in feature vectors and serialized traces.
DIRECTION_INDEX = {Direction.N: 0, Direction.E: 1, Direction.S: 2, Direction.W: 3}
DIRECTION_BY_NAME = {d.name: d for d in Direction}


class ActionKind(IntEnum):
    """The eight primitive action kinds.

    The integer values are the canonical encoding used in feature vectors,
    CSV logs, and model outputs.
    """

    NOOP = 0
    MOVE_N = 1
    MOVE_E = 2
    MOVE_S = 3
    MOVE_W = 4
    ROTATE_CW = 5
    ROTATE_CCW = 6
    SHOOT = 7


MOVE_KINDS = {
    ActionKind.MOVE_N: Direction.N,
    ActionKind.MOVE_E: Direction.E,
    ActionKind.MOVE_S: Direction.S,
    ActionKind.MOVE_W: Direction.W,
}
KIND_FOR_DIRECTION = {d: k for k, d in MOVE_KINDS.items()}


@dataclass(frozen=True)
class Action:
    """One agent's choice for a tick.  ``target`` is only used by SHOOT."""

    kind: ActionKind
    target: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is ActionKind.SHOOT:
            if self.target is None:
                raise ValueError("shoot action requires a target agent id")
        elif self.target is not None:
            raise ValueError(f"{self.kind.name} takes no target")

    @staticmethod
    def noop() -> "Action":
        return Action(ActionKind.NOOP)

    @staticmethod
    def move(direction: Direction) -> "Action":
        return Action(KIND_FOR_DIRECTION[direction])

    @staticmethod
    def shoot(target: int) -> "Action":
        return Action(ActionKind.SHOOT, target)


class AgentKind(Enum):
    GUARD = "guard"
    AD_HOC_GUARD = "ad_hoc_guard"
    ATTACKER = "attacker"

    @property
    def is_guard(self) -> bool:
        return self is not AgentKind.ATTACKER


@dataclass
class AgentState:
    id: int
    kind: AgentKind
    x: int
    y: int
    direction: Direction
    alive: bool = True

    @property
    def pos(self) -> tuple[int, int]:
        return (self.x, self.y)


class ConfigError(ValueError):
    """Raised for structurally invalid grid configurations."""


def default_fort_cells(width: int, height: int) -> frozenset[tuple[int, int]]:
    """A three-cell strip centered on the top edge."""
    cx = width // 2
    return frozenset((cx + off, height - 1) for off in (-1, 0, 1))


@dataclass(frozen=True)
class GridConfig:
    width: int = 20
    height: int = 20
    fort_cells: Optional[frozenset[tuple[int, int]]] = None
    n_guards: int = 3
    n_attackers: int = 3
    shoot_range: float = 5.0
    shoot_arc_deg: float = 90.0
    max_steps: int = 100

    def __post_init__(self):
        if self.fort_cells is None:
            object.__setattr__(
                self, "fort_cells", default_fort_cells(self.width, self.height)
            )
        else:
            object.__setattr__(self, "fort_cells", frozenset(self.fort_cells))

    def validate(self) -> None:
        if self.width < 5 or self.height < 5:
            raise ConfigError("grid must be at least 5x5")
        if self.n_guards < 1 or self.n_attackers < 1:
            raise ConfigError("need at least one guard and one attacker")
        if not self.fort_cells:
            raise ConfigError("fort must contain at least one cell")
        for (x, y) in self.fort_cells:
            if not self.in_bounds(x, y):
                raise ConfigError(f"fort cell {(x, y)} out of bounds")
        if self.shoot_range <= 0:
            raise ConfigError("shoot_range must be positive")
        if not 0 < self.shoot_arc_deg <= 360:
            raise ConfigError("shoot_arc_deg must be in (0, 360]")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.n_guards > len(self._guard_spawn_cells()):
            raise ConfigError("not enough cells adjacent to the fort for guards")
        if self.n_attackers > len(self._attacker_spawn_cells()):
            raise ConfigError("not enough spawn-band cells for attackers")

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    @property
    def attacker_band_rows(self) -> int:
        """Rows (from y = 0 upward) in which attackers may spawn."""
        return max(1, self.height // 5)

    def _guard_spawn_cells(self) -> list[tuple[int, int]]:
        cells = set()
        for (fx, fy) in self.fort_cells:
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    if dx == dy == 0:
                        continue
                    c = (fx + dx, fy + dy)
                    if self.in_bounds(*c) and c not in self.fort_cells:
                        cells.add(c)
        return sorted(cells)

    def _attacker_spawn_cells(self) -> list[tuple[int, int]]:
        return sorted(
            (x, y)
            for x in range(self.width)
            for y in range(self.attacker_band_rows)
            if (x, y) not in self.fort_cells
        )


class Outcome(Enum):
    ATTACKERS_WIN_FORT = "attackers_win_fort"
    GUARDS_WIN_ELIMINATION = "guards_win_elimination"
    ATTACKERS_WIN_ELIMINATION = "attackers_win_elimination"
    GUARDS_WIN_TIMEOUT = "guards_win_timeout"

    @property
    def guards_win(self) -> bool:
        return self in (Outcome.GUARDS_WIN_ELIMINATION, Outcome.GUARDS_WIN_TIMEOUT)


@dataclass
class EpisodeResult:
    outcome: Outcome
    steps: int
    shots_fired: dict[int, int]
    shots_hit: dict[int, int]

    @property
    def guards_win(self) -> bool:
        return self.outcome.guards_win


@dataclass(frozen=True)
class ShotEvent:
    """One shot.  ``hit`` means the shot was lethal (target alive at tick
    start, inside range and arc).  When several shots kill the same target
    simultaneously, exactly one shooter is ``credited`` with the elimination
    (the highest shooter id, a fixed convention); accuracy statistics count
    credited eliminations over shots fired."""

    shooter: int
    target: int
    hit: bool
    credited: bool = False


@dataclass(frozen=True)
class IgnoredAction:
    """An action that was dropped or downgraded, with the reason."""

    agent: int
    reason: str


Event = Union[ShotEvent, IgnoredAction]


@dataclass
class WorldState:
    config: GridConfig
    agents: list[AgentState]
    step_count: int = 0
    shots_fired: dict[int, int] = field(default_factory=dict)
    shots_hit: dict[int, int] = field(default_factory=dict)

    def get(self, agent_id: int) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(f"no agent with id {agent_id}")

    def agent_at(self, x: int, y: int) -> Optional[AgentState]:
        for a in self.agents:
            if a.x == x and a.y == y:
                return a
        return None

    def occupied_cells(self) -> set[tuple[int, int]]:
        """Cells blocked for movement (live agents and corpses alike)."""
        return {a.pos for a in self.agents}

    def guards(self) -> list[AgentState]:
        return [a for a in self.agents if a.kind.is_guard]

    def attackers(self) -> list[AgentState]:
        return [a for a in self.agents if a.kind is AgentKind.ATTACKER]

    def copy(self) -> "WorldState":
        return WorldState(
            config=self.config,
            agents=[replace(a) for a in self.agents],
            step_count=self.step_count,
            shots_fired=dict(self.shots_fired),
            shots_hit=dict(self.shots_hit),
        )


def reset(config: GridConfig, seed: int, ad_hoc: bool = True) -> WorldState:
    """Create the initial state for an episode.

    Guards spawn in distinct cells adjacent to the fort facing south;
    attackers spawn in distinct cells of the bottom row band facing north.
    When ``ad_hoc`` is set, guard 0 is the ad hoc agent (the simulator treats
    it identically; the flag only marks which agent external controllers
    drive).
    """
    config.validate()
    rng = random.Random(seed)
    guard_cells = rng.sample(config._guard_spawn_cells(), config.n_guards)
    attacker_cells = rng.sample(config._attacker_spawn_cells(), config.n_attackers)
    agents = []
    for i, (x, y) in enumerate(guard_cells):
        kind = AgentKind.AD_HOC_GUARD if (ad_hoc and i == 0) else AgentKind.GUARD
        agents.append(AgentState(i, kind, x, y, Direction.S))
    for j, (x, y) in enumerate(attacker_cells):
        agents.append(
            AgentState(config.n_guards + j, AgentKind.ATTACKER, x, y, Direction.N)
        )
    ids = [a.id for a in agents]
    return WorldState(
        config=config,
        agents=agents,
        step_count=0,
        shots_fired={i: 0 for i in ids},
        shots_hit={i: 0 for i in ids},
    )


def fort_distance(config: GridConfig, x: float, y: float) -> float:
    """Euclidean distance from (x, y) to the nearest fort cell."""
    return min(math.hypot(x - fx, y - fy) for (fx, fy) in config.fort_cells)


def fort_center(config: GridConfig) -> tuple[float, float]:
    cells = sorted(config.fort_cells)
    return (
        sum(c[0] for c in cells) / len(cells),
        sum(c[1] for c in cells) / len(cells),
    )


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    while a <= -math.pi:
        a += 2 * math.pi
    while a > math.pi:
        a -= 2 * math.pi
    return a


def in_range(config: GridConfig, sx: int, sy: int, tx: int, ty: int) -> bool:
    return math.hypot(tx - sx, ty - sy) <= config.shoot_range + EPS


def in_arc(
    config: GridConfig, facing: Direction, sx: int, sy: int, tx: int, ty: int
) -> bool:
    """Whether (tx, ty) lies inside the facing cone from (sx, sy).

    The shooter's own cell is never in its arc.
    """
    dx, dy = tx - sx, ty - sy
    if dx == 0 and dy == 0:
        return False
    bearing = math.atan2(dx, dy)
    half = math.radians(config.shoot_arc_deg) / 2
    return abs(wrap_angle(bearing - facing.angle)) <= half + EPS


def clear_shot(config: GridConfig, shooter: AgentState, target: AgentState) -> bool:
    """Range-and-arc test between two agents at their current poses."""
    return in_range(config, shooter.x, shooter.y, target.x, target.y) and in_arc(
        config, shooter.direction, shooter.x, shooter.y, target.x, target.y
    )


def legal_actions(state: WorldState, agent_id: int) -> list[Action]:
    """All actions the agent may take this tick, in a fixed documented order.

    Order: noop, moves N/E/S/W, rotations cw/ccw, shots by target id.
    Moves must stay on the grid and target an unoccupied cell (corpses
    block).  Shots require a live enemy inside range and arc.  A dead agent
    can only noop.
    """
    agent = state.get(agent_id)
    if not agent.alive:
        return [Action.noop()]
    acts = [Action.noop()]
    occupied = state.occupied_cells()
    for kind, d in MOVE_KINDS.items():
        nx, ny = agent.x + d.dx, agent.y + d.dy
        if state.config.in_bounds(nx, ny) and (nx, ny) not in occupied:
            acts.append(Action(kind))
    acts.append(Action(ActionKind.ROTATE_CW))
    acts.append(Action(ActionKind.ROTATE_CCW))
    for other in sorted(state.agents, key=lambda a: a.id):
        if (
            other.alive
            and other.kind.is_guard is not agent.kind.is_guard
            and clear_shot(state.config, agent, other)
        ):
            acts.append(Action.shoot(other.id))
    return acts


def step(
    state: WorldState, actions: Mapping[int, Action]
) -> tuple[WorldState, list[Event]]:
    """Advance one tick with a joint action.

    Requires exactly one action per live agent; actions for dead agents are
    dropped with a warning event, unknown ids raise.  Shots resolve first
    against tick-start poses (a hit needs the target alive at tick start and
    inside range and arc -- anything else fires and misses); mutual shots
    kill both, and agents killed this tick neither move nor rotate.  Moves
    then resolve simultaneously: moves into cells of non-moving agents
    cancel, pairwise swaps cancel, and when several movers contest one cell
    the lowest agent id wins.  Off-grid or self-targeted moves downgrade to
    holds with a warning event.
    """
    if terminal(state) is not None:
        raise ValueError("cannot step a terminal state")
    by_id = {a.id: a for a in state.agents}
    for agent_id in actions:
        if agent_id not in by_id:
            raise ValueError(f"action supplied for unknown agent id {agent_id}")
    events: list[Event] = []
    effective: dict[int, Action] = {}
    for agent in state.agents:
        act = actions.get(agent.id)
        if not agent.alive:
            if act is not None:
                events.append(IgnoredAction(agent.id, "agent is dead"))
            continue
        if act is None:
            raise ValueError(f"missing action for live agent {agent.id}")
        if act.kind is ActionKind.SHOOT and act.target not in by_id:
            raise ValueError(
                f"agent {agent.id} shoots unknown target id {act.target}"
            )
        effective[agent.id] = act

    nxt = state.copy()
    nxt_by_id = {a.id: a for a in nxt.agents}

    # --- shots, simultaneously against tick-start poses ---
    lethal: dict[int, list[int]] = {}  # target id -> lethal shooter ids
    shot_pairs: list[tuple[int, int, bool]] = []
    for agent_id in sorted(effective):
        act = effective[agent_id]
        if act.kind is not ActionKind.SHOOT:
            continue
        shooter = by_id[agent_id]
        target = by_id[act.target]
        nxt.shots_fired[agent_id] += 1
        hit = target.alive and clear_shot(state.config, shooter, target)
        if hit:
            lethal.setdefault(target.id, []).append(agent_id)
        shot_pairs.append((agent_id, target.id, hit))
    credited_for = {target: max(shooters) for target, shooters in lethal.items()}
    for shooter_id, target_id, hit in shot_pairs:
        was_credited = hit and credited_for.get(target_id) == shooter_id
        if was_credited:
            nxt.shots_hit[shooter_id] += 1
        events.append(ShotEvent(shooter_id, target_id, hit, credited=was_credited))
    killed = set(lethal)
    for tid in killed:
        nxt_by_id[tid].alive = False

    # --- moves, for agents still alive after shot resolution ---
    dest: dict[int, tuple[int, int]] = {}
    for agent_id in sorted(effective):
        act = effective[agent_id]
        if act.kind not in MOVE_KINDS or agent_id in killed:
            continue
        agent = by_id[agent_id]
        d = MOVE_KINDS[act.kind]
        target_cell = (agent.x + d.dx, agent.y + d.dy)
        if not state.config.in_bounds(*target_cell):
            events.append(IgnoredAction(agent_id, "off-grid move resolved as hold"))
            continue
        dest[agent_id] = target_cell

    pos = {a.id: a.pos for a in state.agents}
    stationary_cells = {pos[i] for i in pos if i not in dest}
    while True:
        changed = False
        # moves into cells held by non-movers cancel
        for m in sorted(dest):
            if dest[m] in stationary_cells:
                stationary_cells.add(pos[m])
                del dest[m]
                changed = True
        # pairwise swaps cancel
        movers = sorted(dest)
        for i, m1 in enumerate(movers):
            if m1 not in dest:
                continue
            for m2 in movers[i + 1 :]:
                if m2 not in dest:
                    continue
                if dest[m1] == pos[m2] and dest[m2] == pos[m1]:
                    stationary_cells.add(pos[m1])
                    stationary_cells.add(pos[m2])
                    del dest[m1], dest[m2]
                    changed = True
                    break
        # several movers into one cell: lowest id wins
        by_cell: dict[tuple[int, int], list[int]] = {}
        for m in sorted(dest):
            by_cell.setdefault(dest[m], []).append(m)
        for cell, group in sorted(by_cell.items()):
            for loser in group[1:]:
                stationary_cells.add(pos[loser])
                del dest[loser]
                changed = True
        if not changed:
            break
    for agent_id, (nx_, ny_) in dest.items():
        nxt_by_id[agent_id].x, nxt_by_id[agent_id].y = nx_, ny_

    # --- rotations ---
    for agent_id in sorted(effective):
        act = effective[agent_id]
        if agent_id in killed:
            continue
        a = nxt_by_id[agent_id]
        if act.kind is ActionKind.ROTATE_CW:
            a.direction = a.direction.clockwise()
        elif act.kind is ActionKind.ROTATE_CCW:
            a.direction = a.direction.counterclockwise()

    nxt.step_count += 1
    return nxt, events


def terminal(state: WorldState) -> Optional[EpisodeResult]:
    """Episode result if the state is terminal, else None.

    Checked in precedence order: an attacker stands on a fort cell; all
    attackers dead; all guards dead; step limit reached.
    """
    attackers = state.attackers()
    guards = state.guards()
    outcome = None
    if any(a.alive and a.pos in state.config.fort_cells for a in attackers):
        outcome = Outcome.ATTACKERS_WIN_FORT
    elif not any(a.alive for a in attackers):
        outcome = Outcome.GUARDS_WIN_ELIMINATION
    elif not any(g.alive for g in guards):
        outcome = Outcome.ATTACKERS_WIN_ELIMINATION
    elif state.step_count >= state.config.max_steps:
        outcome = Outcome.GUARDS_WIN_TIMEOUT
    if outcome is None:
        return None
    return EpisodeResult(
        outcome=outcome,
        steps=state.step_count,
        shots_fired=dict(state.shots_fired),
        shots_hit=dict(state.shots_hit),
    )


def state_to_dict(state: WorldState) -> dict:
    """JSON-friendly snapshot with deterministic ordering."""
    return {
        "step": state.step_count,
        "agents": [
            {
                "id": a.id,
                "kind": a.kind.value,
                "x": a.x,
                "y": a.y,
                "dir": a.direction.name,
                "alive": a.alive,
            }
            for a in sorted(state.agents, key=lambda a: a.id)
        ],
    }


def render(state: WorldState) -> str:
    """ASCII picture of the grid (north at the top) for demos and debugging."""
    cfg = state.config
    rows = []
    by_pos = {a.pos: a for a in state.agents}
    for y in range(cfg.height - 1, -1, -1):
        row = []
        for x in range(cfg.width):
            a = by_pos.get((x, y))
            if a is not None:
                if not a.alive:
                    ch = "x"
                elif a.kind is AgentKind.ATTACKER:
                    ch = "a"
                elif a.kind is AgentKind.AD_HOC_GUARD:
                    ch = "H"
                else:
                    ch = "G"
            elif (x, y) in cfg.fort_cells:
                ch = "#"
            else:
                ch = "."
            row.append(ch)
        rows.append("".join(row))
    return "\n".join(rows)
