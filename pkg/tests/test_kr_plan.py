"""Breadth-first planner: optimality, canonical tie order, exogenous
schedules, and agreement with an independently written search oracle.

The oracle below re-derives candidate actions straight from the belief
atoms and runs a textbook BFS; the production planner must produce the
identical action sequence on every instance.
"""

from collections import deque

from fortdefense.env import GridConfig
from fortdefense.kr.beliefs import Belief, check_executable, close_defined, progress
from fortdefense.kr.goals import Goal, corridor_regions, select_goal
from fortdefense.kr.ground import ground
from fortdefense.kr.lang import Atom, Literal, parse_domain
from fortdefense.kr.plan import candidate_actions, goal_holds, plan, replay


def shipped_domain():
    from importlib import resources

    return parse_domain(
        resources.files("fortdefense").joinpath("data/fort_attack.dom").read_text()
    )


def belief_of(gdom, entries):
    atoms = []
    for sym, x, y, d, alive in entries:
        atoms.append(Atom("in", (sym, x, y)))
        atoms.append(Atom("face", (sym, d)))
        if not alive:
            atoms.append(Atom("shot", (sym,)))
    return Belief(close_defined(atoms, gdom))


# ---------------------------------------------------------------------------
# independent oracle
# ---------------------------------------------------------------------------

_ORACLE_CW = {"n": "e", "e": "s", "s": "w", "w": "n"}
_ORACLE_CCW = {"e": "n", "s": "e", "w": "s", "n": "w"}


def oracle_candidates(belief, gdom):
    """Canonical action order, written directly from the contract: shoot
    by attacker index, then moves n/e/s/w, rotate clockwise, rotate
    counterclockwise, noop."""
    ah = gdom.sorts["ah_agent"][0]
    x = y = d = None
    for atom in belief.atoms:
        if atom.pred == "in" and atom.args[0] == ah:
            x, y = atom.args[1], atom.args[2]
        if atom.pred == "face" and atom.args[0] == ah:
            d = atom.args[1]
    acts = []
    for sym in sorted(gdom.sorts["attacker"], key=lambda s: int(s[8:])):
        acts.append(Atom("shoot", (ah, sym)))
    for tx, ty in ((x, y + 1), (x + 1, y), (x, y - 1), (x - 1, y)):
        if (tx, ty) in gdom.active_cells:
            acts.append(Atom("move", (ah, tx, ty)))
    acts.append(Atom("rotate", (ah, _ORACLE_CW[d])))
    acts.append(Atom("rotate", (ah, _ORACLE_CCW[d])))
    acts.append(Atom("noop", (ah,)))
    return acts


def oracle_bfs(belief, goal, gdom, horizon, schedule=()):
    exo = [tuple(s) for s in schedule] + [()] * horizon
    if all(belief.holds(l) for l in goal.literals):
        return (), True
    seen = {(belief.atoms, 0)}
    queue = deque([(belief, ())])
    while queue:
        b, path = queue.popleft()
        if len(path) >= horizon:
            continue
        for act in oracle_candidates(b, gdom):
            ok, _ = check_executable(b, act, gdom)
            if not ok:
                continue
            nb = progress(
                b,
                (act,) + exo[len(path)],
                gdom,
                on_blocked="drop",
                checked=frozenset((act,)),
            )
            p2 = path + (act,)
            if all(nb.holds(l) for l in goal.literals):
                return p2, True
            key = (nb.atoms, len(p2))
            if key not in seen:
                seen.add(key)
                queue.append((nb, p2))
    return (), False


# ---------------------------------------------------------------------------
# the worked interception scenario
# ---------------------------------------------------------------------------


def interception_fixture():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = ground(shipped_domain(), config)
    b = belief_of(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 10, 14, "w", True)],
    )
    return config, gdom, b


def test_interception_plan_is_three_moves_then_shoot():
    config, gdom, b = interception_fixture()
    goal = select_goal(b, gdom)
    assert goal.kind == "shoot_target"
    result = plan(b, goal, gdom, horizon=8)
    assert result.success
    assert result.actions == (
        Atom("move", ("guard0", 3, 14)),
        Atom("move", ("guard0", 4, 14)),
        Atom("move", ("guard0", 5, 14)),
        Atom("shoot", ("guard0", "attacker1")),
    )
    final = replay(b, result.actions, gdom)
    assert goal_holds(final, goal)
    assert Atom("shot", ("attacker1",)) in final.atoms


def test_interception_plan_unchanged_under_granularity_restriction():
    config = GridConfig(n_guards=1, n_attackers=1)
    fine = {"r22", "r15", "r16", "r17"} | corridor_regions(config, (2, 14), (10, 14))
    gdom = ground(shipped_domain(), config, fine_regions=fine)
    b = belief_of(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 10, 14, "w", True)],
    )
    goal = select_goal(b, gdom)
    result = plan(b, goal, gdom, horizon=8)
    assert [a.pred for a in result.actions] == ["move", "move", "move", "shoot"]
    assert result.actions[2] == Atom("move", ("guard0", 5, 14))
    # the restricted search grounds far fewer cell-level actions
    assert len(gdom.active_cells) < config.width * config.height / 3


def test_interception_agrees_with_oracle():
    _, gdom, b = interception_fixture()
    goal = select_goal(b, gdom)
    result = plan(b, goal, gdom, horizon=8)
    oracle_actions, oracle_ok = oracle_bfs(b, goal, gdom, horizon=8)
    assert (result.actions, result.success) == (oracle_actions, oracle_ok)


# ---------------------------------------------------------------------------
# planner behavior
# ---------------------------------------------------------------------------


def test_satisfied_goal_yields_empty_plan():
    _, gdom, b = interception_fixture()
    goal = Goal(
        "hold_position", None, (Literal(Atom("face", ("guard0", "e")), True),)
    )
    result = plan(b, goal, gdom)
    assert result.success and result.actions == () and result.expanded == 0


def test_unreachable_goal_fails_within_horizon():
    _, gdom, b = interception_fixture()
    goal = Goal(
        "shoot_target", "attacker1", (Literal(Atom("shot", ("attacker1",)), True),)
    )
    result = plan(b, goal, gdom, horizon=2)
    assert not result.success
    assert result.actions == ()
    assert result.expanded > 0


def test_canonical_tie_break_prefers_the_earlier_move():
    # a wide-arc shooter one step from two equally good firing cells must
    # pick the move that comes first in the canonical order (north)
    config = GridConfig(n_guards=1, n_attackers=1, shoot_arc_deg=180.0)
    gdom = ground(shipped_domain(), config)
    b = belief_of(
        gdom,
        [("guard0", 5, 5, "n", True), ("attacker1", 9, 9, "s", True)],
    )
    goal = select_goal(b, gdom)
    assert goal.kind == "shoot_target"
    result = plan(b, goal, gdom)
    assert result.actions == (
        Atom("move", ("guard0", 5, 6)),
        Atom("shoot", ("guard0", "attacker1")),
    )
    oracle_actions, _ = oracle_bfs(b, goal, gdom, horizon=8)
    assert result.actions == oracle_actions


def test_rotation_actions_are_absolute_directions():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = ground(shipped_domain(), config)
    b = belief_of(
        gdom,
        [("guard0", 5, 5, "n", True), ("attacker1", 1, 5, "e", True)],
    )
    goal = Goal(
        "hold_position", None, (Literal(Atom("face", ("guard0", "w")), True),)
    )
    result = plan(b, goal, gdom)
    assert result.actions == (Atom("rotate", ("guard0", "w")),)


def test_schedule_lets_the_planner_intercept_a_moving_target():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = ground(shipped_domain(), config)
    b = belief_of(
        gdom,
        [("guard0", 5, 5, "e", True), ("attacker1", 13, 5, "w", True)],
    )
    goal = select_goal(b, gdom)
    assert goal.kind == "shoot_target"
    schedule = [
        (Atom("agent_move", ("attacker1", 13 - k - 1, 5)),) for k in range(6)
    ]
    moving = plan(b, goal, gdom, horizon=8, schedule=schedule)
    static = plan(b, goal, gdom, horizon=8)
    assert moving.success and static.success
    assert len(moving.actions) == 3  # closing speed 2 cells per tick
    assert len(static.actions) == 4
    assert moving.actions[-1].pred == "shoot"
    oracle_actions, _ = oracle_bfs(b, goal, gdom, horizon=8, schedule=schedule)
    assert moving.actions == oracle_actions
    final = replay(b, moving.actions, gdom, schedule=schedule)
    assert goal_holds(final, goal)


def test_candidate_actions_follow_canonical_order():
    _, gdom, b = interception_fixture()
    acts = candidate_actions(b, gdom)
    preds = [a.pred for a in acts]
    assert preds == ["shoot", "move", "move", "move", "move", "rotate", "rotate", "noop"]
    # moves come in n, e, s, w target order
    assert [a.args[1:] for a in acts if a.pred == "move"] == [
        (2, 15), (3, 14), (2, 13), (1, 14)
    ]
    # rotations: clockwise from east is south, counterclockwise is north
    assert [a.args[1] for a in acts if a.pred == "rotate"] == ["s", "n"]


def test_oracle_family_small_grid():
    """Exhaustive 5x5 sweep: every guard cell against a fixed attacker,
    two facings, planner output must equal the oracle everywhere."""
    config = GridConfig(
        width=5, height=5, n_guards=1, n_attackers=1, shoot_range=2.0
    )
    gdom = ground(shipped_domain(), config)
    checked = 0
    for gx in range(5):
        for gy in range(5):
            for facing in ("n", "e"):
                if (gx, gy) == (4, 4):
                    continue  # attacker cell
                b = belief_of(
                    gdom,
                    [
                        ("guard0", gx, gy, facing, True),
                        ("attacker1", 4, 4, "s", True),
                    ],
                )
                goal = select_goal(b, gdom)
                got = plan(b, goal, gdom, horizon=6)
                want_actions, want_ok = oracle_bfs(b, goal, gdom, horizon=6)
                assert (got.actions, got.success) == (want_actions, want_ok), (
                    gx, gy, facing, goal,
                )
                checked += 1
    assert checked == 48
