"""Goal-priority rule and relevance-driven granularity."""

from fortdefense.env import GridConfig
from fortdefense.kr.beliefs import Belief, close_defined
from fortdefense.kr.goals import (
    Goal,
    compute_relevance,
    corridor_regions,
    fort_adjacent_regions,
    pose_of,
    region_center,
    select_goal,
)
from fortdefense.kr.ground import ground, region_symbol_of
from fortdefense.kr.lang import Atom, Literal, parse_domain


def shipped_domain():
    from importlib import resources

    return parse_domain(
        resources.files("fortdefense").joinpath("data/fort_attack.dom").read_text()
    )


def make_gdom(config):
    return ground(shipped_domain(), config)


def belief_of(gdom, entries):
    atoms = []
    for sym, x, y, d, alive in entries:
        atoms.append(Atom("in", (sym, x, y)))
        atoms.append(Atom("face", (sym, d)))
        if not alive:
            atoms.append(Atom("shot", (sym,)))
    return Belief(close_defined(atoms, gdom))


def test_shoot_goal_at_reach_boundary():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 10, 14, "w", True)],
    )
    goal = select_goal(b, gdom)  # distance 8 == shoot_range + pursuit margin
    assert goal.kind == "shoot_target"
    assert goal.target == "attacker1"
    assert goal.literals == (Literal(Atom("shot", ("attacker1",)), True),)


def test_beyond_reach_falls_through_to_region_goal():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [("guard0", 0, 0, "n", True), ("attacker1", 19, 0, "n", True)],
    )
    goal = select_goal(b, gdom)
    assert goal.kind == "occupy_region"
    # fort-adjacent candidates are r17, r21, r22, r23; the attacker at
    # (19, 0) is closest to r17's center
    assert goal.target == "r17"
    assert goal.literals == (Literal(Atom("agent_in", ("guard0", "r17")), True),)


def test_nearest_attacker_wins_with_ties_to_lowest_index():
    config = GridConfig(n_guards=1, n_attackers=3)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [
            ("guard0", 10, 10, "n", True),
            ("attacker1", 10, 16, "s", True),  # distance 6
            ("attacker2", 10, 15, "s", True),  # distance 5: nearest
            ("attacker3", 15, 10, "w", True),  # distance 5 tie with 2
        ],
    )
    goal = select_goal(b, gdom)
    assert goal.kind == "shoot_target"
    assert goal.target == "attacker2"


def test_dead_attackers_are_ignored():
    config = GridConfig(n_guards=1, n_attackers=2)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [
            ("guard0", 10, 10, "n", True),
            ("attacker1", 10, 12, "s", False),
            ("attacker2", 19, 19, "n", True),
        ],
    )
    goal = select_goal(b, gdom)
    assert goal.kind != "shoot_target" or goal.target != "attacker1"


def test_predicted_position_can_pull_target_into_reach():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 11, 14, "w", True)],
    )
    assert select_goal(b, gdom).kind != "shoot_target"  # distance 9
    goal = select_goal(b, gdom, predicted_next={"attacker1": (10, 14)})
    assert goal.kind == "shoot_target"
    assert goal.target == "attacker1"


def test_hold_position_faces_the_nearest_attacker():
    config = GridConfig(n_guards=4, n_attackers=1)
    gdom = make_gdom(config)
    # every fort-adjacent region is guarded, attacker far to the east
    b = belief_of(
        gdom,
        [
            ("guard0", 9, 13, "n", True),  # r17
            ("guard1", 5, 17, "s", True),  # r21
            ("guard2", 9, 17, "s", True),  # r22
            ("guard3", 13, 17, "s", True),  # r23
            ("attacker1", 19, 13, "w", True),
        ],
    )
    goal = select_goal(b, gdom)
    assert goal.kind == "hold_position"
    assert goal.literals == (Literal(Atom("face", ("guard0", "e")), True),)


def test_no_living_attackers_holds_with_empty_goal():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [("guard0", 10, 10, "n", True), ("attacker1", 19, 19, "n", False)],
    )
    goal = select_goal(b, gdom)
    assert goal.kind == "hold_position"
    assert goal.literals == ()


def test_fort_adjacent_regions_default_grid():
    gdom = make_gdom(GridConfig())
    assert fort_adjacent_regions(gdom) == frozenset({"r17", "r21", "r22", "r23"})


def test_region_center_is_cell_average():
    gdom = make_gdom(GridConfig())
    assert region_center(gdom, "r0") == (1.5, 1.5)
    assert region_center(gdom, "r22") == (9.5, 17.5)


def test_pose_extraction():
    gdom = make_gdom(GridConfig(n_guards=1, n_attackers=1))
    b = belief_of(gdom, [("guard0", 4, 7, "w", True)])
    assert pose_of(b, "guard0") == (4, 7, "w")
    assert pose_of(b, "attacker1") is None


def test_relevance_marks_positional_regions_fine():
    config = GridConfig(n_guards=1, n_attackers=2)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [
            ("guard0", 2, 14, "e", True),   # r15
            ("attacker1", 10, 14, "w", True),  # r17
            ("attacker2", 0, 0, "n", False),  # dead: not relevant
        ],
    )
    fine, granularity = compute_relevance(
        b, None, {"attacker1": (9, 14)}, gdom
    )
    assert fine == frozenset({"r15", "r17", "r22"})
    assert granularity["r15"] == "fine"
    assert granularity["r0"] == "coarse"
    assert set(granularity) == set(
        f"r{k}" for k in range(25)
    )


def test_relevance_extra_regions_and_corridor():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 10, 14, "w", True)],
    )
    corridor = corridor_regions(config, (2, 14), (10, 14))
    assert corridor == frozenset({"r15", "r16", "r17"})
    fine, _ = compute_relevance(b, None, None, gdom, extra=corridor)
    assert corridor <= fine
    assert "r22" in fine  # fort stays fine


def test_predicted_cell_region_joins_fine_set():
    config = GridConfig(n_guards=1, n_attackers=1)
    gdom = make_gdom(config)
    b = belief_of(
        gdom,
        [("guard0", 0, 0, "n", True), ("attacker1", 4, 0, "w", True)],
    )
    fine_without, _ = compute_relevance(b, None, None, gdom)
    fine_with, _ = compute_relevance(b, None, {"attacker1": (3, 0)}, gdom)
    assert "r0" in fine_with and "r1" in fine_with
    assert fine_without <= fine_with
