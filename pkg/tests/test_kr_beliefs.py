"""Belief progression, executability, window retraction, defined-fluent
closure, and consistency-restoring initial completion.

The completion tests include a brute-force oracle: every subset of ground
default instances is enumerated and the minimal consistent retraction is
computed independently, then compared with the engine's answer.
"""

import itertools

import pytest

from fortdefense.env import GridConfig, reset
from fortdefense.kr.beliefs import (
    Belief,
    HardInconsistencyError,
    History,
    InconsistencyError,
    NotExecutableError,
    belief_from_world,
    check_executable,
    close_defined,
    complete_initial,
    observe_world,
    progress,
    validate,
)
from fortdefense.kr.ground import GroundedDomain, ground
from fortdefense.kr.lang import Atom, Literal, parse_domain


def shipped_domain():
    from importlib import resources

    return parse_domain(
        resources.files("fortdefense").joinpath("data/fort_attack.dom").read_text()
    )


def fort_gdom(config=None) -> GroundedDomain:
    return ground(shipped_domain(), config or GridConfig())


def guard_belief(gdom, entries) -> Belief:
    """entries: list of (symbol, x, y, facing, alive)."""
    atoms = []
    for sym, x, y, d, alive in entries:
        atoms.append(Atom("in", (sym, x, y)))
        atoms.append(Atom("face", (sym, d)))
        if not alive:
            atoms.append(Atom("shot", (sym,)))
    return Belief(close_defined(atoms, gdom))


# ---------------------------------------------------------------------------
# progression
# ---------------------------------------------------------------------------


def test_move_updates_position_and_retracts_the_old_cell():
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [("guard0", 3, 13, "e", True), ("attacker1", 10, 14, "n", True)],
    )
    b2 = progress(b, (Atom("move", ("guard0", 3, 14)),), gdom)
    assert Atom("in", ("guard0", 3, 14)) in b2.atoms
    assert Atom("in", ("guard0", 3, 13)) not in b2.atoms
    # facing and the other agent are untouched by inertia
    assert Atom("face", ("guard0", "e")) in b2.atoms
    assert Atom("in", ("attacker1", 10, 14)) in b2.atoms
    # defined region membership tracks the new cell
    assert Atom("agent_in", ("guard0", "r15")) in b2.atoms
    assert Atom("agent_in", ("guard0", "r15")) != Atom("agent_in", ("guard0", "r0"))
    validate(b2, gdom)


def test_rotate_replaces_facing():
    gdom = fort_gdom()
    b = guard_belief(gdom, [("guard0", 5, 5, "n", True)])
    b2 = progress(b, (Atom("rotate", ("guard0", "e")),), gdom)
    assert Atom("face", ("guard0", "e")) in b2.atoms
    assert Atom("face", ("guard0", "n")) not in b2.atoms
    assert Atom("agent_face", ("guard0", "e")) in b2.atoms


def test_shoot_marks_target_and_corpse_keeps_blocking():
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [("guard0", 5, 5, "n", True), ("attacker1", 5, 9, "s", True)],
    )
    b2 = progress(b, (Atom("shoot", ("guard0", "attacker1")),), gdom)
    assert Atom("shot", ("attacker1",)) in b2.atoms
    assert Atom("agent_shot", ("attacker1",)) in b2.atoms
    # the corpse still occupies its cell
    assert Atom("in", ("attacker1", 5, 9)) in b2.atoms
    # moving onto the corpse is now impossible
    ok, blocker = check_executable(
        Belief(close_defined([*b2.atoms, Atom("in", ("guard1", 5, 8))], gdom)),
        Atom("move", ("guard1", 5, 9)),
        gdom,
    )
    assert not ok and blocker[0].axiom_id == "exec:2"


def test_empty_action_set_is_the_inertial_fixpoint():
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 10, 14, "n", False)],
    )
    assert progress(b, (), gdom) == b
    assert progress(b, (Atom("noop", ("guard0",)),), gdom) == b


def test_simultaneous_own_and_exogenous_actions():
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [("guard0", 2, 14, "e", True), ("attacker1", 10, 14, "w", True)],
    )
    b2 = progress(
        b,
        (
            Atom("move", ("guard0", 3, 14)),
            Atom("agent_move", ("attacker1", 9, 14)),
        ),
        gdom,
    )
    assert Atom("in", ("guard0", 3, 14)) in b2.atoms
    assert Atom("in", ("attacker1", 9, 14)) in b2.atoms
    assert Atom("in", ("guard0", 2, 14)) not in b2.atoms
    assert Atom("in", ("attacker1", 10, 14)) not in b2.atoms


def test_exogenous_shot_needs_line_of_sight_condition():
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [("guard0", 5, 5, "n", True), ("attacker1", 5, 9, "s", True)],
    )
    # attacker fires facing south at the guard 4 cells below: in sight
    b2 = progress(b, (Atom("agent_shoot", ("attacker1", "guard0")),), gdom)
    assert Atom("shot", ("guard0",)) in b2.atoms
    # same shot attempted while facing away has no effect (conditional law)
    b_away = guard_belief(
        gdom,
        [("guard0", 5, 5, "n", True), ("attacker1", 5, 9, "n", True)],
    )
    b3 = progress(b_away, (Atom("agent_shoot", ("attacker1", "guard0")),), gdom)
    assert Atom("shot", ("guard0",)) not in b3.atoms


# ---------------------------------------------------------------------------
# executability
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "action, axiom",
    [
        (Atom("move", ("guard0", 7, 7)), "exec:1"),  # not adjacent
        (Atom("move", ("guard0", 5, 6)), "exec:2"),  # occupied by attacker1
        (Atom("rotate", ("guard0", "n")), "exec:4"),  # already facing n
        (Atom("rotate", ("guard0", "s")), "exec:5"),  # opposite of n
        (Atom("shoot", ("guard0", "attacker2")), "exec:7"),  # target down
        (Atom("shoot", ("guard0", "attacker3")), "exec:9"),  # out of range
    ],
)
def test_blocked_actions_cite_their_rule(action, axiom):
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [
            ("guard0", 5, 5, "n", True),
            ("attacker1", 5, 6, "s", True),
            ("attacker2", 6, 6, "s", False),
            ("attacker3", 18, 18, "s", True),
        ],
    )
    ok, blocker = check_executable(b, action, gdom)
    assert not ok
    assert blocker[0].axiom_id == axiom
    with pytest.raises(NotExecutableError) as err:
        progress(b, (action,), gdom)
    assert err.value.axiom_id == axiom


def test_dead_agents_cannot_act():
    gdom = fort_gdom()
    b = guard_belief(gdom, [("guard0", 5, 5, "n", False)])
    for action in (
        Atom("move", ("guard0", 5, 6)),
        Atom("rotate", ("guard0", "e")),
    ):
        ok, blocker = check_executable(b, action, gdom)
        assert not ok
        assert blocker[0].axiom_id in ("exec:3", "exec:6")


def test_blocked_exogenous_actions_can_be_dropped():
    gdom = fort_gdom()
    b = guard_belief(
        gdom,
        [("guard0", 5, 5, "n", True), ("attacker1", 5, 6, "s", True)],
    )
    # predicted attacker move onto the guard's cell is illegal: dropped
    b2 = progress(
        b,
        (Atom("agent_move", ("attacker1", 5, 5)),),
        gdom,
        on_blocked="drop",
    )
    assert Atom("in", ("attacker1", 5, 6)) in b2.atoms
    assert b2 == b
    with pytest.raises(NotExecutableError):
        progress(b, (Atom("agent_move", ("attacker1", 5, 5)),), gdom)


# ---------------------------------------------------------------------------
# effect conflicts and window interactions
# ---------------------------------------------------------------------------

CONFLICT = """
sort s.
fluent inertial f(s).
fluent inertial g(s).
action a(s).
action b(s).
a(X) causes f(X).
b(X) causes g(X).
-f(X) if g(X).
"""


def test_window_retracting_a_direct_effect_is_an_inconsistency():
    desc = parse_domain(CONFLICT)
    gdom = ground(desc, sorts={"s": ("o",)})
    b = Belief(close_defined([], gdom))
    with pytest.raises(InconsistencyError) as err:
        progress(b, (Atom("a", ("o",)), Atom("b", ("o",))), gdom)
    assert err.value.axiom_id == "constraint:1"


def test_window_silently_retracts_inherited_atoms():
    desc = parse_domain(CONFLICT)
    gdom = ground(desc, sorts={"s": ("o",)})
    b = Belief([Atom("f", ("o",))])
    b2 = progress(b, (Atom("b", ("o",)),), gdom)
    assert Atom("g", ("o",)) in b2.atoms
    assert Atom("f", ("o",)) not in b2.atoms  # inertia yields to the window


def test_direct_effect_conflict_raises():
    desc = parse_domain(
        "sort s. fluent inertial f(s). action a(s). action b(s). "
        "a(X) causes f(X). b(X) causes -f(X)."
    )
    gdom = ground(desc, sorts={"s": ("o",)})
    b = Belief([])
    with pytest.raises(InconsistencyError):
        progress(b, (Atom("a", ("o",)), Atom("b", ("o",))), gdom)


def test_positive_window_derives_support():
    desc = parse_domain(
        "sort s. fluent inertial f(s). fluent inertial g(s). action a(s). "
        "a(X) causes f(X). g(X) if f(X)."
    )
    gdom = ground(desc, sorts={"s": ("o",)})
    b2 = progress(Belief([]), (Atom("a", ("o",)),), gdom)
    assert Atom("g", ("o",)) in b2.atoms


def test_progress_is_deterministic_under_input_order():
    gdom = fort_gdom()
    entries = [
        ("guard0", 2, 14, "e", True),
        ("guard1", 9, 18, "s", True),
        ("attacker1", 10, 14, "w", True),
        ("attacker2", 4, 2, "n", True),
    ]
    acts = (
        Atom("move", ("guard0", 3, 14)),
        Atom("agent_move", ("attacker1", 9, 14)),
        Atom("agent_rotate", ("attacker2", "e")),
    )
    results = set()
    for perm in itertools.permutations(entries):
        b = guard_belief(gdom, list(perm))
        for act_perm in itertools.permutations(acts):
            results.add(progress(b, act_perm, gdom))
    assert len(results) == 1


# ---------------------------------------------------------------------------
# observation bridge
# ---------------------------------------------------------------------------


def test_observe_world_covers_every_agent():
    config = GridConfig()
    gdom = fort_gdom(config)
    state = reset(config, seed=7)
    obs = observe_world(state, gdom)
    n_agents = config.n_guards + config.n_attackers
    assert len(obs) == 3 * n_agents
    assert sum(1 for lit in obs if not lit.positive) == n_agents  # -shot(...)
    b = belief_from_world(state, gdom)
    validate(b, gdom)
    for agent in state.agents:
        assert Atom("in", (f"guard{agent.id}" if agent.id < config.n_guards else
                           f"attacker{agent.id - config.n_guards + 1}",
                           agent.x, agent.y)) in b.atoms


def test_belief_from_world_marks_dead_agents():
    config = GridConfig()
    gdom = fort_gdom(config)
    state = reset(config, seed=7)
    stale = state.copy()
    stale.agents[4].alive = False
    b = belief_from_world(stale, gdom)
    assert Atom("shot", ("attacker2",)) in b.atoms
    assert Atom("agent_shot", ("attacker2",)) in b.atoms
    # corpse pose still recorded
    assert Atom("in", ("attacker2", stale.agents[4].x, stale.agents[4].y)) in b.atoms


# ---------------------------------------------------------------------------
# initial completion with consistency-restoring defaults
# ---------------------------------------------------------------------------


def test_completion_applies_all_defaults_when_consistent():
    config = GridConfig()
    gdom = fort_gdom(config)
    state = reset(config, seed=3)
    obs = observe_world(state, gdom)
    result = complete_initial(obs, gdom)
    assert result.retracted == ()
    applied = {inst.conclusion for inst in result.applied}
    assert applied == {
        Atom("spread_attack", ("attacker1",)),
        Atom("spread_attack", ("attacker2",)),
        Atom("spread_attack", ("attacker3",)),
    }
    for atom in applied:
        assert atom in result.belief.atoms


def test_completion_respects_negative_observations():
    config = GridConfig()
    gdom = fort_gdom(config)
    state = reset(config, seed=3)
    obs = observe_world(state, gdom)
    obs.append(Literal(Atom("spread_attack", ("attacker2",)), False))
    result = complete_initial(obs, gdom)
    retracted = {inst.conclusion for inst in result.retracted}
    assert retracted == {Atom("spread_attack", ("attacker2",))}
    assert Atom("spread_attack", ("attacker2",)) not in result.belief.atoms
    assert Atom("spread_attack", ("attacker1",)) in result.belief.atoms


PAIRED = """
sort item.
fluent inertial on(item).
fluent inertial bad(item).
initial default on(I) if item(I).
-on(i1) if on(i2).
-on(i3) if on(i4), on(i5).
"""


def brute_force_completion(observed_neg, forbidden):
    """Minimal retraction by exhaustive subset search over six instances.

    ``forbidden`` is a list of (victim, support_set): victim must be off
    whenever all supports are on.  Returns the lexicographically first
    minimal drop set as a tuple of item names.
    """
    items = [f"i{k}" for k in range(1, 7)]
    n = len(items)
    for size in range(n + 1):
        for drop in itertools.combinations(range(n), size):
            kept = {items[i] for i in range(n) if i not in drop}
            kept -= set()
            if kept & observed_neg:
                continue
            ok = all(
                not (set(support) <= kept and victim in kept)
                for victim, support in forbidden
            )
            if ok:
                return tuple(items[i] for i in drop)
    return None


def test_completion_matches_brute_force_on_the_paired_fixture():
    desc = parse_domain(PAIRED)
    gdom = ground(desc, sorts={"item": tuple(f"i{k}" for k in range(1, 7))})
    forbidden = [("i1", {"i2"}), ("i3", {"i4", "i5"})]
    for neg in [set(), {"i2"}, {"i4"}, {"i1", "i3"}, {"i6"}]:
        obs = [Literal(Atom("on", (i,)), False) for i in sorted(neg)]
        result = complete_initial(obs, gdom)
        dropped = tuple(inst.conclusion.args[0] for inst in result.retracted)
        # defaults whose conclusion is directly denied are retracted too
        oracle = brute_force_completion(neg, forbidden)
        assert dropped == oracle, (neg, dropped, oracle)
        validate(result.belief, gdom)


def test_completion_minimality_prefers_fewest_retractions():
    desc = parse_domain(PAIRED)
    gdom = ground(desc, sorts={"item": tuple(f"i{k}" for k in range(1, 7))})
    result = complete_initial([], gdom)
    # dropping i1 alone satisfies both windows (i3 stays: needs i4 AND i5...
    # which both hold, so the second window needs a drop among {i3,i4,i5})
    assert len(result.retracted) == 2
    dropped = {inst.conclusion.args[0] for inst in result.retracted}
    assert dropped == {"i1", "i3"}  # lexicographically least minimal pair


def test_hard_inconsistency_when_observations_conflict():
    desc = parse_domain(
        "sort item. fluent inertial on(item). -on(i1) if on(i2)."
    )
    gdom = ground(desc, sorts={"item": ("i1", "i2")})
    obs = [
        Literal(Atom("on", ("i1",)), True),
        Literal(Atom("on", ("i2",)), True),
    ]
    with pytest.raises(HardInconsistencyError):
        complete_initial(obs, gdom)


def test_history_records_and_queries():
    h = History()
    h.observe(0, [Literal(Atom("in", ("guard0", 1, 1)), True)])
    h.record(0, [Atom("noop", ("guard0",))])
    h.observe(1, [Literal(Atom("in", ("guard0", 1, 2)), True)])
    assert len(h.observations_at(0)) == 1
    assert h.actions_at(0) == [Atom("noop", ("guard0",))]
    assert h.actions_at(1) == []
