"""Policy behavior tests: pinned fixtures, legality, and team-shape
invariants, plus the mix-selection frequency check."""

from __future__ import annotations

import itertools
import math
import random

import pytest

from fortdefense.env import (
    MOVE_KINDS,
    Action,
    ActionKind,
    AgentKind,
    AgentState,
    Direction,
    GridConfig,
    WorldState,
    fort_distance,
    legal_actions,
    reset,
    step,
    terminal,
)
from fortdefense.policies import (
    BUILTIN_NAMES,
    POLICY_NAMES,
    PolicySpec,
    make_mix,
    make_policy,
    policy_action,
)


def agent_rng(seed: int, step_count: int, agent_id: int) -> random.Random:
    return random.Random((seed * 1_000_003 + step_count) * 1_000_003 + agent_id)


def make_state(config, agents, step_count=0) -> WorldState:
    ids = [a.id for a in agents]
    return WorldState(
        config=config,
        agents=agents,
        step_count=step_count,
        shots_fired={i: 0 for i in ids},
        shots_hit={i: 0 for i in ids},
    )


def run_episode(name: str, seed: int, on_tick=None, max_steps=100):
    config = GridConfig(max_steps=max_steps)
    spec = make_policy(name)
    state = reset(config, seed, ad_hoc=False)
    while terminal(state) is None:
        joint = {}
        for agent in state.agents:
            if agent.alive:
                rng = agent_rng(seed, state.step_count, agent.id)
                joint[agent.id] = policy_action(spec, state, agent.id, rng)
        if on_tick is not None:
            on_tick(state, joint)
        state, _ = step(state, joint)
    return terminal(state)


# ---------------------------------------------------------------------------
# mix selection
# ---------------------------------------------------------------------------


def test_make_mix_is_deterministic():
    assert make_mix(1234).name == make_mix(1234).name
    assert make_mix(1234).name in BUILTIN_NAMES


def test_make_mix_frequencies_near_uniform():
    counts = {name: 0 for name in BUILTIN_NAMES}
    for seed in range(10_000):
        counts[make_mix(seed).name] += 1
    for name, count in counts.items():
        assert 0.23 <= count / 10_000 <= 0.27, (name, count)


def test_make_mix_empty_set_errors():
    with pytest.raises(ValueError):
        make_mix(0, choices=())


def test_spec_validation():
    with pytest.raises(ValueError):
        PolicySpec(name="P9")
    with pytest.raises(ValueError):
        PolicySpec(name="P1", params={"guard_radius": -2})
    with pytest.raises(ValueError):
        PolicySpec(name="P1", params={"no_such_knob": 1})
    with pytest.raises(ValueError):
        policy_action(make_policy("mix"), reset(GridConfig(), 0), 1, random.Random(0))


# ---------------------------------------------------------------------------
# pinned behavior fixtures
# ---------------------------------------------------------------------------


def test_p1_guard_beyond_radius_heads_home():
    # guard 8+ cells from the fort, no attacker within weapon range:
    # the chosen action must strictly decrease distance to the fort
    config = GridConfig()
    guard = AgentState(0, AgentKind.GUARD, 10, 10, Direction.S)
    far_attacker = AgentState(3, AgentKind.ATTACKER, 10, 1, Direction.N)
    state = make_state(config, [guard, far_attacker])
    assert fort_distance(config, guard.x, guard.y) > make_policy("P1").param(
        "guard_radius"
    )
    act = policy_action(make_policy("P1"), state, 0, random.Random(0))
    assert act.kind in MOVE_KINDS
    d = MOVE_KINDS[act.kind]
    after = fort_distance(config, guard.x + d.dx, guard.y + d.dy)
    assert after < fort_distance(config, guard.x, guard.y)


def test_p1_guard_shoots_attacker_in_range_and_arc():
    config = GridConfig()
    guard = AgentState(0, AgentKind.GUARD, 10, 18, Direction.S)
    attacker = AgentState(3, AgentKind.ATTACKER, 10, 14, Direction.N)
    state = make_state(config, [guard, attacker])
    act = policy_action(make_policy("P1"), state, 0, random.Random(0))
    assert act == Action.shoot(3)


def test_b1600_rear_attacker_advances_when_guard_drawn():
    # rear attacker (rank 2 of 3, aggression 0.67 -> two aggressors), one
    # guard beyond drawn_radius: the rear stops holding and moves so that
    # its distance to the fort strictly decreases (it holds otherwise, see
    # the companion test below)
    config = GridConfig()
    spec = make_policy("B1600")
    drawn_guard = AgentState(0, AgentKind.GUARD, 10, 8, Direction.S)
    aggressor1 = AgentState(3, AgentKind.ATTACKER, 8, 6, Direction.N)
    aggressor2 = AgentState(4, AgentKind.ATTACKER, 12, 6, Direction.N)
    rear = AgentState(5, AgentKind.ATTACKER, 10, 10, Direction.N)
    state = make_state(config, [drawn_guard, aggressor1, aggressor2, rear])
    assert fort_distance(config, drawn_guard.x, drawn_guard.y) > spec.param(
        "drawn_radius"
    )
    act = policy_action(spec, state, 5, random.Random(0))
    assert act.kind in MOVE_KINDS
    d = MOVE_KINDS[act.kind]
    after = fort_distance(config, rear.x + d.dx, rear.y + d.dy)
    assert after < fort_distance(config, rear.x, rear.y)


def test_b1600_rear_attacker_holds_at_standoff_when_guards_home():
    # the full defense is home (two guards, neither drawn): the rear waits
    config = GridConfig()
    spec = make_policy("B1600")
    home_guard = AgentState(0, AgentKind.GUARD, 10, 18, Direction.S)
    home_guard2 = AgentState(1, AgentKind.GUARD, 8, 18, Direction.S)
    aggressor1 = AgentState(3, AgentKind.ATTACKER, 8, 6, Direction.N)
    aggressor2 = AgentState(4, AgentKind.ATTACKER, 12, 6, Direction.N)
    rear = AgentState(5, AgentKind.ATTACKER, 10, 10, Direction.N)
    state = make_state(
        config, [home_guard, home_guard2, aggressor1, aggressor2, rear]
    )
    act = policy_action(spec, state, 5, random.Random(0))
    assert act == Action.noop()


def test_dead_agent_noops_under_every_policy():
    config = GridConfig()
    agents = [
        AgentState(0, AgentKind.GUARD, 10, 18, Direction.S, alive=False),
        AgentState(3, AgentKind.ATTACKER, 10, 1, Direction.N),
    ]
    state = make_state(config, agents)
    for name in POLICY_NAMES:
        if name == "mix":
            continue
        assert policy_action(make_policy(name), state, 0, random.Random(0)) == Action.noop()


# ---------------------------------------------------------------------------
# invariants over whole episodes
# ---------------------------------------------------------------------------


def test_all_policies_emit_legal_actions():
    for name in ("P1", "P2") + BUILTIN_NAMES:
        for seed in (11, 12, 13):
            def check(state, joint):
                for agent_id, act in joint.items():
                    assert act in legal_actions(state, agent_id), (name, seed, act)

            run_episode(name, seed, on_tick=check)


def test_p1_guards_stay_close_to_fort():
    spec = make_policy("P1")
    for seed in (5, 6, 7):
        distances = []

        def record(state, joint):
            for g in state.guards():
                if g.alive:
                    distances.append(fort_distance(state.config, g.x, g.y))

        run_episode("P1", seed, on_tick=record)
        assert distances
        mean = sum(distances) / len(distances)
        assert mean <= spec.param("guard_radius") + 1


def test_p2_opening_spread_pairwise_non_decreasing():
    for seed in (21, 22, 23):
        history = []

        def record(state, joint):
            if state.step_count < 5:
                teams = {}
                for a in state.agents:
                    if a.alive:
                        teams.setdefault(a.kind.is_guard, []).append(a)
                snapshot = {}
                for side, members in teams.items():
                    for a, b in itertools.combinations(
                        sorted(members, key=lambda m: m.id), 2
                    ):
                        snapshot[(a.id, b.id)] = math.hypot(a.x - b.x, a.y - b.y)
                history.append(snapshot)

        run_episode("P2", seed, on_tick=record, max_steps=10)
        for before, after in zip(history, history[1:]):
            for pair, dist in before.items():
                if pair in after:
                    assert after[pair] >= dist - 1e-9, (seed, pair)


def test_b220_guards_never_leave_front_band():
    for seed in (31, 32):
        def check(state, joint):
            for g in state.guards():
                assert g.y >= state.config.height - 3, (seed, g)

        run_episode("B220", seed, on_tick=check)


def test_builtin_radius_ordering_is_monotone():
    radii = [make_policy(n).param("guard_radius") for n in BUILTIN_NAMES]
    assert radii == sorted(radii) and len(set(radii)) == 4


def test_b1600_guards_may_exceed_b1240_radius():
    # a guard at the edge of B1240's leash: B1600 pursues one cell deeper,
    # B1240's leash forbids it
    config = GridConfig()
    guard = AgentState(0, AgentKind.GUARD, 10, 10, Direction.S)
    bait = AgentState(3, AgentKind.ATTACKER, 10, 3, Direction.N)
    far = AgentState(4, AgentKind.ATTACKER, 1, 1, Direction.N)
    state = make_state(config, [guard, bait, far])
    act_1600 = policy_action(make_policy("B1600"), state, 0, random.Random(0))
    assert act_1600 == Action(ActionKind.MOVE_S)  # pursues outward
    act_1240 = policy_action(make_policy("B1240"), state, 0, random.Random(0))
    assert act_1240 != Action(ActionKind.MOVE_S)


def test_policy_episodes_are_deterministic():
    for name in ("P1", "P2", "B1600"):
        a = run_episode(name, 77)
        b = run_episode(name, 77)
        assert (a.outcome, a.steps, a.shots_fired, a.shots_hit) == (
            b.outcome,
            b.steps,
            b.shots_fired,
            b.shots_hit,
        )
