import numpy as np
import pytest

from skillcoord.geometry import EdgeFeatureSpec, FrameSpec, Pose, WorldState
from skillcoord.network import (
    START,
    STOP,
    AugmentedState,
    MalformedPlanError,
    Plan,
    TaskNetwork,
    UnknownSkillError,
)


def state(item_xy=(0.0, 0.0), robot_xy=(0.0, 0.3), goal_like=False, grip=False):
    return WorldState(
        Pose.planar(*robot_xy, 0.0),
        grip,
        {
            "bin": Pose.planar(0.0, 0.0, 0.0),
            "item": Pose.planar(*item_xy, 0.0),
        },
    )


SPECS = {
    name: EdgeFeatureSpec(("bin", "item"), FrameSpec(("bin", "item")))
    for name in ("a1", "a2", "a3")
}


def fresh_net():
    return TaskNetwork(SPECS)


def simple_plan(item_path=((0.1, 0.0), (0.2, 0.0), (0.3, 0.0))):
    states = [state(item_xy=xy) for xy in item_path]
    return Plan(tuple(states), ("a1", "a2"))


# -- plan construction -------------------------------------------------------

def test_plan_alternation_checked():
    with pytest.raises(MalformedPlanError):
        Plan((state(),), ("a1",))
    with pytest.raises(MalformedPlanError):
        Plan((state(), state()), ())
    with pytest.raises(MalformedPlanError):
        Plan((state(), state()), (START,))


def test_plan_triples_cover_start_and_stop():
    plan = simple_plan()
    triples = plan.triples()
    assert [(a, b) for a, _, b in triples] == [
        (START, "a1"),
        ("a1", "a2"),
        ("a2", STOP),
    ]
    assert triples[0][1] is plan.states[0]
    assert triples[-1][1] is plan.states[-1]


# -- ingestion ----------------------------------------------------------------

def test_ingest_builds_expected_edges():
    net = fresh_net()
    net.ingest_plan(simple_plan())
    assert set(net.edges) == {(START, "a1"), ("a1", "a2"), ("a2", STOP)}
    assert set(net.nodes) == {START, "a1", "a2", STOP}


def test_ingest_same_plan_twice_doubles_archives_not_edges():
    net = fresh_net()
    plan = simple_plan()
    net.ingest_plan(plan).ingest_plan(plan)
    assert set(net.edges) == {(START, "a1"), ("a1", "a2"), ("a2", STOP)}
    assert all(len(v) == 2 for v in net.archives.values())


def test_plan_revisiting_a_skill_adds_one_node_two_edges():
    states = [state(item_xy=(0.1 * i, 0.0)) for i in range(5)]
    plan = Plan(tuple(states), ("a1", "a2", "a1", "a3"))
    net = fresh_net()
    net.ingest_plan(plan)
    # enumerate triples by hand: start->a1, a1->a2, a2->a1, a1->a3, a3->stop
    assert set(net.edges) == {
        (START, "a1"),
        ("a1", "a2"),
        ("a2", "a1"),
        ("a1", "a3"),
        ("a3", STOP),
    }
    assert net.nodes.count("a1") == 1


def test_topology_is_exactly_the_consecutive_pairs():
    plans = [
        Plan((state(), state(), state()), ("a1", "a2")),
        Plan((state(), state()), ("a2",)),
        Plan((state(), state(), state()), ("a2", "a1")),
    ]
    net = fresh_net()
    for p in plans:
        net.ingest_plan(p)
    want = set()
    for p in plans:
        chain = (START,) + p.skills + (STOP,)
        want |= set(zip(chain[:-1], chain[1:]))
    assert set(net.edges) == want


def test_ingest_order_invariance_of_topology():
    plans = [
        Plan((state(item_xy=(0.1, 0)), state(item_xy=(0.2, 0))), ("a1",)),
        Plan((state(item_xy=(0.3, 0)), state(item_xy=(0.4, 0))), ("a2",)),
        Plan(
            (state(item_xy=(0.5, 0)), state(item_xy=(0.6, 0)), state(item_xy=(0.7, 0))),
            ("a1", "a2"),
        ),
    ]
    net_a, net_b = fresh_net(), fresh_net()
    for p in plans:
        net_a.ingest_plan(p)
    for p in reversed(plans):
        net_b.ingest_plan(p)
    assert set(net_a.edges) == set(net_b.edges)
    assert set(net_a.nodes) == set(net_b.nodes)


def test_unknown_skill_in_plan_rejected():
    net = fresh_net()
    with pytest.raises(UnknownSkillError):
        net.ingest_plan(Plan((state(), state()), ("mystery",)))


# -- selectors ------------------------------------------------------------------

def two_goal_net():
    """start has two outgoing edges separated by the item goal position."""
    net = fresh_net()
    for i in range(3):
        jit = 0.01 * i
        near = Plan(
            (state(item_xy=(0.0, jit)), state(item_xy=(-0.3, 0.0))), ("a1",)
        )
        far = Plan(
            (state(item_xy=(0.0, jit)), state(item_xy=(0.3, 0.0))), ("a2",)
        )
        net.ingest_plan(near)
        net.ingest_plan(far)
    return net


def test_single_edge_node_reports_trivial_confidence():
    net = fresh_net()
    net.ingest_plan(simple_plan()).build_edge_selectors()
    decision = net.next_skill("a1", state(), state(item_xy=(0.3, 0.0)), bound=0.8)
    assert decision.scores == {"a2": 1.0}
    assert decision.chosen == "a2"


def test_selector_separates_goal_positions():
    net = two_goal_net().build_edge_selectors()
    near_goal = state(item_xy=(-0.3, 0.0))
    far_goal = state(item_xy=(0.3, 0.0))
    here = state(item_xy=(0.0, 0.005))
    assert net.next_skill(START, here, near_goal, 0.8).chosen == "a1"
    assert net.next_skill(START, here, far_goal, 0.8).chosen == "a2"


def test_selector_fits_with_single_state_per_edge():
    net = fresh_net()
    net.ingest_plan(Plan((state(item_xy=(0.0, 0.0)), state(item_xy=(-0.3, 0.0))), ("a1",)))
    net.ingest_plan(Plan((state(item_xy=(0.1, 0.0)), state(item_xy=(0.3, 0.0))), ("a2",)))
    net.build_edge_selectors()
    ts = net.training_set(START)
    assert len(ts) == 2
    assert net.next_skill(START, state(item_xy=(0.0, 0.0)), state(item_xy=(-0.3, 0.0)), 0.5).chosen == "a1"


def test_fresh_network_needs_query():
    net = fresh_net()
    net._ensure_start_spec(state())
    decision = net.next_skill(START, state(), state(item_xy=(0.3, 0.0)), 0.8)
    assert decision.query_needed
    assert decision.scores == {}
    assert decision.confidence == 0.0


# -- instructions ------------------------------------------------------------------

def test_instruction_adds_edge_and_class():
    net = two_goal_net().build_edge_selectors()
    here = state(item_xy=(0.0, 0.0), grip=True)
    goal = state(item_xy=(0.0, 0.3))
    before_edges = len(net.edges)
    net.apply_instruction(START, here, goal, "a3")
    assert len(net.edges) == before_edges + 1
    assert (START, "a3") in net.edges
    scores = net.edge_scores(START, here, goal)
    assert set(scores) == {"a1", "a2", "a3"}


def test_instruction_makes_queried_state_win():
    net = two_goal_net().build_edge_selectors()
    here = state(item_xy=(0.02, -0.01))
    goal = state(item_xy=(0.0, 0.25))
    net.apply_instruction(START, here, goal, "a2")
    decision = net.next_skill(START, here, goal, bound=0.5)
    assert decision.chosen == "a2"


def test_instruction_repeating_confident_edge_changes_little():
    net = two_goal_net().build_edge_selectors()
    here = state(item_xy=(0.0, 0.0))
    goal = state(item_xy=(-0.3, 0.0))
    probe_goal = state(item_xy=(0.3, 0.0))
    before = net.edge_scores(START, here, goal)
    # archive already holds this exact decision point three times
    net.apply_instruction(START, here, goal, "a1")
    after = net.edge_scores(START, here, goal)
    assert after["a1"] > 0.8
    assert net.next_skill(START, here, probe_goal, 0.5).chosen == "a2"
    assert abs(after["a1"] - before["a1"]) < 0.05


def test_instruction_unknown_skill_rejected():
    net = two_goal_net()
    with pytest.raises(UnknownSkillError):
        net.apply_instruction(START, state(), state(), "nope")


def test_monotone_growth():
    net = two_goal_net()
    edges_before = set(net.edges)
    sizes_before = {e: len(v) for e, v in net.archives.items()}
    net.ingest_plan(simple_plan())
    net.apply_instruction("a2", state(), state(item_xy=(0.3, 0.0)), "a3")
    assert edges_before <= set(net.edges)
    for e, n in sizes_before.items():
        assert len(net.archives[e]) >= n


def test_augmented_state_entity_check():
    with pytest.raises(ValueError):
        AugmentedState(
            state(),
            WorldState(Pose.identity(), False, {"bin": Pose.identity()}),
        )


def test_snapshot_is_isolated():
    net = two_goal_net().build_edge_selectors()
    snap = net.snapshot()
    net.apply_instruction(START, state(), state(item_xy=(0.3, 0.0)), "a3")
    assert (START, "a3") in net.edges
    assert (START, "a3") not in snap.edges
