import logging

import pytest
from hypothesis import given, strategies as st

from worldalign.core import Action, Outcome, Transition
from worldalign.env import make_config
from worldalign.env.oracle import kg_edges_for_config
from worldalign.graphs import (
    EXPLORED,
    KgEdge,
    KnowledgeGraph,
    SceneGraph,
    kg_induce,
    kg_merge,
    sg_locate,
    sg_unexplored,
    sg_update,
)

from conftest import make_obs

edges_strategy = st.lists(
    st.builds(
        KgEdge,
        u=st.sampled_from(["table", "furnace", "wood_pickaxe", "iron"]),
        v=st.sampled_from(["wood", "stone", "iron", "tree", "table"]),
        relation=st.sampled_from(["requires", "consumes", "collects"]),
        quantity=st.one_of(st.none(), st.integers(1, 5)),
    ),
    max_size=10,
)


def test_edge_validation():
    with pytest.raises(ValueError):
        KgEdge("a", "b", "loves")
    with pytest.raises(ValueError):
        KgEdge("a", "b", "consumes", 0)


def test_merge_with_empty_is_identity():
    kg = kg_merge(KnowledgeGraph.empty(), [KgEdge("table", "wood", "consumes", 2)])
    assert kg_merge(kg, []) == kg


@given(edges_strategy)
def test_merge_is_idempotent(edges):
    once = kg_merge(KnowledgeGraph.empty(), edges)
    twice = kg_merge(once, edges)
    assert once == twice


@given(edges_strategy, edges_strategy)
def test_merge_batches_are_order_insensitive_as_sets(a, b):
    # Conflicting quantities aside, edge membership does not depend on order.
    quantities = {}
    for edge in a + b:
        quantities[edge.key()] = edge.quantity  # newest wins in both orders? no:
    left = kg_merge(kg_merge(KnowledgeGraph.empty(), a), b)
    right = kg_merge(kg_merge(KnowledgeGraph.empty(), b), a)
    assert {e.key() for e in left.edges} == {e.key() for e in right.edges}
    assert left.vertices == right.vertices


def test_conflicting_quantity_keeps_newest_and_logs(caplog):
    base = kg_merge(KnowledgeGraph.empty(), [KgEdge("table", "wood", "consumes", 2)])
    with caplog.at_level(logging.INFO, logger="worldalign.graphs"):
        merged = kg_merge(base, [KgEdge("table", "wood", "consumes", 3)])
    (edge,) = merged.edges
    assert edge.quantity == 3
    assert any("conflict" in record.message for record in caplog.records)


def test_requirements_reads_direct_edges_only():
    kg = kg_merge(KnowledgeGraph.empty(), [
        KgEdge("iron_pickaxe", "iron", "consumes", 1),
        KgEdge("iron_pickaxe", "coal", "consumes", 1),
        KgEdge("iron_pickaxe", "furnace", "requires", None),
        KgEdge("furnace", "stone", "consumes", 2),  # not transitively included
    ])
    materials, platform = kg.requirements("iron_pickaxe")
    assert materials == {"iron": 1, "coal": 1}
    assert platform == "furnace"


def test_requirements_unknown_entity_is_empty():
    assert KnowledgeGraph.empty().requirements("ghost") == ({}, None)


def test_requirements_entity_with_no_edges_is_empty():
    kg = kg_merge(KnowledgeGraph.empty(), [KgEdge("table", "wood", "consumes", 2)])
    assert kg.requirements("wood") == ({}, None)


def test_requirements_match_shipped_default_config():
    config = make_config("default")
    kg = kg_merge(KnowledgeGraph.empty(), kg_edges_for_config(config))
    recipe = config.recipes["iron_pickaxe"]
    materials, platform = kg.requirements("iron_pickaxe")
    assert materials == recipe.consumes
    assert platform == recipe.platform


def test_oracle_kg_equals_recipe_table_after_canonicalization():
    config = make_config("taskdep")
    edges = kg_edges_for_config(config)
    tables = config.effective()
    expected = set()
    for product, recipe in tables.recipes.items():
        for material, count in recipe.consumes.items():
            expected.add((product, material, "consumes", count))
        for material, count in recipe.requires.items():
            expected.add((product, material, "requires", count))
        if recipe.platform:
            expected.add((product, recipe.platform, "requires", None))
    for block, rule in tables.mining.items():
        expected.add((rule.drop, block, "collects", None))
    assert {(e.u, e.v, e.relation, e.quantity) for e in edges} == expected


def test_kg_json_round_trip():
    kg = kg_merge(KnowledgeGraph.empty(), kg_edges_for_config(make_config("default")))
    assert KnowledgeGraph.from_json(kg.to_json()) == kg


# -- induction ------------------------------------------------------------------

class ListProposer:
    def __init__(self, edges):
        self._edges = edges

    def propose_kg_edges(self, window):
        return self._edges


def _window():
    obs = make_obs()
    return [Transition(obs, Action("sleep", {}), Outcome(True), obs)]


def test_kg_induce_empty_reply():
    result = kg_induce(_window(), ListProposer([]))
    assert result.edges == () and result.dropped == 0


def test_kg_induce_accepts_wire_format():
    raw = [{"u": "table", "v": "wood", "label": {"relation": "consumes", "quantity": "2"}}]
    result = kg_induce(_window(), ListProposer(raw))
    assert result.edges == (KgEdge("table", "wood", "consumes", 2),)


def test_kg_induce_drops_malformed_edge_by_edge():
    raw = [
        {"u": "table", "v": "wood", "label": {"relation": "consumes", "quantity": 2}},
        {"u": "table", "v": "wood", "label": {"relation": "devours", "quantity": 1}},
        {"oops": True},
        {"u": "a", "v": "b", "label": {"relation": "requires", "quantity": 0}},
    ]
    result = kg_induce(_window(), ListProposer(raw))
    assert len(result.edges) == 1
    assert result.dropped == 3


def test_kg_induce_empty_window_is_empty():
    assert kg_induce([], ListProposer([{"u": "a"}])) == kg_induce([], ListProposer([]))


# -- scene graph ------------------------------------------------------------------

def test_fresh_graph_unexplored_equals_configured_locations():
    config = make_config("default")
    locations = sorted(config.terrain_table)
    sg = SceneGraph.initial(locations)
    assert sg_unexplored(sg) == locations


def test_sg_update_adds_position_and_visible_objects():
    sg = SceneGraph.initial(["grass", "water"])
    obs = make_obs(position="grass", visible=(("table", 1, 0), ("water", 2, 1)), near=("table",))
    updated = sg_update(sg, obs)
    assert updated.status_map()["grass"] == EXPLORED
    assert ("grass", "table", "contains") in updated.edges
    assert ("grass", "water", "adjacent") in updated.edges
    assert sg_locate(updated, "table") == ["grass"]


def test_sg_update_is_idempotent():
    sg = SceneGraph.initial(["grass"])
    obs = make_obs(visible=(("table", 1, 0),))
    once = sg_update(sg, obs)
    assert sg_update(once, obs) == once


@given(st.lists(st.sampled_from(["grass", "sand", "water"]), min_size=1, max_size=6))
def test_sg_monotonicity(positions):
    sg = SceneGraph.initial(["grass", "sand", "water"])
    for position in positions:
        updated = sg_update(sg, make_obs(position=position, in_front=position))
        assert updated.vertices >= sg.vertices
        assert set(updated.edges) >= set(sg.edges)
        explored_before = {l for l, s in sg.status if s == EXPLORED}
        explored_after = {l for l, s in updated.status if s == EXPLORED}
        assert explored_after >= explored_before
        sg = updated


def test_full_sweep_explores_every_location():
    # Derived by enumeration: visiting every terrain name marks all Explored.
    locations = ["grass", "sand", "water", "tree"]
    sg = SceneGraph.initial(locations)
    for loc in locations:
        sg = sg_update(sg, make_obs(position=loc, in_front=loc))
    assert sg_unexplored(sg) == []


def test_locate_insertion_order_and_unknown_item():
    sg = SceneGraph.initial(["grass", "sand"])
    sg = sg_update(sg, make_obs(position="grass", visible=(("cow", 2, 0),)))
    sg = sg_update(sg, make_obs(position="sand", in_front="sand", visible=(("cow", 1, 1),)))
    assert sg_locate(sg, "cow") == ["grass", "sand"]
    assert sg_locate(sg, "dragon") == []


def test_sg_json_round_trip():
    sg = SceneGraph.initial(["grass", "sand"])
    sg = sg_update(sg, make_obs(visible=(("table", 1, 0),)))
    assert SceneGraph.from_json(sg.to_json()) == sg
