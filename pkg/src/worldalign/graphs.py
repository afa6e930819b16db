"""Knowledge-graph and scene-graph stores.

Both graphs are persistent values: every update returns a new instance, so
readers never observe partial mutations.  The knowledge graph holds
feasibility constraints (what a product requires, consumes or is collected
from); the scene graph holds monotone spatial memory keyed by location.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Observation, Transition

log = logging.getLogger(__name__)

KG_RELATIONS = ("requires", "consumes", "collects", "enables")
SG_RELATIONS = ("located_in", "adjacent", "contains", "owns")

UNEXPLORED = "Unexplored"
EXPLORED = "Explored"


@dataclass(frozen=True)
class KgEdge:
    u: str
    v: str
    relation: str
    quantity: int | None = None

    def __post_init__(self) -> None:
        if self.relation not in KG_RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.quantity is not None and self.quantity < 1:
            raise ValueError("edge quantity must be >= 1 when present")

    def key(self) -> tuple[str, str, str]:
        return (self.u, self.v, self.relation)

    def to_json(self) -> dict:
        return {
            "u": self.u,
            "v": self.v,
            "label": {"relation": self.relation, "quantity": self.quantity},
        }

    @staticmethod
    def from_json(data: dict) -> "KgEdge":
        label = data["label"]
        quantity = label.get("quantity")
        if quantity is not None:
            quantity = int(quantity)
        return KgEdge(str(data["u"]), str(data["v"]), str(label["relation"]), quantity)


@dataclass(frozen=True)
class KnowledgeGraph:
    vertices: frozenset[str] = frozenset()
    edges: tuple[KgEdge, ...] = ()

    @staticmethod
    def empty() -> "KnowledgeGraph":
        return KnowledgeGraph()

    def requirements(self, product: str) -> tuple[dict[str, int], str | None]:
        """Direct requires/consumes constraints on a product.

        Quantified edges become material quantities; an unquantified
        ``requires`` edge names the crafting platform.  No transitive
        closure is taken.
        """
        materials: dict[str, int] = {}
        platform: str | None = None
        for edge in self.edges:
            if edge.u != product or edge.relation not in ("requires", "consumes"):
                continue
            if edge.quantity is None:
                if edge.relation == "requires" and platform is None:
                    platform = edge.v
            else:
                materials[edge.v] = materials.get(edge.v, 0) + edge.quantity
        return materials, platform

    def sources(self, material: str) -> list[str]:
        """Blocks a material is known to be collected from, insertion order."""
        return [e.v for e in self.edges if e.u == material and e.relation == "collects"]

    def has_edges_for(self, product: str) -> bool:
        return any(
            e.u == product and e.relation in ("requires", "consumes") for e in self.edges
        )

    def to_json(self) -> dict:
        return {"edges": [e.to_json() for e in self.edges]}

    @staticmethod
    def from_json(data: dict) -> "KnowledgeGraph":
        return kg_merge(KnowledgeGraph.empty(), [KgEdge.from_json(e) for e in data["edges"]])


def kg_merge(base: KnowledgeGraph, new_edges: Iterable[KgEdge]) -> KnowledgeGraph:
    """Union edges into the graph.

    Idempotent and batch-order-insensitive at the edge-set level; a repeated
    (u, v, relation) triple with a different quantity replaces the old edge
    (newest wins) and logs the conflict.
    """
    edges = list(base.edges)
    index = {e.key(): i for i, e in enumerate(edges)}
    for edge in new_edges:
        slot = index.get(edge.key())
        if slot is None:
            index[edge.key()] = len(edges)
            edges.append(edge)
        elif edges[slot].quantity != edge.quantity:
            log.info(
                "kg quantity conflict on %s: %r -> %r (keeping newest)",
                edge.key(), edges[slot].quantity, edge.quantity,
            )
            edges[slot] = edge
    vertices = set(base.vertices)
    for edge in edges:
        vertices.add(edge.u)
        vertices.add(edge.v)
    return KnowledgeGraph(frozenset(vertices), tuple(edges))


@dataclass(frozen=True)
class EdgeInduction:
    edges: tuple[KgEdge, ...]
    dropped: int


def kg_induce(window: Sequence[Transition], proposer) -> EdgeInduction:
    """Ask a proposer for constraint edges over a window of transitions.

    Malformed entries are rejected edge-by-edge with a count, never
    wholesale; proposer unavailability propagates to the caller.
    """
    if not window:
        return EdgeInduction((), 0)
    raw = proposer.propose_kg_edges(window)
    edges: list[KgEdge] = []
    dropped = 0
    for entry in raw:
        try:
            edges.append(KgEdge.from_json(entry))
        except (KeyError, TypeError, ValueError):
            dropped += 1
    if dropped:
        log.info("kg_induce dropped %d malformed edges", dropped)
    return EdgeInduction(tuple(edges), dropped)


@dataclass(frozen=True)
class SceneGraph:
    vertices: frozenset[str] = frozenset()
    edges: tuple[tuple[str, str, str], ...] = ()  # (u, v, relation)
    status: tuple[tuple[str, str], ...] = ()  # (location, Explored|Unexplored)

    @staticmethod
    def initial(locations: Sequence[str]) -> "SceneGraph":
        return SceneGraph(
            vertices=frozenset(locations),
            edges=(),
            status=tuple((loc, UNEXPLORED) for loc in locations),
        )

    def status_map(self) -> dict[str, str]:
        return dict(self.status)

    def locations(self) -> list[str]:
        return [loc for loc, _ in self.status]

    def to_json(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "edges": [list(e) for e in self.edges],
            "status": dict(self.status),
        }

    @staticmethod
    def from_json(data: dict) -> "SceneGraph":
        return SceneGraph(
            vertices=frozenset(data["vertices"]),
            edges=tuple((e[0], e[1], e[2]) for e in data["edges"]),
            status=tuple((loc, st) for loc, st in data["status"].items()),
        )


def sg_update(sg: SceneGraph, obs: Observation) -> SceneGraph:
    """Fold an observation into the scene graph.

    Monotone: vertices and edges are only ever added.  The terrain the agent
    stands on becomes Explored; every visible object type gains an edge from
    that location (``adjacent`` for known locations, ``contains`` otherwise).
    """
    here = obs.position
    vertices = set(sg.vertices)
    vertices.add(here)
    known_locations = {loc for loc, _ in sg.status}
    edges = list(sg.edges)
    seen = set(edges)
    for vis in obs.visible_objects:
        kind = vis.type
        vertices.add(kind)
        if kind in known_locations or kind == here:
            if kind == here:
                continue
            edge = (here, kind, "adjacent")
        else:
            edge = (here, kind, "contains")
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    status = []
    found = False
    for loc, st in sg.status:
        if loc == here:
            status.append((loc, EXPLORED))
            found = True
        else:
            status.append((loc, st))
    if not found:
        status.append((here, EXPLORED))
    return SceneGraph(frozenset(vertices), tuple(edges), tuple(status))


def sg_locate(sg: SceneGraph, item: str) -> list[str]:
    """Locations recorded as containing the item, in insertion order."""
    out: list[str] = []
    for u, v, rel in sg.edges:
        if rel == "contains" and v == item and u not in out:
            out.append(u)
    return out


def sg_unexplored(sg: SceneGraph) -> list[str]:
    return [loc for loc, st in sg.status if st == UNEXPLORED]
