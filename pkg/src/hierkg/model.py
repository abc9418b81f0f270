"""Knowledge-graph and hierarchy data model.

A built index is a stack of graph layers: layer 0 holds the ingested
entities/relations with chunk provenance, every higher layer holds
generated aggregate entities plus inter-cluster relations. Parent links
form a forest (each entity has at most one parent, one layer up).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidArgumentError, NotFoundError


class RelationKind(str, Enum):
    BASE = "base"
    INTRA_CLUSTER_INHERITED = "intra_cluster_inherited"
    INTER_CLUSTER_AGGREGATED = "inter_cluster_aggregated"
    INTER_CLUSTER_CONCATENATED = "inter_cluster_concatenated"


@dataclass
class Entity:
    id: str
    name: str
    description: str
    layer: int = 0
    parent_id: str | None = None
    source_chunk_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "layer": self.layer,
            "parent_id": self.parent_id,
            "source_chunk_ids": list(self.source_chunk_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Entity":
        return cls(
            id=d["id"],
            name=d["name"],
            description=d["description"],
            layer=d["layer"],
            parent_id=d.get("parent_id"),
            source_chunk_ids=list(d.get("source_chunk_ids", [])),
        )


@dataclass
class Relation:
    id: str
    source_id: str
    target_id: str
    description: str
    layer: int = 0
    kind: RelationKind = RelationKind.BASE

    def endpoints(self) -> tuple[str, str]:
        return (self.source_id, self.target_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source_id": self.source_id,
            "target_id": self.target_id,
            "description": self.description,
            "layer": self.layer,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Relation":
        return cls(
            id=d["id"],
            source_id=d["source_id"],
            target_id=d["target_id"],
            description=d["description"],
            layer=d["layer"],
            kind=RelationKind(d["kind"]),
        )


@dataclass
class Chunk:
    id: str
    text: str
    doc_id: str
    token_count: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "doc_id": self.doc_id,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        return cls(id=d["id"], text=d["text"], doc_id=d["doc_id"], token_count=d["token_count"])


@dataclass
class GraphLayer:
    index: int
    entity_ids: set[str] = field(default_factory=set)
    relation_ids: set[str] = field(default_factory=set)


@dataclass
class BuildParams:
    cluster_size: int = 20
    tau: int = 3
    max_layers: int = 4
    seed: int = 0
    stop_when_entities_leq: int | None = None  # defaults to cluster_size
    tau_overrides: dict[int, int] = field(default_factory=dict)
    single_root: bool = False
    gmm_max_iters: int = 50
    gmm_tol: float = 1e-4

    def __post_init__(self):
        if self.tau < 0:
            raise InvalidArgumentError("tau must be >= 0")
        if self.max_layers < 1:
            raise InvalidArgumentError("max_layers must be >= 1")
        if self.cluster_size < 2:
            raise InvalidArgumentError("cluster_size must be >= 2")
        if self.stop_when_entities_leq is None:
            self.stop_when_entities_leq = self.cluster_size

    def tau_for_layer(self, layer: int) -> int:
        return self.tau_overrides.get(layer, self.tau)

    def to_dict(self) -> dict:
        return {
            "cluster_size": self.cluster_size,
            "tau": self.tau,
            "max_layers": self.max_layers,
            "seed": self.seed,
            "stop_when_entities_leq": self.stop_when_entities_leq,
            "tau_overrides": {str(k): v for k, v in self.tau_overrides.items()},
            "single_root": self.single_root,
            "gmm_max_iters": self.gmm_max_iters,
            "gmm_tol": self.gmm_tol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildParams":
        return cls(
            cluster_size=d["cluster_size"],
            tau=d["tau"],
            max_layers=d["max_layers"],
            seed=d["seed"],
            stop_when_entities_leq=d.get("stop_when_entities_leq"),
            tau_overrides={int(k): v for k, v in d.get("tau_overrides", {}).items()},
            single_root=d.get("single_root", False),
            gmm_max_iters=d.get("gmm_max_iters", 50),
            gmm_tol=d.get("gmm_tol", 1e-4),
        )


@dataclass
class Hierarchy:
    """Immutable-after-build stack of graph layers.

    entities/relations are global id maps; each layer lists the ids that
    live at that level. parent_map mirrors Entity.parent_id for fast
    ancestor walks.
    """

    entities: dict[str, Entity] = field(default_factory=dict)
    relations: dict[str, Relation] = field(default_factory=dict)
    layers: list[GraphLayer] = field(default_factory=list)
    parent_map: dict[str, str] = field(default_factory=dict)
    build_params: BuildParams | None = None

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise NotFoundError(f"unknown entity id: {entity_id}") from None

    def relation(self, relation_id: str) -> Relation:
        try:
            return self.relations[relation_id]
        except KeyError:
            raise NotFoundError(f"unknown relation id: {relation_id}") from None

    def layer(self, index: int) -> GraphLayer:
        if index < 0 or index >= len(self.layers):
            raise NotFoundError(f"no layer {index}")
        return self.layers[index]

    def ancestors(self, entity_id: str) -> list[str]:
        """Chain from the entity up to its topmost ancestor, inclusive."""
        self.entity(entity_id)
        chain = [entity_id]
        seen = {entity_id}
        current = entity_id
        while current in self.parent_map:
            current = self.parent_map[current]
            if current in seen:  # defensive: corrupted parent links
                raise InvalidArgumentError(f"parent cycle at {current}")
            chain.append(current)
            seen.add(current)
        return chain

    def entities_of_cluster(self, aggregate_id: str) -> set[str]:
        """Children of one aggregate (the cluster it was generated from)."""
        agg = self.entity(aggregate_id)
        if agg.layer < 1:
            raise InvalidArgumentError(f"{aggregate_id} is a layer-0 entity, not an aggregate")
        return {eid for eid, pid in self.parent_map.items() if pid == aggregate_id}


def validate_hierarchy(h: Hierarchy) -> list[str]:
    """Check every structural invariant; returns human-readable violations.

    An empty list means the hierarchy is well formed. Violations are data,
    not exceptions: callers decide whether to fail.
    """
    violations: list[str] = []
    top = len(h.layers) - 1

    seen_relation_keys: set[tuple] = set()
    for eid, e in h.entities.items():
        if e.id != eid:
            violations.append(f"entity {eid}: key does not match id field {e.id}")
        if e.layer < 0 or e.layer > top:
            violations.append(f"entity {eid}: layer {e.layer} outside hierarchy")
            continue
        if e.layer == 0 and not e.source_chunk_ids:
            violations.append(f"entity {eid}: layer-0 entity without source chunks")
        if e.layer >= 1 and e.source_chunk_ids:
            violations.append(f"entity {eid}: aggregate carries source chunks")
        if eid not in h.layers[e.layer].entity_ids:
            violations.append(f"entity {eid}: missing from layer {e.layer} listing")
        if e.parent_id is not None:
            parent = h.entities.get(e.parent_id)
            if parent is None:
                violations.append(f"entity {eid}: parent {e.parent_id} does not exist")
            elif parent.layer != e.layer + 1:
                violations.append(
                    f"entity {eid}: parent {e.parent_id} at layer {parent.layer}, expected {e.layer + 1}"
                )
        if h.parent_map.get(eid) != e.parent_id:
            violations.append(f"entity {eid}: parent_map disagrees with parent_id")

    for rid, r in h.relations.items():
        if r.source_id == r.target_id:
            violations.append(f"relation {rid}: self-loop")
        for end in (r.source_id, r.target_id):
            e = h.entities.get(end)
            if e is None:
                violations.append(f"relation {rid}: endpoint {end} does not exist")
            elif e.layer != r.layer:
                violations.append(f"relation {rid}: endpoint {end} not at layer {r.layer}")
        inter = r.kind in (RelationKind.INTER_CLUSTER_AGGREGATED, RelationKind.INTER_CLUSTER_CONCATENATED)
        if inter != (r.layer >= 1):
            violations.append(f"relation {rid}: kind {r.kind.value} invalid at layer {r.layer}")
        if r.layer < 0 or r.layer > top:
            violations.append(f"relation {rid}: layer {r.layer} outside hierarchy")
        elif rid not in h.layers[r.layer].relation_ids:
            violations.append(f"relation {rid}: missing from layer {r.layer} listing")
        key = (r.source_id, r.target_id, r.layer, r.description)
        if key in seen_relation_keys:
            violations.append(f"relation {rid}: exact duplicate of another relation")
        seen_relation_keys.add(key)

    for layer in h.layers:
        for eid in layer.entity_ids:
            e = h.entities.get(eid)
            if e is None:
                violations.append(f"layer {layer.index}: lists unknown entity {eid}")
            elif e.layer != layer.index:
                violations.append(f"layer {layer.index}: entity {eid} declares layer {e.layer}")
        for rid in layer.relation_ids:
            if rid not in h.relations:
                violations.append(f"layer {layer.index}: lists unknown relation {rid}")
    if h.layers and not h.layers[0].entity_ids:
        violations.append("layer 0 is empty")

    # parent links must form a forest (no cycles) and, per layer pair,
    # cover every non-top entity exactly once
    for eid in h.entities:
        slow = eid
        seen = set()
        while slow in h.parent_map:
            if slow in seen:
                violations.append(f"entity {eid}: parent chain contains a cycle at {slow}")
                break
            seen.add(slow)
            slow = h.parent_map[slow]

    for i in range(len(h.layers) - 1):
        lower = h.layers[i].entity_ids
        upper = h.layers[i + 1].entity_ids
        parents = {h.parent_map.get(eid) for eid in lower}
        missing = {eid for eid in lower if h.parent_map.get(eid) is None}
        for eid in sorted(missing):
            violations.append(f"entity {eid}: no parent although layer {i + 1} exists")
        if parents - {None} != upper:
            violations.append(
                f"layer {i + 1}: entity set differs from the parents assigned to layer {i}"
            )

    return violations
