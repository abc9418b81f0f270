"""Synthetic data generators shared across the test suite."""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

from hierkg.model import Chunk, Entity, GraphLayer, Hierarchy, Relation

WORDS = [
    "alloy", "basin", "cipher", "delta", "ember", "fjord", "glacier", "harbor",
    "isotope", "jetty", "kernel", "lagoon", "meadow", "nebula", "orchid", "plateau",
    "quarry", "reef", "summit", "tundra", "vertex", "willow", "zenith", "canyon",
    "estuary", "foliage", "granite", "horizon", "inlet", "juniper",
]

TOPIC_VOCABS = [
    ["turbine", "rotor", "stator", "flux", "torque", "dynamo", "winding", "armature"],
    ["enzyme", "substrate", "catalyst", "protein", "ligand", "receptor", "kinase", "peptide"],
    ["ledger", "audit", "invoice", "accrual", "equity", "liability", "dividend", "escrow"],
    ["sonnet", "stanza", "meter", "rhyme", "couplet", "ballad", "refrain", "verse"],
    ["glaze", "kiln", "ceramic", "slip", "bisque", "stoneware", "porcelain", "grog"],
    ["orbit", "perigee", "apogee", "thrust", "payload", "telemetry", "booster", "gimbal"],
    ["sediment", "stratum", "fossil", "erosion", "magma", "basalt", "shale", "tectonic"],
    ["antigen", "antibody", "vaccine", "plasma", "lymph", "pathogen", "immunity", "serum"],
    ["crankshaft", "piston", "manifold", "camshaft", "ignition", "throttle", "gasket", "flywheel"],
    ["synapse", "neuron", "axon", "dendrite", "cortex", "myelin", "ganglion", "stimulus"],
]


def description(rng: random.Random, vocab=WORDS, length: int = 15) -> str:
    return " ".join(rng.choice(vocab) for _ in range(length))


def make_layer0(
    rng: random.Random,
    n_entities: int,
    avg_degree: float = 3.0,
    n_chunks: int | None = None,
):
    """Random connected-ish layer-0 graph with chunk provenance."""
    n_chunks = n_chunks or max(2, n_entities // 4)
    chunks = {
        f"c{i}": Chunk(id=f"c{i}", text=description(rng, length=20), doc_id=f"d{i % 5}", token_count=20)
        for i in range(n_chunks)
    }
    entities = {}
    for i in range(n_entities):
        eid = f"e{i:04d}"
        entities[eid] = Entity(
            id=eid,
            name=f"Entity {i}",
            description=description(rng),
            layer=0,
            source_chunk_ids=rng.sample(sorted(chunks), k=rng.randint(1, min(3, n_chunks))),
        )
    ids = sorted(entities)
    relations = {}
    seen_pairs = set()
    target_edges = int(n_entities * avg_degree / 2)
    rid = 0
    # backbone path keeps the graph largely connected
    order = ids[:]
    rng.shuffle(order)
    pairs = list(zip(order, order[1:]))
    while len(pairs) < target_edges:
        a, b = rng.sample(ids, 2)
        pairs.append((a, b))
    for a, b in pairs:
        key = tuple(sorted((a, b)))
        if key in seen_pairs or a == b:
            continue
        seen_pairs.add(key)
        relations[f"r{rid:05d}"] = Relation(
            id=f"r{rid:05d}",
            source_id=a,
            target_id=b,
            description=description(rng, length=8),
            layer=0,
        )
        rid += 1
    return entities, relations, chunks


def make_random_hierarchy(rng: random.Random, n_leaves: int, max_layers: int = 4) -> Hierarchy:
    """Directly constructed random forest hierarchy (no clustering/LLM)."""
    h = Hierarchy()
    layer_ids: list[list[str]] = [[f"e{i:04d}" for i in range(n_leaves)]]
    for eid in layer_ids[0]:
        h.entities[eid] = Entity(
            id=eid,
            name=eid,
            description=description(rng, length=6),
            layer=0,
            source_chunk_ids=["c0"],
        )
    n_layers = rng.randint(2, max_layers)
    for level in range(1, n_layers):
        lower = layer_ids[-1]
        n_upper = max(1, math.ceil(len(lower) / rng.randint(2, 5)))
        if n_upper >= len(lower):
            break
        upper = [f"agg:{level}:{j}" for j in range(n_upper)]
        for aid in upper:
            h.entities[aid] = Entity(
                id=aid, name=aid, description=description(rng, length=6), layer=level
            )
        shuffled = lower[:]
        rng.shuffle(shuffled)
        # each parent gets at least one child, the rest land randomly
        for aid, child in zip(upper, shuffled):
            h.parent_map[child] = aid
            h.entities[child].parent_id = aid
        for child in shuffled[n_upper:]:
            aid = rng.choice(upper)
            h.parent_map[child] = aid
            h.entities[child].parent_id = aid
        layer_ids.append(upper)
    for index, ids in enumerate(layer_ids):
        h.layers.append(GraphLayer(index=index, entity_ids=set(ids)))
    return h


def topical_corpus(rng: random.Random, n_topics: int = 10, entities_per_topic: int = 15):
    """Topic-structured corpus for the redundancy benchmark.

    Entity descriptions draw from per-topic vocabularies so lexical
    queries anchor inside their topics; the relation graph is a dense
    random graph, which makes flat shortest-path retrieval between
    seeds collect many intermediate entities.
    """
    vocabs = TOPIC_VOCABS[:n_topics]
    chunks = {}
    chunk_ids_by_topic = []
    for t in range(n_topics):
        ids = []
        for k in range(8):
            cid = f"c{t:02d}_{k}"
            text = " ".join(rng.choice(vocabs[t]) for _ in range(30))
            chunks[cid] = Chunk(id=cid, text=text, doc_id=f"doc{t}", token_count=30)
            ids.append(cid)
        chunk_ids_by_topic.append(ids)

    entities = {}
    topic_of = {}
    for t in range(n_topics):
        for i in range(entities_per_topic):
            eid = f"e{t:02d}_{i:02d}"
            topic_of[eid] = t
            entities[eid] = Entity(
                id=eid,
                name=f"{vocabs[t][i % len(vocabs[t])]} {i}",
                description=" ".join(rng.choice(vocabs[t]) for _ in range(25)),
                layer=0,
                source_chunk_ids=rng.sample(chunk_ids_by_topic[t], k=rng.randint(1, 3)),
            )

    ids = sorted(entities)
    relations = {}
    seen = set()
    rid = 0

    def add_edge(a: str, b: str):
        nonlocal rid
        key = tuple(sorted((a, b)))
        if a == b or key in seen:
            return
        seen.add(key)
        t = topic_of[a]
        relations[f"r{rid:04d}"] = Relation(
            id=f"r{rid:04d}",
            source_id=a,
            target_id=b,
            description=" ".join(rng.choice(vocabs[t]) for _ in range(8)),
            layer=0,
        )
        rid += 1

    order = ids[:]
    rng.shuffle(order)
    for a, b in zip(order, order[1:]):
        add_edge(a, b)
    while rid < 400:
        add_edge(rng.choice(ids), rng.choice(ids))

    queries = []
    for _ in range(50):
        ta, tb = rng.sample(range(n_topics), 2)
        words = [rng.choice(vocabs[ta]) for _ in range(5)] + [rng.choice(vocabs[tb]) for _ in range(5)]
        queries.append(" ".join(words))
    return entities, relations, chunks, queries


def write_ingest_jsonl(path: Path, entities, relations, chunks) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for c in chunks.values():
            fh.write(json.dumps({"type": "chunk", "id": c.id, "doc_id": c.doc_id, "text": c.text}) + "\n")
        for e in entities.values():
            fh.write(
                json.dumps(
                    {
                        "type": "entity",
                        "id": e.id,
                        "name": e.name,
                        "description": e.description,
                        "chunk_ids": e.source_chunk_ids,
                    }
                )
                + "\n"
            )
        for r in relations.values():
            fh.write(
                json.dumps(
                    {
                        "type": "relation",
                        "id": r.id,
                        "source": r.source_id,
                        "target": r.target_id,
                        "description": r.description,
                    }
                )
                + "\n"
            )
