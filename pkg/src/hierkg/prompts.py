"""Prompt templates for the two live generation calls.

The entity-aggregation call must answer with a strict JSON object
(entity_name / entity_description / findings); the relation call must
answer with a single abstract sentence. The parsers in providers.py
enforce exactly these shapes.
"""

from __future__ import annotations

ENTITY_AGGREGATION_TEMPLATE = """You are a concept-synthesis analyst. Given a set of related \
entities and the relations among them, derive one aggregate entity that represents the set \
as a whole.

Rules:
- Ground every statement in the provided entities and relations only; add nothing external.
- The aggregate entity name must not be identical to any single entity name in the set; it \
should express a composite theme, structure, or function.
- Write a comprehensive description covering the shared traits, structure, functions, and \
significance of the set.
- Extract structured findings (at least 5 where the evidence allows) about roles, \
interconnections, patterns, and notable specialization within the set; each finding needs a \
concise summary and a detailed explanation.
- Answer with a single well-formed JSON object and nothing else: no markdown, no commentary.

Output JSON shape:
{{
  "entity_name": "<name>",
  "entity_description": "<description>",
  "findings": [{{"summary": "<summary>", "explanation": "<explanation>"}}]
}}

Entities:
{entities}

Relations among them:
{relations}
"""

RELATION_SUMMARY_TEMPLATE = """You analyze the relationship between two aggregate entity \
groups. Using only their descriptions and the listed relations between their members, write \
ONE sentence that summarizes, at the group level, every kind of relationship present between \
the two groups.

Rules:
- Do not name individual member entities; use collective, group-level language.
- Stay factual and grounded in the listed relations; no speculation.
- Cover the full diversity of relationship types, not just one aspect.
- Answer with the single sentence only.

Group A: {a_name}
Group A description: {a_description}
Group B: {b_name}
Group B description: {b_description}

Relations between members:
{relations}
"""


def render_entity_aggregation_prompt(
    cluster_entities: list[tuple[str, str]],
    intra_relations: list[str],
) -> str:
    entity_lines = "\n".join(f"- {name}: {desc}" for name, desc in cluster_entities)
    relation_lines = "\n".join(f"- {r}" for r in intra_relations) or "- (none)"
    return ENTITY_AGGREGATION_TEMPLATE.format(entities=entity_lines, relations=relation_lines)


def render_relation_summary_prompt(
    a: tuple[str, str],
    b: tuple[str, str],
    cross_relations: list[str],
) -> str:
    relation_lines = "\n".join(f"- {r}" for r in cross_relations)
    return RELATION_SUMMARY_TEMPLATE.format(
        a_name=a[0],
        a_description=a[1],
        b_name=b[0],
        b_description=b[1],
        relations=relation_lines,
    )
