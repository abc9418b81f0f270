"""Operator command line: build, query, bench, stats.

Machine-readable output goes to stdout as JSON (or the plain-text context
rendering for `query --format text`); logs go to stderr. Exit codes:
0 ok, 2 usage error, 3 data error, 4 provider error, 1 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import aggregation, context, retrieval, store
from .errors import (
    GenerationParseError,
    HierKGError,
    IngestError,
    InvalidArgumentError,
    NotFoundError,
    ProviderUnavailableError,
    StoreError,
)
from .model import BuildParams, validate_hierarchy
from .providers import make_embedding_provider, make_generation_provider

logger = logging.getLogger("hierkg")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_PROVIDER = 4

REDACTED_KEYS = {"api_key", "token", "secret", "authorization"}


def _load_provider_config(path: str | None) -> dict:
    if path is None:
        return {"embedding": {"provider": "mock"}, "generation": {"provider": "mock"}}
    config = json.loads(Path(path).read_text(encoding="utf-8"))
    config.setdefault("embedding", {"provider": "mock"})
    config.setdefault("generation", {"provider": "mock"})
    return config


def _redacted(config: dict) -> dict:
    def scrub(value):
        if isinstance(value, dict):
            return {
                k: ("***" if k.lower() in REDACTED_KEYS else scrub(v)) for k, v in value.items()
            }
        return value

    return scrub(config)


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_build(args: argparse.Namespace) -> int:
    providers_cfg = _load_provider_config(args.providers)
    logger.info("resolved config: %s", json.dumps(_redacted(providers_cfg), sort_keys=True))
    embed = make_embedding_provider(providers_cfg["embedding"])
    gen = make_generation_provider(providers_cfg["generation"])
    params = BuildParams(
        cluster_size=args.cluster_size,
        tau=args.tau,
        max_layers=args.max_layers,
        seed=args.seed,
        stop_when_entities_leq=args.stop_at,
        single_root=args.single_root,
    )
    entities, relations, chunks, ingest_report = store.ingest(args.input)
    h, embeddings, build_report = aggregation.build_hierarchy(
        entities, relations, params, embed, gen, max_workers=args.workers
    )
    violations = validate_hierarchy(h)
    if violations:
        raise HierKGError(f"built hierarchy failed validation: {violations[:5]}")
    manifest = store.save_index(
        h,
        embeddings,
        chunks,
        args.out,
        provider_ids={
            "embedding": providers_cfg["embedding"].get("provider", "mock"),
            "generation": providers_cfg["generation"].get("provider", "mock"),
        },
    )
    _emit(
        {
            "index_dir": str(args.out),
            "ingest": ingest_report.to_dict(),
            "build": build_report.to_dict(),
            "manifest": manifest.to_dict(),
        }
    )
    return EXIT_OK


def _make_bundles(h, embeddings, chunks, embed, query: str, args) -> dict:
    seeds, sub = retrieval.retrieve(h, embeddings, query, args.top_n, embed)
    lean = context.assemble_context(
        h,
        sub,
        seeds,
        chunks,
        top_c=args.top_c,
        include_relations=not args.no_relations,
        include_chunks=not args.no_context,
    )
    flat_sub = retrieval.flat_path_retrieve(h, seeds, max_hops=args.max_hops)
    flat = context.assemble_context(
        h,
        flat_sub,
        seeds,
        chunks,
        top_c=args.top_c,
        include_relations=not args.no_relations,
        include_chunks=not args.no_context,
    )
    return {"seeds": seeds, "sub": sub, "lean": lean, "flat_sub": flat_sub, "flat": flat}


def cmd_query(args: argparse.Namespace) -> int:
    providers_cfg = _load_provider_config(args.providers)
    embed = make_embedding_provider(providers_cfg["embedding"])
    h, embeddings, chunks, _manifest = store.load_index(args.index)

    seeds, sub = retrieval.retrieve(h, embeddings, args.query, args.top_n, embed)
    if args.baseline == "flat":
        sub = retrieval.flat_path_retrieve(h, seeds, max_hops=args.max_hops)
    bundle = context.assemble_context(
        h,
        sub,
        seeds,
        chunks,
        top_c=args.top_c,
        include_relations=not args.no_relations,
        include_chunks=not args.no_context,
    )
    if args.format == "text":
        sys.stdout.write(bundle.rendering() + "\n")
    else:
        _emit(
            {
                "query": args.query,
                "seeds": seeds.to_dict(),
                "subgraph": sub.to_dict(),
                "bundle": bundle.to_dict(),
            }
        )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    providers_cfg = _load_provider_config(args.providers)
    embed = make_embedding_provider(providers_cfg["embedding"])
    h, embeddings, chunks, _manifest = store.load_index(args.index)

    queries = [
        line.strip()
        for line in Path(args.queries).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    rows = []
    for query in queries:
        parts = _make_bundles(h, embeddings, chunks, embed, query, args)
        report = context.redundancy_report(parts["lean"], parts["flat"])
        rows.append(
            {
                "query": query,
                "lean_tokens": report["lean_tokens"],
                "baseline_tokens": report["baseline_tokens"],
                "ratio": report["ratio"],
            }
        )
    ratios = [row["ratio"] for row in rows if row["ratio"] is not None]
    mean_ratio = sum(ratios) / len(ratios) if ratios else None
    if args.format == "csv":
        sys.stdout.write("query,lean_tokens,baseline_tokens,ratio\n")
        for row in rows:
            ratio = "" if row["ratio"] is None else f"{row['ratio']:.6f}"
            sys.stdout.write(
                f"\"{row['query']}\",{row['lean_tokens']},{row['baseline_tokens']},{ratio}\n"
            )
    else:
        _emit({"rows": rows, "mean_ratio": mean_ratio, "num_queries": len(rows)})
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    h, embeddings, chunks, manifest = store.load_index(args.index)
    _emit(
        {
            "manifest": manifest.to_dict(),
            "layers": [
                {
                    "index": layer.index,
                    "entities": len(layer.entity_ids),
                    "relations": len(layer.relation_ids),
                }
                for layer in h.layers
            ],
            "chunks": len(chunks),
            "embeddings": len(embeddings),
            "validation_violations": validate_hierarchy(h),
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierkg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="ingest a JSONL knowledge file and build an index")
    p_build.add_argument("--input", required=True)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--cluster-size", type=int, default=20)
    p_build.add_argument("--tau", type=int, default=3)
    p_build.add_argument("--max-layers", type=int, default=4)
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--stop-at", type=int, default=None)
    p_build.add_argument("--single-root", action="store_true")
    p_build.add_argument("--workers", type=int, default=1)
    p_build.add_argument("--providers", default=None, help="provider config JSON file")
    p_build.set_defaults(func=cmd_build)

    p_query = sub.add_parser("query", help="run one query against a built index")
    p_query.add_argument("--index", required=True)
    p_query.add_argument("--query", required=True)
    p_query.add_argument("--top-n", type=int, default=10)
    p_query.add_argument("--top-c", type=int, default=5)
    p_query.add_argument("--no-relations", action="store_true")
    p_query.add_argument("--no-context", action="store_true")
    p_query.add_argument("--baseline", choices=["flat"], default=None)
    p_query.add_argument("--max-hops", type=int, default=retrieval.DEFAULT_MAX_HOPS)
    p_query.add_argument("--format", choices=["json", "text"], default="json")
    p_query.add_argument("--providers", default=None)
    p_query.set_defaults(func=cmd_query)

    p_bench = sub.add_parser("bench", help="token-redundancy comparison, hierarchy vs flat")
    p_bench.add_argument("--index", required=True)
    p_bench.add_argument("--queries", required=True, help="file with one query per line")
    p_bench.add_argument("--top-n", type=int, default=10)
    p_bench.add_argument("--top-c", type=int, default=5)
    p_bench.add_argument("--max-hops", type=int, default=retrieval.DEFAULT_MAX_HOPS)
    p_bench.add_argument("--no-relations", action="store_true")
    p_bench.add_argument("--no-context", action="store_true")
    p_bench.add_argument("--format", choices=["json", "csv"], default="json")
    p_bench.add_argument("--providers", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_stats = sub.add_parser("stats", help="print manifest and layer statistics")
    p_stats.add_argument("--index", required=True)
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (FileNotFoundError, IngestError, StoreError, NotFoundError) as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except (ProviderUnavailableError, GenerationParseError) as exc:
        logger.error("provider error: %s", exc)
        return EXIT_PROVIDER
    except InvalidArgumentError as exc:
        logger.error("usage error: %s", exc)
        return EXIT_USAGE
    except HierKGError as exc:
        logger.error("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
