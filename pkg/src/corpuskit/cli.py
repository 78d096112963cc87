"""Command-line entry point binding all modules into ingest / index / query /
ask / distill / eval / stats / serve workflows.

Exit codes: 0 success, 1 operational failure (with a machine-readable error
line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import docmodel, evalharness, experience, pipeline
from .config import AppConfig, load_config
from .errors import ConfigError, CorpuskitError
from .fusion import Weights
from .server import dumps_payload, make_server
from .store import Store

LOCK_FILE = ".lock"


def _config_from_args(args: argparse.Namespace) -> AppConfig:
    overrides: dict = {}
    if getattr(args, "store", None):
        overrides["store_path"] = args.store
    if getattr(args, "weights", None):
        parts = [float(p) for p in args.weights.split(",")]
        if len(parts) != 3:
            raise ConfigError("weights: expected three comma-separated values")
        overrides["weights"] = {
            "semantic": parts[0],
            "lexical": parts[1],
            "relational": parts[2],
        }
    for flag, key in (
        ("pool_size", "pool_size"),
        ("cap", "cap"),
        ("tau", "tau"),
        ("budget", "budget"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "auto_accept", False):
        overrides["review_mode"] = "auto_accept"
    return load_config(getattr(args, "config", None), overrides)


def _locked(store_path: Path) -> bool:
    return (store_path / LOCK_FILE).exists()


def _fail(code: str, message: str) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return 1


def _print_payload(payload: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(dumps_payload(payload))
    else:
        raise ValueError(f"unsupported format {fmt!r} for this payload")


# --------------------------------------------------------------------------
# subcommands

def _cmd_ingest(args) -> int:
    config = _config_from_args(args)
    store_path = Path(config.store_path)
    if _locked(store_path):
        return _fail("StoreLocked", f"store {store_path} is held by a running server")
    store = Store(store_path)
    directory = Path(args.directory)
    if not directory.is_dir():
        return _fail("BadDirectory", f"not a directory: {directory}")
    files = sorted(p for p in directory.iterdir() if p.is_file())
    failures = 0
    for path in files:
        try:
            article = docmodel.parse_article(path.read_text("utf-8"))
            store.upsert_article(article)
            print(f"ingested {article.meta.article_id} from {path.name}")
        except CorpuskitError as exc:
            failures += 1
            print(f"failed {path.name}: {exc.code}: {exc.message}", file=sys.stderr)
    print(f"ingested {len(files) - failures}/{len(files)} files")
    return 1 if failures else 0


def _cmd_index(args) -> int:
    if args.action != "build":
        return _fail("BadAction", f"unknown index action {args.action!r}")
    config = _config_from_args(args)
    store_path = Path(config.store_path)
    if _locked(store_path):
        return _fail("StoreLocked", f"store {store_path} is held by a running server")
    store = Store(store_path)
    pipeline.build_indexes(store, config)
    chunks = len(store.all_chunks())
    print(f"built lexical, vector, value indexes over {chunks} chunks")
    return 0


def _cmd_query(args) -> int:
    config = _config_from_args(args)
    store = Store(config.store_path)
    indexes = pipeline.load_indexes(store, config)
    q, result = pipeline.run_query(store, indexes, config, args.query, args.filter)
    payload = pipeline.query_payload(q, result)
    if args.format == "json":
        _print_payload(payload, "json")
    elif args.format == "csv":
        print("article_id,chunk_id,category,fused")
        for a in result.articles:
            for c in a.chunks:
                print(f"{a.article_id},{c.scored.chunk_id},{c.category},{c.scored.fused}")
    else:
        if not result.articles:
            print("no results")
        for a in result.articles:
            print(f"{a.article_id}  score={a.score:.4f}")
            for c in a.chunks:
                print(f"  {c.scored.chunk_id}  fused={c.scored.fused:.4f}  [{c.category}] {c.heading}")
    return 0


def _cmd_ask(args) -> int:
    config = _config_from_args(args)
    store = Store(config.store_path)
    indexes = pipeline.load_indexes(store, config)
    payload = pipeline.run_ask(store, indexes, config, args.query, args.filter)
    if args.format == "json":
        _print_payload(payload, "json")
    else:
        print(payload["answer"])
        print()
        ratio = payload["grounding"]["ratio"]
        print(f"grounding ratio: {ratio}")
        for item in payload["grounding"]["ungrounded"]:
            print(f"ungrounded: {item['value']} {item['unit']}")
    return 0


def _cmd_distill(args) -> int:
    config = _config_from_args(args)
    store = Store(config.store_path)
    indexes = pipeline.load_indexes(store, config)
    chunks_by_id = store.chunks_by_id()

    def retriever(objective: str):
        _, result = pipeline.run_query(store, indexes, config, objective)
        return [chunks_by_id[c.chunk_id] for c in result.pool]

    if config.review_mode == "interactive":
        reviewer = _interactive_reviewer
    else:
        reviewer = None
    loop_config = experience.ExperienceConfig(
        batch_size=args.batch_size,
        max_iterations=args.max_iterations,
        review_mode=config.review_mode,
        llm_spec=config.generator,
        reviewer=reviewer,
    )
    doc = experience.run_loop(args.objective, retriever, loop_config)
    out = Path(args.out) if args.out else Path(config.store_path) / "experience.txt"
    experience.save_experience(doc, out)
    print(f"distilled {doc.version} accepted iterations into {out}")
    print(f"audit trail: {out.with_suffix('.audit.jsonl')}")
    return 0


def _interactive_reviewer(draft, quality) -> experience.ReviewDecision:
    print(experience.serialize_experience(draft))
    print(
        f"grounding ratio {quality.grounding_ratio:.3f}, "
        f"entity coverage {quality.entity_coverage:.3f}"
    )
    while True:
        answer = input("accept / reject / edit? ").strip().lower()
        if answer in ("accept", "reject"):
            return experience.ReviewDecision(answer)
        if answer == "edit":
            print("enter replacement text, end with a single '.' line:")
            lines = []
            while True:
                line = input()
                if line == ".":
                    break
                lines.append(line)
            return experience.ReviewDecision("edit", edited_text="\n".join(lines))


def _cmd_eval(args) -> int:
    config = _config_from_args(args)
    store = Store(config.store_path)
    indexes = pipeline.load_indexes(store, config)
    queries = evalharness.load_queries(args.queries)

    def search(eq: evalharness.EvalQuery):
        _, result = pipeline.run_query(store, indexes, config, eq.query)
        return result

    report, records = evalharness.evaluate_queries(queries, search, n=args.n)
    if args.out_jsonl:
        Path(args.out_jsonl).write_text(
            "".join(json.dumps(r, sort_keys=True) + "\n" for r in records), "utf-8"
        )
    if args.out_csv:
        Path(args.out_csv).write_text(evalharness.report_csv(records), "utf-8")
    if args.format == "json":
        _print_payload(report.to_dict(), "json")
    else:
        rates = report.rates
        print(f"queries: {len(report.labels)}")
        for label in evalharness.HIT_LABELS:
            print(f"{label}: {rates[label]:.3f}")
    return 0


def _cmd_stats(args) -> int:
    config = _config_from_args(args)
    store = Store(config.store_path)
    stats = store.corpus_stats()
    if args.format == "json":
        _print_payload(stats.to_dict(), "json")
    elif args.format == "csv":
        print("category,tokens,sentences,quantities")
        for category in sorted(stats.by_category):
            row = stats.by_category[category]
            print(f"{category},{row['tokens']},{row['sentences']},{row['quantities']}")
        totals = stats.totals
        print(f"total,{totals['tokens']},{totals['sentences']},{totals['quantities']}")
    else:
        print(f"articles: {stats.article_count}")
        for category in sorted(stats.by_category):
            row = stats.by_category[category]
            print(
                f"{category}: tokens={row['tokens']} sentences={row['sentences']} "
                f"quantities={row['quantities']}"
            )
        totals = stats.totals
        print(
            f"total: tokens={totals['tokens']} sentences={totals['sentences']} "
            f"quantities={totals['quantities']}"
        )
    return 0


def _cmd_serve(args) -> int:
    config = _config_from_args(args)
    store_path = Path(config.store_path)
    store = Store(store_path)
    lock = store_path / LOCK_FILE
    store_path.mkdir(parents=True, exist_ok=True)
    if lock.exists():
        return _fail("StoreLocked", f"another server already holds {store_path}")
    lock.write_text("serve\n", "utf-8")
    server = make_server(store, config, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving {store_path} on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        lock.unlink(missing_ok=True)
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpuskit",
        description="Lightly structured article store with composite retrieval and grounded RAG.",
    )
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--store", help="store directory (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, validate, and upsert article files")
    p.add_argument("directory")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("index", help="index maintenance")
    p.add_argument("action", choices=["build"])
    p.set_defaults(func=_cmd_index)

    common_query = dict(formats=("text", "json", "csv"))
    p = sub.add_parser("query", help="composite retrieval")
    p.add_argument("query")
    p.add_argument("--filter", help="condition grammar, e.g. 'thickness<100nm' (hard filter)")
    p.add_argument("--format", choices=common_query["formats"], default="text")
    p.add_argument("--weights", help="w_sem,w_lex,w_rel (must sum to 1)")
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--tau", type=float)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("ask", help="retrieval-augmented answer with grounding report")
    p.add_argument("query")
    p.add_argument("--filter")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--weights")
    p.add_argument("--budget", type=int)
    p.set_defaults(func=_cmd_ask)

    p = sub.add_parser("distill", help="run the experience-distillation loop")
    p.add_argument("--objective", required=True)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=20)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=10)
    p.add_argument("--auto-accept", dest="auto_accept", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("eval", help="hit-rate evaluation over a query set")
    p.add_argument("--queries", required=True, help="JSONL file of eval queries")
    p.add_argument("--n", type=int, default=evalharness.DEFAULT_HIT_N)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out-jsonl", dest="out_jsonl")
    p.add_argument("--out-csv", dest="out_csv")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("serve", help="HTTP API over a built store")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CorpuskitError as exc:
        return _fail(exc.code, exc.message)
    except OSError as exc:
        return _fail("StorageFailure", str(exc))


if __name__ == "__main__":
    sys.exit(main())
