"""Operator-facing command line: ingest, query, stats, eval, snapshot."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import replace
from pathlib import Path

from .build import Memory, build
from .errors import SeemError
from .evaluation import EvalReport, answer, exact_match_judge, run_eval
from .gateway import GatewayConfig, HttpGateway, MockGateway
from .ingest import FORMATS, load_dataset
from .model import RetrievalConfig
from .reporting import consolidation_table, gml_stats_dict, gml_table
from .retrieval import Toggles

logger = logging.getLogger(__name__)

_MOCK_FINGERPRINT_RE = re.compile(r"^mock:v1:dim=(\d+):seed=(-?\d+)$")

TOGGLE_CHOICES = ("no-rpe", "no-eef", "no-facts", "no-ppr")


def _add_gateway_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gateway", choices=("mock", "http"), default="mock",
                        help="mock is fully offline and deterministic")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for the mock gateway (default 0 or the snapshot's)")
    parser.add_argument("--dim", type=int, default=None,
                        help="mock embedding dimension (default 256 or the snapshot's)")


def _make_gateway(args, snapshot_path: str | None = None):
    if args.gateway == "http":
        return HttpGateway(GatewayConfig.from_env())
    seed, dim = args.seed, args.dim
    if snapshot_path is not None and (seed is None or dim is None):
        try:
            fingerprint = json.loads(Path(snapshot_path).read_text(encoding="utf-8")) \
                .get("gateway_fingerprint", "")
        except Exception:
            fingerprint = ""
        match = _MOCK_FINGERPRINT_RE.match(fingerprint)
        if match:
            dim = int(match.group(1)) if dim is None else dim
            seed = int(match.group(2)) if seed is None else seed
    return MockGateway(dim=256 if dim is None else dim, seed=0 if seed is None else seed)


def _config(args) -> RetrievalConfig:
    config = RetrievalConfig()
    if getattr(args, "n", None) is not None:
        config = replace(config, initial_retrieval_size=args.n)
    return config


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_ingest(args) -> int:
    samples = load_dataset(args.path, args.format)
    if args.sample >= len(samples):
        raise SeemError(f"sample {args.sample} out of range ({len(samples)} available)")
    sample = samples[args.sample]
    for where, reason in sample.malformed:
        logger.warning("malformed record at %s: %s", where, reason)
    gateway = _make_gateway(args)
    memory = build(
        sample.document, gateway, _config(args), mode=args.mode, segments=args.segments,
        out_path=args.out, quarantine_tolerance=args.quarantine_tolerance,
        resume=args.resume,
    )
    summary = {
        "conversation_id": memory.conversation_id,
        "passages": len(memory.passages),
        "frames": len(memory.episodic.frames),
        "quarantined": len(memory.episodic.quarantined),
        "facts": len(memory.graph.facts),
        "entities": len(memory.graph.entities),
        "malformed_records": len(sample.malformed),
        "snapshot": str(args.out),
    }
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_query(args) -> int:
    gateway = _make_gateway(args, snapshot_path=args.snapshot)
    memory = Memory.load(args.snapshot, gateway)
    if getattr(args, "n", None) is not None:
        memory.config = replace(memory.config, initial_retrieval_size=args.n)
    toggles = Toggles.from_names(args.toggle or [])
    text, audit = answer(memory.retriever(), args.question, toggles)
    if args.explain:
        payload = {"answer": text, "audit": audit.to_dict()}
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(text + "\n", args.out)
    return 0


def cmd_stats(args) -> int:
    gateway = _make_gateway(args, snapshot_path=args.snapshot)
    memory = Memory.load(args.snapshot, gateway)
    chunks = []
    if args.layer in ("eml", "all"):
        stats = memory.episodic.consolidation_stats()
        chunks.append(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n"
                      if args.json else consolidation_table(stats))
    if args.layer in ("gml", "all"):
        partitions = [(memory.conversation_id, memory.graph.graph_stats())]
        chunks.append(json.dumps(gml_stats_dict(partitions), indent=2, sort_keys=True) + "\n"
                      if args.json else gml_table(partitions))
    _emit("\n".join(chunks), args.out)
    return 0


def cmd_eval(args) -> int:
    samples = load_dataset(args.dataset, args.format)
    if args.sample is not None:
        if args.sample >= len(samples):
            raise SeemError(f"sample {args.sample} out of range ({len(samples)} available)")
        samples = [samples[args.sample]]
    gateway = _make_gateway(args)
    toggles = Toggles.from_names(args.toggle or [])
    judge = exact_match_judge if args.judge == "exact" else None
    records, skipped, audits = [], 0, {}
    for sample in samples:
        memory = build(sample.document, gateway, _config(args))
        report = run_eval(memory.retriever(), list(sample.questions), toggles,
                          judge=judge, workers=args.workers)
        records.extend(report.records)
        skipped += report.skipped
        audits.update(report.audits)
    merged = EvalReport(records=records, skipped=skipped, audits=audits)
    if args.csv:
        _emit(merged.to_csv(), args.out)
    elif args.json:
        _emit(merged.to_json(), args.out)
    else:
        _emit(merged.to_table(), args.out)
    return 0


def cmd_snapshot(args) -> int:
    gateway = _make_gateway(args, snapshot_path=args.snapshot)
    if args.action == "inspect":
        data = json.loads(Path(args.snapshot).read_text(encoding="utf-8"))
        meta = {
            "format_version": data.get("format_version"),
            "conversation_id": data.get("conversation_id"),
            "gateway_fingerprint": data.get("gateway_fingerprint"),
            "embedding_dim": data.get("embedding_dim"),
            "ingest_cursor": data.get("ingest_cursor"),
            "passages": len(data.get("passages", [])),
            "frames": len(data.get("episodic", {}).get("frames", [])),
            "quarantined": len(data.get("episodic", {}).get("quarantined", [])),
            "entities": len(data.get("graph", {}).get("entities", [])),
            "facts": len(data.get("graph", {}).get("facts", [])),
            "synonymy_edges": len(data.get("graph", {}).get("synonymy_edges", [])),
        }
        _emit(json.dumps(meta, indent=2, sort_keys=True) + "\n", args.out)
        return 0
    memory = Memory.load(args.snapshot, gateway)
    if args.action == "load":
        memory.audit()
        sys.stdout.write(f"loaded {memory.conversation_id}: {len(memory.passages)} passages, "
                         f"{len(memory.episodic.frames)} frames, "
                         f"{len(memory.graph.facts)} facts; audits passed\n")
        return 0
    # save: canonical re-serialization
    if not args.out:
        raise SeemError("snapshot save requires --out")
    memory.save(args.out)
    sys.stdout.write(f"saved canonical snapshot to {args.out}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seem",
        description="Hierarchical long-term memory engine: build a dual-layer store "
                    "from transcripts, then query it with propagation-seeded retrieval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build memory from a transcript and persist a snapshot")
    p.add_argument("path")
    p.add_argument("--format", choices=FORMATS, default="jsonl")
    p.add_argument("--mode", choices=("batch", "incremental"), default="batch")
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--sample", type=int, default=0,
                   help="sample index for multi-sample formats")
    p.add_argument("--out", required=True, help="snapshot path")
    p.add_argument("--quarantine-tolerance", type=float, default=0.05)
    p.add_argument("--resume", action="store_true",
                   help="continue an interrupted incremental build from --out")
    p.add_argument("--n", type=int, default=None, help="initial retrieval size to pin")
    _add_gateway_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="answer one question over a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--toggle", action="append", choices=TOGGLE_CHOICES)
    p.add_argument("--explain", action="store_true", help="emit the audit JSON")
    p.add_argument("--out", default=None)
    _add_gateway_args(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("stats", help="report consolidation and graph statistics")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--layer", choices=("eml", "gml", "all"), default="all")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    _add_gateway_args(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="run the QA evaluation harness")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=FORMATS, default="qa-json")
    p.add_argument("--sample", type=int, default=None, help="evaluate one sample only")
    p.add_argument("--toggle", action="append", choices=TOGGLE_CHOICES)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--judge", choices=("none", "exact"), default="none")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", default=None)
    _add_gateway_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("snapshot", help="inspect, validate, or canonically re-save a snapshot")
    p.add_argument("action", choices=("inspect", "load", "save"))
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", default=None)
    _add_gateway_args(p)
    p.set_defaults(func=cmd_snapshot)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SeemError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
