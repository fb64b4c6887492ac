"""Command-line entry point wiring the modules into the three-step
pipeline: expand queries -> crawl -> (train heads) -> clean, plus the
supporting segment/eval/stats/sdr utilities.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cleaner, crawler, head, mixture, taxonomy
from .audio import SEGMENT_FRAMES, AudioBuffer, segment as segment_buffer, to_classifier_rate
from .config import ConfigError, PipelineConfig

log = logging.getLogger("stemcurate")


def _add_common(parser):
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--workers", type=int, help="override the worker count")
    parser.add_argument("--dry-run", action="store_true", help="report without writing audio")
    parser.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
    )


def _load_config(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stemcurate",
        description="Curate single-instrument audio datasets from crawled collections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand-queries", help="expand the taxonomy into crawl queries")
    p.add_argument("--translations", help="translation config JSON (default: built-in English)")
    p.add_argument("--out", help="output TSV path (default: stdout)")
    p.add_argument("--no-fallback", action="store_true", help="fail on missing translations")
    _add_common(p)

    p = sub.add_parser("crawl", help="plan and execute a crawl from a query list")
    p.add_argument("--queries", required=True, help="TSV from expand-queries")
    p.add_argument("--out", required=True, help="output directory for fetched audio")
    p.add_argument("--manifest", help="manifest path (default: <out>/manifest.jsonl)")
    p.add_argument("--limit", type=int, default=crawler.DEFAULT_PER_QUERY_LIMIT)
    p.add_argument("--rate", default="0/min", help="download pacing, e.g. 30/min")
    p.add_argument(
        "--fetcher",
        required=True,
        help="fetcher spec: local:<dir>, or external:<search_cmd>::<download_cmd>",
    )
    _add_common(p)

    p = sub.add_parser("segment", help="split one track into 3 s classifier windows")
    p.add_argument("--in", dest="input", required=True, help="input WAV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--source-id", help="provenance id (default: file stem)")
    _add_common(p)

    p = sub.add_parser("train-head", help="train one stem's purity head")
    p.add_argument("--stem", required=True, choices=list(taxonomy.STEM_IDS))
    p.add_argument("--pool", required=True, help="source pool manifest (JSON-lines)")
    p.add_argument("--out", required=True, help="output directory for checkpoint + report")
    p.add_argument("--n-per-class", type=int, help="examples per class per epoch dataset")
    _add_common(p)

    p = sub.add_parser("eval-head", help="evaluate a trained head on fresh synthetic data")
    p.add_argument("--head", required=True, help="checkpoint path")
    p.add_argument("--pool", required=True, help="source pool manifest (JSON-lines)")
    p.add_argument("--n-per-class", type=int, default=64)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", help="write the eval report JSON here")
    _add_common(p)

    p = sub.add_parser("clean", help="filter crawled tracks down to pure segments")
    p.add_argument("--manifest", required=True, help="crawl manifest or track list")
    p.add_argument("--heads", required=True, help="directory of <stem>.head.npz checkpoints")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--report", help="cleaning report path (default: <out>/cleaning_report.json)")
    p.add_argument("--out-rate", type=int, default=48000, help="output sample rate")
    p.add_argument("--mono", action="store_true", help="write mono instead of stereo")
    _add_common(p)

    p = sub.add_parser("stats", help="per-stem duration statistics")
    p.add_argument("--source", required=True, help="track manifest or cleaned-output directory")
    p.add_argument("--json", dest="json_out", help="write machine-readable stats here")
    _add_common(p)

    p = sub.add_parser("sdr", help="signal-to-distortion ratio between two WAVs")
    p.add_argument("--reference", required=True)
    p.add_argument("--estimate", required=True)
    _add_common(p)

    return parser


def _cmd_expand_queries(args, cfg):
    translations = args.translations or cfg.paths.get("translations")
    templates = (
        taxonomy.load_templates(translations)
        if translations
        else taxonomy.default_templates()
    )
    records = taxonomy.expand_queries(
        taxonomy.STEMS, templates, allow_fallback=not args.no_fallback
    )
    lines = [f"{r.stem_id}\t{r.language_tag}\t{r.query}" for r in records]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        print("\n".join(lines))
    fallbacks = sum(r.used_fallback for r in records)
    log.info("expanded %d queries (%d using English fallback)", len(records), fallbacks)
    return 0


def _parse_rate(text):
    value = text.split("/")[0]
    return float(value)


def _make_fetcher(spec):
    kind, _, rest = spec.partition(":")
    if kind == "local":
        return crawler.LocalDirectoryFetcher(rest)
    if kind == "external":
        search_cmd, sep, download_cmd = rest.partition("::")
        if not sep:
            raise ConfigError("external fetcher needs '<search_cmd>::<download_cmd>'")
        return crawler.ExternalCommandFetcher(search_cmd, download_cmd)
    raise ConfigError(f"unknown fetcher spec {spec!r}")


def _read_queries(path):
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        stem_id, language_tag, query = line.split("\t")
        records.append(taxonomy.QueryRecord(stem_id, language_tag, query))
    return records


def _cmd_crawl(args, cfg):
    fetcher = _make_fetcher(args.fetcher)
    queries = _read_queries(args.queries)
    manifest_path = Path(args.manifest) if args.manifest else Path(args.out) / "manifest.jsonl"
    if manifest_path.exists():
        manifest = crawler.CrawlManifest.load(manifest_path)
        log.info("resuming from %s (%s)", manifest_path, manifest.status_counts())
    else:
        manifest = crawler.plan_crawl(queries, fetcher, args.limit)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        manifest.save(manifest_path)
        log.info("planned %d records", len(manifest))
    if args.dry_run:
        print(json.dumps(manifest.status_counts()))
        return 0
    crawler.execute_crawl(
        manifest,
        fetcher,
        args.out,
        rate_limit_per_min=_parse_rate(args.rate),
        workers=cfg.workers,
    )
    manifest.save(manifest_path)
    print(json.dumps(manifest.status_counts()))
    return 0


def _cmd_segment(args, cfg):
    buf = to_classifier_rate(AudioBuffer.from_wav(args.input))
    source_id = args.source_id or Path(args.input).stem
    segments = segment_buffer(buf, source_id)
    out_dir = Path(args.out)
    if not args.dry_run:
        out_dir.mkdir(parents=True, exist_ok=True)
        for seg in segments:
            seg.audio.to_wav(out_dir / f"{source_id}.{seg.index:05d}.wav")
    dropped = buf.frames - len(segments) * SEGMENT_FRAMES
    print(f"{len(segments)} segments written, {dropped} trailing frames dropped")
    return 0


def _cmd_train_head(args, cfg):
    backend = cfg.make_backend()
    pool = mixture.SourcePool.from_manifest(args.pool)
    n_per_class = args.n_per_class or cfg.training.n_per_class
    examples = mixture.build_epoch(
        pool,
        args.stem,
        n_per_class,
        seed=cfg.seed,
        augment=cfg.augment,
        loudness_target=cfg.loudness_target_lufs,
    )
    from .embedding import embed

    dataset = [(embed(seg, backend), label) for seg, label in examples]
    train_cfg = cfg.training
    train_cfg.seed = cfg.seed
    params, train_log = head.train_head(dataset, train_cfg)
    report = head.evaluate(params, dataset, cfg.train_eval_threshold)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / f"{args.stem}.head.npz"
    head.save_head(ckpt, params, backend.name, cfg.seed, extra={"stem": args.stem})
    report_path = out_dir / f"{args.stem}.eval.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"eval": report.to_dict(), "log": train_log}, fh, indent=2)
    print(
        f"{args.stem}: acc={report.accuracy:.4f} f1={report.f1:.4f} "
        f"-> {ckpt} ({len(train_log)} epochs)"
    )
    return 0


def _cmd_eval_head(args, cfg):
    backend = cfg.make_backend()
    params, meta = head.load_head(args.head, backend)
    pool = mixture.SourcePool.from_manifest(args.pool)
    stem = meta.get("extra", {}).get("stem") or Path(args.head).name.split(".")[0]
    examples = mixture.build_epoch(
        pool,
        stem,
        args.n_per_class,
        seed=cfg.seed + 1,  # never evaluate on the training draw
        augment=cfg.augment,
        loudness_target=cfg.loudness_target_lufs,
    )
    from .embedding import embed

    dataset = [(embed(seg, backend), label) for seg, label in examples]
    threshold = args.threshold or cfg.train_eval_threshold
    report = head.evaluate(params, dataset, threshold)
    payload = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def _cmd_clean(args, cfg):
    backend = cfg.make_backend()
    entries = cleaner.load_track_entries(args.manifest)
    heads_dir = Path(args.heads)
    heads = {}
    for ckpt in sorted(heads_dir.glob("*.head.npz")):
        stem = ckpt.name.split(".")[0]
        heads[stem], _ = head.load_head(ckpt, backend)
    threshold = args.threshold or cfg.clean_threshold
    report = cleaner.clean_corpus(
        entries,
        heads,
        backend,
        args.out,
        threshold=threshold,
        workers=cfg.workers,
        output_rate_hz=args.out_rate,
        output_stereo=not args.mono,
        dry_run=args.dry_run,
    )
    report_path = Path(args.report) if args.report else Path(args.out) / "cleaning_report.json"
    if not args.dry_run:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report.save(report_path)
    totals = report.global_totals()
    print(
        f"cleaned {totals['tracks']} tracks: {totals['hours_in']:.3f} h in "
        f"-> {totals['hours_out']:.3f} h out (threshold {threshold})"
    )
    return 0


def _cmd_stats(args, cfg):
    stats = cleaner.corpus_stats(args.source)
    print(stats.format_table())
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(stats.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_sdr(args, cfg):
    ref = AudioBuffer.from_wav(args.reference)
    est = AudioBuffer.from_wav(args.estimate)
    print(f"{cleaner.sdr(ref, est):.2f} dB")
    return 0


_COMMANDS = {
    "expand-queries": _cmd_expand_queries,
    "crawl": _cmd_crawl,
    "segment": _cmd_segment,
    "train-head": _cmd_train_head,
    "eval-head": _cmd_eval_head,
    "clean": _cmd_clean,
    "stats": _cmd_stats,
    "sdr": _cmd_sdr,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures keep a structured one-liner
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
