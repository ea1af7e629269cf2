"""Command-line pipeline: each stage is a subcommand, `run` composes them.

Stage outputs are always written to disk so a pipeline can resume per stage;
diagnostics go to stderr, data to the configured files.  Exit codes: 0 on
success, 2 for I/O problems, 3 for an empty training corpus, 4 for a
checkpoint/vocabulary mismatch, 5 for missing scores, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import PipelineConfig, load_config, with_seed
from .corpus import (
    BootstrapStats,
    CorpusError,
    ProvenanceEntry,
    Record,
    extract_first_sentence,
    prepare_bootstrap,
    read_jsonl,
    write_jsonl,
)
from .metrics import answered_at_k, mrr, read_rank_file, sample_size
from .rules import Ruleset, apply_ruleset, ruleset_from_config
from .threshold import partition
from .vae import TrainingError, VaeConfig, reconstruction_loss, train
from .vocab import Vocabulary, build_vocab, tokenize

EXIT_IO = 2
EXIT_EMPTY_CORPUS = 3
EXIT_VOCAB_MISMATCH = 4
EXIT_MISSING_SCORES = 5


class MissingScoreError(RuntimeError):
    pass


def _diag(quiet: bool, message: str) -> None:
    if not quiet:
        print(message, file=sys.stderr)


def _write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# ----------------------------------------------------------------------
# rule-filter stage
# ----------------------------------------------------------------------

_WORKER: dict = {}


def _rule_worker_init(order, disabled):
    _WORKER["ruleset"] = ruleset_from_config(order, disabled)


def filter_comment(ruleset: Ruleset, raw_comment: str):
    """First-sentence extraction followed by the ruleset; pure per record."""
    first = extract_first_sentence(raw_comment)
    return first, apply_ruleset(ruleset, first)


def _rule_worker(raw_comment: str):
    return filter_comment(_WORKER["ruleset"], raw_comment)


def run_rule_filter(
    cfg: PipelineConfig,
    input_path,
    retained_path,
    rejects_path,
    stats_path,
    extra_disabled: tuple[str, ...] = (),
    jobs: int = 1,
    quiet: bool = False,
) -> dict:
    ruleset = cfg.build_ruleset(extra_disabled)
    enabled = [r for r in ruleset.rules if r.enabled]
    modified = {r.id: 0 for r in enabled if r.kind == "transform"}
    discarded = {r.id: 0 for r in enabled if r.kind == "reject"}
    n_input = 0
    n_retained = 0

    records = list(read_jsonl(input_path))
    if jobs > 1:
        with multiprocessing.Pool(
            jobs,
            initializer=_rule_worker_init,
            initargs=(ruleset.rule_ids(), tuple(r.id for r in ruleset.rules if not r.enabled)),
        ) as pool:
            results = list(pool.imap(_rule_worker, (r.comment for r in records), chunksize=256))
    else:
        results = [filter_comment(ruleset, r.comment) for r in records]

    retained_records: list[Record] = []
    rejected_records: list[Record] = []
    for record, (first, outcome) in zip(records, results):
        n_input += 1
        if first != record.comment:
            record.provenance.append(
                ProvenanceEntry("extract", "transformed", before=record.comment, after=first)
            )
        record.comment = first
        for step in outcome.transforms:
            modified[step.rule_id] += 1
            record.provenance.append(
                ProvenanceEntry("rule", "transformed", rule_id=step.rule_id,
                                before=step.before, after=step.after)
            )
            record.comment = step.after
        if outcome.action == "rejected":
            discarded[outcome.rule_id] += 1
            record.provenance.append(
                ProvenanceEntry("rule", "rejected", rule_id=outcome.rule_id)
            )
            rejected_records.append(record)
        else:
            record.comment = outcome.text
            record.provenance.append(ProvenanceEntry("rule", "retained"))
            retained_records.append(record)
            n_retained += 1

    rows = []
    running = n_input
    for rule in enabled:
        if rule.kind == "transform":
            rows.append({"rule": rule.id, "kind": "transform",
                         "modified": modified[rule.id], "retained": running})
        else:
            running -= discarded[rule.id]
            rows.append({"rule": rule.id, "kind": "reject",
                         "discarded": discarded[rule.id], "retained": running})
    stats = {"input": n_input, "retained": n_retained,
             "rejected": n_input - n_retained, "rows": rows}

    write_jsonl(retained_records, retained_path)
    write_jsonl(rejected_records, rejects_path)
    _write_json(stats, stats_path)
    _diag(quiet, f"rule-filter: {n_retained}/{n_input} records retained")
    return stats


# ----------------------------------------------------------------------
# bootstrap stage
# ----------------------------------------------------------------------


def run_bootstrap(cfg: PipelineConfig, titles_path, output_path, quiet=False) -> BootstrapStats:
    ruleset = cfg.build_ruleset(extra_disabled=("interrogation",))
    stats = BootstrapStats()
    with open(titles_path, "r", encoding="utf-8") as fh:
        titles = (line.rstrip("\n") for line in fh)
        with open(output_path, "w", encoding="utf-8") as out:
            for query in prepare_bootstrap(titles, ruleset, stats):
                out.write(query + "\n")
    _diag(
        quiet,
        f"bootstrap: kept {stats.kept}/{stats.total} titles "
        f"({stats.not_how_to} without the how-to prefix, {stats.rejected} rejected)",
    )
    return stats


# ----------------------------------------------------------------------
# train stage
# ----------------------------------------------------------------------


def run_train(cfg: PipelineConfig, bootstrap_path, checkpoint_path, vocab_path, quiet=False):
    with open(bootstrap_path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    token_lists = [tokenize(line) for line in lines]
    vocab = build_vocab(token_lists, cfg.tokenizer.max_size, cfg.tokenizer.min_count)
    sequences = [vocab.encode(tokens, cfg.tokenizer.max_len) for tokens in token_lists]
    if not sequences:
        raise TrainingError("training corpus is empty")

    vae_cfg = VaeConfig(
        vocab_size=vocab.size,
        embed_dim=cfg.vae.embed_dim,
        hidden_dim=cfg.vae.hidden_dim,
        latent_dim=cfg.vae.latent_dim,
        max_len=cfg.tokenizer.max_len,
        epochs=cfg.vae.epochs,
        batch_size=cfg.vae.batch_size,
        learning_rate=cfg.vae.learning_rate,
        kl_anneal_steps=cfg.vae.kl_anneal_steps,
        seed=cfg.seed,
    )
    _diag(quiet, f"train: {len(sequences)} sequences, vocabulary size {vocab.size}")

    def progress(stats):
        _diag(
            quiet,
            f"epoch {stats.epoch}: ce {stats.mean_ce:.4f} kl {stats.mean_kl:.4f} "
            f"({stats.seconds:.1f}s)",
        )

    params, trace = train(sequences, vae_cfg, progress=progress)
    vocab.save(vocab_path)
    save_checkpoint(params, vae_cfg, vocab.content_hash(), checkpoint_path)
    return trace


# ----------------------------------------------------------------------
# score stage
# ----------------------------------------------------------------------


def _score_worker_init(checkpoint_path, vocab_path):
    vocab = Vocabulary.load(vocab_path)
    params, config = load_checkpoint(checkpoint_path, vocab.content_hash())
    _WORKER.update(params=params, config=config, vocab=vocab)


def _score_worker(comment: str) -> float:
    vocab = _WORKER["vocab"]
    ids = vocab.encode(tokenize(comment), _WORKER["config"].max_len)
    return reconstruction_loss(_WORKER["params"], ids)


def run_score(
    cfg: PipelineConfig,
    input_path,
    checkpoint_path,
    vocab_path,
    output_path,
    jobs: int = 1,
    quiet: bool = False,
) -> int:
    vocab = Vocabulary.load(vocab_path)
    params, vae_cfg = load_checkpoint(checkpoint_path, vocab.content_hash())
    records = list(read_jsonl(input_path))

    empty = sum(1 for r in records if not tokenize(r.comment))
    if empty:
        _diag(quiet, f"score: {empty} records encode to BOS/EOS only (empty comment)")

    if jobs > 1:
        with multiprocessing.Pool(
            jobs, initializer=_score_worker_init, initargs=(checkpoint_path, vocab_path)
        ) as pool:
            scores = list(pool.imap(_score_worker, (r.comment for r in records), chunksize=64))
    else:
        scores = [
            reconstruction_loss(params, vocab.encode(tokenize(r.comment), vae_cfg.max_len))
            for r in records
        ]
    for record, score in zip(records, scores):
        record.score = score
    write_jsonl(records, output_path)
    _diag(quiet, f"score: {len(records)} records scored")
    return len(records)


# ----------------------------------------------------------------------
# partition stage
# ----------------------------------------------------------------------


def run_partition(
    cfg: PipelineConfig,
    input_path,
    retained_path,
    rejects_path,
    report_path,
    strip_provenance: bool = False,
    quiet: bool = False,
) -> dict:
    records = list(read_jsonl(input_path))
    if not records:
        raise ValueError("nothing to partition: input is empty")
    missing = [r.id for r in records if r.score is None]
    if missing:
        raise MissingScoreError(
            f"{len(missing)} records lack scores (first: {missing[0]}); run the score stage first"
        )
    result = partition(
        [(r.id, r.score) for r in records],
        strategy=cfg.threshold.strategy,
        p=cfg.threshold.p,
        seed=cfg.seed,
        max_iter=cfg.threshold.max_iter,
        tol=cfg.threshold.tol,
    )
    keep = set(result.retained)
    retained_records, rejected_records = [], []
    for record in records:
        if record.id in keep:
            record.provenance.append(ProvenanceEntry("semantic", "retained"))
            if strip_provenance:
                record.provenance = []
            retained_records.append(record)
        else:
            record.provenance.append(ProvenanceEntry("semantic", "rejected"))
            rejected_records.append(record)
    write_jsonl(retained_records, retained_path)
    write_jsonl(rejected_records, rejects_path)
    _write_json(result.report, report_path)
    _diag(
        quiet,
        f"partition[{cfg.threshold.strategy}]: retained "
        f"{len(retained_records)}/{len(records)} "
        f"({100.0 * result.report['retained_fraction']:.1f}%)",
    )
    return result.report


# ----------------------------------------------------------------------
# argument parsing and dispatch
# ----------------------------------------------------------------------


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="pipeline configuration file (INI)")
    sub.add_argument("--seed", type=int, help="override the configured seed")
    sub.add_argument("--jobs", type=int, default=1, help="parallel workers for record stages")
    sub.add_argument("--quiet", action="store_true", help="suppress diagnostics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="queryfilter",
        description="Clean comment-code corpora into query-quality training pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rule-filter", help="apply the syntactic ruleset")
    _common_flags(p)
    p.add_argument("--input")
    p.add_argument("--retained")
    p.add_argument("--rejects")
    p.add_argument("--stats")
    p.add_argument("--disable-rule", action="append", default=[], metavar="RULE_ID")

    p = sub.add_parser("bootstrap", help="prepare the bootstrap query corpus from titles")
    _common_flags(p)
    p.add_argument("--input", help="question titles, one per line")
    p.add_argument("--output")

    p = sub.add_parser("train", help="train the scoring model on the bootstrap corpus")
    _common_flags(p)
    p.add_argument("--bootstrap")
    p.add_argument("--checkpoint")
    p.add_argument("--vocabulary")

    p = sub.add_parser("score", help="attach reconstruction-loss scores to records")
    _common_flags(p)
    p.add_argument("--input")
    p.add_argument("--checkpoint")
    p.add_argument("--vocabulary")
    p.add_argument("--output")

    p = sub.add_parser("partition", help="split scored records into retained/rejected")
    _common_flags(p)
    p.add_argument("--input")
    p.add_argument("--retained")
    p.add_argument("--rejects")
    p.add_argument("--report")
    p.add_argument("--strategy", choices=["gmm", "percentile", "kmeans2"])
    p.add_argument("--p", type=float, help="retained fraction for the percentile strategy")
    p.add_argument("--strip-provenance", action="store_true")

    p = sub.add_parser("run", help="run all stages end to end")
    _common_flags(p)
    p.add_argument("--input")
    p.add_argument("--bootstrap")

    p = sub.add_parser("metrics", help="evaluate a JSONL rank file")
    _common_flags(p)
    p.add_argument("rank_file")
    p.add_argument("--k", type=int, nargs="+", default=[1, 5, 10])

    p = sub.add_parser("sample-size", help="manual-inspection sample size")
    _common_flags(p)
    p.add_argument("population", type=float)
    p.add_argument("--z", type=float, default=1.96)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--c", type=float, default=0.05)

    return parser


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _pick(flag, configured):
    return flag if flag is not None else configured


def cmd_rule_filter(args) -> int:
    cfg = _load_cfg(args)
    run_rule_filter(
        cfg,
        _pick(args.input, cfg.paths.input),
        _pick(args.retained, cfg.paths.rule_retained),
        _pick(args.rejects, cfg.paths.rule_rejects),
        _pick(args.stats, cfg.paths.rule_stats),
        extra_disabled=tuple(args.disable_rule),
        jobs=args.jobs,
        quiet=args.quiet,
    )
    return 0


def cmd_bootstrap(args) -> int:
    cfg = _load_cfg(args)
    run_bootstrap(cfg, _pick(args.input, cfg.paths.titles), _pick(args.output, cfg.paths.bootstrap), args.quiet)
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    run_train(
        cfg,
        _pick(args.bootstrap, cfg.paths.bootstrap),
        _pick(args.checkpoint, cfg.paths.checkpoint),
        _pick(args.vocabulary, cfg.paths.vocabulary),
        args.quiet,
    )
    return 0


def cmd_score(args) -> int:
    cfg = _load_cfg(args)
    run_score(
        cfg,
        _pick(args.input, cfg.paths.rule_retained),
        _pick(args.checkpoint, cfg.paths.checkpoint),
        _pick(args.vocabulary, cfg.paths.vocabulary),
        _pick(args.output, cfg.paths.scored),
        jobs=args.jobs,
        quiet=args.quiet,
    )
    return 0


def cmd_partition(args) -> int:
    cfg = _load_cfg(args)
    if args.strategy is not None:
        cfg.threshold.strategy = args.strategy
    if args.p is not None:
        cfg.threshold.p = args.p
    run_partition(
        cfg,
        _pick(args.input, cfg.paths.scored),
        _pick(args.retained, cfg.paths.retained),
        _pick(args.rejects, cfg.paths.semantic_rejects),
        _pick(args.report, cfg.paths.report),
        strip_provenance=args.strip_provenance,
        quiet=args.quiet,
    )
    return 0


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    paths = cfg.paths
    input_path = _pick(args.input, paths.input)
    bootstrap_path = _pick(args.bootstrap, paths.bootstrap)
    run_rule_filter(
        cfg, input_path, paths.rule_retained, paths.rule_rejects, paths.rule_stats,
        jobs=args.jobs, quiet=args.quiet,
    )
    run_train(cfg, bootstrap_path, paths.checkpoint, paths.vocabulary, args.quiet)
    run_score(
        cfg, paths.rule_retained, paths.checkpoint, paths.vocabulary, paths.scored,
        jobs=args.jobs, quiet=args.quiet,
    )
    run_partition(
        cfg, paths.scored, paths.retained, paths.semantic_rejects, paths.report,
        quiet=args.quiet,
    )
    return 0


def cmd_metrics(args) -> int:
    pairs = read_rank_file(args.rank_file)
    ranks = [rank for _, rank in pairs]
    out = {
        "n_queries": len(ranks),
        "mrr": mrr(ranks),
        "answered": {str(k): answered_at_k(ranks, k) for k in args.k},
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_sample_size(args) -> int:
    print(sample_size(args.population, args.z, args.p, args.c))
    return 0


_COMMANDS = {
    "rule-filter": cmd_rule_filter,
    "bootstrap": cmd_bootstrap,
    "train": cmd_train,
    "score": cmd_score,
    "partition": cmd_partition,
    "run": cmd_run,
    "metrics": cmd_metrics,
    "sample-size": cmd_sample_size,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_CORPUS
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VOCAB_MISMATCH
    except MissingScoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_SCORES
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
