"""End-to-end CLI behavior: stages, exit codes, file contracts."""

import json

import pytest

from queryfilter.cli import main
from queryfilter.corpus import read_jsonl

TABLE_EXAMPLES = [
    ("t1", "<p>parse line</p>"),
    ("t2", "(TODO) Send requests"),
    ("t3", "Returns a {@link Support}"),
    ("t4", "See https://github.com/"),
    ("t5", "创建临时文件"),
    ("t6", "=============="),
    ("t7", "Is this a name declaration?"),
    ("t8", "DEPRECATED"),
]


def write_pairs(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for rid, comment in rows:
            fh.write(json.dumps({"id": rid, "comment": comment, "code": "int x;"},
                                ensure_ascii=False) + "\n")


def small_config(tmp_path, extra=""):
    cfg = tmp_path / "pipeline.ini"
    cfg.write_text(
        f"""
[pipeline]
seed = 7

[paths]
input = {tmp_path}/pairs.jsonl
titles = {tmp_path}/titles.txt
bootstrap = {tmp_path}/bootstrap.txt
rule_retained = {tmp_path}/rule_retained.jsonl
rule_rejects = {tmp_path}/rule_rejects.jsonl
rule_stats = {tmp_path}/rule_stats.json
checkpoint = {tmp_path}/model.ckpt
vocabulary = {tmp_path}/vocab.txt
scored = {tmp_path}/scored.jsonl
retained = {tmp_path}/retained.jsonl
semantic_rejects = {tmp_path}/semantic_rejects.jsonl
report = {tmp_path}/report.json

[tokenizer]
max_size = 200
min_count = 1
max_len = 12

[vae]
embed_dim = 8
hidden_dim = 12
latent_dim = 4
epochs = 2
batch_size = 8
learning_rate = 0.002
kl_anneal_steps = 100
{extra}
""",
        encoding="utf-8",
    )
    return cfg


class TestRuleFilterCommand:
    def test_table_examples(self, tmp_path):
        write_pairs(tmp_path / "pairs.jsonl", TABLE_EXAMPLES)
        cfg = small_config(tmp_path)
        assert main(["rule-filter", "--config", str(cfg), "--quiet"]) == 0

        stats = json.loads((tmp_path / "rule_stats.json").read_text())
        by_rule = {row["rule"]: row for row in stats["rows"]}
        assert by_rule["html_tags"]["modified"] == 1
        assert by_rule["parentheses"]["modified"] == 1
        for rule in ("javadoc_tags", "urls", "non_english", "punctuation", "interrogation"):
            assert by_rule[rule]["discarded"] == 1, rule
        # "DEPRECATED" plus the two transformed-but-now-short comments
        assert by_rule["short_sentence"]["discarded"] == 3
        assert stats["retained"] == 0
        # transform rows leave the running retained count untouched; reject
        # rows decrement it in order
        assert by_rule["html_tags"]["retained"] == 8
        assert by_rule["parentheses"]["retained"] == 8
        running = 8
        for row in stats["rows"]:
            if row["kind"] == "reject":
                running -= row["discarded"]
                assert row["retained"] == running

        rejects = {r.id: r for r in read_jsonl(tmp_path / "rule_rejects.jsonl")}
        assert len(rejects) == 8
        transformed = rejects["t1"]
        steps = [p for p in transformed.provenance if p.action == "transformed"]
        assert any(p.rule_id == "html_tags" and p.after == "parse line" for p in steps)

    def test_retained_and_rejected_are_a_partition(self, tmp_path):
        rows = TABLE_EXAMPLES + [
            ("k1", "convert string to int"),
            ("k2", "Reads the configuration file. Returns null on failure."),
        ]
        write_pairs(tmp_path / "pairs.jsonl", rows)
        cfg = small_config(tmp_path)
        assert main(["rule-filter", "--config", str(cfg), "--quiet"]) == 0
        retained = {r.id for r in read_jsonl(tmp_path / "rule_retained.jsonl")}
        rejected = {r.id for r in read_jsonl(tmp_path / "rule_rejects.jsonl")}
        assert retained == {"k1", "k2"}
        assert retained | rejected == {rid for rid, _ in rows}
        assert not retained & rejected

    def test_first_sentence_extraction_recorded(self, tmp_path):
        write_pairs(tmp_path / "pairs.jsonl",
                    [("k2", "Reads the configuration file. Returns null.")])
        cfg = small_config(tmp_path)
        main(["rule-filter", "--config", str(cfg), "--quiet"])
        (rec,) = read_jsonl(tmp_path / "rule_retained.jsonl")
        assert rec.comment == "Reads the configuration file."
        assert rec.provenance[0].stage == "extract"

    def test_disable_rule_flag(self, tmp_path):
        write_pairs(tmp_path / "pairs.jsonl", [("s1", "quick sort")])
        cfg = small_config(tmp_path)
        main(["rule-filter", "--config", str(cfg), "--quiet",
              "--disable-rule", "short_sentence"])
        retained = [r.id for r in read_jsonl(tmp_path / "rule_retained.jsonl")]
        assert retained == ["s1"]

    def test_stats_rows_follow_configured_order(self, tmp_path):
        write_pairs(tmp_path / "pairs.jsonl", [("k1", "convert string to int")])
        cfg = small_config(
            tmp_path,
            extra="[ruleset]\norder = parentheses, html_tags, short_sentence, urls\n",
        )
        main(["rule-filter", "--config", str(cfg), "--quiet"])
        stats = json.loads((tmp_path / "rule_stats.json").read_text())
        assert [row["rule"] for row in stats["rows"]] == [
            "parentheses", "html_tags", "short_sentence", "urls",
        ]

    def test_missing_input_exits_2(self, tmp_path):
        cfg = small_config(tmp_path)
        assert main(["rule-filter", "--config", str(cfg), "--quiet"]) == 2

    def test_jobs_match_serial_output(self, tmp_path):
        rows = TABLE_EXAMPLES + [("k1", "convert string to int")]
        write_pairs(tmp_path / "pairs.jsonl", rows)
        cfg = small_config(tmp_path)
        main(["rule-filter", "--config", str(cfg), "--quiet"])
        serial = (tmp_path / "rule_retained.jsonl").read_bytes()
        main(["rule-filter", "--config", str(cfg), "--quiet", "--jobs", "2"])
        assert (tmp_path / "rule_retained.jsonl").read_bytes() == serial


class TestBootstrapCommand:
    def test_title_preparation(self, tmp_path):
        (tmp_path / "titles.txt").write_text(
            "How to convert string to int?\n"
            "Why is my loop slow?\n"
            "How to use {@link Foo}\n"
            "How to read a file line by line\n",
            encoding="utf-8",
        )
        cfg = small_config(tmp_path)
        assert main(["bootstrap", "--config", str(cfg), "--quiet"]) == 0
        lines = (tmp_path / "bootstrap.txt").read_text().splitlines()
        assert lines == ["convert string to int", "read a file line by line"]


@pytest.fixture()
def trained_pipeline(tmp_path):
    """Inputs plus a completed rule-filter + bootstrap + train run."""
    comments = [
        ("r%02d" % i, f"convert the {noun} value to a number")
        for i, noun in enumerate(
            ["string", "float", "date", "index", "token", "buffer",
             "row", "column", "field", "item", "key", "line"]
        )
    ] + [
        ("q%02d" % i, f"read {noun} records from the input stream")
        for i, noun in enumerate(
            ["csv", "json", "xml", "binary", "text", "log", "table", "batch"]
        )
    ]
    write_pairs(tmp_path / "pairs.jsonl", comments)
    titles = [
        f"How to convert a {n} to a number?" for n in
        ["string", "float", "date", "token", "value", "buffer", "row", "item"]
    ] + [
        f"How to read {n} records from a stream?" for n in
        ["csv", "json", "xml", "text", "log", "binary", "table", "batch"]
    ]
    (tmp_path / "titles.txt").write_text("\n".join(titles) + "\n", encoding="utf-8")
    cfg = small_config(tmp_path)
    assert main(["rule-filter", "--config", str(cfg), "--quiet"]) == 0
    assert main(["bootstrap", "--config", str(cfg), "--quiet"]) == 0
    assert main(["train", "--config", str(cfg), "--quiet"]) == 0
    return tmp_path, cfg


class TestTrainCommand:
    def test_artifacts_written(self, trained_pipeline):
        tmp_path, _ = trained_pipeline
        assert (tmp_path / "model.ckpt").exists()
        vocab_lines = (tmp_path / "vocab.txt").read_text().splitlines()
        assert vocab_lines[:4] == ["<pad>", "<bos>", "<eos>", "<unk>"]

    def test_empty_corpus_exits_3(self, tmp_path):
        (tmp_path / "bootstrap.txt").write_text("", encoding="utf-8")
        cfg = small_config(tmp_path)
        assert main(["train", "--config", str(cfg), "--quiet"]) == 3

    def test_same_seed_same_checkpoint(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        first = (tmp_path / "model.ckpt").read_bytes()
        assert main(["train", "--config", str(cfg), "--quiet"]) == 0
        assert (tmp_path / "model.ckpt").read_bytes() == first


class TestScoreCommand:
    def test_scores_attached_in_order(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        assert main(["score", "--config", str(cfg), "--quiet"]) == 0
        inputs = [r.id for r in read_jsonl(tmp_path / "rule_retained.jsonl")]
        scored = list(read_jsonl(tmp_path / "scored.jsonl"))
        assert [r.id for r in scored] == inputs
        assert all(r.score is not None and r.score >= 0 for r in scored)

    def test_scoring_is_deterministic(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        main(["score", "--config", str(cfg), "--quiet"])
        first = (tmp_path / "scored.jsonl").read_bytes()
        main(["score", "--config", str(cfg), "--quiet"])
        assert (tmp_path / "scored.jsonl").read_bytes() == first

    def test_vocabulary_mismatch_exits_4(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        (tmp_path / "vocab.txt").write_text(
            "<pad>\n<bos>\n<eos>\n<unk>\nsomethingelse\n", encoding="utf-8"
        )
        assert main(["score", "--config", str(cfg), "--quiet"]) == 4

    def test_empty_comment_scores_finite_and_is_flagged(self, trained_pipeline, capsys):
        tmp_path, cfg = trained_pipeline
        write_pairs(tmp_path / "edge.jsonl", [("e1", ""), ("e2", "read the csv records")])
        assert main(["score", "--config", str(cfg),
                     "--input", str(tmp_path / "edge.jsonl"),
                     "--output", str(tmp_path / "edge_scored.jsonl")]) == 0
        assert "BOS/EOS only" in capsys.readouterr().err
        scored = {r.id: r.score for r in read_jsonl(tmp_path / "edge_scored.jsonl")}
        assert all(s is not None and s >= 0 for s in scored.values())

    def test_parallel_scoring_matches_serial(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        main(["score", "--config", str(cfg), "--quiet"])
        serial = (tmp_path / "scored.jsonl").read_bytes()
        main(["score", "--config", str(cfg), "--quiet", "--jobs", "2"])
        assert (tmp_path / "scored.jsonl").read_bytes() == serial


class TestPartitionCommand:
    def test_missing_scores_exit_5(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        assert main(["partition", "--config", str(cfg), "--quiet",
                     "--input", str(tmp_path / "rule_retained.jsonl")]) == 5

    def test_percentile_partition_and_report(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        main(["score", "--config", str(cfg), "--quiet"])
        assert main(["partition", "--config", str(cfg), "--quiet",
                     "--strategy", "percentile", "--p", "1.0"]) == 0
        scored = [r.id for r in read_jsonl(tmp_path / "scored.jsonl")]
        retained = [r.id for r in read_jsonl(tmp_path / "retained.jsonl")]
        assert retained == scored  # p = 1.0 reproduces the rule-filter-only ablation
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["strategy"] == "percentile"
        assert report["retained_fraction"] == 1.0

    def test_gmm_report_schema(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        main(["score", "--config", str(cfg), "--quiet"])
        assert main(["partition", "--config", str(cfg), "--quiet",
                     "--strategy", "gmm"]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        for key in ("pi", "mu_q", "sigma_q", "mu_uq", "sigma_uq", "threshold"):
            assert key in report

    def test_strip_provenance(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        main(["score", "--config", str(cfg), "--quiet"])
        main(["partition", "--config", str(cfg), "--quiet",
              "--strategy", "percentile", "--p", "1.0", "--strip-provenance"])
        for rec in read_jsonl(tmp_path / "retained.jsonl"):
            assert rec.provenance == []


class TestRunCommand:
    def test_every_record_lands_in_exactly_one_bucket(self, trained_pipeline):
        tmp_path, cfg = trained_pipeline
        assert main(["run", "--config", str(cfg), "--quiet"]) == 0
        inputs = {r.id for r in read_jsonl(tmp_path / "pairs.jsonl")}
        final = {r.id for r in read_jsonl(tmp_path / "retained.jsonl")}
        rule_rejects = {r.id for r in read_jsonl(tmp_path / "rule_rejects.jsonl")}
        semantic_rejects = {r.id for r in read_jsonl(tmp_path / "semantic_rejects.jsonl")}
        assert final | rule_rejects | semantic_rejects == inputs
        assert not final & rule_rejects
        assert not final & semantic_rejects
        assert not rule_rejects & semantic_rejects
        assert final  # nonzero retained set


class TestUtilityCommands:
    def test_metrics_command(self, tmp_path, capsys):
        path = tmp_path / "ranks.jsonl"
        rows = [{"query_id": "a", "rank": 1}, {"query_id": "b", "rank": 2},
                {"query_id": "c", "rank": 4}, {"query_id": "d", "rank": None}]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        assert main(["metrics", str(path), "--k", "1", "5"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["mrr"] == 0.4375
        assert out["answered"] == {"1": 1, "5": 3}

    def test_sample_size_command(self, capsys):
        assert main(["sample-size", "394471"]) == 0
        assert capsys.readouterr().out.strip() == "384"
