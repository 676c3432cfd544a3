import json
from pathlib import Path

import numpy as np
import pytest

from mockforge.cli import main
from mockforge.synthetic import write_raw_fixture


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("raw")
    paths = write_raw_fixture(root)
    out = tmp_path_factory.mktemp("corpus")
    code = main(["ingest",
                 "--hierarchies", str(paths["hierarchy_dir"]),
                 "--captions", str(paths["captions"]),
                 "--annotations", str(paths["annotations"]),
                 "--manifest", str(paths["manifest"]),
                 "--out", str(out)])
    assert code == 0
    return out


TINY_RETRIEVER = ["--dim", "16", "--hidden", "16", "--intermediate", "32",
                  "--layers", "1", "--heads", "2", "--batch-size", "4",
                  "--epochs", "2", "--seed", "0"]
TINY_GENERATOR = ["--dim", "16", "--hidden", "16", "--intermediate", "32",
                  "--layers", "1", "--heads", "2", "--mixtures", "2",
                  "--max-elements", "8", "--batch-size", "4", "--epochs", "2",
                  "--seed", "0"]


class TestIngest:
    def test_fixture_split_sizes(self, corpus_dir, capsys):
        report = json.loads((corpus_dir / "report.json").read_text())
        assert report["split_sizes"] == {"train": 6, "validation": 2, "test": 2}
        assert (corpus_dir / "train.jsonl").exists()
        assert (corpus_dir / "vocab.json").exists()

    def test_missing_input_is_data_error(self, tmp_path, capsys):
        code = main(["ingest", "--hierarchies", str(tmp_path / "nope"),
                     "--captions", str(tmp_path / "nope.tsv"),
                     "--manifest", str(tmp_path / "nope.tsv"),
                     "--out", str(tmp_path / "out")])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error\tdata\t")


class TestUsageErrors:
    def test_missing_required_flag(self, capsys):
        assert main(["generate"]) == 1
        assert capsys.readouterr().err.startswith("error\tusage\t")

    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_artifact_is_data_error(self, tmp_path, capsys):
        code = main(["generate", "--generator", str(tmp_path / "nope.zip"),
                     "--prompt", "x"])
        assert code == 2


@pytest.fixture(scope="module")
def artifacts_dir(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    code = main(["train-retriever", "--corpus", str(corpus_dir),
                 "--out", str(out / "retriever.zip"), *TINY_RETRIEVER])
    assert code == 0
    code = main(["train-generator", "--corpus", str(corpus_dir),
                 "--out", str(out / "generator.zip"), *TINY_GENERATOR])
    assert code == 0
    code = main(["build-index", "--what", "text", "--corpus", str(corpus_dir),
                 "--dim", "16", "--out", str(out / "text_index.zip")])
    assert code == 0
    code = main(["build-index", "--what", "ui", "--corpus", str(corpus_dir),
                 "--dual-encoder", str(out / "retriever.zip"),
                 "--out", str(out / "ui.uiix")])
    assert code == 0
    return out


class TestPipeline:
    def test_artifacts_exist(self, artifacts_dir):
        assert (artifacts_dir / "retriever.zip").exists()
        assert (artifacts_dir / "generator.zip").exists()
        assert (artifacts_dir / "retriever.zip.log.json").exists()

    def test_calibrate(self, corpus_dir, artifacts_dir, capsys):
        out = artifacts_dir / "calibration.json"
        assert main(["calibrate", "--corpus", str(corpus_dir),
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert set(data) == {"overlap", "iou", "alignment"}

    def test_generate_with_postprocess(self, corpus_dir, artifacts_dir, tmp_path, capsys):
        out = tmp_path / "gen"
        code = main(["generate", "--generator", str(artifacts_dir / "generator.zip"),
                     "--prompt", "demo screen", "--n", "4", "--temperature", "0.5",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "candidates.json").read_text())
        assert 1 <= len(payload["candidates"]) <= 2  # top-50% of 4
        assert (out / "candidate_000.svg").exists()

    def test_generate_deterministic(self, artifacts_dir, capsys):
        args = ["generate", "--generator", str(artifacts_dir / "generator.zip"),
                "--prompt", "demo screen", "--n", "2", "--seed", "7",
                "--no-postprocess"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_retrieve_text_only(self, corpus_dir, artifacts_dir, capsys):
        code = main(["retrieve", "--mode", "text-only", "--prompt",
                     "demo screen number 0", "--k", "2", "--corpus", str(corpus_dir),
                     "--text-index", str(artifacts_dir / "text_index.zip")])
        assert code == 0
        out = capsys.readouterr().out
        lines = [l for l in out.strip().split("\n") if l]
        assert len(lines) == 2
        assert lines[0].split("\t")[1] == "fix-00"

    def test_retrieve_multimodal(self, corpus_dir, artifacts_dir, capsys):
        code = main(["retrieve", "--mode", "multi-modal", "--prompt", "demo",
                     "--k", "1", "--corpus", str(corpus_dir),
                     "--dual-encoder", str(artifacts_dir / "retriever.zip"),
                     "--ui-index", str(artifacts_dir / "ui.uiix")])
        assert code == 0
        assert len(capsys.readouterr().out.strip().split("\n")) == 1

    def test_evaluate_retrieval_full(self, corpus_dir, artifacts_dir, capsys):
        code = main(["evaluate", "--what", "retrieval", "--corpus", str(corpus_dir),
                     "--split", "test",
                     "--dual-encoder", str(artifacts_dir / "retriever.zip")])
        assert code == 0
        out = capsys.readouterr().out
        lines = out.strip().split("\n")
        assert lines[0] == "method\tTop-1\tTop-10"
        assert lines[1].startswith("Multi-modal Retriever (entire test set)\t")

    def test_evaluate_retrieval_subset(self, corpus_dir, artifacts_dir, capsys):
        code = main(["evaluate", "--what", "retrieval", "--corpus", str(corpus_dir),
                     "--split", "test", "--subset-size", "2", "--trials", "3",
                     "--ks", "1,2",
                     "--dual-encoder", str(artifacts_dir / "retriever.zip")])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("method\tTop-1\tTop-2")
        assert "(3 subsets avg.)" in out

    def test_evaluate_metrics_table(self, corpus_dir, artifacts_dir, capsys):
        code = main(["evaluate", "--what", "metrics", "--corpus", str(corpus_dir),
                     "--split", "test", "--limit", "2", "--n", "2",
                     "--generator", str(artifacts_dir / "generator.zip"),
                     "--text-index", str(artifacts_dir / "text_index.zip"),
                     "--dual-encoder", str(artifacts_dir / "retriever.zip"),
                     "--ui-index", str(artifacts_dir / "ui.uiix")])
        assert code == 0
        out = capsys.readouterr().out
        lines = out.strip().split("\n")
        assert lines[0] == "method\tIoU\tOverlap\tAlignment\tDiversity\tRelevance"
        assert lines[-1].startswith("Data (test set)\t")
        assert any(l.startswith("UI Generator\t") for l in lines)

    def test_render_gallery(self, corpus_dir, artifacts_dir, tmp_path, capsys):
        gen_dir = tmp_path / "gen"
        main(["generate", "--generator", str(artifacts_dir / "generator.zip"),
              "--prompt", "demo", "--n", "2", "--no-postprocess",
              "--out", str(gen_dir)])
        out_html = tmp_path / "gallery.html"
        code = main(["render", "--candidates", str(gen_dir / "candidates.json"),
                     "--gallery", "--scramble-seed", "1", "--out", str(out_html)])
        assert code == 0
        html = out_html.read_text()
        assert html.startswith("<!DOCTYPE html>")
        assert html.count('<figure class="cell">') == 2
