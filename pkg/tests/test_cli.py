"""End-to-end command-line behavior: synth -> generate -> eval -> bench."""

import json

import pytest

from relief.cli import main
from relief.tensor_io import load_proposals


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / "corpus"
    code = main(
        ["synth", "--out", str(out), "--count", "3", "--seed", "7", "--objects", "2"]
    )
    assert code == 0
    return out


class TestSynth:
    def test_writes_corpus(self, corpus_dir):
        rfms = sorted(p.name for p in corpus_dir.glob("*.rfm"))
        assert rfms == ["img_0000.rfm", "img_0001.rfm", "img_0002.rfm"]
        assert (corpus_dir / "img_0000.rfm.geom.json").exists()
        assert (corpus_dir / "annotations.jsonl").exists()

    def test_same_seed_byte_identical(self, tmp_path, capsys):
        args = ["--count", "3", "--seed", "7", "--objects", "2", "--noise-sigma", "0.05"]
        for name in ("a", "b"):
            code, _, _ = run(capsys, "synth", "--out", str(tmp_path / name), *args)
            assert code == 0
        for p in sorted((tmp_path / "a").iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


class TestGenerate:
    def test_default_run(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "p.jsonl"
        code, stdout, _ = run(
            capsys,
            "generate",
            "--features",
            str(corpus_dir / "img_0000.rfm"),
            "--out",
            str(out),
        )
        assert code == 0
        assert stdout.startswith("boxes=") and "time_ms=" in stdout
        sets = load_proposals(out)
        assert len(sets) == 1
        assert sets[0].image_id == "img_0000"
        kinds = {b.kind for b in sets[0].boxes}
        assert "small" in kinds and "scaled" in kinds
        bigs = [b for b in sets[0].boxes if b.kind == "big"]
        assert len(bigs) <= 10

    def test_directory_input(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "all.jsonl"
        code, _, _ = run(capsys, "generate", "--features", str(corpus_dir), "--out", str(out))
        assert code == 0
        assert [ps.image_id for ps in load_proposals(out)] == [
            "img_0000",
            "img_0001",
            "img_0002",
        ]

    def test_no_local_search_flag(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "p.jsonl"
        code, _, _ = run(
            capsys,
            "generate",
            "--features",
            str(corpus_dir / "img_0000.rfm"),
            "--out",
            str(out),
            "--no-local-search",
        )
        assert code == 0
        assert all(b.kind != "scaled" for ps in load_proposals(out) for b in ps.boxes)

    def test_identity_refine_matches_no_refine(self, corpus_dir, tmp_path, capsys):
        outs = []
        for name, loops in (("a.jsonl", "0"), ("b.jsonl", "3")):
            out = tmp_path / name
            code, _, _ = run(
                capsys,
                "generate",
                "--features",
                str(corpus_dir / "img_0001.rfm"),
                "--out",
                str(out),
                "--loops",
                loops,
                "--regressor",
                "identity",
            )
            assert code == 0
            outs.append(load_proposals(out))
        assert [ps.boxes for ps in outs[0]] == [ps.boxes for ps in outs[1]]

    def test_jobs_output_order_stable(self, corpus_dir, tmp_path, capsys):
        single = tmp_path / "one.jsonl"
        multi = tmp_path / "many.jsonl"
        for out, jobs in ((single, "1"), (multi, "3")):
            code, _, _ = run(
                capsys,
                "generate",
                "--features",
                str(corpus_dir),
                "--out",
                str(out),
                "--jobs",
                jobs,
            )
            assert code == 0
        a, b = load_proposals(single), load_proposals(multi)
        assert [(ps.image_id, ps.boxes) for ps in a] == [(ps.image_id, ps.boxes) for ps in b]

    def test_missing_features_errors(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "generate", "--features", str(tmp_path / "nope.rfm"), "--out", str(tmp_path / "p.jsonl")
        )
        assert code == 1
        assert "error:" in err


class TestEval:
    def _generate(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "p.jsonl"
        code, _, _ = run(capsys, "generate", "--features", str(corpus_dir), "--out", str(out))
        assert code == 0
        return out

    def test_noise_free_recall_is_perfect(self, corpus_dir, tmp_path, capsys):
        props = self._generate(corpus_dir, tmp_path, capsys)
        curve_csv = tmp_path / "curve.csv"
        code, stdout, _ = run(
            capsys,
            "eval",
            "--proposals",
            str(props),
            "--annotations",
            str(corpus_dir / "annotations.jsonl"),
            "--out",
            str(curve_csv),
        )
        assert code == 0
        assert "recall@0.5=1.0000" in stdout
        assert "recall@0.7=" in stdout
        lines = curve_csv.read_text().strip().splitlines()
        assert lines[0] == "iou_threshold,recall"
        assert len(lines) == 12  # 0.5 .. 1.0 step 0.05

    def test_coarse_grid_rows(self, corpus_dir, tmp_path, capsys):
        props = self._generate(corpus_dir, tmp_path, capsys)
        curve_csv = tmp_path / "curve.csv"
        code, _, _ = run(
            capsys,
            "eval",
            "--proposals",
            str(props),
            "--annotations",
            str(corpus_dir / "annotations.jsonl"),
            "--out",
            str(curve_csv),
            "--iou-grid",
            "0.5:1.0:0.25",
        )
        assert code == 0
        rows = [line.split(",")[0] for line in curve_csv.read_text().strip().splitlines()[1:]]
        assert rows == ["0.5", "0.75", "1.0"]

    def test_top_k_cap(self, corpus_dir, tmp_path, capsys):
        props = self._generate(corpus_dir, tmp_path, capsys)
        code, stdout, _ = run(
            capsys,
            "eval",
            "--proposals",
            str(props),
            "--annotations",
            str(corpus_dir / "annotations.jsonl"),
            "--out",
            str(tmp_path / "c.csv"),
            "--top-k",
            "200",
        )
        assert code == 0
        assert "recall@0.5=" in stdout

    def test_missing_id_lists_it(self, corpus_dir, tmp_path, capsys):
        props = tmp_path / "short.jsonl"
        props.write_text('{"image_id":"img_0000","gen_time_ns":0,"boxes":[]}\n')
        code, _, err = run(
            capsys,
            "eval",
            "--proposals",
            str(props),
            "--annotations",
            str(corpus_dir / "annotations.jsonl"),
            "--out",
            str(tmp_path / "c.csv"),
        )
        assert code == 1
        assert "img_0001" in err and "img_0002" in err


class TestBench:
    def test_bench_over_corpus(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code, stdout, _ = run(
            capsys,
            "bench",
            "--features",
            str(corpus_dir),
            "--repeats",
            "2",
            "--out",
            str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "images,mean_proposals,mean_time_ns,p50_ns,p95_ns"
        assert len(lines) == 2
        assert lines[1].startswith("3,")
        assert "mean_proposals=" in stdout


class TestConfigHandling:
    def test_flags_override_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"alpha": 0.7, "level_count": 5}))
        dump = tmp_path / "eff.json"
        code, _, _ = run(
            capsys,
            "synth",
            "--out",
            str(tmp_path / "c"),
            "--count",
            "1",
            "--config",
            str(cfg),
            "--dump-config",
            str(dump),
        )
        assert code == 0
        eff = json.loads(dump.read_text())
        assert eff["alpha"] == 0.7 and eff["level_count"] == 5

        code, _, _ = run(
            capsys,
            "synth",
            "--out",
            str(tmp_path / "d"),
            "--count",
            "1",
            "--config",
            str(cfg),
            "--dump-config",
            str(dump),
        )
        assert json.loads(dump.read_text())["alpha"] == 0.7

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"levels": 5}))
        code, _, err = run(
            capsys, "synth", "--out", str(tmp_path / "c"), "--config", str(cfg)
        )
        assert code == 1
        assert "unknown keys" in err and "levels" in err

    def test_dumped_config_reproduces_run(self, corpus_dir, tmp_path, capsys):
        first = tmp_path / "first.jsonl"
        dump = tmp_path / "eff.json"
        code, _, _ = run(
            capsys,
            "generate",
            "--features",
            str(corpus_dir / "img_0000.rfm"),
            "--out",
            str(first),
            "--level-count",
            "6",
            "--alpha",
            "0.75",
            "--no-dedup",
            "--dump-config",
            str(dump),
        )
        assert code == 0
        second = tmp_path / "second.jsonl"
        eff = json.loads(dump.read_text())
        eff["out"] = str(second)
        dump.write_text(json.dumps(eff))
        code, _, _ = run(capsys, "generate", "--config", str(dump))
        assert code == 0
        a, b = load_proposals(first), load_proposals(second)
        assert [(ps.image_id, ps.boxes) for ps in a] == [(ps.image_id, ps.boxes) for ps in b]


class TestLogging:
    def test_relief_log_env(self, corpus_dir, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("RELIEF_LOG", "debug")
        out = tmp_path / "p.jsonl"
        code, _, _ = run(
            capsys, "generate", "--features", str(corpus_dir / "img_0000.rfm"), "--out", str(out)
        )
        assert code == 0
