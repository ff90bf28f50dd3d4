import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from cellfuse import cli
from cellfuse.cellgraph import serialize_bundle

from test_cellgraph import make_bundle


def run_cli(argv):
    """main() return code, with argparse SystemExit folded in."""
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Patch files, built graphs, a manifest, and a small training config."""
    root = tmp_path_factory.mktemp("cli_corpus")
    patches = root / "patches"
    patches.mkdir()
    rng = np.random.default_rng(7)
    for i in range(12):
        b = make_bundle(rng, int(rng.integers(6, 12)), hw=48,
                        patch_id=f"p{i:02d}", patient_id=f"pt{i % 4}",
                        label=i % 2)
        (patches / f"p{i:02d}.patch").write_text(serialize_bundle(b))

    assert run_cli(["build-graphs", "--input", str(patches),
                    "--output", str(root / "graphs"), "--dc", "40"]) == 0

    lines = []
    for i in range(12):
        split = "train" if i < 8 else ("val" if i < 10 else "test")
        lines.append(f"patches/p{i:02d}.patch graphs/p{i:02d}.graph {split}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n")

    (root / "run.cfg").write_text(
        f"manifest = {root / 'manifest.txt'}\n"
        f"out_dir = {root / 'run_out'}\n"
        "seed = 3\n"
        "d_c = 40.0\n"
        "cnn_width = 2\n"
        "d_image = 8\n"
        "gnn_hidden = 8\n"
        "d_graph = 4\n"
        "mlp_embed = 8\n"
        "max_epochs = 3\n"
        "t_max = 3\n"
        "patience = 3\n"
        "batch_size = 4\n"
        "dropout = 0.0\n"
    )
    return root


class TestUsageErrors:
    def test_no_command(self, capsys):
        assert run_cli([]) == 1

    def test_unknown_command(self, capsys):
        assert run_cli(["frobnicate"]) == 1

    def test_missing_required_flag(self, capsys):
        assert run_cli(["train"]) == 1

    def test_dc_required(self, capsys, tmp_path):
        assert run_cli(["build-graphs", "--input", str(tmp_path),
                        "--output", str(tmp_path)]) == 1

    def test_dc_nonpositive(self, capsys, tmp_path):
        assert run_cli(["build-graphs", "--input", str(tmp_path),
                        "--output", str(tmp_path), "--dc", "-3"]) == 1

    def test_bad_alphas(self, capsys):
        assert run_cli(["synth", "--alphas", "a,b"]) == 1
        assert run_cli(["synth", "--alphas", "1.5"]) == 1

    def test_nonpositive_counts(self, capsys, tmp_path):
        assert run_cli(["build-graphs", "--input", str(tmp_path),
                        "--output", str(tmp_path), "--dc", "1",
                        "--jobs", "0"]) == 1
        assert run_cli(["bench", "--repeat", "0"]) == 1

    def test_help_exits_zero(self, capsys):
        assert run_cli(["--help"]) == 0
        assert "build-graphs" in capsys.readouterr().out


class TestBuildGraphs:
    def test_summary_line(self, corpus, capsys):
        out_dir = corpus / "graphs_again"
        code = run_cli(["build-graphs", "--input", str(corpus / "patches"),
                        "--output", str(out_dir), "--dc", "40"])
        assert code == 0
        out = capsys.readouterr().out
        assert "patches 12" in out and "avg_nodes" in out
        assert sorted(p.name for p in out_dir.iterdir()) == sorted(
            p.name for p in (corpus / "graphs").iterdir()
        )

    def test_outputs_match_serially_and_parallel(self, corpus, tmp_path, capsys):
        code = run_cli(["build-graphs", "--input", str(corpus / "patches"),
                        "--output", str(tmp_path), "--dc", "40", "--jobs", "3"])
        assert code == 0
        for p in sorted((corpus / "graphs").iterdir()):
            assert (tmp_path / p.name).read_text() == p.read_text()

    def test_empty_input_ok(self, tmp_path, capsys):
        (tmp_path / "in").mkdir()
        assert run_cli(["build-graphs", "--input", str(tmp_path / "in"),
                        "--output", str(tmp_path / "out"), "--dc", "40"]) == 0
        assert "patches 0" in capsys.readouterr().out

    def test_missing_input_dir(self, tmp_path, capsys):
        assert run_cli(["build-graphs", "--input", str(tmp_path / "nope"),
                        "--output", str(tmp_path), "--dc", "40"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_patch_reported_rest_continue(self, corpus, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        (src / "a.patch").write_text(
            (corpus / "patches" / "p00.patch").read_text()
        )
        (src / "b.patch").write_text("PATCH not even close\n")
        code = run_cli(["build-graphs", "--input", str(src),
                        "--output", str(tmp_path / "out"), "--dc", "40"])
        assert code == 2
        captured = capsys.readouterr()
        assert "b.patch" in captured.err
        assert (tmp_path / "out" / "a.graph").exists()
        assert not (tmp_path / "out" / "b.graph").exists()


class TestTrainEval:
    def test_train_writes_artifacts(self, corpus, capsys):
        assert run_cli(["train", "--config", str(corpus / "run.cfg")]) == 0
        out = capsys.readouterr().out
        assert "trained" in out
        assert (corpus / "run_out" / "model.ckpt").exists()
        with open(corpus / "run_out" / "metrics.csv") as fh:
            got = list(csv.reader(fh))
        assert got[0] == ["run", "seed", "acc", "auc", "auc_patient"]
        assert len(got) == 2 and got[1][1] == "3"

    def test_train_deterministic(self, corpus, capsys):
        a = corpus / "det_a"
        b = corpus / "det_b"
        for out in (a, b):
            assert run_cli(["train", "--config", str(corpus / "run.cfg"),
                            "--out", str(out)]) == 0
        assert (a / "model.ckpt").read_bytes() == (b / "model.ckpt").read_bytes()
        assert (a / "metrics.csv").read_text() == (b / "metrics.csv").read_text()

    def test_seed_override_changes_model(self, corpus, capsys):
        out = corpus / "det_seeded"
        assert run_cli(["train", "--config", str(corpus / "run.cfg"),
                        "--out", str(out), "--seed", "4"]) == 0
        assert (out / "model.ckpt").read_bytes() != (
            corpus / "det_a" / "model.ckpt"
        ).read_bytes()

    def test_missing_graphs_mention_build_graphs(self, corpus, tmp_path, capsys):
        manifest = tmp_path / "manifest.txt"
        manifest.write_text("a.patch a.graph train\n")
        (tmp_path / "a.patch").write_text("x")
        code = run_cli(["train", "--config", str(corpus / "run.cfg"),
                        "--manifest", str(manifest)])
        assert code == 2
        assert "build-graphs" in capsys.readouterr().err

    def test_config_without_manifest(self, tmp_path, capsys):
        cfg = tmp_path / "no_manifest.cfg"
        cfg.write_text("d_c = 40.0\n")
        assert run_cli(["train", "--config", str(cfg)]) == 2
        assert "manifest" in capsys.readouterr().err

    def test_eval_round_trip(self, corpus, capsys):
        metrics = corpus / "eval_metrics.csv"
        code = run_cli(["eval", "--model", str(corpus / "run_out" / "model.ckpt"),
                        "--manifest", str(corpus / "manifest.txt"),
                        "--split", "test", "--out", str(metrics)])
        assert code == 0
        out = capsys.readouterr().out
        assert "test acc" in out
        with open(metrics) as fh:
            got = list(csv.reader(fh))
        assert len(got) == 2

    def test_eval_matches_train_metrics(self, corpus, capsys):
        """The metrics the checkpoint was saved with are reproducible."""
        code = run_cli(["eval", "--model", str(corpus / "run_out" / "model.ckpt"),
                        "--manifest", str(corpus / "manifest.txt"),
                        "--out", str(corpus / "re_eval.csv")])
        assert code == 0
        with open(corpus / "run_out" / "metrics.csv") as fh:
            trained = list(csv.reader(fh))[1]
        with open(corpus / "re_eval.csv") as fh:
            rescored = list(csv.reader(fh))[1]
        assert trained[2:] == rescored[2:]

    def test_eval_corrupt_checkpoint(self, corpus, tmp_path, capsys):
        bad = tmp_path / "model.ckpt"
        bad.write_text("not a checkpoint\n")
        assert run_cli(["eval", "--model", str(bad),
                        "--manifest", str(corpus / "manifest.txt")]) == 2


class TestSynthCommand:
    def test_files_and_determinism(self, tmp_path, capsys):
        args = ["synth", "--pairs", "60", "--teachers", "1", "--runs", "1",
                "--alphas", "0.0,1.0", "--seed", "5"]
        assert run_cli(args + ["--out", str(tmp_path / "a")]) == 0
        assert run_cli(args + ["--out", str(tmp_path / "b")]) == 0
        for name in ("sweep.csv", "summary.csv", "sweep.dat"):
            assert (tmp_path / "a" / name).read_text() == (
                tmp_path / "b" / name
            ).read_text()
        with open(tmp_path / "a" / "sweep.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["alpha", "model", "run", "test_rmse"]
        assert len(rows) == 1 + 2 * 3
        with open(tmp_path / "a" / "summary.csv") as fh:
            srows = list(csv.reader(fh))
        assert srows[0] == ["alpha", "model", "mean_rmse", "std_rmse"]
        # summary means must equal the single run's scores
        sweep = {(r[0], r[1]): float(r[3]) for r in rows[1:]}
        for alpha, model, mean, _ in srows[1:]:
            assert float(mean) == pytest.approx(sweep[(alpha, model)])
        dat = (tmp_path / "a" / "sweep.dat").read_text().splitlines()
        assert dat[0].startswith("# alpha")
        assert len(dat) == 3


class TestGradcheckCommand:
    def test_passing_run(self, capsys):
        assert run_cli(["gradcheck", "--seeds", "1"]) == 0
        out = capsys.readouterr().out
        assert "38 checks, 38 passed, 0 failed" in out

    def test_negative_control_fails(self, capsys):
        code = run_cli(["gradcheck", "--seeds", "1",
                        "--include-negative-control"])
        assert code == 3
        assert "negative_control" in capsys.readouterr().out


class TestBenchCommand:
    def test_table(self, capsys):
        assert run_cli(["bench", "--repeat", "1"]) == 0
        out = capsys.readouterr().out
        assert "active backend:" in out
        assert "glcm_counts" in out and "conv2d_fwd" in out


class TestConsoleScript:
    def test_module_entry(self, corpus):
        env = dict(os.environ)
        proc = subprocess.run(
            [sys.executable, "-m", "cellfuse.cli", "--help"],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0
        assert "build-graphs" in proc.stdout

    def test_cache_dir_env(self, corpus, tmp_path):
        cache = tmp_path / "cache"
        env = dict(os.environ, CELLFUSE_CACHE_DIR=str(cache))
        env.pop("NUMBA_CACHE_DIR", None)
        proc = subprocess.run(
            [sys.executable, "-m", "cellfuse.cli", "build-graphs",
             "--input", str(corpus / "patches"),
             "--output", str(tmp_path / "g"), "--dc", "40"],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr
        assert cache.is_dir() and any(cache.iterdir())
