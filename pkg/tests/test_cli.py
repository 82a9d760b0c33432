import os
import subprocess
import sys

import pytest

from treelstm.cli import build_parser, main, parse_seeds
from treelstm.config import from_text

TOY_SENT = ["--task", "sentiment-binary", "--variant", "nary-const", "--d", "12", "--e", "8",
            "--batch-size", "5", "--epochs", "40", "--target", "1.0"]
TOY_REL = ["--task", "relatedness", "--variant", "childsum-dep", "--d", "12", "--e", "8",
           "--batch-size", "5", "--emb-lr", "0.1", "--epochs", "40"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", ["train", "eval", "gradcheck", "count-params", "nn"])
def test_help_lists_flags(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    sub = next(a for a in build_parser()._subparsers._group_actions[0].choices.items() if a[0] == cmd)[1]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in out


def test_unknown_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_bad_config_value_exits_1(capsys, tmp_path):
    code, _, err = run(["train", "--d", "abc", "--out", str(tmp_path)], capsys)
    assert code == 1 and "config error" in err
    code, _, _ = run(["train", "--task", "weather", "--out", str(tmp_path)], capsys)
    assert code == 1


def test_missing_embedding_file_exits_2(capsys, tmp_path):
    missing = str(tmp_path / "vectors.txt")
    code, _, err = run(["train", *TOY_REL, "--embeddings", missing, "--out", str(tmp_path / "r")], capsys)
    assert code == 2 and missing in err


def test_config_precedence_and_echo(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 9\ne = 8\nepochs = 1\nbatch_size = 7\n", encoding="utf-8")
    out_dir = tmp_path / "run"
    code, out, err = run(["train", "--config", str(cfg), "--task", "sentiment-binary", "--d", "6",
                          "--out", str(out_dir)], capsys)
    assert code == 0
    echoed = from_text(err)
    assert (echoed.d, echoed.batch_size, echoed.epochs) == (6, 7, 1)
    assert from_text((out_dir / "config.txt").read_text()) == echoed
    assert sorted(os.listdir(out_dir)) == ["config.txt", "epochs.tsv", "model.ckpt", "vocab.txt"]


def test_train_then_eval_reports_accuracy(capsys, tmp_path):
    out_dir = tmp_path / "sent"
    code, out, _ = run(["train", *TOY_SENT, "--out", str(out_dir)], capsys)
    assert code == 0 and "dev_metric\t1.000000" in out
    lengths = tmp_path / "len.tsv"
    code, out, _ = run(["eval", "--checkpoint", str(out_dir), "--lengths", str(lengths)], capsys)
    assert code == 0 and out == "accuracy\t1.000000\n"
    assert lengths.read_text().startswith("ell\tvalue\tcount\n")


def test_eval_workers_match_serial(capsys, tmp_path):
    out_dir = tmp_path / "rel"
    assert run(["train", *TOY_REL, "--epochs", "5", "--out", str(out_dir)], capsys)[0] == 0
    _, serial, _ = run(["eval", "--checkpoint", str(out_dir)], capsys)
    _, parallel, _ = run(["eval", "--checkpoint", str(out_dir), "--workers", "3"], capsys)
    assert serial == parallel and serial.startswith("pearson\t")


def test_multi_seed_train_and_eval(capsys, tmp_path):
    base = tmp_path / "multi"
    code, out, _ = run(["train", *TOY_SENT, "--epochs", "3", "--seeds", "1..3", "--out", str(base)], capsys)
    assert code == 0 and sorted(os.listdir(base)) == ["seed1", "seed2", "seed3"]
    code, out, _ = run(["eval", "--checkpoint", str(base), "--seeds", "1..3"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "metric\tmean\tstd\tn" and lines[1].startswith("accuracy\t")
    assert lines[1].endswith("\t3")


def test_eval_corrupt_and_mismatched_checkpoint(capsys, tmp_path):
    out_dir = tmp_path / "sent"
    assert run(["train", *TOY_SENT, "--epochs", "1", "--out", str(out_dir)], capsys)[0] == 0
    ckpt = out_dir / "model.ckpt"
    good = ckpt.read_bytes()
    ckpt.write_bytes(good[: len(good) // 2])
    code, _, err = run(["eval", "--checkpoint", str(out_dir)], capsys)
    assert code == 2 and "truncated" in err
    ckpt.write_bytes(good)
    cfg = (out_dir / "config.txt").read_text().replace("d = 12", "d = 20")
    (out_dir / "config.txt").write_text(cfg)
    code, _, err = run(["eval", "--checkpoint", str(out_dir)], capsys)
    assert code == 2 and "shape mismatch" in err


def test_gradcheck_cli(capsys):
    code, out, _ = run(["gradcheck", "--variant", "lstm", "--head", "classifier", "--seed", "3"], capsys)
    assert code == 0
    rows = out.splitlines()[1:]
    assert {r.split("\t")[3] for r in rows} >= {"enc.W_i", "cls.W", "inputs"}
    again = run(["gradcheck", "--variant", "lstm", "--head", "classifier", "--seed", "3"], capsys)[1]
    assert again == out
    code, _, err = run(["gradcheck", "--variant", "lstm", "--head", "classifier", "--corrupt", "enc.U_o"], capsys)
    assert code == 3 and "enc.U_o" in err


def test_count_params_cli(capsys):
    assert run(["count-params", "--variant", "lstm", "--d", "150"], capsys)[1] == "270600\n"
    assert run(["count-params", "--variant", "bilstm", "--d", "150"], capsys)[1] == "270600\n"


def test_nn_cli(capsys, tmp_path):
    out_dir = tmp_path / "rel"
    assert run(["train", *TOY_REL, "--epochs", "3", "--out", str(out_dir)], capsys)[0] == 0
    query = "a man is playing a guitar"
    code, out, _ = run(["nn", "--checkpoint", str(out_dir), "--baseline", "mean", "--k", "3", "--query", query],
                       capsys)
    lines = out.splitlines()
    assert code == 0 and len(lines) == 3 and lines[0] == f"1.000000\t{query}"
    code, out, _ = run(["nn", "--checkpoint", str(out_dir), "--k", "4", "--query", query], capsys)
    scores = [float(line.split("\t")[0]) for line in out.splitlines()]
    assert code == 0 and len(scores) == 4 and all(1 < s < 5 for s in scores) and scores == sorted(scores)[::-1]
    code, out, _ = run(["nn", "--checkpoint", str(out_dir), "--k", "0", "--query", query], capsys)
    assert code == 0 and out == ""
    code, _, err = run(["nn", "--k", "2", "--query", query], capsys)
    assert code == 1


def test_nn_baseline_with_embedding_file(capsys, tmp_path):
    vec = tmp_path / "v.txt"
    vec.write_text("good 1 0\nbad -1 0\nmovie 0 1\n", encoding="utf-8")
    corpus = tmp_path / "c.txt"
    corpus.write_text("bad movie\ngood movie\ngood\n", encoding="utf-8")
    code, out, _ = run(["nn", "--baseline", "mean", "--embeddings", str(vec), "--corpus", str(corpus),
                        "--query", "good", "--k", "5"], capsys)
    assert code == 0 and out.splitlines()[0] == "1.000000\tgood" and len(out.splitlines()) == 3


def test_parse_seeds():
    assert parse_seeds("1..3") == [1, 2, 3]
    assert parse_seeds("4,7") == [4, 7]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "treelstm.cli", "count-params", "--variant", "nary-const",
                           "--d", "150"], capture_output=True, text=True)
    assert proc.returncode == 0 and int(proc.stdout) == 4 * 150 * 300 + 10 * 150 * 150 + 600
