"""Command line entry points, exit codes, and scripted chat sessions."""

import io
import json

import pytest

import factcrs as fc
from factcrs.cli import build_parser, cmd_chat, main

from conftest import BENCH_SPEC

CFG_TEXT = "embedding_dim = 16\nnum_trees = 3\nmax_depth = 4\nseed = 11\n"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A corpus directory, a config file, and one trained model."""
    root = tmp_path_factory.mktemp("cli")
    dataset, _ = fc.generate_synthetic(BENCH_SPEC)
    data_dir = root / "corpus"
    fc.save_dataset(dataset, data_dir)
    cfg = root / "small.cfg"
    cfg.write_text(CFG_TEXT, encoding="utf-8")
    model = root / "model.fcrs"
    rc = main(["train", "--data", str(data_dir), "--out", str(model),
               "--config", str(cfg)])
    assert rc == 0
    return {"root": root, "data": data_dir, "cfg": cfg, "model": model}


class TestTrain:
    def test_writes_model_and_log(self, workspace):
        assert workspace["model"].exists()
        log = workspace["root"] / "model.fcrs.train.log"
        text = log.read_text(encoding="utf-8")
        assert text.startswith("records:")
        assert "tree 0 node 0 depth 0 attr" in text

    def test_retrain_is_byte_identical(self, workspace, tmp_path):
        other = tmp_path / "again.fcrs"
        rc = main(["train", "--data", str(workspace["data"]), "--out", str(other),
                   "--config", str(workspace["cfg"])])
        assert rc == 0
        assert other.read_bytes() == workspace["model"].read_bytes()

    def test_missing_corpus_exits_2(self, workspace, tmp_path, capsys):
        broken = tmp_path / "broken"
        broken.mkdir()
        (broken / "attributes.tsv").write_text("", encoding="utf-8")
        rc = main(["train", "--data", str(broken), "--out", str(tmp_path / "m")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "error:" in err

    def test_missing_file_is_named(self, workspace, tmp_path, capsys):
        rc = main(["train", "--data", str(tmp_path / "nowhere"),
                   "--out", str(tmp_path / "m")])
        assert rc == 2
        assert "attributes.tsv" in capsys.readouterr().err


class TestEval:
    def test_prints_the_headline_metrics(self, workspace, capsys):
        rc = main(["eval", "--model", str(workspace["model"]),
                   "--data", str(workspace["data"])])
        assert rc == 0
        out = capsys.readouterr().out
        assert "episodes:" in out
        assert "SR@10:" in out
        assert "AT:" in out

    def test_report_directory_contents(self, workspace, tmp_path, capsys):
        report = tmp_path / "report"
        rc = main(["eval", "--model", str(workspace["model"]),
                   "--data", str(workspace["data"]),
                   "--heldout", "--report", str(report)])
        assert rc == 0
        assert (report / "report.txt").exists()
        for name in ("per_turn.csv", "leaf_items_hist.csv",
                     "item_leaf_spread_hist.csv", "mention_stats.csv",
                     "sr_by_min_mentions.csv", "identified_matrix.csv"):
            assert (report / name).exists(), name
        traces = [json.loads(line) for line in
                  (report / "traces.jsonl").read_text().splitlines()]
        out = capsys.readouterr().out
        n_episodes = int(out.split("episodes: ")[1].splitlines()[0])
        assert len(traces) == n_episodes

    def test_ablation_flag_accepted(self, workspace, capsys):
        rc = main(["eval", "--model", str(workspace["model"]),
                   "--data", str(workspace["data"]),
                   "--ablate", "no-online-feedback",
                   "--ablate", "no-early-rec"])
        assert rc == 0
        assert "SR@10:" in capsys.readouterr().out

    def test_unknown_ablation_exits_1(self, workspace, capsys):
        rc = main(["eval", "--model", str(workspace["model"]),
                   "--data", str(workspace["data"]),
                   "--ablate", "no-gravity"])
        assert rc == 1
        assert "unknown ablation" in capsys.readouterr().err

    def test_vocabulary_mismatch_exits_3(self, workspace, tmp_path, capsys):
        # same shape, different labels: the model must refuse to run
        other = tmp_path / "renamed"
        fc.save_dataset(fc.load_dataset(workspace["data"]), other)
        lines = (other / "attributes.tsv").read_text().splitlines()
        first_id, _ = lines[0].split("\t")
        lines[0] = f"{first_id}\tsomething_else"
        (other / "attributes.tsv").write_text("\n".join(lines) + "\n")
        rc = main(["eval", "--model", str(workspace["model"]),
                   "--data", str(other)])
        assert rc == 3
        assert "vocabulary" in capsys.readouterr().err

    def test_missing_model_exits_1(self, workspace, tmp_path, capsys):
        rc = main(["eval", "--model", str(tmp_path / "ghost.fcrs"),
                   "--data", str(workspace["data"])])
        assert rc == 1
        assert "not found" in capsys.readouterr().err


class TestSimulate:
    def test_transcripts_and_trace_file(self, workspace, tmp_path, capsys):
        out_file = tmp_path / "traces.jsonl"
        rc = main(["simulate", "--model", str(workspace["model"]),
                   "--data", str(workspace["data"]),
                   "--episodes", "4", "--show", "2", "--out", str(out_file)])
        assert rc == 0
        printed = capsys.readouterr().out
        assert printed.count("episode user=") == 2
        assert "4 episode(s)" in printed
        traces = fc.load_traces(out_file)
        assert len(traces) == 4
        assert all(t.steps for t in traces)


class TestConfig:
    def test_show_prints_defaults(self, capsys):
        assert main(["config", "show"]) == 0
        out = capsys.readouterr().out
        assert "embedding_dim = 40" in out
        assert "max_turns = 10" in out

    def test_show_applies_overlay(self, workspace, capsys):
        assert main(["config", "show", "--config", str(workspace["cfg"])]) == 0
        assert "num_trees = 3" in capsys.readouterr().out

    def test_unknown_action_exits_1(self, capsys):
        assert main(["config", "frobnicate"]) == 1
        assert "unknown config action" in capsys.readouterr().err


class TestChat:
    def _run(self, workspace, script):
        parser = build_parser()
        args = parser.parse_args(["chat", "--model", str(workspace["model"]),
                                  "--seed", "4"])
        out = io.StringIO()
        rc = cmd_chat(args, stdin=io.StringIO(script), stdout=out)
        return rc, out.getvalue()

    def test_scripted_session_reaches_a_verdict(self, workspace):
        # answer whatever comes, reject the first list, accept the second
        script = "\n".join(["n", "y", "n", "y", "n", "y", "r",
                            "n", "y", "n", "a", "a", "a", "a"]) + "\n"
        rc, text = self._run(workspace, script)
        assert rc == 0
        assert text.startswith("chat session over")
        assert "how about:" in text
        assert "settled in" in text or "out of turns" in text

    def test_bad_input_is_reprompted(self, workspace):
        rc, text = self._run(workspace, "maybe\ny\n")
        assert rc == 0
        assert "please answer y or n" in text

    def test_eof_says_goodbye(self, workspace):
        rc, text = self._run(workspace, "")
        assert rc == 0
        assert "bye" in text


class TestParser:
    def test_missing_required_argument(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", "somewhere"])
        assert exc.value.code == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["dance"])
