import io
import json
import subprocess
import sys

import pytest

from conftest import DATA
from mei import cli
from mei.corpus import Cluster, Span, read_conll, write_jsonl
from mei.derive import read_mei_jsonl, select_major_entities
from mei.metrics import evaluate, gold_as_prediction, pair_corpus, read_predictions, write_predictions, PredictionSet

CONLL = str(DATA / "tiny.conll")
MEI = str(DATA / "two_docs.mei.jsonl")
CASSETTE = str(DATA / "two_docs.cassette.jsonl")


def run(args, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for name in ("derive", "evaluate", "map", "run-engine", "llm", "analyze"):
        assert name in out


def test_derive_matches_library(capsys):
    code, out, _ = run(["derive", CONLL], capsys)
    assert code == 0
    docs = [json.loads(line) for line in out.splitlines()]
    lib = [select_major_entities(d) for d in read_conll(CONLL)]
    assert [d["doc_id"] for d in docs] == [d.doc_id for d in lib]
    assert [len(d["entities"]) for d in docs] == [len(d.entities) for d in lib]


def test_derive_k_flag(capsys):
    _, out, _ = run(["derive", CONLL, "--k", "1"], capsys)
    assert all(len(json.loads(line)["entities"]) == 1 for line in out.splitlines())


def test_derive_stats(capsys):
    _, out, _ = run(["derive", CONLL, "--stats"], capsys)
    stats = json.loads(out)
    assert stats["cluster_count"] == 5 and stats["mention_count"] == 33


def test_derive_phrase_override(capsys):
    _, out, _ = run(["derive", CONLL, "--phrase", "tale:1=the boy"], capsys)
    assert json.loads(out.splitlines()[0])["entities"][0]["phrase"] == "the boy"


def test_derive_empty_corpus_is_usage_error(tmp_path, capsys):
    empty = tmp_path / "e.conll"
    empty.write_text("")
    code, out, err = run(["derive", str(empty)], capsys)
    assert code == 2 and out == "" and "empty" in err


def test_derive_missing_file_is_data_error(capsys):
    code, _, err = run(["derive", "/nonexistent.conll"], capsys)
    assert code == 1 and err


def test_derive_malformed_is_data_error(tmp_path, capsys):
    bad = tmp_path / "b.conll"
    bad.write_text("#begin document (x); part 000\nx 0 0 w - (1\n\n#end document\n")
    code, _, err = run(["derive", str(bad)], capsys)
    assert code == 1 and "line" in err


def test_pipe_derive_into_evaluate(tmp_path, capsys, monkeypatch):
    _, derived, _ = run(["derive", CONLL], capsys)
    code, report, _ = run(["evaluate", "--gold", "-"], capsys, stdin=derived, monkeypatch=monkeypatch)
    assert code == 0
    lib = [select_major_entities(d) for d in read_conll(CONLL)]
    expected = evaluate([(g, gold_as_prediction(g)) for g in lib]).to_tsv()
    assert report == expected
    assert report.endswith("macro_f1\t1.0000\nmicro_f1\t1.0000\n")


def test_evaluate_hand_scored(tmp_path, capsys):
    pred = tmp_path / "p.jsonl"
    write_predictions(read_predictions(DATA / "two_docs.expected_pred.jsonl"), pred)
    code, out, _ = run(["evaluate", "--gold", MEI, "--pred", str(pred)], capsys)
    assert code == 0
    assert out.splitlines()[-2:] == ["macro_f1\t0.9167", "micro_f1\t0.9444"]


def test_evaluate_json_and_figure(tmp_path, capsys):
    fig = tmp_path / "f1.png"
    code, out, _ = run(["evaluate", "--gold", MEI, "--report-format", "json", "--figure", str(fig)], capsys)
    assert code == 0
    assert json.loads(out)["macro_f1"] == 1.0
    assert fig.stat().st_size > 0


def test_evaluate_stray_doc_ids(tmp_path, capsys):
    pred = tmp_path / "p.jsonl"
    write_predictions([PredictionSet("nope"), PredictionSet("other")], pred)
    code, _, err = run(["evaluate", "--gold", MEI, "--pred", str(pred)], capsys)
    assert code == 1
    assert "nope" in err and "other" in err


def test_evaluate_unknown_label(tmp_path, capsys):
    pred = tmp_path / "p.jsonl"
    write_predictions([PredictionSet("alice", ((Span(0, 0), 9),))], pred)
    code, _, err = run(["evaluate", "--gold", MEI, "--pred", str(pred)], capsys)
    assert code == 1


def test_map_fuzzy(tmp_path, capsys):
    gold = read_mei_jsonl(MEI)
    system = []
    from mei.corpus import AnnotatedDocument
    for g in gold:
        clusters = [Cluster(e, tuple(g.gold_mentions(e))) for e in g.entity_ids]
        system.append(AnnotatedDocument(g.doc_id, g.tokens, g.sentences, tuple(reversed(clusters))))
    path = tmp_path / "sys.jsonl"
    write_jsonl(system, path)
    for mode in ("fuzzy", "cosine"):
        code, out, _ = run(["map", "--gold", MEI, "--clusters", str(path), "--mode", mode], capsys)
        assert code == 0
        preds = [PredictionSet(d["doc_id"], tuple((Span(s, e), l) for s, e, l in d["assignments"]))
                 for d in map(json.loads, out.splitlines())]
        assert len(preds) == 2
        if mode == "fuzzy":
            assert preds[1].as_dict() == dict(gold[1].gold)


def test_run_engine_hash(capsys, tmp_path):
    code, out, _ = run(["run-engine", "--gold", MEI, "--mode", "static"], capsys)
    assert code == 0
    assert len(out.splitlines()) == 2
    cands = tmp_path / "c.jsonl"
    write_predictions([PredictionSet("alice", ((Span(0, 0), None),))], cands)
    code, out, _ = run(["run-engine", "--gold", MEI, "--candidates", str(cands)], capsys)
    first, second = map(json.loads, out.splitlines())
    assert first["assignments"] == [[0, 0, 1]]
    assert second["assignments"] == []


def test_run_engine_mlp_needs_weights(capsys):
    code, _, err = run(["run-engine", "--gold", MEI, "--scorer", "mlp"], capsys)
    assert code == 2 and "--weights" in err


def test_llm_replay(tmp_path, capsys):
    out_path, rep = tmp_path / "p.jsonl", tmp_path / "r.tsv"
    code, _, err = run(["llm", "--gold", MEI, "--fixtures", "replay", "--cassette", CASSETTE,
                        "--out", str(out_path), "--report", str(rep)], capsys)
    assert code == 0
    assert out_path.read_bytes() == (DATA / "two_docs.expected_pred.jsonl").read_bytes()
    assert rep.read_bytes() == (DATA / "two_docs.expected_report.tsv").read_bytes()
    assert "#9" in err


def test_llm_replay_miss_is_data_error(tmp_path, capsys):
    cassette = tmp_path / "c.jsonl"
    cassette.write_text("")
    code, _, err = run(["llm", "--gold", MEI, "--fixtures", "replay", "--cassette", str(cassette)], capsys)
    assert code == 1 and "no recorded reply" in err


def test_llm_fixture_needs_cassette(capsys):
    code, _, _ = run(["llm", "--gold", MEI, "--fixtures", "replay"], capsys)
    assert code == 2


def test_analyze_errors(tmp_path, capsys):
    fig = tmp_path / "err.png"
    code, out, _ = run(["analyze", "--errors", "--gold", MEI, "--pred", str(DATA / "two_docs.expected_pred.jsonl"),
                        "--figure", str(fig)], capsys)
    assert code == 0
    assert out.splitlines()[-1] == "total\t0\t0\t0\t1\t0"
    assert fig.exists()


def test_analyze_varying_k(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    write_jsonl(read_conll(CONLL), corpus)
    fig = tmp_path / "k.png"
    code, out, _ = run(["analyze", "--varying-k", "2", "--corpus", str(corpus), "--report-format", "json",
                        "--figure", str(fig)], capsys)
    assert code == 0
    reports = json.loads(out)
    assert [len(r["cells"][0]) for r in reports] == [3, 3]
    assert (tmp_path / "k.tale.png").exists()


def test_analyze_needs_a_mode(capsys):
    assert run(["analyze"], capsys)[0] == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# derive settings\nk = 1\nmin-count = 5\n")
    _, out, _ = run(["derive", CONLL, "--config", str(cfg)], capsys)
    assert all(len(json.loads(line)["entities"]) == 1 for line in out.splitlines())
    # flags win over the file
    _, out, _ = run(["derive", CONLL, "--config", str(cfg), "--k", "2"], capsys)
    assert [len(json.loads(line)["entities"]) for line in out.splitlines()] == [2, 2]


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(["derive", CONLL, "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err


def test_config_bad_value(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("k = many\n")
    assert run(["derive", CONLL, "--config", str(cfg)], capsys)[0] == 2


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "mei.cli", "derive"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stdout == ""
