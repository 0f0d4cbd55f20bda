import csv
import filecmp
import json
import shutil

import pytest

from gamepredict.analysis import scatter_data
from gamepredict.cli import main
from gamepredict.config import load_config, parse_config
from gamepredict.games import GameFamily
from gamepredict.pipeline import Evaluation, PredictionStore, make_client, run_predict
from gamepredict.report import family_table, format_p, render_csv, render_text
from gamepredict.synthetic import write_demo
from helpers import results_from_counts

SMALL = {GameFamily.BARGAINING: 30, GameFamily.NEGOTIATION: 30, GameFamily.MATRIX_ONESHOT: 24}


@pytest.fixture
def demo(tmp_path):
    return write_demo(tmp_path / "ws", seed=3, sizes=SMALL)


def run(*argv):
    return main([str(a) for a in argv])


def edit_config(path, **changes):
    raw = json.loads(path.read_text())
    raw.update(changes)
    path.write_text(json.dumps(raw))


def test_validate_clean(demo, capsys):
    assert run("validate", "-c", demo) == 0
    assert "config is valid" in capsys.readouterr().out


def test_validate_missing_template_names_model(demo, capsys):
    (demo.parent / "templates" / "synth.json").write_text(json.dumps({"base": "chatml", "models": ["synth/noise-chat"]}))
    assert run("validate", "-c", demo) == 1
    assert "synth/truth-chat" in capsys.readouterr().out


def test_validate_duplicate_pair_id(demo, capsys):
    reg = demo.parent / "registry.json"
    raw = json.loads(reg.read_text())
    raw["pairs"][1]["pair_id"] = raw["pairs"][0]["pair_id"]
    reg.write_text(json.dumps(raw))
    assert run("validate", "-c", demo) == 1
    assert "registry" in capsys.readouterr().out


def test_validate_bad_dataset_record(demo, capsys):
    path = demo.parent / "data" / "bargaining.jsonl"
    path.write_text(path.read_text() + '{"id": "broken"}\n')
    assert run("validate", "-c", demo) == 1
    assert "datasets.bargaining" in capsys.readouterr().out


def test_config_hash_tracks_overrides(demo):
    cfg = load_config(demo)
    raw = dict(cfg.raw, seed=99)
    assert parse_config(raw, demo.parent).config_hash != cfg.config_hash
    assert load_config(demo).config_hash == cfg.config_hash


def test_predict_is_deterministic_and_cached(demo):
    cfg = load_config(demo)
    first = run_predict(cfg, "bargaining")
    assert first.failed == 0 and first.records == 4 * 30 and first.network_calls == 120
    snapshot = {p: p.read_bytes() for p in first.files}
    again = run_predict(cfg, "bargaining", client=make_client(cfg))
    assert again.network_calls == 0
    assert {p: p.read_bytes() for p in again.files} == snapshot


def test_predict_without_logprobs_fails_before_batch(demo, capsys):
    raw = json.loads(demo.read_text())
    raw["endpoint"]["mock_models"]["synth/noise-base"] = {"kind": "no_logprobs"}
    demo.write_text(json.dumps(raw))
    assert run("predict", "-c", demo, "--family", "bargaining") == 2
    assert not (demo.parent / "out" / "predictions").exists()
    assert "logprob" in capsys.readouterr().err.lower()


def test_evaluate_without_predictions_exits_3(demo, capsys):
    assert run("evaluate", "-c", demo) == 3
    assert "missing" in capsys.readouterr().err.lower()


def test_report_without_bundle_exits_3(demo):
    assert run("report", "-c", demo) == 3


def _full_run(demo, out):
    for fam in ("bargaining", "negotiation", "matrix_oneshot"):
        assert run("predict", "-c", demo, "--family", fam, "--output-dir", out) == 0
    assert run("evaluate", "-c", demo, "--output-dir", out) == 0
    return out / "report"


def test_evaluate_twice_is_byte_identical(demo, tmp_path, capsys):
    a = _full_run(demo, tmp_path / "a")
    shutil.rmtree(demo.parent / "cache")
    b = _full_run(demo, tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == []
    assert {"family_summary.csv", "per_pair.txt", "sensitivity_overall.csv", "manifest.json",
            "ne_alignment.csv", "oneshot_topologies.txt"} <= set(names)
    summary = (a / "family_summary.csv").read_text().splitlines()
    assert summary[0].startswith("config_hash,seed,scope")
    capsys.readouterr()
    assert run("report", "--bundle", a, "--table", "scatter") == 0
    assert "Per-pair correlations" in capsys.readouterr().out


def test_sensitivity_and_ne_commands(demo, tmp_path, capsys):
    _full_run(demo, tmp_path / "o")
    capsys.readouterr()
    assert run("sensitivity", "-c", demo, "--output-dir", tmp_path / "o", "--family", "bargaining") == 0
    out = capsys.readouterr().out
    assert "mass" in out and "0.8" in out
    assert run("ne", "-c", demo, "--output-dir", tmp_path / "o", "--with-predictions") == 0
    out = capsys.readouterr().out
    assert "closer to NE" in out
    lines = (tmp_path / "o" / "ne_predictions.jsonl").read_text().splitlines()
    assert all(0.0 <= json.loads(l)["row_action1_prob"] <= 1.0 for l in lines)


def test_filter_flags_change_results(demo, tmp_path, capsys):
    _full_run(demo, tmp_path / "o")
    capsys.readouterr()
    assert run("evaluate", "-c", demo, "--output-dir", tmp_path / "o", "--mass-threshold", "0.99") == 0
    with (tmp_path / "o" / "report" / "family_summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["n_valid"] == "0" and int(r["n_filtered"]) > 0 for r in rows)


def test_injected_counts_report_p():
    results = results_from_counts({"bargaining": (62, 28)})
    ev = Evaluation([GameFamily.BARGAINING], {GameFamily.BARGAINING: results}, {}, {}, {}, {}, {}, {}, None,
                    scatter_data(results), [])
    table = family_table(ev)
    text = render_text(table, "h", 0)
    assert "2.19e-04" in text
    assert format_p(table.rows[0][table.columns.index("binomial_p")]) == "2.19e-04"
    assert "62" in render_csv(table, "h", 0)


def test_store_reports_missing_file(tmp_path):
    assert PredictionStore(tmp_path).get(GameFamily.BARGAINING, "standard", "standard", "x/y") is None


def test_unknown_config_keys_rejected(demo, capsys):
    edit_config(demo, filters={"mass_treshold": 0.5})
    assert run("validate", "-c", demo) == 1
    assert "mass_treshold" in capsys.readouterr().err
    edit_config(demo, filters={}, colour="blue")
    assert run("validate", "-c", demo) == 1
