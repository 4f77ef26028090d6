import csv
import json
import math

import pytest

from specfuse.exit import ExitMode
from specfuse.harness import BenchConfig, SyntheticSuite, ablation_configs, load_config, run_benchmark, sweep_models, sweep_segment_len, synth_suite, write_report
from specfuse.harness.cli import main
from specfuse.harness.config import ConfigError
from specfuse.harness.suite import parse_synth_spec


@pytest.fixture(scope="module")
def small_suite():
    return synth_suite(seed=3, n_models=2, family_size=4, n_fillers=1)


def test_suite_sizes():
    s = synth_suite(1, 3, 50)
    assert len(s.models) == 3 and len(s.prompts) == 150
    assert {p.family for p in s.prompts} == {"f0", "f1", "f2"}
    assert all(s.prompts[k].expert == int(s.prompts[k].family[1:]) for k in range(150))


def test_suite_byte_identical():
    assert synth_suite(5, 3, 10, n_fillers=2).to_json() == synth_suite(5, 3, 10, n_fillers=2).to_json()
    assert synth_suite(5, 3, 10).to_json() != synth_suite(6, 3, 10).to_json()


def test_suite_round_trip(tmp_path, small_suite):
    path = tmp_path / "suite.json"
    small_suite.save(path)
    assert SyntheticSuite.load(path).to_json() == small_suite.to_json()


def test_expert_margin_on_heldout_family():
    s = synth_suite(2, 3, 10, n_fillers=1)

    def mean_prob(model, sentence):
        toks = model.encode(sentence.split())
        # direct count-table walk, one conditional at a time
        ids, probs = [], []
        for t in toks:
            probs.append(model.prob(model.history(ids), t))
            ids.append(t)
        return sum(probs) / len(probs)

    for k, fam in enumerate(sorted(s.heldout)):
        for sent in s.heldout[fam]:
            expert = mean_prob(s.models[k], sent)
            others = [mean_prob(m, sent) for j, m in enumerate(s.models) if j != k]
            assert expert > max(others) + 0.1


def test_synth_spec_parsing():
    assert parse_synth_spec("seed=1,models=3,family=50,fillers=2") == {"seed": 1, "n_models": 3, "family_size": 50, "n_fillers": 2}
    with pytest.raises(ValueError):
        parse_synth_spec("seed=1,models=3")
    with pytest.raises(ValueError):
        synth_suite(0, 1, 5)


def test_benchmark_rows_and_invariants(small_suite):
    configs = [BenchConfig("off", exit_mode=ExitMode("off")), BenchConfig("full")]
    rep = run_benchmark(small_suite, configs)
    assert [r.config for r in rep.rows] == ["off", "full"]
    off = rep.row("off")
    assert off.avg_active_models == 3.0
    for r in rep.rows:
        assert 0 <= r.expert_agreement_rate <= 1
        assert r.avg_active_models <= 3
        assert r.first_token_rounds == 1 and r.queries == 8 and r.failures == 0
    assert len(rep.queries) == 16


def test_benchmark_deterministic_and_parallel(small_suite):
    cfg = [BenchConfig("full", max_rounds=8)]
    a = run_benchmark(small_suite, cfg)
    b = run_benchmark(small_suite, cfg, workers=3)
    assert a.deterministic_view() == b.deterministic_view()


def test_repeats_report_spread(small_suite):
    rep = run_benchmark(small_suite, [BenchConfig("full", max_rounds=6)], repeats=3)
    row = rep.rows[0]
    assert row.queries == 24 and row.avg_active_models_std >= 0
    assert {q["repeat"] for q in rep.queries} == {0, 1, 2}


def test_singleton_expert_agreement_is_one(small_suite):
    fam0 = small_suite.family_prompts("f0")
    rep = run_benchmark(small_suite, [BenchConfig("solo", models=(0,), max_rounds=6)], prompts=fam0)
    assert rep.rows[0].expert_agreement_rate == 1.0


def test_size_one_rows_equal_single_model_baselines(small_suite):
    rep = sweep_models(small_suite, [[1, 0, 2]], BenchConfig("base", max_rounds=6))
    assert [r.models for r in rep.rows] == ["1", "1,0", "1,0,2"]
    solo = run_benchmark(small_suite, [BenchConfig("solo", models=(1,), max_rounds=6)])
    assert rep.deterministic_view()[0] | {"config": "x"} == solo.deterministic_view()[0] | {"config": "x"}


def test_adding_expert_raises_agreement(small_suite):
    fam = small_suite.family_prompts("f0")
    rep = sweep_models(small_suite, [[1, 2, 0]], BenchConfig("base", max_rounds=6), sizes=[2, 3], prompts=fam)
    without, with_expert = rep.rows
    assert with_expert.expert_agreement_rate > without.expert_agreement_rate


def test_segment_length_sweep(small_suite):
    rep = sweep_segment_len(small_suite, [1, 2, 5, 10, 20, 40], BenchConfig("base", max_rounds=4))
    assert [r.config for r in rep.rows] == ["L=1", "L=2", "L=5", "L=10", "L=20", "L=40"]


def test_ablation_grid_names():
    names = [c.name for c in ablation_configs()]
    assert names[0] == "no-exit" and "tau=sqrtT" in names and len(names) == 8


def test_write_report(tmp_path, small_suite):
    rep = run_benchmark(small_suite, [BenchConfig("off", exit_mode=ExitMode("off"), max_rounds=3)])
    csv_path, nd_path = write_report(rep, tmp_path / "out")
    rows = list(csv.DictReader(csv_path.open()))
    assert rows[0]["config"] == "off" and float(rows[0]["avg_active_models"]) == 3.0
    lines = [json.loads(x) for x in nd_path.read_text().splitlines()]
    assert lines[0]["type"] == "row" and all(x["type"] == "query" for x in lines[1:])


def test_bench_config_from_dict():
    c = BenchConfig.from_dict({"name": "x", "exit_mode": "no-quality-score:5", "lambda": 0.3, "L": 4, "models": [0, 2]})
    assert c.exit_mode == ExitMode("no_quality_score", 0.3, window=5)
    assert c.L == 4 and c.models == (0, 2)


def _write_config(tmp_path, models, defaults=None):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"models": models, "defaults": defaults or {}}))
    return path


def test_load_config_all_backend_types(tmp_path):
    (tmp_path / "corpus.txt").write_text("the cat sat\nthe dog ran\n")
    path = _write_config(tmp_path, [
        {"type": "ngram", "name": "inline", "params": {"corpus": ["a b c"], "order": 2, "smoothing": 0.5, "temperature": 0.9}},
        {"type": "ngram", "params": {"corpus_file": "corpus.txt"}},
        {"type": "scripted", "params": {"segments": [{"text": " x", "token_probs": [0.5], "finished": True}]}},
        {"type": "http", "params": {"url": "http://localhost:1", "retries": 0}},
    ], {"L": 4, "exit_mode": "fixed-temp:sqrtT", "seed": 9})
    cfg = load_config(path, {"max_rounds": 3, "lambda": None})
    assert [b.model.name for b in cfg.backends] == ["inline", "ngram1", "scripted2", "http3"]
    assert cfg.L == 4 and cfg.max_rounds == 3 and cfg.base_seed == 9
    assert str(cfg.exit_mode) == "fixed-temp:sqrtT"
    assert cfg.per_model_sampling[0].temperature == 0.9


@pytest.mark.parametrize("models,defaults", [
    ([], None),
    ([{"type": "nope"}], None),
    ([{"type": "ngram", "params": {"corpus": []}}], None),
    ([{"type": "scripted", "params": {"segments": [[" a", [0.5]]]}}], {"bogus": 1}),
    ([{"type": "scripted", "params": {"segments": [[" a", [0.5]]]}}], {"exit_mode": "sideways"}),
])
def test_bad_configs(tmp_path, models, defaults):
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, models, defaults))


def test_cli_run_events(tmp_path, capsys):
    path = _write_config(tmp_path, [
        {"type": "scripted", "name": "one", "params": {"segments": [[" a", [0.5]], [" b", [0.5], True]]}},
        {"type": "scripted", "name": "two", "params": {"segments": [[" z", [0.1]]], "default_score": 0.2}},
    ])
    assert main(["run", "--config", str(path), "--prompt", "hi", "--stream", "events", "--exit-mode", "off"]) == 0
    events = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [e["type"] for e in events] == ["segment", "segment", "done"]
    assert events[-1]["avg_active_models"] == 2.0


def test_cli_run_text(tmp_path, capsys):
    path = _write_config(tmp_path, [{"type": "ngram", "params": {"corpus": ["a b c d"], "order": 2, "smoothing": 0}}])
    assert main(["run", "--config", str(path), "--prompt", "a", "--greedy", "-L", "2"]) == 0
    assert capsys.readouterr().out == "a b c d\n"


def test_cli_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--prompt", "x"]) == 2
    path = _write_config(tmp_path, [{"type": "http", "params": {"url": "http://127.0.0.1:9", "retries": 0, "timeout": 0.5}}])
    assert main(["run", "--config", str(path), "--prompt", "x"]) == 3


def test_cli_bench_and_sweep(tmp_path, capsys):
    suite_path = tmp_path / "suite.json"
    assert main(["synth", "--synth", "seed=4,models=2,family=2,fillers=1", "--out", str(suite_path)]) == 0
    cfgs = tmp_path / "configs.json"
    cfgs.write_text(json.dumps([{"name": "off", "exit_mode": "off", "max_rounds": 3}, {"name": "full", "max_rounds": 3}]))
    assert main(["bench", "--suite", str(suite_path), "--configs", str(cfgs), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "bench.csv").exists() and (tmp_path / "b" / "bench.ndjson").exists()
    assert main(["sweep", "--axis", "segment-len", "--values", "1,5", "--synth", "seed=4,models=2,family=2",
                 "--out", str(tmp_path / "s"), "--max-rounds", "2"]) == 0
    assert main(["sweep", "--axis", "models", "--values", "1,2", "--order", "1,0", "--suite", str(suite_path),
                 "--out", str(tmp_path / "m"), "--max-rounds", "2"]) == 0
    rows = list(csv.DictReader((tmp_path / "m" / "sweep-models.csv").open()))
    assert [r["models"] for r in rows] == ["1", "1,0"]
    out = capsys.readouterr().out
    assert "avg_models" in out
