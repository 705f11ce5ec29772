"""
Tests for run configuration, overrides and the command line surface
"""
import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from app.catalog.vocabulary import expand_vocabulary
from app.cli import EXIT_BAD_INPUT, EXIT_OK, main
from app.config import RunConfig, apply_overrides, load_run_config, parse_override
from app.datasets.splits import load_split
from app.evaluation.evaluator import evaluate_prompts
from app.training.checkpoint import load_checkpoint

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "default.json"


@pytest.fixture
def run_config(tmp_path):
    """A desk-sized run: twelve synthetic items, one small layer, a few steps"""
    payload = {
        "seed": 0,
        "output_dir": str(tmp_path / "runs"),
        "model": {"layers": 1, "heads": 2, "dim": 16, "ff_dim": 32, "max_seq_len": 96},
        "train": {"batch_size": 16, "max_epochs": 1, "max_steps": 4, "learning_rate": 0.003,
                  "validation_fraction": 0.1},
        "prompt": {"instruction": "recommend next", "input_prefix": "history:"},
        "data": {
            "split_dir": str(tmp_path / "split"),
            "max_history": 5,
            "synthetic": {"n_items": 12, "n_categories": 2, "words_per_category": 6,
                          "n_sequences": 120, "min_length": 4, "max_length": 6},
        },
        "eval": {"ks": [1, 5], "bench_samples": 100, "bench_warmup": 1, "probe_items": 5},
        "sweep_rates": [1, 2],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


def _run(config_path, *args):
    return main([args[0], "--config", str(config_path), *args[1:]])


@pytest.fixture
def prepared(run_config, tmp_path):
    """synth -> prepare with the synthetic catalog"""
    synth_dir = tmp_path / "synthetic"
    assert _run(run_config, "synth", "--out", str(synth_dir)) == EXIT_OK
    assert _run(run_config, "prepare", "--input", str(synth_dir / "interactions.jsonl"),
                "--catalog", str(synth_dir / "catalog.jsonl")) == EXIT_OK
    return synth_dir


@pytest.fixture
def trained(run_config, prepared, tmp_path):
    assert _run(run_config, "train") == EXIT_OK
    return tmp_path / "runs" / "checkpoints"


# ============================================================================
# Configuration Tests
# ============================================================================

def test_parse_override_values():
    assert parse_override("train.learning_rate=3e-4") == (["train", "learning_rate"], 3e-4)
    assert parse_override("prompt.instruction=recommend next") == (["prompt", "instruction"], "recommend next")
    assert parse_override("eval.ks=[5, 10]") == (["eval", "ks"], [5, 10])
    with pytest.raises(ValueError, match="key=value"):
        parse_override("train.learning_rate")


def test_overrides_create_nested_sections():
    payload = apply_overrides({}, ["model.dim=32", "seed=7"])
    assert payload == {"model": {"dim": 32}, "seed": 7}
    with pytest.raises(ValueError, match="not a section"):
        apply_overrides({"seed": 1}, ["seed.value=2"])


def test_root_seed_reaches_every_component():
    config = load_run_config(overrides=["seed=11", "train.seed=3"])
    assert config.train.seed == 11
    assert config.data.synthetic.seed == 11


def test_invalid_values_fail_validation():
    with pytest.raises(ValidationError):
        load_run_config(overrides=["eval.ks=[0]"])
    with pytest.raises(ValidationError):
        load_run_config(overrides=["model.rate=0.5"])


def test_default_config_file_matches_defaults():
    assert load_run_config(DEFAULT_CONFIG) == RunConfig()


def test_fingerprint_ignores_loop_length():
    base = load_run_config()
    longer = load_run_config(overrides=["train.max_epochs=50"])
    other = load_run_config(overrides=["train.learning_rate=0.01"])
    assert base.fingerprint(40, 10) == longer.fingerprint(40, 10)
    assert base.fingerprint(40, 10) != other.fingerprint(40, 10)
    assert base.fingerprint(40, 10) != base.fingerprint(40, 11)


# ============================================================================
# Command Tests
# ============================================================================

def test_prepare_missing_input_exits_two_without_output(run_config, tmp_path):
    code = _run(run_config, "prepare", "--input", str(tmp_path / "absent.jsonl"))
    assert code == EXIT_BAD_INPUT
    assert not (tmp_path / "split").exists()


def test_missing_config_file_exits_two(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "nope.json")]) == EXIT_BAD_INPUT


def test_prepare_writes_manifests(run_config, prepared, tmp_path):
    split_dir = tmp_path / "split"
    info = json.loads((split_dir / "split_info.json").read_text())
    assert info["items"] == 12
    assert info["sequences"] == 120
    assert info["counts"]["test"] == 120
    split, catalog = load_split(split_dir)
    assert len(split.test) == 120
    assert catalog.count == 12
    assert all(len(s.history) <= 5 for s in split.train)


def test_train_then_eval(run_config, trained, tmp_path):
    assert (trained / "best" / "manifest.json").exists()
    result = json.loads((trained / "training_result.json").read_text())
    assert result["steps"] == 4

    out = tmp_path / "eval"
    assert _run(run_config, "eval", "--out", str(out),
                "--transitions", str(tmp_path / "synthetic" / "transitions.npy")) == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics["metrics"]) == {"ndcg@1", "hr@1", "ndcg@5", "hr@5"}
    assert metrics["fingerprint"] == result["fingerprint"]
    assert "samples_per_second" not in metrics
    assert "samples_per_second" in json.loads((out / "timing.json").read_text())
    assert set(json.loads((out / "baselines.json").read_text())) == {"popularity", "markov", "oracle"}
    assert (out / "metrics.csv").read_text().count("\n") == 1 + 4 * 2

    # a second evaluation writes identical bytes
    again = tmp_path / "eval_again"
    assert _run(run_config, "eval", "--out", str(again),
                "--transitions", str(tmp_path / "synthetic" / "transitions.npy")) == EXIT_OK
    assert (again / "metrics.json").read_bytes() == (out / "metrics.json").read_bytes()


def test_cli_metrics_match_library_call(run_config, trained, tmp_path):
    out = tmp_path / "eval"
    assert _run(run_config, "eval", "--out", str(out), "--no-baselines") == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())["metrics"]

    loaded = load_checkpoint(trained / "best")
    split, _ = load_split(tmp_path / "split")
    report = evaluate_prompts(
        loaded.model, split.test, expand_vocabulary(loaded.tokenizer, loaded.catalog), loaded.tokenizer,
        include_titles=True, ks=[1, 5]
    )
    assert report.metrics == metrics


def test_eval_refuses_mismatched_checkpoint(run_config, trained, tmp_path):
    code = _run(run_config, "eval", "--out", str(tmp_path / "eval"), "--set", "train.learning_rate=0.01")
    assert code == EXIT_BAD_INPUT
    assert not (tmp_path / "eval" / "metrics.json").exists()


def test_same_seed_reproduces_metrics(run_config, prepared, tmp_path):
    """Two trainings with one seed evaluate to byte-identical metrics"""
    outputs = []
    for name in ("first", "second"):
        checkpoints = tmp_path / name
        assert _run(run_config, "train", "--out", str(checkpoints)) == EXIT_OK
        out = tmp_path / f"eval_{name}"
        assert _run(run_config, "eval", "--checkpoint", str(checkpoints / "best"),
                    "--out", str(out), "--no-baselines") == EXIT_OK
        outputs.append((out / "metrics.json").read_bytes())
    assert outputs[0] == outputs[1]


def test_bench_and_probe(run_config, trained, tmp_path):
    assert _run(run_config, "bench", "--out", str(tmp_path / "bench")) == EXIT_OK
    bench = json.loads((tmp_path / "bench" / "bench.json").read_text())
    assert bench["modes"]["logits"]["passes_per_sample"] == 1.0
    assert bench["modes"]["generative"]["passes_per_sample"] == pytest.approx(bench["mean_title_length"])

    assert _run(run_config, "probe", "--out", str(tmp_path / "probe")) == EXIT_OK
    probe = json.loads((tmp_path / "probe" / "probe.json").read_text())
    assert probe["items"] == 5
    assert 0.0 <= probe["fraction"] <= 1.0
    assert (tmp_path / "probe" / "probe_transcript.txt").exists()


def test_sweep_writes_one_row_per_rate(run_config, prepared, tmp_path):
    out = tmp_path / "sweep"
    assert _run(run_config, "sweep", "--out", str(out)) == EXIT_OK
    lines = (out / "summary.csv").read_text().strip().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("rate,shared_rows")
    assert (out / "rate_1" / "metrics.json").exists()
    assert (out / "rate_2" / "metrics.json").exists()


def test_sweep_rejects_rate_below_one(run_config, prepared, tmp_path):
    assert _run(run_config, "sweep", "--rates", "0.5", "--out", str(tmp_path / "sweep")) == EXIT_BAD_INPUT


def test_ablate_writes_three_variants(run_config, prepared, tmp_path):
    out = tmp_path / "ablation"
    assert _run(run_config, "ablate", "--out", str(out)) == EXIT_OK
    lines = (out / "ablation.csv").read_text().strip().splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["BOTH", "E", "I"]
