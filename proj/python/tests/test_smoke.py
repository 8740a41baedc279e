# SPDX-License-Identifier: Apache-2.0
import math
import os
import pathlib

import pytest

import ced

DATA = pathlib.Path(os.environ.get("CED_DATA_DIR", pathlib.Path(__file__).parents[2] / "data"))
SYNTHETIC = DATA / "synthetic"


def test_ced_scores_prefers_contrast():
    p_tilde = ced.LogProbDist.from_probs({"a": 0.5, "b": 0.4, "c": 0.1})
    p = ced.LogProbDist.from_probs({"a": 0.7, "b": 0.2, "c": 0.1})
    scored = ced.ced_scores(p_tilde, p, alpha=0.1)
    assert scored.selected == "b"
    assert scored.scores["b"] == pytest.approx(math.log(2.0))
    assert ced.ced_scores(p_tilde, p, alpha=0.25).scores["c"] == -math.inf


def test_head_and_errors():
    d = ced.LogProbDist.from_probs({"x": 0.6, "y": 0.4})
    assert ced.adaptive_head(d, 1.0) == ["x"]
    with pytest.raises(ced.ParameterError):
        ced.adaptive_head(d, 1.5)


def test_render_features():
    f = ced.DescriptiveFeatures(tags=["dog", "ball"], attributes=["brown dog"], captions=["a dog plays"])
    assert ced.render_features(f, 5) == "Tags: dog, ball\nAttributes: brown dog\nCaptions: a dog plays\n"
    pair = ced.build_prompt_pair([ced.ContextExample(f, "what animal?", "dog")], f, "what is it?")
    assert pair.with_examples.endswith(pair.plain[len("Answer the question using the visual description.\n\n"):])


def test_table_backend_decoding():
    backend = ced.TableBackend(
        [("", {"x": 1.0}), ("Q:", {" yes": 0.6, " no": 0.4}), ("EX Q:", {" yes": 0.55, " no": 0.45})]
    )
    prompts = ced.PromptPair("Q:", "EX Q:")
    params = ced.DecodeParams(max_new_tokens=1)
    assert ced.decode_greedy(backend, "Q:", params)["output"] == " yes"
    trace = ced.decode_ced(backend, prompts, params)
    assert trace["output"] == " no"
    assert trace["steps"][0]["selected"] == " no"


def test_metrics():
    assert ced.normalize_answer("The Dog.") == "dog"
    assert ced.exact_match("two", ["Two"]) == 1
    assert ced.vqa_soft_accuracy("dog", ["dog"] + ["cat"] * 9) == pytest.approx(1 / 3)


def test_run_experiment_on_bundled_fixture():
    backend = ced.TableBackend.load(str(SYNTHETIC / "table.json"))
    report = ced.run_experiment(str(SYNTHETIC / "dataset.jsonl"), backend, shots=[0, 3], jobs=2)
    acc = {(c["method"], c["shots"]): c["accuracy"] for c in report["cells"]}
    assert acc[("ced", 0)] == acc[("greedy", 0)]
    assert acc[("ced", 3)] >= acc[("greedy", 3)]
    assert acc[("ced", 3)] > acc[("ced", 0)]


def test_cli_validate(tmp_path):
    code, out, _ = ced.cli_main(["validate", str(SYNTHETIC / "dataset.jsonl")])
    assert code == 0 and out.endswith(": ok\n")
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{}\n")
    code, out, _ = ced.cli_main(["validate", str(bad)])
    assert code == 1 and ":1: " in out
    assert ced.validate_dataset(str(bad))[0][0] == 1
