"""Model persistence: canonical documents, strict validation, round trips."""

import json

import numpy as np
import pytest

from conftest import assert_bitwise, chrono_split, random_matrix
from aircal.errors import (
    FormatVersionError,
    IntegrityError,
    ParseError,
    SchemaError,
)
from aircal.gbdt import Ensemble, Hyperparams, RegressionTree, predict, train
from aircal.linear import LinearModel, LinearParams, train_linear
from aircal.model_io import FILE_EXTENSION, ModelMetadata, load, save
from aircal.preprocess import TargetMode
from aircal.rng import SplitMix64


def stump_model(base=0.0):
    tree = RegressionTree(
        feature=np.array([0, -1, -1], dtype=np.int32),
        threshold=np.array([1.5, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        weight=np.array([0.0, -1.0, 1.0]),
    )
    return Ensemble(
        base_score=base,
        trees=(tree,),
        feature_names=("x", "y"),
        target_mode=TargetMode.OFFSET,
        params=Hyperparams(),
    )


def trained_pair(seed=33):
    matrix = random_matrix(50, 3, seed=seed)
    split = chrono_split(matrix)
    model, report = train(
        matrix, split, Hyperparams(n_rounds=6, subsample=0.8, seed=seed)
    )
    return matrix, model, report


def tamper(model, mutate):
    doc = json.loads(save(model))
    mutate(doc)
    return json.dumps(doc)


def test_file_extension_constant():
    assert FILE_EXTENSION == ".calib.json"


def test_empty_ensemble_round_trip():
    model = Ensemble(
        base_score=2.5,
        trees=(),
        feature_names=("x",),
        target_mode=TargetMode.ABSOLUTE,
        params=Hyperparams(),
    )
    loaded, metadata = load(save(model))
    assert loaded.base_score == 2.5
    assert loaded.trees == ()
    assert loaded.target_mode is TargetMode.ABSOLUTE
    assert predict(loaded, np.array([[7.0]])).tolist() == [2.5]
    assert metadata == ModelMetadata(rounds_run=0, best_iteration=None, seed=0)


def test_hand_tree_document_fields():
    doc = json.loads(save(stump_model(base=0.5)))
    assert doc["format_version"] == 1
    assert doc["booster_kind"] == "tree"
    assert doc["feature_names"] == ["x", "y"]
    assert doc["target_mode"] == "offset"
    assert doc["base_score"] == 0.5
    assert len(doc["trees"]) == 1
    node = doc["trees"][0]
    assert node["feature"] == [0, -1, -1]
    assert node["threshold"] == [1.5, 0.0, 0.0]
    assert node["left"] == [1, -1, -1]
    assert node["right"] == [2, -1, -1]
    assert node["weight"] == [0.0, -1.0, 1.0]
    assert doc["hyperparams"]["eta"] == 0.3


def test_document_is_sorted_and_newline_terminated():
    text = save(stump_model())
    assert text.endswith("}\n")
    doc = json.loads(text)
    assert text == json.dumps(doc, sort_keys=True, indent=2) + "\n"
    top_keys = [line.split('"')[1] for line in text.splitlines()
                if line.startswith('  "')]
    assert top_keys == sorted(top_keys)


def test_save_load_save_fixpoint_tree():
    _, model, report = trained_pair()
    text = save(model, report=report)
    loaded, metadata = load(text)
    assert save(loaded, metadata=metadata) == text


def test_save_load_save_fixpoint_linear():
    matrix = random_matrix(40, 2, seed=3)
    model, report = train_linear(
        matrix, chrono_split(matrix), LinearParams(n_rounds=10)
    )
    text = save(model, report=report)
    loaded, metadata = load(text)
    assert isinstance(loaded, LinearModel)
    assert save(loaded, metadata=metadata) == text
    assert_bitwise(loaded.weights, model.weights)
    assert loaded.bias == model.bias


def test_loaded_model_predicts_bitwise():
    matrix, model, report = trained_pair(seed=44)
    loaded, _ = load(save(model, report=report))
    rng = SplitMix64(77)
    probe = rng.normal_block(3000).reshape(1000, 3)
    assert_bitwise(predict(loaded, probe), predict(model, probe))


def test_equal_models_equal_bytes():
    _, model_a, _ = trained_pair(seed=5)
    _, model_b, _ = trained_pair(seed=5)
    assert save(model_a) == save(model_b)


def test_metadata_round_trip():
    model = stump_model()
    metadata = ModelMetadata(rounds_run=12, best_iteration=7, seed=42)
    loaded_meta = load(save(model, metadata=metadata))[1]
    assert loaded_meta == metadata


def test_metadata_derived_from_report():
    _, model, report = trained_pair(seed=9)
    doc = json.loads(save(model, report=report))
    assert doc["metadata"]["rounds_run"] == len(report.train_rmse)
    assert doc["metadata"]["seed"] == model.params.seed


def test_truncated_document_is_parse_error():
    text = save(stump_model())
    with pytest.raises(ParseError):
        load(text[: len(text) // 2])
    with pytest.raises(ParseError):
        load("")
    with pytest.raises(ParseError):
        load("[1, 2, 3]")


def test_format_version_checked_first():
    doc = json.loads(save(stump_model()))
    del doc["format_version"]
    # Break something else too: version must still win.
    doc["booster_kind"] = "nonsense"
    with pytest.raises(FormatVersionError):
        load(json.dumps(doc))


def test_unsupported_format_version():
    text = tamper(stump_model(), lambda d: d.update(format_version=2))
    with pytest.raises(FormatVersionError):
        load(text)


def test_unknown_booster_kind():
    text = tamper(stump_model(), lambda d: d.update(booster_kind="forest"))
    with pytest.raises(SchemaError):
        load(text)


def test_extra_top_level_key_rejected():
    text = tamper(stump_model(), lambda d: d.update(comment="hi"))
    with pytest.raises(IntegrityError):
        load(text)


def test_missing_trees_key_rejected():
    text = tamper(stump_model(), lambda d: d.pop("trees"))
    with pytest.raises(IntegrityError):
        load(text)


def test_child_out_of_range_names_the_node():
    text = tamper(
        stump_model(), lambda d: d["trees"][0]["right"].__setitem__(0, 9)
    )
    with pytest.raises(IntegrityError) as err:
        load(text)
    assert "tree 0 node 0" in str(err.value)


def test_child_must_follow_parent():
    def mutate(doc):
        node = doc["trees"][0]
        node["left"][0] = 0
    with pytest.raises(IntegrityError) as err:
        load(tamper(stump_model(), mutate))
    assert "follow" in str(err.value)


def test_leaf_children_must_be_minus_one():
    def mutate(doc):
        doc["trees"][0]["left"][1] = 2
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate))


def test_feature_index_beyond_width():
    def mutate(doc):
        doc["trees"][0]["feature"][0] = 2
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate))


def test_array_length_mismatch():
    def mutate(doc):
        doc["trees"][0]["weight"].append(0.0)
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate))


def test_non_finite_number_rejected():
    def mutate(doc):
        doc["trees"][0]["weight"][1] = "NaN"
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate))


def test_wrong_hyperparam_keys():
    def mutate(doc):
        doc["hyperparams"].pop("eta")
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate))

    def mutate_extra(doc):
        doc["hyperparams"]["zeta"] = 1.0
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate_extra))


def test_out_of_range_hyperparam_value():
    def mutate(doc):
        doc["hyperparams"]["eta"] = 5.0
    with pytest.raises(IntegrityError):
        load(tamper(stump_model(), mutate))


def test_linear_document_shape():
    model = LinearModel(
        weights=np.array([2.0, -1.0]),
        bias=0.25,
        feature_names=("a", "b"),
        target_mode=TargetMode.OFFSET,
        params=LinearParams(),
    )
    doc = json.loads(save(model))
    assert doc["booster_kind"] == "linear"
    assert doc["weights"] == [2.0, -1.0]
    assert doc["base_score"] == 0.25
    assert "trees" not in doc


def test_linear_weight_width_mismatch():
    model = LinearModel(
        weights=np.array([2.0]),
        bias=0.0,
        feature_names=("a",),
        target_mode=TargetMode.OFFSET,
        params=LinearParams(),
    )

    def mutate(doc):
        doc["weights"] = [1.0, 2.0]
    with pytest.raises(IntegrityError):
        load(tamper(model, mutate))
