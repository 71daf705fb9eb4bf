"""Corpus loading, name normalization, parameter roles, type mapping."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossfuzz.corpus import (
    CONTROL,
    FUNCTIONAL,
    CorpusFormatError,
    classify_param_name,
    load_corpus,
    map_abstract_type,
    normalize_api_name,
)


def write_corpus(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def record(name="lib.op", params=None, source="lib", description="Does a thing."):
    return {
        "source": source,
        "name": name,
        "description": description,
        "params": params if params is not None else [{"name": "x", "type": "Tensor"}],
    }


class TestNormalize:
    def test_last_segment_lowercased(self):
        assert normalize_api_name("torch.linalg.Cholesky") == "cholesky"
        assert normalize_api_name("ArgSort") == "argsort"

    def test_idempotent(self):
        n = normalize_api_name("tf.math.reduce_sum")
        assert normalize_api_name(n) == n


class TestClassify:
    @pytest.mark.parametrize(
        "name",
        ["name", "device", "dtype", "seed", "stable", "verbose", "direction",
         "ascending", "descending", "output_shape", "validate_shape", "jit",
         "compile", "layout", "autocast", "debug", "log_level", "deterministic"],
    )
    def test_keywords_are_control(self, name):
        assert classify_param_name(name) == CONTROL

    @pytest.mark.parametrize(
        "name,expected",
        [
            ("layer_name", CONTROL),       # trailing suffix "name"
            ("random_seed", CONTROL),
            ("target_device", CONTROL),
            ("OUTPUT_DTYPE", CONTROL),     # case-insensitive
            ("x", FUNCTIONAL),
            ("input", FUNCTIONAL),
            ("axis", FUNCTIONAL),
            ("shape", FUNCTIONAL),         # bare shape carries data (reshape)
            ("min", FUNCTIONAL),
            ("namespace", FUNCTIONAL),     # substring without suffix boundary
            ("seeded", FUNCTIONAL),
        ],
    )
    def test_suffix_and_negatives(self, name, expected):
        assert classify_param_name(name) == expected

    @given(st.text(alphabet="abcdefgh_", min_size=1, max_size=20))
    def test_deterministic(self, name):
        assert classify_param_name(name) == classify_param_name(name)


class TestTypeMap:
    @pytest.mark.parametrize(
        "source,raw,expected",
        [
            ("pytorch", "Tensor", "Tensor"),
            ("pytorch", "List", "Shape"),
            ("tensorflow", "Tensor", "Tensor"),
            ("tensorflow", "Tuple", "Shape"),
            ("keras", "Tensor", "Tensor"),
            ("chainer", "Variable", "Tensor"),
            ("chainer", "Sequence", "Shape"),
            ("jax", "Array", "Tensor"),
            ("jax", "List", "Shape"),
            ("any", "int", "Int"),
            ("any", "float", "Float"),
            ("any", "bool", "Bool"),
            ("any", "str", "String"),
            ("any", "complex", "Complex"),
            ("any", "callable", "Unknown"),
            ("any", "whatever_thing", "Unknown"),
        ],
    )
    def test_rows(self, source, raw, expected):
        assert map_abstract_type(source, raw) == expected

    def test_override_wins(self):
        overrides = {"lib": {"mystery": "Tensor"}}
        assert map_abstract_type("lib", "Mystery", overrides) == "Tensor"
        assert map_abstract_type("otherlib", "Mystery", overrides) == "Unknown"


class TestLoad:
    def test_demo_corpus(self, data_dir):
        corpus = load_corpus(data_dir / "demo" / "alpha.jsonl")
        assert corpus.source_id == "alpha"
        assert len(corpus) == 10
        argsort = corpus.get("alpha.argsort")
        assert argsort is not None
        assert argsort.normalized_name == "argsort"
        types = [p.abstract_type for p in argsort.functional_params]
        assert types == ["Tensor", "Int"]

    def test_control_params_excluded_from_functional(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_corpus(
            p,
            [record(params=[
                {"name": "input", "type": "Tensor"},
                {"name": "seed", "type": "int"},
                {"name": "dim", "type": "int"},
            ])],
        )
        rec = load_corpus(p).records[0]
        assert [q.name for q in rec.functional_params] == ["input", "dim"]
        assert [q.role for q in rec.params] == [FUNCTIONAL, CONTROL, FUNCTIONAL]

    def test_default_flag(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_corpus(p, [record(params=[
            {"name": "x", "type": "Tensor"},
            {"name": "axis", "type": "int", "default": -1},
        ])])
        rec = load_corpus(p).records[0]
        assert [q.has_default for q in rec.params] == [False, True]

    @pytest.mark.parametrize(
        "mutant",
        [
            {"name": "lib.op"},                              # missing fields
            {**record(), "params": "oops"},                  # params not a list
            {**record(), "name": ""},                        # empty name
            {**record(), "name": "lib.op."},                 # normalizes to empty
            {**record(), "params": [{"name": "x"}]},         # param missing type
            {**record(), "source": 3},                       # source not a string
        ],
    )
    def test_malformed_records(self, tmp_path, mutant):
        p = tmp_path / "bad.jsonl"
        write_corpus(p, [mutant])
        with pytest.raises(CorpusFormatError):
            load_corpus(p)

    def test_invalid_json_line(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text("{not json\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            load_corpus(p)

    def test_duplicate_names_rejected(self, tmp_path):
        p = tmp_path / "dup.jsonl"
        write_corpus(p, [record(), record()])
        with pytest.raises(CorpusFormatError, match="duplicate"):
            load_corpus(p)

    def test_mixed_sources_rejected(self, tmp_path):
        p = tmp_path / "mix.jsonl"
        write_corpus(p, [record(source="a"), record(name="b.op", source="b")])
        with pytest.raises(CorpusFormatError):
            load_corpus(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_text("", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="no records"):
            load_corpus(p)
