"""Similarity formulas: frozen expected values plus structural properties."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossfuzz.similarity import (
    EmbeddingVector,
    LexicalTfProvider,
    PrecomputedProvider,
    ProviderConfigError,
    ProviderLookupError,
    ProviderMismatchError,
    SimilarityScores,
    count_similarity,
    description_similarity,
    levenshtein,
    name_similarity,
    param_components,
    type_similarity,
)
from crossfuzz.corpus import ApiRecord, ParamSpec

short = st.text(alphabet="abcdefgxyz", max_size=10)


def api(types, source="s", name="s.f"):
    params = tuple(
        ParamSpec(name=f"p{i}", raw_type=t, abstract_type=t, role="functional")
        for i, t in enumerate(types)
    )
    return ApiRecord(source, name, "f", "", params)


class TestLevenshtein:
    # Frozen values, checked by hand against the DP recurrence.
    @pytest.mark.parametrize(
        "a,b,d",
        [
            ("softmax", "softmin", 2),
            ("argsort", "argsort", 0),
            ("", "abc", 3),
            ("kitten", "sitting", 3),
            ("add", "angle", 4),
            ("mul", "matmul", 3),
        ],
    )
    def test_frozen(self, a, b, d):
        assert levenshtein(a, b) == d

    @given(short, short)
    def test_symmetry(self, a, b):
        assert levenshtein(a, b) == levenshtein(b, a)

    @given(short, short)
    def test_bounds(self, a, b):
        d = levenshtein(a, b)
        assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))

    @given(short)
    def test_identity(self, a):
        assert levenshtein(a, a) == 0


class TestNameSimilarity:
    def test_frozen(self):
        assert name_similarity("softmax", "softmin") == pytest.approx(5 / 7)
        assert name_similarity("argsort", "argsort") == 1.0
        assert name_similarity("", "") == 1.0
        assert name_similarity("abc", "") == 0.0

    @given(short, short)
    def test_unit_interval_and_symmetry(self, a, b):
        s = name_similarity(a, b)
        assert 0.0 <= s <= 1.0
        assert s == name_similarity(b, a)


class TestDescriptionSimilarity:
    def test_tf_cosine_frozen(self):
        # Unit TF vectors over {sorts, tensor, axis} and {sorts, array, axis}
        # share 2 of 3 tokens: cosine is exactly 2/3.
        provider = LexicalTfProvider(["sorts tensor axis", "sorts array axis"])
        a = provider.embed("sorts tensor axis")
        b = provider.embed("sorts array axis")
        assert description_similarity(a, b) == pytest.approx(2 / 3)

    def test_zero_norm_compares_as_zero(self):
        provider = LexicalTfProvider(["alpha beta"])
        a = provider.embed("alpha beta")
        empty = provider.embed("")
        assert description_similarity(a, empty) == 0.0
        assert description_similarity(empty, empty) == 0.0

    def test_provider_mismatch_rejected(self):
        a = EmbeddingVector(np.ones(3), "p1")
        b = EmbeddingVector(np.ones(3), "p2")
        with pytest.raises(ProviderMismatchError):
            description_similarity(a, b)

    def test_tokenization_strips_punctuation_and_case(self):
        provider = LexicalTfProvider(["Sorts, the TENSOR."])
        a = provider.embed("Sorts, the TENSOR.")
        b = provider.embed("sorts the tensor")
        assert description_similarity(a, b) == pytest.approx(1.0)

    @given(st.lists(st.sampled_from(["sort", "axis", "mean", "pad"]), min_size=1, max_size=6),
           st.lists(st.sampled_from(["sort", "axis", "mean", "pad"]), min_size=1, max_size=6))
    def test_unit_interval(self, ta, tb):
        provider = LexicalTfProvider(["sort axis mean pad"])
        s = description_similarity(provider.embed(" ".join(ta)), provider.embed(" ".join(tb)))
        assert -1e-12 <= s <= 1.0 + 1e-12


class TestPrecomputedProvider:
    def test_lookup(self, tmp_path):
        p = tmp_path / "vecs.jsonl"
        rows = [
            {"source": "a", "name": "a.f", "vector": [1.0, 0.0]},
            {"source": "b", "name": "b.f", "vector": [0.0, 1.0]},
        ]
        p.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        provider = PrecomputedProvider(p)
        va = provider.embed("ignored", source="a", name="a.f")
        vb = provider.embed("ignored", source="b", name="b.f")
        assert description_similarity(va, vb) == pytest.approx(0.0)
        with pytest.raises(ProviderLookupError):
            provider.embed("", source="a", name="a.missing")
        with pytest.raises(ProviderConfigError):
            provider.embed("", source=None, name=None)

    def test_ragged_vectors_rejected(self, tmp_path):
        p = tmp_path / "vecs.jsonl"
        rows = [
            {"source": "a", "name": "a.f", "vector": [1.0, 0.0]},
            {"source": "a", "name": "a.g", "vector": [1.0]},
        ]
        p.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        with pytest.raises(ProviderConfigError):
            PrecomputedProvider(p)


class TestParamSimilarity:
    def test_count_frozen(self):
        assert count_similarity(1, 3) == pytest.approx(1 / 3)
        assert count_similarity(0, 0) == 1.0
        assert count_similarity(2, 2) == 1.0
        assert count_similarity(0, 5) == 0.0

    def test_count_rejects_negative(self):
        with pytest.raises(ValueError):
            count_similarity(-1, 2)

    def test_type_frozen(self):
        assert type_similarity(("Tensor", "Int", "Bool"), ("Tensor", "Int")) == pytest.approx(2 / 3)
        assert type_similarity((), ()) == 1.0
        assert type_similarity(("Unknown",), ("Unknown",)) == 0.0  # Unknown never matches

    def test_components_frozen(self):
        a = api(["Tensor", "Int"])
        b = api(["Tensor", "Int", "Bool"])
        count, types = param_components(a, b)
        assert count == pytest.approx(2 / 3)
        assert types == pytest.approx(2 / 3)
        assert count + types == pytest.approx(4 / 3)

    def test_perfect_match_scores_two(self):
        a = api(["Tensor", "Int"])
        b = api(["Tensor", "Int"])
        count, types = param_components(a, b)
        assert count + types == pytest.approx(2.0)

    types_strategy = st.lists(
        st.sampled_from(["Tensor", "Int", "Float", "Bool", "Shape", "Unknown"]), max_size=6
    )

    @given(types_strategy, types_strategy)
    def test_bounds_and_symmetry(self, ta, tb):
        c = count_similarity(len(ta), len(tb))
        t = type_similarity(ta, tb)
        assert 0.0 <= c <= 1.0 and 0.0 <= t <= 1.0
        assert c == count_similarity(len(tb), len(ta))
        assert t == type_similarity(tb, ta)

    def test_scores_sum_property(self):
        s = SimilarityScores(name_sim=0.5, desc_sim=0.5, count_sim=0.75, type_sim=0.5)
        assert s.param_sim == pytest.approx(1.25)
