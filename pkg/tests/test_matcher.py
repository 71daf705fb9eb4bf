"""Three-stage matcher: stage behavior, determinism, locality, group files."""

import json

import pytest

from crossfuzz.corpus import ApiRecord, Corpus, ParamSpec, load_corpus
from crossfuzz.matcher import (
    ApiGroup,
    GroupFormatError,
    MatchCandidate,
    MatchStats,
    build_groups,
    group_from_wire,
    group_to_wire,
    read_group_file,
    stage1_candidates,
    stage2_semantic_filter,
    stage3_structural_verify,
    write_group_file,
)
from crossfuzz.similarity import LexicalTfProvider, SimilarityScores, embed_record


def record(source, name, description="", types=()):
    params = tuple(
        ParamSpec(name=f"p{i}", raw_type=t, abstract_type=t, role="functional")
        for i, t in enumerate(types)
    )
    return ApiRecord(source, name, name.rsplit(".", 1)[-1].lower(), description, params)


def corpus(source, records):
    c = Corpus(source_id=source)
    for r in records:
        c.add(r)
    return c


def make_embed(records):
    provider = LexicalTfProvider([r.description for r in records])
    return lambda rec: embed_record(rec, provider)


class TestStage1:
    def test_threshold_inclusive(self):
        ref = record("a", "a.sort")
        target = corpus(
            "b",
            [
                record("b", "b.sort"),      # sim 1.0
                record("b", "b.sojt"),      # sim 0.75
                record("b", "b.stack"),     # below threshold
                record("b", "b.gelu"),      # far below
            ],
        )
        got = {c.candidate.qualified_name for c in stage1_candidates(ref, target)}
        assert got == {"b.sort", "b.sojt"}

    def test_exactly_half_survives(self):
        # "mul" vs "matmul": distance 3 over max length 6 -> similarity 0.5.
        ref = record("a", "a.mul")
        target = corpus("b", [record("b", "b.matmul")])
        got = stage1_candidates(ref, target)
        assert len(got) == 1
        assert got[0].scores.name_sim == pytest.approx(0.5)

    def test_compares_last_segment_only(self):
        ref = record("a", "a.nn.functional.softmax")
        target = corpus("b", [record("b", "b.math.Softmax")])
        got = stage1_candidates(ref, target)
        assert len(got) == 1
        assert got[0].scores.name_sim == 1.0


class TestStage2:
    def test_empty_input(self):
        assert stage2_semantic_filter([], lambda r: None) == []

    def test_no_signal_leader_drops_all(self):
        ref = record("a", "a.f", "sorts values")
        cands = [
            MatchCandidate(reference=ref, candidate=record("b", "b.f", ""), scores=SimilarityScores()),
            MatchCandidate(reference=ref, candidate=record("b", "b.g", ""), scores=SimilarityScores()),
        ]
        embed = make_embed([ref, cands[0].candidate, cands[1].candidate])
        assert stage2_semantic_filter(cands, embed) == []

    def test_single_candidate_survives(self):
        ref = record("a", "a.f", "sorts values along an axis")
        cand = record("b", "b.f", "sorts values along an axis")
        embed = make_embed([ref, cand])
        out = stage2_semantic_filter(stage1_candidates(ref, corpus("b", [cand])), embed)
        assert [c.candidate.qualified_name for c in out] == ["b.f"]
        assert out[0].stage_reached == 2

    def test_decisive_margin_keeps_top_one(self):
        ref = record("a", "a.fff", "alpha beta gamma delta")
        close = record("b", "b.fff", "alpha beta gamma delta")
        far = record("b", "b.ffg", "epsilon zeta")
        embed = make_embed([ref, close, far])
        out = stage2_semantic_filter(
            stage1_candidates(ref, corpus("b", [far, close])), embed
        )
        assert [c.candidate.qualified_name for c in out] == ["b.fff"]

    def test_indecisive_margin_keeps_top_three(self):
        # Runner-up shares 3 of the leader's 3 tokens in a 4-token text:
        # cosine 3/sqrt(12) ~ 0.866, a relative lead of ~0.134 < 0.3.
        ref = record("a", "a.fff", "alpha beta gamma")
        cands = [
            record("b", "b.ffa", "alpha beta gamma"),
            record("b", "b.ffb", "alpha beta gamma zeta"),
            record("b", "b.ffc", "alpha beta gamma eta"),
            record("b", "b.ffd", "alpha theta iota"),
        ]
        embed = make_embed([ref] + cands)
        out = stage2_semantic_filter(stage1_candidates(ref, corpus("b", cands)), embed)
        assert [c.candidate.qualified_name for c in out] == ["b.ffa", "b.ffb", "b.ffc"]

    def test_exact_tie_with_leader_never_cut(self):
        ref = record("a", "a.fff", "alpha beta gamma")
        # Four candidates tied exactly with the leader: all must survive.
        cands = [record("b", f"b.ff{ch}", "alpha beta gamma") for ch in "abcd"]
        embed = make_embed([ref] + cands)
        out = stage2_semantic_filter(stage1_candidates(ref, corpus("b", cands)), embed)
        assert len(out) == 4

    def test_rank_ties_break_by_name(self):
        ref = record("a", "a.fff", "alpha beta")
        cands = [record("b", f"b.ff{ch}", "alpha beta") for ch in "zya"]
        embed = make_embed([ref] + cands)
        out = stage2_semantic_filter(stage1_candidates(ref, corpus("b", cands)), embed)
        assert [c.candidate.qualified_name for c in out] == ["b.ffa", "b.ffy", "b.ffz"]


class TestStage3:
    def test_requires_exact_structure(self):
        ref = record("a", "a.f", "d", ["Tensor", "Int"])
        good = record("b", "b.f", "d", ["Tensor", "Int"])
        bad_count = record("b", "b.g", "d", ["Tensor"])
        bad_type = record("b", "b.h", "d", ["Tensor", "Float"])
        embed = make_embed([ref, good, bad_count, bad_type])
        cands = stage2_semantic_filter(
            stage1_candidates(ref, corpus("b", [bad_count, bad_type, good])), embed
        )
        best = stage3_structural_verify(cands)
        assert best is not None
        assert best.candidate.qualified_name == "b.f"
        assert best.accepted
        assert best.scores.param_sim == pytest.approx(2.0)

    def test_none_when_no_structure_agrees(self):
        ref = record("a", "a.f", "d", ["Tensor", "Int"])
        cand = record("b", "b.f", "d", ["Tensor"])
        embed = make_embed([ref, cand])
        cands = stage2_semantic_filter(stage1_candidates(ref, corpus("b", [cand])), embed)
        assert stage3_structural_verify(cands) is None

    def test_unknown_types_never_structurally_match(self):
        ref = record("a", "a.f", "d", ["Unknown"])
        cand = record("b", "b.f", "d", ["Unknown"])
        embed = make_embed([ref, cand])
        cands = stage2_semantic_filter(stage1_candidates(ref, corpus("b", [cand])), embed)
        assert stage3_structural_verify(cands) is None

    def test_tie_breaks_desc_then_name_then_lexicographic(self):
        ref = record("a", "a.sort", "orders elements", ["Tensor"])
        # Same description similarity; name similarities differ.
        near = record("b", "b.sort", "orders elements", ["Tensor"])
        far = record("b", "b.sorq", "orders elements", ["Tensor"])
        embed = make_embed([ref, near, far])
        cands = stage2_semantic_filter(
            stage1_candidates(ref, corpus("b", [far, near])), embed
        )
        best = stage3_structural_verify(cands)
        assert best.candidate.qualified_name == "b.sort"


class TestBuildGroups:
    def _demo(self, data_dir):
        return (
            load_corpus(data_dir / "demo" / "alpha.jsonl"),
            load_corpus(data_dir / "demo" / "beta.jsonl"),
        )

    def test_demo_matches_all_ten(self, data_dir):
        alpha, beta = self._demo(data_dir)
        provider = LexicalTfProvider.from_corpora([alpha, beta])
        stats = MatchStats()
        groups = build_groups(alpha, [beta], provider, stats=stats)
        assert stats.groups == len(groups) == 10
        for g in groups:
            assert len(g.members) == 2
            # Same operation on both sides: normalized names agree.
            assert g.members[0].normalized_name == g.members[1].normalized_name

    def test_duplicate_source_rejected(self, data_dir):
        alpha, _ = self._demo(data_dir)
        provider = LexicalTfProvider.from_corpora([alpha])
        with pytest.raises(ValueError):
            build_groups(alpha, [alpha], provider)

    def test_locality_distractors_do_not_change_groups(self, data_dir):
        """Adding far-away records to a target leaves existing groups intact."""
        alpha, beta = self._demo(data_dir)
        provider_before = LexicalTfProvider.from_corpora([alpha, beta])
        before = build_groups(alpha, [beta], provider_before)

        distractors = [
            record("beta", "beta.zzzzzzzz", "completely unrelated housekeeping utility"),
            record("beta", "beta.qqqqqqqq", "another unrelated bookkeeping helper"),
        ]
        grown = corpus("beta", list(beta.records) + distractors)
        provider_after = LexicalTfProvider.from_corpora([alpha, grown])
        after = build_groups(alpha, [grown], provider_after)

        key = lambda gs: [(g.group_id, g.sources, tuple(m.qualified_name for m in g.members)) for g in gs]
        assert key(before) == key(after)

    def test_fig_corpus_single_five_member_group(self, data_dir):
        sources = ["pytorch", "tensorflow", "keras", "chainer", "jax"]
        corpora = [load_corpus(data_dir / "frameworks_mini" / f"{s}.jsonl") for s in sources]
        provider = LexicalTfProvider.from_corpora(corpora)
        groups = build_groups(corpora[0], corpora[1:], provider)
        five = [g for g in groups if len(g.members) == 5]
        assert len(five) == 1
        assert all(m.normalized_name == "argsort" for m in five[0].members)


class TestGroupWire:
    def test_round_trip(self, tmp_path, data_dir):
        alpha = load_corpus(data_dir / "demo" / "alpha.jsonl")
        beta = load_corpus(data_dir / "demo" / "beta.jsonl")
        provider = LexicalTfProvider.from_corpora([alpha, beta])
        groups = build_groups(alpha, [beta], provider)
        from crossfuzz.align import align_groups

        aligned, diagnostics = align_groups(groups)
        assert diagnostics == []
        path = tmp_path / "groups.jsonl"
        write_group_file(aligned, path, provider)
        loaded = read_group_file(path)
        assert [g.group_id for g in loaded] == [g.group_id for g in aligned]
        for orig, back in zip(aligned, loaded):
            assert back.sources == orig.sources
            assert back.aligned is not None
            assert back.aligned.per_member_order == orig.aligned.per_member_order
            assert [p.canonical_name for p in back.aligned.canonical_params] == [
                p.canonical_name for p in orig.aligned.canonical_params
            ]
            for src, s in orig.scores.items():
                assert back.scores[src].name_sim == s.name_sim
                assert back.scores[src].desc_sim == s.desc_sim

    def test_wire_includes_pairwise_when_given(self):
        g = ApiGroup("a/a.f", (record("a", "a.f"), record("b", "b.f")))
        raw = group_to_wire(g, pairwise=[{"a": "a", "b": "b", "name_sim": 1.0}])
        assert raw["pairwise"][0]["name_sim"] == 1.0

    def test_malformed_record_raises(self):
        with pytest.raises(GroupFormatError):
            group_from_wire({"group_id": "x"})
        with pytest.raises(GroupFormatError):
            group_from_wire({"group_id": "x", "members": [{"source": "a"}]})

    def test_invalid_json_line_raises(self, tmp_path):
        path = tmp_path / "groups.jsonl"
        path.write_text("{not json}\n", encoding="utf-8")
        with pytest.raises(GroupFormatError):
            read_group_file(path)

    def test_duplicate_member_source_rejected(self):
        with pytest.raises(ValueError):
            ApiGroup("a/a.f", (record("a", "a.f"), record("a", "a.g")))
