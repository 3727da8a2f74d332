import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtforge.corpus import (
    REGISTRY,
    DirectionGroup,
    Document,
    ParallelPair,
    classify_direction,
    read_corpus,
    segment_tokens,
    with_score,
    write_corpus,
)
from mtforge.errors import SchemaError, ValidationError


class TestRegistry:
    def test_known_tags_present(self):
        for tag in ("zh", "en", "bo", "kk", "yue", "zh-Hant", "mn", "ug"):
            assert tag in REGISTRY

    def test_size(self):
        assert len(REGISTRY) == 38
        assert len(set(REGISTRY)) == len(REGISTRY)

    def test_case_sensitive(self):
        with pytest.raises(ValidationError):
            classify_direction("ZH", "en")


class TestClassifyDirection:
    def test_zh_to_other(self):
        assert classify_direction("zh", "fr") is DirectionGroup.ZH_TO_XX

    def test_other_to_other(self):
        assert classify_direction("fr", "de") is DirectionGroup.XX_TO_XX

    def test_zh_en_precedence(self):
        assert classify_direction("zh", "en") is DirectionGroup.ZH_TO_XX
        assert classify_direction("en", "zh") is DirectionGroup.XX_TO_ZH

    def test_sinitic_variants_are_not_zh(self):
        assert classify_direction("zh-Hant", "fr") is DirectionGroup.XX_TO_XX
        assert classify_direction("yue", "en") is DirectionGroup.XX_TO_EN
        assert classify_direction("zh", "yue") is DirectionGroup.ZH_TO_XX

    def test_total_and_disjoint_over_all_pairs(self):
        counts = {group: 0 for group in DirectionGroup}
        for src in REGISTRY:
            for tgt in REGISTRY:
                if src == tgt:
                    continue
                counts[classify_direction(src, tgt)] += 1
        n = len(REGISTRY)
        assert sum(counts.values()) == n * (n - 1)
        assert counts[DirectionGroup.ZH_TO_XX] == n - 1
        assert counts[DirectionGroup.XX_TO_ZH] == n - 1
        assert counts[DirectionGroup.EN_TO_XX] == n - 2
        assert counts[DirectionGroup.XX_TO_EN] == n - 2

    def test_same_language_rejected(self):
        with pytest.raises(ValidationError):
            classify_direction("fr", "fr")

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValidationError):
            classify_direction("xx", "en")


class TestRecordValidation:
    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError):
            Document(id="d1", lang="en", text="   ")

    def test_same_langs_rejected(self):
        with pytest.raises(ValidationError):
            ParallelPair(id="p1", src_lang="en", tgt_lang="en", src_text="a", tgt_text="b")

    def test_bad_provenance_rejected(self):
        with pytest.raises(ValidationError):
            Document(id="d1", lang="en", text="hello", provenance="wiki")

    def test_with_score_copies(self):
        doc = Document(id="d1", lang="en", text="hello")
        scored = with_score(doc, "ppl", 3.5)
        assert scored.scores == {"ppl": 3.5}
        assert doc.scores == {}


class TestCorpusIo:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_corpus(path, "mono") == []

    def test_three_lines_in_order(self, tmp_path):
        docs = [Document(id=f"d{i}", lang="en", text=f"text {i}") for i in range(3)]
        path = tmp_path / "c.jsonl"
        assert write_corpus(docs, path) == 3
        assert read_corpus(path, "mono") == docs

    def test_round_trip_counts_10k(self, tmp_path):
        docs = [Document(id=f"d{i}", lang="en", text=f"line {i}") for i in range(10_000)]
        path = tmp_path / "big.jsonl"
        assert write_corpus(docs, path) == 10_000
        with open(path, encoding="utf-8") as handle:
            assert sum(1 for _ in handle) == 10_000
        assert read_corpus(path, "mono") == docs

    def test_write_empty(self, tmp_path):
        path = tmp_path / "none.jsonl"
        assert write_corpus([], path) == 0
        assert path.read_text() == ""

    def test_schema_error_names_line(self, tmp_path):
        rows = [
            {"id": "p1", "src_lang": "en", "tgt_lang": "fr", "src_text": "a", "tgt_text": "b"},
            {"id": "p2", "src_lang": "de", "tgt_lang": "de", "src_text": "a", "tgt_text": "b"},
        ]
        path = tmp_path / "pairs.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        with pytest.raises(SchemaError, match="line 2"):
            read_corpus(path, "parallel")

    def test_unknown_language_named_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"id": "d1", "lang": "klingon", "text": "x"}) + "\n")
        with pytest.raises(SchemaError, match="line 1"):
            read_corpus(path, "mono")

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"id": "d1", "lang": "en", "text": "x", "extra": 1}) + "\n")
        with pytest.raises(SchemaError):
            read_corpus(path, "mono")

    def test_duplicate_id_rejected(self, tmp_path):
        docs = [Document(id="dup", lang="en", text="a"), Document(id="dup", lang="fr", text="b")]
        path = tmp_path / "c.jsonl"
        path.write_text("\n".join(json.dumps(obj) for obj in (
            {"id": d.id, "lang": d.lang, "text": d.text} for d in docs)) + "\n")
        with pytest.raises(SchemaError, match="line 2"):
            read_corpus(path, "mono")


_text = st.text(min_size=1, max_size=60).filter(lambda s: s.strip())
_ids = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")), min_size=1, max_size=12
)
_scores = st.dictionaries(
    st.sampled_from(["ppl", "qe", "chrf"]),
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    max_size=3,
)


@st.composite
def documents(draw):
    return Document(
        id=draw(_ids),
        lang=draw(st.sampled_from(REGISTRY)),
        text=draw(_text),
        provenance=draw(st.sampled_from(["academic", "book", "professional_web", "general_web", "other"])),
        scores=draw(_scores),
        tags=frozenset(draw(st.lists(st.sampled_from(["law", "news", "med"]), max_size=3))),
    )


@st.composite
def parallel_pairs(draw):
    src = draw(st.sampled_from(REGISTRY))
    tgt = draw(st.sampled_from([t for t in REGISTRY if t != src]))
    return ParallelPair(
        id=draw(_ids),
        src_lang=src,
        tgt_lang=tgt,
        src_text=draw(_text),
        tgt_text=draw(_text),
        scores=draw(_scores),
    )


class TestRoundTripProperties:
    @settings(max_examples=60, deadline=None)
    @given(docs=st.lists(documents(), max_size=8))
    def test_mono_round_trip(self, tmp_path_factory, docs):
        unique = list({d.id: d for d in docs}.values())
        path = tmp_path_factory.mktemp("rt") / "docs.jsonl"
        write_corpus(unique, path)
        assert read_corpus(path, "mono") == unique

    @settings(max_examples=60, deadline=None)
    @given(pairs=st.lists(parallel_pairs(), max_size=8))
    def test_parallel_round_trip(self, tmp_path_factory, pairs):
        unique = list({p.id: p for p in pairs}.values())
        path = tmp_path_factory.mktemp("rt") / "pairs.jsonl"
        write_corpus(unique, path)
        assert read_corpus(path, "parallel") == unique


class TestSegmentTokens:
    def test_whitespace_script(self):
        assert segment_tokens("the quick  fox", "en") == ["the", "quick", "fox"]

    def test_codepoint_script(self):
        assert segment_tokens("你好 世界", "zh") == ["你", "好", "世", "界"]

    def test_tibetan_codepoints(self):
        tokens = segment_tokens("བཀྲ་ཤིས", "bo")
        assert len(tokens) == len("བཀྲ་ཤིས")
