"""Lexicon loading, weak labels, survey aggregation, dataset materialization."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from emomon import classify, ingest, labeling, textprep
from emomon.errors import ConflictingDuplicate, EmptyDataset
from conftest import SALT


def test_canonical_order():
    assert labeling.EMOTIONS == ("joy", "sadness", "fear", "anger", "surprise", "disgust")
    assert labeling.N_EMOTIONS == 6


def test_names_round_trip():
    labels = labeling.labels_from_names(["fear", "joy"])
    assert labels == (True, False, True, False, False, False)
    assert labeling.label_names(labels) == ["joy", "fear"]
    with pytest.raises(ValueError):
        labeling.labels_from_names(["happiness"])


class TestLexiconLoad:
    def test_terms_normalized(self, demo_lexicon):
        assert ("alegria",) in demo_lexicon.terms["joy"]
        assert ("panico",) in demo_lexicon.terms["fear"]

    def test_multiword_term(self, demo_lexicon):
        assert ("buena", "noticia") in demo_lexicon.terms["joy"]

    def test_all_emotions_present(self, demo_lexicon):
        assert set(demo_lexicon.terms) == set(labeling.EMOTIONS)

    def test_checksum_stable(self, demo_lexicon, data_dir):
        again = labeling.load_lexicon(data_dir / "lexicon_demo.csv")
        assert again.checksum() == demo_lexicon.checksum()
        assert len(demo_lexicon.checksum()) == 64

    def test_unknown_emotion_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("emotion,term\nhappiness,alegria\n", encoding="utf-8")
        with pytest.raises(ValueError):
            labeling.load_lexicon(path)

    def test_empty_term_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("emotion,term\njoy,...\n", encoding="utf-8")
        with pytest.raises(ValueError):
            labeling.load_lexicon(path)

    def test_duplicate_terms_collapse(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("emotion,term\njoy,feliz\njoy,FELIZ\n", encoding="utf-8")
        lex = labeling.load_lexicon(path)
        assert lex.terms["joy"] == (("feliz",),)


LEX = labeling.Lexicon(terms={"joy": (("alegria",), ("feliz",)), "fear": (("miedo",),)})


class TestWeakLabel:
    def test_joy(self):
        got = labeling.weak_label(["que", "alegria"], LEX)
        assert got == labeling.labels_from_names(["joy"])

    def test_none(self):
        assert labeling.weak_label(["hola"], LEX) == labeling.NO_LABELS

    def test_two_emotions(self):
        got = labeling.weak_label(["miedo", "feliz"], LEX)
        assert got == labeling.labels_from_names(["joy", "fear"])

    @given(st.lists(st.sampled_from(["alegria", "feliz", "miedo", "hola", "y"]), max_size=10))
    def test_equals_thresholded_lexicon_scores(self, words):
        assert labeling.weak_label(words, LEX) == classify.threshold(
            classify.classify_lexicon(words, LEX)
        )


def rec(tweet_id, annotator, *names):
    return labeling.AnnotationRecord(
        tweet_id=tweet_id, annotator_id=annotator, selected=labeling.labels_from_names(names)
    )


class TestAggregateAnnotations:
    def test_two_agree(self):
        got = labeling.aggregate_annotations(
            [rec("t1", "a", "joy"), rec("t1", "b", "joy"), rec("t1", "c", "fear")]
        )
        assert got == {"t1": labeling.labels_from_names(["joy"])}

    def test_single_below_threshold(self):
        got = labeling.aggregate_annotations([rec("t1", "a", "joy")])
        assert got == {"t1": labeling.NO_LABELS}

    def test_per_emotion_counting(self):
        got = labeling.aggregate_annotations(
            [rec("t1", "a", "joy", "fear"), rec("t1", "b", "fear")]
        )
        assert got == {"t1": labeling.labels_from_names(["fear"])}

    def test_identical_duplicate_collapses(self):
        got = labeling.aggregate_annotations(
            [rec("t1", "a", "joy"), rec("t1", "a", "joy"), rec("t1", "b", "joy")]
        )
        assert got == {"t1": labeling.labels_from_names(["joy"])}

    def test_conflicting_duplicate_raises(self):
        with pytest.raises(ConflictingDuplicate):
            labeling.aggregate_annotations([rec("t1", "a", "joy"), rec("t1", "a", "fear")])

    def test_min_agreement_one_is_union(self):
        got = labeling.aggregate_annotations(
            [rec("t1", "a", "joy"), rec("t1", "b", "fear")], min_agreement=1
        )
        assert got == {"t1": labeling.labels_from_names(["joy", "fear"])}

    @given(st.permutations(
        [rec("t1", "a", "joy"), rec("t1", "b", "joy"), rec("t2", "a", "fear"),
         rec("t2", "b", "surprise"), rec("t3", "c")]
    ))
    def test_permutation_invariant(self, records):
        expected = {
            "t1": labeling.labels_from_names(["joy"]),
            "t2": labeling.NO_LABELS,
            "t3": labeling.NO_LABELS,
        }
        assert labeling.aggregate_annotations(records) == expected

    def test_adding_record_is_monotone(self):
        base = [rec("t1", "a", "joy"), rec("t1", "b", "joy")]
        before = labeling.aggregate_annotations(base)
        after = labeling.aggregate_annotations(base + [rec("t1", "c", "fear")])
        for i, was_true in enumerate(before["t1"]):
            if was_true:
                assert after["t1"][i]


class TestBuildTrainingSet:
    def test_counts_and_exclusion(self, corpus_store, demo_lexicon):
        examples, pos = labeling.build_training_set(corpus_store, demo_lexicon, remove_lexicons=False)
        assert len(examples) == 7  # one stored tweet has no lexicon match
        by_id = {ex.tweet_id: ex for ex in examples}
        assert "t07" not in by_id
        assert by_id["t01"].labels == labeling.labels_from_names(["joy"])
        assert by_id["t05"].labels == labeling.labels_from_names(["anger", "disgust"])
        assert pos == [2, 1, 2, 1, 1, 1]

    def test_remove_lexicons_fixed_point(self, corpus_store, demo_lexicon):
        examples, _ = labeling.build_training_set(corpus_store, demo_lexicon, remove_lexicons=True)
        for ex in examples:
            spans = demo_lexicon.matcher.match(list(ex.words))
            assert all(v == [] for v in spans.values())

    def test_empty_store(self, tmp_path, demo_lexicon):
        store = ingest.CorpusStore(tmp_path / "empty")
        with pytest.raises(EmptyDataset):
            labeling.build_training_set(store, demo_lexicon, remove_lexicons=False)


class TestDatasetFile:
    def test_round_trip(self, corpus_store, demo_lexicon, tmp_path):
        examples, _ = labeling.build_training_set(corpus_store, demo_lexicon, remove_lexicons=True)
        path = tmp_path / "dataset.ndjson"
        labeling.save_dataset(examples, path)
        again = labeling.load_dataset(path)
        assert again == examples

    def test_file_shape(self, tmp_path):
        import json

        path = tmp_path / "d.ndjson"
        ex = labeling.DatasetExample(
            tweet_id="x1", words=("hola", "!"), labels=labeling.labels_from_names(["joy"])
        )
        labeling.save_dataset([ex], path)
        doc = json.loads(path.read_text().splitlines()[0])
        assert doc == {"tweet_id": "x1", "words": ["hola", "!"], "labels": [1, 0, 0, 0, 0, 0]}
