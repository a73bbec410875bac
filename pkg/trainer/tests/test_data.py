import json

import pytest

from relevance_trainer.data import DatasetError, Record, balanced_batches, load_records
from relevance_trainer.vocab import EOS, UNK, Vocab, tokenize


class TestVocab:
    def test_tokenize_words_and_punctuation(self):
        assert tokenize("Is it relevant? yes-ish.") == [
            "is", "it", "relevant", "?", "yes", "-", "ish", ".",
        ]

    def test_build_is_sorted_and_stable(self):
        a = Vocab.build(["b a", "c a"])
        b = Vocab.build(["c b", "a"])
        assert a.itos == b.itos

    def test_encode_appends_eos(self):
        v = Vocab.build(["alpha beta"])
        ids = v.encode("alpha beta", max_len=10)
        assert ids[-1] == EOS
        assert len(ids) == 3

    def test_tail_truncation_keeps_head(self):
        v = Vocab.build(["a b c d e"])
        ids = v.encode("a b c d e", max_len=3)
        assert len(ids) == 3
        assert ids[:2] == [v.token_id("a"), v.token_id("b")]
        assert ids[-1] == EOS

    def test_unknown_token(self):
        v = Vocab.build(["known"])
        assert v.token_id("unseen") == UNK

    def test_roundtrip_serialization(self):
        v = Vocab.build(["some words here"])
        assert Vocab.from_list(v.to_list()).itos == v.itos


class TestLoadRecords:
    def test_parses_labels(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        path.write_text(
            json.dumps({"source": "s1", "target": "true. Explanation: yes"}) + "\n"
            + json.dumps({"source": "s2", "target": "false"}) + "\n"
        )
        records = load_records(path)
        assert [r.relevant for r in records] == [True, False]

    def test_unparseable_label_aborts_with_row(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        path.write_text(
            json.dumps({"source": "s", "target": "true. fine"}) + "\n"
            + json.dumps({"source": "s", "target": "maybe?"}) + "\n"
        )
        with pytest.raises(DatasetError, match="row 2"):
            load_records(path)

    def test_malformed_json_aborts_with_row(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        path.write_text('{"source": "s"\n')
        with pytest.raises(DatasetError, match="row 1"):
            load_records(path)

    def test_both_variants_same_code_path(self, tmp_path):
        expl = tmp_path / "expl.jsonl"
        labels = tmp_path / "labels.jsonl"
        expl.write_text(json.dumps(
            {"source": "s", "target": "true. Explanation: because"}) + "\n")
        labels.write_text(json.dumps({"source": "s", "target": "true"}) + "\n")
        assert load_records(expl)[0].relevant is True
        assert load_records(labels)[0].relevant is True


def rec(i, relevant):
    return Record(source=f"s{i}", target="true" if relevant else "false", relevant=relevant)


class TestBalancedBatches:
    def test_every_batch_half_and_half(self):
        records = [rec(i, True) for i in range(3)] + [rec(i, False) for i in range(3)]
        batches = list(balanced_batches(records, batch_size=2, seed=0, epoch=1))
        assert len(batches) == 3
        for batch in batches:
            assert sum(r.relevant for r in batch) == 1
            assert sum(not r.relevant for r in batch) == 1

    def test_epoch_changes_order(self):
        records = [rec(i, True) for i in range(8)] + [rec(i, False) for i in range(8)]
        e1 = [r.source for b in balanced_batches(records, 4, seed=0, epoch=1) for r in b]
        e2 = [r.source for b in balanced_batches(records, 4, seed=0, epoch=2) for r in b]
        assert sorted(e1) == sorted(e2)
        assert e1 != e2

    def test_seeded_determinism(self):
        records = [rec(i, True) for i in range(8)] + [rec(i, False) for i in range(8)]
        a = [r.source for b in balanced_batches(records, 4, seed=5, epoch=3) for r in b]
        b = [r.source for b in balanced_batches(records, 4, seed=5, epoch=3) for r in b]
        assert a == b

    def test_unequal_classes_oversampled_with_warning(self, caplog):
        records = [rec(i, True) for i in range(2)] + [rec(i, False) for i in range(6)]
        with caplog.at_level("WARNING"):
            batches = list(balanced_batches(records, 2, seed=0, epoch=1))
        assert "oversampling" in caplog.text
        assert len(batches) == 6  # smaller class stretched to the larger
        for batch in batches:
            assert sum(r.relevant for r in batch) == 1

    def test_single_class_rejected(self):
        with pytest.raises(DatasetError):
            list(balanced_batches([rec(0, True)], 2, seed=0, epoch=1))

    def test_odd_batch_size_rejected(self):
        records = [rec(0, True), rec(1, False)]
        with pytest.raises(ValueError):
            list(balanced_batches(records, 3, seed=0, epoch=1))
