"""Corpus loading, validation, synthetic generation and the user split."""

import numpy as np
import pytest

import factcrs as fc


def _write_corpus(path, attributes, items, interactions):
    path.mkdir(parents=True, exist_ok=True)
    (path / "attributes.tsv").write_text(
        "".join(f"{i}\t{name}\n" for i, name in enumerate(attributes)))
    (path / "items.tsv").write_text(
        "".join(f"{i}\t{spec}\n" for i, spec in enumerate(items)))
    (path / "interactions.tsv").write_text(
        "".join(f"{u}\t{i}\t{m}\n" for u, i, m in interactions))


class TestLoadDataset:
    def test_round_trip(self, tmp_path, tiny_corpus):
        dataset, _ = tiny_corpus
        fc.save_dataset(dataset, tmp_path / "c")
        again = fc.load_dataset(tmp_path / "c")
        assert again.vocabulary.names == dataset.vocabulary.names
        assert again.item_attributes == dataset.item_attributes
        assert np.array_equal(again.users, dataset.users)
        assert np.array_equal(again.items, dataset.items)
        assert np.array_equal(again.mentions, dataset.mentions)
        assert again.n_users == dataset.n_users

    def test_missing_file_named(self, tmp_path):
        with pytest.raises(fc.DataFormatError, match="attributes.tsv"):
            fc.load_dataset(tmp_path)

    def test_non_dense_attribute_ids(self, tmp_path):
        _write_corpus(tmp_path / "c", ["a"], ["0"], [])
        (tmp_path / "c" / "attributes.tsv").write_text("0\ta\n2\tb\n")
        with pytest.raises(fc.DataFormatError, match="attributes.tsv:2"):
            fc.load_dataset(tmp_path / "c")

    def test_unknown_item_in_interactions(self, tmp_path):
        _write_corpus(tmp_path / "c", ["a"], ["0"], [(0, 5, "")])
        with pytest.raises(fc.DataFormatError, match="interactions.tsv:1"):
            fc.load_dataset(tmp_path / "c")

    def test_unknown_attribute_in_items(self, tmp_path):
        _write_corpus(tmp_path / "c", ["a"], ["3"], [])
        with pytest.raises(fc.DataFormatError, match="unknown attribute id 3"):
            fc.load_dataset(tmp_path / "c")

    def test_malformed_id(self, tmp_path):
        _write_corpus(tmp_path / "c", ["a"], ["0"], [("x", 0, "")])
        with pytest.raises(fc.DataFormatError, match="malformed"):
            fc.load_dataset(tmp_path / "c")

    def test_empty_mentions_allowed(self, tmp_path):
        _write_corpus(tmp_path / "c", ["a", "b"], ["0,1", ""], [(0, 0, "")])
        dataset = fc.load_dataset(tmp_path / "c")
        assert dataset.n_records == 1
        assert dataset.record(0).mentioned_attributes == frozenset()

    def test_duplicate_labels_rejected(self, tmp_path):
        _write_corpus(tmp_path / "c", ["a", "a"], ["0"], [])
        with pytest.raises(fc.DataFormatError, match="unique"):
            fc.load_dataset(tmp_path / "c")


class TestValidation:
    def test_counts_quiet_and_noisy_records(self, tmp_path):
        # item 0 owns attribute 0 only; record 2 mentions attribute 1 anyway
        _write_corpus(tmp_path / "c", ["a", "b"], ["0", "1"],
                      [(0, 0, "0"), (1, 0, ""), (2, 0, "0,1")])
        dataset = fc.load_dataset(tmp_path / "c")
        assert dataset.validation.n_empty_mentions == 1
        assert dataset.validation.n_mentions_outside_item == 1

    def test_records_of_users_keeps_file_order(self, tiny_corpus):
        dataset, _ = tiny_corpus
        idx = dataset.records_of_users([3, 7])
        assert np.all(np.diff(idx) > 0)
        assert set(dataset.users[idx].tolist()) <= {3, 7}

    def test_interacted_items_sorted_unique(self, tiny_corpus):
        dataset, _ = tiny_corpus
        got = dataset.interacted_items(int(dataset.users[0]))
        assert np.all(np.diff(got) > 0)
        expected = np.unique(dataset.items[dataset.users == dataset.users[0]])
        assert np.array_equal(got, expected)


class TestSynthetic:
    def test_shapes_and_determinism(self, tiny_corpus):
        dataset, planted = tiny_corpus
        again, planted2 = fc.generate_synthetic(
            fc.SyntheticSpec(n_users=12, n_items=10, n_attributes=5,
                             n_records=120, depth=2, noise=0.0, seed=3))
        assert dataset.n_records == 120
        assert planted2.level_attributes == planted.level_attributes
        assert np.array_equal(again.mentions, dataset.mentions)
        assert np.array_equal(again.items, dataset.items)

    def test_level_attributes_distinct(self, bench_corpus):
        _, planted = bench_corpus
        assert len(set(planted.level_attributes)) == len(planted.level_attributes)

    def test_root_split_is_exactly_balanced(self, bench_corpus):
        dataset, planted = bench_corpus
        root = planted.root_attribute
        on_root = sum(1 for attrs in dataset.item_attributes if root in attrs)
        assert on_root == dataset.n_items // 2

    def test_deeper_levels_follow_planted_shares(self, bench_corpus):
        _, planted = bench_corpus
        n = planted.item_bits.shape[0]
        for level in range(planted.item_bits.shape[1]):
            share = max(0.5 - 0.08 * level, 0.2)
            assert planted.item_bits[:, level].sum() == round(n * share)

    def test_noise_free_mentions_copy_item_mask(self, bench_corpus):
        dataset, _ = bench_corpus
        for r in (0, 17, 799):
            item = int(dataset.items[r])
            assert (dataset.record(r).mentioned_attributes
                    == dataset.item_attributes[item])

    def test_full_coverage_when_records_suffice(self, bench_corpus):
        dataset, _ = bench_corpus
        assert set(dataset.users.tolist()) == set(range(dataset.n_users))
        assert set(dataset.items.tolist()) == set(range(dataset.n_items))

    def test_leaf_codes_enumerate_planted_cells(self, bench_corpus):
        dataset, planted = bench_corpus
        codes = {planted.leaf_of_item(i) for i in range(dataset.n_items)}
        assert codes <= set(range(2 ** len(planted.level_attributes)))

    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError, match="depth"):
            fc.generate_synthetic(fc.SyntheticSpec(4, 4, 3, 10, depth=4))
        with pytest.raises(ValueError, match="noise"):
            fc.generate_synthetic(fc.SyntheticSpec(4, 4, 3, 10, depth=2, noise=1.5))


def _empty_dataset(n_users):
    vocab = fc.AttributeVocabulary(("a",))
    return fc.Dataset(n_users, 1, vocab, [frozenset()],
                      np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                      np.zeros((0, 1), dtype=np.uint8))


class TestSplit:
    def test_1801_users_cut_1440_180_181(self):
        # floor(0.8 * 1801) = 1440, floor(0.1 * 1801) = 180, remainder 181
        split = fc.split_by_user(_empty_dataset(1801), seed=0)
        assert split.train_users.size == 1440
        assert split.validation_users.size == 180
        assert split.test_users.size == 181

    def test_partition_is_exact(self):
        split = fc.split_by_user(_empty_dataset(37), seed=9)
        parts = [split.train_users, split.validation_users, split.test_users]
        merged = np.concatenate(parts)
        assert merged.size == 37
        assert np.array_equal(np.sort(merged), np.arange(37))
        for part in parts:
            assert np.all(np.diff(part) > 0)

    def test_deterministic_and_seed_sensitive(self):
        a = fc.split_by_user(_empty_dataset(50), seed=1)
        b = fc.split_by_user(_empty_dataset(50), seed=1)
        c = fc.split_by_user(_empty_dataset(50), seed=2)
        assert np.array_equal(a.train_users, b.train_users)
        assert not np.array_equal(a.train_users, c.train_users)

    def test_too_few_users(self):
        with pytest.raises(ValueError, match="at least 10"):
            fc.split_by_user(_empty_dataset(9), seed=0)

    def test_held_out_users_concatenates_val_then_test(self):
        split = fc.split_by_user(_empty_dataset(20), seed=4)
        expected = np.concatenate([split.validation_users, split.test_users])
        assert np.array_equal(split.held_out_users, expected)
