"""Walk through the corpus tooling: generate, validate, save, reload, split.

Run from the repository root:

    python3 demos/build_corpus.py
"""

import tempfile
from pathlib import Path

import factcrs as fc

# A synthetic catalog of 48 items over 8 attributes. Items get their
# attribute sets from a hidden binary tree of depth 3, so attribute 0 (the
# root) splits the catalog in half, and deeper attributes split less evenly.
spec = fc.SyntheticSpec(n_users=60, n_items=48, n_attributes=8,
                        n_records=800, depth=3, noise=0.0, seed=7)
dataset, planted = fc.generate_synthetic(spec)

print(f"users={dataset.n_users} items={dataset.n_items} "
      f"attributes={dataset.n_attributes} records={dataset.n_records}")
print(f"planted split attributes, root first: {list(planted.level_attributes)}")

# The validation report counts oddities without rejecting them.
print(f"records with empty mentions: {dataset.validation.n_empty_mentions}")
print(f"records mentioning attributes the item lacks: "
      f"{dataset.validation.n_mentions_outside_item}")

# Corpora are three TSV files; the round trip is exact.
with tempfile.TemporaryDirectory() as tmp:
    corpus_dir = Path(tmp) / "corpus"
    fc.save_dataset(dataset, corpus_dir)
    print("wrote", sorted(p.name for p in corpus_dir.iterdir()))
    again = fc.load_dataset(corpus_dir)
    assert again.n_records == dataset.n_records
    assert again.vocabulary.names == dataset.vocabulary.names

# Users (not records) are split 8:1:1, so no user straddles train and test.
split = fc.split_by_user(dataset, seed=11)
print(f"train/validation/test users: {len(split.train_users)}/"
      f"{len(split.validation_users)}/{len(split.test_users)}")
heldout_records = dataset.records_of_users(split.held_out_users)
print(f"held-out interaction records: {heldout_records.size}")
