"""Shared fixtures: one planted corpus and one trained forest per test session.

Training the small benchmark forest takes a few seconds, so anything that can
share it should; tests that need to observe training itself build their own.
"""

import numpy as np
import pytest

import factcrs as fc

# benchmark corpus: planted depth-3 tree, no mention noise
BENCH_SPEC = fc.SyntheticSpec(n_users=60, n_items=48, n_attributes=8,
                              n_records=800, depth=3, noise=0.0, seed=7)


@pytest.fixture(scope="session")
def bench_corpus():
    dataset, planted = fc.generate_synthetic(BENCH_SPEC)
    return dataset, planted


@pytest.fixture(scope="session")
def bench_config():
    return fc.RunConfig(embedding_dim=16, num_trees=5, max_depth=5, seed=11)


@pytest.fixture(scope="session")
def bench_split(bench_corpus, bench_config):
    return fc.split_by_user(bench_corpus[0], bench_config.seed)


@pytest.fixture(scope="session")
def bench_forest(bench_corpus, bench_config, bench_split):
    return fc.build_forest(bench_corpus[0], bench_config,
                           users=bench_split.train_users)


# a much smaller corpus for tests that train their own trees
TINY_SPEC = fc.SyntheticSpec(n_users=12, n_items=10, n_attributes=5,
                             n_records=120, depth=2, noise=0.0, seed=3)


@pytest.fixture(scope="session")
def tiny_corpus():
    dataset, planted = fc.generate_synthetic(TINY_SPEC)
    return dataset, planted


@pytest.fixture(scope="session")
def tiny_config():
    return fc.RunConfig(embedding_dim=8, num_trees=2, max_depth=3,
                        epochs_search=10, epochs_commit=30, top_k=3,
                        early_rec_threshold=2, seed=5)


@pytest.fixture(scope="session")
def tiny_forest(tiny_corpus, tiny_config):
    return fc.build_forest(tiny_corpus[0], tiny_config)


def make_table(rows, frozen=True):
    """Item table from a plain list of vectors."""
    return fc.ItemEmbeddingTable(np.array(rows, dtype=np.float64), frozen=frozen)


def make_batch(users, items, mention_rows):
    return fc.RecordBatch(np.array(users, dtype=np.int64),
                          np.array(items, dtype=np.int64),
                          np.array(mention_rows, dtype=np.uint8))
