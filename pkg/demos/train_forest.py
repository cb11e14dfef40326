"""Train a forest of factorization trees and poke at what it learned."""

import tempfile
from pathlib import Path

import numpy as np

import factcrs as fc

dataset, planted = fc.generate_synthetic(
    fc.SyntheticSpec(n_users=60, n_items=48, n_attributes=8,
                     n_records=800, depth=3, noise=0.0, seed=7))
config = fc.RunConfig(embedding_dim=16, num_trees=5, max_depth=5, seed=11)
split = fc.split_by_user(dataset, config.seed)

# The first tree trains the shared item-embedding table; the rest are grown
# against the frozen table over their own random attribute pools.
build_log = []
forest = fc.build_forest(dataset, config, users=split.train_users,
                         build_log=build_log)
print(f"{forest.n_trees} trees over {forest.n_items} items, "
      f"d={forest.dim}, pool size {forest.config.max_attributes_per_tree}")

for j, tree in enumerate(forest.trees):
    root = tree.root
    leaves = list(tree.leaves())
    print(f"tree {j}: pool={[int(a) for a in tree.attribute_pool]} "
          f"root_attr={root.split_attribute} leaves={len(leaves)} "
          f"root_gini={root.gini:.4f}")

# The hidden generator split the catalog on these attributes, top first.
print(f"planted attributes: {list(planted.level_attributes)}")
roots = [tree.root.split_attribute for tree in forest.trees]
print(f"trees whose pool held attribute {planted.root_attribute} and chose it "
      f"as root: {sum(1 for t, r in zip(forest.trees, roots) if r == planted.root_attribute and planted.root_attribute in t.attribute_pool)}")

# Splits are refit with the longer commit budget; the log keeps both values.
entry = build_log[0]
print(f"first split: tree {entry['tree']} attr {entry['attribute']} "
      f"search_obj {entry['search_objective']:.3f} "
      f"commit_obj {entry['commit_objective']:.3f}")

# Item embeddings live in one table shared by every tree.
norms = np.linalg.norm(forest.items.vectors, axis=1)
print(f"item embedding norms: min {norms.min():.3f} max {norms.max():.3f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.fcrs"
    fc.save_model(forest, path)
    size = path.stat().st_size
    again = fc.load_model(path)
    assert np.array_equal(again.items.vectors, forest.items.vectors)
    print(f"model file: {size} bytes, round trip exact")
