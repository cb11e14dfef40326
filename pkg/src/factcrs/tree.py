"""Greedy induction of interaction trees.

A tree routes interaction records by their mentioned attributes: records that
mention the node's attribute go to the positive child, the rest to the
negative child. Every node keeps the embedding fitted for its partition, the
candidate items its records cover, and its Gini impurity over items.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import RecordBatch
from .embeddings import (ItemEmbeddingTable, NegativeSamples,
                         fit_partition_embeddings)


@dataclass
class TreeNode:
    node_id: int
    depth: int
    embedding: np.ndarray
    interaction_count: int
    candidate_items: np.ndarray  # sorted unique item ids
    gini: float
    split_attribute: int | None = None
    pos_child: "TreeNode | None" = None
    neg_child: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split_attribute is None

    def child(self, answer: bool) -> "TreeNode":
        return self.pos_child if answer else self.neg_child


@dataclass
class InteractionTree:
    root: TreeNode
    attribute_pool: np.ndarray  # sorted attribute ids this tree may test
    max_depth: int
    nodes: list[TreeNode] = field(default_factory=list)

    def leaves(self):
        return [n for n in self.nodes if n.is_leaf]

    def path_attributes(self) -> set[int]:
        return {n.split_attribute for n in self.nodes if not n.is_leaf}


@dataclass(frozen=True)
class SplitCandidate:
    attribute: int
    objective: float
    s_pos: np.ndarray
    s_neg: np.ndarray
    pos_count: int
    neg_count: int


def partition_by_attribute(batch: RecordBatch, attribute: int):
    """Index arrays (file order preserved) of records that do / do not
    mention ``attribute``."""
    bits = batch.mentions[:, attribute]
    return np.flatnonzero(bits == 1), np.flatnonzero(bits == 0)


def gini_from_counts(n_distinct_items: int, n_records: int) -> float:
    """Impurity 1 - (|I_z| / |R_z|)^2, computed as (r^2 - i^2) / r^2."""
    if n_records <= 0:
        raise ValueError("gini is undefined for an empty node")
    if n_distinct_items < 0 or n_distinct_items > n_records:
        raise ValueError("distinct item count must lie in [0, n_records]")
    r2 = n_records * n_records
    return (r2 - n_distinct_items * n_distinct_items) / r2


def gini_index(item_ids) -> float:
    """Gini impurity of a node given the item column of its records."""
    item_ids = np.asarray(item_ids)
    return gini_from_counts(np.unique(item_ids).size, item_ids.size)


def evaluate_split(batch: RecordBatch, attribute: int, table: ItemEmbeddingTable,
                   config, negatives: NegativeSamples) -> SplitCandidate:
    """Fit both partition embeddings for one candidate attribute.

    The item table is held fixed during evaluation regardless of its freeze
    latch; the short ``epochs_search`` budget applies. An empty side keeps the
    zero embedding and contributes nothing to the objective.
    """
    pos_idx, neg_idx = partition_by_attribute(batch, attribute)
    result = fit_partition_embeddings(
        batch.items[pos_idx], batch.items[neg_idx], table, config,
        epochs=config.epochs_search,
        pos_negatives=negatives.subset(pos_idx),
        neg_negatives=negatives.subset(neg_idx),
        train_items=False)
    return SplitCandidate(attribute, result.objective, result.s_pos, result.s_neg,
                          int(pos_idx.size), int(neg_idx.size))


def select_split(batch: RecordBatch, pool, used_attributes, table: ItemEmbeddingTable,
                 config, negatives: NegativeSamples) -> SplitCandidate | None:
    """Exhaustively evaluate the unused pool attributes and keep the lowest
    objective; ties go to the lowest attribute id. Splits that leave either
    side empty are skipped. Returns None when no valid split exists."""
    best: SplitCandidate | None = None
    for attribute in sorted(int(a) for a in pool):
        if attribute in used_attributes:
            continue
        bits = batch.mentions[:, attribute]
        n_pos = int(bits.sum())
        if n_pos == 0 or n_pos == batch.size:
            continue
        candidate = evaluate_split(batch, attribute, table, config, negatives)
        if best is None or candidate.objective < best.objective:
            best = candidate
    return best


def build_tree(batch: RecordBatch, pool, table: ItemEmbeddingTable, config, *,
               negatives: NegativeSamples | None = None, seed: int | None = None,
               build_log: list | None = None) -> InteractionTree:
    """Grow one interaction tree over ``batch``.

    Growth stops at ``config.max_depth``, when the node's Gini impurity exceeds
    ``config.gini_threshold`` (records concentrated on few items), when fewer
    than ``config.min_node_records`` records remain, or when every remaining
    attribute gives a degenerate split. Chosen splits are refit with the longer
    ``epochs_commit`` budget, training the item table unless it is frozen.

    ``negatives`` must align with ``batch`` row for row; when omitted they are
    sampled here under ``seed`` (required in that case).
    """
    if batch.size == 0:
        raise ValueError("cannot build a tree from zero records")
    if negatives is None:
        if seed is None:
            raise ValueError("either negatives or seed must be given")
        from .embeddings import sample_negatives_batch
        rng = np.random.default_rng(seed)
        negatives = sample_negatives_batch(batch, table.n_items,
                                           config.negatives_per_positive, rng)

    pool = np.array(sorted(int(a) for a in pool), dtype=np.int64)
    tree = InteractionTree(root=None, attribute_pool=pool, max_depth=config.max_depth)  # type: ignore[arg-type]
    counter = [0]

    def new_node(index, depth, embedding) -> TreeNode:
        items = batch.items[index]
        node = TreeNode(
            node_id=counter[0], depth=depth, embedding=np.asarray(embedding, float),
            interaction_count=int(index.size),
            candidate_items=np.unique(items),
            gini=gini_index(items))
        counter[0] += 1
        tree.nodes.append(node)
        return node

    all_idx = np.arange(batch.size)
    root_fit = fit_partition_embeddings(
        batch.items, np.empty(0, dtype=np.int64), table, config,
        epochs=config.epochs_commit, pos_negatives=negatives,
        neg_negatives=NegativeSamples.empty(0))
    root = new_node(all_idx, 0, root_fit.s_pos)
    tree.root = root

    def grow(node: TreeNode, index: np.ndarray, used: frozenset[int]):
        if node.depth >= config.max_depth:
            return
        if node.gini > config.gini_threshold:
            return
        if node.interaction_count < config.min_node_records:
            return
        sub = batch.subset(index)
        sub_negs = negatives.subset(index)
        chosen = select_split(sub, pool, used, table, config, sub_negs)
        if chosen is None:
            return
        pos_rel, neg_rel = partition_by_attribute(sub, chosen.attribute)
        pos_idx, neg_idx = index[pos_rel], index[neg_rel]
        committed = fit_partition_embeddings(
            batch.items[pos_idx], batch.items[neg_idx], table, config,
            epochs=config.epochs_commit,
            pos_negatives=negatives.subset(pos_idx),
            neg_negatives=negatives.subset(neg_idx))
        node.split_attribute = chosen.attribute
        if build_log is not None:
            build_log.append({
                "node": node.node_id, "depth": node.depth,
                "attribute": chosen.attribute,
                "search_objective": chosen.objective,
                "commit_objective": committed.objective,
                "pos_records": int(pos_idx.size), "neg_records": int(neg_idx.size),
            })
        node.pos_child = new_node(pos_idx, node.depth + 1, committed.s_pos)
        node.neg_child = new_node(neg_idx, node.depth + 1, committed.s_neg)
        grow(node.pos_child, pos_idx, used | {chosen.attribute})
        grow(node.neg_child, neg_idx, used | {chosen.attribute})

    grow(root, all_idx, frozenset())
    return tree


def descend_answered(node: TreeNode, answers) -> TreeNode:
    """Follow children while the node's attribute already has an answer."""
    while not node.is_leaf and node.split_attribute in answers:
        node = node.child(answers[node.split_attribute])
    return node


def traverse_known(tree: InteractionTree, answers) -> TreeNode:
    """Descend from the root using only already-answered attributes."""
    return descend_answered(tree.root, answers)
