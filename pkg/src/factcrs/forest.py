"""Forests of interaction trees and their on-disk format.

Tree 0 is built with the item table trainable; the table is then frozen and
the remaining trees are built against it (``joint_refinement`` keeps it
trainable throughout). Each tree draws its own attribute pool, a uniform
``f_max``-subset sampled under ``seed ^ tree_index``, so builds are
deterministic and trees are decorrelated.

Model files are a single binary blob: an 8-byte magic, a version word, a
length-prefixed payload and a trailing SHA-256 of the payload. All floats are
little-endian float64, so a save/load round-trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_config_text
from .data import AttributeVocabulary, Dataset
from .embeddings import ItemEmbeddingTable, sample_negatives_batch
from .errors import ModelFormatError
from .tree import InteractionTree, TreeNode
from . import tree as tree_mod

MAGIC = b"FCRSMODL"
FORMAT_VERSION = 1


@dataclass
class InteractionForest:
    trees: list[InteractionTree]
    items: ItemEmbeddingTable
    vocabulary: AttributeVocabulary
    config: RunConfig

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_items(self) -> int:
        return self.items.n_items

    @property
    def n_attributes(self) -> int:
        return self.vocabulary.size

    @property
    def dim(self) -> int:
        return self.items.dim


def resolve_pool_size(config: RunConfig, n_attributes: int) -> int:
    f_max = config.max_attributes_per_tree
    if f_max == 0:
        f_max = math.ceil(0.8 * n_attributes)
    if not 1 <= f_max <= n_attributes:
        raise ValueError(
            f"max_attributes_per_tree must lie in [1, {n_attributes}], got {f_max}")
    return f_max


def draw_attribute_pool(n_attributes: int, f_max: int, seed: int, tree_index: int) -> np.ndarray:
    """Uniform f_max-subset of attribute ids for one tree, under seed ^ index."""
    rng = np.random.default_rng(seed ^ tree_index)
    return np.sort(rng.permutation(n_attributes)[:f_max])


def build_forest(dataset: Dataset, config: RunConfig, *, users=None,
                 build_log: list | None = None) -> InteractionForest:
    """Train a forest on the dataset's records (optionally one user subset).

    Trees are built sequentially; the stored config snapshot carries the
    resolved pool size so a loaded model needs no external context.
    """
    index = None if users is None else dataset.records_of_users(users)
    batch = dataset.batch(index)
    if batch.size == 0:
        raise ValueError("no interaction records to train on")
    p = dataset.n_attributes
    f_max = resolve_pool_size(config, p)

    table = ItemEmbeddingTable.initialize(dataset.n_items, config.embedding_dim,
                                          config.init_scale, config.seed)
    trees: list[InteractionTree] = []
    for j in range(config.num_trees):
        rng = np.random.default_rng(config.seed ^ j)
        pool = np.sort(rng.permutation(p)[:f_max])
        negatives = sample_negatives_batch(batch, dataset.n_items,
                                           config.negatives_per_positive, rng)
        tree_log: list | None = [] if build_log is not None else None
        trees.append(tree_mod.build_tree(batch, pool, table, config,
                                         negatives=negatives, build_log=tree_log))
        if build_log is not None:
            for entry in tree_log:
                build_log.append({"tree": j, **entry})
        if j == 0 and not config.joint_refinement:
            table.frozen = True
    snapshot = config.replace(max_attributes_per_tree=f_max)
    return InteractionForest(trees, table, dataset.vocabulary, snapshot)


# ----------------------------------------------------------------------
# persistence


def _pack_bytes(out: bytearray, blob: bytes):
    out += struct.pack("<Q", len(blob))
    out += blob


def _pack_str(out: bytearray, text: str):
    _pack_bytes(out, text.encode("utf-8"))


def _pack_i64_array(out: bytearray, values: np.ndarray):
    values = np.asarray(values, dtype=np.int64)
    out += struct.pack("<Q", values.size)
    out += values.astype("<i8").tobytes()


def _pack_f64_array(out: bytearray, values: np.ndarray):
    values = np.asarray(values, dtype=np.float64)
    out += struct.pack("<Q", values.size)
    out += values.astype("<f8").tobytes()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.at = 0

    def take(self, n: int) -> bytes:
        if self.at + n > len(self.blob):
            raise ModelFormatError("model file is truncated")
        piece = self.blob[self.at:self.at + n]
        self.at += n
        return piece

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def bytes_block(self) -> bytes:
        return self.take(self.u64())

    def str_block(self) -> str:
        return self.bytes_block().decode("utf-8")

    def i64_array(self) -> np.ndarray:
        n = self.u64()
        return np.frombuffer(self.take(8 * n), dtype="<i8").astype(np.int64)

    def f64_array(self) -> np.ndarray:
        n = self.u64()
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def _serialize_tree(out: bytearray, tree: InteractionTree):
    _pack_i64_array(out, tree.attribute_pool)
    out += struct.pack("<q", tree.max_depth)
    out += struct.pack("<Q", len(tree.nodes))
    for node in tree.nodes:
        out += struct.pack("<qq", node.node_id, node.depth)
        out += struct.pack("<q", -1 if node.split_attribute is None else node.split_attribute)
        out += struct.pack("<q", node.interaction_count)
        out += struct.pack("<d", node.gini)
        _pack_f64_array(out, node.embedding)
        _pack_i64_array(out, node.candidate_items)
        out += struct.pack("<qq",
                           -1 if node.pos_child is None else node.pos_child.node_id,
                           -1 if node.neg_child is None else node.neg_child.node_id)


def _deserialize_tree(r: _Reader) -> InteractionTree:
    pool = r.i64_array()
    max_depth = r.i64()
    n_nodes = r.u64()
    nodes: list[TreeNode] = []
    links: list[tuple[int, int]] = []
    for _ in range(n_nodes):
        node_id, depth = struct.unpack("<qq", r.take(16))
        split = r.i64()
        count = r.i64()
        gini = r.f64()
        embedding = r.f64_array()
        candidates = r.i64_array()
        pos_id, neg_id = struct.unpack("<qq", r.take(16))
        nodes.append(TreeNode(node_id, depth, embedding, count, candidates, gini,
                              None if split < 0 else int(split)))
        links.append((pos_id, neg_id))
    by_id = {n.node_id: n for n in nodes}
    if len(by_id) != len(nodes) or not nodes:
        raise ModelFormatError("model file has inconsistent tree nodes")
    for node, (pos_id, neg_id) in zip(nodes, links):
        node.pos_child = by_id[pos_id] if pos_id >= 0 else None
        node.neg_child = by_id[neg_id] if neg_id >= 0 else None
    return InteractionTree(root=by_id[0], attribute_pool=pool,
                           max_depth=max_depth, nodes=nodes)


def save_model(forest: InteractionForest, path) -> None:
    payload = bytearray()
    _pack_str(payload, forest.config.to_text())
    payload += struct.pack("<Q", forest.vocabulary.size)
    for name in forest.vocabulary.names:
        _pack_str(payload, name)
    payload += struct.pack("<QQ", forest.items.n_items, forest.items.dim)
    payload += struct.pack("<B", 1 if forest.items.frozen else 0)
    payload += forest.items.vectors.astype("<f8").tobytes()
    payload += struct.pack("<Q", forest.n_trees)
    for tree in forest.trees:
        _serialize_tree(payload, tree)

    digest = hashlib.sha256(payload).digest()
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        fh.write(digest)


def load_model(path) -> InteractionForest:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"model file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 4 + 8:
        raise ModelFormatError("model file is truncated")
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model file (bad magic / version mismatch)")
    version = struct.unpack("<I", blob[8:12])[0]
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version mismatch: file has {version}, expected {FORMAT_VERSION}")
    payload_len = struct.unpack("<Q", blob[12:20])[0]
    payload_end = 20 + payload_len
    if len(blob) < payload_end + 32:
        raise ModelFormatError("model file is truncated")
    payload = blob[20:payload_end]
    digest = blob[payload_end:payload_end + 32]
    if hashlib.sha256(payload).digest() != digest:
        raise ModelFormatError("model file checksum failure")

    r = _Reader(payload)
    config = parse_config_text(r.str_block(), where=str(path))
    n_names = r.u64()
    vocabulary = AttributeVocabulary(tuple(r.str_block() for _ in range(n_names)))
    n_items, dim = struct.unpack("<QQ", r.take(16))
    frozen = struct.unpack("<B", r.take(1))[0] == 1
    vectors = np.frombuffer(r.take(8 * n_items * dim), dtype="<f8") \
        .astype(np.float64).reshape(n_items, dim)
    table = ItemEmbeddingTable(vectors, frozen=frozen)
    n_trees = r.u64()
    trees = [_deserialize_tree(r) for _ in range(n_trees)]
    return InteractionForest(trees, table, vocabulary, config)
