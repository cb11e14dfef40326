"""Interaction corpus: TSV loading, validation, synthetic generation, user splits.

A corpus directory holds three UTF-8, LF-terminated files:

``attributes.tsv``
    one line per attribute: ``attr_id<TAB>label``, ids dense from 0.
``items.tsv``
    one line per item: ``item_id<TAB>comma-separated attr_ids`` (second column
    may be empty), ids dense from 0.
``interactions.tsv``
    one line per record: ``user_id<TAB>item_id<TAB>comma-separated attr_ids``
    where the third column lists the attributes mentioned in that interaction.

Users carry no declaration file; the user count is the largest user id + 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError

log = logging.getLogger(__name__)

_FILES = ("attributes.tsv", "items.tsv", "interactions.tsv")


@dataclass(frozen=True)
class AttributeVocabulary:
    """Ordered attribute labels; the attribute id is the position."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataFormatError("attribute labels must be unique")

    @property
    def size(self) -> int:
        return len(self.names)

    def label(self, attribute: int) -> str:
        return self.names[attribute]


@dataclass(frozen=True)
class InteractionRecord:
    """One observed (user, item) interaction with its mentioned attributes."""

    user: int
    item: int
    mentions: np.ndarray  # (p,) uint8, read as a set of attribute ids

    @property
    def mentioned_attributes(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.mentions))


@dataclass(frozen=True)
class RecordBatch:
    """Column view over a set of interaction records."""

    users: np.ndarray     # (q,) int64
    items: np.ndarray     # (q,) int64
    mentions: np.ndarray  # (q, p) uint8

    @property
    def size(self) -> int:
        return int(self.users.shape[0])

    def subset(self, index) -> "RecordBatch":
        return RecordBatch(self.users[index], self.items[index], self.mentions[index])


@dataclass(frozen=True)
class ValidationReport:
    n_records: int = 0
    n_empty_mentions: int = 0
    n_mentions_outside_item: int = 0


class Dataset:
    """An attribute vocabulary, an item catalog, and interaction records."""

    def __init__(self, n_users, n_items, vocabulary, item_attributes,
                 users, items, mentions):
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.vocabulary = vocabulary
        self.item_attributes = tuple(frozenset(a) for a in item_attributes)
        self.users = np.asarray(users, dtype=np.int64)
        self.items = np.asarray(items, dtype=np.int64)
        self.mentions = np.asarray(mentions, dtype=np.uint8)
        if len(self.item_attributes) != self.n_items:
            raise DataFormatError("item_attributes length disagrees with n_items")
        if self.mentions.shape != (self.users.shape[0], vocabulary.size):
            raise DataFormatError("mentions matrix shape disagrees with records/vocabulary")
        self._user_items: dict[int, np.ndarray] | None = None
        self.validation = self._validate()

    # ------------------------------------------------------------------

    @property
    def n_records(self) -> int:
        return int(self.users.shape[0])

    @property
    def n_attributes(self) -> int:
        return self.vocabulary.size

    def record(self, index: int) -> InteractionRecord:
        return InteractionRecord(int(self.users[index]), int(self.items[index]),
                                 self.mentions[index])

    def batch(self, index=None) -> RecordBatch:
        if index is None:
            return RecordBatch(self.users, self.items, self.mentions)
        index = np.asarray(index)
        return RecordBatch(self.users[index], self.items[index], self.mentions[index])

    def records_of_users(self, users) -> np.ndarray:
        """Indices of all records whose user is in ``users``, in file order."""
        mask = np.isin(self.users, np.asarray(list(users), dtype=np.int64))
        return np.flatnonzero(mask)

    def interacted_items(self, user: int) -> np.ndarray:
        """Sorted unique item ids this user has interacted with."""
        if self._user_items is None:
            order: dict[int, set[int]] = {}
            for u, i in zip(self.users.tolist(), self.items.tolist()):
                order.setdefault(u, set()).add(i)
            self._user_items = {u: np.array(sorted(s), dtype=np.int64)
                                for u, s in order.items()}
        return self._user_items.get(user, np.empty(0, dtype=np.int64))

    def _validate(self) -> ValidationReport:
        if self.n_records == 0:
            return ValidationReport()
        empty = int(np.sum(self.mentions.sum(axis=1) == 0))
        outside = 0
        item_masks = np.zeros((self.n_items, self.n_attributes), dtype=np.uint8)
        for i, attrs in enumerate(self.item_attributes):
            for a in attrs:
                item_masks[i, a] = 1
        stray = self.mentions & (1 - item_masks[self.items])
        outside = int(np.sum(stray.any(axis=1)))
        if empty:
            log.warning("%d interaction(s) mention no attributes", empty)
        if outside:
            log.warning("%d interaction(s) mention attributes their item lacks", outside)
        return ValidationReport(self.n_records, empty, outside)


# ----------------------------------------------------------------------
# TSV round-trip


def _parse_id_list(raw: str, limit: int, what: str, where: str) -> list[int]:
    raw = raw.strip()
    if not raw:
        return []
    out = []
    for token in raw.split(","):
        try:
            value = int(token)
        except ValueError:
            raise DataFormatError(f"{where}: malformed {what} id {token!r}") from None
        if value < 0 or value >= limit:
            raise DataFormatError(f"{where}: unknown {what} id {value}")
        out.append(value)
    return out


def load_dataset(path) -> Dataset:
    """Load a corpus directory; raises :class:`DataFormatError` on bad input."""
    path = Path(path)
    for name in _FILES:
        if not (path / name).is_file():
            raise DataFormatError(f"missing corpus file: {path / name}")

    # attributes.tsv: ids must be dense and in order
    names = []
    for lineno, line in enumerate(_lines(path / "attributes.tsv"), start=1):
        where = f"attributes.tsv:{lineno}"
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(f"{where}: expected 'id<TAB>label'")
        try:
            attr_id = int(parts[0])
        except ValueError:
            raise DataFormatError(f"{where}: malformed attribute id {parts[0]!r}") from None
        if attr_id != lineno - 1:
            raise DataFormatError(f"{where}: attribute ids must be dense from 0, got {attr_id}")
        names.append(parts[1])
    vocabulary = AttributeVocabulary(tuple(names))
    p = vocabulary.size

    item_attributes: list[list[int]] = []
    for lineno, line in enumerate(_lines(path / "items.tsv"), start=1):
        where = f"items.tsv:{lineno}"
        parts = line.split("\t")
        if len(parts) not in (1, 2):
            raise DataFormatError(f"{where}: expected 'item_id<TAB>attr_ids'")
        try:
            item_id = int(parts[0])
        except ValueError:
            raise DataFormatError(f"{where}: malformed item id {parts[0]!r}") from None
        if item_id != lineno - 1:
            raise DataFormatError(f"{where}: item ids must be dense from 0, got {item_id}")
        item_attributes.append(_parse_id_list(parts[1] if len(parts) == 2 else "",
                                              p, "attribute", where))
    n_items = len(item_attributes)

    users, items, rows = [], [], []
    for lineno, line in enumerate(_lines(path / "interactions.tsv"), start=1):
        where = f"interactions.tsv:{lineno}"
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise DataFormatError(f"{where}: expected 'user<TAB>item<TAB>mentions'")
        try:
            user = int(parts[0])
            item = int(parts[1])
        except ValueError:
            raise DataFormatError(f"{where}: malformed id") from None
        if user < 0:
            raise DataFormatError(f"{where}: unknown user id {user}")
        if item < 0 or item >= n_items:
            raise DataFormatError(f"{where}: unknown item id {item}")
        row = np.zeros(p, dtype=np.uint8)
        for a in _parse_id_list(parts[2] if len(parts) == 3 else "", p, "attribute", where):
            row[a] = 1
        users.append(user)
        items.append(item)
        rows.append(row)

    n_users = (max(users) + 1) if users else 0
    mentions = np.array(rows, dtype=np.uint8) if rows else np.zeros((0, p), dtype=np.uint8)
    return Dataset(n_users, n_items, vocabulary, item_attributes,
                   np.array(users, dtype=np.int64), np.array(items, dtype=np.int64),
                   mentions)


def _lines(file: Path):
    text = file.read_text(encoding="utf-8")
    for line in text.split("\n"):
        if line != "":
            yield line


def save_dataset(dataset: Dataset, path) -> None:
    """Write a corpus directory in the same TSV layout load_dataset reads."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "attributes.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i, name in enumerate(dataset.vocabulary.names):
            fh.write(f"{i}\t{name}\n")
    with open(path / "items.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i, attrs in enumerate(dataset.item_attributes):
            fh.write(f"{i}\t{','.join(str(a) for a in sorted(attrs))}\n")
    with open(path / "interactions.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for r in range(dataset.n_records):
            mentioned = ",".join(str(a) for a in np.flatnonzero(dataset.mentions[r]))
            fh.write(f"{dataset.users[r]}\t{dataset.items[r]}\t{mentioned}\n")


# ----------------------------------------------------------------------
# synthetic corpora with a planted attribute tree


@dataclass(frozen=True)
class SyntheticSpec:
    n_users: int
    n_items: int
    n_attributes: int
    n_records: int
    depth: int
    noise: float = 0.0
    seed: int = 0
    # rate at which items pick up non-planted (distractor) attributes
    extra_rate: float = 0.25


@dataclass(frozen=True)
class PlantedTree:
    """Ground truth behind a synthetic corpus.

    ``level_attributes[l]`` is the attribute the hidden tree tests at depth l;
    ``item_bits[i, l]`` says whether item i sits on the positive side there.
    """

    level_attributes: tuple[int, ...]
    item_bits: np.ndarray  # (n_items, depth) uint8

    @property
    def root_attribute(self) -> int:
        return self.level_attributes[0]

    def leaf_of_item(self, item: int) -> int:
        code = 0
        for bit in self.item_bits[item]:
            code = (code << 1) | int(bit)
        return code


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, PlantedTree]:
    """Build a corpus whose items follow a hidden attribute tree.

    Level 0 of the planted tree splits the catalog exactly in half; each deeper
    level is less balanced, so the root attribute is the strongest single
    split. Mention vectors copy the item's attribute set, then each bit flips
    independently with probability ``spec.noise``.
    """
    m, n, p, q = spec.n_users, spec.n_items, spec.n_attributes, spec.n_records
    if min(m, n, p) < 1:
        raise ValueError("n_users, n_items and n_attributes must all be >= 1")
    if spec.depth < 1 or spec.depth > p:
        raise ValueError(f"planted depth must lie in [1, {p}], got {spec.depth}")
    if not 0.0 <= spec.noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")

    rng = np.random.default_rng(spec.seed)
    level_attributes = tuple(int(a) for a in rng.permutation(p)[:spec.depth])

    item_bits = np.zeros((n, spec.depth), dtype=np.uint8)
    for level in range(spec.depth):
        share = max(0.5 - 0.08 * level, 0.2)
        chosen = rng.permutation(n)[:round(n * share)]
        item_bits[chosen, level] = 1

    item_masks = np.zeros((n, p), dtype=np.uint8)
    for level, attr in enumerate(level_attributes):
        item_masks[:, attr] = item_bits[:, level]
    distractors = [a for a in range(p) if a not in level_attributes]
    for attr in distractors:
        item_masks[:, attr] = rng.random(n) < spec.extra_rate

    # guarantee full user/item coverage whenever q is large enough
    users = np.empty(q, dtype=np.int64)
    items = np.empty(q, dtype=np.int64)
    head_u = min(m, q)
    users[:head_u] = rng.permutation(m)[:head_u]
    if q > head_u:
        users[head_u:] = rng.integers(0, m, size=q - head_u)
    head_i = min(n, q)
    items[:head_i] = rng.permutation(n)[:head_i]
    if q > head_i:
        items[head_i:] = rng.integers(0, n, size=q - head_i)

    mentions = item_masks[items].copy()
    if spec.noise > 0:
        flips = rng.random((q, p)) < spec.noise
        mentions = np.where(flips, 1 - mentions, mentions).astype(np.uint8)

    item_attributes = [frozenset(int(a) for a in np.flatnonzero(item_masks[i]))
                       for i in range(n)]
    dataset = Dataset(m, n, AttributeVocabulary(tuple(f"attr_{i}" for i in range(p))),
                      item_attributes, users, items, mentions)
    return dataset, PlantedTree(level_attributes, item_bits)


# ----------------------------------------------------------------------
# user-level split


@dataclass(frozen=True)
class DataSplit:
    train_users: np.ndarray
    validation_users: np.ndarray
    test_users: np.ndarray
    seed: int

    @property
    def held_out_users(self) -> np.ndarray:
        return np.concatenate([self.validation_users, self.test_users])


def split_by_user(dataset: Dataset, seed: int) -> DataSplit:
    """Shuffle users under ``seed`` and cut 8:1:1 (train/validation/test).

    Sizes are floor(0.8 m) and floor(0.1 m), the remainder goes to test.
    """
    m = dataset.n_users
    if m < 10:
        raise ValueError(f"need at least 10 users to split 8:1:1, got {m}")
    order = np.random.default_rng(seed).permutation(m)
    n_train = (8 * m) // 10
    n_val = m // 10
    return DataSplit(
        train_users=np.sort(order[:n_train]),
        validation_users=np.sort(order[n_train:n_train + n_val]),
        test_users=np.sort(order[n_train + n_val:]),
        seed=seed,
    )
