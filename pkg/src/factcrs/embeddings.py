"""Shared item embeddings and the per-partition fitting kernel.

A tree node represents the interaction records routed to it by one shared
d-dimensional embedding ``s``. Fitting a split means learning ``s_pos`` and
``s_neg`` for the two record partitions against the item table ``V`` by
plain full-batch gradient descent on

    sum_pos -ln sig(s_pos . v_i)  +  sum_neg -ln sig(s_neg . v_i)
    + lambda_bpr * sum_records sum_j -ln sig(s . v_i - s . v_j)
    + lambda_s * (||s_pos||^2 + ||s_neg||^2)
    [+ lambda_v * ||V_touched||^2      when the item table is trainable]

where j ranges over the record's sampled negative items. The descent step is
halved (deterministically) whenever it would raise the objective, so the
returned objective never exceeds the value at initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


def softplus(x):
    """log(1 + exp(x)), stable for large |x|."""
    return np.logaddexp(0.0, x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class ItemEmbeddingTable:
    """Dense (n_items, d) float64 embedding table with a freeze latch."""

    def __init__(self, vectors: np.ndarray, frozen: bool = False):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("item table must be 2-dimensional")
        if not np.all(np.isfinite(vectors)):
            raise NumericalError("item table contains non-finite entries")
        self.vectors = vectors
        self.frozen = bool(frozen)

    @classmethod
    def initialize(cls, n_items: int, dim: int, scale: float, seed: int) -> "ItemEmbeddingTable":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-scale, scale, size=(n_items, dim)))

    @property
    def n_items(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def copy(self) -> "ItemEmbeddingTable":
        return ItemEmbeddingTable(self.vectors.copy(), self.frozen)


# ----------------------------------------------------------------------
# losses


def ce_loss(s, table: ItemEmbeddingTable, item_ids) -> float:
    """Cross-entropy of interacted items under embedding s: sum -ln sig(s.v_i)."""
    item_ids = np.asarray(item_ids, dtype=np.int64)
    if item_ids.size == 0:
        return 0.0
    x = table.vectors[item_ids] @ np.asarray(s, dtype=np.float64)
    value = float(softplus(-x).sum())
    if not np.isfinite(value):
        raise NumericalError(f"ce_loss is non-finite for {item_ids.size} record(s)")
    return value


def bpr_loss(s, table: ItemEmbeddingTable, item: int, negative_ids) -> float:
    """Pairwise ranking loss of one record: sum_j -ln sig(s.v_item - s.v_j)."""
    negative_ids = np.asarray(negative_ids, dtype=np.int64)
    if negative_ids.size == 0:
        return 0.0
    if np.any(negative_ids == item):
        raise NumericalError(f"negative sample set contains the target item {item}")
    s = np.asarray(s, dtype=np.float64)
    margins = float(table.vectors[item] @ s) - table.vectors[negative_ids] @ s
    value = float(softplus(-margins).sum())
    if not np.isfinite(value):
        raise NumericalError("bpr_loss is non-finite")
    return value


def sample_negatives(dataset, record, k: int, seed: int) -> np.ndarray:
    """Draw k items the record's user never interacted with, uniformly, no repeats."""
    interacted = dataset.interacted_items(record.user)
    candidates = np.setdiff1d(np.arange(dataset.n_items, dtype=np.int64), interacted)
    if k < 0 or k > candidates.size:
        raise ValueError(
            f"cannot draw {k} negatives for user {record.user}: "
            f"{candidates.size} non-interacted item(s) available")
    rng = np.random.default_rng(seed)
    return candidates[rng.permutation(candidates.size)[:k]]


# ----------------------------------------------------------------------
# negative sample bookkeeping for batched fits


@dataclass(frozen=True)
class NegativeSamples:
    """Per-record negative item ids, padded to a rectangle.

    ``indices[r, j]`` is the j-th negative of record r; ``mask`` marks real
    entries (padding indexes row 0 but is masked out of every term).
    """

    indices: np.ndarray  # (R, k) int64
    mask: np.ndarray     # (R, k) bool

    @classmethod
    def from_lists(cls, lists) -> "NegativeSamples":
        n = len(lists)
        width = max((len(l) for l in lists), default=0)
        indices = np.zeros((n, width), dtype=np.int64)
        mask = np.zeros((n, width), dtype=bool)
        for r, ids in enumerate(lists):
            indices[r, :len(ids)] = ids
            mask[r, :len(ids)] = True
        return cls(indices, mask)

    @classmethod
    def empty(cls, n_records: int) -> "NegativeSamples":
        return cls(np.zeros((n_records, 0), dtype=np.int64),
                   np.zeros((n_records, 0), dtype=bool))

    def subset(self, index) -> "NegativeSamples":
        return NegativeSamples(self.indices[index], self.mask[index])

    @property
    def n_records(self) -> int:
        return self.indices.shape[0]


def sample_negatives_batch(batch, n_items: int, k: int, rng) -> NegativeSamples:
    """Sample up to k negatives per record in ``batch`` (clamped per user)."""
    owned: dict[int, np.ndarray] = {}
    for u in np.unique(batch.users):
        mask = np.ones(n_items, dtype=bool)
        mask[batch.items[batch.users == u]] = False
        owned[int(u)] = np.flatnonzero(mask).astype(np.int64)
    lists = []
    for r in range(batch.size):
        pool = owned[int(batch.users[r])]
        take = min(k, pool.size)
        lists.append(pool[rng.permutation(pool.size)[:take]])
    return NegativeSamples.from_lists(lists)


# ----------------------------------------------------------------------
# the partition fit


@dataclass(frozen=True)
class FitResult:
    s_pos: np.ndarray
    s_neg: np.ndarray
    objective: float
    epochs_run: int


class _PartitionProblem:
    """Objective and gradients of one two-partition fit, restricted to the
    item rows the records actually touch."""

    def __init__(self, pos_items, neg_items, table, config,
                 pos_negatives=None, neg_negatives=None, train_items=None):
        self.table = table
        self.config = config
        self.train_items = (not table.frozen) if train_items is None else bool(train_items)
        self.pos_items = np.asarray(pos_items, dtype=np.int64)
        self.neg_items = np.asarray(neg_items, dtype=np.int64)
        self.pos_negs = pos_negatives if pos_negatives is not None \
            else NegativeSamples.empty(self.pos_items.size)
        self.neg_negs = neg_negatives if neg_negatives is not None \
            else NegativeSamples.empty(self.neg_items.size)
        if self.pos_negs.n_records != self.pos_items.size \
                or self.neg_negs.n_records != self.neg_items.size:
            raise ValueError("negative samples are not aligned with the records")

        pieces = [self.pos_items, self.neg_items,
                  self.pos_negs.indices[self.pos_negs.mask],
                  self.neg_negs.indices[self.neg_negs.mask]]
        self.touched = np.unique(np.concatenate([p.ravel() for p in pieces])) \
            if any(p.size for p in pieces) else np.empty(0, dtype=np.int64)
        self.rows0 = table.vectors[self.touched].copy()

        def locate(ids):
            return np.searchsorted(self.touched, ids)

        self.loc_pos = locate(self.pos_items)
        self.loc_neg = locate(self.neg_items)
        self.loc_pos_negs = locate(self.pos_negs.indices) * self.pos_negs.mask
        self.loc_neg_negs = locate(self.neg_negs.indices) * self.neg_negs.mask

    def _side_objective(self, s, loc_i, loc_negs, mask, rows):
        if loc_i.size == 0:
            return 0.0
        y = rows @ s
        x = y[loc_i]
        value = softplus(-x).sum()
        if mask.size:
            margins = x[:, None] - y[loc_negs]
            value += self.config.lambda_bpr * (softplus(-margins) * mask).sum()
        value += self.config.lambda_embedding * float(s @ s)
        return float(value)

    def objective(self, s_pos, s_neg, rows) -> float:
        value = self._side_objective(s_pos, self.loc_pos, self.loc_pos_negs,
                                     self.pos_negs.mask, rows)
        value += self._side_objective(s_neg, self.loc_neg, self.loc_neg_negs,
                                      self.neg_negs.mask, rows)
        if self.train_items and rows.size:
            value += self.config.lambda_items * float((rows * rows).sum())
        return value

    def _side_gradients(self, s, loc_i, loc_negs, mask, rows, g_rows):
        d = rows.shape[1] if rows.size else self.table.dim
        g_s = np.zeros(d)
        if loc_i.size == 0:
            return g_s
        y = rows @ s
        x = y[loc_i]
        c_ce = -sigmoid(-x)
        g_s += rows[loc_i].T @ c_ce
        if g_rows is not None:
            np.add.at(g_rows, loc_i, c_ce[:, None] * s)
        if mask.size:
            margins = x[:, None] - y[loc_negs]
            c = -sigmoid(-margins) * mask * self.config.lambda_bpr
            per_record = c.sum(axis=1)
            g_s += rows[loc_i].T @ per_record
            g_s -= np.einsum("rj,rjd->d", c, rows[loc_negs])
            if g_rows is not None:
                np.add.at(g_rows, loc_i, per_record[:, None] * s)
                np.add.at(g_rows, loc_negs.ravel(), -c.ravel()[:, None] * s)
        g_s += 2.0 * self.config.lambda_embedding * s
        return g_s

    def gradients(self, s_pos, s_neg, rows):
        g_rows = np.zeros_like(rows) if self.train_items else None
        g_pos = self._side_gradients(s_pos, self.loc_pos, self.loc_pos_negs,
                                     self.pos_negs.mask, rows, g_rows)
        g_neg = self._side_gradients(s_neg, self.loc_neg, self.loc_neg_negs,
                                     self.neg_negs.mask, rows, g_rows)
        if g_rows is not None:
            g_rows += 2.0 * self.config.lambda_items * rows
        return g_pos, g_neg, g_rows


def partition_objective(pos_items, neg_items, table, config, *,
                        s_pos, s_neg, pos_negatives=None, neg_negatives=None,
                        train_items=None):
    """Objective value and analytic gradients at the given parameters.

    Returns ``(value, g_s_pos, g_s_neg, g_rows, touched)`` where ``g_rows`` is
    aligned with the sorted ``touched`` item ids (None when the table is held
    fixed). Exposed so the full fit objective can be checked independently.
    """
    problem = _PartitionProblem(pos_items, neg_items, table, config,
                                pos_negatives, neg_negatives, train_items)
    rows = problem.rows0
    value = problem.objective(np.asarray(s_pos, float), np.asarray(s_neg, float), rows)
    g_pos, g_neg, g_rows = problem.gradients(np.asarray(s_pos, float),
                                             np.asarray(s_neg, float), rows)
    return value, g_pos, g_neg, g_rows, problem.touched


# step-halving floor; below this the fit is at a flat minimum
_MIN_STEP = 1e-18


def fit_partition_embeddings(pos_items, neg_items, table: ItemEmbeddingTable,
                             config, *, epochs: int,
                             pos_negatives: NegativeSamples | None = None,
                             neg_negatives: NegativeSamples | None = None,
                             train_items: bool | None = None) -> FitResult:
    """Fit the two partition embeddings (and, when allowed, the touched item
    rows) by monotone full-batch gradient descent.

    Both embeddings start at zero; an empty partition keeps the zero vector.
    ``train_items`` defaults to the table's own freeze latch and may be forced
    off (split search evaluates candidates against fixed items). Item rows are
    written back to the table only when training them, and only at the end.
    """
    problem = _PartitionProblem(pos_items, neg_items, table, config,
                                pos_negatives, neg_negatives, train_items)
    d = table.dim
    s_pos = np.zeros(d)
    s_neg = np.zeros(d)
    rows = problem.rows0.copy()

    obj = problem.objective(s_pos, s_neg, rows)
    if not np.isfinite(obj):
        raise NumericalError("objective is non-finite at initialization")

    lr = config.learning_rate
    ran = 0
    for epoch in range(epochs):
        g_pos, g_neg, g_rows = problem.gradients(s_pos, s_neg, rows)
        accepted = False
        while lr >= _MIN_STEP:
            t_pos = s_pos - lr * g_pos
            t_neg = s_neg - lr * g_neg
            t_rows = rows - lr * g_rows if g_rows is not None else rows
            t_obj = problem.objective(t_pos, t_neg, t_rows)
            if np.isfinite(t_obj) and t_obj <= obj:
                accepted = True
                break
            if not np.isfinite(t_obj) and lr * 0.5 < _MIN_STEP:
                raise NumericalError(f"non-finite objective at epoch {epoch}")
            lr *= 0.5
        if not accepted:
            break
        s_pos, s_neg, rows, obj = t_pos, t_neg, t_rows, t_obj
        ran += 1

    if problem.train_items and problem.touched.size:
        table.vectors[problem.touched] = rows
    return FitResult(s_pos, s_neg, float(obj), ran)
