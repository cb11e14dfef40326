"""Multi-turn conversation policy over a trained forest.

A session walks one tree at a time. Internal nodes whose attribute is already
answered are crossed for free; reaching an unanswered attribute costs a turn
(the question), and reaching a leaf, or a node whose unrejected candidates fit
the early threshold, costs a turn for a top-K recommendation. On rejection the
session embedding takes a feedback offset (promote the runners-up, penalize
the rejected), the rejected items are excluded, the tree's deepest embedding
is collected, and the most similar unvisited tree continues the conversation.
When every tree is spent the session keeps recommending from the remaining
catalog. Accepting ends the session; running past the turn budget fails it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SessionProtocolError
from .forest import InteractionForest
from .tree import TreeNode, descend_answered, traverse_known


@dataclass(frozen=True)
class AblationFlags:
    """Feature switches used by the benchmark to isolate components."""

    use_candidates: bool = True
    use_forest: bool = True
    use_early_rec: bool = True
    use_online_feedback: bool = True


@dataclass(frozen=True)
class Ask:
    attribute: int


@dataclass(frozen=True)
class Recommend:
    items: tuple[int, ...]  # ordered, best first


class SessionState:
    """Mutable state of one conversation; drive it with the module functions."""

    def __init__(self, forest: InteractionForest, seed: int, flags: AblationFlags):
        self.forest = forest
        self.flags = flags
        self.seed = int(seed)
        self.rng = np.random.default_rng(seed)
        self.tree_index: int | None = int(self.rng.integers(forest.n_trees))
        self.node: TreeNode | None = forest.trees[self.tree_index].root
        self.answers: dict[int, bool] = {}
        self.visited: set[int] = set()
        self.collected: list[np.ndarray] = []
        self.delta = np.zeros(forest.dim)
        self.excluded: set[int] = set()
        self.turn = 1
        self.status = "active"          # active | succeeded | failed
        self.turns_used: int | None = None
        self.pending: Ask | Recommend | None = None

    @property
    def config(self):
        return self.forest.config

    @property
    def exhausted(self) -> bool:
        return self.tree_index is None


def start_session(forest: InteractionForest, seed: int,
                  flags: AblationFlags | None = None) -> SessionState:
    """Open a session at the root of a uniformly drawn starting tree."""
    if forest.n_trees == 0:
        raise ValueError("forest has no trees")
    return SessionState(forest, seed, flags or AblationFlags())


def is_terminal(state: SessionState) -> bool:
    return state.status != "active"


def fused_embedding(state: SessionState) -> np.ndarray:
    """Mean of the collected deepest-node embeddings plus the current node's,
    shifted by the accumulated feedback offset."""
    parts = list(state.collected)
    if state.node is not None:
        parts.append(state.node.embedding)
    if not parts:
        return state.delta.copy()
    return np.mean(parts, axis=0) + state.delta


def score_item(s, table, item: int) -> float:
    return float(table.vectors[item] @ np.asarray(s, dtype=np.float64))


def _ranked(state: SessionState, ids: np.ndarray, scores: np.ndarray) -> np.ndarray:
    # score descending, item id ascending on ties
    order = np.lexsort((ids, -scores[ids]))
    return ids[order]


def assemble_recommendation(state: SessionState) -> tuple[int, ...]:
    """Top-K unrejected items: the node's candidates first (score order),
    topped up from the rest of the catalog when they run short."""
    n = state.forest.n_items
    K = state.config.top_k
    scores = state.forest.items.vectors @ fused_embedding(state)
    excluded = state.excluded

    if state.flags.use_candidates and state.node is not None:
        avail = np.array([i for i in state.node.candidate_items.tolist()
                          if i not in excluded], dtype=np.int64)
    else:
        avail = np.array([i for i in range(n) if i not in excluded], dtype=np.int64)

    picked = _ranked(state, avail, scores)[:K].tolist()
    if len(picked) < K:
        chosen = set(picked) | excluded
        rest = np.array([i for i in range(n) if i not in chosen], dtype=np.int64)
        picked += _ranked(state, rest, scores)[:K - len(picked)].tolist()
    return tuple(int(i) for i in picked)


def current_action(state: SessionState) -> Ask | Recommend | None:
    """Decide the action for the current turn (idempotent until applied).

    Crossing already-answered internal nodes costs nothing. When no
    recommendable item remains the session is marked failed and None comes
    back; any later call raises.
    """
    if is_terminal(state):
        raise SessionProtocolError(f"session is {state.status}")
    if state.pending is not None:
        return state.pending

    if state.node is not None:
        state.node = descend_answered(state.node, state.answers)
        avail = sum(1 for i in state.node.candidate_items.tolist()
                    if i not in state.excluded)
        early = state.flags.use_early_rec and avail <= state.config.early_rec_threshold
        if not state.node.is_leaf and not early:
            state.pending = Ask(int(state.node.split_attribute))
            return state.pending

    items = assemble_recommendation(state)
    if not items:
        state.status = "failed"
        state.turns_used = state.config.max_turns
        return None
    state.pending = Recommend(items)
    return state.pending


def _advance_turn(state: SessionState):
    state.turn += 1
    if state.turn > state.config.max_turns:
        state.status = "failed"
        state.turns_used = state.config.max_turns


def apply_answer(state: SessionState, yes: bool) -> SessionState:
    """Consume a yes/no answer to the pending question."""
    if is_terminal(state):
        raise SessionProtocolError(f"session is {state.status}")
    if not isinstance(state.pending, Ask):
        raise SessionProtocolError("no question is pending")
    attribute = state.pending.attribute
    state.answers[attribute] = bool(yes)
    state.node = state.node.child(bool(yes))
    state.pending = None
    _advance_turn(state)
    return state


def feedback_offset(table, rejected_items, promoted_items,
                    alpha_promote: float, alpha_penalize: float) -> np.ndarray:
    """Offset added to the session embedding after a rejection:
    alpha_p * mean(promoted vectors) - alpha_n * mean(rejected vectors)."""
    offset = np.zeros(table.dim)
    if len(promoted_items) > 0:
        ids = np.asarray(list(promoted_items), dtype=np.int64)
        offset += (alpha_promote / ids.size) * table.vectors[ids].sum(axis=0)
    if len(rejected_items) > 0:
        ids = np.asarray(list(rejected_items), dtype=np.int64)
        offset -= (alpha_penalize / ids.size) * table.vectors[ids].sum(axis=0)
    return offset


def select_next_tree(state: SessionState) -> int:
    """Unvisited tree whose known-answer node embedding best matches the
    session embedding; ties take the lowest tree index."""
    unvisited = [j for j in range(state.forest.n_trees) if j not in state.visited]
    if not unvisited:
        raise SessionProtocolError("every tree has been visited")
    s_t = fused_embedding(state)
    best, best_score = None, None
    for j in unvisited:
        node = traverse_known(state.forest.trees[j], state.answers)
        score = float(node.embedding @ s_t)
        if best is None or score > best_score:
            best, best_score = j, score
    return best


def apply_rejection(state: SessionState) -> SessionState:
    """Consume a rejection of the pending recommendation."""
    if is_terminal(state):
        raise SessionProtocolError(f"session is {state.status}")
    if not isinstance(state.pending, Recommend):
        raise SessionProtocolError("no recommendation is pending")
    rejected = list(state.pending.items)
    config = state.config

    if state.flags.use_online_feedback:
        scores = state.forest.items.vectors @ fused_embedding(state)
        blocked = state.excluded | set(rejected)
        rest = np.array([i for i in range(state.forest.n_items) if i not in blocked],
                        dtype=np.int64)
        promoted = _ranked(state, rest, scores)[:config.top_k].tolist()
        state.delta += feedback_offset(state.forest.items, rejected, promoted,
                                       config.alpha_promote, config.alpha_penalize)
    if config.exclude_rejected:
        state.excluded.update(rejected)

    if not state.exhausted:
        state.collected.append(state.node.embedding)
        state.visited.add(state.tree_index)
        state.tree_index = None
        state.node = None
        unvisited = [j for j in range(state.forest.n_trees) if j not in state.visited]
        if unvisited and state.flags.use_forest:
            if state.flags.use_online_feedback:
                nxt = select_next_tree(state)
            else:
                nxt = int(state.rng.choice(np.array(unvisited)))
            state.tree_index = nxt
            state.node = traverse_known(state.forest.trees[nxt], state.answers)

    state.pending = None
    _advance_turn(state)
    return state


def apply_acceptance(state: SessionState) -> SessionState:
    """Consume an acceptance of the pending recommendation; the session ends
    successfully at the current turn."""
    if is_terminal(state):
        raise SessionProtocolError(f"session is {state.status}")
    if not isinstance(state.pending, Recommend):
        raise SessionProtocolError("no recommendation is pending")
    state.status = "succeeded"
    state.turns_used = state.turn
    state.pending = None
    return state
