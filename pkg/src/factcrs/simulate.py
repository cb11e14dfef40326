"""Simulated users and episode execution.

A simulated user stands in for a held-out interaction: it knows the target
item's attribute set F_i and its own preferred set F_u, answers an attribute
question Yes exactly when the attribute lies in F_i intersected with F_u, and
accepts a recommendation exactly when the target item is on the list.

Two ways to pick F_u: ``recorded`` replays the held-out record's mentioned
attributes, ``sampled`` draws each attribute independently with the configured
inclusion rate.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, InteractionRecord
from .session import (AblationFlags, Ask, Recommend, apply_acceptance,
                      apply_answer, apply_rejection, current_action,
                      is_terminal, start_session)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulatedUser:
    user: int
    target_item: int
    item_attributes: frozenset[int]       # F_i
    preferred_attributes: frozenset[int]  # F_u
    mode: str

    @property
    def yes_set(self) -> frozenset[int]:
        return self.item_attributes & self.preferred_attributes


def make_simulated_user(dataset: Dataset, record: InteractionRecord, config,
                        seed: int = 0, mode: str | None = None) -> SimulatedUser:
    """Build the answer/feedback oracle for one held-out record."""
    mode = mode or config.simulator_mode
    item_attrs = dataset.item_attributes[record.item]
    if mode == "recorded":
        mentioned = record.mentioned_attributes
        if not mentioned:
            log.warning("record (user %d, item %d) mentions no attributes",
                        record.user, record.item)
        if not mentioned <= item_attrs:
            log.warning("record (user %d, item %d) mentions attributes the item "
                        "lacks; they are ignored", record.user, record.item)
        preferred = frozenset(mentioned & item_attrs)
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        draws = rng.random(dataset.n_attributes)
        preferred = frozenset(
            a for a in range(dataset.n_attributes)
            if draws[a] < config.sampled_inclusion_rate)
    else:
        raise ValueError(f"unknown simulator mode: {mode!r}")
    return SimulatedUser(record.user, record.item, item_attrs, preferred, mode)


def oracle_answer(user: SimulatedUser, attribute: int) -> bool:
    """Yes exactly when the attribute is both on the item and preferred."""
    return attribute in user.yes_set


def oracle_feedback(user: SimulatedUser, items) -> bool:
    """Accept exactly when the target item appears in the recommendation."""
    return user.target_item in items


# ----------------------------------------------------------------------
# episodes


@dataclass(frozen=True)
class TurnRecord:
    turn: int
    kind: str                     # "ask" | "recommend"
    tree_index: int | None        # None once the forest is exhausted
    node_kind: str                # "internal" | "leaf" | "exhausted"
    attribute: int | None = None
    answer: bool | None = None
    items: tuple[int, ...] = ()
    accepted: bool | None = None


@dataclass(frozen=True)
class EpisodeTrace:
    user: int
    target_item: int
    seed: int
    steps: tuple[TurnRecord, ...]
    outcome: str                  # "succeeded" | "failed"
    turns_used: int
    identified: int               # number of Yes answers
    mention_count: int            # |F_i & F_u|
    final_delta: np.ndarray
    trees_used: tuple[int, ...] = field(default_factory=tuple)

    @property
    def succeeded(self) -> bool:
        return self.outcome == "succeeded"


def run_episode(forest, user: SimulatedUser, config, *,
                flags: AblationFlags | None = None, seed: int = 0) -> EpisodeTrace:
    """Play one full conversation between the policy and the simulated user."""
    state = start_session(forest, seed, flags)
    steps: list[TurnRecord] = []
    trees: list[int] = []

    while not is_terminal(state):
        action = current_action(state)
        if action is None:
            break
        if state.tree_index is not None and state.tree_index not in trees:
            trees.append(state.tree_index)
        if state.node is None:
            node_kind = "exhausted"
        elif state.node.is_leaf:
            node_kind = "leaf"
        else:
            node_kind = "internal"
        turn = state.turn
        if isinstance(action, Ask):
            answer = oracle_answer(user, action.attribute)
            steps.append(TurnRecord(turn, "ask", state.tree_index, node_kind,
                                    attribute=action.attribute, answer=answer))
            apply_answer(state, answer)
        else:
            accepted = oracle_feedback(user, action.items)
            steps.append(TurnRecord(turn, "recommend", state.tree_index, node_kind,
                                    items=action.items, accepted=accepted))
            if accepted:
                apply_acceptance(state)
            else:
                apply_rejection(state)

    return EpisodeTrace(
        user=user.user, target_item=user.target_item, seed=seed,
        steps=tuple(steps),
        outcome=state.status if state.status != "active" else "failed",
        turns_used=state.turns_used if state.turns_used is not None
        else config.max_turns,
        identified=sum(1 for s in steps if s.kind == "ask" and s.answer),
        mention_count=len(user.yes_set),
        final_delta=state.delta.copy(),
        trees_used=tuple(trees),
    )


# ----------------------------------------------------------------------
# trace export (one JSON object per line)


def trace_to_dict(trace: EpisodeTrace) -> dict:
    return {
        "user": trace.user,
        "target_item": trace.target_item,
        "seed": trace.seed,
        "outcome": trace.outcome,
        "turns_used": trace.turns_used,
        "identified": trace.identified,
        "mention_count": trace.mention_count,
        "final_delta": [float(x) for x in trace.final_delta],
        "trees_used": list(trace.trees_used),
        "steps": [
            {k: v for k, v in {
                "turn": s.turn, "kind": s.kind, "tree": s.tree_index,
                "node": s.node_kind, "attribute": s.attribute,
                "answer": s.answer, "items": list(s.items) or None,
                "accepted": s.accepted,
            }.items() if v is not None}
            for s in trace.steps
        ],
    }


def trace_from_dict(raw: dict) -> EpisodeTrace:
    steps = tuple(
        TurnRecord(
            turn=s["turn"], kind=s["kind"], tree_index=s.get("tree"),
            node_kind=s["node"], attribute=s.get("attribute"),
            answer=s.get("answer"), items=tuple(s.get("items") or ()),
            accepted=s.get("accepted"))
        for s in raw["steps"])
    return EpisodeTrace(
        user=raw["user"], target_item=raw["target_item"], seed=raw["seed"],
        steps=steps, outcome=raw["outcome"], turns_used=raw["turns_used"],
        identified=raw["identified"], mention_count=raw["mention_count"],
        final_delta=np.array(raw["final_delta"], dtype=np.float64),
        trees_used=tuple(raw["trees_used"]))


def save_traces(traces, path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        for trace in traces:
            fh.write(json.dumps(trace_to_dict(trace), separators=(",", ":")) + "\n")


def load_traces(path) -> list[EpisodeTrace]:
    out = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(trace_from_dict(json.loads(line)))
    return out
