"""Benchmark harness: success-rate metrics, per-turn curves, case analytics.

An episode succeeds iff the target item is accepted within the turn budget;
failed episodes count the full budget toward the average-turn metric. All
numbers are deterministic given (model, dataset, split, seed).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, DataSplit
from .session import AblationFlags
from .simulate import EpisodeTrace, make_simulated_user, run_episode


def success_rate_at(traces, turn: int) -> float:
    """Share of episodes accepted at or before ``turn``."""
    if not traces:
        return 0.0
    hits = sum(1 for t in traces if t.succeeded and t.turns_used <= turn)
    return hits / len(traces)


def average_turns(traces) -> float:
    """Mean turns to acceptance; a failed episode counts its full budget."""
    if not traces:
        return 0.0
    return sum(t.turns_used for t in traces) / len(traces)


@dataclass(frozen=True)
class PerTurnRow:
    turn: int
    active: int          # episodes still running at this turn
    asks: int
    recommendations: int
    successes: int       # acceptances at exactly this turn

    @property
    def recommendation_ratio(self) -> float:
        return self.recommendations / self.active if self.active else 0.0

    @property
    def success_ratio(self) -> float:
        return self.successes / self.recommendations if self.recommendations else 0.0


@dataclass(frozen=True)
class MentionStats:
    count: int
    mean: float
    std: float


@dataclass
class BenchmarkReport:
    n_episodes: int
    max_turns: int
    top_k: int
    seed: int
    flags: AblationFlags
    sr_at: list[float]                       # index t-1 -> SR@t, cumulative
    avg_turns: float
    per_turn: list[PerTurnRow]
    leaf_item_hist: dict[int, int]           # leaf candidate count -> #leaves
    item_spread_hist: dict[int, int]         # #leaves holding an item -> #(tree,item)
    mention_stats: dict[str, MentionStats]   # successful / failed / all
    sr_by_min_mentions: dict[int, tuple[int, float]]   # threshold -> (episodes, SR@T)
    identified_matrix: dict[tuple[int, int], tuple[int, float]]
    # (mention_count, identified) -> (episodes, SR@T); only non-empty cells

    @property
    def success_rate(self) -> float:
        return self.sr_at[-1] if self.sr_at else 0.0

    def to_text(self) -> str:
        out = io.StringIO()
        w = out.write
        w("benchmark report\n")
        w("================\n")
        w(f"episodes: {self.n_episodes}\n")
        w(f"turn budget: {self.max_turns}   list size: {self.top_k}   seed: {self.seed}\n")
        w(f"flags: candidates={self.flags.use_candidates} forest={self.flags.use_forest} "
          f"early_rec={self.flags.use_early_rec} online_feedback={self.flags.use_online_feedback}\n")
        w(f"\nSR@{self.max_turns}: {self.success_rate:.4f}\n")
        w(f"average turns: {self.avg_turns:.4f}\n")
        w("\ncumulative success rate by turn\n")
        for t, sr in enumerate(self.sr_at, start=1):
            w(f"  SR@{t}: {sr:.4f}\n")
        w("\nper-turn activity (active / asks / recs / successes / rec ratio / success ratio)\n")
        for row in self.per_turn:
            w(f"  turn {row.turn}: {row.active} / {row.asks} / {row.recommendations} / "
              f"{row.successes} / {row.recommendation_ratio:.4f} / {row.success_ratio:.4f}\n")
        w("\nleaf size histogram (candidate items per leaf: count)\n")
        for size in sorted(self.leaf_item_hist):
            w(f"  {size}: {self.leaf_item_hist[size]}\n")
        w("\nitem spread histogram (leaves containing the item, per tree: count)\n")
        for spread in sorted(self.item_spread_hist):
            w(f"  {spread}: {self.item_spread_hist[spread]}\n")
        w("\nmentioned-attribute stats by outcome (count / mean / std)\n")
        for name in ("successful", "failed", "all"):
            s = self.mention_stats[name]
            w(f"  {name}: {s.count} / {s.mean:.4f} / {s.std:.4f}\n")
        w("\nsuccess rate by minimum mention count\n")
        for threshold in sorted(self.sr_by_min_mentions):
            count, sr = self.sr_by_min_mentions[threshold]
            w(f"  p_n >= {threshold}: episodes={count} SR@{self.max_turns}={sr:.4f}\n")
        w("\nsuccess rate by (mentioned, identified)\n")
        for (p_n, p_k) in sorted(self.identified_matrix):
            count, sr = self.identified_matrix[(p_n, p_k)]
            w(f"  p_n={p_n} p_k={p_k}: episodes={count} SR={sr:.4f}\n")
        return out.getvalue()

    def write_csvs(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)

        with open(directory / "per_turn.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["turn", "active", "asks", "recommendations", "successes",
                        "recommendation_ratio", "success_ratio", "sr_cumulative"])
            for row, sr in zip(self.per_turn, self.sr_at):
                w.writerow([row.turn, row.active, row.asks, row.recommendations,
                            row.successes, f"{row.recommendation_ratio:.6f}",
                            f"{row.success_ratio:.6f}", f"{sr:.6f}"])

        with open(directory / "leaf_items_hist.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["candidate_items", "leaves"])
            for size in sorted(self.leaf_item_hist):
                w.writerow([size, self.leaf_item_hist[size]])

        with open(directory / "item_leaf_spread_hist.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["leaves_containing_item", "tree_item_pairs"])
            for spread in sorted(self.item_spread_hist):
                w.writerow([spread, self.item_spread_hist[spread]])

        with open(directory / "mention_stats.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outcome", "episodes", "mean_mentions", "std_mentions"])
            for name in ("successful", "failed", "all"):
                s = self.mention_stats[name]
                w.writerow([name, s.count, f"{s.mean:.6f}", f"{s.std:.6f}"])

        with open(directory / "sr_by_min_mentions.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["min_mentions", "episodes", "success_rate"])
            for threshold in sorted(self.sr_by_min_mentions):
                count, sr = self.sr_by_min_mentions[threshold]
                w.writerow([threshold, count, f"{sr:.6f}"])

        with open(directory / "identified_matrix.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mentioned", "identified", "episodes", "success_rate"])
            for (p_n, p_k) in sorted(self.identified_matrix):
                count, sr = self.identified_matrix[(p_n, p_k)]
                w.writerow([p_n, p_k, count, f"{sr:.6f}"])


def _mention_stats(traces) -> MentionStats:
    if not traces:
        return MentionStats(0, 0.0, 0.0)
    counts = np.array([t.mention_count for t in traces], dtype=np.float64)
    return MentionStats(len(traces), float(counts.mean()), float(counts.std()))


def analytics_report(traces, max_turns: int):
    """Case analytics shared by the report: outcome-conditioned mention stats,
    SR by minimum mention count, and the (mentioned, identified) SR matrix."""
    succeeded = [t for t in traces if t.succeeded]
    failed = [t for t in traces if not t.succeeded]
    mention_stats = {
        "successful": _mention_stats(succeeded),
        "failed": _mention_stats(failed),
        "all": _mention_stats(traces),
    }
    sr_by_min = {}
    for threshold in (3, 4, 5, 6):
        bucket = [t for t in traces if t.mention_count >= threshold]
        sr_by_min[threshold] = (len(bucket), success_rate_at(bucket, max_turns))
    matrix = {}
    for trace in traces:
        key = (trace.mention_count, trace.identified)
        matrix.setdefault(key, []).append(trace)
    identified_matrix = {
        key: (len(bucket), success_rate_at(bucket, max_turns))
        for key, bucket in matrix.items()}
    return mention_stats, sr_by_min, identified_matrix


def _structure_histograms(forest):
    leaf_hist: dict[int, int] = {}
    spread_hist: dict[int, int] = {}
    for tree in forest.trees:
        spread: dict[int, int] = {}
        for leaf in tree.leaves():
            size = int(leaf.candidate_items.size)
            leaf_hist[size] = leaf_hist.get(size, 0) + 1
            for item in leaf.candidate_items.tolist():
                spread[item] = spread.get(item, 0) + 1
        for count in spread.values():
            spread_hist[count] = spread_hist.get(count, 0) + 1
    return leaf_hist, spread_hist


def run_benchmark(forest, dataset: Dataset, split: DataSplit, flags: AblationFlags,
                  config, *, users=None, collect_traces: bool = False):
    """One episode per held-out record of ``users`` (the split's test users by
    default). Returns the report, or (report, traces) with ``collect_traces``.
    """
    users = split.test_users if users is None else users
    record_index = dataset.records_of_users(users)
    traces: list[EpisodeTrace] = []
    for idx in record_index.tolist():
        record = dataset.record(idx)
        episode_seed = config.seed ^ (idx + 1)
        user = make_simulated_user(dataset, record, config, seed=episode_seed)
        traces.append(run_episode(forest, user, config, flags=flags,
                                  seed=episode_seed))

    T = config.max_turns
    sr_at = [success_rate_at(traces, t) for t in range(1, T + 1)]
    per_turn = []
    for t in range(1, T + 1):
        active = asks = recs = hits = 0
        for trace in traces:
            step = next((s for s in trace.steps if s.turn == t), None)
            if step is None:
                continue
            active += 1
            if step.kind == "ask":
                asks += 1
            else:
                recs += 1
                if step.accepted:
                    hits += 1
        per_turn.append(PerTurnRow(t, active, asks, recs, hits))

    leaf_hist, spread_hist = _structure_histograms(forest)
    mention_stats, sr_by_min, identified_matrix = analytics_report(traces, T)

    report = BenchmarkReport(
        n_episodes=len(traces), max_turns=T, top_k=config.top_k,
        seed=config.seed, flags=flags, sr_at=sr_at,
        avg_turns=average_turns(traces), per_turn=per_turn,
        leaf_item_hist=leaf_hist, item_spread_hist=spread_hist,
        mention_stats=mention_stats, sr_by_min_mentions=sr_by_min,
        identified_matrix=identified_matrix)
    if collect_traces:
        return report, traces
    return report
