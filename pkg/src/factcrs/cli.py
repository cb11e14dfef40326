"""Command line front end: train, eval, simulate, serve, chat, config."""

from __future__ import annotations

import argparse
import sys

from .benchmark import run_benchmark
from .config import RunConfig, load_config
from .data import load_dataset, split_by_user
from .errors import ConfigError, DataFormatError, FactCrsError, VocabularyMismatchError
from .forest import build_forest, load_model, save_model
from .session import (AblationFlags, Ask, apply_acceptance, apply_answer,
                      apply_rejection, current_action, is_terminal,
                      start_session)
from .simulate import make_simulated_user, run_episode, save_traces

EXIT_DATA = 2
EXIT_VOCABULARY = 3

_ABLATIONS = {
    "no-candidates": "use_candidates",
    "no-forest": "use_forest",
    "no-early-rec": "use_early_rec",
    "no-online-feedback": "use_online_feedback",
}


def _flags_from(names) -> AblationFlags:
    disabled = {}
    for name in names or ():
        if name not in _ABLATIONS:
            raise ConfigError(
                f"unknown ablation {name!r}; known: {', '.join(sorted(_ABLATIONS))}")
        disabled[_ABLATIONS[name]] = False
    return AblationFlags(**disabled)


def _load_run_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        config = load_config(args.config, config)
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    return config


def cmd_train(args) -> int:
    config = _load_run_config(args)
    dataset = load_dataset(args.data)
    split = split_by_user(dataset, config.seed)
    build_log: list = []
    forest = build_forest(dataset, config, users=split.train_users,
                          build_log=build_log)
    save_model(forest, args.out)
    log_path = f"{args.out}.train.log"
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(f"records: {dataset.records_of_users(split.train_users).size}"
                 f" of {dataset.n_records}\n")
        fh.write(f"items: {dataset.n_items}  attributes: {dataset.n_attributes}"
                 f"  trees: {forest.n_trees}  pool: "
                 f"{forest.config.max_attributes_per_tree}\n")
        for entry in build_log:
            fh.write(f"tree {entry['tree']} node {entry['node']} depth {entry['depth']}"
                     f" attr {entry['attribute']}"
                     f" search_obj {entry['search_objective']:.6f}"
                     f" commit_obj {entry['commit_objective']:.6f}"
                     f" split {entry['pos_records']}/{entry['neg_records']}\n")
    print(f"model written to {args.out} ({forest.n_trees} trees, "
          f"{forest.n_items} items); log: {log_path}")
    return 0


def _check_vocabulary(forest, dataset):
    if forest.vocabulary.names != dataset.vocabulary.names:
        raise VocabularyMismatchError(
            f"model vocabulary ({forest.vocabulary.size} attributes) does not "
            f"match dataset vocabulary ({dataset.vocabulary.size} attributes)")


def cmd_eval(args) -> int:
    forest = load_model(args.model)
    dataset = load_dataset(args.data)
    _check_vocabulary(forest, dataset)
    config = forest.config
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    split_seed = args.split_seed if args.split_seed is not None else config.seed
    split = split_by_user(dataset, split_seed)
    flags = _flags_from(args.ablate)
    users = split.held_out_users if args.heldout else split.test_users
    report, traces = run_benchmark(forest, dataset, split, flags, config,
                                   users=users, collect_traces=True)
    print(f"episodes: {report.n_episodes}")
    print(f"SR@{report.max_turns}: {report.success_rate:.4f}")
    print(f"AT: {report.avg_turns:.4f}")
    if args.report:
        from pathlib import Path
        out = Path(args.report)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        report.write_csvs(out)
        save_traces(traces, out / "traces.jsonl")
        print(f"report written to {out}")
    return 0


def cmd_simulate(args) -> int:
    forest = load_model(args.model)
    dataset = load_dataset(args.data)
    _check_vocabulary(forest, dataset)
    config = forest.config
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    split = split_by_user(dataset, config.seed)
    flags = _flags_from(args.ablate)
    record_index = dataset.records_of_users(split.test_users)[:args.episodes]
    traces = []
    for idx in record_index.tolist():
        record = dataset.record(idx)
        episode_seed = config.seed ^ (idx + 1)
        user = make_simulated_user(dataset, record, config, seed=episode_seed)
        traces.append(run_episode(forest, user, config, flags=flags,
                                  seed=episode_seed))
    for trace in traces[:args.show]:
        print(f"episode user={trace.user} target={trace.target_item} "
              f"outcome={trace.outcome} turns={trace.turns_used}")
        for step in trace.steps:
            if step.kind == "ask":
                label = forest.vocabulary.label(step.attribute)
                print(f"  t{step.turn} ask {label!r} -> "
                      f"{'yes' if step.answer else 'no'}")
            else:
                mark = "accepted" if step.accepted else "rejected"
                print(f"  t{step.turn} recommend {list(step.items)} -> {mark}")
    hits = sum(1 for t in traces if t.succeeded)
    print(f"{len(traces)} episode(s), {hits} succeeded")
    if args.out:
        save_traces(traces, args.out)
        print(f"traces written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    forest = load_model(args.model)
    app = create_app(forest)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_chat(args, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def say(text):
        print(text, file=stdout)

    def ask_line(prompt):
        print(prompt, end="", file=stdout, flush=True)
        line = stdin.readline()
        if not line:
            raise EOFError
        return line.strip().lower()

    forest = load_model(args.model)
    config = forest.config
    state = start_session(forest, args.seed if args.seed is not None else 0)
    say(f"chat session over {forest.n_items} items "
        f"(budget {config.max_turns} turns); answer y/n, or a/r for lists")
    try:
        while not is_terminal(state):
            action = current_action(state)
            if action is None:
                say("nothing left to recommend")
                break
            if isinstance(action, Ask):
                label = forest.vocabulary.label(action.attribute)
                while True:
                    reply = ask_line(f"[turn {state.turn}] do you like {label}? (y/n) ")
                    if reply in ("y", "yes", "n", "no"):
                        break
                    say("please answer y or n")
                apply_answer(state, reply.startswith("y"))
            else:
                say(f"[turn {state.turn}] how about:")
                for rank, item in enumerate(action.items, start=1):
                    say(f"  {rank}. item {item}")
                while True:
                    reply = ask_line("accept or reject? (a/r) ")
                    if reply in ("a", "accept", "r", "reject"):
                        break
                    say("please answer a or r")
                if reply.startswith("a"):
                    apply_acceptance(state)
                    say(f"great, settled in {state.turns_used} turn(s)")
                else:
                    apply_rejection(state)
        if state.status == "failed":
            say(f"out of turns after {state.turns_used}")
    except EOFError:
        say("bye")
    return 0


def cmd_config(args) -> int:
    if args.action != "show":
        raise ConfigError(f"unknown config action {args.action!r}; try 'show'")
    config = RunConfig()
    if args.config:
        config = load_config(args.config, config)
    print(config.to_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fact-crs",
        description="factorization-tree conversational recommender")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest on a corpus directory")
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="benchmark a model on held-out users")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, help="episode seed override")
    p.add_argument("--split-seed", type=int, dest="split_seed",
                   help="user split seed (defaults to the episode seed)")
    p.add_argument("--report", help="directory for report.txt, CSVs and traces")
    p.add_argument("--ablate", action="append",
                   help="disable one component: " + ", ".join(sorted(_ABLATIONS)))
    p.add_argument("--heldout", action="store_true",
                   help="evaluate on validation plus test users")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run simulated episodes, print transcripts")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--show", type=int, default=3, help="transcripts to print")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write traces as JSON lines")
    p.add_argument("--ablate", action="append")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="serve the HTTP session API")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8040)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("chat", help="drive one session on the terminal")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("config", help="inspect configuration")
    p.add_argument("action", nargs="?", default="show")
    p.add_argument("--config", help="key=value config file to overlay")
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except VocabularyMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VOCABULARY
    except (FactCrsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
