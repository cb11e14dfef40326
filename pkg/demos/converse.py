"""One full conversation, printed turn by turn.

The "user" here is the recorded simulator: it answers yes exactly for the
attributes its held-out interaction mentioned, and accepts a list only if
the target item is on it.
"""

import factcrs as fc

dataset, _ = fc.generate_synthetic(
    fc.SyntheticSpec(n_users=60, n_items=48, n_attributes=8,
                     n_records=800, depth=3, noise=0.0, seed=7))
config = fc.RunConfig(embedding_dim=16, num_trees=5, max_depth=5, seed=11)
split = fc.split_by_user(dataset, config.seed)
forest = fc.build_forest(dataset, config, users=split.train_users)

# take the first held-out interaction as the conversation goal
record = dataset.record(int(dataset.records_of_users(split.test_users)[0]))
user = fc.make_simulated_user(dataset, record, config, seed=1)
print(f"user {record.user} is secretly after item {record.item}; "
      f"they will say yes to attributes {sorted(user.yes_set)}")

state = fc.start_session(forest, seed=1)
while not fc.is_terminal(state):
    action = fc.current_action(state)
    if action is None:
        print("nothing left to show")
        break
    if isinstance(action, fc.Ask):
        answer = fc.oracle_answer(user, action.attribute)
        label = forest.vocabulary.label(action.attribute)
        print(f"t{state.turn} [tree {state.tree_index}] "
              f"system asks {label!r}  ->  {'yes' if answer else 'no'}")
        fc.apply_answer(state, answer)
    else:
        accepted = fc.oracle_feedback(user, action.items)
        print(f"t{state.turn} system recommends {list(action.items)}"
              f"  ->  {'ACCEPT' if accepted else 'reject'}")
        if accepted:
            fc.apply_acceptance(state)
        else:
            fc.apply_rejection(state)

print(f"outcome: {state.status} in {state.turns_used} of "
      f"{config.max_turns} turns")
