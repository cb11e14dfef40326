"""Conversation policy: actions, turn accounting, rejection feedback, ablations."""

import numpy as np
import pytest

import factcrs as fc
from oracles import brute_rank

ALL_ON = fc.AblationFlags()


def leaf(node_id, depth, embedding, items):
    return fc.TreeNode(node_id=node_id, depth=depth,
                       embedding=np.array(embedding, dtype=np.float64),
                       interaction_count=len(items),
                       candidate_items=np.array(sorted(items), dtype=np.int64),
                       gini=0.0)


def hand_forest(top_k=2, max_turns=4, early_rec_threshold=1, n_trees=2,
                **overrides):
    """Two-tree toy forest over six items with transparent geometry.

    Tree 0 asks attribute 0 and splits items {0,1} / {2,3}; tree 1 is a bare
    leaf holding {4,5}. Item vectors lie on the axes so every score is easy
    to read off.
    """
    vectors = np.array([[1.0, 0.0], [0.9, 0.0], [0.0, 1.0],
                        [0.0, 0.9], [-1.0, 0.0], [0.0, -1.0]])
    table = fc.ItemEmbeddingTable(vectors, frozen=True)

    root = fc.TreeNode(node_id=0, depth=0, embedding=np.array([1.0, 1.0]),
                       interaction_count=4,
                       candidate_items=np.array([0, 1, 2, 3], dtype=np.int64),
                       gini=0.75, split_attribute=0)
    root.pos_child = leaf(1, 1, [1.0, 0.0], [0, 1])
    root.neg_child = leaf(2, 1, [0.0, 1.0], [2, 3])
    tree0 = fc.InteractionTree(root, np.array([0], dtype=np.int64), 1,
                               [root, root.pos_child, root.neg_child])

    lone = leaf(0, 0, [-1.0, 0.0], [4, 5])
    tree1 = fc.InteractionTree(lone, np.empty(0, dtype=np.int64), 1, [lone])

    config = fc.RunConfig(embedding_dim=2, num_trees=n_trees, top_k=top_k,
                          max_turns=max_turns,
                          early_rec_threshold=early_rec_threshold, **overrides)
    vocab = fc.AttributeVocabulary(("likes_red", "likes_round"))
    trees = [tree0, tree1][:n_trees]
    return fc.InteractionForest(trees, table, vocab, config)


def seed_starting_at(forest, tree_index):
    for seed in range(200):
        if int(np.random.default_rng(seed).integers(forest.n_trees)) == tree_index:
            return seed
    raise AssertionError("no seed found")


class TestStart:
    def test_start_tree_matches_rng_oracle(self):
        forest = hand_forest()
        seen = set()
        for seed in range(40):
            state = fc.start_session(forest, seed)
            want = int(np.random.default_rng(seed).integers(forest.n_trees))
            assert state.tree_index == want
            assert state.node is forest.trees[want].root
            seen.add(want)
        assert seen == {0, 1}

    def test_fresh_state(self):
        forest = hand_forest()
        state = fc.start_session(forest, 0)
        assert state.turn == 1
        assert state.status == "active"
        assert state.answers == {}
        assert state.excluded == set()
        assert np.array_equal(state.delta, np.zeros(2))


class TestFusedEmbedding:
    def test_mean_of_collected_and_current_plus_offset(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.collected = [np.array([1.0, 3.0]), np.array([3.0, 5.0])]
        state.node = leaf(9, 0, [2.0, 1.0], [0])
        state.delta = np.array([0.5, -1.0])
        got = fc.fused_embedding(state)
        assert np.max(np.abs(got - np.array([2.5, 2.0]))) < 1e-12

    def test_bare_offset_when_nothing_collected(self):
        forest = hand_forest()
        state = fc.start_session(forest, 0)
        state.node = None
        state.delta = np.array([0.25, 0.75])
        got = fc.fused_embedding(state)
        assert np.array_equal(got, state.delta)
        got[0] = 99.0  # the caller owns the returned array
        assert state.delta[0] == 0.25


class TestRanking:
    def test_score_descending_then_id_ascending(self):
        # items B(id 0) and C(id 1) tie, A(id 2) wins: order is A, B, C
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.node = None
        state.collected = [np.array([1.0, 0.0])]
        vectors = np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0],
                            [-1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]])
        state.forest = fc.InteractionForest(
            forest.trees, fc.ItemEmbeddingTable(vectors, frozen=True),
            forest.vocabulary, forest.config.replace(top_k=3))
        assert fc.assemble_recommendation(state) == (2, 0, 1)

    def test_matches_brute_ranking_with_fill(self):
        forest = hand_forest(top_k=3)
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.node = forest.trees[0].root.pos_child   # candidates {0, 1}
        state.excluded = {1}
        s_t = fc.fused_embedding(state)
        scores = {i: float(forest.items.vectors[i] @ s_t) for i in range(6)}
        want = brute_rank([0], scores, 3)
        want += brute_rank([i for i in range(6) if i not in (0, 1)], scores,
                          3 - len(want))
        assert fc.assemble_recommendation(state) == tuple(want)

    def test_list_shrinks_when_catalog_nearly_excluded(self):
        forest = hand_forest(top_k=4)
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.excluded = {0, 1, 2, 3, 5}
        state.node = None
        assert fc.assemble_recommendation(state) == (4,)

    def test_nothing_left_fails_the_session(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.excluded = set(range(6))
        assert fc.current_action(state) is None
        assert state.status == "failed"
        assert state.turns_used == forest.config.max_turns
        with pytest.raises(fc.SessionProtocolError):
            fc.current_action(state)


class TestQuestionFlow:
    def test_internal_node_asks_its_attribute(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        action = fc.current_action(state)
        assert action == fc.Ask(0)
        assert fc.current_action(state) == action  # idempotent until applied

    def test_answer_descends_and_consumes_a_turn(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        fc.current_action(state)
        fc.apply_answer(state, True)
        assert state.answers == {0: True}
        assert state.node is forest.trees[0].root.pos_child
        assert state.turn == 2
        action = fc.current_action(state)
        assert isinstance(action, fc.Recommend)
        assert set(action.items) <= {0, 1}

    def test_already_answered_attributes_cost_nothing(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.answers = {0: False}
        action = fc.current_action(state)
        assert isinstance(action, fc.Recommend)   # descended to the neg leaf
        assert state.node is forest.trees[0].root.neg_child
        assert state.turn == 1                    # no turn was spent descending


class TestTurnAccounting:
    def test_acceptance_records_the_current_turn(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        fc.current_action(state)
        fc.apply_answer(state, True)          # turn 1 -> 2
        fc.current_action(state)
        fc.apply_acceptance(state)
        assert state.status == "succeeded"
        assert state.turns_used == 2

    def test_rejecting_forever_fails_at_the_budget(self):
        forest = hand_forest(max_turns=4)
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        consumed = 0
        while not fc.is_terminal(state):
            action = fc.current_action(state)
            if action is None:
                break
            consumed += 1
            if isinstance(action, fc.Ask):
                fc.apply_answer(state, False)
            else:
                fc.apply_rejection(state)
        assert state.status == "failed"
        assert state.turns_used == 4
        assert consumed <= 4


class TestRejection:
    def test_offset_matches_hand_computation(self):
        forest = hand_forest()   # alpha defaults: 1e-3 promote, 1e-2 penalize
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        fc.current_action(state)
        fc.apply_answer(state, True)          # at pos leaf {0, 1}, s_t = (1, 0)
        action = fc.current_action(state)
        assert action.items == (0, 1)

        # promoted = best 2 of {2,3,4,5} under s_t: scores 0,0,-1,0 -> [2, 3]
        v = forest.items.vectors
        expected = (1e-3 / 2) * (v[2] + v[3]) - (1e-2 / 2) * (v[0] + v[1])
        fc.apply_rejection(state)
        assert np.max(np.abs(state.delta - expected)) < 1e-12
        assert state.excluded == {0, 1}
        assert state.visited == {0}
        assert state.tree_index == 1          # only tree left
        assert state.node is forest.trees[1].root
        assert len(state.collected) == 1
        assert np.array_equal(state.collected[0],
                              forest.trees[0].root.pos_child.embedding)

    def test_rejected_items_never_reappear(self):
        forest = hand_forest(max_turns=6)
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        seen = []
        while not fc.is_terminal(state):
            action = fc.current_action(state)
            if action is None:
                break
            if isinstance(action, fc.Ask):
                fc.apply_answer(state, False)
            else:
                for item in action.items:
                    assert item not in seen
                seen.extend(action.items)
                fc.apply_rejection(state)

    def test_exclude_rejected_off_keeps_items_in_play(self):
        forest = hand_forest(exclude_rejected=False)
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        fc.current_action(state)
        fc.apply_answer(state, True)
        fc.current_action(state)
        fc.apply_rejection(state)
        assert state.excluded == set()

    def test_exhausted_forest_recommends_from_catalog(self):
        forest = hand_forest(n_trees=1, max_turns=6, top_k=2)
        state = fc.start_session(forest, 0)
        assert state.tree_index == 0
        fc.current_action(state)
        fc.apply_answer(state, True)
        fc.current_action(state)
        fc.apply_rejection(state)             # no other tree to hop to
        assert state.exhausted
        assert state.node is None
        action = fc.current_action(state)
        assert isinstance(action, fc.Recommend)
        assert set(action.items) <= set(range(6)) - state.excluded
        before = set(state.excluded)
        fc.apply_rejection(state)             # rejection still works exhausted
        assert state.excluded > before

    def test_next_tree_argmax_with_lowest_index_ties(self):
        forest = hand_forest()
        extra = fc.InteractionTree(leaf(0, 0, [1.0, 0.0], [4]),
                                   np.empty(0, dtype=np.int64), 1,
                                   [leaf(0, 0, [1.0, 0.0], [4])])
        trees = [forest.trees[0], forest.trees[1], extra]
        big = fc.InteractionForest(trees, forest.items, forest.vocabulary,
                                   forest.config)
        state = fc.start_session(big, seed_starting_at(big, 0))
        state.node = None
        state.collected = [np.array([1.0, 0.0])]   # s_t = (1, 0)
        # scores: tree0 root (1,1)->1, tree1 (-1,0)->-1, tree2 (1,0)->1
        assert fc.select_next_tree(state) == 0     # tie 0 vs 2, lowest wins
        state.visited = {0}
        assert fc.select_next_tree(state) == 2
        state.visited = {0, 1, 2}
        with pytest.raises(fc.SessionProtocolError, match="every tree"):
            fc.select_next_tree(state)


class TestAblations:
    def test_no_online_feedback_freezes_delta_and_hops_randomly(self):
        forest = hand_forest()
        flags = fc.AblationFlags(use_online_feedback=False)
        seed = seed_starting_at(forest, 0)
        state = fc.start_session(forest, seed, flags)
        fc.current_action(state)
        fc.apply_answer(state, True)
        fc.current_action(state)

        oracle = np.random.default_rng(seed)
        oracle.integers(forest.n_trees)       # consumed picking the start tree
        want = int(oracle.choice(np.array([1])))
        fc.apply_rejection(state)
        assert np.array_equal(state.delta, np.zeros(2))
        assert state.tree_index == want

    def test_no_forest_pins_the_starting_tree(self):
        forest = hand_forest()
        flags = fc.AblationFlags(use_forest=False)
        state = fc.start_session(forest, seed_starting_at(forest, 0), flags)
        fc.current_action(state)
        fc.apply_answer(state, True)
        fc.current_action(state)
        fc.apply_rejection(state)
        assert state.exhausted                # never hops to tree 1
        assert state.visited == {0}

    def test_no_candidates_ranks_over_the_catalog(self):
        forest = hand_forest(top_k=1)
        seed = seed_starting_at(forest, 0)

        confined = fc.start_session(forest, seed)
        confined.answers = {0: False}          # descend to neg leaf {2, 3}
        confined.delta = np.array([5.0, 0.0])  # push scores toward item 0
        action = fc.current_action(confined)
        assert action.items[0] in (2, 3)

        free = fc.start_session(forest, seed, fc.AblationFlags(use_candidates=False))
        free.answers = {0: False}
        free.delta = np.array([5.0, 0.0])
        action = fc.current_action(free)
        assert action.items[0] == 0            # catalog-wide ranking

    def test_no_early_rec_asks_to_the_leaf(self):
        forest = hand_forest(early_rec_threshold=4)   # root avail 4 <= 4
        seed = seed_starting_at(forest, 0)
        eager = fc.start_session(forest, seed)
        assert isinstance(fc.current_action(eager), fc.Recommend)

        patient = fc.start_session(forest, seed,
                                   fc.AblationFlags(use_early_rec=False))
        assert fc.current_action(patient) == fc.Ask(0)


class TestProtocolErrors:
    def test_answer_without_question(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        with pytest.raises(fc.SessionProtocolError, match="no question"):
            fc.apply_answer(state, True)

    def test_feedback_without_recommendation(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        fc.current_action(state)              # pending Ask
        with pytest.raises(fc.SessionProtocolError, match="no recommendation"):
            fc.apply_rejection(state)
        with pytest.raises(fc.SessionProtocolError, match="no recommendation"):
            fc.apply_acceptance(state)

    def test_answer_when_recommendation_pending(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.answers = {0: True}
        fc.current_action(state)              # pending Recommend
        with pytest.raises(fc.SessionProtocolError, match="no question"):
            fc.apply_answer(state, True)

    def test_everything_raises_after_terminal(self):
        forest = hand_forest()
        state = fc.start_session(forest, seed_starting_at(forest, 0))
        state.answers = {0: True}
        fc.current_action(state)
        fc.apply_acceptance(state)
        for call in (lambda: fc.current_action(state),
                     lambda: fc.apply_answer(state, True),
                     lambda: fc.apply_rejection(state),
                     lambda: fc.apply_acceptance(state)):
            with pytest.raises(fc.SessionProtocolError, match="succeeded"):
                call()

    def test_empty_forest_rejected(self):
        forest = hand_forest()
        empty = fc.InteractionForest([], forest.items, forest.vocabulary,
                                     forest.config)
        with pytest.raises(ValueError, match="no trees"):
            fc.start_session(empty, 0)


class TestFeedbackOffset:
    def test_promoted_mean_example(self):
        table = fc.ItemEmbeddingTable(
            np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 2.0]]), frozen=True)
        got = fc.feedback_offset(table, [], [0, 1], 1.0, 0.5)
        assert np.max(np.abs(got - np.array([1.5, 0.0]))) < 1e-12

    def test_rejected_mean_is_subtracted(self):
        table = fc.ItemEmbeddingTable(
            np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 2.0]]), frozen=True)
        got = fc.feedback_offset(table, [2], [0, 1], 1.0, 0.5)
        assert np.max(np.abs(got - np.array([1.5, -1.0]))) < 1e-12

    def test_both_empty_is_zero(self):
        table = fc.ItemEmbeddingTable(np.array([[1.0]]), frozen=True)
        assert np.array_equal(fc.feedback_offset(table, [], [], 1.0, 1.0),
                              np.zeros(1))
