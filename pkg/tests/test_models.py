import json

import numpy as np
import pytest

from stableseq.models import (
    CandidatePool,
    ImportanceModel,
    LinearModel,
    Model,
    SchemaError,
    TreeModel,
    TreeNode,
    ValidationError,
    extract_paths,
    gini_importance,
    load_pool,
    pools_equal,
    save_pool,
)


def make_depth2_tree(p=2):
    # f0 <= 2: (f0 <= 1 -> label 0 | label 1); f0 > 2: (f1 <= 7 -> label 1 | label 0)
    # impurity reductions: f0 carries 0.3 and 0.1, f1 carries 0.6
    nodes = (
        TreeNode.split(0, 2.0, 1, 4, 0.3),
        TreeNode.split(0, 1.0, 2, 3, 0.1),
        TreeNode.leaf(0, 4),
        TreeNode.leaf(1, 6),
        TreeNode.split(1, 7.0, 5, 6, 0.6),
        TreeNode.leaf(1, 3),
        TreeNode.leaf(0, 7),
    )
    return TreeModel(nodes=nodes, root=0, n_features=p)


def linear_pool(tmp_losses=(0.5, 0.25)):
    models = [
        Model(
            id=f"m{j}",
            representation=LinearModel(np.array([1.0, -2.0, 3.0]) * (j + 1), intercept=0.5 * j),
            train_loss=loss,
            val_loss=loss,
            metadata={"l2": 0.1 * (j + 1)},
        )
        for j, loss in enumerate(tmp_losses)
    ]
    bounds = np.array([[-1.0, 1.0], [-2.0, 2.0], [0.0, 5.0]])
    return CandidatePool(batch=1, n_features=3, feature_bounds=bounds, models=models)


class TestRoundTrip:
    def test_linear_pool_roundtrip(self, tmp_path):
        pool = linear_pool()
        path = tmp_path / "pool.json"
        save_pool(pool, path)
        loaded = load_pool(path)
        assert pools_equal(pool, loaded)
        assert len(loaded) == 2 and loaded.n_features == 3

    def test_tree_and_importance_roundtrip(self, tmp_path):
        tree = make_depth2_tree()
        models = [
            Model(id="t0", representation=tree, train_loss=0.1, val_loss=0.2),
            Model(id="i0", representation=ImportanceModel(np.array([0.25, 0.75]))),
        ]
        bounds = np.array([[0.0, 10.0], [0.0, 10.0]])
        pool = CandidatePool(batch=3, n_features=2, feature_bounds=bounds, models=models)
        path = tmp_path / "pool.json"
        save_pool(pool, path)
        assert pools_equal(pool, load_pool(path))

    def test_full_double_precision_survives(self, tmp_path):
        coefs = np.array([1 / 3, np.pi, 1e-17, 123456.789012345678])
        pool = CandidatePool(
            batch=1,
            n_features=4,
            feature_bounds=np.column_stack([np.zeros(4), np.ones(4)]),
            models=[Model(id="m", representation=LinearModel(coefs))],
        )
        save_pool(pool, tmp_path / "p.json")
        loaded = load_pool(tmp_path / "p.json")
        assert np.array_equal(loaded.models[0].representation.coefficients, coefs)


class TestValidation:
    def test_duplicate_ids_rejected(self):
        models = [
            Model(id="m", representation=ImportanceModel(np.ones(2))),
            Model(id="m", representation=ImportanceModel(np.zeros(2))),
        ]
        with pytest.raises(ValidationError, match="duplicate"):
            CandidatePool(1, 2, np.array([[0, 1], [0, 1]]), models)

    def test_missing_child_is_parse_error(self, tmp_path):
        doc = {
            "schema_version": 1, "batch": 1, "p": 1,
            "feature_bounds": [[0.0, 1.0]],
            "models": [{
                "id": "t", "kind": "tree",
                "payload": {"nodes": [{"f": 0, "t": 0.5, "l": 1, "r": 9, "gain": 0.1},
                                      {"label": 0, "n": 1}], "root": 0},
                "train_loss": None, "val_loss": None, "metadata": {},
            }],
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="child"):
            load_pool(path)

    def test_missing_field_named_in_error(self, tmp_path):
        doc = {"schema_version": 1, "batch": 1, "p": 1, "feature_bounds": [[0, 1]],
               "models": [{"id": "m", "kind": "linear", "payload": {"intercept": 0.0, "task": "regression"}}]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="coefficients"):
            load_pool(path)

    def test_nan_loss_refused_before_write(self, tmp_path):
        with pytest.raises(ValidationError):
            Model(id="m", representation=ImportanceModel(np.ones(2)), train_loss=float("nan"))
        # a loss corrupted after construction is still refused at save time
        pool = linear_pool()
        pool.models[0].val_loss = float("nan")
        with pytest.raises(ValidationError):
            save_pool(pool, tmp_path / "p.json")

    def test_empty_model_list_refused(self):
        with pytest.raises(ValidationError, match="at least one"):
            CandidatePool(1, 2, np.array([[0, 1], [0, 1]]), [])

    def test_nonfinite_coefficients_rejected(self):
        with pytest.raises(ValidationError):
            LinearModel(np.array([1.0, np.inf]))

    def test_negative_importance_rejected(self):
        with pytest.raises(ValidationError):
            ImportanceModel(np.array([0.5, -0.1]))

    def test_tree_cycle_rejected(self):
        nodes = (
            TreeNode.split(0, 1.0, 1, 0, 0.1),  # right edge points back at the root
            TreeNode.leaf(0, 1),
        )
        with pytest.raises(ValidationError):
            TreeModel(nodes=nodes, root=0, n_features=1)

    def test_tree_two_parents_rejected(self):
        nodes = (
            TreeNode.split(0, 1.0, 1, 2, 0.1),
            TreeNode.split(0, 0.5, 2, 3, 0.1),  # leaf 2 reachable twice
            TreeNode.leaf(0, 1),
            TreeNode.leaf(1, 1),
        )
        with pytest.raises(ValidationError):
            TreeModel(nodes=nodes, root=0, n_features=1)

    def test_unreachable_node_rejected(self):
        nodes = (TreeNode.leaf(0, 1), TreeNode.leaf(1, 1))
        with pytest.raises(ValidationError, match="unreachable"):
            TreeModel(nodes=nodes, root=0, n_features=1)


class TestExtractPaths:
    def test_single_leaf_has_full_range_intervals(self):
        tree = TreeModel(nodes=(TreeNode.leaf(1, 10),), root=0, n_features=2)
        bounds = np.array([[0.0, 10.0], [-1.0, 1.0]])
        paths = extract_paths(tree, bounds)
        assert len(paths) == 1
        assert paths[0].label == 1
        assert np.array_equal(paths[0].lo, bounds[:, 0])
        assert np.array_equal(paths[0].hi, bounds[:, 1])

    def test_depth1_split(self):
        nodes = (TreeNode.split(0, 3.5, 1, 2, 0.2), TreeNode.leaf(0, 5), TreeNode.leaf(1, 5))
        tree = TreeModel(nodes=nodes, root=0, n_features=1)
        paths = extract_paths(tree, np.array([[0.0, 10.0]]))
        assert [(p.lo[0], p.hi[0], p.label) for p in paths] == [(0.0, 3.5, 0), (3.5, 10.0, 1)]

    def test_depth2_hand_walked_intervals(self):
        # hand-walked boxes for the four root-to-leaf routes of make_depth2_tree
        tree = make_depth2_tree()
        bounds = np.array([[0.0, 10.0], [0.0, 10.0]])
        paths = extract_paths(tree, bounds)
        assert len(paths) == 4 == len(tree.leaf_indices)
        boxes = [(p.lo[0], p.hi[0], p.lo[1], p.hi[1], p.label) for p in paths]
        assert boxes == [
            (0.0, 1.0, 0.0, 10.0, 0),
            (1.0, 2.0, 0.0, 10.0, 1),
            (2.0, 10.0, 0.0, 7.0, 1),
            (2.0, 10.0, 7.0, 10.0, 0),
        ]

    def test_paths_tile_the_bounded_box(self, rng):
        bounds = np.array([[0.0, 4.0], [-2.0, 2.0], [1.0, 3.0]])
        tree = None
        from conftest import random_tree

        tree = random_tree(rng, 3, bounds, max_depth=3)
        paths = extract_paths(tree, bounds)
        for _ in range(1000):
            x = rng.uniform(bounds[:, 0], bounds[:, 1])
            hits = sum(p.contains(x) for p in paths)
            assert hits == 1

    def test_infinite_bounds_rejected(self):
        tree = TreeModel(nodes=(TreeNode.leaf(0, 1),), root=0, n_features=1)
        with pytest.raises(ValidationError):
            extract_paths(tree, np.array([[0.0, np.inf]]))

    def test_threshold_outside_bounds_rejected(self):
        nodes = (TreeNode.split(0, 20.0, 1, 2, 0.1), TreeNode.leaf(0, 1), TreeNode.leaf(1, 1))
        tree = TreeModel(nodes=nodes, root=0, n_features=1)
        with pytest.raises(ValidationError, match="empty interval"):
            extract_paths(tree, np.array([[0.0, 10.0]]))


class TestGiniImportance:
    def test_single_leaf_gives_zero_vector(self):
        tree = TreeModel(nodes=(TreeNode.leaf(0, 3),), root=0, n_features=4)
        assert np.array_equal(gini_importance(tree).importances, np.zeros(4))

    def test_single_feature_splits_get_full_weight(self):
        nodes = (TreeNode.split(2, 1.0, 1, 2, 0.7), TreeNode.leaf(0, 1), TreeNode.leaf(1, 1))
        tree = TreeModel(nodes=nodes, root=0, n_features=4)
        imp = gini_importance(tree).importances
        assert imp[2] == 1.0 and imp.sum() == 1.0

    def test_recorded_reductions_sum_and_normalize(self):
        # reductions f0: 0.3 + 0.1, f1: 0.6 -> importances (0.4, 0.6)
        tree = make_depth2_tree()
        imp = gini_importance(tree).importances
        assert imp == pytest.approx([0.4, 0.6], abs=1e-12)

    def test_importance_sums_to_one(self, rng):
        from conftest import random_tree

        bounds = np.array([[0.0, 1.0]] * 3)
        for _ in range(20):
            tree = random_tree(rng, 3, bounds, max_depth=3)
            imp = gini_importance(tree).importances
            assert np.all(imp >= 0)
            total = sum(n.gain for n in tree.nodes if not n.is_leaf)
            if total > 0:
                assert imp.sum() == pytest.approx(1.0, abs=1e-9)
