import numpy as np
import pytest

from flowguard.ensemble import (
    Hyperparameters,
    ModelArtifact,
    VotingEnsemble,
    hard_vote,
    load_model,
    predict_ensemble,
    save_model,
    soft_vote,
)
from flowguard.errors import ParameterError


class TestHardVote:
    def test_strict_majority(self):
        assert hard_vote([1, 1, 0]) == 1

    def test_tie_goes_to_lowest_index(self):
        assert hard_vote([0, 1]) == 0

    def test_unanimity(self):
        assert hard_vote([1, 1, 1]) == 1

    def test_empty_errors(self):
        with pytest.raises(ParameterError):
            hard_vote([])


class TestSoftVote:
    def test_hand_arithmetic(self):
        label, mean = soft_vote([(0.6, 0.4), (0.3, 0.7), (0.4, 0.6)])
        assert label == 1
        assert mean == pytest.approx([0.43333333, 0.56666667], abs=1e-8)

    def test_identical_vectors(self):
        label, mean = soft_vote([(0.2, 0.8)] * 3)
        assert label == 1
        assert mean == pytest.approx([0.2, 0.8])

    def test_second_hand_case(self):
        label, mean = soft_vote([(1.0, 0.0), (0.5, 0.5), (0.5, 0.5)])
        assert label == 0
        assert mean == pytest.approx([2 / 3, 1 / 3], abs=1e-12)

    def test_mean_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            probs = rng.dirichlet(np.ones(2), size=3)
            _, mean = soft_vote(probs)
            assert abs(mean.sum() - 1.0) <= 1e-9

    def test_shape_mismatch_errors(self):
        with pytest.raises(ParameterError):
            soft_vote([(0.5, 0.5), (0.2, 0.3, 0.5)])

    def test_agrees_with_hard_when_argmaxes_agree(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            probs = rng.dirichlet(np.ones(2), size=3)
            argmaxes = [int(np.argmax(p)) for p in probs]
            if len(set(argmaxes)) == 1:
                label, _ = soft_vote(probs)
                assert label == hard_vote(argmaxes)


@pytest.fixture(scope="module")
def trained():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 5))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    model = VotingEnsemble(rf_n_trees=10, gbt_n_rounds=10, random_state=3).fit(X, y)
    X_test = rng.normal(size=(60, 5))
    return model, X, y, X_test


class TestVotingEnsemble:
    def test_reasonable_accuracy(self, trained):
        model, X, y, _ = trained
        assert np.mean(model.predict(X) == y) > 0.95

    def test_hard_matches_per_row_vote(self, trained):
        model, _, _, X_test = trained
        probs = model.base_probabilities(X_test)
        expected = [hard_vote([int(np.argmax(probs[b, r])) for b in range(3)])
                    for r in range(X_test.shape[0])]
        assert model.predict(X_test, voting="hard").tolist() == expected

    def test_soft_matches_per_row_vote(self, trained):
        model, _, _, X_test = trained
        probs = model.base_probabilities(X_test)
        expected = [soft_vote([probs[b, r] for b in range(3)])[0]
                    for r in range(X_test.shape[0])]
        assert model.predict(X_test, voting="soft").tolist() == expected

    def test_predict_ensemble_single_row(self, trained):
        model, _, _, X_test = trained
        row = X_test[0]
        label_soft, mean = predict_ensemble(model.dt_, model.rf_, model.gbt_, row, "soft")
        assert label_soft == model.predict(row.reshape(1, -1), voting="soft")[0]
        assert mean == pytest.approx(model.predict_proba(row.reshape(1, -1))[0])
        label_hard, _ = predict_ensemble(model.dt_, model.rf_, model.gbt_, row, "hard")
        assert label_hard == model.predict(row.reshape(1, -1), voting="hard")[0]

    def test_modes_agree_when_bases_agree(self, trained):
        model, _, _, X_test = trained
        probs = model.base_probabilities(X_test)
        argmaxes = np.argmax(probs, axis=2)
        agree = np.all(argmaxes == argmaxes[0], axis=0)
        hard = model.predict(X_test, voting="hard")
        soft = model.predict(X_test, voting="soft")
        assert np.array_equal(hard[agree], soft[agree])

    def test_hyperparameters_round_trip(self):
        hp = Hyperparameters(dt_max_depth=3, rf_n_trees=11, voting="hard")
        model = VotingEnsemble.from_hyperparameters(hp)
        assert model.hyperparameters() == hp

    def test_invalid_voting_rejected(self):
        with pytest.raises(ParameterError):
            Hyperparameters(voting="ranked")


class TestPersistence:
    def test_round_trip_bit_identical_predictions(self, trained, tmp_path):
        model, _, _, X_test = trained
        artifact = ModelArtifact(
            ensemble=model,
            feature_mask=np.ones(5, dtype=bool),
            feature_names=[f"f{j}" for j in range(5)],
        )
        path = tmp_path / "model.json"
        save_model(artifact, path)
        back = load_model(path)
        for mode in ("hard", "soft"):
            assert np.array_equal(back.ensemble.predict(X_test, voting=mode),
                                  model.predict(X_test, voting=mode))
        assert np.array_equal(back.ensemble.predict_proba(X_test),
                              model.predict_proba(X_test))
        assert back.feature_names == artifact.feature_names
        assert np.array_equal(back.feature_mask, artifact.feature_mask)

    def test_version_check(self, trained, tmp_path):
        model, _, _, _ = trained
        artifact = ModelArtifact(model, np.ones(5, dtype=bool), ["a"] * 5)
        doc = artifact.to_dict()
        doc["version"] = 99
        import json
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ParameterError):
            load_model(path)
