"""Voting combination of the three base classifiers, plus model persistence.

Two combiners are supported: hard voting takes the majority of the base
labels, soft voting averages the base probability vectors and takes the
argmax. Ties break toward the lowest class index in both modes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .boosting import GradientBoostedTrees
from .errors import ParameterError
from .preprocess import EncoderState
from .trees import DecisionTree, RandomForest, TreeNode
from .validation import as_matrix, check_count

__all__ = [
    "Hyperparameters",
    "hard_vote",
    "soft_vote",
    "predict_ensemble",
    "VotingEnsemble",
    "ModelArtifact",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "flowguard-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperparameters:
    """Ensemble knobs searched by the tuner."""

    dt_max_depth: int = 8
    rf_n_trees: int = 30
    rf_max_depth: int = 10
    gbt_n_rounds: int = 40
    gbt_max_depth: int = 4
    gbt_learning_rate: float = 0.3
    gbt_reg_lambda: float = 1.0
    voting: str = "soft"

    def __post_init__(self) -> None:
        for name in ("dt_max_depth", "rf_n_trees", "rf_max_depth", "gbt_n_rounds", "gbt_max_depth"):
            check_count(name, getattr(self, name))
        if not 0.0 < self.gbt_learning_rate <= 1.0:
            raise ParameterError(f"gbt_learning_rate must be in (0, 1], got {self.gbt_learning_rate}")
        if self.gbt_reg_lambda < 0:
            raise ParameterError("gbt_reg_lambda must be >= 0")
        if self.voting not in ("hard", "soft"):
            raise ParameterError(f"voting must be 'hard' or 'soft', got {self.voting!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Hyperparameters":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return cls(**doc)


def hard_vote(votes) -> int:
    """Most frequent label; ties break toward the lowest class index."""
    votes = np.asarray(votes, dtype=np.int64)
    if votes.size == 0:
        raise ParameterError("hard_vote needs at least one vote")
    return int(np.argmax(np.bincount(votes)))


def soft_vote(probs) -> tuple[int, np.ndarray]:
    """Component-wise mean of probability vectors and its argmax label."""
    arrs = [np.asarray(p, dtype=np.float64).ravel() for p in probs]
    if not arrs:
        raise ParameterError("soft_vote needs at least one probability vector")
    width = arrs[0].size
    for p in arrs:
        if p.size != width:
            raise ParameterError("probability vectors must all have the same length")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError(f"probability vector sums to {p.sum()}, expected 1")
    mean = np.mean(arrs, axis=0)
    return int(np.argmax(mean)), mean


def predict_ensemble(dt: DecisionTree, rf: RandomForest, gbt: GradientBoostedTrees,
                     row, voting: str = "soft") -> tuple[int, np.ndarray]:
    """Combine the three base predictions for one feature vector."""
    row = np.asarray(row, dtype=np.float64).reshape(1, -1)
    probs = [dt.predict_proba(row)[0], rf.predict_proba(row)[0], gbt.predict_proba(row)[0]]
    label_soft, mean = soft_vote(probs)
    if voting == "soft":
        return label_soft, mean
    if voting == "hard":
        return hard_vote([int(np.argmax(p)) for p in probs]), mean
    raise ParameterError(f"voting must be 'hard' or 'soft', got {voting!r}")


class VotingEnsemble(BaseEstimator, ClassifierMixin):
    """Decision tree + random forest + boosted trees behind one vote.

    The three bases are trained once; switching ``voting`` only changes how
    their stored predictions are combined, never the models themselves.
    """

    def __init__(self, voting: str = "soft", dt_max_depth: int = 8,
                 rf_n_trees: int = 30, rf_max_depth: int = 10,
                 gbt_n_rounds: int = 40, gbt_max_depth: int = 4,
                 gbt_learning_rate: float = 0.3, gbt_reg_lambda: float = 1.0,
                 random_state: int = 0, n_threads: int = 1):
        self.voting = voting
        self.dt_max_depth = dt_max_depth
        self.rf_n_trees = rf_n_trees
        self.rf_max_depth = rf_max_depth
        self.gbt_n_rounds = gbt_n_rounds
        self.gbt_max_depth = gbt_max_depth
        self.gbt_learning_rate = gbt_learning_rate
        self.gbt_reg_lambda = gbt_reg_lambda
        self.random_state = random_state
        self.n_threads = n_threads

    @classmethod
    def from_hyperparameters(cls, hp: Hyperparameters, random_state: int = 0,
                             n_threads: int = 1) -> "VotingEnsemble":
        return cls(
            voting=hp.voting,
            dt_max_depth=hp.dt_max_depth,
            rf_n_trees=hp.rf_n_trees,
            rf_max_depth=hp.rf_max_depth,
            gbt_n_rounds=hp.gbt_n_rounds,
            gbt_max_depth=hp.gbt_max_depth,
            gbt_learning_rate=hp.gbt_learning_rate,
            gbt_reg_lambda=hp.gbt_reg_lambda,
            random_state=random_state,
            n_threads=n_threads,
        )

    def hyperparameters(self) -> Hyperparameters:
        return Hyperparameters(
            dt_max_depth=self.dt_max_depth,
            rf_n_trees=self.rf_n_trees,
            rf_max_depth=self.rf_max_depth,
            gbt_n_rounds=self.gbt_n_rounds,
            gbt_max_depth=self.gbt_max_depth,
            gbt_learning_rate=self.gbt_learning_rate,
            gbt_reg_lambda=self.gbt_reg_lambda,
            voting=self.voting,
        )

    def fit(self, X, y):
        if self.voting not in ("hard", "soft"):
            raise ParameterError(f"voting must be 'hard' or 'soft', got {self.voting!r}")
        X = as_matrix(X)
        self.dt_ = DecisionTree(max_depth=self.dt_max_depth).fit(X, y)
        self.rf_ = RandomForest(
            n_trees=self.rf_n_trees, max_depth=self.rf_max_depth,
            random_state=self.random_state, n_threads=self.n_threads,
        ).fit(X, y)
        self.gbt_ = GradientBoostedTrees(
            n_rounds=self.gbt_n_rounds, max_depth=self.gbt_max_depth,
            learning_rate=self.gbt_learning_rate, reg_lambda=self.gbt_reg_lambda,
            random_state=self.random_state,
        ).fit(X, y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.arange(2)
        return self

    def base_probabilities(self, X) -> np.ndarray:
        """Stacked base outputs, shape (3, n_rows, 2)."""
        X = as_matrix(X)
        dt_p = self.dt_.predict_proba(X)[:, :2]
        rf_p = self.rf_.predict_proba(X)[:, :2]
        gbt_p = self.gbt_.predict_proba(X)
        return np.stack([dt_p, rf_p, gbt_p])

    def predict_proba(self, X):
        return self.base_probabilities(X).mean(axis=0)

    def predict(self, X, voting: str | None = None):
        voting = self.voting if voting is None else voting
        probs = self.base_probabilities(X)
        if voting == "soft":
            return np.argmax(probs.mean(axis=0), axis=1)
        if voting == "hard":
            base_labels = np.argmax(probs, axis=2)
            counts = np.zeros((probs.shape[1], 2), dtype=np.int64)
            for b in range(base_labels.shape[0]):
                counts[np.arange(base_labels.shape[1]), base_labels[b]] += 1
            return np.argmax(counts, axis=1)
        raise ParameterError(f"voting must be 'hard' or 'soft', got {voting!r}")


# -- persistence ----------------------------------------------------------


@dataclass
class ModelArtifact:
    """Everything needed to reload a trained pipeline and predict again:
    the ensemble, the feature mask it was trained under, the category
    encoder, and the encoded feature names.
    """

    ensemble: VotingEnsemble
    feature_mask: np.ndarray
    feature_names: list[str]
    encoder: EncoderState | None = None

    def to_dict(self) -> dict:
        ens = self.ensemble
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "hyperparameters": ens.hyperparameters().to_dict(),
            "random_state": int(ens.random_state),
            "feature_mask": [int(b) for b in np.asarray(self.feature_mask, dtype=np.int64)],
            "feature_names": list(self.feature_names),
            "encoder": self.encoder.to_dict() if self.encoder is not None else None,
            "dt": ens.dt_.root_.to_dict(),
            "rf": {"trees": [t.to_dict() for t in ens.rf_.trees_]},
            "gbt": {
                "base_score": float(ens.gbt_.base_score_),
                "learning_rate": float(ens.gbt_.learning_rate),
                "trees": [t.to_dict() for t in ens.gbt_.trees_],
            },
            "n_features": int(ens.n_features_in_),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelArtifact":
        if doc.get("format") != MODEL_FORMAT:
            raise ParameterError(f"not a {MODEL_FORMAT} document")
        if doc.get("version") != MODEL_VERSION:
            raise ParameterError(f"unsupported model version {doc.get('version')}")
        hp = Hyperparameters.from_dict(doc["hyperparameters"])
        ens = VotingEnsemble.from_hyperparameters(hp, random_state=doc.get("random_state", 0))
        n_features = int(doc["n_features"])

        ens.dt_ = DecisionTree(max_depth=hp.dt_max_depth)
        ens.dt_.root_ = TreeNode.from_dict(doc["dt"])
        ens.dt_.n_classes_ = 2
        ens.dt_.classes_ = np.arange(2)
        ens.dt_.n_features_in_ = n_features

        ens.rf_ = RandomForest(n_trees=hp.rf_n_trees, max_depth=hp.rf_max_depth)
        ens.rf_.trees_ = [TreeNode.from_dict(t) for t in doc["rf"]["trees"]]
        ens.rf_.n_classes_ = 2
        ens.rf_.classes_ = np.arange(2)
        ens.rf_.n_features_in_ = n_features

        ens.gbt_ = GradientBoostedTrees(
            n_rounds=hp.gbt_n_rounds, max_depth=hp.gbt_max_depth,
            learning_rate=doc["gbt"]["learning_rate"], reg_lambda=hp.gbt_reg_lambda,
        )
        ens.gbt_.base_score_ = float(doc["gbt"]["base_score"])
        ens.gbt_.trees_ = [TreeNode.from_dict(t) for t in doc["gbt"]["trees"]]
        ens.gbt_.classes_ = np.arange(2)
        ens.gbt_.n_features_in_ = n_features

        ens.n_features_in_ = n_features
        ens.classes_ = np.arange(2)

        encoder = EncoderState.from_dict(doc["encoder"]) if doc.get("encoder") else None
        return cls(
            ensemble=ens,
            feature_mask=np.asarray(doc["feature_mask"], dtype=bool),
            feature_names=[str(n) for n in doc["feature_names"]],
            encoder=encoder,
        )


def save_model(artifact: ModelArtifact, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(artifact.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> ModelArtifact:
    with open(path, "r", encoding="utf-8") as fh:
        return ModelArtifact.from_dict(json.load(fh))
