import numpy as np
import pytest

from flowguard.flowdata import LABEL, ColumnSpec, FlowDataset


def make_dataset(values, labels, kinds=None, categories=None, names=None):
    """Build a FlowDataset from plain arrays for tests."""
    values = np.asarray(values, dtype=np.float64)
    n_features = values.shape[1]
    kinds = kinds or ["continuous"] * n_features
    categories = categories or {}
    names = names or [f"c{j}" for j in range(n_features)]
    columns = [
        ColumnSpec(names[j], kinds[j], tuple(categories.get(names[j], ())))
        for j in range(n_features)
    ]
    columns.append(ColumnSpec("label", LABEL))
    return FlowDataset(columns=tuple(columns), values=values, labels=np.asarray(labels))


@pytest.fixture
def separable_ds():
    """300 rows, 6 columns; column 0 alone determines the label."""
    rng = np.random.default_rng(7)
    n = 300
    y = (rng.random(n) < 0.4).astype(int)
    X = rng.normal(size=(n, 6))
    X[:, 0] = y * 10.0 + rng.normal(scale=0.1, size=n)
    return make_dataset(X, y)
