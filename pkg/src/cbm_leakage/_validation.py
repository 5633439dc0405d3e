"""Input validation shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_features(X, n_features=None) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_binary_labels(y, n=None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    if n is not None and y.shape[0] != n:
        raise ValueError(f"got {y.shape[0]} labels for {n} rows")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)


def check_concepts(C, n=None) -> np.ndarray:
    C = check_array(C, dtype=np.float64, ensure_2d=True)
    if n is not None and C.shape[0] != n:
        raise ValueError(f"got {C.shape[0]} concept rows for {n} inputs")
    if ((C < 0) | (C > 1)).any():
        raise ValueError("concept targets must lie in [0, 1]")
    return C
