"""Brute-force 3-nearest-neighbour target classifier and accuracy."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_binary_labels

K = 3


def _squared_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    # Per-coordinate differences keep identical points at exactly zero
    # distance, which the index tie-break relies on.
    d = np.zeros((queries.shape[0], points.shape[0]))
    for j in range(points.shape[1]):
        diff = queries[:, j, None] - points[None, :, j]
        d += diff * diff
    return d


def nearest_indices(queries, points, k=K, chunk_size=512) -> np.ndarray:
    """Indices of the ``k`` nearest stored points for each query.

    Distance ties are broken by the lowest stored index. Returned indices
    are sorted by (distance, index).
    """
    m = queries.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    for start in range(0, m, chunk_size):
        d = _squared_distances(queries[start:start + chunk_size], points)
        kth = np.partition(d, k - 1, axis=1)[:, k - 1:k]
        closer = d < kth
        n_closer = closer.sum(axis=1, keepdims=True)
        at_kth = d == kth
        # take the lowest-index points at the k-th distance until k are chosen
        chosen = closer | (at_kth & (np.cumsum(at_kth, axis=1) <= k - n_closer))
        idx = np.nonzero(chosen)[1].reshape(-1, k)  # row-major, so ascending index
        order = np.argsort(np.take_along_axis(d, idx, axis=1), axis=1, kind="stable")
        out[start:start + len(idx)] = np.take_along_axis(idx, order, axis=1)
    return out


class ThreeNearestNeighbors(ClassifierMixin, BaseEstimator):
    """Majority vote of the 3 nearest stored points (squared Euclidean).

    Ties in distance go to the lowest stored index, so predictions on
    representations with many duplicates (hard concept labels) are
    deterministic.
    """

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y, n=X.shape[0])
        if X.shape[0] < K:
            raise ValueError(f"3-NN needs at least {K} stored points, got {X.shape[0]}")
        self.points_ = X
        self.labels_ = y
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def kneighbors(self, X):
        check_is_fitted(self, "points_")
        X = check_features(X, n_features=self.n_features_in_)
        return nearest_indices(X, self.points_)

    def predict(self, X):
        votes = self.labels_[self.kneighbors(X)].sum(axis=1)
        return (votes * 2 > K).astype(np.int64)


def fit_3nn(points, labels) -> ThreeNearestNeighbors:
    return ThreeNearestNeighbors().fit(points, labels)


def predict_3nn(knn: ThreeNearestNeighbors, queries) -> np.ndarray:
    return knn.predict(queries)


def accuracy(predicted, actual) -> float:
    predicted = np.asarray(predicted).ravel()
    actual = np.asarray(actual).ravel()
    if predicted.size == 0:
        raise ValueError("accuracy of an empty prediction is undefined")
    if predicted.shape != actual.shape:
        raise ValueError(f"length mismatch: {predicted.size} vs {actual.size}")
    return float(np.mean(predicted == actual))
