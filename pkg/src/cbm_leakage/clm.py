"""Concept labeling model: X -> concepts, with four prediction modes.

``Hard`` and ``Soft`` run the network with dropout off and return the
thresholded or raw sigmoid outputs. The two Monte-Carlo dropout modes keep
dropout on at prediction time and average ``mcd_samples`` stochastic
passes: ``SoftMCD`` averages the sigmoid outputs, ``HardMCD`` averages the
thresholded votes. The vote fraction is handed to the target classifier
as-is; it is never re-thresholded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_concepts, check_features
from .nn_core import TrainConfig, forward, hidden_units, init_mlp, sample_mask, train_network


class Mode(str, enum.Enum):
    HARD_MCD = "hard-mcd"
    SOFT_MCD = "soft-mcd"
    HARD = "hard"
    SOFT = "soft"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        token = str(value).strip().lower().replace("_", "-")
        for mode in cls:
            if token in (mode.value, mode.label.lower(), mode.name.lower().replace("_", "-")):
                return mode
        if token in ("hardmcd", "softmcd"):
            return cls(token[:4] + "-mcd")
        raise ValueError(f"unknown predictor mode {value!r}")


_LABELS = {
    Mode.HARD_MCD: "NN+Hard+MCD",
    Mode.SOFT_MCD: "NN+Soft+MCD",
    Mode.HARD: "NN+Hard",
    Mode.SOFT: "NN+Soft",
}


@dataclass(frozen=True)
class ConceptPredictorConfig:
    mode: Mode = Mode.SOFT
    threshold: float = 0.5
    mcd_samples: int = 50
    dropout_p: float = 0.5
    hidden_dim: int = 128
    activation: str = "elu"
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.mcd_samples < 1:
            raise ValueError(f"mcd_samples must be >= 1, got {self.mcd_samples}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")


class ConceptLabeler(TransformerMixin, BaseEstimator):
    """One-hidden-layer network with sigmoid outputs trained on binary concept targets.

    ``fit(X, C)`` trains on concept labels ``C``; ``transform(X)`` returns the
    concept representation selected by ``mode``.

    Parameters
    ----------
    mode : {"hard", "soft", "hard-mcd", "soft-mcd"}
    hidden_dim : int
        Hidden units; 0 gives a linear model.
    activation : {"elu", "relu"}
    dropout : float
        Dropout rate on the hidden layer, used in training and for MCD.
    threshold : float
        Hard labels are ``prob > threshold``.
    mcd_samples : int
        Number of dropout passes averaged by the MCD modes.
    epochs, batch_size, learning_rate, beta1, beta2, epsilon
        Adam training settings.
    random_state : int
        Seeds initialisation, shuffling and training dropout masks.
    """

    def __init__(
        self,
        mode="soft",
        hidden_dim=128,
        activation="elu",
        dropout=0.5,
        threshold=0.5,
        mcd_samples=50,
        epochs=200,
        batch_size=32,
        learning_rate=1e-3,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        random_state=0,
    ):
        self.mode = mode
        self.hidden_dim = hidden_dim
        self.activation = activation
        self.dropout = dropout
        self.threshold = threshold
        self.mcd_samples = mcd_samples
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.random_state = random_state

    @classmethod
    def from_config(cls, config: ConceptPredictorConfig) -> "ConceptLabeler":
        t = config.train
        return cls(
            mode=config.mode.value, hidden_dim=config.hidden_dim,
            activation=config.activation,
            dropout=config.dropout_p, threshold=config.threshold,
            mcd_samples=config.mcd_samples, epochs=t.epochs, batch_size=t.batch_size,
            learning_rate=t.learning_rate, beta1=t.beta1, beta2=t.beta2,
            epsilon=t.epsilon, random_state=t.seed,
        )

    @property
    def config(self) -> ConceptPredictorConfig:
        return ConceptPredictorConfig(
            mode=self.mode, threshold=self.threshold, mcd_samples=self.mcd_samples,
            dropout_p=self.dropout, hidden_dim=self.hidden_dim,
            activation=self.activation,
            train=TrainConfig(
                epochs=self.epochs, batch_size=self.batch_size,
                learning_rate=self.learning_rate, seed=self.random_state,
                beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon,
            ),
        )

    def fit(self, X, C):
        config = self.config
        X = check_features(X)
        C = check_concepts(C, n=X.shape[0])
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty dataset")
        init_ss, train_ss = np.random.SeedSequence(config.train.seed).spawn(2)
        net = init_mlp(X.shape[1], config.hidden_dim, C.shape[1], config.dropout_p, init_ss,
                       activation=config.activation)
        train_cfg = replace(config.train, seed=train_ss)
        self.net_, self.loss_history_ = train_network(net, X, C, train_cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def _X(self, X):
        check_is_fitted(self, "net_")
        return check_features(X, n_features=self.n_features_in_)

    def predict_soft(self, X) -> np.ndarray:
        """Sigmoid concept probabilities with dropout off."""
        return forward(self.net_, self._X(X))[2]

    def predict_hard(self, X) -> np.ndarray:
        """Thresholded probabilities; a probability equal to the threshold maps to 0."""
        return (self.predict_soft(X) > self.threshold).astype(np.float64)

    def _mcd_probs(self, X, seed):
        """Yield the sigmoid output of each of the ``mcd_samples`` dropout passes."""
        net = self.net_
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"MCD needs dropout in [0, 1), got {self.dropout}")
        rng = np.random.default_rng(seed)
        # the activation does not depend on the mask, so compute it once
        act = hidden_units(net, self._X(X))
        for _ in range(self.mcd_samples):
            if net.hidden_dim:
                mask = sample_mask(rng, self.dropout, net.hidden_dim)
                hidden = act * (mask.keep * mask.scale)
            else:
                hidden = act
            yield expit(hidden @ net.W2.T + net.b2)

    def predict_mcd_soft(self, X, seed=0) -> np.ndarray:
        """Mean sigmoid output over ``mcd_samples`` dropout passes."""
        if self.dropout == 0.0:
            # every mask is the identity; skip the T-fold sum so the result
            # matches predict_soft bit for bit
            self._X(X)
            return self.predict_soft(X)
        total = None
        for probs in self._mcd_probs(X, seed):
            total = probs if total is None else total + probs
        return total / self.mcd_samples

    def predict_mcd_hard(self, X, seed=0) -> np.ndarray:
        """Fraction of dropout passes whose output exceeds the threshold."""
        votes = None
        for probs in self._mcd_probs(X, seed):
            v = (probs > self.threshold).astype(np.int64)
            votes = v if votes is None else votes + v
        return votes / self.mcd_samples

    def transform(self, X, seed=0) -> np.ndarray:
        """Concept representation for the configured ``mode``.

        ``seed`` drives the dropout masks of the MCD modes.
        """
        mode = Mode.parse(self.mode)
        if mode is Mode.SOFT:
            return self.predict_soft(X)
        if mode is Mode.HARD:
            return self.predict_hard(X)
        if mode is Mode.SOFT_MCD:
            return self.predict_mcd_soft(X, seed)
        return self.predict_mcd_hard(X, seed)

    def with_mode(self, mode) -> "ConceptLabeler":
        """Shallow copy sharing the trained network but predicting in ``mode``."""
        other = type(self)(**{**self.get_params(), "mode": Mode.parse(mode).value})
        for attr in ("net_", "loss_history_", "n_features_in_"):
            if hasattr(self, attr):
                setattr(other, attr, getattr(self, attr))
        return other


def train_clm(train_set, config: ConceptPredictorConfig) -> ConceptLabeler:
    """Fit a :class:`ConceptLabeler` on ``(train_set.X, train_set.C)``."""
    return ConceptLabeler.from_config(config).fit(train_set.X, train_set.C)


def predict_soft(clm: ConceptLabeler, X):
    return clm.predict_soft(X)


def predict_hard(clm: ConceptLabeler, X):
    return clm.predict_hard(X)


def predict_mcd_soft(clm: ConceptLabeler, X, seed=0):
    return clm.predict_mcd_soft(X, seed)


def predict_mcd_hard(clm: ConceptLabeler, X, seed=0):
    return clm.predict_mcd_hard(X, seed)


def predict(clm: ConceptLabeler, X, seed=0):
    return clm.transform(X, seed)
