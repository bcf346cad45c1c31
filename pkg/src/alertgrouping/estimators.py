"""Scikit-learn style estimators wrapping the functional pipeline.

These classes follow the fit/transform/fit_predict conventions (including
``get_params``/``set_params`` via ``BaseEstimator``), so the alert grouping
building blocks compose with the wider ecosystem.  Grouping estimators take
a representation matrix whose first column is the timestamp and whose
remaining columns are the embedding.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin

from .core import AlertSequence
from .embed import ReadoutConfig, fit_pca, transform_pca, windowed_embed
from .group import GroupingParams, group_alerts, time_delta_group
from .model import ModelConfig, TrainConfig, train
from .validation import check_matrix, check_sorted_timestamps, split_representation
from .vocab import build_vocab


class MaskedAlertEncoder(BaseEstimator, TransformerMixin):
    """Self-supervised alert embedder: fit trains the masked-alert model,
    transform reads out one embedding per alert via overlapping windows."""

    def __init__(
        self,
        num_heads=1,
        head_dim=16,
        context_size=4096,
        rotary_base=1.0e6,
        rotary_keep_fraction=0.75,
        ffn_multiplier=4,
        min_count=10,
        batch_size=16,
        total_steps=60000,
        max_lr=0.005,
        mask_prob=0.15,
        warmup_steps=600,
        readout: Optional[int] = None,
        pad: Optional[int] = None,
        seed=0,
    ):
        self.num_heads = num_heads
        self.head_dim = head_dim
        self.context_size = context_size
        self.rotary_base = rotary_base
        self.rotary_keep_fraction = rotary_keep_fraction
        self.ffn_multiplier = ffn_multiplier
        self.min_count = min_count
        self.batch_size = batch_size
        self.total_steps = total_steps
        self.max_lr = max_lr
        self.mask_prob = mask_prob
        self.warmup_steps = warmup_steps
        self.readout = readout
        self.pad = pad
        self.seed = seed

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            num_heads=self.num_heads,
            head_dim=self.head_dim,
            context_size=self.context_size,
            rotary_base=self.rotary_base,
            rotary_keep_fraction=self.rotary_keep_fraction,
            ffn_multiplier=self.ffn_multiplier,
            seed=self.seed,
        )

    def _readout_config(self) -> ReadoutConfig:
        readout = self.context_size // 2 if self.readout is None else self.readout
        pad = (self.context_size - readout) // 2 if self.pad is None else self.pad
        return ReadoutConfig(context=self.context_size, readout=readout, pad=pad)

    def fit(self, X, y=None, val_sequences: Sequence[AlertSequence] = ()):
        """Train on a list of AlertSequences (or a single sequence)."""
        sequences = [X] if isinstance(X, AlertSequence) else list(X)
        self.vocab_ = build_vocab(sequences, min_count=self.min_count)
        train_cfg = TrainConfig(
            batch_size=self.batch_size,
            total_steps=self.total_steps,
            max_lr=self.max_lr,
            mask_prob=self.mask_prob,
            warmup_steps=self.warmup_steps,
        )
        self.state_, self.loss_curve_ = train(
            sequences, list(val_sequences), self.vocab_, self._model_config(), train_cfg
        )
        return self

    def transform(self, X):
        """Embed one AlertSequence (or a list of them)."""
        if isinstance(X, AlertSequence):
            return windowed_embed(X, self.vocab_, self.state_, self._readout_config())
        return [
            windowed_embed(seq, self.vocab_, self.state_, self._readout_config())
            for seq in X
        ]


class EmbeddingPca(BaseEstimator, TransformerMixin):
    """Deterministic PCA with the sign convention used by the pipeline."""

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        model = fit_pca(X, k=self.n_components)
        self.mean_ = model.mean
        self.components_ = model.components
        self.explained_variance_ = model.explained_variance
        self._model = model
        return self

    def transform(self, X):
        return transform_pca(self._model, check_matrix(X, "X"))


class TimeCosineGrouper(BaseEstimator, ClusterMixin):
    """Density grouping under the combined time/cosine metric.

    ``fit`` expects an (n, 1 + d) matrix: column 0 holds sorted timestamps,
    the remaining columns the (nonzero) embeddings.  ``labels_`` holds the
    canonical group id per alert.
    """

    def __init__(self, delta=1.0, theta=0.0):
        self.delta = delta
        self.theta = theta

    def fit(self, X, y=None):
        t, e = split_representation(X)
        self.labels_ = group_alerts(t, e, GroupingParams(self.delta, self.theta))
        return self


class TimeDeltaGrouper(BaseEstimator, ClusterMixin):
    """Pure time-threshold baseline grouping."""

    def __init__(self, delta=1.0):
        self.delta = delta

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        t = check_sorted_timestamps(X[:, 0] if X.ndim == 2 else X)
        self.labels_ = time_delta_group(t, self.delta)
        return self
