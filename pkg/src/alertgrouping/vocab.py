"""Per-feature vocabularies and the token / initial-embedding mapping.

Each of the two alert features gets its own value table.  Values seen fewer
than ``min_count`` times in the training data resolve to a reserved unknown
token; a second reserved token is the learned mask used during training.
The initial embedding of an alert is the sum of its per-feature embedding
rows.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import FEATURE_KEYS, MISSING, Alert, AlertSequence
from .errors import DimensionMismatch, EmptyTrainingData

#: Token ids of one alert, one entry per feature.
TokenStructure = tuple[int, ...]


@dataclass(frozen=True)
class FeatureVocab:
    """Value table of a single feature.

    ``ids`` holds only values at or above the count threshold, with dense
    ids assigned in lexicographic value order.  ``counts`` records every
    value observed in training, including those below the threshold.
    """

    ids: dict[str, int]
    counts: dict[str, int]

    @property
    def unknown_id(self) -> int:
        return len(self.ids)

    @property
    def mask_id(self) -> int:
        return len(self.ids) + 1

    @property
    def size(self) -> int:
        """Total token count including the unknown and mask tokens."""
        return len(self.ids) + 2

    def token_id(self, value: str) -> int:
        if value == MISSING:
            return self.unknown_id
        return self.ids.get(value, self.unknown_id)


@dataclass(frozen=True)
class Vocabulary:
    features: tuple[FeatureVocab, ...]
    min_count: int

    @property
    def num_features(self) -> int:
        return len(self.features)

    def sizes(self) -> tuple[int, ...]:
        return tuple(f.size for f in self.features)


def build_vocab(train: Iterable[AlertSequence] | AlertSequence, min_count: int = 10) -> Vocabulary:
    """Build per-feature vocabularies from training sequences.

    Values with count < ``min_count`` stay out of the table and resolve to
    the unknown token at lookup; a value occurring exactly ``min_count``
    times is kept.  The MISSING sentinel never earns an id.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if isinstance(train, AlertSequence):
        sequences = [train]
    else:
        sequences = list(train)
    counters = [Counter() for _ in FEATURE_KEYS]
    total = 0
    for seq in sequences:
        for alert in seq:
            total += 1
            for f, key in enumerate(FEATURE_KEYS):
                counters[f][alert.attributes[key]] += 1
    if total == 0:
        raise EmptyTrainingData("no alerts in training data")
    features = []
    for counter in counters:
        kept = sorted(v for v, c in counter.items() if c >= min_count and v != MISSING)
        ids = {v: i for i, v in enumerate(kept)}
        features.append(FeatureVocab(ids=ids, counts=dict(counter)))
    return Vocabulary(features=tuple(features), min_count=min_count)


def tokenize(alert: Alert, vocab: Vocabulary) -> TokenStructure:
    """Map an alert to one token id per feature (total function)."""
    return tuple(
        fv.token_id(alert.attributes[key])
        for fv, key in zip(vocab.features, FEATURE_KEYS)
    )


def token_id_matrix(seq: AlertSequence, vocab: Vocabulary) -> np.ndarray:
    """Token ids of a whole sequence as an (n, num_features) int array."""
    n = len(seq)
    out = np.empty((n, vocab.num_features), dtype=np.int64)
    for i, alert in enumerate(seq):
        out[i] = tokenize(alert, vocab)
    return out


def initial_embedding(tokens: TokenStructure, tables: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of the per-feature embedding rows selected by ``tokens``."""
    if len(tokens) != len(tables):
        raise DimensionMismatch(f"{len(tokens)} tokens for {len(tables)} tables")
    dims = {t.shape[1] for t in tables}
    if len(dims) != 1:
        raise DimensionMismatch(f"tables disagree on embedding dimension: {sorted(dims)}")
    out = tables[0][tokens[0]].copy()
    for tok, table in zip(tokens[1:], tables[1:]):
        out += table[tok]
    return out


def embed_sequence(
    seq: AlertSequence, vocab: Vocabulary, tables: Sequence[np.ndarray]
) -> np.ndarray:
    """Initial embeddings of a whole sequence, one row per alert."""
    ids = token_id_matrix(seq, vocab)
    return embed_token_ids(ids, tables)


def embed_token_ids(ids: np.ndarray, tables: Sequence[np.ndarray]) -> np.ndarray:
    dims = {t.shape[1] for t in tables}
    if len(dims) != 1:
        raise DimensionMismatch(f"tables disagree on embedding dimension: {sorted(dims)}")
    out = tables[0][ids[:, 0]].copy()
    for f in range(1, len(tables)):
        out += tables[f][ids[:, f]]
    return out


def vocab_to_json(vocab: Vocabulary) -> dict:
    return {
        "min_count": vocab.min_count,
        "features": [
            {"values": dict(fv.ids), "counts": dict(fv.counts)} for fv in vocab.features
        ],
    }


def vocab_from_json(doc: dict) -> Vocabulary:
    features = tuple(
        FeatureVocab(
            ids={k: int(v) for k, v in f["values"].items()},
            counts={k: int(v) for k, v in f["counts"].items()},
        )
        for f in doc["features"]
    )
    return Vocabulary(features=features, min_count=int(doc["min_count"]))


def save_vocab(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vocab_to_json(vocab), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_vocab(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        return vocab_from_json(json.load(fh))


def vocab_hash(vocab: Vocabulary) -> str:
    """Stable digest binding checkpoints to the vocabulary they were trained on."""
    canonical = json.dumps(vocab_to_json(vocab), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
