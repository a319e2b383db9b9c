"""Main-auxiliary diagnostic classifier over frozen encoder embeddings.

Every AUX-tagged word yields one instance per subword: the final-layer
embedding of that subword, labeled MAIN when the word attaches to (or is) the
sentence root, OTHER otherwise. A linear softmax layer is trained from zero
initialization with plain mini-batch SGD.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mlmeval.conllu import Treebank
from mlmeval.errors import ContractViolation, SequenceTooLongError, TrainingDiverged
from mlmeval.scorer.backend import Backend

logger = logging.getLogger(__name__)

MAIN = "MAIN"
OTHER = "OTHER"
LABELS = (MAIN, OTHER)  # class index 0 is MAIN; argmax ties resolve there

DEFAULT_CAP = 3031
DEFAULT_EPOCHS = 50
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class InstanceSource:
    sent_id: str
    token_id: int
    subword_offset: int


@dataclass(frozen=True, eq=False)
class ProbeInstance:
    vector: np.ndarray
    label: str
    language: str
    source: InstanceSource


@dataclass
class ProbeModel:
    weights: np.ndarray  # (hidden_size, 2)
    bias: np.ndarray  # (2,)
    hyperparameters: dict
    seed: int | None = None


def extract_aux_instances(treebank: Treebank, backend: Backend,
                          language: str = "") -> list[ProbeInstance]:
    """One instance per subword of every AUX token in uniquely-rooted sentences.

    MAIN when the AUX heads to the root token or is itself the root; OTHER
    otherwise. Rootless/multi-root sentences and sentences overflowing the
    backend's max_seq_len are skipped with a log entry.
    """
    instances: list[ProbeInstance] = []
    for sentence in treebank.sentences():
        root_id = sentence.root_id
        if root_id is None:
            logger.info("skipping %s: no unique root", sentence.sent_id)
            continue
        aux_tokens = [t for t in sentence.tokens if t.upos == "AUX"]
        if not aux_tokens:
            continue
        try:
            ids, alignment = backend.tokenize(sentence.forms)
        except SequenceTooLongError as exc:
            logger.info("skipping %s: %s", sentence.sent_id, exc)
            continue
        positions = []
        meta = []  # (token, subword_offset) aligned with positions
        for token in aux_tokens:
            for offset, position in enumerate(alignment.positions(token.id - 1)):
                positions.append(position)
                meta.append((token, offset))
        vectors = backend.embed(ids, positions)
        for (token, offset), vector in zip(meta, vectors):
            label = MAIN if (token.head == root_id or token.head == 0) else OTHER
            instances.append(
                ProbeInstance(
                    vector=np.asarray(vector, dtype=float),
                    label=label,
                    language=language,
                    source=InstanceSource(
                        sent_id=sentence.sent_id,
                        token_id=token.id,
                        subword_offset=offset,
                    ),
                )
            )
    return instances


def cap_train_set(instances: list[ProbeInstance], cap: int = DEFAULT_CAP,
                  seed: int = 0) -> list[ProbeInstance]:
    """At most ``cap`` instances: all of them when under the cap, otherwise a
    seeded uniform sample without replacement (order shuffled)."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if len(instances) <= cap:
        return list(instances)
    return random.Random(seed).sample(instances, cap)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _design(instances: list[ProbeInstance]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([inst.vector for inst in instances]).astype(float)
    y = np.array([LABELS.index(inst.label) for inst in instances], dtype=int)
    return X, y


def train_probe(train: list[ProbeInstance], epochs: int = DEFAULT_EPOCHS,
                learning_rate: float = DEFAULT_LEARNING_RATE,
                batch_size: int = DEFAULT_BATCH_SIZE, seed: int = 0) -> ProbeModel:
    """Mini-batch SGD on mean cross-entropy, zero-initialized weights and
    bias, one seeded shuffle per epoch. epochs=0 returns the initialization."""
    if not train:
        raise ValueError("training set is empty")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    X, y = _design(train)
    n, dim = X.shape
    W = np.zeros((dim, len(LABELS)))
    b = np.zeros(len(LABELS))
    Y = np.eye(len(LABELS))[y]

    rng = np.random.default_rng(seed)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            Xb, Yb = X[batch], Y[batch]
            P = _softmax(Xb @ W + b)
            loss = -np.mean(np.sum(Yb * np.log(np.clip(P, 1e-300, None)), axis=1))
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            G = (P - Yb) / len(batch)
            W = W - learning_rate * (Xb.T @ G)
            b = b - learning_rate * G.sum(axis=0)

    return ProbeModel(
        weights=W,
        bias=b,
        hyperparameters={
            "epochs": epochs,
            "learning_rate": learning_rate,
            "batch_size": batch_size,
        },
        seed=seed,
    )


def predict_labels(model: ProbeModel, instances: list[ProbeInstance]) -> list[str]:
    dim = model.weights.shape[0]
    for inst in instances:
        if inst.vector.shape != (dim,):
            raise ContractViolation(
                f"vector of length {inst.vector.shape} does not match model dim {dim}"
            )
    X, _ = _design(instances)
    logits = X @ model.weights + model.bias
    # np.argmax takes the first maximum, so exact ties go to MAIN (index 0)
    return [LABELS[i] for i in np.argmax(logits, axis=1)]


def evaluate_probe(model: ProbeModel, test: list[ProbeInstance]) -> float:
    if not test:
        raise ValueError("test set is empty")
    predicted = predict_labels(model, test)
    hits = sum(p == inst.label for p, inst in zip(predicted, test))
    return hits / len(test)


def error_rate(model: ProbeModel, test: list[ProbeInstance]) -> float:
    if not test:
        raise ValueError("test set is empty")
    predicted = predict_labels(model, test)
    misses = sum(p != inst.label for p, inst in zip(predicted, test))
    return misses / len(test)


def majority_baseline(test: list[ProbeInstance]) -> float:
    """Frequency of the more frequent label; exact ties give 0.5."""
    if not test:
        raise ValueError("test set is empty")
    n_main = sum(inst.label == MAIN for inst in test)
    return max(n_main, len(test) - n_main) / len(test)


def instance_to_record(inst: ProbeInstance) -> dict:
    return {
        "vector": [float(x) for x in inst.vector],
        "label": inst.label,
        "language": inst.language,
        "source": {
            "sent_id": inst.source.sent_id,
            "token_id": inst.source.token_id,
            "subword_offset": inst.source.subword_offset,
        },
    }


def instance_from_record(record: dict) -> ProbeInstance:
    src = record["source"]
    return ProbeInstance(
        vector=np.asarray(record["vector"], dtype=float),
        label=record["label"],
        language=record.get("language", ""),
        source=InstanceSource(src["sent_id"], src["token_id"], src["subword_offset"]),
    )


def save_model(model: ProbeModel, path: str | Path) -> None:
    payload = {
        "weights": [[float(x) for x in row] for row in model.weights],
        "bias": [float(x) for x in model.bias],
        "hyperparameters": model.hyperparameters,
        "seed": model.seed,
    }
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def load_model(path: str | Path) -> ProbeModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return ProbeModel(
        weights=np.asarray(payload["weights"], dtype=float),
        bias=np.asarray(payload["bias"], dtype=float),
        hyperparameters=payload.get("hyperparameters", {}),
        seed=payload.get("seed"),
    )
