"""Boundary-aware emotion editing.

Trains a multinomial logistic classifier on labeled emotion embeddings,
turns the learned boundary normals into a dictionary of unit editing
directions, and applies continuous single- or multi-direction edits
e_edited = e + sum(alpha * v).
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import require_finite, softmax

DICT_FORMAT = "eet-dict"
DICT_VERSION = 1


@dataclass(frozen=True)
class LabeledEmbeddingSet:
    embeddings: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) ints in [0, K)
    class_names: tuple[str, ...]

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", lab)
        if emb.ndim != 2 or emb.shape[1] < 2:
            raise ValueError("embeddings must be (N, d) with d >= 2")
        if lab.shape != (emb.shape[0],):
            raise ValueError("labels must be one class index per embedding")
        require_finite("embeddings", emb)
        k = len(self.class_names)
        if k < 2:
            raise ValueError("need at least two classes")
        present = set(np.unique(lab).tolist())
        if present != set(range(k)):
            raise ValueError("every class index in [0, K) must appear at least once")

    @property
    def K(self) -> int:
        return len(self.class_names)

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class ClassifierConfig:
    l2: float = 1e-3
    lr: float = 0.5
    max_iters: int = 2000
    tol: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if not (self.l2 >= 0 and np.isfinite(self.l2)):
            raise ValueError("l2 must be a finite nonnegative real")
        if not (self.lr > 0 and np.isfinite(self.lr)):
            raise ValueError("lr must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class LinearClassifier:
    W: np.ndarray  # (K, d), row k is the boundary normal w_k
    b: np.ndarray  # (K,)
    class_names: tuple[str, ...]
    training_meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class ClassifyResult:
    logits: np.ndarray
    probs: np.ndarray
    argmax: int


@dataclass(frozen=True)
class EditVectorDictionary:
    class_directions: np.ndarray  # (K, d), unit rows
    pairwise_directions: dict[tuple[int, int], np.ndarray]
    w_norms: np.ndarray  # (K,)
    class_names: tuple[str, ...]
    classifier_digest: str

    @property
    def K(self) -> int:
        return self.class_directions.shape[0]

    @property
    def d(self) -> int:
        return self.class_directions.shape[1]


@dataclass(frozen=True)
class EditRequest:
    base: np.ndarray  # (d,)
    edits: tuple[tuple[int | tuple[int, int], float], ...]

    def __post_init__(self):
        base = np.asarray(self.base, dtype=np.float64)
        object.__setattr__(self, "base", base)
        require_finite("base embedding", base)
        for _, alpha in self.edits:
            if not np.isfinite(alpha):
                raise ValueError("edit alphas must be finite")


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(
    dataset: LabeledEmbeddingSet, config: ClassifierConfig = ClassifierConfig()
) -> LinearClassifier:
    """Softmax regression by full-batch gradient descent from zero init.

    Minimizes mean cross-entropy + (l2/2)*||W||_F^2; stops at max_iters or
    when the gradient infinity-norm drops below tol. Deterministic.
    """
    config.validate()
    if dataset.K < 2:
        raise ValueError("need at least two classes")
    X = dataset.embeddings
    n, d = X.shape
    k = dataset.K
    Y = np.zeros((n, k))
    Y[np.arange(n), dataset.labels] = 1.0

    W = np.zeros((k, d))
    b = np.zeros(k)
    loss = float("nan")
    iterations = 0
    for it in range(config.max_iters):
        logits = X @ W.T + b
        probs = _softmax_rows(logits)
        ce = -np.mean(np.log(np.maximum(probs[np.arange(n), dataset.labels], 1e-300)))
        loss = ce + 0.5 * config.l2 * float(np.sum(W * W))
        if not np.isfinite(loss):
            raise TrainingDivergedError(it)
        resid = probs - Y
        gW = resid.T @ X / n + config.l2 * W
        gb = resid.mean(axis=0)
        iterations = it + 1
        if max(np.abs(gW).max(), np.abs(gb).max()) < config.tol:
            break
        W -= config.lr * gW
        b -= config.lr * gb

    meta = {
        "iterations": iterations,
        "final_loss": float(loss),
        "l2": config.l2,
        "seed": config.seed,
    }
    return LinearClassifier(W=W, b=b, class_names=dataset.class_names, training_meta=meta)


def classify(e: np.ndarray, clf: LinearClassifier) -> ClassifyResult:
    """Evaluate f_k(e) = w_k.e + b_k for every class; ties break to the lowest index."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (clf.d,):
        raise ValueError(f"embedding has dimension {e.shape}, classifier expects ({clf.d},)")
    logits = clf.W @ e + clf.b
    probs = softmax(logits)
    return ClassifyResult(logits=logits, probs=probs, argmax=int(np.argmax(logits)))


def classifier_digest(W: np.ndarray, b: np.ndarray) -> str:
    """SHA-256 of the canonical little-endian byte serialization of (W, b)."""
    k, d = W.shape
    h = hashlib.sha256()
    h.update(b"eet-clf-v1")
    h.update(struct.pack("<II", k, d))
    h.update(np.ascontiguousarray(W, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return h.hexdigest()


def build_dictionary(clf: LinearClassifier) -> EditVectorDictionary:
    """Unit boundary normals v_k = w_k/||w_k|| plus pairwise directions.

    Pairwise entries hold (w_j - w_i)/||w_j - w_i|| for every ordered pair
    i != j; pairs with identical weight rows are omitted with a warning.
    """
    norms = np.linalg.norm(clf.W, axis=1)
    for k, nk in enumerate(norms):
        if nk <= 1e-12:
            raise ValueError(f"degenerate boundary normal for class {k}")
    directions = clf.W / norms[:, None]
    pairwise: dict[tuple[int, int], np.ndarray] = {}
    for i in range(clf.K):
        for j in range(clf.K):
            if i == j:
                continue
            diff = clf.W[j] - clf.W[i]
            nd = np.linalg.norm(diff)
            if nd <= 1e-12:
                warnings.warn(
                    f"identical boundary normals for classes {i} and {j}; pair omitted"
                )
                continue
            pairwise[(i, j)] = diff / nd
    return EditVectorDictionary(
        class_directions=directions,
        pairwise_directions=pairwise,
        w_norms=norms,
        class_names=clf.class_names,
        classifier_digest=classifier_digest(clf.W, clf.b),
    )


def _direction(dictionary: EditVectorDictionary, key) -> np.ndarray:
    if isinstance(key, tuple):
        i, j = int(key[0]), int(key[1])
        if not (0 <= i < dictionary.K and 0 <= j < dictionary.K) or i == j:
            raise IndexError(f"invalid direction pair {key}")
        if (i, j) not in dictionary.pairwise_directions:
            raise KeyError(f"pair {key} was omitted as degenerate")
        return dictionary.pairwise_directions[(i, j)]
    k = int(key)
    if not 0 <= k < dictionary.K:
        raise IndexError(f"invalid direction index {k}")
    return dictionary.class_directions[k]


def edit(req: EditRequest, dictionary: EditVectorDictionary) -> np.ndarray:
    """e_edited = e + sum over edits of alpha * v(direction)."""
    if req.base.shape != (dictionary.d,):
        raise ValueError(
            f"base has dimension {req.base.shape[0]}, dictionary expects {dictionary.d}"
        )
    out = req.base.copy()
    for key, alpha in req.edits:
        out += alpha * _direction(dictionary, key)
    return out


def apply_edits(
    base: np.ndarray,
    edits: list[tuple[int | tuple[int, int], float]],
    dictionary: EditVectorDictionary,
) -> np.ndarray:
    return edit(EditRequest(base=base, edits=tuple(edits)), dictionary)


# -- serialization -----------------------------------------------------------


def dictionary_to_json_obj(
    dictionary: EditVectorDictionary, clf: LinearClassifier
) -> dict:
    return {
        "format": DICT_FORMAT,
        "version": DICT_VERSION,
        "d": dictionary.d,
        "K": dictionary.K,
        "class_names": list(dictionary.class_names),
        "W": [[float(x) for x in row] for row in clf.W],
        "b": [float(x) for x in clf.b],
        "class_directions": [[float(x) for x in row] for row in dictionary.class_directions],
        "pairwise_directions": [
            {"i": i, "j": j, "v": [float(x) for x in v]}
            for (i, j), v in sorted(dictionary.pairwise_directions.items())
        ],
        "w_norms": [float(x) for x in dictionary.w_norms],
        "classifier_digest": dictionary.classifier_digest,
    }


def save_dictionary(
    path, dictionary: EditVectorDictionary, clf: LinearClassifier
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dictionary_to_json_obj(dictionary, clf), fh, indent=1)
        fh.write("\n")


def load_dictionary(path) -> tuple[EditVectorDictionary, LinearClassifier]:
    """Load and digest-verify a dictionary file; rebuilds the classifier too."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != DICT_FORMAT or obj.get("version") != DICT_VERSION:
        raise ValueError("not an edit-vector dictionary file")
    W = np.asarray(obj["W"], dtype=np.float64)
    b = np.asarray(obj["b"], dtype=np.float64)
    digest = classifier_digest(W, b)
    if digest != obj["classifier_digest"]:
        raise ValueError("classifier digest mismatch; dictionary file is corrupt")
    names = tuple(obj["class_names"])
    clf = LinearClassifier(W=W, b=b, class_names=names, training_meta={"restored": True})
    dictionary = EditVectorDictionary(
        class_directions=np.asarray(obj["class_directions"], dtype=np.float64),
        pairwise_directions={
            (int(p["i"]), int(p["j"])): np.asarray(p["v"], dtype=np.float64)
            for p in obj["pairwise_directions"]
        },
        w_norms=np.asarray(obj["w_norms"], dtype=np.float64),
        class_names=names,
        classifier_digest=digest,
    )
    return dictionary, clf
