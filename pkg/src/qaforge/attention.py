"""Numeric reference for the attention-pooling and classification math.

Operates on plain float64 numpy arrays with no training machinery; all
parameters arrive from fixtures.  A feature volume has shape (C, T, H, W).
Dimension defaults in the literature this mirrors are C=512, H=7, W=10
with 2400-dimensional question embeddings, but every operation here is
generic over dimensions so desk-scale fixtures stay tiny.

Conventions pinned for fixture portability: the attention scorer
``att(x, q)`` consumes the concatenation [x; q], uses one ReLU hidden
layer and a scalar linear output; multi-step refinement adds the previous
attended embedding to the question vector, which requires the question
and channel dimensions to agree for steps beyond the first (step one adds
a zero vector and works for any dimensions).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .model import ConfigError, ShapeError

ALPHA_TOL = 1e-9


def _as_array(value, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def check_volume(volume) -> np.ndarray:
    vol = _as_array(volume, "feature volume", 4)
    if min(vol.shape) < 1:
        raise ShapeError(f"feature volume dims must be >= 1, got {vol.shape}")
    return vol


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax over a flat score vector."""
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


# --------------------------------------------------------------------------- #
# Parameter bundles
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class AttentionMlp:
    """One-hidden-layer scorer producing a scalar per feature/question pair."""

    w_hidden: np.ndarray  # (hidden, feature_dim + question_dim)
    b_hidden: np.ndarray  # (hidden,)
    w_out: np.ndarray  # (hidden,)
    b_out: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_hidden", _as_array(self.w_hidden, "w_hidden", 2))
        object.__setattr__(self, "b_hidden", _as_array(self.b_hidden, "b_hidden", 1))
        object.__setattr__(self, "w_out", _as_array(self.w_out, "w_out", 1))
        object.__setattr__(self, "b_out", float(self.b_out))
        hidden = self.w_hidden.shape[0]
        if self.b_hidden.shape != (hidden,) or self.w_out.shape != (hidden,):
            raise ShapeError("attention MLP hidden dimensions disagree")

    @property
    def input_dim(self) -> int:
        return self.w_hidden.shape[1]

    def scores(self, features: np.ndarray, question: np.ndarray) -> np.ndarray:
        """Score a (N, feature_dim) block against one question vector."""
        n = features.shape[0]
        stacked = np.concatenate(
            [features, np.broadcast_to(question, (n, question.shape[0]))], axis=1
        )
        if stacked.shape[1] != self.input_dim:
            raise ShapeError(
                f"attention MLP expects input of size {self.input_dim}, "
                f"got {stacked.shape[1]} (feature {features.shape[1]} + "
                f"question {question.shape[0]})"
            )
        hidden = relu(stacked @ self.w_hidden.T + self.b_hidden)
        return hidden @ self.w_out + self.b_out


@dataclass(frozen=True)
class VideoEmbedMlp:
    """Two ReLU hidden layers plus a linear output over the flattened volume."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self) -> None:
        for name in ("w1", "w2", "w3"):
            object.__setattr__(self, name, _as_array(getattr(self, name), name, 2))
        for name in ("b1", "b2", "b3"):
            object.__setattr__(self, name, _as_array(getattr(self, name), name, 1))
        if (
            self.w1.shape[0] != self.b1.shape[0]
            or self.w2.shape != (self.b2.shape[0], self.w1.shape[0])
            or self.w3.shape != (self.b3.shape[0], self.w2.shape[0])
        ):
            raise ShapeError("video-embedding MLP layer shapes disagree")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h1 = relu(self.w1 @ x + self.b1)
        h2 = relu(self.w2 @ h1 + self.b2)
        return self.w3 @ h2 + self.b3


@dataclass(frozen=True)
class ClassifierParams:
    """Question projection and answer-class layer: softmax(Wc (v * relu(Wq q)))."""

    w_question: np.ndarray  # (embed_dim, question_dim)
    w_classes: np.ndarray  # (classes, embed_dim)
    b_classes: Optional[np.ndarray] = None  # (classes,), defaults to zeros

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_question", _as_array(self.w_question, "w_question", 2))
        object.__setattr__(self, "w_classes", _as_array(self.w_classes, "w_classes", 2))
        if self.w_classes.shape[1] != self.w_question.shape[0]:
            raise ShapeError("classifier embed dimensions disagree")
        bias = (
            np.zeros(self.w_classes.shape[0])
            if self.b_classes is None
            else _as_array(self.b_classes, "b_classes", 1)
        )
        if bias.shape != (self.w_classes.shape[0],):
            raise ShapeError("classifier bias length disagrees with class count")
        object.__setattr__(self, "b_classes", bias)


# --------------------------------------------------------------------------- #
# Embeddings
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    tag: str  # one of T1, Tm, ST, GC, AP


@dataclass(frozen=True)
class AttentionResult:
    embedding: Embedding
    alphas: np.ndarray  # (steps, T) for temporal, (T, H, W) for spatio-temporal


def frame_features(volume) -> np.ndarray:
    """(T, C) frame features: per-frame spatial mean of the volume."""
    vol = check_volume(volume)
    return vol.mean(axis=(2, 3)).T


def temporal_attention(
    volume, question, mlp: AttentionMlp, steps: int = 1
) -> AttentionResult:
    """Softmax-weighted pooling of frame features over time, ``steps`` times.

    Step k scores frame t as att(frame_t, q + prev) where prev is the
    previous step's attended embedding (a zero vector initially).
    """
    if steps < 1:
        raise ShapeError(f"steps must be >= 1, got {steps}")
    vol = check_volume(volume)
    question = _as_array(question, "question embedding", 1)
    frames = frame_features(vol)
    channels = frames.shape[1]
    prev = np.zeros(channels)
    alphas = []
    for step in range(steps):
        if step == 0:
            refined = question  # adding the zero vector is the identity
        else:
            if question.shape[0] != channels:
                raise ShapeError(
                    "multi-step refinement adds the attended embedding to the "
                    f"question, which needs question dim {question.shape[0]} "
                    f"== channel dim {channels}"
                )
            refined = question + prev
        alpha = softmax(mlp.scores(frames, refined))
        prev = alpha @ frames
        alphas.append(alpha)
    tag = "T1" if steps == 1 else "Tm"
    return AttentionResult(Embedding(prev, tag), np.stack(alphas))


def spatiotemporal_attention(volume, question, mlp: AttentionMlp) -> AttentionResult:
    """Softmax-weighted pooling over every (t, i, j) cell of the volume."""
    vol = check_volume(volume)
    question = _as_array(question, "question embedding", 1)
    c, t, h, w = vol.shape
    cells = vol.reshape(c, t * h * w).T  # (N, C) in t-major, then i, then j order
    alpha = softmax(mlp.scores(cells, question))
    embedding = alpha @ cells
    return AttentionResult(Embedding(embedding, "ST"), alpha.reshape(t, h, w))


def average_pool_embed(volume) -> Embedding:
    """Uniform pooling over the whole spatio-temporal space, per channel."""
    vol = check_volume(volume)
    return Embedding(vol.mean(axis=(1, 2, 3)), "AP")


def global_context_embed(volume, mlp: VideoEmbedMlp) -> Embedding:
    """Perceptron over the volume flattened in canonical (C, T, H, W) order."""
    vol = check_volume(volume)
    flat = vol.reshape(-1)
    if flat.shape[0] != mlp.input_dim:
        raise ShapeError(
            f"video-embedding MLP expects input {mlp.input_dim}, "
            f"got flattened volume of {flat.shape[0]}"
        )
    return Embedding(mlp.forward(flat), "GC")


def classify(
    v_emb: Union[Embedding, np.ndarray], question, params: ClassifierParams
) -> np.ndarray:
    """Answer-class probability distribution for one (video, question) pair."""
    vec = v_emb.vector if isinstance(v_emb, Embedding) else np.asarray(v_emb, np.float64)
    vec = _as_array(vec, "video embedding", 1)
    question = _as_array(question, "question embedding", 1)
    if params.w_question.shape[1] != question.shape[0]:
        raise ShapeError(
            f"w_question expects question dim {params.w_question.shape[1]}, "
            f"got {question.shape[0]}"
        )
    if vec.shape[0] != params.w_question.shape[0]:
        raise ShapeError(
            f"video embedding dim {vec.shape[0]} disagrees with projection "
            f"dim {params.w_question.shape[0]}"
        )
    projected = relu(params.w_question @ question)
    logits = params.w_classes @ (vec * projected) + params.b_classes
    return softmax(logits)


# --------------------------------------------------------------------------- #
# Fixture files and invariant checks
# --------------------------------------------------------------------------- #


def _volume_from_obj(obj: dict) -> np.ndarray:
    if "dims" not in obj or "values" not in obj:
        raise ConfigError("volume needs 'dims' and 'values'")
    dims = obj["dims"]
    values = np.asarray(obj["values"], dtype=np.float64)
    if values.size != int(np.prod(dims)):
        raise ConfigError(
            f"volume has {values.size} values but dims {dims} need {int(np.prod(dims))}"
        )
    return values.reshape(dims)


def load_fixture(path: str) -> dict:
    """Load an attention fixture: volume, question, params, optional steps."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"fixture line {exc.lineno}: {exc.msg}") from None
    try:
        fixture = {
            "volume": _volume_from_obj(obj["volume"]),
            "question": np.asarray(obj["question"], dtype=np.float64),
            "attention_mlp": AttentionMlp(
                w_hidden=obj["attention_mlp"]["w_hidden"],
                b_hidden=obj["attention_mlp"]["b_hidden"],
                w_out=obj["attention_mlp"]["w_out"],
                b_out=obj["attention_mlp"].get("b_out", 0.0),
            ),
            "steps": int(obj.get("steps", 1)),
        }
    except KeyError as exc:
        raise ConfigError(f"fixture missing {exc.args[0]!r}") from None
    except ShapeError as exc:
        raise ConfigError(str(exc)) from None
    if "global_mlp" in obj:
        g = obj["global_mlp"]
        fixture["global_mlp"] = VideoEmbedMlp(
            w1=g["w1"], b1=g["b1"], w2=g["w2"], b2=g["b2"], w3=g["w3"], b3=g["b3"]
        )
    if "classifier" in obj:
        c = obj["classifier"]
        fixture["classifier"] = ClassifierParams(
            w_question=c["w_question"],
            w_classes=c["w_classes"],
            b_classes=c.get("b_classes"),
        )
    return fixture


def check_fixture(fixture: dict) -> list[tuple[str, bool, str]]:
    """Run every applicable invariant on a loaded fixture.

    Returns (check name, passed, detail) triples; the CLI prints one line
    per entry and fails when any check fails.
    """
    volume = fixture["volume"]
    question = fixture["question"]
    mlp: AttentionMlp = fixture["attention_mlp"]
    steps = fixture.get("steps", 1)
    results: list[tuple[str, bool, str]] = []

    temporal = temporal_attention(volume, question, mlp, steps=steps)
    sums = temporal.alphas.sum(axis=1)
    ok = bool(np.all(np.abs(sums - 1.0) <= ALPHA_TOL) and np.all(temporal.alphas >= 0))
    results.append(
        ("temporal attention probabilities sum to 1", ok, f"max |sum-1| = {np.abs(sums - 1).max():.2e}")
    )

    st = spatiotemporal_attention(volume, question, mlp)
    ok = bool(abs(st.alphas.sum() - 1.0) <= ALPHA_TOL and np.all(st.alphas >= 0))
    results.append(
        ("spatio-temporal probabilities sum to 1", ok, f"|sum-1| = {abs(st.alphas.sum() - 1):.2e}")
    )

    # Uniform attention (constant scorer) must reproduce average pooling.
    uniform_mlp = AttentionMlp(
        w_hidden=np.zeros_like(mlp.w_hidden),
        b_hidden=np.zeros_like(mlp.b_hidden),
        w_out=np.zeros_like(mlp.w_out),
        b_out=0.0,
    )
    uniform_st = spatiotemporal_attention(volume, question, uniform_mlp)
    ap = average_pool_embed(volume)
    diff = float(np.abs(uniform_st.embedding.vector - ap.vector).max())
    results.append(
        ("average pooling equals uniform spatio-temporal attention", diff <= ALPHA_TOL, f"max diff = {diff:.2e}")
    )

    one_step = temporal_attention(volume, question, mlp, steps=1)
    single_scores = mlp.scores(frame_features(volume), question)
    single_alpha = softmax(single_scores)
    single_embed = single_alpha @ frame_features(volume)
    exact = bool(
        np.array_equal(one_step.embedding.vector, single_embed)
        and np.array_equal(one_step.alphas[0], single_alpha)
    )
    results.append(("one-step attention equals the single-step formula", exact, ""))

    if "global_mlp" in fixture:
        try:
            global_context_embed(volume, fixture["global_mlp"])
            results.append(("global context embedding evaluates", True, ""))
        except ShapeError as exc:
            results.append(("global context embedding evaluates", False, str(exc)))

    if "classifier" in fixture:
        params: ClassifierParams = fixture["classifier"]
        probs = classify(st.embedding, question, params)
        ok = bool(abs(probs.sum() - 1.0) <= ALPHA_TOL and np.all(probs >= 0))
        results.append(
            ("classification scores form a distribution", ok, f"|sum-1| = {abs(probs.sum() - 1):.2e}")
        )
        shifted = ClassifierParams(
            w_question=params.w_question,
            w_classes=params.w_classes,
            b_classes=params.b_classes + 7.25,
        )
        probs_shifted = classify(st.embedding, question, shifted)
        diff = float(np.abs(probs - probs_shifted).max())
        results.append(
            ("classification is shift-invariant", diff <= ALPHA_TOL, f"max diff = {diff:.2e}")
        )
    return results
