"""Deterministic synthetic data: labeled emotion-embedding clusters, audio
feature sequences, and ground-truth parameter sequences whose expression
content tracks the emotion class and whose articulation tracks the audio.

Stands in for real datasets and pretrained speech/emotion encoders; the
generators are the single interface point where those would plug in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorio
from .facemodel import BlendshapeModel
from .manifold import LabeledEmbeddingSet

SAMPLE_MAGIC = b"EETS"
DATASET_FORMAT = "eet-dataset"
DATASET_VERSION = 1

_EMOTION_NAMES = ("neutral", "happy", "sad", "angry", "fear", "disgust", "surprise", "calm")

# Scales of the generated parameter blocks (see gen_dataset).
_OFFSET_STD = 0.8
_ARTICULATION_STD = 0.4
_IDENTITY_STD = 0.5
_POSE_STD = 0.05
_AUDIO_RHO = 0.85


@dataclass(frozen=True)
class SynthConfig:
    classes: int = 3
    d_emotion: int = 16
    d_audio: int = 8
    frames: int = 32
    samples_per_class: int = 40
    separation: float = 5.0
    noise: float = 1.0
    articulation_gain: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.classes < 2:
            raise ValueError("need at least two emotion classes")
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        if min(self.d_emotion, self.d_audio, self.frames, self.samples_per_class) < 1:
            raise ValueError("dimensions and counts must be >= 1")

    @property
    def class_names(self) -> tuple[str, ...]:
        names = list(_EMOTION_NAMES[: self.classes])
        while len(names) < self.classes:
            names.append(f"emotion{len(names)}")
        return tuple(names)


@dataclass(frozen=True)
class SynthSample:
    audio: np.ndarray  # (T, d_audio)
    e_gt: np.ndarray  # (d_emotion,)
    label: int
    params_gt: np.ndarray  # (T, D)
    mask: np.ndarray  # (T,) bool


def class_centroids(cfg: SynthConfig) -> np.ndarray:
    """K nearly-orthogonal centroids with pairwise distance = separation."""
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 1])
    raw = rng.standard_normal((cfg.classes, cfg.d_emotion))
    q, _ = np.linalg.qr(raw.T)  # (d, K) orthonormal columns
    frame = q.T[: cfg.classes]
    return frame * (cfg.separation / np.sqrt(2.0))


def gen_embeddings(cfg: SynthConfig) -> LabeledEmbeddingSet:
    """Labeled embedding clusters around the class centroids."""
    cfg.validate()
    centroids = class_centroids(cfg)
    rng = np.random.default_rng([cfg.seed, 2])
    rows = []
    labels = []
    for c in range(cfg.classes):
        pts = centroids[c] + cfg.noise * rng.standard_normal((cfg.samples_per_class, cfg.d_emotion))
        rows.append(pts)
        labels.extend([c] * cfg.samples_per_class)
    return LabeledEmbeddingSet(
        embeddings=np.concatenate(rows, axis=0),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=cfg.class_names,
    )


def gen_audio(rng: np.random.Generator, frames: int, d_audio: int) -> np.ndarray:
    """Band-limited feature walk: stationary AR(1) with unit marginal variance."""
    out = np.empty((frames, d_audio))
    out[0] = rng.standard_normal(d_audio)
    innovation = np.sqrt(1.0 - _AUDIO_RHO**2)
    for t in range(1, frames):
        out[t] = _AUDIO_RHO * out[t - 1] + innovation * rng.standard_normal(d_audio)
    return out


def generation_audio(seed: int, frames: int, d_audio: int) -> np.ndarray:
    """Audio features for inference-time generation, derived only from the seed."""
    return gen_audio(np.random.default_rng([seed, 9]), frames, d_audio)


def expression_offsets(cfg: SynthConfig, n_exp: int) -> np.ndarray:
    """Per-class expression templates (K, n_exp)."""
    rng = np.random.default_rng([cfg.seed, 3])
    return _OFFSET_STD * rng.standard_normal((cfg.classes, n_exp))


def audio_readout(cfg: SynthConfig, n_exp: int) -> np.ndarray:
    """Fixed linear audio->expression articulation map (n_exp, d_audio)."""
    rng = np.random.default_rng([cfg.seed, 4])
    r = rng.standard_normal((n_exp, cfg.d_audio))
    return r * (_ARTICULATION_STD / np.sqrt(cfg.d_audio))


def _smooth_noise(rng: np.random.Generator, frames: int, dims: int, scale: float) -> np.ndarray:
    out = np.empty((frames, dims))
    out[0] = rng.standard_normal(dims)
    for t in range(1, frames):
        out[t] = 0.9 * out[t - 1] + np.sqrt(1 - 0.81) * rng.standard_normal(dims)
    return scale * out


def gen_dataset(cfg: SynthConfig, model: BlendshapeModel) -> list[SynthSample]:
    """Sample list ordered class-major; per-sample rng is (seed, index)-derived."""
    cfg.validate()
    centroids = class_centroids(cfg)
    offsets = expression_offsets(cfg, model.n_exp)
    readout = audio_readout(cfg, model.n_exp)
    samples = []
    index = 0
    for label in range(cfg.classes):
        for _ in range(cfg.samples_per_class):
            rng = np.random.default_rng([cfg.seed, 100, index])
            audio = gen_audio(rng, cfg.frames, cfg.d_audio)
            beta = _IDENTITY_STD * rng.standard_normal(model.n_id)
            theta = _smooth_noise(rng, cfg.frames, model.n_pose, _POSE_STD)
            psi = offsets[label][None, :] + cfg.articulation_gain * (audio @ readout.T)
            params = np.concatenate(
                [np.tile(beta, (cfg.frames, 1)), psi, theta], axis=1
            )
            e_gt = centroids[label] + cfg.noise * rng.standard_normal(cfg.d_emotion)
            samples.append(
                SynthSample(
                    audio=audio,
                    e_gt=e_gt,
                    label=label,
                    params_gt=params,
                    mask=np.ones(cfg.frames, dtype=bool),
                )
            )
            index += 1
    return samples


# -- on-disk dataset ----------------------------------------------------------


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded shuffle split; returns (train, val) index lists."""
    order = np.random.default_rng([seed, 5]).permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    val = sorted(order[:n_val].tolist())
    train = sorted(order[n_val:].tolist())
    return train, val


def save_dataset(
    out_dir,
    cfg: SynthConfig,
    samples: list[SynthSample],
    val_fraction: float = 0.2,
) -> dict:
    out = Path(out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    train_idx, val_idx = split_indices(len(samples), val_fraction, cfg.seed)
    val_set = set(val_idx)
    entries = []
    for i, sample in enumerate(samples):
        rel = f"samples/sample_{i:05d}.bin"
        blob = tensorio.pack_tensor_table(
            {
                "audio": sample.audio,
                "e_gt": sample.e_gt,
                "params_gt": sample.params_gt,
                "mask": sample.mask.astype(np.float32),
            }
        )
        (out / rel).write_bytes(SAMPLE_MAGIC + blob)
        entries.append(
            {
                "file": rel,
                "index": i,
                "label": sample.label,
                "class_name": cfg.class_names[sample.label],
                "split": "val" if i in val_set else "train",
            }
        )
    manifest = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "config": {
            "classes": cfg.classes,
            "d_emotion": cfg.d_emotion,
            "d_audio": cfg.d_audio,
            "frames": cfg.frames,
            "samples_per_class": cfg.samples_per_class,
            "separation": cfg.separation,
            "noise": cfg.noise,
            "articulation_gain": cfg.articulation_gain,
            "seed": cfg.seed,
        },
        "class_names": list(cfg.class_names),
        "val_fraction": val_fraction,
        "samples": entries,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest


def load_dataset(path) -> tuple[SynthConfig, list[SynthSample], list[str]]:
    """Returns (config, samples, split tags aligned with samples)."""
    root = Path(path)
    with open(root / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != DATASET_FORMAT:
        raise ValueError("not a dataset directory")
    cfg = SynthConfig(**manifest["config"])
    samples = []
    splits = []
    for entry in manifest["samples"]:
        buf = (root / entry["file"]).read_bytes()
        if buf[:4] != SAMPLE_MAGIC:
            raise ValueError(f"bad sample file {entry['file']}")
        tensors, _ = tensorio.unpack_tensor_table(buf, 4)
        samples.append(
            SynthSample(
                audio=tensors["audio"],
                e_gt=tensors["e_gt"],
                label=int(entry["label"]),
                params_gt=tensors["params_gt"],
                mask=tensors["mask"] > 0.5,
            )
        )
        splits.append(entry["split"])
    return cfg, samples, splits
