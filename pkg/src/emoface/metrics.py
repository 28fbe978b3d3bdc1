"""Mesh-sequence evaluation suite: vertex error, lip vertex error, mouth
opening deviation, facial dynamics deviation, and the Calinski-Harabasz
cluster comparison over expression parameters."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    ve_mm: float
    lve_mm: float
    mod_mm: float
    fdd: float
    delta_ch: float
    frames: int
    vertices: int
    sequences: int

    def to_json_obj(self) -> dict:
        return {
            "ve_mm": self.ve_mm,
            "lve_mm": self.lve_mm,
            "mod_mm": self.mod_mm,
            "fdd": self.fdd,
            "delta_ch": self.delta_ch,
            "counts": {
                "frames": self.frames,
                "vertices": self.vertices,
                "sequences": self.sequences,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1)


def _check_sequences(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 3 or pred.shape[2] != 3:
        raise ValueError(f"mesh sequences must share a (T, V, 3) shape: {pred.shape} vs {gt.shape}")
    return pred, gt


def ve(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-vertex Euclidean distance in mm."""
    pred, gt = _check_sequences(pred, gt)
    return float(np.linalg.norm(pred - gt, axis=2).mean())


def lve(pred: np.ndarray, gt: np.ndarray, lips: np.ndarray, per_frame_mean: bool = False) -> float:
    """Lip vertex error: per-frame max distance over the lip subset, averaged
    across frames. `per_frame_mean` switches to the mean-over-lips variant."""
    pred, gt = _check_sequences(pred, gt)
    lips = np.asarray(lips, dtype=np.int64)
    if lips.size == 0:
        raise ValueError("empty lip subset")
    if lips.min() < 0 or lips.max() >= pred.shape[1]:
        raise IndexError("lip index out of range")
    dist = np.linalg.norm(pred[:, lips] - gt[:, lips], axis=2)
    per_frame = dist.mean(axis=1) if per_frame_mean else dist.max(axis=1)
    return float(per_frame.mean())


def mouth_opening_deviation(pred: np.ndarray, gt: np.ndarray, upper_key: int, lower_key: int) -> float:
    """Mean absolute difference of the upper/lower key-vertex distance."""
    pred, gt = _check_sequences(pred, gt)
    v = pred.shape[1]
    if not (0 <= upper_key < v and 0 <= lower_key < v):
        raise IndexError("key vertex index out of range")
    open_pred = np.linalg.norm(pred[:, upper_key] - pred[:, lower_key], axis=1)
    open_gt = np.linalg.norm(gt[:, upper_key] - gt[:, lower_key], axis=1)
    return float(np.abs(open_pred - open_gt).mean())


def _dynamics(seq: np.ndarray, subset: np.ndarray) -> np.ndarray:
    """Per-vertex motion spread: sqrt of mean squared distance from the
    temporal mean position (population form)."""
    pts = seq[:, subset]  # (T, S, 3)
    centered = pts - pts.mean(axis=0, keepdims=True)
    return np.sqrt((centered**2).sum(axis=2).mean(axis=0))


def fdd(pred: np.ndarray, gt: np.ndarray, subset: np.ndarray) -> float:
    """Facial dynamics deviation over a vertex subset (mm)."""
    pred, gt = _check_sequences(pred, gt)
    if pred.shape[0] < 2:
        raise ValueError("need at least two frames")
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("empty vertex subset")
    return float(np.abs(_dynamics(pred, subset) - _dynamics(gt, subset)).mean())


def ch_index(points: np.ndarray, labels: np.ndarray) -> float:
    """Calinski-Harabasz index: [tr(B)/(K-1)] / [tr(W)/(N-K)], trace form."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    classes = np.unique(labels)
    k = classes.size
    if k < 2:
        raise ValueError("need at least two distinct labels")
    if n <= k:
        raise ValueError("degenerate clustering")
    mu = points.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in classes:
        members = points[labels == c]
        mu_c = members.mean(axis=0)
        between += members.shape[0] * float(np.sum((mu_c - mu) ** 2))
        within += float(np.sum((members - mu_c) ** 2))
    if within == 0.0:
        raise ValueError("zero within-cluster dispersion")
    return (between / (k - 1)) / (within / (n - k))


def delta_ch(
    gen_points: np.ndarray,
    gen_labels: np.ndarray,
    gt_points: np.ndarray,
    gt_labels: np.ndarray,
) -> float:
    """Relative CH gap |CH(gen) - CH(gt)| / CH(gt) over expression vectors."""
    if set(np.unique(gen_labels).tolist()) != set(np.unique(gt_labels).tolist()):
        raise ValueError("generated and ground-truth label sets differ")
    ch_gen = ch_index(gen_points, gen_labels)
    ch_gt = ch_index(gt_points, gt_labels)
    return abs(ch_gen - ch_gt) / ch_gt


def sequence_expression_means(param_seqs: list[np.ndarray], n_id: int, n_exp: int) -> np.ndarray:
    """Per-sequence temporal mean of the expression block."""
    return np.stack([seq[:, n_id : n_id + n_exp].mean(axis=0) for seq in param_seqs])
