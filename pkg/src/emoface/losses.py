"""Training objective: masked parameter reconstruction, mesh/normal geometry,
velocity/acceleration smoothness, the expression-to-emotion mapping network
with its cosine consistency loss, the weighted total, and the stochastic
original/edited mode selector.

Each loss has a differentiable Tensor form (suffix `_t`, used by the trainer)
and a plain-array wrapper returning a float.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .facemodel import sequence_normals, sequence_normals_t
from .numerics import ParamStore, Tensor, as_tensor, gelu


class TrainMode(enum.Enum):
    ORIGINAL = "original"
    EDITED = "edited"


@dataclass(frozen=True)
class LossWeights:
    recon: float = 1.0
    mesh: float = 1.0
    normal: float = 0.1
    vel: float = 0.5
    acc: float = 0.25
    emo: float = 0.5

    def validate(self) -> None:
        for name, value in self.__dict__.items():
            if not (value >= 0 and np.isfinite(value)):
                raise ValueError(f"loss weight {name} must be finite and >= 0")


def _check_same_shape(a, b) -> None:
    sa = a.shape if hasattr(a, "shape") else np.shape(a)
    sb = b.shape if hasattr(b, "shape") else np.shape(b)
    if sa != sb:
        raise ValueError(f"shape mismatch: {sa} vs {sb}")


# -- parameter reconstruction --------------------------------------------------


def recon_loss_t(pred: Tensor, gt: np.ndarray, mask: np.ndarray) -> Tensor:
    _check_same_shape(pred, gt)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (pred.shape[0],):
        raise ValueError("mask must hold one flag per frame")
    valid = int(mask.sum())
    if valid == 0:
        raise ValueError("empty mask")
    diff = pred - as_tensor(gt)
    masked = diff * as_tensor(mask[:, None].astype(np.float64))
    return (masked * masked).sum() * (1.0 / (valid * pred.shape[1]))


def recon_loss(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    return recon_loss_t(as_tensor(np.asarray(pred, dtype=np.float64)), gt, mask).item()


# -- mesh-level geometry ---------------------------------------------------------


def _mean_sq(diff: Tensor, denom: float) -> Tensor:
    return (diff * diff).sum() * (1.0 / denom)


def mesh_loss_t(pred_flat: Tensor, gt_flat: np.ndarray, frames: int, v: int) -> Tensor:
    """Mean squared vertex error over a (T*V, 3) layout, normalized by T*V."""
    _check_same_shape(pred_flat, gt_flat)
    return _mean_sq(pred_flat - as_tensor(gt_flat), frames * v)


def mesh_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    t, v, _ = pred.shape
    return mesh_loss_t(as_tensor(pred.reshape(t * v, 3)), gt.reshape(t * v, 3), t, v).item()


def normal_loss_t(
    pred_flat: Tensor, gt_normals_flat: np.ndarray, faces: np.ndarray, frames: int, v: int
) -> Tensor:
    pred_normals = sequence_normals_t(pred_flat, faces, frames, v)
    return _mean_sq(pred_normals - as_tensor(gt_normals_flat), frames * v)


def normal_loss(pred: np.ndarray, gt: np.ndarray, faces: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    t, v, _ = pred.shape
    n_pred = sequence_normals(pred, faces)
    n_gt = sequence_normals(gt, faces)
    return float(np.sum((n_pred - n_gt) ** 2) / (t * v))


def _frame_rows(flat: Tensor, frames: int, v: int) -> Tensor:
    return flat.reshape(frames, v * 3)


def velocity_loss_t(pred_flat: Tensor, gt_flat: np.ndarray, frames: int, v: int) -> Tensor:
    if frames < 2:
        raise ValueError("velocity loss needs T >= 2")
    _check_same_shape(pred_flat, gt_flat)
    p = _frame_rows(pred_flat, frames, v)
    g = np.asarray(gt_flat).reshape(frames, v * 3)
    dp = p.narrow(0, 1, frames - 1) - p.narrow(0, 0, frames - 1)
    dg = g[1:] - g[:-1]
    return _mean_sq(dp - as_tensor(dg), (frames - 1) * v)


def velocity_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    t, v, _ = pred.shape
    return velocity_loss_t(as_tensor(pred.reshape(t * v, 3)), gt.reshape(t * v, 3), t, v).item()


def accel_loss_t(pred_flat: Tensor, gt_flat: np.ndarray, frames: int, v: int) -> Tensor:
    if frames < 3:
        raise ValueError("acceleration loss needs T >= 3")
    _check_same_shape(pred_flat, gt_flat)
    p = _frame_rows(pred_flat, frames, v)
    g = np.asarray(gt_flat).reshape(frames, v * 3)
    ddp = (
        p.narrow(0, 2, frames - 2)
        - p.narrow(0, 1, frames - 2) * 2.0
        + p.narrow(0, 0, frames - 2)
    )
    ddg = g[2:] - 2.0 * g[1:-1] + g[:-2]
    return _mean_sq(ddp - as_tensor(ddg), (frames - 2) * v)


def accel_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    t, v, _ = pred.shape
    return accel_loss_t(as_tensor(pred.reshape(t * v, 3)), gt.reshape(t * v, 3), t, v).item()


# -- emotion consistency ----------------------------------------------------------


class MappingNetwork:
    """Two fully connected layers with GELU: temporal-mean parameters (the
    expression block by default) -> emotion space."""

    def __init__(
        self,
        store: ParamStore,
        n_inputs: int,
        d_emotion: int,
        hidden: int = 64,
        rng: np.random.Generator | None = None,
        prefix: str = "mapping",
    ):
        if hidden < 1:
            raise ValueError("hidden width must be >= 1")
        rng = rng or np.random.default_rng(0)
        self.n_inputs = n_inputs
        self.hidden = hidden
        self.d_emotion = d_emotion
        # Nonzero bias inits keep the projected embedding away from the
        # cosine-loss singularity when the expression input is all zero.
        self.w1 = store.add(f"{prefix}.w1", rng.standard_normal((hidden, n_inputs)) / np.sqrt(n_inputs))
        self.b1 = store.add(f"{prefix}.b1", 0.5 * rng.standard_normal((1, hidden)))
        self.w2 = store.add(f"{prefix}.w2", rng.standard_normal((d_emotion, hidden)) / np.sqrt(hidden))
        self.b2 = store.add(f"{prefix}.b2", 0.1 * rng.standard_normal((1, d_emotion)))

    def forward(self, psi_seq: Tensor) -> Tensor:
        frames = psi_seq.shape[0]
        if frames == 0:
            raise ValueError("empty sequence")
        pooled = psi_seq.sum(axis=0, keepdims=True) * (1.0 / frames)
        hidden = gelu(pooled @ self.w1.T + self.b1)
        return hidden @ self.w2.T + self.b2


def mapping_forward(net: MappingNetwork, psi_seq) -> np.ndarray:
    """Project a (T, n_inputs) parameter block to an emotion embedding."""
    psi_seq = np.asarray(psi_seq, dtype=np.float64)
    if psi_seq.ndim != 2 or psi_seq.shape[1] != net.n_inputs:
        raise ValueError(f"expected (T, {net.n_inputs}) parameter block")
    return net.forward(as_tensor(psi_seq)).value[0]


def emo_loss_t(e_pred: Tensor, e_target: np.ndarray) -> Tensor:
    """Cosine distance 1 - cos(e_pred, e_target); range [0, 2]."""
    target = np.asarray(e_target, dtype=np.float64).reshape(1, -1)
    nt = np.linalg.norm(target)
    if nt < 1e-12:
        raise ValueError("undefined cosine: zero-norm target embedding")
    pred = e_pred.reshape(1, target.shape[1])
    sq = (pred * pred).sum()
    if float(sq.value) < 1e-24:
        raise ValueError("undefined cosine: zero-norm predicted embedding")
    dot = (pred * as_tensor(target)).sum()
    return 1.0 - dot / (sq.sqrt() * nt)


def emo_loss(e_pred: np.ndarray, e_target: np.ndarray) -> float:
    return emo_loss_t(as_tensor(np.asarray(e_pred, dtype=np.float64)), e_target).item()


# -- total objective ----------------------------------------------------------------


LOSS_NAMES = ("recon", "mesh", "normal", "vel", "acc", "emo")


def total_loss(components: dict[str, float], w: LossWeights, mode: TrainMode) -> float:
    if mode is TrainMode.EDITED:
        return w.emo * components["emo"]
    return (
        w.recon * components["recon"]
        + w.mesh * components["mesh"]
        + w.normal * components["normal"]
        + w.vel * components["vel"]
        + w.acc * components["acc"]
        + w.emo * components["emo"]
    )


def total_loss_t(components: dict[str, Tensor], w: LossWeights, mode: TrainMode) -> Tensor:
    if mode is TrainMode.EDITED:
        return components["emo"] * w.emo
    out = components["recon"] * w.recon
    for name in ("mesh", "normal", "vel", "acc", "emo"):
        out = out + components[name] * getattr(w, name)
    return out


def sample_train_mode(rng: np.random.Generator) -> TrainMode:
    """Bernoulli(0.5) draw; ORIGINAL on success."""
    return TrainMode.ORIGINAL if rng.random() < 0.5 else TrainMode.EDITED
