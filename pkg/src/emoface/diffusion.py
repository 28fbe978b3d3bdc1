"""Conditional denoising diffusion over parameter sequences.

The denoiser predicts the clean sequence (x0-parameterization): per-frame
tokens are a projection of [params | audio frame | time embedding], refined
by one cross-attention block over two memory tokens (projected emotion and
identity vectors) and a GELU feed-forward block, then projected back to
parameter space through a zero-initialized output head.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .facemodel import BlendshapeModel, decode_sequence_t, sequence_normals
from .losses import (
    LossWeights,
    MappingNetwork,
    TrainMode,
    accel_loss_t,
    emo_loss_t,
    mesh_loss_t,
    normal_loss_t,
    recon_loss_t,
    sample_train_mode,
    total_loss_t,
    velocity_loss_t,
)
from .manifold import EditVectorDictionary, apply_edits
from .numerics import ParamStore, Tensor, as_tensor, concat, gelu, softmax_rows


# -- noise schedule ------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def steps(self) -> int:
        return self.beta.shape[0]


def build_schedule(t_diff: int, beta_min: float, beta_max: float) -> NoiseSchedule:
    """Linear beta schedule with running alpha-bar products."""
    if t_diff < 2:
        raise ValueError("need at least two diffusion steps")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ValueError("betas must satisfy 0 < beta_min <= beta_max < 1")
    beta = np.linspace(beta_min, beta_max, t_diff)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    if alpha_bar[0] <= 0.99:
        # coarse first step: legitimate for analytic toy schedules, but a
        # production schedule should start nearly noise-free
        warnings.warn("alpha_bar[0] <= 0.99; the first diffusion step is coarse")
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Forward process draw x_t = sqrt(ab_t)*x0 + sqrt(1-ab_t)*eps."""
    if not 0 <= t < s.steps:
        raise IndexError(f"timestep {t} outside [0, {s.steps})")
    ab = s.alpha_bar[t]
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps


# -- denoiser -------------------------------------------------------------------


@dataclass(frozen=True)
class DenoiserConfig:
    d_param: int
    d_audio: int
    d_emotion: int
    n_identity: int
    d_model: int = 32
    n_heads: int = 2
    ff_hidden: int = 64
    time_dim: int = 16
    time_hidden: int = 32
    zero_init_output: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.time_dim % 2 != 0:
            raise ValueError("time_dim must be even")
        for name in ("d_param", "d_audio", "d_emotion", "n_identity", "d_model", "ff_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class Conditioning:
    audio: np.ndarray  # (T, d_audio)
    emotion: np.ndarray  # (d_emotion,)
    identity: np.ndarray  # (n_identity,)


class DenoiserWeights:
    """All trainable tensors of the denoiser, registered in a ParamStore."""

    def __init__(self, cfg: DenoiserConfig, store: ParamStore | None = None):
        cfg.validate()
        self.cfg = cfg
        self.store = store if store is not None else ParamStore()
        rng = np.random.default_rng(cfg.seed)

        def dense(name: str, rows: int, cols: int, zero: bool = False):
            scale = 0.0 if zero else 1.0 / math.sqrt(cols)
            w = self.store.add(f"{name}.w", scale * rng.standard_normal((rows, cols)))
            b = self.store.add(f"{name}.b", np.zeros((1, rows)))
            return w, b

        d_in = cfg.d_param + cfg.d_audio + cfg.time_dim
        self.in_w, self.in_b = dense("denoiser.in", cfg.d_model, d_in)
        self.t1_w, self.t1_b = dense("denoiser.time1", cfg.time_hidden, cfg.time_dim)
        self.t2_w, self.t2_b = dense("denoiser.time2", cfg.time_dim, cfg.time_hidden)
        self.me_w, self.me_b = dense("denoiser.mem_emo", cfg.d_model, cfg.d_emotion)
        self.mi_w, self.mi_b = dense("denoiser.mem_id", cfg.d_model, cfg.n_identity)
        self.q_w, self.q_b = dense("denoiser.attn_q", cfg.d_model, cfg.d_model)
        self.k_w, self.k_b = dense("denoiser.attn_k", cfg.d_model, cfg.d_model)
        self.v_w, self.v_b = dense("denoiser.attn_v", cfg.d_model, cfg.d_model)
        self.o_w, self.o_b = dense("denoiser.attn_o", cfg.d_model, cfg.d_model)
        self.f1_w, self.f1_b = dense("denoiser.ff1", cfg.ff_hidden, cfg.d_model)
        self.f2_w, self.f2_b = dense("denoiser.ff2", cfg.d_model, cfg.ff_hidden)
        self.out_w, self.out_b = dense(
            "denoiser.out", cfg.d_param, cfg.d_model, zero=cfg.zero_init_output
        )


def sinusoidal_time_embedding(t: int, dim: int) -> np.ndarray:
    """(1, dim) sin/cos embedding of an integer timestep."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])[None, :]


def denoiser_forward(
    w: DenoiserWeights,
    x_t: np.ndarray | Tensor,
    t: int,
    cond: Conditioning,
    return_attn: bool = False,
):
    """Predict the clean sequence from x_t; returns a (T, D) Tensor."""
    cfg = w.cfg
    x = as_tensor(x_t)
    frames = x.shape[0]
    if x.shape != (frames, cfg.d_param):
        raise ValueError(f"expected (T, {cfg.d_param}) state, got {x.shape}")
    if cond.audio.shape != (frames, cfg.d_audio):
        raise ValueError("audio frame count must match the motion frame count")
    if cond.emotion.shape != (cfg.d_emotion,) or cond.identity.shape != (cfg.n_identity,):
        raise ValueError("conditioning vector dimensions do not match the config")

    temb = as_tensor(sinusoidal_time_embedding(t, cfg.time_dim))
    temb = gelu(temb @ w.t1_w.T + w.t1_b) @ w.t2_w.T + w.t2_b
    temb_tiled = as_tensor(np.ones((frames, 1))) @ temb

    tokens = concat([x, as_tensor(cond.audio), temb_tiled], axis=1)
    h = tokens @ w.in_w.T + w.in_b

    mem_e = as_tensor(cond.emotion[None, :]) @ w.me_w.T + w.me_b
    mem_i = as_tensor(cond.identity[None, :]) @ w.mi_w.T + w.mi_b
    memory = concat([mem_e, mem_i], axis=0)

    q = h @ w.q_w.T + w.q_b
    k = memory @ w.k_w.T + w.k_b
    v = memory @ w.v_w.T + w.v_b

    d_head = cfg.d_model // cfg.n_heads
    head_outs = []
    attn_maps = []
    for i in range(cfg.n_heads):
        qh = q.narrow(1, i * d_head, d_head)
        kh = k.narrow(1, i * d_head, d_head)
        vh = v.narrow(1, i * d_head, d_head)
        scores = (qh @ kh.T) * (1.0 / math.sqrt(d_head))
        attn = softmax_rows(scores)
        attn_maps.append(attn.value.copy())
        head_outs.append(attn @ vh)
    attn_out = concat(head_outs, axis=1) @ w.o_w.T + w.o_b
    h = h + attn_out
    h = h + gelu(h @ w.f1_w.T + w.f1_b) @ w.f2_w.T + w.f2_b
    out = h @ w.out_w.T + w.out_b
    if return_attn:
        return out, attn_maps
    return out


# -- optimizer -------------------------------------------------------------------


class OptimizerState:
    """Per-parameter Adam moment estimates plus a shared step counter."""

    def __init__(self, store: ParamStore):
        self.m = {name: np.zeros_like(t.value) for name, t in store.items()}
        self.v = {name: np.zeros_like(t.value) for name, t in store.items()}
        self.step = 0


def adamw_update(
    params: ParamStore,
    opt: OptimizerState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One decoupled-weight-decay Adam step with bias correction."""
    b1, b2 = betas
    opt.step += 1
    bc1 = 1.0 - b1**opt.step
    bc2 = 1.0 - b2**opt.step
    for name, p in params.items():
        g = p.grad
        if g is None or not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name}")
        m = opt.m[name]
        v = opt.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.value -= lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * p.value)


def cosine_lr(step: int, total: int, lr0: float) -> float:
    """Cosine annealing from lr0 down to 0 over `total` steps."""
    if total < 1 or not 0 <= step <= total:
        raise ValueError("need 0 <= step <= total with total >= 1")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total))


# -- training --------------------------------------------------------------------


@dataclass
class TrainBatchSample:
    """One training example with its precomputed ground-truth geometry."""

    params: np.ndarray  # (T, D)
    audio: np.ndarray  # (T, d_audio)
    emotion: np.ndarray  # (d_emotion,)
    identity: np.ndarray  # (n_identity,)
    mask: np.ndarray  # (T,) bool
    gt_mesh_flat: np.ndarray  # (T*V, 3)
    gt_normals_flat: np.ndarray  # (T*V, 3)


def prepare_sample(model: BlendshapeModel, params, audio, emotion, mask) -> TrainBatchSample:
    params = np.asarray(params, dtype=np.float64)
    beta = params[0, : model.n_id]
    meshes = model.template[None] + (params @ model.combined_basis().T).reshape(
        params.shape[0], model.V, 3
    )
    normals = sequence_normals(meshes, model.faces)
    t = params.shape[0]
    return TrainBatchSample(
        params=params,
        audio=np.asarray(audio, dtype=np.float64),
        emotion=np.asarray(emotion, dtype=np.float64),
        identity=beta.copy(),
        mask=np.asarray(mask, dtype=bool),
        gt_mesh_flat=meshes.reshape(t * model.V, 3),
        gt_normals_flat=normals.reshape(t * model.V, 3),
    )


@dataclass
class TrainStepConfig:
    weights: LossWeights
    dual_train: bool
    mapping: MappingNetwork
    model: BlendshapeModel
    dictionary: EditVectorDictionary | None = None
    mapping_input: str = "psi"  # "psi" or "full"
    edit_alpha_range: tuple[float, float] = (-6.0, 6.0)
    edit_pairwise_fraction: float = 0.5
    optimizer_betas: tuple[float, float] = (0.9, 0.999)
    optimizer_eps: float = 1e-8
    weight_decay: float = 1e-5


@dataclass
class StepResult:
    total: float
    components: dict[str, float]
    mode_counts: dict[str, int]
    timesteps: list[int]


def sample_loss_t(
    w: DenoiserWeights,
    sample: TrainBatchSample,
    t: int,
    eps: np.ndarray,
    s: NoiseSchedule,
    cfg: TrainStepConfig,
    mode: TrainMode,
    emotion: np.ndarray,
    e_target: np.ndarray,
) -> tuple[Tensor, dict[str, float]]:
    """Loss of one sample at one diffusion step, as a Tensor graph."""
    x_t = q_sample(sample.params, t, eps, s)
    cond = Conditioning(audio=sample.audio, emotion=emotion, identity=sample.identity)
    x0_pred = denoiser_forward(w, x_t, t, cond)

    model = cfg.model
    frames = sample.params.shape[0]
    n_id, n_exp = model.n_id, model.n_exp
    if cfg.mapping_input == "full":
        mapping_in = x0_pred
    else:
        mapping_in = x0_pred.narrow(1, n_id, n_exp)
    e_pred = cfg.mapping.forward(mapping_in)
    comp_t: dict[str, Tensor] = {"emo": emo_loss_t(e_pred, e_target)}

    if mode is TrainMode.ORIGINAL:
        pred_mesh = decode_sequence_t(model, x0_pred)
        comp_t["recon"] = recon_loss_t(x0_pred, sample.params, sample.mask)
        comp_t["mesh"] = mesh_loss_t(pred_mesh, sample.gt_mesh_flat, frames, model.V)
        comp_t["normal"] = normal_loss_t(
            pred_mesh, sample.gt_normals_flat, model.faces, frames, model.V
        )
        comp_t["vel"] = velocity_loss_t(pred_mesh, sample.gt_mesh_flat, frames, model.V)
        comp_t["acc"] = accel_loss_t(pred_mesh, sample.gt_mesh_flat, frames, model.V)

    loss = total_loss_t(comp_t, cfg.weights, mode)
    return loss, {name: float(v.value) for name, v in comp_t.items()}


def training_step(
    w: DenoiserWeights,
    opt: OptimizerState,
    batch: list[TrainBatchSample],
    s: NoiseSchedule,
    rng: np.random.Generator,
    cfg: TrainStepConfig,
    lr: float,
) -> StepResult:
    """One optimization step over a batch.

    Per sample: draw a timestep and noise, form x_t, predict x0, and apply
    either the full objective (original mode) or only the emotion consistency
    loss against a dictionary-edited embedding (edited mode). Modes are drawn
    per sample when dual training is enabled. Deterministic given the rng.
    """
    if not batch:
        raise ValueError("empty batch")
    losses: list[Tensor] = []
    comp_sums: dict[str, float] = {}
    comp_counts: dict[str, int] = {}
    mode_counts = {"original": 0, "edited": 0}
    timesteps: list[int] = []

    for sample in batch:
        t = int(rng.integers(s.steps))
        eps = rng.standard_normal(sample.params.shape)
        mode = sample_train_mode(rng) if cfg.dual_train else TrainMode.ORIGINAL
        if mode is TrainMode.EDITED:
            if cfg.dictionary is None:
                raise ValueError("dual training requires an edit dictionary")
            # Cover both direction families the dictionary exposes.
            k_classes = cfg.dictionary.K
            if rng.random() < cfg.edit_pairwise_fraction:
                i = int(rng.integers(k_classes))
                j = int(rng.integers(k_classes - 1))
                direction: int | tuple[int, int] = (i, j if j < i else j + 1)
            else:
                direction = int(rng.integers(k_classes))
            alpha = float(rng.uniform(*cfg.edit_alpha_range))
            emotion = apply_edits(sample.emotion, [(direction, alpha)], cfg.dictionary)
            e_target = emotion
        else:
            emotion = sample.emotion
            e_target = sample.emotion
        mode_counts[mode.value] += 1
        timesteps.append(t)

        loss, comps = sample_loss_t(w, sample, t, eps, s, cfg, mode, emotion, e_target)
        losses.append(loss)
        for name, value in comps.items():
            comp_sums[name] = comp_sums.get(name, 0.0) + value
            comp_counts[name] = comp_counts.get(name, 0) + 1

    total = losses[0]
    for extra in losses[1:]:
        total = total + extra
    total = total * (1.0 / len(batch))
    total_value = total.item()
    components = {name: comp_sums[name] / comp_counts[name] for name in comp_sums}
    if not np.isfinite(total_value):
        raise ValueError(f"non-finite training loss; components: {components}")

    w.store.zero_grad()
    total.backward()
    adamw_update(
        w.store,
        opt,
        lr,
        betas=cfg.optimizer_betas,
        eps=cfg.optimizer_eps,
        weight_decay=cfg.weight_decay,
    )
    return StepResult(
        total=total_value,
        components=components,
        mode_counts=mode_counts,
        timesteps=timesteps,
    )


# -- sampling --------------------------------------------------------------------


def posterior_coefficients(s: NoiseSchedule, t: int) -> tuple[float, float, float]:
    """(x0 coefficient, x_t coefficient, variance) of the reverse posterior at t.

    alpha_bar[t-1] is taken as 1 at t=0, which collapses the final step onto
    the clean prediction.
    """
    if not 0 <= t < s.steps:
        raise IndexError(f"timestep {t} outside [0, {s.steps})")
    ab_t = s.alpha_bar[t]
    ab_prev = s.alpha_bar[t - 1] if t > 0 else 1.0
    beta_t = s.beta[t]
    alpha_t = s.alpha[t]
    c_x0 = math.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
    c_xt = math.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)
    var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_t
    return c_x0, c_xt, var


def sample(
    w: DenoiserWeights,
    cond: Conditioning,
    s: NoiseSchedule,
    rng: np.random.Generator,
    mode: str = "deterministic",
    frames: int | None = None,
) -> np.ndarray:
    """Reverse diffusion from standard normal noise; returns (T, D) parameters.

    Each step forms the x0-parameterized posterior mean
    mu = sqrt(ab_prev)*beta_t/(1-ab_t) * x0_pred
       + sqrt(alpha_t)*(1-ab_prev)/(1-ab_t) * x_t
    with variance (1-ab_prev)/(1-ab_t)*beta_t; ancestral mode adds the noise
    term, deterministic mode omits it. ab_prev is 1 at the final step, so the
    chain ends exactly on the last x0 prediction.
    """
    if mode not in ("deterministic", "ancestral"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    frames = cond.audio.shape[0] if frames is None else frames
    if cond.audio.shape[0] != frames:
        raise ValueError("conditioning audio must cover every frame")
    x = rng.standard_normal((frames, w.cfg.d_param))
    for t in range(s.steps - 1, -1, -1):
        x0_pred = denoiser_forward(w, x, t, cond).value
        c_x0, c_xt, var = posterior_coefficients(s, t)
        mean = c_x0 * x0_pred + c_xt * x
        if mode == "ancestral" and t > 0:
            x = mean + math.sqrt(var) * rng.standard_normal(x.shape)
        else:
            x = mean
    return x
