"""Workflow orchestration: configuration, checkpoints, and the train /
generate / evaluate entry points used by both the CLI and the HTTP service."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensorio
from .diffusion import (
    Conditioning,
    DenoiserConfig,
    DenoiserWeights,
    NoiseSchedule,
    OptimizerState,
    TrainStepConfig,
    build_schedule,
    cosine_lr,
    prepare_sample,
    sample,
    training_step,
)
from .facemodel import (
    BlendshapeModel,
    SynthModelConfig,
    decode_sequence,
    make_synthetic_model,
    save_mesh_sequence,
    save_model,
)
from .losses import LossWeights, MappingNetwork, emo_loss, mapping_forward
from .manifold import (
    ClassifierConfig,
    EditVectorDictionary,
    LinearClassifier,
    apply_edits,
    build_dictionary,
    classify,
    save_dictionary,
    train_classifier,
)
from .metrics import (
    MetricsReport,
    delta_ch,
    fdd,
    lve,
    mouth_opening_deviation,
    sequence_expression_means,
    ve,
)
from .numerics import ParamStore
from .synthdata import (
    SynthConfig,
    gen_dataset,
    gen_embeddings,
    generation_audio,
    load_dataset,
    save_dataset,
)

log = logging.getLogger("emoface")

CHECKPOINT_MAGIC = b"EETK"
CHECKPOINT_VERSION = 1


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleConfig:
    steps: int = 50
    beta_min: float = 1e-4
    beta_max: float = 0.02


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 8e-4
    weight_decay: float = 1e-5
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8


@dataclass(frozen=True)
class DenoiserDims:
    d_model: int = 32
    n_heads: int = 2
    ff_hidden: int = 64
    time_dim: int = 16
    time_hidden: int = 32
    mapping_hidden: int = 64
    mapping_input: str = "psi"  # "psi" (expression block) or "full" (whole parameter vector)
    zero_init_output: bool = True


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 400
    batch_size: int = 8
    dual_train: bool = True
    emo_loss_enabled: bool = True
    edit_alpha_min: float = -6.0
    edit_alpha_max: float = 6.0
    edit_pairwise_fraction: float = 0.5
    val_fraction: float = 0.2


def _pipeline_default_weights() -> LossWeights:
    # Calibrated for the desk-scale setup: the geometry terms are in mm^2 and
    # dwarf the cosine term, so the emotion weight runs hotter here than the
    # LossWeights construction default.
    return LossWeights(emo=2.0)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    fps: float = 25.0
    synth: SynthConfig = field(default_factory=SynthConfig)
    face: SynthModelConfig = field(default_factory=SynthModelConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    denoiser: DenoiserDims = field(default_factory=DenoiserDims)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    loss_weights: LossWeights = field(default_factory=_pipeline_default_weights)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def validate(self) -> None:
        self.synth.validate()
        self.face.validate()
        self.classifier.validate()
        self.loss_weights.validate()
        if self.schedule.steps < 2 or not 0 < self.schedule.beta_min <= self.schedule.beta_max < 1:
            raise ValueError("invalid noise schedule configuration")
        if self.optimizer.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.training.batch_size < 1 or self.training.epochs < 1:
            raise ValueError("epochs and batch size must be >= 1")
        if not 0 < self.training.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.training.edit_alpha_min > self.training.edit_alpha_max:
            raise ValueError("edit alpha range is inverted")
        if self.denoiser.mapping_input not in ("psi", "full"):
            raise ValueError("mapping_input must be 'psi' or 'full'")
        self.denoiser_config().validate()

    def denoiser_config(self) -> DenoiserConfig:
        d_param = self.face.n_id + self.face.n_exp + self.face.n_pose
        return DenoiserConfig(
            d_param=d_param,
            d_audio=self.synth.d_audio,
            d_emotion=self.synth.d_emotion,
            n_identity=self.face.n_id,
            d_model=self.denoiser.d_model,
            n_heads=self.denoiser.n_heads,
            ff_hidden=self.denoiser.ff_hidden,
            time_dim=self.denoiser.time_dim,
            time_hidden=self.denoiser.time_hidden,
            zero_init_output=self.denoiser.zero_init_output,
            seed=self.seed + 2000,
        )

    def effective_weights(self) -> LossWeights:
        if self.training.emo_loss_enabled:
            return self.loss_weights
        return replace(self.loss_weights, emo=0.0)

    def to_json_obj(self) -> dict:
        obj = asdict(self)
        for section in ("synth", "face", "classifier"):
            obj[section].pop("seed", None)
        obj["optimizer"]["betas"] = list(self.optimizer.betas)
        return obj


def config_from_json_obj(obj: dict) -> PipelineConfig:
    """Build a validated PipelineConfig; per-module seeds derive from the
    top-level seed so one value pins the whole run."""
    try:
        seed = int(obj.get("seed", 0))
        cfg = PipelineConfig(
            seed=seed,
            fps=float(obj.get("fps", 25.0)),
            synth=SynthConfig(**{**obj.get("synth", {}), "seed": seed}),
            face=SynthModelConfig(**{**obj.get("face", {}), "seed": seed + 1000}),
            classifier=ClassifierConfig(**{**obj.get("classifier", {}), "seed": seed}),
            denoiser=DenoiserDims(**obj.get("denoiser", {})),
            schedule=ScheduleConfig(**obj.get("schedule", {})),
            optimizer=OptimizerConfig(
                **{
                    **obj.get("optimizer", {}),
                    "betas": tuple(obj.get("optimizer", {}).get("betas", (0.9, 0.999))),
                }
            ),
            loss_weights=LossWeights(**obj.get("loss_weights", {})),
            training=TrainingConfig(**obj.get("training", {})),
        )
    except TypeError as exc:
        raise ValueError(f"unknown configuration key: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path, seed_override: int | None = None) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if seed_override is not None:
        obj["seed"] = seed_override
    return config_from_json_obj(obj)


def config_digest(cfg: PipelineConfig) -> str:
    blob = json.dumps(cfg.to_json_obj(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# -- checkpoints -------------------------------------------------------------------


@dataclass
class LoadedCheckpoint:
    cfg: PipelineConfig
    store: ParamStore
    weights: DenoiserWeights
    mapping: MappingNetwork
    schedule: NoiseSchedule
    class_centroids: np.ndarray
    class_names: list[str]
    optimizer: OptimizerState | None


def build_networks(cfg: PipelineConfig) -> tuple[ParamStore, DenoiserWeights, MappingNetwork]:
    store = ParamStore()
    weights = DenoiserWeights(cfg.denoiser_config(), store=store)
    d_param = cfg.face.n_id + cfg.face.n_exp + cfg.face.n_pose
    mapping = MappingNetwork(
        store,
        n_inputs=cfg.face.n_exp if cfg.denoiser.mapping_input == "psi" else d_param,
        d_emotion=cfg.synth.d_emotion,
        hidden=cfg.denoiser.mapping_hidden,
        rng=np.random.default_rng([cfg.seed, 2001]),
    )
    return store, weights, mapping


def save_checkpoint(
    path,
    cfg: PipelineConfig,
    store: ParamStore,
    class_centroids: np.ndarray,
    class_names: list[str],
    optimizer: OptimizerState | None = None,
) -> str:
    """Write the EETK checkpoint; returns its SHA-256 digest (hex)."""
    meta = {
        "pipeline": cfg.to_json_obj(),
        "class_names": list(class_names),
        "format": "eet-checkpoint",
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    tensors = {name: t.value for name, t in store.items()}
    tensors["aux.class_centroids"] = class_centroids
    parts = [CHECKPOINT_MAGIC, struct.pack("<H", CHECKPOINT_VERSION)]
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    parts.append(tensorio.pack_tensor_table(tensors))
    if optimizer is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<Q", optimizer.step))
        opt_tensors = {}
        for name, m in optimizer.m.items():
            opt_tensors[f"m.{name}"] = m
        for name, v in optimizer.v.items():
            opt_tensors[f"v.{name}"] = v
        parts.append(tensorio.pack_tensor_table(opt_tensors))
    body = b"".join(parts)
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)
    return digest.hex()


def load_checkpoint(path) -> LoadedCheckpoint:
    buf = Path(path).read_bytes()
    if buf[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not an EETK checkpoint file")
    body, trailer = buf[:-32], buf[-32:]
    if hashlib.sha256(body).digest() != trailer:
        raise ValueError("checkpoint digest mismatch; file is corrupt")
    (version,) = struct.unpack_from("<H", body, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (blob_len,) = struct.unpack_from("<I", body, 6)
    meta = json.loads(body[10 : 10 + blob_len].decode("utf-8"))
    cfg = config_from_json_obj(meta["pipeline"])
    tensors, offset = tensorio.unpack_tensor_table(body, 10 + blob_len)
    centroids = tensors.pop("aux.class_centroids")

    store, weights, mapping = build_networks(cfg)
    for name, t in store.items():
        if name not in tensors:
            raise ValueError(f"checkpoint missing parameter {name}")
        if tensors[name].shape != t.value.shape:
            raise ValueError(f"checkpoint shape mismatch for {name}")
        t.value[...] = tensors[name]

    optimizer = None
    (flag,) = struct.unpack_from("<B", body, offset)
    offset += 1
    if flag:
        (step,) = struct.unpack_from("<Q", body, offset)
        offset += 8
        opt_tensors, offset = tensorio.unpack_tensor_table(body, offset)
        optimizer = OptimizerState(store)
        optimizer.step = step
        for name in store.names():
            optimizer.m[name][...] = opt_tensors[f"m.{name}"]
            optimizer.v[name][...] = opt_tensors[f"v.{name}"]

    schedule = build_schedule(cfg.schedule.steps, cfg.schedule.beta_min, cfg.schedule.beta_max)
    return LoadedCheckpoint(
        cfg=cfg,
        store=store,
        weights=weights,
        mapping=mapping,
        schedule=schedule,
        class_centroids=centroids,
        class_names=meta["class_names"],
        optimizer=optimizer,
    )


# -- dataset command ----------------------------------------------------------------


def run_synth_data(cfg: PipelineConfig, out_dir, force: bool = False) -> dict:
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"output directory {out} is not empty (use --force)")
    model = make_synthetic_model(cfg.face)
    samples = gen_dataset(cfg.synth, model)
    manifest = save_dataset(out, cfg.synth, samples, val_fraction=cfg.training.val_fraction)
    save_model(out / "model.eetm", model)
    log.info("wrote %d samples to %s", len(samples), out)
    return manifest


# -- training ------------------------------------------------------------------------


@dataclass(frozen=True)
class RunArtifacts:
    checkpoint_path: str
    dictionary_path: str
    model_path: str
    log_path: str
    config_digest: str
    checkpoint_digest: str


def _check_dataset_matches(cfg: PipelineConfig, data_cfg: SynthConfig) -> None:
    for name in ("classes", "d_emotion", "d_audio", "frames", "samples_per_class"):
        if getattr(cfg.synth, name) != getattr(data_cfg, name):
            raise ValueError(
                f"dataset/config mismatch on synth.{name}: "
                f"{getattr(data_cfg, name)} vs {getattr(cfg.synth, name)}"
            )


def run_train(cfg: PipelineConfig, dataset_dir, out_dir) -> RunArtifacts:
    """Classifier -> dictionary -> diffusion training -> artifacts on disk."""
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data_cfg, samples, splits = load_dataset(dataset_dir)
    _check_dataset_matches(cfg, data_cfg)

    model = make_synthetic_model(cfg.face)
    embeddings = gen_embeddings(data_cfg)
    clf = train_classifier(embeddings, cfg.classifier)
    dictionary = build_dictionary(clf)
    save_dictionary(out / "dictionary.json", dictionary, clf)
    save_model(out / "model.eetm", model)

    centroids = np.stack(
        [
            embeddings.embeddings[embeddings.labels == c].mean(axis=0)
            for c in range(embeddings.K)
        ]
    )

    store, weights, mapping = build_networks(cfg)
    schedule = build_schedule(cfg.schedule.steps, cfg.schedule.beta_min, cfg.schedule.beta_max)
    opt = OptimizerState(store)
    step_cfg = TrainStepConfig(
        weights=cfg.effective_weights(),
        dual_train=cfg.training.dual_train,
        mapping=mapping,
        model=model,
        dictionary=dictionary,
        mapping_input=cfg.denoiser.mapping_input,
        edit_alpha_range=(cfg.training.edit_alpha_min, cfg.training.edit_alpha_max),
        edit_pairwise_fraction=cfg.training.edit_pairwise_fraction,
        optimizer_betas=cfg.optimizer.betas,
        optimizer_eps=cfg.optimizer.eps,
        weight_decay=cfg.optimizer.weight_decay,
    )

    train_idx = [i for i, s in enumerate(splits) if s == "train"]
    prepared = {
        i: prepare_sample(model, samples[i].params_gt, samples[i].audio, samples[i].e_gt, samples[i].mask)
        for i in train_idx
    }
    rng = np.random.default_rng([cfg.seed, 3000])
    batches_per_epoch = max(1, len(train_idx) // cfg.training.batch_size)
    total_steps = cfg.training.epochs * batches_per_epoch
    global_step = 0

    log_path = out / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        for epoch in range(cfg.training.epochs):
            order = rng.permutation(len(train_idx))
            epoch_totals: dict[str, float] = {}
            epoch_counts: dict[str, int] = {}
            mode_counts = {"original": 0, "edited": 0}
            epoch_loss = 0.0
            for b in range(batches_per_epoch):
                chosen = order[b * cfg.training.batch_size : (b + 1) * cfg.training.batch_size]
                batch = [prepared[train_idx[i]] for i in chosen]
                lr = cosine_lr(global_step, total_steps, cfg.optimizer.lr)
                result = training_step(weights, opt, batch, schedule, rng, step_cfg, lr)
                global_step += 1
                epoch_loss += result.total
                for name, value in result.components.items():
                    epoch_totals[name] = epoch_totals.get(name, 0.0) + value
                    epoch_counts[name] = epoch_counts.get(name, 0) + 1
                for mode, count in result.mode_counts.items():
                    mode_counts[mode] += count
            record = {
                "epoch": epoch,
                "loss_total": epoch_loss / batches_per_epoch,
                "lr": cosine_lr(global_step, total_steps, cfg.optimizer.lr),
                "mode_counts": mode_counts,
            }
            for name in epoch_totals:
                record[f"loss_{name}"] = epoch_totals[name] / epoch_counts[name]
            log_fh.write(json.dumps(record) + "\n")
            if epoch % 25 == 0 or epoch == cfg.training.epochs - 1:
                log.info("epoch %d loss %.6f", epoch, record["loss_total"])

    ckpt_path = out / "checkpoint.eetk"
    ckpt_digest = save_checkpoint(
        ckpt_path, cfg, store, centroids, list(data_cfg.class_names), optimizer=opt
    )
    return RunArtifacts(
        checkpoint_path=str(ckpt_path),
        dictionary_path=str(out / "dictionary.json"),
        model_path=str(out / "model.eetm"),
        log_path=str(log_path),
        config_digest=config_digest(cfg),
        checkpoint_digest=ckpt_digest,
    )


# -- generation ----------------------------------------------------------------------


def resolve_base_embedding(
    ckpt: LoadedCheckpoint, label: str | None, embedding: np.ndarray | None
) -> np.ndarray:
    if (label is None) == (embedding is None):
        raise ValueError("provide exactly one of label or embedding")
    if label is not None:
        if label not in ckpt.class_names:
            raise KeyError(f"unknown label {label!r}; known: {ckpt.class_names}")
        return ckpt.class_centroids[ckpt.class_names.index(label)].copy()
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape != (ckpt.cfg.synth.d_emotion,):
        raise ValueError(f"embedding must have dimension {ckpt.cfg.synth.d_emotion}")
    return embedding


def generate_sequence(
    ckpt: LoadedCheckpoint,
    dictionary: EditVectorDictionary,
    base: np.ndarray,
    edits: list[tuple[int | tuple[int, int], float]],
    frames: int,
    seed: int,
    deterministic: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (params (T, D), edited embedding, audio)."""
    if frames < 3:
        raise ValueError("need at least three frames")
    edited = apply_edits(base, edits, dictionary)
    audio = generation_audio(seed, frames, ckpt.cfg.synth.d_audio)
    identity = np.zeros(ckpt.cfg.face.n_id)
    cond = Conditioning(audio=audio, emotion=edited, identity=identity)
    rng = np.random.default_rng([seed, 11])
    params = sample(
        ckpt.weights,
        cond,
        ckpt.schedule,
        rng,
        mode="deterministic" if deterministic else "ancestral",
        frames=frames,
    )
    return params, edited, audio


def run_generate(
    ckpt: LoadedCheckpoint,
    dictionary: EditVectorDictionary,
    model: BlendshapeModel,
    out_dir,
    label: str | None = None,
    embedding: np.ndarray | None = None,
    edits: list[tuple[int | tuple[int, int], float]] | None = None,
    frames: int | None = None,
    seed: int = 0,
    deterministic: bool = True,
) -> dict:
    base = resolve_base_embedding(ckpt, label, embedding)
    frames = frames or ckpt.cfg.synth.frames
    params, edited, _ = generate_sequence(
        ckpt, dictionary, base, edits or [], frames, seed, deterministic
    )
    meshes = decode_sequence(model, params)
    manifest = save_mesh_sequence(
        out_dir,
        meshes,
        model.faces,
        ckpt.cfg.fps,
        params=params,
        extra={
            "seed": seed,
            "deterministic": deterministic,
            "label": label,
            "edits": [[list(k) if isinstance(k, tuple) else int(k), float(a)] for k, a in (edits or [])],
            "edited_embedding": [float(x) for x in edited],
        },
    )
    return manifest


# -- evaluation ----------------------------------------------------------------------


def report_from_sequences(
    model: BlendshapeModel,
    pred_param_seqs: list[np.ndarray],
    gt_param_seqs: list[np.ndarray],
    labels: list[int],
    class_names: list[str],
) -> dict:
    """Metric report for aligned predicted/ground-truth parameter sequences."""
    lips = model.vertex_subsets["lips"]
    upper = model.vertex_subsets["upper_face"]
    upper_key = int(model.vertex_subsets["upper_lip_key"][0])
    lower_key = int(model.vertex_subsets["lower_lip_key"][0])
    n_id, n_exp = model.n_id, model.n_exp

    per_seq: dict[str, list[float]] = {"ve": [], "lve": [], "mod": [], "fdd": [], "l_recon": []}
    for pred, gt in zip(pred_param_seqs, gt_param_seqs):
        mesh_pred = decode_sequence(model, pred)
        mesh_gt = decode_sequence(model, gt)
        per_seq["ve"].append(ve(mesh_pred, mesh_gt))
        per_seq["lve"].append(lve(mesh_pred, mesh_gt, lips))
        per_seq["mod"].append(mouth_opening_deviation(mesh_pred, mesh_gt, upper_key, lower_key))
        per_seq["fdd"].append(fdd(mesh_pred, mesh_gt, upper))
        diff = pred - gt
        per_seq["l_recon"].append(float(np.mean(diff * diff)))

    labels_arr = np.asarray(labels)
    gen_psi = sequence_expression_means(pred_param_seqs, n_id, n_exp)
    gt_psi = sequence_expression_means(gt_param_seqs, n_id, n_exp)
    dch = delta_ch(gen_psi, labels_arr, gt_psi, labels_arr)

    frames = pred_param_seqs[0].shape[0]
    report = MetricsReport(
        ve_mm=float(np.mean(per_seq["ve"])),
        lve_mm=float(np.mean(per_seq["lve"])),
        mod_mm=float(np.mean(per_seq["mod"])),
        fdd=float(np.mean(per_seq["fdd"])),
        delta_ch=dch,
        frames=int(frames),
        vertices=int(model.V),
        sequences=len(pred_param_seqs),
    )
    by_class = {}
    for c in sorted(set(labels)):
        idx = [k for k, lab in enumerate(labels) if lab == c]
        by_class[class_names[c]] = {
            "ve_mm": float(np.mean([per_seq["ve"][k] for k in idx])),
            "lve_mm": float(np.mean([per_seq["lve"][k] for k in idx])),
            "mod_mm": float(np.mean([per_seq["mod"][k] for k in idx])),
            "fdd": float(np.mean([per_seq["fdd"][k] for k in idx])),
            "sequences": len(idx),
        }
    result = report.to_json_obj()
    result["per_class"] = by_class
    result["eval_l_recon"] = float(np.mean(per_seq["l_recon"]))
    return result


def evaluate_checkpoint(
    ckpt: LoadedCheckpoint,
    model: BlendshapeModel,
    dataset_dir,
    split: str = "val",
) -> dict:
    """Deterministic-sampling evaluation of a checkpoint on a dataset split."""
    data_cfg, samples, splits = load_dataset(dataset_dir)
    _check_dataset_matches(ckpt.cfg, data_cfg)
    chosen = [i for i, s in enumerate(splits) if s == split]
    if not chosen:
        raise ValueError(f"empty evaluation split {split!r}")

    n_id, n_exp = model.n_id, model.n_exp
    preds = []
    gts = []
    labels = []
    l_emo_values = []
    for i in chosen:
        s = samples[i]
        identity = s.params_gt[0, :n_id]
        cond = Conditioning(audio=s.audio, emotion=s.e_gt, identity=identity)
        rng = np.random.default_rng([ckpt.cfg.seed, 7001, i])
        params_hat = sample(ckpt.weights, cond, ckpt.schedule, rng, mode="deterministic")
        if ckpt.cfg.denoiser.mapping_input == "full":
            e_hat = mapping_forward(ckpt.mapping, params_hat)
        else:
            e_hat = mapping_forward(ckpt.mapping, params_hat[:, n_id : n_id + n_exp])
        l_emo_values.append(emo_loss(e_hat, s.e_gt))
        preds.append(params_hat)
        gts.append(s.params_gt)
        labels.append(s.label)

    result = report_from_sequences(model, preds, gts, labels, list(data_cfg.class_names))
    result["eval_l_emo"] = float(np.mean(l_emo_values))
    result["split"] = split
    return result


def make_untrained_checkpoint(
    cfg: PipelineConfig,
    class_centroids: np.ndarray,
    class_names: list[str],
    random_output: bool = True,
) -> LoadedCheckpoint:
    """Freshly initialized networks packaged like a loaded checkpoint.

    `random_output` replaces the zero-initialized output head with a random
    one so the baseline emits non-constant sequences.
    """
    base = replace(cfg, denoiser=replace(cfg.denoiser, zero_init_output=not random_output))
    store, weights, mapping = build_networks(base)
    schedule = build_schedule(base.schedule.steps, base.schedule.beta_min, base.schedule.beta_max)
    return LoadedCheckpoint(
        cfg=base,
        store=store,
        weights=weights,
        mapping=mapping,
        schedule=schedule,
        class_centroids=class_centroids,
        class_names=list(class_names),
        optimizer=None,
    )


# -- editing calibration ----------------------------------------------------------


def argmax_crossover(
    clf: LinearClassifier,
    dictionary: EditVectorDictionary,
    start: np.ndarray,
    source: int,
    target: int,
    alpha_max: float = 3.0,
    step: float = 0.05,
) -> tuple[float | None, bool]:
    """Scan alpha along the source->target pairwise direction.

    Returns (first alpha where argmax becomes target, whether argmax ever
    returns to the source class afterwards on the scanned grid).
    """
    alphas = np.arange(0.0, alpha_max + step / 2, step)
    crossover = None
    returned = False
    for a in alphas:
        e = apply_edits(start, [((source, target), float(a))], dictionary)
        am = classify(e, clf).argmax
        if crossover is None and am == target:
            crossover = float(a)
        elif crossover is not None and am == source:
            returned = True
    return crossover, returned


def calibrated_alpha(
    clf: LinearClassifier,
    dictionary: EditVectorDictionary,
    start: np.ndarray,
    source: int,
    target: int,
    alpha_max: float = 3.0,
) -> float:
    """Editing magnitude that lands decisively past the class boundary.

    Twice the argmax-crossover alpha puts the edited embedding roughly at the
    target cluster rather than on the boundary itself.
    """
    crossover, _ = argmax_crossover(clf, dictionary, start, source, target, alpha_max)
    if crossover is None:
        return 2.0 * alpha_max
    return min(2.0 * crossover, 2.0 * alpha_max)
