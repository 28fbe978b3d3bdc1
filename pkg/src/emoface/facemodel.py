"""Linear blendshape face model.

Decodes per-frame parameters (identity beta, expression psi, pose theta)
to a 3D mesh as template + B_shape@beta + B_exp@psi + B_pose@theta, and
computes area-weighted vertex normals. Pose is a linearized additive
corrective basis rather than joint rotations, which keeps the parameter
interface and differentiability without any external model assets.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import Tensor, as_tensor, concat, require_finite, scatter_rows, take_rows

MODEL_MAGIC = b"EETM"
MODEL_VERSION = 1

GRID_SPACING_MM = 10.0
BASIS_AMPLITUDE_MM = 3.0
DEGENERATE_NORMAL_EPS = 1e-12


@dataclass(frozen=True)
class SynthModelConfig:
    grid_n: int = 8
    n_id: int = 8
    n_exp: int = 16
    n_pose: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.grid_n < 4:
            raise ValueError("grid_n must be >= 4")
        if min(self.n_id, self.n_exp, self.n_pose) < 1:
            raise ValueError("basis sizes must be >= 1")


@dataclass(frozen=True)
class BlendshapeModel:
    template: np.ndarray  # (V, 3) mm
    faces: np.ndarray  # (F, 3) vertex indices, CCW
    basis_id: np.ndarray  # (3V, n_id)
    basis_exp: np.ndarray  # (3V, n_exp)
    basis_pose: np.ndarray  # (3V, n_pose)
    vertex_subsets: dict[str, np.ndarray]

    def __post_init__(self):
        v = self.template.shape[0]
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= v):
            raise ValueError("face indices out of range")
        for key in ("lips", "upper_face", "upper_lip_key", "lower_lip_key"):
            if key not in self.vertex_subsets or len(self.vertex_subsets[key]) == 0:
                raise ValueError(f"missing vertex subset {key!r}")
        for key in ("upper_lip_key", "lower_lip_key"):
            if len(self.vertex_subsets[key]) != 1:
                raise ValueError(f"subset {key!r} must hold exactly one vertex")
        for name, basis in (
            ("basis_id", self.basis_id),
            ("basis_exp", self.basis_exp),
            ("basis_pose", self.basis_pose),
        ):
            if basis.shape[0] != 3 * v:
                raise ValueError(f"{name} must have 3*V rows")
            require_finite(name, basis)

    @property
    def V(self) -> int:
        return self.template.shape[0]

    @property
    def F(self) -> int:
        return self.faces.shape[0]

    @property
    def n_id(self) -> int:
        return self.basis_id.shape[1]

    @property
    def n_exp(self) -> int:
        return self.basis_exp.shape[1]

    @property
    def n_pose(self) -> int:
        return self.basis_pose.shape[1]

    @property
    def D(self) -> int:
        return self.n_id + self.n_exp + self.n_pose

    def combined_basis(self) -> np.ndarray:
        """(3V, D) concatenation [B_shape | B_exp | B_pose]."""
        return np.concatenate([self.basis_id, self.basis_exp, self.basis_pose], axis=1)

    def split_params(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Split a (..., D) parameter array into (beta, psi, theta) blocks."""
        a, b = self.n_id, self.n_id + self.n_exp
        return params[..., :a], params[..., a:b], params[..., b:]

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.template, self.faces, self.basis_id, self.basis_exp, self.basis_pose):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class FrameParams:
    beta: np.ndarray
    psi: np.ndarray
    theta: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.psi, self.theta])


def decode(model: BlendshapeModel, p: FrameParams) -> np.ndarray:
    """Decode one frame of parameters to a (V, 3) mesh."""
    if (
        p.beta.shape != (model.n_id,)
        or p.psi.shape != (model.n_exp,)
        or p.theta.shape != (model.n_pose,)
    ):
        raise ValueError("parameter blocks do not match model dimensions")
    offset = model.basis_id @ p.beta + model.basis_exp @ p.psi + model.basis_pose @ p.theta
    return model.template + offset.reshape(model.V, 3)


def decode_sequence(model: BlendshapeModel, params: np.ndarray) -> np.ndarray:
    """Decode a (T, D) parameter sequence to (T, V, 3) meshes."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 2 or params.shape[1] != model.D:
        raise ValueError(f"expected (T, {model.D}) parameters, got {params.shape}")
    offsets = params @ model.combined_basis().T  # (T, 3V)
    return model.template[None, :, :] + offsets.reshape(params.shape[0], model.V, 3)


def decode_sequence_t(model: BlendshapeModel, params: Tensor) -> Tensor:
    """Differentiable decode: (T, D) Tensor -> (T*V, 3) vertex Tensor."""
    t = params.shape[0]
    offsets = params @ as_tensor(model.combined_basis().T)
    flat = offsets.reshape(t * model.V, 3)
    return flat + as_tensor(np.tile(model.template, (t, 1)))


def vertex_normals(mesh: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals of a (V, 3) mesh, unit length.

    Vertices whose accumulated normal is shorter than 1e-12 fall back to
    (0, 0, 1) with a warning so downstream losses never abort.
    """
    faces = np.asarray(faces, dtype=np.int64)
    if faces.size == 0:
        raise ValueError("degenerate face list")
    tri = mesh[faces]  # (F, 3, 3)
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    acc = np.zeros_like(mesh)
    for corner in range(3):
        np.add.at(acc, faces[:, corner], fn)
    norms = np.linalg.norm(acc, axis=1)
    degenerate = norms < DEGENERATE_NORMAL_EPS
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} degenerate vertex normals; using (0,0,1)")
        acc[degenerate] = (0.0, 0.0, 1.0)
        norms[degenerate] = 1.0
    return acc / norms[:, None]


def sequence_normals(seq: np.ndarray, faces: np.ndarray) -> np.ndarray:
    return np.stack([vertex_normals(frame, faces) for frame in seq])


def _cross_cols(a: Tensor, b: Tensor) -> Tensor:
    ax, ay, az = (a.narrow(1, i, 1) for i in range(3))
    bx, by, bz = (b.narrow(1, i, 1) for i in range(3))
    return concat([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=1)


def sequence_normals_t(mesh_flat: Tensor, faces: np.ndarray, frames: int, v: int) -> Tensor:
    """Differentiable per-frame vertex normals for a (T*V, 3) vertex Tensor.

    Accumulated norms are clamped at 1e-12 before normalization; the fallback
    direction of the numpy path is not differentiable and not reproduced here.
    """
    faces = np.asarray(faces, dtype=np.int64)
    offsets = (np.arange(frames) * v)[:, None, None]
    fa = (faces[None, :, :] + offsets).reshape(-1, 3)
    p0 = take_rows(mesh_flat, fa[:, 0])
    p1 = take_rows(mesh_flat, fa[:, 1])
    p2 = take_rows(mesh_flat, fa[:, 2])
    fn = _cross_cols(p1 - p0, p2 - p0)
    acc = (
        scatter_rows(fn, fa[:, 0], frames * v)
        + scatter_rows(fn, fa[:, 1], frames * v)
        + scatter_rows(fn, fa[:, 2], frames * v)
    )
    sq = (acc * acc).sum(axis=1, keepdims=True)
    norm = sq.clip_min(DEGENERATE_NORMAL_EPS**2).sqrt()
    return acc / norm


# -- synthetic model ----------------------------------------------------------


def make_synthetic_model(config: SynthModelConfig) -> BlendshapeModel:
    """Planar-grid blendshape model with smooth seeded deformation bases.

    Template is an n x n grid in the z=0 plane (10 mm spacing); each basis
    column is a mixture of low-frequency sinusoids scaled so the largest
    per-coordinate offset at unit coefficient is amplitude-bounded.
    """
    config.validate()
    n = config.grid_n
    rng = np.random.default_rng(config.seed)

    cols, rows = np.meshgrid(np.arange(n), np.arange(n))
    x = (cols - (n - 1) / 2.0) * GRID_SPACING_MM
    y = ((n - 1) / 2.0 - rows) * GRID_SPACING_MM
    template = np.stack([x.ravel(), y.ravel(), np.zeros(n * n)], axis=1)

    faces = []
    for r in range(n - 1):
        for c in range(n - 1):
            v00 = r * n + c
            v01 = v00 + 1
            v10 = v00 + n
            v11 = v10 + 1
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    faces = np.asarray(faces, dtype=np.int64)

    def smooth_basis(n_cols: int, amplitude: float) -> np.ndarray:
        basis = np.zeros((3 * n * n, n_cols))
        for j in range(n_cols):
            for axis in range(3):
                field = np.zeros(n * n)
                for _ in range(3):
                    kx, ky = rng.uniform(0.02, 0.12, size=2)
                    phase = rng.uniform(0, 2 * np.pi)
                    weight = rng.uniform(0.3, 1.0)
                    field += weight * np.sin(kx * template[:, 0] + ky * template[:, 1] + phase)
                field *= amplitude / np.abs(field).max()
                basis[axis::3, j] = field
        return basis

    basis_id = smooth_basis(config.n_id, BASIS_AMPLITUDE_MM)
    basis_exp = smooth_basis(config.n_exp, BASIS_AMPLITUDE_MM)
    basis_pose = smooth_basis(config.n_pose, BASIS_AMPLITUDE_MM / 2.0)

    # Fixed geometric regions: lips at the bottom-center, upper face at the top.
    lip_rows = {n - 2, n - 1}
    lip_col_lo, lip_col_hi = n // 4, n - 1 - n // 4
    lips = [
        r * n + c
        for r in range(n)
        for c in range(n)
        if r in lip_rows and lip_col_lo <= c <= lip_col_hi
    ]
    upper_rows = max(1, n // 3)
    upper_face = [r * n + c for r in range(upper_rows) for c in range(n)]
    key_col = n // 2
    subsets = {
        "lips": np.asarray(lips, dtype=np.int64),
        "upper_face": np.asarray(upper_face, dtype=np.int64),
        "upper_lip_key": np.asarray([(n - 2) * n + key_col], dtype=np.int64),
        "lower_lip_key": np.asarray([(n - 1) * n + key_col], dtype=np.int64),
    }
    return BlendshapeModel(
        template=template,
        faces=faces,
        basis_id=basis_id,
        basis_exp=basis_exp,
        basis_pose=basis_pose,
        vertex_subsets=subsets,
    )


# -- binary model file ---------------------------------------------------------


def save_model(path, model: BlendshapeModel) -> None:
    """Write the EETM binary model file (little-endian, f32 arrays)."""
    parts = [MODEL_MAGIC, struct.pack("<H", MODEL_VERSION)]
    parts.append(
        struct.pack(
            "<IIIII", model.V, model.F, model.n_id, model.n_exp, model.n_pose
        )
    )
    parts.append(struct.pack("<H", len(model.vertex_subsets)))
    for name in sorted(model.vertex_subsets):
        idx = np.ascontiguousarray(model.vertex_subsets[name], dtype="<u4")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", idx.size))
        parts.append(idx.tobytes())
    for arr, dt in (
        (model.template, "<f4"),
        (model.faces, "<u4"),
        (model.basis_id, "<f4"),
        (model.basis_exp, "<f4"),
        (model.basis_pose, "<f4"),
    ):
        parts.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path) -> BlendshapeModel:
    buf = Path(path).read_bytes()
    if buf[:4] != MODEL_MAGIC:
        raise ValueError("not an EETM model file")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    off = 6
    v, f, n_id, n_exp, n_pose = struct.unpack_from("<IIIII", buf, off)
    off += 20
    (n_subsets,) = struct.unpack_from("<H", buf, off)
    off += 2
    subsets: dict[str, np.ndarray] = {}
    for _ in range(n_subsets):
        (nlen,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off : off + nlen].decode("utf-8")
        off += nlen
        (count,) = struct.unpack_from("<I", buf, off)
        off += 4
        subsets[name] = np.frombuffer(buf[off : off + 4 * count], dtype="<u4").astype(np.int64)
        off += 4 * count

    def read(shape, dt):
        nonlocal off
        nbytes = int(np.prod(shape)) * 4
        arr = np.frombuffer(buf[off : off + nbytes], dtype=dt).reshape(shape)
        off += nbytes
        return arr

    template = read((v, 3), "<f4").astype(np.float64)
    faces = read((f, 3), "<u4").astype(np.int64)
    basis_id = read((3 * v, n_id), "<f4").astype(np.float64)
    basis_exp = read((3 * v, n_exp), "<f4").astype(np.float64)
    basis_pose = read((3 * v, n_pose), "<f4").astype(np.float64)
    return BlendshapeModel(
        template=template,
        faces=faces,
        basis_id=basis_id,
        basis_exp=basis_exp,
        basis_pose=basis_pose,
        vertex_subsets=subsets,
    )


# -- animation export -----------------------------------------------------------


def vertices_to_f32_bytes(seq: np.ndarray) -> bytes:
    return np.ascontiguousarray(seq, dtype="<f4").tobytes()


def save_mesh_sequence(
    out_dir,
    seq: np.ndarray,
    faces: np.ndarray,
    fps: float,
    params: np.ndarray | None = None,
    extra: dict | None = None,
) -> dict:
    """Write the UI export: manifest JSON plus a raw f32 vertex buffer."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames, v, _ = seq.shape
    (out / "vertices.f32").write_bytes(vertices_to_f32_bytes(seq))
    manifest = {
        "frames": int(frames),
        "fps": float(fps),
        "faces": [[int(i) for i in face] for face in faces],
        "vertex_count": int(v),
        "vertices_file": "vertices.f32",
    }
    if params is not None:
        np.ascontiguousarray(params, dtype="<f4").tofile(out / "params.f32")
        manifest["params_file"] = "params.f32"
        manifest["param_dim"] = int(params.shape[1])
    if extra:
        manifest.update(extra)
    with open(out / "animation.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest
