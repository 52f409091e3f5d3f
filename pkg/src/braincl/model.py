"""Graph-transformer encoder over connectome rows with a soft clustering
readout onto orthonormalized centers, plus the classification and
contrastive projection heads.

Node j enters the encoder as row j of the connectivity matrix, is embedded
once, then flows through post-norm attention/feed-forward blocks. The
readout orthonormalizes a learnable center matrix every forward pass (so
the centers stay trainable yet orthonormal, with gradients flowing through
the orthonormalization), softly assigns node embeddings to centers, and
projects each pooled cluster embedding to a fixed per-cluster width. The
flattened readout is what both heads consume.

Node relabeling: the embedding weight's input axis is the only
node-indexed parameter, so permuting a connectome's rows and columns
together with that axis permutes the encoder output rows the same way (see
``relabel_nodes``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Connectome
from .numcore import Tensor, concat, stack

__all__ = ["EncoderConfig", "RankDeficiencyError", "init_encoder_params",
           "init_classifier_params", "init_projection_params", "as_tensors",
           "gram_schmidt", "encoder_forward", "readout", "features",
           "classify", "project", "cross_entropy", "relabel_nodes",
           "parameter_counts"]

LEAKY_SLOPE = 0.01


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    n_nodes: int
    layers: int = 2
    heads: int = 4
    d_model: int | None = None  # defaults to n_nodes
    ffn_dim: int | None = None  # defaults to 2 * d_model
    n_clusters: int = 100
    cluster_dim: int = 8
    proj_dim: int = 128

    def __post_init__(self):
        if self.n_nodes < 1 or self.layers < 1 or self.heads < 1 or self.n_clusters < 1:
            raise ValueError("counts must be positive")
        if self.width % self.heads != 0:
            raise ValueError(f"d_model {self.width} not divisible by heads {self.heads}")
        if self.n_clusters > self.width:
            raise ValueError("n_clusters cannot exceed d_model: centers could "
                             "never be orthonormal")

    @property
    def width(self) -> int:
        return self.d_model if self.d_model is not None else self.n_nodes

    @property
    def ffn_width(self) -> int:
        return self.ffn_dim if self.ffn_dim is not None else 2 * self.width

    @property
    def feature_dim(self) -> int:
        return self.n_clusters * self.cluster_dim


# ---------------------------------------------------------------------------
# parameter initialization


def _affine(rng: np.random.Generator, fan_in: int, fan_out: int):
    bound = 1.0 / math.sqrt(fan_in)
    w = rng.uniform(-bound, bound, (fan_in, fan_out))
    b = rng.uniform(-bound, bound, fan_out)
    return w, b


def _orthonormal_rows(rng: np.random.Generator, n_rows: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n_rows, dim))
    for i in range(n_rows):
        for j in range(i):
            rows[i] -= (rows[i] @ rows[j]) * rows[j]
        rows[i] /= np.linalg.norm(rows[i])
    return rows


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    d = cfg.width
    params: dict[str, np.ndarray] = {}
    params["embed.w"], params["embed.b"] = _affine(rng, cfg.n_nodes, d)
    for i in range(cfg.layers):
        pre = f"layer{i}"
        for w_name, b_name in (("wq", "qb"), ("wk", "kb"), ("wv", "vb"), ("wo", "ob")):
            params[f"{pre}.attn.{w_name}"], params[f"{pre}.attn.{b_name}"] = _affine(rng, d, d)
        params[f"{pre}.norm1.gain"] = np.ones(d)
        params[f"{pre}.norm1.bias"] = np.zeros(d)
        params[f"{pre}.ffn.w1"], params[f"{pre}.ffn.b1"] = _affine(rng, d, cfg.ffn_width)
        params[f"{pre}.ffn.w2"], params[f"{pre}.ffn.b2"] = _affine(rng, cfg.ffn_width, d)
        params[f"{pre}.norm2.gain"] = np.ones(d)
        params[f"{pre}.norm2.bias"] = np.zeros(d)
    params["readout.centers"] = _orthonormal_rows(rng, cfg.n_clusters, d)
    params["readout.w_out"], _ = _affine(rng, d, cfg.cluster_dim)
    return params


def init_classifier_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    params["classifier.w1"], params["classifier.b1"] = _affine(rng, cfg.feature_dim, 256)
    params["classifier.w2"], params["classifier.b2"] = _affine(rng, 256, 32)
    params["classifier.w3"], params["classifier.b3"] = _affine(rng, 32, 2)
    return params


def init_projection_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    params["project.w1"], params["project.b1"] = _affine(rng, cfg.feature_dim, cfg.proj_dim)
    params["project.w2"], params["project.b2"] = _affine(rng, cfg.proj_dim, cfg.proj_dim)
    return params


def as_tensors(arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {name: Tensor(arr) for name, arr in arrays.items()}


# ---------------------------------------------------------------------------
# forward paths


def gram_schmidt(centers: Tensor) -> Tensor:
    """Orthonormalize rows (modified Gram-Schmidt), differentiably.

    Raises RankDeficiencyError naming the first row whose residual norm
    drops below 1e-8 during the sweep.
    """
    if centers.ndim != 2:
        raise ValueError(f"expected a matrix of rows, got shape {centers.shape}")
    n_rows = centers.shape[0]
    rows: list[Tensor] = []
    for i in range(n_rows):
        v = centers[i]
        for q in rows:
            v = v - (v * q).sum() * q
        norm_sq = (v * v).sum()
        if math.sqrt(norm_sq.item()) < 1e-8:
            raise RankDeficiencyError(
                f"row {i} is linearly dependent on the rows before it "
                f"(residual norm {math.sqrt(norm_sq.item()):.3e})")
        rows.append(v / norm_sq.sqrt())
    return stack(rows)


def _as_input(conn) -> Tensor:
    if isinstance(conn, Tensor):
        return conn
    if isinstance(conn, Connectome):
        return Tensor(conn.matrix, requires_grad=False)
    return Tensor(conn, requires_grad=False)


def encoder_forward(conn, params: dict[str, Tensor], cfg: EncoderConfig) -> Tensor:
    """Node embeddings, one row per node."""
    x = _as_input(conn)
    if x.shape != (cfg.n_nodes, cfg.n_nodes):
        raise ValueError(f"input shape {x.shape} does not match V={cfg.n_nodes}")
    d = cfg.width
    head_dim = d // cfg.heads
    scale = 1.0 / math.sqrt(head_dim)

    z = x @ params["embed.w"] + params["embed.b"]
    for i in range(cfg.layers):
        pre = f"layer{i}"
        q = z @ params[f"{pre}.attn.wq"] + params[f"{pre}.attn.qb"]
        k = z @ params[f"{pre}.attn.wk"] + params[f"{pre}.attn.kb"]
        v = z @ params[f"{pre}.attn.wv"] + params[f"{pre}.attn.vb"]
        heads = []
        for h in range(cfg.heads):
            sl = slice(h * head_dim, (h + 1) * head_dim)
            scores = (q[:, sl] @ k[:, sl].T) * scale
            heads.append(scores.softmax(axis=-1) @ v[:, sl])
        attn = concat(heads, axis=1) @ params[f"{pre}.attn.wo"] + params[f"{pre}.attn.ob"]
        z = (z + attn).layer_norm() * params[f"{pre}.norm1.gain"] + params[f"{pre}.norm1.bias"]
        hidden = (z @ params[f"{pre}.ffn.w1"] + params[f"{pre}.ffn.b1"]).leaky_relu(LEAKY_SLOPE)
        ffn = hidden @ params[f"{pre}.ffn.w2"] + params[f"{pre}.ffn.b2"]
        z = (z + ffn).layer_norm() * params[f"{pre}.norm2.gain"] + params[f"{pre}.norm2.bias"]
    return z


def readout(z: Tensor, params: dict[str, Tensor], cfg: EncoderConfig,
            centers: Tensor | None = None) -> Tensor:
    """Soft-assign node embeddings to orthonormal centers and pool.

    ``centers`` may be passed in when the caller has already orthonormalized
    them (one Gram-Schmidt sweep can be shared across a whole batch).
    Returns an (n_clusters, cluster_dim) feature matrix.
    """
    if z.ndim != 2 or z.shape[1] != cfg.width:
        raise ValueError(f"embeddings shape {z.shape} does not match d_model={cfg.width}")
    if centers is None:
        centers = gram_schmidt(params["readout.centers"])
    assignments = (z @ centers.T).softmax(axis=-1)  # rows sum to 1
    pooled = assignments.T @ z
    return pooled @ params["readout.w_out"]


def features(conn, params: dict[str, Tensor], cfg: EncoderConfig,
             centers: Tensor | None = None) -> Tensor:
    """Flattened readout of length n_clusters * cluster_dim."""
    z = encoder_forward(conn, params, cfg)
    return readout(z, params, cfg, centers=centers).flatten()


def classify(feats: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Two-way logits from the flattened readout."""
    h = (feats @ params["classifier.w1"] + params["classifier.b1"]).leaky_relu(LEAKY_SLOPE)
    h = (h @ params["classifier.w2"] + params["classifier.b2"]).leaky_relu(LEAKY_SLOPE)
    return h @ params["classifier.w3"] + params["classifier.b3"]


def project(feats: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Unit-norm contrastive embedding; cosine of two outputs is their dot."""
    h = (feats @ params["project.w1"] + params["project.b1"]).leaky_relu(LEAKY_SLOPE)
    raw = h @ params["project.w2"] + params["project.b2"]
    norm_sq = (raw * raw).sum()
    if norm_sq.item() < 1e-30:
        raise ValueError("projection collapsed to the zero vector; cannot normalize")
    return raw / norm_sq.sqrt()


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    return -logits.log_softmax()[label]


# ---------------------------------------------------------------------------
# utilities


def relabel_nodes(arrays: dict[str, np.ndarray], perm: np.ndarray) -> dict[str, np.ndarray]:
    """Apply a node permutation to every node-indexed parameter axis.

    Only the embedding's input axis is node-indexed; everything downstream
    operates on abstract embedding coordinates. Relabeling the data as
    C[perm][:, perm] together with this map permutes encoder output rows by
    ``perm``.
    """
    out = dict(arrays)
    out["embed.w"] = arrays["embed.w"][perm]
    return out


def parameter_counts(arrays: dict[str, np.ndarray]) -> dict[str, int]:
    """Value counts grouped by top-level component name."""
    counts: dict[str, int] = {}
    for name, arr in arrays.items():
        group = name.split(".")[0]
        counts[group] = counts.get(group, 0) + int(np.asarray(arr).size)
    return counts
