"""Connectome view generation: node dilation/shrinkage plus background noise.

A view is built in three steps, all driven by one explicit random generator
(the seed policy: callers own the rng, every function is pure given it):

1. pick k nodes, k uniform in [k_min, k_max];
2. for each picked node, grow or shrink the absolute correlation of every
   incident edge by a per-edge random increment, preserving sign — shrinking
   a whole row toward zero mimics node deletion, growing it node addition;
3. perturb the edges *between unpicked nodes* with background noise so the
   encoder cannot key on untouched entries.

Edges whose endpoints are both picked are modified once, by the
lower-indexed endpoint's direction, so the result does not depend on
iteration order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .data import Connectome

__all__ = ["NoiseSpec", "AugmentConfig", "ViewPair",
           "select_nodes", "dilate_shrink", "background_noise", "make_view_pair"]


@dataclass(frozen=True)
class NoiseSpec:
    """Background-noise distribution: gaussian(sigma), uniform(low, high), or none."""

    kind: str = "gaussian"
    sigma: float = 0.01
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "none"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma < 0:
            raise ValueError("gaussian sigma must be non-negative")
        if self.kind == "uniform" and self.low > self.high:
            raise ValueError("uniform noise needs low <= high")

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Accepts 'none', 'N(0,0.01)' (second value is sigma), 'uniform(-0.1,0.1)'."""
        s = text.strip().lower().replace(" ", "")
        if s in ("none", "off", ""):
            return cls(kind="none")
        m = re.fullmatch(r"n\(([^,]+),([^)]+)\)", s)
        if m:
            mean, sigma = float(m.group(1)), float(m.group(2))
            if mean != 0.0:
                raise ValueError("only zero-mean gaussian noise is supported")
            return cls(kind="gaussian", sigma=sigma)
        m = re.fullmatch(r"uniform\(([^,]+),([^)]+)\)", s)
        if m:
            return cls(kind="uniform", low=float(m.group(1)), high=float(m.group(2)))
        raise ValueError(f"cannot parse noise spec {text!r}")

    def __str__(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "gaussian":
            return f"N(0,{self.sigma:g})"
        return f"uniform({self.low:g},{self.high:g})"

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.sigma, count)
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, count)
        return np.zeros(count)


@dataclass(frozen=True)
class AugmentConfig:
    k_min: int = 5
    k_max: int = 20
    delta_max: float = 0.5
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if not 0 <= self.k_min <= self.k_max:
            raise ValueError(f"need 0 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        if not 0.0 < self.delta_max <= 1.0:
            raise ValueError("delta_max must lie in (0, 1]")


@dataclass(frozen=True)
class ViewPair:
    first: Connectome
    second: Connectome
    source_id: str = ""


def select_nodes(n_nodes: int, cfg: AugmentConfig, rng: np.random.Generator) -> frozenset[int]:
    """k distinct node indices, k uniform in [k_min, k_max]."""
    if cfg.k_max > n_nodes:
        raise ValueError(f"k_max={cfg.k_max} exceeds node count {n_nodes}")
    k = int(rng.integers(cfg.k_min, cfg.k_max + 1))
    if k == 0:
        return frozenset()
    return frozenset(int(i) for i in rng.choice(n_nodes, size=k, replace=False))


def dilate_shrink(conn: Connectome, nodes: frozenset[int], cfg: AugmentConfig,
                  rng: np.random.Generator) -> Connectome:
    """Grow or shrink |C| on every edge incident to a selected node.

    Each selected node is independently assigned dilate or shrink with
    probability 1/2; each affected edge gets its own increment drawn from
    Uniform(0, delta_max). Signs never flip: a shrink bottoms out at zero
    and zero entries stay zero under dilation.
    """
    n = conn.n_nodes
    if nodes and (min(nodes) < 0 or max(nodes) >= n):
        raise ValueError(f"selected nodes out of range for V={n}")
    if not nodes:
        return Connectome(conn.matrix)

    # +1 dilate, -1 shrink, drawn in sorted node order for determinism
    direction = {node: (1.0 if rng.random() < 0.5 else -1.0) for node in sorted(nodes)}

    selected = np.zeros(n, dtype=bool)
    selected[list(nodes)] = True
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    touched = upper & (selected[:, None] | selected[None, :])
    rows, cols = np.nonzero(touched)  # row-major order fixes the draw sequence

    deltas = rng.uniform(0.0, cfg.delta_max, rows.size)
    owner_dir = np.array([direction[int(u)] if selected[u] else direction[int(v)]
                          for u, v in zip(rows, cols)])

    m = conn.matrix.copy()
    vals = m[rows, cols]
    new_abs = np.clip(np.abs(vals) + owner_dir * deltas, 0.0, 1.0)
    new_vals = np.sign(vals) * new_abs
    m[rows, cols] = new_vals
    m[cols, rows] = new_vals
    return Connectome(m)


def background_noise(conn: Connectome, selected: frozenset[int], cfg: AugmentConfig,
                     rng: np.random.Generator) -> Connectome:
    """Perturb edges whose endpoints are both unselected; leave the rest alone."""
    if cfg.noise.kind == "none":
        return Connectome(conn.matrix)
    n = conn.n_nodes
    mask = np.ones(n, dtype=bool)
    if selected:
        mask[list(selected)] = False
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    eligible = upper & mask[:, None] & mask[None, :]
    rows, cols = np.nonzero(eligible)

    eps = cfg.noise.draw(rng, rows.size)
    m = conn.matrix.copy()
    new_vals = np.clip(m[rows, cols] + eps, -1.0, 1.0)
    m[rows, cols] = new_vals
    m[cols, rows] = new_vals
    return Connectome(m)


def augment_once(conn: Connectome, cfg: AugmentConfig,
                 rng: np.random.Generator) -> Connectome:
    nodes = select_nodes(conn.n_nodes, cfg, rng)
    return background_noise(dilate_shrink(conn, nodes, cfg, rng), nodes, cfg, rng)


def make_view_pair(conn: Connectome, cfg: AugmentConfig, rng: np.random.Generator,
                   source_id: str = "") -> ViewPair:
    """Two independently augmented views of one connectome."""
    return ViewPair(first=augment_once(conn, cfg, rng),
                    second=augment_once(conn, cfg, rng),
                    source_id=source_id)
