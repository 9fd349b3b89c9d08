"""Finite samples of subsets of R^d with optional analytic tangent cones."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .geometry import MAX_DIM, UnsupportedDimension

DEDUPE_TOL = 1e-12


class MissingTangentData(ValueError):
    pass


@dataclass(eq=False)
class SampledSet:
    """Point sample of a set A with an optional per-point tangent-cone oracle."""

    dim: int
    points: np.ndarray
    tangent_cones: list | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise UnsupportedDimension(f"dimension {self.dim} not supported")
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.dim)
        if len(pts) == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        cones = self.tangent_cones
        if cones is not None:
            if len(cones) != len(pts):
                raise ValueError("one tangent cone per point required")
            for c in cones:
                if c.dim != self.dim:
                    raise ValueError("cone dimension mismatch")
        if len(pts) > 1:
            pairs = cKDTree(pts).query_pairs(DEDUPE_TOL, output_type="ndarray")
            if len(pairs):
                drop = np.zeros(len(pts), dtype=bool)
                drop[np.max(pairs, axis=1)] = True
                keep = ~drop
                pts = pts[keep]
                if cones is not None:
                    cones = [c for c, k in zip(cones, keep) if k]
        self.points = pts
        self.tangent_cones = cones

    @property
    def n(self):
        return len(self.points)

    @property
    def has_cones(self):
        return self.tangent_cones is not None

    def require_cones(self):
        if self.tangent_cones is None:
            raise MissingTangentData(
                "tangent cones required; attach an oracle or call with_estimated_cones")
        return self.tangent_cones

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    @cached_property
    def diameter(self):
        p = self.points
        if len(p) > 8 and self.dim > 1:
            try:
                p = p[ConvexHull(p).vertices]
            except QhullError:
                pass
        best = 0.0
        for start in range(0, len(p), 512):
            diff = p[start:start + 512, None, :] - p[None, :, :]
            best = max(best, float((diff ** 2).sum(-1).max()))
        return float(np.sqrt(best))

    @cached_property
    def nn_dist(self):
        if self.n == 1:
            return np.array([np.inf])
        d, _ = self.tree.query(self.points, k=2)
        return d[:, 1]

    @cached_property
    def spacing(self):
        """Largest nearest-neighbour distance (sample pitch)."""
        return float(self.nn_dist.max()) if self.n > 1 else 0.0

    def index_of(self, a, tol=1e-9):
        """Index of the sample point at ``a`` (or ``a`` itself if it is an int)."""
        if isinstance(a, (int, np.integer)):
            return int(a)
        d, i = self.tree.query(np.asarray(a, dtype=float))
        if d > tol * max(1.0, self.diameter):
            raise ValueError(f"point {a} is not in the sample (distance {d:.3g})")
        return int(i)

    def cone(self, i):
        return self.require_cones()[i]

    def subset(self, idx, label=None, meta=None):
        idx = np.asarray(idx, dtype=int)
        cones = None if self.tangent_cones is None else [self.tangent_cones[i] for i in idx]
        return SampledSet(self.dim, self.points[idx], cones, label or self.label,
                          dict(meta if meta is not None else self.meta))

    def transformed(self, rot=None, shift=None, scale=1.0):
        """Image under x -> scale * rot x + shift; cones follow the linear part."""
        rot = np.eye(self.dim) if rot is None else np.asarray(rot, dtype=float)
        shift = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        pts = scale * self.points @ rot.T + shift
        cones = None
        if self.tangent_cones is not None:
            cache = {}
            cones = []
            for c in self.tangent_cones:
                if id(c) not in cache:
                    cache[id(c)] = c.transformed(rot)
                cones.append(cache[id(c)])
        return SampledSet(self.dim, pts, cones, self.label, dict(self.meta))

    def with_cones(self, cones, label=None):
        return SampledSet(self.dim, self.points, list(cones), label or self.label, dict(self.meta))

    def with_estimated_cones(self, scales=None):
        from .reach import estimate_tangent_cone

        cones = [estimate_tangent_cone(self, i, scales) for i in range(self.n)]
        return self.with_cones(cones)


def concat(sets, label=""):
    """Union of samples; all or none must carry tangent cones."""
    dim = sets[0].dim
    pts = np.vstack([s.points for s in sets])
    if all(s.has_cones for s in sets):
        cones = [c for s in sets for c in s.tangent_cones]
    elif not any(s.has_cones for s in sets):
        cones = None
    else:
        raise ValueError("mixed tangent data")
    return SampledSet(dim, pts, cones, label)

