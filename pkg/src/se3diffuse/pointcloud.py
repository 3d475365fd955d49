"""Point-cloud container and the geometry the diffusion pipeline needs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lie import Pose, apply

__all__ = ["PointCloud", "transform", "voxel_downsample", "radius_count", "bounding_box"]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Positions (N, 3) with optional colors (N, 3) in [0, 1]."""

    positions: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3).copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3).copy()
            if col.shape[0] != pos.shape[0]:
                raise ValueError("colors must match the number of points")
            col.setflags(write=False)
            object.__setattr__(self, "colors", col)

    def __len__(self) -> int:
        return self.positions.shape[0]


def transform(pc: PointCloud, g: Pose) -> PointCloud:
    """Rigidly move every point; colors are untouched."""
    if len(pc) == 0:
        return PointCloud(pc.positions.copy(), None if pc.colors is None else pc.colors.copy())
    return PointCloud(apply(g, pc.positions), pc.colors)


def voxel_downsample(pc: PointCloud, voxel: float) -> PointCloud:
    """One centroid per occupied voxel; voxel index is floor(p / voxel).

    Output is ordered by ascending voxel index tuple, which keeps seeded
    downstream consumers reproducible.
    """
    if voxel <= 0.0:
        raise ValueError("voxel edge length must be positive")
    if len(pc) == 0:
        return pc
    idx = np.floor(pc.positions / voxel).astype(np.int64)
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
    sidx = idx[order]
    boundaries = np.nonzero(np.any(np.diff(sidx, axis=0) != 0, axis=1))[0] + 1
    groups = np.split(order, boundaries)
    positions = np.array([pc.positions[g].mean(axis=0) for g in groups])
    colors = None
    if pc.colors is not None:
        colors = np.array([pc.colors[g].mean(axis=0) for g in groups])
    return PointCloud(positions, colors)


def _dist2(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = points - x
    return d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2


def radius_count(x: np.ndarray, pc: PointCloud, r: float, method: str = "grid") -> int:
    """Number of cloud points with ||p - x|| <= r (inclusive boundary).

    ``method`` selects the brute-force reference or the grid-accelerated
    path; both evaluate the identical comparison and agree exactly.
    """
    if r <= 0.0:
        raise ValueError("radius must be positive")
    if len(pc) == 0:
        return 0
    x = np.asarray(x, dtype=np.float64).reshape(3)
    if method == "brute":
        return int(np.sum(_dist2(pc.positions, x) <= r * r))
    if method != "grid":
        raise ValueError("method must be 'grid' or 'brute'")
    cells = _grid_index(pc, r)
    cx, cy, cz = np.floor(x / r).astype(np.int64)
    total = 0
    for ix in (cx - 1, cx, cx + 1):
        for iy in (cy - 1, cy, cy + 1):
            for iz in (cz - 1, cz, cz + 1):
                idx = cells.get((ix, iy, iz))
                if idx is not None:
                    total += int(np.sum(_dist2(pc.positions[idx], x) <= r * r))
    return total


def _grid_index(pc: PointCloud, r: float) -> dict:
    # cached on the instance so the cache lifetime matches the cloud
    caches = getattr(pc, "_grid_cache", None)
    if caches is None:
        caches = {}
        object.__setattr__(pc, "_grid_cache", caches)
    cached = caches.get(r)
    if cached is not None:
        return cached
    cells: dict = {}
    idx = np.floor(pc.positions / r).astype(np.int64)
    for i, cell in enumerate(map(tuple, idx)):
        cells.setdefault(cell, []).append(i)
    cells = {k: np.asarray(v, dtype=np.intp) for k, v in cells.items()}
    caches[r] = cells
    return cells


def bounding_box(pc: PointCloud) -> tuple[np.ndarray, np.ndarray]:
    if len(pc) == 0:
        raise ValueError("empty point cloud has no bounding box")
    return pc.positions.min(axis=0), pc.positions.max(axis=0)
