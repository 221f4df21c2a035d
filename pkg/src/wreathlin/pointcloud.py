"""Point clouds voxelized into a periodic grid, and layers respecting the
two-level symmetry of that arrangement: points within a voxel are
interchangeable, and the voxel grid may be shifted cyclically along each axis.

The basic layer maps point features ``X`` to

    ``X @ w_point + gather(conv(w_conv, mean_pool(X)))``

where ``mean_pool`` averages the points of each voxel (empty voxels are zero),
``conv`` is a circular 3-D convolution over the ``D x D x D`` grid, and
``gather`` hands each point the value of its voxel.  An attention variant
replaces the hard voxel assignment with a learned soft one and is equivariant
to arbitrary reorderings of the points.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .perm import InvalidDegreeError


class KernelError(ValueError):
    """The convolution kernel does not fit the grid (or has even width)."""


def _frozen_array(obj, name: str, value, dtype=np.float64) -> None:
    arr = np.ascontiguousarray(value, dtype=dtype)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


@dataclass(frozen=True)
class PointCloud:
    """Points in 3-space with per-point feature channels and optional labels."""

    coords: np.ndarray  # (n, 3)
    features: np.ndarray  # (n, c)
    labels: np.ndarray | None = None  # (n,) ints

    def __post_init__(self) -> None:
        _frozen_array(self, "coords", self.coords)
        _frozen_array(self, "features", self.features)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValueError(f"coords must be (n, 3), got {self.coords.shape}")
        if self.features.ndim != 2 or self.features.shape[0] != self.coords.shape[0]:
            raise ValueError("features must be (n, c) with one row per point")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coords must be finite")
        if self.labels is not None:
            _frozen_array(self, "labels", self.labels, dtype=np.int64)
            if self.labels.shape != (self.coords.shape[0],):
                raise ValueError("labels must be (n,)")

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class VoxelizedCloud:
    """Hard assignment of points to a ``D**3`` voxel grid.

    ``assignment[i]`` is the flat voxel index ``ix * D**2 + iy * D + iz``;
    ``rel_coords`` are positions relative to the assigned voxel center, in
    voxel units, each component in ``[-0.5, 0.5]``.
    """

    resolution: int
    assignment: np.ndarray  # (n,)
    rel_coords: np.ndarray  # (n, 3)
    occupancy: np.ndarray  # (D**3,)

    def __post_init__(self) -> None:
        if self.resolution < 1:
            raise InvalidDegreeError("resolution must be at least 1")
        _frozen_array(self, "assignment", self.assignment, dtype=np.int64)
        _frozen_array(self, "rel_coords", self.rel_coords)
        _frozen_array(self, "occupancy", self.occupancy, dtype=np.int64)

    @property
    def n_points(self) -> int:
        return self.assignment.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.resolution ** 3


def voxelize(cloud: PointCloud, resolution: int) -> VoxelizedCloud:
    """Scale the cloud's bounding box to ``[0, D)**3`` and bin the points.

    A degenerate extent along an axis is treated as one unit wide, with the
    points sitting at the center of the first cell on that axis (so identical
    points get zero offsets).  Points on the upper boundary land in the last
    voxel.
    """
    if resolution < 1:
        raise InvalidDegreeError("resolution must be at least 1")
    coords = cloud.coords
    lo = coords.min(axis=0)
    extent = coords.max(axis=0) - lo
    degenerate = extent == 0
    scaled = (coords - lo) / np.where(degenerate, 1.0, extent) * resolution
    scaled[:, degenerate] = 0.5
    idx = np.minimum(np.floor(scaled).astype(np.int64), resolution - 1)
    rel = scaled - (idx + 0.5)
    D = resolution
    flat = idx[:, 0] * D * D + idx[:, 1] * D + idx[:, 2]
    occupancy = np.bincount(flat, minlength=D ** 3)
    return VoxelizedCloud(resolution=D, assignment=flat, rel_coords=rel, occupancy=occupancy)


def mean_pool(vox: VoxelizedCloud, x: np.ndarray) -> np.ndarray:
    """Per-voxel mean of point values; empty voxels pool to zero."""
    x = np.asarray(x, dtype=np.float64)
    acc = np.zeros((vox.n_voxels, x.shape[1]))
    np.add.at(acc, vox.assignment, x)
    counts = np.maximum(vox.occupancy, 1)[:, None]
    return acc / counts


def gather_to_points(vox: VoxelizedCloud, per_voxel: np.ndarray) -> np.ndarray:
    """Hand every point the value of its voxel."""
    return np.asarray(per_voxel)[vox.assignment]


def conv3d_periodic(kernel: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Circular 3-D convolution of a ``(D, D, D, c)`` grid.

    ``kernel`` has shape ``(K, K, K, c_in, c_out)`` with ``K`` odd and
    ``K <= D``; all three axes wrap around.  A delta kernel (identity mixing
    at the center tap, zero elsewhere) is the identity map.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if kernel.ndim != 5 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] != kernel.shape[2]:
        raise KernelError(f"kernel must be (K, K, K, c_in, c_out), got {kernel.shape}")
    K = kernel.shape[0]
    D = grid.shape[0]
    if K % 2 == 0:
        raise KernelError(f"kernel width must be odd, got {K}")
    if K > D:
        raise KernelError(f"kernel width {K} exceeds grid resolution {D}")
    c = K // 2
    out = np.zeros(grid.shape[:3] + (kernel.shape[4],))
    for a in range(K):
        for b in range(K):
            for d in range(K):
                shifted = np.roll(grid, (c - a, c - b, c - d), axis=(0, 1, 2))
                out += shifted @ kernel[a, b, d]
    return out


@dataclass(frozen=True)
class WreathPCLayer:
    """Pointwise map plus a voxel-pooled circular convolution broadcast back."""

    w_point: np.ndarray  # (c_in, c_out)
    w_conv: np.ndarray  # (K, K, K, c_in, c_out)

    def __post_init__(self) -> None:
        _frozen_array(self, "w_point", self.w_point)
        _frozen_array(self, "w_conv", self.w_conv)
        if self.w_point.ndim != 2:
            raise ValueError("w_point must be (c_in, c_out)")
        if self.w_conv.ndim != 5 or self.w_conv.shape[3:] != self.w_point.shape:
            raise ValueError("w_conv must be (K, K, K, c_in, c_out) matching w_point")

    @property
    def c_in(self) -> int:
        return self.w_point.shape[0]

    @property
    def c_out(self) -> int:
        return self.w_point.shape[1]


@dataclass(frozen=True)
class SetPCLayer:
    """Pointwise map plus a global mean broadcast: ignores all structure."""

    w_point: np.ndarray  # (c_in, c_out)
    w_pool: np.ndarray  # (c_in, c_out)

    def __post_init__(self) -> None:
        _frozen_array(self, "w_point", self.w_point)
        _frozen_array(self, "w_pool", self.w_pool)
        if self.w_point.shape != self.w_pool.shape or self.w_point.ndim != 2:
            raise ValueError("w_point and w_pool must both be (c_in, c_out)")

    @property
    def c_in(self) -> int:
        return self.w_point.shape[0]

    @property
    def c_out(self) -> int:
        return self.w_point.shape[1]


@dataclass(frozen=True)
class AttnPCLayer:
    """Soft-assignment pooling: rows attend to learned latent groups."""

    w_assign: np.ndarray  # (c_in, L)
    w_interact: np.ndarray  # (L, L, c_in, c_out)

    def __post_init__(self) -> None:
        _frozen_array(self, "w_assign", self.w_assign)
        _frozen_array(self, "w_interact", self.w_interact)
        if self.w_assign.ndim != 2 or self.w_interact.ndim != 4:
            raise ValueError("w_assign must be (c_in, L), w_interact (L, L, c_in, c_out)")
        L = self.w_assign.shape[1]
        if self.w_interact.shape[:2] != (L, L) or self.w_interact.shape[2] != self.w_assign.shape[0]:
            raise ValueError("w_interact shape inconsistent with w_assign")

    @property
    def c_in(self) -> int:
        return self.w_assign.shape[0]

    @property
    def c_out(self) -> int:
        return self.w_interact.shape[3]

    @property
    def n_latent(self) -> int:
        return self.w_assign.shape[1]


PCLayer = WreathPCLayer | SetPCLayer | AttnPCLayer


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _wreath_forward(layer: WreathPCLayer, vox: VoxelizedCloud, x: np.ndarray) -> tuple[np.ndarray, dict]:
    D = vox.resolution
    pooled = mean_pool(vox, x)
    grid = pooled.reshape(D, D, D, layer.c_in)
    conv = conv3d_periodic(layer.w_conv, grid)
    y = x @ layer.w_point + gather_to_points(vox, conv.reshape(vox.n_voxels, layer.c_out))
    return y, {"x": x, "grid": grid}


def _set_forward(layer: SetPCLayer, vox: VoxelizedCloud, x: np.ndarray) -> tuple[np.ndarray, dict]:
    mean = x.mean(axis=0)
    y = x @ layer.w_point + mean @ layer.w_pool
    return y, {"x": x, "mean": mean}


def _attn_forward(layer: AttnPCLayer, vox: VoxelizedCloud, x: np.ndarray) -> tuple[np.ndarray, dict]:
    soft = _softmax_rows(x @ layer.w_assign)  # (n, L)
    pooled = soft.T @ x  # (L, c_in)
    mixed = np.einsum("lkcd,kc->lcd", layer.w_interact, pooled)  # (L, c_in, c_out)
    y = np.einsum("nl,lcd->nd", soft, mixed)
    return y, {"x": x, "soft": soft, "pooled": pooled, "mixed": mixed}


def pc_layer_forward(layer: PCLayer, vox: VoxelizedCloud, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Apply one point-cloud layer, returning intermediates for training."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (vox.n_points, layer.c_in):
        raise ValueError(f"input shape {x.shape} != ({vox.n_points}, {layer.c_in})")
    if isinstance(layer, WreathPCLayer):
        return _wreath_forward(layer, vox, x)
    if isinstance(layer, SetPCLayer):
        return _set_forward(layer, vox, x)
    if isinstance(layer, AttnPCLayer):
        return _attn_forward(layer, vox, x)
    raise TypeError(f"not a point-cloud layer: {layer!r}")


def pc_layer_apply(layer: PCLayer, vox: VoxelizedCloud, x: np.ndarray) -> np.ndarray:
    return pc_layer_forward(layer, vox, x)[0]


def attn_layer_apply(layer: AttnPCLayer, x: np.ndarray) -> np.ndarray:
    """Attention layer on bare features; needs no voxel assignment."""
    x = np.asarray(x, dtype=np.float64)
    return _attn_forward(layer, None, x)[0]


@dataclass(frozen=True)
class SegBlock:
    """One network block: a layer, an identity skip when shapes allow, and an
    optional rectifier (omitted on the final block)."""

    layer: PCLayer
    rectify: bool

    @property
    def has_skip(self) -> bool:
        return self.layer.c_in == self.layer.c_out


def block_forward(block: SegBlock, vox: VoxelizedCloud, x: np.ndarray) -> tuple[np.ndarray, dict]:
    y, cache = pc_layer_forward(block.layer, vox, x)
    if block.has_skip:
        y = y + x
    cache["pre_act"] = y
    if block.rectify:
        y = np.maximum(y, 0.0)
    return y, cache


def segnet_forward(blocks: list[SegBlock] | tuple[SegBlock, ...], vox: VoxelizedCloud, x: np.ndarray) -> np.ndarray:
    """Run the block stack; the last block's output are the per-point logits."""
    h = np.asarray(x, dtype=np.float64)
    for block in blocks:
        h, _ = block_forward(block, vox, h)
    return h


def shift_assignment(vox: VoxelizedCloud, shifts: tuple[int, int, int]) -> VoxelizedCloud:
    """Relabel voxels by a cyclic shift per axis; points do not move."""
    D = vox.resolution
    ix, rest = np.divmod(vox.assignment, D * D)
    iy, iz = np.divmod(rest, D)
    ix = (ix + shifts[0]) % D
    iy = (iy + shifts[1]) % D
    iz = (iz + shifts[2]) % D
    flat = ix * D * D + iy * D + iz
    occupancy = np.bincount(flat, minlength=D ** 3)
    return VoxelizedCloud(D, flat, vox.rel_coords, occupancy)


def permute_points(vox: VoxelizedCloud, order: np.ndarray) -> VoxelizedCloud:
    """Reorder the point rows of the voxelization by ``order``."""
    order = np.asarray(order)
    return VoxelizedCloud(vox.resolution, vox.assignment[order], vox.rel_coords[order], vox.occupancy)


def within_voxel_permutation(vox: VoxelizedCloud, rng: np.random.Generator) -> np.ndarray:
    """A random reordering of point rows that keeps each point in its voxel."""
    order = np.arange(vox.n_points)
    for v in np.unique(vox.assignment):
        members = np.flatnonzero(vox.assignment == v)
        order[members] = rng.permutation(members)
    return order


def make_blob_scene(n_blobs: int, resolution: int, rng: np.random.Generator) -> np.ndarray:
    """Centers of ``n_blobs`` distinct voxels of a ``D**3`` grid, in [0, 1)^3."""
    if n_blobs > resolution ** 3:
        raise ValueError("more blobs than voxels")
    chosen = rng.choice(resolution ** 3, size=n_blobs, replace=False)
    ix, rest = np.divmod(chosen, resolution * resolution)
    iy, iz = np.divmod(rest, resolution)
    return (np.stack([ix, iy, iz], axis=1) + 0.5) / resolution


def sample_blob_cloud(
    centers: np.ndarray,
    points_per_blob: int,
    noise: float,
    resolution: int,
    rng: np.random.Generator,
) -> PointCloud:
    """Gaussian blob around each center; labels are blob indices.

    ``noise`` is the standard deviation in voxel units.  Features are the
    noisy coordinates themselves.
    """
    sigma = noise / resolution
    coords = []
    labels = []
    for b, center in enumerate(centers):
        pts = center + sigma * rng.standard_normal((points_per_blob, 3))
        coords.append(pts)
        labels.extend([b] * points_per_blob)
    coords = np.clip(np.concatenate(coords), 0.0, 1.0)
    return PointCloud(coords=coords, features=coords.copy(), labels=np.asarray(labels))


def with_relative_coords(cloud: PointCloud, vox: VoxelizedCloud) -> np.ndarray:
    """Feature matrix: the cloud's channels plus per-voxel relative coords."""
    return np.hstack([cloud.features, vox.rel_coords])


def write_cloud_text(cloud: PointCloud) -> str:
    """One point per line: ``x y z f1 .. fC [label]``, after a header line
    ``#cols n_features has_label``."""
    has_label = int(cloud.labels is not None)
    out = io.StringIO()
    out.write(f"#cols {cloud.n_features} {has_label}\n")
    for i in range(cloud.n_points):
        parts = [repr(float(v)) for v in cloud.coords[i]]
        parts.extend(repr(float(v)) for v in cloud.features[i])
        if has_label:
            parts.append(str(int(cloud.labels[i])))
        out.write(" ".join(parts) + "\n")
    return out.getvalue()


def read_cloud_text(text: str) -> PointCloud:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#cols"):
        raise ValueError("missing '#cols n_features has_label' header")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"malformed header: {lines[0]!r}")
    n_features, has_label = int(head[1]), int(head[2])
    coords, features, labels = [], [], []
    expected = 3 + n_features + (1 if has_label else 0)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != expected:
            raise ValueError(f"expected {expected} columns, got {len(parts)}: {ln!r}")
        coords.append([float(v) for v in parts[:3]])
        features.append([float(v) for v in parts[3:3 + n_features]])
        if has_label:
            labels.append(int(parts[-1]))
    return PointCloud(
        coords=np.asarray(coords, dtype=np.float64).reshape(len(coords), 3),
        features=np.asarray(features, dtype=np.float64).reshape(len(coords), n_features),
        labels=np.asarray(labels) if has_label else None,
    )


def format_predictions(labels: np.ndarray) -> str:
    """One predicted class id per line."""
    return "\n".join(str(int(v)) for v in labels) + "\n"
