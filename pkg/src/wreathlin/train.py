"""Hand-written reverse-mode gradients, finite-difference checking, and a
small SGD loop for the point-cloud block stacks.

The adjoints mirror the forward structure: the adjoint of a per-voxel mean
pool is a broadcast divided by the voxel count, the adjoint of a broadcast is
a per-voxel sum, and the adjoint of a circular convolution is a circular
correlation with the flipped kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .pointcloud import (
    AttnPCLayer,
    PCLayer,
    SegBlock,
    SetPCLayer,
    VoxelizedCloud,
    WreathPCLayer,
    block_forward,
    mean_pool,
    sample_blob_cloud,
    voxelize,
    with_relative_coords,
)


class TrainingDivergedError(RuntimeError):
    """The loss became non-finite during training."""


def loss_ce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits.

    Uniform logits over ``K`` classes give ``log(K)``.  The gradient is
    ``(softmax - onehot) / n``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(n), labels]))
    soft = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    soft[np.arange(n), labels] -= 1.0
    return loss, soft / n


def _conv3d_backward(
    kernel: np.ndarray, grid: np.ndarray, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``conv3d_periodic`` w.r.t. kernel and grid."""
    K = kernel.shape[0]
    c = K // 2
    d_kernel = np.zeros_like(kernel)
    d_grid = np.zeros_like(grid)
    for a in range(K):
        for b in range(K):
            for d in range(K):
                shift = (c - a, c - b, c - d)
                shifted = np.roll(grid, shift, axis=(0, 1, 2))
                d_kernel[a, b, d] = np.einsum("xyzc,xyzd->cd", shifted, d_out)
                back = (-shift[0], -shift[1], -shift[2])
                d_grid += np.roll(d_out, back, axis=(0, 1, 2)) @ kernel[a, b, d].T
    return d_kernel, d_grid


def _wreath_backward(
    layer: WreathPCLayer, vox: VoxelizedCloud, cache: dict, d_y: np.ndarray
) -> tuple[dict, np.ndarray]:
    x, grid = cache["x"], cache["grid"]
    D = vox.resolution
    d_w_point = x.T @ d_y
    d_x = d_y @ layer.w_point.T
    d_conv = np.zeros((vox.n_voxels, layer.c_out))
    np.add.at(d_conv, vox.assignment, d_y)
    d_w_conv, d_grid = _conv3d_backward(layer.w_conv, grid, d_conv.reshape(D, D, D, layer.c_out))
    d_pooled = d_grid.reshape(vox.n_voxels, layer.c_in)
    counts = np.maximum(vox.occupancy, 1)[:, None]
    d_x += (d_pooled / counts)[vox.assignment]
    return {"w_point": d_w_point, "w_conv": d_w_conv}, d_x


def _set_backward(
    layer: SetPCLayer, vox: VoxelizedCloud, cache: dict, d_y: np.ndarray
) -> tuple[dict, np.ndarray]:
    x, mean = cache["x"], cache["mean"]
    d_w_point = x.T @ d_y
    d_x = d_y @ layer.w_point.T
    d_mean_out = d_y.sum(axis=0)
    d_w_pool = np.outer(mean, d_mean_out)
    d_x += (layer.w_pool @ d_mean_out)[None, :] / x.shape[0]
    return {"w_point": d_w_point, "w_pool": d_w_pool}, d_x


def _attn_backward(
    layer: AttnPCLayer, vox: VoxelizedCloud, cache: dict, d_y: np.ndarray
) -> tuple[dict, np.ndarray]:
    x, soft, pooled, mixed = cache["x"], cache["soft"], cache["pooled"], cache["mixed"]
    d_soft = np.einsum("nd,lcd->nl", d_y, mixed)
    # channel axis of mixed is summed out in the forward, so its adjoint
    # broadcasts the (latent, out) gradient across channels
    d_mixed = np.broadcast_to((soft.T @ d_y)[:, None, :], mixed.shape)
    d_w_interact = np.einsum("lcd,kc->lkcd", d_mixed, pooled)
    d_pooled = np.einsum("lkcd,lcd->kc", layer.w_interact, d_mixed)
    d_soft += x @ d_pooled.T
    d_x = soft @ d_pooled
    d_z = soft * (d_soft - (d_soft * soft).sum(axis=1, keepdims=True))
    d_w_assign = x.T @ d_z
    d_x += d_z @ layer.w_assign.T
    return {"w_assign": d_w_assign, "w_interact": d_w_interact}, d_x


def layer_backward(
    layer: PCLayer, vox: VoxelizedCloud, cache: dict, d_y: np.ndarray
) -> tuple[dict, np.ndarray]:
    if isinstance(layer, WreathPCLayer):
        return _wreath_backward(layer, vox, cache, d_y)
    if isinstance(layer, SetPCLayer):
        return _set_backward(layer, vox, cache, d_y)
    if isinstance(layer, AttnPCLayer):
        return _attn_backward(layer, vox, cache, d_y)
    raise TypeError(f"not a point-cloud layer: {layer!r}")


def net_forward(
    blocks: tuple[SegBlock, ...] | list[SegBlock], vox: VoxelizedCloud, x: np.ndarray
) -> tuple[np.ndarray, list[dict]]:
    h = np.asarray(x, dtype=np.float64)
    caches = []
    for block in blocks:
        cache_x = h
        h, cache = block_forward(block, vox, h)
        cache["block_in"] = cache_x
        caches.append(cache)
    return h, caches


def net_backward(
    blocks: tuple[SegBlock, ...] | list[SegBlock],
    vox: VoxelizedCloud,
    caches: list[dict],
    d_logits: np.ndarray,
) -> tuple[list[dict], np.ndarray]:
    """Per-block parameter gradients (last to first reversed back to order)."""
    grads: list[dict] = [None] * len(blocks)  # type: ignore[list-item]
    d_h = d_logits
    for i in range(len(blocks) - 1, -1, -1):
        block, cache = blocks[i], caches[i]
        if block.rectify:
            d_h = d_h * (cache["pre_act"] > 0)
        layer_grads, d_x = layer_backward(block.layer, vox, cache, d_h)
        if block.has_skip:
            d_x = d_x + d_h
        grads[i] = layer_grads
        d_h = d_x
    return grads, d_h


@dataclass(frozen=True)
class GradReport:
    """Worst relative disagreement of analytic vs central differences."""

    entries: tuple[tuple[str, float], ...]
    threshold: float

    @property
    def max_error(self) -> float:
        return max(err for _, err in self.entries)

    @property
    def passed(self) -> bool:
        return self.max_error < self.threshold

    def lines(self) -> list[str]:
        out = [f"{name}: max rel err {err:.3e}" for name, err in self.entries]
        out.append(f"overall: {'pass' if self.passed else 'FAIL'} (threshold {self.threshold:g})")
        return out


def _block_params(block: SegBlock) -> dict[str, np.ndarray]:
    layer = block.layer
    if isinstance(layer, WreathPCLayer):
        return {"w_point": layer.w_point, "w_conv": layer.w_conv}
    if isinstance(layer, SetPCLayer):
        return {"w_point": layer.w_point, "w_pool": layer.w_pool}
    if isinstance(layer, AttnPCLayer):
        return {"w_assign": layer.w_assign, "w_interact": layer.w_interact}
    raise TypeError(f"not a point-cloud layer: {layer!r}")


def _with_param(block: SegBlock, name: str, value: np.ndarray) -> SegBlock:
    return replace(block, layer=replace(block.layer, **{name: value}))


def gradient_check(
    blocks: tuple[SegBlock, ...] | list[SegBlock],
    vox: VoxelizedCloud,
    x: np.ndarray,
    labels: np.ndarray,
    step: float = 1e-5,
    threshold: float = 1e-4,
) -> GradReport:
    """Compare analytic gradients against central finite differences.

    Every entry of every parameter tensor is perturbed by ``+-step``; the
    relative error uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    blocks = list(blocks)
    logits, caches = net_forward(blocks, vox, x)
    _, d_logits = loss_ce(logits, labels)
    grads, _ = net_backward(blocks, vox, caches, d_logits)

    def loss_at(mod_blocks: list[SegBlock]) -> float:
        out, _ = net_forward(mod_blocks, vox, x)
        return loss_ce(out, labels)[0]

    entries = []
    for i, block in enumerate(blocks):
        for name, value in _block_params(block).items():
            analytic = grads[i][name]
            worst = 0.0
            flat = value.ravel()
            for j in range(flat.size):
                bumped = value.copy().ravel()
                bumped[j] += step
                plus = loss_at(blocks[:i] + [_with_param(block, name, bumped.reshape(value.shape))] + blocks[i + 1:])
                bumped[j] -= 2 * step
                minus = loss_at(blocks[:i] + [_with_param(block, name, bumped.reshape(value.shape))] + blocks[i + 1:])
                numeric = (plus - minus) / (2 * step)
                a = analytic.ravel()[j]
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, err)
            entries.append((f"block{i}.{name}", worst))
    return GradReport(tuple(entries), threshold)


def evaluate(
    blocks: tuple[SegBlock, ...] | list[SegBlock],
    samples: list[tuple[VoxelizedCloud, np.ndarray, np.ndarray]],
) -> tuple[float, float]:
    """Mean loss and mean per-point accuracy over ``(vox, x, labels)`` samples."""
    losses = []
    correct = 0
    total = 0
    for vox, x, labels in samples:
        logits, _ = net_forward(blocks, vox, x)
        loss, _ = loss_ce(logits, labels)
        losses.append(loss)
        correct += int((logits.argmax(axis=1) == labels).sum())
        total += len(labels)
    return float(np.mean(losses)), correct / total


def sgd_train(
    blocks: tuple[SegBlock, ...] | list[SegBlock],
    samples: list[tuple[VoxelizedCloud, np.ndarray, np.ndarray]],
    epochs: int,
    lr: float,
    seed: int = 0,
) -> tuple[list[SegBlock], list[tuple[int, float, float]]]:
    """Plain SGD, one step per sample, samples shuffled each epoch by ``seed``.

    Returns the trained blocks and a trace of ``(epoch, loss, accuracy)``
    rows, where row 0 is the state before any update.  Raises
    :class:`TrainingDivergedError` if the loss stops being finite.
    """
    blocks = list(blocks)
    rng = np.random.default_rng(seed)
    trace = []

    def record(epoch: int) -> None:
        loss, acc = evaluate(blocks, samples)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss {loss} at epoch {epoch}")
        trace.append((epoch, loss, acc))

    record(0)
    for epoch in range(1, epochs + 1):
        for idx in rng.permutation(len(samples)):
            vox, x, labels = samples[idx]
            logits, caches = net_forward(blocks, vox, x)
            _, d_logits = loss_ce(logits, labels)
            grads, _ = net_backward(blocks, vox, caches, d_logits)
            for i, block in enumerate(blocks):
                for name, value in _block_params(block).items():
                    blocks[i] = _with_param(blocks[i], name, value - lr * grads[i][name])
        record(epoch)
    return blocks, trace


def trace_csv(trace: list[tuple[int, float, float]]) -> str:
    lines = ["epoch,loss,accuracy"]
    lines.extend(f"{e},{loss!r},{acc!r}" for e, loss, acc in trace)
    return "\n".join(lines) + "\n"


def init_wreath_layer(c_in: int, c_out: int, k: int, rng: np.random.Generator) -> WreathPCLayer:
    s = 1.0 / np.sqrt(c_in)
    return WreathPCLayer(
        w_point=rng.uniform(-s, s, size=(c_in, c_out)),
        w_conv=rng.uniform(-s, s, size=(k, k, k, c_in, c_out)),
    )


def init_set_layer(c_in: int, c_out: int, rng: np.random.Generator) -> SetPCLayer:
    s = 1.0 / np.sqrt(c_in)
    return SetPCLayer(
        w_point=rng.uniform(-s, s, size=(c_in, c_out)),
        w_pool=rng.uniform(-s, s, size=(c_in, c_out)),
    )


def init_attn_layer(c_in: int, c_out: int, n_latent: int, rng: np.random.Generator) -> AttnPCLayer:
    s = 1.0 / np.sqrt(c_in)
    t = 1.0 / np.sqrt(c_in * n_latent)
    return AttnPCLayer(
        w_assign=rng.uniform(-s, s, size=(c_in, n_latent)),
        w_interact=rng.uniform(-t, t, size=(n_latent, n_latent, c_in, c_out)),
    )


def make_seg_samples(
    centers: np.ndarray,
    n_samples: int,
    points_per_blob: int,
    noise: float,
    feature_noise: float,
    resolution: int,
    rng: np.random.Generator,
) -> list[tuple[VoxelizedCloud, np.ndarray, np.ndarray]]:
    """Segmentation samples from a fixed blob scene, fresh noise per draw.

    Features are a corrupted copy of each point's position (Gaussian noise of
    scale ``feature_noise``) plus the clean within-voxel offsets, 6 channels
    total; labels are blob indices.  Voxel assignment uses the clean
    positions, so per-voxel pooling can average the corruption away while any
    purely per-point map cannot.
    """
    samples = []
    for _ in range(n_samples):
        cloud = sample_blob_cloud(centers, points_per_blob, noise, resolution, rng)
        vox = voxelize(cloud, resolution)
        noisy = cloud.coords + feature_noise * rng.normal(size=cloud.coords.shape)
        samples.append((vox, np.hstack([noisy, vox.rel_coords]), cloud.labels))
    return samples


def run_seg_experiment(
    centers: np.ndarray,
    seed: int,
    set_only: bool,
    n_train: int = 6,
    n_test: int = 3,
    points_per_blob: int = 12,
    noise: float = 0.2,
    feature_noise: float = 0.25,
    resolution: int = 4,
    n_blocks: int = 2,
    hidden: int = 8,
    kernel: int = 3,
    epochs: int = 40,
    lr: float = 0.2,
) -> tuple[float, float, list[tuple[int, float, float]]]:
    """Train one model on the blob task; returns (train acc, held-out acc, trace).

    The data rng and the init rng both derive from ``seed`` so paired runs of
    the voxel model and its global-pool ablation see identical samples.
    """
    data_rng = np.random.default_rng(seed * 1000 + 1)
    train = make_seg_samples(
        centers, n_train, points_per_blob, noise, feature_noise, resolution, data_rng
    )
    test = make_seg_samples(
        centers, n_test, points_per_blob, noise, feature_noise, resolution, data_rng
    )
    init_rng = np.random.default_rng(seed * 1000 + 2)
    blocks = build_segnet(6, len(centers), n_blocks, hidden, kernel, init_rng, set_only=set_only)
    trained, trace = sgd_train(blocks, train, epochs=epochs, lr=lr, seed=seed)
    _, test_acc = evaluate(trained, test)
    return trace[-1][2], test_acc, trace


def build_segnet(
    c_in: int,
    n_classes: int,
    n_blocks: int,
    hidden: int,
    kernel: int,
    rng: np.random.Generator,
    attention_latents: int = 0,
    set_only: bool = False,
) -> list[SegBlock]:
    """A block stack ending in a non-rectified map to ``n_classes`` channels.

    With ``set_only`` the voxel convolution blocks are replaced by global
    mean-pool blocks of the same widths.  ``attention_latents > 0`` inserts a
    soft-assignment block before the final one.
    """
    if n_blocks < 1:
        raise ValueError("need at least one block")
    widths = [c_in] + [hidden] * (n_blocks - 1) + [n_classes]
    blocks: list[SegBlock] = []
    for i in range(n_blocks):
        a, b = widths[i], widths[i + 1]
        if attention_latents > 0 and i == n_blocks - 1:
            blocks.append(SegBlock(init_attn_layer(a, a, attention_latents, rng), rectify=True))
        layer = init_set_layer(a, b, rng) if set_only else init_wreath_layer(a, b, kernel, rng)
        blocks.append(SegBlock(layer, rectify=i < n_blocks - 1))
    return blocks
