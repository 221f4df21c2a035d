"""Training the toy segmentation stack, and why the voxel path earns its keep.

Scene: a handful of Gaussian blobs snapped to a voxel grid; every point is
labelled by its blob.  Features are the point's own coordinates plus noise,
and its offset inside the voxel.  The voxel model can average the noise away
inside each cell before mixing neighbourhoods; a global-pool model sees one
summary of the whole cloud and has to classify each point from its corrupted
private features.  Same data, same budget, same init scheme.
"""

import numpy as np

from wreathlin.pointcloud import make_blob_scene
from wreathlin.train import run_seg_experiment

centers = make_blob_scene(6, 4, np.random.default_rng(42))
print("6 blobs on a 4x4x4 grid, 12 points each, feature noise 0.25\n")

print("single run, voxel model (seed 0):")
train_acc, test_acc, trace = run_seg_experiment(centers, seed=0, set_only=False)
for epoch, loss, acc in trace[:: max(1, len(trace) // 6)]:
    print(f"  epoch {epoch:3d}  loss {loss:7.4f}  train acc {acc:.3f}")
print(f"  final: train acc {train_acc:.3f}, held-out acc {test_acc:.3f}\n")

print(f"{'seed':>4s} {'voxel':>7s} {'global-pool':>12s}")
wins = 0
for seed in range(3):
    _, acc_w, _ = run_seg_experiment(centers, seed, set_only=False)
    _, acc_s, _ = run_seg_experiment(centers, seed, set_only=True)
    wins += acc_w > acc_s
    print(f"{seed:4d} {acc_w:7.3f} {acc_s:12.3f}")
print(f"\nvoxel model ahead on {wins}/3 seeds")
print("the gap is the per-voxel averaging: noise shrinks inside a cell, "
      "a global mean cannot tell blobs apart")
