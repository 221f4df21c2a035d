import numpy as np
import pytest

from wreathlin.pointcloud import (
    PointCloud,
    SegBlock,
    permute_points,
    shift_assignment,
    voxelize,
    within_voxel_permutation,
)
from wreathlin.train import (
    TrainingDivergedError,
    build_segnet,
    evaluate,
    gradient_check,
    init_attn_layer,
    init_set_layer,
    init_wreath_layer,
    loss_ce,
    make_seg_samples,
    net_backward,
    net_forward,
    run_seg_experiment,
    sgd_train,
    trace_csv,
)
from wreathlin.pointcloud import make_blob_scene


def toy_batch(seed=0, n=18, c=4, classes=3, res=3):
    rng = np.random.default_rng(seed)
    cloud = PointCloud(coords=rng.uniform(size=(n, 3)), features=rng.normal(size=(n, c)))
    vox = voxelize(cloud, res)
    labels = rng.integers(0, classes, size=n)
    return rng, vox, cloud.features, labels


def test_loss_ce_uniform_logits():
    _, _, _, labels = toy_batch()
    loss, grad = loss_ce(np.zeros((18, 3)), labels)
    assert abs(loss - np.log(3)) < 1e-12
    assert abs(grad.sum()) < 1e-12


def test_loss_ce_peaked_logits_vanish():
    labels = np.array([0, 1])
    logits = np.array([[50.0, 0.0, 0.0], [0.0, 50.0, 0.0]])
    loss, _ = loss_ce(logits, labels)
    assert loss < 1e-12


def test_loss_ce_rejects_bad_labels():
    with pytest.raises(ValueError):
        loss_ce(np.zeros((2, 3)), np.array([0, 3]))


def test_loss_ce_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(6, 4))
    labels = rng.integers(0, 4, size=6)
    _, grad = loss_ce(logits, labels)
    h = 1e-6
    for i in range(6):
        for k in range(4):
            bumped = logits.copy()
            bumped[i, k] += h
            plus, _ = loss_ce(bumped, labels)
            bumped[i, k] -= 2 * h
            minus, _ = loss_ce(bumped, labels)
            numeric = (plus - minus) / (2 * h)
            assert abs(grad[i, k] - numeric) / max(abs(numeric), 1e-8) < 1e-6


def test_zero_upstream_gradient_gives_zero_parameter_gradients():
    rng, vox, x, _ = toy_batch()
    blocks = [SegBlock(init_wreath_layer(4, 3, 3, rng), rectify=False)]
    _, caches = net_forward(blocks, vox, x)
    grads, d_x = net_backward(blocks, vox, caches, np.zeros((18, 3)))
    assert all(np.all(g == 0) for g in grads[0].values())
    assert np.all(d_x == 0)


@pytest.mark.parametrize("kind", ["wreath", "set", "attn"])
def test_single_layer_gradient_check(kind):
    rng, vox, x, labels = toy_batch(seed=7)
    layer = {
        "wreath": lambda: init_wreath_layer(4, 3, 3, rng),
        "set": lambda: init_set_layer(4, 3, rng),
        "attn": lambda: init_attn_layer(4, 3, 4, rng),
    }[kind]()
    report = gradient_check([SegBlock(layer, rectify=False)], vox, x, labels, threshold=1e-5)
    assert report.passed, report.lines()


def test_full_stack_gradient_check_with_attention():
    rng = np.random.default_rng(2)
    cloud = PointCloud(coords=rng.uniform(size=(24, 3)), features=rng.normal(size=(24, 4)))
    vox = voxelize(cloud, 3)
    labels = rng.integers(0, 3, size=24)
    blocks = build_segnet(4, 3, 2, 5, 3, rng, attention_latents=3)
    report = gradient_check(blocks, vox, cloud.features, labels, threshold=1e-4)
    assert report.passed, report.lines()


def test_sgd_reduces_loss_and_is_deterministic():
    rng = np.random.default_rng(3)
    samples = []
    for _ in range(3):
        cloud = PointCloud(coords=rng.uniform(size=(18, 3)), features=rng.normal(size=(18, 4)))
        samples.append((voxelize(cloud, 3), cloud.features, rng.integers(0, 3, size=18)))
    net = [SegBlock(init_wreath_layer(4, 5, 3, rng), rectify=True),
           SegBlock(init_wreath_layer(5, 3, 3, rng), rectify=False)]
    _, trace_a = sgd_train(net, samples, epochs=4, lr=0.05, seed=9)
    _, trace_b = sgd_train(net, samples, epochs=4, lr=0.05, seed=9)
    assert trace_a == trace_b  # bitwise-identical floats
    assert trace_a[-1][1] < trace_a[0][1]
    assert [row[0] for row in trace_a] == [0, 1, 2, 3, 4]


def test_zero_learning_rate_changes_nothing():
    rng = np.random.default_rng(4)
    cloud = PointCloud(coords=rng.uniform(size=(12, 3)), features=rng.normal(size=(12, 4)))
    samples = [(voxelize(cloud, 2), cloud.features, rng.integers(0, 2, size=12))]
    net = [SegBlock(init_wreath_layer(4, 2, 1, rng), rectify=False)]
    trained, trace = sgd_train(net, samples, epochs=3, lr=0.0, seed=0)
    assert all(row[1] == trace[0][1] for row in trace)
    assert np.array_equal(trained[0].layer.w_point, net[0].layer.w_point)


def test_divergence_raises():
    # two blocks so a huge step makes the forward pass overflow to non-finite
    rng = np.random.default_rng(5)
    cloud = PointCloud(coords=rng.uniform(size=(12, 3)), features=rng.normal(size=(12, 4)))
    samples = [(voxelize(cloud, 2), cloud.features, rng.integers(0, 2, size=12))]
    net = [SegBlock(init_wreath_layer(4, 4, 1, rng), rectify=True),
           SegBlock(init_wreath_layer(4, 2, 1, rng), rectify=False)]
    with pytest.raises(TrainingDivergedError):
        with np.errstate(all="ignore"):
            sgd_train(net, samples, epochs=5, lr=1e200, seed=0)


def test_training_preserves_hierarchy_equivariance():
    rng = np.random.default_rng(6)
    cloud = PointCloud(coords=rng.uniform(size=(20, 3)), features=rng.normal(size=(20, 4)))
    vox = voxelize(cloud, 3)
    samples = [(vox, cloud.features, rng.integers(0, 3, size=20))]
    net = [SegBlock(init_wreath_layer(4, 4, 3, rng), rectify=True),
           SegBlock(init_wreath_layer(4, 3, 3, rng), rectify=False)]
    trained, _ = sgd_train(net, samples, epochs=5, lr=0.1, seed=1)
    y = net_forward(trained, vox, cloud.features)[0]
    y_shift = net_forward(trained, shift_assignment(vox, (1, 2, 0)), cloud.features)[0]
    assert np.allclose(y, y_shift, atol=1e-10 * max(1.0, np.abs(y).max()))
    order = within_voxel_permutation(vox, rng)
    y_perm = net_forward(trained, permute_points(vox, order), cloud.features[order])[0]
    assert np.allclose(y[order], y_perm, atol=1e-10 * max(1.0, np.abs(y).max()))


def test_trace_csv_format():
    text = trace_csv([(0, 1.5, 0.25), (1, 0.75, 0.5)])
    lines = text.splitlines()
    assert lines[0] == "epoch,loss,accuracy"
    assert lines[1] == "0,1.5,0.25"
    assert lines[2] == "1,0.75,0.5"


def test_evaluate_counts_correct_points():
    rng, vox, x, labels = toy_batch(seed=8)
    blocks = [SegBlock(init_wreath_layer(4, 3, 3, rng), rectify=False)]
    loss, acc = evaluate(blocks, [(vox, x, labels)])
    assert 0.0 <= acc <= 1.0
    assert np.isfinite(loss)


def test_seg_experiment_paired_runs_share_data():
    rng = np.random.default_rng(42)
    centers = make_blob_scene(4, 4, rng)
    _, acc_a, trace_a = run_seg_experiment(centers, seed=0, set_only=False, epochs=2)
    _, acc_b, _ = run_seg_experiment(centers, seed=0, set_only=True, epochs=2)
    assert trace_a[0][0] == 0 and len(trace_a) == 3
    assert 0.0 <= acc_a <= 1.0 and 0.0 <= acc_b <= 1.0


def test_seg_samples_have_six_feature_channels():
    rng = np.random.default_rng(43)
    centers = make_blob_scene(3, 4, rng)
    samples = make_seg_samples(centers, 2, 5, 0.2, 0.25, 4, rng)
    for vox, x, labels in samples:
        assert x.shape == (15, 6)
        assert labels.shape == (15,)
        assert vox.n_points == 15
