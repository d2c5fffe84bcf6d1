"""Smoke tests for the pybind11 surface; the C++ suites carry the real load."""

import numpy as np
import pytest

import pnen


def test_conv2d_identity_kernel():
    x = np.random.default_rng(1).random((1, 1, 5, 5))
    weights = np.ones((1, 1, 1, 1))
    bias = np.zeros(1)
    y = pnen.conv2d(x, weights, bias)
    np.testing.assert_allclose(y, x, rtol=0, atol=0)


def test_conv2d_block_mean():
    x = np.arange(16, dtype=float).reshape(1, 1, 4, 4) + 1
    weights = np.full((1, 1, 2, 2), 0.25)
    y = pnen.conv2d(x, weights, np.zeros(1), stride=2)
    np.testing.assert_allclose(y[0, 0], [[3.5, 5.5], [11.5, 13.5]])


def test_relu_and_softmax():
    z = np.array([[0.0, np.log(3.0)]])
    p = pnen.softmax_rows(z)
    np.testing.assert_allclose(p[0, 0, 0], [0.25, 0.75], atol=1e-12)
    np.testing.assert_array_equal(pnen.relu(np.array([[-1.0, 2.0]]))[0, 0, 0], [0.0, 2.0])


def test_filters_keep_constants():
    flat = np.full((1, 1, 16, 16), 0.5)
    for kind in ("gaussian", "median", "weighted_median"):
        out = pnen.apply_filter(flat, kind=kind, radius=1)
        np.testing.assert_allclose(out, flat, atol=1e-12)


def test_metrics_closed_forms():
    a = np.zeros((1, 1, 16, 16))
    b = np.full((1, 1, 16, 16), 0.1)
    assert pnen.psnr(a, b, peak=1.0) == pytest.approx(20.0)
    assert np.isinf(pnen.psnr(a, a))
    assert pnen.ssim(b, b) == 1.0


def test_pnb_zero_psi_is_identity():
    x = np.random.default_rng(2).random((1, 4, 8, 8))
    block = pnen.PnbBlock(d=4, m=3, n=2, scales=[1, 2], seed=3)
    np.testing.assert_array_equal(block.forward(x), x)


def test_pnb_attention_rows_are_probabilities():
    x = np.random.default_rng(3).random((1, 4, 8, 8))
    block = pnen.PnbBlock(d=4, m=3, n=2, scales=[1, 2], seed=4, random_psi=True)
    dumps = block.dump_attention(x, 3, 5)
    assert [d["stride"] for d in dumps] == [2, 4]
    for d in dumps:
        w = d["weights"]
        assert w.min() >= 0
        assert w.sum() == pytest.approx(1.0, abs=1e-6)


def test_cost_ratio_is_21_over_64():
    costs = pnen.count_costs(h=96, w=96)
    assert costs["pnb"]["attention_elems"] * 64 == costs["nlb"]["attention_elems"] * 21
    assert (
        costs["apnb"]["attention_flops"]
        < costs["pnb"]["attention_flops"]
        < costs["nlb"]["attention_flops"]
    )


def test_synth_textures_deterministic():
    a = pnen.synth_textures(count=1, seed=9)[0]
    b = pnen.synth_textures(count=1, seed=9)[0]
    np.testing.assert_array_equal(a, b)
    assert a.shape == (1, 1, 128, 128)


def test_model_keeps_shape_and_counts_depth():
    model = pnen.PnenModel.seeded(channels=1, d=8, m=6, n=4, scales=[1, 2], blocks=1, seed=5)
    x = np.random.default_rng(4).random((1, 1, 16, 16))
    y = model.infer(x)
    assert y.shape == (1, 1, 16, 16)
    full = pnen.PnenModel.seeded()
    assert full.conv_depth == 37


def test_checkpoint_roundtrip(tmp_path):
    model = pnen.PnenModel.seeded(channels=1, d=8, m=6, n=4, scales=[1], blocks=1, seed=6)
    base = str(tmp_path / "model")
    model.save(base)
    loaded = pnen.PnenModel.load(base)
    x = np.random.default_rng(5).random((1, 1, 12, 12))
    np.testing.assert_array_equal(model.infer(x), loaded.infer(x))


def test_train_smoke(tmp_path):
    config = "\n".join(
        [
            "channels=1",
            "d=8",
            "m=8",
            "n=4",
            "scales=1",
            "blocks=1",
            "patch_size=16",
            "batch_size=2",
            "epochs=1",
            "steps_per_epoch=3",
            "synth_count=4",
            "seed=11",
        ]
    )
    result = pnen.train(config, str(tmp_path / "run"))
    assert len(result["step_losses"]) == 3
    assert (tmp_path / "run" / "loss.csv").exists()


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        pnen.apply_filter(np.zeros((1, 1, 8, 8)), kind="box")
    with pytest.raises(ValueError):
        pnen.PnbBlock(d=4, scales=[2, 1])
