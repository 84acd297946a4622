import math

import numpy as np
import pytest

import harmokit as hk


@pytest.fixture(scope="module")
def phantom():
    return hk.generate_phantom(seed=1, size=32)


def test_phantom_shapes(phantom):
    assert set(phantom["images"]) == {"T1w", "T2w", "FLAIR"}
    t1 = phantom["images"]["T1w"]
    assert t1.shape == (32, 32, 32)
    assert t1.dtype == np.float32
    assert phantom["labels"].max() == 4
    assert set(np.unique(phantom["mask"])) == {0, 1}


def test_artifact_and_metrics(phantom):
    t1 = phantom["images"]["T1w"]
    noisy, sev = hk.apply_artifact(t1, "noise", 0.5, seed=3)
    assert sev == pytest.approx(0.5)
    assert math.isinf(hk.psnr(t1, t1))
    assert hk.psnr(noisy, t1) < 40.0
    assert hk.ssim(t1, t1) == pytest.approx(1.0, abs=1e-9)
    assert hk.psnr_from_mse(0.01, 1.0) == 20.0


def test_crop_and_fuse(phantom):
    t1, t2 = phantom["images"]["T1w"], phantom["images"]["T2w"]
    mask = phantom["mask"]
    cropped, cmask, region = hk.crop_fov(t1, mask, "anterior", 0.25)
    assert region.sum() > 0
    assert np.all(cropped[region.astype(bool)] == 0)
    fused = hk.fuse_volume([cropped, t2], [cmask, mask], [0.0, -1.0])
    assert fused.shape == t1.shape
    inside = region.astype(bool) & mask.astype(bool)
    assert np.allclose(fused[inside], t2[inside])
    legacy = hk.fuse_volume([cropped, t2], [cmask, mask], [0.0, -1.0], mode="legacy")
    assert np.all(legacy[inside] == 0)


def test_attention_contract():
    rng = np.random.default_rng(0)
    slices = [rng.random((5, 4), dtype=np.float32) for _ in range(3)]
    masks = [(rng.random((5, 4)) > 0.5).astype(np.uint8) for _ in range(3)]
    w = hk.attention(slices, masks, [0.1, -0.3, 0.7])
    assert w.shape == (5, 4, 3)
    assert np.allclose(w.sum(axis=2), 1.0, atol=1e-6)
    assert sum(hk.softmax([1.0, 2.0, 3.0])) == pytest.approx(1.0)


def test_scorer(phantom):
    t1 = phantom["images"]["T1w"]
    f = hk.extract_features(t1[:, :, 16], phantom["mask"][:, :, 16])
    assert len(f) == 4
    assert hk.score([0, 0, 0, 0], 0.0, f) == 0.5
    assert hk.triplet_loss([(0.3, 0.1, 0.8, 0.1)]) == pytest.approx(0.9)
    assert hk.dynamic_margin(1.0, 0.0) == pytest.approx(0.3)


def test_stats_and_segmentation_metrics():
    r = hk.wilcoxon_signed_rank([1.1, 2.3, 3.0, 4.2, 5.5], [0] * 5)
    assert r["p_value"] == 0.0625
    assert r["method"] == "exact"
    bh = hk.benjamini_hochberg([0.01, 0.02, 0.03, 0.04])
    assert bh["adjusted"] == pytest.approx([0.04] * 4, abs=1e-12)
    assert hk.bonferroni([0.01, 0.5])["reject"] == [True, False]
    assert hk.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    a = np.array([1, 1, 1, 1, 0, 0], dtype=np.uint8).reshape(6, 1, 1)
    b = np.array([0, 0, 1, 1, 1, 1], dtype=np.uint8).reshape(6, 1, 1)
    assert hk.dice(a, b, 1) == 0.5
    assert hk.region_volume(a, 1, (2, 2, 2)) == 32.0
    assert hk.coefficient_of_variation([1, 2, 3]) == 0.5


def test_nifti_round_trip(tmp_path):
    v = np.random.default_rng(1).normal(size=(4, 5, 6)).astype(np.float32)
    p = tmp_path / "v.nii"
    hk.save_nifti(v, str(p), (1.0, 2.0, 3.0))
    back, spacing = hk.load_nifti(str(p))
    assert np.array_equal(back, v)
    assert tuple(spacing) == (1.0, 2.0, 3.0)
    with pytest.raises(OSError):
        hk.load_nifti(str(tmp_path / "missing.nii"))


def test_run_experiment(tmp_path):
    summary = hk.run_experiment(
        {"kind": "cv-table", "phantom_count": 1, "phantom_size": 32, "scanner_count": 3},
        tmp_path / "cv",
    )
    assert summary["data"] == "synthetic"
    assert len(summary["regions"]) == 4
    assert (tmp_path / "cv" / "results.csv").exists()
    with pytest.raises(ValueError):
        hk.run_experiment({"bogus": 1})
