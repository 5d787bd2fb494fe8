import json

import numpy as np
import pytest

import alens


def test_refine_two_classes_matches_closed_form():
    stack = np.stack([np.ones((2, 3)), np.zeros((2, 3))])
    weights = np.mean([1.0 / (1.0 + np.exp(-s)) for s in (1.0, 5.0, 100.0)])
    out = alens.refine(stack, [4, 9], 4)
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out, weights, rtol=1e-14)
    assert np.all(alens.refine(stack, [4, 9], 9) == 0.0)


def test_identical_maps_mask_to_zero_and_halve_without_mask():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(5, 5))
    stack = np.stack([base, base])
    assert np.all(alens.refine(stack, [0, 1], 0) == 0.0)
    assert np.array_equal(alens.refine(stack, [0, 1], 0, mask=False), base / 2)


def test_distribution_sums_to_one():
    rng = np.random.default_rng(1)
    stack = rng.normal(scale=4.0, size=(4, 6, 6))
    dist = alens.class_distribution(stack, [0, 1, 2, 3])
    np.testing.assert_allclose(dist.sum(axis=0), 1.0, atol=1e-12)


def test_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        alens.refine(np.zeros((1, 2, 2)), [0], 0)
    with pytest.raises(alens.AlensError):
        alens.refine(np.zeros((2, 2, 2)), [0, 1], 7)


def test_selection_and_metrics():
    assert alens.select_classes([0.1, 3.0, 2.0]) == [1, 2]
    assert alens.select_classes([0.1, 3.0, 2.0], "best_vs_worst") == [1, 0]
    region = np.zeros((4, 4), dtype=bool)
    region[:2, :2] = True
    attribution = np.where(region, 1.0, 0.0)
    report = alens.localization(attribution, region, blur=False)
    assert report["ra"] == pytest.approx(1.0)
    assert report["iou"] == pytest.approx(1.0)
    sim = alens.similarity(attribution, attribution)
    assert sim["spearman"] == pytest.approx(1.0)


def test_model_attribution_and_curves():
    model = alens.Model.random_mlp(8, 8, 1, hidden=6, classes=3, seed=2)
    image = np.random.default_rng(3).uniform(size=(8, 8))
    assert model.architecture == "mlp"
    assert sum(model.probabilities(image)) == pytest.approx(1.0)
    attribution = model.attribute(image, 1, method="integrated_gradients", steps=64)
    assert attribution.shape == (8, 8)
    assert 0.0 <= model.insertion_auc(image, attribution, 1, steps=16) <= 1.0
    assert 0.0 <= model.deletion_auc(image, attribution, 1, steps=16) <= 1.0


def test_cli_round_trip(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"samples": 2}}))
    code, out, err = alens.run_cli(["gen-data", "--config", str(cfg), "--out", str(tmp_path / "data")])
    assert code == 0, err
    model = alens.Model.load(str(tmp_path / "data" / "model"))
    assert model.num_classes == 8
    code, out, err = alens.run_cli(
        ["eval-loc", "--config", str(cfg), "--data", str(tmp_path / "data"), "--out", str(tmp_path / "loc")]
    )
    assert code == 0, err
    lines = (tmp_path / "loc" / "localization.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 4
    assert alens.run_cli(["bogus"])[0] == 2
