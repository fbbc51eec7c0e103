import math

import numpy as np
import pytest

import debulk


def single_pocket(peak=8.0, radius=40.0):
    spec = {"pockets": [{"center": [0.0, 0.0], "radii": [radius, radius], "peak": peak, "profile": "cosine"}]}
    return spec


def test_ridge_height_for_the_two_bar_section():
    mold = 2.0 * math.sqrt(9.3**2 - 3.2**2)
    assert debulk.ridge_height(18.6, mold, 0.3) == pytest.approx(0.697, abs=2e-3)


def test_generate_is_deterministic():
    a = debulk.generate(single_pocket(), seed=4)
    b = debulk.generate(single_pocket(), seed=4)
    assert a.points.shape == (301, 301, 3)
    assert np.array_equal(a.points, b.points)
    assert a.truth[0]["peak_mm"] == pytest.approx(8.0)


def test_predict_single_pocket():
    scene = debulk.generate(single_pocket(), seed=1)
    config = {"prep": {"denoise": False, "median_window": 0}, "workers": 1}
    pred = debulk.predict(scene.points, scene.valid, scene.reference, config)
    assert len(pred.reports) == 1
    report = pred.reports[0]
    assert report["verdict"] in ("cease", "crease")
    assert 0.25 <= report["rms_mm"] < 0.5
    field = pred.heightfields[0]
    values = field.values[field.valid.astype(bool)]
    assert math.sqrt(np.mean(values**2)) == pytest.approx(report["rms_mm"], rel=1e-9)
    assert pred.status in (0, 2)


def test_flat_scene_has_no_pockets():
    scene = debulk.generate({"pockets": []}, seed=1)
    pred = debulk.predict(scene.points, scene.valid, scene.reference, {"workers": 1})
    assert pred.reports == []
    assert pred.status == 0


def test_heightmap_round_trip(tmp_path):
    values = np.arange(12.0).reshape(3, 4) / 7.0
    valid = np.ones((3, 4), dtype=np.uint8)
    valid[1, 2] = 0
    hm = debulk.HeightMap([0.5, -1.0], [1.0, 2.0], values, valid)
    path = str(tmp_path / "a.hmap")
    debulk.write_heightmap(path, hm)
    back = debulk.read_heightmap(path)
    assert back == hm
    assert np.array_equal(back.values, values)


def test_config_defaults_and_rejection():
    cfg = debulk.default_config()
    assert cfg["threshold_mm"] == pytest.approx(0.3)
    scene = debulk.generate({"pockets": []}, seed=1)
    with pytest.raises(debulk.DebulkError):
        debulk.predict(scene.points, scene.valid, scene.reference, {"no_such_key": 1})


def test_wrinkle2d_keeps_length():
    chain = debulk.wrinkle2d(segments=60, steps=2)
    assert chain.converged
    assert chain.final_length_mm == pytest.approx(chain.rest_length_mm, rel=1e-6)
    assert chain.nodes.shape == (61, 2)
