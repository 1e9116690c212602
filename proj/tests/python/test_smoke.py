import math

import pytest

import tactwin


def test_geometry_and_encoding():
    assert tactwin.angle_error(1.0, 179.0) == 2.0
    square = tactwin.OrientedBox(0.0, 0.0, 2.0, 2.0)
    assert tactwin.rotated_iou(square, square) == pytest.approx(1.0)
    assert tactwin.box_loss(square, tactwin.OrientedBox(20.0, 0.0, 2.0, 2.0)) == 1.0
    label = tactwin.csl_encode(30.0)
    assert len(label) == 180
    assert label[30] == 1.0
    assert tactwin.csl_decode(label) == 30.0
    with pytest.raises(tactwin.ConfigError):
        tactwin.csl_encode(30.0, window_radius=0.0)


def test_hertz_and_simulation():
    depth, radius = tactwin.hertz_indentation(3.0, 5.0)
    assert radius == pytest.approx(math.sqrt(5.0 * depth))
    image, truths = tactwin.simulate({"type": "sphere", "diameter": 10.0}, 3.0)
    assert image.shape == (640, 640)
    assert truths[0]["class"] == "sphere"
    reference = tactwin.reference_image()
    assert abs(image - reference).max() > 0.01


def test_decoder_recovers_force():
    config = tactwin.default_config()
    config["calibration_step"] = 0.5
    decoder = tactwin.Decoder("footprints", config)
    image, _ = tactwin.simulate({"type": "footprint", "class": "hexagon"}, 4.0, x=1.0, config=config)
    dets = decoder.decode(image)
    assert len(dets) == 1
    assert dets[0]["class"] == "hexagon"
    assert dets[0]["force_n"] == pytest.approx(4.0, abs=0.05)


def test_config_errors():
    with pytest.raises(tactwin.ConfigError):
        tactwin.simulate({"type": "sphere", "diameter": 10.0}, 3.0, config={"sim": {"bogus": 1}})
    with pytest.raises(tactwin.ScenarioError):
        tactwin.simulate({"type": "sphere", "diameter": 10.0}, 30.0)


def test_cli_exit_codes(tmp_path):
    code, out, _ = tactwin.run_cli(["resolution", "--out", tmp_path / "sweep.csv"])
    assert code == 0
    assert "horizontal limit" in out
    code, _, err = tactwin.run_cli(["generate", "--out", tmp_path / "ds", "--force-range", "5:1"])
    assert code == 2
    assert "force_range" in err
