"""Digital twin of a reflection-layer vision-based tactile sensor."""

import json

from . import _tactwin
from ._tactwin import (
    ConfigError,
    ContractViolation,
    DomainError,
    Error,
    IoError,
    OrientedBox,
    ScenarioError,
    angle_error,
    bce,
    box_loss,
    csl_decode,
    csl_encode,
    hertz_indentation,
    normalize_angle,
    punch_indentation,
    rotated_iou,
    smooth_l1,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "Decoder",
    "DomainError",
    "Error",
    "IoError",
    "OrientedBox",
    "ScenarioError",
    "angle_error",
    "bce",
    "box_loss",
    "csl_decode",
    "csl_encode",
    "default_config",
    "hertz_indentation",
    "main",
    "normalize_angle",
    "punch_indentation",
    "reference_image",
    "rotated_iou",
    "run_cli",
    "simulate",
    "smooth_l1",
]


def _dump(config):
    return "" if config is None else json.dumps(config)


def default_config():
    return json.loads(_tactwin.default_config())


def simulate(probe, force, x=0.0, y=0.0, theta=0.0, noise=0.0, seed=0, config=None):
    """Render one contact. Returns (image, truths); image rows follow +y."""
    return _tactwin.simulate(json.dumps(probe), force, x, y, theta, noise, seed, _dump(config))


def reference_image(config=None):
    return _tactwin.reference_image(_dump(config))


class Decoder:
    """Calibrates `suite` ("sphere-strip", "footprints" or "screw") on construction."""

    def __init__(self, suite, config=None):
        self._impl = _tactwin.Decoder(suite, _dump(config))

    @property
    def calibration_hash(self):
        return self._impl.calibration_hash

    def decode(self, image):
        return self._impl.decode(image)


def run_cli(args):
    """Returns (exit_code, stdout, stderr)."""
    return _tactwin.run_cli([str(a) for a in args])


def main():
    import sys

    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
