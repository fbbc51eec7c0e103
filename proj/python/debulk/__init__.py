"""Wrinkle prediction for debulked prepreg plies from 3D scans."""

import json
from dataclasses import dataclass

import numpy as np

from ._debulk import (
    DebulkError,
    HeightMap,
    ReferenceSurface,
    cosine_bell_arc_length,
    read_heightmap,
    ridge_height,
    write_heightmap,
)
from . import _debulk

__all__ = [
    "DebulkError",
    "HeightMap",
    "ReferenceSurface",
    "Scene",
    "Prediction",
    "Chain",
    "cosine_bell_arc_length",
    "default_config",
    "generate",
    "heightmap",
    "layup_suite",
    "predict",
    "read_heightmap",
    "ridge_height",
    "wrinkle2d",
    "write_heightmap",
]


def default_config():
    return json.loads(_debulk._default_config())


def layup_suite():
    return json.loads(_debulk._layup_suite())


@dataclass
class Scene:
    points: np.ndarray
    valid: np.ndarray
    reference: ReferenceSurface
    truth: list


def generate(spec, seed=1, debulked=False):
    """Synthetic ply scan; `spec` is a scene dict (see layup_suite())."""
    pts, valid, ref, truth = _debulk._generate(json.dumps(spec), seed, debulked)
    return Scene(pts, valid, ref, json.loads(truth))


@dataclass
class Prediction:
    summary: dict
    heightfields: list
    status: int

    @property
    def reports(self):
        return self.summary["reports"]


def _config_json(config):
    return "" if config is None else json.dumps(config)


def predict(points, valid, reference, config=None):
    """Runs the full pipeline on an organized cloud of shape (rows, cols, 3)."""
    summary, fields, status = _debulk._predict(np.asarray(points, dtype=float), np.asarray(valid, dtype=np.uint8),
                                               reference, _config_json(config))
    return Prediction(json.loads(summary), list(fields), status)


def heightmap(points, valid, reference, config=None):
    return _debulk._heightmap(np.asarray(points, dtype=float), np.asarray(valid, dtype=np.uint8), reference,
                              _config_json(config))


@dataclass
class Chain:
    apex_mm: float
    rest_length_mm: float
    final_length_mm: float
    converged: bool
    nodes: np.ndarray


def wrinkle2d(segments=200, apex=3.2, leg=9.3, steps=5):
    return Chain(*_debulk._wrinkle2d(segments, apex, leg, steps))
