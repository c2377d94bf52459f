"""Stationary covariance estimation and simultaneous confidence bands for dense functional data."""

import json

import numpy as np

from ._core import (
    DataError,
    InvalidArgument,
    NumericalError,
    __version__,
    effective_range,
    knot_formula,
)
from . import _core

__all__ = [
    "DataError",
    "InvalidArgument",
    "NumericalError",
    "__version__",
    "effective_range",
    "eval_model",
    "fit",
    "generate",
    "gof_test",
    "knot_formula",
    "simulate",
]


def _matrix(y):
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValueError(f"expected an n x N matrix, got shape {y.shape}")
    return y


def _options(options):
    return json.dumps(options) if options else ""


def fit(y, options=None, domain=None):
    """Covariance estimate, variance function and bands for the rows of ``y``.

    ``options`` uses the keys of the pipeline options in the run manifest,
    e.g. ``{"alpha": [0.05, 0.01], "h0": 1.0, "seed": 3}``.
    """
    return json.loads(_core.fit_json(_matrix(y), _options(options), domain))


def gof_test(y, model, options=None, domain=None):
    """Sup-norm test of a parametric covariance model such as ``"gaussian:sill=2,range=3"``."""
    return json.loads(_core.gof_json(_matrix(y), model, _options(options), domain))


def simulate(config, seed, reps=None, workers=1):
    """Monte-Carlo report for a configuration given as TOML-style text or a dict."""
    text = json.dumps(config) if isinstance(config, dict) else config
    return json.loads(_core.simulate_json(text, seed, reps, workers))


def generate(config, seed, replicate=0):
    """One simulated dataset: (observations, lag grid, true covariance, lag scale)."""
    text = json.dumps(config) if isinstance(config, dict) else config
    y, h, c, scale = _core.generate(text, seed, replicate)
    return np.asarray(y), np.asarray(h), np.asarray(c), scale


def eval_model(model, h):
    return _core.eval_model(model, np.atleast_1d(np.asarray(h, dtype=float)))
