"""Q-learning with adaptive confidence intervals.

Thin wrapper over the compiled ``_dtrci`` module. Models are named as in the
CLI (``"ex1"``, ``"ternary:ex3"``, ``"three_stage:exB"``); configs are dicts.
"""

import json

import numpy as np

from . import _dtrci
from ._dtrci import (
    ConfigError,
    DataError,
    Dataset,
    NumericalError,
    aci_interval,
    analysis_design,
    cpb_interval,
    fit,
    fit_report,
    model_names,
    regularity,
    simulate,
    toy_sweep,
    true_parameter,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "NumericalError",
    "aci_interval",
    "analysis_design",
    "cpb_interval",
    "fit",
    "fit_report",
    "model_names",
    "read_csv",
    "regularity",
    "run_experiment",
    "simulate",
    "toy_sweep",
    "true_parameter",
]


def read_csv(text, design):
    """Parse CSV text; ``design`` is a dict or JSON text (see ``analysis_design``)."""
    if not isinstance(design, str):
        design = json.dumps(design)
    return _dtrci.read_csv(text, design)


def run_experiment(config):
    """Coverage study for an ``experiment`` config dict; one dict per cell."""
    return _dtrci.run_experiment(json.dumps(config))


def unit(size, j):
    """Coordinate vector e_j (0-based) of length ``size``."""
    c = np.zeros(size)
    c[j] = 1.0
    return c
