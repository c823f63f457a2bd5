"""Weighted parabolic estimates laboratory.

Thin layer over the native module; reports come back as plain dicts.
"""

import json

from ._wrlab import (
    DomainError,
    NumericalError,
    Weight,
    ap_characteristic,
    ball_average,
    bmo_q,
    criterion_title,
    cylinder,
    derived_constants,
    experiment_defaults,
    experiment_names,
    set_thread_count,
)
from . import _wrlab

__all__ = [
    "DomainError",
    "NumericalError",
    "Weight",
    "ap_characteristic",
    "ball_average",
    "bmo_q",
    "criterion_title",
    "cylinder",
    "derived_constants",
    "experiment_defaults",
    "experiment_names",
    "run_criterion",
    "run_experiment",
    "set_thread_count",
]


def run_experiment(name, **overrides):
    """Run one experiment; keyword values override its defaults (lists are joined)."""
    flat = {}
    for key, value in overrides.items():
        if isinstance(value, (list, tuple)):
            sep = ";" if key == "weights" else ","
            value = sep.join(str(v) for v in value)
        flat[key] = str(value)
    return json.loads(_wrlab.run_experiment_json(name, flat))


def run_criterion(criterion, seed=1):
    return json.loads(_wrlab.run_criterion_json(criterion, seed))
