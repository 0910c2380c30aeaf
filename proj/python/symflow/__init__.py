"""Symmetry-aware Bayesian flow network for crystal generation.

Thin layer over the compiled ``_core`` module.
"""

import json

from ._core import *  # noqa: F401,F403
from ._core import __version__, evaluate_json


def evaluate(generated, reference):
    """Metrics report as a dict; items are (name, crystal, sg) tuples."""
    return json.loads(evaluate_json(generated, reference))
