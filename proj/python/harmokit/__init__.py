"""Multi-contrast MR harmonization toolkit on digital phantoms."""

import json as _json

from ._harmokit import *  # noqa: F401,F403
from ._harmokit import _run_experiment

__version__ = "0.1.0"


def run_experiment(config, output_dir=None):
    """Run a harness experiment from a config dict; returns the summary dict.

    Reports are written to ``output_dir`` when given.
    """
    return _json.loads(_run_experiment(_json.dumps(config), str(output_dir or "")))
