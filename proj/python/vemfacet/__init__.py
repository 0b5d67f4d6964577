"""Lowest-order face and edge virtual element spaces with a sub-mesh reconstruction oracle."""

import json

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_studies_json


def run_studies(config_text, seed=None, oracle_level=None, threads=0):
    """Run the studies of a config text and return the report as a dict."""
    return json.loads(run_studies_json(config_text, seed=seed, oracle_level=oracle_level, threads=threads))
