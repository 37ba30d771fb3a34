"""Python access to the fault-estimation toolkit.

Documents cross the boundary as JSON text; these wrappers convert to and from
plain Python objects.
"""

import json as _json
import os as _os

from . import _core
from ._core import ConfigError, FaultestError, InfeasibleError

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "FaultestError",
    "InfeasibleError",
    "load_config",
    "robot_arm_plant",
    "run_scenario",
    "solve_sdpa",
    "synthesize",
    "verify_trace",
]


def _dump(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def robot_arm_plant(**params):
    return _json.loads(_core.robot_arm_plant(_json.dumps(params) if params else ""))


def load_config(path):
    """Normalized scenario config from a .toml or .json file."""
    return _json.loads(_core.load_config(_os.fspath(path)))


def synthesize(config, base_dir="."):
    """Gains document for a scenario config (dict or JSON text)."""
    return _json.loads(_core.synthesize(_dump(config), _os.fspath(base_dir)))


def run_scenario(config, base_dir="."):
    """Full run; returns the summary. Artifacts land in config["output_dir"] when set."""
    return _json.loads(_core.run_scenario(_dump(config), _os.fspath(base_dir)))


def verify_trace(gains, csv_path, meta_path=""):
    return _json.loads(_core.verify_trace(_dump(gains), _os.fspath(csv_path), _os.fspath(meta_path)))


def solve_sdpa(text):
    return _core.solve_sdpa(text)
