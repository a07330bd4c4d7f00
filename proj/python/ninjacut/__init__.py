"""Python bindings for the ninjacut cutting lab.

Configs and episode logs cross the boundary as JSON; the helpers here wrap
them as dicts.
"""

import json

from ._ninjacut import (  # noqa: F401
    Core,
    NumericalFailure,
    collision_loss,
    estimate,
    gen_core,
    gradcheck,
    make_core,
)
from . import _ninjacut

__all__ = [
    "Core",
    "NumericalFailure",
    "collision_loss",
    "default_config",
    "estimate",
    "gen_core",
    "gradcheck",
    "make_core",
    "replay",
    "run_episode",
    "validate_config",
]


def default_config():
    return json.loads(_ninjacut.default_config())


def validate_config(config):
    """Strictly parses a config dict and returns it with defaults filled in."""
    return json.loads(_ninjacut.validate_config(json.dumps(config)))


def run_episode(core, config=None, variant="adaptive", oracle=False):
    """Runs one closed-loop episode and returns its log as a dict."""
    cfg = default_config() if config is None else config
    return json.loads(_ninjacut.run_episode(core, json.dumps(cfg), variant, oracle))


def replay(log):
    """Re-simulates a logged episode; returns (identical, steps_checked, mismatch)."""
    return _ninjacut.replay(json.dumps(log))
