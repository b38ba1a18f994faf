"""Python access to the slowres C++ core.

Configs are plain dicts in the same JSON layout the command-line tool reads;
missing keys fall back to the named (or the command's default) recipe.
"""

import json
from pathlib import Path

from ._slowres import SlowresError
from . import _slowres

__all__ = [
    "SlowresError",
    "recipe_names",
    "recipe",
    "resolve_config",
    "generate",
    "source_lle",
    "ridge_fit",
    "exp1",
    "ablation",
    "run",
]


def recipe_names():
    return _slowres.recipe_names()


def recipe(name):
    return json.loads(_slowres.recipe_json(name))


def resolve_config(config=None, command="exp1"):
    """Fully resolved config for `command`, validated."""
    return json.loads(_slowres.resolve_config(json.dumps(config or {}), command))


def generate(config=None):
    """Observation series y, schedule values and full states as numpy arrays."""
    return _slowres.generate(json.dumps(config or {}))


def source_lle(lam, t_total=500.0, dt=0.01, system="lorenz"):
    """Largest Lyapunov exponent of the source flow, per time unit."""
    return _slowres.source_lle(system, lam, t_total, dt)


def ridge_fit(states, targets, beta):
    """Readout w and the condition estimate of the regularized Gram matrix."""
    return _slowres.ridge_fit(states, targets, beta)


def exp1(config=None):
    return _slowres.exp1(json.dumps(config or {}))


def ablation(config=None):
    return _slowres.ablation(json.dumps(config or {}))


def run(command, out, config=None):
    """Run a command as the CLI would; artifacts go to `out`. Returns report.json."""
    return json.loads(_slowres.run_command(command, json.dumps(config or {}), str(Path(out))))
