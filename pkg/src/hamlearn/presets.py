"""Named benchmark recipes, one per builtin example system."""

import math
from typing import Any

from .errors import UnknownSystemError

# Only the keys that differ from the ExperimentConfig defaults, which are the
# pendulum recipe.
PRESETS: dict[str, dict[str, Any]] = {
    "pendulum": {
        "system": "pendulum",
    },
    "exp_quartic": {
        "system": "exp_quartic",
        "degree": 6,
        "trajectories": 300,
        "steps_per_burst": 2,
        "noise_amplitude": 0.0,
        "derivative_method": "central_diff",
        "test_initial_state": [0.6, 0.6],
        "horizon": 50.0,
        "eval_step": 1e-2,
    },
    "henon_heiles": {
        "system": "henon_heiles",
        "degree": 3,
        "trajectories": 500,
        "steps_per_burst": 2,
        "noise_amplitude": 0.0,
        "derivative_method": "central_diff",
        "test_initial_state": [0.3, -0.25, 0.2, -0.25],
        "horizon": 50.0,
        "eval_step": 1e-2,
    },
    "cherry": {
        "system": "cherry",
        "degree": 3,
        "trajectories": 500,
        "steps_per_burst": 2,
        "noise_amplitude": 0.0,
        "derivative_method": "central_diff",
        "test_initial_state": [-0.05, 0.1, 0.15, 0.1],
        "horizon": 20.0,
        "eval_step": 1e-2,
    },
    "double_pendulum": {
        "system": "double_pendulum",
        "degree": 15,
        "trajectories": 20_000,
        "steps_per_burst": 2,
        "noise_amplitude": 0.0,
        "derivative_method": "central_diff",
        "test_initial_state": [0.0, 0.0, math.pi / 6, math.pi / 4],
        "horizon": 20.0,
        "eval_step": 1e-2,
        "diagnostics": False,
        "baseline_nonsp": False,
    },
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_values(name: str) -> dict[str, Any]:
    """Copy of a preset's config values.

    Raises:
        UnknownSystemError: If no preset has that name
    """
    try:
        values = PRESETS[name]
    except KeyError:
        raise UnknownSystemError(name, preset_names()) from None
    return {k: (list(v) if isinstance(v, list) else v) for k, v in values.items()}
