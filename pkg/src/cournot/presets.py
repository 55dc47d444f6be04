"""Named experiment presets and the builders that turn JSON-able
configuration dictionaries into solver inputs.

A configuration is a flat dictionary of plain JSON values; ``expand_config``
layers it over its preset (if any) and the package defaults, rejecting
unknown fields.  Presets cover the shipped scenarios: a congested game on the
arc ``(0, pi/6)`` with quadratic and power costs, an interaction game on
``(0, pi/2)``, and a cross-solver comparison run.
"""

from __future__ import annotations

import copy

import numpy as np

from .bestreply import InteractionSpec
from .congestion import CongestionSpec, SolverConfig
from .costs import CostModel, cost_from_config
from .measures import Grid1D, GridMeasure1D, PointCloudMeasure, QuarterDiskSampler, uniform_measure

__all__ = [
    "DEFAULTS",
    "PRESETS",
    "available_presets",
    "build_cloud",
    "build_congestion_spec",
    "build_cost",
    "build_grid",
    "build_interaction_spec",
    "build_nu0",
    "build_potential",
    "build_solver_config",
    "expand_config",
    "get_preset",
]

DEFAULTS: dict = {
    "action": None,
    "cost": "arc_quadratic",
    "p": 4.0,
    "y_min": 0.0,
    "y_max": np.pi / 6,
    "n_cells": 200,
    "n_points": 10000,
    "sampler": "tensor-polar-quadrature",
    "seed": 0,
    "nu0_support": None,
    "potential": None,
    "interaction": None,
    "eps": 1e-3,
    "max_iters": 500,
    "tol_l1": 1e-6,
    "damping": 1.0,
    "stride": 1,
    "n_level_curves": 20,
    "resolution": 400,
}

# fields that are file-system inputs of specific actions rather than model
# parameters; they bypass preset expansion defaults
_ACTION_FIELDS = {
    "out_dir",
    "dir_a",
    "dir_b",
    "cost_matrix",
    "row_weights",
    "col_weights",
}

_ALLOWED_FIELDS = set(DEFAULTS) | _ACTION_FIELDS | {"preset"}

_INTERACTION_BASE: dict = {
    "cost": "arc_quadratic",
    "y_max": np.pi / 2,
    "nu0_support": [0.0, np.pi / 6],
    "potential": {"type": "quadratic", "center": np.pi / 12, "weight": 1.0},
    "interaction": {"type": "quadratic", "weight": 1.0},
}

PRESETS: dict[str, dict] = {
    "fig1": {
        "action": "solve-congestion",
        "cost": "arc_quadratic",
        "potential": {"type": "quadratic", "center": 0.1, "weight": 10.0},
    },
    "fig2_p4": {
        "action": "solve-congestion",
        "cost": "arc_power",
        "p": 4.0,
        "potential": {"type": "quadratic", "center": 0.1, "weight": 10.0},
    },
    "fig2_p8": {
        "action": "solve-congestion",
        "cost": "arc_power",
        "p": 8.0,
        "potential": {"type": "quadratic", "center": 0.1, "weight": 10.0},
    },
    "fig3": {"action": "solve-bestreply", **_INTERACTION_BASE},
    "fig4_p4": {
        "action": "solve-bestreply",
        **_INTERACTION_BASE,
        "cost": "arc_power",
        "p": 4.0,
    },
    "fig4_p8": {
        "action": "solve-bestreply",
        **_INTERACTION_BASE,
        "cost": "arc_power",
        "p": 8.0,
    },
    "fig5": {"action": "compare-solvers", **_INTERACTION_BASE, "eps": 1e-3},
}


def available_presets() -> list[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(available_presets())}"
        )
    return copy.deepcopy(PRESETS[name])


def expand_config(config: dict) -> dict:
    """Layer ``config`` over its preset and the defaults.

    Precedence: explicit config fields beat the preset, which beats
    ``DEFAULTS``.  Unknown fields raise ``ValueError`` naming the field.
    """
    for key in config:
        if key not in _ALLOWED_FIELDS:
            raise ValueError(f"unknown config field {key!r}")
    merged = copy.deepcopy(DEFAULTS)
    preset = config.get("preset")
    if preset is not None:
        merged.update(get_preset(preset))
    merged.update(copy.deepcopy(config))
    merged["preset"] = preset
    return merged


def build_cost(config: dict) -> CostModel:
    return cost_from_config(config)


def build_grid(config: dict) -> Grid1D:
    return Grid1D(config["y_min"], config["y_max"], config["n_cells"])


def build_cloud(config: dict) -> PointCloudMeasure:
    sampler = QuarterDiskSampler(
        n_points=config["n_points"],
        scheme=config["sampler"],
        seed=config.get("seed"),
    )
    return sampler.sample()


def build_nu0(config: dict, grid: Grid1D) -> GridMeasure1D:
    support = config.get("nu0_support")
    if support is None:
        return uniform_measure(grid)
    lo, hi = support
    return uniform_measure(grid, support=(float(lo), float(hi)))


def build_potential(spec: dict | None):
    """A vectorized potential callable from its dictionary description.

    ``None`` stays ``None`` (zero potential);
    ``{"type": "quadratic", "center": c, "weight": w}`` gives ``w|y - c|^2``.
    """
    if spec is None:
        return None
    if spec.get("type") != "quadratic":
        raise ValueError(f"unknown potential type {spec.get('type')!r}")
    center = float(spec["center"])
    weight = float(spec.get("weight", 1.0))

    def potential(y):
        d = np.asarray(y, dtype=float) - center
        return weight * d * d

    return potential


def _potential_prime(spec: dict | None):
    if spec is None:
        return lambda y: np.zeros_like(np.asarray(y, dtype=float))
    center = float(spec["center"])
    weight = float(spec.get("weight", 1.0))
    return lambda y: 2.0 * weight * (np.asarray(y, dtype=float) - center)


def build_congestion_spec(config: dict) -> CongestionSpec:
    return CongestionSpec(potential=build_potential(config.get("potential")))


def build_interaction_spec(config: dict) -> InteractionSpec:
    pot = config.get("potential")
    inter = config.get("interaction")
    if inter is None or inter.get("type") != "quadratic":
        raise ValueError(
            f"unknown interaction type {None if inter is None else inter.get('type')!r}"
        )
    iw = float(inter.get("weight", 1.0))
    potential = build_potential(pot)
    if potential is None:
        potential = lambda y: np.zeros_like(np.asarray(y, dtype=float))
    return InteractionSpec(
        potential=potential,
        potential_prime=_potential_prime(pot),
        interaction=lambda y, z: iw
        * (np.asarray(y, dtype=float) - np.asarray(z, dtype=float)) ** 2,
        interaction_prime=lambda y, z: 2.0
        * iw
        * (np.asarray(y, dtype=float) - np.asarray(z, dtype=float)),
    )


def build_solver_config(config: dict) -> SolverConfig:
    return SolverConfig(
        max_iters=int(config["max_iters"]),
        tol_l1=float(config["tol_l1"]),
        damping=float(config["damping"]),
    )
