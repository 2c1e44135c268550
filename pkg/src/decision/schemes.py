"""Proposed scheme and the five baselines, expressed as optimizer overrides."""
from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from ..analysis.bound import BoundConstants, theta_for_decision
from ..errors import InvalidArgumentError
from .optimizer import Budget, OptimizationResult, OptimizerOptions, solve

logger = logging.getLogger(__name__)

SCHEMES = ("proposed", "fixed-pruning", "fixed-selection", "no-gen", "fixed-power", "fixed-frequency")
FIXED_POWER_W = 0.5


def scheme_options(scheme: str, base: OptimizerOptions, fixed_power: float = FIXED_POWER_W) -> OptimizerOptions:
    """Each baseline pins exactly one block of variables; the rest is still optimized."""
    if scheme == "proposed" or scheme == "no-gen":
        return base
    if scheme == "fixed-pruning":
        return replace(base, pin_lambda=0.0)
    if scheme == "fixed-selection":
        return replace(base, pin_selection=True)
    if scheme == "fixed-power":
        return replace(base, pin_power=fixed_power)
    if scheme == "fixed-frequency":
        return replace(base, pin_frequency_max=True)
    raise InvalidArgumentError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")


def optimizer_phi(scheme: str, phi: np.ndarray) -> np.ndarray:
    """phi as seen by the optimizer: the no-gen baseline ignores the generalization term."""
    phi = np.asarray(phi, dtype=np.float64)
    return np.zeros_like(phi) if scheme == "no-gen" else phi


def run_scheme(scheme: str, profiles, channel, phi: np.ndarray, constants: BoundConstants, budget: Budget,
               base: OptimizerOptions | None = None, fixed_power: float = FIXED_POWER_W) -> OptimizationResult:
    options = scheme_options(scheme, base or OptimizerOptions(), fixed_power)
    result = solve(profiles, channel, optimizer_phi(scheme, phi), constants, budget, options)
    if scheme == "no-gen":
        # report theta with the true phi so schemes stay comparable
        result.theta = theta_for_decision(result.decision, phi, constants)
    logger.info(f"Scheme {scheme}: theta={result.theta:.6g}, selected={result.decision.num_selected}, "
                f"mean lambda={result.decision.lam[result.decision.selected].mean():.3f}")
    return result
