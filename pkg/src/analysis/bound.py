"""Convergence bound theta({a, lambda}) and the per-round generalization-gap step bound."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptySelectionError, InvalidArgumentError
from ..system.cost import RoundDecision

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundInputs:
    """Unobservable smoothness / variance constants plus the training schedule."""

    lipschitz: float = 10.0
    grad_sq_bound: float = 100.0  # A^2
    model_sq_bound: float = 50.0  # B^2
    learning_rate: float = 0.01
    batch_size: int = 32
    last_round: int = 99  # S; rounds run 0..S
    loss_gap: float = 1.0


@dataclass(frozen=True)
class BoundConstants:
    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    last_round: int
    inputs: BoundInputs | None = None

    @property
    def num_rounds(self) -> int:
        return self.last_round + 1

    def without_generalization(self) -> "BoundConstants":
        """Same constants with the phi term switched off."""
        return BoundConstants(self.alpha, self.beta, 0.0, self.gamma2, self.last_round, self.inputs)


@dataclass(frozen=True)
class RoundTerms:
    participation: float
    generalization: float
    pruning: float

    @property
    def total(self) -> float:
        return self.participation + self.generalization + self.pruning


@dataclass(frozen=True)
class BoundValue:
    theta: float
    alpha: float
    per_round_terms: tuple[RoundTerms, ...]


def derive_constants(inputs: BoundInputs) -> BoundConstants:
    if not inputs.lipschitz > 0:
        raise InvalidArgumentError(f"lipschitz must be > 0, got {inputs.lipschitz}")
    if not inputs.learning_rate > 0:
        raise InvalidArgumentError(f"learning_rate must be > 0, got {inputs.learning_rate}")
    if inputs.batch_size < 1:
        raise InvalidArgumentError(f"batch_size must be >= 1, got {inputs.batch_size}")
    if inputs.last_round < 0:
        raise InvalidArgumentError(f"last_round must be >= 0, got {inputs.last_round}")
    for name in ("grad_sq_bound", "model_sq_bound", "loss_gap"):
        if getattr(inputs, name) < 0:
            raise InvalidArgumentError(f"{name} must be >= 0, got {getattr(inputs, name)}")

    eta, rounds = inputs.learning_rate, inputs.last_round + 1
    L, a_sq, b_sq, z = inputs.lipschitz, inputs.grad_sq_bound, inputs.model_sq_bound, inputs.batch_size
    constants = BoundConstants(
        alpha=2.0 * inputs.loss_gap / (eta * rounds),
        beta=eta ** 3 * a_sq * (L + 1.0) / (z * rounds),
        gamma1=eta * a_sq / (z * rounds),
        gamma2=L ** 2 * b_sq / rounds,
        last_round=inputs.last_round,
        inputs=inputs,
    )
    logger.debug(
        f"Bound constants: alpha={constants.alpha:.4g} beta={constants.beta:.4g} "
        f"gamma1={constants.gamma1:.4g} gamma2={constants.gamma2:.4g}"
    )
    return constants


def round_terms(a: np.ndarray, lam: np.ndarray, phi: np.ndarray, constants: BoundConstants) -> RoundTerms:
    a = np.asarray(a, dtype=np.float64)
    k = a.sum()
    if k < 1:
        raise EmptySelectionError("theta is undefined for a round with no selected client")
    weighted_phi = float(a @ np.asarray(phi, dtype=np.float64))
    return RoundTerms(
        participation=constants.beta / k,
        generalization=constants.gamma1 * weighted_phi ** 2 / k,
        pruning=constants.gamma2 * float(a @ np.asarray(lam, dtype=np.float64)) / k,
    )


def theta(decisions: Sequence[RoundDecision], phi: Sequence[float] | np.ndarray,
          constants: BoundConstants) -> BoundValue:
    phi = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        raise InvalidArgumentError("phi must be finite")
    terms = []
    for s, decision in enumerate(decisions):
        try:
            terms.append(round_terms(decision.a, decision.lam, phi, constants))
        except EmptySelectionError as exc:
            raise EmptySelectionError(f"round {s}: {exc}") from exc
    value = constants.alpha + sum(t.total for t in terms)
    return BoundValue(theta=float(value), alpha=constants.alpha, per_round_terms=tuple(terms))


def theta_for_decision(decision: RoundDecision, phi: Sequence[float] | np.ndarray,
                       constants: BoundConstants) -> float:
    """theta with ``decision`` repeated in every round 0..S."""
    terms = round_terms(decision.a, decision.lam, phi, constants)
    return float(constants.alpha + constants.num_rounds * terms.total)


def gen_gap_step_bound(a: Sequence[int] | np.ndarray, phi: Sequence[float] | np.ndarray,
                       eta: float, grad_norm_sq_estimate: float) -> float:
    if grad_norm_sq_estimate < 0:
        raise InvalidArgumentError(f"grad_norm_sq_estimate must be >= 0, got {grad_norm_sq_estimate}")
    weighted_phi = float(np.asarray(a, dtype=np.float64) @ np.asarray(phi, dtype=np.float64))
    return 0.5 * (eta ** 2 + weighted_phi ** 2) * grad_norm_sq_estimate
