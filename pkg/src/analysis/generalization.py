"""Entropy / KL kernel and the per-client generalization statement phi.

All quantities are in nats. Distributions can be passed either as a
``LabelDistribution`` or as a plain probability vector.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import entr, rel_entr, xlogy

from ..data.datasets import ClientPartition, Dataset, LabelDistribution, label_histogram
from ..errors import DomainError, InvalidArgumentError

logger = logging.getLogger(__name__)

DistLike = Union[LabelDistribution, Sequence[float], np.ndarray]


class Branch(str, enum.Enum):
    REGULAR = "regular"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class GeneralizationStatement:
    phi: float
    kl: float
    branch: Branch

    @property
    def is_pole(self) -> bool:
        return not np.isfinite(self.phi)


def _probs(dist: DistLike) -> np.ndarray:
    probs = dist.probs if isinstance(dist, LabelDistribution) else np.asarray(dist, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise InvalidArgumentError(f"distribution must be a nonempty vector, got shape {probs.shape}")
    return probs


def _pair(p: DistLike, q: DistLike) -> tuple[np.ndarray, np.ndarray]:
    p, q = _probs(p), _probs(q)
    if p.shape != q.shape:
        raise InvalidArgumentError(f"distribution lengths differ: {p.size} vs {q.size}")
    if np.any((q == 0) & (p > 0)):
        raise DomainError("q has a zero where p > 0; smooth the distributions first")
    return p, q


def entropy(dist: DistLike) -> float:
    return float(entr(_probs(dist)).sum())


def cross_entropy(p: DistLike, q: DistLike) -> float:
    p, q = _pair(p, q)
    return float(-xlogy(p, q).sum())


def kl_divergence(p: DistLike, q: DistLike) -> float:
    p, q = _pair(p, q)
    return float(rel_entr(p, q).sum())


def mutual_info_identity(p_train: DistLike, p_test: DistLike) -> float:
    """I such that ``entropy(p_test) - I == kl_divergence(p_train, p_test)``."""
    return entropy(p_train) + entropy(p_test) - cross_entropy(p_train, p_test)


def total_variation(p: DistLike, q: DistLike) -> float:
    p, q = _probs(p), _probs(q)
    if p.shape != q.shape:
        raise InvalidArgumentError(f"distribution lengths differ: {p.size} vs {q.size}")
    return float(0.5 * np.abs(p - q).sum())


def generalization_statement(p_train: DistLike, p_test: DistLike, train_size: int, test_size: int,
                             least_freq_prob: float | None = None) -> GeneralizationStatement:
    """phi = ((D_train + D_test) / p') * |r / (1 - D_test * r)| with r = sqrt(2 KL).

    ``least_freq_prob`` defaults to the train distribution's p'. A zero
    denominator yields ``phi = inf`` flagged as degenerate.
    """
    if train_size < 1 or test_size < 1:
        raise InvalidArgumentError(f"train/test sizes must be >= 1, got {train_size}/{test_size}")
    if least_freq_prob is None:
        if isinstance(p_train, LabelDistribution):
            least_freq_prob = p_train.least_freq_prob
        else:
            probs = _probs(p_train)
            least_freq_prob = float(probs[probs > 0].min())
    if not least_freq_prob > 0:
        raise InvalidArgumentError(f"least frequent probability must be > 0, got {least_freq_prob}")

    kl = max(kl_divergence(p_train, p_test), 0.0)
    if kl == 0.0:
        return GeneralizationStatement(phi=0.0, kl=0.0, branch=Branch.REGULAR)

    r = np.sqrt(2.0 * kl)
    denom = 1.0 - test_size * r
    branch = Branch.REGULAR if denom > 0 else Branch.DEGENERATE
    scale = (train_size + test_size) / least_freq_prob
    if denom == 0.0:
        logger.warning(f"Generalization statement hit its pole (kl={kl:.6g}, test_size={test_size})")
        return GeneralizationStatement(phi=float("inf"), kl=kl, branch=branch)
    if branch is Branch.DEGENERATE:
        logger.debug(f"Degenerate branch: 1 - {test_size}*sqrt(2*{kl:.6g}) = {denom:.6g}")
    return GeneralizationStatement(phi=float(scale * abs(r / denom)), kl=kl, branch=branch)


def client_statements(dataset: Dataset, partition: ClientPartition,
                      smoothing_eps: float) -> list[GeneralizationStatement]:
    """phi for every client, computed once from its local train / test label histograms."""
    statements = []
    for n in range(partition.num_clients):
        train_idx, test_idx = partition.train_indices[n], partition.test_indices[n]
        if train_idx.size == 0 or test_idx.size == 0:
            raise InvalidArgumentError(
                f"client {n} needs nonempty train and test sets, got {train_idx.size}/{test_idx.size}"
            )
        p_train = label_histogram(dataset, train_idx, smoothing_eps)
        p_test = label_histogram(dataset, test_idx, smoothing_eps)
        stmt = generalization_statement(p_train, p_test, train_idx.size, test_idx.size)
        if stmt.is_pole:
            logger.warning(f"Client {n} generalization statement is infinite")
        statements.append(stmt)
    degenerate = sum(s.branch is Branch.DEGENERATE for s in statements)
    if degenerate:
        logger.warning(f"{degenerate}/{len(statements)} clients fall on the degenerate branch")
    return statements


def normalize_phi(phis: Sequence[float] | np.ndarray) -> np.ndarray:
    """Divide by the max over clients; an all-zero vector stays zero."""
    phis = np.asarray(phis, dtype=np.float64)
    if not np.all(np.isfinite(phis)):
        raise InvalidArgumentError("cannot normalize non-finite phi values")
    top = phis.max(initial=0.0)
    return phis / top if top > 0 else phis.copy()


def check_finite_phi(phis: Sequence[float] | np.ndarray) -> np.ndarray:
    phis = np.asarray(phis, dtype=np.float64)
    if phis.ndim != 1:
        raise InvalidArgumentError(f"phi must be a vector, got shape {phis.shape}")
    bad = np.flatnonzero(~np.isfinite(phis) | (phis < 0))
    if bad.size:
        raise InvalidArgumentError(f"phi must be finite and nonnegative; bad clients {bad.tolist()}")
    return phis
