from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import InvalidArgumentError, PartitionInfeasibleError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer class labels in ``[0, num_classes)``."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise InvalidArgumentError(f"features must be a 2-D matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise InvalidArgumentError(
                f"labels length {labels.shape} does not match {features.shape[0]} feature rows"
            )
        if self.num_classes < 1:
            raise InvalidArgumentError(f"num_classes must be positive, got {self.num_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InvalidArgumentError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(features)):
            raise InvalidArgumentError("features contain non-finite values")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class PartitionConfig:
    num_clients: int = 10
    dirichlet_sigma: float = 5.0
    train_fraction: float = 0.8
    smoothing_eps: float = 0.5
    rng_seed: int = 0
    test_sampling: str = "local"  # "local" or "global"
    min_samples_per_client: int = 2
    max_retries: int = 100

    def __post_init__(self):
        if self.num_clients < 1:
            raise InvalidArgumentError(f"num_clients must be >= 1, got {self.num_clients}")
        if not self.dirichlet_sigma > 0:
            raise InvalidArgumentError(f"dirichlet_sigma must be > 0, got {self.dirichlet_sigma}")
        if not 0 < self.train_fraction < 1:
            raise InvalidArgumentError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.smoothing_eps < 0:
            raise InvalidArgumentError(f"smoothing_eps must be >= 0, got {self.smoothing_eps}")
        if self.test_sampling not in ("local", "global"):
            raise InvalidArgumentError(f"test_sampling must be 'local' or 'global', got {self.test_sampling!r}")
        if self.min_samples_per_client < 1:
            raise InvalidArgumentError("min_samples_per_client must be >= 1")


@dataclass(frozen=True)
class ClientPartition:
    """Disjoint per-client index lists, each split into train / test parts."""

    client_indices: tuple[np.ndarray, ...]
    train_indices: tuple[np.ndarray, ...]
    test_indices: tuple[np.ndarray, ...]

    @property
    def num_clients(self) -> int:
        return len(self.client_indices)

    @property
    def train_sizes(self) -> np.ndarray:
        return np.array([len(idx) for idx in self.train_indices], dtype=np.int64)

    @property
    def test_sizes(self) -> np.ndarray:
        return np.array([len(idx) for idx in self.test_indices], dtype=np.int64)

    def global_train_indices(self) -> np.ndarray:
        return np.sort(np.concatenate(self.train_indices))

    def global_test_indices(self) -> np.ndarray:
        return np.sort(np.concatenate(self.test_indices))


@dataclass(frozen=True)
class LabelDistribution:
    probs: np.ndarray
    counts: np.ndarray
    least_freq_prob: float = field(default=0.0)

    @property
    def num_classes(self) -> int:
        return int(self.probs.shape[0])


def generate_synthetic(num_samples: int, feature_dim: int, num_classes: int,
                       class_separation: float, rng_seed: int) -> Dataset:
    """Gaussian mixture with one unit-variance spherical component per class.

    Labels are a shuffled balanced sequence. When ``num_classes <= feature_dim``
    the means are scaled basis vectors at pairwise distance ``class_separation``;
    otherwise they are random unit directions scaled by ``class_separation``.
    """
    if num_samples < 1 or feature_dim < 1 or num_classes < 1:
        raise InvalidArgumentError(
            f"dimensions must be positive, got samples={num_samples}, dim={feature_dim}, classes={num_classes}"
        )
    if not class_separation > 0:
        raise InvalidArgumentError(f"class_separation must be > 0, got {class_separation}")

    rng = np.random.default_rng(rng_seed)
    labels = np.arange(num_samples, dtype=np.int64) % num_classes
    rng.shuffle(labels)

    if num_classes <= feature_dim:
        means = np.zeros((num_classes, feature_dim))
        means[np.arange(num_classes), np.arange(num_classes)] = class_separation / np.sqrt(2.0)
    else:
        directions = rng.standard_normal((num_classes, feature_dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        means = class_separation * directions

    features = means[labels] + rng.standard_normal((num_samples, feature_dim))
    logger.debug(f"Generated synthetic dataset: {num_samples}x{feature_dim}, {num_classes} classes")
    return Dataset(features=features, labels=labels, num_classes=num_classes)


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    raw = proportions * total
    counts = np.floor(raw).astype(np.int64)
    shortfall = total - int(counts.sum())
    if shortfall > 0:
        # stable sort keeps lower client ids first among equal remainders
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:shortfall]] += 1
    return counts


def _dirichlet_assign(labels: np.ndarray, pool: np.ndarray, num_classes: int,
                      config: PartitionConfig, rng: np.random.Generator) -> list[np.ndarray]:
    for attempt in range(1, config.max_retries + 1):
        shards: list[list[np.ndarray]] = [[] for _ in range(config.num_clients)]
        for c in range(num_classes):
            class_idx = pool[labels[pool] == c]
            if class_idx.size == 0:
                continue
            class_idx = rng.permutation(class_idx)
            proportions = rng.dirichlet(np.full(config.num_clients, config.dirichlet_sigma))
            counts = _largest_remainder(proportions, class_idx.size)
            for n, chunk in enumerate(np.split(class_idx, np.cumsum(counts)[:-1])):
                shards[n].append(chunk)
        assigned = [np.sort(np.concatenate(s)) if s else np.empty(0, dtype=np.int64) for s in shards]
        if min(a.size for a in assigned) >= config.min_samples_per_client:
            if attempt > 1:
                logger.debug(f"Dirichlet partition succeeded after {attempt} draws")
            return assigned
    raise PartitionInfeasibleError(
        f"could not give every one of {config.num_clients} clients at least "
        f"{config.min_samples_per_client} samples from {pool.size} samples in {config.max_retries} draws"
    )


def _split_train_test(indices: np.ndarray, train_fraction: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    size = indices.size
    if size < 2:
        return indices.copy(), np.empty(0, dtype=np.int64)
    n_train = int(np.clip(round(train_fraction * size), 1, size - 1))
    shuffled = rng.permutation(indices)
    return np.sort(shuffled[:n_train]), np.sort(shuffled[n_train:])


def partition_dirichlet(dataset: Dataset, config: PartitionConfig) -> ClientPartition:
    """Label-skewed partition: per class, client shares ~ Dirichlet(sigma * 1_N)."""
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot partition an empty dataset")
    rng = np.random.default_rng(config.rng_seed)
    all_idx = np.arange(len(dataset), dtype=np.int64)

    if config.test_sampling == "local":
        # one train and one test sample per client at the least
        local = replace(config, min_samples_per_client=max(config.min_samples_per_client, 2))
        client_indices = _dirichlet_assign(dataset.labels, all_idx, dataset.num_classes, local, rng)
        splits = [_split_train_test(idx, config.train_fraction, rng) for idx in client_indices]
        train = [s[0] for s in splits]
        test = [s[1] for s in splits]
    else:
        shuffled = rng.permutation(all_idx)
        n_pool = int(np.clip(round(config.train_fraction * shuffled.size), 1, shuffled.size - 1))
        train_pool = np.sort(shuffled[:n_pool])
        test_pool = shuffled[n_pool:]
        if test_pool.size < config.num_clients:
            raise PartitionInfeasibleError(
                f"global test pool of {test_pool.size} samples cannot give each of {config.num_clients} clients a test sample"
            )
        train = _dirichlet_assign(dataset.labels, train_pool, dataset.num_classes,
                                  replace(config, min_samples_per_client=1), rng)
        test = [np.sort(test_pool[n::config.num_clients]) for n in range(config.num_clients)]
        client_indices = [np.sort(np.concatenate([tr, te])) for tr, te in zip(train, test)]

    for arr in (*client_indices, *train, *test):
        arr.setflags(write=False)
    logger.info(
        f"Partitioned {len(dataset)} samples over {config.num_clients} clients "
        f"(sigma={config.dirichlet_sigma}, test_sampling={config.test_sampling})"
    )
    return ClientPartition(tuple(client_indices), tuple(train), tuple(test))


def label_histogram(dataset: Dataset, index_list: Sequence[int] | np.ndarray,
                    smoothing_eps: float) -> LabelDistribution:
    """Laplace-smoothed empirical label distribution of ``dataset[index_list]``."""
    idx = np.asarray(index_list, dtype=np.int64)
    if idx.size == 0:
        raise InvalidArgumentError("label_histogram needs a nonempty index list")
    if smoothing_eps < 0:
        raise InvalidArgumentError(f"smoothing_eps must be >= 0, got {smoothing_eps}")
    counts = np.bincount(dataset.labels[idx], minlength=dataset.num_classes).astype(np.int64)
    smoothed = counts + smoothing_eps
    probs = smoothed / smoothed.sum()
    least = float(probs[probs > 0].min())
    return LabelDistribution(probs=probs, counts=counts, least_freq_prob=least)


def histogram_from_counts(counts: Sequence[int], smoothing_eps: float = 0.0) -> LabelDistribution:
    """Same smoothing rule as ``label_histogram`` applied to raw class counts."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.sum() <= 0:
        raise InvalidArgumentError("counts must contain at least one sample")
    smoothed = counts + smoothing_eps
    probs = smoothed / smoothed.sum()
    return LabelDistribution(probs=probs, counts=counts, least_freq_prob=float(probs[probs > 0].min()))
