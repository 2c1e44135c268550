"""FedSGD with per-client gradient-importance pruning.

Each round the selected clients score every weight by (v * w)^2 using the
previous global gradient v, zero the lowest-scoring fraction lambda_n of
their copy, compute one mini-batch gradient on the pruned model and upload
it. The server averages the uploads in client order and takes one SGD step
on the dense global model.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..analysis.bound import gen_gap_step_bound
from ..data.datasets import ClientPartition, Dataset
from ..errors import InvalidArgumentError, NumericError
from ..system.cost import CostReport, RoundDecision, round_costs
from ..system.wireless import ChannelState, ClientProfile
from .models import Model, build_model, cross_entropy_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    num_rounds: int = 100
    model: str = "softmax"
    hidden_units: int = 32
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.num_rounds < 1:
            raise InvalidArgumentError(f"num_rounds must be >= 1, got {self.num_rounds}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class GradientVector:
    values: np.ndarray
    batch_size: int


@dataclass
class ModelState:
    weights: np.ndarray
    masks: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def num_params(self) -> int:
        return int(self.weights.size)

    def pruned_size(self, client: int) -> int:
        mask = self.masks.get(client)
        return 0 if mask is None else int(mask.size - mask.sum())


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    selected_count: int
    mean_lambda: float
    cum_energy_J: float
    cum_delay_s: float
    round_energy_J: float
    round_delay_s: float
    train_loss: float
    test_loss: float
    test_acc: float
    grad_norm_sq: float
    gen_gap_diag: float
    pruning_level: float


@dataclass
class TrainingResult:
    metrics: list[RoundMetrics]
    state: ModelState
    initial_train_loss: float
    costs: list[CostReport]


def importance_scores(global_gradient: np.ndarray, weights: np.ndarray) -> np.ndarray:
    v = np.asarray(global_gradient, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != w.shape:
        raise InvalidArgumentError(f"gradient shape {v.shape} does not match weights {w.shape}")
    return (v * w) ** 2


def prune_mask(scores: np.ndarray, lam: float) -> np.ndarray:
    """Zero the floor(lam * M) lowest-score coordinates; equal scores prune the lower index first."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= lam < 1:
        raise InvalidArgumentError(f"pruning ratio must lie in [0, 1), got {lam}")
    n_pruned = int(np.floor(lam * scores.size + 1e-9))
    mask = np.ones(scores.size, dtype=np.int8)
    if n_pruned:
        mask[np.argsort(scores, kind="stable")[:n_pruned]] = 0
    return mask


def local_gradient(model: Model, weights: np.ndarray, mask: np.ndarray,
                   features: np.ndarray, labels: np.ndarray) -> GradientVector:
    """Mean mini-batch gradient of the pruned model; pruned coordinates are exactly zero."""
    if labels.size == 0:
        raise InvalidArgumentError("mini-batch must not be empty")
    keep = np.asarray(mask).astype(bool)
    _, grad = model.loss_and_grad(np.where(keep, weights, 0.0), features, labels)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite local gradient")
    return GradientVector(values=np.where(keep, grad, 0.0), batch_size=int(labels.size))


def aggregate(local_gradients: Sequence[GradientVector | np.ndarray | None],
              selected: Sequence[int] | np.ndarray) -> GradientVector:
    """Mean over the selected clients, summed in client order."""
    selected = np.asarray(selected).astype(bool)
    if selected.size != len(local_gradients):
        raise InvalidArgumentError(f"{len(local_gradients)} gradients for {selected.size} selection flags")
    chosen = [g for g, s in zip(local_gradients, selected) if s]
    if not chosen:
        raise InvalidArgumentError("cannot aggregate an empty selection")
    total = None
    batch = 0
    for g in chosen:
        values = g.values if isinstance(g, GradientVector) else np.asarray(g, dtype=np.float64)
        total = values.copy() if total is None else total + values
        batch += g.batch_size if isinstance(g, GradientVector) else 0
    return GradientVector(values=total / len(chosen), batch_size=batch)


def global_update(weights: np.ndarray, global_gradient: GradientVector | np.ndarray, eta: float) -> np.ndarray:
    if not eta > 0:
        raise InvalidArgumentError(f"learning rate must be > 0, got {eta}")
    g = global_gradient.values if isinstance(global_gradient, GradientVector) else np.asarray(global_gradient)
    return np.asarray(weights, dtype=np.float64) - eta * g


def evaluate(model: Model, weights: np.ndarray, dataset: Dataset, index_list) -> tuple[float, float]:
    idx = np.asarray(index_list, dtype=np.int64)
    if idx.size == 0:
        raise InvalidArgumentError("evaluate needs a nonempty index list")
    logits = model.logits(weights, dataset.features[idx])
    labels = dataset.labels[idx]
    loss = cross_entropy_loss(logits, labels)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, accuracy


def initial_train_loss(dataset: Dataset, partition: ClientPartition, config: TrainConfig) -> float:
    """Global training loss of the freshly initialized model (the loss gap used by the bound)."""
    model = build_model(config.model, dataset.feature_dim, dataset.num_classes, config.hidden_units)
    weights = model.init_params(np.random.default_rng(config.rng_seed))
    return evaluate(model, weights, dataset, partition.global_train_indices())[0]


def _client_rng(seed: int, round_tag: int, client: int) -> np.random.Generator:
    return np.random.default_rng([seed, round_tag, client])


def run_training(dataset: Dataset, partition: ClientPartition, decisions: Sequence[RoundDecision],
                 config: TrainConfig, profiles: Sequence[ClientProfile], channel: ChannelState,
                 phi: Sequence[float] | np.ndarray) -> TrainingResult:
    """Execute one decision per round and record loss, accuracy and cost trajectories.

    Budgets are not enforced here; decisions are certified by the optimizer.
    """
    if len(decisions) < config.num_rounds:
        raise InvalidArgumentError(f"{len(decisions)} decisions for {config.num_rounds} rounds")
    if partition.num_clients != len(profiles):
        raise InvalidArgumentError(f"partition has {partition.num_clients} clients, profiles {len(profiles)}")
    phi = np.asarray(phi, dtype=np.float64)
    model = build_model(config.model, dataset.feature_dim, dataset.num_classes, config.hidden_units)
    state = ModelState(weights=model.init_params(np.random.default_rng(config.rng_seed)))
    train_all = partition.global_train_indices()
    test_all = partition.global_test_indices()
    initial_train_loss, _ = evaluate(model, state.weights, dataset, train_all)

    def client_pass(n: int, round_tag: int, lam: float, v: np.ndarray | None):
        rng = _client_rng(config.rng_seed, round_tag, n)
        batch = rng.choice(partition.train_indices[n], size=config.batch_size, replace=True)
        if v is None:
            mask = np.ones(state.num_params, dtype=np.int8)
        else:
            mask = prune_mask(importance_scores(v, state.weights), lam)
        grad = local_gradient(model, state.weights, mask, dataset.features[batch], dataset.labels[batch])
        return mask, grad

    def run_clients(active: np.ndarray, round_tag: int, lam: np.ndarray, v: np.ndarray | None):
        clients = np.flatnonzero(active).tolist()
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                outputs = list(pool.map(lambda n: client_pass(n, round_tag, lam[n], v), clients))
        else:
            outputs = [client_pass(n, round_tag, lam[n], v) for n in clients]
        return dict(zip(clients, outputs))

    # warm-up pass seeds the importance scores of round 0
    everyone = np.ones(partition.num_clients, dtype=np.int64)
    warm = run_clients(everyone, 0, np.zeros(partition.num_clients), None)
    v = aggregate([warm[n][1] for n in range(partition.num_clients)], everyone).values

    metrics: list[RoundMetrics] = []
    costs: list[CostReport] = []
    report = None
    for s in range(config.num_rounds):
        decision = decisions[s]
        outputs = run_clients(decision.selected, s + 1, decision.lam, v)
        grads = [outputs[n][1] if n in outputs else None for n in range(partition.num_clients)]
        state.masks = {n: out[0] for n, out in outputs.items()}

        norm_w = float(state.weights @ state.weights)
        pruned_mass = [float(np.sum(state.weights[out[0] == 0] ** 2)) for out in outputs.values()]
        pruning_level = float(np.mean(pruned_mass) / norm_w) if norm_w > 0 else 0.0

        g = aggregate(grads, decision.selected)
        state.weights = global_update(state.weights, g, config.learning_rate)
        v = g.values

        grad_norm_sq = float(v @ v)
        train_idx = np.sort(np.concatenate([partition.train_indices[n] for n in outputs]))
        train_loss, _ = evaluate(model, state.weights, dataset, train_idx)
        test_loss, test_acc = evaluate(model, state.weights, dataset, test_all)
        report = round_costs(decision, profiles, channel, previous=report)
        costs.append(report)
        metrics.append(RoundMetrics(
            round=s,
            selected_count=decision.num_selected,
            mean_lambda=float(decision.lam[decision.selected].mean()),
            cum_energy_J=report.cumulative_energy,
            cum_delay_s=report.cumulative_delay,
            round_energy_J=report.round_energy,
            round_delay_s=report.round_delay,
            train_loss=train_loss,
            test_loss=test_loss,
            test_acc=test_acc,
            grad_norm_sq=grad_norm_sq,
            gen_gap_diag=gen_gap_step_bound(decision.a, phi, config.learning_rate, grad_norm_sq),
            pruning_level=pruning_level,
        ))
        logger.debug(f"Round {s}: train {train_loss:.4f} test {test_loss:.4f} acc {test_acc:.3f} "
                     f"energy {report.cumulative_energy:.4g} J delay {report.cumulative_delay:.4g} s")

    logger.info(f"Training finished after {config.num_rounds} rounds: "
                f"test acc {metrics[-1].test_acc:.3f}, train loss {metrics[-1].train_loss:.4f}")
    return TrainingResult(metrics=metrics, state=state, initial_train_loss=initial_train_loss, costs=costs)
