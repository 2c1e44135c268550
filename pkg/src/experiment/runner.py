"""Seed x scheme experiment runs and one-axis sweeps."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import pandas as pd

from ..analysis.bound import BoundConstants, derive_constants
from ..analysis.generalization import check_finite_phi, client_statements, normalize_phi
from ..data.datasets import ClientPartition, Dataset, generate_synthetic, partition_dirichlet
from ..data.idx_loader import load_idx
from ..decision.optimizer import OptimizationResult, SCAState, SelectionState, TraceRow
from ..decision.schemes import run_scheme
from ..errors import InvalidArgumentError
from ..execution.fedsim import TrainConfig, TrainingResult, initial_train_loss, run_training
from ..feedback.recorder import RunRecord, RunRecorder, RunSummary
from ..system.wireless import ChannelState, ClientProfile, build_profiles, sample_channels
from .config import SWEEP_AXES, ExperimentConfig

logger = logging.getLogger(__name__)

BUDGET_TOL = 1e-6


@dataclass(frozen=True)
class SeedContext:
    """Everything shared by the schemes of one seed."""

    seed: int
    dataset: Dataset
    partition: ClientPartition
    raw_phi: np.ndarray
    phi: np.ndarray
    profiles: list[ClientProfile]
    channel: ChannelState
    constants: BoundConstants
    train_config: TrainConfig


@dataclass
class RunOutcome:
    summary: RunSummary
    records: list[RunRecord]
    result: OptimizationResult
    training: TrainingResult
    phi_dispersion: float


@dataclass
class ExperimentResult:
    outcomes: list[RunOutcome]

    @property
    def summaries(self) -> list[RunSummary]:
        return [o.summary for o in self.outcomes]

    @property
    def all_feasible(self) -> bool:
        return all(o.summary.feasible for o in self.outcomes)

    @property
    def exit_status(self) -> int:
        return 0 if self.outcomes and self.all_feasible else 1


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    ds = cfg.dataset
    if ds.kind == "idx":
        return load_idx(ds.images_path, ds.labels_path)
    return generate_synthetic(ds.num_samples, ds.feature_dim, ds.num_classes, ds.class_separation, ds.seed)


def prepare_seed(cfg: ExperimentConfig, dataset: Dataset, seed: int) -> SeedContext:
    partition = partition_dirichlet(dataset, cfg.partition_config(seed))
    statements = client_statements(dataset, partition, cfg.partition.smoothing_eps)
    raw_phi = check_finite_phi([s.phi for s in statements])
    phi = normalize_phi(raw_phi) if cfg.bound.normalize_phi else raw_phi
    logger.info(f"Seed {seed}: phi in [{raw_phi.min():.4g}, {raw_phi.max():.4g}], std {raw_phi.std():.4g}")

    profiles = build_profiles(cfg.hardware, cfg.partition.num_clients, p_cap=cfg.channel.power_cap)
    channel = sample_channels(
        cfg.partition.num_clients, cfg.channel.path_loss, seed, cfg.channel.noise_psd,
        cfg.downlink_bandwidth, cfg.channel.server_power, client_psd=cfg.channel.client_noise_psd,
    )
    train_config = cfg.train_config(seed)
    loss_gap = cfg.bound.loss_gap
    if loss_gap is None:
        loss_gap = initial_train_loss(dataset, partition, train_config)
    constants = derive_constants(cfg.bound_inputs(loss_gap))
    return SeedContext(seed, dataset, partition, raw_phi, phi, profiles, channel, constants, train_config)


def _records(scheme: str, seed: int, theta: float, training: TrainingResult) -> list[RunRecord]:
    return [
        RunRecord(
            round=m.round,
            scheme=scheme,
            seed=seed,
            selected_count=int(m.selected_count),
            mean_lambda=float(m.mean_lambda),
            cum_energy_J=float(m.cum_energy_J),
            cum_delay_s=float(m.cum_delay_s),
            train_loss=float(m.train_loss),
            test_loss=float(m.test_loss),
            test_acc=float(m.test_acc),
            theta=float(theta),
            gen_gap_diag=float(m.gen_gap_diag),
        )
        for m in training.metrics
    ]


def run_one(cfg: ExperimentConfig, ctx: SeedContext, scheme: str,
            recorder: RunRecorder, trace: bool = False) -> RunOutcome:
    budget = cfg.budget_limits()
    result = run_scheme(scheme, ctx.profiles, ctx.channel, ctx.phi, ctx.constants, budget,
                        base=cfg.optimizer_options(), fixed_power=cfg.optimizer.fixed_power)
    training = run_training(ctx.dataset, ctx.partition, result.decisions, ctx.train_config,
                            ctx.profiles, ctx.channel, ctx.raw_phi)

    last = training.metrics[-1]
    within_budget = (last.cum_energy_J <= budget.total_energy * (1 + BUDGET_TOL)
                     and last.cum_delay_s <= budget.total_delay * (1 + BUDGET_TOL))
    if not within_budget:
        logger.warning(f"{scheme} seed {ctx.seed} exceeded the budget: {last.cum_energy_J:.4g} J "
                       f"(limit {budget.total_energy:g}), {last.cum_delay_s:.4g} s (limit {budget.total_delay:g})")

    records = _records(scheme, ctx.seed, result.theta, training)
    summary = RunSummary(
        scheme=scheme,
        seed=ctx.seed,
        final_test_acc=float(last.test_acc),
        final_test_loss=float(last.test_loss),
        total_energy_J=float(last.cum_energy_J),
        total_delay_s=float(last.cum_delay_s),
        theta=float(result.theta),
        selected_mean=float(np.mean([m.selected_count for m in training.metrics])),
        feasible=bool(result.feasible and within_budget),
    )
    recorder.write_records(records, scheme, ctx.seed)
    if trace:
        recorder.write_trace(result.trace, TraceRow, scheme, ctx.seed)
        recorder.write_trace(result.sca_trace, SCAState, scheme, ctx.seed, kind="sca")
        recorder.write_trace(result.selection_trace, SelectionState, scheme, ctx.seed, kind="selection")
    recorder.persist_run(records, summary)
    logger.info(f"Run {scheme} seed {ctx.seed} finished: acc {summary.final_test_acc:.3f}, "
                f"energy {summary.total_energy_J:.4g} J, delay {summary.total_delay_s:.4g} s")
    return RunOutcome(summary, records, result, training, float(ctx.raw_phi.std()))


def run(cfg: ExperimentConfig, recorder: RunRecorder, trace: bool = False) -> ExperimentResult:
    """Every seed x scheme pair, written to one records CSV each plus summary.csv."""
    dataset = build_dataset(cfg)
    contexts = {seed: prepare_seed(cfg, dataset, seed) for seed in cfg.run.seeds}
    jobs = [(seed, scheme) for seed in cfg.run.seeds for scheme in cfg.run.schemes]
    logger.info(f"Starting {len(jobs)} run(s) with {cfg.run.workers} worker(s)")

    def job(item):
        seed, scheme = item
        return run_one(cfg, contexts[seed], scheme, recorder, trace)

    if cfg.run.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.run.workers) as pool:
            outcomes = list(pool.map(job, jobs))
    else:
        outcomes = [job(item) for item in jobs]

    result = ExperimentResult(outcomes)
    recorder.write_summaries(result.summaries)
    if not result.all_feasible:
        logger.warning("At least one run ended with an infeasible or over-budget decision")
    return result


def with_axis_value(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "sigma":
        return replace(cfg, partition=replace(cfg.partition, sigma=value))
    if axis == "E0":
        return replace(cfg, budget=replace(cfg.budget, energy=value))
    if axis == "T0":
        return replace(cfg, budget=replace(cfg.budget, delay=value))
    raise InvalidArgumentError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")


def sweep(cfg: ExperimentConfig, axis: str, values: Sequence[float], recorder: RunRecorder,
          trace: bool = False) -> tuple[list[dict], int]:
    """One run() per value; returns the sweep rows and the combined exit status."""
    if axis not in SWEEP_AXES:
        raise InvalidArgumentError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    values = [float(v) for v in values]
    if not values:
        raise InvalidArgumentError("sweep needs at least one value")
    bad = [v for v in values if not v > 0]
    if bad:
        raise InvalidArgumentError(f"sweep values must be positive, got {bad}")

    rows: list[dict] = []
    status = 0
    for value in values:
        logger.info(f"Sweep {axis}={value:g}")
        result = run(with_axis_value(cfg, axis, value), recorder.child(f"{axis}_{value:g}"), trace)
        status = max(status, result.exit_status)
        frame = pd.DataFrame({
            "scheme": [o.summary.scheme for o in result.outcomes],
            "acc": [o.summary.final_test_acc for o in result.outcomes],
            "phi_std": [o.phi_dispersion for o in result.outcomes],
        })
        grouped = frame.groupby("scheme", sort=False).agg(
            runs=("acc", "size"), acc_mean=("acc", "mean"),
            acc_std=("acc", lambda s: float(np.std(s))), phi_dispersion=("phi_std", "mean"),
        )
        for scheme, agg in grouped.iterrows():
            rows.append({"axis": axis, "value": value, "scheme": scheme, "runs": int(agg["runs"]),
                         "acc_mean": float(agg["acc_mean"]), "acc_std": float(agg["acc_std"]),
                         "phi_dispersion": float(agg["phi_dispersion"])})
    recorder.write_sweep(rows)
    return rows, status
