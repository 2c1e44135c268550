"""Per-client delay / energy terms and their per-round aggregation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptySelectionError, InvalidDecisionError
from .wireless import (ChannelState, ClientProfile, ProfileArrays, ProfileLike,
                       scalar_or_array, downlink_rate, stack_profiles, uplink_rate)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoundDecision:
    """Selection, pruning ratio, transmit power and CPU frequency per client."""

    a: np.ndarray
    lam: np.ndarray
    p: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.int64)
        lam = np.array(self.lam, dtype=np.float64)
        p = np.array(self.p, dtype=np.float64)
        f = np.array(self.f, dtype=np.float64)
        if not (a.ndim == 1 and a.shape == lam.shape == p.shape == f.shape):
            raise InvalidDecisionError(
                f"decision vectors must share one length, got {a.shape}, {lam.shape}, {p.shape}, {f.shape}"
            )
        for name, arr in (("a", a), ("lam", lam), ("p", p), ("f", f)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_clients(self) -> int:
        return int(self.a.shape[0])

    @property
    def selected(self) -> np.ndarray:
        return self.a.astype(bool)

    @property
    def num_selected(self) -> int:
        return int(self.a.sum())

    def validate(self, profiles: Sequence[ClientProfile] | ProfileArrays, lambda_max: float) -> "RoundDecision":
        arrays = profiles if isinstance(profiles, ProfileArrays) else stack_profiles(profiles)
        if len(arrays) != self.num_clients:
            raise InvalidDecisionError(f"decision covers {self.num_clients} clients, profiles {len(arrays)}")
        if not 0 <= lambda_max < 1:
            raise InvalidDecisionError(f"lambda_max must lie in [0, 1), got {lambda_max}")
        if np.any((self.a != 0) & (self.a != 1)):
            raise InvalidDecisionError(f"selection must be binary, got {self.a.tolist()}")
        if self.num_selected < 1:
            raise EmptySelectionError("at least one client must be selected")
        tol = 1e-12
        checks = (
            ("lam", self.lam, 0.0, lambda_max),
            ("p", self.p, 0.0, arrays.p_max),
            ("f", self.f, 0.0, arrays.f_max),
        )
        for name, values, lo, hi in checks:
            bad = np.flatnonzero((values < lo - tol) | (values > np.asarray(hi) * (1 + tol)) | ~np.isfinite(values))
            if bad.size:
                raise InvalidDecisionError(f"{name} out of range for clients {bad.tolist()}: {values[bad].tolist()}")
        return self


@dataclass(frozen=True)
class CostReport:
    comp_delay: np.ndarray
    comm_delay: np.ndarray
    comp_energy: np.ndarray
    upload_energy: np.ndarray
    broadcast_energy: float
    round_delay: float
    round_energy: float
    cumulative_delay: float
    cumulative_energy: float
    rounds: int = 1

    @property
    def client_delay(self) -> np.ndarray:
        return self.comp_delay + self.comm_delay


@dataclass(frozen=True)
class AffineCosts:
    """energy_n = (1 - lam_n) X_n and delay_n = (1 - lam_n) Y_n + D_n at fixed (p, f)."""

    energy_coef: np.ndarray
    delay_coef: np.ndarray
    delay_const: np.ndarray


def comp_delay(lam, f, profile: ProfileLike):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0):
        raise InvalidDecisionError("CPU frequency must be > 0 for a selected client")
    work = profile.batch_size * profile.flops_per_sample
    return scalar_or_array((1.0 - np.asarray(lam)) * work / (f * profile.flops_per_cycle))


def _uplink_delay(lam, p, profile: ProfileLike, channel: ChannelState):
    lam = np.asarray(lam, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    payload = (1.0 - lam) * profile.gradient_bits
    if np.any((p <= 0) & (payload > 0)):
        raise InvalidDecisionError("transmit power must be > 0 while there is payload to upload")
    rate = np.asarray(uplink_rate(np.maximum(p, 0.0), profile, channel))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(payload > 0, payload / rate, 0.0)


def downlink_delay(profile: ProfileLike, channel: ChannelState):
    rate = np.asarray(downlink_rate(profile.client_id, channel))
    with np.errstate(divide="ignore"):
        return scalar_or_array(np.where(rate > 0, profile.gradient_bits / np.where(rate > 0, rate, 1.0), np.inf))


def comm_delay(lam, p, profile: ProfileLike, channel: ChannelState):
    """Pruned uplink plus the full-size downlink broadcast."""
    up = _uplink_delay(lam, p, profile, channel)
    return scalar_or_array(up + np.asarray(downlink_delay(profile, channel)))


def comp_energy(lam, f, profile: ProfileLike):
    f = np.asarray(f, dtype=np.float64)
    work = profile.batch_size * profile.flops_per_sample
    return scalar_or_array(
        (1.0 - np.asarray(lam)) * profile.pue * profile.switch_cap * f ** 2 * work / profile.flops_per_cycle
    )


def upload_energy(lam, p, profile: ProfileLike, channel: ChannelState):
    up = _uplink_delay(lam, p, profile, channel)
    return scalar_or_array(np.asarray(p, dtype=np.float64) * up)


def broadcast_energy(profiles: Sequence[ClientProfile] | ProfileArrays, channel: ChannelState) -> float:
    """Server power times the slowest broadcast over ALL clients."""
    arrays = profiles if isinstance(profiles, ProfileArrays) else stack_profiles(profiles)
    return float(channel.server_power * np.max(downlink_delay(arrays, channel)))


def round_costs(decision: RoundDecision, profiles: Sequence[ClientProfile] | ProfileArrays,
                channel: ChannelState, previous: CostReport | None = None) -> CostReport:
    arrays = profiles if isinstance(profiles, ProfileArrays) else stack_profiles(profiles)
    if len(arrays) != decision.num_clients:
        raise InvalidDecisionError(f"decision covers {decision.num_clients} clients, profiles {len(arrays)}")
    sel = decision.selected
    if not sel.any():
        raise EmptySelectionError("round_costs needs at least one selected client")

    n = decision.num_clients
    comp_d, comm_d, comp_e, up_e = (np.zeros(n) for _ in range(4))
    chosen = _subset(arrays, sel)
    lam, p, f = decision.lam[sel], decision.p[sel], decision.f[sel]
    comp_d[sel] = comp_delay(lam, f, chosen)
    comm_d[sel] = comm_delay(lam, p, chosen, channel)
    comp_e[sel] = comp_energy(lam, f, chosen)
    up_e[sel] = upload_energy(lam, p, chosen, channel)

    bcast = broadcast_energy(arrays, channel)
    round_delay = float(np.max((comp_d + comm_d)[sel]))
    round_energy = float(np.sum(comp_e + up_e) + bcast)
    cum_delay = round_delay + (previous.cumulative_delay if previous else 0.0)
    cum_energy = round_energy + (previous.cumulative_energy if previous else 0.0)
    return CostReport(
        comp_delay=comp_d, comm_delay=comm_d, comp_energy=comp_e, upload_energy=up_e,
        broadcast_energy=bcast, round_delay=round_delay, round_energy=round_energy,
        cumulative_delay=cum_delay, cumulative_energy=cum_energy,
        rounds=(previous.rounds + 1) if previous else 1,
    )


def affine_costs(p, f, profiles: Sequence[ClientProfile] | ProfileArrays, channel: ChannelState) -> AffineCosts:
    """Coefficients of the per-client costs as affine functions of (1 - lam)."""
    arrays = profiles if isinstance(profiles, ProfileArrays) else stack_profiles(profiles)
    zeros = np.zeros(len(arrays))
    p = np.asarray(p, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    energy = np.asarray(comp_energy(zeros, f, arrays)) + np.asarray(upload_energy(zeros, p, arrays, channel))
    delay = np.asarray(comp_delay(zeros, f, arrays)) + np.asarray(_uplink_delay(zeros, p, arrays, channel))
    return AffineCosts(energy_coef=energy, delay_coef=delay,
                       delay_const=np.asarray(downlink_delay(arrays, channel), dtype=np.float64))


def _subset(arrays: ProfileArrays, mask: np.ndarray) -> ProfileArrays:
    return ProfileArrays(**{name: getattr(arrays, name)[mask] for name in arrays.__dataclass_fields__})
