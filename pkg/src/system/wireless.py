"""FDMA uplink / multicast downlink channel model.

Gains are drawn once per run and never change afterwards. Rate functions
accept either a single ``ClientProfile`` or a ``ProfileArrays`` stack, so the
same formulas serve the per-client API and the vectorized optimizer.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import Sequence, Union

import numpy as np

from ..errors import InvalidArgumentError

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass(frozen=True)
class ClientProfile:
    client_id: int
    uplink_bandwidth: float  # Hz
    gradient_bits: float
    flops_per_sample: float
    flops_per_cycle: float
    pue: float
    switch_cap: float  # J s^2
    f_max: float  # Hz
    p_max: float  # W
    batch_size: int

    def __post_init__(self):
        if self.client_id < 0:
            raise InvalidArgumentError(f"client_id must be >= 0, got {self.client_id}")
        for f in fields(self):
            if f.name == "client_id":
                continue
            value = getattr(self, f.name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"client {self.client_id}: {f.name} must be positive, got {value}")


@dataclass(frozen=True)
class ProfileArrays:
    """Column view of a list of profiles; attribute names match ``ClientProfile``."""

    client_id: np.ndarray
    uplink_bandwidth: np.ndarray
    gradient_bits: np.ndarray
    flops_per_sample: np.ndarray
    flops_per_cycle: np.ndarray
    pue: np.ndarray
    switch_cap: np.ndarray
    f_max: np.ndarray
    p_max: np.ndarray
    batch_size: np.ndarray

    def __len__(self) -> int:
        return int(self.client_id.shape[0])


def stack_profiles(profiles: Sequence[ClientProfile]) -> ProfileArrays:
    if not profiles:
        raise InvalidArgumentError("need at least one client profile")
    columns = {}
    for f in fields(ClientProfile):
        dtype = np.int64 if f.name in ("client_id", "batch_size") else np.float64
        column = np.array([getattr(p, f.name) for p in profiles], dtype=dtype)
        column.setflags(write=False)
        columns[f.name] = column
    return ProfileArrays(**columns)


ProfileLike = Union[ClientProfile, ProfileArrays]


@dataclass(frozen=True)
class ChannelState:
    uplink_gain: np.ndarray
    downlink_gain: np.ndarray
    noise_psd: float  # W/Hz
    client_noise_psd: np.ndarray  # W/Hz
    downlink_bandwidth: float  # Hz
    server_power: float  # W

    def __post_init__(self):
        up = np.array(self.uplink_gain, dtype=np.float64)
        down = np.array(self.downlink_gain, dtype=np.float64)
        psd = np.array(self.client_noise_psd, dtype=np.float64)
        if up.ndim != 1 or up.shape != down.shape or up.shape != psd.shape:
            raise InvalidArgumentError(
                f"gain / psd vectors must share one length, got {up.shape}, {down.shape}, {psd.shape}"
            )
        if np.any(up < 0) or np.any(down < 0):
            raise InvalidArgumentError("channel gains must be nonnegative")
        if not self.noise_psd > 0 or np.any(psd <= 0):
            raise InvalidArgumentError("noise PSDs must be positive")
        if not self.downlink_bandwidth > 0:
            raise InvalidArgumentError(f"downlink_bandwidth must be > 0, got {self.downlink_bandwidth}")
        if not self.server_power > 0:
            raise InvalidArgumentError(f"server_power must be > 0, got {self.server_power}")
        for name, arr in (("uplink_gain", up), ("downlink_gain", down), ("client_noise_psd", psd)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_clients(self) -> int:
        return int(self.uplink_gain.shape[0])


@dataclass(frozen=True)
class HardwareSpec:
    """Per-client hardware and payload numbers shared by a preset."""

    gradient_bits: float
    flops_per_sample: float
    uplink_bandwidth: float
    f_max: float
    p_max: float
    flops_per_cycle: float
    pue: float
    switch_caps: tuple[float, ...]
    batch_size: int = 32


def build_profiles(spec: HardwareSpec, num_clients: int, p_cap: float | None = None) -> list[ClientProfile]:
    """One profile per client, cycling ``spec.switch_caps`` when there are more clients than values."""
    if num_clients < 1:
        raise InvalidArgumentError(f"num_clients must be >= 1, got {num_clients}")
    if not spec.switch_caps:
        raise InvalidArgumentError("switch_caps must not be empty")
    if p_cap is not None and spec.p_max > p_cap:
        raise InvalidArgumentError(f"p_max {spec.p_max} W exceeds the system cap {p_cap} W")
    return [
        ClientProfile(
            client_id=n,
            uplink_bandwidth=spec.uplink_bandwidth,
            gradient_bits=spec.gradient_bits,
            flops_per_sample=spec.flops_per_sample,
            flops_per_cycle=spec.flops_per_cycle,
            pue=spec.pue,
            switch_cap=spec.switch_caps[n % len(spec.switch_caps)],
            f_max=spec.f_max,
            p_max=spec.p_max,
            batch_size=spec.batch_size,
        )
        for n in range(num_clients)
    ]


def sample_channels(num_clients: int, avg_path_loss: float, rng_seed: int, psd: float,
                    downlink_bw: float, server_power: float,
                    client_psd: float | None = None) -> ChannelState:
    """Rayleigh block fading: power gain = path loss x Exp(1), one draw per client per direction."""
    if num_clients < 1:
        raise InvalidArgumentError(f"num_clients must be >= 1, got {num_clients}")
    if avg_path_loss < 0:
        raise InvalidArgumentError(f"avg_path_loss must be >= 0, got {avg_path_loss}")
    rng = np.random.default_rng(rng_seed)
    uplink = avg_path_loss * rng.exponential(1.0, size=num_clients)
    downlink = avg_path_loss * rng.exponential(1.0, size=num_clients)
    client_psd = psd if client_psd is None else client_psd
    logger.debug(f"Sampled channels for {num_clients} clients (path loss {avg_path_loss:g}, seed {rng_seed})")
    return ChannelState(
        uplink_gain=uplink,
        downlink_gain=downlink,
        noise_psd=psd,
        client_noise_psd=np.full(num_clients, client_psd, dtype=np.float64),
        downlink_bandwidth=downlink_bw,
        server_power=server_power,
    )


def scalar_or_array(value):
    value = np.asarray(value, dtype=np.float64)
    return float(value) if value.ndim == 0 else value


def uplink_snr(p, profile: ProfileLike, channel: ChannelState):
    h = channel.uplink_gain[profile.client_id]
    return np.asarray(p, dtype=np.float64) * h / (profile.uplink_bandwidth * channel.noise_psd)


def uplink_rate(p, profile: ProfileLike, channel: ChannelState):
    """c log2(1 + p h / (c U0)) in bit/s."""
    if np.any(np.asarray(p) < 0):
        raise InvalidArgumentError("transmit power must be >= 0")
    snr = uplink_snr(p, profile, channel)
    return scalar_or_array(profile.uplink_bandwidth * np.log1p(snr) / LN2)


def downlink_rate(profile_id, channel: ChannelState):
    h = channel.downlink_gain[profile_id]
    snr = channel.server_power * h / (channel.downlink_bandwidth * channel.client_noise_psd[profile_id])
    return scalar_or_array(channel.downlink_bandwidth * np.log1p(snr) / LN2)
