import numpy as np
import pytest

from src.data.datasets import PartitionConfig, generate_synthetic, partition_dirichlet
from src.experiment.presets import MNIST_LENET, NOISE_PSD, SERVER_POWER
from src.system.wireless import ChannelState, build_profiles


def make_channel(num_clients, gain=1e-5, bandwidth=1e5):
    """Deterministic channel: every uplink and downlink gain equals ``gain``."""
    return ChannelState(
        uplink_gain=np.full(num_clients, gain),
        downlink_gain=np.full(num_clients, gain),
        noise_psd=NOISE_PSD,
        client_noise_psd=np.full(num_clients, NOISE_PSD),
        downlink_bandwidth=bandwidth,
        server_power=SERVER_POWER,
    )


@pytest.fixture
def mnist_profiles():
    return build_profiles(MNIST_LENET, 10)


@pytest.fixture
def flat_channel():
    return make_channel(10)


@pytest.fixture
def small_dataset():
    return generate_synthetic(400, 5, 4, 4.0, rng_seed=1)


@pytest.fixture
def small_partition(small_dataset):
    return partition_dirichlet(small_dataset, PartitionConfig(num_clients=4, dirichlet_sigma=5.0, rng_seed=2))


@pytest.fixture
def channel_factory():
    return make_channel
