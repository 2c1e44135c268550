"""Named experiment presets.

Hardware numbers describe LeNet-on-MNIST and ResNet-on-CIFAR-10 devices;
datasets are synthetic stand-ins sized for a desktop run.
"""
from ..system.wireless import HardwareSpec

MNIST_SWITCH_CAPS = (0.88, 0.84, 1.41, 1.33, 0.94, 1.37, 1.8, 1.01, 0.26, 0.96)

MNIST_LENET = HardwareSpec(
    gradient_bits=1.42e6,
    flops_per_sample=1.8e6,
    uplink_bandwidth=1e5,
    f_max=5e8,
    p_max=0.5,
    flops_per_cycle=4,
    pue=1.0,
    switch_caps=tuple(v * 1e-27 for v in MNIST_SWITCH_CAPS),
    batch_size=32,
)

CIFAR_RESNET = HardwareSpec(
    gradient_bits=21.07e6,
    flops_per_sample=0.59e9,
    uplink_bandwidth=2e6,
    f_max=2e9,
    p_max=0.5,
    flops_per_cycle=8,
    pue=1.0,
    switch_caps=tuple(v * 1e-28 for v in MNIST_SWITCH_CAPS),
    batch_size=32,
)

NOISE_PSD = 3.98e-21  # W/Hz
PATH_LOSS = 1e-5
SERVER_POWER = 0.5  # W
SYSTEM_POWER_CAP = 0.5  # W


def _hardware_keys(spec: HardwareSpec) -> dict:
    return {
        "hardware.gradient_bits": spec.gradient_bits,
        "hardware.flops_per_sample": spec.flops_per_sample,
        "hardware.uplink_bandwidth": spec.uplink_bandwidth,
        "hardware.f_max": spec.f_max,
        "hardware.p_max": spec.p_max,
        "hardware.flops_per_cycle": spec.flops_per_cycle,
        "hardware.pue": spec.pue,
        "hardware.switch_caps": spec.switch_caps,
        "hardware.batch_size": spec.batch_size,
    }


# Overrides applied on top of the ExperimentConfig defaults (which are the desk preset).
PRESETS: dict[str, dict] = {
    "desk": {},
    "mnist-lenet": {
        **_hardware_keys(MNIST_LENET),
        "dataset.num_samples": 5000,
        "dataset.feature_dim": 784,
        "dataset.class_separation": 3.0,
        "optimizer.lambda_max": 0.5,
        "budget.energy": 250.0,
        "budget.delay": 150.0,
    },
    "cifar-resnet": {
        **_hardware_keys(CIFAR_RESNET),
        "dataset.num_samples": 5000,
        "dataset.feature_dim": 512,
        "dataset.class_separation": 2.0,
        "train.model": "mlp",
        "optimizer.lambda_max": 0.7,
        "budget.energy": 7100.0,
        "budget.delay": 3600.0,
    },
}
