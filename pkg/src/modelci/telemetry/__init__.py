from modelci.telemetry.providers import (
    DeviceSnapshot,
    DeviceStats,
    HostProvider,
    InstanceStats,
    SyntheticProvider,
)
from modelci.telemetry.sampler import Telemetry

__all__ = [
    "DeviceSnapshot",
    "DeviceStats",
    "HostProvider",
    "InstanceStats",
    "SyntheticProvider",
    "Telemetry",
]
