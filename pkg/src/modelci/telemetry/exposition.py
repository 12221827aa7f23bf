"""Plain-text metrics exposition so off-the-shelf scrapers can consume us.

Output follows the de-facto exposition format: ``# HELP``/``# TYPE``
comment lines followed by ``name{label="value"} number`` samples.
"""

from __future__ import annotations

from typing import Iterable, Optional

from modelci.telemetry.providers import DeviceSnapshot, InstanceStats


def _escape_label(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _fmt(value: float) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _sample(name: str, labels: dict[str, str], value) -> str:
    if labels:
        inner = ",".join(f'{k}="{_escape_label(v)}"' for k, v in sorted(labels.items()))
        return f"{name}{{{inner}}} {_fmt(value)}"
    return f"{name} {_fmt(value)}"


def render_exposition(snapshot: Optional[DeviceSnapshot],
                      instance_stats: Iterable[InstanceStats] = ()) -> str:
    lines: list[str] = []

    def header(name: str, help_text: str, kind: str = "gauge"):
        lines.append(f"# HELP {name} {help_text}")
        lines.append(f"# TYPE {name} {kind}")

    header("device_utilization", "Device compute utilization fraction.")
    if snapshot:
        for device, stats in sorted(snapshot.devices.items()):
            lines.append(_sample("device_utilization", {"device": device}, stats.utilization))
    header("device_memory_used_bytes", "Device memory in use.")
    if snapshot:
        for device, stats in sorted(snapshot.devices.items()):
            lines.append(_sample("device_memory_used_bytes", {"device": device}, stats.memory_used))
    header("device_memory_total_bytes", "Device memory capacity.")
    if snapshot:
        for device, stats in sorted(snapshot.devices.items()):
            lines.append(_sample("device_memory_total_bytes", {"device": device}, stats.memory_total))
    header("telemetry_snapshot_stale", "1 when the last provider sample failed.")
    lines.append(_sample("telemetry_snapshot_stale", {}, 1 if snapshot and snapshot.stale else 0))
    if snapshot:
        header("telemetry_snapshot_timestamp_seconds", "Wall-clock time of the last sample.")
        lines.append(_sample("telemetry_snapshot_timestamp_seconds", {}, snapshot.timestamp))

    stats_list = list(instance_stats)
    if stats_list:
        header("instance_cpu_fraction", "Instance CPU use as a fraction of machine capacity.")
        for s in sorted(stats_list, key=lambda s: s.instance_id):
            lines.append(_sample("instance_cpu_fraction", {"instance": s.instance_id}, s.cpu_fraction))
        header("instance_memory_bytes", "Instance resident memory.")
        for s in sorted(stats_list, key=lambda s: s.instance_id):
            lines.append(_sample("instance_memory_bytes", {"instance": s.instance_id}, s.memory_bytes))
        header("instance_net_rx_bytes", "Instance cumulative read bytes.", "counter")
        for s in sorted(stats_list, key=lambda s: s.instance_id):
            lines.append(_sample("instance_net_rx_bytes", {"instance": s.instance_id}, s.net_rx_bytes))
        header("instance_net_tx_bytes", "Instance cumulative written bytes.", "counter")
        for s in sorted(stats_list, key=lambda s: s.instance_id):
            lines.append(_sample("instance_net_tx_bytes", {"instance": s.instance_id}, s.net_tx_bytes))
    return "\n".join(lines) + "\n"
