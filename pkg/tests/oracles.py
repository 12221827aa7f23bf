"""Independent brute-force reimplementations used as test oracles.

These stay deliberately naive (linear scans, double loops) and share no
code with the implementations they check.
"""

from __future__ import annotations

import math


def percentile_bruteforce(samples, p):
    """Nearest-rank by literal definition: sort, take 1-based ceil(p*n/100)."""
    ordered = sorted(samples)
    n = len(ordered)
    # exact ceil via integer arithmetic: works for integer p
    assert int(p) == p
    p = int(p)
    idx = -((-p * n) // 100)  # ceil(p*n/100)
    return ordered[idx - 1]


def peak_throughput_bruteforce(completions_ms, batch_size, window_ms=1000):
    """O(n^2) sliding-window max; half-open windows anchored at completions."""
    ts = sorted(completions_ms)
    duration = ts[-1]
    if duration < window_ms:
        return len(ts) * batch_size * 1000 / duration
    best = 0
    for start in ts:
        count = 0
        for t in ts:
            if start <= t < start + window_ms:
                count += 1
        best = max(best, count)
    return best * batch_size * 1000 / window_ms


def mean_bruteforce(values):
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def max_bruteforce(values):
    best = None
    for v in values:
        if best is None or v > best:
            best = v
    return best


def filter_records_bruteforce(records, name=None, framework=None, task=None, status=None):
    """Linear scan over every record, applying each supplied filter."""
    out = []
    for r in records:
        if name is not None and r.name != name:
            continue
        if framework is not None and r.framework != framework:
            continue
        if task is not None and r.task != task:
            continue
        if status is not None and r.status != status:
            continue
        out.append(r)
    return sorted(out, key=lambda r: (r.name, r.version))
