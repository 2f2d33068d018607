"""Worker-count policy shared by the compute modules."""

import os

ENV_VAR = "SADDLESCOPE_THREADS"


def worker_count() -> int:
    """Number of workers allowed; ``SADDLESCOPE_THREADS`` caps the CPU count."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return cpus
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return min(cap, cpus)
