"""Frame sampling: one central window, or overlapping windows with a T/2 stride."""
from __future__ import annotations

from irn.errors import ConfigError, DataError


def window_central(n_frames: int, T: int, dilation: int = 1) -> list[int]:
    """T frame indices spaced by ``dilation`` and centred in the sequence.

    Indices past the end (short sequences) repeat the last frame.
    """
    if T < 2:
        raise ConfigError(f"T must be at least 2, got {T}")
    if dilation < 1:
        raise ConfigError(f"dilation must be at least 1, got {dilation}")
    if n_frames <= 0:
        raise DataError("cannot window an empty sequence")
    span = (T - 1) * dilation + 1
    start = max((n_frames - span) // 2, 0)
    return [min(start + k * dilation, n_frames - 1) for k in range(T)]


def window_overlapping(n_frames: int, T: int) -> list[list[int]]:
    """Windows of T consecutive frames starting at 0, T/2, T, ...

    Full windows are emitted while they fit; if frames remain uncovered, one
    more window starts at the next stride offset and is padded with the last
    frame. At least one window is always produced.
    """
    if T < 2 or T % 2:
        raise ConfigError(f"T must be even and at least 2, got {T}")
    if n_frames <= 0:
        raise DataError("cannot window an empty sequence")
    step = T // 2
    offsets = []
    o = 0
    while o + T <= n_frames:
        offsets.append(o)
        o += step
    if not offsets:
        offsets = [0]
    elif offsets[-1] + T < n_frames:
        offsets.append(offsets[-1] + step)
    return [[min(o + k, n_frames - 1) for k in range(T)] for o in offsets]
