"""Ground-truth targets for the anticipation task.

For every frame and instrument we derive the remaining time (in minutes,
truncated at the horizon ``h``) until the instrument next appears, plus a
three-way class label used as a regularizing objective:

* ``ANTICIPATING`` -- the instrument appears within the next ``h`` minutes,
* ``PRESENT``      -- the instrument is visible in the current frame,
* ``BACKGROUND``   -- neither of the above (remaining time saturated at ``h``).

The class order matters: it is also the tie-break order used when turning
predicted class probabilities back into a label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .workflow import ProcedureSequence

ANTICIPATING = 0
PRESENT = 1
BACKGROUND = 2

CLASS_NAMES = ("anticipating", "present", "background")


@dataclass(frozen=True)
class AnticipationTargets:
    """Per-frame, per-instrument regression and classification targets.

    ``remaining`` is in minutes and lies in ``[0, horizon]``; ``classes``
    holds one of :data:`ANTICIPATING`, :data:`PRESENT`, :data:`BACKGROUND`.
    """

    horizon: float
    fps: float
    remaining: np.ndarray  # (n, K) float64, minutes
    classes: np.ndarray    # (n, K) int8

    @property
    def n_frames(self) -> int:
        return self.remaining.shape[0]

    @property
    def n_instruments(self) -> int:
        return self.remaining.shape[1]


def remaining_time(presence: np.ndarray, fps: float, horizon: float) -> np.ndarray:
    """Remaining minutes until the next occurrence, truncated at ``horizon``.

    ``presence`` is a boolean array of shape (n,) or (n, K).  A frame where
    the instrument is present has remaining time 0; frames after the last
    occurrence saturate at ``horizon``.  The gap to the next occurrence is
    counted in frames and converted with ``fps * 60`` frames per minute.
    """
    presence = np.asarray(presence, dtype=bool)
    squeeze = presence.ndim == 1
    if squeeze:
        presence = presence[:, None]
    n, k = presence.shape
    frames = np.arange(n)
    gap = np.empty((n, k), dtype=np.float64)
    for j in range(k):
        occ = np.flatnonzero(presence[:, j])
        if occ.size == 0:
            gap[:, j] = np.inf
            continue
        nxt = np.searchsorted(occ, frames, side="left")
        has_next = nxt < occ.size
        gap[:, j] = np.where(has_next, occ[np.minimum(nxt, occ.size - 1)] - frames, np.inf)
    r = np.minimum(gap / (fps * 60.0), horizon)
    return r[:, 0] if squeeze else r


def classify(remaining: np.ndarray, presence: np.ndarray, horizon: float) -> np.ndarray:
    """Three-way class labels from remaining times and presence flags."""
    remaining = np.asarray(remaining)
    presence = np.asarray(presence, dtype=bool)
    classes = np.full(remaining.shape, BACKGROUND, dtype=np.int8)
    classes[(remaining > 0.0) & (remaining < horizon)] = ANTICIPATING
    classes[presence] = PRESENT
    return classes


def compute_targets(seq: ProcedureSequence, horizon: float) -> AnticipationTargets:
    """Build :class:`AnticipationTargets` for a sequence.

    Any present frame is an occurrence; consecutive present frames all have
    remaining time 0.  A gap of exactly ``horizon`` minutes classifies as
    background (the anticipating band is the open interval ``(0, h)``).
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if seq.n_frames < 1:
        raise ValueError("sequence must contain at least one frame")
    r = remaining_time(seq.presence, seq.fps, horizon)
    c = classify(r, seq.presence, horizon)
    return AnticipationTargets(horizon=float(horizon), fps=seq.fps, remaining=r, classes=c)
