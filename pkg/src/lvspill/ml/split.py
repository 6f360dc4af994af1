"""Chronological splits and train-only labelling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import LabelingError, ParameterError, SampleSizeError
from ..factors import nearest_rank

MIN_SPLIT_ROWS = 10


@dataclass(frozen=True)
class SplitSpec:
    """Half-open row ranges ``[start, stop)``, ordered train < valid < test."""

    train: tuple
    valid: tuple
    test: tuple

    def __post_init__(self):
        (a, b), (c, d), (e, f) = self.train, self.valid, self.test
        if not (0 <= a <= b == c <= d == e <= f):
            raise ParameterError(f"split ranges must be contiguous and ordered: {self}")

    def rows(self, name: str) -> np.ndarray:
        start, stop = getattr(self, name)
        return np.arange(start, stop)

    def sizes(self) -> tuple:
        return tuple(stop - start for start, stop in (self.train, self.valid, self.test))

    def embargoed(self, gap: int) -> dict:
        """Row indices per split with the last ``gap`` rows of train and valid
        removed, so forward targets never straddle a boundary."""
        out = {}
        for name in ("train", "valid", "test"):
            start, stop = getattr(self, name)
            if name != "test":
                stop = max(start, stop - gap)
            out[name] = np.arange(start, stop)
        return out


def chrono_split(n: int, fractions=(0.7, 0.15, 0.15)) -> SplitSpec:
    """Boundaries at ``floor(f_train n)`` and ``floor((f_train + f_valid) n)``."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ParameterError("fractions must be three positive shares summing to 1")
    if n < MIN_SPLIT_ROWS:
        raise SampleSizeError(f"chrono_split needs >= {MIN_SPLIT_ROWS} rows, got {n}")
    b1 = math.floor(fractions[0] * n + 1e-9)
    b2 = math.floor((fractions[0] + fractions[1]) * n + 1e-9)
    spec = SplitSpec((0, b1), (b1, b2), (b2, n))
    if min(spec.sizes()) == 0:
        raise SampleSizeError(f"n={n} leaves an empty split")
    return spec


def label_top_quantile(risk, split: SplitSpec, q: float = 0.85, train_rows=None) -> tuple[np.ndarray, float]:
    """Label ``1`` where ``risk > cut``, with the nearest-rank ``q`` cut taken
    from the training rows only. Missing risk gives a missing label.

    Returns ``(labels, cut)``.
    """
    risk = np.asarray(risk, dtype=np.float64)
    rows = split.rows("train") if train_rows is None else np.asarray(train_rows)
    train = risk[rows]
    train = train[np.isfinite(train)]
    if train.shape[0] < 20:
        raise LabelingError(f"need >= 20 training values to label, got {train.shape[0]}")
    if np.ptp(train) == 0:
        raise LabelingError("training risk values are all equal")
    cut = nearest_rank(train, q)
    labels = np.where(np.isfinite(risk), (risk > cut).astype(np.float64), np.nan)
    return labels, cut
