"""Shared geometric primitives for region-to-region transfer function work.

Positions and directions are plain float ndarrays of shape (3,) or (n, 3).
A measurement or evaluation point is always a source-receiver pair; PairSet
stores a batch of such pairs and remembers the receiver/source grid it was
built from when it is a full cartesian product (that structure enables much
faster kernel assembly downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_SOUND = 343.0


def as_points(x, name="points"):
    """Coerce to a float array of shape (n, 3); accepts a single (3,) point."""
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {a.shape}")
    return a


def unit_vector(v):
    """Normalize v to unit length; rejects near-zero input."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-300:
        raise ValueError("cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class FrequencyContext:
    """Single-frequency context: frequency in Hz and the medium's sound speed.

    The wavenumber k = 2 pi f / c is derived. Immutable; shared freely
    across threads.
    """

    frequency: float
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not self.speed_of_sound > 0:
            raise ValueError("speed of sound must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi * self.frequency / self.speed_of_sound


def _freeze(a):
    # copy so the caller's array is never locked
    a = np.array(a, dtype=float, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PairSet:
    """A batch of source-receiver pairs.

    receivers[n] and sources[n] are the positions of pair n. When the set is
    the full cartesian product of m receiver points and l source points,
    receiver_points/source_points hold those grids and the flat index runs
    receiver-fastest: n = m_idx + l_idx * m.
    """

    receivers: np.ndarray
    sources: np.ndarray
    receiver_points: np.ndarray | None = None
    source_points: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "receivers", _freeze(as_points(self.receivers, "receivers")))
        object.__setattr__(self, "sources", _freeze(as_points(self.sources, "sources")))
        if len(self.receivers) != len(self.sources):
            raise ValueError("receivers and sources must have equal length")
        if (self.receiver_points is None) != (self.source_points is None):
            raise ValueError("grid points must be given for both roles or neither")
        if self.receiver_points is not None:
            object.__setattr__(self, "receiver_points",
                               _freeze(as_points(self.receiver_points, "receiver_points")))
            object.__setattr__(self, "source_points",
                               _freeze(as_points(self.source_points, "source_points")))
            if len(self.receiver_points) * len(self.source_points) != len(self.receivers):
                raise ValueError("grid size inconsistent with pair count")

    @classmethod
    def from_grid(cls, receiver_points, source_points) -> "PairSet":
        """All pairs of the given point sets, receiver index fastest."""
        r = as_points(receiver_points, "receiver_points")
        s = as_points(source_points, "source_points")
        return cls(receivers=np.tile(r, (len(s), 1)),
                   sources=np.repeat(s, len(r), axis=0),
                   receiver_points=r, source_points=s)

    @classmethod
    def single(cls, receiver, source) -> "PairSet":
        return cls(receivers=as_points(receiver), sources=as_points(source))

    def __len__(self) -> int:
        return len(self.receivers)

    @property
    def is_grid(self) -> bool:
        return self.receiver_points is not None

    def swapped(self) -> "PairSet":
        """Same pairs in the same order with source and receiver roles exchanged.

        The result is deliberately not marked as a grid: a swapped grid is no
        longer in canonical receiver-fastest order.
        """
        return PairSet(receivers=self.sources, sources=self.receivers)

    def subset(self, index) -> "PairSet":
        """Pairs at the given indices; any grid structure is dropped."""
        index = np.asarray(index)
        return PairSet(receivers=self.receivers[index], sources=self.sources[index])

    def concatenated(self, other: "PairSet") -> "PairSet":
        return PairSet(receivers=np.vstack([self.receivers, other.receivers]),
                       sources=np.vstack([self.sources, other.sources]))
