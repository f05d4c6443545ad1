"""Shoebox room simulation via the image source method.

Coordinates are room-centered: a room with dimensions (Lx, Ly, Lz) occupies
[-Lx/2, Lx/2] x [-Ly/2, Ly/2] x [-Lz/2, Lz/2]. All six walls share one
frequency-independent reflection coefficient, obtainable from a target
reverberation time through Sabine's (or Eyring's) formula.

The transfer function between a source and a receiver is the sum over image
sources of attenuated free-field Green's functions; subtracting the direct
Green's function leaves the reverberant component that the kernel methods
interpolate.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_SOUND, FrequencyContext, PairSet, as_points

_COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class RoomConfig:
    """Shoebox geometry and wall reflection data.

    reflection_coefficient is the amplitude coefficient applied per wall
    bounce, identical for all six walls. max_image_order bounds the total
    reflection count of the enumerated image sources.
    """

    dimensions: tuple[float, float, float]
    reflection_coefficient: float
    max_image_order: int = 20
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        dims = tuple(float(d) for d in np.asarray(self.dimensions, dtype=float))
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError("dimensions must be three positive lengths")
        object.__setattr__(self, "dimensions", dims)
        if not 0.0 <= self.reflection_coefficient < 1.0:
            raise ValueError("reflection coefficient must lie in [0, 1)")
        if self.max_image_order < 0:
            raise ValueError("max_image_order must be nonnegative")

    def contains(self, points) -> bool:
        p = as_points(points)
        half = 0.5 * np.asarray(self.dimensions)
        return bool(np.all(np.abs(p) <= half))


def reflection_from_t60(dimensions, t60: float, method: str = "sabine") -> float:
    """Uniform wall reflection coefficient matching a target T60.

    Sabine: mean absorption a = 0.161 V / (S T60), reflection = sqrt(1 - a).
    Eyring: a = 1 - exp(-0.161 V / (S T60)).

    Raises ValueError if the requested T60 needs absorption > 1.
    """
    lx, ly, lz = (float(d) for d in dimensions)
    if min(lx, ly, lz) <= 0 or t60 <= 0:
        raise ValueError("dimensions and t60 must be positive")
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + ly * lz + lz * lx)
    x = 0.161 * volume / (surface * t60)
    if method == "sabine":
        absorption = x
    elif method == "eyring":
        absorption = 1.0 - np.exp(-x)
    else:
        raise ValueError(f"unknown absorption model {method!r}")
    if absorption >= 1.0:
        raise ValueError(f"t60={t60} requires mean absorption {absorption:.3f} >= 1")
    return float(np.sqrt(1.0 - absorption))


def green(receivers, sources, ctx: FrequencyContext):
    """Free-field Green's function exp(ikd) / (4 pi d) for pairwise positions.

    receivers and sources broadcast against each other as (n, 3) arrays; a
    single (3,) point is promoted. Returns a complex scalar for two single
    points, else shape (n,). Coincident pairs raise ValueError.
    """
    r = as_points(receivers, "receivers")
    s = as_points(sources, "sources")
    scalar = r.shape[0] == 1 and s.shape[0] == 1
    d = np.linalg.norm(r - s, axis=-1)
    if np.any(d < _COINCIDENT_TOL):
        raise ValueError("Green's function is singular for coincident points")
    g = np.exp(1j * ctx.wavenumber * d) / (4.0 * np.pi * d)
    return complex(g[0]) if scalar else g


def _axis_images(coord: float, length: float, max_order: int):
    """1D image coordinates and bounce counts for walls at +-length/2."""
    # work in wall coordinates [0, L], shift back afterwards
    c = coord + 0.5 * length
    pos, cnt = [], []
    for n in range(-(max_order // 2), max_order // 2 + 1):
        pos.append(2.0 * n * length + c)   # even images, 2|n| bounces
        cnt.append(2 * abs(n))
    for n in range(-((max_order - 1) // 2), (max_order + 1) // 2 + 1):
        k = abs(n - 1) + abs(n)            # odd images, mirrored once
        if k <= max_order:
            pos.append(2.0 * n * length - c)
            cnt.append(k)
    return np.asarray(pos) - 0.5 * length, np.asarray(cnt)


def image_sources(room: RoomConfig, source, max_order: int | None = None):
    """Image source positions and total bounce counts for one source.

    Returns
    -------
    positions : ndarray of shape (p, 3)
    orders : ndarray of shape (p,)
        Total reflection count per image; order 0 is the source itself.
    """
    source = np.asarray(source, dtype=float)
    if source.shape != (3,):
        raise ValueError("source must have shape (3,)")
    if not room.contains(source):
        raise ValueError("source lies outside the room")
    order = room.max_image_order if max_order is None else int(max_order)
    axes = [_axis_images(source[i], room.dimensions[i], order) for i in range(3)]
    cx, cy, cz = np.meshgrid(axes[0][1], axes[1][1], axes[2][1], indexing="ij")
    total = cx + cy + cz
    keep = total <= order
    px, py, pz = np.meshgrid(axes[0][0], axes[1][0], axes[2][0], indexing="ij")
    positions = np.stack([px[keep], py[keep], pz[keep]], axis=1)
    return positions, total[keep]


def atf(receivers, sources, ctx: FrequencyContext, room: RoomConfig):
    """Room transfer function (direct path included) for pairwise positions.

    Sums beta^order * exp(ikd) / (4 pi d) over all image sources up to the
    room's maximum image order. Reciprocal in source and receiver.
    """
    r = as_points(receivers, "receivers")
    s = as_points(sources, "sources")
    scalar = r.shape[0] == 1 and s.shape[0] == 1
    r, s = np.broadcast_arrays(r, s)
    if not (room.contains(r) and room.contains(s)):
        raise ValueError("positions must lie inside the room")
    k = ctx.wavenumber
    out = np.zeros(r.shape[0], dtype=complex)
    # images depend on the source only: group identical sources
    uniq, inverse = np.unique(s, axis=0, return_inverse=True)
    for u in range(len(uniq)):
        sel = inverse == u
        positions, orders = image_sources(room, uniq[u])
        amp = room.reflection_coefficient ** orders
        d = np.linalg.norm(r[sel][:, None, :] - positions[None, :, :], axis=2)
        if np.any(d < _COINCIDENT_TOL):
            raise ValueError("receiver coincides with an image source")
        out[sel] = (amp * np.exp(1j * k * d) / (4.0 * np.pi * d)).sum(axis=1)
    return complex(out[0]) if scalar else out


def reverberant_atf(receivers, sources, ctx: FrequencyContext, room: RoomConfig):
    """Transfer function with the direct free-field path removed."""
    return atf(receivers, sources, ctx, room) - green(receivers, sources, ctx)


@dataclass(frozen=True)
class MeasurementSet:
    """Measured reverberant transfer values at a set of source-receiver pairs."""

    pairs: PairSet
    values: np.ndarray
    context: FrequencyContext
    snr_db: float | None = None
    seed: int | None = None

    def __post_init__(self):
        # copy so the caller's array is never locked
        v = np.array(self.values, dtype=complex, order="C")
        if v.shape != (len(self.pairs),):
            raise ValueError("values must hold one complex number per pair")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.pairs)


def make_dataset(source_positions, receiver_positions, ctx: FrequencyContext,
                 room: RoomConfig, snr_db: float | None, seed: int) -> MeasurementSet:
    """Simulate reverberant transfer measurements on the full pair grid.

    Pairs are all combinations of the given points, receiver index fastest.
    Noise is circular complex Gaussian with variance
    mean(|h|^2) * 10^(-snr_db/10); one vectorized draw from
    numpy's default generator in pair-index order makes the per-index noise
    deterministic for a fixed seed. snr_db=None disables noise.
    """
    pairs = PairSet.from_grid(receiver_positions, source_positions)
    clean = reverberant_atf(pairs.receivers, pairs.sources, ctx, room)
    if snr_db is None:
        values = clean
    else:
        rng = np.random.default_rng(seed)
        sigma2 = float(np.mean(np.abs(clean) ** 2)) * 10.0 ** (-snr_db / 10.0)
        noise = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(len(pairs))
                                         + 1j * rng.standard_normal(len(pairs)))
        values = clean + noise
    return MeasurementSet(pairs=pairs, values=values, context=ctx,
                          snr_db=snr_db, seed=seed)


def save_measurements(ms: MeasurementSet, path: str) -> None:
    """Write pairs and values as CSV plus a .meta sidecar with the context."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "rx", "ry", "rz", "sx", "sy", "sz", "re", "im"])
        for n in range(len(ms)):
            r = ms.pairs.receivers[n]
            s = ms.pairs.sources[n]
            v = ms.values[n]
            writer.writerow([n, *(f"{float(c)!r}" for c in r),
                             *(f"{float(c)!r}" for c in s),
                             repr(float(v.real)), repr(float(v.imag))])
    meta = configparser.ConfigParser()
    meta["measurements"] = {
        "frequency_hz": repr(float(ms.context.frequency)),
        "speed_of_sound": repr(float(ms.context.speed_of_sound)),
        "snr_db": "" if ms.snr_db is None else repr(float(ms.snr_db)),
        "seed": "" if ms.seed is None else str(ms.seed),
        "grid_receivers": "" if not ms.pairs.is_grid else str(len(ms.pairs.receiver_points)),
        "grid_sources": "" if not ms.pairs.is_grid else str(len(ms.pairs.source_points)),
    }
    with open(_sidecar(path), "w") as fh:
        meta.write(fh)


def _sidecar(path: str) -> str:
    return (path[:-4] if path.endswith(".csv") else path) + ".meta"


def load_measurements(path: str) -> MeasurementSet:
    """Inverse of save_measurements; restores grid structure when recorded."""
    path = str(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["n"]:
            raise ValueError(f"{path}: unexpected measurement CSV header")
        rows = [row for row in reader if row]
    receivers = np.asarray([[float(c) for c in row[1:4]] for row in rows])
    sources = np.asarray([[float(c) for c in row[4:7]] for row in rows])
    values = np.asarray([float(row[7]) + 1j * float(row[8]) for row in rows])
    meta = configparser.ConfigParser()
    with open(_sidecar(path)) as fh:
        meta.read_file(fh)
    sec = meta["measurements"]
    ctx = FrequencyContext(frequency=float(sec["frequency_hz"]),
                           speed_of_sound=float(sec["speed_of_sound"]))
    snr = float(sec["snr_db"]) if sec["snr_db"] else None
    seed = int(sec["seed"]) if sec["seed"] else None
    if sec["grid_receivers"]:
        m = int(sec["grid_receivers"])
        pairs = PairSet.from_grid(receivers[:m], sources[::m])
        if not (np.array_equal(pairs.receivers, receivers)
                and np.array_equal(pairs.sources, sources)):
            raise ValueError(f"{path}: grid metadata inconsistent with rows")
    else:
        pairs = PairSet(receivers=receivers, sources=sources)
    return MeasurementSet(pairs=pairs, values=values, context=ctx,
                          snr_db=snr, seed=seed)
