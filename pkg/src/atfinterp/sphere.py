"""Direction sets on the unit sphere: quadrature tables and region sampling.

Two families of bundled node tables are provided:

* spherical designs of degree t with (t+1)^2 equally weighted nodes, used
  as microphone/source layouts on the nested spheres and as the component
  directions of the directional weighting;
* Lebedev quadrature tables (110 and 590 nodes), used for the learned
  residual weighting and as the integration oracle in the test suite.

All weights are normalized to sum to 4*pi so that integrate() returns the
physical solid-angle integral; weighting functions keep their own 1/(4 pi)
factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

FOUR_PI = 4.0 * np.pi

_TDESIGN_DEGREES = (3, 4)
_LEBEDEV_SIZES = (26, 110, 590)


@dataclass(frozen=True)
class DirectionSet:
    """Unit direction nodes with positive quadrature weights summing to 4*pi."""

    nodes: np.ndarray   # (n, 3), unit rows
    weights: np.ndarray  # (n,), positive
    kind: str = "custom"

    def __post_init__(self):
        # copy so the caller's arrays are never locked
        nodes = np.array(self.nodes, dtype=float, order="C")
        weights = np.array(self.weights, dtype=float, order="C")
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise ValueError("nodes must have shape (n, 3)")
        if weights.shape != (nodes.shape[0],):
            raise ValueError("weights must have shape (n,)")
        norms = np.linalg.norm(nodes, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("nodes must lie on the unit sphere")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - FOUR_PI) > 1e-9:
            raise ValueError("weights must sum to 4*pi")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.nodes)


def _parse_table(text):
    nodes, weights = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, y, z, w = (float(tok) for tok in line.split())
        nodes.append((x, y, z))
        weights.append(w)
    return np.asarray(nodes), np.asarray(weights)


def _load_bundled(name, kind):
    text = resources.files("atfinterp").joinpath(f"data/{name}").read_text()
    nodes, weights = _parse_table(text)
    return DirectionSet(nodes=nodes, weights=weights, kind=kind)


def tdesign(degree: int) -> DirectionSet:
    """Spherical design of the given degree with (degree+1)^2 nodes.

    Equal-weight nodes integrating all spherical harmonics up to the design
    degree exactly. Bundled degrees: 3 (16 nodes) and 4 (25 nodes).

    Parameters
    ----------
    degree : int
        Design degree t; the node count is (t+1)^2.

    Returns
    -------
    DirectionSet
    """
    if degree not in _TDESIGN_DEGREES:
        raise ValueError(
            f"unsupported design degree {degree}; bundled degrees: {_TDESIGN_DEGREES}")
    return _load_bundled(f"tdesign_t{degree}.txt", f"tdesign:{degree}")


def lebedev(n_points: int) -> DirectionSet:
    """Bundled Lebedev quadrature table with the given node count.

    Available sizes: 26 (exact to spherical-harmonic degree 7),
    110 (degree 17), and 590 (degree 41).
    """
    if n_points not in _LEBEDEV_SIZES:
        raise ValueError(
            f"unsupported Lebedev size {n_points}; bundled sizes: {_LEBEDEV_SIZES}")
    return _load_bundled(f"lebedev_{n_points}.txt", f"lebedev:{n_points}")


def direction_set_from_file(path, kind: str = "custom") -> DirectionSet:
    """Load a custom node table: one "x y z w" row per node, "#" comments."""
    with open(path) as fh:
        nodes, weights = _parse_table(fh.read())
    return DirectionSet(nodes=nodes, weights=weights, kind=kind)


def integrate(f, directions: DirectionSet) -> complex:
    """Quadrature of f over the unit sphere.

    Parameters
    ----------
    f : callable
        Maps an (n, 3) array of unit directions to (n,) values; real or
        complex.
    directions : DirectionSet

    Returns
    -------
    complex
        sum_i w_i f(v_i).
    """
    values = np.asarray(f(directions.nodes))
    if values.shape != (len(directions),):
        raise ValueError("f must return one value per node")
    return complex(directions.weights @ values)


def sample_ball(center, radius: float, n: int, seed: int) -> np.ndarray:
    """Uniform i.i.d. samples inside a ball, by rejection from its bounding cube.

    Deterministic for a fixed seed: candidates are drawn in a fixed chunked
    order from numpy's default generator and accepted first-come.

    Returns
    -------
    ndarray of shape (n, 3)
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (3,):
        raise ValueError("center must have shape (3,)")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = np.random.default_rng(seed)
    out = np.empty((n, 3))
    have = 0
    while have < n:
        cand = rng.uniform(-1.0, 1.0, size=(max(2 * (n - have), 64), 3))
        keep = cand[np.einsum("ij,ij->i", cand, cand) <= 1.0]
        take = min(len(keep), n - have)
        out[have:have + take] = keep[:take]
        have += take
    return center + radius * out
