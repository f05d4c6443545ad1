"""Serialization of weighting variants to the INI config format.

The scalar and small-array parameters live inline in config sections; the
residual network parameters go to a sidecar file next to the config (they
are a few hundred floats). Quadrature grids are stored by name
("lebedev:110", "tdesign:4") so the bundled tables can be reloaded; custom
grids get their own sidecar table.
"""

from __future__ import annotations

import os

import numpy as np

from . import mlpweight
from .kernelcore import (DirectedWeighting, ResidualWeighting, SumWeighting,
                         SunkenWeighting, UniformWeighting)
from .sphere import direction_set_from_file, lebedev, tdesign


def _fmt_vec(v) -> str:
    return " ".join(repr(float(c)) for c in np.asarray(v, dtype=float))


def _parse_vec(text: str) -> np.ndarray:
    return np.asarray([float(c) for c in text.split()], dtype=float)


def _fmt_rows(m) -> str:
    return "\n".join(_fmt_vec(row) for row in np.asarray(m, dtype=float))


def _parse_rows(text: str) -> np.ndarray:
    rows = [line for line in (s.strip() for s in text.splitlines()) if line]
    return np.asarray([_parse_vec(r) for r in rows], dtype=float)


def _quad_name(ds) -> str:
    if ds.kind.startswith(("lebedev:", "tdesign:")):
        return ds.kind
    raise ValueError(f"cannot serialize quadrature of kind {ds.kind!r} by name")


def _quad_from_name(name: str):
    family, _, arg = name.partition(":")
    if family == "lebedev":
        return lebedev(int(arg))
    if family == "tdesign":
        return tdesign(int(arg))
    raise ValueError(f"unknown quadrature name {name!r}")


def write_weighting(cp, weighting, section: str = "weighting",
                    aux_prefix: str | None = None) -> None:
    """Store a weighting under the given section of a ConfigParser.

    aux_prefix is the filesystem path prefix for sidecar files (network
    parameters, custom quadrature tables); only its basename is recorded in
    the config, so the file set relocates as a unit.
    """
    if isinstance(weighting, UniformWeighting):
        cp[section] = {"kind": "uniform"}
    elif isinstance(weighting, SunkenWeighting):
        cp[section] = {
            "kind": "sunken",
            "gamma": repr(weighting.gamma),
            "zeta": repr(weighting.zeta),
            "axis": _fmt_vec(weighting.axis),
        }
    elif isinstance(weighting, DirectedWeighting):
        cp[section] = {
            "kind": "directed",
            "pinned_index": str(weighting.pinned_index),
            "alphas": _fmt_vec(weighting.alphas),
            "betas": _fmt_vec(weighting.betas),
            "directions": "\n" + _fmt_rows(weighting.directions),
        }
    elif isinstance(weighting, ResidualWeighting):
        if aux_prefix is None:
            raise ValueError("residual weighting needs an aux_prefix for "
                             "the network parameter file")
        theta_file = f"{aux_prefix}.theta.txt"
        mlpweight.save_params(weighting.theta, theta_file)
        cp[section] = {
            "kind": "residual",
            "quad": _quad_name(weighting.quad_r),
            "theta_file": os.path.basename(theta_file),
        }
    elif isinstance(weighting, SumWeighting):
        cp[section] = {"kind": "sum"}
        write_weighting(cp, weighting.directed, f"{section}.directed", aux_prefix)
        write_weighting(cp, weighting.residual, f"{section}.residual", aux_prefix)
    else:
        raise TypeError(f"unknown weighting {type(weighting).__name__}")


def read_weighting(cp, section: str = "weighting", base_dir: str = "."):
    """Inverse of write_weighting; sidecar files resolve against base_dir."""
    if section not in cp:
        raise ValueError(f"missing config section [{section}]")
    sec = cp[section]
    kind = sec.get("kind", "")
    if kind == "uniform":
        return UniformWeighting()
    if kind == "sunken":
        return SunkenWeighting(gamma=float(sec["gamma"]), zeta=float(sec["zeta"]),
                               axis=_parse_vec(sec["axis"]))
    if kind == "directed":
        return DirectedWeighting(alphas=_parse_vec(sec["alphas"]),
                                 betas=_parse_vec(sec["betas"]),
                                 directions=_parse_rows(sec["directions"]),
                                 pinned_index=int(sec["pinned_index"]))
    if kind == "residual":
        quad = _quad_from_name(sec["quad"])
        theta = mlpweight.load_params(os.path.join(base_dir, sec["theta_file"]))
        return ResidualWeighting(theta=theta, quad_r=quad, quad_s=quad)
    if kind == "sum":
        return SumWeighting(
            directed=read_weighting(cp, f"{section}.directed", base_dir),
            residual=read_weighting(cp, f"{section}.residual", base_dir))
    raise ValueError(f"unknown weighting kind {kind!r} in [{section}]")
