import configparser
import os

import numpy as np
import pytest

from atfinterp import mlpweight
from atfinterp.configio import read_weighting, write_weighting
from atfinterp.kernelcore import (DirectedWeighting, ResidualWeighting,
                                  SumWeighting, SunkenWeighting,
                                  UniformWeighting,
                                  directed_weighting_for_axis,
                                  residual_weighting)


def roundtrip(weighting, tmp_path, name="model"):
    cp = configparser.ConfigParser()
    prefix = os.path.join(tmp_path, name)
    write_weighting(cp, weighting, aux_prefix=prefix)
    path = os.path.join(tmp_path, f"{name}.ini")
    with open(path, "w") as fh:
        cp.write(fh)
    cp2 = configparser.ConfigParser()
    with open(path) as fh:
        cp2.read_file(fh)
    return read_weighting(cp2, base_dir=tmp_path)


def test_uniform_roundtrip(tmp_path):
    back = roundtrip(UniformWeighting(), tmp_path)
    assert isinstance(back, UniformWeighting)


def test_sunken_roundtrip(tmp_path):
    w = SunkenWeighting(gamma=0.7071067811865476, zeta=3.14159,
                        axis=(0.1, -0.9, 0.4))
    back = roundtrip(w, tmp_path)
    assert isinstance(back, SunkenWeighting)
    assert back.gamma == w.gamma
    assert back.zeta == w.zeta
    assert np.array_equal(back.axis, w.axis)


def test_directed_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    w = directed_weighting_for_axis(np.array([0.2, 0.3, -0.9]), degree=3)
    al = rng.random(16)
    al /= al.sum()
    be = rng.uniform(0, 12, 16)
    be[0] = 0.0
    w = w.with_params(alphas=al, betas=be)
    back = roundtrip(w, tmp_path)
    assert isinstance(back, DirectedWeighting)
    assert np.array_equal(back.alphas, w.alphas)
    assert np.array_equal(back.betas, w.betas)
    assert np.array_equal(back.directions, w.directions)
    assert back.pinned_index == w.pinned_index


def test_residual_roundtrip(tmp_path):
    w = residual_weighting(theta=mlpweight.init(3, 0.5), n_quad=26)
    back = roundtrip(w, tmp_path)
    assert isinstance(back, ResidualWeighting)
    assert back.quad_r.kind == "lebedev:26"
    for a, b in zip(back.theta.weights, w.theta.weights):
        assert np.array_equal(a, b)
    for a, b in zip(back.theta.biases, w.theta.biases):
        assert np.array_equal(a, b)


def test_sum_roundtrip(tmp_path):
    directed = directed_weighting_for_axis(np.array([1.0, 0.0, 0.0]),
                                           degree=3)
    residual = residual_weighting(theta=mlpweight.init(4, 0.2), n_quad=26)
    w = SumWeighting(directed=directed, residual=residual)
    back = roundtrip(w, tmp_path)
    assert isinstance(back, SumWeighting)
    assert np.array_equal(back.directed.alphas, directed.alphas)
    assert np.array_equal(back.directed.directions, directed.directions)
    for a, b in zip(back.residual.theta.weights, residual.theta.weights):
        assert np.array_equal(a, b)


def test_residual_requires_prefix():
    cp = configparser.ConfigParser()
    w = residual_weighting(theta=mlpweight.init(0, 0.1), n_quad=26)
    with pytest.raises(ValueError):
        write_weighting(cp, w, aux_prefix=None)


def test_missing_section_rejected():
    cp = configparser.ConfigParser()
    with pytest.raises(ValueError):
        read_weighting(cp, section="weighting")
