import numpy as np
import pytest

from atfinterp.geometry import FrequencyContext
from atfinterp.roomsim import (MeasurementSet, RoomConfig, atf, green,
                               image_sources, load_measurements,
                               make_dataset, reflection_from_t60,
                               reverberant_atf, save_measurements)
from oracles import helmholtz_residual

ROOM = RoomConfig(dimensions=(3.2, 4.0, 2.7), reflection_coefficient=0.9,
                  max_image_order=6)
CTX = FrequencyContext(1000.0)


def test_green_value_and_phase():
    ctx = FrequencyContext(1150.0)
    r = np.array([0.25, 0.0, 0.0])
    s = np.array([-0.25, 0.0, 0.0])
    g = green(r, s, ctx)
    k = ctx.wavenumber
    assert np.isclose(abs(g), 1.0 / (4 * np.pi * 0.5))
    assert np.isclose(np.angle(g) % (2 * np.pi), (k * 0.5) % (2 * np.pi))


def test_green_broadcasts():
    rng = np.random.default_rng(0)
    r = rng.standard_normal((5, 3))
    s = np.array([[2.0, 2.0, 2.0]])
    vals = green(r, s, CTX)
    assert vals.shape == (5,)
    for i in range(5):
        assert vals[i] == green(r[i], s[0], CTX)


def test_green_coincident_rejected():
    p = np.array([0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        green(p, p, CTX)


def test_sabine_inversion_roundtrip():
    dims = (3.2, 4.0, 2.7)
    beta = reflection_from_t60(dims, 0.45)
    v = dims[0] * dims[1] * dims[2]
    s = 2 * (dims[0] * dims[1] + dims[1] * dims[2] + dims[0] * dims[2])
    # plug the implied absorption back into Sabine's formula
    absorption = 1.0 - beta ** 2
    t60 = 0.161 * v / (s * absorption)
    assert abs(t60 - 0.45) < 1e-12
    assert 0.0 < beta < 1.0


def test_image_sources_order_zero_is_source():
    room = RoomConfig(dimensions=(3.2, 4.0, 2.7), reflection_coefficient=0.5,
                      max_image_order=0)
    pos, orders = image_sources(room, np.array([0.3, -0.2, 0.1]))
    assert pos.shape == (1, 3)
    assert np.allclose(pos[0], [0.3, -0.2, 0.1])
    assert orders[0] == 0


def test_image_count_grows_with_order():
    source = np.array([0.3, -0.2, 0.1])
    counts = [len(image_sources(RoomConfig(dimensions=(3.2, 4.0, 2.7),
                                           reflection_coefficient=0.5,
                                           max_image_order=n),
                                source)[0]) for n in (0, 1, 2, 3)]
    assert counts[0] == 1
    assert counts[1] == 7
    assert all(a < b for a, b in zip(counts, counts[1:]))


def test_atf_order_zero_equals_green():
    room = RoomConfig(dimensions=(3.2, 4.0, 2.7), reflection_coefficient=0.5,
                      max_image_order=0)
    r = np.array([[0.5, 0.5, 0.5]])
    s = np.array([[-0.5, -0.5, -0.5]])
    assert np.allclose(atf(r, s, CTX, room), green(r, s, CTX))


def test_zero_reflection_has_no_reverberant_part():
    room = RoomConfig(dimensions=(3.2, 4.0, 2.7), reflection_coefficient=0.0,
                      max_image_order=4)
    rng = np.random.default_rng(2)
    r = rng.uniform(-0.4, 0.4, size=(6, 3))
    s = rng.uniform(-0.4, 0.4, size=(6, 3)) + np.array([0.0, 1.2, 0.0])
    assert np.max(np.abs(reverberant_atf(r, s, CTX, room))) < 1e-15


def test_atf_reciprocity():
    rng = np.random.default_rng(3)
    r = rng.uniform(-0.5, 0.5, size=(4, 3))
    s = rng.uniform(-0.5, 0.5, size=(4, 3)) + np.array([0.0, 1.0, 0.0])
    assert np.allclose(atf(r, s, CTX, ROOM), atf(s, r, CTX, ROOM), rtol=1e-12)


def test_atf_outside_room_rejected():
    r = np.array([[5.0, 0.0, 0.0]])
    s = np.array([[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        atf(r, s, CTX, ROOM)


def test_reverberant_field_solves_helmholtz():
    # the direct term is removed, so the remainder is a smooth interior field
    ctx = FrequencyContext(1000.0)
    s = np.array([0.65, 0.80, 0.48])

    def field(r):
        # two single points give a scalar
        return reverberant_atf(r[None, :], s[None, :], ctx, ROOM)

    for point in ([-0.65, -0.80, -0.48], [-0.5, -0.9, -0.3]):
        assert helmholtz_residual(field, point, ctx.wavenumber) < 1e-4


def test_make_dataset_noiseless_matches_field():
    src = np.array([[0.6, 0.7, 0.4], [0.7, 0.8, 0.5]])
    rcv = np.array([[-0.6, -0.7, -0.4], [-0.7, -0.8, -0.5],
                    [-0.5, -0.6, -0.3]])
    ms = make_dataset(src, rcv, CTX, ROOM, snr_db=None, seed=0)
    assert len(ms) == 6
    expect = reverberant_atf(ms.pairs.receivers, ms.pairs.sources, CTX, ROOM)
    assert np.array_equal(ms.values, expect)


def test_make_dataset_noise_level_and_determinism():
    rng = np.random.default_rng(4)
    src = rng.uniform(0.4, 0.8, size=(5, 3))
    rcv = -rng.uniform(0.4, 0.8, size=(5, 3))
    clean = make_dataset(src, rcv, CTX, ROOM, snr_db=None, seed=0)
    noisy = make_dataset(src, rcv, CTX, ROOM, snr_db=20.0, seed=11)
    again = make_dataset(src, rcv, CTX, ROOM, snr_db=20.0, seed=11)
    assert np.array_equal(noisy.values, again.values)
    other = make_dataset(src, rcv, CTX, ROOM, snr_db=20.0, seed=12)
    assert not np.array_equal(noisy.values, other.values)
    # realized SNR should be within a few dB of nominal for N=25
    noise_power = np.mean(np.abs(noisy.values - clean.values) ** 2)
    signal_power = np.mean(np.abs(clean.values) ** 2)
    realized = 10 * np.log10(signal_power / noise_power)
    assert 15.0 < realized < 25.0


def test_measurements_roundtrip(tmp_path):
    src = np.array([[0.6, 0.7, 0.4], [0.7, 0.8, 0.5]])
    rcv = np.array([[-0.6, -0.7, -0.4], [-0.7, -0.8, -0.5]])
    ms = make_dataset(src, rcv, CTX, ROOM, snr_db=20.0, seed=3)
    path = tmp_path / "meas.csv"
    save_measurements(ms, path)
    back = load_measurements(path)
    assert np.allclose(back.values, ms.values)
    assert np.allclose(back.pairs.receivers, ms.pairs.receivers)
    assert np.allclose(back.pairs.sources, ms.pairs.sources)
    assert back.pairs.is_grid
    assert back.context.frequency == CTX.frequency


def test_values_length_checked():
    with pytest.raises(ValueError):
        MeasurementSet(pairs=make_dataset(
            np.array([[0.5, 0.5, 0.5]]), np.array([[-0.5, -0.5, -0.5]]),
            CTX, ROOM, None, 0).pairs, values=np.zeros(3), context=CTX)
