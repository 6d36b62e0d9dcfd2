import numpy as np
import pytest

from stbicm.channel import (NoiseModel, build_extended_matrix, draw_channel, ebn0_to_n0,
                            extended_matrices, spectral_efficiency, transmit)
from stbicm.config import SystemConfig
from stbicm.errors import ConfigurationError
from stbicm.modem import make_constellation
from stbicm.precode import build_dna


def test_unit_variance_entries(rng):
    cfg = SystemConfig(n_t=2, n_r=2, n_c=2, s=1)
    H = draw_channel(cfg, rng, batch=125_000)
    assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, rel=5e-3)


def test_blocks_independent(rng):
    cfg = SystemConfig(n_t=1, n_r=1, n_c=2, s=1, frame_bits=1024)
    H = draw_channel(cfg, rng, batch=100_000)
    c = np.corrcoef(np.abs(H[:, 0, 0, 0]) ** 2, np.abs(H[:, 1, 0, 0]) ** 2)[0, 1]
    assert abs(c) < 0.01


def test_seed_stable():
    cfg = SystemConfig()
    a = draw_channel(cfg, np.random.default_rng(5)).H
    b = draw_channel(cfg, np.random.default_rng(5)).H
    assert np.array_equal(a, b)


def test_extended_matrix_structure(rng):
    cfg = SystemConfig(n_t=2, n_r=2, n_c=2, s=2, n_s=1, frame_bits=256)
    ch = draw_channel(cfg, rng)
    H0 = build_extended_matrix(ch, 0, cfg)
    assert np.array_equal(H0[:2, :2], ch.H[0]) and np.array_equal(H0[2:, 2:], ch.H[0])
    assert not H0[:2, 2:].any()
    cfg2 = cfg.replace(n_s=2)
    H0 = build_extended_matrix(ch, 0, cfg2)
    assert np.array_equal(H0[:2, :2], ch.H[0]) and np.array_equal(H0[2:, 2:], ch.H[1])
    with pytest.raises(ConfigurationError):
        build_extended_matrix(ch, 1, cfg2)


def test_vectorized_extended_matches_single(rng):
    cfg = SystemConfig(n_t=2, n_r=1, n_c=2, s=2, n_s=1, frame_bits=256)
    H = draw_channel(cfg, rng, batch=3)
    E = extended_matrices(H, cfg)
    for b in range(3):
        for k in range(cfg.N_c):
            assert np.array_equal(E[b, k], build_extended_matrix(H[b], k, cfg))


def test_noise_variance(rng):
    y = transmit(np.zeros((10**6, 1)), np.eye(1), np.eye(1), NoiseModel(0.3), rng)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(0.6, rel=0.01)
    assert np.var(y.real) == pytest.approx(0.3, rel=0.01)
    assert abs(np.mean(y.real * y.imag)) < 3e-3


def test_noiseless_limit(rng):
    z = rng.normal(size=4) + 1j * rng.normal(size=4)
    S = build_dna(2, 1, 2).S
    H = rng.normal(size=(4, 2)) + 0j
    assert np.allclose(transmit(z, S, H, 1e-30, rng), z @ S @ H)


def test_energy_per_period_is_N_t(rng):
    c = make_constellation(2)
    S = build_dna(2, 1, 2).S
    z = c.points[rng.integers(0, 4, (200_000, 4))]
    assert np.mean(np.sum(np.abs(z @ S) ** 2, axis=1)) == pytest.approx(4.0, rel=5e-3)


def test_rate_doubling_shifts_3db():
    cfg = SystemConfig()
    assert ebn0_to_n0(cfg, 5.0, 0.5) / ebn0_to_n0(cfg, 5.0, 1.0) == pytest.approx(2.0)
    assert spectral_efficiency(cfg, 0.5) == 2.0


def test_noise_model_rejects_nonpositive():
    with pytest.raises(ConfigurationError):
        NoiseModel(0.0)
