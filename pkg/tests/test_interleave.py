import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stbicm.config import SystemConfig
from stbicm.errors import ConfigurationError
from stbicm.interleave import (InterleaverMap, build_basic_interleaver, build_channel_interleaver,
                               build_pr_interleaver, demultiplex, separation_bound,
                               sliding_separation_permutation, verify_interleaver)

LINK_2X1 = SystemConfig(n_t=2, n_r=1, n_c=1, s=1, m=2, frame_bits=1024)
LINK_2X2 = SystemConfig(n_t=2, n_r=2, n_c=2, s=2, n_s=1, m=2, frame_bits=256)


def brute_window_ok(period, window):
    """Every window of consecutive codeword bits hits distinct periods."""
    for start in range(period.size - window + 1):
        w = period[start:start + window]
        if np.unique(w).size != w.size:
            return False
    return True


@pytest.mark.parametrize("n_i,s_i,expected", [(4, 1024, 32), (8, 128, 1), (8, 2048, 16)])
def test_separation_bound(n_i, s_i, expected):
    assert separation_bound(n_i, s_i) == expected


def test_demultiplex_is_antiperiodic():
    src = demultiplex(12, 3)
    assert np.array_equal(np.sort(src.ravel()), np.arange(12))
    assert src[:, 0].tolist() == [0, 1, 2]
    assert src[:, 1].tolist() == [4, 5, 3]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(2, 16), (4, 64), (4, 128), (8, 256)]), st.integers(0, 10**6))
def test_basic_interleaver_bijective_with_separation(dims, seed):
    n_i, s_i = dims
    imap = build_basic_interleaver(n_i, s_i, rng_seed=seed)
    assert imap.is_bijection()
    period = imap.permutation // n_i
    assert brute_window_ok(period, (imap.separation - 1) * n_i + 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 10**6))
def test_sliding_separation_permutation(n_blocks, sep_frac, seed):
    block = 4
    sep = max(1, min(n_blocks // 2, sep_frac * n_blocks // 4))
    pi = sliding_separation_permutation(n_blocks * block, block, sep,
                                        np.random.default_rng(seed))
    if pi is None:
        return
    assert np.array_equal(np.sort(pi), np.arange(n_blocks * block))
    b = pi // block
    for j in range(b.size - sep + 1):
        assert np.unique(b[j:j + sep]).size == sep


@pytest.mark.parametrize("cfg", [LINK_2X1, LINK_2X2], ids=["2x1-nc1", "2x2-nc2-s2"])
def test_channel_interleaver_is_ideal(cfg):
    imap = build_channel_interleaver(cfg)
    rep = verify_interleaver(imap, cfg)
    assert rep.ok
    assert brute_window_ok(imap.permutation // cfg.bits_per_period, rep.window)


def test_pr_interleaver_collides():
    cfg = LINK_2X1.replace(interleaver="pr", L_I=32)
    rep = verify_interleaver(build_channel_interleaver(cfg), cfg)
    assert rep.bijective and rep.colliding_pairs > 0


def test_infeasible_separation_names_seed():
    with pytest.raises(ConfigurationError, match="seed 7"):
        build_basic_interleaver(4, 64, separation=5, rng_seed=7, restarts=5)


def test_dims_must_hold_whole_circulant_blocks():
    with pytest.raises(ConfigurationError):
        build_basic_interleaver(4, 72)


def test_interleave_roundtrip_and_file(tmp_path, rng):
    imap = build_channel_interleaver(LINK_2X2)
    x = rng.normal(size=(3, LINK_2X2.frame_bits))
    assert np.array_equal(imap.deinterleave(imap.interleave(x)), x)
    imap.to_file(tmp_path / "pi.txt")
    back = InterleaverMap.from_file(tmp_path / "pi.txt")
    assert np.array_equal(back.permutation, imap.permutation)
    assert back.separation == imap.separation


def test_deterministic_under_seed():
    a = build_channel_interleaver(LINK_2X1, rng_seed=3).permutation
    b = build_channel_interleaver(LINK_2X1, rng_seed=3).permutation
    c = build_channel_interleaver(LINK_2X1, rng_seed=4).permutation
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_pr_is_permutation():
    assert build_pr_interleaver(100, 1).is_bijection()
