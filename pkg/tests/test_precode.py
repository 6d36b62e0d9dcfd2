import numpy as np
import pytest

from stbicm.errors import ConfigurationError
from stbicm.precode import (build_dna, golden_precoder, group_factorization, identity_precoder,
                            inverse_totient, load_precoder, reorder_rows_for_interleaving,
                            save_precoder, validate_dna)


@pytest.mark.parametrize("x,n", [(1, 1), (2, 3), (4, 5), (6, 7), (8, 15), (16, 17)])
def test_inverse_totient_smallest_preimage(x, n):
    assert inverse_totient(x) == n


def test_inverse_totient_rejects_nontotient():
    with pytest.raises(ConfigurationError):
        inverse_totient(14)


def test_s1_is_identity():
    assert np.allclose(build_dna(3, 1, 1).S, np.eye(3))


def test_zero_pattern_4x4_s2():
    P = build_dna(4, 1, 2)
    nz = np.abs(P.S) > 1e-12
    # two groups of s'=2 antennas; each row spreads over its group in both time slots
    assert nz.sum(axis=1).tolist() == [4] * 8
    for rows, chan in group_factorization(P):
        assert nz[np.ix_(rows, chan)].all()
        others = np.setdiff1d(np.arange(8), chan)
        assert not nz[np.ix_(rows, others)].any()


def test_full_spreading_is_unitary_up_to_scale():
    P = build_dna(2, 1, 2)
    assert np.allclose(P.S @ P.S.conj().T, np.eye(4))


def test_equal_nucleotide_norms():
    rep = validate_dna(build_dna(4, 2, 2))
    assert rep.ok() and rep.equal_norm


def test_reordered_rows_alternate_groups():
    P = reorder_rows_for_interleaving(build_dna(4, 1, 2))
    assert P.row_groups.tolist() == [0, 1] * 4
    assert np.allclose(P.S, build_dna(4, 1, 2, reordered=True).S)


def test_factorization_reproduces_product(rng):
    P = build_dna(4, 1, 2)
    H = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    full = P.S @ H
    for rows, chan in group_factorization(P):
        assert np.allclose(full[rows], P.S[np.ix_(rows, chan)] @ H[chan])


def test_save_load_roundtrip(tmp_path):
    P = build_dna(2, 2, 2)
    save_precoder(P, tmp_path / "p.txt")
    Q = load_precoder(tmp_path / "p.txt")
    assert np.allclose(P.S, Q.S) and (Q.n_t, Q.n_s, Q.s) == (2, 2, 2)


def test_load_rejects_bad_norm(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("1 1 2\n1,0 0,0\n0,0 2,0\n")
    with pytest.raises(ConfigurationError, match="Frobenius"):
        load_precoder(f)


def test_golden_precoder_is_not_equal_norm():
    P = golden_precoder()
    assert np.isclose(np.sum(np.abs(P.S) ** 2), 4.0)
    rep = validate_dna(P)
    assert rep.null_nucleotide < 1e-12
    assert not rep.equal_norm
    assert rep.nucleotide_norm_min == pytest.approx(0.2764, abs=1e-4)


def test_identity_precoder_groups():
    assert identity_precoder(2).row_groups.tolist() == [0, 1]
