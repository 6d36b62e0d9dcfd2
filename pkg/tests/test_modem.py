import numpy as np
import pytest

from stbicm.errors import ConfigurationError
from stbicm.modem import bsk_distances, make_constellation


@pytest.mark.parametrize("m", [1, 2, 4, 6])
def test_unit_energy(m):
    assert make_constellation(m).energy == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m", [2, 4, 6])
def test_gray_nearest_neighbours_differ_in_one_bit(m):
    c = make_constellation(m)
    dmin = 2 * c.scale
    for i in range(c.order):
        d = np.abs(c.points - c.points[i])
        for j in np.flatnonzero(np.isclose(d, dmin)):
            assert np.sum(c.labels[i] != c.labels[j]) == 1


def test_bpsk_mapping():
    c = make_constellation(1)
    assert c.map(np.array([[0], [1]])).tolist() == [1, -1]


def test_qpsk_bsk_distances_are_all_equal():
    d = bsk_distances(make_constellation(2))
    assert np.allclose(d.values, np.sqrt(2))


def test_16qam_bsk_distance_multiset():
    # sign bit of an axis: 2A from the inner levels, 6A from the outer ones;
    # second bit: always 2A
    c = make_constellation(4)
    d = bsk_distances(c)
    assert np.allclose(d.distinct() / c.scale, [2.0, 6.0])
    assert np.isclose(np.mean(d.values == d.values.max()), 0.25)


def test_odd_m_rejected():
    with pytest.raises(ConfigurationError):
        make_constellation(3)
