import dataclasses

import numpy as np
import pytest

from mccd.geometry import (
    InvalidDistanceError,
    build_layout,
    check_commutation,
    orientation_maps,
)


@pytest.mark.parametrize("d,nx", [(3, 4), (5, 12), (7, 24)])
def test_counts(d, nx):
    lay = build_layout(d)
    assert lay.num_data == d * d
    assert lay.num_stabilizers == d * d - 1
    assert len(lay.x_indices) == nx and len(lay.z_indices) == nx


@pytest.mark.parametrize("d", [2, 1, 4, -3])
def test_bad_distance(d):
    with pytest.raises(InvalidDistanceError):
        build_layout(d)


@pytest.mark.parametrize("d", [3, 5])
def test_commutation(d):
    lay = build_layout(d)
    assert check_commutation(lay)
    hx, hz = lay.check_matrix("X"), lay.check_matrix("Z")
    assert not np.any((hx.astype(int) @ hz.T) % 2)
    lz = np.zeros(lay.num_data, int)
    lz[list(lay.logical_z_support)] = 1
    lx = np.zeros(lay.num_data, int)
    lx[list(lay.logical_x_support)] = 1
    assert not np.any(hx @ lz % 2) and not np.any(hz @ lx % 2)
    assert lz @ lx % 2 == 1


def test_truncated_stabilizer_breaks_commutation(layout3):
    lay = layout3
    s = next(s for s in lay.z_indices if len(lay.stab_support[s]) == 4)
    supports = list(lay.stab_support)
    supports[s] = supports[s][:1]
    broken = dataclasses.replace(lay, stab_support=tuple(supports))
    assert not check_commutation(broken)


def test_weights_and_schedule(layout3):
    lay = layout3
    weights = sorted(len(s) for s in lay.stab_support)
    assert weights == [2, 2, 2, 2, 4, 4, 4, 4]
    for s, sched in enumerate(lay.schedule):
        touched = sorted(q for q in sched if q >= 0)
        assert touched == sorted(lay.stab_support[s])


@pytest.mark.parametrize("d", [3, 5])
def test_rotation_swaps_basis(d):
    lay = build_layout(d)
    data_map, anc_map = orientation_maps(d, 1)
    assert sorted(data_map) == list(range(d * d))
    assert sorted(anc_map) == list(range(d * d - 1))
    for s, (_, basis) in enumerate(lay.ancillas):
        img = anc_map[s]
        assert lay.ancillas[img][1] != basis
        assert sorted(data_map[list(lay.stab_support[s])]) == sorted(lay.stab_support[img])
    ident = orientation_maps(d, 0)
    assert np.array_equal(ident[0], np.arange(d * d))
