import pytest

from akltmqc.contraction import BoundaryTermination
from akltmqc.lattice import build_lattice
from akltmqc.sampler import (
    AxisAssignment,
    SampleMode,
    matched_bonds,
    stage1_sample,
)
from akltmqc.tensors import AXES


@pytest.mark.parametrize("mode", ["iid", "exact"])
def test_deterministic_per_seed(mode):
    lat = build_lattice(2, 3)
    a = stage1_sample(lat, None, mode, 123)
    b = stage1_sample(lat, None, mode, 123)
    assert all(a[s] == b[s] for s in lat.sites())


def test_modes_differ_between_seeds():
    lat = build_lattice(4, 6)
    a = stage1_sample(lat, None, "iid", 1)
    b = stage1_sample(lat, None, "iid", 2)
    assert any(a[s] != b[s] for s in lat.sites())


def test_axes_are_valid():
    lat = build_lattice(3, 4)
    asg = stage1_sample(lat, None, SampleMode.EXACT, 9)
    for s in lat.sites():
        assert asg[s] in AXES


def test_exact_pinned_small_patch():
    lat = build_lattice(2, 3)
    asg = stage1_sample(lat, BoundaryTermination(axis="z"), "exact", 5)
    for s in lat.sites():
        assert asg[s] in AXES


def test_string_and_enum_modes_agree():
    lat = build_lattice(2, 4)
    a = stage1_sample(lat, None, "exact", 77)
    b = stage1_sample(lat, None, SampleMode.EXACT, 77)
    assert all(a[s] == b[s] for s in lat.sites())


def test_matched_bonds_hand_pattern():
    lat = build_lattice(2, 2)
    asg = AxisAssignment(
        {(0, 0): "z", (0, 1): "z", (1, 0): "x", (1, 1): "x"}
    )
    got = {frozenset((b.a, b.b)) for b in matched_bonds(lat, asg)}
    assert got == {
        frozenset({(0, 0), (0, 1)}),
        frozenset({(1, 0), (1, 1)}),
    }


def test_matched_bonds_reject_partial_assignment():
    lat = build_lattice(2, 2)
    with pytest.raises(Exception):
        matched_bonds(lat, AxisAssignment({(0, 0): "z"}))


def test_assignment_json_roundtrip():
    lat = build_lattice(2, 3)
    asg = stage1_sample(lat, None, "iid", 4)
    data = asg.to_json(lat)
    assert isinstance(data, dict)
