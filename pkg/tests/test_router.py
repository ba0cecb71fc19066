import pytest

from akltmqc.lattice import build_lattice
from akltmqc.logic import CNOT, CircuitSpec, Init, Readout
from akltmqc.router import (
    RoutingFailure,
    crossing_estimate,
    disabled_ids,
    find_clusters,
    flag_off_limits,
    route_backbone,
    spanning_probability,
)
from akltmqc.sampler import AxisAssignment, matched_bonds


def _assignment(rows_axes):
    rows, cols = len(rows_axes), len(rows_axes[0])
    lat = build_lattice(rows, cols)
    asg = AxisAssignment(
        {(r, c): rows_axes[r][c] for r in range(rows) for c in range(cols)}
    )
    return lat, asg


def test_find_clusters_hand_pattern():
    lat, asg = _assignment(["zzx", "xyy"])
    matched = matched_bonds(lat, asg)
    clusters = find_clusters(lat, matched, asg)
    got = {(c.axis, frozenset(c.sites)) for c in clusters}
    assert got == {
        ("z", frozenset({(0, 0), (0, 1)})),
        ("y", frozenset({(1, 1), (1, 2)})),
    }
    assert len({c.id for c in clusters}) == len(clusters)


def test_no_clusters_without_matched_bonds():
    lat, asg = _assignment(["zx", "xz"])
    matched = matched_bonds(lat, asg)
    assert not matched
    assert find_clusters(lat, matched, asg) == []


def test_flag_off_limits_double_join():
    # two clusters of different axis joined by two parallel unmatched
    # bonds; exactly one member must be disabled
    lat, asg = _assignment(["zzz", "xxx"])
    matched = matched_bonds(lat, asg)
    clusters = find_clusters(lat, matched, asg)
    pairs = flag_off_limits(lat, clusters, matched)
    assert len(pairs) == 1
    p = pairs[0]
    assert len(p.bonds) == 2
    assert p.disabled in (p.first, p.second)
    assert disabled_ids(pairs) == frozenset({p.disabled})


def test_single_join_not_flagged():
    lat, asg = _assignment(["zzy", "xxz"])
    matched = matched_bonds(lat, asg)
    clusters = find_clusters(lat, matched, asg)
    assert len(clusters) == 2
    assert flag_off_limits(lat, clusters, matched) == []


def test_route_single_wire():
    lat, asg = _assignment(["yxzxz", "xyxyx"])
    circuit = CircuitSpec(1, (Init(0), Readout(0)))
    bb = route_backbone(
        lat, asg, find_clusters(lat, matched_bonds(lat, asg), asg),
        frozenset(), circuit, spacing=2,
    )
    assert not isinstance(bb, RoutingFailure)
    assert len(bb.wires) == 1
    assert not bb.junctions
    # the wire occupies row 0 end to end
    assert all(s[0] == 0 for s in bb.wires[0])
    assert len(bb.wires[0]) == 5


def test_route_cnot_pair():
    lat, asg = _assignment(["yzzz", "xzzx", "zxzz"])
    circuit = CircuitSpec(
        2, (Init(0), Init(1), CNOT(0, 1), Readout(0), Readout(1))
    )
    matched = matched_bonds(lat, asg)
    clusters = find_clusters(lat, matched, asg)
    bb = route_backbone(lat, asg, clusters, frozenset(), circuit, spacing=2)
    assert not isinstance(bb, RoutingFailure)
    assert len(bb.wires) == 2
    assert len(bb.junctions) == 1
    pair = bb.junctions[0]
    assert pair.control[0] < pair.target[0]
    assert pair.link  # vertical chain between the two junction sites


def test_route_failure_reports_reason():
    lat, asg = _assignment(["zz", "zz"])
    circuit = CircuitSpec(
        2, (Init(0), Init(1), CNOT(0, 1), Readout(0), Readout(1))
    )
    matched = matched_bonds(lat, asg)
    clusters = find_clusters(lat, matched, asg)
    bb = route_backbone(lat, asg, clusters, frozenset(), circuit, spacing=1)
    assert isinstance(bb, RoutingFailure)
    assert bb.reason


def test_backbone_json_grid():
    lat, asg = _assignment(["yxzxz", "xyxyx"])
    circuit = CircuitSpec(1, (Init(0), Readout(0)))
    bb = route_backbone(
        lat, asg, find_clusters(lat, matched_bonds(lat, asg), asg),
        frozenset(), circuit, spacing=2,
    )
    data = bb.to_json(lat)
    assert data["rows"] == 2 and data["cols"] == 5
    flat = [code for row in data["grid"] for code in row]
    assert "w0" in flat


def test_spanning_extremes():
    frac, err = spanning_probability(6, 12, 1.0, 50, 3)
    assert frac == 1.0 and err == 0.0
    frac, err = spanning_probability(6, 12, 0.0, 50, 3)
    assert frac == 0.0


def test_spanning_jobs_invariant():
    a = spanning_probability(8, 16, 0.62, 120, 17, jobs=1)
    b = spanning_probability(8, 16, 0.62, 120, 17, jobs=3)
    assert a == b


def test_spanning_monotone_in_p():
    lo, _ = spanning_probability(8, 16, 0.45, 300, 99)
    hi, _ = spanning_probability(8, 16, 0.85, 300, 99)
    assert lo < hi


def test_spanning_backend_parity():
    import numpy as np

    from akltmqc import _spanning_py

    try:
        from akltmqc import _spanning as compiled
    except ImportError:
        pytest.skip("compiled spanning kernel not built")
    lat = build_lattice(6, 12)
    bonds = lat.bonds()
    bond_a = np.array([lat.site_index(b.a) for b in bonds], dtype=np.int32)
    bond_b = np.array([lat.site_index(b.b) for b in bonds], dtype=np.int32)
    left = np.arange(0, 72, 12, dtype=np.int32)
    right = left + np.int32(11)
    occ = (
        np.random.default_rng(31).random((200, len(bonds))) < 0.64
    ).astype(np.uint8)
    a = _spanning_py.count_spans(72, bond_a, bond_b, occ, left, right)
    b = compiled.count_spans(72, bond_a, bond_b, occ, left, right)
    assert a == b


def test_crossing_estimate_brackets():
    ps = [0.55, 0.62, 0.72]
    cross = crossing_estimate((6, 12), (12, 24), ps, 400, 11)
    assert cross is None or ps[0] <= cross <= ps[-1]
