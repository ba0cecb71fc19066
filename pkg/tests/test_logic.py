import json
import math

import pytest

from akltmqc.contraction import BoundaryTermination
from akltmqc.lattice import Leg, build_lattice
from akltmqc.logic import (
    CNOT,
    ByproductFrame,
    CircuitSpec,
    CompileFailure,
    Init,
    ProtocolError,
    Readout,
    Rx,
    Rz,
    adapt_angle,
    auto_spacing,
    byproduct_indices,
    conditional_logical_table,
    prepare_protocol,
    protocol_branches,
    run_protocol,
)
from akltmqc.oracle import reference_circuit_sim, tv_distance
from akltmqc.sampler import AxisAssignment
from akltmqc.tensors import virtual_bra


def _fixture(rows_axes):
    rows, cols = len(rows_axes), len(rows_axes[0])
    lat = build_lattice(rows, cols)
    asg = AxisAssignment(
        {(r, c): rows_axes[r][c] for r in range(rows) for c in range(cols)}
    )
    return lat, asg


IDENTITY = CircuitSpec(1, (Init(0), Readout(0)))


@pytest.mark.parametrize(
    "mu,b,c,want",
    [
        ("z", 1, 0, (1, 1)),
        ("z", 0, 0, (1, 0)),
        ("x", 0, 0, (0, 1)),
        ("x", 1, 0, (1, 1)),
        ("y", 1, 1, (0, 1)),
        ("y", 1, 0, (1, 0)),
    ],
)
def test_byproduct_indices(mu, b, c, want):
    assert byproduct_indices(mu, b, c) == want


def test_byproduct_depends_only_on_xor():
    for mu in ("x", "y", "z"):
        assert byproduct_indices(mu, 0, 1) == byproduct_indices(mu, 1, 0)
        assert byproduct_indices(mu, 0, 0) == byproduct_indices(mu, 1, 1)


def test_adapt_angle_flips():
    frame = ByproductFrame([1], [0])
    assert adapt_angle(0.5, frame, "z") == -0.5  # z rotation rides ax
    assert adapt_angle(0.5, frame, "x") == 0.5
    frame = ByproductFrame([0], [1])
    assert adapt_angle(0.5, frame, "x") == -0.5
    with pytest.raises(ValueError):
        adapt_angle(0.5, frame, "y")


def test_circuit_validation():
    with pytest.raises(ValueError):
        CircuitSpec(1, (Init(0), Readout(0), Init(0))).validate()
    with pytest.raises(ValueError):
        CircuitSpec(1, (Readout(0),)).validate()
    with pytest.raises(ValueError):
        CircuitSpec(2, (Init(0), Init(1), CNOT(1, 0), Readout(0), Readout(1))).validate()
    with pytest.raises(ValueError):
        CircuitSpec(1, (Init(0), Rz(0, math.nan), Readout(0))).validate()
    with pytest.raises(ValueError):
        CircuitSpec(1, (Init(0), Rz(5, 0.1), Readout(0))).validate()


def test_circuit_json_roundtrip():
    circ = CircuitSpec(
        2,
        (
            Init(0),
            Init(1),
            Rz(0, 0.25),
            Rx(1, -1.5),
            CNOT(0, 1),
            Readout(0),
            Readout(1),
        ),
    )
    circ.validate()
    again = CircuitSpec.from_json(json.loads(json.dumps(circ.to_json())))
    assert again == circ


def test_auto_spacing():
    assert auto_spacing(build_lattice(2, 5), IDENTITY) >= 1
    two = CircuitSpec(
        2, (Init(0), Init(1), CNOT(0, 1), Readout(0), Readout(1))
    )
    assert auto_spacing(build_lattice(3, 4), two) == 2


def test_compile_rejects_pinned_readout():
    # a z neighbour away from the wire would copy the readout outcome and
    # post-select the logical bit
    lat, asg = _fixture(["yzzxz", "xyxyx"])
    prep = prepare_protocol(lat, asg, IDENTITY, BoundaryTermination())
    assert isinstance(prep, CompileFailure)
    assert prep.reason == "readout-pinned"


def test_identity_plan_layout():
    lat, asg = _fixture(["yxzxz", "xyxyx"])
    prep = prepare_protocol(lat, asg, IDENTITY, BoundaryTermination())
    backbone, plan = prep
    assert plan.readout_sites == {0: (0, 2)}
    assert plan.init_sites == {0: (0, 4)}
    kinds = {ps.site: ps.kind for ps in plan.order}
    assert kinds[(0, 4)] == "standard"
    assert kinds[(0, 3)] == "complementary"


def test_identity_branches_decoupled():
    lat, asg = _fixture(["yxzxz", "xyxyx"])
    term = BoundaryTermination()
    _, plan = prepare_protocol(lat, asg, IDENTITY, term)
    branches = protocol_branches(lat, asg, plan, IDENTITY, term)
    assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-9)
    reference = reference_circuit_sim(IDENTITY)
    for _, dist in conditional_logical_table(branches, plan):
        assert tv_distance(dist, reference) < 1e-8


def test_rotation_branches_decoupled():
    lat, asg = _fixture(["yxzxzz", "xyxyxy"])
    term = BoundaryTermination(
        overrides={((0, 5), Leg.VERT): virtual_bra("x", 0)}
    )
    circ = CircuitSpec(
        1, (Init(0), Rz(0, math.pi / 4), Rx(0, math.pi / 3), Readout(0))
    )
    _, plan = prepare_protocol(lat, asg, circ, term)
    branches = protocol_branches(lat, asg, plan, circ, term)
    reference = reference_circuit_sim(circ)
    worst = max(
        tv_distance(dist, reference)
        for _, dist in conditional_logical_table(branches, plan)
    )
    assert worst < 1e-8


def test_run_protocol_identity():
    lat = build_lattice(2, 4)
    res = run_protocol(lat, BoundaryTermination(axis="x"), IDENTITY, rng_seed=1)
    assert res.outcome.corrected == (0,)
    assert res.attempts >= 1
    assert res.seed == 1


def test_run_protocol_deterministic():
    lat = build_lattice(2, 4)
    a = run_protocol(lat, BoundaryTermination(axis="x"), IDENTITY, rng_seed=3)
    b = run_protocol(lat, BoundaryTermination(axis="x"), IDENTITY, rng_seed=3)
    assert a.to_json(lat) == b.to_json(lat)


def test_run_protocol_iid_any_size():
    lat = build_lattice(6, 9)
    circ = CircuitSpec(
        2, (Init(0), Init(1), CNOT(0, 1), Readout(0), Readout(1))
    )
    res = run_protocol(lat, BoundaryTermination(axis="x"), circ,
                       rng_seed=9, mode="iid", spacing=3)
    assert set(res.outcome.corrected) <= {0, 1}
    assert len(res.outcome.corrected) == 2
    assert res.attempts == 3


def test_run_protocol_exhausts_retries():
    lat = build_lattice(2, 3)
    circ = CircuitSpec(
        2, (Init(0), Init(1), CNOT(0, 1), Readout(0), Readout(1))
    )
    with pytest.raises(ProtocolError):
        run_protocol(lat, BoundaryTermination(axis="x"), circ,
                     rng_seed=1, mode="iid", retries=8)


def test_result_json_shape():
    lat = build_lattice(2, 4)
    res = run_protocol(lat, BoundaryTermination(axis="x"), IDENTITY, rng_seed=1)
    data = res.to_json(lat)
    for key in ("format_version", "seed", "mode", "attempts", "assignment",
                "backbone", "steps", "frames", "readouts", "raw", "corrected"):
        assert key in data
    assert data["mode"] == "exact"
    json.dumps(data)  # fully serializable
