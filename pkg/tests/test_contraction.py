import numpy as np
import pytest

from akltmqc.contraction import (
    DENSE_SITE_CAP,
    BoundaryTermination,
    LatticeSizeError,
    MeasurementPattern,
    PlanStep,
    Polarized,
    chain_rule_sample,
    pattern_probability,
    reduced_density,
)
from akltmqc.lattice import Leg, build_lattice
from akltmqc.tensors import AXES, virtual_ket


@pytest.mark.parametrize("term", [None, BoundaryTermination(axis="z")])
def test_single_site_marginals_normalized(term):
    lat = build_lattice(2, 3)
    for site in lat.sites():
        total = sum(
            pattern_probability(
                lat, term, MeasurementPattern({site: Polarized(a)})
            )
            for a in AXES
        )
        assert total == pytest.approx(1.0, abs=1e-12)


def test_empty_pattern_is_certain():
    lat = build_lattice(2, 2)
    p = pattern_probability(lat, None, MeasurementPattern({}))
    assert p == pytest.approx(1.0, abs=1e-12)


def test_traced_marginal_is_uniform():
    lat = build_lattice(2, 4)
    for axis in AXES:
        p = pattern_probability(
            lat, None, MeasurementPattern({(1, 2): Polarized(axis)})
        )
        assert p == pytest.approx(1.0 / 3.0, abs=1e-10)


def test_chain_rule_product_matches_joint():
    # the product of step conditionals must equal the joint pattern weight
    lat = build_lattice(2, 2)
    plan = [PlanStep(s, "polarize") for s in lat.sites()]
    rec = chain_rule_sample(lat, None, plan, 11)
    prod = 1.0
    for step in rec.steps:
        prod *= step.probability
    joint = pattern_probability(
        lat,
        None,
        MeasurementPattern(
            {s.site: Polarized(str(s.outcome)) for s in rec.steps}
        ),
    )
    assert prod == pytest.approx(joint, abs=1e-12)


def test_reduced_density_properties():
    lat = build_lattice(2, 3)
    rho = reduced_density(lat, BoundaryTermination(axis="z"), (0, 1))
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    evals = np.linalg.eigvalsh(rho)
    assert evals.min() > -1e-12


def test_reduced_density_traced_maximally_mixed():
    lat = build_lattice(2, 3)
    rho = reduced_density(lat, None, (1, 1))
    np.testing.assert_allclose(rho, np.eye(4) / 4.0, atol=1e-10)


def test_chain_rule_deterministic():
    lat = build_lattice(2, 3)
    plan = [PlanStep(s, "polarize") for s in lat.sites()]
    r1 = chain_rule_sample(lat, None, plan, 42)
    r2 = chain_rule_sample(lat, None, plan, 42)
    assert [s.outcome for s in r1.steps] == [s.outcome for s in r2.steps]
    r3 = chain_rule_sample(lat, None, plan, 43)
    assert [s.site for s in r3.steps] == [s.site for s in r1.steps]


def test_chain_rule_first_step_matches_marginal():
    lat = build_lattice(2, 3)
    first = next(iter(lat.sites()))
    plan = [PlanStep(first, "polarize")]
    rec = chain_rule_sample(lat, None, plan, 7)
    step = rec.steps[0]
    direct = pattern_probability(
        lat, None, MeasurementPattern({first: Polarized(str(step.outcome))})
    )
    assert step.probability == pytest.approx(direct, abs=1e-10)


def test_pinned_sampling_respects_dense_cap():
    lat = build_lattice(3, 5)
    assert lat.n_sites > DENSE_SITE_CAP
    plan = [PlanStep(s, "polarize") for s in lat.sites()]
    with pytest.raises(LatticeSizeError):
        chain_rule_sample(lat, BoundaryTermination(axis="z"), plan, 1)


def test_termination_override_role_checked():
    lat = build_lattice(2, 2)
    # (0, 1) is Bot-kind, its vertical stem carries a ket index, so a ket
    # override is the wrong dual
    term = BoundaryTermination(
        axis="z", overrides={((0, 1), Leg.VERT): virtual_ket("x", 0)}
    )
    with pytest.raises(ValueError):
        term.vec_for(lat, (0, 1), Leg.VERT)
