import numpy as np
import pytest

from funkslice.geometry import DomainError
from funkslice.mobius import mobius
from funkslice.verify import DEFAULT_TOLERANCES, perturbed_mobius, run_suite

FAST = {"samples": 2000, "planes": 40, "lattice": 24}


@pytest.fixture(scope="module")
def report():
    return run_suite([0.3, -0.5, 1.8], k=2, seed=1, sizes=FAST)


def test_suite_passes_all_checks(report):
    assert report.passed
    names = [c.name for c in report.checks]
    assert set(names) == set(DEFAULT_TOLERANCES) - {"dimension_link"}
    d = report.to_dict()
    assert d["passed"] and len(d["checks"]) == len(names)


def test_suite_is_deterministic(report):
    again = run_suite([0.3, -0.5, 1.8], k=2, seed=1, sizes=FAST)
    assert [c.residual for c in again.checks] == [c.residual for c in report.checks]


def test_single_check_matches_full_suite(report):
    one = run_suite([0.3, -0.5, 1.8], k=2, seed=1, sizes=FAST, checks=["conjugation"])
    full = {c.name: c.residual for c in report.checks}
    # sub-generators are keyed by position in the requested list, so only compare magnitudes
    assert one.checks[0].residual < DEFAULT_TOLERANCES["conjugation"]
    assert full["conjugation"] < DEFAULT_TOLERANCES["conjugation"]


def test_suite_in_higher_dimension():
    rep = run_suite([0.0, 1.2, 0.0, 0.9], k=3, seed=0, sizes={"samples": 1000, "planes": 10, "lattice": 16},
                    checks=["mobius_identities", "plane_bijection", "conjugation", "factorization", "kernel_w_odd"])
    assert rep.passed, rep.to_dict()


def test_perturbed_mobius():
    a = np.array([0.0, 0.3, 0.4])
    x = np.array([[0.1, 0.2, -0.3]])
    assert np.allclose(perturbed_mobius(a, 0.0)(x), mobius(a, x), atol=1e-15)
    assert np.max(np.abs(perturbed_mobius(a, 1e-6)(x) - mobius(a, x))) > 1e-8


def test_mutation_is_detected():
    rep = run_suite([0.0, 0.0, 2.0], seed=0, mutation=1e-6, checks=["factorization"], sizes={"planes": 200})
    assert not rep.passed


def test_suite_errors():
    with pytest.raises(DomainError):
        run_suite([0.0, 0.0, 0.5])
    with pytest.raises(DomainError):
        run_suite([0.0, 0.0, 2.0], checks=["dimension_link"])
    with pytest.raises(DomainError):
        run_suite([0.0, 0.0, 2.0], checks=["nope"])


def test_tolerance_override_can_fail_a_check():
    rep = run_suite([0.0, 0.0, 2.0], seed=0, checks=["conjugation"], tolerances={"conjugation": 0.0}, sizes=FAST)
    assert not rep.passed or rep.checks[0].residual == 0.0
