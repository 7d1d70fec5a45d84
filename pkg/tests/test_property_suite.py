import numpy as np
import pytest

from mvexpectile.core import ScoringMatrix
from mvexpectile.properties import PROPERTY_NAMES, run_property_suite


def test_suite_smoke_all_pass():
    reports = run_property_suite(seed=0, instances=12, tol=1e-6)
    assert [r.name for r in reports] == list(PROPERTY_NAMES)
    for r in reports:
        assert r.passed, f"{r.name}: max violation {r.max_violation:.3e}"
        assert r.max_violation <= r.tol
        assert r.instances == 12
        assert r.skipped == 0


def test_suite_single_instance_deterministic():
    a = run_property_suite(seed=7, instances=1, tol=1e-6)
    b = run_property_suite(seed=7, instances=1, tol=1e-6)
    for ra, rb in zip(a, b):
        assert ra == rb


def test_suite_different_seeds_differ():
    a = run_property_suite(seed=1, instances=2, tol=1e-6)
    b = run_property_suite(seed=2, instances=2, tol=1e-6)
    assert any(ra.max_violation != rb.max_violation for ra, rb in zip(a, b))


def test_suite_rejects_zero_instances():
    with pytest.raises(ValueError):
        run_property_suite(instances=0)


def test_broken_sigma_rejected_before_suite():
    with pytest.raises(ValueError):
        ScoringMatrix(np.array([[1.0, 0.5], [0.4, 1.0]]))  # asymmetric
