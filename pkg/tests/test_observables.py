# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose

from alkatomo.errors import CyclopsConventionMismatch, NotHermitian
from alkatomo.observables import (
    SURVIVING,
    ObservableSet,
    conjugate,
    cyclops_pulse,
    default_plan,
    expectation,
    literal_observables,
    load_observables,
    plan_from_dict,
    rotated_row,
    row_from_operator,
    validate_cyclops,
)
from alkatomo.qutrit import (
    FX,
    FY,
    FZ,
    random_state,
    spin1_rotation,
    stretched_state,
    vectorize,
)
from alkatomo.utils import write_json


def test_default_observables_in_spin_operators(observables):
    assert_allclose(observables.beta, 5.0 / 24.0 * FZ, atol=1e-15)
    assert_allclose(observables.alpha_R, -(FX @ FX - FY @ FY) / 24.0, atol=1e-15)
    assert_allclose(observables.alpha_I, -(FX @ FY + FY @ FX) / 24.0, atol=1e-15)


def test_default_observables_pass_cyclops(observables):
    report = validate_cyclops(observables)
    assert report.passed
    assert len(report.checks) == 6


def test_literal_observables_fail_cyclops():
    report = validate_cyclops(literal_observables())
    assert not report.passed
    assert "FAILED" in str(report)
    with pytest.raises(CyclopsConventionMismatch):
        load_observables("amplitude-literal")
    assert load_observables("amplitude-literal", allow_nonstandard=True).name == (
        "amplitude-literal"
    )


def test_cyclops_pulse_flips_the_surviving_quadrature(observables):
    # The surviving quadrature flips sign, so base - cycled doubles it
    for variant, (key, _) in SURVIVING.items():
        operator = getattr(observables, key)
        assert_allclose(
            conjugate(operator, cyclops_pulse(variant)), -operator, atol=1e-13
        )
        other = "alpha_R" if key == "alpha_I" else "alpha_I"
        operator = getattr(observables, other)
        assert_allclose(
            conjugate(operator, cyclops_pulse(variant)), operator, atol=1e-13
        )


def test_observable_set_validation():
    with pytest.raises(NotHermitian):
        ObservableSet(np.triu(np.ones((3, 3))), np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ObservableSet(FX, np.zeros((3, 3)), FZ)


def test_affine_row_matches_expectation(observables):
    rho = random_state(21)
    pulse = spin1_rotation([0.0, 0.6, 0.8], 1.3)
    for _, operator in observables.items():
        direct = expectation(
            rho, pulse.matrix.conj().T @ operator @ pulse.matrix
        )
        assert rotated_row(operator, pulse).evaluate(vectorize(rho)) == pytest.approx(
            direct, abs=1e-14
        )
    hermitian = FX @ FZ + FZ @ FX + 0.3 * FY
    assert row_from_operator(hermitian).evaluate(vectorize(rho)) == pytest.approx(
        expectation(rho, hermitian), abs=1e-14
    )


def test_rotated_row_is_linear_in_the_operator(observables, rng):
    A, B = observables.alpha_R, observables.beta
    for _ in range(20):
        axis = rng.normal(size=3)
        pulse = spin1_rotation(axis / np.linalg.norm(axis), rng.uniform(0, 2 * np.pi))
        a, b, scale = rng.normal(size=3)
        combined = rotated_row(a * A + b * B, pulse, scale)
        row_a = rotated_row(A, pulse, scale)
        row_b = rotated_row(B, pulse, scale)
        assert_allclose(combined.row, a * row_a.row + b * row_b.row, atol=1e-14)
        assert combined.offset == pytest.approx(
            a * row_a.offset + b * row_b.offset, abs=1e-14
        )


def test_rows_at_identity(observables):
    identity = spin1_rotation("z", 0.0)
    alpha_R = rotated_row(observables.alpha_R, identity)
    assert_allclose(alpha_R.row, [0, 0, 0, -1.0 / 12, 0, 0, 0, 0], atol=1e-15)
    assert alpha_R.offset == 0.0
    alpha_I = rotated_row(observables.alpha_I, identity)
    assert_allclose(alpha_I.row, [0, 0, 0, 0, -1.0 / 12, 0, 0, 0], atol=1e-15)
    beta = rotated_row(observables.beta, identity, 0.3)
    assert_allclose(beta.row, 0.3 * np.array([-5.0 / 12, 0, 0, 0, 0, -5.0 / 24, 0, 0]))
    assert beta.offset == pytest.approx(0.3 * 5.0 / 24.0)


def test_stretched_state_expectations(observables):
    x = stretched_state("x")
    assert expectation(x, observables.alpha_R) == pytest.approx(-1.0 / 48.0, abs=1e-15)
    assert expectation(x, observables.alpha_I) == pytest.approx(0.0, abs=1e-15)
    assert expectation(x, observables.beta) == pytest.approx(0.0, abs=1e-15)
    assert expectation(stretched_state("z"), observables.beta) == pytest.approx(
        5.0 / 24.0
    )
    # The other phase convention carries the coherence in alpha_I
    literal = literal_observables()
    assert expectation(x, literal.alpha_I) == pytest.approx(-1.0 / 48.0, abs=1e-15)
    assert expectation(x, literal.alpha_R) == pytest.approx(0.0, abs=1e-15)


def test_alpha_I_vanishes_on_real_coherence(observables):
    rho = np.array([[0.3, 0.0, 0.2], [0.0, 0.3, 0.0], [0.2, 0.0, 0.4]])
    assert expectation(rho, observables.alpha_I) == pytest.approx(0.0, abs=1e-16)
    assert expectation(rho, observables.alpha_R) != 0.0


def test_observables_from_json(tmp_path, observables):
    path = str(tmp_path / "obs.json")
    write_json(path, observables.to_dict())
    loaded = load_observables(path)
    for key, operator in observables.items():
        assert_allclose(getattr(loaded, key), operator, atol=0)


def test_default_plan():
    plan = default_plan(0.3, repetitions=2)
    assert plan.tags == ["I", "X90", "Y90"]
    acquisitions = list(plan.acquisitions())
    assert len(acquisitions) == 9
    assert [a[2] for a in acquisitions[:3]] == [None, "Y", "ZY"]
    assert all(entry.repetitions == 2 for entry in plan.entries)
    again = plan_from_dict(plan.to_dict())
    assert again.tags == plan.tags
    assert again.zeta == 0.3
    assert_allclose(again.entries[1].pulse.matrix, plan.entries[1].pulse.matrix)


def test_plan_rejects_duplicate_tags():
    with pytest.raises(ValueError):
        plan_from_dict(
            {
                "zeta": 0.3,
                "pulses": [
                    {"tag": "A", "axis": "x", "angle": 0.1},
                    {"tag": "A", "axis": "y", "angle": 0.1},
                ],
            }
        )


def test_plan_rejects_tags_unsafe_for_trace_files():
    for tag in ("a;b", "a=b", "a/b", ""):
        with pytest.raises(ValueError):
            plan_from_dict(
                {"zeta": 0.3, "pulses": [{"tag": tag, "axis": "x", "angle": 0.1}]}
            )


def test_untagged_plan_gets_file_safe_tags():
    plan = plan_from_dict(
        {
            "zeta": 0.3,
            "pulses": [
                {"axis": "z", "angle": 0.0},
                {"axis": "x", "angle": np.pi / 2},
            ],
        }
    )
    for tag in plan.tags:
        assert tag.startswith("R(")
        assert not set(tag) & set(";=/")
    assert len(set(plan.tags)) == 2
