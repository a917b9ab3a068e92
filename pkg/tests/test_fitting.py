# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose

from alkatomo.errors import NoSpectralPeak, SingularDesign
from alkatomo.fitting import (
    SHARED_NAMES,
    FitModelSpec,
    SeparableModel,
    canonical_phase,
    estimate_initial,
    fit_result_from_dict,
    joint_fit,
    linear_amplitudes,
    residual_jacobian,
)
from alkatomo.observables import SURVIVING
from alkatomo.signal import SignalTrace, synthesize_trace_set


def combined_traces(trace_set):
    return [trace_set.combined[key] for key in sorted(trace_set.combined)]


def true_amplitudes(trace_set, trace):
    expectations = trace_set.base(trace.pulse).meta["expectations"]
    return expectations[SURVIVING[trace.variant][0]], expectations["beta"]


# ___________________________________________________
# Separable engine


def test_separable_model_single_exponential():
    t = np.linspace(0.0, 2.0, 200)
    y = 2.0 * np.exp(-1.5 * t) + 0.5

    def basis(theta, k):
        return np.column_stack([np.exp(-theta[0] * t), np.ones_like(t)])

    model = SeparableModel([t], [y], basis)
    theta, iterations, converged = model.fit(np.array([1.0]), np.array([True]))
    assert converged
    assert iterations > 0
    assert theta[0] == pytest.approx(1.5, rel=1e-8)
    assert_allclose(model.solve_linear(theta)[0], [2.0, 0.5], rtol=1e-8)


def test_separable_model_reports_evaluation_limit():
    t = np.linspace(0.0, 2.0, 200)
    y = 2.0 * np.exp(-1.5 * t) + 0.5

    def basis(theta, k):
        return np.column_stack([np.exp(-theta[0] * t), np.ones_like(t)])

    model = SeparableModel([t], [y], basis)
    theta, iterations, converged = model.fit(
        np.array([0.2]), np.array([True]), max_iterations=2
    )
    assert not converged
    assert iterations >= 2
    # Nothing free: theta comes back untouched
    theta, iterations, converged = model.fit(np.array([0.2]), np.array([False]))
    assert converged and iterations == 0 and theta[0] == 0.2


def test_separable_model_rejects_dependent_columns():
    t = np.linspace(0.0, 1.0, 100)

    def basis(theta, k):
        column = np.exp(-theta[0] * t)
        return np.column_stack([column, 2.0 * column])

    model = SeparableModel([t], [np.zeros_like(t)], basis)
    with pytest.raises(SingularDesign):
        model.check_design(np.array([1.0]))


# ___________________________________________________
# Initial estimates


def test_estimate_initial_finds_the_larmor_frequency(trace_set, params):
    initial = estimate_initial(combined_traces(trace_set))
    assert initial["omega_l"] == pytest.approx(params.omega_l, rel=5e-3)
    assert initial["gamma1"] > 0
    assert initial["gamma2"] > 0


def test_estimate_initial_input_checks(trace_set, grid):
    with pytest.raises(ValueError):
        estimate_initial([])
    short = SignalTrace(grid[:32], np.ones(32))
    with pytest.raises(ValueError):
        estimate_initial([short])


def test_no_spectral_peak_without_oscillation(grid):
    with pytest.raises(NoSpectralPeak):
        estimate_initial([SignalTrace(grid, np.zeros_like(grid))])
    with pytest.raises(NoSpectralPeak):
        estimate_initial([SignalTrace(grid, -0.1 * np.exp(-3.0 * grid))])


# ___________________________________________________
# Phase branch


def test_canonical_phase():
    phi, flipped = canonical_phase(0.3, 0.0)
    assert phi == pytest.approx(0.3)
    assert not flipped
    phi, flipped = canonical_phase(4.0, 0.0)
    assert phi == pytest.approx(4.0 - np.pi)
    assert flipped
    phi, flipped = canonical_phase(7.0, 0.0)
    assert phi == pytest.approx(7.0 - 2.0 * np.pi)
    assert not flipped
    phi, flipped = canonical_phase(0.3, 2.0)
    assert phi == pytest.approx(0.3 + np.pi)
    assert flipped


# ___________________________________________________
# Joint fit


def test_joint_fit_recovers_amplitudes(trace_set, params):
    traces = combined_traces(trace_set)
    spec = FitModelSpec(traces, eta=params.eta, zeta=params.zeta)
    result = joint_fit(spec, estimate_initial(traces))
    assert result.converged
    assert result.shared["omega_l"] == pytest.approx(params.omega_l, rel=1e-8)
    assert result.shared["gamma1"] == pytest.approx(params.gamma1, rel=1e-6)
    assert result.shared["gamma2"] == pytest.approx(params.gamma2, rel=1e-6)
    assert result.shared["phi"] == pytest.approx(params.phi, abs=1e-7)
    assert result.residual_rms < 1e-10
    for trace in traces:
        entry = result.trace(trace.pulse, trace.variant)
        a, b = true_amplitudes(trace_set, trace)
        assert entry["quadrature"] == SURVIVING[trace.variant][1]
        assert entry["a"] == pytest.approx(a, abs=1e-7)
        assert entry["b"] == pytest.approx(b, abs=1e-7)
    with pytest.raises(KeyError):
        result.trace("X90", None)


def test_amplitudes_solve_the_linear_subproblem_at_the_optimum(
    rho, plan, observables, params, grid
):
    noisy = synthesize_trace_set(rho, plan, observables, params, grid, 1e-3, 4)
    traces = combined_traces(noisy)
    spec = FitModelSpec(traces, eta=params.eta, zeta=params.zeta)
    result = joint_fit(spec, estimate_initial(traces))
    for trace, (A, B) in zip(traces, linear_amplitudes(spec, result.shared)):
        entry = result.trace(trace.pulse, trace.variant)
        assert abs(entry["A"] - A) < 1e-14
        assert abs(entry["B"] - B) < 1e-14


def test_joint_fit_phase_branch_flips_amplitudes(trace_set, params):
    traces = combined_traces(trace_set)
    spec = FitModelSpec(
        traces, eta=params.eta, zeta=params.zeta, phi_reference=params.phi + np.pi - 0.1
    )
    result = joint_fit(spec, estimate_initial(traces))
    assert result.shared["phi"] == pytest.approx(params.phi + np.pi, abs=1e-7)
    for trace in traces:
        a, b = true_amplitudes(trace_set, trace)
        entry = result.trace(trace.pulse, trace.variant)
        assert entry["a"] == pytest.approx(-a, abs=1e-7)
        assert entry["b"] == pytest.approx(b, abs=1e-7)


def test_joint_fit_with_fixed_parameters(trace_set, params):
    traces = combined_traces(trace_set)
    spec = FitModelSpec(
        traces, eta=params.eta, zeta=params.zeta, fixed={"omega_l": params.omega_l}
    )
    assert list(spec.free) == [True, True, False, True]
    result = joint_fit(spec, estimate_initial(traces))
    assert result.shared["omega_l"] == params.omega_l
    assert result.shared_stderr["omega_l"] == 0.0
    document = result.to_dict()
    assert document["shared"]["omega_l"]["fixed"]
    again = fit_result_from_dict(document)
    assert again.fixed == ("omega_l",)
    assert again.shared == result.shared
    assert again.per_trace[0]["a"] == result.per_trace[0]["a"]


def test_joint_fit_with_noise(rho, plan, observables, params, grid):
    noisy = synthesize_trace_set(rho, plan, observables, params, grid, 2e-4, 11)
    traces = combined_traces(noisy)
    result = joint_fit(
        FitModelSpec(traces, eta=params.eta, zeta=params.zeta), estimate_initial(traces)
    )
    assert result.converged
    # Combined traces carry twice the per-trace noise variance
    assert result.residual_rms == pytest.approx(np.sqrt(2.0) * 2e-4, rel=0.05)
    for trace in traces:
        a, b = true_amplitudes(noisy, trace)
        entry = result.trace(trace.pulse, trace.variant)
        assert entry["a_stderr"] > 0
        assert abs(entry["a"] - a) < 5.0 * entry["a_stderr"]
        assert abs(entry["b"] - b) < 5.0 * entry["b_stderr"]
    for name in SHARED_NAMES:
        assert abs(result.shared[name] - getattr(params, name)) < (
            5.0 * result.shared_stderr[name]
        )


def test_fit_model_spec_checks():
    grid = np.linspace(0.0, 1.0, 100)
    base = SignalTrace(grid, np.zeros_like(grid), {"pulse": "I", "variant": None})
    cycled = SignalTrace(grid, np.zeros_like(grid), {"pulse": "I", "variant": "Y"})
    with pytest.raises(ValueError):
        FitModelSpec([base])
    with pytest.raises(ValueError):
        FitModelSpec([])
    with pytest.raises(ValueError):
        FitModelSpec([cycled], eta=0.0)
    with pytest.raises(ValueError):
        FitModelSpec([cycled], fixed={"chi": 1.0})
    with pytest.raises(ValueError):
        FitModelSpec([cycled], selectors=["tan"])
    assert FitModelSpec([cycled]).selectors == ["cos"]


def test_linear_amplitudes_and_jacobian(trace_set, params):
    traces = combined_traces(trace_set)
    spec = FitModelSpec(traces, eta=params.eta, zeta=params.zeta)
    truth = {name: getattr(params, name) for name in SHARED_NAMES}
    for trace, (A, B) in zip(traces, linear_amplitudes(spec, truth)):
        a, b = true_amplitudes(trace_set, trace)
        assert A == pytest.approx(2.0 * params.eta * a, abs=1e-12)
        assert B == pytest.approx(2.0 * params.eta * params.zeta * b, abs=1e-12)
    J = residual_jacobian(spec, truth)
    assert J.shape == (sum(len(t) for t in traces), 4)
    assert_allclose(
        residual_jacobian(spec, truth, step_scale=0.5), J, atol=1e-6 * np.abs(J).max()
    )
