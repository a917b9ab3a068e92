# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose

import alkatomo
from alkatomo.errors import NonUnitAxis, NotHermitian, NotPSD, TraceNotOne
from alkatomo.qutrit import (
    FX,
    FY,
    FZ,
    apply_pulse,
    devectorize,
    fidelity,
    load_state,
    make_density_matrix,
    mixed_state,
    project_onto_simplex,
    project_to_physical,
    pulse_product,
    purity,
    random_state,
    save_state,
    spin1_rotation,
    stretched_state,
    vectorize,
)


def test_spin_matrices_commute_like_angular_momentum():
    assert_allclose(FX @ FY - FY @ FX, 1j * FZ, atol=1e-15)
    assert_allclose(FY @ FZ - FZ @ FY, 1j * FX, atol=1e-15)
    assert_allclose(FX @ FX + FY @ FY + FZ @ FZ, 2.0 * np.eye(3), atol=1e-15)


def test_make_density_matrix_rejects_invalid_input():
    with pytest.raises(NotHermitian):
        make_density_matrix([[0.5, 0.1, 0], [0.2, 0.5, 0], [0, 0, 0]])
    with pytest.raises(TraceNotOne) as e:
        make_density_matrix(np.eye(3))
    assert e.value.violation == pytest.approx(2.0)
    with pytest.raises(NotPSD):
        make_density_matrix(np.diag([1.5, -0.5, 0.0]))


def test_density_matrix_is_read_only():
    rho = random_state(3)
    with pytest.raises(ValueError):
        rho.entries[0, 0] = 1.0


def test_vectorize_roundtrip():
    rho = random_state(5)
    v = vectorize(rho)
    assert v.shape == (8,)
    assert_allclose(devectorize(v), rho.entries, atol=1e-15)


def test_random_state_is_deterministic_and_valid():
    a = random_state(11)
    b = random_state(11)
    assert a == b
    assert a != random_state(12)
    assert np.trace(a.entries).real == pytest.approx(1.0, abs=1e-12)
    assert a.eigenvalues().min() > 0


def test_rotation_about_z_is_diagonal():
    u = spin1_rotation("z", np.pi / 2)
    assert_allclose(u.matrix, np.diag([1j, 1.0, -1j]), atol=1e-14)


def test_rotation_rejects_non_unit_axis():
    with pytest.raises(NonUnitAxis):
        spin1_rotation([1.0, 1.0, 0.0], 0.3)


def test_pulse_product_applies_first_argument_first():
    x = spin1_rotation("x", 0.3)
    y = spin1_rotation("y", 1.1)
    assert_allclose(pulse_product(x, y).matrix, y.matrix @ x.matrix, atol=1e-15)
    assert_allclose((x.H.matrix @ x.matrix), np.eye(3), atol=1e-13)


def test_rotations_about_one_axis_compose(rng):
    for _ in range(100):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        a, b = rng.uniform(-2 * np.pi, 2 * np.pi, size=2)
        product = spin1_rotation(axis, b).matrix @ spin1_rotation(axis, a).matrix
        assert_allclose(product, spin1_rotation(axis, a + b).matrix, atol=1e-10)


def test_pi_about_y_flips_the_orientation():
    up = stretched_state("z")
    flipped = apply_pulse(up, spin1_rotation("y", np.pi))
    assert np.trace(up.entries @ FZ).real == pytest.approx(1.0, abs=1e-12)
    assert np.trace(flipped.entries @ FZ).real == pytest.approx(-1.0, abs=1e-12)


def test_pulses_preserve_the_spectrum(rng):
    for seed in range(20):
        rho = random_state(seed)
        axis = rng.normal(size=3)
        pulse = spin1_rotation(axis / np.linalg.norm(axis), rng.uniform(0, 2 * np.pi))
        rotated = apply_pulse(rho, pulse)
        assert_allclose(rotated.eigenvalues(), rho.eigenvalues(), atol=1e-12)


def test_random_states_average_to_the_mixed_state():
    total = np.zeros((3, 3), dtype=complex)
    n = 10 ** 4
    for seed in range(n):
        rho = random_state(seed)
        make_density_matrix(rho.entries)
        total += rho.entries
    assert np.linalg.norm(total / n - np.eye(3) / 3.0) < 0.02


@pytest.mark.parametrize(
    "axis, spin", [("x", FX), ("y", FY), ("z", FZ)]
)
@pytest.mark.parametrize("epsilon", [0.0, 0.5])
def test_stretched_states_point_along_their_axis(axis, spin, epsilon):
    rho = stretched_state(axis, epsilon)
    assert np.trace(rho.entries @ spin).real == pytest.approx(1.0 - epsilon, abs=1e-12)
    assert purity(rho) <= 1.0 + 1e-12


def test_stretched_z_populates_m_plus_one():
    assert_allclose(stretched_state("z").populations(), [0.0, 0.0, 1.0], atol=1e-15)


def test_fidelity():
    rho = random_state(2)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
    up = stretched_state("z")
    down = make_density_matrix(np.diag([1.0, 0.0, 0.0]))
    assert fidelity(up, down) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(up, mixed_state()) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_fidelity_is_symmetric():
    for seed in range(20):
        a = random_state(seed)
        b = random_state(1000 + seed)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-9)
    x = stretched_state("x", 0.2)
    z = stretched_state("z", 0.5)
    assert fidelity(z, x) == pytest.approx(fidelity(x, z), abs=1e-9)


def test_project_onto_simplex():
    assert_allclose(project_onto_simplex([0.6, 0.6, -0.2]), [0.5, 0.5, 0.0], atol=1e-15)
    assert_allclose(project_onto_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], atol=1e-15)


def test_projection_leaves_physical_states_alone():
    rho = random_state(4)
    assert_allclose(project_to_physical(rho.entries).entries, rho.entries, atol=1e-15)


def test_projection_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        project_to_physical([[0.5, 1.0, 0], [0.0, 0.5, 0], [0, 0, 0]])


def _random_non_psd(rng):
    h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = h + h.conj().T
    w, v = np.linalg.eigh(h)
    w = w - (w.sum() - 1.0) / 3.0
    if w.min() >= 0:
        w = w + np.array([-1.0, 0.5, 0.5]) * (w.min() + 0.2)
    return (v * w) @ v.conj().T


def _random_physical(rng, n):
    """n Ginibre states and n pure states, stacked"""
    g = rng.normal(size=(n, 3, 3)) + 1j * rng.normal(size=(n, 3, 3))
    mixed = g @ g.conj().transpose(0, 2, 1)
    mixed /= np.trace(mixed, axis1=1, axis2=2).real[:, None, None]
    v = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    pure = v[:, :, None] * v.conj()[:, None, :]
    return np.concatenate([mixed, pure])


def test_projection_of_a_diagonal_matrix():
    rho = project_to_physical(np.diag([1.2, 0.1, -0.3]))
    assert_allclose(rho.entries, np.diag([1.0, 0.0, 0.0]), atol=1e-15)


def test_projection_requires_unit_trace():
    with pytest.raises(TraceNotOne) as e:
        project_to_physical(np.diag([0.5, 0.3, 0.1]))
    assert e.value.violation == pytest.approx(0.1)
    # Within the 1e-9 tolerance the trace is accepted
    assert project_to_physical(np.diag([0.5, 0.3, 0.2 + 5e-10])).entries.shape == (3, 3)


def test_projection_is_frobenius_closest(rng):
    candidates = _random_physical(rng, 500)
    for _ in range(20):
        h = _random_non_psd(rng)
        best = np.linalg.norm(h - project_to_physical(h).entries)
        distances = np.linalg.norm(candidates - h, axis=(1, 2))
        assert distances.min() >= best - 1e-12


@pytest.mark.slow
def test_projection_beats_random_candidates_at_scale(rng):
    candidates = _random_physical(rng, 50000)
    assert len(candidates) == 10 ** 5
    for _ in range(100):
        h = _random_non_psd(rng)
        assert np.linalg.eigvalsh(h)[0] < 0
        best = np.linalg.norm(h - project_to_physical(h).entries)
        distances = np.linalg.norm(candidates - h, axis=(1, 2))
        assert distances.min() >= best - 1e-12


def test_state_json_roundtrip(tmp_path):
    rho = random_state(8)
    path = str(tmp_path / "state.json")
    save_state(path, rho)
    assert_allclose(load_state(path).entries, rho.entries, atol=0)


def test_package_exports():
    assert alkatomo.fidelity is fidelity
    assert alkatomo.version
