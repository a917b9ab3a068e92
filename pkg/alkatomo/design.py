# -*- coding: utf-8 -*-
"""
Conditioning of the tomography scheme: the analytic spectrum of C, kappa as
a function of zeta and of the probe detuning, and the measurement-repetition
optimizer.
"""
import itertools
import logging

import numpy as np
import scipy.linalg
import scipy.optimize

from .calib import zeta_theoretical
from .errors import BudgetTooSmall, EmptyRange, SingularSystem
from .observables import default_observables, default_plan
from .qutrit import random_state, vectorize
from .tomo import (
    SINGULAR_RTOL,
    CoefficientMatrix,
    ObservationVector,
    build_coefficient_matrix,
    condition_number,
    normal_equations,
    solve_state,
)

logger = logging.getLogger("alkatomo")

FIXED_EIGENVALUES = (1.0 / 100, 1.0 / 150, 1.0 / 225, 1.0 / 225, 1.0 / 225)
ZETA_EIGENVALUE_FACTORS = (1.0 / 18, 1.0 / 9, 1.0 / 9)
KAPPA_OPTIMUM = 2.25
SCAN_RESOLUTION_HZ = 1e3


def analytic_spectrum(zeta):
    """The eight eigenvalues of C at zeta, ascending"""
    scaled = [zeta ** 2 * f for f in ZETA_EIGENVALUE_FACTORS]
    return np.sort(np.array(list(FIXED_EIGENVALUES) + scaled, dtype=float))


def _kappa_curve(zeta):
    """Vectorized kappa_of_zeta, inf where zeta = 0"""
    z2 = np.asarray(zeta, dtype=float) ** 2
    largest = np.maximum(FIXED_EIGENVALUES[0], z2 * max(ZETA_EIGENVALUE_FACTORS))
    smallest = np.minimum(FIXED_EIGENVALUES[-1], z2 * min(ZETA_EIGENVALUE_FACTORS))
    with np.errstate(divide="ignore"):
        return np.where(smallest > 0, largest / np.where(smallest > 0, smallest, 1.0), np.inf)


def kappa_of_zeta(zeta):
    if zeta == 0:
        raise SingularSystem("C is singular at zeta = 0", violation=0.0)
    return float(_kappa_curve(zeta))


def minimize_kappa(lp, delta_range, resolution=SCAN_RESOLUTION_HZ):
    """
    Probe detuning in `delta_range` that minimizes kappa(zeta_theoretical):
    a grid scan followed by a bounded golden-section refinement around the
    best grid point. Returns (delta, zeta, kappa).
    """
    lo, hi = map(float, delta_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise EmptyRange("Detuning range [{0!r}, {1!r}] is empty".format(lo, hi))

    def kappa_at(delta):
        return float(_kappa_curve(zeta_theoretical(delta, lp)))

    if lo == hi:
        return lo, float(zeta_theoretical(lo, lp)), kappa_at(lo)
    n = int(np.ceil((hi - lo) / resolution)) + 1
    grid = np.linspace(lo, hi, n)
    kappas = _kappa_curve(zeta_theoretical(grid, lp))
    i = int(np.argmin(kappas))
    best_delta, best_kappa = grid[i], float(kappas[i])
    bounds = (grid[max(i - 1, 0)], grid[min(i + 1, n - 1)])
    if bounds[1] > bounds[0]:
        refined = scipy.optimize.minimize_scalar(
            kappa_at, bounds=bounds, method="bounded", options={"xatol": 1e-3}
        )
        if refined.success and refined.fun < best_kappa:
            best_delta, best_kappa = float(refined.x), float(refined.fun)
    zeta = float(zeta_theoretical(best_delta, lp))
    logger.info(
        "Minimal kappa %.6g at detuning %.6g Hz (zeta=%.6g)", best_kappa, best_delta, zeta
    )
    return best_delta, zeta, best_kappa


def kappa_scan(lp, delta_range, step):
    """Rows (detuning_hz, zeta, kappa) over the range"""
    lo, hi = map(float, delta_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi or step <= 0:
        raise EmptyRange("Cannot scan [{0!r}, {1!r}] in steps of {2!r}".format(lo, hi, step))
    deltas = np.arange(lo, hi + 0.5 * step, step)
    zetas = zeta_theoretical(deltas, lp)
    return list(zip(deltas.tolist(), zetas.tolist(), _kappa_curve(zetas).tolist()))


class SpectrumReport(object):
    """Constructed vs analytic spectrum after the best global scale"""

    def __init__(self, eigenvalues, analytic, scale, deviation):
        self.eigenvalues = eigenvalues
        self.analytic = analytic
        self.scale = scale
        self.deviation = deviation

    def to_dict(self):
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "analytic": [float(x) for x in self.analytic],
            "scale": float(self.scale),
            "max_relative_deviation": float(self.deviation),
        }


def kappa_from_matrix_vs_analytic(cm, zeta):
    """
    Compares the eigenvalues of O^T O with analytic_spectrum(zeta) up to the
    scale factor fitted by least squares in log space.
    """
    eigenvalues = scipy.linalg.eigvalsh(cm.O.T @ cm.O)
    analytic = analytic_spectrum(zeta)
    if eigenvalues[0] <= 0 or analytic[0] <= 0:
        return SpectrumReport(eigenvalues, analytic, np.nan, np.inf)
    log_scale = np.mean(np.log(analytic) - np.log(eigenvalues))
    scale = np.exp(log_scale)
    deviation = np.max(np.abs(scale * eigenvalues / analytic - 1.0))
    return SpectrumReport(eigenvalues, analytic, scale, deviation)


def analytic_design(zeta):
    """Coefficient matrix whose normal matrix has exactly analytic_spectrum(zeta)"""
    spectrum = analytic_spectrum(zeta)
    return CoefficientMatrix(
        np.diag(np.sqrt(spectrum)),
        np.zeros(8),
        [("analytic", str(i)) for i in range(8)],
        np.ones(8),
        zeta=zeta,
    )


# ___________________________________________________
# Repetitions


def _rows(cm):
    return cm.O if isinstance(cm, CoefficientMatrix) else np.asarray(cm, dtype=float)


def _weighted_kappa(O, counts):
    w = scipy.linalg.eigvalsh(O.T @ (counts[:, None] * O))
    if w[0] <= SINGULAR_RTOL * w[-1]:
        return np.inf
    return w[-1] / w[0]


class RepetitionAssignment(object):
    """
    Repetition count per row. `kappa_trace` is the lowest kappa reached along
    the greedy path after each step (the first entry is at unit weights),
    `step_kappa` the kappa of the assignment after each step.
    """

    def __init__(self, counts, budget, kappa_trace, step_kappa):
        self.counts = [int(c) for c in counts]
        self.budget = int(budget)
        self.kappa_trace = [float(k) for k in kappa_trace]
        self.step_kappa = [float(k) for k in step_kappa]

    @property
    def kappa(self):
        return self.step_kappa[-1]

    def to_dict(self):
        return {
            "counts": self.counts,
            "budget": self.budget,
            "kappa_trace": self.kappa_trace,
            "step_kappa": self.step_kappa,
        }


def _check_budget(O, budget):
    if budget < len(O):
        raise BudgetTooSmall(
            "Budget {0} is smaller than the number of rows {1}".format(budget, len(O)),
            violation=len(O) - budget,
        )
    # Raises SingularSystem for a plan without full rank
    condition_number(O.T @ O)


def optimize_repetitions(cm, budget):
    """
    Greedy: starting from one repetition per row, repeatedly add the single
    repetition that gives the lowest kappa (ties to the lowest row index)
    until the budget is spent.
    """
    O = _rows(cm)
    _check_budget(O, budget)
    counts = np.ones(len(O))
    step_kappa = [_weighted_kappa(O, counts)]
    for _ in range(int(budget) - len(O)):
        candidates = []
        for i in range(len(O)):
            counts[i] += 1
            candidates.append(_weighted_kappa(O, counts))
            counts[i] -= 1
        best = int(np.argmin(candidates))
        counts[best] += 1
        step_kappa.append(candidates[best])
        logger.debug("Repeated row %s, kappa=%.6g", best, candidates[best])
    kappa_trace = np.minimum.accumulate(step_kappa)
    return RepetitionAssignment(counts, budget, kappa_trace, step_kappa)


def exhaustive_repetitions(cm, budget):
    """Lowest kappa over every assignment of the budget; returns (counts, kappa)"""
    O = _rows(cm)
    _check_budget(O, budget)
    best_counts, best_kappa = None, np.inf
    for extra in itertools.combinations_with_replacement(range(len(O)), int(budget) - len(O)):
        counts = np.ones(len(O))
        np.add.at(counts, list(extra), 1)
        kappa = _weighted_kappa(O, counts)
        if kappa < best_kappa:
            best_counts, best_kappa = counts.astype(int).tolist(), kappa
    return best_counts, float(best_kappa)


# ___________________________________________________
# Reconstruction error versus conditioning


def uncertainty_vs_kappa(zetas, rel_noise, n_trials=100, seed=0, observables=None):
    """
    For the default plan at each zeta: kappa of C and the mean relative
    error |d rho_V| / |rho_V| of the linear inversion of random states when
    the observation vector is perturbed by noise of relative norm `rel_noise`.
    """
    observables = observables or default_observables()
    rows = []
    for i, zeta in enumerate(zetas):
        cm = build_coefficient_matrix(default_plan(zeta), observables)
        kappa = condition_number(cm.normal_matrix())
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), i]))
        errors = []
        for _ in range(int(n_trials)):
            truth = vectorize(random_state(int(rng.integers(2 ** 32))))
            b = cm.O @ truth
            direction = rng.normal(size=len(b))
            direction *= rel_noise * np.linalg.norm(b) / np.linalg.norm(direction)
            C, b_tilde = normal_equations(cm, ObservationVector(b + direction))
            estimate = solve_state(C, b_tilde)
            errors.append(np.linalg.norm(estimate - truth) / np.linalg.norm(truth))
        rows.append(
            {
                "zeta": float(zeta),
                "kappa": float(kappa),
                "mean_relative_error": float(np.mean(errors)),
                "max_relative_error": float(np.max(errors)),
            }
        )
    return rows
