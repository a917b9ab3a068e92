# -*- coding: utf-8 -*-
"""
Calibration of the global scaling factor eta (absorption ratios) and the
local scaling factor zeta (stretched-state signals), and the Voigt-profile
model behind them: eta = chi V_R(delta), zeta = V_I(delta) / V_R(delta).
"""
import logging

import numpy as np
import scipy.optimize
from scipy.special import wofz

from .errors import (
    AmplitudeNearZero,
    DivisionNearZero,
    FitFailed,
    NonPositiveVoltage,
    NoSpectralPeak,
    SingularDesign,
)
from .fitting import DEFAULT_INITIAL, SHARED_NAMES, SeparableModel, estimate_initial
from .observables import default_observables, expectation
from .qutrit import stretched_state
from .signal import NoiseSpec, synthesize_trace
from .utils import read_json

logger = logging.getLogger("alkatomo")

# Absorption-to-eta prefactor
ETA_PREFACTOR = 27.0 / 16.0
# |<alpha>| of the x-stretched state over <beta> of the z-stretched state for
# the default observables
STRETCHED_RATIO = 1.0 / 10.0
# |A_x| must exceed this many standard errors
AMPLITUDE_SIGNIFICANCE = 5.0

DEFAULT_SIGMA_D = 230e6
DEFAULT_GAMMA_L = 3e6


class LineshapeParams(object):
    """Doppler standard deviation and Lorentzian half-width in Hz"""

    def __init__(self, sigma_d=DEFAULT_SIGMA_D, gamma_l=DEFAULT_GAMMA_L, chi=1.0):
        self.sigma_d = float(sigma_d)
        self.gamma_l = float(gamma_l)
        self.chi = float(chi)
        if not (self.sigma_d > 0 and self.gamma_l > 0):
            raise ValueError(
                "sigma_d and gamma_l must be positive, got {0!r} and {1!r}".format(
                    self.sigma_d, self.gamma_l
                )
            )

    def to_dict(self):
        return {"sigma_d_hz": self.sigma_d, "gamma_l_hz": self.gamma_l, "chi": self.chi}

    @classmethod
    def from_dict(cls, d):
        return cls(d["sigma_d_hz"], d["gamma_l_hz"], d.get("chi", 1.0))


class AbsorptionSample(object):
    """Photodetector voltages in front of (u1) and behind (u2) the cell"""

    def __init__(self, u1, u2, detuning="probe"):
        self.u1 = float(u1)
        self.u2 = float(u2)
        self.detuning = detuning
        if not (self.u1 > 0 and self.u2 > 0):
            raise NonPositiveVoltage(
                "Voltages must be positive, got U1={0!r}, U2={1!r}".format(
                    self.u1, self.u2
                ),
                violation=min(self.u1, self.u2),
            )

    @property
    def ratio(self):
        return self.u2 / self.u1


# ___________________________________________________
# Lineshape


def voigt(delta, lp):
    """
    Complex Voigt profile V_R + i V_I at detuning `delta` (Hz): the Gaussian of
    width sigma_d convolved with the complex Lorentzian of half-width gamma_l.
    """
    z = (np.asarray(delta, dtype=float) + 1j * lp.gamma_l) / (lp.sigma_d * np.sqrt(2.0))
    return wofz(z) / (lp.sigma_d * np.sqrt(2.0 * np.pi))


def zeta_theoretical(delta, lp):
    v = voigt(delta, lp)
    if np.any(np.abs(v.real) < 1e-300):
        raise DivisionNearZero(
            "V_R vanishes at detuning {0!r}".format(delta),
            violation=float(np.min(np.abs(v.real))),
        )
    return v.imag / v.real


def eta_theoretical(delta, lp):
    return lp.chi * voigt(delta, lp).real


def zeta_inverse(target, lp, branch="blue"):
    """
    Detuning where zeta_theoretical equals `target`, by bisection on the
    blue (delta > 0) or red (delta < 0) branch.
    """
    sign = {"blue": 1.0, "red": -1.0}[branch]
    if target == 0:
        return 0.0
    if np.sign(target) != sign:
        raise ValueError(
            "zeta={0!r} is not reachable on the {1} branch".format(target, branch)
        )
    hi = lp.sigma_d
    while abs(zeta_theoretical(sign * hi, lp)) < abs(target):
        hi *= 2.0
        if hi > 1e6 * lp.sigma_d:
            raise ValueError("zeta={0!r} is out of reach".format(target))
    delta = scipy.optimize.bisect(
        lambda d: zeta_theoretical(sign * d, lp) - target,
        0.0,
        hi,
        xtol=1e-6,
        rtol=4.0 * np.finfo(float).eps,
        maxiter=500,
    )
    return sign * delta


# ___________________________________________________
# Global scaling factor


def eta_from_absorption(probe, far):
    """27/16 (sqrt(probe ratio / far ratio) - 1)"""
    for sample in (probe, far):
        if not (sample.u1 > 0 and sample.u2 > 0):
            raise NonPositiveVoltage(
                "Voltages must be positive, got U1={0!r}, U2={1!r}".format(
                    sample.u1, sample.u2
                )
            )
    return ETA_PREFACTOR * (np.sqrt(probe.ratio / far.ratio) - 1.0)


def absorption_ratio_for_eta(eta):
    """Probe-to-far transmission ratio for which eta_from_absorption gives eta"""
    if eta <= -ETA_PREFACTOR:
        raise ValueError("eta must exceed -27/16, got {0!r}".format(eta))
    return (eta / ETA_PREFACTOR + 1.0) ** 2


def synthetic_absorption(eta, far_u1=1.0, far_u2=0.5):
    """A probe/far sample pair reproducing `eta`"""
    far = AbsorptionSample(far_u1, far_u2, "far")
    probe = AbsorptionSample(far_u1, far_u2 * absorption_ratio_for_eta(eta), "probe")
    return probe, far


# ___________________________________________________
# Local scaling factor


def stretched_ratio(observables):
    """
    |<alpha>| of the x-stretched state over <beta> of the z-stretched state,
    and the phase psi of the x-stretched oscillation.
    """
    x = stretched_state("x", 0.0)
    a_R = expectation(x, observables.alpha_R)
    a_I = expectation(x, observables.alpha_I)
    b = expectation(stretched_state("z", 0.0), observables.beta)
    if abs(b) < 1e-300:
        raise DivisionNearZero("<beta> vanishes on the z-stretched state")
    ratio = np.hypot(a_R, a_I) / b
    if not np.isclose(ratio, STRETCHED_RATIO, rtol=1e-12, atol=0.0):
        logger.warning(
            "Observable set %s gives a stretched-state ratio of %.8g, not %.8g",
            observables.name,
            ratio,
            STRETCHED_RATIO,
        )
    return ratio, np.arctan2(a_I, a_R)


class ZetaEstimate(object):
    def __init__(self, zeta, stderr, phi, shared, converged):
        self.zeta = float(zeta)
        self.stderr = float(stderr)
        self.phi = float(phi)
        self.shared = dict(shared)
        self.converged = converged

    def __repr__(self):
        return "ZetaEstimate(zeta={0!r}, stderr={1!r}, phi={2!r})".format(
            self.zeta, self.stderr, self.phi
        )


def zeta_from_stretched(trace_z, trace_x, eta=1.0, observables=None, init=None):
    """
    zeta from the t=0 amplitudes of the z-stretched DC decay (A_z) and the
    x-stretched oscillation (A_x). Both traces are fitted jointly with
    columns (oscillation, DC decay, offset); the nuisance terms are dropped.
    The phase branch is the one on which A_x has the sign of -eta.
    """
    observables = observables or default_observables()
    ratio, psi = stretched_ratio(observables)
    traces = [trace_z, trace_x]

    def basis(theta, k):
        gamma1, gamma2, omega_l, phi = theta
        t = traces[k].times
        return np.column_stack(
            [
                np.exp(-gamma1 * t) * np.sin(2.0 * omega_l * t + phi + psi),
                np.exp(-gamma2 * t),
                np.ones_like(t),
            ]
        )

    model = SeparableModel(
        [t.times for t in traces], [t.values for t in traces], basis
    )
    start = dict(DEFAULT_INITIAL, **(init or {}))
    try:
        start.update(estimate_initial([trace_x], start))
    except NoSpectralPeak as e:
        logger.warning("%s; starting the stretched-state fit from defaults", e)
    theta0 = np.array([start[name] for name in SHARED_NAMES], dtype=float)
    free = np.ones(len(SHARED_NAMES), dtype=bool)
    try:
        model.check_design(theta0)
        theta, iterations, converged = model.fit(theta0, free)
    except SingularDesign as e:
        raise FitFailed("Stretched-state fit failed: {0}".format(e))
    if not converged:
        raise FitFailed(
            "Stretched-state fit did not converge in {0} iterations".format(iterations)
        )

    coefficients = model.solve_linear(theta)
    if coefficients[1][0] * eta < 0:
        theta[3] += np.pi
    theta[3] = np.mod(theta[3] + np.pi, 2.0 * np.pi) - np.pi
    coefficients, _, covariance = model.solution(theta, free)

    # Parameter order: 4 shared, then (osc, dc, const) of trace_z and trace_x
    i_z = len(SHARED_NAMES) + 1
    i_x = len(SHARED_NAMES) + 3
    a_z = coefficients[0][1]
    a_x = -coefficients[1][0]
    sigma_x = np.sqrt(max(covariance[i_x, i_x], 0.0))
    if not abs(a_x) > AMPLITUDE_SIGNIFICANCE * sigma_x:
        raise AmplitudeNearZero(
            "Stretched x oscillation amplitude {0:.3e} is within {1} standard "
            "errors ({2:.3e}) of zero".format(a_x, AMPLITUDE_SIGNIFICANCE, sigma_x),
            violation=float(abs(a_x) / sigma_x) if sigma_x > 0 else 0.0,
        )
    zeta = ratio * a_z / a_x
    gradient = np.array([ratio / a_x, ratio * a_z / a_x ** 2])
    block = covariance[np.ix_([i_z, i_x], [i_z, i_x])]
    stderr = float(np.sqrt(max(gradient @ block @ gradient, 0.0)))
    shared = dict(zip(SHARED_NAMES, map(float, theta)))
    logger.info(
        "Stretched-state calibration: zeta=%.8g +- %.2e, phi=%.6g", zeta, stderr, theta[3]
    )
    return ZetaEstimate(zeta, stderr, theta[3], shared, converged)


def synthesize_stretched_traces(
    params, grid, observables=None, sigma=0.0, seed=0, epsilon=0.0
):
    """Raw z- and x-stretched acquisitions as taken for the zeta calibration"""
    observables = observables or default_observables()
    traces = []
    for index, axis in enumerate(("z", "x")):
        traces.append(
            synthesize_trace(
                stretched_state(axis, epsilon),
                [],
                observables,
                params,
                grid,
                NoiseSpec(sigma, None if seed is None else seed + index),
                pulse_tag="stretched-{0}".format(axis),
            )
        )
    return traces


# ___________________________________________________
# Calibration record


def calibration_record(eta, zeta, zeta_stderr=0.0, detuning_hz=0.0, lineshape=None, phi=0.0):
    return {
        "eta": float(eta),
        "zeta": float(zeta),
        "zeta_stderr": float(zeta_stderr),
        "detuning_hz": float(detuning_hz),
        "lineshape": (lineshape or LineshapeParams()).to_dict(),
        "phi": float(phi),
    }


def load_calibration(path):
    record = read_json(path)
    for key in ("eta", "zeta"):
        if key not in record:
            raise ValueError("Calibration record {0} lacks {1!r}".format(path, key))
    record.setdefault("phi", 0.0)
    return record
