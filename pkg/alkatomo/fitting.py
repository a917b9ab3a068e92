# -*- coding: utf-8 -*-
"""
Joint separable least-squares fit of CYCLOPS-combined traces.

Every trace k is modelled as Phi_k(theta) c_k with shared nonlinear
parameters theta = (gamma1, gamma2, omega_l, phi) and per-trace linear
coefficients c_k. For fixed theta the c_k follow from a linear solve, so the
Levenberg-Marquardt fit (scipy.optimize.least_squares) only ever sees the
projected residual.
"""
import logging

import numpy as np
import scipy.optimize
from scipy.ndimage import uniform_filter1d

from .errors import NoSpectralPeak, SingularDesign
from .observables import SURVIVING

logger = logging.getLogger("alkatomo")

SHARED_NAMES = ("gamma1", "gamma2", "omega_l", "phi")
QUADRATURES = ("cos", "sin")

MAX_ITERATIONS = 500
COST_RTOL = 1e-12
STEP_TOL = 1e-10
JACOBIAN_STEP = 1e-6
RANK_RTOL = 1e-12

MIN_SAMPLES = 64
PAD_FACTOR = 8
PEAK_TIE_RTOL = 0.01
PEAK_CONTRAST = 8.0
# Oscillations slower than this many cycles per record are treated as drift
MIN_CYCLES = 5.0

DEFAULT_INITIAL = {
    "gamma1": 3.0,
    "gamma2": 3.0,
    "omega_l": 2.0 * np.pi * 20.0,
    "phi": 0.0,
}


def _quadrature(selector, phase):
    return np.cos(phase) if selector == "cos" else np.sin(phase)


# ___________________________________________________
# Generic separable engine


class SeparableModel(object):
    """
    Least-squares problem sum_k |y_k - Phi_k(theta) c_k|^2.

    `basis(theta, k)` returns the (n_k, p_k) column matrix of trace k.
    """

    def __init__(self, times, data, basis):
        self.times = [np.asarray(t, dtype=float) for t in times]
        self.data = [np.asarray(y, dtype=float) for y in data]
        self.basis = basis
        self.n_samples = sum(len(y) for y in self.data)

    def check_design(self, theta):
        for k in range(len(self.times)):
            columns = self.basis(theta, k)
            if columns.shape[0] < columns.shape[1]:
                raise SingularDesign(
                    "Trace {0} has {1} samples for {2} linear parameters".format(
                        k, columns.shape[0], columns.shape[1]
                    )
                )
            s = np.linalg.svd(columns, compute_uv=False)
            if not np.all(np.isfinite(s)) or s[-1] <= RANK_RTOL * s[0]:
                raise SingularDesign(
                    "Design columns of trace {0} are linearly dependent "
                    "(singular values {1})".format(k, s),
                    violation=float(s[-1] / s[0]) if s[0] > 0 else 0.0,
                )

    def solve_linear(self, theta):
        coefficients = []
        for k, y in enumerate(self.data):
            columns = self.basis(theta, k)
            c, _, _, _ = np.linalg.lstsq(columns, y, rcond=None)
            coefficients.append(c)
        return coefficients

    def fitted(self, theta, coefficients):
        return [self.basis(theta, k).dot(c) for k, c in enumerate(coefficients)]

    def residual(self, theta):
        """Projected residual y - Phi(theta) c(theta), all traces concatenated"""
        coefficients = self.solve_linear(theta)
        fitted = self.fitted(theta, coefficients)
        return np.concatenate([y - f for y, f in zip(self.data, fitted)])

    def residual_jacobian(self, theta, free, step_scale=1.0):
        """Central-difference Jacobian of the projected residual"""
        theta = np.asarray(theta, dtype=float)
        columns = []
        for j in np.flatnonzero(free):
            h = step_scale * JACOBIAN_STEP * max(abs(theta[j]), 1.0)
            up = theta.copy()
            down = theta.copy()
            up[j] += h
            down[j] -= h
            columns.append((self.residual(up) - self.residual(down)) / (2.0 * h))
        return np.column_stack(columns) if columns else np.zeros((self.n_samples, 0))

    def fit(self, theta0, free, max_iterations=MAX_ITERATIONS):
        """
        Levenberg-Marquardt (MINPACK through scipy) on the free entries of
        theta, with the projected residual and its differenced Jacobian.
        Returns (theta, function evaluations, converged).
        """
        theta = np.array(theta0, dtype=float)
        free = np.asarray(free, dtype=bool)
        if not free.any():
            return theta, 0, True

        def full(x):
            trial = theta.copy()
            trial[free] = x
            return trial

        result = scipy.optimize.least_squares(
            lambda x: self.residual(full(x)),
            theta[free],
            jac=lambda x: self.residual_jacobian(full(x), free),
            method="lm",
            ftol=COST_RTOL,
            xtol=STEP_TOL,
            max_nfev=max_iterations,
        )
        logger.debug(
            "least_squares: status=%s nfev=%s ssr=%.6e (%s)",
            result.status,
            result.nfev,
            2.0 * result.cost,
            result.message,
        )
        return full(result.x), int(result.nfev), result.status > 0

    def model_jacobian(self, theta, coefficients, free):
        """
        Jacobian of the unprojected model with respect to the free nonlinear
        parameters followed by every linear coefficient, block per trace.
        """
        theta = np.asarray(theta, dtype=float)
        free_index = np.flatnonzero(free)
        n_linear = sum(len(c) for c in coefficients)
        J = np.zeros((self.n_samples, len(free_index) + n_linear))
        for i, j in enumerate(free_index):
            h = JACOBIAN_STEP * max(abs(theta[j]), 1.0)
            up = theta.copy()
            down = theta.copy()
            up[j] += h
            down[j] -= h
            J[:, i] = (
                np.concatenate(self.fitted(up, coefficients))
                - np.concatenate(self.fitted(down, coefficients))
            ) / (2.0 * h)
        row = 0
        col = len(free_index)
        for k, c in enumerate(coefficients):
            columns = self.basis(theta, k)
            J[row : row + columns.shape[0], col : col + columns.shape[1]] = columns
            row += columns.shape[0]
            col += columns.shape[1]
        return J

    def solution(self, theta, free):
        """Linear coefficients, residual and the s^2-scaled covariance at theta"""
        coefficients = self.solve_linear(theta)
        residual = np.concatenate(
            [y - f for y, f in zip(self.data, self.fitted(theta, coefficients))]
        )
        ssr = float(residual.dot(residual))
        J = self.model_jacobian(theta, coefficients, free)
        dof = self.n_samples - J.shape[1]
        s2 = ssr / dof if dof > 0 else np.nan
        covariance = s2 * np.linalg.pinv(J.T.dot(J))
        covariance = 0.5 * (covariance + covariance.T)
        return coefficients, residual, covariance


# ___________________________________________________
# Initial estimates


def _spectrum(values, dt):
    x = values - np.mean(values)
    n = len(x)
    # Cubic detrend removes the DC decay well enough for peak picking
    u = np.linspace(-1.0, 1.0, n)
    x = x - np.polyval(np.polyfit(u, x, 3), u)
    x = x * np.hanning(n)
    n_fft = PAD_FACTOR * n
    power = np.abs(np.fft.rfft(x, n_fft)) ** 2
    return np.fft.rfftfreq(n_fft, dt), power


def _peak_frequency(frequencies, power, duration):
    peak = float(np.max(power))
    if not peak > 0:
        raise NoSpectralPeak("Spectrum is identically zero")
    inner = np.arange(1, len(power) - 1)
    is_local_max = (power[inner] >= power[inner - 1]) & (power[inner] > power[inner + 1])
    candidates = inner[is_local_max & (power[inner] >= (1.0 - PEAK_TIE_RTOL) * peak)]
    if not len(candidates):
        raise NoSpectralPeak("Spectral maximum sits on the edge of the band")
    i = int(candidates[0])
    if frequencies[i] < MIN_CYCLES / duration:
        raise NoSpectralPeak(
            "Dominant spectral component at {0:.3f} Hz is drift, not an "
            "oscillation".format(frequencies[i])
        )
    contrast = power[i] / np.median(power)
    if contrast < PEAK_CONTRAST:
        raise NoSpectralPeak(
            "Spectral peak contrast {0:.2f} is below {1}".format(contrast, PEAK_CONTRAST),
            violation=float(contrast),
        )
    # Parabolic interpolation on the log power
    a, b, c = np.log(power[i - 1 : i + 2] + 1e-300)
    denominator = a - 2.0 * b + c
    shift = 0.5 * (a - c) / denominator if denominator != 0 else 0.0
    return frequencies[i] + shift * (frequencies[1] - frequencies[0])


def _log_linear_rate(t, magnitude):
    """Decay rate of a log-linear fit, None if it cannot be determined"""
    keep = magnitude > 0
    if keep.sum() < 3:
        return None
    slope, _ = np.polyfit(t[keep], np.log(magnitude[keep]), 1)
    rate = -slope
    return float(rate) if np.isfinite(rate) and rate > 0 else None


def _rates(t, y, omega_l):
    dt = t[1] - t[0]
    period = max(int(round(np.pi / omega_l / dt)), 1)
    lowpass = uniform_filter1d(y, size=period, mode="nearest")
    oscillation = np.abs(y - lowpass)
    inner = np.arange(1, len(y) - 1)
    maxima = inner[
        (oscillation[inner] > oscillation[inner - 1])
        & (oscillation[inner] >= oscillation[inner + 1])
    ]
    # Skip the filter's edge region and the noise floor
    maxima = maxima[(maxima > period) & (maxima < len(y) - period)]
    if len(maxima):
        maxima = maxima[oscillation[maxima] > 0.05 * oscillation[maxima].max()]
    gamma1 = _log_linear_rate(t[maxima], oscillation[maxima]) if len(maxima) else None
    body = slice(period, len(y) - period)
    low = np.abs(lowpass[body])
    gamma2 = None
    if len(low) and low.max() > 0:
        keep = low > 0.1 * low.max()
        gamma2 = _log_linear_rate(t[body][keep], low[keep])
    return gamma1, gamma2


def estimate_initial(traces, defaults=None):
    """
    Initial (gamma1, gamma2, omega_l, phi) from the traces: the Larmor
    frequency from the summed power spectrum, the rates from log-linear fits
    of the oscillation envelope and of the low-pass component. Rates that
    cannot be determined fall back to `defaults`.
    """
    defaults = dict(DEFAULT_INITIAL, **(defaults or {}))
    if not len(traces):
        raise ValueError("No traces to estimate from")
    total = None
    for trace in traces:
        if len(trace.times) < MIN_SAMPLES:
            raise ValueError(
                "Initial estimation needs at least {0} samples per trace, got {1}".format(
                    MIN_SAMPLES, len(trace.times)
                )
            )
        dt = float(np.median(np.diff(trace.times)))
        frequencies, power = _spectrum(np.asarray(trace.values), dt)
        if total is None:
            total = power
        elif len(power) == len(total):
            total = total + power
        else:
            raise ValueError("Traces for initial estimation must share a time grid")
    duration = traces[0].times[-1] - traces[0].times[0] + dt
    f_peak = _peak_frequency(frequencies, total, duration)
    # The traces oscillate at twice the Larmor frequency
    omega_l = 2.0 * np.pi * f_peak / 2.0

    gamma1s = []
    gamma2s = []
    for trace in traces:
        t = np.asarray(trace.times)
        gamma1, gamma2 = _rates(t, np.asarray(trace.values), omega_l)
        if gamma1 is not None:
            gamma1s.append(gamma1)
        if gamma2 is not None:
            gamma2s.append(gamma2)
    initial = {"omega_l": float(omega_l), "phi": 0.0}
    for name, values in (("gamma1", gamma1s), ("gamma2", gamma2s)):
        if values:
            initial[name] = float(np.median(values))
        else:
            logger.warning(
                "Could not estimate %s from the traces, using %s", name, defaults[name]
            )
            initial[name] = float(defaults[name])
    logger.debug("Initial estimate: %s", initial)
    return initial


# ___________________________________________________
# Tomography fit of CYCLOPS-combined traces


class FitModelSpec(object):
    """
    Traces to fit jointly, the quadrature each one keeps (cos for Y, sin for
    ZY), the calibrated eta and zeta used to convert amplitudes into
    expectation values, and shared parameters held fixed.
    """

    def __init__(
        self,
        traces,
        selectors=None,
        eta=1.0,
        zeta=1.0,
        phi_reference=0.0,
        fixed=None,
    ):
        self.traces = list(traces)
        if not self.traces:
            raise ValueError("FitModelSpec needs at least one trace")
        if selectors is None:
            selectors = []
            for trace in self.traces:
                if trace.variant not in SURVIVING:
                    raise ValueError(
                        "No quadrature selector for trace {0!r}".format(trace)
                    )
                selectors.append(SURVIVING[trace.variant][1])
        self.selectors = list(selectors)
        if len(self.selectors) != len(self.traces):
            raise ValueError("Every trace needs a quadrature selector")
        for selector in self.selectors:
            if selector not in QUADRATURES:
                raise ValueError("Unknown quadrature {0!r}".format(selector))
        self.eta = float(eta)
        self.zeta = float(zeta)
        if self.eta == 0 or self.zeta == 0:
            raise ValueError("eta and zeta must be nonzero to convert amplitudes")
        self.phi_reference = float(phi_reference)
        self.fixed = dict(fixed or {})
        unknown = set(self.fixed) - set(SHARED_NAMES)
        if unknown:
            raise ValueError("Cannot fix unknown parameters {0}".format(sorted(unknown)))

    @property
    def free(self):
        return np.array([name not in self.fixed for name in SHARED_NAMES])

    def basis(self, theta, k):
        gamma1, gamma2, omega_l, phi = theta
        t = self.traces[k].times
        phase = 2.0 * omega_l * t + phi
        return np.column_stack(
            [
                np.exp(-gamma1 * t) * _quadrature(self.selectors[k], phase),
                -np.exp(-gamma2 * t),
            ]
        )

    def model(self):
        return SeparableModel(
            [t.times for t in self.traces], [t.values for t in self.traces], self.basis
        )

    def theta(self, init):
        values = dict(DEFAULT_INITIAL, **(init or {}))
        values.update(self.fixed)
        theta = np.array([values[name] for name in SHARED_NAMES], dtype=float)
        if not np.all(np.isfinite(theta)):
            raise ValueError("Initial parameters must be finite, got {0}".format(values))
        return theta


def canonical_phase(phi, phi_reference=0.0):
    """
    Maps phi into (phi_reference - pi/2, phi_reference + pi/2]. Returns the
    phase and whether the oscillation amplitudes flip sign.
    """
    offset = np.mod(phi - phi_reference + np.pi, 2.0 * np.pi) - np.pi
    if offset == -np.pi:
        offset = np.pi
    flipped = False
    if offset > np.pi / 2:
        offset -= np.pi
        flipped = True
    elif offset <= -np.pi / 2:
        offset += np.pi
        flipped = True
    return phi_reference + offset, flipped


class FitResult(object):
    """
    Shared parameters with standard errors and, per trace, the oscillation
    amplitude a and DC amplitude b in expectation-value units.
    """

    def __init__(
        self,
        shared,
        shared_stderr,
        per_trace,
        residual_rms,
        converged,
        iterations,
        fixed=(),
        eta=1.0,
        zeta=1.0,
        phi_reference=0.0,
    ):
        self.shared = dict(shared)
        self.shared_stderr = dict(shared_stderr)
        self.per_trace = [dict(p) for p in per_trace]
        self.residual_rms = float(residual_rms)
        self.converged = bool(converged)
        self.iterations = int(iterations)
        self.fixed = tuple(fixed)
        self.eta = float(eta)
        self.zeta = float(zeta)
        self.phi_reference = float(phi_reference)

    def trace(self, pulse, variant):
        for entry in self.per_trace:
            if entry["pulse"] == pulse and entry["variant"] == variant:
                return entry
        raise KeyError(
            "No fitted trace for pulse {0!r}, variant {1!r}".format(pulse, variant)
        )

    def to_dict(self):
        return {
            "shared": {
                name: {
                    "value": self.shared[name],
                    "stderr": self.shared_stderr[name],
                    "fixed": name in self.fixed,
                }
                for name in SHARED_NAMES
            },
            "per_trace": [
                dict(
                    entry,
                    covariance=[list(map(float, row)) for row in entry["covariance"]],
                )
                for entry in self.per_trace
            ],
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
            "eta": self.eta,
            "zeta": self.zeta,
            "phi_reference": self.phi_reference,
        }

    def __repr__(self):
        return "FitResult(converged={0}, iterations={1}, residual_rms={2:.3e})".format(
            self.converged, self.iterations, self.residual_rms
        )


def fit_result_from_dict(d):
    per_trace = []
    for entry in d["per_trace"]:
        entry = dict(entry)
        entry["covariance"] = np.array(entry["covariance"], dtype=float)
        per_trace.append(entry)
    return FitResult(
        shared={name: d["shared"][name]["value"] for name in SHARED_NAMES},
        shared_stderr={name: d["shared"][name]["stderr"] for name in SHARED_NAMES},
        per_trace=per_trace,
        residual_rms=d["residual_rms"],
        converged=d["converged"],
        iterations=d["iterations"],
        fixed=[name for name in SHARED_NAMES if d["shared"][name].get("fixed")],
        eta=d.get("eta", 1.0),
        zeta=d.get("zeta", 1.0),
        phi_reference=d.get("phi_reference", 0.0),
    )


def residual_jacobian(spec, shared, step_scale=1.0):
    """Jacobian of the projected residual at the shared parameters `shared`"""
    theta = spec.theta(shared)
    free = np.ones(len(SHARED_NAMES), dtype=bool)
    return spec.model().residual_jacobian(theta, free, step_scale)


def linear_amplitudes(spec, shared):
    """Raw (A, B) per trace from the linear subproblem at fixed shared parameters"""
    return [tuple(c) for c in spec.model().solve_linear(spec.theta(shared))]


def joint_fit(spec, init=None):
    """
    Fits all traces of `spec` with shared (gamma1, gamma2, omega_l, phi).
    A fit that hits the iteration limit is returned with converged=False.
    """
    model = spec.model()
    theta0 = spec.theta(init)
    model.check_design(theta0)
    free = spec.free
    theta, iterations, converged = model.fit(theta0, free)
    if free[SHARED_NAMES.index("phi")]:
        phi, flipped = canonical_phase(theta[3], spec.phi_reference)
        if flipped:
            logger.debug("Moved phi=%s onto the reference branch %s", theta[3], phi)
        theta[3] = phi
    coefficients, residual, covariance = model.solution(theta, free)

    n_free = int(free.sum())
    shared_stderr = {}
    i = 0
    for name, is_free in zip(SHARED_NAMES, free):
        if is_free:
            shared_stderr[name] = float(np.sqrt(max(covariance[i, i], 0.0)))
            i += 1
        else:
            shared_stderr[name] = 0.0

    per_trace = []
    fitted = zip(spec.traces, spec.selectors, coefficients)
    for k, (trace, selector, c) in enumerate(fitted):
        block = slice(n_free + 2 * k, n_free + 2 * k + 2)
        scale = np.array([2.0 * spec.eta, 2.0 * spec.eta * spec.zeta])
        raw_cov = covariance[block, block]
        cov = raw_cov / np.outer(scale, scale)
        observable = SURVIVING[trace.variant][0] if trace.variant in SURVIVING else None
        per_trace.append(
            {
                "pulse": trace.pulse,
                "variant": trace.variant,
                "quadrature": selector,
                "observable": observable,
                "A": float(c[0]),
                "B": float(c[1]),
                "a": float(c[0] / scale[0]),
                "b": float(c[1] / scale[1]),
                "a_stderr": float(np.sqrt(max(cov[0, 0], 0.0))),
                "b_stderr": float(np.sqrt(max(cov[1, 1], 0.0))),
                "covariance": cov,
            }
        )

    residual_rms = float(np.sqrt(np.mean(residual ** 2))) if len(residual) else 0.0
    result = FitResult(
        shared=dict(zip(SHARED_NAMES, map(float, theta))),
        shared_stderr=shared_stderr,
        per_trace=per_trace,
        residual_rms=residual_rms,
        converged=converged,
        iterations=iterations,
        fixed=[name for name in SHARED_NAMES if name in spec.fixed],
        eta=spec.eta,
        zeta=spec.zeta,
        phi_reference=spec.phi_reference,
    )
    if converged:
        logger.info(
            "Joint fit of %s traces converged after %s iterations, residual rms %.3e",
            len(spec.traces),
            iterations,
            residual_rms,
        )
    else:
        logger.warning(
            "Joint fit of %s traces did not converge in %s iterations",
            len(spec.traces),
            iterations,
        )
    return result
