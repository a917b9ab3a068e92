# -*- coding: utf-8 -*-
"""
Measurement operators, CYCLOPS pulse algebra, and the conversion of a
measured expectation value into an affine functional on the 8-real state
vector.
"""
import logging
import os.path as osp

import numpy as np

from .errors import CyclopsConventionMismatch, NotHermitian
from .qutrit import (
    HERMITIAN_TOL,
    PulseUnitary,
    as_matrix,
    hermitian_violation,
    pulse_from_dict,
    pulse_product,
    spin1_rotation,
)
from .utils import complex_matrix_from_list, complex_matrix_to_list, read_json

logger = logging.getLogger("alkatomo")

OBSERVABLE_NAMES = ("alpha_R", "alpha_I", "beta")
CYCLOPS_VARIANTS = ("Y", "ZY")
CYCLOPS_TOL = 1e-12
# Tags end up in trace file names and in the "; key=value" CSV header
TAG_FORBIDDEN = ";=/\\\n\r\t"


class ObservableSet(object):
    """
    Hermitian operators alpha_R, alpha_I (Delta m = 2 coherences) and beta
    (diagonal) whose expectation values drive the polarization rotation.
    """

    def __init__(self, alpha_R, alpha_I, beta, name="custom"):
        self.alpha_R = self._check(alpha_R, "alpha_R")
        self.alpha_I = self._check(alpha_I, "alpha_I")
        self.beta = self._check(beta, "beta")
        self.name = name
        for key in ("alpha_R", "alpha_I"):
            outside = getattr(self, key).copy()
            outside[0, 2] = outside[2, 0] = 0.0
            if np.max(np.abs(outside)) > HERMITIAN_TOL:
                raise ValueError(
                    "{0} must only couple m=-1 and m=+1".format(key)
                )
        if np.max(np.abs(self.beta - np.diag(np.diag(self.beta)))) > HERMITIAN_TOL:
            raise ValueError("beta must be diagonal in the m basis")

    @staticmethod
    def _check(matrix, key):
        matrix = np.array(matrix, dtype=complex)
        if matrix.shape != (3, 3):
            raise ValueError("{0} must be 3x3, got {1}".format(key, matrix.shape))
        violation = hermitian_violation(matrix)
        if violation > HERMITIAN_TOL:
            raise NotHermitian(
                "{0} is not Hermitian ({1:.3e})".format(key, violation), violation
            )
        matrix.setflags(write=False)
        return matrix

    def items(self):
        return [(key, getattr(self, key)) for key in OBSERVABLE_NAMES]

    def to_dict(self):
        d = {key: complex_matrix_to_list(m) for key, m in self.items()}
        d["name"] = self.name
        return d

    def __repr__(self):
        return "ObservableSet({0})".format(self.name)


def _coherence(coefficient):
    """coefficient |-1><+1| + h.c."""
    m = np.zeros((3, 3), dtype=complex)
    m[0, 2] = coefficient
    m[2, 0] = np.conj(coefficient)
    return m


def default_observables():
    """
    Reference set. beta = (5/24) F_z; alpha_R = -(F_x^2 - F_y^2)/24 and
    alpha_I = -(F_x F_y + F_y F_x)/24. A pi rotation about y keeps alpha_R
    and flips alpha_I and beta, as the CYCLOPS combiner requires.
    """
    return ObservableSet(
        alpha_R=_coherence(-1.0 / 24.0),
        alpha_I=_coherence(-1j / 24.0),
        beta=np.diag([-5.0 / 24.0, 0.0, 5.0 / 24.0]),
        name="default",
    )


def literal_observables():
    """
    The set with alpha_I = -(1/24)(|-1><+1| + h.c.) and
    alpha_R = (i/24)(|-1><+1| - h.c.). It reproduces the x-stretched signal as a
    cos term, but under a pi rotation about y it is alpha_R that flips, so it
    does not pass `validate_cyclops`.
    """
    return ObservableSet(
        alpha_R=_coherence(1j / 24.0),
        alpha_I=_coherence(-1.0 / 24.0),
        beta=np.diag([-5.0 / 24.0, 0.0, 5.0 / 24.0]),
        name="amplitude-literal",
    )


OBSERVABLE_PRESETS = {
    "default": default_observables,
    "amplitude-literal": literal_observables,
}


def expectation(rho, operator):
    """Tr(rho A) for Hermitian A; the (round-off) imaginary part is dropped"""
    operator = np.asarray(operator, dtype=complex)
    violation = hermitian_violation(operator)
    if violation > HERMITIAN_TOL:
        raise NotHermitian(
            "Observable is not Hermitian ({0:.3e})".format(violation), violation
        )
    return float(np.real(np.trace(as_matrix(rho) @ operator)))


# ___________________________________________________
# Affine rows


class AffineRow(object):
    """<A> = row . rho_V + offset"""

    def __init__(self, row, offset):
        self.row = np.array(row, dtype=float)
        self.offset = float(offset)
        if self.row.shape != (8,) or not (
            np.all(np.isfinite(self.row)) and np.isfinite(self.offset)
        ):
            raise ValueError("AffineRow needs 8 finite coefficients and a finite offset")

    def evaluate(self, v):
        return float(self.row @ np.asarray(v, dtype=float) + self.offset)

    def __repr__(self):
        return "AffineRow(row={0}, offset={1!r})".format(
            np.array2string(self.row, precision=5), self.offset
        )


def row_from_operator(operator):
    """
    Expresses Tr(rho A) in the stored reals of rho, eliminating
    rho(+1,+1) = 1 - rho(-1,-1) - rho(0,0).
    """
    a = np.asarray(operator, dtype=complex)
    # Tr(rho A) = sum_i rho_ii A_ii + sum_{i<j} 2 Re(rho_ij A_ji)
    row = np.array(
        [
            np.real(a[0, 0] - a[2, 2]),
            2.0 * a[1, 0].real,
            -2.0 * a[1, 0].imag,
            2.0 * a[2, 0].real,
            -2.0 * a[2, 0].imag,
            np.real(a[1, 1] - a[2, 2]),
            2.0 * a[2, 1].real,
            -2.0 * a[2, 1].imag,
        ]
    )
    return AffineRow(row, np.real(a[2, 2]))


def conjugate(operator, pulse):
    """U^dagger A U: the observable as seen before the pulse"""
    u = pulse.matrix if isinstance(pulse, PulseUnitary) else np.asarray(pulse)
    return u.conj().T @ np.asarray(operator, dtype=complex) @ u


def rotated_row(operator, pulse, scale=1.0):
    """Affine row of scale * <U^dagger A U>"""
    return row_from_operator(scale * conjugate(operator, pulse))


# ___________________________________________________
# CYCLOPS


def cyclops_pulse(variant):
    """Y = pi about y; ZY = Y followed by pi/2 about z, i.e. the product Z.Y"""
    y = spin1_rotation("y", np.pi, tag="Y")
    if variant == "Y":
        return y
    elif variant == "ZY":
        z = spin1_rotation("z", np.pi / 2, tag="Z")
        product = pulse_product(y, z)
        return PulseUnitary(product.matrix, tag="ZY")
    raise ValueError("Unknown CYCLOPS variant {0!r}".format(variant))


# Sign each observable takes under conjugation by the CYCLOPS pulse
CYCLOPS_SIGNS = {
    "Y": {"alpha_R": 1.0, "alpha_I": -1.0, "beta": -1.0},
    "ZY": {"alpha_R": -1.0, "alpha_I": 1.0, "beta": -1.0},
}

# Observable whose oscillation survives base - cycled, with its quadrature
SURVIVING = {"Y": ("alpha_I", "cos"), "ZY": ("alpha_R", "sin")}


class CyclopsReport(object):
    def __init__(self, checks):
        # list of (variant, observable, residual)
        self.checks = checks

    @property
    def failures(self):
        return [c for c in self.checks if c[2] > CYCLOPS_TOL]

    @property
    def passed(self):
        return not self.failures

    def __str__(self):
        lines = []
        for variant, key, residual in self.checks:
            sign = "+" if CYCLOPS_SIGNS[variant][key] > 0 else "-"
            lines.append(
                "{0:>2}^dag {1:<7} {0} = {2}{1:<7}  residual {3:.2e}  {4}".format(
                    variant,
                    key,
                    sign,
                    residual,
                    "ok" if residual <= CYCLOPS_TOL else "FAILED",
                )
            )
        return "\n".join(lines)


def validate_cyclops(observables):
    """
    Checks the six conjugation identities the CYCLOPS combiner relies on and
    returns a report with the residual of each.
    """
    checks = []
    for variant in CYCLOPS_VARIANTS:
        pulse = cyclops_pulse(variant)
        for key, operator in observables.items():
            expected = CYCLOPS_SIGNS[variant][key] * operator
            residual = float(np.max(np.abs(conjugate(operator, pulse) - expected)))
            checks.append((variant, key, residual))
    report = CyclopsReport(checks)
    logger.debug("CYCLOPS identities for %s:\n%s", observables.name, report)
    return report


def require_cyclops(observables, allow_nonstandard=False):
    report = validate_cyclops(observables)
    if report.passed:
        return report
    if allow_nonstandard:
        logger.warning(
            "Observable set %s fails the CYCLOPS identities; continuing because "
            "nonstandard conventions are allowed:\n%s",
            observables.name,
            report,
        )
        return report
    raise CyclopsConventionMismatch(
        "Observable set {0} fails the CYCLOPS identities:\n{1}".format(
            observables.name, report
        ),
        max(c[2] for c in report.failures),
    )


def observables_from_dict(d, name="custom"):
    return ObservableSet(
        *[complex_matrix_from_list(d[key]) for key in OBSERVABLE_NAMES],
        name=d.get("name", name)
    )


def load_observables(source="default", allow_nonstandard=False):
    """
    Returns a preset ("default", "amplitude-literal") or an observable set read
    from a JSON file, after validating the CYCLOPS identities.
    """
    if source in OBSERVABLE_PRESETS:
        observables = OBSERVABLE_PRESETS[source]()
    elif osp.isfile(source):
        observables = observables_from_dict(read_json(source), name=source)
    else:
        raise ValueError(
            "Observables must be one of {0} or a JSON file, not {1!r}".format(
                sorted(OBSERVABLE_PRESETS), source
            )
        )
    require_cyclops(observables, allow_nonstandard)
    return observables


# ___________________________________________________
# Measurement plans


class PlanEntry(object):
    """
    One control pulse. Each entry is acquired three times: without CYCLOPS
    pulse, with Y and with ZY; `repetitions` counts how often that is repeated.
    """

    def __init__(self, pulse, repetitions=1):
        repetitions = int(repetitions)
        if repetitions < 1:
            raise ValueError("repetitions must be >= 1, got {0}".format(repetitions))
        self.pulse = pulse
        self.repetitions = repetitions

    @property
    def tag(self):
        return self.pulse.tag

    def to_dict(self):
        d = self.pulse.to_dict()
        d["repetitions"] = self.repetitions
        return d

    def __repr__(self):
        return "PlanEntry({0}, repetitions={1})".format(self.tag, self.repetitions)


class MeasurementPlan(object):
    def __init__(self, entries, zeta):
        entries = list(entries)
        if not entries:
            raise ValueError("A measurement plan needs at least one entry")
        tags = [e.tag for e in entries]
        if len(set(tags)) != len(tags):
            raise ValueError("Pulse tags in a plan must be unique: {0}".format(tags))
        for tag in tags:
            if not tag or any(c in TAG_FORBIDDEN for c in tag):
                raise ValueError(
                    "Pulse tag {0!r} must be nonempty and free of {1!r}".format(
                        tag, TAG_FORBIDDEN
                    )
                )
        self.entries = entries
        self.zeta = float(zeta)

    @property
    def tags(self):
        return [e.tag for e in self.entries]

    def acquisitions(self):
        """Yields (entry index, entry, variant) with variant None for the base trace"""
        for i, entry in enumerate(self.entries):
            for variant in (None,) + CYCLOPS_VARIANTS:
                yield i, entry, variant

    def with_zeta(self, zeta):
        return MeasurementPlan(self.entries, zeta)

    def to_dict(self):
        return {"zeta": self.zeta, "pulses": [e.to_dict() for e in self.entries]}

    def __repr__(self):
        return "MeasurementPlan({0}, zeta={1!r})".format(self.tags, self.zeta)


def default_plan(zeta, repetitions=1):
    """Identity, pi/2 about x and pi/2 about y"""
    return MeasurementPlan(
        [
            PlanEntry(spin1_rotation("z", 0.0, tag="I"), repetitions),
            PlanEntry(spin1_rotation("x", np.pi / 2, tag="X90"), repetitions),
            PlanEntry(spin1_rotation("y", np.pi / 2, tag="Y90"), repetitions),
        ],
        zeta,
    )


def plan_from_dict(d, zeta=None):
    entries = [
        PlanEntry(pulse_from_dict(p), p.get("repetitions", 1)) for p in d["pulses"]
    ]
    return MeasurementPlan(entries, d.get("zeta") if zeta is None else zeta)
