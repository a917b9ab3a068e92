# -*- coding: utf-8 -*-
"""
Linear-inversion tomography: coefficient matrix of a measurement plan, the
normal equations C rho_V = b~, their solution, the physical projection and
the conditioning diagnostics.
"""
import logging

import numpy as np
import scipy.linalg

from .errors import (
    BoundInvalid,
    DimensionMismatch,
    MetadataMismatch,
    NoSpectralPeak,
    SingularSystem,
)
from .fitting import FitModelSpec, estimate_initial, joint_fit
from .observables import CYCLOPS_VARIANTS, require_cyclops, rotated_row
from .qutrit import (
    FIDELITY_CONVENTION,
    devectorize,
    fidelity,
    project_to_physical,
    state_to_dict,
    vectorize,
)

logger = logging.getLogger("alkatomo")

SINGULAR_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10

# Row kinds per plan entry; beta is measured in both CYCLOPS combinations
ROW_KINDS = ("alpha_R", "alpha_I", "beta:Y", "beta:ZY")


class CoefficientMatrix(object):
    """
    Rows of the scheduled observable measurements in StateVector8 coordinates,
    their affine offsets, (pulse tag, row kind) labels and repetition weights.
    """

    def __init__(self, O, offsets, row_labels, weights, zeta=None):
        O = np.array(O, dtype=float)
        if O.ndim != 2 or O.shape[1] != 8:
            raise DimensionMismatch(
                "Coefficient matrix must be M x 8, got {0}".format(O.shape)
            )
        self.O = O
        self.offsets = np.array(offsets, dtype=float)
        self.row_labels = [tuple(label) for label in row_labels]
        self.weights = np.array(weights, dtype=float)
        if not (len(self.offsets) == len(self.row_labels) == len(self.weights) == len(O)):
            raise DimensionMismatch(
                "{0} rows but {1} offsets, {2} labels and {3} weights".format(
                    len(O), len(self.offsets), len(self.row_labels), len(self.weights)
                )
            )
        if np.any(self.weights <= 0):
            raise ValueError("Weights must be positive")
        self.zeta = zeta
        self.singular_values = scipy.linalg.svdvals(self.weighted())
        largest = self.singular_values[0] if len(self.singular_values) else 0.0
        self.rank = int(np.sum(self.singular_values > SINGULAR_RTOL * largest))
        self.rank_deficient = self.rank < 8

    def __len__(self):
        return len(self.O)

    def weighted(self):
        """sqrt(W) O"""
        return np.sqrt(self.weights)[:, None] * self.O

    def normal_matrix(self):
        return self.O.T @ (self.weights[:, None] * self.O)

    def with_weights(self, weights):
        return CoefficientMatrix(
            self.O, self.offsets, self.row_labels, weights, zeta=self.zeta
        )

    def rows_of(self, tag):
        return [i for i, label in enumerate(self.row_labels) if label[0] == tag]

    def __repr__(self):
        return "CoefficientMatrix(M={0}, rank={1})".format(len(self), self.rank)


class ObservationVector(object):
    """Measured row values with offsets removed, and their standard errors"""

    def __init__(self, b, sigma_b=None):
        self.b = np.array(b, dtype=float)
        self.sigma_b = (
            np.zeros_like(self.b) if sigma_b is None else np.array(sigma_b, dtype=float)
        )
        if self.b.shape != self.sigma_b.shape or self.b.ndim != 1:
            raise DimensionMismatch(
                "b has shape {0} but sigma_b has shape {1}".format(
                    self.b.shape, self.sigma_b.shape
                )
            )
        if np.any(self.sigma_b < 0):
            raise ValueError("Standard errors must be nonnegative")

    def __len__(self):
        return len(self.b)


def build_coefficient_matrix(plan, observables, allow_nonstandard=False):
    """
    Four rows per plan entry U: <U^dag aR U>, <U^dag aI U> and zeta <U^dag beta U>
    twice. A plan that does not reach rank 8 is returned with
    `rank_deficient` set.
    """
    require_cyclops(observables, allow_nonstandard)
    rows = []
    offsets = []
    labels = []
    weights = []
    for entry in plan.entries:
        for kind in ROW_KINDS:
            if kind.startswith("beta"):
                affine = rotated_row(observables.beta, entry.pulse, plan.zeta)
            else:
                affine = rotated_row(getattr(observables, kind), entry.pulse)
            rows.append(affine.row)
            offsets.append(affine.offset)
            labels.append((entry.tag, kind))
            weights.append(entry.repetitions)
    cm = CoefficientMatrix(rows, offsets, labels, weights, zeta=plan.zeta)
    if cm.rank_deficient:
        logger.warning(
            "Coefficient matrix of plan %s has rank %s < 8", plan.tags, cm.rank
        )
    return cm


def expected_observations(cm, rho):
    """Noiseless ObservationVector of state rho"""
    return ObservationVector(cm.O @ vectorize(rho))


def normal_equations(cm, ov):
    """C = O^T W O and b~ = O^T W b"""
    if len(ov) != len(cm):
        raise DimensionMismatch(
            "Observation vector has {0} entries for {1} rows".format(len(ov), len(cm))
        )
    weighted = cm.weights[:, None] * cm.O
    return cm.O.T @ weighted, weighted.T @ ov.b


def _check_nonsingular(C):
    s = scipy.linalg.svdvals(C)
    if s[-1] <= SINGULAR_RTOL * s[0]:
        raise SingularSystem(
            "Normal matrix is singular: smallest singular value {0:.3e}, "
            "largest {1:.3e}".format(s[-1], s[0]),
            violation=float(s[-1]),
        )
    return s


def solve_state(C, b_tilde):
    """rho_V = C^-1 b~ through a column-pivoted QR factorization"""
    C = np.asarray(C, dtype=float)
    b_tilde = np.asarray(b_tilde, dtype=float)
    if C.shape != (8, 8) or b_tilde.shape != (8,):
        raise DimensionMismatch(
            "Expected an 8x8 system, got {0} and {1}".format(C.shape, b_tilde.shape)
        )
    _check_nonsingular(C)
    Q, R, P = scipy.linalg.qr(C, pivoting=True)
    z = scipy.linalg.solve_triangular(R, Q.T @ b_tilde)
    rho_v = np.empty(8)
    rho_v[P] = z
    residual = np.linalg.norm(C @ rho_v - b_tilde)
    if residual > RESIDUAL_RTOL * max(np.linalg.norm(b_tilde), 1e-300):
        logger.warning("Normal equations solved with residual %.3e", residual)
    return rho_v


def condition_number(C):
    """Spectral condition number max svd(C) / min svd(C)"""
    s = _check_nonsingular(np.asarray(C, dtype=float))
    return float(s[0] / s[-1])


def atkinson_bounds(kappa, rel_db):
    """Lower and upper bounds on |d rho_V| / |rho_V| for an error in b~"""
    if kappa < 1:
        raise ValueError("Condition number must be >= 1, got {0!r}".format(kappa))
    if rel_db < 0:
        raise ValueError("Relative error must be >= 0, got {0!r}".format(rel_db))
    return rel_db / kappa, kappa * rel_db


def atkinson_perturbed(kappa, rel_db, rel_dC):
    """Upper bound on the relative error when C is perturbed as well"""
    if kappa < 1:
        raise ValueError("Condition number must be >= 1, got {0!r}".format(kappa))
    if rel_db < 0 or rel_dC < 0:
        raise ValueError("Relative errors must be >= 0")
    denominator = 1.0 - kappa * rel_dC
    if denominator <= 0:
        raise BoundInvalid(
            "kappa * |dC|/|C| = {0!r} >= 1, the bound does not hold".format(
                kappa * rel_dC
            ),
            violation=kappa * rel_dC,
        )
    return kappa / denominator * (rel_db + rel_dC)


# ___________________________________________________
# Full pipeline


def assemble_observations(fit, cm):
    """
    Observation vector from the fitted amplitudes: aR from the ZY combination,
    aI from the Y combination, zeta*beta from the DC term of each.
    """
    values = []
    sigmas = []
    for tag, kind in cm.row_labels:
        try:
            if kind == "alpha_R":
                entry = fit.trace(tag, "ZY")
                value, sigma = entry["a"], entry["a_stderr"]
            elif kind == "alpha_I":
                entry = fit.trace(tag, "Y")
                value, sigma = entry["a"], entry["a_stderr"]
            else:
                entry = fit.trace(tag, kind.split(":")[1])
                value = cm.zeta * entry["b"]
                sigma = abs(cm.zeta) * entry["b_stderr"]
        except KeyError as e:
            raise MetadataMismatch("Fit does not cover the plan: {0}".format(e))
        values.append(value)
        sigmas.append(sigma)
    return ObservationVector(np.array(values) - cm.offsets, sigmas)


def invert(cm, ov):
    """
    Linear stage: normal equations, solution, devectorization and projection.
    Returns (rho_v, hermitian, rho, C, b_tilde).
    """
    C, b_tilde = normal_equations(cm, ov)
    rho_v = solve_state(C, b_tilde)
    hermitian = devectorize(rho_v)
    rho = project_to_physical(hermitian)
    return rho_v, hermitian, rho, C, b_tilde


class Reconstruction(object):
    def __init__(
        self,
        rho,
        rho_v,
        kappa,
        atkinson,
        projection_distance,
        fit=None,
        fidelity_vs_truth=None,
        rank=8,
    ):
        self.rho = rho
        self.rho_v = np.asarray(rho_v, dtype=float)
        self.kappa = float(kappa)
        self.atkinson = dict(atkinson)
        self.projection_distance = float(projection_distance)
        self.fit = fit
        self.fidelity_vs_truth = fidelity_vs_truth
        self.rank = rank

    def to_dict(self):
        return {
            "rho": state_to_dict(self.rho),
            "rho_v": [float(x) for x in self.rho_v],
            "fidelity_vs_truth": self.fidelity_vs_truth,
            "fidelity_convention": FIDELITY_CONVENTION,
            "kappa": self.kappa,
            "atkinson": self.atkinson,
            "projection_distance_frobenius": self.projection_distance,
            "rank": self.rank,
            "fit": None if self.fit is None else self.fit.to_dict(),
        }


def reconstruct_from_observations(cm, ov, truth=None, fit=None):
    rho_v, hermitian, rho, C, b_tilde = invert(cm, ov)
    kappa = condition_number(C)
    norm_b = np.linalg.norm(b_tilde)
    delta_b = np.linalg.norm(cm.O.T @ (cm.weights * ov.sigma_b))
    rel_db = float(delta_b / norm_b) if norm_b > 0 else 0.0
    lower, upper = atkinson_bounds(kappa, rel_db)
    distance = float(np.linalg.norm(hermitian - rho.entries))
    reconstruction = Reconstruction(
        rho,
        rho_v,
        kappa,
        {"lower": lower, "upper": upper, "rel_db": rel_db},
        distance,
        fit=fit,
        fidelity_vs_truth=None if truth is None else fidelity(rho, truth),
        rank=cm.rank,
    )
    logger.info(
        "Reconstructed state: kappa=%.4g, projection moved %.3e, Atkinson upper %.3e",
        kappa,
        distance,
        upper,
    )
    return reconstruction


def fit_traces(trace_set, plan, eta, zeta, phi_reference=0.0, defaults=None):
    """Joint fit of the CYCLOPS-combined traces of every plan entry"""
    traces = []
    for tag in plan.tags:
        for variant in CYCLOPS_VARIANTS:
            try:
                traces.append(trace_set.combined[(tag, variant)])
            except KeyError:
                raise MetadataMismatch(
                    "Trace set has no {0} combination for pulse {1!r}".format(
                        variant, tag
                    )
                )
    spec = FitModelSpec(traces, eta=eta, zeta=zeta, phi_reference=phi_reference)
    try:
        init = estimate_initial(traces, defaults)
    except NoSpectralPeak as e:
        logger.warning("%s; starting from the configured defaults", e)
        init = dict(defaults or {})
    if phi_reference:
        init["phi"] = phi_reference
    return joint_fit(spec, init)


def reconstruct(
    trace_set,
    plan,
    observables,
    eta,
    zeta,
    phi_reference=0.0,
    truth=None,
    defaults=None,
    allow_nonstandard=False,
):
    """
    Traces to state: joint fit, observation vector, normal equations,
    solution and physical projection, with kappa and Atkinson diagnostics.
    """
    plan = plan.with_zeta(zeta)
    cm = build_coefficient_matrix(plan, observables, allow_nonstandard)
    fit = fit_traces(trace_set, plan, eta, zeta, phi_reference, defaults)
    ov = assemble_observations(fit, cm)
    return reconstruct_from_observations(cm, ov, truth=truth, fit=fit)
