# -*- coding: utf-8 -*-
"""
Qutrit state algebra in the F=1 Zeeman basis.

Conventions used throughout the package:

- basis order is m = (-1, 0, +1), so matrix index 0 is m=-1 and index 2 is m=+1
- spin-1 matrices follow the Condon-Shortley phase convention
- a pulse about unit axis n by angle a is U = exp(-i a n.F)
- fidelity is the squared Uhlmann fidelity [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2
"""
import logging

import numpy as np
import scipy.linalg

from .errors import NonUnitAxis, NotHermitian, NotPSD, TraceNotOne
from .utils import complex_matrix_from_list, complex_matrix_to_list, read_json, write_json

logger = logging.getLogger("alkatomo")

BASIS = (-1, 0, 1)
BASIS_LABEL = "m=-1,0,+1"
FIDELITY_CONVENTION = "squared"

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNITARY_TOL = 1e-12
AXIS_TOL = 1e-9
PROJECTION_TRACE_TOL = 1e-9


def _spin1_matrices():
    # Raising operator: <m+1|F+|m> = sqrt(2) for m = -1, 0
    fplus = np.zeros((3, 3), dtype=complex)
    fplus[1, 0] = np.sqrt(2.0)
    fplus[2, 1] = np.sqrt(2.0)
    fminus = fplus.conj().T
    fx = (fplus + fminus) / 2.0
    fy = (fplus - fminus) / 2.0j
    fz = np.diag(np.array(BASIS, dtype=complex))
    return fx, fy, fz


FX, FY, FZ = _spin1_matrices()
SPIN_MATRICES = {"x": FX, "y": FY, "z": FZ}
AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


def as_matrix(rho):
    """Returns the plain 3x3 complex array behind a DensityMatrix or array-like"""
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def hermitian_violation(matrix):
    matrix = np.asarray(matrix, dtype=complex)
    return float(np.max(np.abs(matrix - matrix.conj().T)))


class DensityMatrix(object):
    """
    Validated qutrit state. Entries are stored read-only; build one with
    `make_density_matrix`.
    """

    def __init__(self, entries):
        entries = np.array(entries, dtype=complex)
        entries.setflags(write=False)
        self.entries = entries

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return np.array(self.entries)
        return np.array(self.entries, dtype=dtype)

    def populations(self):
        return np.real(np.diag(self.entries)).copy()

    def eigenvalues(self):
        return scipy.linalg.eigvalsh(self.entries)

    def __eq__(self, other):
        return isinstance(other, DensityMatrix) and np.array_equal(
            self.entries, other.entries
        )

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return "DensityMatrix(\n{0})".format(np.array2string(self.entries, precision=5))


def make_density_matrix(raw):
    """
    Validates `raw` as a qutrit state and returns a DensityMatrix.
    Raises NotHermitian, TraceNotOne or NotPSD naming the violation.
    """
    raw = np.asarray(raw, dtype=complex)
    if raw.shape != (3, 3):
        raise ValueError("Expected a 3x3 matrix, got shape {0}".format(raw.shape))
    if not np.all(np.isfinite(raw)):
        raise ValueError("Matrix has non-finite entries")
    violation = hermitian_violation(raw)
    if violation > HERMITIAN_TOL:
        raise NotHermitian(
            "Matrix is not Hermitian: max |rho - rho^dagger| = {0:.3e}".format(
                violation
            ),
            violation,
        )
    # Exactly Hermitian from here on
    hermitian = 0.5 * (raw + raw.conj().T)
    trace = float(np.real(np.trace(hermitian)))
    if abs(trace - 1.0) > TRACE_TOL:
        raise TraceNotOne(
            "Trace is {0!r}, off by {1:.3e}".format(trace, trace - 1.0),
            abs(trace - 1.0),
        )
    lowest = float(scipy.linalg.eigvalsh(hermitian)[0])
    if lowest < -PSD_TOL:
        raise NotPSD(
            "Matrix has negative eigenvalue {0:.3e}".format(lowest), -lowest
        )
    return DensityMatrix(hermitian)


def mixed_state():
    """The isotropic state I/3"""
    return DensityMatrix(np.eye(3, dtype=complex) / 3.0)


# ___________________________________________________
# Vectorization


def vectorize(rho):
    """
    Returns the 8 stored reals of rho in the order
    [r(-1,-1), Re r(-1,0), Im r(-1,0), Re r(-1,+1), Im r(-1,+1), r(0,0),
    Re r(0,+1), Im r(0,+1)]; r(+1,+1) follows from the unit trace.
    """
    m = as_matrix(rho)
    return np.array(
        [
            m[0, 0].real,
            m[0, 1].real,
            m[0, 1].imag,
            m[0, 2].real,
            m[0, 2].imag,
            m[1, 1].real,
            m[1, 2].real,
            m[1, 2].imag,
        ]
    )


def devectorize(v):
    """
    Inverse of `vectorize`. The result is Hermitian with unit trace by
    construction but not necessarily positive semidefinite.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (8,):
        raise ValueError("Expected 8 reals, got shape {0}".format(v.shape))
    m = np.empty((3, 3), dtype=complex)
    m[0, 0] = v[0]
    m[1, 1] = v[5]
    m[2, 2] = 1.0 - v[0] - v[5]
    m[0, 1] = v[1] + 1j * v[2]
    m[0, 2] = v[3] + 1j * v[4]
    m[1, 2] = v[6] + 1j * v[7]
    m[1, 0] = np.conj(m[0, 1])
    m[2, 0] = np.conj(m[0, 2])
    m[2, 1] = np.conj(m[1, 2])
    return m


# ___________________________________________________
# Pulses


class PulseUnitary(object):
    """
    A 3x3 unitary acting on the qutrit, with its provenance.
    Rotations carry their axis and angle; products carry neither.
    """

    def __init__(self, matrix, tag=None, axis=None, angle=None):
        matrix = np.array(matrix, dtype=complex)
        if matrix.shape != (3, 3):
            raise ValueError("Expected a 3x3 matrix, got shape {0}".format(matrix.shape))
        violation = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(3))))
        if violation > UNITARY_TOL:
            raise ValueError(
                "Pulse is not unitary: max |U^dagger U - 1| = {0:.3e}".format(violation)
            )
        matrix.setflags(write=False)
        self.matrix = matrix
        self.axis = None if axis is None else tuple(float(a) for a in axis)
        self.angle = None if angle is None else float(angle)
        self.tag = tag if tag is not None else self._default_tag()

    def _default_tag(self):
        if self.axis is None:
            return "U"
        return "R({0:.4g},{1:.4g},{2:.4g},{3:.6g})".format(
            self.axis[0], self.axis[1], self.axis[2], self.angle
        )

    @property
    def H(self):
        """The inverse pulse"""
        if self.axis is not None:
            return spin1_rotation(self.axis, -self.angle, tag=self.tag + "^-1")
        return PulseUnitary(self.matrix.conj().T, tag=self.tag + "^-1")

    def to_dict(self):
        d = {"tag": self.tag}
        if self.axis is not None:
            d["axis"] = list(self.axis)
            d["angle"] = self.angle
        else:
            d["matrix"] = complex_matrix_to_list(self.matrix)
        return d

    def __repr__(self):
        return "PulseUnitary({0})".format(self.tag)


def pulse_from_dict(d):
    if "matrix" in d:
        return PulseUnitary(complex_matrix_from_list(d["matrix"]), tag=d.get("tag"))
    return spin1_rotation(d["axis"], d["angle"], tag=d.get("tag"))


def spin1_rotation(axis, angle, tag=None):
    """
    U = exp(-i angle axis.F). `axis` is a unit 3-vector or one of "x", "y", "z".
    """
    if isinstance(axis, str):
        axis = AXES[axis]
    axis = np.asarray(axis, dtype=float)
    norm = float(np.linalg.norm(axis))
    if abs(norm - 1.0) > AXIS_TOL:
        raise NonUnitAxis(
            "Rotation axis has norm {0!r}".format(norm), abs(norm - 1.0)
        )
    generator = axis[0] * FX + axis[1] * FY + axis[2] * FZ
    matrix = scipy.linalg.expm(-1j * float(angle) * generator)
    return PulseUnitary(matrix, tag=tag, axis=axis, angle=angle)


def pulse_product(*pulses):
    """
    Single pulse equivalent to applying `pulses` in the given order
    (the first argument acts first).
    """
    matrix = np.eye(3, dtype=complex)
    for pulse in pulses:
        matrix = pulse.matrix @ matrix
    return PulseUnitary(matrix, tag="*".join(p.tag for p in pulses))


def apply_pulse(rho, pulse):
    """Returns U rho U^dagger"""
    u = pulse.matrix if isinstance(pulse, PulseUnitary) else np.asarray(pulse)
    rotated = u @ as_matrix(rho) @ u.conj().T
    return DensityMatrix(0.5 * (rotated + rotated.conj().T))


# ___________________________________________________
# Reference and random states


class StretchedSpec(object):
    """Stretched state along `axis` with isotropic admixture `epsilon`"""

    def __init__(self, axis="z", epsilon=0.0):
        if axis not in AXES:
            raise ValueError("Stretched axis must be x, y or z, not {0!r}".format(axis))
        epsilon = float(epsilon)
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1], got {0!r}".format(epsilon))
        self.axis = axis
        self.epsilon = epsilon

    def __repr__(self):
        return "StretchedSpec(axis={0!r}, epsilon={1!r})".format(self.axis, self.epsilon)


# Rotation taking the z axis onto the stretched axis
_STRETCH_ROTATIONS = {
    "z": ("z", 0.0),
    "x": ("y", np.pi / 2),
    "y": ("x", -np.pi / 2),
}


def stretched_state(spec, epsilon=None):
    """
    (1-eps) |m_axis=+1><m_axis=+1| + eps I/3. Accepts a StretchedSpec or
    an axis name plus `epsilon`.
    """
    if not isinstance(spec, StretchedSpec):
        spec = StretchedSpec(spec, 0.0 if epsilon is None else epsilon)
    up = np.zeros((3, 3), dtype=complex)
    up[2, 2] = 1.0
    rotation_axis, angle = _STRETCH_ROTATIONS[spec.axis]
    pure = apply_pulse(up, spin1_rotation(rotation_axis, angle)).entries
    return DensityMatrix(
        (1.0 - spec.epsilon) * pure + spec.epsilon * np.eye(3) / 3.0
    )


def random_state(seed):
    """
    Ginibre-induced random state: rho = G G^dagger / Tr(G G^dagger) with G a
    matrix of independent standard complex normals.
    """
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) / np.sqrt(
        2.0
    )
    gg = g @ g.conj().T
    gg = gg / np.real(np.trace(gg))
    return DensityMatrix(0.5 * (gg + gg.conj().T))


# ___________________________________________________
# Figures of merit and projection


def _psd_sqrt(matrix):
    w, v = scipy.linalg.eigh(matrix)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho, sigma):
    """Squared Uhlmann fidelity, clipped to [0, 1]"""
    sqrt_rho = _psd_sqrt(as_matrix(rho))
    inner = sqrt_rho @ as_matrix(sigma) @ sqrt_rho
    w = scipy.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(max(value, 0.0), 1.0)


def purity(rho):
    m = as_matrix(rho)
    return float(np.real(np.trace(m @ m)))


def project_onto_simplex(values):
    """
    Euclidean projection of a real vector onto the probability simplex
    (sort-and-shift water filling).
    """
    values = np.asarray(values, dtype=float)
    ordered = np.sort(values)[::-1]
    cumulative = np.cumsum(ordered) - 1.0
    index = np.arange(1, len(values) + 1)
    feasible = ordered - cumulative / index > 0
    k = index[feasible][-1]
    shift = cumulative[k - 1] / k
    return np.clip(values - shift, 0.0, None)


def project_to_physical(hermitian):
    """
    Frobenius-closest density matrix to a Hermitian unit-trace matrix:
    the eigenvalues are projected onto the probability simplex and the
    eigenvectors are kept.
    """
    h = as_matrix(hermitian)
    violation = hermitian_violation(h)
    if violation > HERMITIAN_TOL:
        raise NotHermitian(
            "Cannot project a non-Hermitian matrix: max |H - H^dagger| = {0:.3e}".format(
                violation
            ),
            violation,
        )
    h = 0.5 * (h + h.conj().T)
    trace = float(np.real(np.trace(h)))
    if abs(trace - 1.0) > PROJECTION_TRACE_TOL:
        raise TraceNotOne(
            "Cannot project a matrix of trace {0!r} onto the states".format(trace),
            abs(trace - 1.0),
        )
    w, v = scipy.linalg.eigh(h)
    if w[0] >= 0.0:
        return DensityMatrix(h)
    projected = project_onto_simplex(w)
    logger.debug("Projected eigenvalues %s -> %s", w, projected)
    rho = (v * projected) @ v.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


# ___________________________________________________
# State JSON


def state_to_dict(rho):
    return {"basis": BASIS_LABEL, "rho": complex_matrix_to_list(as_matrix(rho))}


def state_from_dict(d):
    if d.get("basis", BASIS_LABEL) != BASIS_LABEL:
        raise ValueError(
            "State basis {0!r} is not {1!r}".format(d.get("basis"), BASIS_LABEL)
        )
    return make_density_matrix(complex_matrix_from_list(d["rho"]))


def save_state(path, rho, force=True):
    write_json(path, state_to_dict(rho), force=force)


def load_state(path):
    return state_from_dict(read_json(path))
