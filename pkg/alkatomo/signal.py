# -*- coding: utf-8 -*-
"""
Forward model of the polarization-rotation signal and CYCLOPS difference
traces, plus the trace CSV / trace-set manifest formats.

For a state rho after the control and CYCLOPS pulses the rotation is

    eta (e^{-g1 t} [<aR> sin(2 W t + phi) + <aI> cos(2 W t + phi)]
         - zeta e^{-g2 t} <beta>) + offset + noise
"""
import logging
import os.path as osp

import numpy as np

from .errors import EmptyGrid, GridMismatch, MetadataMismatch, TraceFormatError
from .observables import CYCLOPS_VARIANTS, cyclops_pulse, expectation
from .qutrit import apply_pulse
from .utils import atomic_open, create_directory, read_json, write_json

logger = logging.getLogger("alkatomo")

TRACE_FORMAT = "alkatomo-trace v1"
TRACE_SET_FORMAT = "alkatomo-trace-set v1"
MANIFEST = "manifest.json"

DEFAULT_N_SAMPLES = 4096
DEFAULT_DURATION = 1.0
# 2 W / 2 pi = 40 Hz
DEFAULT_OMEGA_L = 2.0 * np.pi * 20.0
DEFAULT_GAMMA = 3.0


class SignalParams(object):
    FIELDS = (
        "eta",
        "zeta",
        "gamma1",
        "gamma2",
        "omega_l",
        "phi",
        "offset",
        "detuning_hz",
    )

    def __init__(
        self,
        eta=1.0,
        zeta=0.3,
        gamma1=DEFAULT_GAMMA,
        gamma2=DEFAULT_GAMMA,
        omega_l=DEFAULT_OMEGA_L,
        phi=0.0,
        offset=0.0,
        detuning_hz=0.0,
    ):
        self.eta = float(eta)
        self.zeta = float(zeta)
        self.gamma1 = float(gamma1)
        self.gamma2 = float(gamma2)
        self.omega_l = float(omega_l)
        self.phi = float(phi)
        self.offset = float(offset)
        self.detuning_hz = float(detuning_hz)
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError(
                "Relaxation rates must be positive: gamma1={0!r}, gamma2={1!r}".format(
                    self.gamma1, self.gamma2
                )
            )
        if not self.omega_l > 0:
            raise ValueError("omega_l must be positive, got {0!r}".format(self.omega_l))
        if not np.isfinite(self.eta) or self.eta == 0.0:
            raise ValueError("eta must be finite and nonzero, got {0!r}".format(self.eta))

    def replace(self, **kwargs):
        d = self.to_dict()
        d.update(kwargs)
        return SignalParams(**d)

    def to_dict(self):
        return {key: getattr(self, key) for key in self.FIELDS}

    @classmethod
    def from_dict(cls, d):
        return cls(**{key: d[key] for key in cls.FIELDS if key in d})

    def __eq__(self, other):
        return isinstance(other, SignalParams) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "SignalParams({0})".format(
            ", ".join("{0}={1!r}".format(k, v) for k, v in self.to_dict().items())
        )


class NoiseSpec(object):
    """White Gaussian noise with standard deviation `sigma` (rad) per sample"""

    def __init__(self, sigma=0.0, seed=0):
        self.sigma = float(sigma)
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0, got {0!r}".format(self.sigma))
        self.seed = None if seed is None else int(seed)

    def sample(self, n):
        if self.sigma == 0.0:
            return np.zeros(n)
        return np.random.default_rng(self.seed).normal(0.0, self.sigma, n)


class SignalTrace(object):
    """
    Sampled rotation signal. `meta` holds the pulse tag, CYCLOPS variant
    (None for the base acquisition), seed, kind ("raw" or "combined") and the
    SignalParams snapshot.
    """

    def __init__(self, times, values, meta=None):
        times = np.array(times, dtype=float)
        values = np.array(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError(
                "times and values must be 1D of equal length, got {0} and {1}".format(
                    times.shape, values.shape
                )
            )
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("Sample times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        self.times = times
        self.values = values
        self.meta = dict(meta or {})

    @property
    def pulse(self):
        return self.meta.get("pulse")

    @property
    def variant(self):
        return self.meta.get("variant")

    @property
    def params(self):
        params = self.meta.get("params")
        return None if params is None else SignalParams.from_dict(params)

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return "SignalTrace(pulse={0}, variant={1}, n={2})".format(
            self.pulse, self.variant, len(self)
        )


def default_grid(n_samples=DEFAULT_N_SAMPLES, duration=DEFAULT_DURATION):
    """`n_samples` equally spaced instants in [0, duration)"""
    return np.arange(int(n_samples)) * (float(duration) / int(n_samples))


def trace_seed(master_seed, index):
    """Noise seed of trace `index` of a trace set, split off the master seed"""
    sequence = np.random.SeedSequence([int(master_seed), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def model_values(times, params, alpha_R, alpha_I, beta):
    """Noiseless, offset-free rotation for given expectation values"""
    t = np.asarray(times, dtype=float)
    phase = 2.0 * params.omega_l * t + params.phi
    oscillation = np.exp(-params.gamma1 * t) * (
        alpha_R * np.sin(phase) + alpha_I * np.cos(phase)
    )
    decay = params.zeta * np.exp(-params.gamma2 * t) * beta
    return params.eta * (oscillation - decay)


def synthesize_trace(
    rho,
    pulses,
    observables,
    params,
    grid,
    noise=None,
    pulse_tag=None,
    variant=None,
):
    """
    Applies `pulses` to rho in order and samples the rotation signal on `grid`.
    """
    times = np.asarray(grid, dtype=float)
    if times.size == 0:
        raise EmptyGrid("Cannot synthesize a trace on an empty time grid")
    horizon = 10.0 / min(params.gamma1, params.gamma2)
    if times[0] < 0 or times[-1] > horizon:
        raise ValueError(
            "Grid [{0!r}, {1!r}] leaves [0, {2!r}]".format(times[0], times[-1], horizon)
        )
    for pulse in pulses:
        rho = apply_pulse(rho, pulse)
    alpha_R = expectation(rho, observables.alpha_R)
    alpha_I = expectation(rho, observables.alpha_I)
    beta = expectation(rho, observables.beta)
    noise = NoiseSpec() if noise is None else noise
    values = (
        model_values(times, params, alpha_R, alpha_I, beta)
        + params.offset
        + noise.sample(times.size)
    )
    meta = {
        "pulse": pulse_tag if pulse_tag is not None else "*".join(p.tag for p in pulses),
        "variant": variant,
        "seed": noise.seed,
        "kind": "raw",
        "params": params.to_dict(),
        "expectations": {"alpha_R": alpha_R, "alpha_I": alpha_I, "beta": beta},
    }
    return SignalTrace(times, values, meta)


def combine_cyclops(base, cycled, variant):
    """
    base - cycled. For a Y pair the cos(2 W t + phi) oscillation of <aI>
    survives, for a ZY pair the sin oscillation of <aR>; the beta decay doubles
    and the polarimeter offset cancels.
    """
    if variant not in CYCLOPS_VARIANTS:
        raise ValueError("Unknown CYCLOPS variant {0!r}".format(variant))
    if not np.array_equal(base.times, cycled.times):
        raise GridMismatch(
            "Base ({0} samples) and cycled ({1} samples) traces have different "
            "time grids".format(len(base), len(cycled))
        )
    if base.meta.get("params") != cycled.meta.get("params"):
        raise MetadataMismatch(
            "Signal parameters of base and cycled traces differ: {0} vs {1}".format(
                base.meta.get("params"), cycled.meta.get("params")
            )
        )
    if base.pulse != cycled.pulse:
        raise MetadataMismatch(
            "Base trace has pulse {0!r}, cycled trace {1!r}".format(
                base.pulse, cycled.pulse
            )
        )
    if cycled.variant is not None and cycled.variant != variant:
        raise MetadataMismatch(
            "Cycled trace was acquired with {0!r}, not {1!r}".format(
                cycled.variant, variant
            )
        )
    meta = {
        "pulse": base.pulse,
        "variant": variant,
        "seed": base.meta.get("seed"),
        "cycled_seed": cycled.meta.get("seed"),
        "kind": "combined",
        "params": base.meta.get("params"),
    }
    return SignalTrace(base.times, base.values - cycled.values, meta)


# ___________________________________________________
# Trace sets


class TraceSet(object):
    """
    Raw acquisitions keyed by (pulse tag, variant) with variant None, "Y" or
    "ZY", and the CYCLOPS-combined traces keyed by (pulse tag, variant).
    """

    def __init__(self, raw, params, combined=None, master_seed=None):
        self.raw = dict(raw)
        self.params = params
        self.master_seed = master_seed
        self.combined = dict(combined) if combined is not None else self.combine()

    @property
    def pulse_tags(self):
        tags = []
        for tag, _ in self.raw:
            if tag not in tags:
                tags.append(tag)
        return tags

    def combine(self):
        combined = {}
        for tag in self.pulse_tags:
            for variant in CYCLOPS_VARIANTS:
                if (tag, None) in self.raw and (tag, variant) in self.raw:
                    combined[(tag, variant)] = combine_cyclops(
                        self.raw[(tag, None)], self.raw[(tag, variant)], variant
                    )
        return combined

    def base(self, tag):
        return self.raw[(tag, None)]


def synthesize_trace_set(rho, plan, observables, params, grid, sigma=0.0, master_seed=0):
    """
    The base, Y and ZY acquisitions of every plan entry, noise seeded per
    trace from the master seed.
    """
    raw = {}
    for index, (_, entry, variant) in enumerate(plan.acquisitions()):
        pulses = [entry.pulse]
        if variant is not None:
            pulses.append(cyclops_pulse(variant))
        noise = NoiseSpec(sigma, trace_seed(master_seed, index))
        raw[(entry.tag, variant)] = synthesize_trace(
            rho,
            pulses,
            observables,
            params,
            grid,
            noise,
            pulse_tag=entry.tag,
            variant=variant,
        )
    logger.debug("Synthesized %s raw traces with sigma=%s", len(raw), sigma)
    return TraceSet(raw, params, master_seed=master_seed)


def max_abs_amplitude(trace_set):
    """Largest |value| over the raw traces, offset removed"""
    offset = trace_set.params.offset
    return max(float(np.max(np.abs(t.values - offset))) for t in trace_set.raw.values())


# ___________________________________________________
# CSV and manifest


def _variant_str(variant):
    return "none" if variant is None else variant


def write_trace(path, trace, force=True):
    with atomic_open(path, force=force) as f:
        f.write(
            "# {0}; pulse={1}; variant={2}; seed={3}\n".format(
                TRACE_FORMAT,
                trace.pulse,
                _variant_str(trace.variant),
                trace.meta.get("seed"),
            )
        )
        f.write("time_s,rotation_rad\n")
        for t, value in zip(trace.times, trace.values):
            f.write("%.17g,%.17g\n" % (t, value))


def _parse_header(path, line):
    if not line.startswith("# " + TRACE_FORMAT):
        raise TraceFormatError(path, 1, "expected header '# {0}; ...'".format(TRACE_FORMAT))
    fields = {}
    for part in line[2:].split(";")[1:]:
        if "=" not in part:
            raise TraceFormatError(path, 1, "malformed header field {0!r}".format(part))
        key, value = part.split("=", 1)
        fields[key.strip()] = value.strip()
    for key in ("pulse", "variant", "seed"):
        if key not in fields:
            raise TraceFormatError(path, 1, "header is missing {0}=".format(key))
    variant = None if fields["variant"] == "none" else fields["variant"]
    if variant is not None and variant not in CYCLOPS_VARIANTS:
        raise TraceFormatError(path, 1, "unknown variant {0!r}".format(variant))
    seed = None if fields["seed"] == "None" else int(fields["seed"])
    return {"pulse": fields["pulse"], "variant": variant, "seed": seed}


def read_trace(path, meta=None):
    with open(path, "r") as f:
        lines = f.read().splitlines()
    if not lines:
        raise TraceFormatError(path, 1, "empty file")
    header = _parse_header(path, lines[0])
    if len(lines) < 2 or lines[1].strip() != "time_s,rotation_rad":
        raise TraceFormatError(path, 2, "expected column line 'time_s,rotation_rad'")
    times = []
    values = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            t, value = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceFormatError(path, lineno, "cannot parse {0!r}".format(line))
        if not (np.isfinite(t) and np.isfinite(value)):
            raise TraceFormatError(path, lineno, "non-finite value in {0!r}".format(line))
        if times and t <= times[-1]:
            raise TraceFormatError(path, lineno, "time is not increasing")
        times.append(t)
        values.append(value)
    header.update(meta or {})
    return SignalTrace(times, values, header)


def trace_filename(kind, tag, variant):
    return "{0}_{1}_{2}.csv".format(kind, tag, _variant_str(variant))


def write_trace_set(directory, trace_set, extra=None, force=False):
    """
    Writes every raw and combined trace plus a manifest listing the files and
    the SignalParams snapshot. With `force` the files of this set and the
    manifest are overwritten; anything else in the directory is left alone.
    """
    create_directory(directory, must_not_exist=not force)
    members = []
    for kind, traces in (("raw", trace_set.raw), ("cyclops", trace_set.combined)):
        for (tag, variant), trace in traces.items():
            filename = trace_filename(kind, tag, variant)
            write_trace(osp.join(directory, filename), trace)
            members.append(
                {
                    "file": filename,
                    "kind": "raw" if kind == "raw" else "combined",
                    "pulse": tag,
                    "variant": variant,
                    "seed": trace.meta.get("seed"),
                }
            )
    manifest = {
        "format": TRACE_SET_FORMAT,
        "master_seed": trace_set.master_seed,
        "signal": trace_set.params.to_dict(),
        "traces": members,
    }
    manifest.update(extra or {})
    write_json(osp.join(directory, MANIFEST), manifest)
    logger.info("Wrote %s traces to %s", len(members), directory)
    return manifest


def load_trace_set(directory):
    manifest_path = osp.join(directory, MANIFEST)
    manifest = read_json(manifest_path)
    if manifest.get("format") != TRACE_SET_FORMAT:
        raise MetadataMismatch(
            "{0} is not a {1} manifest".format(manifest_path, TRACE_SET_FORMAT)
        )
    params = SignalParams.from_dict(manifest["signal"])
    raw = {}
    combined = {}
    for member in manifest["traces"]:
        path = osp.join(directory, member["file"])
        trace = read_trace(path, {"params": params.to_dict(), "kind": member["kind"]})
        if trace.pulse != member["pulse"] or trace.variant != member["variant"]:
            raise MetadataMismatch(
                "{0} header disagrees with the manifest entry {1}".format(path, member)
            )
        key = (member["pulse"], member["variant"])
        (raw if member["kind"] == "raw" else combined)[key] = trace
    trace_set = TraceSet(
        raw, params, combined=combined or None, master_seed=manifest.get("master_seed")
    )
    return trace_set, manifest
