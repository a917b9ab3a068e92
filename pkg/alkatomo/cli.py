# -*- coding: utf-8 -*-
"""
Command line interface: file-based stages from trace synthesis to
reconstruction, plus the conditioning studies.
"""
import argparse
import logging
import os.path as osp

import numpy as np

import alkatomo

from .calib import (
    AbsorptionSample,
    calibration_record,
    eta_from_absorption,
    load_calibration,
    synthesize_stretched_traces,
    synthetic_absorption,
    zeta_from_stretched,
)
from .design import kappa_scan, minimize_kappa, optimize_repetitions
from .errors import AlkatomoError, MetadataMismatch, NotConverged, SingularSystem
from .qutrit import fidelity, load_state, save_state
from .signal import (
    load_trace_set,
    max_abs_amplitude,
    synthesize_trace_set,
    trace_seed,
    write_trace_set,
)
from .tomo import build_coefficient_matrix, fit_traces, reconstruct
from .utils import atomic_open, write_json

logger = logging.getLogger("alkatomo")
cli_logger = logging.getLogger("alkatomo.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_SINGULAR = 3
EXIT_METADATA = 4

ANGLE_TOL = 1e-12


def provenance(config):
    return {"config_hash": config.hash(), "version": alkatomo.version}


def _synth(config, rho, observables, params, master_seed):
    """Trace set of rho; relative noise is scaled by the noiseless amplitude"""
    plan = config.plan(params.zeta)
    grid = config.grid()
    sigma = config["noise"]["sigma"]
    if config["noise"].get("sigma_relative") is not None:
        noiseless = synthesize_trace_set(rho, plan, observables, params, grid, 0.0, master_seed)
        sigma = config.noise_sigma(max_abs_amplitude(noiseless))
    return synthesize_trace_set(rho, plan, observables, params, grid, sigma, master_seed), sigma


def _calibration(args, config):
    if getattr(args, "calibration", None):
        return load_calibration(args.calibration)
    signal = config["signal"]
    return {"eta": signal["eta"], "zeta": signal["zeta"], "phi": signal["phi"]}


def _check_plan(manifest, config):
    """The trace set must have been acquired with the configured plan"""
    recorded = manifest.get("plan", {}).get("pulses", [])
    configured = config.plan().to_dict()["pulses"]
    if [p["tag"] for p in recorded] != [p["tag"] for p in configured]:
        raise MetadataMismatch(
            "Trace set pulses {0} differ from the configured plan {1}".format(
                [p["tag"] for p in recorded], [p["tag"] for p in configured]
            )
        )
    for r, c in zip(recorded, configured):
        if "axis" in c and (
            "axis" not in r
            or not np.allclose(r["axis"], c["axis"], atol=ANGLE_TOL)
            or abs(r["angle"] - c["angle"]) > ANGLE_TOL
        ):
            raise MetadataMismatch(
                "Pulse {0!r} of the trace set is {1}, the plan has {2}".format(
                    c["tag"], r, c
                )
            )


# ___________________________________________________
# Subcommands


def cmd_synth(args, config):
    out = args.out or "traces"
    observables = config.observables(args.allow_nonstandard_conventions)
    rho = config.state()
    params = config.signal_params()
    trace_set, sigma = _synth(config, rho, observables, params, config["master_seed"])
    extra = provenance(config)
    extra.update(
        {
            "plan": config.plan(params.zeta).to_dict(),
            "observables": observables.name,
            "sigma": sigma,
        }
    )
    write_trace_set(out, trace_set, extra=extra, force=args.force)
    save_state(osp.join(out, "truth.json"), rho)
    return EXIT_OK


def cmd_calibrate(args, config):
    out = args.out or "calibration.json"
    observables = config.observables(args.allow_nonstandard_conventions)
    params = config.signal_params()
    absorption = config["absorption"]
    if absorption["probe"] is not None and absorption["far"] is not None:
        probe = AbsorptionSample(*absorption["probe"], detuning="probe")
        far = AbsorptionSample(*absorption["far"], detuning="far")
    else:
        probe, far = synthetic_absorption(params.eta)
    eta = eta_from_absorption(probe, far)

    grid = config.grid()
    sigma = config["noise"]["sigma"]
    if config["noise"].get("sigma_relative") is not None:
        noiseless = synthesize_stretched_traces(params, grid, observables)
        amplitude = max(np.max(np.abs(t.values - params.offset)) for t in noiseless)
        sigma = config.noise_sigma(amplitude)
    trace_z, trace_x = synthesize_stretched_traces(
        params,
        grid,
        observables,
        sigma=sigma,
        seed=trace_seed(config["master_seed"], 0),
        epsilon=config["state"].get("epsilon", 0.0),
    )
    estimate = zeta_from_stretched(
        trace_z, trace_x, eta=eta, observables=observables, init=config["signal"]
    )
    record = calibration_record(
        eta,
        estimate.zeta,
        estimate.stderr,
        params.detuning_hz,
        config.lineshape(),
        estimate.phi,
    )
    record.update(provenance(config))
    write_json(out, record, force=args.force)
    logger.info("Calibration: eta=%.8g zeta=%.8g -> %s", eta, estimate.zeta, out)
    return EXIT_OK


def cmd_fit(args, config):
    out = args.out or "fit.json"
    trace_set, manifest = load_trace_set(args.traces)
    _check_plan(manifest, config)
    calibration = _calibration(args, config)
    plan = config.plan(calibration["zeta"])
    fit = fit_traces(
        trace_set,
        plan,
        calibration["eta"],
        calibration["zeta"],
        calibration.get("phi", 0.0),
        config["signal"],
    )
    document = fit.to_dict()
    document.update(provenance(config))
    write_json(out, document, force=args.force)
    if not fit.converged:
        raise NotConverged("Joint fit did not converge; result written to " + out)
    return EXIT_OK


def cmd_reconstruct(args, config):
    out = args.out or "reconstruction.json"
    trace_set, manifest = load_trace_set(args.traces)
    _check_plan(manifest, config)
    calibration = _calibration(args, config)
    truth = load_state(args.truth) if args.truth else None
    result = reconstruct(
        trace_set,
        config.plan(),
        config.observables(args.allow_nonstandard_conventions),
        calibration["eta"],
        calibration["zeta"],
        phi_reference=calibration.get("phi", 0.0),
        truth=truth,
        defaults=config["signal"],
        allow_nonstandard=args.allow_nonstandard_conventions,
    )
    document = result.to_dict()
    document.update(provenance(config))
    write_json(out, document, force=args.force)
    if truth is not None:
        logger.info("Fidelity with the true state: %.12f", result.fidelity_vs_truth)
    if not result.fit.converged:
        raise NotConverged("Joint fit did not converge; result written to " + out)
    return EXIT_OK


def cmd_condition_scan(args, config):
    out = args.out or "condition_scan.csv"
    lp = config.lineshape()
    scan = config["scan"]
    delta_range = (scan["min_hz"], scan["max_hz"])
    rows = kappa_scan(lp, delta_range, scan["step_hz"])
    delta, zeta, kappa = minimize_kappa(lp, delta_range)
    with atomic_open(out, force=args.force) as f:
        f.write(
            "# alkatomo condition-scan; config_hash={config_hash}; version={version}\n".format(
                **provenance(config)
            )
        )
        f.write(
            "# minimum: detuning_hz=%.17g; zeta=%.17g; kappa=%.17g\n" % (delta, zeta, kappa)
        )
        f.write("detuning_hz,zeta,kappa\n")
        for row in rows:
            f.write("%.17g,%.17g,%.17g\n" % row)
    return EXIT_OK


def cmd_optimize_reps(args, config):
    out = args.out or "repetitions.json"
    observables = config.observables(args.allow_nonstandard_conventions)
    cm = build_coefficient_matrix(
        config.plan(), observables, args.allow_nonstandard_conventions
    )
    budget = args.budget if args.budget is not None else config["reps"]["budget"]
    assignment = optimize_repetitions(cm, budget)
    document = assignment.to_dict()
    document["row_labels"] = [list(label) for label in cm.row_labels]
    document.update(provenance(config))
    write_json(out, document, force=args.force)
    logger.info(
        "kappa %.6g -> %.6g with %s repetitions",
        assignment.kappa_trace[0],
        assignment.kappa_trace[-1],
        budget,
    )
    return EXIT_OK


def cmd_roundtrip_bench(args, config):
    out = args.out or "bench.json"
    observables = config.observables(args.allow_nonstandard_conventions)
    params = config.signal_params()
    plan = config.plan(params.zeta)
    n_states = config["bench"]["n_states"]
    fidelities = []
    distances = []
    not_converged = 0
    for i in range(n_states):
        seed = trace_seed(config["master_seed"], i)
        rho = alkatomo.random_state(seed)
        trace_set, _ = _synth(config, rho, observables, params, seed)
        result = reconstruct(
            trace_set,
            plan,
            observables,
            params.eta,
            params.zeta,
            phi_reference=params.phi,
            truth=rho,
            defaults=config["signal"],
            allow_nonstandard=args.allow_nonstandard_conventions,
        )
        fidelities.append(fidelity(result.rho, rho))
        distances.append(result.projection_distance)
        not_converged += not result.fit.converged
    document = {
        "n_states": n_states,
        "fidelities": fidelities,
        "min_fidelity": float(np.min(fidelities)) if fidelities else None,
        "median_fidelity": float(np.median(fidelities)) if fidelities else None,
        "max_projection_distance": float(np.max(distances)) if distances else None,
        "not_converged": int(not_converged),
        "fidelity_convention": "squared",
    }
    document.update(provenance(config))
    write_json(out, document, force=args.force)
    logger.info(
        "Round trip over %s states: median fidelity %s", n_states, document["median_fidelity"]
    )
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "calibrate": cmd_calibrate,
    "fit": cmd_fit,
    "reconstruct": cmd_reconstruct,
    "condition-scan": cmd_condition_scan,
    "optimize-reps": cmd_optimize_reps,
    "roundtrip-bench": cmd_roundtrip_bench,
}


def make_parser():
    parser = argparse.ArgumentParser(prog="alkatomo")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="JSON configuration file")
    common.add_argument("--seed", type=int, help="Overrides master_seed")
    common.add_argument("--out", type=str, help="Output file or directory")
    common.add_argument("--force", action="store_true", help="Overwrite outputs")
    common.add_argument(
        "--allow-nonstandard-conventions",
        action="store_true",
        help="Accept observable sets that fail the CYCLOPS identities",
    )
    common.add_argument("-d", "--debug", action="store_true")
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True
    for name in COMMANDS:
        subparser = subparsers.add_parser(name, parents=[common])
        if name in ("fit", "reconstruct"):
            subparser.add_argument("traces", type=str, help="Trace-set directory")
            subparser.add_argument("--calibration", type=str, help="Calibration record")
        if name == "reconstruct":
            subparser.add_argument("--truth", type=str, help="True state JSON")
        if name == "optimize-reps":
            subparser.add_argument("--budget", type=int, help="Total repetitions")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    if args.debug:
        alkatomo.debug()
    try:
        config = alkatomo.config.load_config(args.config, args.seed)
        return COMMANDS[args.command](args, config)
    except NotConverged as e:
        cli_logger.error(str(e))
        return EXIT_NOT_CONVERGED
    except SingularSystem as e:
        cli_logger.error(str(e))
        return EXIT_SINGULAR
    except MetadataMismatch as e:
        cli_logger.error(str(e))
        return EXIT_METADATA
    except (AlkatomoError, IOError, ValueError) as e:
        cli_logger.error("%s: %s", e.__class__.__name__, e)
        return EXIT_ERROR
