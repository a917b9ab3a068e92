# -*- coding: utf-8 -*-
import copy
import hashlib
import json
import logging
import os.path as osp
import pprint

import numpy as np

from .calib import LineshapeParams
from .errors import ConfigError
from .observables import OBSERVABLE_PRESETS, load_observables, plan_from_dict
from .qutrit import load_state, mixed_state, random_state, stretched_state
from .signal import SignalParams, default_grid
from .utils import read_json

logger = logging.getLogger("alkatomo")

STATE_PRESETS = ("random", "stretched-z", "stretched-x", "stretched-y", "mixed")


class RunConfig(dict):
    """Effective run configuration: defaults, deep-merged with a JSON file"""

    def __init__(self, *args, **kwargs):
        # Set some default values
        self["master_seed"] = 0
        self["lineshape"] = {"sigma_d_hz": 230e6, "gamma_l_hz": 3e6, "chi": 1.0}
        self["signal"] = {
            "eta": 1.0,
            "zeta": 0.3,
            "gamma1": 3.0,
            "gamma2": 3.0,
            "omega_l": 2.0 * np.pi * 20.0,
            "phi": 0.0,
            "offset": 0.0,
            "detuning_hz": 0.0,
        }
        self["grid"] = {"n_samples": 4096, "duration_s": 1.0}
        self["noise"] = {"sigma": 0.0, "sigma_relative": None}
        self["plan"] = [
            {"tag": "I", "axis": "z", "angle": 0.0, "repetitions": 1},
            {"tag": "X90", "axis": "x", "angle": np.pi / 2, "repetitions": 1},
            {"tag": "Y90", "axis": "y", "angle": np.pi / 2, "repetitions": 1},
        ]
        self["observables"] = "default"
        self["state"] = {"preset": "random", "epsilon": 0.0, "seed": None, "file": None}
        self["absorption"] = {"probe": None, "far": None}
        self["scan"] = {"min_hz": 50e6, "max_hz": 400e6, "step_hz": 1e6}
        self["reps"] = {"budget": 20}
        self["bench"] = {"n_states": 100}
        super(RunConfig, self).__init__()
        for d in args + (kwargs,):
            self.merge(d)

    def merge(self, other):
        """Deep-merges `other` into self; unknown keys are a ConfigError"""
        for key, value in dict(other).items():
            if key not in self:
                raise ConfigError("Unknown configuration key {0!r}".format(key))
            if isinstance(self[key], dict) and isinstance(value, dict):
                unknown = set(value) - set(self[key])
                if unknown:
                    raise ConfigError(
                        "Unknown keys in section {0!r}: {1}".format(key, sorted(unknown))
                    )
                self[key] = dict(self[key], **value)
            elif isinstance(self[key], dict) and value is not None:
                raise ConfigError("Section {0!r} must be an object".format(key))
            else:
                self[key] = copy.deepcopy(value)
        return self

    def hash(self):
        return config_hash(self)

    # Builders for the domain objects

    def lineshape(self):
        return LineshapeParams.from_dict(self["lineshape"])

    def signal_params(self, **overrides):
        return SignalParams.from_dict(dict(self["signal"], **overrides))

    def grid(self):
        return default_grid(self["grid"]["n_samples"], self["grid"]["duration_s"])

    def observables(self, allow_nonstandard=False):
        return load_observables(self["observables"], allow_nonstandard)

    def plan(self, zeta=None):
        zeta = self["signal"]["zeta"] if zeta is None else zeta
        return plan_from_dict({"pulses": self["plan"]}, zeta)

    def state(self, seed=None):
        state = self["state"]
        if state.get("file"):
            return load_state(state["file"])
        preset = state["preset"]
        if preset == "random":
            if seed is None:
                seed = self["master_seed"] if state.get("seed") is None else state["seed"]
            return random_state(seed)
        elif preset == "mixed":
            return mixed_state()
        elif preset.startswith("stretched-"):
            return stretched_state(preset.split("-", 1)[1], state.get("epsilon", 0.0))
        raise ConfigError("Unknown state preset {0!r}".format(preset))

    def noise_sigma(self, amplitude):
        """Noise standard deviation, relative settings scaled by `amplitude`"""
        noise = self["noise"]
        if noise.get("sigma_relative") is not None:
            return float(noise["sigma_relative"]) * amplitude
        return float(noise["sigma"])

    def __repr__(self):
        return pprint.pformat(dict(self))


def config_hash(config):
    """First 16 hex digits of the SHA-256 of the canonical JSON"""
    canonical = json.dumps(dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def validate(config):
    if config["state"]["preset"] not in STATE_PRESETS:
        raise ConfigError(
            "state.preset must be one of {0}, not {1!r}".format(
                STATE_PRESETS, config["state"]["preset"]
            )
        )
    for path in (config["state"].get("file"),):
        if path and not osp.isfile(path):
            raise ConfigError("State file {0} does not exist".format(path))
    observables = config["observables"]
    if observables not in OBSERVABLE_PRESETS and not osp.isfile(observables):
        raise ConfigError(
            "observables must be one of {0} or an existing JSON file, not {1!r}".format(
                sorted(OBSERVABLE_PRESETS), observables
            )
        )
    if not isinstance(config["master_seed"], int) or config["master_seed"] < 0:
        raise ConfigError("master_seed must be a nonnegative integer")
    for sample in ("probe", "far"):
        value = config["absorption"][sample]
        if value is not None and len(value) != 2:
            raise ConfigError("absorption.{0} must be [U1, U2]".format(sample))
    return config


def load_config(path=None, seed=None):
    """
    Defaults, merged with the JSON file at `path`; `seed` overrides
    master_seed before the configuration is hashed.
    """
    config = RunConfig()
    if path is not None:
        if not osp.isfile(path):
            raise ConfigError("Config file {0} does not exist".format(path))
        try:
            config.merge(read_json(path))
        except ValueError as e:
            raise ConfigError("Cannot parse {0}: {1}".format(path, e))
    if seed is not None:
        config["master_seed"] = int(seed)
    validate(config)
    logger.debug("Effective configuration:\n%s", config)
    return config
