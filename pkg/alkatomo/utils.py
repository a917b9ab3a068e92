#!/usr/bin/env python
# -*- coding: utf-8 -*-
import json
import logging
import os
import os.path as osp
import tempfile
from contextlib import contextmanager

import numpy as np

from .errors import OutputExists

logger = logging.getLogger("alkatomo")


def create_directory(dirname, must_not_exist=False):
    """
    Creates a directory if certain conditions are met.

    :param dirname: Name of the directory to be created
    :type dirname: str
    :param must_not_exist: Raise OutputExists if the directory exists and is not empty
    :type must_not_exist: bool, optional
    """
    if osp.isfile(dirname):
        raise OutputExists("{0} is a file".format(dirname))
    if osp.isdir(dirname):
        if must_not_exist and os.listdir(dirname):
            raise OutputExists(
                "{0} exists and is not empty; use --force to overwrite".format(dirname)
            )
        else:
            logger.debug("%s already exists, not recreating", dirname)
            return
    logger.info("Creating directory %s", dirname)
    os.makedirs(dirname)


@contextmanager
def atomic_open(path, force=True):
    """
    Like open(path, "w"), but the content only appears under `path` once the
    block exits without error (write to a temporary file, then rename).
    """
    path = osp.abspath(path)
    if not force and osp.exists(path):
        raise OutputExists("{0} exists; use --force to overwrite".format(path))
    dirname = osp.dirname(path)
    if not osp.isdir(dirname):
        create_directory(dirname)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=dirname)
    try:
        with os.fdopen(fd, "w") as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if osp.exists(tmp):
            os.remove(tmp)
        raise
    logger.debug("Wrote %s", path)


def write_json(path, data, force=True):
    with atomic_open(path, force=force) as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    with open(path, "r") as f:
        return json.load(f)


# ___________________________________________________
# Complex matrices in JSON: nested [re, im] pairs


def complex_matrix_to_list(matrix):
    matrix = np.asarray(matrix, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in matrix]


def complex_matrix_from_list(data):
    array = np.asarray(data, dtype=float)
    if array.ndim != 3 or array.shape[-1] != 2:
        raise ValueError(
            "Expected a nested list of [re, im] pairs, got shape {0}".format(
                array.shape
            )
        )
    return array[..., 0] + 1j * array[..., 1]
