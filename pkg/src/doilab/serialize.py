"""JSON encoding of matrices, commuting pairs, and joint spectra.

A square complex matrix travels as {dim, re, im} with row-major real and
imaginary parts; a pair file holds {A1, A2} in that form and a spectrum
file holds {dim, basis, pairs}.  Loaders validate shapes and re-run the
type invariants, so a corrupted file fails loudly instead of producing a
silently wrong experiment.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError, DoilabError
from .spectral import CommutingPair, JointSpectrum, joint_diagonalize

__all__ = [
    "matrix_from_json",
    "matrix_to_json",
    "pair_from_json",
    "pair_to_json",
    "spectrum_from_file",
    "spectrum_from_json",
    "spectrum_to_json",
]


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"only square matrices serialize, got shape {M.shape}")
    return {
        "dim": int(M.shape[0]),
        "re": M.real.ravel().tolist(),
        "im": M.imag.ravel().tolist(),
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed matrix object: {exc}")
    if dim < 1 or re.shape != (dim * dim,) or im.shape != (dim * dim,):
        raise ConfigError(
            f"matrix object inconsistent: dim {dim} with {re.size} + {im.size}j entries"
        )
    return (re + 1j * im).reshape(dim, dim)


def pair_to_json(pair: CommutingPair) -> dict:
    return {
        "A1": matrix_to_json(pair.A1),
        "A2": matrix_to_json(pair.A2),
        "commTol": pair.comm_tol,
    }


def pair_from_json(obj) -> CommutingPair:
    if not isinstance(obj, dict) or "A1" not in obj or "A2" not in obj:
        raise ConfigError("pair object needs A1 and A2 matrices")
    tol = obj.get("commTol")
    return CommutingPair(
        matrix_from_json(obj["A1"]),
        matrix_from_json(obj["A2"]),
        comm_tol=None if tol is None else float(tol),
    )


def spectrum_to_json(spec: JointSpectrum) -> dict:
    return {
        "dim": spec.dim,
        "basis": matrix_to_json(spec.basis),
        "pairs": [[float(a), float(b)] for a, b in spec.pairs],
    }


def spectrum_from_json(obj) -> JointSpectrum:
    if not isinstance(obj, dict) or "basis" not in obj or "pairs" not in obj:
        raise ConfigError("spectrum object needs basis and pairs")
    basis = matrix_from_json(obj["basis"])
    pairs = np.asarray(obj["pairs"], dtype=float)
    if pairs.ndim != 2 or pairs.shape != (basis.shape[0], 2):
        raise ConfigError(
            f"spectrum pairs have shape {pairs.shape}, expected ({basis.shape[0]}, 2)"
        )
    return JointSpectrum(basis=basis, pairs=pairs)


def spectrum_from_file(path) -> JointSpectrum:
    """Load a joint spectrum from a file holding either format.

    A spectrum object loads directly; a pair object is diagonalized.
    """
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")
    if isinstance(obj, dict) and "basis" in obj:
        return spectrum_from_json(obj)
    if isinstance(obj, dict) and "A1" in obj:
        try:
            return joint_diagonalize(pair_from_json(obj))
        except DoilabError:
            raise
    raise ConfigError(f"{path} holds neither a pair nor a spectrum object")
