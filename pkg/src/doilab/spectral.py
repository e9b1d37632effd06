"""Commuting Hermitian pairs and their joint spectral decomposition.

A commuting pair (A1, A2) of Hermitian matrices is simultaneously
diagonalizable: there is a unitary U and real vectors x1, x2 with
A_j = U diag(x_j) U*.  The columns of U together with the eigenvalue
pairs (x1[i], x2[i]) are the finite atomic joint spectral measure used
by the double operator integrals in :mod:`doilab.doi`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateResolutionFailure,
    DimensionMismatch,
    EvaluationFailure,
    NonCommuting,
)

__all__ = [
    "CommutingPair",
    "JointSpectrum",
    "commutator_norm",
    "functional_calculus",
    "haar_unitary",
    "joint_diagonalize",
    "random_commuting_pair",
    "require_hermitian",
]

HERMITICITY_TOL = 1e-12
UNITARITY_TOL = 1e-10
# relative eigenvalue gap below which A1-eigenvalues are treated as one cluster
DEGENERACY_REL_TOL = 1e-8


def _opnorm(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def require_hermitian(a, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate and return a square Hermitian matrix as a complex ndarray."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    dev = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if dev > tol:
        raise DimensionMismatch(
            f"matrix is not Hermitian: max |A - A*| = {dev:.3e} > {tol:.0e}"
        )
    return a


def commutator_norm(a1, a2) -> float:
    """Largest singular value of A1 A2 - A2 A1."""
    a1 = np.asarray(a1, dtype=complex)
    a2 = np.asarray(a2, dtype=complex)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise DimensionMismatch(
            f"commutator needs equal square shapes, got {a1.shape} and {a2.shape}"
        )
    return _opnorm(a1 @ a2 - a2 @ a1)


def _default_comm_tol(a1: np.ndarray, a2: np.ndarray) -> float:
    n = a1.shape[0]
    return 1e-12 * n * max(1.0, _opnorm(a1) * _opnorm(a2))


@dataclass(frozen=True)
class CommutingPair:
    """Two same-size Hermitian matrices whose commutator is below commTol."""

    A1: np.ndarray
    A2: np.ndarray
    comm_tol: float | None = None

    def __post_init__(self):
        a1 = require_hermitian(self.A1)
        a2 = require_hermitian(self.A2)
        if a1.shape != a2.shape:
            raise DimensionMismatch(
                f"pair members differ in shape: {a1.shape} vs {a2.shape}"
            )
        tol = self.comm_tol
        if tol is None:
            tol = _default_comm_tol(a1, a2)
        if tol < 0:
            raise NonCommuting(f"comm_tol must be nonnegative, got {tol}")
        cn = commutator_norm(a1, a2)
        if cn > tol:
            raise NonCommuting(f"commutator norm {cn:.3e} exceeds tolerance {tol:.3e}")
        a1.flags.writeable = False
        a2.flags.writeable = False
        object.__setattr__(self, "A1", a1)
        object.__setattr__(self, "A2", a2)
        object.__setattr__(self, "comm_tol", float(tol))

    @property
    def dim(self) -> int:
        return self.A1.shape[0]


@dataclass(frozen=True)
class JointSpectrum:
    """Unitary eigenbasis and paired eigenvalues of a commuting pair.

    Column i of ``basis`` is a joint eigenvector with eigenvalue pair
    ``pairs[i] = (x1_i, x2_i)``.  Pairs are sorted lexicographically
    (rounded to 1e-9) so reports are deterministic.
    """

    basis: np.ndarray
    pairs: np.ndarray
    recon_residual: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.basis, dtype=complex)
        p = np.asarray(self.pairs, dtype=float)
        n = u.shape[0]
        if u.shape != (n, n) or p.shape != (n, 2):
            raise DimensionMismatch(
                f"basis {u.shape} and pairs {p.shape} are inconsistent"
            )
        dev = _opnorm(u.conj().T @ u - np.eye(n))
        if dev > UNITARITY_TOL:
            raise DegenerateResolutionFailure(
                f"basis is not unitary: ||U*U - I|| = {dev:.3e}"
            )
        u.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "basis", u)
        object.__setattr__(self, "pairs", p)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def x1(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def x2(self) -> np.ndarray:
        return self.pairs[:, 1]

    def matrix(self, j: int) -> np.ndarray:
        """Reconstruct A_j = U diag(x_j) U* for j in {1, 2}."""
        return (self.basis * self.pairs[:, j - 1]) @ self.basis.conj().T


def _lex_sorted(u: np.ndarray, x1: np.ndarray, x2: np.ndarray):
    key1 = np.round(x1, 9)
    key2 = np.round(x2, 9)
    perm = np.lexsort((key2, key1))
    return u[:, perm], x1[perm], x2[perm]


def _residual(u: np.ndarray, x1, x2, a1, a2) -> float:
    r1 = _opnorm((u * x1) @ u.conj().T - a1)
    r2 = _opnorm((u * x2) @ u.conj().T - a2)
    return max(r1, r2)


def _rayleigh(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ik,kj->j", u.conj(), a, u).real


def _gamma_candidates(a1: np.ndarray, a2: np.ndarray, count: int = 3):
    # deterministic in the input: hash the exact matrix bytes
    h = hashlib.blake2b(digest_size=8)
    h.update(np.ascontiguousarray(a1).tobytes())
    h.update(np.ascontiguousarray(a2).tobytes())
    rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
    return rng.uniform(0.5, 1.5, size=count)


def _two_stage(a1: np.ndarray, a2: np.ndarray):
    """Diagonalize A1, then A2 restricted to each A1 eigen-cluster."""
    lam, v = np.linalg.eigh(a1)
    thr = DEGENERACY_REL_TOL * _opnorm(a1)
    n = len(lam)
    u = np.empty_like(v)
    start = 0
    for stop in range(1, n + 1):
        if stop < n and lam[stop] - lam[stop - 1] <= thr:
            continue
        w = v[:, start:stop]
        c = w.conj().T @ a2 @ w
        _, s = np.linalg.eigh((c + c.conj().T) / 2.0)
        u[:, start:stop] = w @ s
        start = stop
    return u


def joint_diagonalize(pair: CommutingPair, tol: float | None = None) -> JointSpectrum:
    """Simultaneously diagonalize a commuting Hermitian pair.

    Strategy: diagonalize A1 + gamma*A2 for a deterministic pseudo-random
    gamma (seeded from the input bytes), which splits generic degeneracies;
    if the reconstruction residual misses ``tol``, fall back to clustering
    the A1 eigenspaces and diagonalizing A2 inside each cluster.

    Raises DegenerateResolutionFailure when neither strategy reaches ``tol``.
    """
    a1, a2 = pair.A1, pair.A2
    if tol is None:
        tol = 1e-10 * max(1.0, _opnorm(a1), _opnorm(a2))

    best = None
    for gamma in _gamma_candidates(a1, a2):
        _, u = np.linalg.eigh(a1 + gamma * a2)
        x1 = _rayleigh(u, a1)
        x2 = _rayleigh(u, a2)
        res = _residual(u, x1, x2, a1, a2)
        if best is None or res < best[0]:
            best = (res, u, x1, x2)
        if res <= tol:
            break

    if best[0] > tol:
        u = _two_stage(a1, a2)
        x1 = _rayleigh(u, a1)
        x2 = _rayleigh(u, a2)
        res = _residual(u, x1, x2, a1, a2)
        if res < best[0]:
            best = (res, u, x1, x2)

    res, u, x1, x2 = best
    if res > tol:
        raise DegenerateResolutionFailure(
            f"joint diagonalization residual {res:.3e} exceeds tol {tol:.3e}"
        )
    u, x1, x2 = _lex_sorted(u, x1, x2)
    return JointSpectrum(basis=u, pairs=np.column_stack([x1, x2]), recon_residual=res)


def _eval_on_spectrum(f, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f.eval(x1, x2), dtype=complex)
        vals = np.broadcast_to(vals, x1.shape).copy()
    except Exception as exc:  # scalar-only callables fall back to a loop
        try:
            vals = np.array(
                [complex(f.eval(float(s), float(t))) for s, t in zip(x1, x2)]
            )
        except Exception:
            raise EvaluationFailure(f"cannot evaluate {f.label!r} on spectrum: {exc}")
    if not np.all(np.isfinite(vals)):
        raise EvaluationFailure(f"{f.label!r} is not finite at a spectral point")
    return vals


def functional_calculus(spec: JointSpectrum, f) -> np.ndarray:
    """Return f(A1, A2) = U diag(f(x1_i, x2_i)) U*.

    Identical spectral values short-circuit to value * I, which is the
    exact result and keeps constant functions free of U U* rounding.
    """
    vals = _eval_on_spectrum(f, spec.x1, spec.x2)
    if vals.size and np.all(vals == vals[0]):
        return vals[0] * np.eye(spec.dim, dtype=complex)
    return (spec.basis * vals) @ spec.basis.conj().T


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix.

    Uses the positive-diagonal-R convention so the distribution is exactly
    Haar and the output is deterministic in the generator state.
    """
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    phases = d / np.abs(d)
    return q * phases


def random_commuting_pair(
    n: int,
    seed: int,
    range1: tuple[float, float] = (0.0, 1.0),
    range2: tuple[float, float] = (0.0, 1.0),
) -> CommutingPair:
    """Random commuting pair A_j = U diag(lambda_j) U* with Haar U.

    Deterministic in ``seed``; eigenvalues are uniform in the given ranges.
    The construction commutes exactly up to rounding (commutator norm
    below 1e-12 * n for order-one spectra).
    """
    if n < 1:
        raise DimensionMismatch(f"dimension must be >= 1, got {n}")
    lo1, hi1 = map(float, range1)
    lo2, hi2 = map(float, range2)
    if not (hi1 >= lo1 and hi2 >= lo2):
        raise DimensionMismatch("eigenvalue ranges must be nonempty intervals")
    rng = np.random.default_rng(seed)
    u = haar_unitary(n, rng)
    lam1 = rng.uniform(lo1, hi1, size=n)
    lam2 = rng.uniform(lo2, hi2, size=n)
    a1 = (u * lam1) @ u.conj().T
    a2 = (u * lam2) @ u.conj().T
    a1 = (a1 + a1.conj().T) / 2.0
    a2 = (a2 + a2.conj().T) / 2.0
    return CommutingPair(a1, a2, comm_tol=_default_comm_tol(a1, a2))
