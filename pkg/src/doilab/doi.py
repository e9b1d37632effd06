"""Double operator integrals over finite atomic joint spectra.

With joint spectral decompositions B_j = V diag(y_j) V* and
A_j = U diag(x_j) U*, the double operator integral of a symbol Phi
against Q is V (M o (V* Q U)) U*, where o is the entrywise product and
M[j, i] = Phi(x_i, y_j) samples the symbol on the product spectrum.
The first symbol argument always ranges over the A-side (right) points
and the second over the B-side (left) points.
"""

from __future__ import annotations

import numpy as np

from .errors import DoilabError, ShapeMismatch, SymbolEvaluationFailure
from .spectral import JointSpectrum, functional_calculus

__all__ = [
    "doi_evaluate",
    "doi_via_factorization",
    "hs_inequality_slack",
    "sample_on_spectra",
]


def sample_on_spectra(phi, specA: JointSpectrum, specB: JointSpectrum) -> np.ndarray:
    """Symbol matrix M[j, i] = Phi(x_i, y_j) on the product spectrum.

    Rows follow the B spectrum, columns the A spectrum.  Raises
    SymbolEvaluationFailure when the symbol errors out or returns a
    non-finite value at any point pair.
    """
    try:
        m = phi.sample(specA.pairs, specB.pairs)
    except DoilabError:
        raise
    except Exception as exc:
        raise SymbolEvaluationFailure(
            f"symbol {getattr(phi, 'label', phi)!r} failed on product spectrum: {exc}"
        )
    m = np.asarray(m, dtype=complex)
    if m.shape != (specB.dim, specA.dim):
        raise SymbolEvaluationFailure(
            f"symbol sample has shape {m.shape}, expected {(specB.dim, specA.dim)}"
        )
    if not np.all(np.isfinite(m)):
        raise SymbolEvaluationFailure(
            f"symbol {getattr(phi, 'label', phi)!r} is not finite on the product spectrum"
        )
    return m


def _check_q(Q, specB, specA) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    if Q.shape != (specB.dim, specA.dim):
        raise ShapeMismatch(
            f"Q has shape {Q.shape}, expected {(specB.dim, specA.dim)}"
        )
    return Q


def doi_evaluate(specB: JointSpectrum, specA: JointSpectrum, phi, Q) -> np.ndarray:
    """Evaluate the double operator integral of phi against Q.

    Equals sum_{j,i} Phi(x_i, y_j) (v_j* Q u_i) v_j u_i*, which is the
    entrywise product of the sampled symbol with Q expressed in the mixed
    eigenbases.  Linear in Q; the constant symbol 1 returns Q exactly.
    """
    Q = _check_q(Q, specB, specA)
    m = sample_on_spectra(phi, specA, specB)
    qhat = specB.basis.conj().T @ Q @ specA.basis
    return specB.basis @ (m * qhat) @ specA.basis.conj().T


def doi_via_factorization(specB, specA, factors, Q) -> np.ndarray:
    """Evaluate sum_n psi_n(B1, B2) Q phi_n(A1, A2) for a finite factor list.

    Each factor is a (phi_n, psi_n) pair of two-variable functions; phi_n
    acts through the A-side functional calculus and psi_n through the
    B-side.  Equals doi_evaluate of the assembled symbol
    Phi(x, y) = sum_n phi_n(x) psi_n(y).  An empty list gives the zero
    matrix.
    """
    Q = _check_q(Q, specB, specA)
    out = np.zeros_like(Q)
    for phi_n, psi_n in factors:
        left = functional_calculus(specB, psi_n)
        right = functional_calculus(specA, phi_n)
        out += left @ Q @ right
    return out


def hs_inequality_slack(specB, specA, phi, Q) -> float:
    """Slack in the Hilbert-Schmidt bound for the double operator integral.

    Returns sup|Phi| * ||Q||_F - ||doi_evaluate(...)||_F, where the sup
    runs over the finite product spectrum.  Nonnegative up to rounding:
    the entrywise product cannot increase Frobenius mass by more than the
    largest symbol value.
    """
    Q = _check_q(Q, specB, specA)
    m = sample_on_spectra(phi, specA, specB)
    sup = float(np.max(np.abs(m))) if m.size else 0.0
    r = specB.basis @ (m * (specB.basis.conj().T @ Q @ specA.basis)) @ specA.basis.conj().T
    return sup * float(np.linalg.norm(Q, "fro")) - float(np.linalg.norm(r, "fro"))
