"""Small dense complex linear algebra with the conventions used everywhere else.

States are plain numpy arrays: a pure state is a 1-d complex vector with
unit norm, a density matrix is a Hermitian trace-one square matrix. The
validators here are the single point where those conventions are enforced;
the rest of the package assumes validated inputs and never re-checks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonHermitianInput

# Validation tolerances. Norm and trace are monitored (inputs this far off
# are bugs, not roundoff); the eigenvalue floor is soft because physically
# valid matrices acquire O(integration error) negative parts.
NORM_TOL = 1e-9
HERM_TOL = 1e-10
TRACE_TOL = 1e-8
EIG_FLOOR = -1e-6


class EigenSystem(NamedTuple):
    values: np.ndarray   # ascending, real
    vectors: np.ndarray  # columns, vectors[:, k] belongs to values[k]


def pure_state(vec) -> np.ndarray:
    """Validate and return a unit-norm complex state vector."""
    psi = np.asarray(vec, dtype=complex)
    if psi.ndim != 1:
        raise DimensionMismatch(f"pure state must be 1-d, got shape {psi.shape}")
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > NORM_TOL:
        raise ValueError(f"state norm {n!r} differs from 1 beyond {NORM_TOL}")
    return psi / n


def density_matrix(mat) -> np.ndarray:
    """Validate and return a Hermitian, trace-one density matrix.

    Hermiticity within HERM_TOL and unit trace within TRACE_TOL are hard
    requirements; small negative eigenvalues (>= EIG_FLOOR) are tolerated.
    """
    rho = np.asarray(mat, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"density matrix must be square, got shape {rho.shape}")
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > HERM_TOL:
        raise NonHermitianInput(f"Hermiticity violation {herm_err:.3e} > {HERM_TOL}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {tr!r} differs from 1 beyond {TRACE_TOL}")
    rho = 0.5 * (rho + rho.conj().T)
    low = float(np.min(np.linalg.eigvalsh(rho)))
    if low < EIG_FLOOR:
        raise ValueError(f"eigenvalue {low:.3e} below floor {EIG_FLOOR}")
    return rho


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def hermitian_eigen(h) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix, ascending eigenvalues.

    The eigenvector phase is fixed deterministically: the component of
    largest magnitude is made real and positive. Raises NonHermitianInput
    when the input fails the Hermiticity check relative to its scale.
    """
    H = np.asarray(h, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {H.shape}")
    scale = 1.0 + np.linalg.norm(H)
    herm_err = np.max(np.abs(H - H.conj().T))
    if herm_err > HERM_TOL * scale:
        raise NonHermitianInput(f"Hermiticity violation {herm_err:.3e} (scale {scale:.3e})")
    vals, vecs = np.linalg.eigh(H)
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        idx = int(np.argmax(np.abs(vecs[:, k])))
        pivot = vecs[idx, k]
        if abs(pivot) > 0.0:
            vecs[:, k] *= np.conj(pivot) / abs(pivot)
    return EigenSystem(values=vals, vectors=vecs)


def fidelity(state: np.ndarray, goal: np.ndarray) -> float:
    """Overlap of a state (pure vector or density matrix) with a pure goal.

    Returns |<goal|psi>|^2 for vectors and <goal|rho|goal> for matrices.
    """
    s = np.asarray(state, dtype=complex)
    g = np.asarray(goal, dtype=complex)
    if g.ndim != 1:
        raise DimensionMismatch("goal must be a pure state vector")
    if s.ndim == 1:
        if s.shape != g.shape:
            raise DimensionMismatch(f"state dim {s.shape[0]} vs goal dim {g.shape[0]}")
        return float(abs(np.vdot(g, s)) ** 2)
    if s.ndim == 2:
        if s.shape[0] != s.shape[1] or s.shape[0] != g.shape[0]:
            raise DimensionMismatch(f"state shape {s.shape} vs goal dim {g.shape[0]}")
        return float(np.real(np.vdot(g, s @ g)))
    raise DimensionMismatch(f"state must be vector or matrix, got ndim {s.ndim}")


def purity(rho: np.ndarray) -> float:
    """Tr rho^2 (1 for pure states, 1/dim for the maximally mixed state)."""
    r = np.asarray(rho, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {r.shape}")
    return float(np.real(np.trace(r @ r)))


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (dense)."""
    return scipy.linalg.expm(np.asarray(a, dtype=complex))
