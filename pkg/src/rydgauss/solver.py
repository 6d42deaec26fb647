"""Ground states, full spectra and eigenstate overlap profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .hamiltonians import SparseOperator, StateVector, check_same_space
from .hilbert import Space

DENSE_LIMIT = 6000
# below this size the dense path is also the fastest route to a ground state
DENSE_GROUND_STATE_LIMIT = 600


class ConvergenceError(RuntimeError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(eq=False)
class EigenDecomposition:
    energies: np.ndarray
    vectors: np.ndarray  # columns
    space: Space
    complete: bool = True

    def __len__(self) -> int:
        return len(self.energies)

    def state(self, j: int) -> StateVector:
        return StateVector(self.vectors[:, j], self.space)


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    """Rotate the phase so the largest-magnitude amplitude is real positive."""
    k = int(np.argmax(np.abs(vec)))
    a = vec[k]
    return vec * (abs(a) / a) if a != 0 else vec


def ground_state(H: SparseOperator, tol: float = 1e-12, maxiter: int | None = None):
    """Lowest eigenpair of ``H`` as ``(energy, StateVector)``."""
    dim = H.dim
    if dim <= DENSE_GROUND_STATE_LIMIT:
        w, v = la.eigh(H.toarray(), subset_by_index=(0, 0))
        vec = v[:, 0]
    else:
        rng = np.random.default_rng(0)
        v0 = rng.standard_normal(dim)
        try:
            w, v = spla.eigsh(H.matrix, k=1, which="SA", tol=tol, v0=v0,
                              maxiter=maxiter, ncv=min(dim, 40))
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues) == 0:
                raise ConvergenceError("Lanczos ground state did not converge") from exc
            w, v = exc.eigenvalues, exc.eigenvectors
            r = np.linalg.norm(H.matrix @ v[:, 0] - w[0] * v[:, 0])
            raise ConvergenceError(f"Lanczos ground state not converged, residual {r:.3e}") from exc
        vec = v[:, 0]
    vec = _fix_sign(vec.astype(complex))
    if np.allclose(vec.imag, 0):
        vec = vec.real.astype(complex)
    return float(w[0]), StateVector(vec, H.space)


def full_spectrum(H: SparseOperator) -> EigenDecomposition:
    """All eigenpairs by dense diagonalisation, ascending in energy."""
    if H.dim > DENSE_LIMIT:
        raise DimensionError(
            f"dimension {H.dim} exceeds dense limit {DENSE_LIMIT}; use ground_state instead"
        )
    mat = H.toarray()
    w, v = la.eigh(mat)
    return EigenDecomposition(w, v, H.space, complete=True)


@dataclass
class OverlapProfile:
    energies: np.ndarray
    weights: np.ndarray  # |<E_j|psi>|^2, same order as energies

    def ranked(self, count: int | None = None) -> np.ndarray:
        """Eigenstate indices in order of decreasing weight."""
        order = np.argsort(-self.weights, kind="stable")
        return order if count is None else order[:count]

    @property
    def dominant(self) -> int:
        return int(self.ranked(1)[0])

    def gaps(self, count: int = 3) -> np.ndarray:
        """``|E_1 - E_j|`` from the dominant state to the next ``count`` by weight."""
        order = self.ranked(count + 1)
        return np.abs(self.energies[order[0]] - self.energies[order[1:]])


def overlap_profile(psi: StateVector, eig: EigenDecomposition) -> OverlapProfile:
    check_same_space(psi.space, eig.space)
    amps = eig.vectors.conj().T @ psi.amplitudes
    return OverlapProfile(eig.energies.copy(), np.abs(amps) ** 2)
