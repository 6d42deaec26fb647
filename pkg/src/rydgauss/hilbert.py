"""Rydberg-blockade constrained Hilbert spaces.

Configurations are stored as unsigned integer bitmasks with site 1 in the
least significant bit, so ``n_i = (state >> (i - 1)) & 1``. Every operator
builder in the package relies on this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as sp

MAX_SITES = 32
MAX_FULL_SITES = 20

PBC = "PBC"
OBC = "OBC"


class BasisSizeError(ValueError):
    """Requested system size is outside the supported range."""


class SymmetryError(ValueError):
    """Symmetry sector requested for a basis that does not support it."""


def _check_boundary(boundary: str) -> str:
    b = boundary.upper()
    if b not in (PBC, OBC):
        raise ValueError(f"boundary must be PBC or OBC, got {boundary!r}")
    return b


@dataclass(eq=False, frozen=True)
class ConstrainedBasis:
    """Sorted list of allowed configurations of an ``N``-site chain.

    ``constrained=False`` marks the unrestricted 2^N space used by the
    long-range model; the same lookup machinery applies.
    """

    N: int
    boundary: str
    states: np.ndarray
    constrained: bool = True

    def __post_init__(self):
        self.states.setflags(write=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def tag(self) -> tuple:
        kind = "constrained" if self.constrained else "full"
        return (kind, self.N, self.boundary)

    def index(self, configs) -> np.ndarray:
        """Positions of ``configs`` in the basis; ``-1`` where absent."""
        configs = np.asarray(configs, dtype=np.uint64)
        pos = np.searchsorted(self.states, configs)
        pos = np.minimum(pos, len(self.states) - 1)
        found = self.states[pos] == configs
        return np.where(found, pos, -1)

    def __contains__(self, config) -> bool:
        return bool(self.index([config])[0] >= 0)

    def format_state(self, config: int) -> str:
        """Binary string, most significant bit (site N) first."""
        return format(int(config), f"0{self.N}b")


@dataclass(eq=False, frozen=True)
class MomentumSector:
    """Translation-invariant (k = 0) sector of a periodic constrained basis."""

    basis: ConstrainedBasis
    k: int
    representatives: np.ndarray
    orbit_sizes: np.ndarray
    # per basis state: index of its representative
    rep_index: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.basis.N

    @property
    def boundary(self) -> str:
        return self.basis.boundary

    @property
    def dim(self) -> int:
        return len(self.representatives)

    def __len__(self) -> int:
        return self.dim

    @property
    def normalization(self) -> np.ndarray:
        """Amplitude carried by each orbit member of a unit sector vector."""
        return 1.0 / np.sqrt(self.orbit_sizes)

    @property
    def tag(self) -> tuple:
        return ("k", self.k) + self.basis.tag

    @cached_property
    def embedding(self) -> sp.csr_matrix:
        """Isometry from sector coordinates to the full constrained basis."""
        rows = np.arange(self.basis.dim)
        vals = self.normalization[self.rep_index]
        return sp.csr_matrix(
            (vals, (rows, self.rep_index)), shape=(self.basis.dim, self.dim)
        )


Space = Union[ConstrainedBasis, MomentumSector]


def full_basis(space: Space) -> ConstrainedBasis:
    return space.basis if isinstance(space, MomentumSector) else space


def _obc_states(N: int) -> np.ndarray:
    # S(n) = S(n-1) ∪ {s | 2^(n-1) : s in S(n-2)}; both halves already sorted
    prev2 = np.array([0], dtype=np.uint64)
    prev1 = np.array([0, 1], dtype=np.uint64)
    if N == 1:
        return prev1
    for n in range(2, N + 1):
        top = np.uint64(1) << np.uint64(n - 1)
        cur = np.concatenate([prev1, prev2 | top])
        prev2, prev1 = prev1, cur
    return prev1


def enumerate_basis(N: int, boundary: str = PBC) -> ConstrainedBasis:
    """All blockade-satisfying configurations of an ``N``-site chain, sorted.

    For periodic chains the pair (site N, site 1) is also blockaded, except
    for ``N = 1`` where a site cannot be its own neighbour.
    """
    boundary = _check_boundary(boundary)
    if not 1 <= N <= MAX_SITES:
        raise BasisSizeError(f"N must lie in [1, {MAX_SITES}], got {N}")
    states = _obc_states(N)
    if boundary == PBC and N > 1:
        last = np.uint64(1) << np.uint64(N - 1)
        wrap = ((states & np.uint64(1)) != 0) & ((states & last) != 0)
        states = states[~wrap]
    return ConstrainedBasis(N, boundary, np.ascontiguousarray(states))


def unconstrained_basis(N: int, boundary: str = OBC) -> ConstrainedBasis:
    """The full 2^N product basis (no blockade)."""
    boundary = _check_boundary(boundary)
    if not 1 <= N <= MAX_FULL_SITES:
        raise BasisSizeError(f"full space limited to N <= {MAX_FULL_SITES}, got {N}")
    states = np.arange(2**N, dtype=np.uint64)
    return ConstrainedBasis(N, boundary, states, constrained=False)


def translate(states, N: int, shift: int = 1) -> np.ndarray:
    """Cyclically move every excitation from site i to site i + shift."""
    states = np.asarray(states, dtype=np.uint64)
    shift %= N
    if shift == 0:
        return states.copy()
    mask = np.uint64((1 << N) - 1)
    s, r = np.uint64(shift), np.uint64(N - shift)
    return ((states << s) | (states >> r)) & mask


def build_momentum_sector(basis: ConstrainedBasis, k: int = 0) -> MomentumSector:
    """Group the periodic basis into translation orbits (k = 0 only)."""
    if basis.boundary != PBC:
        raise SymmetryError("momentum sectors require periodic boundary conditions")
    if k != 0:
        raise SymmetryError(f"only the k = 0 sector is implemented, got k={k}")
    N = basis.N
    states = basis.states
    rep = states.copy()
    period = np.full(len(states), N, dtype=np.int64)
    rolled = states
    for j in range(1, N):
        rolled = translate(rolled, N, 1)
        rep = np.minimum(rep, rolled)
        hit = (rolled == states) & (period == N)
        period[hit] = j
    reps, first, rep_index = np.unique(rep, return_index=True, return_inverse=True)
    return MomentumSector(
        basis=basis,
        k=0,
        representatives=reps,
        orbit_sizes=period[first],
        rep_index=rep_index.ravel(),
    )


def embed_sector_vector(vec, sector: MomentumSector) -> np.ndarray:
    """Expand k = 0 sector amplitudes onto the full constrained basis."""
    vec = np.asarray(vec)
    if vec.shape[0] != sector.dim:
        raise ValueError(
            f"sector vector has length {vec.shape[0]}, sector dimension is {sector.dim}"
        )
    return sector.embedding @ vec


def project_to_sector(vec, sector: MomentumSector) -> np.ndarray:
    """Inverse of :func:`embed_sector_vector` for translation-invariant vectors."""
    vec = np.asarray(vec)
    if vec.shape[0] != sector.basis.dim:
        raise ValueError(
            f"vector has length {vec.shape[0]}, basis dimension is {sector.basis.dim}"
        )
    return sector.embedding.T @ vec
