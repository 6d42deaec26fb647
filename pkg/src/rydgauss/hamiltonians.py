"""Sparse Hamiltonians, observables and density-wave states.

Spin convention: ``|1>`` is the Rydberg (excited) state, ``n = |1><1|`` and
``sigma^z = 2 n - 1``. Raising/lowering follow ``sigma^pm = (sigma^x -/+ i
sigma^y) / 2`` evaluated in that basis, so ``sigma^+ = |0><1|`` and
``sigma^- = |1><0|``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .hilbert import (
    OBC,
    PBC,
    ConstrainedBasis,
    MomentumSector,
    Space,
    embed_sector_vector,
    full_basis,
    project_to_sector,
    unconstrained_basis,
)

UV_PXP = "UV_PXP"
PPXPP_EFF = "PPXPP_EFF"
LONGRANGE = "LONGRANGE"
VARIANTS = (UV_PXP, PPXPP_EFF, LONGRANGE)

MAX_LONGRANGE_SITES = 14
DEFAULT_IMPURITY_SITE = 4
DISORDER_WIDTH = 0.02


class ModelError(ValueError):
    """Model parameters incompatible with the requested construction."""


class BasisMismatchError(ValueError):
    """Operands live on different bases or sectors."""


@dataclass
class ModelSpec:
    variant: str = UV_PXP
    omega: float = 1.0
    u: float = 0.0
    v: float = 0.0
    boundary: str = PBC
    impurities: list = field(default_factory=list)
    offsets: list | None = None
    seed: int | None = None

    def __post_init__(self):
        self.variant = self.variant.upper()
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}")
        self.boundary = self.boundary.upper()
        self.impurities = [(int(s), float(e)) for s, e in self.impurities]
        if self.offsets is not None:
            self.offsets = [float(d) for d in self.offsets]

    @classmethod
    def uv(cls, u, v, omega=1.0, boundary=PBC, impurities=()):
        return cls(UV_PXP, omega, u, v, boundary, list(impurities))

    @classmethod
    def effective(cls, u, omega=1.0, boundary=PBC):
        return cls(PPXPP_EFF, omega, u, 0.0, boundary)

    @classmethod
    def longrange(cls, omega, u, v=1.0, offsets=None, seed=None, boundary=OBC):
        return cls(LONGRANGE, omega, u, v, boundary, [], offsets, seed)

    def replace(self, **changes) -> "ModelSpec":
        d = self.to_dict()
        d.update(changes)
        return ModelSpec.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["impurities"] = [list(p) for p in self.impurities]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        d = dict(d)
        variant = str(d.get("variant", UV_PXP)).upper()
        defaults = {"v": 1.0, "boundary": OBC} if variant == LONGRANGE else {}
        kwargs = {k: d[k] for k in ("omega", "u", "v", "boundary", "impurities", "offsets", "seed") if k in d}
        return cls(variant=variant, **{**defaults, **kwargs})

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


@dataclass(eq=False)
class SparseOperator:
    """Real sparse matrix acting on a tagged basis or sector."""

    matrix: sp.csr_matrix
    space: Space

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            check_same_space(self.space, other.space)
            return StateVector(self.matrix @ other.amplitudes, self.space)
        return self.matrix @ other

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        check_same_space(self.space, other.space)
        return SparseOperator((self.matrix + other.matrix).tocsr(), self.space)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        check_same_space(self.space, other.space)
        return SparseOperator((self.matrix - other.matrix).tocsr(), self.space)

    def __mul__(self, scalar: float) -> "SparseOperator":
        return SparseOperator((self.matrix * scalar).tocsr(), self.space)

    __rmul__ = __mul__

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def expectation(self, psi) -> complex:
        amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
        if isinstance(psi, StateVector):
            check_same_space(self.space, psi.space)
        return np.vdot(amps, self.matrix @ amps)


@dataclass(eq=False)
class StateVector:
    amplitudes: np.ndarray
    space: Space

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        return StateVector(self.amplitudes / n, self.space) if n > 0 else self

    def overlap(self, other: "StateVector") -> complex:
        check_same_space(self.space, other.space)
        return np.vdot(self.amplitudes, other.amplitudes)

    def full(self) -> np.ndarray:
        """Amplitudes on the full constrained basis (embedding sector states)."""
        if isinstance(self.space, MomentumSector):
            return embed_sector_vector(self.amplitudes, self.space)
        return np.asarray(self.amplitudes)

    @property
    def basis(self) -> ConstrainedBasis:
        return full_basis(self.space)


def check_same_space(a: Space, b: Space) -> None:
    if a is not b and a.tag != b.tag:
        raise BasisMismatchError(f"operands act on different spaces: {a.tag} vs {b.tag}")


def _occupations(states: np.ndarray, N: int) -> np.ndarray:
    shifts = np.arange(N, dtype=np.uint64)
    return ((states[:, None] >> shifts) & np.uint64(1)).astype(np.int8)


def _bit(states, site0: int) -> np.ndarray:
    return (states >> np.uint64(site0)) & np.uint64(1)


def _neighbour(site0: int, d: int, N: int, boundary: str):
    j = site0 + d
    if boundary == PBC:
        return j % N
    return j if 0 <= j < N else None


def _nnn_count(occ: np.ndarray, N: int, boundary: str) -> np.ndarray:
    """Number of (i, i+2) excited pairs, summed literally over i."""
    if boundary == PBC:
        return (occ * np.roll(occ, -2, axis=1)).sum(axis=1)
    if N < 3:
        return np.zeros(occ.shape[0], dtype=np.int64)
    return (occ[:, :-2] * occ[:, 2:]).sum(axis=1)


def _impurity_diag(occ: np.ndarray, impurities, N: int) -> np.ndarray:
    diag = np.zeros(occ.shape[0])
    for site, eps in impurities:
        if not 1 <= site <= N:
            raise ModelError(f"impurity site {site} outside 1..{N}")
        diag += eps * occ[:, site - 1]
    return diag


def _flip_entries(basis: ConstrainedBasis, amplitude: float, extra_clear: int = 0):
    """Off-diagonal entries for single flips that stay inside the basis.

    ``extra_clear = 2`` additionally requires next-nearest neighbours on both
    sides to be empty (PPXPP). Sites beyond an open edge count as empty.
    """
    N, states = basis.N, basis.states
    rows, cols = [], []
    for b in range(N):
        targets = states ^ (np.uint64(1) << np.uint64(b))
        idx = basis.index(targets)
        ok = idx >= 0
        for d in range(2, extra_clear + 1):
            for sgn in (-1, 1):
                j = _neighbour(b, sgn * d, N, basis.boundary)
                if j is not None and j != b:
                    ok &= _bit(states, j) == 0
        src = np.nonzero(ok)[0]
        rows.append(src)
        cols.append(idx[src])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return rows, cols, np.full(len(rows), amplitude, dtype=float)


def _assemble(basis, diag, rows, cols, vals) -> sp.csr_matrix:
    dim = basis.dim
    r = np.concatenate([np.arange(dim), rows])
    c = np.concatenate([np.arange(dim), cols])
    v = np.concatenate([diag, vals])
    m = sp.csr_matrix((v, (r, c)), shape=(dim, dim))
    m.eliminate_zeros()
    return m


def _restrict(matrix: sp.csr_matrix, space: Space) -> sp.csr_matrix:
    if isinstance(space, MomentumSector):
        P = space.embedding
        return (P.T @ matrix @ P).tocsr()
    return matrix


def _check_space(spec: ModelSpec, space: Space) -> ConstrainedBasis:
    basis = full_basis(space)
    if basis.boundary != spec.boundary:
        raise ModelError(f"spec boundary {spec.boundary} does not match basis {basis.boundary}")
    if not basis.constrained:
        raise ModelError("constrained models need a blockade basis")
    if isinstance(space, MomentumSector) and spec.impurities:
        raise ModelError("impurities break translation symmetry; use the full basis")
    return basis


def build_uv_hamiltonian(spec: ModelSpec, space: Space) -> SparseOperator:
    """UV-PXP Hamiltonian ``sum_i -Omega P X P + U n_i + V n_i n_{i+2}``."""
    if spec.variant != UV_PXP:
        raise ModelError(f"expected {UV_PXP}, got {spec.variant}")
    basis = _check_space(spec, space)
    occ = _occupations(basis.states, basis.N)
    diag = (
        spec.u * occ.sum(axis=1)
        + spec.v * _nnn_count(occ, basis.N, basis.boundary)
        + _impurity_diag(occ, spec.impurities, basis.N)
    )
    rows, cols, vals = _flip_entries(basis, -spec.omega)
    return SparseOperator(_restrict(_assemble(basis, diag, rows, cols, vals), space), space)


def build_effective_hamiltonian(spec: ModelSpec, space: Space) -> SparseOperator:
    """Rotating-frame PPXPP Hamiltonian ``-sum_i [PPXPP + |U| n_i]``."""
    if spec.variant != PPXPP_EFF:
        raise ModelError(f"expected {PPXPP_EFF}, got {spec.variant}")
    basis = _check_space(spec, space)
    occ = _occupations(basis.states, basis.N)
    diag = -abs(spec.u) * occ.sum(axis=1) + _impurity_diag(occ, spec.impurities, basis.N)
    rows, cols, vals = _flip_entries(basis, -spec.omega, extra_clear=2)
    return SparseOperator(_restrict(_assemble(basis, diag, rows, cols, vals), space), space)


def pair_couplings(N: int, offsets=None, boundary: str = OBC) -> np.ndarray:
    """``1/r_ij^6`` for positions ``r_i = i + delta_i``.

    ``OBC`` uses the straight-line separation. ``PBC`` places the atoms on a
    ring of circumference ``N`` and uses the minimum-image separation.
    """
    pos = np.arange(N, dtype=float)
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (N,):
            raise ModelError(f"need {N} position offsets, got {offsets.shape}")
        pos = pos + offsets
    dist = np.abs(pos[:, None] - pos[None, :])
    if boundary.upper() == PBC:
        dist = np.minimum(dist, N - dist)
    np.fill_diagonal(dist, np.inf)
    return dist**-6.0


def build_longrange_hamiltonian(spec: ModelSpec, N: int) -> SparseOperator:
    """Van der Waals chain ``-(Omega/2) sum X - U sum n + V sum n n / r^6``.

    Acts on the unrestricted 2^N space; ``spec.boundary`` selects open-chain
    or ring distances.
    """
    if spec.variant != LONGRANGE:
        raise ModelError(f"expected {LONGRANGE}, got {spec.variant}")
    if N > MAX_LONGRANGE_SITES:
        raise ModelError(f"long-range model limited to N <= {MAX_LONGRANGE_SITES}")
    basis = unconstrained_basis(N, spec.boundary)
    occ = _occupations(basis.states, N).astype(float)
    J = pair_couplings(N, spec.offsets, spec.boundary)
    inter = 0.5 * np.einsum("ki,ij,kj->k", occ, J, occ)
    diag = -spec.u * occ.sum(axis=1) + spec.v * inter + _impurity_diag(occ, spec.impurities, N)
    rows, cols, vals = _flip_entries(basis, -0.5 * spec.omega)
    return SparseOperator(_assemble(basis, diag, rows, cols, vals), basis)


def build_hamiltonian(spec: ModelSpec, space: Space) -> SparseOperator:
    """Dispatch on ``spec.variant``."""
    if spec.variant == UV_PXP:
        return build_uv_hamiltonian(spec, space)
    if spec.variant == PPXPP_EFF:
        return build_effective_hamiltonian(spec, space)
    return build_longrange_hamiltonian(spec, full_basis(space).N)


def sample_offsets(N: int, rng: np.random.Generator, width: float = DISORDER_WIDTH) -> list:
    """Independent uniform position errors in ``[-width, width]``, one per site."""
    return rng.uniform(-width, width, size=N).tolist()


def density_wave_configs(N: int, period: int) -> list[int]:
    if N % period:
        raise ModelError(f"N={N} is not divisible by {period}")
    base = sum(1 << j for j in range(0, N, period))
    return [base << s for s in range(period)]


def product_state(configs: Sequence[int], space: Space) -> StateVector:
    """Equal-weight superposition of the given configurations."""
    basis = full_basis(space)
    idx = basis.index(np.asarray(configs, dtype=np.uint64))
    if np.any(idx < 0):
        raise ModelError("configuration not in basis")
    amps = np.zeros(basis.dim, dtype=complex)
    amps[idx] = 1.0 / np.sqrt(len(configs))
    if isinstance(space, MomentumSector):
        amps = project_to_sector(amps, space)
        amps = amps / np.linalg.norm(amps)
    return StateVector(amps, space)


def z2_state(N: int, space: Space) -> StateVector:
    return product_state(density_wave_configs(N, 2), space)


def z3_state(N: int, space: Space) -> StateVector:
    return product_state(density_wave_configs(N, 3), space)


_PAULI_ACTIONS = {"x", "y", "z", "+", "-", "n", "p"}


def pauli_string_operator(ops: Mapping[int, str], space: Space) -> SparseOperator:
    """Product of single-site operators, projected onto ``space``.

    ``ops`` maps 1-based sites to one of ``x y z + - n p`` (``p`` is the
    ground-state projector ``1 - n``). The result may be complex (``y``).
    """
    basis = full_basis(space)
    N = basis.N
    states = basis.states
    target = states.copy()
    amp = np.ones(len(states), dtype=complex)
    for site, op in ops.items():
        if not 1 <= site <= N:
            raise ValueError(f"site {site} outside 1..{N}")
        if op not in _PAULI_ACTIONS:
            raise ValueError(f"unknown single-site operator {op!r}")
        bit = np.uint64(1) << np.uint64(site - 1)
        occ = ((target & bit) != 0).astype(float)
        if op == "z":
            amp *= 2 * occ - 1
        elif op == "n":
            amp *= occ
        elif op == "p":
            amp *= 1 - occ
        elif op == "x":
            target = target ^ bit
        elif op == "y":
            # sigma^y |0> = -i |1>,  sigma^y |1> = +i |0>
            amp *= np.where(occ == 1, 1j, -1j)
            target = target ^ bit
        elif op == "+":
            amp *= occ
            target = target ^ bit
        elif op == "-":
            amp *= 1 - occ
            target = target ^ bit
    idx = basis.index(target)
    keep = (idx >= 0) & (amp != 0)
    cols = np.nonzero(keep)[0]
    vals = amp[keep]
    if np.all(vals.imag == 0):
        vals = vals.real
    m = sp.csr_matrix((vals, (idx[keep], cols)), shape=(basis.dim, basis.dim))
    return SparseOperator(_restrict(m, space), space)


def observable(kind: str, space: Space, site: int | None = None,
               ops: Mapping[int, str] | None = None) -> SparseOperator:
    """Named observables: ``n``, ``nn_pair`` (H^nn), ``zz`` and ``pauli``.

    ``zz`` is sigma^z_i sigma^z_{i+1} with the site after N wrapping to 1 on
    a ring.
    """
    basis = full_basis(space)
    N = basis.N
    if kind == "n":
        return pauli_string_operator({_site(site, N): "n"}, space)
    if kind == "nn_pair":
        occ = _occupations(basis.states, N)
        diag = _nnn_count(occ, N, basis.boundary).astype(float)
        return SparseOperator(_restrict(sp.diags(diag).tocsr(), space), space)
    if kind == "zz":
        i = _site(site, N)
        j = i + 1
        if j > N:
            if basis.boundary != PBC:
                raise ValueError(f"site {i} has no right neighbour on an open chain")
            j = 1
        return pauli_string_operator({i: "z", j: "z"}, space)
    if kind == "pauli":
        if not ops:
            raise ValueError("pauli observable needs an operator map")
        return pauli_string_operator(ops, space)
    raise ValueError(f"unknown observable kind {kind!r}")


def _site(site, N):
    if site is None or not 1 <= site <= N:
        raise ValueError(f"site {site} outside 1..{N}")
    return int(site)
