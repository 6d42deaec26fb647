"""Unitary quench dynamics with a short-iterative Lanczos propagator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from numba import njit

from .gaussianity import default_triple, interaction_distance, reduced_density_matrix, wick_violation
from .hamiltonians import (LONGRANGE, ModelSpec, SparseOperator, StateVector, build_hamiltonian,
                           check_same_space, observable, z2_state, z3_state)
from .hilbert import (PBC, Space, build_momentum_sector, enumerate_basis, full_basis,
                      unconstrained_basis)
from .solver import ground_state

DEFAULT_TOL = 1e-12
KRYLOV_START = 40
KRYLOV_MAX = 160


class PropagationError(RuntimeError):
    pass


@njit(cache=True)
def _matvec(op, x, xr, xi, out):
    """``out = (diag + offdiag) x`` for a real operator and complex ``x``.

    Real and imaginary parts are gathered separately; when every
    off-diagonal element shares one value (true for all model Hamiltonians)
    the per-element multiply is skipped.
    """
    indptr, indices, data, diag, uniform = op
    n = len(indptr) - 1
    for i in range(n):
        xr[i] = x[i].real
        xi[i] = x[i].imag
    a = data[0] if len(data) else 0.0
    for i in range(n):
        ar = 0.0
        ai = 0.0
        if uniform:
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                ar += xr[j]
                ai += xi[j]
            ar *= a
            ai *= a
        else:
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                ar += data[k] * xr[j]
                ai += data[k] * xi[j]
        out[i] = (diag[i] * xr[i] + ar) + 1j * (diag[i] * xi[i] + ai)


def _split_operator(matrix):
    """Diagonal / off-diagonal split consumed by :func:`_matvec`."""
    matrix = sp.csr_matrix(matrix, dtype=float)
    diag = np.ascontiguousarray(matrix.diagonal())
    off = (matrix - sp.diags(diag)).tocsr()
    off.eliminate_zeros()
    off.sort_indices()
    uniform = bool(off.nnz == 0 or np.all(off.data == off.data[0]))
    return (off.indptr, off.indices, off.data, diag, uniform)


@njit(cache=True)
def _norm(w):
    acc = 0.0
    for x in w:
        acc += x.real * x.real + x.imag * x.imag
    return np.sqrt(acc)


@njit(cache=True)
def _orthogonalize(V, j, w, coef):
    """Classical Gram-Schmidt of ``w`` against rows ``0..j`` of ``V``."""
    n = w.shape[0]
    for i in range(j + 1):
        acc = 0j
        for k in range(n):
            acc += V[i, k].conjugate() * w[k]
        coef[i] = acc
    for i in range(j + 1):
        c = coef[i]
        for k in range(n):
            w[k] -= c * V[i, k]


@njit(cache=True)
def _lanczos_op(op, v0, m, full):
    """Lanczos basis, fully reorthogonalised when ``full`` else locally.

    Returns ``(V, alpha, beta, k)``: rows of ``V[:k]`` are orthonormal and
    ``beta[k - 1]`` couples the subspace to the rest of the space.
    """
    n = v0.shape[0]
    m = min(m, n)
    V = np.zeros((m, n), dtype=np.complex128)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    coef = np.zeros(m, dtype=np.complex128)
    w = np.empty(n, dtype=np.complex128)
    xr = np.empty(n)
    xi = np.empty(n)
    V[0] = v0
    k = m
    for j in range(m):
        _matvec(op, V[j], xr, xi, w)
        b0 = _norm(w)
        if full:
            _orthogonalize(V, j, w, coef)
        else:
            lo = max(j - 1, 0)
            _orthogonalize(V[lo:], j - lo, w, coef)
            coef[j] = coef[j - lo]
        alpha[j] = coef[j].real
        b = _norm(w)
        if b < 0.5 * b0:
            # "twice is enough"
            if full:
                _orthogonalize(V, j, w, coef)
            else:
                _orthogonalize(V[lo:], j - lo, w, coef)
            b = _norm(w)
        beta[j] = b
        if j + 1 < m:
            if b < 1e-13:
                k = j + 1
                break
            for q in range(n):
                V[j + 1, q] = w[q] / b
    return V, alpha, beta, k


def _lanczos(op, v0: np.ndarray, m: int, full: bool = True):
    V, alpha, beta, k = _lanczos_op(op, np.ascontiguousarray(v0, dtype=complex), m, full)
    return V[:k], alpha[:k], beta[: k - 1], beta[k - 1]


class _TridiagonalExp:
    """``tau -> exp(-i tau T) e_1`` for a fixed Lanczos tridiagonal ``T``."""

    def __init__(self, alpha, beta):
        if len(alpha) > 1:
            self.w, Q = la.eigh_tridiagonal(alpha, beta)
        else:
            self.w, Q = np.asarray(alpha, dtype=float), np.ones((1, 1))
        self.Q = Q
        self.q0 = Q[0].conj()

    def __call__(self, tau: float) -> np.ndarray:
        return self.Q @ (np.exp(-1j * tau * self.w) * self.q0)


class KrylovPropagator:
    """Adaptive ``exp(-i H t) psi`` using short Lanczos iterations.

    A substep ``tau`` is accepted when the a-posteriori error
    ``beta_m |[exp(-i tau T) e_1]_m|`` is below ``tol * max(tau, 1)``.
    Starting from the remaining interval, ``tau`` is halved until accepted,
    then extended by bisection towards the rejected value (each trial reuses
    the same Lanczos basis). If ``tau`` would drop below ``1e-6`` the Krylov
    dimension doubles instead.

    Short Lanczos runs only need local reorthogonalisation for accurate
    propagation; ``full_reorth=True`` orthogonalises against the whole basis.
    """

    def __init__(self, H: SparseOperator, tol: float = DEFAULT_TOL, m: int = KRYLOV_START,
                 full_reorth: bool = False):
        self.H = H
        self.op = _split_operator(H.matrix)
        self.tol = tol
        self.m = m
        self.full = full_reorth
        self.substeps = 0

    def _substep(self, psi, nrm, remaining, sign):
        while True:
            V, alpha, beta, beta_last = _lanczos(self.op, psi / nrm, self.m, self.full)
            expT = _TridiagonalExp(alpha, beta)

            def accepted(tau):
                c = expT(sign * tau)
                err = abs(beta_last * c[-1]) * nrm
                return err <= self.tol * max(tau, 1.0) or beta_last < 1e-13, c, err

            tau = remaining
            ok, c, err = accepted(tau)
            while not ok and tau >= 1e-6:
                tau /= 2
                ok, c, err = accepted(tau)
            if ok:
                break
            if self.m >= KRYLOV_MAX:
                raise PropagationError(f"Krylov step failed to converge, achieved error {err:.2e}")
            self.m = min(2 * self.m, KRYLOV_MAX)
        if tau < remaining:
            lo, hi = tau, min(2 * tau, remaining)
            for _ in range(5):
                mid = 0.5 * (lo + hi)
                ok_mid, c_mid, _ = accepted(mid)
                if ok_mid:
                    lo, c = mid, c_mid
                else:
                    hi = mid
            tau = lo
        return nrm * (c @ V), tau

    def step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """Propagate by ``dt`` (may be negative)."""
        psi = np.asarray(psi, dtype=complex)
        if dt == 0:
            return psi.copy()
        sign = 1.0 if dt > 0 else -1.0
        remaining = abs(dt)
        while remaining > 1e-15 * max(1.0, abs(dt)):
            nrm = np.linalg.norm(psi)
            if nrm == 0:
                return psi
            psi, tau = self._substep(psi, nrm, remaining, sign)
            remaining -= tau
            self.substeps += 1
        return psi


def evolve(H: SparseOperator, psi0: StateVector, times: Sequence[float],
           tol: float = DEFAULT_TOL) -> list[StateVector]:
    """``exp(-i H t) psi0`` at each requested time (any order, any sign)."""
    check_same_space(H.space, psi0.space)
    prop = KrylovPropagator(H, tol=tol)
    out = []
    t_now, psi = 0.0, np.asarray(psi0.amplitudes, dtype=complex)
    cache = {}
    for t in times:
        t = float(t)
        if t in cache:
            out.append(StateVector(cache[t].copy(), H.space))
            continue
        psi = prop.step(psi, t - t_now)
        t_now = t
        cache[t] = psi
        out.append(StateVector(psi.copy(), H.space))
    return out


def evolve_iter(H: SparseOperator, psi0: StateVector, times: Sequence[float],
                tol: float = DEFAULT_TOL) -> Iterable[tuple[float, StateVector]]:
    """Lazily yield ``(t, psi(t))``; avoids storing the whole trajectory."""
    check_same_space(H.space, psi0.space)
    prop = KrylovPropagator(H, tol=tol)
    t_now, psi = 0.0, np.asarray(psi0.amplitudes, dtype=complex)
    for t in times:
        psi = prop.step(psi, float(t) - t_now)
        t_now = float(t)
        yield t_now, StateVector(psi, H.space)


def dense_evolve(H: SparseOperator, psi0: StateVector, t: float) -> StateVector:
    """Reference propagation by dense matrix exponential."""
    U = la.expm(-1j * t * H.toarray())
    return StateVector(U @ psi0.amplitudes, H.space)


def time_grid(t_max: float, dt: float) -> np.ndarray:
    if t_max <= 0 or dt <= 0:
        raise ValueError("t_max and dt must be positive")
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def fidelity_compare(H_exact: SparseOperator, H_eff: SparseOperator, psi0: StateVector,
                     times: Sequence[float], tol: float = DEFAULT_TOL) -> np.ndarray:
    """``|<psi_eff(t)|psi_exact(t)>|^2`` along ``times``."""
    check_same_space(H_exact.space, H_eff.space)
    exact = evolve_iter(H_exact, psi0, times, tol)
    eff = evolve_iter(H_eff, psi0, times, tol)
    return np.array([abs(a.overlap(b)) ** 2 for (_, a), (_, b) in zip(eff, exact)])


# -- quench protocols --------------------------------------------------------

OBSERVABLES = ("entropy", "D_F", "wick", "correlator", "fidelity", "energy")
INITIAL_STATES = ("ground", "z2", "z3")


@dataclass
class QuenchProtocol:
    """Sudden quench from ``initial`` to ``final`` on an ``N``-site chain.

    ``t_max`` and ``dt`` default to ``40 / omega`` and ``0.1 / omega`` of the
    final model. ``df_stride`` evaluates the interaction distance on every
    ``df_stride``-th recorded time only (``nan`` elsewhere); each evaluation
    is warm-started from the previous optimum with ``df_starts`` further
    starts. ``use_sector`` selects the k = 0 sector whenever the model allows
    it (periodic, constrained, no impurities).
    """

    initial: ModelSpec
    final: ModelSpec
    N: int
    t_max: float | None = None
    dt: float | None = None
    observables: tuple = ("entropy", "D_F", "wick", "energy")
    initial_state: str = "ground"
    use_sector: bool = True
    correlator_site: int = 1
    wick_triple: tuple | None = None
    df_stride: int = 1
    df_starts: int = 8
    modes: int | None = None
    seed: int = 0
    tol: float = DEFAULT_TOL
    krylov_dim: int = KRYLOV_START

    def __post_init__(self):
        if self.initial.boundary != self.final.boundary:
            raise ValueError("initial and final specs must share the boundary condition")
        if (self.initial.variant == LONGRANGE) != (self.final.variant == LONGRANGE):
            raise ValueError("cannot quench between the long-range and constrained models")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"initial_state must be one of {INITIAL_STATES}")
        unknown = set(self.observables) - set(OBSERVABLES)
        if unknown:
            raise ValueError(f"unknown observables {sorted(unknown)}")
        omega = abs(self.final.omega) or 1.0
        if self.t_max is None:
            self.t_max = 40.0 / omega
        if self.dt is None:
            self.dt = 0.1 / omega
        if self.t_max <= 0 or self.dt <= 0:
            raise ValueError("t_max and dt must be positive")
        if self.df_stride < 1:
            raise ValueError("df_stride must be >= 1")
        self.observables = tuple(self.observables)

    @property
    def times(self) -> np.ndarray:
        return time_grid(self.t_max, self.dt)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["initial"] = self.initial.to_dict()
        d["final"] = self.final.to_dict()
        d["observables"] = list(self.observables)
        d["wick_triple"] = None if self.wick_triple is None else list(self.wick_triple)
        return d


@dataclass
class QuenchResult:
    times: np.ndarray
    values: dict
    metadata: dict = field(default_factory=dict)
    norm_drift: float = 0.0
    energy_drift: float = 0.0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def columns(self) -> list[str]:
        return ["t"] + list(self.values)

    def rows(self) -> list[list[float]]:
        cols = [self.times] + [self.values[k] for k in self.values]
        return [list(map(float, r)) for r in zip(*cols)]


def quench_space(spec: ModelSpec, N: int, use_sector: bool = True) -> Space:
    """Space on which a quench of ``spec`` runs."""
    if spec.variant == LONGRANGE:
        return unconstrained_basis(N, spec.boundary)
    basis = enumerate_basis(N, spec.boundary)
    if use_sector and spec.boundary == PBC and not spec.impurities:
        return build_momentum_sector(basis)
    return basis


def initial_state(protocol: QuenchProtocol, space: Space) -> StateVector:
    if protocol.initial_state == "z2":
        return z2_state(protocol.N, space)
    if protocol.initial_state == "z3":
        return z3_state(protocol.N, space)
    return ground_state(build_hamiltonian(protocol.initial, space))[1]


def run_quench(protocol: QuenchProtocol, psi0: StateVector | None = None) -> QuenchResult:
    """Evolve the initial state under the final Hamiltonian, recording observables."""
    p = protocol
    sector_ok = p.use_sector and not p.initial.impurities and not p.final.impurities
    space = quench_space(p.final, p.N, sector_ok)
    if psi0 is None:
        psi0 = initial_state(p, space)
    else:
        check_same_space(psi0.space, space)
    Hf = build_hamiltonian(p.final, space)
    times = p.times
    basis = full_basis(space)
    triple = p.wick_triple or default_triple(basis.N, basis.boundary)
    corr = observable("zz", space, p.correlator_site) if "correlator" in p.observables else None

    out = {name: np.full(len(times), np.nan) for name in p.observables}
    eps_prev = ()
    norm_drift = energy_drift = 0.0
    e0 = Hf.expectation(psi0).real
    prop = KrylovPropagator(Hf, tol=p.tol, m=p.krylov_dim)
    psi, t_now = psi0.amplitudes.astype(complex), 0.0
    for k, t in enumerate(times):
        psi = prop.step(psi, float(t) - t_now)
        t_now = float(t)
        state = StateVector(psi, space)
        norm_drift = max(norm_drift, abs(state.norm - 1.0))
        e = Hf.expectation(state).real
        energy_drift = max(energy_drift, abs(e - e0))
        if "energy" in out:
            out["energy"][k] = e
        if "fidelity" in out:
            out["fidelity"][k] = abs(psi0.overlap(state)) ** 2
        if "correlator" in out:
            out["correlator"][k] = corr.expectation(state).real
        if "wick" in out:
            out["wick"][k] = wick_violation(state, triple)
        if "entropy" in out or "D_F" in out:
            ent = reduced_density_matrix(state)
            if "entropy" in out:
                out["entropy"][k] = ent.entropy
            if "D_F" in out and k % p.df_stride == 0:
                seed = p.seed + k
                d, eps_prev = interaction_distance(ent, M=p.modes, n_starts=p.df_starts,
                                                   seed=seed, initial=(eps_prev,) if len(eps_prev) else ())
                out["D_F"][k] = d
    meta = {
        "protocol": p.to_dict(),
        "dimension": space.dim,
        "space": list(map(str, space.tag)),
        "krylov_substeps": prop.substeps,
        "initial_energy": e0,
    }
    return QuenchResult(times, out, meta, norm_drift, energy_drift)
