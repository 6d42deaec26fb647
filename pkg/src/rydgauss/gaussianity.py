"""Entanglement spectra, interaction distance and Wick-decomposition violation."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .hamiltonians import StateVector, pauli_string_operator
from .hilbert import ConstrainedBasis, MomentumSector

SPECTRUM_CUTOFF = 1e-12
MAX_MODES = 16
MAX_DEFAULT_MODES = 10
DF_CONJECTURED_MAX = 3.0 - 2.0 * math.sqrt(2.0)
DF_WARN_MARGIN = 0.005
DEFAULT_STARTS = 32


class ConjectureBoundWarning(UserWarning):
    """An interaction distance above the conjectured maximum 3 - 2*sqrt(2)."""


@dataclass
class EntanglementData:
    n_a: int
    probabilities: np.ndarray  # descending

    @property
    def energies(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log(self.probabilities)

    @property
    def entropy(self) -> float:
        return entropy(self.probabilities)

    def truncated(self, cutoff: float = SPECTRUM_CUTOFF) -> np.ndarray:
        return self.probabilities[self.probabilities > cutoff]


def _full_amplitudes(psi, basis: ConstrainedBasis | None):
    if isinstance(psi, StateVector):
        return psi.full(), psi.basis
    psi = np.asarray(psi)
    if basis is None:
        raise ValueError("raw amplitude arrays need an explicit basis")
    if isinstance(basis, MomentumSector):
        raise ValueError("sector-compressed amplitudes must be embedded into the full basis first")
    if psi.shape[0] != basis.dim:
        raise ValueError(f"state has length {psi.shape[0]}, basis dimension is {basis.dim}")
    return psi, basis


def schmidt_matrix(psi, n_a: int, basis: ConstrainedBasis | None = None) -> np.ndarray:
    """Amplitudes arranged as (configurations of sites 1..n_a) x (rest)."""
    amps, basis = _full_amplitudes(psi, basis)
    if not 1 <= n_a < basis.N:
        raise ValueError(f"block size must lie in [1, {basis.N - 1}], got {n_a}")
    states = basis.states
    mask = np.uint64((1 << n_a) - 1)
    _, left = np.unique(states & mask, return_inverse=True)
    _, right = np.unique(states >> np.uint64(n_a), return_inverse=True)
    left, right = left.ravel(), right.ravel()
    m = np.zeros((left.max() + 1, right.max() + 1), dtype=complex)
    m[left, right] = amps
    return m


def reduced_density_matrix(psi, n_a: int | None = None,
                           basis: ConstrainedBasis | None = None) -> EntanglementData:
    """Entanglement spectrum of the block of sites ``1..n_a`` (default N/2)."""
    if n_a is None:
        n_a = (psi.basis if isinstance(psi, StateVector) else basis).N // 2
    s = np.linalg.svd(schmidt_matrix(psi, n_a, basis), compute_uv=False)
    p = np.sort(s**2)[::-1]
    total = p.sum()
    if total > 0:
        p = p / total
    return EntanglementData(n_a, p)


def entropy(probabilities) -> float:
    p = np.asarray(probabilities, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum()) + 0.0


# -- free-fermion entanglement spectra --------------------------------------

def _occupation_table(M: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=M)), dtype=float).reshape(-1, M)


def free_many_body_spectrum(eps) -> np.ndarray:
    """Normalised free-fermion probabilities ``exp(-sum n_l eps_l) / Z``, descending."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    M = len(eps)
    if M > MAX_MODES:
        raise ValueError(f"at most {MAX_MODES} modes supported, got {M}")
    # log Z = sum_l log(1 + e^{-eps_l}), stable for either sign of eps
    logq = -_occupation_table(M) @ eps - np.logaddexp(0.0, -eps).sum()
    return np.sort(np.exp(logq))[::-1]


def default_mode_count(levels: int) -> int:
    return min(math.ceil(math.log2(max(levels, 1))) + 1, MAX_DEFAULT_MODES)


class _TraceDistance:
    """Trace distance between a fixed target spectrum and a free spectrum."""

    def __init__(self, target: np.ndarray, M: int):
        self.M = M
        self.occ = _occupation_table(M)
        size = max(len(target), 2**M)
        self.target = np.zeros(size)
        self.target[: len(target)] = target
        self.pad = size - 2**M

    def __call__(self, eps: np.ndarray) -> float:
        return _trace_distance(np.asarray(eps, dtype=float), self.occ, self.target)


@njit(cache=True)
def _trace_distance(eps, occ, target):
    M = eps.shape[0]
    log_z = 0.0
    for l in range(M):
        e = eps[l]
        log_z += max(0.0, -e) + np.log1p(np.exp(-abs(e)))
    q = np.exp(-(occ @ eps) - log_z)
    q.sort()
    n = target.shape[0]
    nq = q.shape[0]
    total = 0.0
    for k in range(n):
        qk = q[nq - 1 - k] if k < nq else 0.0
        total += abs(target[k] - qk)
    return 0.5 * total


@njit(cache=True)
def _nelder_mead(occ, target, x0, step, fatol, xatol, maxfev):
    """Adaptive Nelder-Mead (dimension-dependent coefficients)."""
    n = x0.shape[0]
    alpha = 1.0
    gamma = 1.0 + 2.0 / n
    rho = 0.75 - 1.0 / (2.0 * n)
    sigma = 1.0 - 1.0 / n
    if n == 1:
        gamma, rho, sigma = 2.0, 0.5, 0.5
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    sim[0] = x0
    for i in range(n):
        y = x0.copy()
        y[i] += step
        sim[i + 1] = y
    for i in range(n + 1):
        fs[i] = _trace_distance(sim[i], occ, target)
    nfev = n + 1
    while nfev < maxfev:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        xspread = 0.0
        fspread = 0.0
        for i in range(1, n + 1):
            fspread = max(fspread, abs(fs[i] - fs[0]))
            for j in range(n):
                xspread = max(xspread, abs(sim[i, j] - sim[0, j]))
        if fspread <= fatol and xspread <= xatol:
            break
        centroid = np.zeros(n)
        for i in range(n):
            centroid += sim[i]
        centroid /= n
        xr = centroid + alpha * (centroid - sim[n])
        fr = _trace_distance(xr, occ, target)
        nfev += 1
        if fr < fs[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = _trace_distance(xe, occ, target)
            nfev += 1
            if fe < fr:
                sim[n] = xe
                fs[n] = fe
            else:
                sim[n] = xr
                fs[n] = fr
        elif fr < fs[n - 1]:
            sim[n] = xr
            fs[n] = fr
        else:
            if fr < fs[n]:
                xc = centroid + rho * (xr - centroid)
            else:
                xc = centroid + rho * (sim[n] - centroid)
            fc = _trace_distance(xc, occ, target)
            nfev += 1
            if fc < min(fr, fs[n]):
                sim[n] = xc
                fs[n] = fc
            else:
                for i in range(1, n + 1):
                    sim[i] = sim[0] + sigma * (sim[i] - sim[0])
                    fs[i] = _trace_distance(sim[i], occ, target)
                nfev += n
    k = np.argmin(fs)
    return sim[k].copy(), fs[k]


def _target_spectrum(spectrum) -> np.ndarray:
    p = spectrum.probabilities if isinstance(spectrum, EntanglementData) else spectrum
    p = np.sort(np.asarray(p, dtype=float))[::-1]
    p = p[p > SPECTRUM_CUTOFF]
    if len(p) == 0:
        raise ValueError("empty entanglement spectrum")
    return p / p.sum()


def _gap_starts(p: np.ndarray, M: int) -> list[np.ndarray]:
    gaps = -np.log(p / p[0])
    gaps = np.concatenate([gaps, np.full(2**M, 20.0)])
    first = gaps[1 : M + 1]
    doubling = gaps[[2**j for j in range(M)]]
    return [first, doubling]


def interaction_distance(spectrum, M: int | None = None, n_starts: int = DEFAULT_STARTS,
                         seed: int = 0, initial=(), warn: bool = True):
    """Minimal trace distance to a free-fermion entanglement spectrum.

    Parameters
    ----------
    spectrum : EntanglementData or array of probabilities
    M : number of single-particle modes; defaults to
        ``min(ceil(log2(levels)) + 1, 10)``.
    n_starts : number of Nelder-Mead starts; the first ones come from the
        target's own level gaps, the rest are uniform in ``[0, 10]^M``.
    initial : extra starting points tried before all others (warm starts).

    Returns
    -------
    (D_F, eps) with ``eps`` sorted ascending.
    """
    p = _target_spectrum(spectrum)
    if M is None:
        M = default_mode_count(len(p))
    if not 1 <= M <= MAX_MODES:
        raise ValueError(f"mode count must lie in [1, {MAX_MODES}], got {M}")
    f = _TraceDistance(p, M)
    rng = np.random.default_rng(seed)
    starts = [np.asarray(x, dtype=float)[:M] for x in initial if len(x) >= M]
    starts += _gap_starts(p, M)
    while len(starts) < max(n_starts, len(initial) + 1):
        starts.append(rng.uniform(0.0, 10.0, size=M))
    starts = starts[: max(n_starts, len(initial) + 1)] if n_starts else starts

    best_val, best_x = np.inf, None
    for x0 in starts:
        x, val = _simplex(f, x0)
        if val < best_val - 1e-15:
            best_val, best_x = val, x
        if best_val < 1e-12:
            break
    D = float(min(max(best_val, 0.0), 1.0))
    if warn and D > DF_CONJECTURED_MAX + DF_WARN_MARGIN:
        warnings.warn(
            f"interaction distance {D:.4f} exceeds conjectured maximum {DF_CONJECTURED_MAX:.4f}",
            ConjectureBoundWarning,
            stacklevel=2,
        )
    return D, np.sort(best_x)


def _simplex(f: _TraceDistance, x0):
    x0 = np.asarray(x0, dtype=float)
    maxfev = 600 * len(x0) + 600
    x, val = _nelder_mead(f.occ, f.target, x0, 0.5, 1e-9, 1e-7, maxfev)
    # restart from the converged point with a smaller simplex to undo collapse
    x2, val2 = _nelder_mead(f.occ, f.target, x, 0.05, 1e-9, 1e-7, maxfev)
    return (x2, float(val2)) if val2 <= val else (x, float(val))


def interaction_distance_grid(spectrum, M: int, lo: float = -12.0, hi: float = 12.0,
                              step: float = 0.05, refine: int = 3, candidates: int = 32):
    """Brute-force oracle: exhaustive grid over ``eps`` then zoomed grids.

    The free spectrum is invariant under permuting modes and under
    ``eps -> -eps`` for any single mode, so the coarse grid only covers
    ``0 <= eps_1 <= ... <= eps_M <= max(|lo|, hi)``. The ``candidates``
    best coarse points are each refined, since the objective is only
    piecewise smooth and the coarse minimum can sit in the wrong basin.
    """
    p = _target_spectrum(spectrum)
    f = _TraceDistance(p, M)
    top = max(abs(lo), hi)
    axis = np.arange(0.0, top + step / 2, step)
    occ = f.occ
    pool_x = np.empty((0, M))
    pool_v = np.empty(0)
    for combo in _sorted_grid(axis, M, chunk=200_000):
        vals = _grid_values(f, occ, combo)
        k = np.argsort(vals, kind="stable")[:candidates]
        pool_x = np.concatenate([pool_x, combo[k]])
        pool_v = np.concatenate([pool_v, vals[k]])
        keep = np.argsort(pool_v, kind="stable")[:candidates]
        pool_x, pool_v = pool_x[keep], pool_v[keep]
    best_val, best_x = np.inf, None
    for x0, v0 in zip(pool_x, pool_v):
        val, x = float(v0), x0
        h = step
        for _ in range(refine):
            local = np.linspace(-h, h, 21)
            pts = np.stack(np.meshgrid(*([local] * M), indexing="ij"), -1).reshape(-1, M) + x
            vals = _grid_values(f, occ, pts)
            k = int(np.argmin(vals))
            if vals[k] <= val:
                val, x = float(vals[k]), pts[k]
            h /= 10
        if val < best_val:
            best_val, best_x = val, x
    return best_val, np.sort(np.abs(best_x))


def _sorted_grid(axis, M, chunk):
    buf = []
    for combo in itertools.combinations_with_replacement(axis, M):
        buf.append(combo)
        if len(buf) >= chunk:
            yield np.array(buf)
            buf = []
    if buf:
        yield np.array(buf)


def _grid_values(f: _TraceDistance, occ, pts):
    logq = -pts @ occ.T - np.logaddexp(0.0, -pts).sum(axis=1, keepdims=True)
    q = -np.sort(-np.exp(logq), axis=1)
    if f.pad:
        q = np.concatenate([q, np.zeros((len(q), f.pad))], axis=1)
    return 0.5 * np.abs(f.target[None, :] - q).sum(axis=1)


# -- Wick decomposition -----------------------------------------------------

_WICK_STRINGS = {
    "n1 s2+ s3-": ((0, "n"), (1, "+"), (2, "-")),
    "n1": ((0, "n"),),
    "s2+ s3-": ((1, "+"), (2, "-")),
    "s1+ s2+": ((0, "+"), (1, "+")),
    "s1- s2z s3-": ((0, "-"), (1, "z"), (2, "-")),
    "s1- s2+": ((0, "-"), (1, "+")),
    "s1+ s2z s3-": ((0, "+"), (1, "z"), (2, "-")),
}


def _combine(ev) -> dict:
    terms = {
        "first": ev["n1 s2+ s3-"],
        "second": ev["n1"] * ev["s2+ s3-"],
        "third": ev["s1+ s2+"] * ev["s1- s2z s3-"],
        "fourth": ev["s1- s2+"] * ev["s1+ s2z s3-"],
    }
    terms["W"] = abs(terms["first"] - terms["second"] - terms["third"] + terms["fourth"])
    return terms


def default_triple(N: int, boundary: str) -> tuple[int, int, int]:
    if boundary == "OBC" and N >= 9:
        mid = (N + 1) // 2
        return (mid - 1, mid, mid + 1)
    return (1, 2, 3)


def _check_triple(triple, N):
    triple = tuple(int(s) for s in triple)
    if len(triple) != 3 or not (triple[1] == triple[0] + 1 and triple[2] == triple[1] + 1):
        raise ValueError(f"Wick sites must be three consecutive sites, got {triple}")
    if triple[0] < 1 or triple[2] > N:
        raise ValueError(f"Wick sites {triple} outside 1..{N}")
    return triple


def wick_terms(psi: StateVector, triple=(1, 2, 3)) -> dict:
    """The four Wick terms and ``W`` from full-state expectation values."""
    basis = psi.basis
    triple = _check_triple(triple, basis.N)
    amps = psi.full()
    ev = {}
    for name, ops in _WICK_STRINGS.items():
        op = pauli_string_operator({triple[k]: o for k, o in ops}, basis)
        ev[name] = np.vdot(amps, op.matrix @ amps)
    return _combine(ev)


def site_density_matrix(psi: StateVector, sites) -> np.ndarray:
    """Dense reduced density matrix on ``sites``.

    Local index ``sum_k n_{sites[k]} 2^k`` (first listed site least significant).
    """
    basis = psi.basis
    amps = psi.full()
    states = basis.states
    local = np.zeros(len(states), dtype=np.int64)
    rest = states.copy()
    for k, s in enumerate(sites):
        bit = np.uint64(1) << np.uint64(s - 1)
        local |= (((states & bit) != 0).astype(np.int64) << k)
        rest &= ~bit
    _, col = np.unique(rest, return_inverse=True)
    m = np.zeros((2 ** len(sites), col.max() + 1), dtype=complex)
    m[local, col.ravel()] = amps
    return m @ m.conj().T


_LOCAL = {
    "n": np.array([[0, 0], [0, 1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),  # |0><1|
    "-": np.array([[0, 0], [1, 0]], dtype=complex),  # |1><0|
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "1": np.eye(2, dtype=complex),
}


def _three_site_operator(ops) -> np.ndarray:
    local = ["1", "1", "1"]
    for k, o in ops:
        local[k] = o
    # kron order puts the first site in the least significant position
    return np.kron(_LOCAL[local[2]], np.kron(_LOCAL[local[1]], _LOCAL[local[0]]))


def wick_violation(state, triple=(1, 2, 3)) -> float:
    """Wick-decomposition violation ``W`` on three consecutive sites.

    ``state`` is a :class:`StateVector` (the triple's 3-site density matrix is
    extracted first) or an 8x8 density matrix of the triple itself.
    """
    return float(wick_terms_from_rdm(_triple_rdm(state, triple))["W"])


def _triple_rdm(state, triple):
    if isinstance(state, StateVector):
        triple = _check_triple(triple, state.basis.N)
        return site_density_matrix(state, triple)
    rho = np.asarray(state)
    if rho.shape != (8, 8):
        raise ValueError("density matrix input must be 8x8 over the three Wick sites")
    return rho


def wick_terms_from_rdm(rho: np.ndarray) -> dict:
    ev = {name: np.trace(rho @ _three_site_operator(ops)) for name, ops in _WICK_STRINGS.items()}
    return _combine(ev)


@dataclass
class GaussianityReport:
    entropy: float
    wick: float
    interaction_distance: float
    eps: np.ndarray
    spectrum: EntanglementData


def analyse_state(psi: StateVector, n_a: int | None = None, triple=None, M: int | None = None,
                  n_starts: int = DEFAULT_STARTS, seed: int = 0, initial=()) -> GaussianityReport:
    """Half-chain entropy, Wick violation and interaction distance of ``psi``."""
    basis = psi.basis
    ent = reduced_density_matrix(psi, n_a)
    if triple is None:
        triple = default_triple(basis.N, basis.boundary)
    w = wick_violation(psi, triple)
    d, eps = interaction_distance(ent, M=M, n_starts=n_starts, seed=seed, initial=initial)
    return GaussianityReport(ent.entropy, w, d, eps, ent)
