"""Named numerical experiments: scans, quench suites, impurity and disorder studies.

Every experiment returns plain rows (lists of floats/strings) plus a manifest
dictionary, so the CLI and the tests share the same entry points.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from typing import Callable, Sequence

import numpy as np

from .dynamics import QuenchProtocol, QuenchResult, run_quench
from .gaussianity import (DEFAULT_STARTS, default_triple, interaction_distance,
                          reduced_density_matrix, wick_violation)
from .hamiltonians import (DEFAULT_IMPURITY_SITE, DISORDER_WIDTH, LONGRANGE, ModelSpec,
                           build_hamiltonian, sample_offsets)
from .hilbert import OBC, PBC, Space, build_momentum_sector, enumerate_basis, unconstrained_basis
from .solver import ground_state

# Classification by the Wick violation W of the half-filled Wick triple.
# W is built from hopping amplitudes that stay perturbatively small deep in
# both ordered phases, so the scale separating them is far below unity.
Z3_WICK_MIN = 5e-4
Z2_WICK_MAX = 1e-4
Z3, Z2, INDETERMINATE = "Z3-like", "Z2-like", "indeterminate"

MAX_FSS_SITES = 24
FSS_SIZES = (18, 24)


# -- classification ----------------------------------------------------------

def classify(W: float, z3_min: float = Z3_WICK_MIN, z2_max: float = Z2_WICK_MAX) -> str:
    if not np.isfinite(W):
        return INDETERMINATE
    if W >= z3_min:
        return Z3
    if W <= z2_max:
        return Z2
    return INDETERMINATE


# -- single-point analysis -----------------------------------------------------

def model_space(spec: ModelSpec, N: int, use_sector: bool = True) -> Space:
    """Basis used for ground-state work on ``spec``."""
    if spec.variant == LONGRANGE:
        return unconstrained_basis(N, spec.boundary)
    basis = enumerate_basis(N, spec.boundary)
    if use_sector and spec.boundary == PBC and not spec.impurities:
        return build_momentum_sector(basis)
    return basis


def ground_metrics(spec: ModelSpec, N: int, metrics=("D_F", "W", "S"), triple=None,
                   n_starts: int = DEFAULT_STARTS, seed: int = 0, modes: int | None = None,
                   use_sector: bool = True, extra_triples=()) -> dict:
    """Ground state of ``spec`` and its half-chain Gaussianity measures."""
    space = model_space(spec, N, use_sector)
    energy, gs = ground_state(build_hamiltonian(spec, space))
    out = {"energy": energy}
    if "S" in metrics or "D_F" in metrics:
        ent = reduced_density_matrix(gs)
        if "S" in metrics:
            out["S"] = ent.entropy
        if "D_F" in metrics:
            out["D_F"] = interaction_distance(ent, M=modes, n_starts=n_starts, seed=seed)[0]
    if triple is None:
        triple = default_triple(N, spec.boundary)
    if "W" in metrics:
        out["W"] = wick_violation(gs, triple)
    for name, t in extra_triples:
        out[name] = wick_violation(gs, t)
    return out


# -- persistence ---------------------------------------------------------------

def code_version() -> dict:
    def version(pkg):
        try:
            return metadata.version(pkg)
        except metadata.PackageNotFoundError:
            return "unknown"

    return {
        "artifact": version("artifact"),
        "numpy": version("numpy"),
        "scipy": version("scipy"),
        "numba": version("numba"),
        "python": platform.python_version(),
    }


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def table_text(columns: Sequence[str], rows: Sequence[Sequence], fmt: str = "csv") -> str:
    """Serialise a table; output depends only on the values (hash-stable)."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()
    if fmt == "json":
        recs = [{c: (float(x) if isinstance(x, (np.floating, np.integer)) else x)
                 for c, x in zip(columns, r)} for r in rows]
        return json.dumps(recs, indent=1, allow_nan=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_table(out_dir: str, name: str, columns, rows, fmt: str = "csv") -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.{fmt}")
    text = table_text(columns, rows, fmt)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def write_manifest(out_dir: str, experiment: str, spec: dict, seed: int, outputs: dict,
                   extra: dict | None = None) -> str:
    """``manifest.json`` echoing inputs, seed, versions and output hashes."""
    os.makedirs(out_dir, exist_ok=True)
    hashes = {}
    for label, path in outputs.items():
        with open(path, "rb") as fh:
            hashes[label] = {"file": os.path.basename(path),
                             "sha256": hashlib.sha256(fh.read()).hexdigest()}
    manifest = {
        "experiment": experiment,
        "spec": spec,
        "seed": seed,
        "versions": code_version(),
        "outputs": hashes,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj)}")


@dataclass
class ResultRecord:
    """One work item's input echo, metric values and bookkeeping."""

    inputs: dict
    metrics: dict
    wall_time: float
    ok: bool = True
    error: str = ""
    version: str = field(default_factory=lambda: code_version()["artifact"])


def run_pool(func: Callable, items: Sequence, workers: int = 1) -> list:
    """Map ``func`` over ``items`` in index order with a bounded process pool."""
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items))


# -- phase diagrams -------------------------------------------------------------

@dataclass
class ScanGrid:
    """Rectangular grid over two model parameters.

    ``x`` and ``y`` are ``(name, min, max, steps)`` with ``name`` one of
    ``u``, ``v``, ``omega``; other parameters come from ``base``.
    """

    base: ModelSpec
    N: int
    x: tuple = ("u", -20.0, 5.0, 26)
    y: tuple = ("v", -10.0, 15.0, 26)
    metrics: tuple = ("D_F", "W", "S")
    triple: tuple | None = None
    n_starts: int = DEFAULT_STARTS
    modes: int | None = None
    extra_triples: tuple = ()

    def __post_init__(self):
        for name, lo, hi, steps in (self.x, self.y):
            if name not in ("u", "v", "omega"):
                raise ValueError(f"scan axis must be u, v or omega, got {name!r}")
            if int(steps) < 2:
                raise ValueError("each scan axis needs at least 2 steps")
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("scan ranges must be finite")
        unknown = set(self.metrics) - {"D_F", "W", "S"}
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")

    def axis(self, which: str) -> np.ndarray:
        _, lo, hi, steps = self.x if which == "x" else self.y
        return np.linspace(lo, hi, int(steps))

    def points(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a in self.axis("x") for b in self.axis("y")]

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "N": self.N,
            "x": list(self.x),
            "y": list(self.y),
            "metrics": list(self.metrics),
            "triple": None if self.triple is None else list(self.triple),
            "n_starts": self.n_starts,
            "modes": self.modes,
            "extra_triples": [[n, list(t)] for n, t in self.extra_triples],
        }


def _scan_point(job) -> ResultRecord:
    grid, index, (a, b), seed = job
    spec = grid.base.replace(**{grid.x[0]: a, grid.y[0]: b})
    t0 = time.perf_counter()
    inputs = {"index": index, grid.x[0]: a, grid.y[0]: b}
    try:
        m = ground_metrics(spec, grid.N, grid.metrics, grid.triple, grid.n_starts,
                           seed + index, grid.modes, extra_triples=grid.extra_triples)
        m["class"] = classify(m["W"]) if "W" in m else ""
        return ResultRecord(inputs, m, time.perf_counter() - t0)
    except Exception as exc:  # recorded, scan continues
        return ResultRecord(inputs, {}, time.perf_counter() - t0, ok=False,
                            error=f"{type(exc).__name__}: {exc}")


def phase_diagram(grid: ScanGrid, seed: int = 0, workers: int = 1) -> list[ResultRecord]:
    """Ground-state D_F, W and S at every grid point (failures flagged)."""
    jobs = [(grid, i, pt, seed) for i, pt in enumerate(grid.points())]
    return run_pool(_scan_point, jobs, workers)


def scan_table(grid: ScanGrid, records: Sequence[ResultRecord]):
    """Rows ``(x, y, metrics..., class, status)`` in grid order."""
    names = list(grid.metrics) + [n for n, _ in grid.extra_triples]
    cols = [grid.x[0].upper() if grid.x[0] != "omega" else "Omega",
            grid.y[0].upper() if grid.y[0] != "omega" else "Omega"] + names + ["class", "status"]
    rows = []
    for r in records:
        vals = [r.metrics.get(n, float("nan")) for n in names]
        rows.append([r.inputs[grid.x[0]], r.inputs[grid.y[0]], *vals,
                     r.metrics.get("class", ""), "ok" if r.ok else r.error])
    return cols, rows


def transition_midpoint(values: Sequence[float], metric: Sequence[float]) -> float:
    """Parameter where ``metric`` crosses halfway between its end values.

    Linear interpolation at the first crossing; ``nan`` if none.
    """
    x = np.asarray(values, dtype=float)
    y = np.asarray(metric, dtype=float)
    half = 0.5 * (y[0] + y[-1])
    s = np.sign(y - half)
    for k in range(len(x) - 1):
        if s[k] == 0:
            return float(x[k])
        if s[k] * s[k + 1] < 0:
            return float(x[k] + (half - y[k]) * (x[k + 1] - x[k]) / (y[k + 1] - y[k]))
    return float("nan")


# -- quench helpers ----------------------------------------------------------------

def retention(result: QuenchResult, key: str = "D_F") -> float:
    """``max_t |X(t) - X(0)|`` over the times where ``X`` was evaluated."""
    x = result[key]
    x = x[np.isfinite(x)]
    return float(np.max(np.abs(x - x[0])))


def quench_table(result: QuenchResult):
    return result.columns(), result.rows()


def du_quench(N: int = 12, initial=(-15.0, 8.0), final=(-10.0, -5.0), t_max: float = 40.0,
              dt: float = 0.1, df_stride: int = 5, seed: int = 0) -> QuenchResult:
    """Quench changing U and V together, starting from the initial ground state."""
    p = QuenchProtocol(ModelSpec.uv(*initial), ModelSpec.uv(*final), N, t_max=t_max, dt=dt,
                       observables=("entropy", "D_F", "wick", "energy"), df_stride=df_stride,
                       seed=seed)
    return run_quench(p)


# -- impurity robustness ----------------------------------------------------------

def _impurity_job(job):
    (u, v), quench_to, eps, N, site, t_max, dt, df_stride, seed = job
    imp = [(site, eps)] if eps != 0 else []
    spec_i = ModelSpec.uv(u, v, impurities=imp)
    t0 = time.perf_counter()
    g = ground_metrics(spec_i, N, use_sector=False, seed=seed)
    spec_f = ModelSpec.uv(*quench_to, impurities=imp)
    p = QuenchProtocol(spec_i, spec_f, N, t_max=t_max, dt=dt, observables=("D_F",),
                       df_stride=df_stride, use_sector=False, seed=seed)
    res = run_quench(p)
    d = res["D_F"]
    d = d[np.isfinite(d)]
    metrics = {
        "W": g["W"], "D_F": g["D_F"], "S": g["S"], "class": classify(g["W"]),
        "retention": retention(res), "min_D_F": float(d.min()), "final_D_F": float(d[-1]),
        "norm_drift": res.norm_drift, "energy_drift": res.energy_drift,
    }
    return ResultRecord({"epsilon": eps, "N": N, "site": site}, metrics, time.perf_counter() - t0)


IMPURITY_COLUMNS = ["epsilon", "N", "W", "D_F", "S", "class", "retention", "min_D_F", "final_D_F"]


def impurity_sweep(point=(-4.0, 10.5), epsilons=(0.0, 1e-4, 1e-3, 1e-2, 1e-1), sizes=(12,),
                   quench_to=(-4.0, -6.0), site: int = DEFAULT_IMPURITY_SITE, t_max: float = 40.0,
                   dt: float = 0.1, df_stride: int = 5, seed: int = 0, workers: int = 1):
    """Ground-state Gaussianity and quench retention versus impurity strength.

    The impurity ``eps n_site`` breaks translation symmetry, so the full
    periodic constrained basis is used throughout.
    """
    jobs = [(tuple(point), tuple(quench_to), float(e), int(N), site, t_max, dt, df_stride, seed)
            for N in sizes for e in epsilons]
    records = run_pool(_impurity_job, jobs, workers)
    rows = [[r.inputs["epsilon"], r.inputs["N"]] + [r.metrics[c] for c in IMPURITY_COLUMNS[2:]]
            for r in records]
    return records, IMPURITY_COLUMNS, rows


# -- long-range model and disorder ensembles -------------------------------------

@dataclass
class LongRangeConfig:
    """Parameters of the long-range suite (``V = 1`` energy units).

    The Z3- and Z2-phase endpoints sit in the clean N = 12 ring diagram;
    distances wrap around the ring so the three Z3 patterns stay degenerate.
    """

    N: int = 12
    omega: float = 0.008
    u_z3: float = 0.035
    u_z2: float = 0.08
    v: float = 1.0
    boundary: str = PBC
    t_max: float = 8000.0
    dt: float = 200.0
    ensemble_t_max: float = 2000.0
    ensemble_dt: float = 200.0
    realizations: int = 100
    width: float = DISORDER_WIDTH
    df_starts: int = 8
    krylov_dim: int = 40

    def spec(self, u: float, offsets=None) -> ModelSpec:
        return ModelSpec.longrange(self.omega, u, self.v, offsets=offsets, boundary=self.boundary)

    def protocol(self, forward: bool = True, initial_state: str = "ground", offsets=None,
                 ensemble: bool = False, seed: int = 0) -> QuenchProtocol:
        ui, uf = (self.u_z3, self.u_z2) if forward else (self.u_z2, self.u_z3)
        return QuenchProtocol(
            self.spec(ui, offsets), self.spec(uf, offsets), self.N,
            t_max=self.ensemble_t_max if ensemble else self.t_max,
            dt=self.ensemble_dt if ensemble else self.dt,
            observables=("D_F", "entropy", "energy"), initial_state=initial_state,
            df_starts=self.df_starts, seed=seed, krylov_dim=self.krylov_dim)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EnsembleSpec:
    """Disorder ensemble around a quench protocol.

    Realisation ``r`` draws its position offsets from a generator seeded by
    ``(master_seed, r)``; the offsets enter both the initial and the final
    Hamiltonian (the same atoms are quenched).
    """

    config: LongRangeConfig
    realizations: int = 100
    master_seed: int = 0
    initial_state: str = "ground"
    forward: bool = True

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realisation")

    def offsets(self, r: int) -> list:
        if self.config.width == 0:
            return [0.0] * self.config.N
        rng = np.random.default_rng([self.master_seed, r])
        return sample_offsets(self.config.N, rng, self.config.width)


@dataclass
class EnsembleResult:
    times: np.ndarray
    samples: dict  # observable -> (R, T)
    norm_drift: float = 0.0
    energy_drift: float = 0.0

    def mean(self, key: str = "D_F") -> np.ndarray:
        return self.samples[key].mean(axis=0)

    def stderr(self, key: str = "D_F") -> np.ndarray:
        x = self.samples[key]
        if x.shape[0] < 2:
            return np.zeros(x.shape[1])
        return x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])

    def table(self):
        cols, cols_data = ["t"], [self.times]
        for k in self.samples:
            cols += [f"{k}_mean", f"{k}_stderr"]
            cols_data += [self.mean(k), self.stderr(k)]
        return cols, [list(map(float, r)) for r in zip(*cols_data)]


def _ensemble_job(job):
    ens, r = job
    p = ens.config.protocol(ens.forward, ens.initial_state, ens.offsets(r), ensemble=True,
                            seed=ens.master_seed + r)
    res = run_quench(p)
    return res.times, {k: res[k] for k in ("D_F", "entropy")}, res.norm_drift, res.energy_drift


def run_ensemble(ens: EnsembleSpec, workers: int = 1) -> EnsembleResult:
    out = run_pool(_ensemble_job, [(ens, r) for r in range(ens.realizations)], workers)
    times = out[0][0]
    samples = {k: np.array([o[1][k] for o in out]) for k in out[0][1]}
    return EnsembleResult(times, samples, max(o[2] for o in out), max(o[3] for o in out))


def longrange_diagram(config: LongRangeConfig, omega=(0.002, 0.012, 6), u=(0.0, 0.1, 6),
                      n_starts: int = 8, seed: int = 0, workers: int = 1):
    grid = ScanGrid(config.spec(0.0), config.N, x=("omega",) + tuple(omega),
                    y=("u",) + tuple(u), n_starts=n_starts)
    return grid, phase_diagram(grid, seed, workers)


def longrange_suite(config: LongRangeConfig | None = None, seed: int = 0, workers: int = 1,
                    ensembles: Sequence[str] = ("ground", "z3")) -> dict:
    """Clean forward/reverse quenches and disorder ensembles.

    ``ensembles`` lists initial-state modes for the disordered forward quench:
    ``ground`` (disordered ground state) and ``z3`` (ideal product state).
    """
    config = config or LongRangeConfig()
    out = {
        "forward": run_quench(config.protocol(True, seed=seed)),
        "reverse": run_quench(config.protocol(False, seed=seed)),
    }
    for mode in ensembles:
        ens = EnsembleSpec(config, config.realizations, seed, initial_state=mode)
        out[f"ensemble_{mode}"] = run_ensemble(ens, workers)
        out[f"clean_{mode}"] = run_quench(config.protocol(True, mode, ensemble=True, seed=seed))
    return out


# -- open chains ------------------------------------------------------------------

def check_obc_size(N: int) -> None:
    if N % 2 == 0 or N % 3 != 0:
        raise ValueError(
            f"open-chain diagrams need N odd and divisible by 3 so both density waves "
            f"fit the chain, got N={N}"
        )


def obc_diagram(N: int = 15, x=("u", -20.0, 5.0, 26), y=("v", -10.0, 15.0, 26),
                n_starts: int = DEFAULT_STARTS, seed: int = 0, workers: int = 1):
    """Open-chain diagram with bulk Wick triple and the edge triple for reference."""
    check_obc_size(N)
    bulk = default_triple(N, OBC)
    grid = ScanGrid(ModelSpec.uv(0.0, 0.0, boundary=OBC), N, x=tuple(x), y=tuple(y),
                    triple=bulk, n_starts=n_starts, extra_triples=(("W_edge", (1, 2, 3)),))
    return grid, phase_diagram(grid, seed, workers)


# -- finite-size scaling --------------------------------------------------------------

def finite_size_quench(sizes=FSS_SIZES, u: float = -15.0, v_i: float = 8.0, v_f: float = -5.0,
                       t_max: float = 15.0, dt: float = 0.1, df_stride: int = 5, seed: int = 0,
                       workers: int = 1) -> dict:
    """Z3 -> Z2 quench per size; returns ``{N: QuenchResult}``."""
    for N in sizes:
        if N > MAX_FSS_SITES:
            raise MemoryError(f"finite-size quench limited to N <= {MAX_FSS_SITES}, got {N}")
        if N % 6:
            raise ValueError(f"N={N} must be divisible by 6 so both density waves fit the ring")
    protocols = [QuenchProtocol(ModelSpec.uv(u, v_i), ModelSpec.uv(u, v_f), N, t_max=t_max,
                                dt=dt, observables=("D_F", "entropy", "energy"),
                                df_stride=df_stride, seed=seed) for N in sizes]
    results = run_pool(run_quench, protocols, workers)
    return dict(zip(sizes, results))


def fss_summary(results: dict) -> list[list[float]]:
    """Per size: min D_F, mean D_F and D_F oscillation amplitude (std)."""
    rows = []
    for N, res in results.items():
        d = res["D_F"][np.isfinite(res["D_F"])]
        rows.append([N, float(d.min()), float(d.mean()), float(d.std())])
    return rows
