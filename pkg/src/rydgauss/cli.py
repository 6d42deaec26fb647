"""Command-line entry point: ``rydgauss <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import experiments as ex
from .dynamics import INITIAL_STATES, OBSERVABLES, QuenchProtocol, run_quench
from .gaussianity import DEFAULT_STARTS, analyse_state, default_triple
from .hamiltonians import (DEFAULT_IMPURITY_SITE, VARIANTS, ModelSpec, StateVector,
                           build_hamiltonian, z2_state, z3_state)
from .hilbert import OBC, PBC, build_momentum_sector, enumerate_basis
from .solver import full_spectrum, ground_state, overlap_profile
from .spectral import TimeSeries, peak_match, power_spectrum


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_model(p: argparse.ArgumentParser, suffix: str = "", required_u: bool = False):
    tag = f"-{suffix}" if suffix else ""
    p.add_argument(f"--model{tag}", help="ModelSpec JSON file (overrides inline flags)")
    p.add_argument(f"--u{tag}", type=float, help="chemical potential U")
    p.add_argument(f"--v{tag}", type=float, help="interaction V")
    p.add_argument(f"--omega{tag}", type=float, help="Rabi frequency")


def _model(args, suffix: str = "", fallback: ModelSpec | None = None) -> ModelSpec:
    key = f"_{suffix}" if suffix else ""
    path = getattr(args, f"model{key}")
    if path:
        with open(path) as fh:
            return ModelSpec.from_json(fh.read())
    base = fallback.to_dict() if fallback is not None else {
        "variant": args.variant, "boundary": args.boundary, "omega": 1.0, "u": 0.0,
        "v": 1.0 if args.variant == "LONGRANGE" else 0.0,
    }
    for name in ("u", "v", "omega"):
        val = getattr(args, f"{name}{key}")
        if val is not None:
            base[name] = val
    if fallback is None and getattr(args, "impurity", None):
        base["impurities"] = [[int(s), float(e)] for s, e in
                              (item.split(":") for item in args.impurity)]
    return ModelSpec.from_dict(base)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--N", type=int, default=12, help="number of sites")
    p.add_argument("--boundary", choices=[PBC, OBC], default=PBC)
    p.add_argument("--variant", choices=VARIANTS, default="UV_PXP")


def _finish(args, name: str, spec: dict, tables: dict, extra: dict | None = None) -> None:
    paths = {label: ex.write_table(args.out, label, cols, rows, args.format)
             for label, (cols, rows) in tables.items()}
    ex.write_manifest(args.out, name, spec, args.seed, paths, extra)
    for path in paths.values():
        print(path)


# -- subcommands -------------------------------------------------------------

def cmd_basis(args) -> int:
    basis = enumerate_basis(args.N, args.boundary)
    rows = [[i, int(s), basis.format_state(s)] for i, s in enumerate(basis.states)]
    info = {"N": args.N, "boundary": args.boundary, "dimension": basis.dim}
    if args.boundary == PBC:
        sector = build_momentum_sector(basis)
        info["k0_dimension"] = sector.dim
    print(json.dumps(info))
    _finish(args, "basis", info, {"basis": (["index", "config", "bits"], rows)})
    return 0


def _initial(name: str, N: int, space, state_file: str | None) -> StateVector:
    if state_file:
        amps = np.load(state_file)
        return StateVector(amps.astype(complex), space).normalized()
    return z2_state(N, space) if name == "z2" else z3_state(N, space)


def _space(spec: ModelSpec, N: int, sector: bool):
    return ex.model_space(spec, N, use_sector=sector)


def cmd_spectrum(args) -> int:
    spec = _model(args)
    space = _space(spec, args.N, not args.full_basis)
    eig = full_spectrum(build_hamiltonian(spec, space))
    psi = _initial(args.initial, args.N, space, args.state)
    prof = overlap_profile(psi, eig)
    rows = [[j, e, w] for j, (e, w) in enumerate(zip(prof.energies, prof.weights))]
    extra = {"dominant": {"index": prof.dominant, "energy": float(prof.energies[prof.dominant]),
                          "overlap": float(prof.weights[prof.dominant])},
             "gaps": prof.gaps(args.gaps).tolist()}
    print(json.dumps(extra))
    _finish(args, "spectrum", {"model": spec.to_dict(), "N": args.N, "initial": args.initial},
            {"spectrum": (["index", "energy", "overlap_with_initial"], rows)}, extra)
    return 0


def cmd_quench(args) -> int:
    spec_i = _model(args, "i")
    spec_f = _model(args, "f", fallback=spec_i)
    p = QuenchProtocol(spec_i, spec_f, args.N, t_max=args.tmax, dt=args.dt,
                       observables=tuple(args.observables.split(",")),
                       initial_state=args.initial, correlator_site=args.site,
                       df_stride=args.df_stride, df_starts=args.starts, modes=args.modes,
                       seed=args.seed)
    res = run_quench(p)
    extra = {"norm_drift": res.norm_drift, "energy_drift": res.energy_drift,
             "dimension": res.metadata["dimension"]}
    _finish(args, "quench", p.to_dict(), {"quench": (res.columns(), res.rows())}, extra)
    return 0


def cmd_gaussianity(args) -> int:
    spec = _model(args)
    space = _space(spec, args.N, not args.state)
    if args.state:
        from .hilbert import full_basis
        psi = StateVector(np.load(args.state).astype(complex), full_basis(space)).normalized()
    else:
        psi = ground_state(build_hamiltonian(spec, space))[1]
    triple = tuple(_ints(args.triple)) if args.triple else default_triple(args.N, spec.boundary)
    rep = analyse_state(psi, triple=triple, M=args.modes, n_starts=args.starts, seed=args.seed)
    out = {"S": rep.entropy, "W": rep.wick, "D_F": rep.interaction_distance,
           "eps": rep.eps.tolist(), "triple": list(triple), "class": ex.classify(rep.wick)}
    print(json.dumps(out))
    _finish(args, "gaussianity", {"model": spec.to_dict(), "N": args.N},
            {"gaussianity": (["S", "W", "D_F", "class"],
                             [[rep.entropy, rep.wick, rep.interaction_distance, out["class"]]])},
            {"eps": out["eps"], "triple": out["triple"]})
    return 0


def cmd_powerspec(args) -> int:
    with open(args.input) as fh:
        recs = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in recs])
    y = np.array([float(r[args.column]) for r in recs])
    ok = np.isfinite(y)
    spec = power_spectrum(TimeSeries(t[ok], y[ok], args.column), window=args.window)
    gaps = _floats(args.gaps) if args.gaps else [spec.dominant()]
    report = peak_match(spec, gaps)
    print(json.dumps(report.to_dict()))
    _finish(args, "powerspec", {"input": args.input, "column": args.column, "window": args.window},
            {"powerspec": (["omega", "power"], [[w, p] for w, p in zip(spec.omega, spec.power)])},
            {"peak_match": report.to_dict(), "dominant": spec.dominant()})
    return 0


def _scan_outputs(args, name, grid, records):
    cols, rows = ex.scan_table(grid, records)
    _finish(args, name, grid.to_dict(), {name: (cols, rows)},
            {"failed": sum(not r.ok for r in records),
             "wall_time": sum(r.wall_time for r in records)})
    return 0 if all(r.ok for r in records) else 1


def cmd_phase_diagram(args) -> int:
    base = _model(args)
    lo, hi, n = args.u_range
    vlo, vhi, vn = args.v_range
    grid = ex.ScanGrid(base, args.N, x=("u", lo, hi, int(n)), y=("v", vlo, vhi, int(vn)),
                       metrics=tuple(args.metrics.split(",")), n_starts=args.starts,
                       modes=args.modes)
    return _scan_outputs(args, "phase_diagram", grid, ex.phase_diagram(grid, args.seed, args.workers))


def cmd_obc(args) -> int:
    lo, hi, n = args.u_range
    vlo, vhi, vn = args.v_range
    grid, records = ex.obc_diagram(args.N, ("u", lo, hi, int(n)), ("v", vlo, vhi, int(vn)),
                                   args.starts, args.seed, args.workers)
    return _scan_outputs(args, "obc_diagram", grid, records)


def cmd_impurity(args) -> int:
    records, cols, rows = ex.impurity_sweep(
        tuple(args.point), _floats(args.eps), _ints(args.sizes), tuple(args.quench_to),
        args.site, args.tmax, args.dt, args.df_stride, args.seed, args.workers)
    spec = {"point": args.point, "eps": _floats(args.eps), "sizes": _ints(args.sizes),
            "quench_to": args.quench_to, "site": args.site, "tmax": args.tmax, "dt": args.dt}
    _finish(args, "impurity", spec, {"impurity": (cols, rows)})
    return 0


def cmd_longrange(args) -> int:
    cfg = ex.LongRangeConfig(N=args.N, omega=args.omega, u_z3=args.u_z3, u_z2=args.u_z2,
                             boundary=args.boundary, t_max=args.tmax, dt=args.dt,
                             ensemble_t_max=args.ensemble_tmax, ensemble_dt=args.dt,
                             realizations=args.realizations)
    tables = {}
    if args.diagram:
        grid, records = ex.longrange_diagram(cfg, tuple(args.omega_range), tuple(args.u_range),
                                             seed=args.seed, workers=args.workers)
        tables["longrange_diagram"] = ex.scan_table(grid, records)
    modes = [m for m in args.ensembles.split(",") if m]
    suite = ex.longrange_suite(cfg, args.seed, args.workers, modes)
    for name, res in suite.items():
        tables[f"longrange_{name}"] = res.table() if hasattr(res, "table") else (res.columns(), res.rows())
    _finish(args, "longrange", cfg.to_dict(), tables)
    return 0


def cmd_fss(args) -> int:
    results = ex.finite_size_quench(_ints(args.sizes), t_max=args.tmax, dt=args.dt,
                                    df_stride=args.df_stride, seed=args.seed, workers=args.workers)
    tables = {f"fss_N{N}": (r.columns(), r.rows()) for N, r in results.items()}
    tables["fss_summary"] = (["N", "min_D_F", "mean_D_F", "std_D_F"], ex.fss_summary(results))
    _finish(args, "fss", {"sizes": _ints(args.sizes), "tmax": args.tmax, "dt": args.dt}, tables)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydgauss",
        description="Gaussianity of ground states and quenches in constrained Rydberg chains.")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    parser.add_argument("--workers", type=int, default=1, help="worker processes")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="enumerate a constrained basis")
    _common(p)
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("spectrum", help="full spectrum and overlaps with an initial state")
    _common(p)
    _add_model(p)
    p.add_argument("--initial", choices=["z2", "z3", "file"], default="z3")
    p.add_argument("--state", help=".npy amplitudes when --initial file")
    p.add_argument("--full-basis", action="store_true", help="skip the k=0 reduction")
    p.add_argument("--gaps", type=int, default=3, help="number of overlap-ranked gaps")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("quench", help="sudden quench time series")
    _common(p)
    _add_model(p, "i")
    _add_model(p, "f")
    p.add_argument("--initial", choices=INITIAL_STATES, default="ground")
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--observables", default="entropy,D_F,wick,energy",
                   help=f"comma list from {','.join(OBSERVABLES)}")
    p.add_argument("--site", type=int, default=1, help="correlator site i")
    p.add_argument("--df-stride", type=int, default=1)
    p.add_argument("--starts", type=int, default=8, help="D_F starts per time")
    p.add_argument("--modes", type=int)
    p.set_defaults(func=cmd_quench)

    p = sub.add_parser("gaussianity", help="S, W and D_F of a ground state or state file")
    _common(p)
    _add_model(p)
    p.add_argument("--impurity", action="append", help="site:strength, repeatable")
    p.add_argument("--state", help=".npy amplitudes over the full basis")
    p.add_argument("--modes", type=int)
    p.add_argument("--triple", help="three consecutive sites, e.g. 7,8,9")
    p.add_argument("--starts", type=int, default=DEFAULT_STARTS)
    p.set_defaults(func=cmd_gaussianity)

    p = sub.add_parser("powerspec", help="periodogram of a quench CSV column")
    p.add_argument("input", help="quench CSV")
    p.add_argument("--column", default="correlator")
    p.add_argument("--gaps", help="comma list of gap frequencies to match")
    p.add_argument("--window", choices=["rectangular", "hann"], default="rectangular")
    p.set_defaults(func=cmd_powerspec)

    for name, func, default_n, help_text in (
            ("phase-diagram", cmd_phase_diagram, 18, "ground-state U-V scan"),
            ("obc", cmd_obc, 15, "open-chain U-V scan with bulk Wick sites")):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(N=default_n, func=func)
        if name == "phase-diagram":
            _add_model(p)
            p.add_argument("--metrics", default="D_F,W,S")
            p.add_argument("--modes", type=int)
        p.add_argument("--u-range", type=float, nargs=3, default=[-20.0, 5.0, 26],
                       metavar=("MIN", "MAX", "STEPS"))
        p.add_argument("--v-range", type=float, nargs=3, default=[-10.0, 15.0, 26],
                       metavar=("MIN", "MAX", "STEPS"))
        p.add_argument("--starts", type=int, default=DEFAULT_STARTS)

    p = sub.add_parser("impurity", help="impurity-strength sweep")
    p.add_argument("--point", type=float, nargs=2, default=[-4.0, 10.5], metavar=("U", "V"))
    p.add_argument("--quench-to", type=float, nargs=2, default=[-4.0, -6.0], metavar=("U", "V"))
    p.add_argument("--eps", default="0,1e-4,1e-3,1e-2,1e-1")
    p.add_argument("--sizes", default="12")
    p.add_argument("--site", type=int, default=DEFAULT_IMPURITY_SITE)
    p.add_argument("--tmax", type=float, default=40.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--df-stride", type=int, default=5)
    p.set_defaults(func=cmd_impurity)

    d = ex.LongRangeConfig()
    p = sub.add_parser("longrange", help="long-range model quenches and disorder ensembles")
    p.add_argument("--N", type=int, default=d.N)
    p.add_argument("--boundary", choices=[PBC, OBC], default=d.boundary)
    p.add_argument("--omega", type=float, default=d.omega)
    p.add_argument("--u-z3", type=float, default=d.u_z3)
    p.add_argument("--u-z2", type=float, default=d.u_z2)
    p.add_argument("--tmax", type=float, default=d.t_max)
    p.add_argument("--ensemble-tmax", type=float, default=d.ensemble_t_max)
    p.add_argument("--dt", type=float, default=d.dt)
    p.add_argument("--realizations", type=int, default=d.realizations)
    p.add_argument("--ensembles", default="ground,z3",
                   help="initial-state modes for the disordered quench")
    p.add_argument("--diagram", action="store_true", help="also scan the clean (Omega, U) plane")
    p.add_argument("--omega-range", type=float, nargs=3, default=[0.002, 0.012, 6])
    p.add_argument("--u-range", type=float, nargs=3, default=[0.0, 0.1, 6])
    p.set_defaults(func=cmd_longrange)

    p = sub.add_parser("fss", help="finite-size Z3 -> Z2 quench")
    p.add_argument("--sizes", default="18,24")
    p.add_argument("--tmax", type=float, default=15.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--df-stride", type=int, default=5)
    p.set_defaults(func=cmd_fss)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, MemoryError, OSError) as exc:
        print(f"rydgauss {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
