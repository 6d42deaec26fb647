import numpy as np
import pytest
from hypothesis import given, strategies as st

from rydgauss.dynamics import (KrylovPropagator, QuenchProtocol, dense_evolve, evolve,
                               evolve_iter, fidelity_compare, run_quench, time_grid)
from rydgauss.hamiltonians import (ModelSpec, StateVector, build_effective_hamiltonian,
                                   build_longrange_hamiltonian, build_uv_hamiltonian, z3_state)
from rydgauss.hilbert import OBC, PBC, build_momentum_sector, enumerate_basis
from rydgauss.solver import full_spectrum


def random_state(space, rng):
    v = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
    return StateVector(v / np.linalg.norm(v), space)


@given(N=st.integers(4, 10), boundary=st.sampled_from([PBC, OBC]),
       u=st.floats(-15, 15), v=st.floats(-15, 15), t=st.floats(-5, 20), seed=st.integers(0, 99))
def test_krylov_matches_dense(N, boundary, u, v, t, seed):
    b = enumerate_basis(N, boundary)
    assert b.dim <= 200
    H = build_uv_hamiltonian(ModelSpec.uv(u, v, boundary=boundary), b)
    psi = random_state(b, np.random.default_rng(seed))
    out = evolve(H, psi, [t])[0]
    assert np.linalg.norm(out.amplitudes - dense_evolve(H, psi, t).amplitudes) < 1e-8


def test_full_and_local_reorthogonalisation_agree(rng):
    H = build_longrange_hamiltonian(ModelSpec.longrange(0.5, 0.3), 7)
    psi = random_state(H.space, rng).amplitudes
    a = KrylovPropagator(H).step(psi, 7.0)
    b = KrylovPropagator(H, full_reorth=True).step(psi, 7.0)
    ref = dense_evolve(H, StateVector(psi, H.space), 7.0).amplitudes
    assert np.linalg.norm(a - ref) < 1e-9 and np.linalg.norm(b - ref) < 1e-9


def test_eigenvector_acquires_phase_only():
    sec = build_momentum_sector(enumerate_basis(12, PBC))
    H = build_uv_hamiltonian(ModelSpec.uv(-3, 2), sec)
    eig = full_spectrum(H)
    psi = eig.state(5)
    for out in evolve(H, psi, [0.0, 3.3, 17.0]):
        assert abs(abs(psi.overlap(out)) - 1) < 1e-10


def test_zero_time_is_identity(rng):
    b = enumerate_basis(8, PBC)
    H = build_uv_hamiltonian(ModelSpec.uv(1, 1), b)
    psi = random_state(b, rng)
    assert np.array_equal(evolve(H, psi, [0.0])[0].amplitudes, psi.amplitudes)


def test_linearity_and_reversal(rng):
    b = enumerate_basis(8, PBC)
    H = build_uv_hamiltonian(ModelSpec.uv(-2, 3), b)
    p1, p2 = random_state(b, rng), random_state(b, rng)
    a, c = 0.3 - 0.2j, 1.1
    combo = StateVector(a * p1.amplitudes + c * p2.amplitudes, b)
    t = 4.2
    lhs = evolve(H, combo, [t])[0].amplitudes
    rhs = a * evolve(H, p1, [t])[0].amplitudes + c * evolve(H, p2, [t])[0].amplitudes
    assert np.linalg.norm(lhs - rhs) < 1e-8
    back = evolve(H, p1, [t, 0.0])[1]
    assert np.linalg.norm(back.amplitudes - p1.amplitudes) < 1e-8


def test_evolve_iter_matches_evolve(rng):
    b = enumerate_basis(9, PBC)
    H = build_uv_hamiltonian(ModelSpec.uv(-2, 3), b)
    psi = random_state(b, rng)
    times = time_grid(2.0, 0.5)
    a = [s.amplitudes for s in evolve(H, psi, times)]
    b_ = [s.amplitudes for _, s in evolve_iter(H, psi, times)]
    assert np.allclose(a, b_)


def test_time_grid():
    assert np.allclose(time_grid(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        time_grid(-1, 0.1)


def test_z3_is_nearly_stationary_in_z2_phase():
    sec = build_momentum_sector(enumerate_basis(12, PBC))
    H = build_uv_hamiltonian(ModelSpec.uv(-15, -5), sec)
    z3 = z3_state(12, sec)
    fid = [abs(z3.overlap(s)) ** 2 for _, s in evolve_iter(H, z3, time_grid(40, 0.5))]
    assert min(fid) >= 0.8


def test_fidelity_compare_identity():
    b = enumerate_basis(9, PBC)
    H = build_uv_hamiltonian(ModelSpec.uv(-2, 3), b)
    f = fidelity_compare(H, H, z3_state(9, b), time_grid(3, 0.5))
    assert np.allclose(f, 1)


def test_effective_tracks_exact_at_large_v():
    b = enumerate_basis(12, PBC)
    psi = z3_state(12, b)
    f = fidelity_compare(build_uv_hamiltonian(ModelSpec.uv(-15, -20), b),
                         build_effective_hamiltonian(ModelSpec.effective(15.0), b),
                         psi, time_grid(10, 0.1))
    assert f.min() >= 0.9


def test_protocol_validation():
    with pytest.raises(ValueError):
        QuenchProtocol(ModelSpec.uv(0, 0), ModelSpec.uv(0, 0, boundary=OBC), 6)
    with pytest.raises(ValueError):
        QuenchProtocol(ModelSpec.uv(0, 0), ModelSpec.uv(0, 0), 6, observables=("magic",))
    with pytest.raises(ValueError):
        QuenchProtocol(ModelSpec.uv(0, 0), ModelSpec.uv(0, 0), 6, t_max=-1)
    with pytest.raises(ValueError):
        QuenchProtocol(ModelSpec.uv(0, 0), ModelSpec.longrange(1, 0), 6)
    p = QuenchProtocol(ModelSpec.uv(0, 0), ModelSpec.uv(0, 0, omega=2.0), 6)
    assert p.t_max == 20.0 and p.dt == 0.05


def test_run_quench_conserves_and_records():
    p = QuenchProtocol(ModelSpec.uv(-15, 8), ModelSpec.uv(-15, -5), 12, t_max=4, dt=0.2,
                       observables=("entropy", "D_F", "wick", "correlator", "fidelity", "energy"),
                       df_stride=5)
    r = run_quench(p)
    assert r.norm_drift < 1e-9 and r.energy_drift < 1e-7
    assert r["fidelity"][0] == pytest.approx(1)
    assert np.isfinite(r["D_F"][::5]).all() and np.isnan(r["D_F"][1])
    assert len(r.rows()) == len(r.times) and r.columns()[0] == "t"
    assert r.metadata["dimension"] == 31


def test_run_quench_is_deterministic():
    p = QuenchProtocol(ModelSpec.uv(-15, -5), ModelSpec.uv(-15, 8), 9, t_max=2, dt=0.5)
    a, b = run_quench(p), run_quench(p)
    for k in a.values:
        assert np.array_equal(a[k], b[k])


def test_named_initial_state():
    p = QuenchProtocol(ModelSpec.uv(-15, 8), ModelSpec.uv(-15, -5), 12, t_max=1, dt=0.5,
                       initial_state="z3", observables=("fidelity",))
    assert run_quench(p)["fidelity"][0] == pytest.approx(1)
