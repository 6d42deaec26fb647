import numpy as np
import pytest

import rydgauss.solver as solver
from rydgauss.hamiltonians import ModelSpec, build_uv_hamiltonian, z2_state, z3_state
from rydgauss.hilbert import PBC, build_momentum_sector, enumerate_basis
from rydgauss.solver import (DimensionError, full_spectrum, ground_state, overlap_profile)


def test_three_site_spectrum():
    H = build_uv_hamiltonian(ModelSpec.uv(0, 0), enumerate_basis(3, PBC))
    eig = full_spectrum(H)
    assert np.allclose(eig.energies, [-np.sqrt(3), 0, 0, np.sqrt(3)])
    assert len(eig) == 4 and eig.complete


def test_trace_and_residuals():
    sec = build_momentum_sector(enumerate_basis(15, PBC))
    H = build_uv_hamiltonian(ModelSpec.uv(-3, 2), sec)
    eig = full_spectrum(H)
    assert eig.energies.sum() == pytest.approx(H.matrix.diagonal().sum(), abs=1e-8)
    R = H.matrix @ eig.vectors - eig.vectors * eig.energies
    assert np.max(np.linalg.norm(R, axis=0)) < 1e-9
    assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(len(eig)), atol=1e-9)
    assert np.all(np.diff(eig.energies) >= 0)


def test_classical_limit_ground_energy():
    H = build_uv_hamiltonian(ModelSpec.uv(-1, 0, omega=0.0), enumerate_basis(4, PBC))
    e, psi = ground_state(H)
    assert e == pytest.approx(-2)
    assert psi.norm == pytest.approx(1)


def test_sign_convention():
    H = build_uv_hamiltonian(ModelSpec.uv(-2, 1), enumerate_basis(8, PBC))
    _, psi = ground_state(H)
    k = np.argmax(np.abs(psi.amplitudes))
    assert psi.amplitudes[k].real > 0 and psi.amplitudes[k].imag == 0


def test_iterative_matches_dense():
    b = enumerate_basis(14, PBC)  # 843 states, above the dense ground-state cut
    H = build_uv_hamiltonian(ModelSpec.uv(-4, 3), b)
    assert H.dim > solver.DENSE_GROUND_STATE_LIMIT
    e_it, psi = ground_state(H)
    e_dense = np.linalg.eigvalsh(H.toarray())[0]
    assert e_it == pytest.approx(e_dense, abs=1e-8)
    r = H.matrix @ psi.amplitudes - e_it * psi.amplitudes
    assert np.linalg.norm(r) < 1e-8


def test_dimension_guard(monkeypatch):
    monkeypatch.setattr(solver, "DENSE_LIMIT", 10)
    with pytest.raises(DimensionError):
        full_spectrum(build_uv_hamiltonian(ModelSpec.uv(0, 0), enumerate_basis(8, PBC)))


def test_overlap_profile_basic():
    sec = build_momentum_sector(enumerate_basis(12, PBC))
    eig = full_spectrum(build_uv_hamiltonian(ModelSpec.uv(-15, -5), sec))
    prof = overlap_profile(z3_state(12, sec), eig)
    assert prof.weights.sum() == pytest.approx(1, abs=1e-9)
    assert np.all(np.diff(prof.energies) >= 0)
    one = overlap_profile(eig.state(3), eig)
    assert one.weights[3] == pytest.approx(1) and one.weights.sum() == pytest.approx(1)
    assert len(prof.gaps(3)) == 3


@pytest.fixture(scope="module")
def n18():
    return build_momentum_sector(enumerate_basis(18, PBC))


def test_ground_state_supports(n18):
    _, gs = ground_state(build_uv_hamiltonian(ModelSpec.uv(-15, 8), n18))
    assert abs(gs.overlap(z3_state(18, n18))) ** 2 >= 0.97
    _, gs = ground_state(build_uv_hamiltonian(ModelSpec.uv(-15, -5), n18))
    assert abs(gs.overlap(z2_state(18, n18))) ** 2 >= 0.97


def test_z2_spreads_over_eigenstates(n18):
    eig = full_spectrum(build_uv_hamiltonian(ModelSpec.uv(-15, 8), n18))
    assert overlap_profile(z2_state(18, n18), eig).weights.max() < 0.5


def test_z3_dominant_energy_v_independent(n18):
    for omega, tol in ((0.0, 1e-6), (1.0, 0.5)):
        energies = []
        for V in (-5, 1, 8):
            eig = full_spectrum(build_uv_hamiltonian(ModelSpec.uv(-15, V, omega=omega), n18))
            prof = overlap_profile(z3_state(18, n18), eig)
            energies.append(prof.energies[prof.dominant])
        assert np.ptp(energies) < tol
