import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rydgauss.gaussianity import (DF_CONJECTURED_MAX, ConjectureBoundWarning, analyse_state,
                                  default_mode_count, default_triple, entropy,
                                  free_many_body_spectrum, interaction_distance,
                                  interaction_distance_grid, reduced_density_matrix,
                                  schmidt_matrix, site_density_matrix, wick_terms,
                                  wick_terms_from_rdm, wick_violation)
from rydgauss.hamiltonians import StateVector, product_state, z3_state
from rydgauss.hilbert import OBC, PBC, build_momentum_sector, enumerate_basis, unconstrained_basis


def three_qubit(amps: dict) -> StateVector:
    b = unconstrained_basis(3)
    v = np.zeros(8, dtype=complex)
    for bits, a in amps.items():
        # bits written site1 site2 site3
        v[sum(int(c) << k for k, c in enumerate(bits))] = a
    return StateVector(v / np.linalg.norm(v), b)


def test_rdm_normalised_and_entropy_bounds(rng):
    b = enumerate_basis(10, PBC)
    v = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    ent = reduced_density_matrix(StateVector(v / np.linalg.norm(v), b))
    assert ent.probabilities.sum() == pytest.approx(1, abs=1e-10)
    assert np.all(np.diff(ent.probabilities) <= 1e-15)
    rank = np.sum(ent.probabilities > 1e-14)
    assert 0 <= ent.entropy <= np.log(rank) + 1e-12


def test_product_state_has_zero_entropy():
    b = enumerate_basis(8, PBC)
    assert reduced_density_matrix(product_state([0b01001001], b)).entropy == pytest.approx(0)


def test_z3_cat_entropy_ln3():
    b = enumerate_basis(12, PBC)
    assert reduced_density_matrix(z3_state(12, b)).entropy == pytest.approx(np.log(3))


def test_sector_input_needs_embedding():
    sec = build_momentum_sector(enumerate_basis(12, PBC))
    psi = z3_state(12, sec)
    with pytest.raises(ValueError):
        schmidt_matrix(psi.amplitudes, 6, sec)
    with pytest.raises(ValueError):
        schmidt_matrix(psi.amplitudes, 6)
    assert reduced_density_matrix(psi).entropy == pytest.approx(np.log(3))


def test_free_spectrum_normalised():
    p = free_many_body_spectrum([0.3, -1.0, 2.5])
    assert p.sum() == pytest.approx(1) and len(p) == 8


def test_default_mode_count():
    assert default_mode_count(2) == 2
    assert default_mode_count(89) == 8
    assert default_mode_count(10**6) == 10


@given(p=st.floats(0.0, 1.0))
def test_two_level_spectra_are_free(p):
    assert interaction_distance([p, 1 - p])[0] < 1e-6


@given(eps=st.lists(st.floats(-6, 6), min_size=1, max_size=3))
def test_free_spectra_have_zero_distance(eps):
    d, _ = interaction_distance(free_many_body_spectrum(eps), M=len(eps), n_starts=8)
    assert d < 1e-6


@given(levels=st.lists(st.floats(0.01, 1), min_size=2, max_size=6), pad=st.integers(1, 5))
def test_invariant_under_zero_padding(levels, pad):
    p = np.array(levels) / sum(levels)
    a = interaction_distance(p, M=3, n_starts=8, warn=False)[0]
    b = interaction_distance(np.concatenate([p, np.zeros(pad)]), M=3, n_starts=8, warn=False)[0]
    assert a == pytest.approx(b, abs=1e-12)


def test_optimizer_matches_grid_oracle(rng):
    for levels, M in ((3, 1), (4, 2), (6, 2), (5, 3), (8, 3)):
        p = rng.random(levels)
        p /= p.sum()
        d_opt = interaction_distance(p, M=M, warn=False)[0]
        d_grid = interaction_distance_grid(p, M)[0]
        assert abs(d_opt - d_grid) <= 1e-3


def test_flat_three_level_spectrum():
    d, _ = interaction_distance([1 / 3] * 3)
    assert d == pytest.approx(interaction_distance_grid([1 / 3] * 3, 2)[0], abs=1e-4)
    assert d == pytest.approx(1 / 6, abs=1e-6)
    assert d < DF_CONJECTURED_MAX


def test_warning_above_bound():
    with pytest.warns(ConjectureBoundWarning):
        interaction_distance([1 / 3] * 3, M=1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        interaction_distance([0.5, 0.3, 0.2])


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        interaction_distance([0.0, 0.0])
    with pytest.raises(ValueError):
        interaction_distance([0.5, 0.5], M=0)


def test_deterministic_given_seed(rng):
    p = rng.random(20)
    p /= p.sum()
    d1, e1 = interaction_distance(p, seed=3)
    d2, e2 = interaction_distance(p, seed=3)
    assert d1 == d2 and np.array_equal(e1, e2)


# -- Wick -------------------------------------------------------------------

def test_ghz_has_no_violation():
    psi = three_qubit({"000": 1, "111": 1})
    terms = wick_terms(psi)
    for k in ("first", "second", "third", "fourth"):
        assert abs(terms[k]) < 1e-12
    assert wick_violation(psi) < 1e-10


def test_w_state_value():
    psi = three_qubit({"100": 1, "010": 1, "001": 1})
    assert wick_violation(psi) == pytest.approx(2 / 9, abs=1e-10)
    assert wick_terms(psi)["W"] == pytest.approx(2 / 9, abs=1e-10)


def test_first_term_vanishes_on_constrained_states():
    b = enumerate_basis(6, PBC)
    for s in b.states:
        psi = product_state([int(s)], b)
        for i in range(1, 5):
            assert wick_terms(psi, (i, i + 1, i + 2))["first"] == 0


@given(seed=st.integers(0, 10**6), N=st.integers(5, 10), boundary=st.sampled_from([PBC, OBC]))
def test_two_wick_paths_agree(seed, N, boundary):
    b = enumerate_basis(N, boundary)
    r = np.random.default_rng(seed)
    v = r.standard_normal(b.dim) + 1j * r.standard_normal(b.dim)
    psi = StateVector(v / np.linalg.norm(v), b)
    i = int(r.integers(1, N - 1))
    t = (i, i + 1, i + 2)
    assert abs(wick_terms(psi, t)["W"] - wick_violation(psi, t)) < 1e-10


@given(N=st.integers(5, 10))
def test_product_states_have_zero_w(N):
    b = enumerate_basis(N, OBC)
    for s in b.states[:: max(1, b.dim // 20)]:
        assert wick_violation(product_state([int(s)], b), (2, 3, 4)) < 1e-10


def test_rdm_input_and_errors():
    psi = three_qubit({"100": 1, "010": 1, "001": 1})
    rho = site_density_matrix(psi, (1, 2, 3))
    assert np.trace(rho) == pytest.approx(1)
    assert wick_violation(rho) == pytest.approx(2 / 9)
    assert wick_terms_from_rdm(rho)["W"] == pytest.approx(2 / 9)
    with pytest.raises(ValueError):
        wick_violation(np.eye(4))
    with pytest.raises(ValueError):
        wick_violation(psi, (1, 3, 4))
    with pytest.raises(ValueError):
        wick_violation(psi, (2, 3, 4))


def test_default_triple():
    assert default_triple(15, OBC) == (7, 8, 9)
    assert default_triple(18, PBC) == (1, 2, 3)


def test_entropy_helper():
    assert entropy([0.5, 0.5, 0.0]) == pytest.approx(np.log(2))


def test_analyse_state():
    sec = build_momentum_sector(enumerate_basis(12, PBC))
    rep = analyse_state(z3_state(12, sec), n_starts=8)
    assert rep.entropy == pytest.approx(np.log(3))
    assert rep.interaction_distance == pytest.approx(1 / 6, abs=1e-6)
    assert rep.wick < 1e-10
