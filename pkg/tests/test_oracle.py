import numpy as np
import pytest
import scipy.sparse
from scipy.sparse.linalg import eigsh

from fidscan.errors import CapacityError
from fidscan.model import ModelParams
from fidscan.oracle import (ExactState, exact_ground_state,
                            exact_half_chain_entropy, exact_overlap,
                            hamiltonian_operator)

from test_model import full_chain_hamiltonian

# Frozen reference values, computed once with the independent assemblies
# exercised in the cross-check tests below.
HEISENBERG_L4_ENERGY = -4.645751311064593  # dense diagonalization, 81x81
L8_PARAMS = dict(lam=0.5, d_aniso=0.63, h1=-1.0, length=8)
L8_ENERGY = -6.735357758367950
L8_ENTROPY = 1.318395075053082
L8_OVERLAP_631 = 0.999999788572070  # against d_aniso = 0.631


def test_two_site_singlet():
    state = exact_ground_state(ModelParams(lam=1.0, d_aniso=0.0, h1=0.0,
                                           length=2))
    assert state.energy == pytest.approx(-2.0, abs=1e-10)


def test_heisenberg_l4_energy_frozen():
    state = exact_ground_state(ModelParams(lam=1.0, d_aniso=0.0, h1=0.0,
                                           length=4))
    assert state.energy == pytest.approx(HEISENBERG_L4_ENERGY, abs=1e-9)


def test_heisenberg_l4_against_dense():
    params = ModelParams(lam=1.0, d_aniso=0.0, h1=0.0, length=4)
    dense = full_chain_hamiltonian(params)
    w = np.linalg.eigvalsh(dense)
    assert w[0] == pytest.approx(HEISENBERG_L4_ENERGY, abs=1e-12)


def test_l8_energy_frozen_and_shift_invert_crosscheck():
    params = ModelParams(**L8_PARAMS)
    state = exact_ground_state(params)
    assert state.energy == pytest.approx(L8_ENERGY, abs=1e-9)
    # independent route: sparse kron assembly plus shift-invert Lanczos
    sparse = scipy.sparse.csr_matrix(full_chain_hamiltonian(params))
    vals = eigsh(sparse, k=1, sigma=state.energy - 0.5, which="LM",
                 return_eigenvectors=False)
    assert vals[0] == pytest.approx(state.energy, abs=1e-9)


def test_matrix_free_matches_dense_assembly():
    params = ModelParams(lam=0.7, d_aniso=0.4, h1=-1.0, length=4)
    op = hamiltonian_operator(params)
    dense = full_chain_hamiltonian(params)
    rng = np.random.default_rng(3)
    for _ in range(3):
        v = rng.standard_normal(81)
        assert np.allclose(op.matvec(v), dense @ v, atol=1e-12)


def test_state_invariants():
    state = exact_ground_state(ModelParams(**L8_PARAMS))
    assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-12)
    op = hamiltonian_operator(state.params)
    residual = np.linalg.norm(op.matvec(state.amplitudes)
                              - state.energy * state.amplitudes)
    assert residual <= 1e-9
    # sign convention: largest-magnitude amplitude is positive
    assert state.amplitudes[np.argmax(np.abs(state.amplitudes))] > 0


def test_capacity_guard():
    with pytest.raises(CapacityError):
        exact_ground_state(ModelParams(lam=1.0, d_aniso=0.0, length=14))


class TestOverlap:

    def test_self_overlap(self):
        state = exact_ground_state(ModelParams(**L8_PARAMS))
        assert exact_overlap(state, state) == pytest.approx(1.0, abs=1e-12)

    def test_neighboring_parameters_frozen(self):
        a = exact_ground_state(ModelParams(**L8_PARAMS))
        b = exact_ground_state(ModelParams(lam=0.5, d_aniso=0.631, h1=-1.0,
                                           length=8))
        f = exact_overlap(a, b)
        assert 0.0 < f < 1.0
        assert f == pytest.approx(L8_OVERLAP_631, abs=1e-9)

    def test_symmetry(self):
        a = exact_ground_state(ModelParams(**L8_PARAMS))
        b = exact_ground_state(ModelParams(lam=0.5, d_aniso=0.7, h1=-1.0,
                                           length=8))
        assert exact_overlap(a, b) == pytest.approx(exact_overlap(b, a),
                                                    abs=1e-14)

    def test_orthogonal_sectors(self):
        # lam = -2, D = -3 polarizes every site; h1 picks all-(-1), total
        # S^z = -L, while the large-D state sits in the S^z = 0 sector.
        polarized = exact_ground_state(ModelParams(lam=-2.0, d_aniso=-3.0,
                                                   h1=-1.0, length=4))
        large_d = exact_ground_state(ModelParams(lam=1.0, d_aniso=3.0,
                                                 h1=-1.0, length=4))
        assert exact_overlap(polarized, large_d) == pytest.approx(0.0,
                                                                  abs=1e-12)

    def test_length_mismatch(self):
        a = exact_ground_state(ModelParams(lam=1.0, d_aniso=0.0, length=4))
        b = exact_ground_state(ModelParams(lam=1.0, d_aniso=0.0, length=6))
        with pytest.raises(ValueError):
            exact_overlap(a, b)


class TestEntropy:

    def test_product_state(self):
        params = ModelParams(lam=1.0, d_aniso=0.0, length=4)
        amplitudes = np.zeros(81)
        amplitudes[1 * 27 + 1 * 9 + 1 * 3 + 1] = 1.0  # |0,0,0,0>
        state = ExactState(params=params, energy=0.0, amplitudes=amplitudes)
        assert exact_half_chain_entropy(state) == 0.0

    def test_two_site_singlet_entropy(self):
        state = exact_ground_state(ModelParams(lam=1.0, d_aniso=0.0, h1=0.0,
                                               length=2))
        assert exact_half_chain_entropy(state) == pytest.approx(np.log2(3),
                                                                abs=1e-10)

    def test_l8_entropy_frozen(self):
        state = exact_ground_state(ModelParams(**L8_PARAMS))
        assert exact_half_chain_entropy(state) == pytest.approx(L8_ENTROPY,
                                                                abs=1e-9)

    def test_entropy_bounds(self):
        for d_aniso in (0.0, 0.63, 2.0):
            state = exact_ground_state(ModelParams(lam=0.5, d_aniso=d_aniso,
                                                   h1=-1.0, length=6))
            entropy = exact_half_chain_entropy(state)
            assert 0.0 <= entropy <= 3 * np.log2(3)
