"""Lattice core: indexing, coin, stepping, dense oracle equivalence."""

import numpy as np
import pytest

from latticewave.lattice import (
    LatticeError,
    LatticeSpec,
    MarkedSet,
    WaveState,
    basis_state,
    build_lattice,
    channel_flat,
    channel_unflat,
    coin_matrix,
    dense_operator,
    marked_set,
    state_from_flat,
    step_perturbed,
    step_unperturbed,
    symmetric_vertex_state,
    translate_state,
    uniform_state,
    vertex_flat,
    vertex_probabilities,
    vertex_probability,
    vertex_unflat,
)
from latticewave.selftest import oracle_dense_walk

from helpers import random_unit_state


class TestLatticeSpec:
    def test_sizes(self):
        assert build_lattice(2, 31).state_dim == 4 * 961 == 3844
        assert build_lattice(1, 2).state_dim == 4
        assert build_lattice(3, 5).state_dim == 750

    def test_invalid(self):
        with pytest.raises(LatticeError):
            build_lattice(0, 5)
        with pytest.raises(LatticeError):
            build_lattice(2, 1)
        with pytest.raises(LatticeError):
            build_lattice(2, -3)

    def test_overflow(self):
        with pytest.raises(LatticeError, match="overflow"):
            build_lattice(20, 1000)


class TestIndexing:
    def test_channel_bijection(self):
        for d in (1, 2, 3):
            seen = set()
            for axis in range(d):
                for sign in (+1, -1):
                    flat = channel_flat(axis, sign, d)
                    assert 0 <= flat < 2 * d
                    assert channel_unflat(flat, d) == (axis, sign)
                    seen.add(flat)
            assert seen == set(range(2 * d))

    def test_vertex_bijection(self):
        spec = build_lattice(3, 4)
        flats = [vertex_flat(v, spec) for v in np.ndindex(spec.grid_shape)]
        assert flats == list(range(spec.site_count))
        for f in (0, 17, 63):
            assert vertex_flat(vertex_unflat(f, spec), spec) == f

    def test_vertex_range_error(self):
        spec = build_lattice(2, 31)
        with pytest.raises(LatticeError, match=r"out of range \[0, 31\)"):
            vertex_flat((31, 0), spec)

    def test_flat_layout_matches_state(self):
        # channels of one vertex are contiguous in the flattened state
        spec = build_lattice(2, 3)
        st = basis_state(spec, axis=1, sign=-1, vertex=(2, 1))
        flat = st.to_flat()
        expect = vertex_flat((2, 1), spec) * 4 + channel_flat(1, -1, 2)
        assert flat[expect] == 1.0
        assert np.count_nonzero(flat) == 1


class TestCoin:
    def test_d1(self):
        assert np.array_equal(coin_matrix(1), np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_d2(self):
        sigma = coin_matrix(2)
        assert np.allclose(np.diag(sigma), -0.5)
        off = sigma - np.diag(np.diag(sigma))
        assert np.allclose(off + np.eye(4) * 0.5, 0.5)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_involution_and_symmetry(self, d):
        sigma = coin_matrix(d)
        assert np.abs(sigma @ sigma - np.eye(2 * d)).max() < 1e-14
        assert np.array_equal(sigma, sigma.T)
        s = np.full(2 * d, 1 / np.sqrt(2 * d))
        assert np.abs(sigma @ s - s).max() < 1e-14


class TestMarkedSet:
    def test_duplicates_rejected(self):
        with pytest.raises(LatticeError, match="duplicate"):
            MarkedSet((((1, 1), 1.0), ((1, 1), 0.5)))

    def test_lambda_range(self):
        with pytest.raises(LatticeError, match="lambda"):
            MarkedSet((((0, 0), 2.5),))

    def test_count_cap(self):
        spec = build_lattice(1, 2)   # N = 4, cap = 1 mark
        marks = MarkedSet((((0,), 1.0), ((1,), 1.0)))
        with pytest.raises(LatticeError, match="cap"):
            marks.validate_for(spec)

    def test_with_lambda(self):
        marks = marked_set([(0, 0), (1, 2)], [0.5, 1.5])
        assert marks.with_lambda(1.0).lambdas == (1.0, 1.0)
        assert marks.with_lambda(1.0).vertices == marks.vertices


class TestWaveState:
    def test_unit_policy_validates_norm(self):
        spec = build_lattice(1, 4)
        with pytest.raises(LatticeError, match="norm"):
            WaveState(np.ones(spec.state_shape, dtype=complex))

    def test_from_flat_dimension(self):
        spec = build_lattice(2, 3)
        with pytest.raises(LatticeError, match="expected N"):
            state_from_flat(np.ones(7), spec)

    def test_vertex_probabilities_uniform(self):
        spec = build_lattice(2, 5)
        p = vertex_probabilities(uniform_state(spec), spec)
        assert np.allclose(p, 1.0 / spec.site_count, atol=1e-15)
        assert abs(p.sum() - 1.0) < 1e-12

    def test_vertex_probabilities_basis(self):
        spec = build_lattice(2, 4)
        st = basis_state(spec, 0, +1, (1, 3))
        p = vertex_probabilities(st, spec)
        assert p[vertex_flat((1, 3), spec)] == 1.0
        assert p.sum() == 1.0

    def test_probability_sum_equals_norm(self):
        spec = build_lattice(3, 3)
        rng = np.random.default_rng(0)
        st = random_unit_state(spec, rng)
        st.data *= 0.7
        st.norm_policy = "free"
        p = vertex_probabilities(st, spec)
        assert abs(p.sum() - st.norm() ** 2) < 1e-12


class TestStepping:
    def test_norm_preserved(self):
        spec = build_lattice(2, 7)
        rng = np.random.default_rng(1)
        st = random_unit_state(spec, rng)
        out = step_unperturbed(st, spec)
        assert abs(out.norm() - 1.0) < 1e-12

    def test_uniform_fixed_point(self):
        spec = build_lattice(2, 6)
        phi0 = uniform_state(spec)
        out = step_unperturbed(phi0, spec)
        assert np.abs(out.data - phi0.data).max() < 1e-12

    def test_translation_covariance_exact(self):
        spec = build_lattice(2, 5)
        rng = np.random.default_rng(2)
        st = random_unit_state(spec, rng)
        shifted_then = translate_state(step_unperturbed(st, spec), (1, 3))
        then_shifted = step_unperturbed(translate_state(st, (1, 3)), spec)
        assert np.array_equal(shifted_then.data, then_shifted.data)

    def test_dimension_mismatch(self):
        spec = build_lattice(2, 5)
        other = build_lattice(2, 4)
        st = uniform_state(other)
        with pytest.raises(LatticeError, match="does not match"):
            step_unperturbed(st, spec)

    @pytest.mark.parametrize("lam", [0.0, 2.0])
    def test_mark_noop_lambdas(self, lam):
        spec = build_lattice(2, 5)
        rng = np.random.default_rng(3)
        st = random_unit_state(spec, rng)
        free = step_unperturbed(st, spec)
        marked = step_perturbed(st, spec, MarkedSet((((2, 3), lam),)))
        assert np.abs(free.data - marked.data).max() < 1e-15

    def test_lambda_one_is_reflection(self):
        # marked step at lambda = 1 equals stepping the reflected state
        spec = build_lattice(2, 5)
        rng = np.random.default_rng(4)
        st = random_unit_state(spec, rng)
        v = (1, 3)
        sv = symmetric_vertex_state(spec, v)
        reflected = WaveState(st.data - 2.0 * sv.overlap(st) * sv.data)
        expect = step_unperturbed(reflected, spec)
        got = step_perturbed(st, spec, MarkedSet(((v, 1.0),)))
        assert np.abs(expect.data - got.data).max() < 1e-14

    def test_perturbed_unitary_any_lambda(self):
        spec = build_lattice(2, 5)
        rng = np.random.default_rng(5)
        st = random_unit_state(spec, rng)
        marks = MarkedSet((((0, 0), 0.3), ((2, 4), 1.7)))
        out = step_perturbed(st, spec, marks)
        assert abs(out.norm() - 1.0) < 1e-12

    def test_long_run_norm_drift(self):
        spec = build_lattice(2, 5)
        rng = np.random.default_rng(6)
        st = random_unit_state(spec, rng)
        marks = MarkedSet((((1, 2), 0.7), ((3, 4), 1.3)))
        for _ in range(10_000):
            st = step_perturbed(st, spec, marks)
        assert abs(st.norm() - 1.0) < 1e-10


class TestDenseOracle:
    @pytest.mark.parametrize("d,n", [(1, 4), (1, 8), (2, 3), (2, 4), (3, 2)])
    def test_unperturbed_matches_first_principles(self, d, n):
        spec = build_lattice(d, n)
        oracle = oracle_dense_walk(spec)
        fast = dense_operator(spec)
        assert np.abs(oracle - fast).max() < 1e-12
        rng = np.random.default_rng(7)
        for _ in range(10):
            st = random_unit_state(spec, rng)
            assert np.abs(oracle @ st.to_flat() - step_unperturbed(st, spec).to_flat()).max() < 1e-12

    @pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 2.0])
    def test_perturbed_matches_first_principles(self, lam):
        spec = build_lattice(2, 4)
        marks = MarkedSet((((0, 1), lam), ((3, 2), 1.0)))
        oracle = oracle_dense_walk(spec, marks)
        fast = dense_operator(spec, marks)
        assert np.abs(oracle - fast).max() < 1e-12

    def test_unitarity(self):
        spec = build_lattice(2, 4)
        marks = MarkedSet((((1, 1), 1.0),))
        U = dense_operator(spec, marks)
        assert np.abs(U.conj().T @ U - np.eye(spec.state_dim)).max() < 1e-12
        eigvals = np.linalg.eigvals(U)
        assert np.abs(np.abs(eigvals) - 1.0).max() < 1e-12

    def test_smallest_lattice(self):
        spec = build_lattice(1, 2)
        U = dense_operator(spec)
        cols = np.empty((4, 4), dtype=complex)
        for axis, sign, vertex in [(0, +1, (0,)), (0, -1, (0,)), (0, +1, (1,)), (0, -1, (1,))]:
            st = basis_state(spec, axis, sign, vertex)
            cols[:, vertex_flat(vertex, spec) * 2 + channel_flat(axis, sign, 1)] = (
                step_unperturbed(st, spec).to_flat()
            )
        assert np.abs(U - cols).max() == 0.0

    def test_cap(self):
        spec = build_lattice(2, 31)
        with pytest.raises(LatticeError, match="cap"):
            dense_operator(spec, cap=1000)


def test_vertex_probability_single():
    spec = build_lattice(2, 5)
    rng = np.random.default_rng(8)
    st = random_unit_state(spec, rng)
    p = vertex_probabilities(st, spec)
    assert abs(p[vertex_flat((2, 2), spec)] - vertex_probability(st, spec, (2, 2))) < 1e-15
