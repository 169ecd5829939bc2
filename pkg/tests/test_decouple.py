import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from sphybrid.decouple import (
    build_decoupled,
    check_A22,
    decouple_mode,
    r_blocks,
    r_product,
    reduced_order_model,
)
from sphybrid.errors import SingularA22Error
from sphybrid.model import HybridSystemSpec, Mode, Transition, periodic_schedule, reorder
from sphybrid.reference_examples import X0, example_spec
from sphybrid.simulate import LinearHybridSystem, simulate
from sphybrid.testing import random_two_mode_spec

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _single_mode(A, mask, J=None):
    J = np.eye(A.shape[0]) if J is None else J
    return HybridSystemSpec(0.01, (Mode(A, mask),), (J,))


class TestA22:
    def test_example_invertible(self):
        re = reorder(example_spec(1))
        reports = check_A22(re)
        assert all(r.invertible for r in reports)
        assert re.block(0, "A22")[0, 0] == -2.0
        assert re.block(1, "A22")[0, 0] == -2.5

    def test_scalar_zero(self):
        re = reorder(_single_mode(np.array([[-1.0, 1.0], [1.0, 0.0]]), (False, True)))
        with pytest.raises(SingularA22Error):
            check_A22(re)
        assert not check_A22(re, raise_on_singular=False)[0].invertible

    def test_rank_one(self):
        A = -np.eye(3)
        A[1:, 1:] = [[1.0, 1.0], [1.0, 1.0]]
        re = reorder(_single_mode(A, (False, True, True)))
        with pytest.raises(SingularA22Error):
            build_decoupled(re)


class TestBlocks:
    def test_example_reduced_flows(self):
        dec = build_decoupled(reorder(example_spec(1)))
        assert dec.modes[0].A0[0, 0] == pytest.approx(-1.25, abs=1e-15)
        assert dec.modes[1].A0[0, 0] == pytest.approx(-1.4, abs=1e-15)

    def test_example_jump_gains(self):
        dec = build_decoupled(reorder(example_spec(1)))
        assert dec.R[Transition(0, 0, 1)].R11[0, 0] == pytest.approx(-0.5, abs=1e-15)
        assert dec.R[Transition(1, 0, 0)].R11[0, 0] == pytest.approx(-0.8, abs=1e-15)

    def test_no_slow_to_fast_coupling(self):
        A = np.array([[-1.0, 0.3, 0.2], [0.0, -2.0, 0.1], [0.0, 0.4, -3.0]])
        J = np.array([[0.5, 0.1, 0.0], [0.2, 0.3, 0.1], [0.0, 0.2, 0.9]])
        dec = build_decoupled(reorder(_single_mode(A, (False, True, True), J)))
        np.testing.assert_array_equal(dec.modes[0].P, np.eye(3))
        np.testing.assert_array_equal(dec.R[Transition(0, 0, 0)].full, J)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds)
    def test_schur_complement_and_inverse(self, seed):
        spec = random_two_mode_spec(np.random.default_rng(seed))
        re = reorder(spec)
        dec = build_decoupled(re)
        for i, mb in enumerate(dec.modes):
            A11, A12, A21, A22 = (re.block(i, k) for k in ("A11", "A12", "A21", "A22"))
            direct = A11 - A12 @ np.linalg.solve(A22, A21)
            np.testing.assert_allclose(mb.A0, direct, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(mb.P @ mb.P_inv, np.eye(re.n), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds)
    def test_explicit_matches_product(self, seed):
        re = reorder(random_two_mode_spec(np.random.default_rng(seed)))
        dec = build_decoupled(re)
        for t, R in dec.R.items():
            src, dst = dec.modes[t.source], dec.modes[t.target]
            Rp = r_product(re.jumps[t], src.P_inv, dst.P, dec.n_x)
            assert np.linalg.norm(R.full - Rp.full) <= 1e-12 * np.linalg.norm(Rp.full)
            Re = r_blocks(re.jumps[t], src.L, dst.L, dec.n_x)
            np.testing.assert_array_equal(Re.full, R.full)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, t=st.floats(0.0, 0.5))
    def test_change_of_variable_commutes_with_flow(self, seed, t):
        rng = np.random.default_rng(seed)
        re = reorder(random_two_mode_spec(rng, epsilon=0.05))
        dec = build_decoupled(re)
        xz = rng.normal(size=re.n)
        for i, mb in enumerate(dec.modes):
            direct = scipy.linalg.expm(re.generator(i) * t) @ xz
            via = mb.P_inv @ scipy.linalg.expm(mb.generator(re.epsilon) * t) @ mb.P @ xz
            np.testing.assert_allclose(via, direct, rtol=1e-8, atol=1e-10 * np.linalg.norm(xz))

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds)
    def test_jump_consistency(self, seed):
        rng = np.random.default_rng(seed)
        re = reorder(random_two_mode_spec(rng))
        dec = build_decoupled(re)
        xz = rng.normal(size=re.n)
        for t, R in dec.R.items():
            lhs = dec.modes[t.target].P @ re.jumps[t] @ xz
            rhs = R.full @ dec.modes[t.source].P @ xz
            np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.linalg.norm(lhs)))

    def test_decouple_mode_blocks(self):
        A = np.array([[-1.0, 0.5], [-1.0, -2.0]])
        mb = decouple_mode(A, 1)
        assert mb.L[0, 0] == pytest.approx(0.5)
        assert mb.B2[0, 0] == pytest.approx(0.5 * -1.25)
        assert mb.B3[0, 0] == pytest.approx(0.25)


class TestReducedModel:
    def test_example_one(self):
        rom = reduced_order_model(build_decoupled(reorder(example_spec(1))))
        assert rom.A0[0][0, 0] == pytest.approx(-1.25)
        assert rom.A0[1][0, 0] == pytest.approx(-1.4)
        assert rom.R11[Transition(0, 0, 1)][0, 0] == pytest.approx(-0.5)
        assert rom.R11[Transition(1, 0, 0)][0, 0] == pytest.approx(-0.8)

    def test_single_mode_identity_jump(self):
        A = np.array([[-1.0, 0.0, 0.5], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]])
        rom = reduced_order_model(build_decoupled(reorder(_single_mode(A, (False, False, True)))))
        np.testing.assert_allclose(rom.A0[0], A[:2, :2])
        np.testing.assert_allclose(rom.R11[Transition(0, 0, 0)], np.eye(2))

    def test_discrepancy_shrinks_with_epsilon(self):
        errors = []
        for eps in (1e-2, 1e-3, 1e-4):
            re = reorder(example_spec(1, eps))
            dec = build_decoupled(re)
            sched = periodic_schedule(re.transitions, 0.2, 4.0)
            xz0 = re.S[0] @ np.array(X0)
            full = simulate(LinearHybridSystem.from_reordered(re), sched, 0.05, xz0)
            red = simulate(LinearHybridSystem.from_reduced(reduced_order_model(dec)), sched, 0.05, xz0[: re.n_x])
            assert len(full) == len(red)
            errors.append(np.max(np.abs(full.states[:, : re.n_x] - red.states)))
        assert errors[0] > errors[1] > errors[2]
