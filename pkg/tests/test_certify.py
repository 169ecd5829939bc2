import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphybrid import analyze
from sphybrid.certify import (
    CaseLabel,
    DwellTimeCertificate,
    ModeLyapunov,
    beta_constants,
    block_lyapunov,
    build_M_tau,
    certify,
    classify_case,
    closed_form_bound,
    closed_form_certificate,
    epsilon_thresholds,
    lyapunov_gap,
    min_dwell_bisection,
    reduced_order_certificate,
    schur_radius,
)
from sphybrid.errors import (
    EpsilonAboveThresholdError,
    EpsilonOutOfRangeError,
    InfeasibleError,
    NotHurwitzError,
    NotScalarTwoModeError,
    SuppliedDataInvalid,
)
from sphybrid.linalg import inv_sqrt, is_schur_positive, principal_sqrt, spectral_norm
from sphybrid.model import HybridSystemSpec, Mode, Transition
from sphybrid.reference_examples import example_spec
from sphybrid.testing import random_two_mode_spec

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def scalar_two_mode(A1, A2, eps=1e-3):
    return HybridSystemSpec(
        eps,
        (Mode(np.array(A1, float), (False, True)), Mode(np.array(A2, float), (True, False))),
        (np.eye(2),),
        transitions=(Transition(0, 0, 1), Transition(1, 0, 0)),
    )


def trivial_gamma_spec(eps=1e-2):
    # no slow-to-fast coupling, so the decoupling is the identity and the
    # identity jump keeps both weights
    A = np.array([[-1.0, 0.4], [0.0, -2.0]])
    return HybridSystemSpec(eps, (Mode(A, (False, True)),), (np.eye(2),))


def feasible_random(seed):
    an = analyze(random_two_mode_spec(np.random.default_rng(seed), jump_scale=(0.1, 0.6)))
    eps = an.lyap.eps2 / 2
    try:
        return an, eps, certify(an.lyap, eps)
    except InfeasibleError:
        return an, eps, None


class TestBlockLyapunov:
    def test_negative_identity_uses_exact_rate(self):
        Q, lam = block_lyapunov(-np.eye(2))
        np.testing.assert_array_equal(Q, np.eye(2))
        assert lam == 1.0

    def test_non_normal_uses_kappa(self):
        A = np.array([[-1.0, 5.0], [0.0, -2.0]])
        Q, lam = block_lyapunov(A, kappa=0.9)
        assert lam == pytest.approx(0.9)
        assert np.linalg.eigvalsh(Q)[0] == pytest.approx(1.0)
        assert lyapunov_gap(A, Q, lam) >= -1e-10

    def test_not_hurwitz(self):
        with pytest.raises(NotHurwitzError):
            block_lyapunov(np.array([[0.5]]))

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds)
    def test_inequalities_on_random_modes(self, seed):
        an = analyze(random_two_mode_spec(np.random.default_rng(seed)))
        for mb, ml in zip(an.decoupled.modes, an.lyap.modes):
            assert lyapunov_gap(mb.A0, ml.Qs, ml.lam_s) >= -1e-10
            assert lyapunov_gap(mb.A22, ml.Qf, ml.lam_f) >= -1e-10
            assert np.linalg.eigvalsh(ml.Qs)[0] >= 1 - 1e-12
            assert np.linalg.eigvalsh(ml.Qf)[0] >= 1 - 1e-12


class TestExampleConstants:
    @pytest.mark.parametrize("method", ["lyapunov", "scalar_optimal_q"])
    def test_example1_rates(self, method):
        L = analyze(example_spec(1), method=method).lyap
        assert (L.lam_s, L.lam_f) == (1.25, 2.0)

    def test_example2_rates(self):
        L = analyze(example_spec(2), method="scalar_optimal_q").lyap
        assert L.lam_s == pytest.approx(1.1, abs=1e-15)
        assert L.lam_f == 2.0

    def test_gamma11_examples(self):
        assert analyze(example_spec(1), method="scalar_optimal_q").lyap.gamma11 == pytest.approx(math.sqrt(2 / 5), abs=1e-12)
        assert analyze(example_spec(2), method="scalar_optimal_q").lyap.gamma11 == pytest.approx(2 * math.sqrt(3 / 5), abs=1e-12)

    def test_symmetric_gains(self):
        # c1 = b2 and d1 = a2 make both slow jump gains |c1/d1|
        spec = scalar_two_mode([[-1.0, 0.5], [-1.0, -2.0]], [[-2.0, -1.0], [0.5, -1.0]])
        L = analyze(spec, method="scalar_optimal_q").lyap
        assert L.gamma11 == pytest.approx(0.5, abs=1e-15)

    def test_example1_coupling_by_hand(self):
        L = analyze(example_spec(1), method="scalar_optimal_q").lyap
        # mode 0: B1 = 0.5, L = 0.5, A0 = -1.25; mode 1: B1 = 3, L = 0.8, A0 = -1.4
        q2 = 0.8 / 0.5
        qs = (1.0, q2)
        b1 = max(0.5 * math.sqrt(qs[0]), 3.0 * math.sqrt(qs[1]))
        b2 = max(0.5 * 1.25 / math.sqrt(qs[0]), 0.8 * 1.4 / math.sqrt(qs[1]))
        b3 = max(0.5 * 0.5, 0.8 * 3.0)
        assert (L.b1, L.b2, L.b3) == pytest.approx((b1, b2, b3), rel=1e-13)
        eps1 = 2.0 / ((b1 + b2) ** 2 / (4 * 1.25) + b3)
        assert L.eps1 == pytest.approx(eps1, rel=1e-13)
        assert L.eps2 == pytest.approx(min(eps1, 0.99 * 2.0 / 1.25), rel=1e-13)
        beta1 = math.hypot(b2, b3) / 2.0
        assert L.beta1 == pytest.approx(beta1, rel=1e-13)
        assert L.beta2 == pytest.approx(b1 / (2.0 - L.eps2 * 1.25), rel=1e-13)
        assert L.beta3 == pytest.approx(b1 * beta1 / 1.25, rel=1e-13)

    def test_scalar_method_needs_scalar_modes(self):
        with pytest.raises(NotScalarTwoModeError):
            analyze(random_two_mode_spec(np.random.default_rng(0), n_x=2, n_z=1), method="scalar_optimal_q")


class TestFormulas:
    def test_thresholds_without_coupling(self):
        eps1, eps2 = epsilon_thresholds(1.0, 2.0, 0.0, 0.0, 0.0)
        assert eps1 == math.inf
        assert eps2 == pytest.approx(1.98)

    def test_thresholds_substitution(self):
        assert epsilon_thresholds(1.0, 2.0, 1.0, 1.0, 0.0) == pytest.approx((2.0, 1.98))

    def test_betas(self):
        assert beta_constants(1.0, 2.0, 0.0, 0.0, 0.0, 1.0) == (0.0, 0.0, 0.0)
        assert beta_constants(1.0, 5.0, 0.0, 3.0, 4.0, 1.0)[0] == pytest.approx(1.0)

    def test_zero_coupling_block(self):
        A = np.array([[-1.0, 0.0], [0.3, -2.0]])
        L = analyze(HybridSystemSpec(0.01, (Mode(A, (False, True)),), (0.5 * np.eye(2),))).lyap
        assert L.b1 == 0.0

    def test_trivial_gammas(self):
        L = analyze(trivial_gamma_spec()).lyap
        assert (L.gamma11, L.gamma12, L.gamma21, L.gamma22) == pytest.approx((1.0, 0.0, 0.0, 1.0), abs=1e-15)
        assert classify_case(L) is CaseLabel.EQ1_G12Z

    def test_strict_b3_inserts_weight(self):
        an = analyze(random_two_mode_spec(np.random.default_rng(5), n_x=2, n_z=3))
        strict = analyze(an.spec, strict_b3=True).lyap
        expected = max(
            spectral_norm(principal_sqrt(ml.Qf) @ ml.Qf @ mb.B3 @ inv_sqrt(ml.Qf))
            for mb, ml in zip(an.decoupled.modes, an.lyap.modes)
        )
        assert strict.b3 == pytest.approx(expected, rel=1e-12)


class TestMtau:
    def test_zero_tau_small_eps(self):
        L = analyze(example_spec(1, 1e-6)).lyap
        np.testing.assert_allclose(build_M_tau(L, 1e-6, 0.0), np.eye(2), atol=1e-4)

    def test_infinite_tau(self):
        L = analyze(example_spec(1)).lyap
        e = 1e-3
        expected = [[e * L.beta3, e * (L.beta2 + L.beta3)], [e * L.beta1, e * L.beta1]]
        np.testing.assert_allclose(build_M_tau(L, e, math.inf), expected, rtol=1e-15)

    def test_monotone_in_tau(self):
        L = analyze(example_spec(2)).lyap
        grid = np.linspace(0, 2, 60)
        Ms = np.array([build_M_tau(L, 1e-3, t) for t in grid])
        assert np.all(np.diff(Ms, axis=0) <= 0)
        radii = [schur_radius(L, 1e-3, t) for t in grid]
        assert np.all(np.diff(radii) <= 1e-15)

    def test_epsilon_range(self):
        L = analyze(example_spec(1)).lyap
        with pytest.raises(EpsilonOutOfRangeError):
            build_M_tau(L, 2 * L.eps2, 0.1)
        with pytest.raises(EpsilonOutOfRangeError):
            build_M_tau(L, 0.0, 0.1)


class TestBisection:
    def test_zero_gamma(self):
        L = dataclasses.replace(analyze(example_spec(1)).lyap, gamma11=0.0, gamma12=0.0, gamma21=0.0, gamma22=0.0)
        assert min_dwell_bisection(L, 1e-3) == 0.0

    def test_example1(self):
        L = analyze(example_spec(1), method="scalar_optimal_q").lyap
        tau = min_dwell_bisection(L, 1e-3)
        assert 0 < tau <= 6.16e-4
        assert is_schur_positive(L.Gamma @ build_M_tau(L, 1e-3, tau + 1e-9))[0]
        ok, p = is_schur_positive(L.Gamma @ build_M_tau(L, 1e-3, 6.16e-4))
        assert ok and np.all(p > 0)

    def test_example2(self):
        L = analyze(example_spec(2), method="scalar_optimal_q").lyap
        assert 0.16 < min_dwell_bisection(L, 1e-3) <= 0.406

    def test_infeasible(self):
        L = dataclasses.replace(analyze(example_spec(1)).lyap, gamma22=50.0)
        with pytest.raises(InfeasibleError):
            min_dwell_bisection(L, L.eps2)


class TestClosedForm:
    def test_example2_constant_part(self):
        L = analyze(example_spec(2), method="scalar_optimal_q").lyap
        cert = closed_form_certificate(L, 1e-3)
        assert cert.case is CaseLabel.GT1
        assert cert.constant_part == pytest.approx(0.40, abs=5e-3)
        assert reduced_order_certificate(L) == pytest.approx(0.40, abs=5e-3)

    def test_example1_is_order_eps(self):
        L = analyze(example_spec(1), method="scalar_optimal_q").lyap
        assert reduced_order_certificate(L) == 0.0
        ratios = [closed_form_certificate(L, e).tau_closed_form / e for e in (1e-2, 1e-3, 1e-4)]
        assert classify_case(L) is CaseLabel.LT1
        assert max(ratios) < 1.0

    def test_gamma_one_reduced(self):
        L = dataclasses.replace(analyze(example_spec(1)).lyap, gamma11=1.0)
        assert reduced_order_certificate(L) == 0.0

    def test_no_dwell_case(self):
        L = dataclasses.replace(
            analyze(example_spec(1)).lyap, gamma11=0.5, gamma12=0.0, gamma21=0.0, gamma22=0.5
        )
        assert classify_case(L) is CaseLabel.LT1_NODWELL
        cert = closed_form_certificate(L, 1e-3)
        assert cert.case is CaseLabel.LT1_NODWELL
        assert cert.tau_closed_form == 0.0

    def test_trivial_gamma_case(self):
        L = analyze(trivial_gamma_spec()).lyap
        cert = closed_form_certificate(L, 1e-2)
        assert cert.case is CaseLabel.EQ1_G12Z
        assert cert.tau_bisection <= cert.tau_closed_form + 1e-9

    def test_above_threshold_is_reported(self):
        L = analyze(example_spec(1), method="scalar_optimal_q").lyap
        with pytest.raises(EpsilonAboveThresholdError) as info:
            closed_form_bound(L, 0.05)
        assert info.value.epsilon_star < 0.05
        cert = certify(L, 0.05)
        assert cert.tau_closed_form is None and cert.closed_form_error
        assert cert.tau_bisection > 0

    def test_valid_close_to_threshold(self):
        L = analyze(example_spec(2), method="scalar_optimal_q").lyap
        eps = 0.98 * closed_form_certificate(L, 1e-3).epsilon_star
        cert = closed_form_certificate(L, eps)
        assert cert.tau_bisection <= cert.tau_closed_form + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds)
    def test_soundness_and_ordering(self, seed):
        an, eps, cert = feasible_random(seed)
        if cert is None:
            return
        L = an.lyap
        assert is_schur_positive(L.Gamma @ build_M_tau(L, eps, cert.tau_bisection + 1e-9))[0]
        if cert.tau_closed_form is not None:
            M = L.Gamma @ build_M_tau(L, eps, cert.tau_closed_form + 1e-9)
            assert is_schur_positive(M)[0]
            p = np.array(cert.witness)
            assert np.all(p > 0) and np.all(M.T @ p < p)
            assert cert.tau_bisection <= cert.tau_closed_form + 1e-9

    def test_gt1_asymptotics_random(self):
        # first random GT1 instance: residual over the constant part is O(eps)
        for seed in range(200):
            an = analyze(random_two_mode_spec(np.random.default_rng(seed), jump_scale=(0.5, 1.5)))
            L = an.lyap
            if classify_case(L) is not CaseLabel.GT1:
                continue
            grid = [L.eps2 * f for f in (1e-2, 1e-3, 1e-4)]
            try:
                res = [closed_form_certificate(L, e).tau_closed_form - math.log(L.gamma11) / L.lam_s for e in grid]
            except (EpsilonAboveThresholdError, InfeasibleError):
                continue
            C = max(r / e for r, e in zip(res, grid))
            assert all(r <= C * e + 1e-15 for r, e in zip(res, grid))
            assert res[0] > res[1] > res[2]
            return
        pytest.fail("no GT1 instance found")


class TestOverrides:
    def test_valid_override_is_used(self):
        base = analyze(example_spec(1))
        ml = ModeLyapunov(np.array([[2.0]]), 1.0, np.array([[1.0]]), 1.5)
        L = analyze(example_spec(1), overrides={0: ml}).lyap
        assert L.lam_s == 1.0 and L.lam_f == 1.5
        assert L.modes[1] == base.lyap.modes[1]

    @pytest.mark.parametrize(
        "ml",
        [
            ModeLyapunov(np.array([[0.5]]), 1.0, np.array([[1.0]]), 1.0),  # Q below identity
            ModeLyapunov(np.array([[1.0]]), 1.3, np.array([[1.0]]), 1.0),  # rate too fast
            ModeLyapunov(np.array([[1.0]]), 1.0, np.array([[1.0]]), -1.0),  # negative rate
            ModeLyapunov(np.eye(2), 1.0, np.array([[1.0]]), 1.0),  # wrong shape
        ],
    )
    def test_invalid_override(self, ml):
        with pytest.raises(SuppliedDataInvalid):
            analyze(example_spec(1), overrides={0: ml})

    def test_not_hurwitz_reports_block(self):
        spec = scalar_two_mode([[1.0, 0.5], [-1.0, -2.0]], [[-2.5, -2.0], [3.0, 1.0]])
        with pytest.raises(NotHurwitzError) as info:
            analyze(spec)
        assert info.value.mode == 0 and info.value.block == "A0"


def test_certificate_round_trip():
    L = analyze(example_spec(2), method="scalar_optimal_q").lyap
    cert = closed_form_certificate(L, 1e-3)
    text = json.dumps(cert.to_dict())
    back = DwellTimeCertificate.from_dict(json.loads(text))
    assert back == cert
    # the recorded bound re-verifies
    assert is_schur_positive(L.Gamma @ build_M_tau(L, back.epsilon, back.tau_bisection + 1e-9))[0]
    inf_cert = dataclasses.replace(cert, epsilon_star=math.inf)
    assert DwellTimeCertificate.from_dict(json.loads(json.dumps(inf_cert.to_dict()))).epsilon_star == math.inf
