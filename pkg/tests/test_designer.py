import math

import numpy as np
import pytest

from chi2mech import (
    ChannelMatrix,
    InfeasibleEpsilonError,
    ProbVector,
    SingularMatrixError,
    ValidationError,
    build_w,
    chi2_divergence,
    decompose,
    derive_px,
    design_mechanism,
    deterministic_svd,
    epsilon_bounds,
    principal_direction,
    spectral_tightness,
)
from helpers import bsc, example1, example3, random_leakage_pair

EX1_W = np.array([[-4.8166, 4.2583], [3.4761, -1.5366]])
EX3_W = np.array([[1.4501, -0.2277], [-0.0386, 1.0355]])


def identity_channel(k: int) -> ChannelMatrix:
    return ChannelMatrix(np.eye(k))


class TestDerivePx:
    def test_reference_two_letter_instance(self):
        leakage, py = example1()
        assert derive_px(leakage, py).entries == pytest.approx([0.3625, 0.6375], abs=1e-15)

    def test_identity_leakage_returns_py(self):
        py = ProbVector([0.1, 0.2, 0.7])
        assert derive_px(identity_channel(3), py).entries == pytest.approx(py.entries)

    def test_screening_instance(self):
        leakage, py = example3()
        px = derive_px(leakage, py)
        assert px[0] == pytest.approx(0.101, abs=1e-12)

    def test_rejects_vanishing_prior(self):
        leakage = ChannelMatrix([[1.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValidationError, match="zero entry"):
            derive_px(leakage, ProbVector([0.5, 0.5]))


class TestDeterministicSvd:
    def test_identity(self):
        s, _, _ = deterministic_svd(np.eye(2))
        assert s == pytest.approx([1.0, 1.0])

    def test_diagonal(self):
        s, _, v = deterministic_svd(np.diag([3.0, 2.0]))
        assert s == pytest.approx([3.0, 2.0])
        np.testing.assert_allclose(v, np.eye(2), atol=1e-15)

    def test_reference_instance_spectrum(self):
        leakage, py = example1()
        w = build_w(leakage, py)
        assert w.singular_values == pytest.approx([7.4012, 1.0], abs=5e-4)

    def test_sign_convention_largest_entry_positive(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            mat = rng.normal(size=(4, 4))
            _, _, v = deterministic_svd(mat)
            for i in range(v.shape[1]):
                col = v[:, i]
                assert col[np.argmax(np.abs(col))] > 0

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError, match="non-finite"):
            deterministic_svd(np.array([[1.0, np.inf], [0.0, 1.0]]))

    def test_rectangular_padding(self):
        mat = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        d = decompose(mat)
        assert d.singular_values == pytest.approx([2.0, 1.0, 0.0])
        assert d.right_vectors.shape == (3, 3)


class TestBuildW:
    def test_reference_instance_entries(self):
        leakage, py = example1()
        np.testing.assert_allclose(build_w(leakage, py).w, EX1_W, atol=5e-4)

    def test_identity_leakage_gives_identity(self):
        py = ProbVector([0.2, 0.3, 0.5])
        np.testing.assert_allclose(build_w(identity_channel(3), py).w, np.eye(3), atol=1e-12)

    def test_screening_instance_entries(self):
        leakage, py = example3()
        np.testing.assert_allclose(build_w(leakage, py).w, EX3_W, atol=5e-4)

    def test_rejects_singular_leakage(self):
        with pytest.raises(SingularMatrixError):
            build_w(ChannelMatrix([[0.5, 0.5], [0.5, 0.5]]), ProbVector([0.5, 0.5]))

    def test_rejects_dimension_mismatch(self):
        leakage, _ = example1()
        with pytest.raises(ValidationError, match="dimension"):
            build_w(leakage, ProbVector([0.2, 0.3, 0.5]))

    def test_unit_singular_value_on_random_instances(self):
        rng = np.random.default_rng(404)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            leakage, py = random_leakage_pair(rng, k)
            w = build_w(leakage, py)
            assert abs(w.sigma_min - 1.0) <= 1e-7
            assert np.all(w.singular_values >= 1.0 - 1e-9)
            root = derive_px(leakage, py).sqrt()
            vmin = w.right_vectors[:, -1]
            assert abs(float(root @ vmin)) >= 1.0 - 1e-7


class TestPrincipalDirection:
    def test_reference_instance_direction(self):
        leakage, py = example1()
        w = build_w(leakage, py)
        direction = principal_direction(w, derive_px(leakage, py))
        expected = np.array([0.7984, -0.6021])
        closest = min(
            np.abs(direction.l - expected).max(),
            np.abs(direction.l + expected).max(),
        )
        assert closest <= 5e-4

    def test_symmetric_channel_closed_form(self):
        py = ProbVector([0.25, 0.75])
        for alpha in (0.1, 0.25, 0.4):
            w = build_w(bsc(alpha), py)
            direction = principal_direction(w, derive_px(bsc(alpha), py))
            expected = np.array(
                [-math.sqrt((3 - 2 * alpha) / 4), math.sqrt((2 * alpha + 1) / 4)]
            )
            closest = min(
                np.abs(direction.l - expected).max(),
                np.abs(direction.l + expected).max(),
            )
            assert closest <= 1e-9

    def test_degenerate_spectrum_returns_feasible_tie_break(self):
        py = ProbVector([0.2, 0.3, 0.5])
        w = build_w(identity_channel(3), py)
        direction = principal_direction(w, py)
        assert abs(float(py.sqrt() @ direction.l)) <= 1e-8
        assert np.linalg.norm(direction.l) == pytest.approx(1.0, abs=1e-12)
        again = principal_direction(build_w(identity_channel(3), py), py)
        np.testing.assert_array_equal(direction.l, again.l)

    def test_rejects_foreign_matrix(self):
        # A matrix whose top right-singular vector overlaps sqrt(P_X): not a
        # valid leakage product.
        foreign = decompose(np.diag([3.0, 1.0]))
        with pytest.raises(ValidationError, match="orthogonal"):
            principal_direction(foreign, ProbVector([0.9, 0.1]))


class TestEpsilonBounds:
    def test_reference_instance(self):
        leakage, py = example1()
        px = derive_px(leakage, py)
        w = build_w(leakage, py)
        bounds = epsilon_bounds(leakage, py, px, principal_direction(w, px))
        assert bounds.simplex == pytest.approx(0.078, abs=1e-3)
        assert bounds.leakage_approx == pytest.approx(0.3625 / math.sqrt(0.6375), abs=1e-12)

    def test_symmetric_channel_simplex_bound(self):
        py = ProbVector([0.25, 0.75])
        for alpha in (0.1, 0.25, 0.4):
            leakage = bsc(alpha)
            px = derive_px(leakage, py)
            w = build_w(leakage, py)
            bounds = epsilon_bounds(leakage, py, px, principal_direction(w, px))
            expected = abs(2 * alpha - 1) / math.sqrt((3 - 2 * alpha) * (2 * alpha + 1))
            assert bounds.simplex == pytest.approx(expected, rel=1e-9)


class TestDesignMechanism:
    def test_reference_instance_conditionals(self):
        leakage, py = example1()
        eps = 0.01
        mechanism, _ = design_mechanism(leakage, py, eps)
        coeff = (mechanism.output_conditionals[0].entries - py.entries) / eps
        assert coeff == pytest.approx([-3.2048, 3.2048], abs=5e-4)

    def test_symmetric_channel_conditionals(self):
        py = ProbVector([0.25, 0.75])
        for alpha in (0.1, 0.25, 0.4):
            eps = 0.01
            mechanism, _ = design_mechanism(bsc(alpha), py, eps)
            printed = math.sqrt((3 - 2 * alpha) * (2 * alpha + 1)) / (4 * (2 * alpha - 1))
            coeff = (mechanism.output_conditionals[0][0] - 0.25) / eps
            assert abs(coeff) == pytest.approx(abs(printed), rel=1e-9)

    def test_screening_instance_utility_coefficients(self):
        leakage, py = example3()
        eps = 0.004
        _, report = design_mechanism(leakage, py, eps)
        coeff_nats = report.approx_utility_nats / eps**2
        assert coeff_nats == pytest.approx(1.1141, abs=2e-3)
        assert coeff_nats / math.log(2) == pytest.approx(1.6073, abs=2e-3)

    def test_mechanism_audits(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            k = int(rng.integers(2, 6))
            leakage, py = random_leakage_pair(rng, k)
            px = derive_px(leakage, py)
            w = build_w(leakage, py)
            bounds = epsilon_bounds(leakage, py, px, principal_direction(w, px))
            eps = bounds.simplex / 8
            mechanism, report = design_mechanism(leakage, py, eps)
            mix_out = sum(
                wgt * c.entries
                for wgt, c in zip(mechanism.pu.entries, mechanism.output_conditionals)
            )
            mix_post = sum(
                wgt * p.entries
                for wgt, p in zip(mechanism.pu.entries, mechanism.posteriors)
            )
            assert np.abs(mix_out - py.entries).max() <= 1e-10
            assert np.abs(mix_post - px.entries).max() <= 1e-10
            for value in report.chi2_per_letter:
                assert value == pytest.approx(eps**2, abs=1e-12)
            assert chi2_divergence(mechanism.posteriors[0], px) == pytest.approx(
                eps**2, abs=1e-12
            )

    def test_label_swap_leaves_audits_unchanged(self):
        leakage, py = example1()
        mechanism, report = design_mechanism(leakage, py, 0.02)
        swapped = mechanism.relabeled()
        assert swapped.utility_nats() == pytest.approx(mechanism.utility_nats(), abs=1e-15)
        assert swapped.leakage_nats() == pytest.approx(mechanism.leakage_nats(), abs=1e-15)
        px = derive_px(leakage, py)
        assert sorted(swapped.per_letter_chi2(px)) == pytest.approx(
            sorted(report.chi2_per_letter)
        )

    def test_kernel_is_bayes_consistent(self):
        leakage, py = example1()
        mechanism, _ = design_mechanism(leakage, py, 0.01)
        # Column y of the kernel times P_Y(y) recovers the joint.
        joint = mechanism.kernel.entries * py.entries[None, :]
        np.testing.assert_allclose(
            joint, mechanism.output_joint().entries, atol=1e-15
        )

    def test_rejects_nonpositive_eps(self):
        leakage, py = example1()
        with pytest.raises(ValidationError, match="positive"):
            design_mechanism(leakage, py, 0.0)

    def test_rejects_infeasible_eps(self):
        leakage, py = example1()
        with pytest.raises(InfeasibleEpsilonError):
            design_mechanism(leakage, py, 0.08)

    def test_warning_zone_is_flagged(self, caplog):
        leakage, py = example1()
        with caplog.at_level("WARNING", logger="chi2mech"):
            _, report = design_mechanism(leakage, py, 0.06)
        assert report.above_apriori_bounds
        assert any("a-priori" in message for message in caplog.messages)
        _, quiet = design_mechanism(leakage, py, 0.01)
        assert not quiet.above_apriori_bounds

    def test_leakage_stays_below_quadratic_budget(self):
        leakage, py = example1()
        _, report = design_mechanism(leakage, py, 0.01)
        assert report.leakage_mi_nats <= 0.5 * 0.01**2 * 1.1
        ratios = []
        for eps in (0.01, 0.005, 0.0025):
            _, rep = design_mechanism(leakage, py, eps)
            ratios.append((rep.leakage_mi_nats - 0.5 * eps**2) / eps**2)
        assert ratios[0] > ratios[1] > ratios[2] > 0

    def test_utility_residual_shrinks(self):
        leakage, py = example1()
        ratios = []
        for eps in (0.02, 0.01, 0.005, 0.0025):
            _, rep = design_mechanism(leakage, py, eps)
            ratios.append(
                abs(rep.exact_utility_nats - rep.approx_utility_nats) / eps**2
            )
        assert all(a > b for a, b in zip(ratios, ratios[1:]))


class TestSpectralTightness:
    def test_reference_instance(self):
        leakage, py = example1()
        _, lambda_min = spectral_tightness(leakage, py)
        assert lambda_min == pytest.approx(1 / 7.4012**2, abs=1e-5)

    def test_identity_leakage(self):
        _, lambda_min = spectral_tightness(identity_channel(2), ProbVector([0.4, 0.6]))
        assert lambda_min == pytest.approx(1.0, abs=1e-12)

    def test_q_inverts_w_on_random_instances(self):
        rng = np.random.default_rng(2718)
        for _ in range(50):
            k = int(rng.integers(2, 6))
            leakage, py = random_leakage_pair(rng, k)
            q, lambda_min = spectral_tightness(leakage, py)
            w = build_w(leakage, py)
            np.testing.assert_allclose(q @ w.w, np.eye(k), atol=1e-9)
            assert lambda_min * w.sigma_max**2 == pytest.approx(1.0, abs=1e-9)
