import math

import numpy as np
import pytest

from chi2mech import (
    JointDistribution,
    ProbVector,
    ValidationError,
    chi2_divergence,
    chi2_information,
    design_mechanism,
    error_probability,
    kl_divergence,
    mmse_binary,
    mutual_information,
    to_bits,
)
from helpers import bsc, example1, random_distribution


def kl_by_summation(p, q):
    """Independent plain-python reference for the KL divergence."""
    return sum(pi * math.log(pi / qi) for pi, qi in zip(p, q) if pi > 0)


def chi2_by_summation(p, q):
    return sum((pi - qi) ** 2 / qi for pi, qi in zip(p, q))


class TestKlDivergence:
    def test_identical_distributions(self):
        p = ProbVector([0.3, 0.7])
        assert kl_divergence(p, p) == 0.0

    def test_deterministic_vs_uniform(self):
        val = kl_divergence(ProbVector([1.0, 0.0]), ProbVector([0.5, 0.5]))
        assert val == pytest.approx(math.log(2.0), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="dimension"):
            kl_divergence(ProbVector([1.0]), ProbVector([0.5, 0.5]))

    def test_support_violation(self):
        with pytest.raises(ValidationError, match="support"):
            kl_divergence(ProbVector([0.5, 0.5]), ProbVector([1.0, 0.0]))

    def test_matches_direct_summation_on_designed_output(self):
        # Perturbed output distribution of the reference two-letter design.
        leakage, py = example1()
        _, report = design_mechanism(leakage, py, 0.01)
        cond = ProbVector(py.entries + 0.01 * np.array([-3.2048, 3.2048]))
        assert kl_divergence(cond, py) == pytest.approx(
            kl_by_summation(cond.entries, py.entries), abs=1e-15
        )
        # The quadratic term (sigma_max * eps)^2 / 2 dominates: the residual
        # per eps^2 shrinks when eps halves.
        residuals = []
        for eps in (0.01, 0.005):
            shifted = ProbVector(py.entries + eps * np.array([-3.2048, 3.2048]))
            quad = 0.5 * (report.sigma_max * eps) ** 2
            residuals.append(abs(kl_divergence(shifted, py) - quad) / eps**2)
        assert residuals[1] < residuals[0]


class TestChi2Divergence:
    def test_identical_distributions(self):
        p = ProbVector([0.25, 0.75])
        assert chi2_divergence(p, p) == 0.0

    def test_unit_direction_saturates_budget(self):
        # p = q + eps [sqrt(q)] L with ||L|| = 1 and L orthogonal to sqrt(q)
        # has divergence exactly eps^2.
        q = ProbVector([0.3625, 0.6375])
        root = q.sqrt()
        l = np.array([root[1], -root[0]])
        l /= np.linalg.norm(l)
        eps = 0.05
        p = ProbVector(q.entries + eps * root * l)
        assert chi2_divergence(p, q) == pytest.approx(eps**2, abs=1e-15)

    def test_requires_strictly_positive_reference(self):
        with pytest.raises(ValidationError, match="zero entry"):
            chi2_divergence(ProbVector([0.5, 0.5]), ProbVector([1.0, 0.0]))

    def test_dominates_kl_on_random_pairs(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            p = random_distribution(rng, k)
            q = random_distribution(rng, k)
            kl = kl_divergence(p, q)
            chi2 = chi2_divergence(p, q)
            assert 0.0 <= kl <= chi2 + 1e-15
            assert chi2 == pytest.approx(
                chi2_by_summation(p.entries, q.entries), rel=1e-12
            )


class TestMutualInformation:
    def test_product_joint_is_zero(self):
        r = np.array([0.3, 0.7])
        c = np.array([0.4, 0.6])
        assert mutual_information(JointDistribution(np.outer(r, c))) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_perfectly_correlated_uniform_binary(self):
        j = JointDistribution([[0.5, 0.0], [0.0, 0.5]])
        assert mutual_information(j) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        table = rng.dirichlet(np.ones(6)).reshape(2, 3)
        j = JointDistribution(table)
        jt = JointDistribution(table.T)
        assert mutual_information(j) == pytest.approx(mutual_information(jt), abs=1e-15)

    def test_designed_joint_near_quadratic_coefficient(self):
        leakage, py = example1()
        eps = 0.01
        mechanism, report = design_mechanism(leakage, py, eps)
        mi = mutual_information(mechanism.output_joint())
        assert mi == pytest.approx(0.5 * eps**2 * report.sigma_max**2, rel=0.1)

    def test_mixture_decomposition_identity(self):
        # I(U;Y) must equal sum_u P_U(u) D(P_{Y|U=u} || P_Y) for any mechanism joint.
        leakage, py = example1()
        mechanism, _ = design_mechanism(leakage, py, 0.02)
        marginal = mechanism.output_marginal()
        decomposed = sum(
            w * kl_divergence(cond, marginal)
            for w, cond in zip(mechanism.pu.entries, mechanism.output_conditionals)
        )
        assert mutual_information(mechanism.output_joint()) == pytest.approx(
            decomposed, abs=1e-12
        )


class TestChi2Information:
    def test_zero_when_posteriors_equal_prior(self):
        prior = ProbVector([0.25, 0.75])
        pu = ProbVector([0.5, 0.5])
        assert chi2_information([prior, prior], pu, prior) == 0.0

    def test_designed_posteriors_average_to_budget(self):
        leakage, py = example1()
        eps = 0.01
        mechanism, _ = design_mechanism(leakage, py, eps)
        px = mechanism.posterior_marginal()
        value = chi2_information(list(mechanism.posteriors), mechanism.pu, px)
        assert value == pytest.approx(eps**2, abs=1e-15)

    def test_bounded_by_worst_letter(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            k = int(rng.integers(2, 5))
            n_u = int(rng.integers(2, 4))
            prior = random_distribution(rng, k)
            posts = [random_distribution(rng, k) for _ in range(n_u)]
            pu = random_distribution(rng, n_u)
            avg = chi2_information(posts, pu, prior)
            worst = max(chi2_divergence(p, prior) for p in posts)
            assert avg <= worst + 1e-12

    def test_invariant_under_relabeling(self):
        rng = np.random.default_rng(7)
        prior = random_distribution(rng, 3)
        posts = [random_distribution(rng, 3) for _ in range(3)]
        pu = random_distribution(rng, 3)
        base = chi2_information(posts, pu, prior)
        perm = [2, 0, 1]
        shuffled = chi2_information(
            [posts[i] for i in perm], ProbVector(pu.entries[perm]), prior
        )
        assert shuffled == pytest.approx(base, rel=1e-12)

    def test_post_processing_inequality(self):
        # X - U - U': garbling U can only lower the averaged divergence.
        rng = np.random.default_rng(31)
        for _ in range(200):
            k = int(rng.integers(2, 5))
            n_u = int(rng.integers(2, 5))
            n_up = int(rng.integers(2, 5))
            pu = random_distribution(rng, n_u)
            posts_u = [random_distribution(rng, k) for _ in range(n_u)]
            prior = ProbVector(
                sum(w * p.entries for w, p in zip(pu.entries, posts_u))
            )
            channel = rng.dirichlet(np.ones(n_up), size=n_u).T  # P(U'|U)
            pu_prime = channel @ pu.entries
            posts_up = []
            for up in range(n_up):
                back = channel[up] * pu.entries / pu_prime[up]  # P(U|U'=up)
                posts_up.append(
                    ProbVector(sum(b * p.entries for b, p in zip(back, posts_u)))
                )
            before = chi2_information(posts_u, pu, prior)
            after = chi2_information(posts_up, ProbVector(pu_prime), prior)
            assert after <= before + 1e-12


class TestEstimationMetrics:
    def test_mmse_uniform(self):
        assert mmse_binary(ProbVector([0.5, 0.5])) == 0.25

    def test_mmse_deterministic(self):
        assert mmse_binary(ProbVector([1.0, 0.0])) == 0.0

    def test_mmse_symmetric_channel_prior(self):
        # Zero-budget baseline at correlation 0.25: prior variance of X.
        alpha = 0.25
        prior = ProbVector([(2 * alpha + 1) / 4, (3 - 2 * alpha) / 4])
        assert mmse_binary(prior) == pytest.approx(0.375 * 0.625, abs=1e-15)

    def test_mmse_requires_binary(self):
        with pytest.raises(ValidationError, match="binary"):
            mmse_binary(ProbVector([0.2, 0.3, 0.5]))

    def test_error_probability_independent_uniform(self):
        pu = ProbVector([0.5, 0.5])
        py = ProbVector([0.25, 0.75])
        assert error_probability(pu, (py, py)) == 0.5

    def test_error_probability_indicator_outputs(self):
        pu = ProbVector([0.5, 0.5])
        outs = (ProbVector([1.0, 0.0]), ProbVector([0.0, 1.0]))
        assert error_probability(pu, outs) == 0.0

    def test_designed_mechanism_beats_baseline(self):
        # Symmetric channel at correlation 0.25, budget 0.05: the aligned
        # labeling of the designed mechanism is strictly below one-half.
        mechanism, _ = design_mechanism(bsc(0.25), ProbVector([0.25, 0.75]), 0.05)
        perr = error_probability(mechanism.pu, mechanism.output_conditionals)
        swapped = mechanism.relabeled()
        perr = min(perr, error_probability(swapped.pu, swapped.output_conditionals))
        assert perr < 0.5

    def test_error_probability_requires_binary(self):
        with pytest.raises(ValidationError, match="binary"):
            error_probability(ProbVector([0.2, 0.3, 0.5]), ())


def test_to_bits():
    assert to_bits(math.log(2.0)) == pytest.approx(1.0, abs=1e-15)
