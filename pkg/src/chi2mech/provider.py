"""Design from the data holder's side: disclose about Y, protect Z.

Here the mechanism observes X directly, the utility target Y and the
protected variable Z both depend on X, and the chain is (Z, Y) - X - U. With
an invertible K x K channel P_{Z|X}, a perturbation of the Z-posteriors by
``eps [sqrt(P_Z)] L`` induces the output shift

    P_{Y|U=u} - P_Y = +- eps * P_{Y|X} P_{Z|X}^-1 [sqrt(P_Z)] L,

so the quadratic utility coefficient is ``||W1 W2 L||^2`` with

    W1 = [sqrt(P_Y)^-1] P_{Y|X} [sqrt(P_X)],
    W2 = [sqrt(P_X)^-1] P_{Z|X}^-1 [sqrt(P_Z)].

sqrt(P_Z) is always a right-singular vector of the product at singular value
exactly 1. The optimal direction is the top right-singular vector when
sigma_max > 1 (it is then automatically orthogonal to sqrt(P_Z)); when the
top of the spectrum sits at 1 the best feasible direction lives in the
second singular position instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import designer
from .errors import InfeasibleEpsilonError, NumericalError, ValidationError
from .infometrics import chi2_divergence, mutual_information
from .probability import (
    INVERTIBILITY_TOL,
    ChannelMatrix,
    JointDistribution,
    ProbVector,
)

#: Singular-value-at-1 assertion tolerance for the product W1 W2.
UNIT_SIGMA_TOL = 1e-7
#: sigma_max above 1 by more than this selects the first-case direction.
CASE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class ProviderScenario:
    """Inputs for the provider-side problem.

    ``p_y_given_x`` may be rectangular (|Y| need not equal K); ``p_z_given_x``
    must be square and invertible. The marginals P_Z and P_Y are derived and
    must be strictly positive.
    """

    p_y_given_x: ChannelMatrix
    p_z_given_x: ChannelMatrix
    px: ProbVector
    invertibility_threshold: float = INVERTIBILITY_TOL

    def __post_init__(self) -> None:
        k = self.px.dimension
        if self.p_y_given_x.n_inputs != k or self.p_z_given_x.n_inputs != k:
            raise ValidationError("channel input dimensions must match P_X")
        self.p_z_given_x.require_invertible(self.invertibility_threshold)
        self.px.require_strictly_positive()
        self.pz.require_strictly_positive()
        self.py.require_strictly_positive()

    @property
    def pz(self) -> ProbVector:
        return ProbVector(self.p_z_given_x.apply(self.px))

    @property
    def py(self) -> ProbVector:
        return ProbVector(self.p_y_given_x.apply(self.px))


def build_factors(
    scenario: ProviderScenario,
) -> tuple[designer.DesignMatrix, designer.DesignMatrix, designer.DesignMatrix]:
    """Build W1, W2 and their product, each with a full SVD.

    Asserts the structural facts used by the case split: sqrt(P_Z) is a
    right-singular vector of the product at singular value 1.
    """
    px_root = scenario.px.sqrt()
    py_root = scenario.py.sqrt()
    pz_root = scenario.pz.sqrt()
    w1 = (1.0 / py_root)[:, None] * scenario.p_y_given_x.entries * px_root[None, :]
    w2 = (1.0 / px_root)[:, None] * scenario.p_z_given_x.inverse() * pz_root[None, :]
    product = w1 @ w2
    d1 = designer.decompose(w1)
    d2 = designer.decompose(w2)
    dp = designer.decompose(product)
    mapped = product @ pz_root
    if abs(float(np.linalg.norm(mapped)) - 1.0) > UNIT_SIGMA_TOL:
        raise NumericalError("sqrt(P_Z) does not map to a unit-norm vector under W1 W2")
    gram_residual = product.T @ mapped - pz_root
    if float(np.abs(gram_residual).max()) > UNIT_SIGMA_TOL:
        raise NumericalError("sqrt(P_Z) is not a singular vector of W1 W2 at 1")
    return d1, d2, dp


def _select_direction(
    product: designer.DesignMatrix, pz: ProbVector
) -> tuple[Literal["sigma_gt_one", "sigma_eq_one"], designer.PerturbationDirection]:
    """Case split on sigma_max(W1 W2).

    Above 1 the top right-singular vector is feasible and optimal. At 1 the
    top singular subspace contains sqrt(P_Z) itself; the maximizer among
    feasible directions is the deterministically deflated next vector.
    """
    root = pz.sqrt()
    if product.sigma_max > 1.0 + CASE_TOL:
        top = product.right_vectors[:, 0]
        if abs(float(root @ top)) > designer.ORTHOGONALITY_TOL:
            raise NumericalError(
                "top singular vector unexpectedly overlaps sqrt(P_Z)"
            )
        unit = top / float(np.linalg.norm(top))
        return "sigma_gt_one", designer.PerturbationDirection.from_unit(unit, pz)
    unit = designer._deflated_direction(product.right_vectors, root)
    return "sigma_eq_one", designer.PerturbationDirection.from_unit(unit, pz)


@dataclass(frozen=True, eq=False)
class ProviderReport:
    """Audit record for a provider-side design."""

    epsilon: float
    w1: designer.DesignMatrix
    w2: designer.DesignMatrix
    product: designer.DesignMatrix
    case: Literal["sigma_gt_one", "sigma_eq_one"]
    chosen_direction: designer.PerturbationDirection
    selected_sigma: float
    approx_utility_nats: float
    exact_utility_nats: float
    protected_mi_nats: float
    chi2_per_letter: tuple[float, float]
    eps_bound_posthoc: float
    #: No closed-form validity bound exists for this extension; the simplex
    #: bound is constructed by analogy with the base problem.
    eps_bound_is_analogy: bool = True


def design_provider_mechanism(
    scenario: ProviderScenario, eps: float
) -> tuple[designer.Mechanism, ProviderReport]:
    """Optimal binary uniform mechanism for the provider problem.

    Output conditionals are ``P_Y +- eps P_{Y|X} P_{Z|X}^-1 [sqrt(P_Z)] L*``
    and the protected-variable posteriors ``P_Z +- eps [sqrt(P_Z)] L*``
    saturate the budget exactly. The approximate utility is
    ``(eps^2 / 2) * sigma^2`` with sigma the selected singular value.
    """
    if eps <= 0.0:
        raise ValidationError(f"eps must be positive, got {eps!r}")
    w1, w2, product = build_factors(scenario)
    case, direction = _select_direction(product, scenario.pz)
    selected_sigma = float(np.linalg.norm(product.w @ direction.l))

    shift = scenario.p_y_given_x.entries @ (scenario.p_z_given_x.inverse() @ direction.j)
    hard_bound = min(
        designer._simplex_bound(scenario.py.entries, shift),
        designer._simplex_bound(scenario.pz.entries, direction.j),
    )
    if eps >= hard_bound:
        raise InfeasibleEpsilonError(
            f"eps = {eps!r} is infeasible: the construction leaves the simplex at "
            f"{hard_bound!r}"
        )

    pu = ProbVector([0.5, 0.5])
    conditionals = (
        ProbVector(scenario.py.entries + eps * shift),
        ProbVector(scenario.py.entries - eps * shift),
    )
    z_posteriors = (
        ProbVector(scenario.pz.entries + eps * direction.j),
        ProbVector(scenario.pz.entries - eps * direction.j),
    )
    mechanism = designer.Mechanism.assemble(pu, conditionals, z_posteriors, eps)

    designer._audit_mixture(pu, conditionals, scenario.py, "output")
    designer._audit_mixture(pu, z_posteriors, scenario.pz, "protected posterior")
    chi2_per_letter = tuple(chi2_divergence(p, scenario.pz) for p in z_posteriors)
    budget = eps * eps
    gate = budget * (1.0 + 1e-9) + 1e-12 * eps  # rounding allowance, see designer
    for u, value in enumerate(chi2_per_letter):
        if value > gate:
            raise NumericalError(
                f"per-letter audit failed at u={u}: chi2 {value!r} > budget {budget!r}"
            )

    report = ProviderReport(
        epsilon=eps,
        w1=w1,
        w2=w2,
        product=product,
        case=case,
        chosen_direction=direction,
        selected_sigma=selected_sigma,
        approx_utility_nats=0.5 * eps**2 * selected_sigma**2,
        exact_utility_nats=mutual_information(
            JointDistribution.from_mixture(pu, conditionals)
        ),
        protected_mi_nats=mutual_information(
            JointDistribution.from_mixture(pu, z_posteriors)
        ),
        chi2_per_letter=chi2_per_letter,
        eps_bound_posthoc=hard_bound,
    )
    return mechanism, report
