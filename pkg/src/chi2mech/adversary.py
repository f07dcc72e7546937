"""Design under a fixed invertible binary channel between user and adversary.

The disclosed symbol U reaches the adversary only through a known 2x2
channel, U' = channel(U), and the privacy criterion binds on (X, U') rather
than (X, U). Inverting the channel

    P_{U|U'} = [[x, y], [z, t]],   P_{U|U'}^-1 = [[a, c], [b, d]]

turns the problem into the base geometry: the optimal perturbation direction
is still the principal right-singular vector psi of W, but the two U-letters
carry it with weights (a - b) and (c - d), and the optimal P_U is reshaped
so that the adversary-side marginal P_{U'} is exactly uniform. Because the
constraint binds on the degraded variable, the achievable utility is at
least the base value and grows with the channel noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import designer
from .errors import (
    InfeasibleEpsilonError,
    NumericalError,
    SingularMatrixError,
    ValidationError,
)
from .infometrics import chi2_divergence, chi2_information, mutual_information
from .probability import ChannelMatrix, JointDistribution, ProbVector

#: |det| threshold below which the channel cannot be inverted meaningfully.
DETERMINANT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BinaryChannel:
    """A 2x2 invertible user-to-adversary channel with its inverse coefficients.

    ``coefficient_class`` is "A2" when the determinant is positive
    (a, d >= 1 and b, c <= 0) and "A1" when it is negative (the mirrored
    signs); every invertible stochastic 2x2 channel falls in exactly one.
    """

    forward: ChannelMatrix
    a: float
    b: float
    c: float
    d: float
    coefficient_class: Literal["A1", "A2"]

    def __post_init__(self) -> None:
        if abs(self.a + self.b - 1.0) > 1e-12 or abs(self.c + self.d - 1.0) > 1e-12:
            raise NumericalError("inverse coefficient pairs must each sum to 1")
        a, b, c, d = self.a, self.b, self.c, self.d
        tol = 1e-12
        in_a1 = a <= tol and d <= tol and b >= 1.0 - tol and c >= 1.0 - tol
        in_a2 = a >= 1.0 - tol and d >= 1.0 - tol and b <= tol and c <= tol
        if self.coefficient_class == "A1" and not in_a1:
            raise NumericalError(f"coefficients {(a, b, c, d)} are not in class A1")
        if self.coefficient_class == "A2" and not in_a2:
            raise NumericalError(f"coefficients {(a, b, c, d)} are not in class A2")

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array([[self.a, self.c], [self.b, self.d]])


def invert_binary_channel(
    forward: ChannelMatrix, *, determinant_threshold: float = DETERMINANT_TOL
) -> BinaryChannel:
    """Invert a 2x2 stochastic channel and classify its coefficients.

    With columns [x, z] and [y, t], the determinant is xt - zy and the
    inverse coefficients are a = t/det, b = -z/det, c = -y/det, d = x/det.
    Raises ``SingularMatrixError`` when the determinant is below threshold
    (the design formulas divide by it).
    """
    if forward.n_outputs != 2 or forward.n_inputs != 2:
        raise ValidationError(
            f"binary channel must be 2x2, got {forward.n_outputs}x{forward.n_inputs}"
        )
    x, y = float(forward.entries[0, 0]), float(forward.entries[0, 1])
    z, t = float(forward.entries[1, 0]), float(forward.entries[1, 1])
    det = x * t - z * y
    if abs(det) <= determinant_threshold:
        raise SingularMatrixError(
            f"channel determinant {det:.3e} is below threshold "
            f"{determinant_threshold:.0e}; the design is undefined"
        )
    a, b, c, d = t / det, -z / det, -y / det, x / det
    klass: Literal["A1", "A2"] = "A2" if det > 0 else "A1"
    return BinaryChannel(forward, a, b, c, d, klass)


def induced_u_constraint(channel: BinaryChannel, eps: float) -> tuple[float, float]:
    """Privacy bounds induced on (X, U) by the criterion on (X, U').

    Returns ``(eps^2 (a^2 + b^2), eps^2 (c^2 + d^2))``. Here ``eps`` is the
    budget of the averaged convention (criterion value eps^2 / 2 per
    adversary letter); a mechanism whose per-letter value at U' equals
    beta^2 corresponds to eps = sqrt(2) * beta.
    """
    e2 = eps * eps
    return (
        e2 * (channel.a**2 + channel.b**2),
        e2 * (channel.c**2 + channel.d**2),
    )


@dataclass(frozen=True, eq=False)
class AdversaryDesignReport:
    """Audit record for an adversarial design."""

    epsilon: float
    sigma: float
    psi: designer.PerturbationDirection
    pu: ProbVector
    pu_prime: ProbVector
    coefficients: tuple[float, float, float, float]
    coefficient_class: str
    approx_utility_nats: float
    exact_utility_nats: float
    chi2_u_prime: tuple[float, float]
    chi2_u: tuple[float, float]
    induced_bounds: tuple[float, float]
    chi2_information_u: float
    chi2_information_u_prime: float
    eps_bound_posthoc: float

    def __post_init__(self) -> None:
        if float(np.abs(self.pu_prime.entries - 0.5).max()) > 1e-12:
            raise NumericalError("adversary-side marginal must be exactly uniform")
        for value, bound in zip(self.chi2_u, self.induced_bounds):
            if value > bound * (1.0 + 1e-9):
                raise NumericalError(
                    f"induced per-letter bound violated: {value!r} > {bound!r}"
                )
        if self.chi2_information_u_prime > self.chi2_information_u * (1.0 + 1e-9) + 1e-18:
            raise NumericalError("post-processing inequality violated")


def design_adversarial_mechanism(
    leakage: ChannelMatrix,
    py: ProbVector,
    channel: BinaryChannel,
    eps: float,
) -> tuple[designer.Mechanism, AdversaryDesignReport]:
    """Optimal mechanism when the criterion binds on the channel output U'.

    The adversary-side perturbations are ``+- eps [sqrt(P_X)] psi`` (both
    letters saturate the budget), the user-side letters carry coefficients
    (a - b) and (c - d), and

        P_U = [(c - 1/2)/(c - a), (1/2 - a)/(c - a)]

    makes P_{U'} uniform. The approximate utility is
    ``2 eps^2 sigma^2 (c - 1/2)(1/2 - a)``, equal to the base value for a
    noiseless channel and larger otherwise.
    """
    if eps <= 0.0:
        raise ValidationError(f"eps must be positive, got {eps!r}")
    leakage.require_invertible()
    py.require_strictly_positive()
    px = designer.derive_px(leakage, py)
    w = designer.build_w(leakage, py)
    psi = designer.principal_direction(w, px)

    a, b, c, d = channel.a, channel.b, channel.c, channel.d
    coef = (a - b, c - d)
    shift = designer.output_shift(leakage, psi)

    # Feasibility: both U-letters (coefficient-scaled) and both U'-letters
    # (unit-scaled) must stay inside the simplex.
    worst = max(abs(coef[0]), abs(coef[1]), 1.0)
    hard_bound = min(
        designer._simplex_bound(py.entries, worst * shift),
        designer._simplex_bound(px.entries, worst * psi.j),
    )
    if eps >= hard_bound:
        raise InfeasibleEpsilonError(
            f"eps = {eps!r} is infeasible for this channel: the construction "
            f"leaves the simplex at {hard_bound!r}"
        )

    pu = ProbVector([(c - 0.5) / (c - a), (0.5 - a) / (c - a)])
    conditionals = tuple(
        ProbVector(py.entries + eps * k * shift) for k in coef
    )
    posteriors = tuple(ProbVector(px.entries + eps * k * psi.j) for k in coef)
    mechanism = designer.Mechanism.assemble(pu, conditionals, posteriors, eps)

    designer._audit_mixture(pu, conditionals, py, "output")
    designer._audit_mixture(pu, posteriors, px, "posterior")

    pu_prime_vec = channel.inverse_matrix @ pu.entries
    if float(np.abs(pu_prime_vec - 0.5).max()) > 1e-10:
        raise NumericalError("channel inversion did not produce a uniform P_U'")
    pu_prime = ProbVector([0.5, 0.5])

    adversary_posteriors = (
        ProbVector(px.entries + eps * psi.j),
        ProbVector(px.entries - eps * psi.j),
    )
    chi2_u_prime = tuple(chi2_divergence(p, px) for p in adversary_posteriors)
    chi2_u = tuple(chi2_divergence(p, px) for p in posteriors)
    # The criterion value at U' is eps^2 per letter, i.e. the averaged
    # convention's budget is sqrt(2) * eps; the induced bounds use that.
    bounds = induced_u_constraint(channel, math.sqrt(2.0) * eps)

    report = AdversaryDesignReport(
        epsilon=eps,
        sigma=w.sigma_max,
        psi=psi,
        pu=pu,
        pu_prime=pu_prime,
        coefficients=(a, b, c, d),
        coefficient_class=channel.coefficient_class,
        approx_utility_nats=2.0 * eps**2 * w.sigma_max**2 * (c - 0.5) * (0.5 - a),
        exact_utility_nats=mutual_information(
            JointDistribution.from_mixture(pu, conditionals)
        ),
        chi2_u_prime=chi2_u_prime,
        chi2_u=chi2_u,
        induced_bounds=bounds,
        chi2_information_u=chi2_information(list(posteriors), pu, px),
        chi2_information_u_prime=chi2_information(
            list(adversary_posteriors), pu_prime, px
        ),
        eps_bound_posthoc=hard_bound,
    )
    return mechanism, report
