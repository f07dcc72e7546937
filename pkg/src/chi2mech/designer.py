"""Core design pipeline for strongly chi-square-private disclosure.

Given an invertible leakage channel ``P_{X|Y}`` (private X, useful Y) and the
output marginal ``P_Y``, the per-letter criterion

    chi2(P_{X|U=u} || P_X) <= eps^2  for every disclosed symbol u

confines every posterior to an eps-ball around the prior. Writing the
posterior deviation as ``eps * [sqrt(P_X)] L`` with a unit direction L
orthogonal to sqrt(P_X), the disclosed information I(U;Y) is, to second
order, ``(eps^2 / 2) * ||W L||^2`` with

    W = [sqrt(P_Y)^-1] P_{X|Y}^-1 [sqrt(P_X)].

The optimal direction is therefore the principal right-singular vector of W,
and a binary uniform U with opposite perturbations attains the optimum. This
module builds W, extracts the direction, constructs the mechanism, and audits
it (consistency, saturation, validity ranges, and the spectral tightness
certificate via the inverse matrix Q = W^-1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    InfeasibleEpsilonError,
    NumericalError,
    ValidationError,
)
from .infometrics import chi2_divergence, mutual_information
from .probability import (
    INVERTIBILITY_TOL,
    ChannelMatrix,
    JointDistribution,
    ProbVector,
    _freeze,
)

log = logging.getLogger("chi2mech")

#: |sigma_min(W) - 1| tolerance for a W built from a valid leakage pair.
SIGMA_MIN_TOL = 1e-7
#: Orthogonality tolerance between the chosen direction and sqrt(prior).
ORTHOGONALITY_TOL = 1e-8
#: sigma_max within this of 1 means the whole spectrum is degenerate at 1.
DEGENERATE_TOL = 1e-7
#: Mixture-consistency tolerance for constructed mechanisms.
MIXTURE_TOL = 1e-10
#: Relative SVD reconstruction tolerance.
RECONSTRUCTION_TOL = 1e-9


def deterministic_svd(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD with a deterministic sign convention.

    Returns ``(singular_values, left_vectors, right_vectors)`` with vectors
    in columns and singular values descending (padded with zeros so there is
    one per right vector). In each right-singular vector the entry of
    largest magnitude is made positive; ties resolve to the lowest index
    (``argmax`` on the absolute values).
    """
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(arr, full_matrices=True)
    v = vt.T
    rank = s.size  # min(m, n)
    if v.shape[1] > rank:
        s = np.concatenate([s, np.zeros(v.shape[1] - rank)])
    for i in range(v.shape[1]):
        col = v[:, i]
        if col[np.argmax(np.abs(col))] < 0.0:
            v[:, i] = -col
            if i < u.shape[1]:
                u[:, i] = -u[:, i]
    recon = u[:, :rank] @ (s[:rank, None] * v[:, :rank].T)
    scale = max(1.0, float(np.linalg.norm(arr)))
    if float(np.linalg.norm(arr - recon)) > RECONSTRUCTION_TOL * scale:
        raise NumericalError("SVD reconstruction error exceeds tolerance")
    return s, u, v


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """A matrix together with its full singular value decomposition.

    ``right_vectors`` and ``left_vectors`` hold the singular vectors in
    columns, matched to the descending ``singular_values``.
    """

    w: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def __post_init__(self) -> None:
        for name in ("w", "singular_values", "left_vectors", "right_vectors"):
            object.__setattr__(self, name, _freeze(np.array(getattr(self, name), dtype=float)))
        s = self.singular_values
        if np.any(np.diff(s) > 1e-12) or np.any(s < 0):
            raise NumericalError("singular values must be descending and non-negative")
        rank = min(self.w.shape)
        resid = self.w @ self.right_vectors[:, :rank] - self.left_vectors[:, :rank] * s[:rank]
        scale = max(1.0, float(np.linalg.norm(self.w)))
        if float(np.abs(resid).max()) > 1e-9 * scale:
            raise NumericalError("singular triplets do not reproduce the matrix action")

    @property
    def in_dim(self) -> int:
        return int(self.w.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.w.shape[0])

    @property
    def dimension(self) -> int:
        return self.in_dim

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])


def decompose(matrix: np.ndarray) -> DesignMatrix:
    """Wrap a matrix with its deterministic SVD."""
    s, u, v = deterministic_svd(matrix)
    return DesignMatrix(matrix, s, u, v)


def derive_px(leakage: ChannelMatrix, py: ProbVector) -> ProbVector:
    """Prior on the private variable: P_X = P_{X|Y} P_Y.

    Raises ``ValidationError`` if the result has a zero entry, since the
    design divides by P_X throughout.
    """
    px = leakage.apply(py)
    vec = ProbVector(px)
    if not vec.is_strictly_positive:
        raise ValidationError(
            "derived prior P_X has a zero entry; the positivity assumption fails"
        )
    return vec


def build_w(
    leakage: ChannelMatrix,
    py: ProbVector,
    *,
    invertibility_threshold: float = INVERTIBILITY_TOL,
) -> DesignMatrix:
    """Assemble W = [sqrt(P_Y)^-1] P_{X|Y}^-1 [sqrt(P_X)] with its SVD.

    For any valid invertible leakage pair, the spectrum of W lies in
    [1, inf) and sqrt(P_X) is a right-singular vector at exactly 1; both
    facts are asserted here as construction guards.
    """
    leakage.require_invertible(invertibility_threshold)
    if leakage.n_inputs != py.dimension:
        raise ValidationError(
            f"leakage has {leakage.n_inputs} inputs but P_Y has dimension {py.dimension}"
        )
    py.require_strictly_positive()
    px = derive_px(leakage, py)
    w = (1.0 / py.sqrt())[:, None] * leakage.inverse() * px.sqrt()[None, :]
    design = decompose(w)
    if abs(design.sigma_min - 1.0) > SIGMA_MIN_TOL:
        raise NumericalError(
            f"smallest singular value of W is {design.sigma_min!r}, not 1 within "
            f"{SIGMA_MIN_TOL:.0e}; the leakage matrix is too ill-conditioned"
        )
    root = px.sqrt()
    if float(np.abs(w.T @ (w @ root) - root).max()) > SIGMA_MIN_TOL:
        raise NumericalError("sqrt(P_X) is not a unit-singular-value direction of W")
    return design


@dataclass(frozen=True, eq=False)
class PerturbationDirection:
    """A feasible posterior perturbation direction.

    ``l`` is the unit direction in the whitened space (orthogonal to
    sqrt(prior)); ``j = [sqrt(prior)] l`` is the raw deviation added to the
    prior per unit of budget. ``sum(j) = 0`` keeps the perturbed vector a
    distribution, and ``||l|| <= 1`` is the budget ball.
    """

    l: np.ndarray
    j: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "l", _freeze(np.array(self.l, dtype=float)))
        object.__setattr__(self, "j", _freeze(np.array(self.j, dtype=float)))
        norm = float(np.linalg.norm(self.l))
        if norm > 1.0 + 1e-12:
            raise ValidationError(f"direction norm {norm!r} exceeds the unit ball")
        if abs(float(self.j.sum())) > 1e-10:
            raise ValidationError("perturbation does not conserve probability mass")

    @classmethod
    def from_unit(cls, l: np.ndarray, prior: ProbVector) -> "PerturbationDirection":
        root = prior.sqrt()
        if abs(float(root @ l)) > ORTHOGONALITY_TOL:
            raise ValidationError(
                "direction is not orthogonal to sqrt(prior) "
                f"(inner product {float(root @ l):.3e})"
            )
        return cls(l, root * l)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.l))


def _deflated_direction(
    vectors: np.ndarray, root: np.ndarray
) -> np.ndarray:
    """Deterministic unit direction orthogonal to ``root``.

    Tries the singular-vector columns in the order second, first, third, ...
    and removes their ``root`` component; falls back to deflating a standard
    basis vector. Used only when the relevant singular value is degenerate,
    where every feasible direction attains the same objective.
    """
    dim = vectors.shape[0]
    order = [1, 0] + list(range(2, vectors.shape[1]))
    candidates = [vectors[:, i] for i in order if i < vectors.shape[1]]
    candidates += [np.eye(dim)[i] for i in range(dim)]
    for cand in candidates:
        residual = cand - (root @ cand) * root
        norm = float(np.linalg.norm(residual))
        if norm > 1e-6:
            unit = residual / norm
            if unit[np.argmax(np.abs(unit))] < 0.0:
                unit = -unit
            return unit
    raise NumericalError("no direction orthogonal to sqrt(prior) found")


def principal_direction(w: DesignMatrix, px: ProbVector) -> PerturbationDirection:
    """Optimal perturbation direction: the principal right-singular vector of W.

    Right-singular vectors of distinct singular values are orthogonal, and
    sqrt(P_X) spans the unit singular value, so whenever sigma_max > 1 the
    top vector is automatically feasible. If the whole spectrum is
    degenerate at 1, every feasible direction is optimal and a deterministic
    tie-break is returned.
    """
    if w.in_dim != px.dimension:
        raise ValidationError(
            f"design matrix has input dimension {w.in_dim}, prior has {px.dimension}"
        )
    root = px.sqrt()
    top = w.right_vectors[:, 0]
    if abs(float(root @ top)) <= ORTHOGONALITY_TOL:
        unit = top / float(np.linalg.norm(top))
        return PerturbationDirection.from_unit(unit, px)
    if w.sigma_max > 1.0 + DEGENERATE_TOL:
        raise ValidationError(
            "principal right-singular vector is not orthogonal to sqrt(P_X); "
            "the matrix was not built from a valid leakage pair"
        )
    # Degenerate spectrum: sigma_max = sigma_min = 1, any feasible direction works.
    unit = _deflated_direction(w.right_vectors, root)
    return PerturbationDirection.from_unit(unit, px)


class EpsilonBounds(NamedTuple):
    """Validity thresholds for the budget, in the order (leakage approximation,
    utility approximation, simplex)."""

    #: Sufficient for the second-order leakage expansion: min(P_X)/sqrt(max(P_X)).
    leakage_approx: float
    #: Sufficient for the second-order utility expansion:
    #: sigma_min(P_{X|Y}) * min(P_Y) / sqrt(max(P_X)).
    utility_approx: float
    #: Mechanism-specific: largest eps keeping the perturbed output
    #: conditionals inside the simplex, min_y P_Y(y)/|shift(y)|.
    simplex: float


def output_shift(leakage: ChannelMatrix, direction: PerturbationDirection) -> np.ndarray:
    """Per-unit-budget shift of the output distribution: P_{X|Y}^-1 [sqrt(P_X)] l."""
    return leakage.inverse() @ direction.j


def _simplex_bound(base: np.ndarray, shift: np.ndarray) -> float:
    """Largest eps with base + eps*shift and base - eps*shift both >= 0."""
    mask = np.abs(shift) > 1e-15
    if not mask.any():
        return float("inf")
    return float(np.min(base[mask] / np.abs(shift[mask])))


def epsilon_bounds(
    leakage: ChannelMatrix,
    py: ProbVector,
    px: ProbVector,
    direction: PerturbationDirection,
) -> EpsilonBounds:
    """A-priori sufficient bounds and the mechanism-specific simplex bound."""
    max_px = float(px.entries.max())
    leakage_approx = float(px.entries.min()) / float(np.sqrt(max_px))
    utility_approx = (
        leakage.min_singular_value() * float(py.entries.min()) / float(np.sqrt(max_px))
    )
    shift = output_shift(leakage, direction)
    return EpsilonBounds(leakage_approx, utility_approx, _simplex_bound(py.entries, shift))


@dataclass(frozen=True, eq=False)
class Mechanism:
    """A disclosure mechanism: P_U plus per-u output conditionals and posteriors.

    ``output_conditionals[u]`` is the distribution of the useful variable
    given U=u; ``posteriors[u]`` the distribution of the protected variable
    given U=u. ``kernel`` is the induced column-stochastic map from the
    useful variable to U (Bayes).
    """

    pu: ProbVector
    output_conditionals: tuple[ProbVector, ...]
    posteriors: tuple[ProbVector, ...]
    epsilon: float
    kernel: ChannelMatrix

    def __post_init__(self) -> None:
        n = self.pu.dimension
        if len(self.output_conditionals) != n or len(self.posteriors) != n:
            raise ValidationError("one conditional and one posterior per u required")
        if self.kernel.n_outputs != n:
            raise ValidationError("kernel rows must match the cardinality of U")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be non-negative")

    @classmethod
    def assemble(
        cls,
        pu: ProbVector,
        output_conditionals: Sequence[ProbVector],
        posteriors: Sequence[ProbVector],
        epsilon: float,
    ) -> "Mechanism":
        """Build the mechanism and derive the disclosure kernel P(U|Y) by Bayes."""
        mix = np.zeros(output_conditionals[0].dimension)
        for w, cond in zip(pu.entries, output_conditionals):
            mix += w * cond.entries
        if mix.min() <= 0.0:
            raise ValidationError("output mixture must be strictly positive")
        kernel = ChannelMatrix(
            np.stack([w * c.entries / mix for w, c in zip(pu.entries, output_conditionals)])
        )
        return cls(pu, tuple(output_conditionals), tuple(posteriors), float(epsilon), kernel)

    def output_marginal(self) -> ProbVector:
        return JointDistribution.from_mixture(self.pu, self.output_conditionals).col_marginal()

    def posterior_marginal(self) -> ProbVector:
        return JointDistribution.from_mixture(self.pu, self.posteriors).col_marginal()

    def output_joint(self) -> JointDistribution:
        return JointDistribution.from_mixture(self.pu, self.output_conditionals)

    def posterior_joint(self) -> JointDistribution:
        return JointDistribution.from_mixture(self.pu, self.posteriors)

    def utility_nats(self) -> float:
        """Exact I(U; Y) of the constructed mechanism."""
        return mutual_information(self.output_joint())

    def leakage_nats(self) -> float:
        """Exact mutual information between U and the protected variable."""
        return mutual_information(self.posterior_joint())

    def per_letter_chi2(self, prior: ProbVector | None = None) -> tuple[float, ...]:
        """chi2(posterior_u || prior) per u; prior defaults to the posterior mixture."""
        ref = prior if prior is not None else self.posterior_marginal()
        return tuple(chi2_divergence(post, ref) for post in self.posteriors)

    def relabeled(self) -> "Mechanism":
        """The same mechanism with the two u labels swapped (binary U only)."""
        if self.pu.dimension != 2:
            raise ValidationError("relabeling is defined for binary U")
        return Mechanism.assemble(
            ProbVector(self.pu.entries[::-1]),
            self.output_conditionals[::-1],
            self.posteriors[::-1],
            self.epsilon,
        )


def _audit_mixture(
    pu: ProbVector, parts: Sequence[ProbVector], target: ProbVector, what: str
) -> None:
    mix = np.zeros(target.dimension)
    for w, part in zip(pu.entries, parts):
        mix += w * part.entries
    err = float(np.abs(mix - target.entries).max())
    if err > MIXTURE_TOL:
        raise NumericalError(
            f"mechanism {what} mixture deviates from the marginal by {err:.3e}"
        )


@dataclass(frozen=True, eq=False)
class DesignReport:
    """Audit record for a base design."""

    epsilon: float
    sigma_max: float
    singular_values: tuple[float, ...]
    l_star: PerturbationDirection
    approx_utility_nats: float
    exact_utility_nats: float
    leakage_mi_nats: float
    chi2_per_letter: tuple[float, ...]
    eps_bound_leakage_approx: float
    eps_bound_utility_approx: float
    eps_bound_posthoc: float
    lambda_min: float
    above_apriori_bounds: bool

    def __post_init__(self) -> None:
        expected = 0.5 * self.epsilon**2 * self.sigma_max**2
        if abs(self.approx_utility_nats - expected) > 1e-9 * max(1.0, expected):
            raise NumericalError("approximate utility is inconsistent with sigma_max")
        if abs(self.lambda_min * self.sigma_max**2 - 1.0) > 1e-9:
            raise NumericalError("lambda_min is not the reciprocal of sigma_max^2")


def spectral_tightness(
    leakage: ChannelMatrix, py: ProbVector
) -> tuple[np.ndarray, float]:
    """Tightness certificate for the spectral utility bound.

    Builds Q = [sqrt(P_X)^-1] P_{X|Y} [sqrt(P_Y)], the inverse of W, and
    returns it with ``lambda_min = sigma_min(Q)^2``, asserting the
    reciprocal relation lambda_min * sigma_max(W)^2 = 1. The achievable
    utility coefficient therefore meets the spectral upper bound
    eps^2 / lambda_min.
    """
    py.require_strictly_positive()
    px = derive_px(leakage, py)
    q = (1.0 / px.sqrt())[:, None] * leakage.entries * py.sqrt()[None, :]
    w = build_w(leakage, py)
    smin_q = float(np.linalg.svd(q, compute_uv=False).min())
    lambda_min = smin_q**2
    if abs(lambda_min * w.sigma_max**2 - 1.0) > 1e-9:
        raise NumericalError("Q and W are not spectral reciprocals within tolerance")
    return q, lambda_min


def design_mechanism(
    leakage: ChannelMatrix,
    py: ProbVector,
    eps: float,
    *,
    invertibility_threshold: float = INVERTIBILITY_TOL,
) -> tuple[Mechanism, DesignReport]:
    """Construct the optimal binary uniform mechanism at budget ``eps``.

    Posteriors are ``P_X +- eps [sqrt(P_X)] L*`` and output conditionals
    ``P_Y +- eps P_{X|Y}^-1 [sqrt(P_X)] L*``, so both letters saturate the
    per-letter budget exactly. Raises ``InfeasibleEpsilonError`` when eps
    would push a constructed distribution out of the simplex; logs a warning
    (and flags the report) when eps exceeds the a-priori approximation
    bounds but the construction itself is still valid.
    """
    if eps <= 0.0:
        raise ValidationError(f"eps must be positive, got {eps!r}")
    leakage.require_invertible(invertibility_threshold)
    py.require_strictly_positive()
    px = derive_px(leakage, py)
    w = build_w(leakage, py, invertibility_threshold=invertibility_threshold)
    direction = principal_direction(w, px)
    bounds = epsilon_bounds(leakage, py, px, direction)
    posterior_bound = _simplex_bound(px.entries, direction.j)
    hard_bound = min(bounds.simplex, posterior_bound)
    if eps >= hard_bound:
        raise InfeasibleEpsilonError(
            f"eps = {eps!r} is infeasible: the construction leaves the simplex at "
            f"{hard_bound!r} (output bound {bounds.simplex!r}, posterior bound "
            f"{posterior_bound!r})"
        )
    above_apriori = bool(eps > min(bounds.leakage_approx, bounds.utility_approx))
    if above_apriori:
        log.warning(
            "eps=%g exceeds the a-priori approximation bounds (%g, %g); the "
            "mechanism is valid but the quadratic approximation guarantees weaken",
            eps,
            bounds.leakage_approx,
            bounds.utility_approx,
        )

    shift = output_shift(leakage, direction)
    posteriors = (
        ProbVector(px.entries + eps * direction.j),
        ProbVector(px.entries - eps * direction.j),
    )
    conditionals = (
        ProbVector(py.entries + eps * shift),
        ProbVector(py.entries - eps * shift),
    )
    pu = ProbVector([0.5, 0.5])
    mechanism = Mechanism.assemble(pu, conditionals, posteriors, eps)

    _audit_mixture(pu, conditionals, py, "output")
    _audit_mixture(pu, posteriors, px, "posterior")
    chi2_per_letter = tuple(chi2_divergence(post, px) for post in posteriors)
    budget = eps * eps
    # The absolute term covers rounding in (prior + eps*j) - prior, which
    # scales with eps rather than eps^2 and dominates at tiny budgets.
    gate = budget * (1.0 + 1e-9) + 1e-12 * eps
    for u, value in enumerate(chi2_per_letter):
        if value > gate:
            raise NumericalError(
                f"per-letter audit failed at u={u}: chi2 {value!r} > budget {budget!r}"
            )

    _, lambda_min = spectral_tightness(leakage, py)
    report = DesignReport(
        epsilon=eps,
        sigma_max=w.sigma_max,
        singular_values=tuple(float(s) for s in w.singular_values),
        l_star=direction,
        approx_utility_nats=0.5 * eps**2 * w.sigma_max**2,
        exact_utility_nats=mutual_information(
            JointDistribution.from_mixture(pu, conditionals)
        ),
        leakage_mi_nats=mutual_information(
            JointDistribution.from_mixture(pu, posteriors)
        ),
        chi2_per_letter=chi2_per_letter,
        eps_bound_leakage_approx=bounds.leakage_approx,
        eps_bound_utility_approx=bounds.utility_approx,
        eps_bound_posthoc=bounds.simplex,
        lambda_min=lambda_min,
        above_apriori_bounds=above_apriori,
    )
    return mechanism, report
