"""Information and estimation metrics on finite distributions.

All divergences and mutual informations are returned in nats (the local
quadratic approximations used by the design pipeline are stated for natural
logarithms); ``to_bits`` converts. The ``0 * log 0 = 0`` convention applies
throughout.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .probability import JointDistribution, ProbVector

LN2 = math.log(2.0)


def to_bits(nats: float) -> float:
    return nats / LN2


def _check_same_dimension(p: ProbVector, q: ProbVector) -> None:
    if p.dimension != q.dimension:
        raise ValidationError(
            f"dimension mismatch: {p.dimension} vs {q.dimension}"
        )


def kl_divergence(p: ProbVector, q: ProbVector) -> float:
    """Kullback-Leibler divergence D(p || q) in nats.

    Requires q > 0 wherever p > 0; raises ``ValidationError`` on a support
    violation (the divergence would be infinite).
    """
    _check_same_dimension(p, q)
    pe, qe = p.entries, q.entries
    mask = pe > 0.0
    if np.any(qe[mask] == 0.0):
        idx = int(np.argmax(mask & (qe == 0.0)))
        raise ValidationError(
            f"support violation at index {idx}: p > 0 where q = 0"
        )
    val = float(np.sum(pe[mask] * np.log(pe[mask] / qe[mask])))
    # Rounding can push the value a hair below zero when p ~ q.
    return max(val, 0.0) if val > -1e-15 else val


def chi2_divergence(p: ProbVector, q: ProbVector) -> float:
    """Chi-square divergence sum((p - q)^2 / q); requires q strictly positive."""
    _check_same_dimension(p, q)
    q.require_strictly_positive()
    diff = p.entries - q.entries
    return float(np.sum(diff * diff / q.entries))


def mutual_information(joint: JointDistribution) -> float:
    """Mutual information of a joint table in nats.

    Zero iff the joint factorizes into its marginals; symmetric under
    transposition.
    """
    table = joint.entries
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    prod = np.outer(rows, cols)
    mask = table > 0.0
    val = float(np.sum(table[mask] * np.log(table[mask] / prod[mask])))
    return max(val, 0.0)


def chi2_information(
    posteriors: Sequence[ProbVector], pu: ProbVector, prior: ProbVector
) -> float:
    """Averaged chi-square divergence of the posteriors from the prior.

    This is the expectation over ``pu`` of the per-letter divergence, the
    averaged companion of the per-letter privacy criterion.
    """
    if len(posteriors) != pu.dimension:
        raise ValidationError(
            f"{len(posteriors)} posteriors for {pu.dimension} weights"
        )
    return float(
        sum(
            w * chi2_divergence(post, prior)
            for w, post in zip(pu.entries, posteriors)
            if w > 0.0
        )
    )


def mmse_binary(posterior: ProbVector) -> float:
    """Minimum mean-square error of estimating a {0,1} variable from its posterior.

    Equals Var(X | the observation that induced this posterior), i.e.
    p1 * (1 - p1).
    """
    if posterior.dimension != 2:
        raise ValidationError(
            f"binary posterior required, got dimension {posterior.dimension}"
        )
    p1 = posterior[1]
    return p1 * (1.0 - p1)


def error_probability(pu: ProbVector, outputs: Sequence[ProbVector]) -> float:
    """P(Y != U) for binary U with output conditionals P(Y | U=u)."""
    if pu.dimension != 2:
        raise ValidationError(f"binary U required, got dimension {pu.dimension}")
    if len(outputs) != 2 or any(o.dimension != 2 for o in outputs):
        raise ValidationError("two binary output conditionals required")
    return pu[0] * outputs[0][1] + pu[1] * outputs[1][0]
