"""Mixing distributions, mixture likelihoods, and the covariance penalty.

A finite normal mixture is parameterized by a :class:`MixingDistribution`
(weights, means, covariances).  The penalty shrinks component covariances
toward an anchor matrix, normally the sample covariance of the data being
fit; it acts like an inverse-Wishart prior mode and keeps the penalized
objective bounded even when a component covariance heads toward
singularity.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .exceptions import DimensionMismatch, PreconditionViolated

MIXING_SCHEMA = "penmix.mixing-distribution/1"

_WEIGHT_SUM_TOL = 1e-10


@dataclass(frozen=True)
class MixingDistribution:
    """A finite normal mixture: weights, means, and covariances.

    Arrays are canonicalized to float64, covariances symmetrized by
    mirroring the lower triangle, and everything frozen read-only so that
    instances can be shared between threads.
    """

    weights: np.ndarray  # (p,)
    means: np.ndarray    # (p, d)
    covs: np.ndarray     # (p, d, d)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).copy()
        means = np.asarray(self.means, dtype=float).copy()
        covs = np.asarray(self.covs, dtype=float).copy()
        if weights.ndim != 1 or weights.size < 1:
            raise DimensionMismatch("weights must be a nonempty 1-d array")
        p = weights.size
        if means.ndim != 2 or means.shape[0] != p:
            raise DimensionMismatch(f"means must have shape ({p}, d), got {means.shape}")
        d = means.shape[1]
        if covs.shape != (p, d, d):
            raise DimensionMismatch(f"covs must have shape ({p}, {d}, {d}), got {covs.shape}")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValueError("mixture parameters must be finite")
        if np.any(weights < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        for j in range(p):
            covs[j] = linalg.symmetrize(covs[j])
        for a in (weights, means, covs):
            a.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def order(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component(self, j: int):
        """(weight, mean, cov) of component j."""
        return float(self.weights[j]), self.means[j], self.covs[j]

    def reordered(self, order) -> "MixingDistribution":
        """A copy with components permuted into the given order."""
        idx = list(order)
        if sorted(idx) != list(range(self.order)):
            raise ValueError(f"{order!r} is not a permutation of 0..{self.order - 1}")
        return MixingDistribution(self.weights[idx], self.means[idx], self.covs[idx])

    def to_dict(self) -> dict:
        return {
            "schema": MIXING_SCHEMA,
            "dim": self.dim,
            "order": self.order,
            "components": [
                {
                    "weight": float(self.weights[j]),
                    "mean": [float(v) for v in self.means[j]],
                    "cov": [[float(v) for v in row] for row in self.covs[j]],
                }
                for j in range(self.order)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "MixingDistribution":
        comps = doc["components"]
        if len(comps) != doc["order"]:
            raise ValueError("component count does not match declared order")
        weights = [c["weight"] for c in comps]
        means = [c["mean"] for c in comps]
        covs = [c["cov"] for c in comps]
        g = cls(np.array(weights), np.array(means), np.array(covs))
        if g.dim != doc["dim"]:
            raise ValueError("component dimension does not match declared dim")
        return g

    @classmethod
    def from_json(cls, text: str) -> "MixingDistribution":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty strength and anchor matrix.

    ``a_n = 0`` encodes the unpenalized likelihood.  The anchor must be
    positive definite; it is normally the sample covariance of the data
    being fit and is supplied explicitly so fitted and ground-truth
    evaluations share one anchor.
    """

    a_n: float
    anchor: np.ndarray  # (d, d) SPD

    def __post_init__(self):
        a_n = float(self.a_n)
        if not (a_n >= 0.0 and math.isfinite(a_n)):
            raise ValueError(f"a_n must be finite and >= 0, got {a_n!r}")
        anchor = linalg.symmetrize(self.anchor)
        linalg.cholesky_lower(anchor)  # raises NotPositiveDefinite
        anchor.flags.writeable = False
        object.__setattr__(self, "a_n", a_n)
        object.__setattr__(self, "anchor", anchor)

    @property
    def dim(self) -> int:
        return self.anchor.shape[0]


def validate_data(data: np.ndarray) -> np.ndarray:
    """Coerce to a finite (n, d) float64 array."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise DimensionMismatch(f"data must be (n, d) with n, d >= 1, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("data contains non-finite entries")
    return data


def sample_mean(data: np.ndarray) -> np.ndarray:
    return validate_data(data).mean(axis=0)


def sample_covariance(data: np.ndarray) -> np.ndarray:
    """Sample covariance with the n-1 divisor."""
    data = validate_data(data)
    if data.shape[0] < 2:
        raise PreconditionViolated("sample covariance needs at least 2 rows")
    return linalg.symmetrize(np.cov(data, rowvar=False, ddof=1).reshape(data.shape[1], data.shape[1]))


def component_log_densities(data: np.ndarray, g: MixingDistribution) -> np.ndarray:
    """(n, p) matrix of log(pi_j * phi(x_i; mu_j, Sigma_j)).

    Zero-weight components contribute -inf columns, which vanish under
    log-sum-exp.
    """
    n, d = data.shape
    if g.dim != d:
        raise DimensionMismatch(f"mixture dim {g.dim} != data dim {d}")
    out = np.empty((n, g.order))
    with np.errstate(divide="ignore"):
        log_w = np.log(g.weights)
    for j in range(g.order):
        L = linalg.cholesky_lower(g.covs[j])
        half_log_det = float(np.sum(np.log(np.diag(L))))
        maha = linalg.mahalanobis_sq_rows(data, g.means[j], L)
        out[:, j] = log_w[j] - 0.5 * d * linalg.LOG_2PI - half_log_det - 0.5 * maha
    return out


def _log_sum_exp_rows(logdens: np.ndarray) -> np.ndarray:
    m = logdens.max(axis=1)
    if not np.all(np.isfinite(m)):
        return m  # callers treat non-finite rows as errors
    return m + np.log(np.exp(logdens - m[:, None]).sum(axis=1))


def mixture_logpdf(x: np.ndarray, g: MixingDistribution) -> float:
    """log sum_j pi_j phi(x; mu_j, Sigma_j), evaluated via log-sum-exp."""
    x = np.asarray(x, dtype=float)
    if x.shape != (g.dim,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({g.dim},)")
    logdens = component_log_densities(x[None, :], g)
    return float(_log_sum_exp_rows(logdens)[0])


def log_likelihood(data: np.ndarray, g: MixingDistribution) -> float:
    """Sum of mixture log-densities over the rows of data."""
    data = validate_data(data)
    logdens = component_log_densities(data, g)
    return float(_log_sum_exp_rows(logdens).sum())


def _penalty_term(a_n: float, anchor: np.ndarray, L_inv: np.ndarray, log_det: float) -> float:
    # tr(anchor Sigma^{-1}) = tr(L^{-1} anchor L^{-T}) via the factor inverse
    trace = float(np.sum((L_inv @ anchor) * L_inv))
    return -a_n * (trace + log_det)


def _component_penalty(a_n: float, anchor: np.ndarray, cov: np.ndarray) -> float:
    L = linalg.cholesky_lower(cov)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    L_inv = solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
    return _penalty_term(a_n, anchor, L_inv, log_det)


def penalty(g: MixingDistribution, spec: PenaltySpec) -> float:
    """-a_n * sum_j { tr(anchor Sigma_j^{-1}) + log|Sigma_j| }.

    Additive over components; a_n = 0 short-circuits to exactly 0.
    """
    if g.dim != spec.dim:
        raise DimensionMismatch(f"mixture dim {g.dim} != anchor dim {spec.dim}")
    if spec.a_n == 0.0:
        return 0.0
    total = 0.0
    for j in range(g.order):
        total += _component_penalty(spec.a_n, spec.anchor, g.covs[j])
    return total


def penalized_log_likelihood(data: np.ndarray, g: MixingDistribution, spec: PenaltySpec) -> float:
    return log_likelihood(data, g) + penalty(g, spec)


def check_penalty_c3(spec: PenaltySpec, sigma: np.ndarray, n: int) -> bool:
    """Check the degenerate-regime bound on the per-component penalty.

    Requires |sigma| < n^{-2d} (constant fixed at 1).  Returns True when
    the component penalty is at most 4 (log n)^2 log|sigma|, the negative
    bound that must swamp the unbounded likelihood contribution of a
    near-singular component.
    """
    sigma = linalg.symmetrize(sigma)
    d = sigma.shape[0]
    log_det = linalg.log_det(sigma)
    if not log_det < -2.0 * d * math.log(n):
        raise PreconditionViolated(
            f"|sigma| = exp({log_det:.3g}) is not below n^(-2d) = {n ** (-2 * d):.3g}"
        )
    lhs = _component_penalty(spec.a_n, spec.anchor, sigma)
    rhs = 4.0 * math.log(n) ** 2 * log_det
    return lhs <= rhs
