"""EM iteration for penalized and unpenalized normal-mixture likelihood.

The M-step has a closed form: weights and means are the usual
responsibility-weighted averages, and each covariance update blends the
weighted scatter about the new mean with the anchor matrix,

    Sigma_j = (2 a_n * anchor + S_j) / (2 a_n + n_j),

so any positive penalty strength keeps every update positive definite.
With ``a_n = 0`` the iteration is plain maximum likelihood and can run off
toward a singular component covariance; runs are cut off and flagged as
degenerate once a component's smallest eigenvalue falls below a
configurable fraction of the anchor's.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .exceptions import (
    AllDegenerate,
    AllZeroRow,
    DimensionMismatch,
    InvalidInit,
    NotPositiveDefinite,
    PreconditionViolated,
)
from .linalg import cholesky_lower
from .mixture import (
    MixingDistribution,
    PenaltySpec,
    _penalty_term,
    component_log_densities,
    sample_mean,
    validate_data,
)

# Below this responsibility mass a component is treated as empty in the M-step.
EMPTY_COMPONENT_MASS = 1e-10


@dataclass(frozen=True)
class EmConfig:
    """Iteration cap, convergence tolerance, and degeneracy threshold."""

    max_iterations: int = 2000
    rel_tolerance: float = 1e-8
    degeneracy_eigen_ratio: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.rel_tolerance > 0.0 and self.degeneracy_eigen_ratio > 0.0):
            raise ValueError("tolerances must be positive")


@dataclass
class FitResult:
    """Outcome of one EM run."""

    estimate: MixingDistribution
    pll_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    degenerate: bool = False

    @property
    def final_pll(self) -> float:
        return self.pll_trace[-1] if self.pll_trace else -math.inf


class MultiStartResult(NamedTuple):
    best: FitResult
    results: list
    degeneracy_count: int


def e_step(data: np.ndarray, g: MixingDistribution) -> np.ndarray:
    """Posterior membership probabilities, one row per observation.

    Each row is normalized through a log-sum-exp of the component log
    densities, so underflow of individual terms is harmless.
    """
    data = validate_data(data)
    logdens = component_log_densities(data, g)
    row_max = logdens.max(axis=1)
    if not np.all(np.isfinite(row_max)):
        raise AllZeroRow("every component log-density is -inf for some observation")
    lse = row_max + np.log(np.exp(logdens - row_max[:, None]).sum(axis=1))
    return np.exp(logdens - lse[:, None])


def m_step(
    data: np.ndarray,
    resp: np.ndarray,
    spec: PenaltySpec,
    prev: MixingDistribution | None = None,
) -> MixingDistribution:
    """Closed-form maximizer of the expected complete penalized log-likelihood.

    ``prev`` supplies the carried-over mean when a component receives
    essentially no responsibility mass; without it the overall data mean is
    used.  With ``a_n = 0`` an empty or rank-deficient component has no
    positive definite update and :class:`NotPositiveDefinite` is raised,
    which callers map to degeneracy.
    """
    data = validate_data(data)
    n, d = data.shape
    resp = np.asarray(resp, dtype=float)
    if resp.ndim != 2 or resp.shape[0] != n:
        raise DimensionMismatch(f"resp must be (n, p) with n = {n}, got {resp.shape}")
    if spec.dim != d:
        raise DimensionMismatch(f"anchor dim {spec.dim} != data dim {d}")
    row_sums = resp.sum(axis=1)
    if np.max(np.abs(row_sums - 1.0)) > 1e-6:
        raise PreconditionViolated("responsibility rows must sum to 1")
    p = resp.shape[1]
    a_n = spec.a_n
    mass = resp.sum(axis=0)
    weights = mass / n
    means = np.empty((p, d))
    covs = np.empty((p, d, d))
    for j in range(p):
        if mass[j] < EMPTY_COMPONENT_MASS:
            if a_n == 0.0:
                raise NotPositiveDefinite(f"component {j} received no mass")
            means[j] = prev.means[j] if prev is not None else sample_mean(data)
        else:
            means[j] = resp[:, j] @ data / mass[j]
        diff = data - means[j]
        scatter = (resp[:, j, None] * diff).T @ diff
        covs[j] = (2.0 * a_n * spec.anchor + scatter) / (2.0 * a_n + mass[j])
        if a_n == 0.0:
            linalg.cholesky_lower(linalg.symmetrize(covs[j]))  # raises on rank deficiency
    return MixingDistribution(weights, means, covs)


def detect_degeneracy(g: MixingDistribution, anchor: np.ndarray, ratio: float) -> bool:
    """True when any component covariance is singular relative to the anchor.

    The test is scale-free: the smallest eigenvalue of each component is
    compared against ``ratio`` times the smallest eigenvalue of the anchor.
    """
    floor = ratio * linalg.min_eigenvalue(anchor)
    return any(linalg.min_eigenvalue(g.covs[j]) < floor for j in range(g.order))


def em_fit(
    data: np.ndarray,
    init: MixingDistribution,
    spec: PenaltySpec,
    cfg: EmConfig | None = None,
) -> FitResult:
    """Run EM from one initial value until convergence, cap, or degeneracy.

    The trace records the penalized log-likelihood of the current estimate
    at the top of each iteration; it is nondecreasing up to floating-point
    slack.  Convergence is declared when the change falls below
    ``rel_tolerance`` relative to max(1, |previous value|).  Unpenalized
    runs stop as soon as the degeneracy test fires; penalized runs cannot
    go degenerate because their objective is bounded above.

    The loop fuses :func:`e_step`, :func:`m_step`, and :func:`penalty`:
    each component covariance is factored once per iteration and the
    estimate is carried as raw arrays until the result is assembled.
    """
    cfg = cfg or EmConfig()
    data = validate_data(data)
    n, d = data.shape
    if init.dim != d:
        raise InvalidInit(f"init dim {init.dim} != data dim {d}")
    if spec.dim != d:
        raise InvalidInit(f"anchor dim {spec.dim} != data dim {d}")
    a_n = spec.a_n
    anchor = spec.anchor
    eye = np.eye(d)
    eigen_floor = cfg.degeneracy_eigen_ratio * linalg.min_eigenvalue(anchor)
    half_const = 0.5 * d * linalg.LOG_2PI

    p = init.order
    weights = init.weights.copy()
    means = init.means.copy()
    covs = init.covs.copy()

    def below_floor(cs):
        return any(float(np.linalg.eigvalsh(cs[j])[0]) < eigen_floor for j in range(p))

    trace: list[float] = []
    converged = False
    degenerate = below_floor(covs)
    iterations = 0
    prev_pll = None
    prev_state = None
    logdens = np.empty((n, p))
    while iterations < cfg.max_iterations and not (degenerate and a_n == 0.0):
        pen = 0.0
        try:
            for j in range(p):
                L = cholesky_lower(covs[j])
                L_inv = solve_triangular(L, eye, lower=True, check_finite=False)
                log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
                z = (data - means[j]) @ L_inv.T
                maha = np.einsum("ij,ij->i", z, z)
                log_w = np.log(weights[j]) if weights[j] > 0.0 else -np.inf
                logdens[:, j] = log_w - half_const - 0.5 * log_det - 0.5 * maha
                if a_n > 0.0:
                    pen += _penalty_term(a_n, anchor, L_inv, log_det)
        except NotPositiveDefinite:
            # an update can slip past the eigenvalue floor yet fail to factor
            degenerate = True
            if prev_state is not None:
                weights, means, covs = prev_state
            break
        row_max = logdens.max(axis=1)
        if not np.all(np.isfinite(row_max)):
            raise AllZeroRow("every component log-density is -inf for some observation")
        lse = row_max + np.log(np.exp(logdens - row_max[:, None]).sum(axis=1))
        pll = float(lse.sum()) + pen
        trace.append(pll)
        iterations += 1
        if prev_pll is not None and abs(pll - prev_pll) < cfg.rel_tolerance * max(1.0, abs(prev_pll)):
            converged = True
            break
        prev_pll = pll
        resp = np.exp(logdens - lse[:, None])
        prev_state = (weights, means, covs)
        mass = resp.sum(axis=0)
        new_means = np.empty_like(means)
        new_covs = np.empty_like(covs)
        collapsed = False
        for j in range(p):
            if mass[j] < EMPTY_COMPONENT_MASS:
                if a_n == 0.0:
                    collapsed = True
                    break
                new_means[j] = means[j]
            else:
                new_means[j] = resp[:, j] @ data / mass[j]
            diff = data - new_means[j]
            scatter = (resp[:, j, None] * diff).T @ diff
            new_covs[j] = (2.0 * a_n * anchor + scatter) / (2.0 * a_n + mass[j])
        if collapsed:
            degenerate = True
            break
        weights, means, covs = mass / n, new_means, new_covs
        degenerate = below_floor(covs)
    return FitResult(
        estimate=MixingDistribution(weights, means, covs),
        pll_trace=trace,
        iterations=iterations,
        converged=converged,
        degenerate=degenerate,
    )


def multi_start_fit(
    data: np.ndarray,
    starts: list,
    spec: PenaltySpec,
    cfg: EmConfig | None = None,
) -> MultiStartResult:
    """Run EM from every start and pick the winner.

    For the unpenalized likelihood, degenerate runs are removed first and
    the winner is the surviving run with the largest likelihood (the
    ratified MLE); :class:`AllDegenerate` is raised when nothing survives.
    For a positive penalty the winner is simply the run with the largest
    penalized log-likelihood.
    """
    if not starts:
        raise InvalidInit("at least one start is required")
    d, p = starts[0].dim, starts[0].order
    for s in starts[1:]:
        if s.dim != d or s.order != p:
            raise InvalidInit("all starts must share the same dimension and order")
    results = [em_fit(data, s, spec, cfg) for s in starts]
    degeneracy_count = sum(1 for r in results if r.degenerate)
    if spec.a_n == 0.0:
        survivors = [r for r in results if not r.degenerate]
        if not survivors:
            raise AllDegenerate(f"all {len(results)} unpenalized runs degenerated")
        best = max(survivors, key=lambda r: r.final_pll)
    else:
        best = max(results, key=lambda r: r.final_pll)
    return MultiStartResult(best=best, results=results, degeneracy_count=degeneracy_count)


def ellipsoid_count(data: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> int:
    """Count observations inside the Mahalanobis ball of squared radius (log|sigma|)^2.

    Only defined for |sigma| < exp(-4 d); this is the statistic whose
    growth must stay under control for near-singular covariances.
    """
    data = validate_data(data)
    d = data.shape[1]
    sigma = linalg.symmetrize(sigma)
    if sigma.shape[0] != d:
        raise DimensionMismatch(f"sigma dim {sigma.shape[0]} != data dim {d}")
    L = linalg.cholesky_lower(sigma)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    if not log_det < -4.0 * d:
        raise PreconditionViolated(f"|sigma| = exp({log_det:.3g}) is not below exp(-4d)")
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (d,):
        raise DimensionMismatch(f"mu has shape {mu.shape}, expected ({d},)")
    maha = linalg.mahalanobis_sq_rows(data, mu, L)
    return int(np.count_nonzero(maha <= log_det ** 2))
