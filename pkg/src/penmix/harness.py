"""Monte-Carlo replication driver: fit, label-match, and aggregate.

Each replication draws a dataset from a catalog model, builds the ten
starting values, runs the multi-start EM for one method, matches the
estimated components to the truth by mean distance, and returns the
per-parameter errors.  Replications are seeded individually, so a study
can run at any parallelism level and produce identical reports.
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .catalog import ModelSpec, make_starts, replication_seed, resolve_model, sample, start_seed
from .em import EmConfig, multi_start_fit
from .exceptions import AllDegenerate, DimensionMismatch, InsufficientReplications
from .mixture import MixingDistribution, PenaltySpec, sample_covariance

REPORT_SCHEMA = "penmix.simulation-report/1"

NUM_STARTS = 10


@dataclass(frozen=True)
class MethodSpec:
    """An estimation method: the name fixes the penalty-strength rule."""

    name: str  # "MLE", "PMLE1", or "PMLE2"

    def __post_init__(self):
        if self.name not in ("MLE", "PMLE1", "PMLE2"):
            raise ValueError(f"unknown method {self.name!r}")

    def a_n(self, n: int) -> float:
        if self.name == "MLE":
            return 0.0
        if self.name == "PMLE1":
            return 1.0 / n
        return n ** -0.5


MLE = MethodSpec("MLE")
PMLE1 = MethodSpec("PMLE1")
PMLE2 = MethodSpec("PMLE2")


def method_from_name(name: str) -> MethodSpec:
    return MethodSpec(name.upper())


def parameter_names(p: int, d: int) -> list:
    """Canonical parameter order: per component, weight, mean, upper-triangle covariance."""
    names = []
    for j in range(1, p + 1):
        names.append(f"c{j}.pi")
        names.extend(f"c{j}.mu{k}" for k in range(1, d + 1))
        names.extend(f"c{j}.sigma{r}{s}" for r in range(1, d + 1) for s in range(r, d + 1))
    return names


def parameter_vector(g: MixingDistribution) -> np.ndarray:
    """Flatten a mixture into the canonical parameter order."""
    rows, cols = np.triu_indices(g.dim)
    parts = []
    for j in range(g.order):
        parts.append([g.weights[j]])
        parts.append(g.means[j])
        parts.append(g.covs[j][rows, cols])
    return np.concatenate(parts)


@dataclass(frozen=True)
class Permutation:
    """Assignment of estimated components to true components."""

    est_to_true: tuple

    def __post_init__(self):
        if sorted(self.est_to_true) != list(range(len(self.est_to_true))):
            raise ValueError(f"{self.est_to_true!r} is not a permutation")

    def apply(self, g: MixingDistribution) -> MixingDistribution:
        """Reorder the estimated components into truth order."""
        order = [0] * len(self.est_to_true)
        for est_idx, true_idx in enumerate(self.est_to_true):
            order[true_idx] = est_idx
        return g.reordered(order)


def match_components(est: MixingDistribution, truth: MixingDistribution) -> Permutation:
    """Bijection minimizing the total squared distance between matched means.

    Exhaustive search over all p! assignments (p <= 3 here); ties go to the
    lexicographically smallest assignment.  Weights and covariances are
    ignored: means separate the components in every catalog model, and
    mixing covariances into the cost would need an arbitrary metric.
    """
    if est.dim != truth.dim or est.order != truth.order:
        raise DimensionMismatch("mixtures must share dimension and order")
    best_perm = None
    best_cost = math.inf
    for cand in permutations(range(truth.order)):
        cost = sum(
            float(np.sum((est.means[e] - truth.means[t]) ** 2))
            for e, t in enumerate(cand)
        )
        if cost < best_cost:
            best_cost = cost
            best_perm = cand
    return Permutation(best_perm)


@dataclass
class ReplicationOutcome:
    """Errors and degeneracy tally from one replication of one method."""

    rep_index: int
    errors: np.ndarray | None  # None when the replication failed
    degeneracies: int
    failed: bool = False


def run_replication(
    model: ModelSpec,
    method: MethodSpec,
    rep_index: int,
    base_seed: int,
    cfg: EmConfig | None = None,
    n: int | None = None,
) -> ReplicationOutcome:
    """One full replication: sample, fit from ten starts, match, difference.

    A replication where every unpenalized run degenerates is returned as
    failed; it carries the full degeneracy tally but no error vector.
    """
    truth = resolve_model(model)
    n = model.n if n is None else n
    rep_seed = replication_seed(base_seed, model.model_index, rep_index)
    data = sample(truth, n, rep_seed)
    starts = make_starts(data, truth, start_seed(rep_seed))
    spec = PenaltySpec(method.a_n(n), sample_covariance(data))
    try:
        fit = multi_start_fit(data, starts, spec, cfg)
    except AllDegenerate:
        return ReplicationOutcome(rep_index, None, len(starts), failed=True)
    aligned = match_components(fit.best.estimate, truth).apply(fit.best.estimate)
    errors = parameter_vector(aligned) - parameter_vector(truth)
    return ReplicationOutcome(rep_index, errors, fit.degeneracy_count)


def aggregate(errors: list) -> tuple:
    """Per-parameter mean bias and sample standard deviation (n-1 divisor).

    Sums use exactly rounded accumulation, so the result does not depend
    on replication order.
    """
    if len(errors) < 2:
        raise InsufficientReplications(f"need >= 2 replications, got {len(errors)}")
    arr = np.asarray(errors, dtype=float)
    n_rep, n_par = arr.shape
    bias = np.array([math.fsum(arr[:, k]) / n_rep for k in range(n_par)])
    std = np.array(
        [
            math.sqrt(math.fsum((arr[:, k] - bias[k]) ** 2) / (n_rep - 1))
            for k in range(n_par)
        ]
    )
    return bias, std


@dataclass
class MethodReport:
    """Aggregated results for one method on one model."""

    method: str
    a_n: float
    bias: np.ndarray
    std: np.ndarray
    degeneracy_count: int
    total_starts: int
    failed_replications: int
    raw_errors: np.ndarray | None = None


@dataclass
class SimulationReport:
    """Per-model study results for every requested method."""

    model: ModelSpec
    n: int
    replications: int
    base_seed: int
    parameters: list
    truth: np.ndarray
    methods: list = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = {
            "schema": REPORT_SCHEMA,
            "model_id": self.model.model_id,
            "p": self.model.order,
            "d": self.model.dim,
            "n": self.n,
            "replications": self.replications,
            "seed": self.base_seed,
            "methods": [],
            "degeneracy": {},
            "failures": {},
        }
        for m in self.methods:
            rows = [
                {
                    "parameter": name,
                    "truth": float(t),
                    "bias": float(b),
                    "std": float(s),
                }
                for name, t, b, s in zip(self.parameters, self.truth, m.bias, m.std)
            ]
            block = {"method": m.method, "a_n": m.a_n, "parameters": rows}
            if m.raw_errors is not None:
                block["raw_errors"] = [[float(v) for v in row] for row in m.raw_errors]
            doc["methods"].append(block)
            doc["degeneracy"][m.method] = {
                "count": m.degeneracy_count,
                "out_of": m.total_starts,
            }
            doc["failures"][m.method] = m.failed_replications
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def method_report(self, name: str) -> MethodReport:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)


def _run_task(args) -> tuple:
    model, method, rep_index, base_seed, cfg, n = args
    return model.model_id, method.name, run_replication(model, method, rep_index, base_seed, cfg, n)


def run_study(
    models: list,
    methods: list,
    replications: int,
    base_seed: int = 1,
    cfg: EmConfig | None = None,
    parallelism: int = 1,
    n: int | None = None,
    keep_errors: bool = False,
) -> list:
    """Run every (model, method, replication) combination and aggregate.

    Results are keyed by replication index, so the report is identical for
    any parallelism level.  ``n`` overrides the catalog sample size for
    every model, which supports consistency sweeps.
    """
    if replications < 2:
        raise InsufficientReplications("a study needs at least 2 replications")
    tasks = [
        (model, method, r, base_seed, cfg, n)
        for model in models
        for method in methods
        for r in range(replications)
    ]
    outcomes: dict = {}
    if parallelism > 1:
        chunk = max(1, len(tasks) // (parallelism * 8))
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for model_id, method_name, outcome in pool.map(_run_task, tasks, chunksize=chunk):
                outcomes.setdefault((model_id, method_name), []).append(outcome)
    else:
        for task in tasks:
            model_id, method_name, outcome = _run_task(task)
            outcomes.setdefault((model_id, method_name), []).append(outcome)

    reports = []
    for model in models:
        truth = resolve_model(model)
        model_n = model.n if n is None else n
        report = SimulationReport(
            model=model,
            n=model_n,
            replications=replications,
            base_seed=base_seed,
            parameters=parameter_names(model.order, model.dim),
            truth=parameter_vector(truth),
        )
        for method in methods:
            results = sorted(outcomes[(model.model_id, method.name)], key=lambda o: o.rep_index)
            ok = [o for o in results if not o.failed]
            errors = [o.errors for o in ok]
            bias, std = aggregate(errors)
            report.methods.append(
                MethodReport(
                    method=method.name,
                    a_n=method.a_n(model_n),
                    bias=bias,
                    std=std,
                    degeneracy_count=sum(o.degeneracies for o in results),
                    total_starts=replications * NUM_STARTS,
                    failed_replications=sum(1 for o in results if o.failed),
                    raw_errors=np.asarray(errors) if keep_errors else None,
                )
            )
        reports.append(report)
    return reports
