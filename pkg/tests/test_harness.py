"""Tests for component matching, aggregation, and the study driver."""

import math
from itertools import permutations

import numpy as np
import pytest

from penmix.catalog import parse_model_id, resolve_model
from penmix.em import EmConfig
from penmix.exceptions import DimensionMismatch, InsufficientReplications
from penmix.harness import (
    MLE,
    PMLE1,
    PMLE2,
    Permutation,
    aggregate,
    match_components,
    method_from_name,
    parameter_names,
    parameter_vector,
    run_replication,
    run_study,
)
from penmix.mixture import MixingDistribution


def mixture_at(means, weights=None):
    means = np.asarray(means, dtype=float)
    p, d = means.shape
    w = np.full(p, 1.0 / p) if weights is None else np.asarray(weights, dtype=float)
    return MixingDistribution(w, means, np.broadcast_to(np.eye(d), (p, d, d)))


class TestMethodSpec:
    def test_rates(self):
        assert MLE.a_n(200) == 0.0
        assert PMLE1.a_n(200) == pytest.approx(1.0 / 200)
        assert PMLE2.a_n(200) == pytest.approx(200 ** -0.5)

    def test_from_name(self):
        assert method_from_name("pmle2") == PMLE2
        with pytest.raises(ValueError):
            method_from_name("other")


class TestParameterVector:
    def test_names_2d(self):
        assert parameter_names(2, 2) == [
            "c1.pi", "c1.mu1", "c1.mu2", "c1.sigma11", "c1.sigma12", "c1.sigma22",
            "c2.pi", "c2.mu1", "c2.mu2", "c2.sigma11", "c2.sigma12", "c2.sigma22",
        ]

    def test_names_3d_upper_triangle_order(self):
        names = parameter_names(1, 3)
        assert names == [
            "c1.pi", "c1.mu1", "c1.mu2", "c1.mu3",
            "c1.sigma11", "c1.sigma12", "c1.sigma13",
            "c1.sigma22", "c1.sigma23", "c1.sigma33",
        ]

    def test_vector_matches_names(self):
        g = resolve_model(parse_model_id("I.2.4"))
        vec = parameter_vector(g)
        names = parameter_names(2, 2)
        assert len(vec) == len(names)
        d = dict(zip(names, vec))
        assert d["c1.pi"] == pytest.approx(0.3)
        assert d["c1.mu2"] == pytest.approx(-3.0)
        assert d["c1.sigma11"] == pytest.approx(5.0)
        assert d["c2.sigma22"] == pytest.approx(1.0)


class TestMatchComponents:
    def test_identity(self):
        g = mixture_at([[0.0, -3.0], [0.0, 3.0]])
        assert match_components(g, g).est_to_true == (0, 1)

    def test_swap(self):
        truth = mixture_at([[0.0, -3.0], [0.0, 3.0]])
        est = mixture_at([[0.0, 3.0], [0.0, -3.0]])
        perm = match_components(est, truth)
        assert perm.est_to_true == (1, 0)
        aligned = perm.apply(est)
        np.testing.assert_allclose(aligned.means, truth.means)

    def test_three_components_with_noise_matches_bruteforce(self):
        rng = np.random.default_rng(5)
        truth = mixture_at([[0.0, -2.0], [3.0, 0.0], [0.0, 2.0]])
        for _ in range(25):
            order = rng.permutation(3)
            est = mixture_at(truth.means[order] + rng.normal(0, 0.2, (3, 2)))
            got = match_components(est, truth).est_to_true
            # independent brute force over all 6 assignments
            best, best_cost = None, math.inf
            for cand in permutations(range(3)):
                cost = sum(
                    np.sum((est.means[e] - truth.means[t]) ** 2)
                    for e, t in enumerate(cand)
                )
                if cost < best_cost:
                    best, best_cost = cand, cost
            assert got == best

    def test_always_optimal_bijection(self):
        rng = np.random.default_rng(6)
        for p in (2, 3):
            for _ in range(50):
                truth = mixture_at(rng.normal(0, 3, (p, 2)))
                est = mixture_at(rng.normal(0, 3, (p, 2)))
                perm = match_components(est, truth)
                assert sorted(perm.est_to_true) == list(range(p))
                cost_star = sum(
                    np.sum((est.means[e] - truth.means[t]) ** 2)
                    for e, t in enumerate(perm.est_to_true)
                )
                for cand in permutations(range(p)):
                    cost = sum(
                        np.sum((est.means[e] - truth.means[t]) ** 2)
                        for e, t in enumerate(cand)
                    )
                    assert cost_star <= cost + 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            match_components(mixture_at([[0.0, 0.0]]), mixture_at([[0.0, 0.0, 0.0]]))

    def test_permutation_validates(self):
        with pytest.raises(ValueError):
            Permutation((0, 0))


class TestAggregate:
    def test_identical_vectors_zero_std(self):
        errors = [np.array([0.5, -1.0])] * 4
        bias, std = aggregate(errors)
        np.testing.assert_allclose(bias, [0.5, -1.0])
        np.testing.assert_allclose(std, [0.0, 0.0])

    def test_two_point_formula(self):
        bias, std = aggregate([np.array([-1.0]), np.array([1.0])])
        assert bias[0] == 0.0
        assert std[0] == pytest.approx(math.sqrt(2.0))

    def test_matches_spreadsheet_oracle(self):
        errors = [
            np.array([0.1, -0.2]),
            np.array([0.3, 0.1]),
            np.array([-0.1, 0.0]),
            np.array([0.2, -0.3]),
            np.array([0.0, 0.4]),
        ]
        bias, std = aggregate(errors)
        # independent column-wise computation (equal up to summation order)
        cols = np.array(errors)
        np.testing.assert_allclose(bias, cols.mean(axis=0), rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(std, cols.std(axis=0, ddof=1), rtol=1e-12)

    def test_order_invariant_exactly(self):
        rng = np.random.default_rng(9)
        errors = [rng.normal(size=6) for _ in range(31)]
        bias1, std1 = aggregate(errors)
        shuffled = [errors[i] for i in rng.permutation(31)]
        bias2, std2 = aggregate(shuffled)
        np.testing.assert_array_equal(bias1, bias2)
        np.testing.assert_array_equal(std1, std2)

    def test_insufficient(self):
        with pytest.raises(InsufficientReplications):
            aggregate([np.zeros(3)])


class TestRunReplication:
    def test_deterministic(self):
        model = parse_model_id("I.2.1")
        a = run_replication(model, PMLE2, 3, base_seed=7)
        b = run_replication(model, PMLE2, 3, base_seed=7)
        np.testing.assert_array_equal(a.errors, b.errors)
        assert a.degeneracies == b.degeneracies

    def test_penalized_never_degenerate(self):
        model = parse_model_id("I.2.1")
        for r in range(5):
            out = run_replication(model, PMLE2, r, base_seed=1)
            assert out.degeneracies == 0 and not out.failed

    def test_n_override(self):
        model = parse_model_id("I.2.1")
        out = run_replication(model, PMLE2, 0, base_seed=1, n=80)
        assert out.errors is not None


class TestPublishedValues:
    def test_i24_mle_sigma22_bias(self):
        # component-1 sigma22 mean error over 100 replications lands near
        # the published -0.02 (0.19) cell
        model = parse_model_id("I.2.4")
        report = run_study([model], [MLE], replications=100, base_seed=1, parallelism=2)[0]
        idx = report.parameters.index("c1.sigma22")
        m = report.method_report("MLE")
        assert abs(m.bias[idx] - (-0.02)) <= 0.06
        assert m.failed_replications == 0


class TestRunStudy:
    def test_report_structure_and_determinism(self):
        model = parse_model_id("I.2.4")
        cfg = EmConfig()
        kwargs = dict(replications=6, base_seed=3, cfg=cfg)
        r1 = run_study([model], [MLE, PMLE2], parallelism=1, **kwargs)[0]
        r2 = run_study([model], [MLE, PMLE2], parallelism=2, **kwargs)[0]
        assert r1.to_json() == r2.to_json()
        assert [m.method for m in r1.methods] == ["MLE", "PMLE2"]
        assert r1.parameters == parameter_names(2, 2)
        doc = r1.to_dict()
        assert doc["model_id"] == "I.2.4"
        assert doc["n"] == 200 and doc["replications"] == 6
        assert doc["degeneracy"]["PMLE2"]["count"] == 0
        assert doc["degeneracy"]["MLE"]["out_of"] == 60

    def test_insufficient_replications(self):
        model = parse_model_id("I.2.4")
        with pytest.raises(InsufficientReplications):
            run_study([model], [PMLE2], replications=1)

    def test_keep_errors(self):
        model = parse_model_id("I.2.4")
        rep = run_study([model], [PMLE2], replications=4, base_seed=2, keep_errors=True)[0]
        raw = rep.method_report("PMLE2").raw_errors
        assert raw.shape == (4, 12)
        bias, _ = aggregate(list(raw))
        np.testing.assert_array_equal(bias, rep.method_report("PMLE2").bias)
