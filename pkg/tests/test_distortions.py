"""Rule families, error classification, and the structural checkers."""

import json

import numpy as np
import pytest

from blackwell_audit.distortions import (
    BayesRule,
    CoarseRule,
    GretherRule,
    GridMiss,
    ShrinkageRule,
    StubbornRule,
    StubbornSpec,
    TabulatedRule,
    TrivialRule,
    WrongDimension,
    classify_error,
    evaluate,
    evaluate_batch,
    is_affine,
    is_occasionally_coarse,
    is_occasionally_stubborn,
    is_trivial_on_interior,
    parse_rule,
    pushforward,
    random_rule,
    rule_from_json,
    stubborn_example_a,
    stubborn_example_b,
)
from blackwell_audit.experiments import PosteriorDistribution, PriorNotInterior, is_mpc
from blackwell_audit.decision import (
    DecisionProblem,
    Selector,
    WelfareMode,
    expected_payoff,
)

MU2 = (0.5, 0.5)
MU3 = (1 / 3, 1 / 3, 1 / 3)


class TestEvaluate:
    def test_bayes_identity(self):
        rng = np.random.default_rng(0)
        X = rng.dirichlet(np.ones(3), size=20)
        assert np.allclose(evaluate_batch(BayesRule(3), MU3, X), X)

    def test_grether_overreaction(self):
        img = evaluate(GretherRule(2.0, 1.0, 2), MU2, (0.7, 0.3))
        assert img.coords[0] == pytest.approx(0.49 / 0.58, abs=1e-12)
        assert img.coords[1] == pytest.approx(0.09 / 0.58, abs=1e-12)

    def test_grether_fixes_vertices(self):
        for n in (2, 3):
            rule = GretherRule(2.0, 1.5, n)
            mu = np.full(n, 1.0 / n)
            for i in range(n):
                e = np.eye(n)[i]
                assert evaluate(rule, mu, e).allclose(e)

    def test_coarse_piecewise_cases(self):
        rule = CoarseRule(0.3, 0.7, 0.2, 0.8)
        assert evaluate(rule, MU2, (0.1, 0.9)).allclose((0.3, 0.7))
        assert evaluate(rule, MU2, (0.5, 0.5)).allclose((0.5, 0.5))
        assert evaluate(rule, MU2, (0.0, 1.0)).allclose((0.2, 0.8))
        assert evaluate(rule, MU2, (1.0, 0.0)).allclose((0.8, 0.2))
        assert evaluate(rule, MU2, (0.95, 0.05)).allclose((0.7, 0.3))

    def test_coarse_parameter_validation(self):
        with pytest.raises(ValueError):
            CoarseRule(0.7, 0.3, 0.2, 0.8)
        with pytest.raises(ValueError):
            CoarseRule(0.3, 0.7, 0.5, 0.8)

    def test_shrinkage_pull(self):
        img = evaluate(ShrinkageRule(0.5, 2), MU2, (0.9, 0.1))
        assert img.allclose((0.7, 0.3))

    def test_trivial_constant(self):
        rule = TrivialRule((0.2, 0.3, 0.5))
        assert evaluate(rule, MU3, (0.9, 0.05, 0.05)).allclose((0.2, 0.3, 0.5))

    def test_requires_interior_prior(self):
        with pytest.raises(PriorNotInterior):
            evaluate(BayesRule(2), (1.0, 0.0), (0.5, 0.5))

    def test_tabulated_lookup_and_miss(self):
        rule = TabulatedRule([(0.25, 0.75), (0.75, 0.25)], [(0.3, 0.7), (0.7, 0.3)], tol=0.05)
        assert evaluate(rule, MU2, (0.26, 0.74)).allclose((0.3, 0.7))
        with pytest.raises(GridMiss):
            evaluate(rule, MU2, (0.5, 0.5))


class TestStubbornFamily:
    def test_example_a_pointwise(self):
        rule = stubborn_example_a()
        assert evaluate(rule, MU3, (0.4, 0.4, 0.2)).allclose((0.2, 1 / 3, 1 - 0.2 - 1 / 3))
        assert evaluate(rule, MU3, (1, 0, 0)).allclose((1, 0, 0))
        assert evaluate(rule, MU3, (0, 1, 0)).allclose((0.3, 0.5, 0.2))
        assert evaluate(rule, MU3, (0, 0, 1)).allclose((0.2, 1 / 6, 1 - 0.2 - 1 / 6))
        # Edges collapse too.
        assert evaluate(rule, MU3, (0.5, 0.5, 0)).allclose((0.2, 1 / 3, 1 - 0.2 - 1 / 3))

    def test_example_b_pointwise(self):
        rule = stubborn_example_b()
        star = (0.5, 0.5, 0.0)
        assert evaluate(rule, MU3, (0.2, 0.3, 0.5)).allclose(star)
        # Split edge: collapse toward the second vertex, identity beyond.
        assert evaluate(rule, MU3, (0.3, 0.7, 0.0)).allclose(star)
        assert evaluate(rule, MU3, (0.7, 0.3, 0.0)).allclose((0.7, 0.3, 0.0))
        # The fully-correct edge.
        assert evaluate(rule, MU3, (0.4, 0.0, 0.6)).allclose((0.4, 0.0, 0.6))
        # Remaining edge collapses.
        assert evaluate(rule, MU3, (0.0, 0.4, 0.6)).allclose(star)
        assert evaluate(rule, MU3, (0, 1, 0)).allclose((0.3, 0.7, 0.0))

    def test_spec_validation(self):
        with pytest.raises(WrongDimension):
            StubbornSpec((0.5, 0.5))
        with pytest.raises(ValueError):
            # Vertex of an identity face cannot carry an error image.
            StubbornSpec(
                (0.2, 0.3, 0.5),
                vertex_images={0: (0.5, 0.2, 0.3)},
                identity_faces=[(0, 1)],
            )
        with pytest.raises(ValueError):
            # Vertex image less extreme than the common point.
            StubbornSpec((0.6, 0.2, 0.2), vertex_images={0: (0.4, 0.3, 0.3)})
        with pytest.raises(ValueError):
            # Split edge must contain the common point.
            StubbornSpec((0.2, 0.3, 0.5), edge_case=((0, 1), 0))


class TestPushforward:
    def test_bayes_identity(self):
        rho = PosteriorDistribution([(0.7, 0.3), (0.3, 0.7)], [0.5, 0.5])
        out = pushforward(BayesRule(2), MU2, rho)
        assert np.allclose(out.support, rho.support)
        assert np.allclose(out.probs, rho.probs)

    def test_trivial_collapses_everything(self):
        rho = PosteriorDistribution([(0.7, 0.3), (0.3, 0.7)], [0.5, 0.5])
        out = pushforward(TrivialRule((0.4, 0.6)), MU2, rho)
        assert out.size == 1
        assert out.probs[0] == pytest.approx(1.0)

    def test_grether_two_points(self):
        rho = PosteriorDistribution([(0.7, 0.3), (0.3, 0.7)], [0.5, 0.5])
        out = pushforward(GretherRule(2.0, 1.0, 2), MU2, rho)
        assert out.support[0][0] == pytest.approx(0.49 / 0.58)
        assert out.support[1][0] == pytest.approx(0.09 / 0.58)

    def test_mass_and_support_monotonicity(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            k = int(rng.integers(1, 6))
            pts = rng.dirichlet(np.ones(3), size=k)
            rho = PosteriorDistribution(pts, rng.dirichlet(np.ones(k)))
            out = pushforward(ShrinkageRule(0.3, 3), MU3, rho)
            assert out.probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert out.size <= rho.size


class TestClassifyError:
    def test_bayes_everywhere_none(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            n = int(rng.integers(2, 5))
            mu = rng.dirichlet(np.ones(n))
            x = rng.dirichlet(np.ones(n))
            assert classify_error(BayesRule(n), mu, x).kind == "none"

    def test_shrinkage_contractive_with_witness(self):
        rng = np.random.default_rng(7)
        rule = ShrinkageRule(0.5, 3)
        for _ in range(500):
            mu = rng.dirichlet(np.ones(3))
            x = rng.dirichlet(np.ones(3))
            if np.max(np.abs(x - mu)) < 1e-6:
                continue
            err = classify_error(rule, mu, x)
            assert err.kind == "contractive"
            assert err.witness_lambda == pytest.approx(0.5, abs=1e-7)

    def test_grether_expansive(self):
        err = classify_error(GretherRule(2.0, 1.0, 2), MU2, (0.7, 0.3))
        assert err.kind == "expansive"

    def test_image_at_prior_counts_as_contractive(self):
        err = classify_error(TrivialRule((0.5, 0.5)), MU2, (0.9, 0.1))
        assert err.kind == "contractive"
        assert err.witness_lambda == pytest.approx(0.0, abs=1e-9)


class TestCoarseChecker:
    def test_bayes_degenerate_intervals(self):
        v = is_occasionally_coarse(BayesRule(2), MU2, grid_size=200)
        assert v.ok and v.a == 0.0 and v.b == 1.0

    def test_family_recovery(self):
        v = is_occasionally_coarse(CoarseRule(0.3, 0.7, 0.2, 0.8), MU2, grid_size=200)
        assert v.ok
        assert v.a == pytest.approx(0.3, abs=1e-12)
        assert v.b == pytest.approx(0.7, abs=1e-12)
        assert v.u == pytest.approx(0.2) and v.v == pytest.approx(0.8)

    def test_grether_refuted_in_identity_region(self):
        v = is_occasionally_coarse(GretherRule(2.0, 1.0, 2), MU2, grid_size=200)
        assert not v.ok
        assert v.refutation[1] == "c3-identity"

    def test_wrong_dimension(self):
        with pytest.raises(WrongDimension):
            is_occasionally_coarse(BayesRule(3), MU3)

    def test_family_members_always_pass(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            rule = random_rule("occ-coarse", 2, rng)
            mu = rng.uniform(0.15, 0.85)
            assert is_occasionally_coarse(rule, (mu, 1 - mu), grid_size=150).ok

    def test_vertex_condition_refutes(self):
        class BadVertex(CoarseRule):
            def apply_scalar(self, t):
                out = super().apply_scalar(t)
                return np.where(np.asarray(t) >= 1.0 - 1e-12, 0.5, out)

        rule = BadVertex(0.3, 0.7, 0.2, 0.8)
        v = is_occasionally_coarse(rule, MU2, grid_size=200)
        assert not v.ok and v.refutation[1] == "c4-vertices"


class TestStubbornChecker:
    def test_reference_rule_a(self):
        v = is_occasionally_stubborn(stubborn_example_a(), MU3, samples_per_face=24)
        assert v.ok
        assert v.x_star.allclose((0.2, 1 / 3, 1 - 0.2 - 1 / 3))

    def test_reference_rule_b(self):
        v = is_occasionally_stubborn(stubborn_example_b(), MU3, samples_per_face=24)
        assert v.ok
        assert v.x_star.allclose((0.5, 0.5, 0.0))

    def test_bayes_vacuous(self):
        v = is_occasionally_stubborn(BayesRule(3), MU3)
        assert v.ok and v.x_star is None

    def test_grether_refuted_on_interior(self):
        v = is_occasionally_stubborn(GretherRule(2.0, 1.0, 3), MU3)
        assert not v.ok and v.refutation[1] == "item1-common-image"

    def test_wrong_dimension(self):
        with pytest.raises(WrongDimension):
            is_occasionally_stubborn(BayesRule(2), MU2)

    def test_family_members_always_pass(self):
        rng = np.random.default_rng(9)
        for k in range(50):
            n = 3 if k % 2 == 0 else 4
            rule = random_rule("occ-stubborn", n, rng)
            mu = np.full(n, 1.0 / n)
            v = is_occasionally_stubborn(rule, mu, samples_per_face=16)
            assert v.ok, (k, rule.spec.to_json(), v.to_json())

    def test_identity_interior_with_erring_vertex_refuted(self):
        # A correct interior cannot absorb a vertex error: the whole face
        # would have to collapse.
        class VertexOnly(BayesRule):
            def apply_batch(self, mu, X):
                out = super().apply_batch(mu, X)
                vertex = np.abs(np.asarray(X)[..., 0] - 1.0) < 1e-12
                out[vertex] = [0.6, 0.2, 0.2]
                return out

        v = is_occasionally_stubborn(VertexOnly(3), MU3)
        assert not v.ok and v.refutation[1] == "item1-common-image"


class TestTrivialAndAffine:
    def test_trivial_detection(self):
        assert is_trivial_on_interior(TrivialRule((0.2, 0.3, 0.5)), MU3)
        assert not is_trivial_on_interior(BayesRule(3), MU3)
        assert is_trivial_on_interior(stubborn_example_a(), MU3)

    def test_affine_families(self):
        assert is_affine(ShrinkageRule(0.5, 3), MU3)
        assert is_affine(BayesRule(3), MU3)
        assert is_affine(TrivialRule((0.2, 0.3, 0.5)), MU3)
        assert not is_affine(GretherRule(2.0, 1.0, 3), MU3)
        assert not is_affine(CoarseRule(0.3, 0.7, 0.2, 0.8), MU2)

    def test_affine_rules_never_lose_from_double_mistakes(self):
        # Affinity makes the twice-mistaken welfare profile convex, so no
        # contraction can beat the original distribution.
        from blackwell_audit.experiments import InfeasibleWeights, bring_point_in

        rng = np.random.default_rng(10)
        sel = Selector()
        checked = 0
        while checked < 100:
            n = 2 + checked % 2
            rule = ShrinkageRule(0.5, n)
            assert is_affine(rule, np.full(n, 1.0 / n))
            payoff = rng.uniform(-1, 1, size=(int(rng.integers(2, 6)), n))
            problem = DecisionProblem(payoff)
            pts = rng.dirichlet(np.ones(n), size=n)
            w = rng.dirichlet(np.ones(n))
            rho = PosteriorDistribution(pts, w)
            mu = rho.barycenter
            if not mu.is_interior(1e-6) or rho.size < n:
                continue
            if checked % 2 == 0:
                contracted = PosteriorDistribution([mu.coords], [1.0])
            else:
                others = np.delete(rho.support, 0, axis=0)
                lam = rng.dirichlet(np.ones(others.shape[0]))
                try:
                    contracted = bring_point_in(rho, 0, 0.7, lam @ others)
                except (InfeasibleWeights, ValueError):
                    continue
            assert is_mpc(contracted, rho, tol=1e-8)
            hi = expected_payoff(problem, rule, mu, sel, WelfareMode.DOUBLE, rho)
            lo = expected_payoff(problem, rule, mu, sel, WelfareMode.DOUBLE, contracted)
            assert hi >= lo - 1e-9
            checked += 1


class TestSerialization:
    def test_json_round_trips(self):
        rules = [
            BayesRule(3),
            TrivialRule((0.2, 0.3, 0.5)),
            CoarseRule(0.3, 0.7, 0.2, 0.8),
            GretherRule(2.0, 1.0, 3),
            ShrinkageRule(0.5, 4),
            stubborn_example_b(),
        ]
        rng = np.random.default_rng(3)
        for rule in rules:
            doc = json.loads(json.dumps(rule.to_json()))
            back = rule_from_json(doc, n=rule.n)
            X = rng.dirichlet(np.ones(rule.n), size=16)
            mu = np.full(rule.n, 1.0 / rule.n)
            assert np.allclose(evaluate_batch(rule, mu, X), evaluate_batch(back, mu, X))

    def test_parse_shorthand(self):
        assert isinstance(parse_rule("bayes", n=3), BayesRule)
        g = parse_rule("grether(2,1)", n=3)
        assert g.alpha == 2.0 and g.beta == 1.0
        c = parse_rule("occ-coarse(0.3,0.7,0.2,0.8)", n=2)
        assert (c.a, c.b, c.u, c.v) == (0.3, 0.7, 0.2, 0.8)
        s = parse_rule("shrinkage(0.5)", n=3)
        assert s.lam == 0.5
        t = parse_rule("trivial(0.2,0.3,0.5)", n=3)
        assert t.x_star[2] == pytest.approx(0.5)

    def test_parse_inline_json(self):
        rule = parse_rule('{"family": "grether", "alpha": 2.0, "beta": 1.0}', n=2)
        assert isinstance(rule, GretherRule)

    def test_tabulated_csv_round_trip(self, tmp_path):
        path = tmp_path / "rule.csv"
        path.write_text("# node, image\n0.25,0.75,0.3,0.7\n0.75,0.25,0.7,0.3\n")
        rule = TabulatedRule.from_csv(path, n=2, tol=0.05)
        assert evaluate(rule, MU2, (0.75, 0.25)).allclose((0.7, 0.3))
