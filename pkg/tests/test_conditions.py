from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from catalog import FAMILY_TAGS, build_family, default_spec, random_spec
from classify import SampleGrid, tolerances_for
from conditions import (
    NotApplicable,
    ResidualSet,
    base_gauss_curvature,
    class_residuals,
    d1_combination,
    diagonal_condition_checks,
    p_residual,
    q_residual,
    residual_set,
    stackel_residual,
    warped_lcf_residual,
    weyl_residual,
)
from geometry import MetricChart, WarpedStructure, curvature_bundle

STACKEL_TAGS = ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10"]
LCF_TAGS = [tag for tag in FAMILY_TAGS if tag not in STACKEL_TAGS]


class TestResidualsOnSpaceForm:
    """Alle Bedingungen gelten auf dem Raum konstanter Kruemmung."""

    def test_all_residuals_vanish(self, chart_for):
        chart = chart_for("I")
        residuals = residual_set(curvature_bundle(chart, [0.1, -0.2, 0.3, 0.0]), chart)
        assert isinstance(residuals, ResidualSet)
        for name, value in residuals.as_dict().items():
            if name != "stackel":
                assert value < 1e-9, name

    def test_same_seed_same_residuals(self, chart_for, center_of):
        bundle = curvature_bundle(chart_for("III1"), center_of("III1"))
        assert residual_set(bundle, seed=7) == residual_set(bundle, seed=7)


class TestQCondition:
    """Q-Residuen auf den Familien vom Typ III."""

    def test_free_profile_violates_q(self, chart_for, center_of):
        chart = chart_for("III1")
        worst = max(
            q_residual(curvature_bundle(chart, center_of("III1") + [dx, 0.1, 0.0, 0.0]))[1]
            for dx in (-0.4, 0.0, 0.4)
        )
        assert worst > 1e-3

    def test_free_profile_is_lcf(self, chart_for, center_of):
        chart = chart_for("III1")
        residuals = residual_set(curvature_bundle(chart, center_of("III1")), chart)
        assert residuals.weyl_norm < 1e-9
        assert residuals.cotton < 1e-9

    def test_unsquared_profile_satisfies_q(self, chart_for, center_of):
        general, explicit = q_residual(curvature_bundle(chart_for("III2"), center_of("III2")))
        assert explicit < 1e-6
        assert general == pytest.approx(explicit, abs=1e-6)

    def test_squared_profile_violates_q(self):
        spec = replace(default_spec("III2"), options={"w1_form": "squared"})
        chart = build_family(spec)
        worst = max(
            q_residual(curvature_bundle(chart, [x, 0.1, 0.0, -0.1]))[1] for x in (0.1, 0.25, 0.4)
        )
        assert worst > 1e-3


    @pytest.mark.parametrize("tag", FAMILY_TAGS)
    def test_general_and_explicit_forms_agree(self, tag, chart_for, center_of):
        q_general, q_explicit = q_residual(curvature_bundle(chart_for(tag), center_of(tag)))
        assert abs(q_general - q_explicit) < 1e-12 * (1.0 + q_explicit)


class TestPCondition:
    """Jacobi-Kommutator auf Familien mit P."""

    @pytest.mark.parametrize("tag", ["VII", "VI", "III1"])
    def test_commutator_vanishes(self, tag, chart_for, center_of):
        commutator, _ = p_residual(curvature_bundle(chart_for(tag), center_of(tag)))
        assert commutator < 1e-6

    def test_explicit_directions(self, chart_for, center_of):
        bundle = curvature_bundle(chart_for("VII"), center_of("VII"))
        directions = [bundle.frame[:, k] for k in range(4)]
        commutator, quadratic = p_residual(bundle, directions)
        assert commutator < 1e-8
        assert quadratic >= 0.0

    @pytest.mark.parametrize("tag", LCF_TAGS)
    def test_quadratic_form_matches_commutator(self, tag, chart_for, center_of):
        bundle = curvature_bundle(chart_for(tag), center_of(tag))
        limit = tolerances_for(tag).satisfied
        assert weyl_residual(bundle) < limit
        commutator, quadratic = p_residual(bundle)
        assert (quadratic < limit) == (commutator < limit)

    def test_generic_diagonal_metric_violates_p(self):
        chart = MetricChart(
            "generisch",
            lambda x: {(i, i): 1.0 + x[i] * x[i] + x[(i + 1) % 4] for i in range(4)},
            diagonal=True,
        )
        rng = np.random.default_rng(23)
        worst = max(
            p_residual(curvature_bundle(chart, rng.uniform(0.2, 0.8, 4)))[0] for _ in range(3)
        )
        assert worst > 1e-4

    @pytest.mark.parametrize("tag", FAMILY_TAGS)
    def test_q_and_lcf_imply_p_on_random_constants(self, tag):
        rng = np.random.default_rng(101)
        for _ in range(50):
            spec = random_spec(tag, rng)
            center = [(lo + hi) / 2 for lo, hi in spec.box]
            bundle = curvature_bundle(build_family(spec), center)
            if weyl_residual(bundle) < 1e-8 and q_residual(bundle)[1] < 1e-7:
                assert p_residual(bundle)[0] < 1e-6, spec.params


class TestParallelRicci:
    """Parallele Ricci-Kruemmung der Familien R2."""

    @pytest.mark.parametrize("tag", ["R2a", "R2b", "R2c"])
    def test_nabla_ricci_vanishes(self, tag, chart_for):
        chart = chart_for(tag)
        points = SampleGrid.for_spec(default_spec(tag), 2).points(chart)
        assert len(points) > 0
        for point in points:
            assert class_residuals(curvature_bundle(chart, point))[2] < 1e-7, point


class TestStackel:
    """Staeckel-System fuer Diagonalmetriken."""

    @pytest.mark.parametrize("tag", STACKEL_TAGS)
    def test_catalog_solutions(self, tag, chart_for, center_of):
        assert stackel_residual(chart_for(tag), center_of(tag)) < 1e-9

    @pytest.mark.parametrize("tag", STACKEL_TAGS)
    def test_catalog_solutions_on_grid(self, tag, chart_for):
        chart = chart_for(tag)
        points = SampleGrid.for_spec(default_spec(tag), 2).points(chart)
        assert len(points) > 0
        for point in points:
            assert stackel_residual(chart, point) < 1e-9, point

    def test_mixed_second_derivative(self, exponential_chart):
        assert stackel_residual(exponential_chart, [0.1, 0.2, 0.0, 0.0]) == pytest.approx(0.5, abs=1e-12)

    def test_flat(self, flat_chart):
        assert stackel_residual(flat_chart, [0.0, 0.0, 0.0, 0.0]) == 0.0

    def test_requires_diagonal_chart(self, chart_for, center_of):
        with pytest.raises(ValueError, match="diagonale Karte"):
            stackel_residual(chart_for("IV"), center_of("IV"))


class TestDiagonalChecks:
    """Kombinationen von Schnittkruemmungen und Ableitungen der Ricci-Eigenwerte."""

    def test_d1_and_p1_on_family_vii(self, chart_for, center_of):
        d1, p1 = diagonal_condition_checks(chart_for("VII"), center_of("VII"))
        assert d1 < 1e-8
        assert not isinstance(p1, NotApplicable)
        assert p1 < 1e-8

    def test_d1_and_p1_on_family_viii_grid(self, chart_for):
        chart = chart_for("VIII")
        points = SampleGrid.for_spec(default_spec("VIII"), 2).points(chart)
        assert len(points) > 0
        for point in points:
            d1, p1 = diagonal_condition_checks(chart, point)
            assert d1 < 1e-8
            assert not isinstance(p1, NotApplicable), p1
            assert p1 < 1e-8

    def test_p1_needs_stackel(self, exponential_chart):
        _, p1 = diagonal_condition_checks(exponential_chart, [0.1, 0.2, 0.0, 0.0])
        assert isinstance(p1, NotApplicable)
        assert "Staeckel" in p1.reason

    def test_p1_needs_distinct_eigenvalues(self, chart_for):
        _, p1 = diagonal_condition_checks(chart_for("I"), [0.1, 0.0, 0.0, 0.0])
        assert isinstance(p1, NotApplicable)

    def test_d1_matches_weyl_components(self, exponential_chart):
        point = [0.3, -0.4, 0.0, 0.0]
        bundle = curvature_bundle(exponential_chart, point)
        diag = np.diag(bundle.g)
        K = np.einsum("ijji->ij", bundle.riemann) / np.outer(diag, diag)
        np.fill_diagonal(K, 0.0)
        Wf = np.einsum("ijji->ij", bundle.weyl) / np.outer(diag, diag)
        # K_il + K_kj - K_ik - K_jl = W_il + W_kj - W_ik - W_jl im Rahmen E_i = d_i / mu_i
        assert d1_combination(K) == pytest.approx(d1_combination(Wf), abs=1e-9)
        assert d1_combination(K) > 1e-3

    def test_constant_curvature_combination(self):
        assert d1_combination(np.ones((4, 4)) - np.eye(4)) == 0.0


class TestWarpedProducts:
    """Identitaet fuer konform flache B^2 x_f N^2."""

    @pytest.mark.parametrize("tag", ["IV", "V"])
    def test_catalog_charts(self, tag, chart_for, center_of):
        assert warped_lcf_residual(chart_for(tag), center_of(tag)) < 1e-6

    def test_base_curvature_of_iv(self, chart_for):
        assert base_gauss_curvature(chart_for("IV"), [1.3, 0.2, 0.0, 0.0]) == pytest.approx(1.3, abs=1e-9)

    def test_generic_warping_is_not_lcf(self):
        def f_squared(x):
            return 1 + x[0] * x[0]

        def components(x):
            w = f_squared(x)
            return {(0, 0): 1.0, (1, 1): 1.0, (2, 2): w, (3, 3): w}

        chart = MetricChart("f^2 = 1 + x^2", components, warped=WarpedStructure(f_squared, 1.0))
        assert warped_lcf_residual(chart, [0.0, 0.0, 0.0, 0.0]) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_requires_warped_structure(self, chart_for):
        with pytest.raises(ValueError, match="verzerrtes Produkt"):
            warped_lcf_residual(chart_for("I"), [0.0, 0.0, 0.0, 0.0])

    def test_warped_residual_matches_weyl(self, chart_for, center_of):
        chart = chart_for("IV")
        residuals = residual_set(curvature_bundle(chart, center_of("IV")), chart)
        assert_allclose(residuals.weyl_norm, 0.0, atol=1e-7)
