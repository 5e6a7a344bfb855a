import math

import numpy as np
import pytest

from catalog import default_spec
from classify import (
    INDETERMINATE,
    SATISFIED,
    VIOLATED,
    InternalConsistencyError,
    PointResult,
    SampleGrid,
    Tolerances,
    _check_consistency,
    classify,
    eigenvalue_spread,
    evaluate_point,
    grid_from_mapping,
    tolerances_for,
    tolerances_from_mapping,
    verdict,
)
from conditions import ResidualSet
from geometry import MetricChart


def _report(tag, chart_for, count=2, **kwargs):
    spec = default_spec(tag)
    return classify(chart_for(tag), SampleGrid.for_spec(spec, count), spec=spec, **kwargs)


def _fake_point(weyl: float, q: float, p: float) -> PointResult:
    residuals = ResidualSet(
        weyl_norm=weyl, cotton=0.0, q_general=q, q_explicit=q, p_commutator=p,
        p_quadratic=0.0, codazzi=0.0, killing=0.0, nabla_ricci=0.0,
    )
    return PointResult((0.0, 0.0, 0.0, 0.0), residuals, (1.0, 1.0, 1.0, 1.0), (4,), 0.0, 0.0)


class TestVerdicts:
    """Dreiwertige Urteile aus maximalen Residuen."""

    def test_thresholds(self):
        tol = Tolerances()
        assert verdict(1e-9, tol) == SATISFIED
        assert verdict(1e-3, tol) == VIOLATED
        assert verdict(1e-5, tol) == INDETERMINATE
        assert verdict(math.nan, tol) == INDETERMINATE

    def test_ode_families_get_looser_threshold(self):
        assert tolerances_for("V").satisfied == 1e-6
        assert tolerances_for("III2").satisfied == 1e-6
        assert tolerances_for("VII").satisfied == 1e-7
        assert tolerances_for("VI").satisfied == 1e-7
        assert tolerances_for(None).violated == 1e-4

    def test_invalid_tolerances(self):
        with pytest.raises(ValueError, match="satisfied < violated"):
            Tolerances(satisfied=1e-3, violated=1e-4)

    def test_tolerances_from_mapping(self):
        tol = tolerances_from_mapping({"satisfied": "1e-6"}, Tolerances())
        assert tol.satisfied == 1e-6
        assert tol.violated == 1e-4
        with pytest.raises(ValueError, match="tolerances.cluster_tol"):
            tolerances_from_mapping({"cluster_tol": 1}, Tolerances())

    def test_eigenvalue_spread(self):
        assert eigenvalue_spread(np.array([[3.0, 3.0, 3.0, 3.0]])) == 0.0
        spread = eigenvalue_spread(np.array([[2.0, 1.0, 0.0, -1.0], [2.0, 1.5, 0.0, -1.0]]))
        assert spread == pytest.approx(0.5 / 3.0)


class TestGrid:
    """Abtastgitter und Randabstand."""

    def test_axes(self):
        grid = SampleGrid(((0.0, 1.0), (2.0, 4.0)), (3, 1))
        axes = grid.axes()
        np.testing.assert_allclose(axes[0], [0.0, 0.5, 1.0])
        np.testing.assert_allclose(axes[1], [3.0])
        assert grid.size() == 3

    def test_count_mismatch(self):
        with pytest.raises(ValueError, match="Intervalle"):
            SampleGrid(((0.0, 1.0),), (2, 2))

    def test_invalid_margin(self):
        with pytest.raises(ValueError, match="margin"):
            SampleGrid(((0.0, 1.0),), (2,), margin=0.5)

    def test_from_mapping(self):
        spec = default_spec("I")
        assert grid_from_mapping({"counts": [2, 3, 1, 1]}, spec).counts == (2, 3, 1, 1)
        assert grid_from_mapping(None, spec).counts == (5, 5, 5, 5)
        with pytest.raises(ValueError, match="grid.count"):
            grid_from_mapping({"count": 2.5}, spec)
        with pytest.raises(ValueError, match="grid.foo"):
            grid_from_mapping({"foo": 1}, spec)

    def test_boundary_points_are_excluded(self):
        def domain(p):
            return "x0 > 0.9" if p[0] > 0.9 else None

        chart = MetricChart("halb", lambda x: {(i, i): 1.0 for i in range(4)}, domain)
        grid = SampleGrid(((0.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)), (5, 1, 1, 1), margin=0.1)
        kept = [p[0] for p in grid.points(chart)]
        assert kept == [0.0, 0.25, 0.5, 0.75]


class TestConsistency:
    """LCF und Q ohne P ist ein innerer Widerspruch."""

    def test_report_level(self):
        verdicts = {"LCF": SATISFIED, "Q": SATISFIED, "P": VIOLATED}
        with pytest.raises(InternalConsistencyError, match="P violated"):
            _check_consistency("test", verdicts, [_fake_point(0.0, 0.0, 1.0)])

    def test_report_level_indeterminate_p(self):
        verdicts = {"LCF": SATISFIED, "Q": SATISFIED, "P": INDETERMINATE}
        with pytest.raises(InternalConsistencyError, match="P indeterminate"):
            _check_consistency("test", verdicts, [_fake_point(1e-9, 1e-8, 1e-5)])

    def test_point_level_between_thresholds(self):
        verdicts = {"LCF": INDETERMINATE, "Q": INDETERMINATE, "P": INDETERMINATE}
        with pytest.raises(InternalConsistencyError, match="p_commutator = 1e-05"):
            _check_consistency("test", verdicts, [_fake_point(1e-9, 1e-8, 1e-5)])

    def test_point_level_below_bound(self):
        verdicts = {"LCF": INDETERMINATE, "Q": INDETERMINATE, "P": INDETERMINATE}
        _check_consistency("test", verdicts, [_fake_point(1e-9, 1e-8, 5e-7), _fake_point(1e-7, 1e-8, 1e-3)])

    def test_point_level(self):
        verdicts = {"LCF": INDETERMINATE, "Q": INDETERMINATE, "P": INDETERMINATE}
        points = [_fake_point(1e-5, 1e-5, 0.0), _fake_point(0.0, 0.0, 1.0)]
        with pytest.raises(InternalConsistencyError, match="p_commutator"):
            _check_consistency("test", verdicts, points)

    def test_consistent(self):
        verdicts = {"LCF": SATISFIED, "Q": VIOLATED, "P": VIOLATED}
        _check_consistency("test", verdicts, [_fake_point(0.0, 1.0, 1.0)])


class TestEvaluatePoint:
    """Einzelpunkte mit Zusatzpruefungen je nach Kartentyp."""

    def test_diagonal_chart(self, chart_for, center_of):
        result = evaluate_point(chart_for("VII"), center_of("VII"))
        assert result.d1 is not None and result.d1 < 1e-8
        assert result.p1 is not None
        assert result.warped_lcf is None
        assert result.pattern == (1, 1, 1, 1)

    def test_warped_chart(self, chart_for, center_of):
        result = evaluate_point(chart_for("IV"), center_of("IV"))
        assert result.d1 is None
        assert result.warped_lcf < 1e-7

    def test_row_columns(self, chart_for):
        row = evaluate_point(chart_for("I"), [0.1, 0.0, 0.0, 0.0]).row()
        for column in ("x1", "x4", "weyl_norm", "q_explicit", "r1", "r4", "pattern", "w_plus", "p1"):
            assert column in row
        assert row["pattern"] == "4"
        assert row["p1"] is None


class TestClassify:
    """Urteile auf den Standardfamilien mit kleinen Gittern."""

    def test_space_form(self, chart_for):
        report = _report("I", chart_for)
        for name in ("LCF", "P", "Q", "parallel_ricci", "constant_eigenvalues"):
            assert report.verdicts[name] == SATISFIED, name
        assert report.spectrum["pattern"] == [4]
        assert report.excluded == 0
        assert len(report.points) == 16

    def test_family_vii(self, chart_for):
        report = _report("VII", chart_for)
        assert report.verdicts["LCF"] == SATISFIED
        assert report.verdicts["P"] == SATISFIED
        assert report.verdicts["Q"] == SATISFIED
        assert report.verdicts["parallel_ricci"] == VIOLATED
        assert report.verdicts["constant_eigenvalues"] == VIOLATED
        assert report.spectrum["pattern"] == [1, 1, 1, 1]

    def test_family_vi(self, chart_for):
        report = _report("VI", chart_for)
        assert report.tolerances.satisfied == 1e-7
        for name in ("LCF", "P", "Q"):
            assert report.verdicts[name] == SATISFIED, name
        assert report.verdicts["parallel_ricci"] == VIOLATED

    def test_free_profile_violates_q(self, chart_for):
        report = _report("III1", chart_for)
        assert report.verdicts["LCF"] == SATISFIED
        assert report.verdicts["P"] == SATISFIED
        assert report.verdicts["Q"] == VIOLATED
        assert report.aggregates["q_explicit"]["max"] > 1e-4

    @pytest.mark.parametrize("tag", ["I", "R2a", "R2b", "VII"])
    def test_constant_eigenvalues_iff_parallel_ricci(self, tag, chart_for):
        report = _report(tag, chart_for)
        assert report.verdicts["LCF"] == SATISFIED
        assert report.verdicts["constant_eigenvalues"] == report.verdicts["parallel_ricci"]
        assert report.verdicts["parallel_ricci"] != INDETERMINATE

    def test_deterministic_across_workers(self, chart_for):
        single = _report("III1", chart_for, workers=1).to_dict()
        threaded = _report("III1", chart_for, workers=4).to_dict()
        assert single == threaded

    def test_report_dict(self, chart_for):
        data = _report("I", chart_for, seed=99).to_dict()
        assert data["chart"] == "I"
        assert data["family"]["family"] == "I"
        assert data["provenance"]["seed"] == 99
        assert data["grid"]["counts"] == [2, 2, 2, 2]
        assert data["n_points"] == len(data["points"]) == 16

    def test_frame(self, chart_for):
        frame = _report("I", chart_for).frame()
        assert len(frame) == 16
        assert (frame["weyl_norm"] < 1e-9).all()

    def test_empty_grid(self):
        chart = MetricChart("leer", lambda x: {(i, i): 1.0 for i in range(4)}, lambda p: "nie")
        grid = SampleGrid(((0.0, 1.0),) * 4, (2, 2, 2, 2))
        with pytest.raises(ValueError, match="kein Gitterpunkt"):
            classify(chart, grid)

    def test_invalid_workers(self, chart_for):
        with pytest.raises(ValueError, match="workers"):
            _report("I", chart_for, workers=0)

    def test_progress_output(self, chart_for, capsys):
        _report("I", chart_for, quiet=False, workers=1)
        out = capsys.readouterr().out
        assert "[Klassifikation] 16/16" in out
