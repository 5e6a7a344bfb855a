import numpy as np
import pandas as pd
import pytest

from helper import ProgressPrinter, format_point, multiplicity_pattern, parse_number, relative


class TestParseNumber:
    """Zahlen aus Spezifikationen lesen."""

    def test_accepts_strings_and_numbers(self):
        assert parse_number("2.5", "params.k") == 2.5
        assert parse_number(3, "params.k") == 3.0

    def test_accepts_first_value_of_series(self):
        assert parse_number(pd.Series([None, 4.0]), "params.k") == 4.0

    @pytest.mark.parametrize("value", [None, "", "  ", float("nan")])
    def test_missing_values(self, value):
        with pytest.raises(ValueError, match="params.k: Wert fehlt"):
            parse_number(value, "params.k")

    @pytest.mark.parametrize("value", ["abc", True, [1, 2], {"a": 1}])
    def test_non_numeric(self, value):
        with pytest.raises(ValueError, match="Zahl erwartet"):
            parse_number(value, "params.k")

    def test_infinite(self):
        with pytest.raises(ValueError, match="endlich"):
            parse_number("inf", "params.k")


class TestMultiplicityPattern:
    """Cluster von Eigenwerten."""

    def test_single_cluster(self):
        assert multiplicity_pattern([3.0, 3.0, 3.0, 3.0], 1e-6) == (4,)

    def test_pairs(self):
        assert multiplicity_pattern([1.0, -1.0, 1.0, -1.0], 1e-6) == (2, 2)

    def test_distinct(self):
        assert multiplicity_pattern([4.0, 3.0, 2.0, 1.0], 1e-6) == (1, 1, 1, 1)

    def test_tolerance_is_relative(self):
        assert multiplicity_pattern([1000.0, 1000.0005, 1.0, 2.0], 1e-6) == (2, 1, 1)

    def test_empty(self):
        assert multiplicity_pattern(np.array([]), 1e-6) == ()


class TestFormatting:
    """Meldungstexte und relative Residuen."""

    def test_format_point(self):
        assert format_point([0.5, 1, -2.25, 1e-7]) == "(0.5, 1, -2.25, 1e-07)"

    def test_relative(self):
        assert relative(2.0, 1.0) == 1.0
        assert relative(0.0, 0.0) == 0.0


class TestProgressPrinter:
    """Fortschrittszeilen mit Tag-Praefix."""

    def test_prints_first_and_last(self, capsys):
        progress = ProgressPrinter("Klassifikation", 3, interval_s=3600)
        for k in range(1, 4):
            progress.update(k, "I")
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("[Klassifikation] 1/3")
        assert lines[1].startswith("[Klassifikation] 3/3 (100.0 %)")
        assert lines[1].endswith("| I")

    def test_quiet(self, capsys):
        progress = ProgressPrinter("Klassifikation", 2, quiet=True)
        progress.update(1)
        progress.update(2)
        assert capsys.readouterr().out == ""
