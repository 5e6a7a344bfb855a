import numpy as np
import pytest

from catalog import build_family, default_spec
from geometry import MetricChart
from jet import jet_exp

_CHARTS = {}


def catalog_chart(tag: str) -> MetricChart:
    """Standardkarte einer Familie, einmal je Testlauf gebaut."""
    if tag not in _CHARTS:
        _CHARTS[tag] = build_family(default_spec(tag))
    return _CHARTS[tag]


def box_center(tag: str) -> np.ndarray:
    return np.array([(lo + hi) / 2 for lo, hi in default_spec(tag).box])


@pytest.fixture
def chart_for():
    return catalog_chart


@pytest.fixture
def center_of():
    return box_center


@pytest.fixture
def flat_chart():
    return MetricChart("flach", lambda x: {(i, i): 1.0 for i in range(4)}, diagonal=True)


@pytest.fixture
def exponential_chart():
    """diag(1, 1, e^(x0 x1), 1): Staeckel-System bei nu_(2,01) = 1/2 verletzt."""
    return MetricChart(
        "exp",
        lambda x: {(0, 0): 1.0, (1, 1): 1.0, (2, 2): jet_exp(x[0] * x[1]), (3, 3): 1.0},
        diagonal=True,
    )
