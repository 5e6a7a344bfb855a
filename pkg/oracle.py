"""Unabhaengige Gegenpruefungen: finite Differenzen, Weyl-Tensor per Indexschleife, Diagonalformeln.

Nichts hier wird von der Klassifikation benutzt; die Funktionen pruefen die
Jet-Pipeline von aussen.

Konfiguration:
- `FD_STEP` ist die Grundschrittweite der zentralen Differenzen.
- `FD_MARGIN_FACTOR`: der Punkt muss `FD_MARGIN_FACTOR * step` Abstand zum Kartenrand haben.
- `VERIFY_SAMPLES` ist die Zahl zufaelliger Punkte in `verify_chart`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from geometry import DIMENSION, MetricChart, curvature_bundle
from helper import format_point, relative
from jet import MAX_ORDER, MULTI_INDICES, Jet3, jet_log, to_partials, unit_index

FD_STEP = 1e-3
FD_MARGIN_FACTOR = 4
VERIFY_SAMPLES = 20

# Gewichte zentraler Differenzen je Ableitungsordnung: (Versatz in Schritten, Gewicht)
_STENCILS = {
    0: ((0, 1.0),),
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
}


def _check_margin(chart: MetricChart, point: np.ndarray, step: float) -> None:
    reach = FD_MARGIN_FACTOR * step
    for axis, sign in itertools.product(range(len(point)), (1.0, -1.0)):
        shifted = point.copy()
        shifted[axis] += sign * reach
        reason = chart.domain(shifted)
        if reason:
            raise ValueError(
                f"{chart.name}: Punkt {format_point(point)} liegt naeher als {reach:g} am Kartenrand ({reason})"
            )


def _central_difference(evaluate: Callable[[tuple[int, ...]], np.ndarray], alpha, step: float) -> np.ndarray:
    total = 0.0
    for combo in itertools.product(*(_STENCILS[a] for a in alpha)):
        offsets = tuple(s for s, _ in combo)
        weight = math.prod(w for _, w in combo)
        total = total + weight * evaluate(offsets)
    return total / step ** sum(alpha)


def _differences(chart: MetricChart, point: np.ndarray, order: int, step: float) -> np.ndarray:
    cache: dict[tuple[int, ...], np.ndarray] = {}

    def evaluate(offsets):
        if offsets not in cache:
            cache[offsets] = chart.metric_values(point + step * np.array(offsets))
        return cache[offsets]

    alphas = [a for a in MULTI_INDICES if sum(a) <= order]
    return np.stack([_central_difference(evaluate, a, step) for a in alphas], axis=-1)


def fd_partials(
    chart: MetricChart,
    point: Sequence[float],
    order: int = MAX_ORDER,
    step: float = FD_STEP,
    richardson: bool = True,
) -> np.ndarray:
    """Partielle Ableitungen der Metrik bis `order`, Form (4, 4, n) in der Reihenfolge von MULTI_INDICES.

    Zentrale Differenzen zweiter Ordnung; mit `richardson` zusaetzlich mit
    halber Schrittweite und extrapoliert.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order muss in 0..{MAX_ORDER} liegen, erhalten {order}")
    if not step > 0:
        raise ValueError(f"step muss positiv sein, erhalten {step}")
    p = np.asarray(point, dtype=float)
    _check_margin(chart, p, step)
    coarse = _differences(chart, p, order, step)
    if not richardson:
        return coarse
    fine = _differences(chart, p, order, step / 2)
    return (4 * fine - coarse) / 3


def jet_partials(chart: MetricChart, point: Sequence[float], order: int = MAX_ORDER) -> np.ndarray:
    G = chart.metric_jets(point)
    n = sum(1 for a in MULTI_INDICES if sum(a) <= order)
    return np.stack([[to_partials(G[i, j])[:n] for j in range(DIMENSION)] for i in range(DIMENSION)])


def fd_jet_agreement(chart: MetricChart, point: Sequence[float], order: int = MAX_ORDER,
                     step: float = FD_STEP, richardson: bool = False) -> float:
    """Groesste relative Abweichung zwischen Differenzen und Jets, je Ableitungsordnung normiert."""
    fd = fd_partials(chart, point, order, step, richardson)
    jets = jet_partials(chart, point, order)
    worst = 0.0
    for k in range(order + 1):
        cols = [c for c, a in enumerate(MULTI_INDICES) if sum(a) == k]
        worst = max(worst, relative(np.abs(fd[..., cols] - jets[..., cols]).max(), np.abs(jets[..., cols]).max()))
    return worst


def brute_force_weyl(R: np.ndarray, ricci: np.ndarray, scalar: float, g: np.ndarray) -> np.ndarray:
    """W_ijkl aus R_ijkl, rho und s, Eintrag fuer Eintrag."""
    n = g.shape[0]
    W = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    ricci_part = (
                        ricci[i, l] * g[j, k]
                        + ricci[j, k] * g[i, l]
                        - ricci[i, k] * g[j, l]
                        - ricci[j, l] * g[i, k]
                    ) / (n - 2)
                    scalar_part = scalar * (g[i, l] * g[j, k] - g[i, k] * g[j, l]) / ((n - 1) * (n - 2))
                    W[i, j, k, l] = R[i, j, k, l] - ricci_part + scalar_part
    return W


def diagonal_curvature_components(chart: MetricChart, point: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Kruemmung einer Diagonalmetrik direkt aus nu_s = (1/2) ln g_ss.

    Rueckgabe (A, B) mit A[i, j] = [R(d_i, d_j) d_j]^i = g_jj K_ij und
    B[i, k, j] = [R(d_i, d_j) d_k]^i fuer paarweise verschiedene i, j, k.
    """
    if not chart.diagonal:
        raise ValueError(f"{chart.name}: diagonal_curvature_components braucht eine diagonale Karte")
    G = chart.metric_jets(point)
    nus = [0.5 * jet_log(Jet3(G[s, s])) for s in range(DIMENSION)]
    nu = np.array([v.value for v in nus])
    d1 = np.array([[v.partial(unit_index(a)) for a in range(DIMENSION)] for v in nus])

    def d2(s, a, b):
        alpha = [0] * DIMENSION
        alpha[a] += 1
        alpha[b] += 1
        return nus[s].partial(alpha)

    A = np.zeros((DIMENSION, DIMENSION))
    B = np.zeros((DIMENSION, DIMENSION, DIMENSION))
    for i, j in itertools.permutations(range(DIMENSION), 2):
        e = math.exp(2 * (nu[j] - nu[i]))
        value = (
            -e * (d1[j, i] ** 2 - d1[i, i] * d1[j, i] + d2(j, i, i))
            - d2(i, j, j)
            + d1[i, j] * d1[j, j]
            - d1[i, j] ** 2
        )
        for k in range(DIMENSION):
            if k in (i, j):
                continue
            value -= math.exp(2 * (nu[j] - nu[k])) * d1[i, k] * d1[j, k]
            B[i, k, j] = -d2(i, k, j) + d1[i, j] * d1[j, k] + d1[i, k] * d1[k, j] - d1[i, j] * d1[i, k]
        A[i, j] = value
    return A, B


@dataclass(frozen=True)
class VerifyResult:
    chart: str
    n_points: int
    fd_jet: float
    weyl: float
    diagonal: float | None = None

    def as_dict(self) -> dict[str, float | int | str | None]:
        return {"chart": self.chart, "n_points": self.n_points, "fd_jet": self.fd_jet,
                "weyl": self.weyl, "diagonal": self.diagonal}


def verify_chart(chart: MetricChart, points: Sequence[Sequence[float]], quiet: bool = True) -> VerifyResult:
    """Alle Gegenpruefungen an den gegebenen Punkten; Rueckgabe sind die groessten relativen Abweichungen."""
    if len(points) == 0:
        raise ValueError(f"{chart.name}: keine Punkte fuer die Gegenpruefung")
    fd_worst = weyl_worst = 0.0
    diag_worst = 0.0 if chart.diagonal else None
    for p in points:
        p = np.asarray(p, dtype=float)
        fd_worst = max(fd_worst, fd_jet_agreement(chart, p))
        bundle = curvature_bundle(chart, p)
        W = brute_force_weyl(bundle.riemann, bundle.ricci, bundle.scalar, bundle.g)
        weyl_worst = max(weyl_worst, relative(np.abs(W - bundle.weyl).max(), np.abs(bundle.riemann).max()))
        if chart.diagonal:
            A, B = diagonal_curvature_components(chart, p)
            Rm = bundle.riemann_mixed
            scale = np.abs(Rm).max()
            for i, j in itertools.permutations(range(DIMENSION), 2):
                diag_worst = max(diag_worst, relative(abs(A[i, j] - Rm[i, j, i, j]), scale))
                for k in range(DIMENSION):
                    if k not in (i, j):
                        diag_worst = max(diag_worst, relative(abs(B[i, k, j] - Rm[i, k, i, j]), scale))
        if not quiet:
            print(f"[Verify] {chart.name} {format_point(p)}: fd/jet {fd_worst:.3g}, weyl {weyl_worst:.3g}", flush=True)
    return VerifyResult(chart.name, len(points), fd_worst, weyl_worst, diag_worst)
