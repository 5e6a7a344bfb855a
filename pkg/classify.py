"""Klassifikation einer Karte: Residuen auf einem Abtastgitter und Urteile je Klasse.

Jeder Gitterpunkt wird unabhaengig ausgewertet (Thread-Pool); der Bericht
wird in der festen Reihenfolge der Gitteraufzaehlung zusammengesetzt und ist
damit fuer gleiche Eingaben und Seeds identisch.

Konfiguration:
- `SATISFIED_TOL` / `VIOLATED_TOL`: Schwellen fuer "satisfied" bzw. "violated".
- `ODE_FAMILY_SATISFIED_TOL`: gelockerte Schwelle fuer Familien mit integrierten Profilen.
- `DEFAULT_GRID_COUNT`: Abtastpunkte je Koordinate.
- `EXCLUSION_MARGIN`: Abstand zu Kartenraendern als Anteil der Boxbreite.
- `CONSTANT_SPREAD_TOL`: Schwelle fuer konstante Ricci-Eigenwerte.
- `IMPLICATION_WEYL_TOL` / `IMPLICATION_Q_TOL` / `IMPLICATION_P_TOL`: punktweise Pruefung von LCF und Q => P.
- `MAX_WORKERS`: Threads fuer die Punktauswertung.
"""

from __future__ import annotations

import itertools
import os
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

from catalog import ODE_FAMILIES, FamilySpec, spec_to_mapping
from conditions import (
    DEFAULT_SEED,
    NotApplicable,
    ResidualSet,
    diagonal_condition_checks,
    residual_set,
    warped_lcf_residual,
)
from geometry import CLUSTER_TOL, MetricChart, curvature_bundle, ricci_spectrum, self_dual_split
from helper import ProgressPrinter, format_point, parse_number, relative
from jet import ODE_TOL

# ---------------------------------------------------------
# KONFIGURATION
# ---------------------------------------------------------
SATISFIED_TOL = 1e-7
VIOLATED_TOL = 1e-4
ODE_FAMILY_SATISFIED_TOL = 1e-6
DEFAULT_GRID_COUNT = 5
EXCLUSION_MARGIN = 0.05
CONSTANT_SPREAD_TOL = 1e-7
# Punktweise Schranken fuer LCF und Q => P
IMPLICATION_WEYL_TOL = 1e-8
IMPLICATION_Q_TOL = 1e-7
IMPLICATION_P_TOL = 1e-6
MAX_WORKERS = min(8, os.cpu_count() or 1)

SATISFIED = "satisfied"
VIOLATED = "violated"
INDETERMINATE = "indeterminate"

# Urteil -> Residuum der Punktauswertung
VERDICT_RESIDUALS = {
    "LCF": "weyl_norm",
    "P": "p_commutator",
    "Q": "q_explicit",
    "class_B": "codazzi",
    "class_U": "killing",
    "parallel_ricci": "nabla_ricci",
}
RESIDUAL_FIELDS = tuple(f for f in ResidualSet.__dataclass_fields__)


class InternalConsistencyError(RuntimeError):
    """LCF und Q erfuellt, P aber nicht: widerspricht Q => P."""


@dataclass(frozen=True)
class Tolerances:
    satisfied: float = SATISFIED_TOL
    violated: float = VIOLATED_TOL
    cluster: float = CLUSTER_TOL
    constant_spread: float = CONSTANT_SPREAD_TOL

    def __post_init__(self):
        if not 0 < self.satisfied < self.violated:
            raise ValueError(
                f"tolerances: 0 < satisfied < violated verlangt, erhalten {self.satisfied}, {self.violated}"
            )
        if not (self.cluster > 0 and self.constant_spread > 0):
            raise ValueError("tolerances: cluster und constant_spread muessen positiv sein")


def tolerances_for(tag: str | None) -> Tolerances:
    if tag in ODE_FAMILIES:
        return Tolerances(satisfied=ODE_FAMILY_SATISFIED_TOL)
    return Tolerances()


def tolerances_from_mapping(data: Mapping[str, Any] | None, base: Tolerances) -> Tolerances:
    if not data:
        return base
    updates = {}
    for name, value in data.items():
        if name not in Tolerances.__dataclass_fields__:
            raise ValueError(f"tolerances.{name}: unbekannte Toleranz")
        updates[name] = parse_number(value, f"tolerances.{name}")
    return replace(base, **updates)


# ---------------------------------------------------------
# GITTER
# ---------------------------------------------------------

@dataclass(frozen=True)
class SampleGrid:
    box: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    margin: float = EXCLUSION_MARGIN

    def __post_init__(self):
        if len(self.box) != len(self.counts):
            raise ValueError(f"grid: {len(self.box)} Intervalle, aber {len(self.counts)} Anzahlen")
        if any(int(c) < 1 for c in self.counts):
            raise ValueError(f"grid.counts: mindestens 1 Abtastpunkt je Koordinate, erhalten {self.counts}")
        if not 0 <= self.margin < 0.5:
            raise ValueError(f"grid.margin: 0 <= margin < 0.5 verlangt, erhalten {self.margin}")
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @classmethod
    def for_spec(cls, spec: FamilySpec, count: int = DEFAULT_GRID_COUNT, margin: float = EXCLUSION_MARGIN):
        return cls(spec.box, (count,) * len(spec.box), margin)

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2])
            for (lo, hi), n in zip(self.box, self.counts)
        ]

    def clear_of_boundary(self, chart: MetricChart, point: np.ndarray) -> bool:
        if chart.domain(point):
            return False
        for axis, (lo, hi) in enumerate(self.box):
            step = self.margin * (hi - lo)
            if step == 0:
                continue
            for sign in (1.0, -1.0):
                shifted = point.copy()
                shifted[axis] += sign * step
                if chart.domain(shifted):
                    return False
        return True

    def points(self, chart: MetricChart) -> list[np.ndarray]:
        """Gitterpunkte in Aufzaehlungsreihenfolge, die samt Randabstand in der Karte liegen."""
        return [
            p
            for p in (np.array(combo) for combo in itertools.product(*self.axes()))
            if self.clear_of_boundary(chart, p)
        ]

    def size(self) -> int:
        return int(np.prod(self.counts))


def grid_from_mapping(data: Mapping[str, Any] | None, spec: FamilySpec) -> SampleGrid:
    data = dict(data or {})
    unknown = set(data) - {"counts", "count", "margin"}
    if unknown:
        raise ValueError(f"grid.{sorted(unknown)[0]}: unbekanntes Feld")
    margin = parse_number(data.get("margin", EXCLUSION_MARGIN), "grid.margin")
    if "counts" in data:
        counts = data["counts"]
        if not isinstance(counts, (list, tuple)):
            raise ValueError("grid.counts: Liste mit einer Anzahl je Koordinate erwartet")
        parsed = []
        for k, c in enumerate(counts):
            value = parse_number(c, f"grid.counts[{k}]")
            if not float(value).is_integer():
                raise ValueError(f"grid.counts[{k}]: ganze Zahl erwartet, erhalten {c!r}")
            parsed.append(int(value))
        return SampleGrid(spec.box, tuple(parsed), margin)
    count = parse_number(data.get("count", DEFAULT_GRID_COUNT), "grid.count")
    if not float(count).is_integer():
        raise ValueError(f"grid.count: ganze Zahl erwartet, erhalten {count!r}")
    return SampleGrid.for_spec(spec, int(count), margin)


# ---------------------------------------------------------
# PUNKTAUSWERTUNG
# ---------------------------------------------------------

@dataclass(frozen=True)
class PointResult:
    point: tuple[float, ...]
    residuals: ResidualSet
    eigenvalues: tuple[float, ...]
    pattern: tuple[int, ...]
    w_plus: float
    w_minus: float
    d1: float | None = None
    p1: float | None = None
    warped_lcf: float | None = None

    def row(self) -> dict[str, Any]:
        row: dict[str, Any] = {f"x{k + 1}": v for k, v in enumerate(self.point)}
        row.update(self.residuals.as_dict())
        row.update({f"r{k + 1}": v for k, v in enumerate(self.eigenvalues)})
        row["pattern"] = "-".join(str(m) for m in self.pattern)
        row.update(w_plus=self.w_plus, w_minus=self.w_minus, d1=self.d1, p1=self.p1, warped_lcf=self.warped_lcf)
        return row


def _applicable(value) -> float | None:
    return None if isinstance(value, NotApplicable) else float(value)


def evaluate_point(
    chart: MetricChart,
    point: Sequence[float],
    tolerances: Tolerances = Tolerances(),
    seed: int = DEFAULT_SEED,
) -> PointResult:
    bundle = curvature_bundle(chart, point)
    residuals = residual_set(bundle, chart, seed)
    spectrum = ricci_spectrum(bundle, tolerances.cluster)
    w_plus, w_minus = self_dual_split(bundle)
    d1 = p1 = warped = None
    if chart.diagonal:
        d1_raw, p1_raw = diagonal_condition_checks(chart, bundle.point, bundle)
        d1, p1 = _applicable(d1_raw), _applicable(p1_raw)
    if chart.warped is not None:
        warped = warped_lcf_residual(chart, bundle.point)
    return PointResult(
        point=tuple(float(c) for c in bundle.point),
        residuals=residuals,
        eigenvalues=spectrum.eigenvalues,
        pattern=spectrum.pattern,
        w_plus=float(np.linalg.norm(w_plus)),
        w_minus=float(np.linalg.norm(w_minus)),
        d1=d1,
        p1=p1,
        warped_lcf=warped,
    )


# ---------------------------------------------------------
# BERICHT
# ---------------------------------------------------------

def verdict(max_residual: float, tolerances: Tolerances) -> str:
    if not np.isfinite(max_residual):
        return INDETERMINATE
    if max_residual < tolerances.satisfied:
        return SATISFIED
    if max_residual > tolerances.violated:
        return VIOLATED
    return INDETERMINATE


def eigenvalue_spread(eigenvalues: np.ndarray) -> float:
    """Groesste Schwankung eines (absteigend sortierten) Eigenwerts ueber das Gitter, relativ."""
    if eigenvalues.shape[0] < 2:
        return 0.0
    spread = eigenvalues.max(axis=0) - eigenvalues.min(axis=0)
    return relative(float(spread.max()), float(np.abs(eigenvalues).max()))


@dataclass
class ConditionReport:
    chart_name: str
    spec: FamilySpec | None
    grid: SampleGrid
    tolerances: Tolerances
    seed: int
    points: list[PointResult]
    excluded: int
    verdicts: dict[str, str] = field(default_factory=dict)
    aggregates: dict[str, dict[str, float | None]] = field(default_factory=dict)
    spectrum: dict[str, Any] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        """Ein Datensatz je Punkt mit allen Residuen, Eigenwerten und Zusatzpruefungen."""
        return pd.DataFrame([p.row() for p in self.points])

    def to_dict(self) -> dict[str, Any]:
        return {
            "chart": self.chart_name,
            "family": spec_to_mapping(self.spec) if self.spec is not None else None,
            "grid": {"box": [list(iv) for iv in self.grid.box], "counts": list(self.grid.counts),
                     "margin": self.grid.margin},
            "provenance": {"seed": self.seed, "tolerances": asdict(self.tolerances), "ode_tol": ODE_TOL},
            "n_points": len(self.points),
            "excluded": self.excluded,
            "verdicts": dict(self.verdicts),
            "aggregates": self.aggregates,
            "spectrum": self.spectrum,
            "points": [p.row() for p in self.points],
        }


def _aggregate(frame: pd.DataFrame) -> dict[str, dict[str, float | None]]:
    columns = [c for c in (*RESIDUAL_FIELDS, "w_plus", "w_minus", "d1", "p1", "warped_lcf") if c in frame]
    result = {}
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce").dropna()
        if values.empty:
            result[column] = {"max": None, "median": None}
        else:
            result[column] = {"max": float(values.max()), "median": float(values.median())}
    return result


def _spectrum_summary(points: list[PointResult]) -> dict[str, Any]:
    eigen = np.array([p.eigenvalues for p in points])
    modal, _ = Counter(p.pattern for p in points).most_common(1)[0]
    return {
        "min": eigen.min(axis=0).tolist(),
        "max": eigen.max(axis=0).tolist(),
        "pattern": list(modal),
        "spread": eigenvalue_spread(eigen),
    }


def _check_consistency(chart_name: str, verdicts: dict[str, str], points: list[PointResult]):
    if verdicts["LCF"] == SATISFIED and verdicts["Q"] == SATISFIED and verdicts["P"] != SATISFIED:
        worst = max(points, key=lambda p: p.residuals.p_commutator)
        raise InternalConsistencyError(
            f"{chart_name}: LCF und Q erfuellt, P {verdicts['P']} "
            f"(p_commutator {worst.residuals.p_commutator:.3g} bei {format_point(worst.point)})"
        )
    for p in points:
        r = p.residuals
        if (
            r.weyl_norm < IMPLICATION_WEYL_TOL
            and r.q_explicit < IMPLICATION_Q_TOL
            and not r.p_commutator < IMPLICATION_P_TOL
        ):
            raise InternalConsistencyError(
                f"{chart_name}: bei {format_point(p.point)} LCF und Q erfuellt, "
                f"p_commutator = {r.p_commutator:.3g}"
            )


def classify(
    chart: MetricChart,
    grid: SampleGrid,
    tolerances: Tolerances | None = None,
    spec: FamilySpec | None = None,
    seed: int = DEFAULT_SEED,
    workers: int = MAX_WORKERS,
    quiet: bool = True,
) -> ConditionReport:
    """Wertet alle Gitterpunkte aus und leitet die Urteile aus den Maxima ab."""
    if tolerances is None:
        tolerances = tolerances_for(spec.tag if spec is not None else None)
    if workers < 1:
        raise ValueError(f"workers: mindestens 1, erhalten {workers}")
    points = grid.points(chart)
    if not points:
        raise ValueError(
            f"{chart.name}: nach Ausschluss der Randbereiche (margin {grid.margin}) bleibt kein Gitterpunkt"
        )

    results: list[PointResult | None] = [None] * len(points)
    progress = ProgressPrinter("Klassifikation", len(points), quiet=quiet)
    lock = threading.Lock()
    completed = 0
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = {ex.submit(evaluate_point, chart, p, tolerances, seed): k for k, p in enumerate(points)}
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()
            with lock:
                completed += 1
                progress.update(completed, chart.name)

    ordered = [r for r in results if r is not None]
    frame = pd.DataFrame([r.row() for r in ordered])
    aggregates = _aggregate(frame)
    verdicts = {
        name: verdict(aggregates[column]["max"], tolerances) for name, column in VERDICT_RESIDUALS.items()
    }
    spectrum = _spectrum_summary(ordered)
    spread = spectrum["spread"]
    if spread < tolerances.constant_spread:
        verdicts["constant_eigenvalues"] = SATISFIED
    elif spread > tolerances.violated:
        verdicts["constant_eigenvalues"] = VIOLATED
    else:
        verdicts["constant_eigenvalues"] = INDETERMINATE
    _check_consistency(chart.name, verdicts, ordered)

    return ConditionReport(
        chart_name=chart.name,
        spec=spec,
        grid=grid,
        tolerances=tolerances,
        seed=seed,
        points=ordered,
        excluded=grid.size() - len(points),
        verdicts=verdicts,
        aggregates=aggregates,
        spectrum=spectrum,
    )
