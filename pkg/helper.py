"""Kleine Hilfsfunktionen fuer Spezifikationen, Ausgaben und Eigenwertcluster.

Konfiguration:
- `POINT_DIGITS` steuert die Rundung von Punkten in Meldungen.
- `PROGRESS_INTERVAL_S` ist der Mindestabstand zwischen Fortschrittszeilen.
"""

import math
import time

import numpy as np
import pandas as pd

POINT_DIGITS = 6
PROGRESS_INTERVAL_S = 5


def _first_scalar(v):
    """Gibt aus pandas-Containern den ersten brauchbaren Skalar zurueck; andere Werte unveraendert."""
    if isinstance(v, (pd.Series, pd.Index)):
        for item in v.tolist():
            if not _is_missing(item):
                return item
        return None
    return v


def _is_missing(v) -> bool:
    """Robuster Missing-Check fuer Skalare und pandas-Objekte."""
    v = _first_scalar(v)
    if v is None:
        return True
    if isinstance(v, str):
        return v.strip() == ""
    return bool(pd.isna(v))


def parse_number(value, name: str) -> float:
    """Liest eine Zahl aus einer Spezifikation; Fehler nennen das Feld."""
    if isinstance(value, (list, tuple, dict, np.ndarray)):
        raise ValueError(f"{name}: Zahl erwartet, erhalten {value!r}")
    if _is_missing(value):
        raise ValueError(f"{name}: Wert fehlt")
    if isinstance(value, bool):
        raise ValueError(f"{name}: Zahl erwartet, erhalten {value!r}")
    try:
        number = float(_first_scalar(value))
    except (TypeError, ValueError):
        raise ValueError(f"{name}: Zahl erwartet, erhalten {value!r}") from None
    if not math.isfinite(number):
        raise ValueError(f"{name}: Wert muss endlich sein, erhalten {value!r}")
    return number


def format_point(point) -> str:
    return "(" + ", ".join(f"{float(c):.{POINT_DIGITS}g}" for c in point) + ")"


def relative(raw: float, scale: float) -> float:
    """Residuum relativ zu 1 + scale."""
    return float(raw) / (1.0 + float(scale))


def multiplicity_pattern(values, tol: float) -> tuple[int, ...]:
    """Vielfachheiten absteigend sortierter Eigenwerte, Cluster bei Abstand <= tol (1 + max|v|)."""
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    if values.size == 0:
        return ()
    gap = tol * (1.0 + float(np.max(np.abs(values))))
    counts = [1]
    for prev, cur in zip(values[:-1], values[1:]):
        if prev - cur <= gap:
            counts[-1] += 1
        else:
            counts.append(1)
    return tuple(sorted(counts, reverse=True))


def format_eta(seconds):
    if seconds is None:
        return "unbekannt"
    if seconds < 60:
        return f"{seconds:.0f} s"
    return f"{seconds / 60:.1f} min"


class ProgressPrinter:
    """Gibt Fortschritt als fortlaufende Logzeilen aus, hoechstens alle `interval_s` Sekunden."""

    def __init__(self, tag: str, total: int, interval_s: float = PROGRESS_INTERVAL_S, quiet: bool = False):
        self.tag = tag
        self.total = total
        self.interval_s = interval_s
        self.quiet = quiet
        self.started_at = time.monotonic()
        self.last_print_at = 0.0

    def update(self, completed: int, detail: str = "") -> None:
        if self.quiet or self.total <= 0:
            return
        now = time.monotonic()
        is_first = completed == 1
        is_done = completed >= self.total
        if not (is_first or is_done or now - self.last_print_at >= self.interval_s):
            return
        elapsed_s = max(now - self.started_at, 0.001)
        per_s = completed / elapsed_s
        remaining = max(self.total - completed, 0)
        eta_s = remaining / per_s if per_s > 0 else None
        suffix = f" | {detail}" if detail else ""
        print(
            f"[{self.tag}] {completed}/{self.total} ({completed / self.total * 100:.1f} %) | "
            f"{per_s:.2f} Punkte/s | ETA {format_eta(eta_s)}{suffix}",
            flush=True,
        )
        self.last_print_at = now
