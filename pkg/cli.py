"""Kommandozeile: Familien auflisten, Karten pruefen, klassifizieren, gegenpruefen, Eigenwerte vergleichen.

Aufruf: `python cli.py {list,check,classify,verify,eigen} [SPEC] [Optionen]`.
SPEC ist eine JSON-Datei (Schluessel `family`, `params`, `profiles`,
`options`, `box`, `grid`, `tolerances`) oder direkt ein Familienname aus
`FAMILY_DEFAULTS`; dann gelten die Standardwerte.

Konfiguration:
- `SCHEMA_VERSION` ist die Version des JSON-Berichts (siehe datenfelder.md).
- `THREADS_ENV` ueberschreibt die Threadzahl, `--workers` hat Vorrang.
- `DEFAULT_OUT_DIR` ist das Zielverzeichnis fuer Berichte.
- `EXIT_*` sind die Rueckgabewerte des Programms.
- `VERIFY_*_TOL` sind die Schranken der Gegenpruefungen; darueber endet `verify` mit `EXIT_CONSISTENCY`.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from catalog import (
    FAMILY_DEFAULTS,
    FAMILY_SCHEMAS,
    ConstructionError,
    build_family,
    closed_form_eigenvalues,
    spec_from_mapping,
)
from classify import (
    DEFAULT_GRID_COUNT,
    MAX_WORKERS,
    InternalConsistencyError,
    SampleGrid,
    classify,
    grid_from_mapping,
    tolerances_for,
    tolerances_from_mapping,
)
from conditions import DEFAULT_SEED
from geometry import GeometryError, curvature_bundle, ricci_spectrum
from helper import format_point, parse_number
from jet import IntegrationError, JetDomainError
from oracle import VERIFY_SAMPLES, verify_chart

# ---------------------------------------------------------
# KONFIGURATION
# ---------------------------------------------------------
SCHEMA_VERSION = 1
THREADS_ENV = "EINSTEINARTIG_THREADS"
DEFAULT_OUT_DIR = "out"

EXIT_OK = 0
EXIT_CONSTRAINT = 1
EXIT_CONSISTENCY = 2
EXIT_IO = 3

VERIFY_FD_TOL = 1e-5
VERIFY_WEYL_TOL = 1e-10
VERIFY_DIAGONAL_TOL = 1e-9


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Konstruiert die klassifizierten 4-dimensionalen Metrikfamilien und prueft LCF, P, Q."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="Familien mit Parametern auflisten.")

    check = sub.add_parser("check", help="Karte bauen und Nebenbedingungen pruefen.")
    check.add_argument("spec", help="Spezifikationsdatei (JSON) oder Familienname.")

    run = sub.add_parser("classify", help="Residuen auf dem Gitter und Urteile berechnen.")
    run.add_argument("spec", help="Spezifikationsdatei (JSON) oder Familienname.")
    run.add_argument("--grid", type=int, default=None, help=f"Abtastpunkte je Koordinate (Standard {DEFAULT_GRID_COUNT}).")
    run.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed fuer Zufallsrichtungen und -rahmen.")
    run.add_argument("--workers", type=int, default=None, help=f"Threads (Standard {MAX_WORKERS}, Umgebung {THREADS_ENV}).")
    run.add_argument("--format", choices=["json", "csv"], default="json", help="Ausgabeformat.")
    run.add_argument("--out", default=None, help="Ausgabedatei (Standard out/report_<family>.<format>).")
    run.add_argument("--quiet", action="store_true", help="Keine Fortschrittsausgabe.")

    verify = sub.add_parser("verify", help="Gegenpruefungen: finite Differenzen, Weyl per Indexschleife.")
    verify.add_argument("spec", help="Spezifikationsdatei (JSON) oder Familienname.")
    verify.add_argument("--samples", type=int, default=VERIFY_SAMPLES, help="Zahl zufaelliger Punkte.")
    verify.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed fuer die Punktwahl.")
    verify.add_argument("--quiet", action="store_true", help="Keine Zwischenausgabe.")

    eigen = sub.add_parser("eigen", help="Ricci-Eigenwerte der Pipeline neben der geschlossenen Formel.")
    eigen.add_argument("spec", help="Spezifikationsdatei (JSON) oder Familienname.")
    eigen.add_argument("--point", type=float, nargs=4, default=None, help="Punkt (Standard: Boxmitte).")
    return parser.parse_args(argv)


# ---------------------------------------------------------
# EIN- UND AUSGABE
# ---------------------------------------------------------

def load_spec(arg: str):
    """(FamilySpec, Rohdaten) aus Datei oder Familienname."""
    if os.path.exists(arg) or arg.endswith(".json"):
        with open(arg, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConstructionError(
                    f"{arg}: kein gueltiges JSON (Zeile {exc.lineno}, Spalte {exc.colno}: {exc.msg})"
                ) from exc
        if not isinstance(raw, dict):
            raise ConstructionError(f"{arg}: Spezifikation muss ein JSON-Objekt sein")
    elif arg in FAMILY_DEFAULTS:
        raw = {"family": arg}
    else:
        raise ConstructionError(f"{arg!r} ist weder eine Datei noch eine Familie ({', '.join(FAMILY_DEFAULTS)})")
    return spec_from_mapping(raw), raw


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        value = flag
    elif os.environ.get(THREADS_ENV):
        value = parse_number(os.environ[THREADS_ENV], THREADS_ENV)
    else:
        value = MAX_WORKERS
    if not float(value).is_integer() or value < 1:
        raise ValueError(f"{THREADS_ENV}/--workers: ganze Zahl >= 1 erwartet, erhalten {value!r}")
    return int(value)


def jsonable(value):
    """Wandelt numpy-Typen um und ersetzt NaN/inf durch null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def json_text(value, indent: int = 2, level: int = 0) -> str:
    """JSON-Text wie `json.dumps(..., indent=2)`, Gleitkommazahlen aber mit 17 signifikanten Stellen."""
    pad = " " * (indent * (level + 1))
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {json_text(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * (indent * level) + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{json_text(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + " " * (indent * level) + "]"
    if isinstance(value, float):
        text = f"{value:.17g}"
        return text if any(c in text for c in ".e") else text + ".0"
    return json.dumps(value)


def write_report(report, path: str, fmt: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    if fmt == "csv":
        report.frame().to_csv(path, index=False, float_format="%.17g")
        return
    payload = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json_text(jsonable(payload)))
        fh.write("\n")


# ---------------------------------------------------------
# KOMMANDOS
# ---------------------------------------------------------

def cmd_list(args) -> int:
    for tag, schema in FAMILY_SCHEMAS.items():
        entry = FAMILY_DEFAULTS[tag]
        print(f"{tag:5s} {schema['description']}")
        for name in schema["params"]:
            print(f"      params.{name} = {entry['params'][name]}")
        for name in schema["profiles"]:
            print(f"      profiles.{name} = {entry['profiles'][name]}")
        for name in schema["options"]:
            print(f"      options.{name} = {entry['options'][name]}")
    return EXIT_OK


def cmd_check(args) -> int:
    spec, _ = load_spec(args.spec)
    build_family(spec)
    box = ", ".join(f"[{lo:g}, {hi:g}]" for lo, hi in spec.box)
    print(f"[Konstruktion] {spec.tag}: Karte gueltig auf {box}")
    return EXIT_OK


def cmd_classify(args) -> int:
    spec, raw = load_spec(args.spec)
    chart = build_family(spec)
    grid = grid_from_mapping(raw.get("grid"), spec)
    if args.grid is not None:
        grid = SampleGrid.for_spec(spec, args.grid, grid.margin)
    tolerances = tolerances_from_mapping(raw.get("tolerances"), tolerances_for(spec.tag))
    workers = resolve_workers(args.workers)
    if not args.quiet:
        print(f"[Konstruktion] {spec.tag}: {grid.size()} Gitterpunkte, {workers} Threads")
    report = classify(chart, grid, tolerances, spec, args.seed, workers, quiet=args.quiet)
    out = args.out or os.path.join(DEFAULT_OUT_DIR, f"report_{spec.tag}.{args.format}")
    write_report(report, out, args.format)
    print(f"[Klassifikation] {spec.tag}: {len(report.points)} Punkte, {report.excluded} ausgeschlossen")
    for name, value in report.verdicts.items():
        print(f"  {name:22s} {value}")
    print(f"  Muster {report.spectrum['pattern']}")
    print(f"Datei geschrieben: {out}")
    return EXIT_OK


def sample_points(chart, spec, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in spec.box])
    hi = np.array([b[1] for b in spec.box])
    grid = SampleGrid.for_spec(spec, 1)
    points = []
    for _ in range(50 * count):
        if len(points) == count:
            break
        p = lo + (hi - lo) * rng.uniform(0.1, 0.9, size=lo.shape)
        if grid.clear_of_boundary(chart, p):
            points.append(p)
    return points


def cmd_verify(args) -> int:
    spec, _ = load_spec(args.spec)
    chart = build_family(spec)
    points = sample_points(chart, spec, args.samples, args.seed)
    result = verify_chart(chart, points, quiet=args.quiet)
    print(f"[Verify] {spec.tag}: {result.n_points} Punkte")
    print(f"  finite Differenzen vs. Jets  {result.fd_jet:.3g}")
    print(f"  Weyl Indexschleife vs. Jets  {result.weyl:.3g}")
    if result.diagonal is not None:
        print(f"  Diagonalformeln vs. Jets     {result.diagonal:.3g}")
    checks = [("FD", result.fd_jet, VERIFY_FD_TOL), ("Weyl", result.weyl, VERIFY_WEYL_TOL)]
    if result.diagonal is not None:
        checks.append(("Diagonal", result.diagonal, VERIFY_DIAGONAL_TOL))
    failed = [f"{name} {value:.3g} > {limit:g}" for name, value, limit in checks if not value <= limit]
    if failed:
        print(f"[Fehler] {spec.tag}: Gegenpruefung verfehlt ({', '.join(failed)})", file=sys.stderr)
        return EXIT_CONSISTENCY
    return EXIT_OK


def cmd_eigen(args) -> int:
    spec, _ = load_spec(args.spec)
    chart = build_family(spec)
    point = np.array(args.point if args.point is not None else [(lo + hi) / 2 for lo, hi in spec.box])
    spectrum = ricci_spectrum(curvature_bundle(chart, point))
    closed = closed_form_eigenvalues(spec, point)
    print(f"[Eigenwerte] {spec.tag} bei {format_point(point)}, Muster {list(spectrum.pattern)}")
    for k, value in enumerate(spectrum.eigenvalues):
        if closed is None:
            print(f"  r{k + 1}  {value: .12g}")
        else:
            print(f"  r{k + 1}  {value: .12g}  {closed[k]: .12g}  {abs(value - closed[k]):.3g}")
    if closed is None:
        print(f"Hinweis: keine geschlossene Formel fuer {spec.tag}")
    return EXIT_OK


COMMANDS = {
    "list": cmd_list,
    "check": cmd_check,
    "classify": cmd_classify,
    "verify": cmd_verify,
    "eigen": cmd_eigen,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InternalConsistencyError as exc:
        print(f"[Fehler] {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except OSError as exc:
        print(f"[Fehler] Datei: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConstructionError, GeometryError, JetDomainError, IntegrationError, ValueError) as exc:
        print(f"[Fehler] {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT


if __name__ == "__main__":
    raise SystemExit(main())
