"""Konstruktoren der klassifizierten Metrikfamilien und ihrer Profilfunktionen.

Jede Familie wird durch einen `FamilySpec` (Tag, Konstanten, freie
Profilfunktionen als sympy-Ausdruecke in `x`, Abtastbox) beschrieben.
`build_family` prueft die Nebenbedingungen, loest benoetigte ODE-Profile und
tastet die Box auf positive Definitheit ab.

Konfiguration:
- `FAMILY_DEFAULTS` enthaelt Beschreibung, Standardkonstanten, Profile und Box je Tag.
- `PROFILE_PADDING` verlaengert ODE-Profile ueber die Box hinaus (Anteil der Breite).
- `SCAN_COUNT` ist die Zahl der Scanpunkte je Koordinate in `build_family`.
- `RANDOM_SPREAD` ist die relative Streuung in `random_spec`.
"""

from __future__ import annotations

import itertools
import json
import math
import threading
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Callable, Mapping

import numpy as np
import sympy

from geometry import GeometryError, MetricChart, WarpedStructure
from helper import format_point, parse_number
from jet import (
    DOMAIN_MARGIN,
    MAX_ORDER,
    ODE_TOL,
    SLOT,
    IntegrationError,
    Jet3,
    JetDomainError,
    JetTrajectory,
    compose_univariate,
    jet_abs,
    jet_ode_integrate,
    jet_sqrt,
    jet_variable,
    jet_variables,
    unit_index,
)

PROFILE_PADDING = 0.1
SCAN_COUNT = 3
RANDOM_SPREAD = 0.1
RANDOM_ATTEMPTS = 20

X = sympy.Symbol("x")

_UNIT = [[-0.5, 0.5]] * 4

# ---------------------------------------------------------
# FAMILIEN-KONFIGURATION
# ---------------------------------------------------------
FAMILY_DEFAULTS: dict[str, dict[str, Any]] = {
    "I": {
        "description": "Raum konstanter Kruemmung k, konform flache Karte",
        "params": {"k": 1.0},
        "box": _UNIT,
    },
    "II": {
        "description": "Produkt zweier Flaechen mit Kruemmung k und -k",
        "params": {"k": 1.0},
        "box": _UNIT,
    },
    "III1": {
        "description": "B^1 x_f N^3(K_N), freies Profil f > 0",
        "params": {"K_N": 1.0},
        "profiles": {"f": "x**2 + 1"},
        "box": [[0.5, 1.5], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "III2": {
        "description": "B^1 x_f N^3(K_N) mit f = 1/F, F'' = 2 K_N F^3 + c F",
        "params": {"K_N": 1.0, "c": 1.0, "F0": 1.0, "dF0": 0.0, "x0": 0.0},
        "options": {"w1_form": "unsquared"},
        "box": [[0.0, 0.5], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "R2a": {
        "description": "III mit f = eps sqrt(K_N) x + b (parallele Ricci-Kruemmung)",
        "params": {"K_N": 1.0, "b": 1.0, "eps": 1.0},
        "box": [[0.0, 1.0], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "R2b": {
        "description": "III mit f = C e^(a x) + D e^(-a x), K_N = -4 C D a^2",
        "params": {"C": 1.0, "D": 1.0, "a": 1.0},
        "box": _UNIT,
    },
    "R2c": {
        "description": "III mit f = C sin(a x) + D cos(a x), K_N = a^2 (C^2 + D^2)",
        "params": {"C": 1.0, "D": 1.0, "a": 1.0},
        "box": [[0.0, 1.0], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "IV": {
        "description": "B^2 x_f N^2(K_N) mit Gauss-Kruemmung K(x) der Basis",
        "params": {"c": 1.0, "A": -2.0, "K_N": 1.0},
        "profiles": {"K": "x", "alpha": "0"},
        "box": [[1.0, 2.0], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "V": {
        "description": "B^2 x_f N^2(K_N) mit f^2 = c D mu, mu aus der Profil-PDE",
        "params": {"c": 1.0, "C": 0.0, "e": 0.0, "K_N": 1.0, "mu0": 0.5, "y0": 0.0, "sign": 1.0},
        "profiles": {"D": "x"},
        "options": {"pde_form": "derived"},
        "box": [[1.0, 2.0], [0.0, 0.3], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "VI": {
        "description": "diag(1, phi^2, r(phi^2 + a), q(phi^2 + b)), phi'^2 = phi^4 + (a+b) phi^2 + ab",
        "params": {"a": 1.0, "b": 2.0, "q": 1.0, "r": 1.0, "phi0": 1.0, "x0": 0.0, "sign": 1.0},
        "box": [[0.0, 0.3], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
    },
    "VII": {
        "description": "mu_i^2 = prod_j (x_i - x_j) / P(x_i), P vom Grad 6",
        "params": {"a0": -9.140625, "a1": 14.1875, "a2": -6.75, "a3": -8.140625,
                   "a4": 14.1875, "a5": -6.75, "a6": 1.0},
        "box": [[0.5, 1.0], [1.5, 2.0], [2.5, 3.0], [3.5, 4.0]],
    },
    "VIII": {
        "description": "mu_1^2 = x2 x3 x4, mu_i^2 = prod_j (x_i - x_j) / P(x_i), P vom Grad 5 mit P(0) = 0",
        "params": {"a0": 0.0, "a1": 2.8125, "a2": -3.5, "a3": 3.8125, "a4": -3.5, "a5": 1.0},
        "box": [[0.0, 1.0], [0.5, 1.0], [1.5, 2.0], [2.5, 3.0]],
    },
    "IX": {
        "description": "P(x) = (x - b)(a3 x^3 + a2 x^2 + a1 x)",
        "params": {"b": 1.0, "a1": -9.0, "a2": 0.0, "a3": 1.0},
        "box": [[0.0, 1.0], [0.0, 1.0], [1.5, 2.5], [3.5, 4.5]],
    },
    "S1": {
        "description": "Staeckel: 1, eta(x1), eta(x1) psi(x2), eta(x1) phi(x2)",
        "profiles": {"eta": "exp(x)", "psi": "1 + x**2", "phi": "2 + x**2"},
        "box": _UNIT,
    },
    "S2": {
        "description": "Staeckel: 1, phi(x1) |xi - zeta| |xi - eta|, ... (zyklisch)",
        "profiles": {"phi": "1 + x**2", "xi": "x", "zeta": "x", "eta": "x"},
        "box": [[-0.5, 0.5], [0.5, 1.0], [1.5, 2.0], [2.5, 3.0]],
    },
    "S3": {
        "description": "Staeckel: eta(x1), x1 xi(x2), x1 x2 (phi(x3) + psi(x4)) zweifach",
        "profiles": {"eta": "1 + x**2", "xi": "1 + x**2", "phi": "1 + x**2", "psi": "1 + x**2"},
        "box": [[0.5, 1.0], [0.5, 1.0], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "S4": {
        "description": "Staeckel: phi(x1) + psi(x2) zweifach, xi(x3) + eta(x4) zweifach",
        "profiles": {"phi": "1 + x**2", "psi": "1 + x**2", "xi": "1 + x**2", "eta": "1 + x**2"},
        "box": _UNIT,
    },
    "S5": {
        "description": "Staeckel: xi(x1) - eta(x2) zweifach, xi eta (psi(x3) + phi(x4)) zweifach",
        "profiles": {"xi": "2 + x", "eta": "x", "psi": "1 + x**2", "phi": "1 + x**2"},
        "box": [[0.0, 0.5], [0.5, 1.0], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "S6": {
        "description": "Staeckel: phi(x1), psi(x1), x1 (xi(x3) + eta(x4)) zweifach",
        "profiles": {"phi": "1 + x**2", "psi": "exp(x)", "xi": "1 + x**2", "eta": "1 + x**2"},
        "box": [[0.5, 1.0], [-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]],
    },
    "S7": {
        "description": "Staeckel: 1, phi(x1), psi(x1), eta(x1)",
        "profiles": {"phi": "exp(x)", "psi": "1 + x**2", "eta": "2 + sin(x)"},
        "box": _UNIT,
    },
    "S8": {
        "description": "Staeckel: mu_i^2 = prod_j |x_i - x_j| / |P(x_i)|, P vom Grad 6",
        "params": {"a0": 1.0, "a1": 0.0, "a2": 0.0, "a3": 0.0, "a4": 0.0, "a5": 0.0, "a6": 1.0},
        "box": [[0.5, 1.0], [1.5, 2.0], [2.5, 3.0], [3.5, 4.0]],
    },
    "S9": {
        "description": "Staeckel: mu_1^2 = x2 x3 x4, mu_i^2 = prod_j |x_i - x_j| / |P(x_i)|",
        "params": {"a0": 0.0, "a1": 1.0, "a2": 0.0, "a3": 0.0, "a4": 0.0, "a5": 1.0},
        "box": [[0.0, 1.0], [0.5, 1.0], [1.5, 2.0], [2.5, 3.0]],
    },
    "S10": {
        "description": "Staeckel: |x3 - b||x4 - b|, x3 x4, |x_i - x_j| / |P(x_i)|",
        "params": {"b": 1.0, "a1": 1.0, "a2": 0.0, "a3": 1.0},
        "box": [[0.0, 1.0], [0.0, 1.0], [1.5, 2.0], [2.5, 3.0]],
    },
}

FAMILY_TAGS = tuple(FAMILY_DEFAULTS)
FAMILY_SCHEMAS: dict[str, dict[str, Any]] = {
    tag: {
        "description": entry["description"],
        "params": sorted(entry.get("params", {})),
        "profiles": sorted(entry.get("profiles", {})),
        "options": sorted(entry.get("options", {})),
    }
    for tag, entry in FAMILY_DEFAULTS.items()
}
ODE_FAMILIES = frozenset({"III2", "V"})
OPTION_CHOICES = {
    "w1_form": ("unsquared", "squared"),
    "pde_form": ("derived", "flipped_sign", "regrouped"),
}
# Konstanten, die random_spec nicht verrauscht
FIXED_PARAMS = frozenset({"sign", "eps", "x0", "y0", "dF0"})


class ConstructionError(ValueError):
    """Spezifikation verletzt eine Nebenbedingung der Familie."""


# ---------------------------------------------------------
# SPEZIFIKATION
# ---------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    tag: str
    params: Mapping[str, float] = field(default_factory=dict)
    profiles: Mapping[str, str] = field(default_factory=dict)
    box: tuple[tuple[float, float], ...] = ()
    options: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("params", "profiles", "options"):
            object.__setattr__(self, name, MappingProxyType(dict(getattr(self, name))))
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))

    def param(self, name: str) -> float:
        try:
            return float(self.params[name])
        except KeyError:
            raise ConstructionError(f"{self.tag}: Parameter {name} fehlt") from None

    def option(self, name: str) -> str:
        try:
            return str(self.options[name])
        except KeyError:
            raise ConstructionError(f"{self.tag}: Option {name} fehlt") from None

    def key(self) -> str:
        return json.dumps(spec_to_mapping(self), sort_keys=True)

    def with_params(self, **updates: float) -> "FamilySpec":
        return replace(self, params={**self.params, **updates})


def default_spec(tag: str) -> FamilySpec:
    if tag not in FAMILY_DEFAULTS:
        raise ConstructionError(f"family: unbekannte Familie {tag!r}, erlaubt: {', '.join(FAMILY_TAGS)}")
    entry = FAMILY_DEFAULTS[tag]
    return FamilySpec(
        tag=tag,
        params=entry.get("params", {}),
        profiles=entry.get("profiles", {}),
        box=entry["box"],
        options=entry.get("options", {}),
    )


def spec_from_mapping(data: Mapping[str, Any]) -> FamilySpec:
    """Liest eine Spezifikation; fehlende Felder kommen aus den Standardwerten der Familie."""
    if not isinstance(data, Mapping):
        raise ConstructionError("Spezifikation muss ein Objekt sein")
    tag = data.get("family", data.get("tag"))
    if not isinstance(tag, str):
        raise ConstructionError(f"family: Familienname als Text erwartet, erhalten {tag!r}")
    base = default_spec(tag)

    params = dict(base.params)
    for name, value in dict(data.get("params") or {}).items():
        if name not in base.params:
            raise ConstructionError(f"params.{name}: unbekannter Parameter fuer {tag}")
        try:
            params[name] = parse_number(value, f"params.{name}")
        except ValueError as exc:
            raise ConstructionError(str(exc)) from None

    profiles = dict(base.profiles)
    for name, value in dict(data.get("profiles") or {}).items():
        if name not in base.profiles:
            raise ConstructionError(f"profiles.{name}: unbekannte Profilfunktion fuer {tag}")
        if not isinstance(value, str) or not value.strip():
            raise ConstructionError(f"profiles.{name}: Ausdruck in x als Text erwartet, erhalten {value!r}")
        profiles[name] = value

    options = dict(base.options)
    for name, value in dict(data.get("options") or {}).items():
        if name not in base.options:
            raise ConstructionError(f"options.{name}: unbekannte Option fuer {tag}")
        if value not in OPTION_CHOICES[name]:
            raise ConstructionError(f"options.{name}: {value!r} nicht in {OPTION_CHOICES[name]}")
        options[name] = value

    box = base.box
    if data.get("box") is not None:
        raw = data["box"]
        if not isinstance(raw, (list, tuple)) or len(raw) != 4:
            raise ConstructionError("box: vier Intervalle [lo, hi] erwartet")
        parsed = []
        for axis, interval in enumerate(raw):
            if not isinstance(interval, (list, tuple)) or len(interval) != 2:
                raise ConstructionError(f"box[{axis}]: Intervall [lo, hi] erwartet, erhalten {interval!r}")
            try:
                lo = parse_number(interval[0], f"box[{axis}][0]")
                hi = parse_number(interval[1], f"box[{axis}][1]")
            except ValueError as exc:
                raise ConstructionError(str(exc)) from None
            if not lo <= hi:
                raise ConstructionError(f"box[{axis}]: untere Grenze {lo} groesser als obere {hi}")
            parsed.append((lo, hi))
        box = tuple(parsed)
    return FamilySpec(tag=tag, params=params, profiles=profiles, box=box, options=options)


def spec_to_mapping(spec: FamilySpec) -> dict[str, Any]:
    return {
        "family": spec.tag,
        "params": dict(spec.params),
        "profiles": dict(spec.profiles),
        "options": dict(spec.options),
        "box": [list(interval) for interval in spec.box],
    }


# ---------------------------------------------------------
# PROFILFUNKTIONEN
# ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProfileFunction:
    """Funktion einer Variablen, geschlossen (sympy) oder als ODE-Trajektorie.

    `derivatives(t, start)` liefert die Ableitungen start .. start + 3 bei t.
    """

    kind: str
    domain: tuple[float, float]
    payload: Any
    derivatives: Callable[[float, int], np.ndarray]
    max_start: int = 0
    ode_residual: Callable[["ProfileFunction", float], float] | None = None
    name: str = "f"

    def residual(self, t: float) -> float:
        """Residuum der definierenden ODE bei t; 0 fuer geschlossene Profile."""
        return 0.0 if self.ode_residual is None else float(self.ode_residual(self, t))

    def contains(self, t: float) -> bool:
        return self.domain[0] <= t <= self.domain[1]

    def derivatives_at(self, t: float, start: int = 0) -> np.ndarray:
        if not self.contains(t):
            raise ValueError(
                f"Profil {self.name}: x={t:.6g} ausserhalb von [{self.domain[0]:.6g}, {self.domain[1]:.6g}]"
            )
        if start > self.max_start:
            raise ValueError(f"Profil {self.name}: Ableitung {start} nicht bis Ordnung {MAX_ORDER} verfuegbar")
        values = np.asarray(self.derivatives(float(t), start), dtype=float)
        if not np.all(np.isfinite(values)):
            raise JetDomainError(f"Profil {self.name}", t)
        return values

    def __call__(self, t: float) -> float:
        return float(self.derivatives_at(t)[0])

    def evaluate(self, u: Jet3, derivative: int = 0) -> Jet3:
        """Profil (bzw. seine `derivative`-te Ableitung) verkettet mit dem Jet u."""
        return Jet3(compose_univariate(u.coeffs, self.derivatives_at(u.value, derivative)))


def closed_form_profile(
    expression: str | sympy.Expr,
    name: str = "f",
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> ProfileFunction:
    try:
        if isinstance(expression, str):
            expr = sympy.sympify(expression, locals={"x": X})
        else:
            expr = sympy.sympify(expression)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConstructionError(f"profiles.{name}: Ausdruck {expression!r} nicht lesbar ({exc})") from None
    extra = expr.free_symbols - {X}
    if extra:
        raise ConstructionError(
            f"profiles.{name}: nur die Variable x ist erlaubt, gefunden {sorted(map(str, extra))}"
        )
    funcs = [sympy.lambdify(X, sympy.diff(expr, X, k), "numpy") for k in range(MAX_ORDER + 2)]

    def derivatives(t: float, start: int) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.array([float(np.real_if_close(funcs[start + k](t))) for k in range(MAX_ORDER + 1)])

    return ProfileFunction("closed-form", domain, expr, derivatives, max_start=1, name=name)


def _hits_zero(t, y):
    return y[0]


_hits_zero.terminal = True
_hits_zero.direction = -1


def _trajectory_profile(
    name: str,
    rhs,
    init: tuple[Jet3, ...],
    x0: float,
    domain: tuple[float, float],
    tol: float,
    residual: Callable[[ProfileFunction, float], float],
    events=None,
) -> ProfileFunction:
    lo, hi = domain
    ends = ([hi] if hi > x0 else []) + ([lo] if lo < x0 else [])
    pieces: list[JetTrajectory] = []
    for end in ends:
        try:
            trajectory = jet_ode_integrate(rhs, init, (x0, end), tol, events)
        except IntegrationError as exc:
            raise ConstructionError(f"Profil {name}: {exc}") from exc
        if trajectory.truncated_at is not None:
            raise ConstructionError(
                f"Profil {name}: erreicht 0 bei x={trajectory.truncated_at:.6g}, "
                f"Definitionsbereich endet vor {end:.6g}"
            )
        pieces.append(trajectory)
    if not pieces:
        raise ConstructionError(f"Profil {name}: leerer Integrationsbereich [{lo:.6g}, {hi:.6g}]")

    def derivatives(t: float, start: int) -> np.ndarray:
        for trajectory in pieces:
            if trajectory.contains(t):
                coeffs = trajectory.lifted_state(t, 0)[0].coeffs
                return np.array(
                    [coeffs[SLOT[unit_index(0, k)]] * math.factorial(k) for k in range(MAX_ORDER + 1)]
                )
        raise ValueError(f"Profil {name}: x={t:.6g} nicht integriert")

    return ProfileFunction(
        "ode-trajectory",
        (min(lo, x0), max(hi, x0)),
        tuple(pieces),
        derivatives,
        ode_residual=residual,
        name=name,
    )


def solve_phi_profile(
    a: float,
    b: float,
    phi0: float,
    sign: float,
    span: tuple[float, float],
    x0: float = 0.0,
    tol: float = ODE_TOL,
) -> ProfileFunction:
    """phi' = sign sqrt(phi^4 + (a+b) phi^2 + ab); fuer a, b > 0 ist der Radikand positiv."""
    if not (a > 0 and b > 0):
        raise ConstructionError(f"phi-Profil: a > 0 und b > 0 verlangt, erhalten a={a}, b={b}")
    if sign not in (1.0, -1.0):
        raise ConstructionError(f"phi-Profil: sign muss +1 oder -1 sein, erhalten {sign}")

    def rhs(t, state):
        phi = state[0]
        phi2 = phi * phi
        return (sign * jet_sqrt(phi2 * phi2 + (a + b) * phi2 + a * b),)

    def residual(profile, t):
        d = profile.derivatives_at(t)
        return abs(d[1] ** 2 - (d[0] ** 4 + (a + b) * d[0] ** 2 + a * b))

    return _trajectory_profile("phi", rhs, (Jet3.constant(phi0),), x0, span, tol, residual)


def solve_F_profile(
    K_N: float,
    c: float,
    F0: float,
    dF0: float,
    span: tuple[float, float],
    x0: float = 0.0,
    tol: float = ODE_TOL,
    form: str = "unsquared",
) -> ProfileFunction:
    """F'' = 2 K_N F^3 + c F (bzw. F''^2 = ... fuer form="squared"), F > 0."""
    if not F0 > 0:
        raise ConstructionError(f"F-Profil: F0 > 0 verlangt, erhalten {F0}")
    if form not in OPTION_CHOICES["w1_form"]:
        raise ConstructionError(f"F-Profil: Form {form!r} unbekannt")

    def rhs(t, state):
        F, dF = state
        source = 2 * K_N * F * F * F + c * F
        return (dF, source if form == "unsquared" else jet_sqrt(source))

    def residual(profile, t):
        d = profile.derivatives_at(t)
        lhs = d[2] if form == "unsquared" else d[2] ** 2
        return abs(lhs - 2 * K_N * d[0] ** 3 - c * d[0])

    return _trajectory_profile(
        "F", rhs, (Jet3.constant(F0), Jet3.constant(dF0)), x0, span, tol, residual, events=_hits_zero
    )


def mu_radicand(mu, D, C: float, c: float, e: float, K_N: float, form: str = "derived"):
    """mu_y^2 als Funktion von mu und D(x); Jets oder Zahlen."""
    shift = mu + C
    if form == "derived":
        return -2 * mu / (mu + D) * (mu * (shift * shift + e) - 2 * K_N / c)
    if form == "flipped_sign":
        return 2 * mu / (mu + D) * (mu * (shift * shift + e) - 2 * K_N / c)
    if form == "regrouped":
        return -2 * mu / (mu + D) * (mu * shift * shift + e - 2 * K_N / c)
    raise ConstructionError(f"options.pde_form: {form!r} nicht in {OPTION_CHOICES['pde_form']}")


class SurfaceProfile:
    """mu(x, y) und a = mu_x / mu_y als Loesung der Profil-PDE, je x-Wert in y integriert.

    Jede x-Stelle wird einmal integriert (x als Jet-Parameter ueber D(x)) und
    danach aus dem Cache gelesen.
    """

    kind = "ode-trajectory"

    def __init__(self, D: ProfileFunction, C: float, c: float, e: float, K_N: float,
                 mu0: float, y_span: tuple[float, float], y0: float = 0.0, sign: float = 1.0,
                 pde_form: str = "derived", tol: float = ODE_TOL):
        self.D = D
        self.C, self.c, self.e, self.K_N = C, c, e, K_N
        self.mu0, self.y0, self.sign = mu0, y0, sign
        self.y_span = (min(y_span[0], y0), max(y_span[1], y0))
        self.pde_form = pde_form
        self.tol = tol
        self._cache: dict[float, list[JetTrajectory]] = {}
        self._lock = threading.Lock()

    def initial_slope(self, x: float) -> float:
        radicand = mu_radicand(self.mu0, self.D(x), self.C, self.c, self.e, self.K_N, self.pde_form)
        if not radicand > 0:
            raise ConstructionError(
                f"mu-Profil: Radikand {radicand:.6g} <= 0 bei x={x:.6g}, y={self.y0:.6g} "
                f"(pde_form={self.pde_form})"
            )
        return self.sign * math.sqrt(radicand)

    def _pieces(self, x: float) -> list[JetTrajectory]:
        with self._lock:
            cached = self._cache.get(x)
        if cached is not None:
            return cached
        self.initial_slope(x)
        x_jet = jet_variable((x, 0.0, 0.0, 0.0), 0)
        D = self.D.evaluate(x_jet)
        dD = self.D.evaluate(x_jet, derivative=1)

        def rhs(t, state):
            mu, a = state
            radicand = mu_radicand(mu, D, self.C, self.c, self.e, self.K_N, self.pde_form)
            return (self.sign * jet_sqrt(radicand), -dD / (2 * (mu + D)))

        init = (Jet3.constant(self.mu0), Jet3.constant(0.0))
        pieces = []
        lo, hi = self.y_span
        try:
            if hi > self.y0:
                pieces.append(jet_ode_integrate(rhs, init, (self.y0, hi), self.tol))
            if lo < self.y0:
                pieces.append(jet_ode_integrate(rhs, init, (self.y0, lo), self.tol))
        except IntegrationError as exc:
            raise ConstructionError(f"mu-Profil bei x={x:.6g}: {exc}") from exc
        with self._lock:
            self._cache.setdefault(x, pieces)
        return pieces

    def _trajectory(self, x: float, y: float) -> JetTrajectory:
        for trajectory in self._pieces(x):
            if trajectory.contains(y):
                return trajectory
        raise ValueError(f"mu-Profil: y={y:.6g} ausserhalb von [{self.y_span[0]:.6g}, {self.y_span[1]:.6g}]")

    def value(self, x: float, y: float) -> float:
        return self._trajectory(x, y).state_at(y)[0].value

    def state_jets(self, x: float, y: float) -> tuple[Jet3, Jet3]:
        """(mu, a) als Jets in (x, y) am Punkt."""
        mu, a = self._trajectory(x, y).lifted_state(y, 1)
        return mu, a

    def pde_residual(self, x: float, y: float) -> float:
        mu, _ = self.state_jets(x, y)
        radicand = mu_radicand(mu.value, self.D(x), self.C, self.c, self.e, self.K_N, self.pde_form)
        return abs(mu.partial(unit_index(1)) ** 2 - radicand)


def solve_mu_profile(D: ProfileFunction, C: float, c: float, e: float, K_N: float, mu0: float,
                     y_span: tuple[float, float], y0: float = 0.0, sign: float = 1.0,
                     pde_form: str = "derived", tol: float = ODE_TOL) -> SurfaceProfile:
    if c == 0:
        raise ConstructionError("V: c = 0 nicht erlaubt")
    if pde_form not in OPTION_CHOICES["pde_form"]:
        raise ConstructionError(f"options.pde_form: {pde_form!r} nicht in {OPTION_CHOICES['pde_form']}")
    return SurfaceProfile(D, C, c, e, K_N, mu0, y_span, y0, sign, pde_form, tol)


# ---------------------------------------------------------
# BAUSTEINE
# ---------------------------------------------------------

def _sigma(k: float, coords) -> Jet3:
    total = Jet3.constant(1.0)
    for u in coords:
        total = total + (k / 4.0) * u * u
    return total


def _sigma_value(k: float, values) -> float:
    return 1.0 + k / 4.0 * float(np.dot(values, values))


def _padded(spec: FamilySpec, axis: int) -> tuple[float, float]:
    lo, hi = spec.box[axis]
    pad = PROFILE_PADDING * (hi - lo)
    return lo - pad, hi + pad


def _poly_coeffs(spec: FamilySpec, count: int) -> np.ndarray:
    return np.array([spec.param(f"a{i}") for i in range(count)])


def _poly_jet(coeffs: np.ndarray, u: Jet3) -> Jet3:
    result = Jet3.constant(float(coeffs[-1]))
    for a in coeffs[-2::-1]:
        result = result * u + float(a)
    return result


def _ix_polynomial(spec: FamilySpec) -> np.ndarray:
    b = spec.param("b")
    cubic = np.array([0.0, spec.param("a1"), spec.param("a2"), spec.param("a3")])
    return np.polynomial.polynomial.polymul([-b, 1.0], cubic)


def _diagonal_domain(tag: str, components, hint: str = ""):
    """Domaene einer Diagonalkarte: alle mu_i^2 endlich und > 0."""

    def domain(point: np.ndarray) -> str | None:
        try:
            entries = components(jet_variables(point))
        except (JetDomainError, ValueError) as exc:
            return str(exc)
        for (i, j), value in sorted(entries.items()):
            v = value.value if isinstance(value, Jet3) else float(value)
            if not (np.isfinite(v) and v > DOMAIN_MARGIN):
                suffix = f" ({hint})" if hint else ""
                return f"{tag}: mu_{i + 1}^2 = {v:.6g} <= 0{suffix}"
        return None

    return domain


def _diagonal_chart(tag: str, components, hint: str = "", warped: WarpedStructure | None = None) -> MetricChart:
    return MetricChart(
        name=tag,
        components=components,
        domain=_diagonal_domain(tag, components, hint),
        diagonal=True,
        warped=warped,
    )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConstructionError(message)


def _degenerate(tag: str, name: str) -> ConstructionError:
    return ConstructionError(f"{tag}: {name} = 0, die Familie degeneriert zu konstanter Kruemmung")


# ---------------------------------------------------------
# PROFILE JE FAMILIE
# ---------------------------------------------------------

def _r2_expression(spec: FamilySpec) -> tuple[sympy.Expr, float]:
    if spec.tag == "R2a":
        K_N = spec.param("K_N")
        _require(K_N > 0, f"R2a: K_N > 0 verlangt, erhalten {K_N}")
        return spec.param("eps") * math.sqrt(K_N) * X + spec.param("b"), K_N
    C, D, a = spec.param("C"), spec.param("D"), spec.param("a")
    _require(a != 0, f"{spec.tag}: a = 0 nicht erlaubt")
    if spec.tag == "R2b":
        return C * sympy.exp(a * X) + D * sympy.exp(-a * X), -4 * C * D * a * a
    return C * sympy.sin(a * X) + D * sympy.cos(a * X), a * a * (C * C + D * D)


def w1_constants(spec: FamilySpec) -> tuple[float, float]:
    """(K_N, c) der Gleichung F'' = 2 K_N F^3 + c F fuer die Familien R2a/b/c."""
    _, K_N = _r2_expression(spec)
    if spec.tag == "R2a":
        return K_N, 0.0
    a = spec.param("a")
    return K_N, (a * a if spec.tag == "R2b" else -a * a)


def _make_profiles(spec: FamilySpec) -> dict[str, Any]:
    tag = spec.tag
    profiles: dict[str, Any] = {
        name: closed_form_profile(expr, name) for name, expr in spec.profiles.items()
    }
    if tag in ("R2a", "R2b", "R2c"):
        expr, _ = _r2_expression(spec)
        profiles["f"] = closed_form_profile(expr, "f")
    elif tag == "III2":
        profiles["F"] = solve_F_profile(
            spec.param("K_N"), spec.param("c"), spec.param("F0"), spec.param("dF0"),
            _padded(spec, 0), spec.param("x0"), form=spec.option("w1_form"),
        )
    elif tag == "VI":
        profiles["phi"] = solve_phi_profile(
            spec.param("a"), spec.param("b"), spec.param("phi0"), spec.param("sign"),
            _padded(spec, 0), spec.param("x0"),
        )
    elif tag == "V":
        profiles["mu"] = solve_mu_profile(
            profiles["D"], spec.param("C"), spec.param("c"), spec.param("e"), spec.param("K_N"),
            spec.param("mu0"), _padded(spec, 1), spec.param("y0"), spec.param("sign"),
            spec.option("pde_form"),
        )
    return profiles


_PROFILE_CACHE: dict[str, dict[str, Any]] = {}
_CACHE_LOCK = threading.Lock()


def profiles_for(spec: FamilySpec) -> dict[str, Any]:
    key = spec.key()
    with _CACHE_LOCK:
        cached = _PROFILE_CACHE.get(key)
    if cached is None:
        cached = _make_profiles(spec)
        with _CACHE_LOCK:
            cached = _PROFILE_CACHE.setdefault(key, cached)
    return cached


# ---------------------------------------------------------
# KARTEN JE FAMILIE
# ---------------------------------------------------------

def _family_I(spec, profiles):
    k = spec.param("k")

    def components(x):
        w = 1 / _sigma(k, x) ** 2
        return {(i, i): w for i in range(4)}

    return _diagonal_chart("I", components, "1 + k |x|^2 / 4 muss positiv sein")


def product_surface_chart(k1: float, k2: float, name: str = "II") -> MetricChart:
    """(dx0^2 + dx1^2)/sigma_1^2 + (dx2^2 + dx3^2)/sigma_2^2, Flaechen der Kruemmung k1 und k2."""

    def components(x):
        w1 = 1 / _sigma(k1, x[:2]) ** 2
        w2 = 1 / _sigma(k2, x[2:]) ** 2
        return {(0, 0): w1, (1, 1): w1, (2, 2): w2, (3, 3): w2}

    return _diagonal_chart(name, components, "1 + k |x|^2 / 4 muss positiv sein")


def _family_II(spec, profiles):
    k = spec.param("k")
    if k == 0:
        raise _degenerate("II", "k")
    return product_surface_chart(k, -k)


def _warped_over_line(tag: str, K_N: float, f_squared):
    """dx0^2 + f^2 g_N mit N^3 konstanter Kruemmung K_N in (x1, x2, x3)."""

    def components(x):
        w = f_squared(x[0]) / _sigma(K_N, x[1:]) ** 2
        return {(0, 0): 1.0, (1, 1): w, (2, 2): w, (3, 3): w}

    return _diagonal_chart(tag, components, "f > 0 und 1 + K_N |y|^2 / 4 > 0 verlangt")


def _family_III1(spec, profiles):
    f = profiles["f"]
    return _warped_over_line(spec.tag, _iii_curvature(spec), lambda u: f.evaluate(u) ** 2)


def _family_III2(spec, profiles):
    F = profiles["F"]
    return _warped_over_line("III2", spec.param("K_N"), lambda u: 1 / F.evaluate(u) ** 2)


def _iii_curvature(spec: FamilySpec) -> float:
    if spec.tag in ("R2a", "R2b", "R2c"):
        return _r2_expression(spec)[1]
    return spec.param("K_N")


def _family_IV(spec, profiles):
    c, A, K_N = spec.param("c"), spec.param("A"), spec.param("K_N")
    _require(c != 0, "IV: c = 0 nicht erlaubt")
    _require(A != 0, "IV: A = 0 nicht erlaubt")
    m = K_N / (c * A)
    pK, palpha = profiles["K"], profiles["alpha"]

    def components(x):
        K = pK.evaluate(x[0])
        dK = pK.evaluate(x[0], 1)
        beta = -dK / (2 * (K + m + A))
        gamma = dK / (K * K - m * m)
        h = beta * x[1] + palpha.evaluate(x[0])
        w = (c * K + K_N / A) / _sigma(K_N, x[2:]) ** 2
        return {(0, 0): beta * gamma + h * h, (0, 1): h, (1, 1): 1.0, (2, 2): w, (3, 3): w}

    def domain(p):
        try:
            K, dK = pK.derivatives_at(p[0])[:2]
        except (JetDomainError, ValueError) as exc:
            return str(exc)
        if abs(dK) <= DOMAIN_MARGIN:
            return f"IV: K'(x) = {dK:.6g}, K'(x) != 0 verlangt"
        if not c * K + K_N / A > DOMAIN_MARGIN:
            return f"IV: f^2 = c K + K_N / A = {c * K + K_N / A:.6g} <= 0"
        if min(abs(K - m), abs(K + m), abs(K + m + A)) <= DOMAIN_MARGIN:
            return f"IV: K = {K:.6g} trifft einen der Werte +-K_N/(cA) = {m:.6g} oder -K_N/(cA) - A"
        beta = -dK / (2 * (K + m + A))
        gamma = dK / (K * K - m * m)
        if not beta * gamma > DOMAIN_MARGIN:
            return f"IV: beta gamma = {beta * gamma:.6g} <= 0"
        if not _sigma_value(K_N, p[2:]) > DOMAIN_MARGIN:
            return "IV: 1 + K_N |y|^2 / 4 <= 0"
        return None

    warped = WarpedStructure(lambda x: c * pK.evaluate(x[0]) + K_N / A, K_N)
    return MetricChart("IV", components, domain, warped=warped)


def _family_V(spec, profiles):
    c, C, e, K_N = spec.param("c"), spec.param("C"), spec.param("e"), spec.param("K_N")
    pD, surface = profiles["D"], profiles["mu"]

    def factor_E(D, dD):
        return dD * dD / (2 * D * D * ((D - C) ** 2 + 2 * K_N / (c * D) + e))

    def components(x):
        mu, a = surface.state_jets(x[0].value, x[1].value)
        D = pD.evaluate(x[0])
        dD = pD.evaluate(x[0], 1)
        w = c * D * mu / _sigma(K_N, x[2:]) ** 2
        return {(0, 0): factor_E(D, dD) * (mu + D) + a * a, (0, 1): a, (1, 1): 1.0, (2, 2): w, (3, 3): w}

    def domain(p):
        try:
            D, dD = pD.derivatives_at(p[0])[:2]
            mu = surface.value(p[0], p[1])
        except (JetDomainError, ValueError) as exc:
            return str(exc)
        if abs(D) <= DOMAIN_MARGIN:
            return f"V: D(x) = {D:.6g}, D != 0 verlangt"
        if abs(dD) <= DOMAIN_MARGIN:
            return f"V: D'(x) = {dD:.6g}, D' != 0 verlangt"
        if not c * D * mu > DOMAIN_MARGIN:
            return f"V: c D mu = {c * D * mu:.6g} <= 0"
        E = factor_E(D, dD)
        if not E * (mu + D) > DOMAIN_MARGIN:
            return f"V: E (mu + D) = {E * (mu + D):.6g} <= 0"
        radicand = mu_radicand(mu, D, C, c, e, K_N, surface.pde_form)
        if not radicand > DOMAIN_MARGIN:
            return f"V: Radikand der Profil-PDE {radicand:.6g} <= 0"
        if not _sigma_value(K_N, p[2:]) > DOMAIN_MARGIN:
            return "V: 1 + K_N |y|^2 / 4 <= 0"
        return None

    def warping(x):
        mu, _ = surface.state_jets(x[0].value, x[1].value)
        return c * pD.evaluate(x[0]) * mu

    return MetricChart("V", components, domain, warped=WarpedStructure(warping, K_N))


def _family_VI(spec, profiles):
    a, b, q, r = (spec.param(n) for n in "abqr")
    _require(min(a, b, q, r) > 0, f"VI: a, b, q, r > 0 verlangt, erhalten {a}, {b}, {q}, {r}")
    _require(a != b, f"VI: a != b verlangt, erhalten a = b = {a}")
    phi = profiles["phi"]

    def components(x):
        p2 = phi.evaluate(x[0]) ** 2
        return {(0, 0): 1.0, (1, 1): p2, (2, 2): r * (p2 + a), (3, 3): q * (p2 + b)}

    return _diagonal_chart("VI", components)


def _signed_product(x, i, others) -> Jet3:
    result = Jet3.constant(1.0)
    for j in others:
        result = result * (x[i] - x[j])
    return result


def _family_VII(spec, profiles):
    coeffs = _poly_coeffs(spec, 7)
    if coeffs[6] == 0:
        raise _degenerate("VII", "a6")

    def components(x):
        return {
            (i, i): _signed_product(x, i, [j for j in range(4) if j != i]) / _poly_jet(coeffs, x[i])
            for i in range(4)
        }

    return _diagonal_chart("VII", components, "P(x_i) muss das Vorzeichen von prod_j (x_i - x_j) haben")


def _family_VIII(spec, profiles):
    coeffs = _poly_coeffs(spec, 6)
    if coeffs[5] == 0:
        raise _degenerate("VIII", "a5")
    _require(coeffs[0] == 0, f"VIII: P(0) = a0 = 0 verlangt, erhalten {coeffs[0]}")

    def components(x):
        entries = {(0, 0): x[1] * x[2] * x[3]}
        for i in (1, 2, 3):
            others = [j for j in (1, 2, 3) if j != i]
            entries[(i, i)] = _signed_product(x, i, others) / _poly_jet(coeffs, x[i])
        return entries

    return _diagonal_chart("VIII", components, "x2 x3 x4 > 0 und Vorzeichen von P verlangt")


def _family_IX(spec, profiles):
    b = spec.param("b")
    _require(b != 0, "IX: b != 0 verlangt")
    if spec.param("a3") == 0:
        raise _degenerate("IX", "a3")
    coeffs = _ix_polynomial(spec)

    def components(x):
        return {
            (0, 0): (x[2] - b) * (x[3] - b),
            (1, 1): x[2] * x[3],
            (2, 2): (x[2] - x[3]) / _poly_jet(coeffs, x[2]),
            (3, 3): (x[3] - x[2]) / _poly_jet(coeffs, x[3]),
        }

    return _diagonal_chart("IX", components, "Vorzeichen von P(x_3), P(x_4) verlangt")


# Staeckel-Loesungen ---------------------------------------------------

def _family_S1(spec, p):
    def components(x):
        eta = p["eta"].evaluate(x[0])
        return {(0, 0): 1.0, (1, 1): eta, (2, 2): eta * p["psi"].evaluate(x[1]),
                (3, 3): eta * p["phi"].evaluate(x[1])}

    return _diagonal_chart("S1", components)


def _family_S2(spec, p):
    def components(x):
        phi = p["phi"].evaluate(x[0])
        xi, zeta, eta = p["xi"].evaluate(x[1]), p["zeta"].evaluate(x[2]), p["eta"].evaluate(x[3])
        return {
            (0, 0): 1.0,
            (1, 1): phi * jet_abs(xi - zeta) * jet_abs(xi - eta),
            (2, 2): phi * jet_abs(zeta - xi) * jet_abs(zeta - eta),
            (3, 3): phi * jet_abs(eta - xi) * jet_abs(eta - zeta),
        }

    return _diagonal_chart("S2", components, "xi, zeta, eta muessen paarweise verschieden sein")


def _family_S3(spec, p):
    def components(x):
        w = x[0] * x[1] * (p["phi"].evaluate(x[2]) + p["psi"].evaluate(x[3]))
        return {(0, 0): p["eta"].evaluate(x[0]), (1, 1): x[0] * p["xi"].evaluate(x[1]), (2, 2): w, (3, 3): w}

    return _diagonal_chart("S3", components)


def _family_S4(spec, p):
    def components(x):
        w1 = p["phi"].evaluate(x[0]) + p["psi"].evaluate(x[1])
        w2 = p["xi"].evaluate(x[2]) + p["eta"].evaluate(x[3])
        return {(0, 0): w1, (1, 1): w1, (2, 2): w2, (3, 3): w2}

    return _diagonal_chart("S4", components)


def _family_S5(spec, p):
    def components(x):
        xi, eta = p["xi"].evaluate(x[0]), p["eta"].evaluate(x[1])
        w = xi * eta * (p["psi"].evaluate(x[2]) + p["phi"].evaluate(x[3]))
        return {(0, 0): xi - eta, (1, 1): xi - eta, (2, 2): w, (3, 3): w}

    return _diagonal_chart("S5", components)


def _family_S6(spec, p):
    def components(x):
        w = x[0] * (p["xi"].evaluate(x[2]) + p["eta"].evaluate(x[3]))
        return {(0, 0): p["phi"].evaluate(x[0]), (1, 1): p["psi"].evaluate(x[0]), (2, 2): w, (3, 3): w}

    return _diagonal_chart("S6", components)


def _family_S7(spec, p):
    def components(x):
        return {(0, 0): 1.0, (1, 1): p["phi"].evaluate(x[0]), (2, 2): p["psi"].evaluate(x[0]),
                (3, 3): p["eta"].evaluate(x[0])}

    return _diagonal_chart("S7", components)


def _abs_product(x, i, others) -> Jet3:
    result = Jet3.constant(1.0)
    for j in others:
        result = result * jet_abs(x[i] - x[j])
    return result


def _family_S8(spec, p):
    coeffs = _poly_coeffs(spec, 7)

    def components(x):
        return {
            (i, i): _abs_product(x, i, [j for j in range(4) if j != i]) / jet_abs(_poly_jet(coeffs, x[i]))
            for i in range(4)
        }

    return _diagonal_chart("S8", components, "Koordinaten paarweise verschieden, P(x_i) != 0")


def _family_S9(spec, p):
    coeffs = _poly_coeffs(spec, 6)

    def components(x):
        entries = {(0, 0): x[1] * x[2] * x[3]}
        for i in (1, 2, 3):
            others = [j for j in (1, 2, 3) if j != i]
            entries[(i, i)] = _abs_product(x, i, others) / jet_abs(_poly_jet(coeffs, x[i]))
        return entries

    return _diagonal_chart("S9", components, "x2 x3 x4 > 0, Koordinaten verschieden")


def _family_S10(spec, p):
    b = spec.param("b")
    coeffs = _ix_polynomial(spec)

    def components(x):
        return {
            (0, 0): jet_abs(x[2] - b) * jet_abs(x[3] - b),
            (1, 1): x[2] * x[3],
            (2, 2): jet_abs(x[2] - x[3]) / jet_abs(_poly_jet(coeffs, x[2])),
            (3, 3): jet_abs(x[3] - x[2]) / jet_abs(_poly_jet(coeffs, x[3])),
        }

    return _diagonal_chart("S10", components, "x3 x4 > 0, x3 != x4, x3, x4 != b")


_BUILDERS = {
    "I": _family_I,
    "II": _family_II,
    "III1": _family_III1,
    "III2": _family_III2,
    "R2a": _family_III1,
    "R2b": _family_III1,
    "R2c": _family_III1,
    "IV": _family_IV,
    "V": _family_V,
    "VI": _family_VI,
    "VII": _family_VII,
    "VIII": _family_VIII,
    "IX": _family_IX,
    "S1": _family_S1,
    "S2": _family_S2,
    "S3": _family_S3,
    "S4": _family_S4,
    "S5": _family_S5,
    "S6": _family_S6,
    "S7": _family_S7,
    "S8": _family_S8,
    "S9": _family_S9,
    "S10": _family_S10,
}


def scan_points(box, count: int = SCAN_COUNT):
    axes = [np.linspace(lo, hi, count) if hi > lo else np.array([lo]) for lo, hi in box]
    for combo in itertools.product(*axes):
        yield np.array(combo)


def build_family(spec: FamilySpec) -> MetricChart:
    """Karte der Familie; die Box wird auf Kartenbereich und positive Definitheit abgetastet."""
    if spec.tag not in _BUILDERS:
        raise ConstructionError(f"family: unbekannte Familie {spec.tag!r}, erlaubt: {', '.join(FAMILY_TAGS)}")
    if len(spec.box) != 4:
        raise ConstructionError(f"{spec.tag}: box braucht vier Intervalle, erhalten {len(spec.box)}")
    chart = _BUILDERS[spec.tag](spec, profiles_for(spec))
    for point in scan_points(spec.box):
        reason = chart.domain(point)
        if reason:
            raise ConstructionError(f"{spec.tag}: {reason} (erster verletzender Punkt {format_point(point)})")
        try:
            chart.metric_values(point)
        except (GeometryError, JetDomainError) as exc:
            raise ConstructionError(f"{spec.tag}: {exc}") from exc
    return chart


# ---------------------------------------------------------
# GESCHLOSSENE EIGENWERTE
# ---------------------------------------------------------

def _warped_line_eigenvalues(K_N: float, f: float, df: float, ddf: float) -> np.ndarray:
    r = 2 * K_N / f**2 - 2 * (df / f) ** 2 - ddf / f
    return np.array([r, r, r, -3 * ddf / f])


def closed_form_eigenvalues(spec: FamilySpec, point) -> np.ndarray | None:
    """Ricci-Eigenwerte aus den Formeln der Familie, absteigend; None ohne Formel."""
    p = np.asarray(point, dtype=float)
    tag = spec.tag
    profiles = profiles_for(spec)
    if tag == "I":
        values = np.full(4, 3 * spec.param("k"))
    elif tag == "II":
        k = spec.param("k")
        values = np.array([k, k, -k, -k])
    elif tag in ("III1", "R2a", "R2b", "R2c"):
        f, df, ddf = profiles["f"].derivatives_at(p[0])[:3]
        values = _warped_line_eigenvalues(_iii_curvature(spec), f, df, ddf)
    elif tag == "III2":
        F, dF, ddF = profiles["F"].derivatives_at(p[0])[:3]
        f = 1 / F
        values = _warped_line_eigenvalues(spec.param("K_N"), f, -dF / F**2, -ddF / F**2 + 2 * dF**2 / F**3)
    elif tag == "IV":
        c, A, K_N = spec.param("c"), spec.param("A"), spec.param("K_N")
        K = profiles["K"](p[0])
        C = A - K_N / (c * A)
        values = np.array([2 * K + C, 2 * K + C, 3 * K + A, 2 * K - A + C])
    elif tag == "V":
        C = spec.param("C")
        D = profiles["D"](p[0])
        K = profiles["mu"].value(p[0], p[1]) - D + C
        values = np.array([2 * K + C, 2 * K + C, 2 * K - D + C, 3 * K + D])
    elif tag == "VI":
        a, b = spec.param("a"), spec.param("b")
        p2 = profiles["phi"](p[0]) ** 2
        values = np.array([-6 * p2 - 2 * a - 2 * b, -4 * p2 - 2 * a - 2 * b, -4 * p2 - 2 * b, -4 * p2 - 2 * a])
    elif tag in ("VII", "VIII", "IX"):
        values = closed_form_sectional_curvatures(spec, p).sum(axis=1)
    else:
        return None
    return np.sort(values)[::-1]


def closed_form_sectional_curvatures(spec: FamilySpec, point) -> np.ndarray | None:
    """K(E_i, E_j) im Rahmen E_i = d_i / mu_i fuer VII, VIII, IX; Diagonale 0."""
    x = np.asarray(point, dtype=float)
    K = np.zeros((4, 4))
    if spec.tag == "VII":
        a5, a6 = spec.param("a5"), spec.param("a6")
        total = x.sum()
        for i, j in itertools.permutations(range(4), 2):
            rest = total - x[i] - x[j]
            K[i, j] = -a6 / 4 * (2 * (x[i] + x[j]) + rest) - a5 / 4
    elif spec.tag == "VIII":
        a4, a5 = spec.param("a4"), spec.param("a5")
        fiber = (1, 2, 3)
        for j in fiber:
            k, l = (m for m in fiber if m != j)
            K[0, j] = K[j, 0] = -(a5 * (2 * x[j] + x[k] + x[l]) + a4) / 4
        for j, k in itertools.combinations(fiber, 2):
            (l,) = (m for m in fiber if m not in (j, k))
            K[j, k] = K[k, j] = -(a5 * (2 * (x[j] + x[k]) + x[l]) + a4) / 4
    elif spec.tag == "IX":
        b, a2, a3 = spec.param("b"), spec.param("a2"), spec.param("a3")
        K[0, 1] = K[1, 0] = -(a3 * (x[2] + x[3]) + a2) / 4
        for k, l in ((2, 3), (3, 2)):
            K[0, k] = K[k, 0] = -(a3 * (2 * x[k] + x[l]) + a2) / 4
            K[1, k] = K[k, 1] = -(a3 * (2 * x[k] + x[l]) + a2 - b * a3) / 4
        K[2, 3] = K[3, 2] = -(2 * a3 * (x[2] + x[3]) + a2 - b * a3) / 4
    else:
        return None
    return K


def w1_residuals(profile: ProfileFunction, K_N: float, c: float, t: float) -> tuple[float, float]:
    """(ungequadrierte, gequadrierte) Residuen von F'' = 2 K_N F^3 + c F fuer F = 1/f."""
    f, df, ddf = profile.derivatives_at(t)[:3]
    F = 1 / f
    ddF = (2 * df**2 - f * ddf) / f**3
    source = 2 * K_N * F**3 + c * F
    return abs(ddF - source), abs(ddF**2 - source)


def random_spec(tag: str, rng: np.random.Generator, spread: float = RANDOM_SPREAD) -> FamilySpec:
    """Zulaessige Konstanten um die Standardwerte; Polynomkoeffizienten streuen schwaecher."""
    base = default_spec(tag)
    for _ in range(RANDOM_ATTEMPTS):
        params = {}
        for name, value in base.params.items():
            if name in FIXED_PARAMS:
                params[name] = value
                continue
            width = spread / 10 if name[0] == "a" and name[1:].isdigit() else spread
            params[name] = value * (1 + width * rng.uniform(-1.0, 1.0))
        candidate = replace(base, params=params)
        try:
            build_family(candidate)
        except ConstructionError:
            continue
        return candidate
    raise ConstructionError(f"{tag}: keine zulaessigen Zufallskonstanten nach {RANDOM_ATTEMPTS} Versuchen")
