"""Abgeschnittene Taylor-Jets (Gesamtordnung 3, vier Variablen) und jet-wertige ODE-Integration.

Ein `Jet3` speichert pro Multiindex alpha (|alpha| <= 3) genau einen Koeffizienten,
intern als Taylor-Koeffizient d^alpha f / alpha!. Alle Rechenoperationen sind
exakt bis zur abgeschnittenen Ordnung; numerisch differenziert wird nirgends.

Konfiguration:
- `N_VARS` und `MAX_ORDER` legen die Jet-Groesse fest (35 Koeffizienten).
- `DOMAIN_MARGIN` ist der Mindestabstand zu singulaeren Werten von
  div/log/sqrt/abs, darunter wird `JetDomainError` ausgeloest.
- `ODE_TOL`, `ODE_METHOD` und `ODE_ATOL_FACTOR` steuern `solve_ivp` in
  `jet_ode_integrate`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

# ---------------------------------------------------------
# JET-GROESSE
# ---------------------------------------------------------
N_VARS = 4
MAX_ORDER = 3

# ---------------------------------------------------------
# NUMERIK
# ---------------------------------------------------------
DOMAIN_MARGIN = 1e-10
ODE_TOL = 1e-10
ODE_METHOD = "DOP853"
ODE_ATOL_FACTOR = 1e-2
ODE_METHOD_ORDERS = {"DOP853": 7, "RK45": 4}


class JetDomainError(ValueError):
    """Argument einer Operation liegt zu nah an ihrem singulaeren Wert."""

    def __init__(self, factor: str, value: float, point: Sequence[float] | None = None):
        self.factor = factor
        self.value = float(value)
        self.point = None if point is None else tuple(float(c) for c in point)
        where = "" if self.point is None else f" am Punkt {tuple(round(c, 6) for c in self.point)}"
        super().__init__(f"{factor}: Argument {self.value:.6g} liegt zu nah an der Singularitaet{where}")

    def at_point(self, point: Sequence[float]) -> "JetDomainError":
        return JetDomainError(self.factor, self.value, point)


class IntegrationError(RuntimeError):
    """Integration ist vor dem Intervallende abgebrochen."""

    def __init__(self, message: str, last_valid: float):
        self.last_valid = float(last_valid)
        super().__init__(f"{message} (letzte gueltige Stelle t={self.last_valid:.6g})")


def _multi_indices() -> tuple[tuple[int, ...], ...]:
    indices = []
    for order in range(MAX_ORDER + 1):
        for combo in itertools.combinations_with_replacement(range(N_VARS), order):
            alpha = [0] * N_VARS
            for var in combo:
                alpha[var] += 1
            indices.append(tuple(alpha))
    return tuple(indices)


# graded: alle Multiindizes der Ordnung <= k liegen vor denen der Ordnung k+1
MULTI_INDICES = _multi_indices()
SLOT = {alpha: slot for slot, alpha in enumerate(MULTI_INDICES)}
N_COEFFS = len(MULTI_INDICES)
ORDER_SIZES = tuple(sum(1 for alpha in MULTI_INDICES if sum(alpha) <= k) for k in range(MAX_ORDER + 1))
ALPHA_FACTORIALS = np.array(
    [math.prod(math.factorial(a) for a in alpha) for alpha in MULTI_INDICES], dtype=float
)


def unit_index(var: int, power: int = 1) -> tuple[int, ...]:
    alpha = [0] * N_VARS
    alpha[var] = power
    return tuple(alpha)


def _product_tables():
    tables = []
    for order in range(MAX_ORDER + 1):
        size = ORDER_SIZES[order]
        left, right, target = [], [], []
        for i, a in enumerate(MULTI_INDICES[:size]):
            for j, b in enumerate(MULTI_INDICES[:size]):
                c = tuple(x + y for x, y in zip(a, b))
                if sum(c) <= order:
                    left.append(i)
                    right.append(j)
                    target.append(SLOT[c])
        scatter = np.zeros((len(target), size))
        scatter[np.arange(len(target)), target] = 1.0
        tables.append((np.array(left), np.array(right), scatter))
    return tuple(tables)


def _derivative_tables():
    below = ORDER_SIZES[MAX_ORDER - 1]
    sources, factors = [], []
    for var in range(N_VARS):
        shifted = [SLOT[tuple(a + (k == var) for k, a in enumerate(alpha))] for alpha in MULTI_INDICES[:below]]
        sources.append(np.array(shifted))
        factors.append(np.array([alpha[var] + 1 for alpha in MULTI_INDICES[:below]], dtype=float))
    return tuple(sources), tuple(factors)


PRODUCT_TABLES = _product_tables()
DERIVATIVE_SOURCES, DERIVATIVE_FACTORS = _derivative_tables()


def order_of(size: int) -> int:
    """Jet-Ordnung zu einer Koeffizientenzahl (1, 5, 15 oder 35)."""
    try:
        return ORDER_SIZES.index(size)
    except ValueError:
        raise ValueError(f"{size} ist keine gueltige Jet-Laenge {ORDER_SIZES}") from None


# ---------------------------------------------------------
# ARRAY-EBENE (letzte Achse = Taylor-Koeffizienten)
# ---------------------------------------------------------

def taylor_mul(x: np.ndarray, y: np.ndarray, order: int | None = None) -> np.ndarray:
    """Faltung zweier Koeffizientenfelder, abgeschnitten bei `order`."""
    if order is None:
        order = min(order_of(x.shape[-1]), order_of(y.shape[-1]))
    size = ORDER_SIZES[order]
    left, right, scatter = PRODUCT_TABLES[order]
    return (x[..., :size][..., left] * y[..., :size][..., right]) @ scatter


def taylor_einsum(subscripts: str, x: np.ndarray, y: np.ndarray, order: int) -> np.ndarray:
    """`np.einsum` ueber Tensorindizes, bei dem jedes Produkt ein Jet-Produkt ist.

    `subscripts` nennt nur die Tensorindizes, z.B. "kl,lij->kij".
    """
    inputs, output = subscripts.split("->")
    first, second = inputs.split(",")
    size = ORDER_SIZES[order]
    left, right, scatter = PRODUCT_TABLES[order]
    pairs = np.einsum(
        f"{first}Z,{second}Z->{output}Z",
        x[..., :size][..., left],
        y[..., :size][..., right],
    )
    return pairs @ scatter


def taylor_derivative(x: np.ndarray, var: int) -> np.ndarray:
    """Partielle Ableitung nach `var`; die Ordnung sinkt um eins."""
    order = order_of(x.shape[-1])
    if order == 0:
        raise ValueError("Jet der Ordnung 0 kann nicht weiter abgeleitet werden")
    size = ORDER_SIZES[order - 1]
    return x[..., DERIVATIVE_SOURCES[var][:size]] * DERIVATIVE_FACTORS[var][:size]


def taylor_integrate(x: np.ndarray, var: int) -> np.ndarray:
    """Stammfunktion nach `var` mit verschwindender Integrationskonstante."""
    below = ORDER_SIZES[MAX_ORDER - 1]
    out = np.zeros(x.shape[:-1] + (N_COEFFS,))
    out[..., DERIVATIVE_SOURCES[var]] = x[..., :below] / DERIVATIVE_FACTORS[var]
    return out


def compose_univariate(x: np.ndarray, derivatives: Sequence[float]) -> np.ndarray:
    """f(x) fuer ein Koeffizientenfeld x, gegeben f, f', f'', f''' am Wert von x."""
    delta = np.array(x, dtype=float)
    delta[..., 0] = 0.0
    result = np.zeros_like(delta)
    result[..., 0] = derivatives[0]
    power = delta
    for k in range(1, order_of(x.shape[-1]) + 1):
        result = result + (derivatives[k] / math.factorial(k)) * power
        power = taylor_mul(power, delta)
    return result


def to_partials(x: np.ndarray) -> np.ndarray:
    """Taylor-Koeffizienten -> gemischte partielle Ableitungen d^alpha f."""
    return x * ALPHA_FACTORIALS[: x.shape[-1]]


# ---------------------------------------------------------
# SKALARE JETS
# ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Jet3:
    """Skalarer Jet der Ordnung 3 in vier Variablen (Taylor-Koeffizienten)."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if arr.shape != (N_COEFFS,):
            raise ValueError(f"Jet3 erwartet {N_COEFFS} Koeffizienten, erhalten {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def constant(cls, value: float) -> "Jet3":
        coeffs = np.zeros(N_COEFFS)
        coeffs[0] = value
        return cls(coeffs)

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    @property
    def gradient(self) -> np.ndarray:
        return np.array(self.coeffs[1:ORDER_SIZES[1]])

    @property
    def partials(self) -> np.ndarray:
        return to_partials(self.coeffs)

    def partial(self, alpha: Sequence[int]) -> float:
        slot = SLOT[tuple(alpha)]
        return float(self.coeffs[slot] * ALPHA_FACTORIALS[slot])

    def derivative(self, var: int) -> "Jet3":
        """d/d x_var; die Eintraege dritter Ordnung sind danach 0."""
        coeffs = np.zeros(N_COEFFS)
        coeffs[: ORDER_SIZES[MAX_ORDER - 1]] = taylor_derivative(self.coeffs, var)
        return Jet3(coeffs)

    def __repr__(self) -> str:
        return f"Jet3(value={self.value:.6g}, gradient={np.round(self.gradient, 6).tolist()})"

    # Arithmetik ------------------------------------------------------

    @staticmethod
    def _coeffs_of(other: Any) -> np.ndarray | None:
        if isinstance(other, Jet3):
            return other.coeffs
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet3.constant(float(other)).coeffs
        return None

    def __add__(self, other):
        c = self._coeffs_of(other)
        return NotImplemented if c is None else Jet3(self.coeffs + c)

    __radd__ = __add__

    def __sub__(self, other):
        c = self._coeffs_of(other)
        return NotImplemented if c is None else Jet3(self.coeffs - c)

    def __rsub__(self, other):
        c = self._coeffs_of(other)
        return NotImplemented if c is None else Jet3(c - self.coeffs)

    def __neg__(self):
        return Jet3(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet3(self.coeffs * float(other))
        c = self._coeffs_of(other)
        return NotImplemented if c is None else Jet3(taylor_mul(self.coeffs, c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * jet_reciprocal(Jet3.constant(float(other)))
        if not isinstance(other, Jet3):
            return NotImplemented
        return self * jet_reciprocal(other)

    def __rtruediv__(self, other):
        c = self._coeffs_of(other)
        return NotImplemented if c is None else Jet3(c) * jet_reciprocal(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Jet3):
            return jet_exp(exponent * jet_log(self))
        return jet_power(self, float(exponent))


def jet_variable(point: Sequence[float], var_index: int) -> Jet3:
    """Koordinatenfunktion x_var als Jet am Punkt `point`."""
    if not isinstance(var_index, (int, np.integer)) or not 0 <= var_index < N_VARS:
        raise ValueError(f"var_index muss in 0..{N_VARS - 1} liegen, erhalten {var_index!r}")
    if len(point) != N_VARS:
        raise ValueError(f"Punkt muss {N_VARS} Koordinaten haben, erhalten {len(point)}")
    coeffs = np.zeros(N_COEFFS)
    coeffs[0] = float(point[var_index])
    coeffs[SLOT[unit_index(int(var_index))]] = 1.0
    return Jet3(coeffs)


def jet_variables(point: Sequence[float]) -> tuple[Jet3, ...]:
    return tuple(jet_variable(point, k) for k in range(N_VARS))


def _apply(x: Jet3, derivatives: Sequence[float]) -> Jet3:
    return Jet3(compose_univariate(x.coeffs, derivatives))


def _away_from_zero(x: Jet3, factor: str) -> float:
    v = x.value
    if not np.isfinite(v) or abs(v) <= DOMAIN_MARGIN:
        raise JetDomainError(factor, v)
    return v


def _positive(x: Jet3, factor: str) -> float:
    v = x.value
    if not np.isfinite(v) or v <= DOMAIN_MARGIN:
        raise JetDomainError(factor, v)
    return v


def jet_reciprocal(x: Jet3) -> Jet3:
    v = _away_from_zero(x, "div")
    return _apply(x, (1 / v, -1 / v**2, 2 / v**3, -6 / v**4))


def jet_sqrt(x: Jet3) -> Jet3:
    v = _positive(x, "sqrt")
    s = math.sqrt(v)
    return _apply(x, (s, 0.5 / s, -0.25 / s**3, 0.375 / s**5))


def jet_exp(x: Jet3) -> Jet3:
    e = math.exp(x.value)
    return _apply(x, (e, e, e, e))


def jet_log(x: Jet3) -> Jet3:
    v = _positive(x, "log")
    return _apply(x, (math.log(v), 1 / v, -1 / v**2, 2 / v**3))


def jet_sin(x: Jet3) -> Jet3:
    s, c = math.sin(x.value), math.cos(x.value)
    return _apply(x, (s, c, -s, -c))


def jet_cos(x: Jet3) -> Jet3:
    s, c = math.sin(x.value), math.cos(x.value)
    return _apply(x, (c, -s, -c, s))


def jet_abs(x: Jet3) -> Jet3:
    """|x| ueber das Vorzeichen am Basispunkt; das Argument muss dort vorzeichenfest sein."""
    v = _away_from_zero(x, "abs")
    return x if v > 0 else -x


def jet_power(x: Jet3, exponent: float) -> Jet3:
    if float(exponent).is_integer():
        n = int(exponent)
        if n < 0:
            return jet_power(jet_reciprocal(x), -n)
        result = Jet3.constant(1.0)
        for _ in range(n):
            result = result * x
        return result
    v = _positive(x, "pow")
    p = exponent
    return _apply(x, (v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2), p * (p - 1) * (p - 2) * v ** (p - 3)))


JET_OPERATIONS: dict[str, Callable[..., Jet3]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, b: a**b,
    "sqrt": jet_sqrt,
    "exp": jet_exp,
    "log": jet_log,
    "sin": jet_sin,
    "cos": jet_cos,
    "abs": jet_abs,
}


def jet_compose(op: str, args: Sequence[Jet3 | float]) -> Jet3:
    """Wendet eine benannte Operation aus `JET_OPERATIONS` auf Jets an."""
    if op not in JET_OPERATIONS:
        raise ValueError(f"unbekannte Jet-Operation {op!r}, erlaubt: {sorted(JET_OPERATIONS)}")
    fn = JET_OPERATIONS[op]
    unary = op in {"sqrt", "exp", "log", "sin", "cos", "abs"}
    if len(args) != (1 if unary else 2):
        raise ValueError(f"{op} erwartet {1 if unary else 2} Argument(e), erhalten {len(args)}")
    return fn(*args)


# ---------------------------------------------------------
# JET-WERTIGE ODE
# ---------------------------------------------------------

JetField = Callable[[Any, tuple[Jet3, ...]], Sequence[Jet3]]


def picard_lift(rhs: JetField, base: np.ndarray, t: float, var: int) -> tuple[Jet3, ...]:
    """Ergaenzt einen Zustand um seine Ableitungen nach der unabhaengigen Variable.

    `base` (n_state x 35) darf nicht von `var` abhaengen. Jeder Durchlauf der
    Picard-Iteration macht eine weitere Ordnung in `var` exakt, die hoeheren
    Ableitungen stammen damit aus der differenzierten ODE.
    """
    t_coeffs = np.zeros(N_COEFFS)
    t_coeffs[0] = t
    t_coeffs[SLOT[unit_index(var)]] = 1.0
    t_jet = Jet3(t_coeffs)
    state = np.array(base, dtype=float)
    for _ in range(MAX_ORDER + 1):
        derivatives = rhs(t_jet, tuple(Jet3(row) for row in state))
        increment = np.stack([d.coeffs for d in derivatives])
        state = base + taylor_integrate(increment, var)
    return tuple(Jet3(row) for row in state)


@dataclass(frozen=True, eq=False)
class JetTrajectory:
    """Loesung einer jet-wertigen ODE mit dichter Ausgabe."""

    grid: np.ndarray
    states: np.ndarray
    order: int
    rhs: JetField
    tol: float
    solution: Any
    truncated_at: float | None = None

    def __post_init__(self):
        for name in ("grid", "states"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def span(self) -> tuple[float, float]:
        return float(min(self.grid[0], self.grid[-1])), float(max(self.grid[0], self.grid[-1]))

    def contains(self, t: float) -> bool:
        lo, hi = self.span
        return lo <= t <= hi

    def state_at(self, t: float) -> tuple[Jet3, ...]:
        hits = np.flatnonzero(self.grid == t)
        if hits.size:
            arr = self.states[hits[0]]
        else:
            if not self.contains(t):
                lo, hi = self.span
                raise ValueError(f"t={t:.6g} liegt ausserhalb der Trajektorie [{lo:.6g}, {hi:.6g}]")
            arr = np.asarray(self.solution(t)).reshape(self.states.shape[1:])
        return tuple(Jet3(row) for row in arr)

    def lifted_state(self, t: float, var: int) -> tuple[Jet3, ...]:
        base = np.stack([j.coeffs for j in self.state_at(t)])
        return picard_lift(self.rhs, base, t, var)


def jet_ode_integrate(
    rhs: JetField,
    init: Sequence[Jet3],
    span: tuple[float, float],
    tol: float = ODE_TOL,
    events: Callable | None = None,
) -> JetTrajectory:
    """Integriert x' = rhs(t, x) fuer einen Zustand aus Jets mit `solve_ivp`.

    Die Jet-Koeffizienten werden flach integriert; `events` (Signatur wie in
    `solve_ivp`, auf dem flachen Zustand) darf die Integration terminal
    abbrechen, der Abbruchpunkt steht dann in `truncated_at`.
    """
    if not tol > 0:
        raise ValueError(f"tol muss positiv sein, erhalten {tol}")
    t0, t1 = float(span[0]), float(span[1])
    base = np.stack([np.asarray(j.coeffs, dtype=float) for j in init])
    shape = base.shape
    last_t = [t0]

    def fun(t, y):
        state = tuple(Jet3(row) for row in y.reshape(shape))
        try:
            derivatives = rhs(t, state)
        except JetDomainError as exc:
            raise IntegrationError(str(exc), last_t[0]) from exc
        last_t[0] = t
        return np.concatenate([d.coeffs for d in derivatives])

    sol = solve_ivp(
        fun,
        (t0, t1),
        base.ravel(),
        method=ODE_METHOD,
        rtol=tol,
        atol=tol * ODE_ATOL_FACTOR,
        dense_output=True,
        events=events,
    )
    if sol.status < 0:
        last = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(str(sol.message), last)
    truncated = float(sol.t[-1]) if sol.status == 1 else None
    return JetTrajectory(
        grid=sol.t,
        states=sol.y.T.reshape((-1,) + shape),
        order=ODE_METHOD_ORDERS.get(ODE_METHOD, 4),
        rhs=rhs,
        tol=tol,
        solution=sol.sol,
        truncated_at=truncated,
    )
