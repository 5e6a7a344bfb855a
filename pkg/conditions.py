"""Residuen der geometrischen Bedingungen an einem Punkt.

Alle Residuen werden im Gram-Schmidt-Rahmen ausgewertet und relativ zur
Groesse des dominanten Terms angegeben (Rohwert / (1 + Skala)).

Konfiguration:
- `DEFAULT_SEED`, `N_RANDOM_DIRECTIONS` und `N_RANDOM_FRAMES` legen die
  Zufallsauswahl fuer die P-Bedingung fest.
- `STACKEL_TOL` ist die Schwelle, ab der eine diagonale Karte nicht als
  Staeckel-Loesung gilt (Voraussetzung fuer die (p1)-Pruefung).
- `DISTINCT_TOL` trennt Ricci-Eigenwerte fuer (p1).
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from geometry import (
    DIMENSION,
    CurvatureBundle,
    MetricChart,
    curvature_bundle,
    jacobi,
    operator_norm,
    orthonormal_frame,
    sectional_curvature,
    tensor_norm,
    to_frame,
)
from helper import relative
from jet import Jet3, JetDomainError, jet_log, jet_sqrt, jet_variables, unit_index

DEFAULT_SEED = 20240607
N_RANDOM_DIRECTIONS = 16
N_RANDOM_FRAMES = 8
STACKEL_TOL = 1e-9
DISTINCT_TOL = 1e-6

PERMUTATIONS = np.array(list(itertools.permutations(range(DIMENSION))))


@dataclass(frozen=True)
class NotApplicable:
    """Markiert eine Pruefung, deren Voraussetzung am Punkt nicht erfuellt ist."""

    reason: str


@dataclass(frozen=True)
class ResidualSet:
    weyl_norm: float
    cotton: float
    q_general: float
    q_explicit: float
    p_commutator: float
    p_quadratic: float
    codazzi: float
    killing: float
    nabla_ricci: float
    stackel: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        return asdict(self)


# ---------------------------------------------------------
# HILFSGROESSEN IM RAHMEN
# ---------------------------------------------------------

def _frame_parts(bundle: CurvatureBundle) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho, nabla rho als [X, Y, Z], ds) in Rahmenkomponenten."""
    E = bundle.frame
    return to_frame(bundle.ricci, E), to_frame(bundle.nabla_ricci, E), E.T @ bundle.scalar_gradient


def weyl_residual(bundle: CurvatureBundle) -> float:
    E = bundle.frame
    return relative(tensor_norm(bundle.weyl, E), tensor_norm(bundle.riemann, E))


def q_residual(bundle: CurvatureBundle, n: int = DIMENSION) -> tuple[float, float]:
    """(q_general, q_explicit): nabla rho gegen die symmetrisierte Ableitung der Skalarkruemmung."""
    _, nr, ds = _frame_parts(bundle)
    eye = np.eye(DIMENSION)
    scale = float(np.linalg.norm(nr))

    a = 1.0 / (2 * n - 2)
    b = (n - 2) / (2.0 * (n + 2) * (n - 1))
    general = nr - (
        a * np.einsum("x,yz->xyz", ds, eye)
        + b * (
            np.einsum("x,yz->xyz", ds, eye)
            + np.einsum("y,xz->xyz", ds, eye)
            + np.einsum("z,xy->xyz", ds, eye)
        )
    )
    explicit = nr - (
        2.0 / 9.0 * np.einsum("x,yz->xyz", ds, eye)
        + 1.0 / 18.0 * np.einsum("y,xz->xyz", ds, eye)
        + 1.0 / 18.0 * np.einsum("z,xy->xyz", ds, eye)
    )
    return relative(np.max(np.abs(general)), scale), relative(np.max(np.abs(explicit)), scale)


def cotton_residual(bundle: CurvatureBundle) -> float:
    _, nr, ds = _frame_parts(bundle)
    eye = np.eye(DIMENSION)
    cotton = (
        nr
        - np.einsum("yxz->xyz", nr)
        - (np.einsum("x,yz->xyz", ds, eye) - np.einsum("y,xz->xyz", ds, eye)) / 6.0
    )
    return relative(np.max(np.abs(cotton)), np.linalg.norm(nr))


def class_residuals(bundle: CurvatureBundle) -> tuple[float, float, float]:
    """(codazzi, killing, nabla_ricci)."""
    rho, nr, _ = _frame_parts(bundle)
    scale = float(np.linalg.norm(nr))
    codazzi = nr - np.einsum("yxz->xyz", nr)
    killing = nr + np.einsum("yzx->xyz", nr) + np.einsum("zxy->xyz", nr)
    return (
        relative(np.max(np.abs(codazzi)), scale),
        relative(np.max(np.abs(killing)), scale),
        relative(scale, np.linalg.norm(rho)),
    )


# ---------------------------------------------------------
# P-BEDINGUNG
# ---------------------------------------------------------

@lru_cache(maxsize=16)
def _random_samples(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((N_RANDOM_DIRECTIONS, DIMENSION))
    frames = rng.standard_normal((N_RANDOM_FRAMES, DIMENSION, DIMENSION))
    directions.setflags(write=False)
    frames.setflags(write=False)
    return directions, frames


def default_directions(bundle: CurvatureBundle, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Einheitsvektoren: die vier Koordinatenrichtungen plus zufaellige aus `seed`."""
    raw = np.vstack([np.eye(DIMENSION), _random_samples(seed)[0]])
    norms = np.sqrt(np.einsum("ni,ij,nj->n", raw, bundle.g, raw))
    return raw / norms[:, None]


def default_frames(bundle: CurvatureBundle, seed: int = DEFAULT_SEED) -> list[np.ndarray]:
    """Gram-Schmidt-Rahmen der Karte plus zufaellige orthonormale Rahmen aus `seed`."""
    frames = [bundle.frame]
    for A in _random_samples(seed)[1]:
        frames.append(A @ orthonormal_frame(A.T @ bundle.g @ A))
    return frames


def _quadratic_form(rho: np.ndarray, nr: np.ndarray) -> np.ndarray:
    x, y, z, u = PERMUTATIONS.T
    return (
        (rho[y, y] - rho[z, z]) * nr[x, y, z]
        + (nr[x, z, z] - nr[x, y, y]) * rho[y, z]
        + rho[y, u] * nr[x, z, u]
        - rho[z, u] * nr[x, y, u]
    )


def p_residual(
    bundle: CurvatureBundle,
    directions: Sequence[np.ndarray] | None = None,
    seed: int = DEFAULT_SEED,
) -> tuple[float, float]:
    """(p_commutator, p_quadratic).

    p_commutator ist das Maximum von ||lambda' lambda - lambda lambda'|| ueber die
    Richtungen, p_quadratic das Maximum der quadratischen Form in rho und nabla rho
    ueber alle Anordnungen der Zufallsrahmen.
    """
    if directions is None:
        directions = default_directions(bundle, seed)
    g, g_inv = bundle.g, bundle.g_inv
    commutator = 0.0
    for X in directions:
        package = jacobi(bundle, X)
        ratio = relative(
            operator_norm(package.commutator, g, g_inv),
            operator_norm(package.lam, g, g_inv) * operator_norm(package.lam_prime, g, g_inv),
        )
        commutator = max(commutator, ratio)

    quadratic = 0.0
    for F in default_frames(bundle, seed):
        rho = to_frame(bundle.ricci, F)
        nr = to_frame(bundle.nabla_ricci, F)
        value = float(np.max(np.abs(_quadratic_form(rho, nr))))
        quadratic = max(quadratic, relative(value, np.linalg.norm(rho) * np.linalg.norm(nr)))
    return commutator, quadratic


# ---------------------------------------------------------
# DIAGONALE METRIKEN
# ---------------------------------------------------------

def _pair_index(t: int, r: int) -> tuple[int, ...]:
    return tuple(a + b for a, b in zip(unit_index(t), unit_index(r)))


def _nu_derivatives(chart: MetricChart, point: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Erste und zweite Ableitungen von nu_s = ln mu_s: N1[s, t], N2[s, t, r]."""
    G = chart.metric_jets(point)
    N1 = np.zeros((DIMENSION, DIMENSION))
    N2 = np.zeros((DIMENSION, DIMENSION, DIMENSION))
    for s in range(DIMENSION):
        try:
            nu = 0.5 * jet_log(Jet3(G[s, s]))
        except JetDomainError as exc:
            raise exc.at_point(point) from exc
        for t in range(DIMENSION):
            N1[s, t] = nu.partial(unit_index(t))
            for r in range(DIMENSION):
                N2[s, t, r] = nu.partial(_pair_index(t, r))
    return N1, N2


def _require_diagonal(chart: MetricChart, what: str) -> None:
    if not chart.diagonal:
        raise ValueError(f"{what}: diagonale Karte erwartet, {chart.name} ist nicht diagonal")


def stackel_residual(chart: MetricChart, point: Sequence[float]) -> float:
    """Groesstes Residuum des Staeckel-Systems in nu = ln mu (nicht normiert)."""
    _require_diagonal(chart, "stackel_residual")
    N1, N2 = _nu_derivatives(chart, point)
    worst = 0.0
    for i, j, k in itertools.permutations(range(DIMENSION), 3):
        worst = max(
            worst,
            abs(N1[i, j] * N1[j, k] + N1[i, k] * N1[k, j] - N1[i, j] * N1[i, k]),
            abs(N2[i, j, k]),
        )
    for i, j in itertools.permutations(range(DIMENSION), 2):
        worst = max(worst, abs(N2[i, i, j] + 2 * N1[i, j] * N1[j, i]))
    return float(worst)


def d1_combination(K: np.ndarray) -> float:
    """max |K_il + K_kj - K_ik - K_jl| ueber alle Anordnungen (i, j, k, l)."""
    i, j, k, l = PERMUTATIONS.T
    return float(np.max(np.abs(K[i, l] + K[k, j] - K[i, k] - K[j, l])))


def diagonal_condition_checks(
    chart: MetricChart,
    point: Sequence[float],
    bundle: CurvatureBundle | None = None,
) -> tuple[float | NotApplicable, float | NotApplicable]:
    """(d1, p1) fuer diagonale Karten im Rahmen E_i = d_i / mu_i."""
    _require_diagonal(chart, "diagonal_condition_checks")
    if bundle is None:
        bundle = curvature_bundle(chart, point)
    diag = np.diag(bundle.g)
    K = np.einsum("ijji->ij", bundle.riemann) / np.outer(diag, diag)
    np.fill_diagonal(K, 0.0)
    d1 = relative(d1_combination(K), np.max(np.abs(K)))

    stackel = stackel_residual(chart, point)
    if stackel >= STACKEL_TOL:
        return d1, NotApplicable(f"Staeckel-Residuum {stackel:.3g} >= {STACKEL_TOL:g}")

    ricci = bundle.ricci_jet
    g_jet = bundle.metric[..., : ricci.shape[-1]]
    # r_j = rho_jj / g_jj als Jet der Ordnung 1, dr[j, i] = d_i r_j
    r = np.array([bundle.ricci[j, j] / diag[j] for j in range(DIMENSION)])
    dr = np.zeros((DIMENSION, DIMENSION))
    for j in range(DIMENSION):
        d_rho = ricci[j, j, 1:]
        d_g = g_jet[j, j, 1:]
        dr[j] = (d_rho * diag[j] - bundle.ricci[j, j] * d_g) / diag[j] ** 2
    gap = DISTINCT_TOL * (1.0 + np.max(np.abs(r)))
    if min(abs(r[a] - r[b]) for a, b in itertools.combinations(range(DIMENSION), 2)) <= gap:
        return d1, NotApplicable("Ricci-Eigenwerte nicht paarweise verschieden")

    N1, _ = _nu_derivatives(chart, point)
    worst = 0.0
    for i, j in itertools.permutations(range(DIMENSION), 2):
        worst = max(
            worst,
            abs(2.0 / 3.0 * dr[i, i] - dr[j, i]),
            abs(dr[j, i] - 4 * (r[i] - r[j]) * N1[j, i]),
        )
    return d1, relative(worst, np.max(np.abs(dr)))


# ---------------------------------------------------------
# VERZERRTE PRODUKTE B^2 x_f N^2
# ---------------------------------------------------------

def _base_chart(chart: MetricChart) -> MetricChart:
    def components(coords):
        entries = chart.components(coords)
        return {
            (0, 0): entries[(0, 0)],
            (0, 1): entries.get((0, 1), 0.0),
            (1, 1): entries[(1, 1)],
            (2, 2): 1.0,
            (3, 3): 1.0,
        }

    return MetricChart(name=f"{chart.name} (Basis)", components=components, domain=chart.domain)


def base_gauss_curvature(chart: MetricChart, point: Sequence[float]) -> float:
    """Gauss-Kruemmung der Basisflaeche (x0, x1) einer verzerrten Produktkarte."""
    if chart.warped is None:
        raise ValueError(f"{chart.name}: Karte ist nicht als verzerrtes Produkt ausgezeichnet")
    bundle = curvature_bundle(_base_chart(chart), point)
    e0, e1 = np.eye(DIMENSION)[:2]
    return sectional_curvature(bundle, e0, e1)


def warped_lcf_residual(chart: MetricChart, point: Sequence[float]) -> float:
    """Residuum von K_N/f^2 + (Laplace f)/f - |grad f|^2/f^2 + K auf der Basis.

    Null genau dann, wenn B^2 x_f N^2 lokal konform flach ist.
    """
    warped = chart.warped
    if warped is None:
        raise ValueError(f"{chart.name}: Karte ist nicht als verzerrtes Produkt ausgezeichnet")
    p = chart.check_point(point)
    base = curvature_bundle(_base_chart(chart), p)
    try:
        f = jet_sqrt(warped.warping_squared(jet_variables(p)))
    except JetDomainError as exc:
        raise exc.at_point(p) from exc

    df = np.array([f.partial(unit_index(a)) for a in range(2)])
    ddf = np.array([[f.partial(_pair_index(a, b)) for b in range(2)] for a in range(2)])
    gamma = base.christoffel[:2, :2, :2, 0]
    hessian = ddf - np.einsum("cab,c->ab", gamma, df)
    g_inv = base.g_inv[:2, :2]
    laplace = float(np.einsum("ab,ab->", g_inv, hessian))
    grad2 = float(df @ g_inv @ df)
    e0, e1 = np.eye(DIMENSION)[:2]
    K = sectional_curvature(base, e0, e1)

    terms = np.array([warped.fiber_curvature / f.value**2, laplace / f.value, -grad2 / f.value**2, K])
    return relative(abs(terms.sum()), np.sum(np.abs(terms)))


# ---------------------------------------------------------
# ALLE RESIDUEN
# ---------------------------------------------------------

def residual_set(
    bundle: CurvatureBundle,
    chart: MetricChart | None = None,
    seed: int = DEFAULT_SEED,
) -> ResidualSet:
    q_general, q_explicit = q_residual(bundle)
    p_commutator, p_quadratic = p_residual(bundle, seed=seed)
    codazzi, killing, nabla_ricci = class_residuals(bundle)
    stackel = None
    if chart is not None and chart.diagonal:
        stackel = stackel_residual(chart, bundle.point)
    return ResidualSet(
        weyl_norm=weyl_residual(bundle),
        cotton=cotton_residual(bundle),
        q_general=q_general,
        q_explicit=q_explicit,
        p_commutator=p_commutator,
        p_quadratic=p_quadratic,
        codazzi=codazzi,
        killing=killing,
        nabla_ricci=nabla_ricci,
        stackel=stackel,
    )
