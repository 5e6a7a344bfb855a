"""Kruemmungspipeline fuer 4-dimensionale Riemannsche Karten.

Aus dem Metrik-Jet (Ordnung 3) an einem Punkt entstehen Christoffel-Symbole
(Ordnung 2), Riemann- und Ricci-Tensor samt erster Ableitung, die kovarianten
Ableitungen von Ricci und Riemann, der Weyl-Tensor und der Jacobi-Operator.

Konventionen:
- R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y], R_ijkl = g(R(d_i,d_j)d_k, d_l).
- Ricci rho_jk = sum_i R^i_kij, Schnittkruemmung K(X,Y) = R(X,Y,Y,X).
- W = R - P (Kulkarni-Nomizu) g mit P = (rho - s/6 g) / 2.

Konfiguration:
- `DIMENSION` ist fest 4.
- `CLUSTER_TOL` trennt Ricci-Eigenwerte relativ zu 1 + max|r|.
- `UNIT_TOL` ist die erlaubte Abweichung von g(X,X) = 1 fuer Jacobi-Richtungen.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import linalg

from helper import format_point, multiplicity_pattern
from jet import (
    N_COEFFS,
    ORDER_SIZES,
    Jet3,
    JetDomainError,
    jet_exp,
    jet_variables,
    taylor_derivative,
    taylor_einsum,
)

DIMENSION = 4
CLUSTER_TOL = 1e-6
UNIT_TOL = 1e-12

# Basis der 2-Formen: e0^e1, e0^e2, e0^e3, e2^e3, e3^e1, e1^e2
PAIR_BASIS = ((0, 1), (0, 2), (0, 3), (2, 3), (3, 1), (1, 2))


class GeometryError(ValueError):
    """Punkt liegt nicht im Kartenbereich oder die Metrik ist dort nicht positiv definit."""


MetricEvaluator = Callable[[tuple[Jet3, ...]], Mapping[tuple[int, int], "Jet3 | float"]]
DomainPredicate = Callable[[np.ndarray], "str | None"]


def _everywhere(point: np.ndarray) -> str | None:
    return None


@dataclass(frozen=True)
class WarpedStructure:
    """Kennzeichnet eine Karte als B^2 x_f N^2: Basis in (x0, x1), f^2 als Jet."""

    warping_squared: Callable[[tuple[Jet3, ...]], Jet3]
    fiber_curvature: float
    base: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class MetricChart:
    """Karte mit Metrik als Jet-Funktion der Koordinaten.

    `components` liefert die oberen Dreieckseintraege (i <= j); fehlende
    Eintraege sind 0. `domain` gibt fuer ungueltige Punkte einen Grund zurueck.
    """

    name: str
    components: MetricEvaluator
    domain: DomainPredicate = _everywhere
    diagonal: bool = False
    warped: WarpedStructure | None = None
    dimension: int = DIMENSION

    def check_point(self, point: Sequence[float]) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        if p.shape != (self.dimension,):
            raise GeometryError(f"{self.name}: Punkt braucht {self.dimension} Koordinaten, erhalten {p.shape}")
        if not np.all(np.isfinite(p)):
            raise GeometryError(f"{self.name}: Punkt {format_point(p)} ist nicht endlich")
        reason = self.domain(p)
        if reason:
            raise GeometryError(f"{self.name}: Punkt {format_point(p)} liegt ausserhalb der Karte: {reason}")
        return p

    def metric_jets(self, point: Sequence[float]) -> np.ndarray:
        """Metrik-Jet g_ij als Feld (4, 4, 35)."""
        p = self.check_point(point)
        try:
            entries = self.components(jet_variables(p))
        except JetDomainError as exc:
            raise exc.at_point(p) from exc
        g = np.zeros((self.dimension, self.dimension, N_COEFFS))
        for (i, j), value in entries.items():
            if self.diagonal and i != j:
                raise GeometryError(f"{self.name}: diagonale Karte liefert Eintrag ({i}, {j})")
            coeffs = value.coeffs if isinstance(value, Jet3) else Jet3.constant(float(value)).coeffs
            g[i, j] = coeffs
            g[j, i] = coeffs
        _check_positive_definite(self.name, g[..., 0], p)
        return g

    def metric_values(self, point: Sequence[float]) -> np.ndarray:
        return self.metric_jets(point)[..., 0]


def _check_positive_definite(name: str, g: np.ndarray, point: np.ndarray) -> None:
    if not np.all(np.isfinite(g)):
        raise GeometryError(f"{name}: Metrik bei {format_point(point)} nicht endlich")
    for k in range(1, g.shape[0] + 1):
        minor = float(np.linalg.det(g[:k, :k]))
        if not minor > 0:
            raise GeometryError(
                f"{name}: Metrik bei {format_point(point)} nicht positiv definit "
                f"(Hauptminor {k} = {minor:.6g})"
            )


def conformally_rescaled(chart: MetricChart, u: Callable[[tuple[Jet3, ...]], Jet3], name: str | None = None) -> MetricChart:
    """Karte mit Metrik e^(2u) g; der Weyl-Tensor (1,3) bleibt dabei gleich."""

    def components(coords):
        factor = jet_exp(2 * u(coords))
        return {key: factor * value for key, value in chart.components(coords).items()}

    return MetricChart(
        name=name or f"e^(2u) {chart.name}",
        components=components,
        domain=chart.domain,
        diagonal=chart.diagonal,
    )


# ---------------------------------------------------------
# JET-LINEARE ALGEBRA
# ---------------------------------------------------------

def jet_matrix_inverse(G: np.ndarray, order: int) -> np.ndarray:
    """Inverse einer Jet-Matrix als Neumann-Reihe sum_m (-A dG)^m A mit A = G0^-1."""
    size = ORDER_SIZES[order]
    G = G[..., :size]
    A = np.linalg.inv(G[..., 0])
    delta = np.array(G)
    delta[..., 0] = 0.0
    step = -np.einsum("ij,jkZ->ikZ", A, delta)
    term = np.zeros_like(G)
    term[..., 0] = A
    result = np.array(term)
    for _ in range(order):
        term = taylor_einsum("ij,jk->ik", step, term, order)
        result = result + term
    return result


def _christoffel_from_metric(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(g^-1, Gamma^k_ij) jeweils als Jets der Ordnung 2."""
    Ginv = jet_matrix_inverse(G, 2)
    # dG[m, i, j] = d_m g_ij
    dG = np.stack([taylor_derivative(G, m) for m in range(DIMENSION)])
    # T[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    T = np.einsum("ijlZ->lijZ", dG) + np.einsum("jilZ->lijZ", dG) - dG
    Gamma = 0.5 * taylor_einsum("kl,lij->kij", Ginv, T, 2)
    return Ginv, Gamma


def christoffel(chart: MetricChart, point: Sequence[float]) -> np.ndarray:
    """Gamma^k_ij als Taylor-Koeffizienten bis Ordnung 2, Form (4, 4, 4, 15)."""
    return _christoffel_from_metric(chart.metric_jets(point))[1]


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    return (
        np.einsum("il,jk->ijkl", h, k)
        + np.einsum("jk,il->ijkl", h, k)
        - np.einsum("ik,jl->ijkl", h, k)
        - np.einsum("jl,ik->ijkl", h, k)
    )


def _weyl_tensor(R: np.ndarray, ricci: np.ndarray, scalar: float, g: np.ndarray) -> np.ndarray:
    schouten = 0.5 * (ricci - scalar / 6.0 * g)
    return R - kulkarni_nomizu(schouten, g)


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    """Alle Kruemmungsgroessen an einem Punkt.

    Jets (letzte Achse) sind Taylor-Koeffizienten: `christoffel` bis Ordnung 2,
    `riemann_jet`, `ricci_jet` und `scalar_jet` bis Ordnung 1.
    """

    point: np.ndarray
    metric: np.ndarray
    metric_inverse: np.ndarray
    christoffel: np.ndarray
    riemann_mixed: np.ndarray
    riemann_jet: np.ndarray
    ricci_jet: np.ndarray
    scalar_jet: np.ndarray
    nabla_ricci: np.ndarray
    nabla_riemann: np.ndarray
    weyl: np.ndarray
    chart_name: str = ""
    _frame: np.ndarray | None = field(default=None, repr=False)

    @property
    def g(self) -> np.ndarray:
        return self.metric[..., 0]

    @property
    def g_inv(self) -> np.ndarray:
        return self.metric_inverse[..., 0]

    @property
    def riemann(self) -> np.ndarray:
        return self.riemann_jet[..., 0]

    @property
    def ricci(self) -> np.ndarray:
        return self.ricci_jet[..., 0]

    @property
    def scalar(self) -> float:
        return float(self.scalar_jet[0])

    @property
    def scalar_gradient(self) -> np.ndarray:
        return np.array(self.scalar_jet[1:ORDER_SIZES[1]])

    @property
    def frame(self) -> np.ndarray:
        if self._frame is None:
            object.__setattr__(self, "_frame", orthonormal_frame(self.g))
        return self._frame


def curvature_bundle(chart: MetricChart, point: Sequence[float]) -> CurvatureBundle:
    G = chart.metric_jets(point)
    Ginv, Gamma = _christoffel_from_metric(G)
    Gamma1 = Gamma[..., : ORDER_SIZES[1]]

    # dGamma[i, m, j, k] = d_i Gamma^m_jk, Ordnung 1
    dGamma = np.stack([taylor_derivative(Gamma, i) for i in range(DIMENSION)])
    # Rm[m, k, i, j] = [R(d_i, d_j) d_k]^m
    GG = taylor_einsum("mip,pjk->mkij", Gamma1, Gamma1, 1)
    Rm = (
        np.einsum("imjkZ->mkijZ", dGamma)
        - np.einsum("jmikZ->mkijZ", dGamma)
        + GG
        - np.einsum("mkjiZ->mkijZ", GG)
    )
    R = taylor_einsum("lm,mkij->ijkl", G, Rm, 1)
    ricci = np.einsum("akajZ->jkZ", Rm)
    scalar = np.einsum("jkZ->Z", taylor_einsum("jk,jk->jk", Ginv, ricci, 1))

    Gam = Gamma[..., 0]
    ric = ricci[..., 0]
    Rv = R[..., 0]
    # d_k rho_ij als [k, i, j]
    d_ricci = np.stack([taylor_derivative(ricci, k)[..., 0] for k in range(DIMENSION)])
    nabla_ricci = (
        d_ricci
        - np.einsum("mki,mj->kij", Gam, ric)
        - np.einsum("mkj,im->kij", Gam, ric)
    )
    d_R = np.stack([taylor_derivative(R, m)[..., 0] for m in range(DIMENSION)])
    nabla_riemann = (
        d_R
        - np.einsum("pmi,pjkl->mijkl", Gam, Rv)
        - np.einsum("pmj,ipkl->mijkl", Gam, Rv)
        - np.einsum("pmk,ijpl->mijkl", Gam, Rv)
        - np.einsum("pml,ijkp->mijkl", Gam, Rv)
    )
    W = _weyl_tensor(Rv, ric, float(scalar[0]), G[..., 0])
    return CurvatureBundle(
        point=np.asarray(point, dtype=float),
        metric=G,
        metric_inverse=Ginv,
        christoffel=Gamma,
        riemann_mixed=Rm[..., 0],
        riemann_jet=R,
        ricci_jet=ricci,
        scalar_jet=scalar,
        nabla_ricci=nabla_ricci,
        nabla_riemann=nabla_riemann,
        weyl=W,
        chart_name=chart.name,
    )


def weyl(bundle: CurvatureBundle) -> np.ndarray:
    return bundle.weyl


def schouten(bundle: CurvatureBundle) -> np.ndarray:
    return 0.5 * (bundle.ricci - bundle.scalar / 6.0 * bundle.g)


# ---------------------------------------------------------
# ORTHONORMALE RAHMEN
# ---------------------------------------------------------

def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Spalten e_a bilden eine g-orthonormale Basis (Gram-Schmidt der Koordinatenbasis)."""
    L = linalg.cholesky(g, lower=True)
    return linalg.solve_triangular(L, np.eye(g.shape[0]), lower=True).T


def to_frame(tensor: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Kovariante Komponenten im Rahmen: T(e_a, e_b, ...)."""
    out = tensor
    for _ in range(tensor.ndim):
        out = np.tensordot(out, frame, axes=([0], [0]))
    return out


def tensor_norm(tensor: np.ndarray, frame: np.ndarray) -> float:
    return float(np.linalg.norm(to_frame(tensor, frame)))


def sectional_curvature(bundle: CurvatureBundle, X: np.ndarray, Y: np.ndarray) -> float:
    g = bundle.g
    area = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    if area <= 0:
        raise ValueError("X und Y spannen keine Ebene auf")
    return float(np.einsum("ijkl,i,j,k,l->", bundle.riemann, X, Y, Y, X) / area)


def frame_sectional_curvatures(bundle: CurvatureBundle) -> np.ndarray:
    """K(e_a, e_b) fuer den Gram-Schmidt-Rahmen, Diagonale 0."""
    Rf = to_frame(bundle.riemann, bundle.frame)
    K = np.einsum("abba->ab", Rf)
    np.fill_diagonal(K, 0.0)
    return K


# ---------------------------------------------------------
# RICCI-SPEKTRUM
# ---------------------------------------------------------

@dataclass(frozen=True)
class RicciSpectrum:
    eigenvalues: tuple[float, ...]
    pattern: tuple[int, ...]


def ricci_spectrum(bundle: CurvatureBundle, tol: float = CLUSTER_TOL) -> RicciSpectrum:
    """Eigenwerte des Ricci-Endomorphismus, absteigend, mit Vielfachheitsmuster."""
    values = linalg.eigh(bundle.ricci, bundle.g, eigvals_only=True)
    values = np.sort(values)[::-1]
    return RicciSpectrum(
        eigenvalues=tuple(float(v) for v in values),
        pattern=multiplicity_pattern(values, tol),
    )


# ---------------------------------------------------------
# SELBSTDUALE ZERLEGUNG
# ---------------------------------------------------------

def _levi_civita() -> np.ndarray:
    eps = np.zeros((DIMENSION,) * 4)
    for perm in itertools.permutations(range(DIMENSION)):
        inversions = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


LEVI_CIVITA = _levi_civita()


def _hodge_star_matrix() -> np.ndarray:
    star = np.zeros((6, 6))
    for col, (a, b) in enumerate(PAIR_BASIS):
        for row, (c, d) in enumerate(PAIR_BASIS):
            star[row, col] = LEVI_CIVITA[a, b, c, d]
    return star


HODGE_STAR = _hodge_star_matrix()


def curvature_operator_matrix(tensor: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Rahmenkomponenten T(e_a, e_b, e_d, e_c) auf der Paarbasis als 6x6-Matrix."""
    Tf = to_frame(tensor, frame)
    M = np.zeros((6, 6))
    for row, (a, b) in enumerate(PAIR_BASIS):
        for col, (c, d) in enumerate(PAIR_BASIS):
            M[row, col] = Tf[a, b, d, c]
    return M


def self_dual_split(bundle: CurvatureBundle) -> tuple[np.ndarray, np.ndarray]:
    """(W+, W-) als 6x6-Matrizen bezueglich der Orientierung der Karte."""
    M = curvature_operator_matrix(bundle.weyl, bundle.frame)
    plus = 0.5 * (np.eye(6) + HODGE_STAR)
    minus = 0.5 * (np.eye(6) - HODGE_STAR)
    return plus @ M @ plus, minus @ M @ minus


# ---------------------------------------------------------
# JACOBI-OPERATOR
# ---------------------------------------------------------

@dataclass(frozen=True)
class JacobiPackage:
    """lambda_X = R(., X)X, dessen kovariante Ableitung in X-Richtung und der Kommutator."""

    direction: np.ndarray
    lam: np.ndarray
    lam_prime: np.ndarray
    commutator: np.ndarray


def jacobi(bundle: CurvatureBundle, X: Sequence[float]) -> JacobiPackage:
    X = np.asarray(X, dtype=float)
    norm2 = float(X @ bundle.g @ X)
    if abs(norm2 - 1.0) > UNIT_TOL:
        raise ValueError(f"Jacobi-Richtung muss Einheitsvektor sein, g(X,X) = {norm2:.12g}")
    lam = np.einsum("ul,ijkl,j,k->ui", bundle.g_inv, bundle.riemann, X, X)
    lam_prime = np.einsum("ul,mijkl,m,j,k->ui", bundle.g_inv, bundle.nabla_riemann, X, X, X)
    return JacobiPackage(
        direction=X,
        lam=lam,
        lam_prime=lam_prime,
        commutator=lam_prime @ lam - lam @ lam_prime,
    )


def operator_norm(M: np.ndarray, g: np.ndarray, g_inv: np.ndarray) -> float:
    """Hilbert-Schmidt-Norm eines Endomorphismus bezueglich g."""
    return float(np.sqrt(max(np.trace(M @ g_inv @ M.T @ g), 0.0)))
