"""Fit square-root-edge densities to resolvent data and build Jacobi
matrices by Gaussian quadrature.

The density on each interval is expanded in mapped Chebyshev-U polynomials,
whose weighted Cauchy transforms have the closed form

    int_-1^1 U_k(x)/(x-z) (2/pi) sqrt(1-x^2) dx = -2 [z - sqrt(z-1)sqrt(z+1)]^(k+1),

so fitting the coefficients is a small linear least-squares problem with
nonnegativity constraints on the density at Chebyshev nodes.  The fitted
measure is then discretized with Gauss quadrature on every interval and fed
to a Stieltjes procedure to produce recurrence coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (Breakdown, CircleIntersectsSupport,
                     InfeasibleConstraints, NonpositiveDensity,
                     NotPositiveDefinite, RankDeficient)
from .measures import DiscreteMeasure, Interval, Measure, Spike


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the resolvent fit.

    ell: U-series orders per interval; m_pts: sample points per interval
    when generating defaults; k_nodes: nonnegativity constraint nodes per
    interval; lift: imaginary offset of default sample points; K_quad:
    Gauss nodes per interval for discretization.
    """

    ell: int = 4
    m_pts: int = 200
    k_nodes: int = 20
    lift: float = 0.1
    K_quad: int = 60


def joukowski_inverse(z):
    """z - sqrt(z-1) sqrt(z+1), the root inside the unit disk."""
    z = np.asarray(z, dtype=complex)
    return z - np.sqrt(z - 1.0) * np.sqrt(z + 1.0)


def cheb_cauchy(ell: int, z) -> np.ndarray:
    """Matrix of c_k(z) = -2 [z - sqrt(z-1)sqrt(z+1)]^(k+1), k < ell."""
    j = joukowski_inverse(z)
    return np.stack([-2.0 * j ** (k + 1) for k in range(ell)], axis=-1)


def fit_points(edges, cfg: FitConfig = FitConfig()) -> np.ndarray:
    """Default sample points: equispaced on each interval, lifted off the
    axis."""
    pts = []
    for a, b in edges:
        u = np.linspace(-1.0, 1.0, cfg.m_pts)
        pts.append(0.5 * (b - a) * u + 0.5 * (a + b) + 1j * cfg.lift)
    return np.concatenate(pts)


def _u_poly_matrix(ell: int, s: np.ndarray) -> np.ndarray:
    out = np.empty((len(s), ell))
    u_prev = np.zeros_like(s)
    u_cur = np.ones_like(s)
    for k in range(ell):
        out[:, k] = u_cur
        u_prev, u_cur = u_cur, 2 * s * u_cur - u_prev
    return out


def fit_density(z: np.ndarray, r_vals: np.ndarray, edges,
                spikes=(), cfg: FitConfig = FitConfig(),
                label: str = "fit") -> Measure:
    """Constrained least-squares fit of a Measure to resolvent samples.

    z, r_vals sample r(z) = int dmu/(lam - z); edges lists the known
    support intervals; spikes holds (location, weight) pairs whose simple
    poles are subtracted before fitting the continuous part.
    """
    z = np.asarray(z, dtype=complex)
    r = np.asarray(r_vals, dtype=complex).copy()
    edges = [(float(a), float(b)) for a, b in edges]
    for c, w in spikes:
        r -= w / (c - z)

    n_int = len(edges)
    ell = cfg.ell
    cols = np.empty((len(z), n_int * ell), dtype=complex)
    for j, (a, b) in enumerate(edges):
        zm = (2.0 * z - (a + b)) / (b - a)
        cols[:, j * ell:(j + 1) * ell] = \
            (np.pi / 4.0) * (b - a) * cheb_cauchy(ell, zm)

    A = np.vstack([cols.real, cols.imag])
    y = np.concatenate([r.real, r.imag])
    if np.linalg.cond(A) > 1e12:
        raise RankDeficient("fit matrix condition number exceeds 1e12")

    # nonnegativity of each h_j at the zeros of U_{k_nodes}
    xk = np.cos(np.arange(1, cfg.k_nodes + 1) * np.pi / (cfg.k_nodes + 1))
    Ek = _u_poly_matrix(ell, xk)
    G = np.zeros((n_int * cfg.k_nodes, n_int * ell))
    for j in range(n_int):
        G[j * cfg.k_nodes:(j + 1) * cfg.k_nodes, j * ell:(j + 1) * ell] = Ek

    d0, *_ = np.linalg.lstsq(A, y, rcond=None)
    if np.all(G @ d0 >= 0):
        d = d0
    else:
        res = minimize(
            lambda d: np.sum((A @ d - y) ** 2), d0,
            jac=lambda d: 2.0 * A.T @ (A @ d - y),
            constraints=[{"type": "ineq", "fun": lambda d: G @ d,
                          "jac": lambda d: G}],
            method="SLSQP", options={"maxiter": 200, "ftol": 1e-14})
        if not res.success:
            raise InfeasibleConstraints(
                f"constrained fit failed: {res.message}")
        d = res.x

    intervals = tuple(
        Interval(a, b, d[j * ell:(j + 1) * ell])
        for j, (a, b) in enumerate(edges))
    return Measure(intervals, tuple(Spike(c, w) for c, w in spikes),
                   label=label)


def spike_weight(r, c: float, radius: float, support=None,
                 n_nodes: int = 64) -> float:
    """Mass of the atom of r at c by a circular residue integral.

    r maps complex arrays to complex arrays; support, when given, is a
    list of (a, b) intervals the circle must avoid.
    """
    if support is not None:
        for a, b in support:
            gap = max(a - c, c - b, 0.0)
            if gap <= radius:
                raise CircleIntersectsSupport(
                    f"radius {radius} around {c} reaches [{a}, {b}]")
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    zc = c + radius * np.exp(1j * theta)
    dz = 1j * radius * np.exp(1j * theta) * (2 * np.pi / n_nodes)
    vals = np.asarray(r(zc), dtype=complex)
    return float((-np.sum(vals * dz) / (2j * np.pi)).real)


def quadrature_measure(measure: Measure, K: int | None = None,
                       cfg: FitConfig = FitConfig()) -> DiscreteMeasure:
    """Gauss discretization: K Chebyshev-U nodes per interval, exact on
    polynomials of degree < 2K against each interval's weight; spikes
    appended verbatim."""
    K = K or cfg.K_quad
    theta = np.arange(1, K + 1) * np.pi / (K + 1)
    xk = np.cos(theta)
    wk = (2.0 / (K + 1)) * np.sin(theta) ** 2
    lam, mass = [], []
    for iv in measure.intervals:
        half = 0.5 * (iv.b - iv.a)
        x = half * xk + 0.5 * (iv.a + iv.b)
        lam.append(x)
        mass.append(half ** 2 * (np.pi / 2.0) * iv.h(x) * wk)
    for s in measure.spikes:
        lam.append([s.c])
        mass.append([s.w])
    w = np.concatenate(mass)
    if w.min() < -1e-9 * max(w.max(), 1e-300):
        raise NonpositiveDensity(
            f"negative quadrature mass {w.min():.3e} on the support")
    return DiscreteMeasure(np.concatenate(lam), np.maximum(w, 0.0),
                           label=measure.label)


def jacobi_from_quadrature(dm: DiscreteMeasure, n: int
                           ) -> tuple[np.ndarray, np.ndarray, float]:
    """First n recurrence rows by the Stieltjes procedure with full
    reorthogonalization: returns (diag a_0..a_{n-1}, offdiag b_1..b_{n-1},
    total mass)."""
    lam, w = dm.lam, dm.w
    m0 = float(w.sum())
    if n > len(lam):
        raise Breakdown(f"need at least {n} atoms, have {len(lam)}")
    q = np.zeros((n + 1, len(lam)))
    q[0] = np.sqrt(w / m0)
    a = np.zeros(n)
    b = np.zeros(max(n - 1, 0))
    scale = max(abs(lam).max(), 1.0)
    for j in range(n):
        v = lam * q[j]
        a[j] = v @ q[j]
        v -= a[j] * q[j]
        if j > 0:
            v -= b[j - 1] * q[j - 1]
        # full reorthogonalization, twice
        for _ in range(2):
            v -= q[:j + 1].T @ (q[:j + 1] @ v)
        if j < n - 1:
            bj = np.linalg.norm(v)
            if bj < 1e-14 * scale:
                raise Breakdown(f"quadrature exhausted at step {j + 1}")
            b[j] = bj
            q[j + 1] = v / bj
    return a, b, m0


def cholesky_bidiagonal(a: np.ndarray, b: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Bidiagonal Cholesky factor of the Jacobi matrix: J = L L^T with
    diag(L) = alpha, subdiag(L) = beta."""
    n = len(a)
    alpha = np.zeros(n)
    beta = np.zeros(max(n - 1, 0))
    if a[0] <= 0:
        raise NotPositiveDefinite("leading entry not positive")
    alpha[0] = np.sqrt(a[0])
    for j in range(n - 1):
        beta[j] = b[j] / alpha[j]
        rad = a[j + 1] - beta[j] ** 2
        if rad <= 0:
            raise NotPositiveDefinite(f"pivot {j + 1} not positive")
        alpha[j + 1] = np.sqrt(rad)
    return alpha, beta


def monic_eval(a: np.ndarray, b: np.ndarray, z, n: int):
    """Monic orthogonal polynomial pi_n(z) from recurrence rows:
    pi_{k+1} = (z - a_k) pi_k - b_k^2 pi_{k-1}."""
    z = np.asarray(z, dtype=complex)
    p_prev = np.zeros_like(z)
    p_cur = np.ones_like(z)
    for k in range(n):
        p_next = (z - a[k]) * p_cur - (b[k - 1] ** 2 * p_prev if k > 0
                                       else 0.0)
        p_prev, p_cur = p_cur, p_next
    return p_cur if p_cur.ndim else complex(p_cur)
