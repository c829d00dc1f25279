"""Panel quadrature for cut integrals, Cauchy kernels, and contour paths.

All weights of interest look like h(lam)*sqrt((b-lam)(lam-a)) near their
endpoints, and the kernels are Cauchy-type.  The rules here use composite
Gauss-Legendre panels under the substitution lam = mid - half*cos(theta),
with geometric grading toward the endpoints and optional dyadic refinement
toward an evaluation point that sits close to the interval.  Integrands
receive stable endpoint distances (lam-a, b-lam) computed from half-angle
identities so that log and inverse-sqrt factors do not lose digits.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

XGL, WGL = leggauss(24)


def panel_rule(f: Callable, z0: complex, z1: complex, *, n_panels: int = 20,
               grade: float = 0.4, sing_start: bool = True,
               sing_end: bool = False) -> complex:
    """Integrate f along the straight segment [z0, z1].

    Panels grade geometrically toward ends flagged as singular; f must be
    vectorized over a 1-d array of points.
    """
    if sing_start and sing_end:
        half = [0.5 * grade ** k for k in range(n_panels, 0, -1)]
        bp = np.array([0.0] + half + [1.0 - t for t in reversed(half)] + [1.0])
    elif sing_start:
        bp = np.array([0.0] + [grade ** k for k in range(n_panels, -1, -1)])
    elif sing_end:
        bp = 1.0 - np.array([0.0] + [grade ** k
                                     for k in range(n_panels, -1, -1)])[::-1]
    else:
        bp = np.linspace(0.0, 1.0, n_panels + 1)
    dz = z1 - z0
    total = 0.0 + 0.0j
    for t0, t1 in zip(bp[:-1], bp[1:]):
        mid, hw = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        t = mid + hw * XGL
        total += hw * np.sum(WGL * f(z0 + t * dz))
    return total * dz


def _theta_breaks(n_panels: int, grade: float) -> list[float]:
    quarter = [0.5 * grade ** k for k in range(n_panels, 0, -1)]
    bp = [0.0] + quarter + [1.0 - t for t in reversed(quarter)] + [1.0]
    return [t * np.pi for t in bp]


def cut_integral(f: Callable, a: float, b: float, *, n_panels: int = 22,
                 grade: float = 0.5) -> complex:
    """Integrate f(lam, lam-a, b-lam) dlam over (a, b).

    f may carry inverse-sqrt or log endpoint singularities; it gets the
    endpoint distances as separate stable arguments.
    """
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    bp = _theta_breaks(n_panels, grade)
    total = 0.0 + 0.0j
    for t0, t1 in zip(bp[:-1], bp[1:]):
        m, hw = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        th = m + hw * XGL
        da = 2 * half * np.sin(th / 2) ** 2
        db = 2 * half * np.cos(th / 2) ** 2
        # anchored so rounding cannot place a node exactly on an endpoint
        lam = np.where(da <= half, a + da, b - db)
        lam = np.clip(lam, np.nextafter(a, b), np.nextafter(b, a))
        total += hw * np.sum(WGL * f(lam, da, db) * half * np.sin(th))
    return total


def cut_integral_near(f: Callable, a: float, b: float, z: complex, *,
                      n_panels: int = 22, grade: float = 0.5) -> complex:
    """cut_integral with dyadic refinement toward Re z.

    Resolves 1/(lam - z) kernels when z sits within 0.75*half of the cut;
    refinement bottoms out at half the height |Im z| above the cut.
    """
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    bp = _theta_breaks(n_panels, grade)
    zz = complex(z)
    if a < zz.real < b and abs(zz.imag) < 0.75 * half:
        thx = float(np.arccos(np.clip((mid - zz.real) / half, -1.0, 1.0)))
        s0 = max(abs(zz.imag) / max(half * np.sin(thx), 1e-300), 1e-9) / 2
        for k in range(40):
            st = s0 * 2.0 ** k
            if st >= np.pi:
                break
            for t in (thx - st, thx + st):
                if 0.0 < t < np.pi:
                    bp.append(t)
        bp.append(thx)
    bp = np.array(sorted(set(bp)))
    total = 0.0 + 0.0j
    for t0, t1 in zip(bp[:-1], bp[1:]):
        if t1 - t0 < 1e-14:
            continue
        m, hw = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        th = m + hw * XGL
        lam = mid - half * np.cos(th)
        da = 2 * half * np.sin(th / 2) ** 2
        db = 2 * half * np.cos(th / 2) ** 2
        total += hw * np.sum(WGL * f(lam, da, db) * half * np.sin(th))
    return total


def cos_segment(f: Callable, z0: complex, z1: complex, *, n_panels: int = 10,
                grade: float = 0.5, end_scale: float | None = None) -> complex:
    """Integrate f along [z0, z1] under the cosine substitution.

    Spectral for inverse-sqrt behavior at either end.  end_scale, when
    given, adds refinement toward the z1 end to resolve a boundary layer of
    that relative size (the layer scales like sqrt in theta space).
    """
    quarter = [0.5 * grade ** k for k in range(n_panels, 0, -1)]
    right = [1.0 - t for t in reversed(quarter)]
    if end_scale is not None:
        extra = []
        t = np.sqrt(min(0.5, max(end_scale, 1e-13)))
        while t < 0.45:
            extra.append(1.0 - t)
            t *= 2.0
        right = sorted(set(right + extra))
    bp = np.array([0.0] + quarter + right + [1.0]) * np.pi
    dz = z1 - z0
    total = 0.0 + 0.0j
    for t0, t1 in zip(bp[:-1], bp[1:]):
        m, hw = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        th = m + hw * XGL
        # anchor each node to the nearer endpoint so that t rounding can
        # never place it exactly on z0 or z1
        ts = np.sin(0.5 * th) ** 2
        tc = np.cos(0.5 * th) ** 2
        z = np.where(ts <= 0.5, z0 + ts * dz, z1 - tc * dz)
        total += hw * np.sum(WGL * f(z) * 0.5 * np.sin(th))
    return total * dz


def rect_nodes(x0: float, x1: float, h: float,
               n_total: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes and weights on the rectangle [x0,x1] x [-h,h].

    Counter-clockwise, each corner counted once; at least 8 nodes per side.
    Returns (z, dz) with sum(f(z)*dz) approximating the closed contour
    integral.
    """
    corners = [x0 - 1j * h, x1 - 1j * h, x1 + 1j * h, x0 + 1j * h]
    lens = [abs(corners[(i + 1) % 4] - corners[i]) for i in range(4)]
    per = sum(lens)
    pts = []
    for i in range(4):
        k = max(8, int(round(n_total * lens[i] / per)))
        t = np.arange(k) / k
        pts.append(corners[i] + t * (corners[(i + 1) % 4] - corners[i]))
    z = np.concatenate(pts)
    dz = (np.roll(z, -1) - np.roll(z, 1)) / 2
    return z, dz
