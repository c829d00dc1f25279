"""Limiting spectral data for spiked sample covariance models.

The population covariance is block-diagonal with finitely many distinct
values sigma_k (given with multiplicity weights), optionally multiplied by
(1 + d_i) on finitely many spiked coordinates, and the aspect ratio is
c = N/M.  Everything flows from the inverse function

    f(x) = -1/x + c * sum_k frac_k / (x + 1/sigma_k),

whose critical values are the support edges and whose root m(z) of
f(m) = z is the companion Stieltjes transform.  Vector empirical spectral
distributions (VESD) for a fixed unit vector b then come out as explicit
rational expressions in m(z).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (EdgeCountOdd, LengthMismatch, NoConvergence, PoleHit,
                     SubcriticalSpike, WeightNormalization)

_POLE_TOL = 1e-13


@dataclass(frozen=True)
class CovarianceSpec:
    """Population covariance blocks, spike strengths, and aspect ratio.

    sigma holds (value, multiplicity-weight) pairs; weights only matter
    through their fractions.  Spikes are the d_i >= 0 multipliers attached
    to coordinates of the first block, so the spiked population values are
    (1 + d_i) * sigma[0].
    """

    sigma: tuple[tuple[float, float], ...]
    spikes: tuple[float, ...] = ()
    c_N: float = 0.3

    def __post_init__(self):
        vals = [v for v, _ in self.sigma]
        if len(set(vals)) != len(vals):
            raise LengthMismatch("duplicate sigma values; merge their weights")
        if any(v <= 0 for v in vals) or any(m <= 0 for _, m in self.sigma):
            raise LengthMismatch("sigma values and weights must be positive")
        if not 0 < self.c_N:
            raise LengthMismatch("c_N must be positive")
        if 1 - np.sqrt(self.c_N) < 0.05:
            warnings.warn("c_N close to 1: hard-edge behavior untested",
                          stacklevel=2)

    @property
    def fractions(self) -> np.ndarray:
        w = np.array([m for _, m in self.sigma])
        return w / w.sum()

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.sigma])

    def to_json(self) -> str:
        return json.dumps({
            "sigma": [{"v": v, "mult": m} for v, m in self.sigma],
            "spikes": list(self.spikes),
            "cN": self.c_N,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CovarianceSpec":
        doc = json.loads(text)
        sigma = tuple((d["v"], d["mult"]) for d in doc["sigma"])
        return cls(sigma, tuple(doc.get("spikes", [])), doc["cN"])


def f_eval(law: CovarianceSpec, x):
    """f(x); raises PoleHit at x = 0 or x = -1/sigma_k."""
    x = np.asarray(x, dtype=complex)
    poles = np.concatenate([[0.0], -1.0 / law.values])
    if np.any(np.abs(x[..., None] - poles) < _POLE_TOL):
        raise PoleHit("f evaluated at a pole")
    out = -1.0 / x
    for frac, v in zip(law.fractions, law.values):
        out = out + law.c_N * frac / (x + 1.0 / v)
    return out if out.ndim else complex(out)


def f_prime(law: CovarianceSpec, x):
    x = np.asarray(x, dtype=complex)
    out = 1.0 / x ** 2
    for frac, v in zip(law.fractions, law.values):
        out = out - law.c_N * frac / (x + 1.0 / v) ** 2
    return out if out.ndim else complex(out)


def _fp_real(law: CovarianceSpec, x: float) -> float:
    out = 1.0 / x ** 2
    for frac, v in zip(law.fractions, law.values):
        out -= law.c_N * frac / (x + 1.0 / v) ** 2
    return out


def support_edges(law: CovarianceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Support intervals of the limiting law.

    Returns (edges, t_crit): edges has shape (p+1, 2) with ascending
    intervals [a_j, b_j]; t_crit are the corresponding critical points of
    f, ordered to match the flattened ascending edges.  Raises
    EdgeCountOdd when root bracketing loses an edge.
    """
    poles = np.sort(np.concatenate([[0.0], -1.0 / law.values]))
    roots: list[float] = []

    def scan(lo: float, hi: float, n: int = 4000):
        # log-graded sampling toward both ends; ends are poles of f'
        s = np.linspace(1e-10, 1.0 - 1e-10, n)
        warp = 0.5 * (1 + np.tanh(6 * (s - 0.5)))  # denser near both ends
        x = lo + (hi - lo) * np.sort(np.concatenate([s, warp]))
        with np.errstate(over="ignore", divide="ignore"):
            vals = np.array([_fp_real(law, xi) for xi in x])
        sign = np.sign(vals)
        for i in np.where(sign[:-1] * sign[1:] < 0)[0]:
            roots.append(brentq(lambda t: _fp_real(law, t),
                                x[i], x[i + 1], xtol=1e-14, rtol=1e-15))

    # unbounded interval to the left of the most negative pole
    width = max(1.0, 10 * (poles[-1] - poles[0] + 1.0 / law.values.min()))
    scan(poles[0] - width, poles[0] - 1e-9 * max(1.0, abs(poles[0])))
    for lo, hi in zip(poles[:-1], poles[1:]):
        pad = 1e-9 * max(1.0, hi - lo)
        scan(lo + pad, hi - pad)
    roots_arr = np.array(sorted(set(roots)))
    edges = np.array([f_eval(law, t).real for t in roots_arr])
    if len(edges) % 2 != 0 or len(edges) == 0:
        raise EdgeCountOdd(f"found {len(edges)} support edges")
    order = np.argsort(edges)
    edges_sorted = edges[order]
    t_sorted = roots_arr[order]
    return edges_sorted.reshape(-1, 2), t_sorted


def solve_m(law: CovarianceSpec, z: complex, tol: float = 1e-12,
            max_iter: int = 200) -> complex:
    """Root m of f(m) = z on the physical branch.

    Homotopy continuation from |z| = 1e4 on the same ray (seed m = -1/z)
    with damped Newton; real z off the support is approached from
    Im z = +1e-9.
    """
    z = complex(z)
    if z.imag == 0.0:
        z += 1e-9j
    if z.imag < 0.0:
        return np.conj(solve_m(law, np.conj(z), tol=tol, max_iter=max_iter))
    # descend through the upper half plane: branch collisions live on the
    # real axis, so the homotopy path stays clear of them
    z0 = 1e4j
    z_mid = complex(z.real, max(z.imag, 1.0))
    m = -1.0 / z0
    budget = [max_iter]

    def newton(m0: complex, target: complex) -> complex | None:
        # physical branch: Im m and Im z share a (strict) sign
        m = m0
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(30):
                if budget[0] <= 0:
                    raise NoConvergence("Newton budget exhausted in solve_m")
                budget[0] -= 1
                r = f_eval_safe(law, m, target)
                if abs(r) < tol * max(1.0, abs(target)):
                    return m if m.imag > 0 else None
                fp = f_prime(law, m)
                if fp == 0 or not np.isfinite(fp):
                    m = m * (1 + 1e-6) + 1e-9j * (1 + abs(m))
                    continue
                step = r / fp
                mn = m - step
                k = 0
                while k < 20 and (not np.isfinite(mn) or
                                  abs(f_eval_safe(law, mn, target)) > abs(r)):
                    step /= 2
                    mn = m - step
                    k += 1
                m = mn
            r = f_eval_safe(law, m, target)
        ok = abs(r) < tol * max(1.0, abs(target)) and m.imag > 0
        return m if ok else None

    stack = [z] if z_mid == z else [z, z_mid]
    cur = z0
    while stack:
        if len(stack) > 64:
            raise NoConvergence("homotopy subdivision exceeded in solve_m")
        t = stack[-1]
        got = newton(m, t)
        if got is None:
            stack.append(0.5 * (cur + t))
            continue
        m, cur = got, t
        stack.pop()
    return m


def f_eval_safe(law: CovarianceSpec, m: complex, target: complex) -> complex:
    try:
        return f_eval(law, m) - target
    except PoleHit:
        return complex(np.inf)


def m_on_nodes(law: CovarianceSpec, z: np.ndarray) -> np.ndarray:
    """Vector of m(z) over an array of nodes, warm-starting along the array."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    flat = z.ravel()
    of = out.ravel()
    m = solve_m(law, flat[0])
    of[0] = m
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(1, len(flat)):
            target = flat[i] if flat[i].imag != 0 else flat[i] + 1e-9j
            got = m
            ok = False
            for _ in range(40):
                r = f_eval_safe(law, got, target)
                if abs(r) < 1e-12 * max(1.0, abs(target)):
                    ok = got.imag * target.imag > 0
                    break
                fp = f_prime(law, got)
                if fp == 0 or not np.isfinite(fp) or not np.isfinite(r):
                    break
                got = got - r / fp
            if not ok:
                got = solve_m(law, flat[i])
            m = got
            of[i] = m
    return out


def spike_params(law: CovarianceSpec, sigma_tilde: float,
                 varpi: float = 1e-8) -> tuple[float, float]:
    """Outlier location and unit-overlap mass for population spike value
    sigma_tilde = (1+d)*sigma.

    Raises SubcriticalSpike when sigma_tilde fails the supercriticality
    margin varpi against the critical point at the top edge.
    """
    _, t_crit = support_edges(law)
    t1 = float(t_crit.max())
    if not sigma_tilde > -1.0 / t1 + varpi:
        raise SubcriticalSpike(
            f"sigma_tilde = {sigma_tilde:.6g} below threshold "
            f"{-1.0 / t1:.6g}")
    x = -1.0 / sigma_tilde
    loc = float(f_eval(law, x).real)
    weight = float(f_prime(law, x).real / (sigma_tilde * loc))
    return loc, weight


@dataclass
class VesdLimit:
    """Limiting VESD evaluators for a fixed deterministic vector b.

    w2_blocks[k] is the squared b-mass on block k (excluding spiked
    coordinates); omega2_spikes[i] the squared overlap with spiked
    coordinate i.  The weights must sum to 1.
    """

    law: CovarianceSpec
    w2_blocks: np.ndarray
    omega2_spikes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.w2_blocks = np.asarray(self.w2_blocks, dtype=float)
        self.omega2_spikes = np.asarray(self.omega2_spikes, dtype=float)
        if len(self.w2_blocks) != len(self.law.sigma):
            raise LengthMismatch("one block weight per sigma block")
        if len(self.omega2_spikes) != len(self.law.spikes):
            raise LengthMismatch("one overlap per spike")
        total = self.w2_blocks.sum() + self.omega2_spikes.sum()
        if abs(total - 1.0) > 1e-8:
            raise WeightNormalization(f"weights sum to {total}, not 1")

    # --- scalar transforms -----------------------------------------------

    def m(self, z: complex) -> complex:
        return solve_m(self.law, z)

    def stieltjes(self, z: complex, m: complex | None = None) -> complex:
        """m_vesd(z) = integral of 1/(lam - z) against the limiting VESD."""
        z = complex(z)
        if m is None:
            m = self.m(z)
        out = 0.0 + 0.0j
        sig = self.law.values
        for w2, s in zip(self.w2_blocks, sig):
            out += w2 * (-1.0 / (z * (1.0 + m * s)))
        s0 = sig[0]
        for w2, d in zip(self.omega2_spikes, self.law.spikes):
            base = -1.0 / (z * (1.0 + m * s0))
            denom = 1.0 / d + 1.0 - 1.0 / (1.0 + m * s0)
            pole = (1.0 / z) / (1.0 + m * s0) ** 2 / denom
            out += w2 / (1.0 + d) * (base - pole)
        return out

    def c0(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        ms = m_on_nodes(self.law, flat)
        vals = np.array([self.stieltjes(zz, mm) for zz, mm in zip(flat, ms)])
        return (vals / (2j * np.pi)).reshape(z.shape)

    # --- densities ---------------------------------------------------------

    def rho(self, x: float) -> float:
        """Companion-side spectral density at x (bulk)."""
        return float(solve_m(self.law, x + 1e-9j).imag / np.pi)

    def density(self, x: float) -> float:
        """Continuous VESD density at x via the Stieltjes inversion."""
        return float(self.stieltjes(x + 1e-9j).imag / np.pi)

    def rho_b(self, x: float) -> float:
        """Same density through the weighted-resolvent identity."""
        m = solve_m(self.law, x + 1e-9j)
        s = 0.0
        for w2, v in zip(self.w2_blocks, self.law.values):
            s += w2 * v / abs(1.0 + m * v) ** 2
        for w2, d in zip(self.omega2_spikes, self.law.spikes):
            v = self.law.values[0]
            s += w2 / (1.0 + d) * v / abs(1.0 + m * v) ** 2
        return self.rho(x) / x * s

    def spike_list(self) -> list[tuple[float, float]]:
        out = []
        s0 = self.law.values[0]
        for w2, d in zip(self.omega2_spikes, self.law.spikes):
            if w2 <= 0:
                continue
            loc, unit = spike_params(self.law, (1.0 + d) * s0)
            out.append((loc, w2 * unit))
        return out


def limit_vesd(law: CovarianceSpec, w2_blocks=None,
               omega2_spikes=None) -> VesdLimit:
    """VesdLimit for the given b weights; defaults to the uniform vector
    (block weights equal to the multiplicity fractions, no spike overlap)."""
    if w2_blocks is None:
        w2_blocks = law.fractions
        if len(law.spikes) and omega2_spikes is None:
            omega2_spikes = np.zeros(len(law.spikes))
    if omega2_spikes is None:
        omega2_spikes = np.zeros(len(law.spikes))
    return VesdLimit(law, np.asarray(w2_blocks, float),
                     np.asarray(omega2_spikes, float))


def measure_from_vesd_limit(vl: VesdLimit, n_coef: int = 40):
    """Canonical Measure for the limiting VESD.

    Samples h_j = density / sqrt((b-x)(x-a)) on Chebyshev-U nodes of each
    support interval and converts to a U-series by the discrete sine
    transform; spikes are appended with their limiting masses.
    """
    from .measures import Interval, Measure, Spike

    edges, _ = support_edges(vl.law)
    n_nodes = n_coef + 16
    theta = np.arange(1, n_nodes + 1) * np.pi / (n_nodes + 1)
    intervals = []
    for a, b in edges:
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid + half * np.cos(theta)
        hv = np.array([vl.density(xi) for xi in x])
        hv /= np.sqrt((b - x) * (x - a))
        coef = np.empty(n_nodes)
        for k in range(n_nodes):
            coef[k] = (2.0 / (n_nodes + 1)) * np.sum(
                hv * np.sin(theta) * np.sin((k + 1) * theta))
        coef = coef[:n_coef]
        tail = max(abs(c) for c in coef[-4:])
        # the 1e-9 spectral lift in density() floors the achievable decay
        if tail > 1e-9 * max(abs(coef).max(), 1e-300):
            warnings.warn(f"slow U-series decay on [{a:.4g}, {b:.4g}]: "
                          f"tail {tail:.2e}", stacklevel=2)
        intervals.append(Interval(a, b, coef))
    spikes = [Spike(c, w) for c, w in vl.spike_list()]
    return Measure(tuple(intervals), tuple(spikes), label="vesd-limit")
