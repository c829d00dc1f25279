"""Measures with square-root-edge densities plus point masses.

A measure here is a finite union of intervals [a_j, b_j] carrying a density
h_j(x) * sqrt((b_j - x)(x - a_j)), where each h_j is a Chebyshev-U series in
the variable mapped to [-1, 1], together with finitely many atoms (spikes)
off the intervals.  Discrete counterparts hold eigenvalue/mass pairs.  Both
expose the normalized Cauchy transform

    c0(z) = (1/2πi) ∫ dμ(λ) / (λ - z),

and the module builds the rectangular integration contours that downstream
perturbation formulas integrate over.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .errors import LengthMismatch, PointOnSupport, SupportEscapes

SPIKE_MATCH_FACTOR = 0.25


def u_series(coef: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate sum_k coef[k] * U_k(s) by the three-term recurrence.

    Works for real or complex s; U_k is the Chebyshev polynomial of the
    second kind.
    """
    s = np.asarray(s)
    out = np.zeros_like(s, dtype=np.result_type(s.dtype, float))
    u_prev = np.zeros_like(out)
    u_cur = np.ones_like(out)
    for k, c in enumerate(coef):
        out = out + c * u_cur
        u_prev, u_cur = u_cur, 2 * s * u_cur - u_prev
    return out


@dataclass(frozen=True)
class Interval:
    """One support interval with its edge-regular density factor h."""

    a: float
    b: float
    cheb: np.ndarray

    def __post_init__(self):
        if not self.b > self.a:
            raise LengthMismatch(f"interval needs a < b, got [{self.a}, {self.b}]")
        object.__setattr__(self, "cheb", np.asarray(self.cheb, dtype=float))

    def h(self, x):
        """h evaluated at real or complex points (mapped U-series)."""
        s = (2 * np.asarray(x) - self.a - self.b) / (self.b - self.a)
        return u_series(self.cheb, s)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        out = np.zeros_like(x)
        xs = x[inside]
        out[inside] = self.h(xs) * np.sqrt((self.b - xs) * (xs - self.a))
        return out

    def mass(self) -> float:
        val = _quad.cut_integral(
            lambda lam, da, db: self.h(lam) * np.sqrt(da) * np.sqrt(db),
            self.a, self.b)
        return float(val.real)


@dataclass(frozen=True)
class Spike:
    c: float
    w: float


@dataclass(frozen=True)
class Measure:
    intervals: tuple[Interval, ...]
    spikes: tuple[Spike, ...] = ()
    label: str = ""

    def __post_init__(self):
        ivs = tuple(sorted(self.intervals, key=lambda iv: iv.a))
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "spikes",
                           tuple(sorted(self.spikes, key=lambda s: s.c)))
        for left, right in zip(ivs[:-1], ivs[1:]):
            if right.a <= left.b:
                raise LengthMismatch(
                    f"intervals overlap near x = {right.a}")
        for s in self.spikes:
            if any(iv.a <= s.c <= iv.b for iv in ivs):
                raise LengthMismatch(f"spike at {s.c} sits on an interval")
            if s.w <= 0:
                raise LengthMismatch(f"spike at {s.c} has mass {s.w} <= 0")

    # --- geometry -----------------------------------------------------

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.array([iv.a for iv in self.intervals])
        b = np.array([iv.b for iv in self.intervals])
        return a, b

    def support_distance(self, z) -> np.ndarray:
        """Distance from points z to the support (intervals and spikes)."""
        z = np.asarray(z, dtype=complex)
        d = np.full(z.shape, np.inf)
        for iv in self.intervals:
            x = np.clip(z.real, iv.a, iv.b)
            d = np.minimum(d, np.abs(z - x))
        for s in self.spikes:
            d = np.minimum(d, np.abs(z - s.c))
        return d

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for iv in self.intervals:
            out += iv.density(x)
        return out

    def mass(self) -> float:
        return sum(iv.mass() for iv in self.intervals) \
            + sum(s.w for s in self.spikes)

    # --- transforms ----------------------------------------------------

    def cauchy(self, z) -> np.ndarray:
        """c0(z); raises PointOnSupport within 1e-12 of the support."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        if np.any(self.support_distance(flat) < 1e-12):
            raise PointOnSupport("evaluation point on the support")
        out = np.zeros_like(flat)
        for i, zz in enumerate(flat):
            s = 0.0 + 0.0j
            for iv in self.intervals:
                s += _quad.cut_integral_near(
                    lambda lam, da, db, iv=iv, zz=zz:
                    iv.h(lam) * np.sqrt(da) * np.sqrt(db) / (lam - zz),
                    iv.a, iv.b, zz)
            out[i] = s
        for s in self.spikes:
            out += s.w / (s.c - flat)
        return (out / (2j * np.pi)).reshape(z.shape)

    # --- serialization ---------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "intervals": [{"a": iv.a, "b": iv.b, "cheb": list(iv.cheb)}
                          for iv in self.intervals],
            "spikes": [{"c": s.c, "w": s.w} for s in self.spikes],
        }
        if self.label:
            doc["label"] = self.label
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Measure":
        doc = json.loads(text)
        ivs = tuple(Interval(d["a"], d["b"], np.asarray(d["cheb"], float))
                    for d in doc["intervals"])
        spikes = tuple(Spike(d["c"], d["w"]) for d in doc.get("spikes", []))
        return cls(ivs, spikes, doc.get("label", ""))


@dataclass(frozen=True)
class DiscreteMeasure:
    lam: np.ndarray
    w: np.ndarray
    label: str = ""

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if lam.shape != w.shape or lam.ndim != 1:
            raise LengthMismatch("need matching 1-d locations and masses")
        idx = np.argsort(lam)
        object.__setattr__(self, "lam", lam[idx])
        object.__setattr__(self, "w", w[idx])

    def mass(self) -> float:
        return float(self.w.sum())

    def cauchy(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = (self.w[:, None] / (self.lam[:, None] - flat[None, :])).sum(0)
        return (out / (2j * np.pi)).reshape(z.shape)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda", "mass"])
        for lam, w in zip(self.lam, self.w):
            writer.writerow([repr(float(lam)), repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["lambda", "mass"]:
            raise LengthMismatch('expected header "lambda,mass"')
        lam = np.array([float(r[0]) for r in rows[1:]])
        w = np.array([float(r[1]) for r in rows[1:]])
        return cls(lam, w)


def vesd(eigs: np.ndarray, overlaps_sq: np.ndarray,
         label: str = "") -> DiscreteMeasure:
    """Vector empirical spectral distribution from (eigenvalue, |<u,b>|^2)."""
    eigs = np.asarray(eigs, dtype=float)
    overlaps_sq = np.asarray(overlaps_sq, dtype=float)
    if eigs.shape != overlaps_sq.shape:
        raise LengthMismatch("eigenvalues and overlaps differ in length")
    return DiscreteMeasure(eigs, overlaps_sq, label)


@dataclass
class ContourField:
    """Nodes and trapezoid weights on a union of rectangles.

    values, when present, holds a 2x2 matrix sample per node.  The node set
    of a closed polygon satisfies sum(dz) = 0 to rounding.
    """

    z: np.ndarray
    dz: np.ndarray
    eta: float
    spans: tuple[tuple[float, float], ...]
    values: np.ndarray | None = None
    outlier_idx: np.ndarray = field(default_factory=lambda: np.array([], int))

    def closure_defect(self) -> float:
        return float(np.abs(self.dz.sum()))

    def encloses(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.spans:
            out |= (x > lo) & (x < hi)
        return out

    def integrate(self, samples: np.ndarray) -> np.ndarray:
        """sum over nodes of samples * dz along the first axis."""
        dz = self.dz.reshape((-1,) + (1,) * (samples.ndim - 1))
        return (samples * dz).sum(axis=0)


def node_budget(eta: float) -> int:
    return max(256, int(np.ceil(64.0 / eta)))


def build_contour(measure: Measure, discrete: DiscreteMeasure | None,
                  eta: float, n_nodes: int | None = None) -> ContourField:
    """Rectangles of margin eta around each interval cluster of measure.

    Rectangles closer than eta/2 to each other merge into their bounding
    rectangle.  Atoms of the discrete measure must fall inside some
    rectangle or within the matching radius of a spike; otherwise
    SupportEscapes is raised.
    """
    if n_nodes is None:
        n_nodes = node_budget(eta)
    a, b = measure.edges
    clusters: list[list[float]] = [[a[0], b[0]]]
    for aj, bj in zip(a[1:], b[1:]):
        # gap < 2.5*eta means the margin-eta rectangles come within eta/2
        if (aj - eta) - (clusters[-1][1] + eta) < 0.5 * eta:
            clusters[-1][1] = bj
        else:
            clusters.append([aj, bj])
    zs, dzs, spans = [], [], []
    for lo, hi in clusters:
        z, dz = _quad.rect_nodes(lo - eta, hi + eta, eta, n_nodes)
        zs.append(z)
        dzs.append(dz)
        spans.append((lo - eta, hi + eta))
    z = np.concatenate(zs)
    dz = np.concatenate(dzs)
    fieldc = ContourField(z, dz, eta, tuple(spans))

    if discrete is not None:
        inside = fieldc.encloses(discrete.lam)
        stray = np.where(~inside)[0]
        outliers = []
        for i in stray:
            lam = discrete.lam[i]
            matched = any(
                abs(lam - s.c) <= SPIKE_MATCH_FACTOR * spike_clearance(measure, s)
                for s in measure.spikes)
            if matched:
                outliers.append(i)
            else:
                raise SupportEscapes(
                    f"atom at {lam:.6g} escapes the contour and matches no spike")
        fieldc.outlier_idx = np.asarray(outliers, dtype=int)
    return fieldc


def spike_clearance(measure: Measure, s: Spike) -> float:
    """Distance from a spike to the rest of the support."""
    d = np.inf
    for iv in measure.intervals:
        d = min(d, abs(s.c - float(np.clip(s.c, iv.a, iv.b))))
    for other in measure.spikes:
        if other.c != s.c:
            d = min(d, abs(s.c - other.c))
    return float(d)
