"""Scalar functionals of waveguide fields, slices and radial profiles.

The central objects are the mass M, the energy H, the semivirial K (which
uses only the x-gradient and whose sign governs the long-time dynamics) and
the auxiliary functional I = H - K/2.  With

    a = ||grad_x u||^2,  b = ||d_y u||^2,  q = ||u||_p^p,  p = 2 + 4/(d-1),

they read

    H   = (a + b)/2 - (d-1)/(2(d+1)) q
    K   = a - d/(d+1) q
    I   = b/2 + q/(2(d+1))
    H_l = l*b/2 + a/2 - (d-1)/(2(d+1)) q      (y-gradient reweighted by l)

All components of a report come from a single spectral pass so the internal
identities hold bit-for-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import grid as gridmod
from . import radial as radmod
from .grid import Field

__all__ = [
    "FunctionalReport",
    "RdReport",
    "MeiDomainCurve",
    "report",
    "rd_report",
    "star_report",
    "mei",
    "check_threshold_condition",
    "p_exponent",
]


def p_exponent(d: int) -> float:
    """Nonlinearity exponent p = 2 + 4/(d-1) (this equals 2(d+1)/(d-1))."""
    return 2.0 + 4.0 / (d - 1)


@dataclass(frozen=True)
class FunctionalReport:
    d: int
    mass: float
    energy: float
    semivirial: float
    aux_i: float
    grad_x: float
    grad_y: float
    potential_p: float
    quartic: Optional[float]        # ||u||_4^4, d = 3 only
    k_double_star: Optional[float]  # ||grad u||^2 - ||u||_4^4, d = 3 only
    lam: Optional[float] = None
    energy_lam: Optional[float] = None
    aux_i_lam: Optional[float] = None

    @property
    def dy_fraction(self) -> float:
        tot = self.grad_x + self.grad_y
        return self.grad_y / tot if tot > 0 else 0.0

    def to_json_dict(self) -> dict:
        return {
            "mass": self.mass,
            "energy": self.energy,
            "semivirial": self.semivirial,
            "aux_i": self.aux_i,
            "grad_x": self.grad_x,
            "grad_y": self.grad_y,
            "potential_p": self.potential_p,
            "quartic": self.quartic,
            "k_double_star": self.k_double_star,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def assemble_report(d: int, a: float, b: float, q: float, mass: float,
                    quartic: Optional[float] = None,
                    lam: Optional[float] = None) -> FunctionalReport:
    """Assemble a report from precomputed quadratic/potential components."""
    cp = (d - 1.0) / (2.0 * (d + 1.0))
    H = 0.5 * (a + b) - cp * q
    K = a - d / (d + 1.0) * q
    I = 0.5 * b + q / (2.0 * (d + 1.0))
    kss = (a + b) - quartic if (d == 3 and quartic is not None) else None
    H_l = I_l = None
    if lam is not None:
        if not (lam > 0):
            raise ValueError(f"lambda must be positive, got {lam}")
        H_l = 0.5 * lam * b + 0.5 * a - cp * q
        I_l = 0.5 * lam * b + q / (2.0 * (d + 1.0))
    return FunctionalReport(
        d=d, mass=mass, energy=H, semivirial=K, aux_i=I,
        grad_x=a, grad_y=b, potential_p=q,
        quartic=quartic, k_double_star=kss,
        lam=lam, energy_lam=H_l, aux_i_lam=I_l,
    )


def report(u: Field, lam: Optional[float] = None) -> FunctionalReport:
    """Evaluate every scalar functional of a waveguide field in one pass."""
    if u.kind != "waveguide":
        raise ValueError("report expects a waveguide field; use rd_report for slices")
    g = u.grid
    uh = gridmod.fftn(u.values)
    scale = u.weight() / uh.size
    # NaN in the field is caught by the Field constructor; uh inherits finiteness
    abs2h = np.abs(uh) ** 2
    a = scale * float(np.sum(g.kx_sq_mesh() * abs2h))
    b = scale * float(np.sum(g.ky_sq_mesh() * abs2h))
    absu = np.abs(u.values)
    m = u.weight() * float(np.sum(absu * absu))
    p = p_exponent(g.d)
    if g.d == 3:
        a4 = absu**2
        quartic = u.weight() * float(np.sum(a4 * a4))
        q = quartic  # p = 4 when d = 3
    else:
        quartic = None
        q = u.weight() * float(np.sum(absu**p))
    return assemble_report(g.d, a, b, q, m, quartic=quartic, lam=lam)


@dataclass(frozen=True)
class RdReport:
    """Hatted functionals of a y-independent slice (R^d quadrature)."""
    d: int
    mass: float
    energy: float
    aux_i: float
    virial: float
    grad_x: float
    potential_p: float


def rd_report(gfield: Field) -> RdReport:
    if gfield.kind != "slice":
        raise ValueError("rd_report expects an x-only slice field")
    d = gfield.grid.d
    a = gridmod.grad_sq_x(gfield)
    m = gridmod.lp_norm_pow(gfield, 2.0)
    p = p_exponent(d)
    q = gfield.weight() * float(np.sum(np.abs(gfield.values) ** p))
    cp = (d - 1.0) / (2.0 * (d + 1.0))
    return RdReport(
        d=d, mass=m,
        energy=0.5 * a - cp * q,
        aux_i=q / (2.0 * (d + 1.0)),
        virial=a - d / (d + 1.0) * q,
        grad_x=a, potential_p=q,
    )


def star_report(phi: radmod.RadialProfileR) -> tuple[float, float, dict]:
    """Energy and virial of a radial R^(d+1) profile.

    Returns (H*, K*, info) where H* = ||grad||^2/2 - (d-1)/(2(d+1)) ||.||_p^p
    and K* = ||grad||^2 - ||.||_p^p.  ``info`` carries the raw components and
    a decay warning flag when the L^2 tail mass beyond 90% of r_max exceeds
    1e-6 of the total (profiles that are not square integrable get the flag).
    """
    d = phi.d
    p = p_exponent(d)
    A = radmod.grad_sq(phi)
    P = radmod.lp_pow(phi, p)
    cp = (d - 1.0) / (2.0 * (d + 1.0))
    h_star = 0.5 * A - cp * P
    k_star = A - P
    if A == 0.0 and P == 0.0:
        tail = 0.0
    else:
        tail = radmod.tail_mass_fraction(phi)
    info = {"grad_sq": A, "potential_p": P, "tail_mass_fraction": tail,
            "decay_warning": bool(not np.isfinite(tail) or tail > 1e-6)}
    return h_star, k_star, info


def check_threshold_condition(phi: radmod.RadialProfileR, S: float) -> tuple[bool, bool]:
    """Scattering-threshold flags of a radial R^4 profile (d = 3 only).

    First flag: H*(phi) < S^2/4 and ||grad phi||^2 < S^2 (the admissibility
    window of the critical scattering result on R^4).  Second flag:
    K*(phi) > 0.  Positivity of K* together with H* below S^2/4 implies the
    window, so the pair (False, True) cannot occur for valid inputs; this is
    asserted.
    """
    if phi.d != 3:
        raise ValueError("threshold condition is formulated for d = 3 (R^4 profiles)")
    h_star, k_star, _ = star_report(phi)
    A = radmod.grad_sq(phi)
    window = (h_star < S**2 / 4.0) and (A < S**2)
    positive = k_star > 0.0
    if positive and h_star < S**2 / 4.0 and not window:
        raise AssertionError(
            "energy-trapping violated: K*>0 and H*<S^2/4 but gradient window failed")
    return window, positive


# -- mass/energy indicator ----------------------------------------------------

@dataclass(frozen=True)
class MeiDomainCurve:
    """Sampled threshold curve c -> m_c with 1/c extension beyond the samples.

    The sampled masses must be strictly increasing and the values
    non-increasing (up to 1e-6 slack).  Between samples the curve is linearly
    interpolated; outside the sampled range it is extended by the exact
    scaling law m_c ~ const/c.
    """

    c: np.ndarray
    m: np.ndarray
    interpolation: str = "linear+inverse-tails"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if c.ndim != 1 or c.shape != m.shape or c.size < 1:
            raise ValueError("curve needs matching 1-d arrays of samples")
        if not np.all(np.diff(c) > 0):
            raise ValueError("curve masses must be strictly increasing")
        if np.any(c <= 0):
            raise ValueError("curve masses must be positive")
        if np.any(np.diff(m) > 1e-6 * np.maximum(1.0, np.abs(m[:-1]))):
            raise ValueError("curve values must be non-increasing (1e-6 slack)")
        c.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "m", m)

    def in_range(self, c: float) -> bool:
        return self.c[0] <= c <= self.c[-1]

    def value(self, c: float) -> float:
        """m_c at mass c (1/c-extended outside the sampled range)."""
        if c <= 0:
            raise ValueError("threshold curve is defined for positive mass")
        if c < self.c[0]:
            return self.m[0] * self.c[0] / c
        if c > self.c[-1]:
            return self.m[-1] * self.c[-1] / c
        return float(np.interp(c, self.c, self.m))

    def boundary_polyline(self, c_query: float, h_query: float) -> np.ndarray:
        """Dense polyline of the boundary graph {(c, m_c)}, extended far
        enough past the samples to bracket the nearest point to the query."""
        span = max(self.c[-1], abs(c_query), 1.0) * 4.0
        lo = min(self.c[0], max(abs(c_query), 1e-3)) / 64.0
        cs = np.geomspace(lo, span, 1024)
        cs = np.unique(np.concatenate([cs, self.c]))
        ms = np.array([self.value(ci) for ci in cs])
        return np.column_stack([cs, ms])


def _dist_point_segments(pt: np.ndarray, poly: np.ndarray) -> float:
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0] = 1.0
    t = np.clip(np.einsum("j,ij->i", pt, ab) - np.einsum("ij,ij->i", a, ab), 0.0, denom) / denom
    proj = a + ab * t[:, None]
    return float(np.sqrt(np.min(np.sum((proj - pt) ** 2, axis=1))))


def mei(c: float, h: float, curve: MeiDomainCurve) -> float:
    """Mass-energy indicator D(c, h): finite exactly below the threshold curve.

    D = h + (h + c)/dist((c,h), complement) inside the admissible region
    Omega = {c <= 0} u {c > 0, h < m_c}; +inf outside.  The distance is the
    Euclidean distance in the (c, h)-plane to {(c', h'): c' > 0, h' >= m_c'}.
    """
    if c > 0:
        if not curve.in_range(c):
            raise ValueError(f"mass {c} outside the sampled curve range "
                             f"[{curve.c[0]}, {curve.c[-1]}]")
        if h >= curve.value(c):
            return math.inf
    poly = curve.boundary_polyline(c, h)
    dist = _dist_point_segments(np.array([c, h], dtype=float), poly)
    if dist == 0.0:
        return math.inf
    return h + (h + c) / dist
