"""Radial profiles on R^(d+1) and their energy calculus.

Profiles are stored as callables (value and derivative) so that integrals can
be evaluated with adaptive quadrature and so that periodization onto a lattice
samples the exact function.  The surface measure of the unit sphere in
R^(d+1) is 4pi for d=2 and 2pi^2 for d=3.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gamma


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^(n-1) in R^n."""
    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True)
class RadialProfileR:
    """Radial real profile on R^(d+1): r -> value(r), with analytic derivative.

    ``r_max`` marks the end of the numerically relevant support; np.inf is
    allowed for profiles with known decay (quadrature integrates to infinity).
    """

    d: int
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    r_max: float
    quad_points: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return self.d + 1

    def __call__(self, r):
        return self.value(np.asarray(r, dtype=float))


def zero_profile(d: int) -> RadialProfileR:
    z = lambda r: np.zeros_like(np.asarray(r, dtype=float))
    return RadialProfileR(d=d, value=z, deriv=z, r_max=1.0)


def _quad(f, a, b, points=()):
    pts = [p for p in points if a < p < b] or None
    val, _ = integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-12, points=pts)
    return val


def radial_integral(phi: RadialProfileR, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
    """int_{R^n} F dz = |S^(n-1)| int_0^rmax F(r) r^(n-1) dr for radial F."""
    n = phi.n
    area = sphere_area(n)
    f = lambda r: integrand(np.asarray([r]))[0] * r ** (n - 1)
    if np.isinf(phi.r_max):
        # split at 1 so the infinite tail is integrated on its own interval
        return area * (_quad(f, 0.0, 1.0, phi.quad_points) + _quad(f, 1.0, np.inf))
    return area * _quad(f, 0.0, phi.r_max, phi.quad_points)


def grad_sq(phi: RadialProfileR) -> float:
    return radial_integral(phi, lambda r: phi.deriv(r) ** 2)


def lp_pow(phi: RadialProfileR, p: float) -> float:
    return radial_integral(phi, lambda r: np.abs(phi.value(r)) ** p)


def mass_l2(phi: RadialProfileR) -> float:
    return lp_pow(phi, 2.0)


def tail_mass_fraction(phi: RadialProfileR, r_cut: float | None = None) -> float:
    """L^2-mass fraction beyond ``r_cut`` (default: 90% of r_max).

    Returns inf when the profile is not square integrable up to r_max
    (adaptive quadrature fails to converge on the tail).
    """
    import warnings

    n = phi.n
    f = lambda r: phi.value(np.asarray([r]))[0] ** 2 * r ** (n - 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if np.isinf(phi.r_max):
                rc = r_cut if r_cut is not None else 1.0
                total = mass_l2(phi)
                tail = sphere_area(n) * _quad(f, rc, np.inf)
            else:
                rc = r_cut if r_cut is not None else 0.9 * phi.r_max
                total = mass_l2(phi)
                tail = sphere_area(n) * _quad(f, rc, phi.r_max)
        except integrate.IntegrationWarning:
            return float("inf")
    if total == 0.0:
        return 0.0
    return tail / total


# -- canonical profiles -------------------------------------------------------

def sobolev_bubble(d: int) -> RadialProfileR:
    """Extremal profile of the sharp Sobolev inequality on R^(d+1).

    W(z) = (1 + |z|^2 / (n(n-2)))^(-(n-2)/2) with n = d+1; its gradient
    energy equals its critical-norm potential (vanishing virial).
    """
    n = d + 1
    s = 1.0 / (n * (n - 2.0))
    e = (n - 2.0) / 2.0

    def val(r):
        return (1.0 + s * r**2) ** (-e)

    def der(r):
        return -e * (1.0 + s * r**2) ** (-e - 1.0) * 2.0 * s * r

    return RadialProfileR(d=d, value=val, deriv=der, r_max=np.inf)


def smoothstep_cutoff(r_inner: float = 1.0, r_outer: float = 2.0):
    """C^3 polynomial smoothstep cutoff: 1 on [0, r_inner], 0 beyond r_outer.

    Returns (value, derivative) callables of the radial variable.
    """
    width = r_outer - r_inner

    def val(r):
        r = np.asarray(r, dtype=float)
        t = np.clip((r - r_inner) / width, 0.0, 1.0)
        # 7th order smoothstep, descending
        s = 1.0 - t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
        return s

    def der(r):
        r = np.asarray(r, dtype=float)
        t = (r - r_inner) / width
        inside = (t > 0.0) & (t < 1.0)
        t = np.clip(t, 0.0, 1.0)
        ds = -(140.0 * t**3 - 420.0 * t**4 + 420.0 * t**5 - 140.0 * t**6) / width
        return np.where(inside, ds, 0.0)

    return val, der


def scaled_profile(phi: RadialProfileR, scale: float, amp_exp: float) -> RadialProfileR:
    """Generic rescale r -> scale*r with amplitude scale**amp_exp."""
    if not (scale > 0):
        raise ValueError(f"scaling parameter must be positive, got {scale}")
    amp = scale**amp_exp

    def val(r):
        return amp * phi.value(np.asarray(r, dtype=float) * scale)

    def der(r):
        return amp * scale * phi.deriv(np.asarray(r, dtype=float) * scale)

    return replace(
        phi,
        value=val,
        deriv=der,
        r_max=phi.r_max / scale,
        quad_points=tuple(p / scale for p in phi.quad_points),
    )
