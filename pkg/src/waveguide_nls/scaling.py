"""Mass- and energy-rescaling operators and the fibering projection.

The mass-preserving x-dilation u^t(x,y) = t^(d/2) u(tx, y) fibers every
nonzero field over the vanishing-semivirial manifold: K(u^t) has a unique
zero t* > 0, and the energy of the projected field

    J(u) = H(u^{t*}) = b/2 + kappa_d * a^d / q^(d-1),
    kappa_d = (d+1)^(d-1) / (2 d^d),

is invariant under the dilation itself.  That closed form is what the
constrained minimizer descends; the bracketed root-finder on t -> K(u^t)
serves only as a cross-check oracle in the tests.

Dilations on the lattice are realized by exact trigonometric interpolation
onto the scaled sample points (periodically wrapped), which keeps the scaling
identities spectrally accurate for resolved fields.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import radial as radmod
from .functionals import report
from .grid import Field, boundary_mass_fraction


def kappa(d: int) -> float:
    """Coefficient of a^d/q^(d-1) in the reduced objective."""
    return (d + 1.0) ** (d - 1) / (2.0 * d**d)


def _trig_interp_matrix(n: int, k: np.ndarray, pts_shifted: np.ndarray) -> np.ndarray:
    """Evaluation matrix of the trig interpolant at arbitrary points.

    ``pts_shifted`` are target points measured from the left box edge
    (x + L); the Nyquist column is symmetrized to a cosine.
    """
    E = np.exp(1j * np.outer(pts_shifted, k)) / n
    E[:, n // 2] = np.cos(pts_shifted * abs(k[n // 2])) / n
    return E


def _rescale_axes(u: Field, t: float, axes: list[int], amplitude: float,
                  warn_boundary: bool = True) -> Field:
    """Evaluate the trig interpolant of u at per-axis points t*x.

    Fields are treated as compactly supported inside the box: target points
    whose preimage t*x falls outside [-L, L) read zero instead of the
    periodic wrap-around image.
    """
    g = u.grid
    x = g.axis_coords(0)
    E = _trig_interp_matrix(g.Nx, g.kx, t * x + g.L)
    if t > 1.0:
        E[np.abs(t * x) >= g.L, :] = 0.0
    vals = u.values
    for ax in axes:
        vh = sfft.fft(vals, axis=ax)
        vals = np.moveaxis(np.tensordot(E, vh, axes=(1, ax)), 0, ax)
    out = Field(grid=g, values=amplitude * vals, kind=u.kind)
    if warn_boundary:
        bm = boundary_mass_fraction(out)
        if bm > 1e-6:
            warnings.warn(f"x-dilation left {bm:.2e} of the mass in the outer "
                          "10% shell; box may be too small", RuntimeWarning)
    return out


def x_scale(u: Field, t: float, warn_boundary: bool = True) -> Field:
    """Mass-preserving x-dilation u^t(x,y) = t^(d/2) u(tx, y)."""
    if not (t > 0):
        raise ValueError(f"dilation parameter must be positive, got t={t}")
    if t == 1.0:
        return u
    d = u.grid.d
    return _rescale_axes(u, t, list(range(d)), t ** (d / 2.0), warn_boundary)


def t_lambda(u: Field, lam: float) -> Field:
    """Conjugation scaling T_l u(x,y) = l^((d-1)/2) u(lx, y).

    Sends mass c to c/l and multiplies the semivirial by l; it realizes the
    bijection between the constrained manifolds at different masses.
    """
    if not (lam > 0):
        raise ValueError(f"scaling parameter must be positive, got {lam}")
    if lam == 1.0:
        return u
    d = u.grid.d
    return _rescale_axes(u, lam, list(range(d)), lam ** ((d - 1) / 2.0))


def s_t(phi: radmod.RadialProfileR, t: float) -> radmod.RadialProfileR:
    """L^2-preserving dilation S_t u(z) = t^((d+1)/2) u(tz) on R^(d+1)."""
    return radmod.scaled_profile(phi, t, (phi.d + 1) / 2.0)


def s_sup(phi: radmod.RadialProfileR, s: float) -> radmod.RadialProfileR:
    """Energy-preserving dilation S^s u(z) = s^((d-1)/2) u(sz) on R^(d+1).

    Leaves both the gradient energy and the critical potential invariant
    while sending the L^2 mass to zero like 1/s^2.
    """
    return radmod.scaled_profile(phi, s, (phi.d - 1) / 2.0)


@dataclass(frozen=True)
class FiberingPoint:
    """Projection data of a field onto the vanishing-semivirial manifold."""
    t_star: float
    value_at_star: float
    a: float
    q: float


def fibering_scalars(d: int, a: float, b: float, q: float, lam: float = 1.0
                     ) -> tuple[float, float]:
    """(t*, J) from the report components; raises on degenerate input."""
    if a <= 0.0 or q <= 0.0:
        raise ValueError("fibering projection needs a nonzero field "
                         f"(a={a}, q={q})")
    t_star = ((d + 1.0) * a / (d * q)) ** ((d - 1) / 2.0)
    value = 0.5 * lam * b + kappa(d) * a**d / q ** (d - 1)
    return t_star, value


def project_to_manifold(u: Field) -> FiberingPoint:
    """Unique t* with K(u^{t*}) = 0 and the projected energy H(u^{t*})."""
    rep = report(u)
    t_star, value = fibering_scalars(u.grid.d, rep.grad_x, rep.grad_y, rep.potential_p)
    return FiberingPoint(t_star=t_star, value_at_star=value, a=rep.grad_x, q=rep.potential_p)


def project_field(u: Field, warn_boundary: bool = True) -> tuple[Field, FiberingPoint]:
    """Apply the fibering dilation so the returned field has K = 0."""
    fp = project_to_manifold(u)
    return x_scale(u, fp.t_star, warn_boundary), fp


def reduced_objective(u: Field, lam: float | None = None) -> float:
    """J(u) = H_lam(u^{t*(u)}); invariant under x_scale."""
    rep = report(u)
    _, value = fibering_scalars(u.grid.d, rep.grad_x, rep.grad_y, rep.potential_p,
                                lam=1.0 if lam is None else lam)
    return value


def semivirial_of_dilated(d: int, a: float, q: float, t: float) -> float:
    """K(u^t) = t^2 a - d/(d+1) t^(2d/(d-1)) q, from the report components."""
    return t**2 * a - d / (d + 1.0) * t ** (2.0 * d / (d - 1)) * q


def energy_of_dilated(d: int, a: float, b: float, q: float, t: float,
                      lam: float = 1.0) -> float:
    """H_lam(u^t) from the report components."""
    cp = (d - 1.0) / (2.0 * (d + 1.0))
    return 0.5 * (t**2 * a + lam * b) - cp * t ** (2.0 * d / (d - 1)) * q
