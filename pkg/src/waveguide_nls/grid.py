"""Mixed spectral discretization of the waveguide domain [-L, L)^d x [0, 2pi).

The Euclidean factor is truncated to a periodic box so that every derivative,
quadrature and norm is exact Fourier calculus.  All fields carried by the other
modules live on a :class:`WaveguideGrid` (full waveguide lattice) or on an
x-only slice of it.

Conventions:
  * x lattice per axis: x_j = -L + j * (2L/Nx), j = 0..Nx-1
  * y lattice: y_j = j * (2pi/Ny)
  * wavenumbers from ``fftfreq``; the Nyquist mode of odd-order derivatives
    is zeroed (it carries no usable sign information)
  * quadrature weight per node: w = (2L/Nx)^d * (2pi/Ny)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

SNAPSHOT_FORMAT_VERSION = 1

_ALLOWED_D = (2, 3)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class WaveguideGrid:
    """Lattice for [-L, L)^d x [0, 2pi) with spectral wavenumbers.

    ``kx`` is the 1-d wavenumber array shared by all x axes, ``ky`` the torus
    one.  ``w`` is the quadrature weight of a single node.
    """

    d: int
    L: float
    Nx: int
    Ny: int
    kx: np.ndarray = field(repr=False, compare=False)
    ky: np.ndarray = field(repr=False, compare=False)
    w: float = 0.0

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.d + (self.Ny,)

    @property
    def slice_shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.d

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.Nx

    @property
    def dy(self) -> float:
        return 2.0 * np.pi / self.Ny

    @property
    def w_slice(self) -> float:
        """Quadrature weight of an x-only slice node."""
        return self.dx**self.d

    def axis_coords(self, axis: int) -> np.ndarray:
        """Physical coordinates along one lattice axis (axis d is the torus)."""
        if axis == self.d:
            return self.dy * np.arange(self.Ny)
        if 0 <= axis < self.d:
            return -self.L + self.dx * np.arange(self.Nx)
        raise ValueError(f"axis {axis} out of range for d={self.d}")

    def x_mesh(self) -> list[np.ndarray]:
        """Broadcastable x coordinate arrays (without the torus axis)."""
        out = []
        for ax in range(self.d):
            shp = [1] * (self.d + 1)
            shp[ax] = self.Nx
            out.append(self.axis_coords(ax).reshape(shp))
        return out

    def x_radius_sq(self, slice_only: bool = False) -> np.ndarray:
        """|x|^2 on the lattice (broadcast to slice or full shape)."""
        nax = self.d if slice_only else self.d + 1
        r2 = np.zeros((1,) * nax)
        for ax in range(self.d):
            shp = [1] * nax
            shp[ax] = self.Nx
            r2 = r2 + self.axis_coords(ax).reshape(shp) ** 2
        return r2

    def k_broadcast(self, axis: int) -> np.ndarray:
        """Wavenumber array of one axis shaped for broadcasting."""
        shp = [1] * (self.d + 1)
        if axis == self.d:
            shp[axis] = self.Ny
            return self.ky.reshape(shp)
        shp[axis] = self.Nx
        return self.kx.reshape(shp)

    def kx_sq_mesh(self) -> np.ndarray:
        """|k_x|^2 broadcast over the full spectral lattice."""
        out = np.zeros((1,) * (self.d + 1))
        for ax in range(self.d):
            out = out + self.k_broadcast(ax) ** 2
        return out

    def ky_sq_mesh(self) -> np.ndarray:
        return self.k_broadcast(self.d) ** 2

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask in spectral space (True = keep)."""
        keep = np.ones((1,) * (self.d + 1), dtype=bool)
        kx_cut = (2.0 / 3.0) * np.abs(self.kx).max()
        ky_cut = (2.0 / 3.0) * np.abs(self.ky).max()
        for ax in range(self.d):
            keep = keep & (np.abs(self.k_broadcast(ax)) <= kx_cut + 1e-14)
        keep = keep & (np.abs(self.k_broadcast(self.d)) <= ky_cut + 1e-14)
        return keep


def make_grid(d: int, L: float, Nx: int, Ny: int) -> WaveguideGrid:
    """Build the waveguide lattice; rejects unsupported parameters."""
    if d not in _ALLOWED_D:
        raise ValueError(f"spatial dimension d={d} unsupported (need d in {_ALLOWED_D})")
    if not (L > 0):
        raise ValueError(f"box half-length must be positive, got L={L}")
    if not (_is_pow2(Nx) and Nx >= 16):
        raise ValueError(f"Nx={Nx} must be a power of two >= 16")
    if not (_is_pow2(Ny) and Ny >= 8):
        raise ValueError(f"Ny={Ny} must be a power of two >= 8")
    L = float(L)
    dx = 2.0 * L / Nx
    kx = 2.0 * np.pi * sfft.fftfreq(Nx, d=dx)
    ky = 2.0 * np.pi * sfft.fftfreq(Ny, d=2.0 * np.pi / Ny)
    kx.flags.writeable = False
    ky.flags.writeable = False
    w = dx**d * (2.0 * np.pi / Ny)
    return WaveguideGrid(d=d, L=L, Nx=Nx, Ny=Ny, kx=kx, ky=ky, w=w)


@dataclass(frozen=True)
class Field:
    """Complex sample lattice on a grid; ``kind`` is 'waveguide' or 'slice'.

    Values are immutable after construction; every operation returns a new
    Field, so fields can be shared freely between concurrent evaluations.
    """

    grid: WaveguideGrid
    values: np.ndarray = field(repr=False, compare=False)
    kind: str = "waveguide"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        expected = self.grid.shape if self.kind == "waveguide" else self.grid.slice_shape
        if vals.shape != expected:
            raise ValueError(f"field shape {vals.shape} does not match grid shape {expected}")
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise ValueError("field contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def naxes(self) -> int:
        return self.grid.d + (1 if self.kind == "waveguide" else 0)

    def weight(self) -> float:
        return self.grid.w if self.kind == "waveguide" else self.grid.w_slice


def field_from_values(grid: WaveguideGrid, values: np.ndarray, kind: str = "waveguide") -> Field:
    return Field(grid=grid, values=values, kind=kind)


def field_from_function(grid: WaveguideGrid, fn, kind: str = "waveguide") -> Field:
    """Sample ``fn(*x, y)`` (or ``fn(*x)`` for slices) on the lattice."""
    coords = grid.x_mesh()
    if kind == "waveguide":
        yshp = [1] * (grid.d + 1)
        yshp[grid.d] = grid.Ny
        y = grid.axis_coords(grid.d).reshape(yshp)
        vals = fn(*coords, y)
    else:
        coords = [np.squeeze(c, axis=-1) for c in coords]
        vals = fn(*coords)
    vals = np.broadcast_to(np.asarray(vals, dtype=np.complex128),
                           grid.shape if kind == "waveguide" else grid.slice_shape)
    return Field(grid=grid, values=vals.copy(), kind=kind)


# -- spectral calculus -------------------------------------------------------

_FFT_WORKERS = 1


def set_fft_workers(n: int) -> None:
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def fftn(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, workers=_FFT_WORKERS)


def ifftn(values: np.ndarray) -> np.ndarray:
    return sfft.ifftn(values, workers=_FFT_WORKERS)


def spectral_derivative(u: Field, axis: int, order: int = 1) -> Field:
    """Exact Fourier differentiation along one axis.

    ``axis`` counts x axes 0..d-1, with axis d the torus direction (slices
    only carry x axes).  The Nyquist mode is zeroed for odd orders.
    """
    g = u.grid
    if not (0 <= axis < u.naxes):
        raise ValueError(f"axis {axis} out of range for kind={u.kind}")
    n = g.Ny if (axis == g.d and u.kind == "waveguide") else g.Nx
    k = g.ky if (axis == g.d and u.kind == "waveguide") else g.kx
    uh = sfft.fft(u.values, axis=axis, workers=_FFT_WORKERS)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult = mult.copy()
        mult[n // 2] = 0.0
    shp = [1] * u.naxes
    shp[axis] = n
    duh = uh * mult.reshape(shp)
    return Field(grid=g, values=sfft.ifft(duh, axis=axis, workers=_FFT_WORKERS), kind=u.kind)


def lp_norm_pow(u: Field, p: float) -> float:
    """||u||_p^p by lattice quadrature (trapezoid rule, spectrally exact)."""
    d = u.grid.d
    allowed = {2.0, 4.0, 2.0 + 4.0 / (d - 1), 2.0 * (d + 1) / (d - 1)}
    if not any(abs(p - a) < 1e-12 for a in allowed):
        raise ValueError(f"p={p} not in the supported exponent set {sorted(allowed)}")
    a = np.abs(u.values)
    if abs(p - 2.0) < 1e-12:
        s = float(np.sum(a * a))
    elif abs(p - 4.0) < 1e-12:
        a2 = a * a
        s = float(np.sum(a2 * a2))
    else:
        s = float(np.sum(a**p))
    return u.weight() * s


def mass(u: Field) -> float:
    return lp_norm_pow(u, 2.0)


def grad_sq_x(u: Field) -> float:
    """||grad_x u||_2^2 via Parseval."""
    g = u.grid
    uh = fftn(u.values) if u.kind == "waveguide" else sfft.fftn(u.values, workers=_FFT_WORKERS)
    ntot = uh.size
    if u.kind == "waveguide":
        k2 = g.kx_sq_mesh()
    else:
        k2 = np.zeros((1,) * g.d)
        for ax in range(g.d):
            shp = [1] * g.d
            shp[ax] = g.Nx
            k2 = k2 + g.kx.reshape(shp) ** 2
    return u.weight() / ntot * float(np.sum(k2 * np.abs(uh) ** 2))


def grad_sq_y(u: Field) -> float:
    """||d_y u||_2^2 via Parseval (zero for slices)."""
    if u.kind != "waveguide":
        return 0.0
    uh = fftn(u.values)
    return u.weight() / uh.size * float(np.sum(u.grid.ky_sq_mesh() * np.abs(uh) ** 2))


def zero_mode(u: Field) -> Field:
    """Mean over the torus direction: m(u) = (2pi)^-1 int_T u dy, as a slice."""
    if u.kind != "waveguide":
        raise ValueError("zero_mode expects a waveguide field")
    return Field(grid=u.grid, values=u.values.mean(axis=u.grid.d), kind="slice")


def embed_slice(g: Field) -> Field:
    """Extend a y-independent slice back onto the full waveguide lattice."""
    if g.kind != "slice":
        raise ValueError("embed_slice expects a slice field")
    vals = np.repeat(g.values[..., None], g.grid.Ny, axis=-1)
    return Field(grid=g.grid, values=vals, kind="waveguide")


def dealias(u: Field) -> Field:
    """Zero all modes above 2/3 of Nyquist (per axis)."""
    if u.kind != "waveguide":
        raise ValueError("dealias expects a waveguide field")
    uh = fftn(u.values)
    uh *= u.grid.dealias_mask()
    return Field(grid=u.grid, values=ifftn(uh), kind="waveguide")


def spectral_tail_fraction(values: np.ndarray, grid: WaveguideGrid) -> float:
    """Mass fraction carried by modes above 2/3 Nyquist on any axis."""
    uh = fftn(values)
    tot = float(np.sum(np.abs(uh) ** 2))
    if tot == 0.0:
        return 0.0
    keep = grid.dealias_mask()
    inner = float(np.sum(np.abs(uh) ** 2 * keep))
    return max(0.0, (tot - inner) / tot)


def boundary_mass_fraction(u: Field) -> float:
    """Mass fraction in the outer 10% shell of the x box (sup-norm shell)."""
    g = u.grid
    outer = np.zeros((1,) * u.naxes, dtype=bool)
    for ax in range(g.d):
        shp = [1] * u.naxes
        shp[ax] = g.Nx
        outer = outer | (np.abs(g.axis_coords(ax)).reshape(shp) >= 0.9 * g.L)
    a2 = np.abs(u.values) ** 2
    tot = float(np.sum(a2))
    if tot == 0.0:
        return 0.0
    return float(np.sum(a2 * outer)) / tot


# -- snapshot I/O -------------------------------------------------------------

def write_field(u: Field, path: str | Path) -> None:
    """Write a field snapshot: raw little-endian (re, im) float64 pairs plus a
    JSON sidecar with grid metadata.  Row-major, torus axis fastest."""
    path = Path(path)
    g = u.grid
    meta = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "endianness": "little",
        "kind": u.kind,
        "d": g.d,
        "L": g.L,
        "Nx": g.Nx,
        "Ny": g.Ny,
    }
    flat = np.ascontiguousarray(u.values)
    pairs = np.empty(flat.shape + (2,), dtype="<f8")
    pairs[..., 0] = flat.real
    pairs[..., 1] = flat.imag
    path.write_bytes(pairs.tobytes())
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_field(path: str | Path) -> Field:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    if meta["format_version"] > SNAPSHOT_FORMAT_VERSION:
        raise ValueError(f"snapshot format {meta['format_version']} newer than supported")
    g = make_grid(meta["d"], meta["L"], meta["Nx"], meta["Ny"])
    shape = g.shape if meta["kind"] == "waveguide" else g.slice_shape
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(shape + (2,))
    return Field(grid=g, values=raw[..., 0] + 1j * raw[..., 1], kind=meta["kind"])
