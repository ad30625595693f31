"""Ground-state profiles of the reduced R^d problem via radial shooting.

The y-independent branch of the constrained minimization reduces to the
radial ODE

    Q'' + (d-1)/r Q' - omega Q + Q^(1+4/(d-1)) = 0,   Q'(0) = 0,  Q -> 0,

whose unique positive decaying solution is found by bisection shooting on
Q(0) and then polished by Newton iteration on a Chebyshev collocation
discretization (Robin outflow condition matching the exponential tail).

Hatted quantities of the profile (mass, energy, virial) come from
Clenshaw-Curtis quadrature on the same nodes; the frequency scaling
Q_omega(r) = omega^((d-1)/4) Q_1(sqrt(omega) r) pins omega to a prescribed
mass and yields the exact law  c * (threshold at mass c) = const.
"""

from __future__ import annotations

import csv
import io
import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import gamma as _gamma

__all__ = [
    "RadialProfile",
    "ShootingError",
    "shoot_ground_state",
    "pc_for_mass",
    "rd_threshold",
    "write_profile",
    "read_profile",
]


class ShootingError(RuntimeError):
    """Raised when the shooting bracket cannot be established or refined."""


def _surface_rd(d: int) -> float:
    return 2.0 * np.pi ** (d / 2.0) / _gamma(d / 2.0)


def _cheb_lobatto(n: int, r_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes on [0, r_max] (increasing) and the
    differentiation matrix in that ordering."""
    if n < 2:
        raise ValueError("need at least 3 collocation nodes")
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)  # decreasing on [-1, 1]
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    # map [-1,1] (decreasing) onto [0, r_max] (increasing): r = (1-x)*rmax/2
    r = (1.0 - x) * (r_max / 2.0)
    D = -2.0 / r_max * D
    return r, D


def _clenshaw_curtis_weights(n: int, r_max: float) -> np.ndarray:
    """Quadrature weights on the Lobatto nodes (increasing order)."""
    j = np.arange(n + 1)
    w = np.zeros(n + 1)
    theta = np.pi * j / n
    for i in range(n + 1):
        s = 0.0
        for k in range(1, n // 2 + 1):
            bk = 1.0 if 2 * k == n else 2.0
            s += bk * np.cos(2.0 * k * theta[i]) / (4.0 * k * k - 1.0)
        w[i] = 1.0 - s
    w *= 2.0 / n
    w[0] *= 0.5
    w[-1] *= 0.5
    return w[::-1] * (r_max / 2.0)


@dataclass(frozen=True)
class RadialProfile:
    """Positive decaying radial solution on [0, R_max]."""

    d: int
    omega: float
    r: np.ndarray
    Q: np.ndarray
    Qp: np.ndarray
    R_max: float
    residual: float
    quad_w: np.ndarray

    @property
    def Q0(self) -> float:
        return float(self.Q[0])

    @property
    def power(self) -> float:
        """Nonlinearity power 1 + 4/(d-1)."""
        return 1.0 + 4.0 / (self.d - 1)

    def integral(self, values: np.ndarray) -> float:
        """|S^(d-1)| * int_0^Rmax values(r) r^(d-1) dr on the nodes."""
        return _surface_rd(self.d) * float(np.sum(self.quad_w * values * self.r ** (self.d - 1)))

    def mass(self) -> float:
        return self.integral(self.Q**2)

    def grad_sq(self) -> float:
        return self.integral(self.Qp**2)

    def lp_pow(self, p: float) -> float:
        return self.integral(np.abs(self.Q) ** p)

    def hatted(self) -> dict:
        """Hatted mass/energy/virial of the profile."""
        d = self.d
        a = self.grad_sq()
        q = self.lp_pow(1.0 + self.power)
        cp = (d - 1.0) / (2.0 * (d + 1.0))
        return {
            "mass": self.mass(),
            "energy": 0.5 * a - cp * q,
            "virial": a - d / (d + 1.0) * q,
            "grad_x": a,
            "potential_p": q,
        }

    def interpolator(self, n_dense: int = 20000):
        """Callable Q(r), exponential-tail extended beyond R_max."""
        dense_r = np.linspace(0.0, self.R_max, n_dense)
        dense_q = CubicSpline(self.r, self.Q)(dense_r)
        spl = CubicSpline(dense_r, dense_q)
        sq = np.sqrt(self.omega)
        d = self.d
        r_edge = self.R_max
        q_edge = float(spl(r_edge))

        def evaluate(rr: np.ndarray) -> np.ndarray:
            rr = np.asarray(rr, dtype=float)
            out = np.empty_like(rr)
            inside = rr <= r_edge
            out[inside] = spl(rr[inside])
            ro = rr[~inside]
            out[~inside] = q_edge * np.exp(-sq * (ro - r_edge)) * (r_edge / ro) ** ((d - 1) / 2.0)
            return out

        return evaluate


def _rhs(d: int, omega: float, power: float):
    def f(r, y):
        Q, P = y
        return [P, -(d - 1.0) / r * P + omega * Q - np.sign(Q) * np.abs(Q) ** power]
    return f


def _classify_shot(d: int, omega: float, A: float, r_max: float, power: float):
    """Integrate one shot; returns (+1 overshoot, -1 undershoot, 0 neither, sol)."""
    r0 = 1e-8
    g = omega * A - A**power
    y0 = [A + g * r0**2 / (2.0 * d), g * r0 / d]

    def hit_zero(r, y):
        return y[0]
    hit_zero.terminal = True
    hit_zero.direction = -1.0

    def turn_up(r, y):
        return y[1]
    turn_up.terminal = True
    turn_up.direction = 1.0

    sol = integrate.solve_ivp(
        _rhs(d, omega, power), (r0, r_max), y0, method="RK45",
        rtol=1e-10, atol=1e-12 * A, events=(hit_zero, turn_up), dense_output=True,
    )
    if sol.t_events[0].size > 0:
        return 1, sol
    if sol.t_events[1].size > 0:
        return -1, sol
    return 0, sol


def _bisect_amplitude(d: int, omega: float, r_max: float, power: float):
    """Bracket and bisect the shooting amplitude for the decaying solution."""
    A_eq = omega ** ((d - 1) / 4.0)  # constant equilibrium amplitude
    lo = None
    hi = None
    sol_mid = None
    for fac in (1.3, 1.7, 2.3, 3.0, 4.0, 5.5, 7.5, 10.0, 14.0, 20.0, 30.0):
        A = A_eq * fac
        kind, _ = _classify_shot(d, omega, A, r_max, power)
        if kind < 0:
            lo = A
        elif kind > 0:
            hi = A
            if lo is not None:
                break
        if lo is not None and hi is not None:
            break
    if lo is None or hi is None or not (lo < hi):
        raise ShootingError(
            f"no shooting bracket found for d={d}, omega={omega}: "
            f"scan returned lo={lo}, hi={hi}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        kind, sol_mid = _classify_shot(d, omega, mid, r_max, power)
        if kind > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            break
    A = 0.5 * (lo + hi)
    _, sol_mid = _classify_shot(d, omega, A, r_max, power)
    return A, sol_mid


def _newton_polish(d: int, omega: float, power: float, r: np.ndarray, D: np.ndarray,
                   Q0: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Newton iteration on the collocation system; returns (Q, Q', residual)."""
    n = r.size - 1
    D2 = D @ D
    sq = np.sqrt(omega)
    Q = Q0.copy()

    def residual_vec(Qv):
        F = D2 @ Qv + (d - 1.0) / np.where(r > 0, r, 1.0) * (D @ Qv) \
            - omega * Qv + np.sign(Qv) * np.abs(Qv) ** power
        # r = 0: symmetry row Q'(0) = 0; r = Rmax: Robin tail matching
        F[0] = (D @ Qv)[0]
        F[-1] = (D @ Qv)[-1] + (sq + (d - 1.0) / (2.0 * r[-1])) * Qv[-1]
        return F

    for _ in range(30):
        F = residual_vec(Q)
        J = D2 + ((d - 1.0) / np.where(r > 0, r, 1.0))[:, None] * D \
            - omega * np.eye(n + 1) + np.diag(power * np.abs(Q) ** (power - 1.0))
        J[0, :] = D[0, :]
        J[-1, :] = D[-1, :]
        J[-1, -1] += sq + (d - 1.0) / (2.0 * r[-1])
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise ShootingError(f"collocation Jacobian singular: {exc}") from exc
        # damped update guards the first iterations from the rough initial guess
        lam = 1.0
        base = np.max(np.abs(F))
        for _ in range(8):
            Qn = Q - lam * step
            if np.max(np.abs(residual_vec(Qn))) < base or lam < 1e-3:
                break
            lam *= 0.5
        Q = Qn
        if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(Q))):
            break
    F = residual_vec(Q)
    res = float(np.max(np.abs(F[1:-1])))
    return Q, D @ Q, res


_PROFILE_CACHE: dict[tuple, RadialProfile] = {}
_CACHE_LOCK = threading.Lock()


def shoot_ground_state(d: int, omega: float, n_nodes: int = 360) -> RadialProfile:
    """Positive decaying solution at the given frequency.

    Bisection shooting brackets the amplitude; a collocation Newton polish
    drives the pointwise ODE residual below 1e-8 and the tail below
    1e-8 * Q(0) (the domain is doubled until the tail criterion holds).
    """
    if d not in (2, 3):
        raise ValueError(f"d={d} unsupported")
    if not (omega > 0):
        raise ValueError(f"frequency must be positive, got omega={omega}")
    key = (d, round(float(omega), 14), n_nodes)
    with _CACHE_LOCK:
        if key in _PROFILE_CACHE:
            return _PROFILE_CACHE[key]

    power = 1.0 + 4.0 / (d - 1)
    sq = np.sqrt(omega)
    r_max = 12.0 / sq
    profile = None
    for _ in range(4):
        A, sol = _bisect_amplitude(d, omega, r_max, power)
        r, D = _cheb_lobatto(n_nodes, r_max)
        # initial guess from the dense shooting solution, tail-extended
        t_end = sol.t[-1]
        Qg = np.empty_like(r)
        inside = r <= t_end
        rr = np.clip(r[inside], sol.t[0], t_end)
        Qg[inside] = sol.sol(rr)[0]
        q_edge = max(sol.sol(t_end)[0], 1e-300)
        Qg[~inside] = q_edge * np.exp(-sq * (r[~inside] - t_end))
        Qg[0] = A
        Q, Qp, res = _newton_polish(d, omega, power, r, D, Qg)
        if Q[-1] <= 1e-8 * Q[0] * 1.01:
            w = _clenshaw_curtis_weights(n_nodes, r_max)
            profile = RadialProfile(d=d, omega=float(omega), r=r, Q=Q, Qp=Qp,
                                    R_max=r_max, residual=res, quad_w=w)
            break
        r_max *= 2.0
    if profile is None:
        raise ShootingError(f"tail criterion not met for d={d}, omega={omega}")
    # the equation magnitude grows like omega^((d+3)/4); the absolute 1e-8
    # bound is enforceable (and tested) in the unit-frequency window only
    res_cap = 1e-8 * max(1.0, 2.0 * omega ** ((d + 3.0) / 4.0))
    if profile.residual > res_cap:
        raise ShootingError(
            f"collocation residual {profile.residual:.2e} above {res_cap:.2e} "
            f"for d={d}, omega={omega}")
    if np.any(profile.Q < -1e-10 * profile.Q0):
        raise ShootingError("profile lost positivity")
    with _CACHE_LOCK:
        _PROFILE_CACHE[key] = profile
    return profile


def pc_for_mass(d: int, c: float, n_nodes: int = 360) -> tuple[RadialProfile, float]:
    """Profile with prescribed hatted mass c and its frequency.

    Mass scales like omega^(-1/2), so omega_c = (mass(Q_1)/c)^2; the profile
    is re-solved at that frequency rather than rescaled analytically.
    """
    if not (c > 0):
        raise ValueError(f"mass must be positive, got c={c}")
    m1 = shoot_ground_state(d, 1.0, n_nodes).mass()
    omega_c = (m1 / c) ** 2
    prof = shoot_ground_state(d, omega_c, n_nodes)
    return prof, omega_c


def rd_threshold(d: int, c: float, n_nodes: int = 360) -> float:
    """Constrained energy threshold of the reduced problem at mass c."""
    prof, _ = pc_for_mass(d, c, n_nodes)
    return prof.hatted()["energy"]


def write_profile(profile: RadialProfile, path: str | Path) -> None:
    """CSV of (r, Q) rows preceded by a JSON header line."""
    path = Path(path)
    header = {"d": profile.d, "omega": profile.omega,
              "residual": profile.residual, "R_max": profile.R_max}
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf)
    writer.writerow(["r", "Q"])
    for ri, qi in zip(profile.r, profile.Q):
        writer.writerow([repr(float(ri)), repr(float(qi))])
    path.write_text(buf.getvalue())


def read_profile(path: str | Path) -> dict:
    """Read back header and samples written by :func:`write_profile`."""
    path = Path(path)
    lines = path.read_text().splitlines()
    header = json.loads(lines[0].lstrip("# "))
    rows = list(csv.reader(lines[1:]))
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return {"header": header, "r": data[:, 0], "Q": data[:, 1]}
