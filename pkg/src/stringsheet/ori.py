"""Closed-form machinery for the plane-fronted (Ori) space-time.

The z-component equation on the characteristic lattice factorizes, so it
integrates in closed form along either characteristic direction: the
solution is -2 log of an argument built from the straightened initial
profiles and a cumulative integral.  Global existence is equivalent to that
argument staying positive, which gives a scannable criterion, a blow-up
time, and a family of cheap sufficient conditions.  Once the z-component is
known, the two transverse components satisfy linear equations and the time
component a final linear equation, all marched on the same characteristic
rectangles as the general solver.

The straightened initial profiles are the single most error-prone input:
the velocity profile at fixed vtheta differs from the original velocity
whenever the mean speed (lam+ + lam-)/2 is nonzero.  All conversions happen
in ``OriClosedForm.from_initial_data`` and are cross-checked against the
derivative of the position profile.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .config import DEFAULT_THRESHOLDS
from .errors import ConfigError, DomainTruncationError
from .lightcone import LightconeGrid
from .transport import CoordinateMap
from .worldsheet import StringInitialData

__all__ = [
    "OriClosedForm",
    "ExistenceReport",
    "CorollaryFlags",
    "PlaneFields",
    "TimeField",
    "solve_plane_components",
    "solve_time_component",
    "staged_solution",
]


def _composite_simpson(f, a, b, panels):
    frac = np.linspace(0.0, 1.0, panels + 1)
    x = a[:, None] + (b - a)[:, None] * frac[None, :]
    y = f(x.reshape(-1)).reshape(x.shape)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return (b - a) / (3.0 * panels) * (y @ w)


def _segment_integrals(f, nodes, tol=1e-13):
    """Simpson integrals over consecutive node pairs, panel count doubled
    until the Richardson estimate meets tol (vectorized adaptivity)."""
    a, b = nodes[:-1], nodes[1:]
    prev = _composite_simpson(f, a, b, 4)
    panels = 8
    cur = prev
    while panels <= 512:
        cur = _composite_simpson(f, a, b, panels)
        if np.max(np.abs(cur - prev)) / 15.0 <= tol:
            break
        prev = cur
        panels *= 2
    return cur


@dataclass(frozen=True)
class ExistenceReport:
    passed: bool
    t_max: float
    window: tuple
    margin_min: float
    t_star: Optional[float] = None
    vtheta_star: Optional[float] = None

    def describe(self) -> str:
        region = f"t in [0, {self.t_max:g}], vtheta in [{self.window[0]:g}, {self.window[1]:g}]"
        if self.passed:
            return f"PASS over scanned region ({region}); min margin {self.margin_min:.3e}"
        return (
            f"FAIL: earliest violation at t*={self.t_star:.6f}, "
            f"vtheta={self.vtheta_star:.6f} (scanned {region})"
        )


@dataclass(frozen=True)
class CorollaryFlags:
    psi3_nonpositive: bool
    p30_nonpositive: bool
    q30_nonpositive: bool
    p30_l1_small: bool
    q30_l1_small: bool

    def any_true(self) -> bool:
        return any(
            (
                self.psi3_nonpositive,
                self.p30_nonpositive,
                self.q30_nonpositive,
                self.p30_l1_small,
                self.q30_l1_small,
            )
        )

    def as_dict(self) -> dict:
        return {
            "psi3_nonpositive": self.psi3_nonpositive,
            "p30_nonpositive": self.p30_nonpositive,
            "q30_nonpositive": self.q30_nonpositive,
            "p30_l1_small": self.p30_l1_small,
            "q30_l1_small": self.q30_l1_small,
        }


class OriClosedForm:
    """Closed-form z-component and existence criterion.

    Holds the straightened profiles (position phi3, velocity psi3 and the
    two one-form traces p30 = psi3 - d phi3, q30 = psi3 + d phi3) together
    with cumulative tables of the three equivalent integrand forms.
    """

    def __init__(
        self,
        vtheta_nodes: np.ndarray,
        phi3_values: np.ndarray,
        p30_values: np.ndarray,
        q30_values: np.ndarray,
        periodic: bool,
        period: Optional[float],
        coupling_constant: Optional[float] = None,
        eps_log: float = DEFAULT_THRESHOLDS.eps_log,
        table_refine: int = 4,
    ):
        self.vtheta_nodes = np.asarray(vtheta_nodes, dtype=float)
        self.periodic = periodic
        self.period = period
        self.a = coupling_constant
        self.eps_log = float(eps_log)
        psi3 = 0.5 * (np.asarray(p30_values) + np.asarray(q30_values))
        if periodic:
            x = np.append(self.vtheta_nodes, self.vtheta_nodes[0] + period)
            mk = lambda v: CubicSpline(x, np.append(v, v[:1]), bc_type="periodic")
        else:
            x = self.vtheta_nodes
            mk = lambda v: CubicSpline(x, v)
        self._phi3 = mk(np.asarray(phi3_values, dtype=float))
        self._psi3 = mk(psi3)
        self._p30 = mk(np.asarray(p30_values, dtype=float))
        self._q30 = mk(np.asarray(q30_values, dtype=float))
        self.consistency_residual = float(
            np.max(
                np.abs(
                    0.5 * (np.asarray(q30_values) - np.asarray(p30_values))
                    - self._phi3(self.vtheta_nodes, nu=1)
                )
            )
        )
        self._build_tables(table_refine)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_initial_data(
        cls,
        data: StringInitialData,
        cmap: CoordinateMap,
        coupling_constant: Optional[float] = None,
        eps_log: float = DEFAULT_THRESHOLDS.eps_log,
    ) -> "OriClosedForm":
        if data.dim != 4:
            raise ConfigError("closed form needs four-component data (t, x, y, z)")
        return cls(
            vtheta_nodes=cmap.vtheta_nodes,
            phi3_values=data.phi[:, 3],
            p30_values=data.p0[:, 3],
            q30_values=data.q0[:, 3],
            periodic=cmap.periodic,
            period=cmap.vtheta_period,
            coupling_constant=coupling_constant,
            eps_log=eps_log,
        )

    @classmethod
    def from_profiles(
        cls,
        phi3_bar: Callable,
        psi3_bar: Callable,
        window: tuple,
        periodic: bool = False,
        nodes: int = 1025,
        coupling_constant: Optional[float] = None,
        eps_log: float = DEFAULT_THRESHOLDS.eps_log,
    ) -> "OriClosedForm":
        """Build directly from straightened-coordinate profiles."""
        lo, hi = map(float, window)
        if periodic:
            vth = np.linspace(lo, hi, nodes, endpoint=False)
            period = hi - lo
        else:
            vth = np.linspace(lo, hi, nodes)
            period = None
        phi = np.asarray(phi3_bar(vth), dtype=float) + np.zeros_like(vth)
        psi = np.asarray(psi3_bar(vth), dtype=float) + np.zeros_like(vth)
        if periodic:
            x = np.append(vth, lo + period)
            sp = CubicSpline(x, np.append(phi, phi[:1]), bc_type="periodic")
        else:
            sp = CubicSpline(vth, phi)
        dphi = sp(vth, nu=1)
        return cls(
            vtheta_nodes=vth,
            phi3_values=phi,
            p30_values=psi - dphi,
            q30_values=psi + dphi,
            periodic=periodic,
            period=period,
            coupling_constant=coupling_constant,
            eps_log=eps_log,
        )

    # -- profile evaluation --------------------------------------------------

    def _reduce(self, s):
        s = np.asarray(s, dtype=float)
        if self.periodic:
            lo = self.vtheta_nodes[0]
            return lo + np.mod(s - lo, self.period)
        return np.clip(s, self.vtheta_nodes[0], self.vtheta_nodes[-1])

    def phi3_bar(self, s):
        return self._phi3(self._reduce(s))

    def psi3_bar(self, s):
        return self._psi3(self._reduce(s))

    def p30_bar(self, s):
        return self._p30(self._reduce(s))

    def q30_bar(self, s):
        return self._q30(self._reduce(s))

    # -- cumulative tables -----------------------------------------------------

    def _integrand(self, which):
        prof = {"psi": self.psi3_bar, "p": self.p30_bar, "q": self.q30_bar}[which]
        return lambda s: prof(2.0 * s) * np.exp(-0.5 * self.phi3_bar(2.0 * s))

    def _build_tables(self, refine):
        lo = self.vtheta_nodes[0] / 2.0
        if self.periodic:
            hi = (self.vtheta_nodes[0] + self.period) / 2.0
        else:
            hi = self.vtheta_nodes[-1] / 2.0
        n = max(257, refine * len(self.vtheta_nodes) + 1)
        s_nodes = np.linspace(lo, hi, n)
        self._s_nodes = s_nodes
        self._s_period = hi - lo if self.periodic else None
        self._tables = {}
        for which in ("psi", "p", "q"):
            seg = _segment_integrals(self._integrand(which), s_nodes)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            self._tables[which] = cum
        self._edge_values = {
            which: (
                float(self._integrand(which)(np.array([lo]))[0]),
                float(self._integrand(which)(np.array([hi]))[0]),
            )
            for which in ("psi", "p", "q")
        }

    def cumulative(self, s, which="psi"):
        """F(s) = integral of the chosen integrand from the table origin,
        table lookup plus a local Simpson correction (absolute accuracy well
        below the blow-up threshold)."""
        s = np.asarray(s, dtype=float)
        nodes = self._s_nodes
        f = self._integrand(which)
        table = self._tables[which]
        if self.periodic:
            total = table[-1]
            k = np.floor((s - nodes[0]) / self._s_period)
            rem = s - k * self._s_period
            base_winding = k * total
        else:
            lo_edge, hi_edge = self._edge_values[which]
            below = s < nodes[0]
            above = s > nodes[-1]
            rem = np.clip(s, nodes[0], nodes[-1])
            base_winding = np.where(below, lo_edge * (s - nodes[0]), 0.0)
            base_winding = base_winding + np.where(above, hi_edge * (s - nodes[-1]), 0.0)
        idx = np.clip(np.searchsorted(nodes, rem, side="right") - 1, 0, len(nodes) - 2)
        a = nodes[idx]
        d = rem - a
        mid = f(a + 0.5 * d)
        corr = d / 6.0 * (f(a) + 4.0 * mid + f(rem))
        return table[idx] + corr + base_winding

    # -- closed form -----------------------------------------------------------

    def log_argument(self, t, vtheta, form="psi"):
        """The positive-argument expression whose log gives -u3/2.

        The three forms integrate the factored equation along xi (p-form),
        along eta (q-form), or in the symmetrized velocity form; they agree
        identically in the continuum.
        """
        t = np.asarray(t, dtype=float)
        vth = np.asarray(vtheta, dtype=float)
        plus = vth + t
        minus = vth - t
        hi = 0.5 * plus
        lo = 0.5 * minus
        if form == "psi":
            integral = self.cumulative(hi, "psi") - self.cumulative(lo, "psi")
            return (
                0.5 * np.exp(-0.5 * self.phi3_bar(plus))
                + 0.5 * np.exp(-0.5 * self.phi3_bar(minus))
                - 0.5 * integral
            )
        if form == "p":
            integral = self.cumulative(hi, "p") - self.cumulative(lo, "p")
            return np.exp(-0.5 * self.phi3_bar(plus)) - 0.5 * integral
        if form == "q":
            integral = self.cumulative(hi, "q") - self.cumulative(lo, "q")
            return np.exp(-0.5 * self.phi3_bar(minus)) - 0.5 * integral
        raise ValueError(f"unknown form {form!r}")

    def u3(self, t, vtheta, form="psi"):
        """Closed-form z-component; NaN marks blown-up points (argument at
        or below the log threshold)."""
        arg = self.log_argument(t, vtheta, form=form)
        out = np.where(arg > self.eps_log, arg, np.nan)
        return -2.0 * np.log(out)

    def u3_xi(self, t, vtheta):
        """Exact xi-derivative of u3 (quotient of integrand evaluations)."""
        t = np.asarray(t, dtype=float)
        vth = np.asarray(vtheta, dtype=float)
        plus = vth + t
        d = self.log_argument(t, vth)
        return self.q30_bar(plus) * np.exp(-0.5 * self.phi3_bar(plus)) / d

    def u3_eta(self, t, vtheta):
        t = np.asarray(t, dtype=float)
        vth = np.asarray(vtheta, dtype=float)
        minus = vth - t
        d = self.log_argument(t, vth)
        return self.p30_bar(minus) * np.exp(-0.5 * self.phi3_bar(minus)) / d

    def coupling(self, t, vtheta):
        """a * u3_xi * u3_eta, the coefficient of the transverse equations."""
        if self.a is None:
            raise ConfigError("coupling constant not set on this closed form")
        t = np.asarray(t, dtype=float)
        vth = np.asarray(vtheta, dtype=float)
        plus, minus = vth + t, vth - t
        d = self.log_argument(t, vth)
        return (
            self.a
            * self.q30_bar(plus)
            * self.p30_bar(minus)
            * np.exp(-0.5 * (self.phi3_bar(plus) + self.phi3_bar(minus)))
            / (d * d)
        )

    # -- existence -------------------------------------------------------------

    def scan_window(self):
        lo = float(self.vtheta_nodes[0])
        if self.periodic:
            return lo, lo + float(self.period)
        return lo, float(self.vtheta_nodes[-1])

    def existence_check(
        self,
        t_max: float,
        step: Optional[float] = None,
        window: Optional[tuple] = None,
        bisect_tol: float = 1e-6,
    ) -> ExistenceReport:
        """Scan the log argument over the region and report the verdict; on
        failure the earliest violation is bracketed on the grid and refined
        by bisection in t."""
        if window is None:
            window = self.scan_window()
        lo, hi = map(float, window)
        if step is None:
            step = (
                self.period / len(self.vtheta_nodes)
                if self.periodic
                else (hi - lo) / max(1, len(self.vtheta_nodes) - 1)
            )
        nodes = (
            np.arange(lo, hi, step)
            if self.periodic
            else np.linspace(lo, hi, int(np.floor((hi - lo) / step)) + 1)
        )
        levels = int(np.floor(t_max / step)) + 1
        t_nodes = np.minimum(step * np.arange(levels + 1), t_max)

        def min_arg(tval):
            return float(np.min(self.log_argument(np.full_like(nodes, tval), nodes)))

        margin = np.inf
        t_prev = 0.0
        for tval in t_nodes:
            m = min_arg(float(tval))
            margin = min(margin, m)
            if m <= self.eps_log:
                t_lo, t_hi = t_prev, float(tval)
                while t_hi - t_lo > bisect_tol:
                    mid = 0.5 * (t_lo + t_hi)
                    if min_arg(mid) <= self.eps_log:
                        t_hi = mid
                    else:
                        t_lo = mid
                t_star = 0.5 * (t_lo + t_hi)
                args = self.log_argument(np.full_like(nodes, t_hi), nodes)
                j = int(np.argmin(args))
                return ExistenceReport(
                    passed=False,
                    t_max=t_max,
                    window=(lo, hi),
                    margin_min=margin,
                    t_star=t_star,
                    vtheta_star=float(nodes[j]),
                )
            t_prev = float(tval)
        return ExistenceReport(
            passed=True, t_max=t_max, window=(lo, hi), margin_min=margin
        )

    def corollary_flags(
        self, l1_threshold: float = DEFAULT_THRESHOLDS.l1_threshold
    ) -> CorollaryFlags:
        """Cheap sufficient conditions for global existence, evaluated on
        the straightened profiles.  Each true flag implies the scan passes;
        all-false implies nothing."""
        lo, hi = self.scan_window()
        s = np.linspace(lo, hi, 4 * len(self.vtheta_nodes) + 1)
        psi = self.psi3_bar(s)
        p30 = self.p30_bar(s)
        q30 = self.q30_bar(s)
        l1_p = float(np.trapezoid(np.abs(p30), s))
        l1_q = float(np.trapezoid(np.abs(q30), s))
        return CorollaryFlags(
            psi3_nonpositive=bool(np.max(psi) <= 0.0),
            p30_nonpositive=bool(np.max(p30) <= 0.0),
            q30_nonpositive=bool(np.max(q30) <= 0.0),
            p30_l1_small=l1_p <= l1_threshold,
            q30_l1_small=l1_q <= l1_threshold,
        )


# ---------------------------------------------------------------------------
# staged solves on the characteristic lattice
# ---------------------------------------------------------------------------


@dataclass
class PlaneFields:
    """Transverse components (x, y) and their one-forms on the lattice."""

    u: np.ndarray  # (levels+1, nodes, 2)
    p: np.ndarray
    q: np.ndarray


@dataclass
class TimeField:
    u: np.ndarray  # (levels+1, nodes)
    p: np.ndarray
    q: np.ndarray


def _initial_slices(data: StringInitialData, cmap: CoordinateMap, grid: LightconeGrid, comps):
    theta_star = np.asarray(cmap.theta0_inverse(grid.vtheta), dtype=float)
    if not data.domain.periodic:
        theta_star = np.clip(theta_star, data.theta[0], data.theta[-1])
    u0 = data.phi_at(theta_star)[:, comps]
    p0 = data.p0_at(theta_star)[:, comps]
    q0 = data.q0_at(theta_star)[:, comps]
    return u0, p0, q0


def _check_domain_finite(cf: OriClosedForm, grid: LightconeGrid):
    t = grid.t_nodes
    args = cf.log_argument(t[:, None], grid.vtheta[None, :])
    if grid.periodic:
        bad = args <= cf.eps_log
    else:
        bad = np.zeros_like(args, dtype=bool)
        for m in range(len(t)):
            lo, hi = grid.valid_bounds(m)
            bad[m, lo:hi] = args[m, lo:hi] <= cf.eps_log
    if np.any(bad):
        m = int(np.argmax(np.any(bad, axis=1)))
        raise DomainTruncationError(
            f"closed-form z-component blows up inside the requested domain "
            f"at t={t[m]:.6g}; truncate t_max or change the data"
        )


def solve_plane_components(
    cf: OriClosedForm,
    data: StringInitialData,
    cmap: CoordinateMap,
    grid: LightconeGrid,
) -> PlaneFields:
    """March the two transverse components, which are linear once the
    closed-form z-component supplies the coupling coefficient."""
    _check_domain_finite(cf, grid)
    n = len(grid.vtheta)
    levels = grid.n_levels
    h = grid.step
    signs = np.array([1.0, -1.0])  # +c u for x, -c u for y
    u = np.full((levels + 1, n, 2), np.nan)
    p = np.full_like(u, np.nan)
    q = np.full_like(u, np.nan)
    u[0], p[0], q[0] = _initial_slices(data, cmap, grid, [1, 2])
    vth = grid.vtheta
    for m in range(levels):
        t0 = m * h
        if grid.periodic:
            ua, pa, qa = (np.roll(a[m], 1, axis=0) for a in (u, p, q))
            ub, pb, qb = (np.roll(a[m], -1, axis=0) for a in (u, p, q))
            vt = vth
            sl = slice(None)
        else:
            lo, hi = grid.valid_bounds(m)
            ua, pa, qa = u[m, lo : hi - 2], p[m, lo : hi - 2], q[m, lo : hi - 2]
            ub, pb, qb = u[m, lo + 2 : hi], p[m, lo + 2 : hi], q[m, lo + 2 : hi]
            vt = vth[lo + 1 : hi - 1]
            sl = slice(lo + 1, hi - 1)
        ca = cf.coupling(t0, vt - h)[:, None] * signs
        cb = cf.coupling(t0, vt + h)[:, None] * signs
        p_star = pa + h * ca * ua
        q_star = qb + h * cb * ub
        u_star = 0.5 * (ua + ub) + 0.25 * h * (qa + q_star + pb + p_star)
        cma = cf.coupling(t0 + 0.5 * h, vt - 0.5 * h)[:, None] * signs
        cmb = cf.coupling(t0 + 0.5 * h, vt + 0.5 * h)[:, None] * signs
        p_new = pa + h * cma * 0.5 * (ua + u_star)
        q_new = qb + h * cmb * 0.5 * (ub + u_star)
        u_new = 0.5 * (ua + ub) + 0.25 * h * (qa + q_new + pb + p_new)
        u[m + 1, sl], p[m + 1, sl], q[m + 1, sl] = u_new, p_new, q_new
    return PlaneFields(u=u, p=p, q=q)


def solve_time_component(
    cf: OriClosedForm,
    data: StringInitialData,
    cmap: CoordinateMap,
    grid: LightconeGrid,
    plane: PlaneFields,
) -> TimeField:
    """March the time component; linear given the plane fields and the
    closed-form z-derivatives."""
    if cf.a is None:
        raise ConfigError("staged time solve needs the coupling constant")
    a = cf.a
    n = len(grid.vtheta)
    levels = grid.n_levels
    h = grid.step
    u = np.full((levels + 1, n), np.nan)
    p = np.full_like(u, np.nan)
    q = np.full_like(u, np.nan)
    u0, p0, q0 = _initial_slices(data, cmap, grid, [0])
    u[0], p[0], q[0] = u0[:, 0], p0[:, 0], q0[:, 0]
    vth = grid.vtheta

    def rhs(u0v, p0v, q0v, p3, q3, u1, u2, pp1, qq1, pp2, qq2):
        return (
            -0.5 * (p0v * q3 + p3 * q0v)
            + a * u1 * (pp1 * q3 + p3 * qq1)
            - a * u2 * (pp2 * q3 + p3 * qq2)
            - 0.5 * (u0v - a * (u1 * u1 - u2 * u2)) * p3 * q3
        )

    for m in range(levels):
        t0 = m * h
        if grid.periodic:
            roll = lambda arr, k: np.roll(arr, k, axis=0)
            ua, pa, qa = roll(u[m], 1), roll(p[m], 1), roll(q[m], 1)
            ub, pb, qb = roll(u[m], -1), roll(p[m], -1), roll(q[m], -1)
            plA = {k: roll(getattr(plane, k)[m], 1) for k in ("u", "p", "q")}
            plB = {k: roll(getattr(plane, k)[m], -1) for k in ("u", "p", "q")}
            plX = {k: getattr(plane, k)[m + 1] for k in ("u", "p", "q")}
            vt = vth
            sl = slice(None)
        else:
            lo, hi = grid.valid_bounds(m)
            s_a, s_b, s_x = slice(lo, hi - 2), slice(lo + 2, hi), slice(lo + 1, hi - 1)
            ua, pa, qa = u[m, s_a], p[m, s_a], q[m, s_a]
            ub, pb, qb = u[m, s_b], p[m, s_b], q[m, s_b]
            plA = {k: getattr(plane, k)[m, s_a] for k in ("u", "p", "q")}
            plB = {k: getattr(plane, k)[m, s_b] for k in ("u", "p", "q")}
            plX = {k: getattr(plane, k)[m + 1, s_x] for k in ("u", "p", "q")}
            vt = vth[s_x]
            sl = s_x
        p3a, q3a = cf.u3_eta(t0, vt - h), cf.u3_xi(t0, vt - h)
        p3b, q3b = cf.u3_eta(t0, vt + h), cf.u3_xi(t0, vt + h)
        # predictor with corner values
        p_star = pa + h * rhs(
            ua, pa, qa, p3a, q3a,
            plA["u"][:, 0], plA["u"][:, 1],
            plA["p"][:, 0], plA["q"][:, 0],
            plA["p"][:, 1], plA["q"][:, 1],
        )
        q_star = qb + h * rhs(
            ub, pb, qb, p3b, q3b,
            plB["u"][:, 0], plB["u"][:, 1],
            plB["p"][:, 0], plB["q"][:, 0],
            plB["p"][:, 1], plB["q"][:, 1],
        )
        u_star = 0.5 * (ua + ub) + 0.25 * h * (qa + q_star + pb + p_star)
        # corrector with midpoint values; plane fields averaged along each leg
        tm = t0 + 0.5 * h
        p3ma, q3ma = cf.u3_eta(tm, vt - 0.5 * h), cf.u3_xi(tm, vt - 0.5 * h)
        p3mb, q3mb = cf.u3_eta(tm, vt + 0.5 * h), cf.u3_xi(tm, vt + 0.5 * h)
        mid_a = {k: 0.5 * (plA[k] + plX[k]) for k in ("u", "p", "q")}
        mid_b = {k: 0.5 * (plB[k] + plX[k]) for k in ("u", "p", "q")}
        p_new = pa + h * rhs(
            0.5 * (ua + u_star), 0.5 * (pa + p_star), 0.5 * (qa + q_star),
            p3ma, q3ma,
            mid_a["u"][:, 0], mid_a["u"][:, 1],
            mid_a["p"][:, 0], mid_a["q"][:, 0],
            mid_a["p"][:, 1], mid_a["q"][:, 1],
        )
        q_new = qb + h * rhs(
            0.5 * (ub + u_star), 0.5 * (pb + p_star), 0.5 * (qb + q_star),
            p3mb, q3mb,
            mid_b["u"][:, 0], mid_b["u"][:, 1],
            mid_b["p"][:, 0], mid_b["q"][:, 0],
            mid_b["p"][:, 1], mid_b["q"][:, 1],
        )
        u_new = 0.5 * (ua + ub) + 0.25 * h * (qa + q_new + pb + p_new)
        u[m + 1, sl], p[m + 1, sl], q[m + 1, sl] = u_new, p_new, q_new
    return TimeField(u=u, p=p, q=q)


def staged_solution(
    cf: OriClosedForm,
    data: StringInitialData,
    cmap: CoordinateMap,
    grid: LightconeGrid,
) -> np.ndarray:
    """Assemble the full four-component field: closed-form z, staged
    transverse and time components.  Shape (levels+1, nodes, 4)."""
    plane = solve_plane_components(cf, data, cmap, grid)
    time = solve_time_component(cf, data, cmap, grid, plane)
    levels = grid.n_levels
    out = np.full((levels + 1, len(grid.vtheta), 4), np.nan)
    out[:, :, 0] = time.u
    out[:, :, 1:3] = plane.u
    t = grid.t_nodes
    u3 = cf.u3(t[:, None], grid.vtheta[None, :])
    if grid.periodic:
        out[:, :, 3] = u3
    else:
        for m in range(levels + 1):
            lo, hi = grid.valid_bounds(m)
            out[m, lo:hi, 3] = u3[m, lo:hi]
    return out
