"""Single-diode PV module model, series strings with bypass diodes, and curve analysis.

The module current obeys the implicit equation

    i = g*iph_stc - i0*(exp((v + i*rs)/(n*ns_cells*Vt)) - 1) - (v + i*rs)/rsh

with Vt the thermal voltage at the cell temperature. Everything here is a pure
function of its inputs; no global state, no randomness.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

BOLTZMANN = 1.380649e-23
ELEMENTARY_CHARGE = 1.602176634e-19

# Inner solves run three decades tighter than the 1e-9 A contract so that
# residuals survive the subtractions in derived quantities.
_SOLVE_TOL = 1e-13
_MAX_ITER = 100


class SolverError(RuntimeError):
    """Newton/bisection failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e} A)")
        self.residual = residual


class CalibrationError(ValueError):
    """Calibration targets are infeasible or could not be met within tolerance."""


@dataclass(frozen=True)
class ModuleParams:
    """Single-diode parameters of one PV module."""

    iph_stc: float
    i0: float
    n: float
    ns_cells: int
    rs: float
    rsh: float
    bypass_drop: float = 0.5
    t_stc: float = 25.0

    def __post_init__(self):
        if not self.i0 > 0:
            raise ValueError("i0 must be positive")
        if not self.iph_stc > 0:
            raise ValueError("iph_stc must be positive")
        if not 1.0 <= self.n <= 2.0:
            raise ValueError("ideality factor n must lie in [1, 2]")
        if self.ns_cells <= 0:
            raise ValueError("ns_cells must be positive")
        if self.rs < 0:
            raise ValueError("rs must be non-negative")
        if not self.rsh > 100.0 * self.rs:
            raise ValueError("rsh must exceed 100*rs")
        if self.bypass_drop < 0:
            raise ValueError("bypass_drop must be non-negative")


@dataclass(frozen=True)
class EnvInput:
    """Environment seen by one module: irradiance fraction and cell temperature."""

    g: float
    t_cell: float = 25.0

    def __post_init__(self):
        if not 0.0 <= self.g <= 1.0:
            raise ValueError("irradiance fraction g must lie in [0, 1]")


@dataclass(frozen=True)
class OperatingPoint:
    v: float
    i: float

    @property
    def p(self) -> float:
        return self.v * self.i


def thermal_voltage(t_cell: float) -> float:
    """Thermal voltage kT/q in volts for a cell temperature in Celsius."""
    return BOLTZMANN * (t_cell + 273.15) / ELEMENTARY_CHARGE


def _diode_scale(params: ModuleParams, t_cell: float) -> float:
    return params.n * params.ns_cells * thermal_voltage(t_cell)


def _solve_u(i0: float, a: float, r: float, target: float) -> float:
    """Solve i0*expm1(u/a) + u/r = target for u.

    h(u) is strictly increasing and convex, so Newton from the upper bracket
    end converges monotonically. The bracket bounds the exponent, which keeps
    exp() finite for any finite target.
    """
    lo = min(0.0, r * target)
    hi = a * math.log1p(max(target, 0.0) / i0) if target > 0 else 0.0
    tol = _SOLVE_TOL * max(1.0, abs(target))
    u = hi
    h = i0 * math.expm1(u / a) + u / r - target
    for _ in range(_MAX_ITER):
        if abs(h) <= tol:
            return u
        dh = (i0 / a) * math.exp(u / a) + 1.0 / r
        u_next = u - h / dh
        if not lo <= u_next <= hi:
            u_next = 0.5 * (lo + hi)
        h_next = i0 * math.expm1(u_next / a) + u_next / r - target
        if h_next > 0:
            hi = u_next
        else:
            lo = u_next
        u, h = u_next, h_next
    # Bisection fallback for pathological parameters.
    for _ in range(200):
        u = 0.5 * (lo + hi)
        h = i0 * math.expm1(u / a) + u / r - target
        if abs(h) <= tol:
            return u
        if h > 0:
            hi = u
        else:
            lo = u
    raise SolverError("diode equation solve did not converge", h)


def _solve_u_vec(i0: float, a: float, r: float, target: np.ndarray) -> np.ndarray:
    lo = np.minimum(0.0, r * target)
    hi = np.where(target > 0, a * np.log1p(np.maximum(target, 0.0) / i0), 0.0)
    tol = _SOLVE_TOL * np.maximum(1.0, np.abs(target))
    u = hi.copy()
    for _ in range(_MAX_ITER):
        h = i0 * np.expm1(u / a) + u / r - target
        if np.all(np.abs(h) <= tol):
            return u
        dh = (i0 / a) * np.exp(u / a) + 1.0 / r
        u_next = u - h / dh
        bad = (u_next < lo) | (u_next > hi)
        u_next = np.where(bad, 0.5 * (lo + hi), u_next)
        above = h > 0
        hi = np.where(above, u, hi)
        lo = np.where(above, lo, u)
        u = u_next
    h = i0 * np.expm1(u / a) + u / r - target
    worst = float(np.max(np.abs(h)))
    if worst > float(np.max(tol)):
        raise SolverError("vectorized diode solve did not converge", worst)
    return u


def solve_module_current(params: ModuleParams, env: EnvInput, v: float) -> float:
    """Current of a single module at terminal voltage v (no bypass diode applied)."""
    if not math.isfinite(v):
        raise ValueError("voltage must be finite")
    a = _diode_scale(params, env.t_cell)
    iph = env.g * params.iph_stc
    if params.rs == 0.0:
        return iph - params.i0 * math.expm1(v / a) - v / params.rsh
    r_eff = params.rs * params.rsh / (params.rs + params.rsh)
    u = _solve_u(params.i0, a, r_eff, iph + v / params.rs)
    return (u - v) / params.rs


def module_voltage_at_current(params: ModuleParams, env: EnvInput, i: float) -> float:
    """Terminal voltage of one bypassed module carrying string current i.

    When the string drives more current than the module can source, the ideal
    bypass diode clamps the terminal at -bypass_drop.
    """
    a = _diode_scale(params, env.t_cell)
    iph = env.g * params.iph_stc
    u = _solve_u(params.i0, a, params.rsh, iph - i)
    v = u - i * params.rs
    return max(v, -params.bypass_drop)


def residual(params: ModuleParams, env: EnvInput, v: float, i: float) -> float:
    """Defect of the implicit module equation at (v, i); zero on the curve."""
    a = _diode_scale(params, env.t_cell)
    u = v + i * params.rs
    return env.g * params.iph_stc - params.i0 * math.expm1(u / a) - u / params.rsh - i


@dataclass
class PvCurve:
    """Sampled string characteristic, strictly increasing in voltage."""

    v: np.ndarray
    i: np.ndarray
    model: "StringModel | None" = field(default=None, repr=False)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        if self.v.shape != self.i.shape or self.v.ndim != 1 or self.v.size == 0:
            raise ValueError("curve needs matching non-empty 1-D voltage/current arrays")
        if self.v.size > 1:
            if not np.all(np.diff(self.v) > 0):
                raise ValueError("curve voltages must be strictly increasing")
            if not np.all(np.diff(self.i) <= 1e-6):
                raise ValueError("curve current must be non-increasing with voltage")

    @cached_property
    def p(self) -> np.ndarray:
        return self.v * self.i

    def __len__(self) -> int:
        return int(self.v.size)

    @property
    def points(self) -> list[OperatingPoint]:
        return [OperatingPoint(float(v), float(i)) for v, i in zip(self.v, self.i)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["v_volts", "i_amps", "p_watts"])
            for v, i, p in zip(self.v, self.i, self.p):
                writer.writerow([f"{v:.6g}", f"{i:.6g}", f"{p:.6g}"])


class StringModel:
    """Series string of modules at a common current, with per-module bypass diodes.

    Modules sharing an irradiance fraction are grouped, so a 5-module string
    with 3 distinct levels costs 3 diode solves per evaluation.
    """

    def __init__(self, params: ModuleParams, g: Sequence[float], t_cell: float = 25.0):
        g = tuple(float(x) for x in g)
        if not g:
            raise ValueError("string needs at least one module")
        for x in g:
            if not 0.0 <= x <= 1.0:
                raise ValueError("irradiance fraction g must lie in [0, 1]")
        self.params = params
        self.g = g
        self.t_cell = t_cell
        self._a = _diode_scale(params, t_cell)
        groups: dict[float, int] = {}
        for x in g:
            groups[x] = groups.get(x, 0) + 1
        self._groups = sorted(groups.items(), reverse=True)

    # -- scalar evaluation ---------------------------------------------------

    def _module_v(self, iph: float, i: float) -> float:
        p = self.params
        u = _solve_u(p.i0, self._a, p.rsh, iph - i)
        return max(u - i * p.rs, -p.bypass_drop)

    def _module_dv_di(self, iph: float, i: float) -> float:
        p = self.params
        u = _solve_u(p.i0, self._a, p.rsh, iph - i)
        if u - i * p.rs <= -p.bypass_drop:
            return 0.0
        s = (p.i0 / self._a) * math.exp(u / self._a) + 1.0 / p.rsh
        return -(p.rs + 1.0 / s)

    def voltage_at_current(self, i: float) -> float:
        p = self.params
        total = 0.0
        for g, count in self._groups:
            total += count * self._module_v(g * p.iph_stc, i)
        return total

    def dv_di(self, i: float) -> float:
        p = self.params
        total = 0.0
        for g, count in self._groups:
            total += count * self._module_dv_di(g * p.iph_stc, i)
        return total

    # -- derived quantities ----------------------------------------------------

    @cached_property
    def isc_module_max(self) -> float:
        """Short-circuit current of the most irradiated module; sweep grid upper bound."""
        g_max = max(x for x, _ in self._groups)
        return max(solve_module_current(self.params, EnvInput(g_max, self.t_cell), 0.0), 0.0)

    @cached_property
    def isc(self) -> float:
        """String short-circuit current (terminal voltage zero)."""
        hi = self.isc_module_max
        if hi <= 0.0:
            return 0.0
        if self.voltage_at_current(hi) >= 0.0:
            return hi
        lo = 0.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self.voltage_at_current(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
        return lo

    @cached_property
    def voc(self) -> float:
        return self.voltage_at_current(0.0)

    def current_at_voltage(self, v: float) -> float:
        """Common string current at terminal voltage v in [0, voc]."""
        if v > self.voc:
            return 0.0 if self.isc == 0.0 else self._newton_current(v, 0.0)
        lo, hi = 0.0, self.isc_module_max
        if hi <= 0.0:
            return 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.voltage_at_current(mid) > v:
                lo = mid
            else:
                hi = mid
        return self._newton_current(v, 0.5 * (lo + hi))

    def _newton_current(self, v: float, i_start: float) -> float:
        i = i_start
        for _ in range(8):
            f = self.voltage_at_current(i) - v
            if abs(f) < 1e-12:
                break
            d = self.dv_di(i)
            if d >= 0.0:
                break
            i -= f / d
        return i

    def power_at_voltage(self, v: float) -> float:
        return v * self.current_at_voltage(v)

    def intersect(self, r_in: float, i_hint: float | None = None) -> OperatingPoint:
        """Operating point where the string curve meets the load line v = r_in * i.

        Bisection on current to 1e-6 A, then Newton polish. A dark string
        degenerates to (0, 0).
        """
        if r_in <= 0:
            raise ValueError("r_in must be positive")
        isc = self.isc
        if isc <= 0.0:
            return OperatingPoint(0.0, 0.0)

        def f(i: float) -> float:
            return self.voltage_at_current(i) - r_in * i

        lo, hi = 0.0, isc
        if i_hint is not None and 0.0 < i_hint < isc:
            delta = 0.02
            while delta < isc:
                c_lo, c_hi = max(0.0, i_hint - delta), min(isc, i_hint + delta)
                if f(c_lo) >= 0.0 >= f(c_hi):
                    lo, hi = c_lo, c_hi
                    break
                delta *= 4.0
        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        i = 0.5 * (lo + hi)
        for _ in range(3):
            df = self.dv_di(i) - r_in
            if df == 0.0:
                break
            i -= f(i) / df
        i = min(max(i, 0.0), isc)
        return OperatingPoint(self.voltage_at_current(i), i)

    # -- sweeping ---------------------------------------------------------------

    def curve(self, n_points: int = 2000) -> PvCurve:
        """Sweep a uniform current grid and re-parameterize over increasing voltage."""
        if n_points < 100:
            raise ValueError("n_points must be at least 100")
        p = self.params
        i_max = self.isc_module_max
        if i_max <= 0.0:
            return PvCurve(np.array([0.0]), np.array([0.0]), model=self)
        i_grid = np.linspace(0.0, i_max, n_points)
        v = np.zeros_like(i_grid)
        for g, count in self._groups:
            u = _solve_u_vec(p.i0, self._a, p.rsh, g * p.iph_stc - i_grid)
            v += count * np.maximum(u - i_grid * p.rs, -p.bypass_drop)
        order = np.argsort(v)
        v, i = v[order], i_grid[order]
        keep = v >= 0.0
        v, i = v[keep], i[keep]
        if v.size >= 2:
            dedupe = np.concatenate(([True], np.diff(v) > 0))
            v, i = v[dedupe], i[dedupe]
        return PvCurve(v, i, model=self)


def string_curve(params: ModuleParams, scenario_g: Sequence[float], n_points: int = 2000) -> PvCurve:
    """Sampled characteristic of a series string under the given irradiance vector."""
    return StringModel(params, scenario_g).curve(n_points)


def _golden_max(fn, lo: float, hi: float, tol: float) -> float:
    """Argmax of a unimodal fn on [lo, hi] by golden-section search."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def gmpp_oracle(curve: PvCurve) -> OperatingPoint:
    """Global maximum power point of a sampled curve.

    The discrete argmax is refined by golden-section search on the continuous
    model between its two neighbors (1e-3 V tolerance) when the curve carries
    a model reference.
    """
    k = int(np.argmax(curve.p))
    if curve.model is None or len(curve) < 3:
        return OperatingPoint(float(curve.v[k]), float(curve.i[k]))
    lo = float(curve.v[max(k - 1, 0)])
    hi = float(curve.v[min(k + 1, len(curve) - 1)])
    model = curve.model
    v_best = _golden_max(model.power_at_voltage, lo, hi, 1e-3)
    i_best = model.current_at_voltage(v_best)
    if v_best * i_best < float(curve.p[k]):
        return OperatingPoint(float(curve.v[k]), float(curve.i[k]))
    return OperatingPoint(v_best, i_best)


def local_maxima(curve: PvCurve, min_prominence: float = 0.5) -> list[OperatingPoint]:
    """Interior power peaks ordered by voltage, filtered by topographic prominence."""
    if min_prominence < 0:
        raise ValueError("min_prominence must be non-negative")
    if len(curve) < 3:
        return []
    idx, _ = find_peaks(curve.p, prominence=min_prominence if min_prominence > 0 else None)
    return [OperatingPoint(float(curve.v[j]), float(curve.i[j])) for j in idx]


@dataclass(frozen=True)
class CalibrationTargets:
    """STC curve anchors the calibration must reproduce."""

    vmp: float = 26.346
    imp: float = 7.59
    voc: float = 32.4509
    isc: float = 8.2162


DEFAULT_TARGETS = CalibrationTargets()

_FIXED_N = 1.3
_FIXED_RSH = 300.0
_FIXED_NS_CELLS = 54


def _params_for_rs(targets: CalibrationTargets, rs: float, n: float, rsh: float,
                   ns_cells: int, bypass_drop: float, t_stc: float) -> ModuleParams:
    """Parameters that place the STC maximum power point exactly at (vmp, imp)."""
    a = n * ns_cells * thermal_voltage(t_stc)
    m = targets.imp / targets.vmp
    u = targets.vmp + targets.imp * rs
    y = m / (1.0 - m * rs)
    slope = y - 1.0 / rsh
    if slope <= 0:
        raise CalibrationError("shunt conductance exceeds the required MPP slope")
    i0 = a * slope * math.exp(-u / a)
    iph = targets.imp + i0 * math.expm1(u / a) + u / rsh
    return ModuleParams(iph_stc=iph, i0=i0, n=n, ns_cells=ns_cells, rs=rs,
                        rsh=rsh, bypass_drop=bypass_drop, t_stc=t_stc)


def _stc_summary(params: ModuleParams) -> tuple[float, float, float, float]:
    env = EnvInput(1.0, params.t_stc)
    isc = solve_module_current(params, env, 0.0)
    voc = module_voltage_at_current(params, env, 0.0)
    vmp = _golden_max(lambda v: v * solve_module_current(params, env, v), 0.0, voc, 1e-9)
    imp = solve_module_current(params, env, vmp)
    return vmp, imp, voc, isc


def calibrate(targets: CalibrationTargets = DEFAULT_TARGETS, *, n: float = _FIXED_N,
              rsh: float = _FIXED_RSH, ns_cells: int = _FIXED_NS_CELLS,
              bypass_drop: float = 0.5, t_stc: float = 25.0) -> ModuleParams:
    """Fit (iph_stc, i0, rs) so the STC curve reproduces the calibration targets.

    The ideality factor, shunt resistance and cell count are held fixed; the
    maximum power point lands on (vmp, imp) by construction and rs is chosen
    to minimize the joint relative error on (voc, isc). Deterministic.

    Raises CalibrationError for infeasible targets (vmp >= voc, imp >= isc,
    fill factor above 0.85) or when the fit misses the contract tolerances
    (0.5% on the maximum power point, 1% on voc and isc).
    """
    t = targets
    if not (0.0 < t.vmp < t.voc and 0.0 < t.imp < t.isc):
        raise CalibrationError("targets must satisfy 0 < vmp < voc and 0 < imp < isc")
    fill_factor = (t.vmp * t.imp) / (t.voc * t.isc)
    if fill_factor > 0.85:
        raise CalibrationError(f"fill factor {fill_factor:.3f} above 0.85 is infeasible")

    def objective(rs: float) -> float:
        try:
            params = _params_for_rs(t, rs, n, rsh, ns_cells, bypass_drop, t_stc)
        except (CalibrationError, ValueError):
            return math.inf
        env = EnvInput(1.0, t_stc)
        isc = solve_module_current(params, env, 0.0)
        voc = module_voltage_at_current(params, env, 0.0)
        return ((isc - t.isc) / t.isc) ** 2 + ((voc - t.voc) / t.voc) ** 2

    rs_hi = min(0.5 * t.vmp / t.imp, rsh / 101.0)
    grid = np.linspace(0.0, rs_hi, 129)
    scores = [objective(float(r)) for r in grid]
    k = int(np.argmin(scores))
    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, len(grid) - 1)])
    rs = _golden_max(lambda r: -objective(r), lo, hi, 1e-10)
    params = _params_for_rs(t, rs, n, rsh, ns_cells, bypass_drop, t_stc)

    vmp_a, imp_a, voc_a, isc_a = _stc_summary(params)
    checks = [
        ("vmp", vmp_a, t.vmp, 0.005), ("imp", imp_a, t.imp, 0.005),
        ("pmp", vmp_a * imp_a, t.vmp * t.imp, 0.005),
        ("voc", voc_a, t.voc, 0.01), ("isc", isc_a, t.isc, 0.01),
    ]
    for name, got, want, tol in checks:
        err = abs(got - want) / want
        if err > tol:
            raise CalibrationError(
                f"calibration missed {name}: got {got:.4f}, target {want:.4f} "
                f"({100 * err:.2f}% > {100 * tol:.1f}%)")
    return params
