"""Glued potentials on the degenerating family and their Ricci potentials.

The family interpolates between two radial models.  Near the singular point
(``r ~ eps``) the potential is an AC Ricci-flat model shrunk by ``eps``;
away from it the potential is a compact-side model on the cone with volume
form ``e^(kappa x)``.  Everything is computed in the reduced radial variable
``x`` (so ``r^2 = x^alpha``), with ``P'`` and ``P''`` assembled analytically
from the models and the cutoff.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

from . import kernels
from .index_algebra import ExponentMatrix, IndexFamily, inf_index, make_index_set, pushforward_index
from .log_series import BiSeries
from .metrics import (
    MetricError,
    ModelSolution,
    RadialProfile,
    fit_polyhomogeneous,
    get_model,
    loglog_fit,
    volume_integral,
)

LD = np.longdouble


class SurgeryError(ValueError):
    pass


class GluingPositivityError(MetricError):
    """The glued potential is not a metric; ``radius`` is the first bad cone radius."""

    def __init__(self, eps, radius):
        self.eps = eps
        self.radius = radius
        super().__init__(f"glued metric not positive at r={radius:.6g} for eps={eps:.3g}; eps too large")


# ---------------------------------------------------------------------------
# geometry of the surgery space


def boundary_defining_functions(r, eps):
    """``(rho1, rho2)`` with ``rho1 = sqrt(r^2 + eps^2)`` and ``rho1 * rho2 = eps``.

    Examples
    --------
    >>> boundary_defining_functions(2.0, 0.0)
    (2.0, 0.0)
    """
    r = np.asarray(r, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(r < 0) or np.any(eps < 0):
        raise SurgeryError("r and eps must be nonnegative")
    if np.any((r == 0) & (eps == 0)):
        raise SurgeryError("bdfs undefined at r = eps = 0")
    rho1 = np.hypot(r, eps)
    rho2 = eps / rho1
    if rho1.ndim == 0:
        return float(rho1), float(rho2)
    return rho1, rho2


def _bump_parts(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    si = np.where(inside, s, 0.5)
    g = 1 / si - 1 / (1 - si)
    chi = np.where(inside, expit(-g), (s >= 1).astype(float))
    return s, inside, si, chi


def cutoff(t, a: float, b: float):
    """Smooth step: 0 for ``t <= a``, 1 for ``t >= b``, exponential bump profile in between.

    Examples
    --------
    >>> float(cutoff(0.5, 0.0, 1.0))
    0.5
    """
    if not a < b:
        raise SurgeryError(f"cutoff needs a < b, got a={a}, b={b}")
    _, _, _, chi = _bump_parts((np.asarray(t, dtype=float) - a) / (b - a))
    return chi if np.ndim(chi) else float(chi)


def cutoff_derivatives(t, a: float, b: float):
    """``(chi, dchi/dt, d2chi/dt2)`` of :func:`cutoff`."""
    if not a < b:
        raise SurgeryError(f"cutoff needs a < b, got a={a}, b={b}")
    L = b - a
    s, inside, si, chi = _bump_parts((np.asarray(t, dtype=float) - a) / L)
    g1 = -1 / si**2 - 1 / (1 - si) ** 2
    g2 = 2 / si**3 - 2 / (1 - si) ** 3
    c1 = chi * (1 - chi)
    d1 = np.where(inside & (c1 > 0), -c1 * g1, 0.0)
    d2 = np.where(inside & (c1 > 0), c1 * (1 - 2 * chi) * g1 * g1 - c1 * g2, 0.0)
    return chi, d1 / L, d2 / (L * L)


# ---------------------------------------------------------------------------
# configuration


_DEFAULT_RATES = {
    # (lambda1, log power of the AC deviation, lambda2) per family
    "unitary": lambda n: (Fraction(2 * n), 0, Fraction(2)),
    "quadric": lambda n: (Fraction(2 * n), 1, Fraction(2 * n, n - 1)),
    "resolved": lambda n: (Fraction(2), 0, Fraction(3)),
}


@dataclass(frozen=True)
class SurgeryConfig:
    """Parameters of a glued family.

    Attributes
    ----------
    ac_model : registry name of the AC Ricci-flat model.
    lam1, lam2 : decay rates of the AC and compact-side deviations from the cone.
    kappa : the compact-side model has volume form ``e^(kappa x)``.
    neck : ``(a, b)``; the interpolation region is ``a sqrt(eps) <= r <= b sqrt(eps)``.
    gluing : ``"neck"`` (cutoff interpolation) or ``"sum"`` (both deviations
        added everywhere, no cutoff).
    X : outer end of the computational domain in the radial variable.
    """

    ac_model: str
    lam1: Fraction
    lam2: Fraction
    lam1_log: int = 0
    kappa: float = 1.0
    neck: Tuple[float, float] = (0.5, 2.0)
    gluing: str = "neck"
    X: float = 1.0
    eps_grid: Tuple[float, ...] = ()
    cap: Fraction = Fraction(8)
    per_decade: int = 200
    inner_decades: float = 6.0

    def __post_init__(self):
        if self.lam1 <= 0 or self.lam2 <= 0:
            raise SurgeryError("decay rates must be positive")
        a, b = self.neck
        if not 0 < a < b:
            raise SurgeryError("neck radii must satisfy 0 < a < b (so the model regions are disjoint)")
        if self.gluing not in ("neck", "sum"):
            raise SurgeryError(f"unknown gluing mode {self.gluing!r}")
        get_model(self.ac_model)

    @classmethod
    def for_model(cls, name: str, **kw) -> "SurgeryConfig":
        red = get_model(name).red
        lam1, k1, lam2 = _DEFAULT_RATES[red.family](red.n)
        kw.setdefault("lam1", lam1)
        kw.setdefault("lam1_log", k1)
        kw.setdefault("lam2", lam2)
        return cls(name, **kw)

    @property
    def entry(self):
        return get_model(self.ac_model)

    @property
    def n(self) -> int:
        return self.entry.red.n

    @property
    def m(self) -> int:
        return 2 * self.n

    @property
    def predicted_gluing_rate(self) -> float:
        return float(min(self.lam1, self.lam2)) / 2

    def to_json(self) -> dict:
        return {
            "ac_model": self.ac_model,
            "lam1": str(self.lam1),
            "lam1_log": self.lam1_log,
            "lam2": str(self.lam2),
            "kappa": self.kappa,
            "neck": list(self.neck),
            "gluing": self.gluing,
            "X": self.X,
            "eps_grid": list(self.eps_grid),
            "cap": str(self.cap),
            "per_decade": self.per_decade,
        }


# ---------------------------------------------------------------------------
# model deviations from the cone


class _Table:
    """Cubic spline of a deviation in ``log(x - x_min)``."""

    def __init__(self, y, f, x_min):
        self.x_min = x_min
        self.lo, self.hi = float(y[0]), float(y[-1])
        self.spline = CubicSpline(np.log(np.asarray(y, float)), np.asarray(f, float))

    def __call__(self, x):
        y = np.asarray(x, dtype=float) - self.x_min
        if np.any(y < self.lo * (1 - 1e-9)) or np.any(y > self.hi * (1 + 1e-9)):
            raise SurgeryError("deviation table evaluated outside its range")
        return self.spline(np.log(np.clip(y, self.lo, self.hi)))


@lru_cache(maxsize=16)
def _ac_table(name: str, per_decade: int = 200) -> _Table:
    """``f1 = Phi_AC - cone``, normalised to vanish at infinity."""
    entry = get_model(name)
    red, sol = entry.red, entry.solution()
    t = np.linspace(math.log(1e-14), math.log(1e16), int(30 * per_decade) + 1)
    y = np.exp(t)
    x = red.x_min + y.astype(LD)
    g = sol.dp(x)
    h = t[1] - t[0]
    F = kernels.cumulative_integral(np.asarray(g * y, float), h)
    # power-law tail beyond the grid
    k = -(math.log(abs(float(g[-1]))) - math.log(abs(float(g[-2])))) / h if g[-1] != 0 and g[-2] != 0 else 2.0
    if abs(k - 1) < 0.05:
        # deviation ~ C/x: f1 grows like C log x, drop the constant instead
        f1 = F - F[-1] + float(g[-1]) * y[-1] * t[-1]
    else:
        f1 = F - F[-1] - float(g[-1]) * y[-1] / (k - 1)
    return _Table(y, f1, red.x_min)


@lru_cache(maxsize=16)
def _cone_table(name: str, kappa: float, X: float, per_decade: int = 200) -> _Table:
    """``f2 = Phi_II - cone`` with ``f2(0) = 0``."""
    red = get_model(name).red.cone()
    sol = ModelSolution(red, 0.0, kappa)
    t = np.linspace(math.log(1e-40), math.log(10 * X), int(round((math.log10(10 * X) + 40) * per_decade)) + 1)
    y = np.exp(t)
    g = np.asarray(sol.dp(y.astype(LD)), float)
    h = t[1] - t[0]
    head = g[0] * y[0] / (red.alpha + 1)
    f2 = head + kernels.cumulative_integral(g * y, h)
    return _Table(y, f2, 0.0)


# ---------------------------------------------------------------------------
# glued potential


@dataclass
class GluedPotential:
    """Glued potential at one ``eps`` on a log grid in ``x - x_min``."""

    cfg: SurgeryConfig
    eps: float
    x: np.ndarray  # long double
    h: float
    p: np.ndarray
    q: np.ndarray
    psi2: np.ndarray
    red: object  # reduction of the glued space
    G_head: object  # flux at the grid start
    G_tip: object  # flux at x_min
    _P: Optional[np.ndarray] = None

    @property
    def alpha(self):
        return self.red.alpha

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.x, float) ** (self.alpha / 2)

    @property
    def x_min(self) -> float:
        return self.red.x_min

    def models(self):
        entry = self.cfg.entry
        return entry.scaled_solution(self.eps), ModelSolution(entry.red.cone(), 0.0, self.cfg.kappa)

    def f1_scaled(self, x):
        """``eps^2 f1(x / eps^(2/alpha))``."""
        s = self.eps ** (2 / self.alpha)
        return self.eps**2 * _ac_table(self.cfg.ac_model, self.cfg.per_decade)(np.asarray(x, float) / s)

    def f2(self, x):
        return _cone_table(self.cfg.ac_model, self.cfg.kappa, self.cfg.X, self.cfg.per_decade)(x)

    def cone_potential(self, x):
        return np.asarray(x, float) ** self.alpha / 2

    @property
    def P(self) -> np.ndarray:
        if self._P is None:
            xf = np.asarray(self.x, float)
            F1, F2 = self.f1_scaled(xf), self.f2(xf)
            if self.cfg.gluing == "sum":
                self._P = self.cone_potential(xf) + F2 + F1
            else:
                self._P = self.cone_potential(xf) + self.psi2 * F2 + (1 - self.psi2) * F1
        return self._P

    def model_potentials(self):
        """``(P_I, P_II)`` on the grid: cone plus each deviation alone."""
        xf = np.asarray(self.x, float)
        c = self.cone_potential(xf)
        return c + self.f1_scaled(xf), c + self.f2(xf)

    def density(self):
        return self.red.density(self.x, self.p, self.q)

    def profile(self) -> RadialProfile:
        """Potential against the cone radius; derivatives from the exact ``P'``, ``P''``.

        The grid variable is ``log(x - x_min)``, which is uniform in
        ``log(r - origin)`` only when ``x_min = 0``; otherwise the samples are
        linearly resampled onto a uniform grid in ``log(r - origin)``.
        """
        a = self.alpha
        r = self.r
        dxdr = (2 / a) * r ** (2 / a - 1)
        d2xdr2 = (2 / a) * (2 / a - 1) * r ** (2 / a - 2)
        p = np.asarray(self.p, float)
        d1 = p * dxdr
        d2 = np.asarray(self.q, float) * dxdr**2 + p * d2xdr2
        origin = self.x_min ** (a / 2)
        if origin == 0:
            return RadialProfile(np.log(r), self.P, d1, d2)
        tr = np.log(r - origin)
        t = np.linspace(tr[0], tr[-1], r.size)
        return RadialProfile(t, *(np.interp(t, tr, arr) for arr in (self.P, d1, d2)), origin=origin)

    def leading_expansion(self) -> BiSeries:
        """Leading terms in ``(rho1, rho2)``: cone, first compact-side and first AC deviation."""
        cfg = self.cfg
        cap = (Fraction(2) + cfg.lam2 + 2, cfg.lam1 + 2)
        return BiSeries(
            {(2, 0, 0, 0): 0.5, (2 + cfg.lam2, 0, 0, 0): 1.0, (2, 0, cfg.lam1, cfg.lam1_log): 1.0},
            cap,
        )


def _grid_for(cfg: SurgeryConfig, eps: float, red):
    """Log grid in ``x - x_min`` from deep inside the AC region to exactly ``X``."""
    scale = eps ** (2 / red.alpha)
    y_lo = scale * 10.0 ** (-cfg.inner_decades)
    y_hi = cfg.X - red.x_min
    if y_hi <= 10 * y_lo:
        raise SurgeryError("eps too large for the computational domain")
    N = max(int(math.ceil(math.log10(y_hi / y_lo) * cfg.per_decade)), 8)
    t = np.linspace(math.log(y_lo), math.log(y_hi), N + 1)
    return t, t[1] - t[0]


def glue_potential(cfg: SurgeryConfig, eps: float) -> GluedPotential:
    """Glued potential at ``eps`` with analytic first and second derivatives.

    Raises
    ------
    GluingPositivityError
        if ``P' <= 0`` or the Monge-Ampère density is not positive somewhere.
    """
    if not 0 < eps < 1:
        raise SurgeryError(f"eps must lie in (0, 1), got {eps}")
    entry = cfg.entry
    red_e = entry.red.scaled(eps)
    ac = entry.scaled_solution(eps)
    II = ModelSolution(entry.red.cone(), 0.0, cfg.kappa)
    t, h = _grid_for(cfg, eps, red_e)
    x = red_e.x_min + np.exp(t.astype(LD))
    alpha = red_e.alpha
    p_ac, q_ac = ac.p(x), ac.q(x)
    p_II, q_II = II.p(x), II.q(x)
    if cfg.gluing == "sum":
        cone = entry.red.cone()
        p = p_ac + p_II - cone.cone_p(x)
        q = q_ac + q_II - cone.cone_q(x)
        psi2 = np.ones(x.shape)
    else:
        se = math.sqrt(eps)
        r = x ** LD(alpha / 2)
        chi, c1, c2 = cutoff_derivatives(np.asarray(r, float) / se, *cfg.neck)
        # chain rule through u = r / sqrt(eps) = x^(alpha/2) / sqrt(eps)
        u1 = LD(alpha / 2) * x ** LD(alpha / 2 - 1) / LD(se)
        u2 = LD(alpha / 2) * LD(alpha / 2 - 1) * x ** LD(alpha / 2 - 2) / LD(se)
        psi, dpsi, d2psi = chi.astype(LD), c1 * u1, c2 * u1 * u1 + c1 * u2
        xf = np.asarray(x, float)
        tab2 = _cone_table(cfg.ac_model, cfg.kappa, cfg.X, cfg.per_decade)
        tab1 = _ac_table(cfg.ac_model, cfg.per_decade)
        active = np.asarray(dpsi != 0)
        diff = np.zeros(x.shape, dtype=LD)
        if np.any(active):
            xa = xf[active]
            diff[active] = tab2(xa) - eps**2 * tab1(xa / eps ** (2 / alpha))
        p = psi * p_II + (1 - psi) * p_ac + dpsi * diff
        q = psi * q_II + (1 - psi) * q_ac + 2 * dpsi * (p_II - p_ac) + d2psi * diff
        psi2 = chi
    dens = red_e.density(x, p, q)
    bad = (p <= 0) | ~(dens > 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise GluingPositivityError(eps, float(x[i] ** LD(alpha / 2)))
    G_tip = LD(entry.G0) * LD(eps) ** LD(red_e.flux_weight)
    G_head = ac.flux_target(x[:1])[0]
    return GluedPotential(cfg, eps, x, h, p, q, np.asarray(psi2, float), red_e, G_head, G_tip)


# ---------------------------------------------------------------------------
# Ricci potential


@dataclass
class FaceFit:
    face: str
    exponent: float
    log_power: int
    r2_of_fit: float
    predicted: Optional[float] = None
    exact: bool = False

    def to_json(self) -> dict:
        out = {"face": self.face, "exponent": self.exponent, "log_power": self.log_power, "r2_of_fit": self.r2_of_fit}
        if self.predicted is not None:
            out["predicted"] = self.predicted
        if self.exact:
            out["exact"] = True
        return out


@dataclass
class RicciPotentialField:
    eps: float
    v: np.ndarray
    c: float
    normalization_error: float
    fits: List[FaceFit] = field(default_factory=list)
    glued: Optional[GluedPotential] = None

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.v)))

    def profile(self) -> Optional[RadialProfile]:
        g = self.glued
        if g is None or g.x_min != 0:
            return None
        return RadialProfile(np.log(g.r), self.v)


def _quad(g: GluedPotential, f) -> LD:
    """``int f dx`` over the grid (the variable is ``log(x - x_min)``)."""
    y = g.x - g.x_min
    return LD(kernels.cumulative_integral(np.asarray(f * y, float), g.h)[-1])


def volumes(g: GluedPotential) -> Tuple[LD, LD]:
    """``(n/kappa0) * int D w`` and ``(n/kappa0) * int T w`` over ``[x_min, X]``.

    The grid quadrature is completed by the exact contributions of
    ``[x_min, x_0]``, where the potential is the AC model.
    """
    red = g.red
    pref = LD(red.n) / LD(red.kappa0)
    T = np.exp(LD(g.cfg.kappa) * g.x)
    w = red.w(g.x)
    vol_D = pref * _quad(g, g.density() * w) + (g.G_head - g.G_tip)
    # volume_integral starts at x_min for every family
    head_T = volume_integral(red, g.x[:1], g.cfg.kappa)[0]
    vol_T = pref * _quad(g, T * w) + head_T
    return vol_D, vol_T


def _face_fit(face, rho, vals, predicted, log_power=0) -> FaceFit:
    rho = np.asarray(rho, float)
    vals = np.abs(np.asarray(vals, float))
    keep = vals > 1e-16
    if keep.sum() < 8:
        return FaceFit(face, float("inf"), log_power, 1.0, predicted, exact=True)
    y = vals[keep] / np.abs(np.log(rho[keep])) ** log_power
    slope, _, r2 = loglog_fit(rho[keep], y)
    return FaceFit(face, slope, log_power, r2, predicted)


def ricci_potential(g: GluedPotential, eps: Optional[float] = None) -> RicciPotentialField:
    """``v = log(e^c T / D[P])`` with ``c`` chosen so ``int (e^v - 1) D w = 0``.

    Face fits are log-log regressions of ``|v - c|`` at fixed ``eps``:
    against ``rho1`` on the AC region ``r <= a sqrt(eps)`` (predicted rate
    ``lam2``) and against ``rho2`` on the compact region ``r >= b sqrt(eps)``
    (predicted rate ``lam1``).
    """
    if eps is not None and eps != g.eps:
        raise SurgeryError("glued potential was built for a different eps")
    dens = g.density()
    if np.any(~(dens > 0)):
        raise GluingPositivityError(g.eps, float(g.r[int(np.argmax(~(dens > 0)))]))
    vol_D, vol_T = volumes(g)
    c = np.log(vol_D / vol_T)
    T = np.exp(LD(g.cfg.kappa) * g.x)
    v = c + np.log(T / dens)
    w = g.red.w(g.x)
    pref = LD(g.red.n) / LD(g.red.kappa0)
    head = np.exp(c) * volume_integral(g.red, g.x[:1], g.cfg.kappa)[0] - (g.G_head - g.G_tip)
    norm = pref * _quad(g, (np.exp(v) - 1) * dens * w) + head
    cfg = g.cfg
    r = g.r
    rho1, rho2 = boundary_defining_functions(r, g.eps)
    a, b = cfg.neck
    se = math.sqrt(g.eps)
    vc = np.asarray(v - c, float)
    inner = (r <= a * se) & (r >= 3 * g.eps)
    outer = r >= b * se
    fits = []
    if cfg.gluing == "neck":
        fits.append(_face_fit("B_I", rho1[inner], vc[inner], float(cfg.lam2)))
        fits.append(_face_fit("B_II", rho2[outer], vc[outer], float(cfg.lam1)))
    return RicciPotentialField(g.eps, np.asarray(v, float), float(c), float(abs(norm) / vol_D), fits, g)


# ---------------------------------------------------------------------------
# sweeps over eps


@dataclass
class GluingSweep:
    eps: np.ndarray
    sup_to_II: np.ndarray  # sup over the neck of |P - P_II| / r^2
    sup_to_I: np.ndarray  # sup over the neck of |P - P_I| / r^2
    max_v: np.ndarray
    face_I_v: np.ndarray  # sup of |v| on the AC region
    face_II_v: np.ndarray  # sup of |v| on the compact region
    fits: Dict[str, FaceFit] = field(default_factory=dict)


def gluing_sweep(cfg: SurgeryConfig, eps_grid: Optional[Sequence[float]] = None) -> GluingSweep:
    """Restriction errors and Ricci potential sizes over an eps grid, with slope fits.

    ``fits`` holds log-log regressions against ``eps`` for each series; an
    eps grid with a single point yields no fits.
    """
    grid = np.asarray(sorted(eps_grid if eps_grid is not None else cfg.eps_grid), float)
    if grid.size == 0:
        raise SurgeryError("empty eps grid")
    rows = []
    a, b = cfg.neck
    for eps in grid:
        g = glue_potential(cfg, float(eps))
        rp = ricci_potential(g)
        r = g.r
        se = math.sqrt(eps)
        neck = (r >= a * se) & (r <= b * se)
        P_I, P_II = g.model_potentials()
        r2 = r * r
        rows.append(
            (
                np.max(np.abs(g.P - P_II)[neck] / r2[neck]),
                np.max(np.abs(g.P - P_I)[neck] / r2[neck]),
                rp.max_abs,
                np.max(np.abs(rp.v[r <= a * se])),
                np.max(np.abs(rp.v[r >= b * se])),
            )
        )
    arr = np.array(rows)
    sweep = GluingSweep(grid, *arr.T)
    if grid.size >= 2:
        pred = cfg.predicted_gluing_rate
        for key, col, prd in (
            ("restriction_II", arr[:, 0], pred),
            ("restriction_I", arr[:, 1], pred),
            ("max_v", arr[:, 2], None),
            ("v_face_I", arr[:, 3], None),
            ("v_face_II", arr[:, 4], None),
        ):
            slope, _, r2 = loglog_fit(grid, col)
            sweep.fits[key] = FaceFit(key, slope, 0, r2, prd)
    return sweep


@dataclass
class VolumeCheck:
    eps: np.ndarray
    volume: np.ndarray
    V0: float
    exponent: float
    r2: float
    predicted: Tuple[Fraction, int]
    coefficients: Dict[Tuple[Fraction, int], float]


def volume_index_prediction(cfg: SurgeryConfig, cap: Optional[Fraction] = None):
    """Leading ``eps`` exponent of the volume correction from the push-forward index family.

    The volume density is ``rho1^(2n)`` times a b-density, so the AC face
    carries the index set generated by ``(2n, 0)``.  The compact face
    carries nothing unless the family shifts the Kaehler class: the
    resolved family adds ``eps^2`` times a class that is not compactly
    supported, which puts ``(2, 0)`` there.  Both faces map to ``eps = 0``
    with exponent one.
    """
    cap = Fraction(cap if cap is not None else cfg.cap)
    compact = {(2, 0)} if cfg.entry.red.family == "resolved" else set()
    K = IndexFamily(
        {
            "B_I": make_index_set({(2 * cfg.n, 0)}, cap),
            "B_II": make_index_set(compact, cap),
        }
    )
    e = ExponentMatrix(("B_I", "B_II"), ("eps",), {("B_I", "eps"): 1, ("B_II", "eps"): 1})
    return inf_index(pushforward_index(K, e)["eps"])


def flux_volume(g: GluedPotential) -> LD:
    """``(n/kappa0) int D w`` as the flux difference ``G(X, P'(X)) - G(x_min)``.

    Exact for the reduced equation, so it resolves corrections far below
    the quadrature floor of :func:`volumes`.
    """
    return g.red.flux(g.x[-1], g.p[-1]) - g.G_tip


def pushforward_volume_check(cfg: SurgeryConfig, eps_grid: Sequence[float], method: str = "flux") -> VolumeCheck:
    """Total volume ``(n/kappa0) int D[P] w`` as a function of eps, with a fitted correction.

    ``V0`` is the volume of the compact-side model on the cone; the fitted
    exponent is the log-log slope of ``|V(eps) - V0|`` and is compared with
    :func:`volume_index_prediction`.  ``method="quadrature"`` integrates the
    density on the grid instead of using the flux identity.
    """
    if method not in ("flux", "quadrature"):
        raise SurgeryError(f"unknown volume method {method!r}")
    grid = np.asarray(sorted(eps_grid), float)
    if grid.size < 6 or math.log10(grid[-1] / grid[0]) < 1 - 1e-9:
        raise SurgeryError("volume check needs at least 6 eps samples spanning a decade")
    measure = flux_volume if method == "flux" else (lambda g: volumes(g)[0])
    vols = np.array([measure(glue_potential(cfg, float(e))) for e in grid], dtype=LD)
    V0 = volume_integral(cfg.entry.red.cone(), np.array([cfg.X], dtype=LD), cfg.kappa)[0]
    dV = np.asarray(vols - V0, float)
    pred = volume_index_prediction(cfg)
    coeffs = {}
    if np.all(np.abs(dV) < 1e-14 * float(V0)):
        slope, r2 = float("inf"), 1.0
    else:
        slope, _, r2 = loglog_fit(grid, dV)
        series, _ = fit_polyhomogeneous(grid, dV, [pred], min_decades=1.0)
        coeffs = dict(series.terms)
    return VolumeCheck(grid, np.asarray(vols, float), float(V0), slope, r2, pred, coeffs)


# ---------------------------------------------------------------------------
# outputs


def write_sweep_csv(path, fields: Sequence[RicciPotentialField], stride: int = 1):
    """CSV with columns ``eps, r, P, v``; rows in eps order then radius order."""
    with open(path, "w") as fh:
        fh.write("eps,r,P,v\n")
        for f in sorted(fields, key=lambda f: f.eps):
            g = f.glued
            r, P = g.r, g.P
            for i in range(0, r.size, stride):
                fh.write(f"{f.eps!r},{float(r[i])!r},{float(P[i])!r},{float(f.v[i])!r}\n")


def write_fit_json(path, fits: Sequence[FaceFit]):
    with open(path, "w") as fh:
        json.dump([f.to_json() for f in fits], fh, indent=2, sort_keys=True)
        fh.write("\n")
