"""Model Kähler potentials, their radial Monge-Ampère reductions and a Hessian oracle.

Every radial reduction below is written in flux form.  With ``x`` the
radial variable, ``p = Phi'(x)`` and ``q = Phi''(x)``::

    D(x, p, q) = kappa0 * p**(n-1) * (A'(x) p / n + A(x) q) / w(x)
    D * w      = (kappa0 / n) * d/dx [ A(x) p**n ]

``D`` is normalised so the cone potential ``r**2 / 2`` has ``D = 1``.  The
ratio between ``D`` and the numerically computed determinant (times the
holomorphic volume weight) is a constant checked by :func:`oracle_gate`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from . import kernels


class MetricError(ValueError):
    pass


class ChartError(MetricError):
    """The stencil or point left the chart domain."""


class SolverError(RuntimeError):
    """Newton iteration failed; ``history`` holds the residual norms."""

    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


# ---------------------------------------------------------------------------
# finite-difference complex Hessian

# 6th-order centred second derivative
_D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
_OFF = np.arange(-3, 4)


def _second_directional(f, z0, v, h):
    vals = []
    for k in _OFF:
        val = f(z0 + k * h * v)
        if not np.isfinite(val):
            raise ChartError(f"potential not finite at offset {k} along {v}")
        vals.append(val)
    return float(np.dot(_D2, vals)) / (h * h)


def complex_hessian(potential: Callable, point, step: float = 1e-2) -> np.ndarray:
    """Finite-difference ``d^2 phi / dw_a dwbar_b`` of a real function of complex coordinates.

    Uses ``H(v, v) = (D_v^2 + D_{iv}^2) / 4`` for real directional second
    derivatives and polarisation for the off-diagonal entries.
    """
    z0 = np.asarray(point, dtype=complex)
    n = z0.size
    E = np.eye(n, dtype=complex)

    def quad(v):
        return 0.25 * (_second_directional(potential, z0, v, step) + _second_directional(potential, z0, 1j * v, step))

    H = np.zeros((n, n), dtype=complex)
    diag = [quad(E[a]) for a in range(n)]
    for a in range(n):
        H[a, a] = diag[a]
        for b in range(a + 1, n):
            re = 0.5 * (quad(E[a] + E[b]) - diag[a] - diag[b])
            im = 0.5 * (quad(E[a] + 1j * E[b]) - diag[a] - diag[b])
            H[a, b] = re + 1j * im
            H[b, a] = re - 1j * im
    return H


def numeric_hessian_det(potential: Callable, point, step: float = 1e-2) -> float:
    """Determinant of :func:`complex_hessian` (real for a real potential).

    Examples
    --------
    >>> round(numeric_hessian_det(lambda w: float(np.sum(abs(w) ** 2)), [0.3, 1j]), 8)
    1.0
    """
    return float(np.linalg.det(complex_hessian(potential, point, step)).real)


# ---------------------------------------------------------------------------
# Stenzel cone on the quadric sum z_i^2 = 0


def quadric_last_coordinate(w, c: complex = 0.0) -> complex:
    """``z_{n+1}`` on ``sum z_i^2 = c`` solved in the chart ``(z_1..z_n)``, principal branch."""
    s = complex(np.sum(np.asarray(w, dtype=complex) ** 2)) - c
    if abs(s) < 1e-300:
        raise ChartError("chart condition violated: sum of squares equals the smoothing parameter")
    return 1j * cmath.sqrt(s)


def stenzel_cone_chart(n: int, w) -> Tuple[float, complex, float]:
    """Cone potential, solved coordinate and volume weight at a chart point.

    Returns
    -------
    (r2, z_last, density)
        ``r2 = |z|^(2(n-1)/n)`` with ``|z|^2`` over all ``n+1`` coordinates,
        ``z_last = i sqrt(sum z_i^2)`` and ``density = 1 / |2 z_last|^2``.
    """
    w = np.asarray(w, dtype=complex)
    if w.size != n:
        raise MetricError(f"expected {n} chart coordinates, got {w.size}")
    zl = quadric_last_coordinate(w)
    tau = float(np.sum(np.abs(w) ** 2) + abs(zl) ** 2)
    return tau ** ((n - 1) / n), zl, 1.0 / abs(2 * zl) ** 2


def stenzel_potential(n: int, c: complex = 0.0, radial: Optional[Callable] = None) -> Callable:
    """Chart function ``w -> Phi(tau)`` on ``sum z^2 = c``; default ``Phi = tau^((n-1)/n)``."""
    alpha = (n - 1) / n
    radial = radial or (lambda t: t**alpha)

    def phi(w):
        zl = quadric_last_coordinate(w, c)
        return float(radial(float(np.sum(np.abs(w) ** 2) + abs(zl) ** 2)))

    return phi


def weighted_action(lam: float, z, n: int):
    """``lam . z = lam^(n/(n-1)) z``; the cone radius scales by ``lam``."""
    return (lam ** (n / (n - 1))) * np.asarray(z, dtype=complex)


# ---------------------------------------------------------------------------
# radial reductions


@dataclass(frozen=True)
class RadialReduction:
    """Monge-Ampère density of a radial potential in flux form.

    Attributes
    ----------
    family : ``"unitary"`` (potential of ``|z|^2`` on C^n or a quotient),
        ``"quadric"`` (potential of ``|z|^2`` on ``sum z_i^2 = c``) or
        ``"resolved"`` (small resolution of the 3-fold node, potential
        ``F(rho) + 4 a2 log(1 + |lambda|^2)``).
    n : complex dimension.
    c : smoothing parameter (quadric only).
    a2 : resolution parameter (resolved only).
    """

    name: str
    family: str
    n: int
    c: float = 0.0
    a2: float = 0.0

    def __post_init__(self):
        if self.family not in ("unitary", "quadric", "resolved"):
            raise MetricError(f"unknown reduction family {self.family!r}")
        if self.family == "resolved" and self.n != 3:
            raise MetricError("the resolved family is three-dimensional")

    @property
    def alpha(self) -> float:
        """Cone radius ``r^2 = x^alpha``."""
        return 1.0 if self.family == "unitary" else (self.n - 1) / self.n

    @property
    def kappa0(self) -> float:
        if self.family == "unitary":
            return 2.0**self.n
        return 2.0**self.n / self.alpha ** (self.n + 1)

    @property
    def x_min(self) -> float:
        return abs(self.c) if self.family == "quadric" else 0.0

    @property
    def oracle_constant(self) -> float:
        """``D * target_density / det`` fixed by the chart normalisation."""
        return self.kappa0 / 4.0 if self.family == "quadric" else self.kappa0

    def A(self, x):
        if self.family == "quadric":
            return (x * x - self.c**2) ** (self.n / 2)
        return x**self.n

    def dA(self, x):
        if self.family == "quadric":
            return self.n * x * (x * x - self.c**2) ** (self.n / 2 - 1)
        return self.n * x ** (self.n - 1)

    def w(self, x):
        if self.family == "quadric":
            return (x * x - self.c**2) ** (self.n / 2 - 1)
        if self.family == "resolved":
            return x
        return x ** (self.n - 1)

    def flux(self, x, p):
        """``G(x, p)`` with ``(kappa0/n) dG/dx = D w``."""
        if self.family == "resolved":
            g = x * p
            return g**3 + 6 * self.a2 * g**2
        return self.A(x) * p**self.n

    def flux_x(self, x, p):
        if self.family == "resolved":
            g = x * p
            return (3 * g**2 + 12 * self.a2 * g) * p
        return self.dA(x) * p**self.n

    def dflux_dp(self, x, p):
        if self.family == "resolved":
            g = x * p
            return (3 * g**2 + 12 * self.a2 * g) * x
        return self.n * self.A(x) * p ** (self.n - 1)

    def density(self, x, p, q):
        return (self.kappa0 / self.n) * (self.flux_x(x, p) + self.dflux_dp(x, p) * q) / self.w(x)

    def cone_p(self, x):
        """``d/dx`` of the cone potential ``x^alpha / 2``."""
        return 0.5 * self.alpha * x ** (self.alpha - 1)

    def cone_q(self, x):
        return 0.5 * self.alpha * (self.alpha - 1) * x ** (self.alpha - 2)

    @property
    def w_power(self) -> int:
        """Exponent of ``w`` on the cone."""
        return {"unitary": self.n - 1, "resolved": 1, "quadric": self.n - 2}[self.family]

    @property
    def flux_weight(self) -> float:
        """The flux scales by ``eps^flux_weight`` under ``Phi -> eps^2 Phi(x / eps^(2/alpha))``."""
        return (2 / self.alpha) * (self.w_power + 1)

    def scaled(self, eps: float) -> "RadialReduction":
        """Reduction carrying the potential ``eps^2 Phi(x / eps^(2/alpha))``."""
        if self.family == "quadric":
            return replace(self, c=self.c * eps ** (2 / self.alpha))
        if self.family == "resolved":
            return replace(self, a2=self.a2 * eps**2)
        return self

    def cone(self) -> "RadialReduction":
        """The unsmoothed, unresolved member of the family."""
        return replace(self, name=self.name + "/cone", c=0.0, a2=0.0)

    def chart_potential(self, Phi: Callable) -> Tuple[Callable, Callable, int]:
        """Chart function, holomorphic volume density and chart dimension for the Hessian oracle."""
        if self.family == "unitary":
            return (lambda w: float(Phi(float(np.sum(np.abs(w) ** 2))))), (lambda w: 1.0), self.n
        if self.family == "resolved":
            a2 = self.a2

            def K(w):
                lam, u, v = w
                t = 1.0 + abs(lam) ** 2
                return float(Phi((abs(u) ** 2 + abs(v) ** 2) * t)) + 4 * a2 * math.log(t)

            return K, (lambda w: 1.0), 3
        c = self.c

        def density(w):
            return 1.0 / abs(2 * quadric_last_coordinate(w, c)) ** 2

        return stenzel_potential(self.n, c, Phi), density, self.n

    def radial_of_chart(self, w) -> float:
        w = np.asarray(w, dtype=complex)
        if self.family == "unitary":
            return float(np.sum(np.abs(w) ** 2))
        if self.family == "resolved":
            lam, u, v = w
            return float((abs(u) ** 2 + abs(v) ** 2) * (1 + abs(lam) ** 2))
        zl = quadric_last_coordinate(w, self.c)
        return float(np.sum(np.abs(w) ** 2) + abs(zl) ** 2)


def oracle_gate(
    red: RadialReduction,
    Phi: Callable,
    p: Callable,
    q: Callable,
    points: int = 20,
    seed: int = 0,
    tol: float = 1e-5,
    scale: float = 1.0,
) -> Dict[str, float]:
    """Cross-check ``red.density`` against the finite-difference determinant.

    Samples random chart points, compares ``det / density * oracle_constant``
    with ``D(x, p(x), q(x))`` and raises :class:`MetricError` if any relative
    error reaches ``tol``.
    """
    f, vol, dim = red.chart_potential(Phi)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        while True:
            w = (rng.normal(size=dim) + 1j * rng.normal(size=dim)) * scale
            try:
                x = red.radial_of_chart(w)
                if x > red.x_min * 1.5 + 1e-3 and abs(complex(np.sum(w**2)) - red.c) > 0.05 * scale**2:
                    break
            except ChartError:
                continue
        step = 1e-2 * max(1.0, float(np.max(np.abs(w))))
        num = numeric_hessian_det(f, w, step) / vol(w) * red.oracle_constant
        ref = float(red.density(x, p(x), q(x)))
        worst = max(worst, abs(num - ref) / abs(ref))
    if worst >= tol:
        raise MetricError(f"reduction {red.name!r} failed the Hessian oracle: rel err {worst:.3e}")
    return {"points": points, "max_rel_err": worst}


# ---------------------------------------------------------------------------
# prescribed-volume model solutions


def _power_exp_integral(x, m: int, kappa: float):
    """``int_0^x s^m e^(kappa s) ds`` by its power series (accurate for moderate ``kappa x``)."""
    x = np.asarray(x, dtype=np.longdouble)
    term = x ** (m + 1) / (m + 1)
    total = term.copy()
    j = 0
    while True:
        j += 1
        term = term * kappa * x * (j + m) / (j * (j + m + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-22 * np.abs(total)) or j > 400:
            return total


def _quadric_volume_quad(red: RadialReduction, x, kappa: float):
    """Adaptive quadrature of ``int_c^x e^(kappa s) w(s) ds`` with ``s = c + u^2``."""
    from scipy.integrate import quad

    c = abs(red.c)

    def integrand(u):
        s = c + u * u
        return 2 * u * math.exp(kappa * s) * (s * s - c * c) ** (red.n / 2 - 1)

    out = [quad(integrand, 0.0, math.sqrt(max(float(xi) - c, 0.0)), epsabs=0, epsrel=1e-12, limit=200)[0] for xi in np.ravel(x)]
    return np.asarray(out, dtype=np.longdouble).reshape(np.shape(x))


def volume_integral(red: RadialReduction, x, kappa: float = 0.0):
    """``(n / kappa0) * int_{x_min}^x e^(kappa s) w(s) ds`` in long double.

    Closed forms cover every family used here: the unitary and resolved
    families and the quadric cone have monomial ``w``; the smoothed quadric
    with ``n = 3`` and ``kappa = 0`` uses the arccosh antiderivative, and
    any other smoothed quadric falls back to adaptive quadrature.
    """
    x = np.asarray(x, dtype=np.longdouble)
    pref = np.longdouble(red.n) / np.longdouble(red.kappa0)
    if red.family == "quadric" and red.c != 0:
        if red.n != 3 or kappa != 0:
            return pref * _quadric_volume_quad(red, x, kappa)
        c = np.longdouble(abs(red.c))
        s = np.sqrt(np.maximum(x * x - c * c, 0))
        return pref * 0.5 * (x * s - c * c * np.arccosh(np.maximum(x / c, 1)))
    m = {"unitary": red.n - 1, "resolved": 1, "quadric": red.n - 2}[red.family]
    if kappa == 0:
        return pref * x ** (m + 1) / (m + 1)
    return pref * _power_exp_integral(x, m, kappa)


def invert_flux(red: RadialReduction, x, G):
    """Solve ``flux(x, p) = G`` for ``p > 0``."""
    x = np.asarray(x, dtype=np.longdouble)
    G = np.asarray(G, dtype=np.longdouble)
    if red.family != "resolved":
        return (G / red.A(x)) ** (np.longdouble(1) / red.n)
    # gamma^3 + 6 a2 gamma^2 = G, gamma = x p: Newton from the larger of the two regimes
    a6 = 6 * np.longdouble(red.a2)
    g = np.maximum(np.cbrt(G), np.sqrt(G / a6) if red.a2 > 0 else 0)
    for _ in range(100):
        f = g**3 + a6 * g**2 - G
        step = f / (3 * g**2 + 2 * a6 * g)
        g = g - step
        if np.all(np.abs(step) <= 1e-19 * np.abs(g)):
            break
    return g / x


@dataclass(frozen=True)
class ModelSolution:
    """Radial potential with ``flux = G0 + e^c * volume_integral(kappa)``.

    ``kappa = 0`` gives a Ricci-flat model (cone when ``G0 = 0`` and the
    family is unsmoothed); ``kappa != 0`` prescribes the volume form
    ``e^(kappa x)`` times the holomorphic one.
    """

    red: RadialReduction
    G0: float = 0.0
    kappa: float = 0.0

    def target(self, x):
        return np.exp(np.longdouble(self.kappa) * np.asarray(x, dtype=np.longdouble))

    def flux_target(self, x):
        return np.longdouble(self.G0) + volume_integral(self.red, x, self.kappa)

    def p(self, x):
        return invert_flux(self.red, x, self.flux_target(x))

    def q(self, x):
        """``Phi''`` from the ODE: ``G_x + G_p q = (n/kappa0) T w``."""
        x = np.asarray(x, dtype=np.longdouble)
        p = self.p(x)
        red = self.red
        rhs = np.longdouble(red.n) / np.longdouble(red.kappa0) * self.target(x) * red.w(x)
        return (rhs - red.flux_x(x, p)) / red.dflux_dp(x, p)

    def dp(self, x):
        """``p - cone_p``, free of cancellation when the cone flux is known exactly.

        On unitary families and the unsmoothed quadric the cone potential
        solves ``flux = volume_integral(kappa=0)``, so the relative flux
        excess ``(G0 + I_kappa - I_0) / I_0`` is formed term by term.
        """
        x = np.asarray(x, dtype=np.longdouble)
        red = self.red
        if red.family == "unitary" or (red.family == "quadric" and red.c == 0):
            m = red.w_power
            I0 = volume_integral(red, x)
            excess = np.longdouble(self.G0) / I0
            if self.kappa:
                full = _power_exp_integral(x, m, self.kappa)
                lead = x ** (m + 1) / (m + 1)
                excess = excess + (full - lead) / lead
            return red.cone_p(x) * np.expm1(np.log1p(excess) / red.n)
        return self.p(x) - red.cone_p(x)

    def density_ratio(self, x):
        """``D / T``; identically one for an exact solution."""
        x = np.asarray(x, dtype=np.longdouble)
        return self.red.density(x, self.p(x), self.q(x)) / self.target(x)


def eguchi_hanson_potential(x, a: float = 1.0):
    """Closed-form potential with ``2 Phi' = sqrt(x^2 + a^4) / x`` on the resolution of C^2/Z_2."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(x * x + a**4)
    return 0.5 * (s + a * a * np.log(x / (a * a + s)))


def eguchi_hanson_derivatives(x, a: float = 1.0):
    """``(Phi', Phi'')`` of :func:`eguchi_hanson_potential`, differentiated by hand."""
    x = np.asarray(x, dtype=np.longdouble)
    a4 = np.longdouble(a) ** 4
    s = np.sqrt(x * x + a4)
    return s / (2 * x), -a4 / (2 * x * x * s)


def eguchi_hanson_residual(x, a: float = 1.0) -> np.ndarray:
    """``D[Phi_EH] - 1`` through the unitary ``n = 2`` reduction."""
    red = REGISTRY["eguchi-hanson"].red
    p, q = eguchi_hanson_derivatives(x, a)
    return np.asarray(red.density(np.asarray(x, dtype=np.longdouble), p, q) - 1, dtype=float)


# ---------------------------------------------------------------------------
# profiles


@dataclass
class RadialProfile:
    """Samples on a log-uniform grid ``t_i = log(r_i - origin)`` with 4th-order derivatives in ``r``.

    ``origin`` is nonzero only when the space starts at a positive radius
    (a smoothing), so that the grid can still resolve the inner end.
    """

    t: np.ndarray
    values: np.ndarray
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    origin: float = 0.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.ndim != 1 or self.t.size != self.values.size or self.t.size < 6:
            raise MetricError("profile needs matching 1-d arrays with at least 6 samples")
        dt = np.diff(self.t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * abs(dt[0]) + 1e-12:
            raise MetricError("profile grid must be strictly increasing and uniform in log r")
        if not np.all(np.isfinite(self.values)):
            raise MetricError("profile values must be finite")
        if self.d1 is None or self.d2 is None:
            h = dt[0]
            ft, ftt = kernels.stencil_derivatives(self.values, h)
            r = np.exp(self.t)  # r - origin
            self.d1 = ft / r
            self.d2 = (ftt - ft) / (r * r)

    @property
    def r(self):
        return self.origin + np.exp(self.t)

    def to_csv(self, path):
        with open(path, "w") as fh:
            if self.origin:
                fh.write(f"# origin={self.origin!r}\n")
            fh.write("t,value,d1,d2\n")
            for row in zip(self.t, self.values, self.d1, self.d2):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            first = fh.readline()
        origin = float(first.split("=", 1)[1]) if first.startswith("# origin=") else 0.0
        data = np.loadtxt(path, delimiter=",", skiprows=2 if origin else 1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], origin)


def log_grid(r_min: float, r_max: float, per_decade: int = 200) -> np.ndarray:
    """Uniform grid in ``log r`` with ``per_decade`` intervals per decade."""
    if not 0 < r_min < r_max:
        raise MetricError("need 0 < r_min < r_max")
    n = int(round(math.log10(r_max / r_min) * per_decade)) + 1
    return np.linspace(math.log(r_min), math.log(r_max), max(n, 6))


@dataclass
class CohomogeneityOneResult:
    profile: RadialProfile
    x: np.ndarray
    p: np.ndarray
    q: np.ndarray
    residual: float
    history: list = field(default_factory=list)
    ode_residual: float = float("nan")


def solve_cohomogeneity_one(
    red: RadialReduction,
    t_grid: np.ndarray,
    G0: float = 0.0,
    kappa: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> CohomogeneityOneResult:
    """Newton solve of the integrated reduced equation on a log grid in ``r``.

    Unknowns are ``p_i = Phi'(x_i)`` with ``x = x_min + r^(2/alpha)``.  The
    equations are ``flux(x_i, p_i) = G0 + (n/kappa0) int T w``, the volume
    integral taken with the grid quadrature kernel plus its exact value on
    ``[x_min, x_0]``.  The potential is the quadrature of ``p`` with the
    cone value imposed at ``r_max``.

    Raises
    ------
    SolverError
        if the scaled residual does not fall below ``tol`` within ``max_iter``.
    """
    t = np.asarray(t_grid, dtype=float)
    h = t[1] - t[0]
    r = np.exp(t)
    s = r ** (2 / red.alpha)  # offset from x_min
    x = red.x_min + s
    # d x = (2/alpha) s dt
    jac = (2 / red.alpha) * s
    T = np.exp(kappa * x)
    head = float(volume_integral(red, np.array([x[0]]), kappa)[0])
    pref = red.n / red.kappa0
    rhs = G0 + head + kernels.cumulative_integral(pref * T * red.w(x) * jac, h)
    p = red.cone_p(x) * (1 + 0 * x)
    # start from the cone derivative, lifted where the flux needs more
    p = np.maximum(p, np.asarray(invert_flux(red, x, np.maximum(rhs, 1e-300)), dtype=float) * 0.5)
    history = []
    for it in range(max_iter + 1):
        F = red.flux(x, p) - rhs
        scale = np.maximum(np.abs(rhs), 1e-300)
        res = float(np.max(np.abs(F) / scale))
        history.append(res)
        if res < tol:
            break
        step = F / red.dflux_dp(x, p)
        lam = 1.0
        while np.any(p - lam * step <= 0):
            lam *= 0.5
            if lam < 1e-8:
                raise SolverError("positivity lost in line search", history)
        p = p - lam * step
    else:
        raise SolverError(f"Newton did not converge: residual {history[-1]:.3e}", history)
    q = (pref * T * red.w(x) - red.flux_x(x, p)) / red.dflux_dp(x, p)
    if np.any(p <= 0) or np.any(red.density(x, p, q) <= 0):
        raise SolverError("solution is not a positive metric on the grid", history)
    phi = kernels.cumulative_integral(p * jac, h)
    phi = phi - phi[-1] + 0.5 * r[-1] ** 2
    prof = RadialProfile(t, phi)
    dens = red.density(x, p, q) / T
    return CohomogeneityOneResult(prof, x, p, q, history[-1], history, float(np.max(np.abs(dens - 1))))


def check_positivity(red: RadialReduction, x, p, q) -> Tuple[bool, Optional[float]]:
    """``(ok, first_bad_x)`` for ``Phi' > 0`` and ``D > 0``."""
    bad = (np.asarray(p) <= 0) | (np.asarray(red.density(x, p, q)) <= 0)
    if np.any(bad):
        return False, float(np.asarray(x)[np.argmax(bad)])
    return True, None


# ---------------------------------------------------------------------------
# polyhomogeneous fitting


@dataclass
class FitReport:
    terms: list
    coefficients: np.ndarray
    condition: float
    residual_max: float
    residual_slope: float
    at_noise_floor: bool
    r2: float


def fit_profile(profile: RadialProfile, candidates, regime: str = "zero", **kw):
    """:func:`fit_polyhomogeneous` applied to the values of a profile."""
    return fit_polyhomogeneous(profile.r, profile.values, candidates, regime, **kw)


def fit_polyhomogeneous(
    r, values, candidates, regime: str = "zero", max_terms: int = 4, cond_limit: float = 1e10, min_decades: float = 2.0
):
    """Least-squares fit of the leading terms of a candidate index set.

    Parameters
    ----------
    r, values : samples of the profile (``r`` spanning at least two decades).
    candidates : iterable of ``(z, k)`` pairs (or an IndexSet) in the
        boundary defining function ``rho = r`` (regime ``"zero"``) or
        ``rho = 1/r`` (regime ``"infinity"``).
    max_terms : at most this many leading terms (index order) are fitted.

    Returns
    -------
    (LogSeries, FitReport)
        The residual slope is the log-log slope of ``|residual|`` against
        ``rho`` over samples above the rounding floor; it is ``inf`` when the
        residual is rounding noise everywhere.
    """
    from .index_algebra import order_key
    from .log_series import LogSeries

    r = np.asarray(r, dtype=float)
    y = np.asarray(values, dtype=float)
    if r.min() <= 0 or math.log10(r.max() / r.min()) < min_decades - 1e-9:
        raise MetricError(f"fit needs samples spanning at least {min_decades:g} decades")
    if regime not in ("zero", "infinity"):
        raise MetricError(f"unknown regime {regime!r}")
    rho = r if regime == "zero" else 1 / r
    terms = sorted({(z, k) for z, k in candidates}, key=order_key)[:max_terms]
    if not terms:
        raise MetricError("empty candidate set")
    L = np.log(rho)
    X = np.column_stack([rho ** float(z) * L**k for z, k in terms])
    norms = np.linalg.norm(X, axis=0)
    Xs = X / norms
    cond = float(np.linalg.cond(Xs))
    if not np.isfinite(cond) or cond > cond_limit:
        raise MetricError(f"ill-conditioned fit (condition {cond:.3e}); candidate exponents too close for this range")
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    coef = coef / norms
    res = y - X @ coef
    floor = 1e3 * np.finfo(float).eps * np.abs(y).max()
    if np.count_nonzero(np.abs(res) > floor) >= 3:
        slope = _remainder_exponent(Xs, y, rho, float(max(z for z, _ in terms)))
        at_floor = False
    else:
        slope = float("inf")
        at_floor = True
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res**2)) / ss if ss > 0 else 1.0
    cap = max(z for z, _ in terms)
    series = LogSeries({t: float(c) for t, c in zip(terms, coef)}, cap, "r" if regime == "zero" else "1/r")
    return series, FitReport(terms, coef, cond, float(np.abs(res).max()), slope, at_floor, r2)


def _remainder_exponent(Xs, y, rho, z_last, span: float = 8.0) -> float:
    """Exponent ``s`` of the best extra column ``rho^s`` (variable projection).

    A plain least-squares residual leaks the next-order term into the fitted
    coefficients, so its log-log slope says little; refitting with one more
    free power and minimising over that power recovers the remainder order.
    """
    from scipy.optimize import minimize_scalar

    L = np.log(rho)

    def ssr(s):
        col = np.exp(s * L)
        col = col / np.linalg.norm(col)
        A = np.column_stack([Xs, col])
        c, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(np.sum((y - A @ c) ** 2))

    grid = z_last + np.linspace(0.02, span, 200)
    vals = [ssr(s) for s in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best = minimize_scalar(ssr, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    return float(best.x)


def loglog_fit(x, y):
    """Slope, intercept and R^2 of ``log|y|`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ly - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ModelEntry:
    """A named geometry: reduction plus the tip flux of its Ricci-flat model."""

    name: str
    red: RadialReduction
    G0: float = 0.0
    description: str = ""

    def solution(self, kappa: float = 0.0) -> ModelSolution:
        return ModelSolution(self.red, self.G0, kappa)

    def scaled_solution(self, eps: float) -> ModelSolution:
        """Ricci-flat model shrunk to size ``eps``: potential ``eps^2 Phi(x / eps^(2/alpha))``."""
        return ModelSolution(self.red.scaled(eps), self.G0 * eps**self.red.flux_weight, 0.0)


REGISTRY: Dict[str, ModelEntry] = {
    "flat": ModelEntry("flat", RadialReduction("flat", "unitary", 3), 0.0, "flat C^3, potential |z|^2/2"),
    "stenzel-cone": ModelEntry("stenzel-cone", RadialReduction("stenzel-cone", "quadric", 3, 0.0), 0.0,
                               "cone over the quadric, potential |z|^(4/3)/2"),
    "eguchi-hanson": ModelEntry("eguchi-hanson", RadialReduction("eguchi-hanson", "unitary", 2), 0.25,
                                "resolution of C^2/Z_2 with a = 1"),
    "deformed-conifold": ModelEntry("deformed-conifold", RadialReduction("deformed-conifold", "quadric", 3, 1.0), 0.0,
                                    "smoothing sum z^2 = 1"),
    "resolved-conifold": ModelEntry("resolved-conifold", RadialReduction("resolved-conifold", "resolved", 3, 0.0, 1.0),
                                    0.0, "small resolution with a^2 = 1"),
    "calabi-3": ModelEntry("calabi-3", RadialReduction("calabi-3", "unitary", 3), 1.0 / 8.0,
                           "resolution of C^3/Z_3 with a = 1"),
}


def get_model(name: str) -> ModelEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise MetricError(f"unknown ansatz {name!r}; known: {sorted(REGISTRY)}") from None
