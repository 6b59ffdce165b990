"""Sampled functions on the two faces of the degenerating family and their corner calculus.

A :class:`FaceFunction` lives on one face: the AC face (variable ``xt``,
the rescaled radius squared) or the compact face (variable ``x``).  It
carries long-double samples on a log-uniform grid, samples of its
b-derivative ``u d/du`` and a far-end series: a tail in ``y = 1/xt`` on the
AC face, a head in ``x`` on the compact face.  The far-end series is what
moves a term from one face to the other (``x = eps^2 xt``).

:class:`EpsSeries` is a truncated series in ``eps`` and ``log eps`` whose
coefficients are face functions or scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Dict, List, Optional, Tuple

import numpy as np

from .index_algebra import as_fraction, order_key
from .log_series import LogSeries, ProfileLike, inv1p_series

LD = np.longdouble
EKey = Tuple[Fraction, int]


class FaceError(ValueError):
    pass


@dataclass(frozen=True)
class FaceGrid:
    """Nodes ``u_i = exp((i0 + i) h)`` on one face.

    ``face`` is ``"I"`` (AC face, far end ``u -> oo``, series in ``1/u``)
    or ``"II"`` (compact face, far end ``u -> 0``, series in ``u``).
    """

    face: str
    i0: int
    size: int
    h: float
    far_cap: Fraction

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.i0, self.i0 + self.size)

    @property
    def t(self) -> np.ndarray:
        return self.index * self.h

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.index.astype(LD) * LD(self.h))

    @property
    def far_name(self) -> str:
        return "y" if self.face == "I" else "x"

    @property
    def bsign(self) -> int:
        # u d/du in terms of the far variable: y = 1/u flips the sign
        return -1 if self.face == "I" else 1

    def series(self, terms=()) -> LogSeries:
        return LogSeries(terms, self.far_cap, self.far_name)


def make_grid(face: str, u_min: float, u_max: float, per_decade: int, far_cap) -> FaceGrid:
    """Grid with step ``ln 10 / per_decade`` anchored so that ``u = 1`` is a node."""
    if per_decade % 2:
        raise FaceError("per_decade must be even so that eps = 10^(-k/4) keeps the grids aligned")
    h = math.log(10) / per_decade
    lo = math.floor(math.log(u_min) / h)
    hi = math.ceil(math.log(u_max) / h)
    return FaceGrid(face, lo, hi - lo + 1, h, as_fraction(far_cap))


class FaceFunction:
    """Samples, b-derivative samples and far-end series of a function on one face."""

    __slots__ = ("grid", "vals", "bvals", "far")

    def __init__(self, grid: FaceGrid, vals, bvals, far: LogSeries):
        self.grid = grid
        self.vals = np.asarray(vals, dtype=LD)
        self.bvals = None if bvals is None else np.asarray(bvals, dtype=LD)
        self.far = far

    # constructors
    @classmethod
    def constant(cls, grid: FaceGrid, c) -> "FaceFunction":
        return cls(grid, np.full(grid.size, LD(c)), np.zeros(grid.size, dtype=LD), grid.series({(0, 0): float(c)}))

    @classmethod
    def monomial(cls, grid: FaceGrid, a, m: int = 0, c=1.0) -> "FaceFunction":
        """``c * u^a (log u)^m``."""
        a = as_fraction(a)
        u = grid.u
        L = np.log(u)
        base = u ** LD(float(a))
        vals = c * base * L**m
        bvals = c * (LD(float(a)) * base * L**m + (m * base * L ** (m - 1) if m else 0))
        if grid.face == "I":
            far = grid.series({(-a, m): float(c) * (-1) ** m})
        else:
            far = grid.series({(a, m): float(c)})
        return cls(grid, vals, bvals, far)

    # algebra
    def _coerce(self, other):
        if isinstance(other, FaceFunction):
            if other.grid != self.grid:
                raise FaceError("face functions live on different grids")
            return other
        return FaceFunction.constant(self.grid, other)

    def __add__(self, other):
        o = self._coerce(other)
        b = None if self.bvals is None or o.bvals is None else self.bvals + o.bvals
        return FaceFunction(self.grid, self.vals + o.vals, b, self.far + o.far)

    __radd__ = __add__

    def __neg__(self):
        return FaceFunction(self.grid, -self.vals, None if self.bvals is None else -self.bvals, -self.far)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, FaceFunction):
            c = float(other)
            return FaceFunction(
                self.grid, self.vals * LD(other), None if self.bvals is None else self.bvals * LD(other), self.far * c
            )
        o = self._coerce(other)
        b = None
        if self.bvals is not None and o.bvals is not None:
            b = self.bvals * o.vals + self.vals * o.bvals
        return FaceFunction(self.grid, self.vals * o.vals, b, self.far * o.far)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 1:
            raise FaceError("only positive integer powers")
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    def reciprocal(self) -> "FaceFunction":
        if np.any(self.vals == 0):
            raise FaceError("reciprocal of a function with zeros")
        lead = self.far.inf()
        if lead is None or lead[1] != 0:
            raise FaceError("far-end series must have a pure power as leading term")
        z0, _ = lead
        c0 = self.far[lead]
        g = self.grid
        shift = g.series({(-z0, 0): 1.0 / c0})
        rest = self.far * g.series({(-z0, 0): 1.0 / c0}) - 1.0
        far = inv1p_series(rest) * shift if not rest.is_zero() else shift
        b = None if self.bvals is None else -self.bvals / self.vals**2
        return FaceFunction(g, 1 / self.vals, b, far)

    def b(self) -> "FaceFunction":
        """The b-derivative as a function (its own b-derivative is unknown)."""
        if self.bvals is None:
            raise FaceError("b-derivative samples not available")
        far = self.far.b_derivative() * self.grid.bsign
        return FaceFunction(self.grid, self.bvals, None, far)

    def is_zero(self) -> bool:
        return not np.any(self.vals) and self.far.is_zero()

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.vals)))

    def pruned(self, tol: float = 1e-13) -> "FaceFunction":
        far = LogSeries({k: c for k, c in self.far.terms.items() if abs(c) > tol}, self.far.cap, self.far.face)
        return FaceFunction(self.grid, self.vals, self.bvals, far)

    def far_eval(self, u):
        """Evaluate the far-end series at face-variable values ``u``."""
        u = np.asarray(u, dtype=LD)
        v = 1 / u if self.grid.face == "I" else u
        L = np.log(v)
        out = np.zeros(u.shape, dtype=LD)
        for (z, k), c in self.far.terms.items():
            out += LD(c) * v ** LD(float(z)) * L**k
        return out

    def __repr__(self):
        return f"FaceFunction(face={self.grid.face}, n={self.grid.size}, far_terms={len(self.far)})"


ProfileLike.register(FaceFunction)


# ---------------------------------------------------------------------------
# eps series


class EpsSeries:
    """``sum c_{d,j} eps^d (log eps)^j`` truncated at ``d <= cap``."""

    __slots__ = ("terms", "cap")

    def __init__(self, terms=None, cap=0):
        self.cap = as_fraction(cap)
        self.terms: Dict[EKey, object] = {}
        for (d, j), c in (terms or {}).items():
            d = as_fraction(d)
            if d <= self.cap:
                key = (d, int(j))
                self.terms[key] = self.terms[key] + c if key in self.terms else c

    def copy(self):
        return EpsSeries(dict(self.terms), self.cap)

    def keys(self) -> List[EKey]:
        return sorted(self.terms, key=order_key)

    def items(self):
        return [(k, self.terms[k]) for k in self.keys()]

    def __getitem__(self, key):
        return self.terms[(as_fraction(key[0]), int(key[1]))]

    def get(self, key, default=None):
        return self.terms.get((as_fraction(key[0]), int(key[1])), default)

    def add_term(self, key, c):
        key = (as_fraction(key[0]), int(key[1]))
        if key[0] > self.cap:
            return
        self.terms[key] = self.terms[key] + c if key in self.terms else c

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, EpsSeries):
            for k, c in other.terms.items():
                out.add_term(k, c)
        else:
            out.add_term((0, 0), other)
        return out

    __radd__ = __add__

    def __neg__(self):
        return EpsSeries({k: -c for k, c in self.terms.items()}, self.cap)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, EpsSeries):
            return EpsSeries({k: c * other for k, c in self.terms.items()}, self.cap)
        cap = min(self.cap, other.cap)
        out: Dict[EKey, object] = {}
        for (da, ja), ca in self.terms.items():
            for (db, jb), cb in other.terms.items():
                d = da + db
                if d > cap:
                    continue
                key = (d, ja + jb)
                p = ca * cb
                out[key] = out[key] + p if key in out else p
        return EpsSeries(out, cap)

    __rmul__ = __mul__

    def power(self, n: int) -> "EpsSeries":
        out = self
        for _ in range(n - 1):
            out = out * self
        return out

    def map(self, fn) -> "EpsSeries":
        return EpsSeries({k: fn(c) for k, c in self.terms.items()}, self.cap)

    def reciprocal(self) -> "EpsSeries":
        """``1/S`` for a series whose ``(0, 0)`` coefficient is invertible and leading."""
        lead = self.terms.get((Fraction(0), 0))
        if lead is None:
            raise FaceError("reciprocal needs a nonzero eps^0 coefficient")
        if any(d < 0 or (d == 0 and j > 0) for d, j in self.terms):
            raise FaceError("reciprocal needs all other terms of positive order")
        inv0 = lead.reciprocal() if isinstance(lead, FaceFunction) else 1 / lead
        E = EpsSeries({k: c for k, c in self.terms.items() if k != (0, 0)}, self.cap) * inv0
        out = EpsSeries({(0, 0): inv0}, self.cap)
        if not E.terms:
            return out
        step = min(d for d, _ in E.terms)
        power = EpsSeries({(0, 0): 1.0}, self.cap)
        for k in range(1, int(self.cap / step) + 1):
            power = power * (-E)
            if not power.terms:
                break
            out = out + power * inv0
        return out

    def lowest(self) -> Optional[EKey]:
        return min(self.terms, key=order_key) if self.terms else None

    def pruned(self, tol: float, weight=None) -> "EpsSeries":
        """Drop coefficients below ``tol``.

        ``weight(key, f)`` returns sample weights for face-function
        coefficients; the default compares raw sample magnitudes.
        """

        def small(key, c):
            if isinstance(c, FaceFunction):
                w = 1 if weight is None else weight(key, c)
                # far terms with d + 2z > cap never reach the other face within the cap
                far = [v for (z, _), v in c.far.terms.items() if key[0] + 2 * z <= self.cap]
                return float(np.max(np.abs(c.vals * w))) <= tol and all(abs(v) <= tol for v in far)
            return abs(c) <= tol

        return EpsSeries({k: (c.pruned() if isinstance(c, FaceFunction) else c)
                          for k, c in self.terms.items() if not small(k, c)}, self.cap)

    def evaluate(self, eps: float):
        L = math.log(eps)
        acc = None
        for (d, j), c in self.terms.items():
            w = LD(eps) ** LD(float(d)) * LD(L) ** j
            term = (c.vals if isinstance(c, FaceFunction) else LD(c)) * w
            acc = term if acc is None else acc + term
        return acc if acc is not None else LD(0)


# ---------------------------------------------------------------------------
# moving terms between faces


def transfer(f: FaceFunction, key: EKey, target: FaceGrid, cap, tol: float = 1e-13) -> Dict[EKey, FaceFunction]:
    """Re-expand ``eps^d (log eps)^j f`` at the other face through its far-end series.

    AC tail ``y^z (log y)^k`` with ``y = eps^2 / x`` becomes
    ``eps^(d+2z) x^(-z) (2 log eps - log x)^k``; compact head ``x^z (log x)^k``
    with ``x = eps^2 xt`` becomes ``eps^(d+2z) xt^z (2 log eps + log xt)^k``.
    Terms beyond ``cap`` are dropped.
    """
    d, j = key
    cap = as_fraction(cap)
    src = f.grid.face
    if target.face == src:
        raise FaceError("transfer needs the other face as target")
    out: Dict[EKey, FaceFunction] = {}
    for (z, k), c in f.far.terms.items():
        if abs(c) <= tol:
            continue
        order = d + 2 * z
        if order > cap:
            continue
        for i in range(k + 1):
            if src == "I":
                coef = c * comb(k, i) * 2**i * (-1) ** (k - i)
                mono = FaceFunction.monomial(target, -z, k - i, coef)
            else:
                coef = c * comb(k, i) * 2**i
                mono = FaceFunction.monomial(target, z, k - i, coef)
            kk = (order, j + i)
            out[kk] = out[kk] + mono if kk in out else mono
    return out


# ---------------------------------------------------------------------------
# termwise calculus of far-end series


def power_log_antiderivative(a: Fraction, k: int) -> Dict[Tuple[Fraction, int], Fraction]:
    """``int u^a (log u)^k du`` as ``{(exponent, log power): coefficient}`` (no constant)."""
    a = as_fraction(a)
    if a == -1:
        return {(Fraction(0), k + 1): Fraction(1, k + 1)}
    out = {}
    for i in range(k + 1):
        out[(a + 1, k - i)] = Fraction((-1) ** i * factorial(k), factorial(k - i)) / (a + 1) ** (i + 1)
    return out


def integrate_head(s: LogSeries) -> LogSeries:
    """``int_0^x s(t) dt`` termwise; every exponent must exceed -1."""
    out = {}
    for (z, k), c in s.terms.items():
        if z <= -1:
            raise FaceError(f"term x^{z} is not integrable at 0 (weight outside the solvable window)")
        for key, f in power_log_antiderivative(z, k).items():
            out[key] = out.get(key, 0.0) + c * float(f)
    return LogSeries(out, s.cap + 1, s.face).with_cap(s.cap)


def integrate_tail(s: LogSeries) -> LogSeries:
    """An antiderivative in ``u = 1/y`` of a tail series given in ``y``, returned in ``y``."""
    out = {}
    for (z, k), c in s.terms.items():
        # y^z (log y)^k = (-1)^k u^(-z) (log u)^k
        for (e, m), f in power_log_antiderivative(-z, k).items():
            key = (-e, m)
            out[key] = out.get(key, 0.0) + c * (-1) ** (k + m) * float(f)
    return LogSeries(out, s.cap, s.face)


# ---------------------------------------------------------------------------
# sampling helpers


def lagrange_sample(vals: np.ndarray, t0: float, h: float, t, order: int = 8) -> np.ndarray:
    """Interpolate samples on the uniform grid ``t0 + i h`` at points ``t`` (``order`` nodes)."""
    vals = np.asarray(vals, dtype=LD)
    t = np.asarray(t, dtype=float)
    s = (t - t0) / h
    base = np.clip(np.floor(s).astype(int) - order // 2 + 1, 0, vals.size - order)
    out = np.zeros(t.shape, dtype=LD)
    loc = (s - base).astype(LD)
    for a in range(order):
        w = np.ones(t.shape, dtype=LD)
        for b in range(order):
            if b != a:
                w *= (loc - b) / LD(a - b)
        out += w * vals[base + a]
    return out


def sample(f: FaceFunction, u_index: np.ndarray = None, t=None, use_b: bool = False) -> np.ndarray:
    """Values (or b-values) of ``f`` at integer grid indices or at log-points ``t``.

    Outside the grid the far-end series is used beyond the far end; beyond
    the near end the value is an error.
    """
    g = f.grid
    arr = f.bvals if use_b else f.vals
    if arr is None:
        raise FaceError("b-values not available")
    if u_index is not None:
        idx = np.asarray(u_index) - g.i0
        t_pts = np.asarray(u_index, dtype=LD) * LD(g.h)
        inside = (idx >= 0) & (idx < g.size)
        out = np.empty(idx.shape, dtype=LD)
        out[inside] = arr[idx[inside]]
    else:
        t_pts = np.asarray(t, dtype=LD)
        lo, hi = g.i0 * g.h, (g.i0 + g.size - 1) * g.h
        inside = (t_pts >= lo) & (t_pts <= hi)
        out = np.empty(t_pts.shape, dtype=LD)
        out[inside] = lagrange_sample(arr, lo, g.h, np.asarray(t_pts[inside], float))
    outside = ~inside
    if np.any(outside):
        far_side = (t_pts > (g.i0 + g.size - 1) * g.h) if g.face == "I" else (t_pts < g.i0 * g.h)
        if np.any(outside & ~far_side):
            raise FaceError(f"face {g.face} function sampled beyond its near end")
        u = np.exp(t_pts[outside])
        series = f.far.b_derivative() * g.bsign if use_b else f.far
        out[outside] = FaceFunction(g, f.vals, None, series).far_eval(u)
    return out


_W_MID = np.array([11, -93, 802, 802, -93, 11], dtype=LD) / LD(1440)
_W_0 = np.array([475, 1427, -798, 482, -173, 27], dtype=LD) / LD(1440)
_W_1 = np.array([-27, 637, 1022, -258, 77, -11], dtype=LD) / LD(1440)


def cumulative(grid: FaceGrid, integrand_times_u) -> np.ndarray:
    """``int_{u_0}^{u_i} F du`` from samples of ``F * u`` (the measure in ``log u``).

    Same sixth-order interval rule as the grid kernels, carried out in long
    double because face coefficients are later multiplied by small powers of
    eps after large cancellations.
    """
    f = np.asarray(integrand_times_u, dtype=LD)
    n = f.size
    if n < 6:
        raise FaceError("need at least 6 samples")
    seg = np.empty(n - 1, dtype=LD)
    if n > 6:
        seg[2:-2] = sum(_W_MID[i] * f[i:n - 5 + i] for i in range(6))[: n - 5]
    seg[0] = np.dot(_W_0, f[:6])
    seg[1] = np.dot(_W_1, f[:6])
    r = f[-6:][::-1]
    seg[-1] = np.dot(_W_0, r)
    seg[-2] = np.dot(_W_1, r)
    out = np.zeros(n, dtype=LD)
    np.cumsum(seg * LD(grid.h), out=out[1:])
    return out
