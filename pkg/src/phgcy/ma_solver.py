"""Formal and exact solutions of the radial Monge-Ampère equation on a degenerating family.

The family is the sum-mode gluing of a unitary AC model (the face ``eps -> 0``
at fixed ``xt = x / eps^2``) into the compact-side model ``T = e^(kappa x)``
on ``0 < x <= X`` (the face at fixed ``x``).  In flux form the equation is

    D[p] = T e^c,      D[p] = 2^n p^(n-1) (p + x p'),

with ``p = Phi'``, the flux ``x^n p^n`` pinned to ``G0 eps^(2n)`` at the tip,
``p(X)`` pinned to the glued value and ``c`` the constant fixed by the flux
identity at ``X``.

:func:`formal_solve` removes the ``eps^d (log eps)^j`` terms of the error
``R = T e^c / D - 1`` face by face; :func:`newton_exact` then solves the
discretized equation exactly for each ``eps``; :func:`uniform_bound_probe`
estimates the weighted inverse norm of the linearization.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .faces import (
    EpsSeries,
    FaceFunction,
    cumulative,
    integrate_head,
    integrate_tail,
    make_grid,
    sample,
    transfer,
)
from .index_algebra import as_fraction, extended_union, make_index_set, precedes
from .log_series import LogSeries, compose_analytic
from .surgery import cutoff_derivatives
from .metrics import ModelSolution, RadialProfile, get_model, loglog_fit, volume_integral

LD = np.longdouble


class MASolverError(RuntimeError):
    pass


class MomentConditionError(MASolverError):
    """A compact-face coefficient has nonzero integral, so it cannot be removed."""

    def __init__(self, key, ratio):
        self.key, self.ratio = key, ratio
        super().__init__(f"moment condition fails at eps^{key[0]} (log eps)^{key[1]}: relative moment {ratio:.3e}")


class WeightWindowError(MASolverError):
    pass


class NewtonError(MASolverError):
    def __init__(self, msg, history):
        self.history = list(history)
        super().__init__(f"{msg}; residual history {['%.2e' % h for h in self.history]}")


# ---------------------------------------------------------------------------
# determinant ratio


@dataclass
class MAExpansion:
    """Reference potential data for expanding ``D[p + eta] / D[p]``.

    ``p`` and ``bp`` may be arrays, face functions or eps series; the
    expansion only uses ring operations and division by the reference.
    """

    n: int
    p: object
    bp: object


@dataclass
class ExpandedRatio:
    linear: object
    nonlinear: List[object]  # degree 2 .. n

    @property
    def total(self):
        out = 1 + self.linear
        for q in self.nonlinear:
            out = out + q
        return out


def expand_ma(eta, beta, ref: MAExpansion) -> ExpandedRatio:
    """Split the determinant ratio into its linear part and the homogeneous tail.

    For a radial correction the relative eigenvalues are ``a = eta / p``
    (multiplicity ``n - 1``) and ``c = (eta + b eta) / (p + b p)``, so the
    degree-``j`` part is ``C(n-1, j) a^j + C(n-1, j-1) a^(j-1) c``.
    """
    n = ref.n
    a = eta * (1 / ref.p)
    c = (eta + beta) * (1 / (ref.p + ref.bp))
    parts = []
    apow = [1, a]
    for _ in range(2, n + 1):
        apow.append(apow[-1] * a)
    for j in range(1, n + 1):
        term = apow[j - 1] * c * comb(n - 1, j - 1)
        if j <= n - 1:
            term = term + apow[j] * comb(n - 1, j)
        parts.append(term)
    return ExpandedRatio(parts[0], parts[1:])


def density(n: int, p, bp):
    return LD(2) ** n * p ** (n - 1) * (p + bp)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FormalConfig:
    """Settings for the two-face formal solve.

    ``order`` is the target ``N``; terms preceding ``eps^N`` in index order
    (including ``eps^N (log eps)^j``, ``j >= 1``) are removed.
    """

    model: str = "calabi-3"
    kappa: float = 1.0
    X: float = 1.0
    order: int = 6
    per_decade: int = 400
    ac_range: Tuple[float, float] = (1e-5, 1e5)
    compact_min: float = 1e-12
    beta: float = 0.05
    moment_tol: float = 1e-9
    max_rounds: int = 12
    prune_tol: float = 1e-13

    def __post_init__(self):
        entry = get_model(self.model)
        if entry.red.family != "unitary":
            raise MASolverError("the two-face solver handles unitary families")
        if self.X != 1.0:
            raise MASolverError("the compact face is normalized to X = 1")

    @property
    def n(self) -> int:
        return get_model(self.model).red.n

    @property
    def cap(self) -> Fraction:
        return Fraction(self.order + 2)

    def to_json(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


def _binomial_series(expo: Fraction, s: LogSeries) -> LogSeries:
    """``(1 + s)^expo``."""

    def coef(j):
        out = Fraction(1)
        for i in range(j):
            out *= (expo - i) / (i + 1)
        return float(out)

    return compose_analytic(coef, s)


class TwoFaceState:
    """Corrections on both faces and the error ``R`` they leave behind.

    The reference is ``p = p_AC(xt) + chi(xt) (p_II(x) - 1/2)`` with
    ``chi`` switching the compact-side deviation off on the AC scale
    ``xt < 1`` (the deviation is not smooth across the exceptional set).
    The prescribed density is ``T = exp(kappa x chi(xt))`` for the same
    reason.  Since ``chi = 1`` for ``xt >= 4`` it is invisible on the
    compact face.
    """

    chi_window = (1.0, 4.0)

    def __init__(self, cfg: FormalConfig):
        self.cfg = cfg
        entry = get_model(cfg.model)
        self.red = entry.red
        self.G0 = entry.G0
        n = self.n = self.red.n
        cap = cfg.cap
        far_cap = Fraction(math.ceil(cap / 2) + 4)
        self.gI = make_grid("I", cfg.ac_range[0], cfg.ac_range[1], cfg.per_decade, far_cap)
        self.gII = make_grid("II", cfg.compact_min, cfg.X, cfg.per_decade, far_cap)
        self.cap = cap
        k = self.kappa = cfg.kappa

        # compact-side model on face II, minus its cone value 1/2
        xs = self.gII.u
        cone = self.red.cone()
        m2 = ModelSolution(cone, 0.0, k)
        s = self.gII.series({(j, 0): n * k**j / (math.factorial(j) * (j + n)) for j in range(1, int(far_cap) + 1)})
        head = (_binomial_series(Fraction(1, n), s) - 1.0) * 0.5
        p2 = m2.p(xs)
        self.p2m = FaceFunction(self.gII, p2 - LD(0.5), xs * m2.q(xs), head)
        self.T2 = FaceFunction(
            self.gII, np.exp(LD(k) * xs), LD(k) * xs * np.exp(LD(k) * xs),
            self.gII.series({(j, 0): k**j / math.factorial(j) for j in range(int(far_cap) + 1)}),
        )

        # AC model on face I, minus 1/2, and its exact p + x p'
        xt = self.gI.u
        m1 = ModelSolution(self.red, self.G0, 0.0)
        tail_s = self.gI.series({(n, 0): 2.0**n * self.G0}) if self.G0 else self.gI.series()
        tail = (_binomial_series(Fraction(1, n), tail_s) - 1.0) * 0.5
        self.dp1 = FaceFunction(self.gI, m1.dp(xt), xt * m1.q(xt), tail)
        self.p1 = self.dp1 + 0.5
        self.sigma1 = FaceFunction(self.gI, self.ac_sigma(xt), None, (self.p1 + self.p1.b()).far)

        a, b = self.chi_window
        chi, dchi, _ = cutoff_derivatives(np.log(xt.astype(float)), math.log(a), math.log(b))
        self.chi = FaceFunction(self.gI, chi, dchi, self.gI.series({(0, 0): 1.0}))
        xchi = FaceFunction.monomial(self.gI, 1) * self.chi
        terms, power = {}, FaceFunction.constant(self.gI, 1.0)
        for j in range(int(cap / 2) + 1):
            terms[(2 * j, 0)] = power * (k**j / math.factorial(j))
            power = power * xchi
        self.T1 = EpsSeries(terms, cap)

        # flux normalization: int_0^X T w, with the switched-off density near the AC tip
        self.I_X = LD(volume_integral(cone, np.array([cfg.X], dtype=LD), k)[0])
        self.I_shift = {}
        w = LD(n) / LD(self.red.kappa0)
        for j in range(1, int(cap / 2) + 2):
            f = xt ** (j + n - 1) * (1 - LD(1) * chi**j)
            val = float(cumulative(self.gI, f * xt)[-1]) * k**j / math.factorial(j) * float(w)
            self.I_shift[2 * (n + j)] = val
        self.I_eps = EpsSeries({(0, 0): self.I_X}, cap) + EpsSeries(
            {(d, 0): -LD(v) for d, v in self.I_shift.items()}, cap)

        self.comps: Dict[str, EpsSeries] = {"I": EpsSeries({}, cap), "II": EpsSeries({}, cap)}
        half = (Fraction(0), 0)
        self.pI = EpsSeries({half: FaceFunction.constant(self.gI, 0.5)}, cap)
        self.pII = EpsSeries({half: FaceFunction.constant(self.gII, 0.5)}, cap)
        self._add("I", half, self.dp1, record=False)
        self._add("II", half, self.p2m, record=False)

    def ac_sigma(self, xt):
        """``p + xt p'`` of the AC model, i.e. ``d(xt p)/dxt``, without cancellation."""
        n = self.n
        xt = np.asarray(xt, dtype=LD)
        F = LD(self.G0) + xt**n / LD(2) ** n
        return xt ** (n - 1) / LD(2) ** n * F ** (LD(1) / n - 1)

    def ac_chi(self, xt):
        a, b = self.chi_window
        t = np.log(np.asarray(xt, dtype=float))
        chi, dchi, _ = cutoff_derivatives(t, math.log(a), math.log(b))
        return chi.astype(LD), dchi.astype(LD)

    # bookkeeping
    def _add(self, face, key, f: FaceFunction, record=True):
        if record:
            self.comps[face].add_term(key, f)
        own, other = (self.pI, self.pII) if face == "I" else (self.pII, self.pI)
        own.add_term(key, f)
        target = self.gII if face == "I" else self.gI
        for k2, f2 in transfer(f, key, target, self.cap, self.cfg.prune_tol).items():
            if k2[0] < 0 or (k2[0] == 0 and k2[1] > 0):
                raise MASolverError(f"transfer from face {face} produced a term of order {k2}")
            other.add_term(k2, f2 if face == "I" else f2 * self.chi)

    def exp_c(self) -> EpsSeries:
        """``e^c`` from the flux identity at ``X`` as a scalar eps series."""
        pX = self.pII.map(lambda f: f.vals[-1])
        G = pX.power(self.n) * LD(self.cfg.X) ** self.n
        if self.G0:
            G = G + EpsSeries({(2 * self.n, 0): -LD(self.G0)}, self.cap)
        return G * self.I_eps.reciprocal()

    def residual(self, face: str) -> EpsSeries:
        """``R = T e^c / D - 1`` expanded at one face."""
        p = self.pI if face == "I" else self.pII
        S = p + p.map(lambda f: f.b())
        if face == "I":
            S.terms[(Fraction(0), 0)] = self.sigma1
        D = p.power(self.n - 1) * S * LD(2) ** self.n
        T = self.T1 if face == "I" else EpsSeries({(0, 0): self.T2}, self.cap)
        R = T * self.exp_c() * D.reciprocal() - 1.0
        return R.pruned(self.cfg.prune_tol, self.composite_weight)

    @staticmethod
    def composite_weight(key, f: FaceFunction):
        """Size of ``eps^d f`` on the composite region, relative to ``eps^d``.

        The region is ``xt <= 1/eps^2`` on the AC face and ``x >= eps^2`` on
        the compact face, so ``f`` is weighed by ``xt^(-d/2)`` beyond
        ``xt = 1`` and by ``x^(d/2)`` below ``x = 1``.
        """
        u = f.grid.u
        half = LD(float(key[0]) / 2)
        if f.grid.face == "I":
            return np.minimum(LD(1), 1 / u) ** half
        return np.minimum(LD(1), u) ** half

    # face solves
    def solve_I(self, s: FaceFunction) -> Tuple[FaceFunction, dict]:
        """``eta`` with ``L_AC eta = s`` and flux unchanged at the AC tip."""
        g, n = self.gI, self.n
        u = g.u
        M = cumulative(g, s.vals * u**n) + s.vals[0] * u[0] ** n / n
        tail = integrate_tail(s.far * g.series({(-(n - 1), 0): 1.0}))
        A = FaceFunction(g, u, None, tail).far_eval(u)
        sel = (u >= 1e2) & (u <= 1e3)
        diff = (M - A)[sel]
        C = float(np.median(diff))
        spread = float(np.max(np.abs(diff - C)) / max(1.0, abs(C)))
        inv = (self.p1 ** (n - 1) * (2.0**n)).reciprocal()
        far = (tail + C) * g.series({(n, 0): 1.0}) * inv.far
        eta_vals = M / (LD(2) ** n * u**n * self.p1.vals ** (n - 1))
        # n + (n-1) b p / p, written through the exact p + b p to avoid cancellation at the AC tip
        beta = s.vals * inv.vals - (1 + (n - 1) * self.sigma1.vals / self.p1.vals) * eta_vals
        return FaceFunction(g, eta_vals, beta, far), {"tail_constant": C, "tail_spread": spread}

    def solve_II(self, key, s: FaceFunction) -> Tuple[FaceFunction, dict]:
        """``eta`` with ``L_II eta = T s``, vanishing flux at 0 and (by the moment condition) at ``X``."""
        g, n = self.gII, self.n
        u = g.u
        Ts = self.T2 * s
        integrand_far = Ts.far * g.series({(n - 1, 0): 1.0})
        lo = integrand_far.inf()
        if lo is not None and lo[0] <= -1:
            raise WeightWindowError(
                f"eps^{key[0]} coefficient behaves like x^{lo[0] - n + 1} at the cone tip: outside the solvable window")
        head = integrate_head(integrand_far)
        Mh = FaceFunction(g, u, None, head).far_eval(u[:1])[0]
        M = cumulative(g, Ts.vals * u**n) + Mh
        scale = float(cumulative(g, np.abs(Ts.vals) * u**n)[-1]) + abs(float(Mh))
        ratio = abs(float(M[-1])) / scale if scale > 0 else 0.0
        if ratio > self.cfg.moment_tol:
            raise MomentConditionError(key, ratio)
        p2 = self.pII[(0, 0)]
        inv = (p2 ** (n - 1) * (2.0**n)).reciprocal()
        far = head * g.series({(-n, 0): 1.0}) * inv.far
        eta_vals = M / (LD(2) ** n * u**n * p2.vals ** (n - 1))
        beta = Ts.vals * inv.vals - (n + (n - 1) * p2.bvals / p2.vals) * eta_vals
        return FaceFunction(g, eta_vals, beta, far), {"moment": ratio}

    # composite evaluation
    def nodes(self, eps: float) -> np.ndarray:
        """Integer log-grid indices covering ``[ac_range[0] eps^2, X]``."""
        h = self.gII.h
        t = math.log(self.cfg.ac_range[0] * eps * eps) / h
        # off-grid eps: first node strictly inside the AC grid
        lo = round(t) if abs(t - round(t)) < 1e-6 else math.ceil(t)
        return np.arange(lo, 1)

    def _shift(self, eps: float):
        s = 2 * math.log(eps) / self.gII.h
        return int(round(s)) if abs(s - round(s)) < 1e-6 else None

    def eps_ld(self, eps: float) -> LD:
        """``eps`` in long double, snapped to the grid when the faces are aligned."""
        shift = self._shift(eps)
        return np.exp(LD(shift) * LD(self.gII.h) / 2) if shift is not None else LD(eps)

    def _sample(self, f: FaceFunction, idx, eps, use_b=False):
        if f.grid.face == "I":
            shift = self._shift(eps)
            if shift is not None:
                return sample(f, u_index=idx - shift, use_b=use_b)
            return sample(f, t=idx * self.gII.h - 2 * math.log(eps), use_b=use_b)
        return sample(f, u_index=idx, use_b=use_b)

    def composite(self, eps: float, with_corrections: bool = True):
        """``(x, p, p + x p')`` of the reference plus corrections, in long double."""
        idx = self.nodes(eps)
        x = np.exp(idx.astype(LD) * LD(self.gII.h))
        e = self.eps_ld(eps)
        shift = self._shift(eps)
        xt = np.exp((idx - shift).astype(LD) * LD(self.gII.h)) if shift is not None else x / e**2
        chi, dchi = self.ac_chi(xt)
        on = chi > 0
        L = np.log(e)

        def compact(f, use_b=False):
            out = np.zeros(x.shape, dtype=LD)
            out[on] = self._sample(f, idx[on], eps, use_b)
            return out

        v2, b2 = compact(self.p2m), compact(self.p2m, True)
        p = LD(0.5) + self._sample(self.dp1, idx, eps) + chi * v2
        sig = self.ac_sigma(xt) + chi * (v2 + b2) + dchi * v2
        if with_corrections:
            for (d, j), f in self.comps["I"].items():
                w = e ** LD(float(d)) * L**j
                v = self._sample(f, idx, eps)
                p += w * v
                sig += w * (v + self._sample(f, idx, eps, True))
            for (d, j), f in self.comps["II"].items():
                w = e ** LD(float(d)) * L**j
                v, bv = compact(f), compact(f, True)
                p += w * chi * v
                sig += w * (chi * (v + bv) + dchi * v)
        return x, p, sig

    def flux_normalization(self, eps: float) -> LD:
        e = self.eps_ld(eps)
        return self.I_X - sum(LD(v) * e**d for d, v in self.I_shift.items())

    def target(self, x, eps: float):
        chi, _ = self.ac_chi(np.asarray(x, dtype=LD) / self.eps_ld(eps) ** 2)
        return np.exp(LD(self.kappa) * x * chi)

    def error_profile(self, eps: float, with_corrections: bool = True):
        """``g = (T e^c - D[P + u]) / D[P]`` at the composite nodes."""
        n = self.n
        x, p, sig = self.composite(eps, with_corrections)
        _, p0, sig0 = self.composite(eps, False) if with_corrections else (x, p, sig)
        ec = (LD(self.cfg.X) ** n * p[-1] ** n - LD(self.G0) * self.eps_ld(eps) ** (2 * n)) / self.flux_normalization(eps)
        two_n = LD(2) ** n
        g = (self.target(x, eps) * ec - two_n * p ** (n - 1) * sig) / (two_n * p0 ** (n - 1) * sig0)
        return x, g


# ---------------------------------------------------------------------------
# elimination passes


@dataclass
class LedgerEntry:
    face: str
    order: Fraction
    log_depth: int
    modes: int
    moment: Optional[float] = None
    other_face_order: Optional[float] = None

    def to_json(self):
        return {"face": self.face, "order": str(self.order), "log_depth": self.log_depth, "modes": self.modes,
                "moment": self.moment, "other_face_order": self.other_face_order}


def _order_value(series: EpsSeries) -> float:
    low = series.lowest()
    return float("inf") if low is None else float(low[0])


def _window_bounds(window):
    return tuple(Fraction(w).limit_denominator(1000) if isinstance(w, float) else as_fraction(w) for w in window)


def _eliminate(state: TwoFaceState, face: str, window, target) -> List[LedgerEntry]:
    """Solve one order at a time, lowest first, re-expanding the error in between.

    Re-expansion matters even for linear terms: a correction moves ``p(X)``
    and with it the global constant ``e^c`` at higher orders.
    """
    lo, hi = _window_bounds(window)
    out: List[LedgerEntry] = []
    other = "I" if face == "II" else "II"
    done = set()
    while True:
        R = state.residual(face)
        todo = [k for k in R.keys() if lo < k[0] < hi and (target is None or precedes(k, target))]
        if not todo:
            break
        key = todo[0]
        if key in done:
            raise MASolverError(f"face {face} term {key} survived its own solve")
        done.add(key)
        if face == "II":
            eta, info = state.solve_II(key, R[key])
        else:
            eta, info = state.solve_I(R[key])
        state._add(face, key, eta)
        out.append(LedgerEntry(face, key[0], key[1], 1, moment=info.get("moment")))
    if out:
        other_order = _order_value(state.residual(other))
        for e in out:
            e.other_face_order = other_order
    return out


def eliminate_face_II(state: TwoFaceState, window=(0, None), target=None) -> List[LedgerEntry]:
    """Remove the compact-face error terms with order in the open ``window``.

    Each coefficient is checked for the moment condition before it is
    integrated; the corrections are added to ``state``.
    """
    if window[1] is None:
        window = (window[0], 2 * state.n)
    return _eliminate(state, "II", window, target)


def eliminate_face_I(state: TwoFaceState, window=(0, None), target=None) -> List[LedgerEntry]:
    """Remove the AC-face error terms with order in the open ``window``."""
    if window[1] is None:
        window = (window[0], 2 * state.n - 2)
    return _eliminate(state, "I", window, target)


@dataclass
class FormalSolution:
    cfg: FormalConfig
    state: TwoFaceState
    ledger: List[LedgerEntry]
    eps: np.ndarray = field(default_factory=lambda: np.array([]))
    max_residual: np.ndarray = field(default_factory=lambda: np.array([]))
    slope: float = float("nan")
    r2: float = float("nan")
    final_orders: Tuple[float, float] = (float("inf"), float("inf"))

    @property
    def max_moment(self) -> float:
        return max((e.moment for e in self.ledger if e.moment is not None), default=0.0)

    def support(self, face: str) -> List[Tuple[Fraction, int]]:
        return self.state.comps[face].keys()

    def residual_profile(self, eps: float) -> RadialProfile:
        x, g = self.state.error_profile(eps)
        return RadialProfile(np.log(x.astype(float)), g.astype(float))

    def support_audit(self) -> dict:
        """Compare the solved orders with the index-set prediction.

        Orders are counted in ``eps^2``: the AC-face error starts at
        ``eps^2`` and the compact-face error at ``eps^(2n)``; their extended
        union bounds every (order, log) pair that may appear.  The log-free
        orders below ``N`` must match the closures exactly.
        """
        n, N = self.cfg.n, self.cfg.order
        cap = self.cfg.cap / 2
        ac = make_index_set([(1, 0)], cap)
        compact = make_index_set([(n, 0)], cap)
        bound = extended_union(ac, compact)
        out = {"within_bound": True, "exact": True, "computed": {}, "predicted": {}}
        for face, own in (("I", ac), ("II", compact)):
            got = self.support(face)
            out["computed"][face] = [(str(d), j) for d, j in got]
            if any((d / 2, j) not in bound for d, j in got):
                out["within_bound"] = False
            pred = sorted(2 * z for z, k in own.terms if k == 0 and 2 * z < N)
            out["predicted"][face] = [str(d) for d in pred]
            if sorted(d for d, j in got if j == 0) != pred:
                out["exact"] = False
        return out

    def evaluate(self, eps_grid: Sequence[float]):
        eps_grid = np.asarray(sorted(eps_grid), dtype=float)
        res = np.array([float(np.max(np.abs(self.state.error_profile(e)[1]))) for e in eps_grid])
        self.eps, self.max_residual = eps_grid, res
        if eps_grid.size >= 2:
            self.slope, _, self.r2 = loglog_fit(eps_grid, res)
        return self

    def to_json(self) -> dict:
        return {
            "config": self.cfg.to_json(),
            "config_hash": self.cfg.digest(),
            "ledger": [e.to_json() for e in self.ledger],
            "support": {f: [[str(d), j] for d, j in self.support(f)] for f in ("I", "II")},
            "eps": self.eps.tolist(),
            "max_residual": self.max_residual.tolist(),
            "slope": self.slope,
            "r2": self.r2,
            "max_moment": self.max_moment,
            "support_audit": self.support_audit(),
        }


def formal_solve(cfg: FormalConfig, eps_grid: Sequence[float] = ()) -> FormalSolution:
    """Remove every error term preceding ``eps^N`` on both faces.

    Passes alternate: compact face on ``(o, o + 2n)``, then AC face on
    ``(o, o + 2n - 2)``, with ``o`` advancing by ``2n - 2 - beta`` per round.
    The error is re-expanded from the full nonlinear density after every
    pass.
    """
    state = TwoFaceState(cfg)
    n = cfg.n
    target = (Fraction(cfg.order), 0)
    ledger: List[LedgerEntry] = []
    o = Fraction(0)
    step = Fraction(2 * n - 2) - Fraction(cfg.beta).limit_denominator(1000)

    def pending():
        return [k for f in ("I", "II") for k in state.residual(f).keys() if precedes(k, target)]

    for _ in range(cfg.max_rounds):
        ledger += eliminate_face_II(state, (o, o + 2 * n), target)
        ledger += eliminate_face_I(state, (o, o + 2 * n - 2), target)
        if not pending():
            break
        o += step
    else:
        raise MASolverError(f"terms preceding eps^{cfg.order} remain after {cfg.max_rounds} rounds: {pending()}")
    sol = FormalSolution(cfg, state, ledger)
    sol.final_orders = (_order_value(state.residual("I")), _order_value(state.residual("II")))
    if len(eps_grid):
        sol.evaluate(eps_grid)
    return sol


# ---------------------------------------------------------------------------
# exact solve per eps


@dataclass
class NewtonResult:
    eps: float
    x: np.ndarray
    p: np.ndarray
    phi: np.ndarray  # mean-zero potential correction relative to the start
    norm: float
    iterations: int
    history: List[float]
    residual: float
    ec: float

    def to_json(self) -> dict:
        return {"eps": self.eps, "norm": self.norm, "iterations": self.iterations,
                "history": self.history, "residual": self.residual}


def _flux_data(state: TwoFaceState, eps: float, x):
    """Target flux ``F = G0 eps^(2n) + e^c J(x)``, with ``J = (n/kappa0) int_0^x T t^(n-1)``.

    ``e^c`` is fixed by the glued reference at ``X``, so every start shares
    the same equation.
    """
    n = state.n
    cone = state.red.cone()
    T = state.target(x, eps)
    free = volume_integral(cone, x, state.kappa)
    # the density is switched off near the AC tip; remove the difference
    deficit = (np.exp(LD(state.kappa) * x) - T) * x**n
    J = free - LD(n) / LD(state.red.kappa0) * cumulative(state.gII, deficit)
    _, p0, _ = state.composite(eps, False)
    tip = LD(state.G0) * state.eps_ld(eps) ** (2 * n)
    ec = (LD(state.cfg.X) ** n * p0[-1] ** n - tip) / J[-1]
    return tip + ec * J, ec, T


def _weighted_norm(x, eps, phi, bphi, b2phi, nu):
    rho1 = np.sqrt(np.asarray(x, dtype=float) + eps * eps)
    w = rho1 ** (-nu)
    return float(np.max(w * (np.abs(phi) + np.abs(bphi) + np.abs(b2phi))))


def newton_exact(state: TwoFaceState, eps: float, start: str = "formal", tol: float = 1e-17,
                 max_iter: int = 50, nu: float = -2.0) -> NewtonResult:
    """Solve the discretized equation exactly at one ``eps``.

    In flux form, once the tip flux and ``c`` are fixed, the discretized
    equation is ``x_i^n p_i^n = F_i`` at every node; damped Newton runs on
    all nodes at once, halving steps that would make ``p`` nonpositive.

    ``start`` is ``"formal"`` (reference plus formal corrections),
    ``"glued"`` (reference alone) or ``"exact"``.  The returned correction
    ``phi = int (p - p_start) dx`` is normalized to zero mean against the
    volume form and measured in ``sup rho1^(-nu) (|phi| + |b phi| + |b^2 phi|)``.
    """
    n = state.n
    x, p_s, sig_s = state.composite(eps, start == "formal")
    F, ec, T = _flux_data(state, eps, x)
    xn = x**n
    if start == "exact":
        p_s = F ** (LD(1) / n) / x
        sig_s = ec * T / (LD(2) ** n * p_s ** (n - 1))
    elif start not in ("formal", "glued"):
        raise MASolverError(f"unknown start {start!r}")
    if np.any(p_s <= 0) or np.any(sig_s <= 0):
        raise MASolverError("start potential is not positive on the grid")

    p = p_s.copy()
    history = []
    it = 0
    while True:
        r = xn * p**n / F - 1
        res = float(np.max(np.abs(r)))
        history.append(res)
        if res < tol:
            break
        if it >= max_iter:
            raise NewtonError("Newton did not converge", history)
        step = p * r / (n * (1 + r))
        lam = LD(1)
        while np.any(p - lam * step <= 0):
            lam /= 2
            if lam < 1e-8:
                raise NewtonError("positivity lost in line search", history)
        p_new = p - lam * step
        if it > 3 and res > 0.5 * history[-2]:
            raise NewtonError("Newton stagnated", history)
        p = p_new
        it += 1

    sig = ec * T / (LD(2) ** n * p ** (n - 1))
    dp, dsig = p - p_s, sig - sig_s
    phi = cumulative(state.gII, dp * x)
    vol = ec * T * x ** (n - 1) * x  # volume density in log x
    total = cumulative(state.gII, vol)[-1]
    phi = phi - cumulative(state.gII, phi * vol)[-1] / total
    norm = _weighted_norm(x, eps, phi.astype(float), (x * dp).astype(float), (x * dsig).astype(float), nu)
    return NewtonResult(eps, x, p, phi, norm, it, history, history[-1], float(ec))


# ---------------------------------------------------------------------------
# uniform bound probe


@dataclass
class ProbeRow:
    eps: float
    nu: float
    bound: float  # 1 / smallest weighted singular value on the mean-zero complement
    size: int


def weighted_inverse_bound(x, p, sig, n: int, eps: float, nu: float) -> float:
    """``sup |f|_nu / |Delta f|_(nu-2)`` over radial ``f`` with zero mean.

    ``Delta f = 2^n (x^n p^(n-1) f')' / (D x^(n-1))`` is discretized by finite
    volumes with zero flux at both ends (self-adjoint in ``L^2(dV)``).  The
    norms are ``L^2(dV / rho1^m)`` with weights ``rho1^(-nu)`` and
    ``rho1^(2-nu)``, ``m = 2n``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    sig = np.asarray(sig, dtype=float)
    N = x.size
    D = 2.0**n * p ** (n - 1) * sig
    edges = np.sqrt(x[1:] * x[:-1])
    cell = np.empty(N)
    cell[1:-1] = edges[1:] - edges[:-1]
    cell[0] = edges[0] - x[0]
    cell[-1] = x[-1] - edges[-1]
    dV = D * x ** (n - 1) * cell
    pm = np.sqrt(p[1:] * p[:-1])
    cond = 2.0**n * edges**n * pm ** (n - 1) / (x[1:] - x[:-1])
    K = np.zeros((N, N))
    i = np.arange(N - 1)
    K[i, i] += cond
    K[i + 1, i + 1] += cond
    K[i, i + 1] -= cond
    K[i + 1, i] -= cond
    A = -K / (D * x ** (n - 1) * cell)[:, None]
    rho1 = np.sqrt(x + eps * eps)
    mu = np.sqrt(dV / rho1 ** (2 * n))
    w1 = mu * rho1 ** (-nu)
    w2 = mu * rho1 ** (2 - nu)
    # in g = w1 f both norms are Euclidean; neighbouring entries of B differ by ~rho1^2 only
    B = (w2[:, None] * A) / w1[None, :]
    c = dV / w1
    Q = np.linalg.qr((c / np.linalg.norm(c))[:, None], mode="complete")[0][:, 1:]
    s = np.linalg.svd(B @ Q, compute_uv=False)
    return float(1.0 / s[-1])


def uniform_bound_probe(state: TwoFaceState, eps_grid: Sequence[float], nu: float,
                        per_decade: int = 30) -> List[ProbeRow]:
    """Weighted inverse-norm estimate of the family's Laplacian for each ``eps``.

    The glued reference is resampled on a coarse log grid (``per_decade``
    points per decade) between the AC tip region and ``X``.
    """
    n = state.n
    stride = max(1, state.cfg.per_decade // per_decade)
    rows = []
    for eps in eps_grid:
        x, p, sig = state.composite(eps, False)
        sel = slice(None, None, -stride)
        xs, ps, ss = x[sel][::-1], p[sel][::-1], sig[sel][::-1]
        rows.append(ProbeRow(float(eps), float(nu), weighted_inverse_bound(xs, ps, ss, n, float(eps), nu), xs.size))
    return rows


# ---------------------------------------------------------------------------
# outputs


@dataclass
class SweepRow:
    eps: float
    residual: float
    correction_norm: float
    iterations: int


def sweep(cfg: FormalConfig, eps_grid: Sequence[float], nu: float = -2.0, start: str = "formal",
          workers: int = 1):
    """Formal solve, then an exact solve at every ``eps``.

    The per-eps solves only read the formal state, so with ``workers > 1``
    they run on a thread pool; rows come back in eps order either way.
    """
    sol = formal_solve(cfg, eps_grid)

    def one(eps):
        return newton_exact(sol.state, float(eps), start, nu=nu)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, sol.eps))
    else:
        results = [one(e) for e in sol.eps]
    rows = [SweepRow(float(e), float(r), nr.norm, nr.iterations)
            for e, r, nr in zip(sol.eps, sol.max_residual, results)]
    return sol, rows


def write_sweep_csv(path, rows: Sequence[SweepRow]):
    with open(path, "w") as fh:
        fh.write("eps,residual,correction_norm,iterations\n")
        for r in sorted(rows, key=lambda r: r.eps):
            fh.write(f"{r.eps!r},{r.residual!r},{r.correction_norm!r},{r.iterations}\n")


def write_manifest(path, sol: FormalSolution, rows: Sequence[SweepRow] = (), extra: Optional[dict] = None):
    data = sol.to_json()
    if rows:
        eps = [r.eps for r in rows]
        norms = [r.correction_norm for r in rows]
        data["correction_norm_slope"] = loglog_fit(eps, norms)[0] if len(rows) > 1 else None
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)
