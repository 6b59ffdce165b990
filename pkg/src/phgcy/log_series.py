"""Truncated log-polyhomogeneous series on one face and on a two-face corner.

A :class:`LogSeries` stores finitely many terms ``c * rho**z * log(rho)**k``
below an exponent cap.  Coefficients come in three kinds and a series never
mixes them:

* ``scalar``  : int, Fraction or float
* ``mode``    : :class:`ModeVector`, one coefficient per link eigenmode
* ``profile`` : 1-d numpy array sampled on a shared radial grid

Scalars may multiply any kind.  Products of two mode vectors are undefined
(the link eigenfunctions do not multiply diagonally) and raise.
"""

from __future__ import annotations

import abc
import json
import math
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .index_algebra import IndexSet, as_fraction, make_index_set, order_key


class LogSeriesError(ValueError):
    pass


class ModeVector:
    """Immutable sparse vector of coefficients indexed by link-mode labels."""

    __slots__ = ("_d",)

    def __init__(self, entries: Mapping[str, object]):
        self._d = {str(k): v for k, v in entries.items() if v != 0}

    def items(self):
        return sorted(self._d.items())

    def __getitem__(self, label):
        return self._d.get(label, 0)

    def labels(self):
        return sorted(self._d)

    def __add__(self, other):
        if not isinstance(other, ModeVector):
            return NotImplemented
        keys = set(self._d) | set(other._d)
        return ModeVector({k: self[k] + other[k] for k in keys})

    def __neg__(self):
        return ModeVector({k: -v for k, v in self._d.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        if isinstance(s, ModeVector):
            raise LogSeriesError("product of two mode vectors is not defined")
        return ModeVector({k: v * s for k, v in self._d.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, ModeVector):
            return self._d == other._d
        if other == 0:
            return not self._d
        return NotImplemented

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        return hash(tuple(self.items()))

    def __bool__(self):
        return bool(self._d)

    def __repr__(self):
        return "ModeVector(" + ", ".join(f"{k}: {v}" for k, v in self.items()) + ")"


class ProfileLike(abc.ABC):
    """Marker for sampled-function coefficients (numpy arrays are registered)."""


ProfileLike.register(np.ndarray)

Coefficient = Union[int, Fraction, float, ModeVector, np.ndarray]
Key = Tuple[Fraction, int]


def coeff_kind(c) -> str:
    if isinstance(c, ModeVector):
        return "mode"
    if isinstance(c, ProfileLike):
        return "profile"
    if isinstance(c, (int, Fraction, float, np.floating, np.integer)):
        return "scalar"
    raise LogSeriesError(f"unsupported coefficient type {type(c).__name__}")


def _is_zero(c) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    if isinstance(c, ProfileLike):
        return c.is_zero()
    return c == 0


def _series_kind(coeffs: Iterable) -> str:
    kinds = {coeff_kind(c) for c in coeffs}
    if len(kinds) > 1:
        raise LogSeriesError(f"mixed coefficient kinds in one series: {sorted(kinds)}")
    return kinds.pop() if kinds else "scalar"


def _product_kind(ka, kb):
    if ka == "scalar":
        return kb
    if kb == "scalar":
        return ka
    if ka == kb == "profile":
        return "profile"
    raise LogSeriesError(f"cannot multiply {ka} by {kb} coefficients")


class LogSeries:
    """Finite sum of ``c * rho**z * log(rho)**k`` with ``z <= cap``.

    Parameters
    ----------
    terms : mapping ``(z, k) -> coefficient``
    cap : rational truncation order
    face : face identifier, used only for compatibility checks
    """

    __slots__ = ("face", "cap", "_terms", "kind")

    def __init__(self, terms: Mapping = (), cap=0, face: str = "rho"):
        self.face = face
        self.cap = as_fraction(cap)
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: Dict[Key, object] = {}
        for (z, k), c in items:
            z = as_fraction(z)
            k = int(k)
            if k < 0:
                raise LogSeriesError("negative log power")
            if z > self.cap:
                continue
            acc[(z, k)] = acc[(z, k)] + c if (z, k) in acc else c
        self._terms = {key: c for key, c in acc.items() if not _is_zero(c)}
        self.kind = _series_kind(self._terms.values())

    # construction helpers
    @classmethod
    def monomial(cls, z, k=0, c=1, cap=0, face="rho"):
        return cls({(z, k): c}, cap, face)

    @classmethod
    def constant(cls, c, cap, face="rho"):
        return cls({(0, 0): c}, cap, face)

    # access
    @property
    def terms(self) -> Dict[Key, object]:
        return dict(self._terms)

    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: order_key(kv[0]))

    def __getitem__(self, key):
        return self._terms.get((as_fraction(key[0]), int(key[1])), 0)

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def index(self) -> IndexSet:
        """Closed index set generated by the support."""
        return make_index_set(self._terms.keys(), self.cap)

    def inf(self) -> Optional[Key]:
        if not self._terms:
            return None
        return min(self._terms, key=order_key)

    def max_log(self) -> int:
        return max((k for _, k in self._terms), default=0)

    def _check(self, other: "LogSeries"):
        if not isinstance(other, LogSeries):
            raise LogSeriesError("operand is not a LogSeries")
        if self.face != other.face:
            raise LogSeriesError(f"face mismatch: {self.face} vs {other.face}")
        if self.cap != other.cap:
            raise LogSeriesError(f"cap mismatch: {self.cap} vs {other.cap}")

    def _new(self, terms):
        return LogSeries(terms, self.cap, self.face)

    # ring operations
    def __add__(self, other):
        if not isinstance(other, LogSeries):
            return self + LogSeries.constant(other, self.cap, self.face)
        self._check(other)
        if self._terms and other._terms and self.kind != other.kind:
            raise LogSeriesError(f"mixed coefficient kinds: {self.kind} + {other.kind}")
        out = dict(self._terms)
        for key, c in other._terms.items():
            out[key] = out[key] + c if key in out else c
        return self._new(out)

    __radd__ = __add__

    def __neg__(self):
        return self._new({key: -c for key, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, LogSeries):
            return self._new({key: c * other for key, c in self._terms.items()})
        self._check(other)
        _product_kind(self.kind, other.kind)
        out: Dict[Key, object] = {}
        for (za, ka), ca in self._terms.items():
            for (zb, kb), cb in other._terms.items():
                z = za + zb
                if z > self.cap:
                    continue
                key = (z, ka + kb)
                p = ca * cb
                out[key] = out[key] + p if key in out else p
        return self._new(out)

    def __rmul__(self, other):
        return self._new({key: other * c for key, c in self._terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise LogSeriesError("negative powers are not supported")
        out = LogSeries.constant(1, self.cap, self.face)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, LogSeries):
            return NotImplemented
        if self.face != other.face or self.cap != other.cap:
            return False
        if self._terms.keys() != other._terms.keys():
            return False
        return all(_coeff_equal(self._terms[k], other._terms[k]) for k in self._terms)

    def __hash__(self):
        return hash((self.face, self.cap, frozenset(self._terms)))

    def truncate(self, cap) -> "LogSeries":
        cap = as_fraction(cap)
        return LogSeries({k: c for k, c in self._terms.items() if k[0] <= cap}, min(cap, self.cap), self.face)

    def with_cap(self, cap) -> "LogSeries":
        """Same terms under a new cap (terms above it are dropped)."""
        return LogSeries(self._terms, cap, self.face)

    def map_coefficients(self, fn: Callable) -> "LogSeries":
        return self._new({key: fn(c) for key, c in self._terms.items()})

    # calculus
    def b_derivative(self) -> "LogSeries":
        return b_derivative(self)

    def evaluate(self, rho):
        return evaluate(self, rho)

    def __repr__(self):
        return f"LogSeries(face={self.face!r}, cap={self.cap}, terms={len(self)})"

    def __str__(self):
        return pretty(self)

    def to_json(self) -> dict:
        return series_to_json(self)


def _coeff_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def add(a: LogSeries, b: LogSeries) -> LogSeries:
    return a + b


def mul(a: LogSeries, b: LogSeries) -> LogSeries:
    return a * b


def b_derivative(s: LogSeries) -> LogSeries:
    """Apply ``rho d/drho`` termwise.

    ``rho**z log(rho)**k`` maps to ``z rho**z log**k + k rho**z log**(k-1)``.
    """
    out: Dict[Key, object] = {}
    for (z, k), c in s._terms.items():
        for key, factor in (((z, k), z), ((z, k - 1), k)):
            if factor == 0 or key[1] < 0:
                continue
            p = c * factor
            out[key] = out[key] + p if key in out else p
    return s._new(out)


def compose_analytic(taylor: Union[Sequence, Callable[[int], object]], s: LogSeries) -> LogSeries:
    """Substitute ``s`` into the power series ``sum_j f_j y**j``.

    ``taylor`` is a coefficient list or a callable ``j -> f_j``.  Powers of
    ``s`` beyond the cap vanish, so the sum is finite.

    Raises
    ------
    LogSeriesError
        if the smallest exponent of ``s`` is not positive.
    """
    get = taylor if callable(taylor) else (lambda j: taylor[j] if j < len(taylor) else 0)
    lo = s.inf()
    if lo is not None and lo[0] <= 0:
        raise LogSeriesError(f"composition needs a positive leading exponent, got {lo[0]}")
    out = LogSeries.constant(get(0), s.cap, s.face)
    if lo is None:
        return out
    jmax = math.floor(s.cap / lo[0]) if lo[0] > 0 else 0
    power = LogSeries.constant(1, s.cap, s.face)
    for j in range(1, jmax + 1):
        power = power * s
        if power.is_zero():
            break
        fj = get(j)
        if fj != 0:
            out = out + power * fj
    return out


def exp_series(s: LogSeries) -> LogSeries:
    return compose_analytic(lambda j: Fraction(1, factorial(j)), s)


def log1p_series(s: LogSeries) -> LogSeries:
    return compose_analytic(lambda j: Fraction((-1) ** (j + 1), j) if j else 0, s)


def inv1p_series(s: LogSeries) -> LogSeries:
    """Expansion of ``1 / (1 + s)``."""
    return compose_analytic(lambda j: (-1) ** j, s)


def evaluate(s: LogSeries, rho):
    """Numeric value of the truncated sum at ``rho > 0``.

    The omitted tail is ``O(rho**cap * |log rho|**K)`` with ``K`` the
    largest log power that can appear at the cap.
    """
    rho = np.asarray(rho, dtype=float)
    L = np.log(rho)
    total = 0.0
    for (z, k), c in s.sorted_items():
        cc = float(c) if coeff_kind(c) == "scalar" else c
        total = total + cc * rho ** float(z) * L**k
    return total


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    return repr(x)


def pretty(s: LogSeries) -> str:
    """One line per term, ``c * rho^z * log(rho)^k``, in index order."""
    lines = []
    for (z, k), c in s.sorted_items():
        if isinstance(c, np.ndarray):
            cs = f"<profile[{c.size}]>"
        elif isinstance(c, ModeVector):
            cs = "{" + ", ".join(f"{lab}: {_fmt(v)}" for lab, v in c.items()) + "}"
        else:
            cs = _fmt(c)
        lines.append(f"{cs} * rho^{_fmt(z)} * log(rho)^{k}")
    return "\n".join(lines)


def _enc(c):
    if isinstance(c, Fraction):
        return {"q": [c.numerator, c.denominator]}
    if isinstance(c, (int, np.integer)):
        return {"q": [int(c), 1]}
    if isinstance(c, (float, np.floating)):
        return {"f": float(c)}
    if isinstance(c, ModeVector):
        return {"modes": {lab: _enc(v) for lab, v in c.items()}}
    if isinstance(c, np.ndarray):
        return {"profile": [float(v) for v in c]}
    raise LogSeriesError(f"cannot encode coefficient {c!r}")


def _dec(d):
    if "q" in d:
        return Fraction(int(d["q"][0]), int(d["q"][1]))
    if "f" in d:
        return float(d["f"])
    if "modes" in d:
        return ModeVector({k: _dec(v) for k, v in d["modes"].items()})
    if "profile" in d:
        return np.asarray(d["profile"], dtype=float)
    raise LogSeriesError(f"unknown coefficient encoding {d!r}")


def series_to_json(s: LogSeries) -> dict:
    return {
        "face": s.face,
        "cap": [s.cap.numerator, s.cap.denominator],
        "terms": [[z.numerator, z.denominator, k, _enc(c)] for (z, k), c in s.sorted_items()],
    }


def series_from_json(data) -> LogSeries:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        terms = {(Fraction(int(t[0]), int(t[1])), int(t[2])): _dec(t[3]) for t in data["terms"]}
        return LogSeries(terms, as_fraction(data["cap"]), data.get("face", "rho"))
    except (KeyError, TypeError, IndexError) as exc:
        raise LogSeriesError(f"malformed series: {exc}") from exc


# ---------------------------------------------------------------------------
# two-face corner series

BiKey = Tuple[Fraction, int, Fraction, int]


class BiSeries:
    """Finite sum of ``c * rho1**z1 log(rho1)**k1 * rho2**z2 log(rho2)**k2``.

    The two defining functions are tied by ``eps = rho1 * rho2``.  Terms are
    kept in lexicographic ``(z1, z2)`` order when listed.
    """

    __slots__ = ("_terms", "caps")

    def __init__(self, terms: Mapping = (), caps=(0, 0)):
        self.caps = (as_fraction(caps[0]), as_fraction(caps[1]))
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: Dict[BiKey, object] = {}
        for (z1, k1, z2, k2), c in items:
            key = (as_fraction(z1), int(k1), as_fraction(z2), int(k2))
            if key[0] > self.caps[0] or key[2] > self.caps[1]:
                continue
            acc[key] = acc[key] + c if key in acc else c
        self._terms = {k: c for k, c in acc.items() if not _is_zero(c)}
        _series_kind(self._terms.values())

    @property
    def terms(self):
        return dict(self._terms)

    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: (kv[0][0], kv[0][2], -kv[0][1], -kv[0][3]))

    def __add__(self, other: "BiSeries"):
        if self.caps != other.caps:
            raise LogSeriesError("cap mismatch")
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out[k] + c if k in out else c
        return BiSeries(out, self.caps)

    def __eq__(self, other):
        if not isinstance(other, BiSeries):
            return NotImplemented
        return self.caps == other.caps and self._terms.keys() == other._terms.keys() and all(
            _coeff_equal(self._terms[k], other._terms[k]) for k in self._terms
        )

    def marginal_index(self, face: int) -> IndexSet:
        i = 0 if face == 1 else 2
        return make_index_set({(k[i], k[i + 1]) for k in self._terms}, self.caps[0 if face == 1 else 1])

    def evaluate(self, rho1, rho2):
        L1, L2 = np.log(rho1), np.log(rho2)
        total = 0.0
        for (z1, k1, z2, k2), c in self._terms.items():
            total = total + float(c) * rho1 ** float(z1) * L1**k1 * rho2 ** float(z2) * L2**k2
        return total


EpsKey = Tuple[Fraction, int, Fraction, int]


def reindex_epsilon(t: BiSeries, direction: str = "toward-B_I") -> Dict[EpsKey, object]:
    """Rewrite a corner series in ``eps`` and one face variable.

    ``direction="toward-B_I"`` eliminates ``rho2`` via
    ``rho2 = eps / rho1``, so ``rho2**d log(rho2)**i`` becomes
    ``eps**d rho1**(-d) (log eps - log rho1)**i`` expanded binomially.
    ``"toward-B_II"`` eliminates ``rho1`` symmetrically.

    Returns
    -------
    dict
        ``(delta, j, z, k) -> coefficient`` for terms
        ``eps**delta log(eps)**j * rho**z log(rho)**k`` where ``rho`` is the
        surviving face variable.
    """
    if direction not in ("toward-B_I", "toward-B_II"):
        raise LogSeriesError(f"unknown direction {direction!r}")
    out: Dict[EpsKey, object] = {}
    for (z1, k1, z2, k2), c in t._terms.items():
        if direction == "toward-B_I":
            keep_z, keep_k, d, i = z1, k1, z2, k2
        else:
            keep_z, keep_k, d, i = z2, k2, z1, k1
        for l in range(i + 1):
            coef = c * comb(i, l) * (-1) ** l
            key = (d, i - l, keep_z - d, keep_k + l)
            out[key] = out[key] + coef if key in out else coef
    return {k: c for k, c in out.items() if not _is_zero(c)}


def from_epsilon(terms: Mapping[EpsKey, object], caps, direction: str = "toward-B_I") -> BiSeries:
    """Inverse of :func:`reindex_epsilon`: substitute ``eps = rho1 * rho2`` back."""
    if direction not in ("toward-B_I", "toward-B_II"):
        raise LogSeriesError(f"unknown direction {direction!r}")
    out: Dict[BiKey, object] = {}
    for (d, j, z, k), c in terms.items():
        # eps**d log(eps)**j rho**z log(rho)**k with log eps = log rho + log other
        for l in range(j + 1):
            coef = c * comb(j, l)
            if direction == "toward-B_I":
                key = (z + d, k + l, d, j - l)
            else:
                key = (d, j - l, z + d, k + l)
            out[key] = out[key] + coef if key in out else coef
    return BiSeries(out, caps)
