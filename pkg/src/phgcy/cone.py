"""Link spectra, indicial roots and mode-by-mode solution of ``Delta u = f`` on a cone.

Convention: ``Delta = d_r^2 + (m-1)/r d_r + r^-2 Delta_L`` with
``Delta_L phi = -lambda phi`` and ``lambda >= 0``.  On a term
``r^a log(r)^k phi`` this gives, at order ``r^(a-2)``::

    P(a) log^k + k P'(a) log^(k-1) + k(k-1) log^(k-2),   P(a) = a(a+m-2) - lambda
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .index_algebra import as_fraction
from .log_series import LogSeries, ModeVector


class ConeError(ValueError):
    pass


class IndicialWeightError(ConeError):
    """A weight or forcing configuration sits exactly on an indicial root."""


def _exact_sqrt(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


@dataclass(frozen=True)
class QuadraticRoot:
    """Irrational root of ``a(a+m-2) = lam``, kept with its defining data.

    Comparisons against rationals go through the exact quadratic relation;
    ``value`` is only a numeric surrogate for evaluation and sorting.
    """

    lam: Fraction
    m: int
    sign: int

    @property
    def value(self) -> float:
        h = (self.m - 2) / 2
        return -h + self.sign * math.sqrt(h * h + float(self.lam))

    def surrogate(self, denom: int = 10**15) -> Fraction:
        return Fraction(self.value).limit_denominator(denom)

    def __float__(self):
        return self.value

    def __eq__(self, other):
        if isinstance(other, QuadraticRoot):
            return (self.lam, self.m, self.sign) == (other.lam, other.m, other.sign)
        if isinstance(other, (int, Fraction)):
            # a rational is never equal to an irrational root
            return False
        return NotImplemented

    def __hash__(self):
        return hash((self.lam, self.m, self.sign))

    def __lt__(self, other):
        return self.value < float(other)

    def __gt__(self, other):
        return self.value > float(other)

    def __le__(self, other):
        return self.value <= float(other)

    def __ge__(self, other):
        return self.value >= float(other)

    def __repr__(self):
        s = "+" if self.sign > 0 else "-"
        return f"QuadraticRoot({s}, lam={self.lam}, m={self.m} ~ {self.value:.15g})"


Root = Union[Fraction, QuadraticRoot]


def indicial_roots(lam, m: int) -> Tuple[Root, Root]:
    """The two solutions ``(a_plus, a_minus)`` of ``a(a + m - 2) = lam``.

    Examples
    --------
    >>> indicial_roots(5, 6)
    (Fraction(1, 1), Fraction(-5, 1))
    """
    if int(m) != m or m < 3:
        raise ConeError(f"cone dimension must be an integer >= 3, got {m}")
    lam = as_fraction(lam)
    if lam < 0:
        raise ConeError(f"eigenvalue must be nonnegative, got {lam}")
    h = Fraction(m - 2, 2)
    s = _exact_sqrt(h * h + lam)
    if s is not None:
        return (-h + s, -h - s)
    return (QuadraticRoot(lam, int(m), 1), QuadraticRoot(lam, int(m), -1))


def is_indicial_root(a, lam, m: int) -> bool:
    """Exact test ``a(a+m-2) == lam`` for rational ``a``."""
    if isinstance(a, QuadraticRoot):
        return a.lam == as_fraction(lam) and a.m == m
    a = as_fraction(a)
    return a * (a + m - 2) == as_fraction(lam)


def cone_laplacian_term(a, k: int, lam, m: int) -> Tuple[Fraction, Fraction, Fraction]:
    """Coefficients of ``log^k, log^(k-1), log^(k-2)`` in ``Delta(r^a log^k phi)`` at ``r^(a-2)``."""
    if m < 3:
        raise ConeError(f"cone dimension must be >= 3, got {m}")
    a, lam = as_fraction(a), as_fraction(lam)
    return (a * (a + m - 2) - lam, k * (2 * a + m - 2), Fraction(k * (k - 1)))


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Mode:
    label: str
    lam: Fraction
    mult: int = 1


@dataclass(frozen=True)
class LinkSpectrum:
    m: int
    modes: Tuple[Mode, ...]

    def __post_init__(self):
        if self.m < 3:
            raise ConeError(f"cone dimension must be >= 3, got {self.m}")
        lams = [md.lam for md in self.modes]
        if any(l < 0 for l in lams):
            raise ConeError("eigenvalues must be nonnegative")
        if 0 not in lams:
            raise ConeError("spectrum must contain the constant mode (lambda = 0)")
        if lams != sorted(lams):
            raise ConeError("modes must be sorted by eigenvalue")
        if len({md.label for md in self.modes}) != len(self.modes):
            raise ConeError("duplicate mode labels")

    def lam(self, label: str) -> Fraction:
        for md in self.modes:
            if md.label == label:
                return md.lam
        raise ConeError(f"unknown mode label {label!r}")

    def labels(self) -> List[str]:
        return [md.label for md in self.modes]

    def root_table(self) -> Dict[str, Tuple[Root, Root]]:
        return {md.label: indicial_roots(md.lam, self.m) for md in self.modes}

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "modes": [
                {"label": md.label, "lambda": [md.lam.numerator, md.lam.denominator], "mult": md.mult}
                for md in self.modes
            ],
        }


def round_sphere_spectrum(m: int, jmax: int) -> LinkSpectrum:
    """Spectrum of the round unit sphere ``S^(m-1)``: ``lambda_j = j(j+m-2)``.

    Multiplicities are the dimensions of degree-``j`` harmonic polynomials in ``m`` variables.
    """
    modes = []
    for j in range(jmax + 1):
        mult = math.comb(j + m - 1, m - 1) - (math.comb(j + m - 3, m - 1) if j >= 2 else 0)
        modes.append(Mode(f"j{j}", Fraction(j * (j + m - 2)), mult))
    return LinkSpectrum(m, tuple(modes))


def spectrum_from_json(data) -> LinkSpectrum:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        m = int(data["m"])
        modes = []
        for i, md in enumerate(data["modes"]):
            lam = as_fraction(md["lambda"])
            modes.append(Mode(str(md.get("label", f"mode{i}")), lam, int(md.get("mult", 1))))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConeError(f"malformed spectrum: {exc}") from exc
    modes.sort(key=lambda md: md.lam)
    return LinkSpectrum(m, tuple(modes))


def harmonic_space(m: int, spectrum: LinkSpectrum, nu) -> List[Tuple[str, Fraction, Root]]:
    """Homogeneous harmonic functions with growth rate in ``[0, nu)`` as ``(label, lambda, a_plus)``."""
    if float(nu) <= 0:
        raise ConeError("rate bound must be positive")
    out = []
    for md in spectrum.modes:
        ap, _ = indicial_roots(md.lam, m)
        if float(ap) >= 0 and float(ap) < float(nu):
            out.append((md.label, md.lam, ap))
    return out


# ---------------------------------------------------------------------------
# formal solver


@dataclass(frozen=True)
class ResonanceEvent:
    label: str
    exponent: Fraction
    log_bump: int


def _solve_exponent(coeffs: Dict[int, Fraction], a: Fraction, lam: Fraction, m: int):
    """Solve ``Delta(r^a sum u_j L^j) = r^(a-2) sum c_j L^j`` for the ``u_j``.

    Returns ``(u, resonant)``; free homogeneous coefficients are set to zero.
    """
    P, dP, _ = cone_laplacian_term(a, 1, lam, m)
    K = max(coeffs)
    u: Dict[int, Fraction] = {}
    if P != 0:
        for j in range(K, -1, -1):
            rhs = coeffs.get(j, 0) - (j + 1) * dP * u.get(j + 1, 0) - (j + 2) * (j + 1) * u.get(j + 2, 0)
            u[j] = rhs / P
        return u, False
    if dP == 0:
        raise IndicialWeightError(f"double indicial root at a={a} (lambda={lam}, m={m})")
    for j in range(K, -1, -1):
        rhs = coeffs.get(j, 0) - (j + 2) * (j + 1) * u.get(j + 2, 0)
        u[j + 1] = rhs / ((j + 1) * dP)
    return u, True


def _check_weights(spectrum: LinkSpectrum, labels: Iterable[str], window):
    if window is None:
        return
    for w in window:
        if w is None or (isinstance(w, float) and math.isinf(w)):
            continue
        for lab in labels:
            lam = spectrum.lam(lab)
            if is_indicial_root(w, lam, spectrum.m):
                raise IndicialWeightError(
                    f"weight {w} is an indicial root of mode {lab} (lambda={lam}, m={spectrum.m})"
                )


def formal_solve_cone(
    f: LogSeries,
    m: int,
    spectrum: Optional[LinkSpectrum] = None,
    boundary_regime: str = "cone-tip",
    weight_window: Optional[Sequence] = None,
    report: Optional[list] = None,
) -> LogSeries:
    """Particular solution ``u`` of ``Delta u = f`` term by term.

    ``f`` is a series in ``r`` with mode-vector coefficients (scalar
    coefficients are read as the constant mode ``"j0"``).  A forcing
    exponent ``b`` is solved at ``a = b + 2``; when ``a`` is an indicial
    root of the mode the log degree rises by one.  Homogeneous solutions
    are never added, in either regime.

    Parameters
    ----------
    boundary_regime : ``"cone-tip"`` (expansion as ``r -> 0``) or
        ``"cone-infinity"`` (expansion in ``1/r``; exponents are read as
        powers of ``r`` all the same).
    weight_window : optional ``(low, high)``; an endpoint equal to an
        indicial root of a mode present in ``f`` raises.
    report : optional list collecting :class:`ResonanceEvent` records.

    Returns
    -------
    LogSeries with cap ``f.cap + 2`` and mode-vector coefficients.
    """
    if boundary_regime not in ("cone-tip", "cone-infinity"):
        raise ConeError(f"unknown regime {boundary_regime!r}")
    if spectrum is None:
        spectrum = LinkSpectrum(m, (Mode("j0", Fraction(0)),))
    if spectrum.m != m:
        raise ConeError(f"spectrum dimension {spectrum.m} differs from m={m}")
    scalar_in = f.kind == "scalar"
    per_mode: Dict[str, Dict[Fraction, Dict[int, Fraction]]] = {}
    for (z, k), c in f.terms.items():
        vec = ModeVector({"j0": c}) if scalar_in else c
        for lab, v in vec.items():
            per_mode.setdefault(lab, {}).setdefault(z, {})[k] = v
    _check_weights(spectrum, per_mode, weight_window)

    out: Dict[Tuple[Fraction, int], Dict[str, Fraction]] = {}
    for lab in sorted(per_mode):
        lam = spectrum.lam(lab)
        for b in sorted(per_mode[lab]):
            a = b + 2
            u, resonant = _solve_exponent(per_mode[lab][b], a, lam, m)
            if resonant and report is not None:
                report.append(ResonanceEvent(lab, a, max(per_mode[lab][b]) + 1))
            for j, val in u.items():
                if val != 0:
                    out.setdefault((a, j), {})[lab] = val
    cap = f.cap + 2
    if scalar_in:
        return LogSeries({key: d.get("j0", 0) for key, d in out.items()}, cap, f.face)
    return LogSeries({key: ModeVector(d) for key, d in out.items()}, cap, f.face)


def apply_cone_laplacian(u: LogSeries, m: int, spectrum: Optional[LinkSpectrum] = None) -> LogSeries:
    """Exact ``Delta u`` for a series of ``r^a log^k`` terms; result has cap ``u.cap - 2``."""
    if spectrum is None:
        spectrum = LinkSpectrum(m, (Mode("j0", Fraction(0)),))
    scalar_in = u.kind == "scalar"
    out: Dict[Tuple[Fraction, int], Dict[str, Fraction]] = {}
    for (a, k), c in u.terms.items():
        vec = ModeVector({"j0": c}) if scalar_in else c
        for lab, v in vec.items():
            c0, c1, c2 = cone_laplacian_term(a, k, spectrum.lam(lab), m)
            for dk, cc in ((0, c0), (1, c1), (2, c2)):
                if cc != 0 and k - dk >= 0:
                    d = out.setdefault((a - 2, k - dk), {})
                    d[lab] = d.get(lab, 0) + cc * v
    cap = u.cap - 2
    if scalar_in:
        return LogSeries({key: d.get("j0", 0) for key, d in out.items()}, cap, u.face)
    return LogSeries({key: ModeVector(d) for key, d in out.items()}, cap, u.face)
