"""Exact arithmetic on truncated index sets and index families.

An index set is a set of pairs ``(z, k)`` with ``z`` rational and ``k`` a
nonnegative integer.  It is closed downward in the log power and upward in
the exponent by integer steps, and it is truncated at an explicit cap: no
pair with ``z > cap`` is ever stored.

Index families attach one index set to every boundary face of a space, and
:func:`pushforward_index` computes the family seen on the base of a b-map
from the face exponent matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

Pair = Tuple[Fraction, int]


class IndexAlgebraError(ValueError):
    """Raised for malformed input or incompatible operands."""


class NullFaceHypothesisError(IndexAlgebraError):
    """A face collapsed by the map carries a non-positive index set.

    Fiber integration is only defined when every such face has an index set
    whose infimum has strictly positive exponent.
    """

    def __init__(self, face, inf_pair):
        self.face = face
        self.inf_pair = inf_pair
        super().__init__(
            f"null face {face!r} has index set with inf {_fmt_pair(inf_pair)}; "
            "a positive exponent is required"
        )


def _fmt_pair(p):
    if p is None:
        return "none"
    return f"({p[0]}, {p[1]})"


def as_fraction(x) -> Fraction:
    """Convert ints, strings, floats or ``[p, q]`` pairs to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise IndexAlgebraError(f"rational pair must have 2 entries, got {x!r}")
        return Fraction(int(x[0]), int(x[1]))
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def order_key(pair: Pair):
    """Sort key realising the index order: smaller exponent first, then larger log power."""
    return (pair[0], -pair[1])


def precedes(a: Pair, b: Pair) -> bool:
    """True when ``a < b`` in the index order."""
    return a[0] < b[0] or (a[0] == b[0] and a[1] > b[1])


def _close(generators: Iterable[Pair], cap: Fraction) -> frozenset:
    out = set()
    for z, k in generators:
        z = as_fraction(z)
        k = int(k)
        if k < 0:
            raise IndexAlgebraError(f"log power must be nonnegative, got {k}")
        step = z
        while step <= cap:
            for p in range(k + 1):
                out.add((step, p))
            step = step + 1
    return frozenset(out)


@dataclass(frozen=True)
class IndexSet:
    """Closed, truncated index set.  Build with :func:`make_index_set`."""

    terms: frozenset
    cap: Fraction

    def __contains__(self, pair) -> bool:
        return (as_fraction(pair[0]), int(pair[1])) in self.terms

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.sorted_terms())

    def sorted_terms(self) -> List[Pair]:
        return sorted(self.terms, key=order_key)

    def is_empty(self) -> bool:
        return not self.terms

    def generators(self) -> List[Pair]:
        """Minimal generating set: pairs not implied by any other stored pair."""
        gens = []
        for z, k in self.terms:
            if (z, k + 1) in self.terms:
                continue
            if (z - 1, k) in self.terms:
                continue
            gens.append((z, k))
        return sorted(gens, key=order_key)

    def max_log(self, z) -> int:
        """Largest log power stored at exponent ``z`` or -1 if absent."""
        z = as_fraction(z)
        ks = [k for (w, k) in self.terms if w == z]
        return max(ks) if ks else -1

    def exponents(self) -> List[Fraction]:
        return sorted({z for z, _ in self.terms})

    def to_json(self) -> dict:
        return {
            "cap": [self.cap.numerator, self.cap.denominator],
            "terms": [[z.numerator, z.denominator, k] for z, k in self.sorted_terms()],
        }

    def __repr__(self):
        body = ", ".join(f"({z},{k})" for z, k in self.sorted_terms())
        return f"IndexSet(cap={self.cap}, {{{body}}})"


def make_index_set(generators: Iterable, cap) -> IndexSet:
    """Return the closure of ``generators`` truncated at ``cap``.

    Generators above the cap are dropped.

    Examples
    --------
    >>> sorted(make_index_set({(0, 0)}, 3).terms)[:2]
    [(Fraction(0, 1), 0), (Fraction(1, 1), 0)]
    """
    cap = as_fraction(cap)
    return IndexSet(_close(generators, cap), cap)


def index_set_from_json(data) -> IndexSet:
    """Parse the ``{"cap": [p, q], "terms": [[zp, zq, k], ...]}`` encoding.

    Terms may be given in generator form; the result is always closed.
    """
    if isinstance(data, str):
        data = json.loads(data)
    try:
        cap = as_fraction(data["cap"])
        gens = []
        for item in data.get("terms", []):
            if len(item) != 3:
                raise IndexAlgebraError(f"term must be [zp, zq, k], got {item!r}")
            gens.append((Fraction(int(item[0]), int(item[1])), int(item[2])))
    except (KeyError, TypeError, ZeroDivisionError) as exc:
        raise IndexAlgebraError(f"malformed index set: {exc}") from exc
    return make_index_set(gens, cap)


def inf_index(F: IndexSet) -> Optional[Pair]:
    """Minimum of ``F`` under the index order, or None for the empty set."""
    if F.is_empty():
        return None
    return min(F.terms, key=order_key)


def truncate(F: IndexSet, cap) -> IndexSet:
    """Lower the cap of ``F`` (raising it would need information that was discarded)."""
    cap = as_fraction(cap)
    if cap > F.cap:
        raise IndexAlgebraError(f"cannot raise cap from {F.cap} to {cap}")
    return IndexSet(frozenset(p for p in F.terms if p[0] <= cap), cap)


def union(K: IndexSet, I: IndexSet) -> IndexSet:
    if K.cap != I.cap:
        raise IndexAlgebraError(f"cap mismatch: {K.cap} != {I.cap}")
    return IndexSet(_close(K.terms | I.terms, K.cap), K.cap)


def extended_union(K: IndexSet, I: IndexSet) -> IndexSet:
    """Union of ``K`` and ``I`` plus ``(z, p' + p'' + 1)`` at every shared exponent."""
    if K.cap != I.cap:
        raise IndexAlgebraError(f"cap mismatch: {K.cap} != {I.cap}")
    extra = set()
    kmax = {}
    for z, p in K.terms:
        kmax[z] = max(kmax.get(z, -1), p)
    for z, p in I.terms:
        if z in kmax:
            # the largest pair dominates all others after closure in log power
            extra.add((z, kmax[z] + I.max_log(z) + 1))
    return IndexSet(_close(K.terms | I.terms | extra, K.cap), K.cap)


def shift(F: IndexSet, m) -> IndexSet:
    """``F - m``: every exponent and the cap move down by ``m``."""
    m = as_fraction(m)
    cap = F.cap - m
    return IndexSet(_close(((z - m, k) for z, k in F.terms), cap), cap)


def scale(F: IndexSet, c) -> IndexSet:
    """Divide every exponent (and the cap) by the positive factor ``c``."""
    c = as_fraction(c)
    if c <= 0:
        raise IndexAlgebraError(f"scale factor must be positive, got {c}")
    cap = F.cap / c
    return IndexSet(_close(((z / c, k) for z, k in F.terms), cap), cap)


def is_nonnegative(F: IndexSet) -> bool:
    """All exponents >= 0 and exponent 0 only carries log power 0."""
    for z, k in F.terms:
        if z < 0 or (z == 0 and k != 0):
            return False
    return True


def is_positive(F: IndexSet) -> bool:
    return all(z > 0 for z, _ in F.terms)


@dataclass(frozen=True)
class IndexFamily:
    """Assignment of one index set per boundary face."""

    assignments: Mapping[str, IndexSet]

    def __getitem__(self, face):
        return self.assignments[face]

    def faces(self) -> List[str]:
        return list(self.assignments)

    def to_json(self) -> dict:
        return {"faces": {f: F.to_json() for f, F in self.assignments.items()}}


def index_family_from_json(data) -> IndexFamily:
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict) or "faces" not in data:
        raise IndexAlgebraError('index family must be an object with a "faces" key')
    faces = data["faces"]
    if not isinstance(faces, dict):
        raise IndexAlgebraError('"faces" must map face names to index sets')
    return IndexFamily({str(k): index_set_from_json(v) for k, v in faces.items()})


@dataclass(frozen=True)
class ExponentMatrix:
    """Nonnegative integer exponents ``e(G, H)`` of a b-map.

    ``rho_H(f(p)) = u(p) * prod_G rho_G(p) ** e(G, H)``.
    """

    sources: Tuple[str, ...]
    targets: Tuple[str, ...]
    e: Mapping[Tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for (g, h), v in self.e.items():
            if g not in self.sources or h not in self.targets:
                raise IndexAlgebraError(f"unknown face pair ({g}, {h})")
            if int(v) != v or v < 0:
                raise IndexAlgebraError(f"exponent e({g},{h}) must be a nonnegative integer, got {v}")

    def get(self, g, h) -> int:
        return int(self.e.get((g, h), 0))

    def null_faces(self) -> List[str]:
        """Source faces mapped into the interior (all-zero row)."""
        return [g for g in self.sources if all(self.get(g, h) == 0 for h in self.targets)]

    def to_json(self) -> dict:
        return {
            "sources": list(self.sources),
            "targets": list(self.targets),
            "e": [[self.get(g, h) for h in self.targets] for g in self.sources],
        }


def exponent_matrix_from_json(data) -> ExponentMatrix:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        sources = tuple(str(s) for s in data["sources"])
        targets = tuple(str(t) for t in data["targets"])
        rows = data["e"]
        if len(rows) != len(sources) or any(len(r) != len(targets) for r in rows):
            raise IndexAlgebraError("exponent matrix shape does not match face lists")
        e = {}
        for g, row in zip(sources, rows):
            for h, v in zip(targets, row):
                if v:
                    e[(g, h)] = v
    except (KeyError, TypeError) as exc:
        raise IndexAlgebraError(f"malformed exponent matrix: {exc}") from exc
    return ExponentMatrix(sources, targets, e)


def pushforward_index(
    K: IndexFamily, e: ExponentMatrix, faces_Y: Optional[Sequence[str]] = None, cap=None
) -> IndexFamily:
    """Index family of the push-forward of densities with index family ``K``.

    For each target face ``H`` this is the extended union, over source faces
    ``G`` with ``e(G, H) != 0``, of ``K(G)`` with exponents divided by
    ``e(G, H)``.  Scaled caps are lowered to a common value (``cap`` if
    given, else the smallest scaled cap) before the unions are formed.

    Raises
    ------
    NullFaceHypothesisError
        if a face with an all-zero row carries a non-positive index set.
    """
    faces_Y = list(faces_Y) if faces_Y is not None else list(e.targets)
    for g in e.sources:
        if g not in K.assignments:
            raise IndexAlgebraError(f"index family has no assignment for face {g!r}")
    for g in e.null_faces():
        F = K[g]
        lo = inf_index(F)
        if lo is not None and lo[0] <= 0:
            raise NullFaceHypothesisError(g, lo)

    pieces: Dict[str, List[IndexSet]] = {h: [] for h in faces_Y}
    for h in faces_Y:
        for g in e.sources:
            eg = e.get(g, h)
            if eg:
                pieces[h].append(scale(K[g], eg))
    out = {}
    for h in faces_Y:
        caps = [F.cap for F in pieces[h]] or [F.cap for F in K.assignments.values()]
        common = min(caps, default=Fraction(0))
        if cap is not None:
            common = min(common, as_fraction(cap))
        acc = IndexSet(frozenset(), common)
        for F in pieces[h]:
            acc = extended_union(acc, truncate(F, common) if F.cap > common else F)
        out[h] = acc
    return IndexFamily(out)
