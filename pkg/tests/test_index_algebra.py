import json
import random
from fractions import Fraction as Fr

import pytest

from phgcy.index_algebra import (
    ExponentMatrix, IndexAlgebraError, IndexFamily, NullFaceHypothesisError,
    extended_union, index_family_from_json, index_set_from_json, inf_index,
    is_nonnegative, is_positive, make_index_set, precedes, pushforward_index,
    scale, shift,
)


def pairs(*ps):
    return {(Fr(z), k) for z, k in ps}


def test_make_trivial_closure():
    assert make_index_set({(0, 0)}, 3).terms == pairs((0, 0), (1, 0), (2, 0), (3, 0))


def test_make_log_closure():
    F = make_index_set({(0, 1)}, 2)
    assert F.terms == pairs((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1))


def test_make_empty_and_above_cap():
    assert make_index_set(set(), 5).is_empty()
    assert make_index_set({(7, 0)}, 5).is_empty()


def test_inf():
    assert inf_index(make_index_set({(0, 0)}, 1)) == (0, 0)
    assert inf_index(make_index_set({(1, 2), (1, 0)}, 3)) == (1, 2)
    assert inf_index(make_index_set(set(), 1)) is None


def test_extended_union_examples():
    K = make_index_set({(1, 0)}, 2)
    E = extended_union(K, K)
    assert (1, 1) in E and (2, 1) in E
    K0 = make_index_set({(0, 0)}, 2)
    assert extended_union(K0, make_index_set(set(), 2)) == K0
    K = make_index_set({(0, 1)}, 3)
    I = make_index_set({(2, 0)}, 3)
    assert (2, 2) in extended_union(K, I)


def test_extended_union_cap_mismatch():
    with pytest.raises(IndexAlgebraError):
        extended_union(make_index_set({(0, 0)}, 2), make_index_set({(0, 0)}, 3))


def test_shift_scale():
    S = shift(make_index_set({(2, 0)}, 4), 2)
    assert inf_index(S) == (0, 0) and is_nonnegative(S)
    assert inf_index(scale(make_index_set({(4, 1)}, 8), 2)) == (2, 1)
    assert shift(make_index_set(set(), 3), 5).is_empty()
    with pytest.raises(IndexAlgebraError):
        scale(make_index_set({(0, 0)}, 1), 0)


def test_positivity_predicates():
    F = make_index_set({(0, 0)}, 2)
    assert is_nonnegative(F) and not is_positive(F)
    assert not is_nonnegative(make_index_set({(0, 1)}, 2))
    E = make_index_set(set(), 2)
    assert is_nonnegative(E) and is_positive(E)


def square_to_line(a, b, cap=6):
    K = IndexFamily({"B_I": make_index_set({(a, 0)}, cap), "B_II": make_index_set({(b, 0)}, cap)})
    e = ExponentMatrix(("B_I", "B_II"), ("eps",), {("B_I", "eps"): 1, ("B_II", "eps"): 1})
    return pushforward_index(K, e)["eps"]


def test_pushforward_square_to_line():
    assert inf_index(square_to_line(Fr(3, 2), 2)) == (Fr(3, 2), 0)
    out = square_to_line(2, 2)
    assert (2, 1) in out
    assert inf_index(out) == (2, 1)


def test_pushforward_null_face():
    e = ExponentMatrix(("A", "B"), ("y",), {("A", "y"): 1})
    ok = IndexFamily({"A": make_index_set({(1, 0)}, 3), "B": make_index_set(set(), 3)})
    assert inf_index(pushforward_index(ok, e)["y"]) == (1, 0)
    bad = IndexFamily({"A": make_index_set({(1, 0)}, 3), "B": make_index_set({(0, 0)}, 3)})
    with pytest.raises(NullFaceHypothesisError):
        pushforward_index(bad, e)


def test_json_round_trip():
    F = make_index_set({(Fr(1, 2), 1)}, 3)
    G = index_set_from_json(json.dumps(F.to_json()))
    assert G == F
    gen = index_set_from_json({"cap": [2, 1], "terms": [[0, 1, 0]]})
    assert len(gen) == 3
    with pytest.raises(IndexAlgebraError):
        index_set_from_json({"terms": []})
    fam = index_family_from_json({"faces": {"a": F.to_json()}})
    assert fam["a"] == F


def rand_set(rng, cap):
    gens = {(Fr(rng.randint(-4, 8), rng.choice([1, 2, 3])), rng.randint(0, 2)) for _ in range(rng.randint(0, 3))}
    return make_index_set(gens, cap)


def test_random_laws():
    rng = random.Random(7)
    for _ in range(200):
        cap = Fr(rng.randint(2, 6))
        K, I = rand_set(rng, cap), rand_set(rng, cap)
        E = extended_union(K, I)
        assert K.terms <= E.terms and I.terms <= E.terms
        assert make_index_set(E.terms, cap) == E
        lo = inf_index(E)
        if lo is not None:
            assert not any(precedes(p, lo) for p in E.terms)
