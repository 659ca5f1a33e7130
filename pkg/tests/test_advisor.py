import math

import pytest
from hypothesis import given, strategies as st

from dstesim.advisor import (
    Case,
    CaseBase,
    DimensionMismatchError,
    EmptyCaseBaseError,
    distance,
    load_case_base,
    recommend,
    retain,
    retrieve,
    save_case_base,
)
from dstesim.domain import BamModel


def case(features, model=BamModel.MAM, score=0.5):
    return Case(tuple(features), model, (0.4, 0.3, 0.3), score)


def base_with(*cases, dim=3, weights=None, k=3):
    base = CaseBase(dimension=dim, weights=weights or (), k=k)
    for c in cases:
        base.cases.append(c)
    return base


class TestRetrieve:
    def test_identity_match_first(self):
        target = case([0.5, 0.3, 0.2])
        base = base_with(case([0.9, 0.05, 0.05]), target, case([0.1, 0.1, 0.8]))
        results = retrieve(base, (0.5, 0.3, 0.2))
        assert results[0][0] == target
        assert results[0][1] == 0.0

    def test_k_larger_than_base(self):
        base = base_with(case([1, 0, 0]), case([0, 1, 0]))
        assert len(retrieve(base, (0.0, 0.0, 0.0), k=10)) == 2

    def test_tie_breaks_by_insertion_order(self):
        first = case([1.0, 0.0, 0.0], score=0.1)
        second = case([0.0, 1.0, 0.0], score=0.9)
        base = base_with(first, second)
        results = retrieve(base, (0.5, 0.5, 0.0), k=1)
        assert results[0][0] == first

    def test_empty_base(self):
        with pytest.raises(EmptyCaseBaseError):
            retrieve(base_with(), (0, 0, 0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            retrieve(base_with(case([1, 0, 0])), (0.0, 0.0))


class TestRecommend:
    def test_single_case(self):
        base = base_with(case([1, 1, 1], model=BamModel.ATCS, score=0.9))
        rec = recommend(base, (1.0, 1.0, 1.0))
        assert rec.model is BamModel.ATCS
        assert rec.confidence == 1.0

    def test_best_outcome_among_neighbors(self):
        base = base_with(
            case([0.0, 0.0, 0.0], model=BamModel.MAM, score=0.2),
            case([0.1, 0.0, 0.0], model=BamModel.RDM, score=0.9),
            case([0.2, 0.0, 0.0], model=BamModel.ATCS, score=0.5),
        )
        rec = recommend(base, (0.0, 0.0, 0.0))
        assert rec.model is BamModel.RDM

    def test_zero_weight_feature_ignored(self):
        base = base_with(case([0.5, 0.5, 123.0]), weights=(1.0, 1.0, 0.0))
        a = recommend(base, (0.5, 0.5, 0.0))
        b = recommend(base, (0.5, 0.5, 999.0))
        assert a == b


class TestRetain:
    def test_appends(self):
        base = base_with()
        retain(base, case([1, 0, 0]))
        assert len(base.cases) == 1

    def test_lower_score_duplicate_ignored(self):
        base = base_with(case([1, 0, 0], score=0.8))
        retain(base, case([1, 0, 0], score=0.3))
        assert len(base.cases) == 1 and base.cases[0].score == 0.8

    def test_higher_score_replaces(self):
        base = base_with(case([1, 0, 0], score=0.3))
        retain(base, case([1, 0, 0], model=BamModel.ATCS, score=0.8))
        assert len(base.cases) == 1
        assert base.cases[0].score == 0.8 and base.cases[0].model is BamModel.ATCS

    def test_best_outcome_never_decreases(self):
        base = base_with()
        best = 0.0
        for score in (0.4, 0.2, 0.9, 0.1):
            retain(base, case([1, 0, 0], score=score))
            best = max(best, score)
            assert base.cases[0].score == best


vectors = st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=3, max_size=3)


@given(vectors, vectors, vectors)
def test_distance_is_a_metric(a, b, c):
    w = (1.0, 2.0, 0.5)
    a, b, c = tuple(a), tuple(b), tuple(c)
    assert distance(w, a, b) == pytest.approx(distance(w, b, a))
    assert distance(w, a, a) == 0.0
    assert distance(w, a, c) <= distance(w, a, b) + distance(w, b, c) + 1e-9


@given(vectors, st.floats(min_value=0.1, max_value=50))
def test_weight_scaling_preserves_decisions(query, scale):
    cases = [case([0.1, 0.2, 0.3], model=BamModel.MAM, score=0.3),
             case([0.5, 0.5, 0.5], model=BamModel.RDM, score=0.7),
             case([0.9, 0.1, 0.4], model=BamModel.ATCS, score=0.5)]
    base1 = base_with(*cases, weights=(1.0, 2.0, 0.5))
    base2 = base_with(*cases, weights=(scale, 2.0 * scale, 0.5 * scale))
    q = tuple(query)
    order1 = [c.features for c, _ in retrieve(base1, q)]
    order2 = [c.features for c, _ in retrieve(base2, q)]
    assert order1 == order2
    assert recommend(base1, q).model == recommend(base2, q).model


def test_persistence_roundtrip(tmp_path):
    base = base_with(case([0.5, 0.2, 0.3], model=BamModel.ATCS, score=0.77))
    path = tmp_path / "cases.json"
    save_case_base(base, path)
    loaded = load_case_base(path)
    assert loaded.dimension == base.dimension
    assert loaded.cases == base.cases
    assert loaded.weights == base.weights
