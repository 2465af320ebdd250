import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdhps.core import (
    ClassLabel,
    CrowdLabelSet,
    Dataset,
    EqualPerformance,
    InvalidInputError,
    LearnedPerformance,
    MissingEstimateError,
    ProbabilityVector,
    SplitPlan,
    argmax_tiebreak,
    zero_one_loss,
)


@pytest.mark.parametrize("y, y_hat, expected", [
    ((1, 0, 0), (1, 0, 0), 0),
    ((1, 0, 0), (0, 1, 0), 1),
    ((0, 1, 0), (0.1, 0.7, 0.2), 0),
])
def test_zero_one_loss_examples(y, y_hat, expected):
    assert zero_one_loss(y, y_hat) == expected


def test_zero_one_loss_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        zero_one_loss((1, 0), (1, 0, 0))


@pytest.mark.parametrize("v, expected", [((0.2, 0.8), 1), ((0.5, 0.5), 0), ((3, 1, 3), 0)])
def test_argmax_tiebreak(v, expected):
    assert argmax_tiebreak(v) == expected


def test_argmax_empty():
    with pytest.raises(InvalidInputError):
        argmax_tiebreak([])


simplex = st.integers(2, 6).flatmap(
    lambda c: st.lists(st.floats(0.0, 1.0), min_size=c, max_size=c).filter(lambda v: sum(v) > 0)
)


@given(simplex)
def test_zero_one_loss_reflexive(v):
    p = np.asarray(v) / np.sum(v)
    assert zero_one_loss(p, p) == 0


@given(st.integers(2, 6).flatmap(lambda c: st.tuples(st.just(c), st.integers(0, c - 1),
                                                     st.integers(0, c - 1))))
def test_zero_one_loss_symmetric_on_one_hot(args):
    c, i, j = args
    a, b = np.eye(c)[i], np.eye(c)[j]
    assert zero_one_loss(a, b) == zero_one_loss(b, a) == int(i != j)


def test_class_label():
    lab = ClassLabel(2, 4)
    assert int(lab) == 2
    assert lab.one_hot().tolist() == [0, 0, 1, 0]
    with pytest.raises(InvalidInputError):
        ClassLabel(4, 4)
    with pytest.raises(InvalidInputError):
        ClassLabel(0, 1)


def test_probability_vector_tolerance():
    ProbabilityVector([0.5, 0.5 + 5e-10])
    with pytest.raises(InvalidInputError):
        ProbabilityVector([0.5, 0.5 + 1e-8])
    with pytest.raises(InvalidInputError):
        ProbabilityVector([1.2, -0.2])
    pv = ProbabilityVector([2.0, 6.0], normalize=True)
    assert np.allclose(pv, [0.25, 0.75]) and pv.argmax() == 1


def test_performance_estimates():
    with pytest.raises(InvalidInputError):
        EqualPerformance(0.3, num_classes=3)
    EqualPerformance(1.0, num_classes=3).check(3)
    with pytest.raises(InvalidInputError):
        EqualPerformance(0.5).check(2)
    perf = LearnedPerformance({(0, 1): 0.7})
    assert perf.lookup(0, 1) == 0.7
    with pytest.raises(MissingEstimateError):
        perf.lookup(1, 1)
    with pytest.raises(InvalidInputError):
        LearnedPerformance({(0, 0): 1.5})


def test_crowd_label_set_rejects_duplicates_and_range():
    with pytest.raises(InvalidInputError, match="duplicate"):
        CrowdLabelSet.from_entries([(0, 1, 0), (0, 1, 1)], 2, 2, 2)
    with pytest.raises(InvalidInputError):
        CrowdLabelSet.from_entries([(2, 0, 0)], 2, 2, 2)
    with pytest.raises(InvalidInputError):
        CrowdLabelSet.from_entries([(0, 0, 2)], 2, 2, 2)


def test_crowd_label_set_views():
    labels = CrowdLabelSet.from_entries([(1, 0, 2), (0, 1, 0), (0, 0, 1)], 3, 2, 3)
    assert list(labels.entries()) == [(0, 0, 1), (0, 1, 0), (1, 0, 2)]
    assert labels.labels_of(0) == [(0, 1), (1, 0)]
    assert labels.labels_of(2) == []
    assert labels.labels_per_instance().tolist() == [2, 1, 0]
    assert labels.vote_counts().tolist() == [[1, 1, 0], [0, 0, 1], [0, 0, 0]]
    sub = labels.subset([1, 2])
    assert list(sub.entries()) == [(0, 0, 2)] and sub.num_instances == 2
    assert labels.label_noise([1, 2, 0]) == pytest.approx(1 / 3)


def test_dataset_checks():
    crowd = CrowdLabelSet.from_entries([(0, 0, 1)], 2, 1, 2)
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((3, 2)), crowd)
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((2, 2)), crowd, true_labels=[0])
    d = Dataset(np.zeros((2, 2)), crowd, true_labels=[0, 1])
    assert d.num_classes == 2 and d.num_workers == 1
    part = d.subset([1])
    assert part.num_instances == 1 and len(part.crowd_labels) == 0


def test_split_plan_partition():
    SplitPlan(((np.array([1]), np.array([0])), (np.array([0]), np.array([1]))), 2)
    with pytest.raises(InvalidInputError):
        SplitPlan(((np.array([0]), np.array([0])),), 2)
    with pytest.raises(InvalidInputError):
        SplitPlan((), 2)
