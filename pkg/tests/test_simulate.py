import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdhps.core import CrowdLabelSet, InvalidInputError
from crowdhps.hpo import HpcCandidate
from crowdhps.lfc import LearnerSpec, default_search_space, train
from crowdhps.simulate import (
    BlobScenario,
    Variant,
    aggregation_noise,
    class_means,
    gaussian_blobs,
    make_variant,
    simulate_crowd,
    worker_confusions,
)


def test_class_means_spacing():
    for C, dim in ((2, 1), (3, 2), (4, 3), (5, 2), (3, 5)):
        mu = class_means(C, dim, 3.0)
        d = np.linalg.norm(mu[:, None] - mu[None], axis=2)
        assert np.min(d[~np.eye(C, dtype=bool)]) == pytest.approx(3.0)


def test_blobs_balanced_and_deterministic():
    a = gaussian_blobs(300, 3, 2, 3.0, 5)
    b = gaussian_blobs(300, 3, 2, 3.0, 5)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.true_labels, b.true_labels)
    assert np.bincount(a.true_labels).tolist() == [100, 100, 100]
    with pytest.raises(InvalidInputError):
        gaussian_blobs(2, 3, 2, 1.0, 0)


def _linear_test_loss(sep, seed):
    d = gaussian_blobs(1200, 3, 2, sep, seed)
    d = d.with_crowd_labels(CrowdLabelSet(np.arange(1200), np.zeros(1200), d.true_labels,
                                          1200, 1, 3))
    h = HpcCandidate({**default_search_space("mv").default.values, "epochs": 50,
                      "learning_rate": 1e-1})
    m = train(LearnerSpec("mv", h), d, np.arange(600), 0)
    return np.mean(m.predict_proba(d.features[600:]).argmax(axis=1) != d.true_labels[600:])


def test_linear_classifier_on_blobs():
    assert np.mean([_linear_test_loss(4.0, s) for s in range(5)]) <= 0.05
    assert _linear_test_loss(20.0, 0) == 0.0


def test_simulate_crowd_examples():
    y = np.random.default_rng(0).integers(0, 3, 5000)
    full = simulate_crowd(y, [np.eye(3)] * 2, 1.0, 0)
    assert len(full) == 10_000 and full.label_noise(y) == 0.0
    uni = simulate_crowd(y, [np.full((3, 3), 1 / 3)] * 2, 1.0, 1)
    assert abs(uni.label_noise(y) - 2 / 3) < 0.02
    one = simulate_crowd(y, worker_confusions([0.7], 3), 1.0, 2)
    assert abs(1 - one.label_noise(y) - 0.7) < 0.02
    part = simulate_crowd(y, worker_confusions([0.7] * 4, 3), 0.25, 3)
    assert abs(len(part) / 20_000 - 0.25) < 0.02


def test_simulate_crowd_errors():
    with pytest.raises(InvalidInputError):
        simulate_crowd([0, 1], [np.eye(2), np.eye(3)], 1.0, 0)
    with pytest.raises(InvalidInputError):
        simulate_crowd([0, 1], [np.eye(2)], 0.0, 0)


def test_make_variant_examples():
    # instance 0: worker 0 correct, workers 1 and 2 wrong
    labels = CrowdLabelSet.from_entries([(0, 0, 0), (0, 1, 1), (0, 2, 2),
                                         (1, 0, 1), (1, 1, 1), (1, 2, 0), (1, 3, 1), (1, 4, 1),
                                         (2, 3, 0)], 3, 5, 3)
    y = np.array([0, 1, 0])
    for seed in range(20):
        w1 = make_variant(labels, y, "worst-1", seed)
        assert w1.labels_of(0)[0][1] != 0
        r2 = make_variant(labels, y, "rand-2", seed)
        assert r2.labels_per_instance().tolist() == [2, 2, 1]
    assert make_variant(labels, y, "full", 0) == labels
    with pytest.raises(InvalidInputError):
        make_variant(labels, None, "worst-2", 0)
    assert Variant("rand-v").keep is None and Variant("worst-2").worst


crowds = st.tuples(st.integers(0, 2**31), st.sampled_from(list(Variant)))


def _random_crowd(seed):
    rng = np.random.default_rng(seed)
    N, M, C = int(rng.integers(5, 40)), int(rng.integers(1, 6)), int(rng.integers(2, 4))
    y = rng.integers(0, C, N)
    accs = rng.uniform(0.3, 0.95, M)
    return simulate_crowd(y, worker_confusions(accs, C), float(rng.uniform(0.3, 1.0)), seed), y


@given(crowds)
def test_variant_is_subset(args):
    seed, kind = args
    labels, y = _random_crowd(seed)
    out = make_variant(labels, y, kind, seed + 1)
    assert set(out.entries()) <= set(labels.entries())
    per_in, per_out = labels.labels_per_instance(), out.labels_per_instance()
    assert np.all((per_out >= 1) == (per_in >= 1))
    if kind.keep is not None:
        assert np.array_equal(per_out, np.minimum(per_in, kind.keep))


@given(st.integers(0, 2**31))
def test_worst1_noisier_than_rand1(seed):
    labels, y = _random_crowd(seed)
    w = make_variant(labels, y, "worst-1", seed)
    r = make_variant(labels, y, "rand-1", seed)
    if len(w):
        assert w.label_noise(y) >= r.label_noise(y)


def test_scenario_variant_ordering():
    s = BlobScenario()
    train, _, vseed = s.base(0)
    y = train.true_labels
    noise = {v: make_variant(train.crowd_labels, y, v, vseed).label_noise(y)
             for v in ("worst-1", "worst-2", "rand-1", "rand-2", "full")}
    assert noise["worst-1"] >= noise["worst-2"] >= noise["rand-1"] - 0.02
    assert aggregation_noise(train.crowd_labels, y) < noise["full"]
