import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdhps.core import CrowdLabelSet, EmptyEvidenceError, InvalidInputError
from crowdhps.hpo import HpcCandidate
from crowdhps.lfc import (
    ConfusionMatrix,
    DegenerateSliceError,
    LearnerSpec,
    _design,
    _padded_labels,
    dawid_skene,
    default_search_space,
    joint_loss_and_grad,
    link_accuracy,
    link_crowd_probs,
    marginal_alignment,
    normalize_union_slice,
    train,
)
from crowdhps.simulate import gaussian_blobs
from oracles import dawid_skene_oracle

Q = [[0.9, 0.1], [0.2, 0.8]]


def test_link_crowd_probs_examples():
    assert np.allclose(link_crowd_probs(np.eye(2), [0.2, 0.8]), [0.2, 0.8])
    assert np.allclose(link_crowd_probs(np.full((3, 3), 1 / 3), [0.7, 0.2, 0.1]), [1 / 3] * 3)
    assert np.allclose(link_crowd_probs(Q, [0.5, 0.5]), [0.55, 0.45], atol=1e-15)
    with pytest.raises(InvalidInputError):
        link_crowd_probs(Q, [1, 0, 0])


def test_link_accuracy_examples():
    assert link_accuracy(np.eye(3), [0.2, 0.3, 0.5]) == pytest.approx(1.0)
    assert link_accuracy(np.full((4, 4), 0.25), [0.1, 0.2, 0.3, 0.4]) == pytest.approx(0.25)
    assert link_accuracy(Q, [0.5, 0.5]) == pytest.approx(0.85, abs=1e-15)


def test_marginal_alignment_examples():
    assert marginal_alignment([1, 0], [0.3, 0.7]) == pytest.approx(0.3)
    assert marginal_alignment([0, 1], [0, 1]) == 1.0
    assert marginal_alignment([0.5, 0.5], [0.5, 0.5]) == 0.5


def test_normalize_union_slice_examples():
    # workers are 0-based: the first block belongs to worker 0
    assert np.allclose(normalize_union_slice([0.1, 0.3, 0.2, 0.4], 0, 2), [0.25, 0.75])
    assert np.allclose(normalize_union_slice([0, 1, 0.5, 0.5], 0, 2), [0, 1])
    assert np.allclose(normalize_union_slice([0.25] * 4, 1, 2), [0.5, 0.5])
    with pytest.raises(DegenerateSliceError):
        normalize_union_slice([0, 0, 0.5, 0.5], 0, 2)


def test_confusion_matrix_checks():
    with pytest.raises(InvalidInputError):
        ConfusionMatrix([[0.5, 0.6], [0.5, 0.5]])
    assert np.allclose(ConfusionMatrix.symmetric(0.7, 3).rows, [[0.7, 0.15, 0.15],
                                                                [0.15, 0.7, 0.15],
                                                                [0.15, 0.15, 0.7]])


pairs = st.integers(2, 6).flatmap(lambda C: st.tuples(st.just(C), st.integers(0, 2**31)))


@given(pairs)
def test_linkage_invariants(args):
    C, seed = args
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.ones(C), C)
    f = rng.dirichlet(np.ones(C))
    assert abs(np.sum(link_crowd_probs(q, f)) - 1) < 1e-12
    h = link_accuracy(q, f)
    assert np.diag(q).min() - 1e-12 <= h <= np.diag(q).max() + 1e-12


# -- Dawid-Skene -------------------------------------------------------------

def crowd(entries, N, M, C):
    return CrowdLabelSet.from_entries(entries, N, M, C)


def test_ds_unanimous():
    y = np.arange(12) % 3
    r = dawid_skene(crowd([(n, m, y[n]) for n in range(12) for m in range(4)], 12, 4, 3))
    assert r.posteriors.argmax(axis=1).tolist() == y.tolist()
    assert r.posteriors.max(axis=1).min() > 0.99


def test_ds_perfect_workers_diagonals():
    y = np.arange(20) % 2
    r = dawid_skene(crowd([(n, m, y[n]) for n in range(20) for m in range(3)], 20, 3, 2))
    assert np.diagonal(r.confusions, axis1=1, axis2=2).min() >= 0.9


def test_ds_single_worker():
    # one source is unidentifiable: the first update keeps the labels (softened),
    # further iterations drift towards the majority class
    z = np.random.default_rng(4).integers(0, 3, 15)
    r = dawid_skene(crowd([(n, 0, z[n]) for n in range(15)], 15, 1, 3), max_iters=1)
    assert r.posteriors.argmax(axis=1).tolist() == z.tolist()
    assert np.all(r.posteriors.max(axis=1) < 1.0)
    r = dawid_skene(crowd([(n, 0, z[n]) for n in range(15)], 15, 1, 3), max_iters=500)
    assert r.log_likelihoods[-1] >= r.log_likelihoods[0]


def test_ds_empty_instance():
    with pytest.raises(EmptyEvidenceError):
        dawid_skene(crowd([(0, 0, 1)], 2, 1, 2))


@given(st.integers(0, 2**31))
def test_ds_matches_oracle_and_is_monotone(seed):
    rng = np.random.default_rng(seed)
    N, M, C = 12, 3, int(rng.integers(2, 4))
    y = rng.integers(0, C, N)
    entries = []
    for n in range(N):
        for m in range(M):
            if rng.random() < 0.7 or m == 0:
                entries.append((n, m, int(y[n]) if rng.random() < 0.75 else int(rng.integers(0, C))))
    r = dawid_skene(crowd(entries, N, M, C), max_iters=15, tol=0.0, record_history=True)
    ref = dawid_skene_oracle(entries, N, M, C, 15)
    for got, (prior, conf, post) in zip(r.history, ref):
        assert np.allclose(got["class_prior"], prior, atol=1e-9, rtol=0)
        assert np.allclose(got["confusions"], conf, atol=1e-9, rtol=0)
        assert np.allclose(got["posteriors"], post, atol=1e-9, rtol=0)
        assert np.allclose(got["posteriors"].sum(axis=1), 1.0)
        assert np.allclose(got["confusions"].sum(axis=2), 1.0)
    assert np.all(np.diff(r.log_likelihoods) >= -1e-9)


# -- training ----------------------------------------------------------------

def separable(n=200, sep=10.0):
    d = gaussian_blobs(n, 2, 2, sep, 0)
    return d.with_crowd_labels(CrowdLabelSet(np.arange(n), np.zeros(n), d.true_labels, n, 1, 2))


def hpc(kind, **kw):
    return HpcCandidate({**default_search_space(kind).default.values, **kw})


def test_mv_separable_reaches_zero_training_loss():
    d = separable()
    m = train(LearnerSpec("mv", hpc("mv", epochs=50, learning_rate=1e-2)), d, np.arange(200), 0)
    assert np.mean(m.predict_proba(d.features).argmax(axis=1) != d.true_labels) == 0.0
    assert not m.has_crowd_model


def test_confusion_learner_perfect_worker():
    d = separable()
    h = hpc("confusion", epochs=50, learning_rate=1e-1)
    m = train(LearnerSpec("confusion", h), d, np.arange(200), 0)
    assert np.diagonal(m.confusions, axis1=1, axis2=2).mean() >= 0.9
    f = m.predict_proba(d.features[:5])
    g = m.crowd_proba(None, np.zeros(5, dtype=int), f=f)
    assert np.allclose(g.sum(axis=1), 1.0)
    h_ = m.worker_accuracy(None, np.zeros(5, dtype=int), f=f)
    assert np.allclose(h_, [link_accuracy(m.confusions[0], fi) for fi in f])


@pytest.mark.parametrize("kind", ["mv", "ds", "confusion"])
def test_training_is_deterministic(kind):
    d = gaussian_blobs(90, 3, 2, 3.0, 1)
    rng = np.random.default_rng(2)
    ent = [(n, m, int(rng.integers(0, 3))) for n in range(90) for m in range(3) if rng.random() < 0.6]
    d = d.with_crowd_labels(CrowdLabelSet.from_entries(ent, 90, 3, 3))
    spec = LearnerSpec(kind, hpc(kind, epochs=5))
    a = train(spec, d, np.arange(60), 7)
    b = train(spec, d, np.arange(60), 7)
    assert np.array_equal(a.classifier.weights, b.classifier.weights)
    assert (a.confusions is None) == (kind == "mv")


@given(st.integers(0, 2**31))
def test_joint_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    B, D, C, M = 6, 3, 3, 4
    X = _design(rng.standard_normal((B, D)))
    ent = [(n, m, int(rng.integers(0, C))) for n in range(B) for m in range(M) if rng.random() < 0.6]
    ent += [(n, 0, 0) for n in range(B) if not any(e[0] == n and e[1] == 0 for e in ent)]
    labels = CrowdLabelSet.from_entries(ent, B, M, C)
    w, z, mask = _padded_labels(labels, np.arange(B))
    W = rng.standard_normal((C, D + 1))
    L = rng.standard_normal((M, C, C))
    _, gW, gL = joint_loss_and_grad(W, L, X, w, z, mask, 1e-2)
    eps = 1e-6

    def num_grad(arr, fn):
        out = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            up = fn()
            arr[idx] = old - eps
            down = fn()
            arr[idx] = old
            out[idx] = (up - down) / (2 * eps)
        return out

    nW = num_grad(W, lambda: joint_loss_and_grad(W, L, X, w, z, mask, 1e-2)[0])
    nL = num_grad(L, lambda: joint_loss_and_grad(W, L, X, w, z, mask, 1e-2)[0])
    for a, n in ((gW, nW), (gL, nL)):
        rel = np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
        assert rel < 1e-4
