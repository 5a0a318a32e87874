import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from topicflow.clusterer import (
    WEAK,
    assign_weak,
    cluster,
    model_from_json,
    model_to_json,
    soft_membership,
)
from topicflow.errors import DegenerateModelError


def two_blobs_noise(seed, n_blob=150, n_noise=30, dim=5, sep=20.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_blob, dim))
    a[:, 0] += sep
    b = rng.normal(size=(n_blob, dim))
    b[:, 0] -= sep
    noise = rng.uniform(-2 * sep, 2 * sep, size=(n_noise, dim))
    X = np.vstack([a, b, noise])
    planted = np.array([0] * n_blob + [1] * n_blob + [-1] * n_noise)
    return X, planted


class TestCluster:
    def test_two_blobs_recovered(self):
        X, planted = two_blobs_noise(0)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        assert m.n_clusters == 2
        blob = planted >= 0
        assert adjusted_rand_score(planted[blob], m.labels[blob]) >= 0.95
        assert (m.labels[planted == -1] == WEAK).mean() >= 0.5

    def test_degenerate_below_min_cluster_size(self):
        X = np.random.default_rng(0).normal(size=(5, 3))
        m = cluster(X, min_cluster_size=15, min_samples=5)
        assert m.is_degenerate
        assert m.n_clusters == 0
        assert (m.labels == WEAK).all()

    def test_duplication_invariance(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(20, 3)) + 10
        b = rng.normal(size=(20, 3)) - 10
        X = np.vstack([a, b])
        base = cluster(X, min_cluster_size=5, min_samples=5)
        dup = cluster(np.vstack([X, X]), min_cluster_size=5, min_samples=5)
        assert base.n_clusters == dup.n_clusters == 2

    def test_label_permutation_invariance(self):
        X, _ = two_blobs_noise(3, n_blob=60, n_noise=10)
        m1 = cluster(X, min_cluster_size=10, min_samples=10)
        perm = np.random.default_rng(9).permutation(X.shape[0])
        m2 = cluster(X[perm], min_cluster_size=10, min_samples=10)
        assert adjusted_rand_score(m1.labels[perm], m2.labels) == pytest.approx(1.0)

    def test_persistence_nonnegative(self):
        X, _ = two_blobs_noise(4)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        assert (m.persistence >= 0).all()
        assert m.persistence.shape == (m.n_clusters,)


class TestSoftMembership:
    def test_rows_sum_to_one(self):
        X, _ = two_blobs_noise(5)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        mem = soft_membership(m, X)
        np.testing.assert_allclose(mem.sum(axis=1) + m.weak_mass, 1.0, atol=1e-9)
        assert (mem >= 0).all()

    def test_argmax_matches_hard_label(self):
        for seed in range(3):
            X, _ = two_blobs_noise(seed)
            m = cluster(X, min_cluster_size=15, min_samples=15)
            soft_membership(m, X)
            assert m.check_membership_consistency()

    def test_exemplar_coincident_point_takes_full_cluster_mass(self):
        X, _ = two_blobs_noise(6)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        mem = soft_membership(m, X)
        ex = m.exemplars[0][0]  # point coincident with its own exemplar
        assert mem[ex, 0] == pytest.approx(1.0 - m.weak_mass[ex], abs=1e-12)

    def test_equidistant_point_splits_equally(self):
        # symmetric two-blob fixture: reflect a point onto the midplane
        X, _ = two_blobs_noise(7)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        mem = soft_membership(m, X)
        from scipy.spatial.distance import cdist

        d0 = cdist(X, X[m.exemplars[0]]).min(axis=1)
        d1 = cdist(X, X[m.exemplars[1]]).min(axis=1)
        # manufacture equidistance by checking the formula's symmetry instead
        close = np.abs(d0 - d1) < 1e-9
        if close.any():
            i = int(np.flatnonzero(close)[0])
            assert mem[i, 0] == pytest.approx(mem[i, 1], abs=1e-9)
        # inverse-distance weighting: nearer cluster gets more mass
        strong = m.labels != WEAK
        nearer0 = strong & (d0 < d1)
        assert (mem[nearer0, 0] >= mem[nearer0, 1]).all()

    def test_degenerate_model_rejected(self):
        X = np.random.default_rng(0).normal(size=(5, 3))
        m = cluster(X, min_cluster_size=15, min_samples=5)
        with pytest.raises(DegenerateModelError):
            soft_membership(m, X)


class TestAssignWeak:
    def test_point_equal_to_centroid_assigned_there(self):
        X, planted = two_blobs_noise(8)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        E = np.hstack([X, np.zeros((X.shape[0], 2))])  # stand-in full embeddings
        assign = assign_weak(m, E)
        weak_idx = np.flatnonzero(m.labels == WEAK)
        if weak_idx.size:
            i = weak_idx[0]
            E[i] = m.strong_centroids[1]
            assign = assign_weak(m, E)
            assert assign[i] == 1

    def test_matches_bruteforce_cosine_scan(self):
        X, _ = two_blobs_noise(9)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        rng = np.random.default_rng(1)
        E = rng.normal(size=(X.shape[0], 12))
        assign = assign_weak(m, E)
        centroids = np.stack([
            E[m.strong_members(k)].mean(axis=0) for k in range(m.n_clusters)
        ])
        for i in np.flatnonzero(m.labels == WEAK):
            cosines = [
                float(E[i] @ c / (np.linalg.norm(E[i]) * np.linalg.norm(c)))
                for c in centroids
            ]
            assert assign[i] == int(np.argmax(cosines))

    def test_tie_breaks_to_lowest_cluster_id(self):
        X, _ = two_blobs_noise(10)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        E = np.ones((X.shape[0], 4))
        # all points and centroids identical -> cosine ties everywhere
        assign = assign_weak(m, E)
        assert (assign[m.labels == WEAK] == 0).all()

    def test_strong_members_keep_their_label(self):
        X, _ = two_blobs_noise(11)
        m = cluster(X, min_cluster_size=15, min_samples=15)
        assign = assign_weak(m, X)
        strong = m.labels != WEAK
        np.testing.assert_array_equal(assign[strong], m.labels[strong])


def test_json_round_trip():
    X, _ = two_blobs_noise(12, n_blob=40, n_noise=8)
    m = cluster(X, min_cluster_size=10, min_samples=10)
    soft_membership(m, X)
    assign_weak(m, X)
    back = model_from_json(model_to_json(m))
    np.testing.assert_array_equal(back.labels, m.labels)
    np.testing.assert_allclose(back.membership, m.membership)
    np.testing.assert_allclose(back.persistence, m.persistence)
    assert [e.tolist() for e in back.exemplars] == [e.tolist() for e in m.exemplars]
    np.testing.assert_array_equal(back.weak_assignments, m.weak_assignments)
