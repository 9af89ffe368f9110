import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relgc import tensor as T
from relgc.graph import ConfigError
from relgc.relation import (global_anchors, local_anchors, preservation_term, qmc_multinomial,
                            qmc_points, redundancy_term, relation_loss, relation_vectors,
                            sampling_weights)

from conftest import check_grads


def scalar_relation_loss(za1, za2, zg1, zg2, g_idx, l_idx):
    """Loop-by-loop reimplementation used as an oracle."""
    def dot(a, b):
        return sum(x * y for x, y in zip(a, b))

    def cos2(a, b):
        na, nb = math.sqrt(dot(a, a)), math.sqrt(dot(b, b))
        return 0.0 if na == 0 or nb == 0 else (dot(a, b) / (na * nb)) ** 2

    def rel(zq, za, anchors_of):
        return [[dot(zq[i], za[k]) for k in anchors_of(i)] for i in range(len(zq))]

    total = 0.0
    n = len(za1)
    for z1, z2 in ((za1, za2), (zg1, zg2)):
        for anchors_of in (lambda i: list(g_idx), lambda i: list(l_idx[i])):
            r1, r2 = rel(z1, z2, anchors_of), rel(z2, z2, anchors_of)
            c = sum(cos2(r1[i], r2[i]) for i in range(n)) / n
            r = sum(cos2(r1[i], r2[j]) for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
            total += r - c
    return total


def rand_instance(rng, n=6, d=4, m1=5, m2=2):
    zs = [rng.normal(size=(n, d)) for _ in range(4)]
    g_idx = rng.integers(n, size=m1)
    l_idx = np.array([rng.choice([j for j in range(n) if j != i], m2, replace=False)
                      for i in range(n)])
    return zs, g_idx, l_idx


class TestSamplingWeights:
    def test_uniform_degrees(self):
        sw = sampling_weights([3, 3, 3, 3])
        assert np.allclose(sw.p, 0.25, atol=0)

    def test_hand_example(self):
        sw = sampling_weights([1, 3], 0.8)
        assert np.allclose(sw.w, [0.8 ** math.log(2), 0.8 ** math.log(4)], atol=1e-15)
        # the quoted four-decimal values truncate rather than round
        assert np.allclose(sw.w, [0.8566, 0.7339], atol=1e-4)
        assert np.allclose(sw.p, [0.5386, 0.4614], atol=1e-4)

    def test_decreasing_in_degree(self, rng):
        deg = rng.integers(1, 50, size=30)
        w = sampling_weights(deg).w
        order = np.argsort(deg)
        assert np.all(np.diff(w[order]) <= 0)

    @pytest.mark.parametrize("beta", [0.0, 1.0, 1.3])
    def test_bad_beta(self, beta):
        with pytest.raises(ConfigError):
            sampling_weights([1, 2], beta)


class TestQMC:
    def test_examples(self):
        assert np.allclose(qmc_points(2, 0.0), [0.25, 0.75], atol=0)
        assert np.allclose(np.sort(qmc_points(2, 0.9)), [0.15, 0.65], atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 300), st.floats(0, 1, exclude_max=True))
    def test_lattice_spacing(self, m, omega):
        pts = np.sort(qmc_points(m, omega))
        assert pts.min() >= 0 and pts.max() < 1
        gaps = np.diff(np.concatenate([pts, [pts[0] + 1]]))
        assert np.allclose(gaps, 1 / m, atol=1e-12)

    def test_multinomial_examples(self):
        assert np.all(qmc_multinomial([1.0, 0.0, 0.0], qmc_points(16, 0.3)) == 0)
        assert qmc_multinomial([0.5, 0.5], [0.25, 0.75]).tolist() == [0, 1]

    def test_first_index_whose_cdf_exceeds_point(self):
        p = np.array([0.2, 0.3, 0.5])
        assert qmc_multinomial(p, [0.0, 0.2, 0.49, 0.5, 0.999]).tolist() == [0, 1, 1, 2, 2]

    def test_zero_mass_nodes_never_drawn(self, rng):
        p = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
        drawn = qmc_multinomial(p, rng.uniform(size=1000))
        assert set(drawn.tolist()) <= {1, 3}

    def test_global_anchors_seeded(self):
        sw = sampling_weights(np.arange(1, 11))
        a = global_anchors(sw, 64, np.random.default_rng([1, 2]))
        b = global_anchors(sw, 64, np.random.default_rng([1, 2]))
        assert np.array_equal(a, b) and a.shape == (64,)


class TestLocalAnchors:
    def test_two_node(self):
        assert local_anchors(np.array([[0.6, 0.4], [0.4, 0.6]]), 1).tolist() == [[1], [0]]

    def test_excludes_self_and_length(self, rng):
        u = rng.uniform(size=(10, 10)) + 5 * np.eye(10)
        table = local_anchors(u, 3)
        assert table.shape == (10, 3)
        assert not np.any(table == np.arange(10)[:, None])

    def test_ties_lower_index(self):
        u = np.ones((4, 4))
        assert local_anchors(u, 2).tolist() == [[1, 2], [0, 2], [0, 1], [0, 1]]

    def test_permutation_equivariance(self, rng):
        a = rng.uniform(size=(8, 8))
        u = a + a.T
        perm = rng.permutation(8)
        base = local_anchors(u, 3)
        permuted = local_anchors(u[np.ix_(perm, perm)], 3)
        assert np.array_equal(perm[permuted], base[perm])

    def test_too_many(self):
        with pytest.raises(ConfigError):
            local_anchors(np.eye(3), 3)


class TestRelationVectors:
    def test_orthonormal(self):
        z = np.eye(4)
        assert np.array_equal(relation_vectors(z, z, np.arange(4)).data, np.eye(4))

    def test_hand_example(self):
        r = relation_vectors(np.array([[1.0, 2.0]]), np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1])
        assert r.data.tolist() == [[1.0, 2.0]]

    def test_local_shape(self, rng):
        r = relation_vectors(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)),
                             np.zeros((5, 2), dtype=int))
        assert r.shape == (5, 2)

    def test_empty(self, rng):
        with pytest.raises(ValueError):
            relation_vectors(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)), [])


class TestTerms:
    def test_preservation_examples(self, rng):
        r = rng.normal(size=(5, 3))
        assert preservation_term(r, r).item() == pytest.approx(1.0, abs=1e-14)
        assert preservation_term(np.eye(2), np.eye(2)[::-1]).item() == 0
        assert preservation_term([[1.0, 0.0]], [[1.0, 1.0]]).item() == pytest.approx(0.5, abs=1e-15)

    def test_zero_row_warns_and_counts_zero(self):
        with pytest.warns(UserWarning, match="zero relation rows"):
            v = preservation_term([[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]]).item()
        assert v == pytest.approx(0.5)

    def test_redundancy_examples(self, rng):
        # every cross pair (i != j) is orthogonal
        assert redundancy_term(np.eye(2), np.eye(2)).item() == 0
        same = np.tile(rng.normal(size=(1, 3)), (4, 1))
        assert redundancy_term(same, same).item() == pytest.approx(1.0, abs=1e-14)

    def test_redundancy_bruteforce(self, rng):
        r1, r2 = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
        cos2 = lambda a, b: (a @ b / np.linalg.norm(a) / np.linalg.norm(b)) ** 2
        ref = (cos2(r1[0], r2[1]) + cos2(r1[1], r2[0])) / 2
        assert redundancy_term(r1, r2).item() == pytest.approx(ref, abs=1e-14)

    def test_redundancy_needs_two(self):
        with pytest.raises(ValueError):
            redundancy_term([[1.0, 0.0]], [[1.0, 0.0]])

    @pytest.mark.parametrize("factor", [0.1, 1.0, 10.0])
    def test_row_scale_invariance(self, rng, factor):
        r1, r2 = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        scaled = r1.copy()
        scaled[2] *= factor
        assert preservation_term(scaled, r2).item() == pytest.approx(
            preservation_term(r1, r2).item(), abs=1e-13)
        assert redundancy_term(scaled, r2).item() == pytest.approx(
            redundancy_term(r1, r2).item(), abs=1e-13)


class TestRelationLoss:
    def test_matches_scalar_oracle(self, rng):
        for _ in range(20):
            zs, g_idx, l_idx = rand_instance(rng)
            got = relation_loss(*zs, g_idx, l_idx).item()
            assert abs(got - scalar_relation_loss(*zs, g_idx, l_idx)) < 1e-10

    def test_bounds(self, rng):
        for _ in range(200):
            n = int(rng.integers(3, 9))
            zs, g_idx, l_idx = rand_instance(rng, n=n, m1=int(rng.integers(1, 6)))
            assert -4 <= relation_loss(*zs, g_idx, l_idx).item() <= 4

    def test_extremes(self):
        z = np.eye(2)
        swapped = z[::-1].copy()
        g_idx, l_idx = np.array([0, 1]), np.array([[0, 1], [0, 1]])
        assert relation_loss(z, z, z, z, g_idx, l_idx).item() == pytest.approx(-4, abs=1e-14)
        assert relation_loss(swapped, z, swapped, z, g_idx, l_idx).item() == pytest.approx(4, abs=1e-14)

    def test_symmetric_variant_differs(self, rng):
        zs, g_idx, l_idx = rand_instance(rng)
        a = relation_loss(*zs, g_idx, l_idx).item()
        b = relation_loss(*zs, g_idx, l_idx, symmetric=True).item()
        assert a != b

    def test_gradient(self, rng):
        zs, g_idx, l_idx = rand_instance(rng, n=6, d=3, m1=3, m2=2)
        params = [T.parameter(z) for z in zs]
        check_grads(lambda: relation_loss(*params, g_idx, l_idx), params)
