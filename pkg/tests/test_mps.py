import numpy as np
import pytest

from isotns_sampler import mps, states
from isotns_sampler.streams import ZeroProbabilityError, sample_uniforms
from isotns_sampler.tensor import DenseTensor
from isotns_sampler.tree import SamplingTree


def chain_ghz(L):
    arrays = []
    for i in range(L):
        dl = 1 if i == 0 else 2
        dr = 1 if i == L - 1 else 2
        a = np.zeros((dl, 2, dr))
        for s in range(2):
            a[min(s, dl - 1), s, min(s, dr - 1)] = 1.0
        arrays.append(a)
    arrays[0] = arrays[0] / np.sqrt(2)
    return mps.from_arrays(arrays, ortho_center=0)


def rand_chain(L, d, chi, seed):
    return mps.normalize(mps.canonicalize(mps.random_chain(L, d, chi, np.random.default_rng(seed)), 0))


def dense_probs(chain):
    return np.abs(mps.to_dense(chain)) ** 2


def config_index(config, d):
    return int(np.ravel_multi_index(config, (d,) * len(config)))


class TestChain:
    def test_structure_validation(self):
        with pytest.raises(ValueError):
            mps.from_arrays([np.ones((2, 2, 1))])
        with pytest.raises(ValueError):
            mps.from_arrays([np.ones((1, 2, 2)), np.ones((3, 2, 1))])

    def test_json_roundtrip(self):
        c = rand_chain(4, 2, 3, 0)
        back = mps.MpsChain.loads(c.dumps())
        assert back.ortho_center == 0
        np.testing.assert_array_equal(mps.to_dense(back), mps.to_dense(c))


class TestCanonicalize:
    @pytest.mark.parametrize("center", [0, 2, 4])
    def test_random_chain_preserves_state(self, center):
        raw = mps.random_chain(5, 2, 3, np.random.default_rng(1))
        c = mps.canonicalize(raw, center)
        before, after = mps.to_dense(raw), mps.to_dense(c)
        assert np.linalg.norm(before - after) <= 1e-12 * np.linalg.norm(before)
        assert max(mps.isometry_residuals(c)) < 1e-10

    def test_fixed_point(self):
        c = rand_chain(5, 2, 3, 2)
        again = mps.canonicalize(c, 0)
        np.testing.assert_allclose(mps.to_dense(again), mps.to_dense(c), atol=1e-12)
        assert max(mps.isometry_residuals(again)) < 1e-10

    def test_product_state(self):
        raw = mps.from_arrays([np.array([1.0, 2.0]).reshape(1, 2, 1)] * 3)
        c = mps.canonicalize(raw, 0)
        assert c.bond_dims == [1, 1]
        assert max(mps.isometry_residuals(c)) < 1e-12


class TestNormalize:
    def test_unchanged_when_normalized(self):
        c = rand_chain(4, 2, 2, 3)
        np.testing.assert_allclose(mps.to_dense(mps.normalize(c)), mps.to_dense(c), atol=1e-15)

    def test_dense_norm_one(self):
        c = mps.normalize(mps.canonicalize(mps.random_chain(5, 3, 4, np.random.default_rng(4)), 0))
        assert np.linalg.norm(mps.to_dense(c)) == pytest.approx(1.0, abs=1e-12)

    def test_scaled_center_same_distribution(self):
        c = rand_chain(4, 2, 2, 5)
        sites = list(c.sites)
        sites[0] = sites[0].scale(7.0)
        scaled = mps.MpsChain(tuple(sites), 0)
        np.testing.assert_allclose(dense_probs(mps.normalize(scaled)), dense_probs(c), atol=1e-14)

    def test_zero_norm(self):
        with pytest.raises(ZeroDivisionError):
            mps.normalize(mps.from_arrays([np.zeros((1, 2, 1))], 0))


class TestMarginal:
    def test_ghz(self):
        np.testing.assert_allclose(mps.site_marginal(chain_ghz(5).sites[0]), [0.5, 0.5])

    def test_product_zero(self):
        np.testing.assert_allclose(mps.site_marginal(mps.product_state([[1, 0]]).sites[0]), [1, 0])

    def test_random_matches_dense(self):
        c = rand_chain(6, 2, 4, 6)
        p = dense_probs(c).reshape(2, -1).sum(axis=1)
        np.testing.assert_allclose(mps.site_marginal(c.sites[0]), p, atol=1e-10)

    def test_non_unitary_basis(self):
        with pytest.raises(ValueError):
            mps.site_marginal(chain_ghz(2).sites[0], np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestSample:
    def test_product_state(self):
        c = mps.product_state([[0, 1], [1, 0], [0, 1]])
        for seed in range(5):
            s = mps.sample(c, np.random.default_rng(seed))
            assert s.config == (1, 0, 1) and s.prob == pytest.approx(1.0)

    def test_ghz(self):
        c = chain_ghz(6)
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(50):
            s = mps.sample(c, rng)
            assert s.config in {(0,) * 6, (1,) * 6}
            assert s.prob == pytest.approx(0.5, abs=1e-14)
            seen.add(s.config)
        assert len(seen) == 2

    def test_prob_matches_dense_and_chain_rule(self):
        c = rand_chain(6, 2, 4, 7)
        p = dense_probs(c)
        rng = np.random.default_rng(1)
        for _ in range(100):
            s = mps.sample(c, rng)
            assert abs(s.prob - p[config_index(s.config, 2)]) <= 1e-10 * max(p[config_index(s.config, 2)], 1e-300)
            assert np.prod(s.conditionals) == pytest.approx(s.prob, rel=1e-12)

    def test_cursor_keeps_canonical_form(self):
        c = rand_chain(5, 2, 3, 8)
        cur = mps.MpsCursor(c.sites)
        for s in (1, 0, 1, 1):
            cur = cur.advance(s)
            assert cur.center.norm() == pytest.approx(1.0, abs=1e-10)
            assert np.sum(cur.probs) == pytest.approx(1.0, abs=1e-10)

    def test_requires_canonical_normalized(self):
        raw = mps.random_chain(3, 2, 2, np.random.default_rng(0))
        with pytest.raises(ValueError):
            mps.sample(raw, np.random.default_rng(0))
        c = mps.canonicalize(raw, 0)
        with pytest.raises(ValueError):
            mps.sample(c, np.random.default_rng(0))

    def test_zero_branch_guard(self):
        cur = mps.MpsCursor(mps.product_state([[1, 0]]).sites)
        with pytest.raises(ZeroProbabilityError):
            cur.advance(1)

    def test_empirical_convergence(self):
        c = rand_chain(6, 2, 4, 9)
        p = dense_probs(c)
        ref = {tuple(int(x) for x in np.unravel_index(i, (2,) * 6)): float(v) for i, v in enumerate(p) if v > 0}
        tree = SamplingTree(mps.MpsCursor(c.sites))
        ns = [1000, 10000, 100000]
        medians = []
        kls = {n: [] for n in ns}
        for trial in range(5):
            leaves = tree.walk(sample_uniforms(3, trial, 0, ns[-1], 6))
            configs = [tree.node(int(l)).config for l in leaves]
            for n in ns:
                kls[n].append(states.kl_divergence(states.empirical_table(configs[:n]), ref))
        medians = [np.median(kls[n]) for n in ns]
        slope = np.polyfit(np.log(ns), np.log(medians), 1)[0]
        assert -1.3 < slope < -0.7


class TestBasis:
    def test_rotated_marginals_match_dense(self):
        c = rand_chain(4, 2, 2, 10)
        h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        psi = mps.to_dense(c).reshape((2,) * 4)
        for ax in range(4):
            psi = np.moveaxis(np.tensordot(h, psi, axes=([1], [ax])), 0, ax)
        p_rot = np.abs(psi.reshape(-1)) ** 2
        rng = np.random.default_rng(2)
        for _ in range(40):
            s = mps.sample(c, rng, basis=h)
            assert s.prob == pytest.approx(p_rot[config_index(s.config, 2)], abs=1e-10)
        found = mps.top_k(c, 16, basis=h)
        for cfg, pr in zip(found.configs, found.probs):
            assert pr == pytest.approx(p_rot[config_index(cfg, 2)], abs=1e-10)
        first = mps.site_marginal(c.sites[0], h)
        np.testing.assert_allclose(first, p_rot.reshape(2, -1).sum(axis=1), atol=1e-10)

    def test_per_site_list(self):
        c = rand_chain(3, 2, 2, 11)
        x = np.array([[0, 1], [1, 0]])
        s_rot = mps.sample(c, np.random.default_rng(0), basis=[None, x, None])
        flip = [list(cfg) for cfg in [s_rot.config]][0]
        flip[1] = 1 - flip[1]
        assert s_rot.prob == pytest.approx(dense_probs(c)[config_index(flip, 2)], abs=1e-12)


class TestTopK:
    def test_product_state_fewer_than_k(self):
        found = mps.top_k(mps.product_state([[1, 0], [0, 1]]), 3)
        assert found.configs == [(0, 1)]
        assert found.probs == pytest.approx([1.0])

    def test_ghz(self):
        found = mps.top_k(chain_ghz(8), 2)
        assert found.as_table() == pytest.approx({(0,) * 8: 0.5, (1,) * 8: 0.5})

    def test_w_full_width(self):
        L = 5
        psi = np.zeros(2**L)
        for i in range(L):
            psi[1 << i] = 1 / np.sqrt(L)
        arrays = []
        rest = psi.reshape(1, -1)
        for _ in range(L - 1):
            chi = rest.shape[0]
            q, r = np.linalg.qr(rest.reshape(chi * 2, -1))
            arrays.append(q.reshape(chi, 2, -1))
            rest = r
        arrays.append(rest.reshape(rest.shape[0], 2, 1))
        c = mps.normalize(mps.canonicalize(mps.from_arrays(arrays), 0))
        found = mps.top_k(c, L)
        assert len(found) == L
        assert all(sum(cfg) == 1 for cfg in found.configs)
        np.testing.assert_allclose(found.probs, 1 / L, atol=1e-12)

    def test_random_probs_exact(self):
        c = rand_chain(6, 2, 4, 12)
        p = dense_probs(c)
        found = mps.top_k(c, 8)
        assert len(found) == 8
        assert all(a >= b for a, b in zip(found.probs, found.probs[1:]))
        for cfg, pr in zip(found.configs, found.probs):
            assert abs(pr - p[config_index(cfg, 2)]) < 1e-10
        assert sum(found.probs) <= 1 + 1e-10

    def test_k_one_is_greedy_argmax(self):
        c = rand_chain(5, 2, 3, 13)
        found = mps.top_k(c, 1)
        cur, cfg = mps.MpsCursor(c.sites), []
        while not cur.complete:
            s = int(np.argmax(cur.probs))
            cfg.append(s)
            cur = cur.advance(s)
        assert found.configs == [tuple(cfg)]

    def test_tie_break_lexicographic(self):
        rows, outs = mps.select_top_k(np.array([[0.25, 0.25], [0.25, 0.25]]), 3)
        assert list(zip(rows.tolist(), outs.tolist())) == [(0, 0), (0, 1), (1, 0)]

    def test_floor(self):
        rows, _ = mps.select_top_k(np.array([[0.5, 1e-16]]), 4)
        assert len(rows) == 1

    def test_matches_oracle_tie_break(self):
        # uniform state: every config ties, so both must return the first k lexicographically
        c = mps.product_state([[1, 1]] * 4)
        found = mps.top_k(c, 5)
        amps = np.full(16, 0.25, dtype=complex)
        oracle = states.oracle_top_k(states.DenseState(amps, (1, 4), 2), 5)
        assert found.configs == oracle.configs

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            mps.top_k(chain_ghz(2), 0)


def test_rotate_validates_unitary():
    t = DenseTensor(np.ones((1, 2, 1)), mps.SITE_LEGS)
    with pytest.raises(ValueError):
        mps.rotate(t, np.ones((2, 2)))
