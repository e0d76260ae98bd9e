"""RBM unit tests with enumeration and re-evaluation oracles."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adbn import CdConfig, Rbm, cd_train


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def enum_free_energy(m, v):
    """-log sum_h exp(-E(v, h)) by brute force over every hidden state."""
    total = 0.0
    for h in itertools.product([0, 1], repeat=m.n_hidden):
        total += math.exp(-m.energy(v, np.array(h, dtype=float)))
    return -math.log(total)


def random_rbm(rng, n_visible, n_hidden, scale=1.0):
    m = Rbm(n_visible, n_hidden, seed=int(rng.integers(1 << 30)))
    m.W += rng.normal(0, scale, size=(n_visible, n_hidden))
    m.b += rng.normal(0, scale, size=n_visible)
    m.c += rng.normal(0, scale, size=n_hidden)
    return m


class TestInit:
    def test_shapes_and_scale(self):
        m = Rbm(4, 2, seed=7)
        assert m.W.shape == (4, 2)
        assert np.abs(m.W).max() < 0.05
        assert (m.b == 0).all() and (m.c == 0).all()

    def test_deterministic(self):
        a, b = Rbm(4, 2, seed=7), Rbm(4, 2, seed=7)
        assert (a.W == b.W).all() and (a.b == b.b).all() and (a.c == b.c).all()

    def test_minimal_model(self):
        m = Rbm(1, 1, seed=0)
        assert m.W.shape == (1, 1)

    @pytest.mark.parametrize("nv,nh", [(0, 2), (2, 0), (0, 0)])
    def test_zero_dimensions_rejected(self, nv, nh):
        with pytest.raises(ValueError):
            Rbm(nv, nh, seed=0)


class TestEnergy:
    def test_all_zero_state(self):
        m = random_rbm(np.random.default_rng(0), 3, 2)
        assert m.energy(np.zeros(3), np.zeros(2)) == 0.0

    def test_bias_only(self):
        m = Rbm(2, 1, seed=0)
        m.W[:] = 0.0
        m.b[:] = [1.0, 1.0]
        m.c[:] = 0.0
        assert m.energy([1, 1], [0]) == -2.0

    def test_matches_term_by_term_oracle(self):
        rng = np.random.default_rng(42)
        m = random_rbm(rng, 3, 2)
        v, h = np.array([1.0, 0.0, 1.0]), np.array([1.0, 1.0])
        expected = -sum(m.b[i] * v[i] for i in range(3))
        expected -= sum(m.c[j] * h[j] for j in range(2))
        expected -= sum(v[i] * m.W[i, j] * h[j] for i in range(3) for j in range(2))
        assert m.energy(v, h) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        m = Rbm(3, 2, seed=0)
        with pytest.raises(ValueError):
            m.energy([1, 0], [1, 0])
        with pytest.raises(ValueError):
            m.energy([1, 0, 1], [1])


class TestFreeEnergy:
    def test_enumeration_identity(self):
        rng = np.random.default_rng(3)
        m = random_rbm(rng, 4, 2)
        for _ in range(10):
            v = rng.integers(0, 2, size=4).astype(float)
            assert m.free_energy(v) == pytest.approx(enum_free_energy(m, v), abs=1e-12)

    def test_closed_form_with_zero_weights(self):
        m = Rbm(3, 5, seed=1)
        m.W[:] = 0.0
        m.c[:] = 0.0
        m.b[:] = [0.5, -1.0, 2.0]
        v = np.array([1.0, 1.0, 0.0])
        assert m.free_energy(v) == pytest.approx(-(m.b @ v) - 5 * math.log(2), abs=1e-12)

    def test_hidden_bias_shift_matches_analytic_amount(self):
        rng = np.random.default_rng(9)
        m = random_rbm(rng, 4, 3)
        v = np.array([1.0, 0.0, 1.0, 1.0])
        delta = 1e-6
        j = 1
        pre = m.c[j] + v @ m.W[:, j]
        before = m.free_energy(v)
        m.c[j] += delta
        after = m.free_energy(v)
        # dF/dc_j = -sigmoid(pre); the shift lowers F for an active input
        assert after < before
        assert (after - before) / delta == pytest.approx(-sigmoid(pre), abs=1e-5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(1, 8), st.integers(1, 12))
    def test_identity_property(self, seed, nv, nh):
        rng = np.random.default_rng(seed)
        m = random_rbm(rng, nv, nh)
        v = rng.integers(0, 2, size=nv).astype(float)
        f = m.free_energy(v)
        expected = enum_free_energy(m, v)
        assert f == pytest.approx(expected, rel=1e-10, abs=1e-10)


class TestConditionals:
    def test_symmetric_point(self):
        m = Rbm(3, 4, seed=0)
        m.W[:] = 0.0
        assert m.prob_h_given_v(np.zeros(3)) == pytest.approx(np.full(4, 0.5))
        m.b[:] = 0.0
        assert m.prob_v_given_h(np.zeros(4)) == pytest.approx(np.full(3, 0.5))

    def test_saturation(self):
        m = Rbm(2, 2, seed=0)
        m.W[:] = 0.0
        m.c[:] = [30.0, -30.0]
        p = m.prob_h_given_v(np.zeros(2))
        assert p[0] == pytest.approx(1.0, abs=1e-9)
        assert p[1] == pytest.approx(0.0, abs=1e-9)
        m.b[:] = [30.0, 30.0]
        assert m.prob_v_given_h(np.zeros(2)) == pytest.approx(np.ones(2), abs=1e-9)

    def test_matches_sigmoid_oracle(self):
        rng = np.random.default_rng(5)
        m = random_rbm(rng, 4, 3)
        v = rng.random(4)
        p = m.prob_h_given_v(v)
        for j in range(3):
            assert p[j] == pytest.approx(sigmoid(m.c[j] + v @ m.W[:, j]), abs=1e-12)
        h = rng.random(3)
        q = m.prob_v_given_h(h)
        for i in range(4):
            assert q[i] == pytest.approx(sigmoid(m.b[i] + m.W[i] @ h), abs=1e-12)

    def test_length_mismatch(self):
        m = Rbm(3, 2, seed=0)
        with pytest.raises(ValueError):
            m.prob_h_given_v([0.5, 0.5])
        with pytest.raises(ValueError):
            m.prob_v_given_h([0.5])


class TestReconstructionError:
    def test_saturated_autoencoder(self):
        m = Rbm(4, 4, seed=0)
        m.W[:] = 40.0 * np.eye(4)
        m.b[:] = -20.0
        m.c[:] = -20.0
        data = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float)
        assert m.reconstruction_error(data) < 1e-6

    def test_zero_model_is_half(self):
        m = Rbm(4, 3, seed=0)
        m.W[:] = 0.0
        data = np.array([[1, 0, 1, 0], [0, 1, 1, 1]], dtype=float)
        assert m.reconstruction_error(data) == 0.5

    def test_matches_hand_rolled_oracle(self):
        rng = np.random.default_rng(8)
        m = random_rbm(rng, 5, 3)
        data = rng.integers(0, 2, size=(6, 5)).astype(float)
        h = np.array([[sigmoid(m.c[j] + row @ m.W[:, j]) for j in range(3)]
                      for row in data])
        recon = np.array([[sigmoid(m.b[i] + m.W[i] @ hrow) for i in range(5)]
                          for hrow in h])
        assert m.reconstruction_error(data) == pytest.approx(
            np.abs(data - recon).mean(), abs=1e-12)


class TestCdTrain:
    def test_orthogonal_patterns_anchor(self):
        data = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float)
        m = Rbm(4, 4, seed=3)
        report = cd_train(m, data, CdConfig(k=1, learning_rate=0.1, batch_size=2,
                                            epochs=500, seed=5))
        assert report.reconstruction_errors[-1] < 0.05

    def test_zero_epochs_no_change(self):
        m = Rbm(4, 2, seed=1)
        W0, b0, c0 = m.W.copy(), m.b.copy(), m.c.copy()
        report = cd_train(m, np.eye(4), CdConfig(epochs=0, seed=0))
        assert report.reconstruction_errors == []
        assert (m.W == W0).all() and (m.b == b0).all() and (m.c == c0).all()

    def test_deterministic_per_seed(self):
        data = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0]], dtype=float)
        runs = []
        for _ in range(2):
            m = Rbm(4, 3, seed=2)
            cd_train(m, data, CdConfig(epochs=40, batch_size=2, seed=9))
            runs.append((m.W.copy(), m.b.copy(), m.c.copy()))
        for a, b in zip(*runs):
            assert (a == b).all()

    def test_data_out_of_range_rejected(self):
        m = Rbm(2, 2, seed=0)
        with pytest.raises(ValueError):
            cd_train(m, np.array([[1.5, 0.0]]), CdConfig(epochs=1))

    def test_dimension_mismatch_rejected(self):
        m = Rbm(3, 2, seed=0)
        with pytest.raises(ValueError):
            cd_train(m, np.eye(4), CdConfig(epochs=1))

    def test_non_finite_aborts_with_diagnostic(self):
        m = Rbm(2, 2, seed=0)
        m.b[0] = np.nan
        with pytest.raises(FloatingPointError, match="non-finite"):
            cd_train(m, np.array([[1.0, 0.0]]), CdConfig(epochs=1))


class TestGradients:
    def test_free_energy_grad_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        m = random_rbm(rng, 5, 3, scale=0.5)
        data = rng.integers(0, 2, size=(7, 5)).astype(float)
        dW, db, dc = m.free_energy_grad(data)
        h = 1e-6

        def mean_f():
            return float(np.mean(m.free_energy(data)))

        for arr, grad in ((m.W, dW), (m.b, db), (m.c, dc)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                old = arr[idx]
                arr[idx] = old + h
                up = mean_f()
                arr[idx] = old - h
                down = mean_f()
                arr[idx] = old
                assert (up - down) / (2 * h) == pytest.approx(grad[idx], abs=2e-5)


class TestStructuralEdits:
    def test_add_hidden_keeps_old_outputs_bitwise(self):
        rng = np.random.default_rng(4)
        m = random_rbm(rng, 6, 3)
        V = rng.random((20, 6))
        before = m.prob_h_given_v(V)
        m.add_hidden(rng.normal(size=6), 0.3)
        after = m.prob_h_given_v(V)
        assert (after[:, :3] == before).all()

    def test_remove_hidden_shifts_down(self):
        rng = np.random.default_rng(6)
        m = random_rbm(rng, 4, 3)
        col1, c1 = m.W[:, 1].copy(), m.c[1]
        m.remove_hidden(0)
        assert m.n_hidden == 2
        assert (m.W[:, 0] == col1).all() and m.c[0] == c1

    def test_last_neuron_protected(self):
        m = Rbm(3, 1, seed=0)
        with pytest.raises(ValueError):
            m.remove_hidden(0)

    def test_add_visible_extends_rows(self):
        rng = np.random.default_rng(7)
        m = random_rbm(rng, 3, 2)
        W0 = m.W.copy()
        m.add_visible([0.5, -0.5], 0.1)
        assert m.n_visible == 4
        assert (m.W[:3] == W0).all()
        assert (m.W[3] == [0.5, -0.5]).all()
