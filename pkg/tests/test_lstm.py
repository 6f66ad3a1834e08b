import numpy as np
import pytest

from fincluster.fixtures import sinusoid_mixture_tensor
from fincluster.lstm import (
    AdamState,
    LstmError,
    LstmParams,
    LstmState,
    PARAM_FIELDS,
    TrainConfig,
    adam_update,
    encode,
    forward_sequence,
    init_params,
    load_params,
    loss_and_gradients,
    lstm_step,
    mse_loss,
    params_to_vector,
    save_params,
    train,
    vector_to_params,
)


def zero_params(hidden=3, n_features=7):
    rng = np.random.default_rng(0)
    params = init_params(hidden, n_features, rng)
    return vector_to_params(np.zeros(params_to_vector(params).size), params)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestLstmStep:
    def test_zero_parameter_fixed_point(self):
        params = zero_params()
        state = LstmState.zeros(1, params.hidden)
        new_state, z, x_hat = lstm_step(params, LstmState(c=state.c[0], h=state.h[0]),
                                        np.array([1.0, -2.0, 0.5, 0, 0, 0, 0]))
        assert np.all(new_state.c == 0.0)
        assert np.all(new_state.h == 0.0)
        assert z == 0.0
        assert np.all(x_hat == 0.0)

    def test_scalar_hand_evaluation(self):
        # y=1, F=2: every quantity is a scalar, evaluated by hand formulas.
        params = zero_params(hidden=1, n_features=2)
        params.w_g = np.array([[1.0, 0.5]])
        params.w_i = np.array([[0.3, -0.2]])
        params.w_f = np.array([[0.1, 0.4]])
        params.w_o = np.array([[-0.6, 0.2]])
        params.r_g = np.array([[0.25]])
        params.r_i = np.array([[-0.5]])
        params.r_f = np.array([[0.7]])
        params.r_o = np.array([[0.15]])
        params.b_g = np.array([0.05])
        params.b_i = np.array([0.1])
        params.b_f = np.array([-0.1])
        params.b_o = np.array([0.2])
        params.p_i = np.array([0.3])
        params.p_f = np.array([-0.4])
        params.p_o = np.array([0.5])
        params.w_z = np.array([2.0])
        params.b_z = np.asarray(0.25)
        params.w_r = np.array([1.5, -1.0])
        params.b_r = np.array([0.1, 0.2])

        x = np.array([0.8, -0.3])
        c_prev, h_prev = 0.4, -0.2

        g = np.tanh(1.0 * 0.8 + 0.5 * -0.3 + 0.25 * h_prev + 0.05)
        i = sigmoid(0.3 * 0.8 + -0.2 * -0.3 + -0.5 * h_prev + 0.3 * c_prev + 0.1)
        f = sigmoid(0.1 * 0.8 + 0.4 * -0.3 + 0.7 * h_prev + -0.4 * c_prev + -0.1)
        c_new = f * c_prev + i * g
        o = sigmoid(-0.6 * 0.8 + 0.2 * -0.3 + 0.15 * h_prev + 0.5 * c_new + 0.2)
        h_new = np.tanh(c_new) * o
        z = 2.0 * h_new + 0.25
        x_hat = z * np.array([1.5, -1.0]) + np.array([0.1, 0.2])

        state = LstmState(c=np.array([c_prev]), h=np.array([h_prev]))
        got_state, got_z, got_x_hat = lstm_step(params, state, x)
        assert got_state.c[0] == pytest.approx(c_new, abs=1e-15)
        assert got_state.h[0] == pytest.approx(h_new, abs=1e-15)
        assert got_z == pytest.approx(z, abs=1e-15)
        assert np.allclose(got_x_hat, x_hat, atol=1e-15)

    def test_two_calls_bit_identical(self):
        rng = np.random.default_rng(5)
        params = init_params(4, 7, rng)
        state = LstmState(c=rng.normal(size=4), h=rng.normal(size=4))
        x = rng.normal(size=7)
        s1, z1, r1 = lstm_step(params, LstmState(c=state.c.copy(), h=state.h.copy()), x)
        s2, z2, r2 = lstm_step(params, LstmState(c=state.c.copy(), h=state.h.copy()), x)
        assert np.array_equal(s1.c, s2.c)
        assert z1 == z2
        assert np.array_equal(r1, r2)

    def test_gate_ranges(self):
        from fincluster.lstm import _forward_cached

        rng = np.random.default_rng(6)
        params = init_params(5, 7, rng)
        for name in ("p_i", "p_f", "p_o", "b_g", "b_i", "b_f", "b_o"):
            setattr(params, name, rng.uniform(-1, 1, size=getattr(params, name).shape))
        cache = _forward_cached(params, rng.normal(size=(4, 10, 7)) * 3)
        for gate in ("i", "f", "o"):
            assert np.all(cache[gate] > 0.0) and np.all(cache[gate] < 1.0)
        assert np.all(cache["g"] > -1.0) and np.all(cache["g"] < 1.0)
        assert np.all(cache["h"] > -1.0) and np.all(cache["h"] < 1.0)


class TestForwardSequence:
    def test_single_step_equals_lstm_step(self):
        rng = np.random.default_rng(7)
        params = init_params(3, 7, rng)
        x = rng.normal(size=(1, 7))
        z_seq, r_seq = forward_sequence(params, x)
        _, z_one, r_one = lstm_step(params, LstmState.zeros(1, 3), x)
        assert z_seq[0, 0] == pytest.approx(float(z_one[0]), abs=0)
        assert np.array_equal(r_seq[0], r_one[0])

    def test_constant_input_no_recurrence_gives_constant_z(self):
        rng = np.random.default_rng(8)
        params = init_params(3, 7, rng)
        for name in ("r_g", "r_i", "r_f", "r_o", "p_i", "p_f", "p_o", "w_f"):
            setattr(params, name, np.zeros_like(getattr(params, name)))
        params.b_f = np.full(3, -50.0)  # forget gate ~0: cell state has no memory
        x = np.tile(np.array([0.3, -1.0, 0.5, 0.1, 0.0, 2.0, -0.4]), (6, 1))
        z, _ = forward_sequence(params, x)
        assert np.allclose(z, z[0, 0], atol=1e-12)

    def test_matches_manual_state_threading(self):
        rng = np.random.default_rng(9)
        params = init_params(4, 7, rng)
        x = rng.normal(size=(3, 7))
        z_seq, r_seq = forward_sequence(params, x)
        state = LstmState(c=np.zeros(4), h=np.zeros(4))
        for j in range(3):
            state, z, r = lstm_step(params, state, x[j])
            assert z_seq[j, 0] == pytest.approx(z, abs=0)
            assert np.array_equal(r_seq[j], r)


class TestMseLoss:
    def test_identical_zero(self):
        a = np.random.default_rng(1).normal(size=(2, 3, 7))
        assert mse_loss(a, a) == 0.0

    def test_constant_residual(self):
        a = np.zeros((2, 3, 7))
        assert mse_loss(a, a + 2.0) == 4.0

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 4, 7))
        b = rng.normal(size=(3, 4, 7))
        direct = sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
        assert mse_loss(a, b) == pytest.approx(direct, rel=1e-15)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(LstmError):
            mse_loss(np.zeros((2, 3, 7)), np.zeros((2, 3, 6)))


def finite_difference_gradients(params, batch, h=1e-5):
    vector = params_to_vector(params)
    grad = np.empty_like(vector)
    for idx in range(vector.size):
        plus = vector.copy()
        plus[idx] += h
        minus = vector.copy()
        minus[idx] -= h
        p_plus = vector_to_params(plus, params)
        p_minus = vector_to_params(minus, params)
        _, r_plus = forward_sequence(p_plus, batch)
        _, r_minus = forward_sequence(p_minus, batch)
        grad[idx] = (mse_loss(batch, r_plus) - mse_loss(batch, r_minus)) / (2 * h)
    return grad


class TestGradients:
    def test_zero_residual_zero_gradients(self):
        # With zero weights the reconstruction of a zero batch is exact.
        params = zero_params(hidden=2)
        batch = np.zeros((2, 3, 7))
        loss, grads = loss_and_gradients(params, batch)
        assert loss == 0.0
        for name in PARAM_FIELDS:
            assert np.all(grads[name] == 0.0)

    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(77)
        for _ in range(6):
            y = int(rng.integers(1, 5))
            j = int(rng.integers(1, 6))
            params = init_params(y, 7, rng)
            # random peepholes/biases so those paths carry signal too
            for name in ("p_i", "p_f", "p_o", "b_g", "b_i", "b_f", "b_o", "b_z", "b_r"):
                setattr(params, name, rng.uniform(-0.5, 0.5, size=getattr(params, name).shape))
            batch = rng.normal(size=(2, j, 7))
            _, analytic_dict = loss_and_gradients(params, batch)
            analytic = np.concatenate([np.ravel(analytic_dict[n]) for n in PARAM_FIELDS])
            numeric = finite_difference_gradients(params, batch)
            err = np.abs(analytic - numeric)
            tol = np.maximum(1e-8, 1e-4 * np.maximum(np.abs(analytic), np.abs(numeric)))
            assert np.all(err < tol)

    def test_bottleneck_bias_gradient_chain_rule(self):
        rng = np.random.default_rng(78)
        params = init_params(1, 7, rng)
        batch = rng.normal(size=(2, 4, 7))
        _, grads = loss_and_gradients(params, batch)
        _, x_hat = forward_sequence(params, batch)
        d_x_hat = 2.0 * (x_hat - batch) / batch.size
        dz = np.einsum("bjf,f->bj", d_x_hat, params.w_r)
        assert float(grads["b_z"]) == pytest.approx(float(dz.sum()), rel=1e-12)


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        rng = np.random.default_rng(80)
        params = init_params(2, 7, rng)
        before = params_to_vector(params).copy()
        grads = {n: np.zeros_like(getattr(params, n)) for n in PARAM_FIELDS}
        state = AdamState.zeros(params)
        adam_update(params, grads, state, TrainConfig(hidden=2))
        assert np.array_equal(params_to_vector(params), before)

    def test_constant_gradient_matches_scalar_simulation(self):
        config = TrainConfig(hidden=1, learning_rate=0.01)
        params = zero_params(hidden=1, n_features=7)
        state = AdamState.zeros(params)
        g = 0.37
        grads = {n: np.full_like(getattr(params, n), g) for n in PARAM_FIELDS}

        # independent scalar Adam simulation
        theta, m, v = 0.0, 0.0, 0.0
        trajectory = []
        for t in range(1, 201):
            m = config.beta1 * m + (1 - config.beta1) * g
            v = config.beta2 * v + (1 - config.beta2) * g * g
            m_hat = m / (1 - config.beta1**t)
            v_hat = v / (1 - config.beta2**t)
            theta -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
            trajectory.append(theta)

        steps = []
        for t in range(200):
            prev = float(params.b_z)
            adam_update(params, grads, state, config)
            steps.append(float(params.b_z) - prev)
            assert float(params.b_z) == pytest.approx(trajectory[t], rel=1e-12, abs=1e-15)
        # after bias correction saturates each step is ~ -lr * sign(g)
        assert steps[-1] == pytest.approx(-config.learning_rate, rel=1e-3)

    def test_same_seed_identical_trajectories(self):
        data = sinusoid_mixture_tensor(n_companies=6, n_periods=8, seed=4)
        config = TrainConfig(hidden=4, epochs=3, batch_size=2, seed=123)
        p1, h1 = train(data, config)
        p2, h2 = train(data, TrainConfig(hidden=4, epochs=3, batch_size=2, seed=123))
        assert h1 == h2
        assert np.array_equal(params_to_vector(p1), params_to_vector(p2))


class TestTrain:
    def test_zero_learning_rate_constant_history(self):
        data = sinusoid_mixture_tensor(n_companies=6, n_periods=8, seed=3)
        config = TrainConfig(hidden=4, epochs=4, batch_size=4, learning_rate=0.0, seed=1)
        params, history = train(data, config)
        assert len(history) == 4
        assert all(h == history[0] for h in history)
        fresh = init_params(4, 7, np.random.default_rng(1))
        assert np.array_equal(params_to_vector(params), params_to_vector(fresh))

    def test_sinusoid_fixture_halves_loss(self):
        data = sinusoid_mixture_tensor(n_companies=12, n_periods=20, seed=0)
        config = TrainConfig(hidden=16, epochs=30, batch_size=4, learning_rate=0.01, seed=0)
        _, history = train(data, config)
        assert history[-1] < 0.5 * history[0]

    def test_history_length_equals_epochs(self):
        data = sinusoid_mixture_tensor(n_companies=5, n_periods=6, seed=2)
        _, history = train(data, TrainConfig(hidden=3, epochs=7, batch_size=2, seed=2))
        assert len(history) == 7

    def test_partial_last_batch_is_trained(self):
        # 5 companies with batch size 4: the second batch holds one company.
        data = sinusoid_mixture_tensor(n_companies=5, n_periods=6, seed=6)
        config = TrainConfig(hidden=3, epochs=2, batch_size=4, learning_rate=0.01, seed=6)
        params, _ = train(data, config)
        untouched = init_params(3, 7, np.random.default_rng(6))
        assert not np.array_equal(params_to_vector(params), params_to_vector(untouched))


class TestEncode:
    def test_full_scale_shapes(self):
        rng = np.random.default_rng(90)
        params = init_params(8, 7, rng)
        data = rng.normal(size=(28, 41, 7))
        z = encode(params, data)
        assert z.shape == (28, 41, 1)

    def test_identical_companies_identical_latents(self):
        rng = np.random.default_rng(91)
        params = init_params(4, 7, rng)
        row = rng.normal(size=(1, 9, 7))
        data = np.vstack([row, row])
        z = encode(params, data)
        assert np.array_equal(z[0], z[1])

    def test_stable_across_calls(self):
        rng = np.random.default_rng(92)
        params = init_params(4, 7, rng)
        data = rng.normal(size=(3, 5, 7))
        assert np.array_equal(encode(params, data), encode(params, data))


class TestCheckpoint:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(93)
        params = init_params(5, 7, rng)
        save_params(params, tmp_path / "ckpt.json", config=TrainConfig(hidden=5, seed=9))
        again = load_params(tmp_path / "ckpt.json")
        assert np.array_equal(params_to_vector(again), params_to_vector(params))
        assert again.hidden == 5


class TestLatentSeries:
    def test_encode_series_carries_labels_through_dtw(self):
        from fincluster.dtw import pairwise_matrix
        from fincluster.lstm import encode_series
        from fincluster.panel import Quarter, quarter_span
        from fincluster.ratios import RatioTensor

        rng = np.random.default_rng(94)
        tensor = RatioTensor(
            companies=["X", "Y", "Z"],
            periods=quarter_span(Quarter(2013, 1), Quarter(2014, 2)),
            values=rng.normal(size=(3, 6, 7)),
        )
        params = init_params(4, 7, rng)
        latent = encode_series(params, tensor)
        assert latent.z.shape == (3, 6, 1)
        assert latent.companies == ["X", "Y", "Z"]
        matrix = pairwise_matrix(latent)
        assert matrix.labels == ["X", "Y", "Z"]
        direct = pairwise_matrix(latent.z, labels=["X", "Y", "Z"])
        assert np.array_equal(matrix.values, direct.values)

    def test_train_accepts_labeled_tensor(self):
        from fincluster.panel import Quarter, quarter_span
        from fincluster.ratios import RatioTensor

        rng = np.random.default_rng(95)
        tensor = RatioTensor(
            companies=["X", "Y"],
            periods=quarter_span(Quarter(2013, 1), Quarter(2013, 4)),
            values=rng.normal(size=(2, 4, 7)),
        )
        config = TrainConfig(hidden=3, epochs=2, batch_size=2, seed=4)
        _, from_tensor = train(tensor, config)
        _, from_array = train(tensor.values, config)
        assert from_tensor == from_array
