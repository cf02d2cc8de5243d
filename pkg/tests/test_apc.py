"""
Tests for the LSTM layer and the APC model.
"""

import numpy as np
import pytest
from scipy.special import expit

from src.data import gen_synthetic_corpus, pad_batch
from src.errors import ContractError, DimensionError, EmptyInputError, ShiftError
from src.frontend import speaker_normalize
from src.models.apc import (
    ApcModel,
    apc_forward,
    apc_loss,
    apc_objective,
    copy_baseline_loss,
    evaluate_apc,
    extract_apc,
    masked_l1,
    train_apc,
)
from src.models.lstm import LstmLayer, lstm_forward
from src.models.schema import ApcTrainConfig, FeatureSequence, SynthConfig
from src.numerics import ParamStore, grad_check


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_model():
    """Three float64 layers with equal widths above the first."""
    return ApcModel.create(input_dim=3, hidden_size=4, num_layers=3, seed=1, precision="float64")


@pytest.fixture
def learnable_corpus():
    """Noisy, unsmoothed synthetic frames where averaging beats copying."""
    cfg = SynthConfig(
        n_speakers=4,
        n_phones=4,
        utterances_per_speaker=8,
        frames_per_utterance=40,
        feature_dim=8,
        phone_dwell=10.0,
        noise_sigma=1.0,
        alpha=0.0,
        seed=0,
    )
    normalized, _ = speaker_normalize(gen_synthetic_corpus(cfg).utterances)
    return normalized


def constant_corpus(value, count=8, steps=20):
    return [
        FeatureSequence(utterance_id=f"c{i}", speaker_id="s", frames=np.tile(value, (steps, 1)).astype(np.float32))
        for i in range(count)
    ]


def test_lstm_zero_fixed_point():
    """Test all-zero weights and inputs give all-zero outputs."""
    store = ParamStore("float64")
    layer = LstmLayer.create(store, "l", 3, 5, np.random.default_rng(0))
    for name in store.names():
        store[name][...] = 0.0
    outputs, _ = lstm_forward(layer, np.zeros((7, 3)))
    assert outputs.shape == (7, 5)
    assert not outputs.any()


def test_lstm_matches_hand_recurrence():
    """Test a T=3, H=1 layer against a scalar step-by-step simulation."""
    store = ParamStore("float64")
    layer = LstmLayer.create(store, "l", 1, 1, np.random.default_rng(0))
    wx = np.array([0.1, -0.2, 0.3, 0.05])
    wh = np.array([0.2, 0.1, -0.1, 0.3])
    b = np.array([0.0, 1.0, 0.1, -0.1])
    store["l.wx"][...] = wx[:, None]
    store["l.wh"][...] = wh[:, None]
    store["l.bias"][...] = b
    x = np.array([0.5, -1.0, 2.0])

    h, c, expected = 0.0, 0.0, []
    for value in x:
        a = wx * value + wh * h + b
        i, f, g, o = expit(a[0]), expit(a[1]), np.tanh(a[2]), expit(a[3])
        c = f * c + i * g
        h = o * np.tanh(c)
        expected.append(h)

    outputs, _ = lstm_forward(layer, x[:, None])
    assert np.allclose(outputs[:, 0], expected, atol=1e-10)


def test_lstm_forget_bias_initialized_to_one():
    """Test the forget gate slice of the bias starts at 1 and the rest at 0."""
    store = ParamStore("float64")
    LstmLayer.create(store, "l", 2, 3, np.random.default_rng(0))
    assert np.array_equal(store["l.bias"], [0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0])
    assert np.all(np.abs(store["l.wx"]) <= 1 / np.sqrt(3))


def test_lstm_rejects_wrong_width():
    """Test input width mismatches raise a dimension error."""
    store = ParamStore("float64")
    layer = LstmLayer.create(store, "l", 2, 3, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        lstm_forward(layer, np.zeros((4, 5)))


def test_apc_forward_shapes(small_model, rng):
    """Test y is T x D and one hidden state per layer is kept."""
    x = rng.standard_normal((9, 3))
    y, hiddens = apc_forward(small_model, x)
    assert y.shape == (9, 3)
    assert [h.shape for h in hiddens] == [(9, 4)] * 3

    single = ApcModel.create(input_dim=3, hidden_size=4, num_layers=1, precision="float64")
    assert len(apc_forward(single, x)[1]) == 1


def test_apc_is_causal(small_model, rng):
    """Test perturbing x_t leaves predictions before t bitwise unchanged."""
    x = rng.standard_normal((10, 3))
    y, _ = apc_forward(small_model, x)
    perturbed = x.copy()
    perturbed[6] += 1.0
    y2, _ = apc_forward(small_model, perturbed)
    assert np.array_equal(y[:6], y2[:6])
    assert not np.array_equal(y[6:], y2[6:])


def test_residual_layer_with_zero_weights_is_transparent(small_model, rng):
    """Test a zeroed layer >= 2 passes its input through exactly."""
    for suffix in ("wx", "wh", "bias"):
        small_model.store[f"lstm.1.{suffix}"][...] = 0.0
    _, hiddens = apc_forward(small_model, rng.standard_normal((6, 3)))
    assert np.array_equal(hiddens[1], hiddens[0])
    assert not small_model.has_residual(0)
    assert small_model.has_residual(1)


def test_apc_loss_hand_example():
    """Test the shifted L1 sum on a hand-computed example."""
    x = np.array([[1.0], [2.0], [4.0]])
    y = np.array([[1.5], [3.0], [0.0]])
    assert apc_loss(x, y, 1) == pytest.approx(1.5)
    assert apc_loss(x, np.roll(x, -1, axis=0), 1) == 0.0


def test_apc_loss_matches_naive_loop(rng):
    """Test the vectorized loss against a double loop."""
    x = rng.standard_normal((12, 5))
    y = rng.standard_normal((12, 5))
    naive = sum(abs(x[i + 3, d] - y[i, d]) for i in range(12 - 3) for d in range(5))
    assert apc_loss(x, y, 3) == pytest.approx(naive, abs=1e-6)


def test_apc_loss_rejects_bad_shift(rng):
    """Test n outside [1, T) raises a shift error."""
    x = rng.standard_normal((4, 2))
    with pytest.raises(ShiftError):
        apc_loss(x, x, 4)
    with pytest.raises(ShiftError):
        apc_loss(x, x, 0)


def test_l1_subgradient_at_zero_is_zero():
    """Test sign(0) = 0 in the masked L1 gradient."""
    x = np.array([[[1.0], [2.0], [3.0]]])
    y = np.array([[[2.0], [0.0], [9.0]]])
    total, count, grad = masked_l1(x, y, 1)
    assert total == 3.0
    assert count == 2
    assert grad[0, :, 0].tolist() == [0.0, -1.0, 0.0]


@pytest.mark.parametrize("num_layers", [1, 2, 3])
def test_apc_gradient_check(num_layers, rng):
    """Test the hand-written backward pass against finite differences."""
    model = ApcModel.create(input_dim=3, hidden_size=4, num_layers=num_layers, seed=num_layers, precision="float64")
    x = rng.standard_normal((2, 6, 3))
    lengths = np.array([6, 4])

    def loss_fn(store):
        loss, _ = apc_objective(model, x, 2, lengths, normalize=False)
        return loss

    assert grad_check(loss_fn, model.store, probe_count=50, eps=1e-5) < 1e-4


def test_padding_does_not_change_the_loss(small_model, rng):
    """Test padded batch and per-utterance losses agree and padding gets no gradient."""
    sequences = [
        FeatureSequence(utterance_id=f"u{i}", speaker_id="s", frames=rng.standard_normal((length, 3)))
        for i, length in enumerate([8, 5, 3])
    ]
    batch = pad_batch(sequences)
    padded, _ = apc_objective(small_model, batch.features, 2, batch.lengths, normalize=False)
    batched_grads = {name: grad.copy() for name, grad in small_model.store.grads.items()}

    small_model.store.zero_grad()
    separate = 0.0
    for sequence in sequences:
        separate += apc_objective(small_model, sequence.frames[None], 2, normalize=False)[0]
    assert padded == pytest.approx(separate, abs=1e-6)
    for name, grad in small_model.store.grads.items():
        assert np.allclose(batched_grads[name], grad, atol=1e-6)


def test_extract_layers(small_model, rng):
    """Test layer taps, the "all" concatenation, purity and range checks."""
    x = rng.standard_normal((5, 3))
    _, hiddens = apc_forward(small_model, x)
    assert np.array_equal(extract_apc(small_model, x, 3), hiddens[-1])
    assert np.array_equal(extract_apc(small_model, x), hiddens[-1])
    assert np.array_equal(extract_apc(small_model, x, 1), extract_apc(small_model, x, 1))
    assert extract_apc(small_model, x, "all").shape == (5, 12)
    with pytest.raises(ContractError):
        extract_apc(small_model, x, 4)
    with pytest.raises(ContractError):
        extract_apc(small_model, x, 0)


def test_default_width_is_512():
    """Test default hidden size and regression head shape."""
    model = ApcModel.create(input_dim=80)
    assert extract_apc(model, np.zeros((2, 80), dtype=np.float32)).shape == (2, 512)
    assert model.store["regression.weight"].shape == (80, 512)


def test_train_rejects_short_or_empty_corpus():
    """Test training preconditions name the offending utterance."""
    cfg = ApcTrainConfig(n_steps=3, hidden_size=4, num_layers=1, epochs=1)
    with pytest.raises(EmptyInputError):
        train_apc([], cfg)
    short = [FeatureSequence(utterance_id="tiny", speaker_id="s", frames=np.zeros((3, 2)))]
    with pytest.raises(ShiftError, match="tiny"):
        train_apc(short, cfg)


def test_train_constant_corpus_learns_the_constant():
    """Test a constant signal is learned almost perfectly."""
    value = np.array([0.5, -0.3, 0.8])
    corpus = constant_corpus(value)
    cfg = ApcTrainConfig(n_steps=1, num_layers=1, hidden_size=8, epochs=100, batch_size=4, lr=1e-2, seed=0)
    result = train_apc(corpus, cfg)
    assert result.history[-1] < 0.2 * result.history[0]
    y, _ = apc_forward(result.model, corpus[0].frames)
    assert np.abs(y[5:] - value).mean() < 0.1


def test_training_is_deterministic(learnable_corpus):
    """Test the same seed reproduces the loss history bitwise."""
    cfg = ApcTrainConfig(n_steps=2, num_layers=2, hidden_size=8, epochs=2, batch_size=8, seed=5)
    first = train_apc(learnable_corpus, cfg).history
    second = train_apc(learnable_corpus, cfg).history
    assert first == second


def test_training_beats_copy_baseline(learnable_corpus):
    """Test APC(n=2) ends below the copy predictor y_i = x_i."""
    cfg = ApcTrainConfig(n_steps=2, num_layers=1, hidden_size=32, epochs=20, batch_size=8, lr=3e-3, seed=0)
    result = train_apc(learnable_corpus, cfg)
    baseline = copy_baseline_loss(learnable_corpus, 2)
    assert result.history[-1] < result.history[0]
    assert result.history[-1] < baseline
    assert evaluate_apc(result.model, learnable_corpus, 2) < baseline
