"""
Directional checks on the default synthetic corpus.

Every test here trains full-size desk models and is marked slow; run them
with `pytest -m slow`.
"""

import pytest

from src.data import gen_synthetic_corpus
from src.frontend import corpus_normalize, speaker_normalize
from src.models.apc import copy_baseline_loss, evaluate_apc, extract_apc, train_apc
from src.models.cpc import extract_cpc, train_cpc
from src.models.schema import ApcTrainConfig, CpcTrainConfig, CpcVariant, ProbeConfig, SynthConfig
from src.probes import evaluate_phone_probe, evaluate_speaker_verification

pytestmark = pytest.mark.slow

# matched budget for the APC/CPC comparison; at 10 epochs CPC still leads
EPOCHS = 30


@pytest.fixture(scope="module")
def default_corpus():
    """Default synthetic corpus: per-speaker normalized for training, corpus-wide for speaker probes."""
    synthetic = gen_synthetic_corpus(SynthConfig())
    normalized, _ = speaker_normalize(synthetic.utterances)
    speaker_probe, _ = corpus_normalize(synthetic.utterances)
    return normalized, speaker_probe


@pytest.fixture(scope="module")
def one_layer_apc(default_corpus):
    normalized, _ = default_corpus
    cfg = ApcTrainConfig(num_layers=1, hidden_size=64, n_steps=2, epochs=EPOCHS)
    return train_apc(normalized, cfg).model


def represent(corpus, extract):
    return [s.with_frames(extract(s.frames)) for s in corpus]


def test_apc_features_beat_surface_features_for_phones(default_corpus, one_layer_apc):
    """Test a linear probe gains at least 5 points of frame accuracy on APC features."""
    normalized, _ = default_corpus
    surface = evaluate_phone_probe(normalized, ProbeConfig()).test_accuracy
    learned = evaluate_phone_probe(represent(normalized, lambda x: extract_apc(one_layer_apc, x)), ProbeConfig())
    assert learned.test_accuracy >= surface + 0.05


def test_apc_features_match_cpc_context_for_phones(default_corpus, one_layer_apc):
    """Test APC phone accuracy is at least that of n9same context features under the same budget."""
    normalized, _ = default_corpus
    cpc_cfg = CpcTrainConfig(
        variant=CpcVariant.N9SAME, n_steps=2, hidden_size=64, encoder_width=64, epochs=EPOCHS
    )
    cpc = train_cpc(normalized, cpc_cfg).model
    apc_accuracy = evaluate_phone_probe(
        represent(normalized, lambda x: extract_apc(one_layer_apc, x)), ProbeConfig()
    ).test_accuracy
    cpc_accuracy = evaluate_phone_probe(
        represent(normalized, lambda x: extract_cpc(cpc, x, "context")), ProbeConfig()
    ).test_accuracy
    assert apc_accuracy >= cpc_accuracy


def test_trained_apc_beats_copy_baseline(default_corpus, one_layer_apc):
    """Test the trained model predicts 2 frames ahead better than copying the current frame."""
    normalized, _ = default_corpus
    assert evaluate_apc(one_layer_apc, normalized, 2) < copy_baseline_loss(normalized, 2)


def test_lower_layer_keeps_at_least_as_much_speaker_information(default_corpus):
    """Test layer-1 EER of a 3-layer APC is no worse than layer-3 EER."""
    normalized, speaker_probe = default_corpus
    model = train_apc(normalized, ApcTrainConfig(num_layers=3, hidden_size=64, n_steps=2, epochs=EPOCHS)).model
    eer = {
        layer: evaluate_speaker_verification(represent(speaker_probe, lambda x: extract_apc(model, x, layer))).eer.eer
        for layer in (1, 3)
    }
    assert eer[1] < 0.25
    assert eer[1] <= eer[3]
